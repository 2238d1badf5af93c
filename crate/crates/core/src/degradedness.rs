//! Finite channels, stochastic degradedness (garbling) and the Blackwell
//! ordering of MMSEs.
//!
//! `W₂` is a garbling of `W₁` when `W₂ = W₁ G` for some row-stochastic `G`.
//! Existence of `G` is decided by the linear program
//!
//! ```text
//! minimize t  s.t.  -t ≤ (W₁G − W₂)[x, z] ≤ t,  G ≥ 0,  G·1 = 1
//! ```
//!
//! and the garbling is accepted when the residual recomputed from the
//! returned (re-normalised) `G` is strictly below the feasibility tolerance.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{conditional_expectation, mmse_exact};
use crate::numeric::{compensated_sum, squared_distance, vector_key};
use crate::prob::{Atom, FiniteJoint, NORMALIZATION_TOL};

pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-7;
/// Slack allowed by the Blackwell ordering check.
pub const ORDERING_TOL: f64 = 1e-10;

/// Row-stochastic matrix `P(output | input)` over finite alphabets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    input_support: Vec<Vec<f64>>,
    output_support: Vec<Vec<f64>>,
    matrix: Vec<Vec<f64>>,
}

fn same_alphabet(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(u, v)| vector_key(u) == vector_key(v))
}

impl Channel {
    pub fn new(input_support: Vec<Vec<f64>>, output_support: Vec<Vec<f64>>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        if input_support.is_empty() || output_support.is_empty() {
            return Err(Error::InvalidChannel("empty alphabet".into()));
        }
        if matrix.len() != input_support.len() {
            return Err(Error::InvalidChannel(format!(
                "{} rows for {} inputs",
                matrix.len(),
                input_support.len()
            )));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != output_support.len() {
                return Err(Error::InvalidChannel(format!("row {i} has {} entries", row.len())));
            }
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(Error::InvalidChannel(format!("row {i} has a negative or non-finite entry")));
            }
            let s = compensated_sum(row.iter().copied());
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::InvalidChannel(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { input_support, output_support, matrix })
    }

    /// Channel given as `(output, probability)` lists per input; repeated
    /// outputs are merged and the output alphabet is the union in order of
    /// first appearance.
    pub fn from_transitions(input_support: Vec<Vec<f64>>, rows: Vec<Vec<(Vec<f64>, f64)>>) -> Result<Self> {
        let mut outputs: Vec<Vec<f64>> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for row in &rows {
            for (z, _) in row {
                index.entry(vector_key(z)).or_insert_with(|| {
                    outputs.push(z.iter().map(|c| c + 0.0).collect());
                    outputs.len() - 1
                });
            }
        }
        let mut matrix = vec![vec![0.0; outputs.len()]; rows.len()];
        for (i, row) in rows.iter().enumerate() {
            for (z, p) in row {
                matrix[i][index[&vector_key(z)]] += p;
            }
        }
        Self::new(input_support, outputs, matrix)
    }

    pub fn identity(support: Vec<Vec<f64>>) -> Result<Self> {
        let n = support.len();
        let matrix = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self::new(support.clone(), support, matrix)
    }

    /// Maps every input to the single output `0`.
    pub fn collapse(input_support: Vec<Vec<f64>>) -> Result<Self> {
        let dim = input_support.first().map_or(1, Vec::len);
        let rows = vec![vec![1.0]; input_support.len()];
        Self::new(input_support, vec![vec![0.0; dim]], rows)
    }

    /// Binary symmetric channel on `{-1, +1}` with flip probability `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidChannel(format!("flip probability {p} outside [0, 1]")));
        }
        let alphabet = vec![vec![-1.0], vec![1.0]];
        Self::new(alphabet.clone(), alphabet, vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Conditional law `P(Y | X)` of a joint. Every parameter value must have
    /// positive probability.
    pub fn from_joint(joint: &FiniteJoint) -> Result<Self> {
        let px = joint.x_marginal();
        if let Some(i) = px.iter().position(|&p| p <= 0.0) {
            return Err(Error::InvalidChannel(format!("parameter value {i} has zero probability")));
        }
        let mut matrix = vec![vec![0.0; joint.y_support().len()]; px.len()];
        for a in joint.atoms() {
            matrix[a.x][a.y] = a.p / px[a.x];
        }
        // Re-normalise rows against division round-off.
        for row in &mut matrix {
            let s: f64 = compensated_sum(row.iter().copied());
            row.iter_mut().for_each(|p| *p /= s);
        }
        Self::new(joint.x_support().to_vec(), joint.y_support().to_vec(), matrix)
    }

    pub fn input_support(&self) -> &[Vec<f64>] {
        &self.input_support
    }

    pub fn output_support(&self) -> &[Vec<f64>] {
        &self.output_support
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.matrix[input][output]
    }

    /// Series connection: `self` followed by `next`.
    pub fn then(&self, next: &Channel) -> Result<Channel> {
        if !same_alphabet(&self.output_support, &next.input_support) {
            return Err(Error::AlphabetMismatch("output alphabet of the first channel differs from the input alphabet of the second".into()));
        }
        let matrix = mat_mul(&self.matrix, &next.matrix);
        let matrix = matrix
            .into_iter()
            .map(|row| {
                let s: f64 = compensated_sum(row.iter().copied());
                row.into_iter().map(|p| (p / s).max(0.0)).collect()
            })
            .collect();
        Channel::new(self.input_support.clone(), next.output_support.clone(), matrix)
    }
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..cols).map(|j| compensated_sum(row.iter().zip(b).map(|(r, bj)| r * bj[j]))).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GarblingCertificate {
    pub feasible: bool,
    /// Row-stochastic `G` with `W₂ ≈ W₁G`; the LP optimum even when infeasible.
    pub garbling_matrix: Vec<Vec<f64>>,
    /// `max |W₂ − W₁G|` for the reported `G`.
    pub residual: f64,
    pub tolerance: f64,
}

/// Decides whether `w2` is a garbling of `w1`.
pub fn is_degraded(w1: &Channel, w2: &Channel, feasibility_tolerance: f64) -> Result<GarblingCertificate> {
    if !same_alphabet(&w1.input_support, &w2.input_support) {
        return Err(Error::AlphabetMismatch("the two channels have different input alphabets".into()));
    }
    if feasibility_tolerance.is_nan() || feasibility_tolerance <= 0.0 {
        return Err(Error::InvalidConfig(format!("feasibility tolerance must be positive, got {feasibility_tolerance}")));
    }
    let nx = w1.input_support.len();
    let ny = w1.output_support.len();
    let nz = w2.output_support.len();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let g: Vec<Vec<Variable>> = (0..ny).map(|_| (0..nz).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect()).collect();
    for row in &g {
        let expr: Vec<(Variable, f64)> = row.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, 1.0);
    }
    for x in 0..nx {
        for (z, &target) in w2.matrix[x].iter().enumerate() {
            let mut expr: Vec<(Variable, f64)> = (0..ny)
                .filter(|&y| w1.matrix[x][y] != 0.0)
                .map(|y| (g[y][z], w1.matrix[x][y]))
                .collect();
            expr.push((t, -1.0));
            lp.add_constraint(expr.as_slice(), ComparisonOp::Le, target);
            expr.last_mut().expect("t term").1 = 1.0;
            lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, target);
        }
    }
    let solution = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;

    let garbling_matrix: Vec<Vec<f64>> = g
        .iter()
        .map(|row| {
            let vals: Vec<f64> = row.iter().map(|&v| solution[v].max(0.0)).collect();
            let s: f64 = compensated_sum(vals.iter().copied());
            if s > 0.0 {
                vals.into_iter().map(|p| p / s).collect()
            } else {
                vec![1.0 / nz as f64; nz]
            }
        })
        .collect();
    let product = mat_mul(&w1.matrix, &garbling_matrix);
    let residual = product
        .iter()
        .zip(&w2.matrix)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    Ok(GarblingCertificate {
        feasible: residual < feasibility_tolerance,
        garbling_matrix,
        residual,
        tolerance: feasibility_tolerance,
    })
}

/// Joint of `(X, Z)` where `Z` is drawn from `d` given `Y`.
pub fn compose(joint: &FiniteJoint, d: &Channel) -> Result<FiniteJoint> {
    if !same_alphabet(joint.y_support(), &d.input_support) {
        return Err(Error::AlphabetMismatch("channel input alphabet differs from the measurement support".into()));
    }
    let nz = d.output_support.len();
    let mut cells = vec![0.0; joint.x_support().len() * nz];
    for a in joint.atoms() {
        for (z, &q) in d.matrix[a.y].iter().enumerate() {
            if q > 0.0 {
                cells[a.x * nz + z] += a.p * q;
            }
        }
    }
    let atoms = cells
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| Atom { x: i / nz, y: i % nz, p })
        .collect();
    FiniteJoint::from_sparse(joint.x_support().to_vec(), d.output_support.clone(), atoms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlackwellCheck {
    pub mmse_before: f64,
    pub mmse_after: f64,
    pub ordered: bool,
}

/// MMSE before and after garbling the measurement with `d`. A garbled
/// measurement can never be more informative, so `ordered` is false only
/// when the engine is broken.
pub fn blackwell_verify(joint: &FiniteJoint, d: &Channel) -> Result<BlackwellCheck> {
    let after_joint = compose(joint, d)?;
    let mmse_before = mmse_exact(joint)?.mmse;
    let mmse_after = mmse_exact(&after_joint)?.mmse;
    Ok(BlackwellCheck { mmse_before, mmse_after, ordered: mmse_after >= mmse_before - ORDERING_TOL })
}

/// `E‖E[X|Z] − E[X|Y]‖²` over the coupling `(X, Y, Z)` with `Z ~ d(· | Y)`.
pub fn estimator_gap(joint: &FiniteJoint, d: &Channel) -> Result<f64> {
    let g = conditional_expectation(joint)?;
    let composed = compose(joint, d)?;
    let g_n = conditional_expectation(&composed)?;
    let py = joint.y_marginal();
    let mut terms = Vec::new();
    for (y, &p) in py.iter().enumerate() {
        let Some(gy) = g.at(y) else { continue };
        for (z, &q) in d.matrix[y].iter().enumerate() {
            if p * q > 0.0 {
                let gz = g_n.at(z).expect("reachable output has mass");
                terms.push(p * q * squared_distance(gz, gy));
            }
        }
    }
    Ok(compensated_sum(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws;
    use approx::assert_abs_diff_eq;

    fn bsc(p: f64) -> Channel {
        Channel::bsc(p).unwrap()
    }

    #[test]
    fn identity_pre_channel_garbles_into_anything() {
        let w2 = Channel::new(
            vec![vec![-1.0], vec![1.0]],
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.0, 0.4]],
        )
        .unwrap();
        let id = Channel::identity(vec![vec![-1.0], vec![1.0]]).unwrap();
        let cert = is_degraded(&id, &w2, DEFAULT_FEASIBILITY_TOL).unwrap();
        assert!(cert.feasible);
        for (r, e) in cert.garbling_matrix.iter().zip(w2.matrix()) {
            for (a, b) in r.iter().zip(e) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn cleaner_bsc_garbles_into_noisier() {
        // Cascade p + q − 2pq = 0.2 at p = 0.1 gives q = 0.1 / 0.8.
        let q = (0.2 - 0.1) / (1.0 - 2.0 * 0.1);
        assert_abs_diff_eq!(q, 0.125, epsilon = 1e-15);
        let cert = is_degraded(&bsc(0.1), &bsc(0.2), DEFAULT_FEASIBILITY_TOL).unwrap();
        assert!(cert.feasible);
        assert_abs_diff_eq!(cert.garbling_matrix[0][1], q, epsilon = 1e-6);
        assert_abs_diff_eq!(cert.garbling_matrix[1][0], q, epsilon = 1e-6);
    }

    #[test]
    fn noisier_bsc_cannot_garble_into_cleaner() {
        let cert = is_degraded(&bsc(0.2), &bsc(0.1), DEFAULT_FEASIBILITY_TOL).unwrap();
        assert!(!cert.feasible);
        assert!(cert.residual >= 1e-3, "{cert:?}");
    }

    #[test]
    fn self_garbling_is_identity() {
        let w = Channel::from_joint(&laws::rademacher_sum()).unwrap();
        let cert = is_degraded(&w, &w, DEFAULT_FEASIBILITY_TOL).unwrap();
        assert!(cert.feasible);
    }

    #[test]
    fn alphabet_mismatch() {
        let other = Channel::identity(vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(is_degraded(&bsc(0.1), &other, 1e-7), Err(Error::AlphabetMismatch(_))));
        assert!(matches!(compose(&laws::rademacher_sum(), &other), Err(Error::AlphabetMismatch(_))));
    }

    #[test]
    fn compose_identity_and_collapse() {
        let j = laws::rademacher_sum();
        let id = Channel::identity(j.y_support().to_vec()).unwrap();
        assert_eq!(compose(&j, &id).unwrap(), j);

        let collapsed = compose(&j, &Channel::collapse(j.y_support().to_vec()).unwrap()).unwrap();
        assert_eq!(collapsed.y_support().len(), 1);
        assert_abs_diff_eq!(mmse_exact(&collapsed).unwrap().mmse, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn compose_bsc_cascade() {
        let j = compose(&laws::bsc_joint(0.1), &bsc(0.125)).unwrap();
        assert!(j.max_abs_diff(&laws::bsc_joint(0.2)) <= 1e-12);
    }

    #[test]
    fn blackwell_examples() {
        let r = blackwell_verify(&laws::bsc_joint(0.1), &bsc(0.125)).unwrap();
        assert_abs_diff_eq!(r.mmse_before, 1.0 - 0.8f64.powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(r.mmse_after, 1.0 - 0.6f64.powi(2), epsilon = 1e-12);
        assert!(r.ordered);

        let j = laws::rademacher_sum();
        let r = blackwell_verify(&j, &Channel::identity(j.y_support().to_vec()).unwrap()).unwrap();
        assert_eq!(r.mmse_before, r.mmse_after);
        assert!(r.ordered);

        let r = blackwell_verify(&j, &Channel::collapse(j.y_support().to_vec()).unwrap()).unwrap();
        assert_eq!(r.mmse_before, 0.5);
        assert_abs_diff_eq!(r.mmse_after, 1.0, epsilon = 1e-15);
        assert!(r.ordered);
    }

    #[test]
    fn channel_from_joint_requires_positive_inputs() {
        let w = Channel::from_joint(&laws::bsc_joint(0.3)).unwrap();
        assert_abs_diff_eq!(w.get(0, 1), 0.3, epsilon = 1e-15);
        let j = FiniteJoint::from_atoms(vec![(vec![0.0], vec![0.0], 1.0), (vec![1.0], vec![0.0], 0.0)]).unwrap();
        assert!(Channel::from_joint(&j).is_err());
    }

    #[test]
    fn estimator_gap_of_identity_is_zero() {
        let j = laws::bsc_joint(0.1);
        let id = Channel::identity(j.y_support().to_vec()).unwrap();
        assert_eq!(estimator_gap(&j, &id).unwrap(), 0.0);
    }

    #[test]
    fn from_transitions_merges_outputs() {
        let w = Channel::from_transitions(
            vec![vec![0.0]],
            vec![vec![(vec![1.0], 0.5), (vec![1.0], 0.25), (vec![2.0], 0.25)]],
        )
        .unwrap();
        assert_eq!(w.output_support(), &[vec![1.0], vec![2.0]]);
        assert_eq!(w.matrix(), &[vec![0.75, 0.25]]);
    }
}
