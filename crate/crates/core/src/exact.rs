//! Exact conditional expectation and MMSE over finite joints.

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, dot, squared_distance, squared_norm, CompensatedSum};
use crate::prob::{FiniteJoint, NORMALIZATION_TOL};

/// Agreement required between the direct and the difference MMSE forms,
/// relative to `max(1, E‖X‖²)`.
pub const FORM_AGREEMENT_TOL: f64 = 1e-10;

/// `E[X | Y = y]` for every measurement value with positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalExpectation {
    /// Retained measurement values (positive marginal mass).
    pub y_support: Vec<Vec<f64>>,
    /// Index of each retained value in the joint's measurement support.
    pub y_indices: Vec<usize>,
    pub estimate: Vec<Vec<f64>>,
    pub posterior_mass: Vec<f64>,
    /// Measurement indices dropped for having zero mass.
    pub dropped: Vec<usize>,
    lookup: Vec<Option<usize>>,
}

impl ConditionalExpectation {
    /// Estimate for the joint's measurement index `y`, if that value has mass.
    pub fn at(&self, y: usize) -> Option<&[f64]> {
        self.lookup.get(y).copied().flatten().map(|i| self.estimate[i].as_slice())
    }

    pub fn has_dropped_columns(&self) -> bool {
        !self.dropped.is_empty()
    }

    /// `Σ_y P(y)·E[X | Y = y]`, the mean of the estimator.
    pub fn mean(&self) -> Vec<f64> {
        let k = self.estimate.first().map_or(0, Vec::len);
        (0..k)
            .map(|c| compensated_sum(self.estimate.iter().zip(&self.posterior_mass).map(|(e, p)| p * e[c])))
            .collect()
    }

    /// `E‖E[X|Y]‖²`.
    pub fn second_moment(&self) -> f64 {
        compensated_sum(self.estimate.iter().zip(&self.posterior_mass).map(|(e, p)| p * squared_norm(e)))
    }

    /// Returns a copy with `delta` added to every coordinate of every
    /// estimate. Used to build deliberately wrong estimators.
    pub fn shifted(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.estimate {
            for c in e.iter_mut() {
                *c += delta;
            }
        }
        out
    }
}

pub fn conditional_expectation(joint: &FiniteJoint) -> Result<ConditionalExpectation> {
    let k = joint.dim_x();
    let ny = joint.y_support().len();
    let mut mass = vec![CompensatedSum::new(); ny];
    let mut weighted = vec![vec![CompensatedSum::new(); k]; ny];
    for a in joint.atoms() {
        mass[a.y].add(a.p);
        for (acc, v) in weighted[a.y].iter_mut().zip(&joint.x_support()[a.x]) {
            acc.add(a.p * v);
        }
    }

    let mut out = ConditionalExpectation {
        y_support: Vec::new(),
        y_indices: Vec::new(),
        estimate: Vec::new(),
        posterior_mass: Vec::new(),
        dropped: Vec::new(),
        lookup: vec![None; ny],
    };
    for (y, m) in mass.iter().enumerate() {
        let m = m.value();
        if m > 0.0 {
            out.lookup[y] = Some(out.estimate.len());
            out.y_support.push(joint.y_support()[y].clone());
            out.y_indices.push(y);
            out.estimate.push(weighted[y].iter().map(|s| s.value() / m).collect());
            out.posterior_mass.push(m);
        } else {
            out.dropped.push(y);
        }
    }
    if out.estimate.is_empty() {
        return Err(Error::EmptySupport);
    }
    debug_assert!((compensated_sum(out.posterior_mass.iter().copied()) - 1.0).abs() <= NORMALIZATION_TOL);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmseResult {
    /// `E‖X − E[X|Y]‖²` (trace convention for vector parameters).
    pub mmse: f64,
    /// `E‖X‖² − E‖E[X|Y]‖²`, kept for the cross-check.
    pub difference_form: f64,
    pub estimator: ConditionalExpectation,
    pub second_moment_x: f64,
    pub estimator_second_moment: f64,
}

impl MmseResult {
    pub fn dropped_zero_mass(&self) -> bool {
        self.estimator.has_dropped_columns()
    }
}

/// Exact MMSE of `X` from `Y`, computed in both the direct and the
/// difference form. A disagreement beyond [`FORM_AGREEMENT_TOL`] is an
/// engine error.
pub fn mmse_exact(joint: &FiniteJoint) -> Result<MmseResult> {
    let estimator = conditional_expectation(joint)?;
    let direct = compensated_sum(joint.atoms().iter().map(|a| {
        let g = estimator.at(a.y).expect("atom with mass has an estimate");
        a.p * squared_distance(&joint.x_support()[a.x], g)
    }));
    let second_moment_x = joint.expect_x(squared_norm);
    let estimator_second_moment = estimator.second_moment();
    let difference_form = second_moment_x - estimator_second_moment;
    if (direct - difference_form).abs() > FORM_AGREEMENT_TOL * second_moment_x.max(1.0) {
        return Err(Error::FormMismatch { direct, difference: difference_form });
    }
    Ok(MmseResult {
        mmse: direct,
        difference_form,
        estimator,
        second_moment_x,
        estimator_second_moment,
    })
}

pub type TestFunction<'a> = &'a dyn Fn(&[f64]) -> Vec<f64>;

/// `max_g |E[(X − ĝ(Y))ᵀ g(Y)]|` for a given estimator `ĝ`.
///
/// Measurement values the estimator does not cover carry no mass and are
/// skipped.
pub fn orthogonality_residual(
    joint: &FiniteJoint,
    estimator: &ConditionalExpectation,
    test_functions: &[TestFunction<'_>],
) -> f64 {
    test_functions
        .iter()
        .map(|g| {
            let values: Vec<Vec<f64>> = joint.y_support().iter().map(|y| g(y)).collect();
            compensated_sum(joint.atoms().iter().filter_map(|a| {
                let est = estimator.at(a.y)?;
                let residual: Vec<f64> = joint.x_support()[a.x].iter().zip(est).map(|(x, e)| x - e).collect();
                Some(a.p * dot(&residual, &values[a.y]))
            }))
            .abs()
        })
        .fold(0.0, f64::max)
}

/// Orthogonality of the exact MMSE residual against every test function.
pub fn orthogonality_check(joint: &FiniteJoint, test_functions: &[TestFunction<'_>]) -> Result<f64> {
    let estimator = conditional_expectation(joint)?;
    Ok(orthogonality_residual(joint, &estimator, test_functions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws;
    use crate::prob::{moments_exact, Atom};
    use approx::assert_abs_diff_eq;

    fn v(x: f64) -> Vec<f64> {
        vec![x]
    }

    #[test]
    fn rademacher_sum_estimator_is_half_measurement() {
        let j = laws::rademacher_sum();
        let ce = conditional_expectation(&j).unwrap();
        for (y, e) in ce.y_support.iter().zip(&ce.estimate) {
            assert_eq!(e[0], y[0] / 2.0);
        }
        assert_eq!(mmse_exact(&j).unwrap().mmse, 0.5);
    }

    #[test]
    fn perfect_measurement() {
        let j = laws::bsc_joint(0.0);
        let ce = conditional_expectation(&j).unwrap();
        for (y, e) in ce.y_support.iter().zip(&ce.estimate) {
            assert_eq!(e, y);
        }
        assert_eq!(mmse_exact(&j).unwrap().mmse, 0.0);
    }

    #[test]
    fn independent_measurement_gives_prior_mean() {
        let j = laws::rademacher_sum().independent_product().unwrap();
        let ce = conditional_expectation(&j).unwrap();
        assert!(ce.estimate.iter().all(|e| e[0].abs() < 1e-15));
        assert_abs_diff_eq!(mmse_exact(&j).unwrap().mmse, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn binary_symmetric_channel_mmse() {
        // Brute force over the four (x, y) outcomes: E[X|Y=y] = 0.8 y.
        let p = 0.1;
        let mut brute = 0.0;
        for x in [-1.0f64, 1.0] {
            for y in [-1.0f64, 1.0] {
                let prob = 0.5 * if x == y { 1.0 - p } else { p };
                brute += prob * (x - 0.8 * y).powi(2);
            }
        }
        let r = mmse_exact(&laws::bsc_joint(p)).unwrap();
        assert_abs_diff_eq!(r.mmse, brute, epsilon = 1e-14);
        assert_abs_diff_eq!(r.mmse, 0.36, epsilon = 1e-14);
    }

    #[test]
    fn zero_mass_columns_are_dropped() {
        let j = FiniteJoint::from_sparse(
            vec![v(-1.0), v(1.0)],
            vec![v(-1.0), v(0.0), v(1.0)],
            vec![Atom { x: 0, y: 0, p: 0.5 }, Atom { x: 1, y: 2, p: 0.5 }],
        )
        .unwrap();
        let r = mmse_exact(&j).unwrap();
        assert!(r.dropped_zero_mass());
        assert_eq!(r.estimator.dropped, vec![1]);
        assert_eq!(r.estimator.at(1), None);
        let trimmed = laws::bsc_joint(0.0);
        assert_eq!(r.mmse, mmse_exact(&trimmed).unwrap().mmse);
    }

    #[test]
    fn law_of_total_expectation() {
        let j = laws::bsc_joint(0.3);
        let ce = conditional_expectation(&j).unwrap();
        let mean = moments_exact(&j).eta_x;
        assert_abs_diff_eq!(ce.mean()[0], mean[0], epsilon = 1e-10);
    }

    #[test]
    fn orthogonality_examples() {
        let j = laws::rademacher_sum();
        let id = |y: &[f64]| y.to_vec();
        let sq = |y: &[f64]| vec![y[0] * y[0]];
        assert!(orthogonality_check(&j, &[&id]).unwrap() <= 1e-10);
        assert!(orthogonality_check(&j, &[&sq]).unwrap() <= 1e-10);

        let diag = laws::bsc_joint(0.0);
        let one = |_: &[f64]| vec![1.0];
        let bad = conditional_expectation(&diag).unwrap().shifted(0.1);
        let r = orthogonality_residual(&diag, &bad, &[&one]);
        assert!(r >= 0.09, "residual {r}");
        assert_abs_diff_eq!(r, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn vector_parameter_uses_trace() {
        // Two independent coordinates, each a Rademacher-sum pair.
        let base = laws::rademacher_sum();
        let mut triples = Vec::new();
        for a in base.atoms() {
            for b in base.atoms() {
                let x = vec![base.x_support()[a.x][0], base.x_support()[b.x][0]];
                let y = vec![base.y_support()[a.y][0], base.y_support()[b.y][0]];
                triples.push((x, y, a.p * b.p));
            }
        }
        let j = FiniteJoint::from_atoms(triples).unwrap();
        assert_abs_diff_eq!(mmse_exact(&j).unwrap().mmse, 1.0, epsilon = 1e-14);
    }
}
