//! Exact finite joint laws, seeded samplers for continuous laws, moment
//! summaries and the floor quantizer.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{cmp_vectors, compensated_sum, squared_norm, vector_key, CompensatedSum};
use crate::rng::{seeded_rng, LabRng};

/// Tolerance on the total mass of a joint pmf.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Tolerance on covariance symmetry and positive semidefiniteness.
pub const COVARIANCE_TOL: f64 = 1e-10;

/// One nonzero cell of a joint pmf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub x: usize,
    pub y: usize,
    pub p: f64,
}

/// Joint probability table of a parameter `X` and a measurement `Y` over
/// finite supports.
///
/// The table is stored sparsely: only cells with positive mass are kept as
/// atoms, sorted by `(x, y)`. Support entries may carry zero marginal mass.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteJoint {
    x_support: Vec<Vec<f64>>,
    y_support: Vec<Vec<f64>>,
    atoms: Vec<Atom>,
}

fn check_support(name: &str, support: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = support.first() else {
        return Err(Error::InvalidJoint(format!("{name} support is empty")));
    };
    let dim = first.len();
    if dim == 0 {
        return Err(Error::InvalidJoint(format!("{name} vectors have dimension 0")));
    }
    let mut seen = HashMap::with_capacity(support.len());
    for (i, v) in support.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::InvalidJoint(format!(
                "{name} support entry {i} has dimension {}, expected {dim}",
                v.len()
            )));
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidJoint(format!("{name} support entry {i} is not finite")));
        }
        if let Some(j) = seen.insert(vector_key(v), i) {
            return Err(Error::InvalidJoint(format!(
                "{name} support entries {j} and {i} coincide"
            )));
        }
    }
    Ok(dim)
}

impl FiniteJoint {
    /// Builds a joint from a dense pmf indexed `(x_index, y_index)`.
    pub fn new(x_support: Vec<Vec<f64>>, y_support: Vec<Vec<f64>>, pmf: Vec<Vec<f64>>) -> Result<Self> {
        if pmf.len() != x_support.len() {
            return Err(Error::InvalidJoint(format!(
                "pmf has {} rows for {} parameter values",
                pmf.len(),
                x_support.len()
            )));
        }
        let mut atoms = Vec::new();
        for (i, row) in pmf.iter().enumerate() {
            if row.len() != y_support.len() {
                return Err(Error::InvalidJoint(format!(
                    "pmf row {i} has {} entries for {} measurement values",
                    row.len(),
                    y_support.len()
                )));
            }
            for (j, &p) in row.iter().enumerate() {
                if p < 0.0 || !p.is_finite() {
                    return Err(Error::InvalidJoint(format!("pmf[{i}][{j}] = {p} is not a probability")));
                }
                if p > 0.0 {
                    atoms.push(Atom { x: i, y: j, p });
                }
            }
        }
        Self::from_sparse(x_support, y_support, atoms)
    }

    /// Builds a joint from sparse atoms over the given supports.
    pub fn from_sparse(x_support: Vec<Vec<f64>>, y_support: Vec<Vec<f64>>, mut atoms: Vec<Atom>) -> Result<Self> {
        check_support("parameter", &x_support)?;
        check_support("measurement", &y_support)?;
        let mut total = CompensatedSum::new();
        for a in &atoms {
            if a.x >= x_support.len() || a.y >= y_support.len() {
                return Err(Error::InvalidJoint(format!("atom ({}, {}) out of range", a.x, a.y)));
            }
            if a.p < 0.0 || !a.p.is_finite() {
                return Err(Error::InvalidJoint(format!("atom probability {} is not a probability", a.p)));
            }
            total.add(a.p);
        }
        let total = total.value();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidJoint(format!("pmf sums to {total}, not 1")));
        }
        atoms.retain(|a| a.p > 0.0);
        atoms.sort_by_key(|a| (a.x, a.y));
        if atoms.windows(2).any(|w| w[0].x == w[1].x && w[0].y == w[1].y) {
            return Err(Error::InvalidJoint("duplicate atom cells".into()));
        }
        Ok(Self { x_support, y_support, atoms })
    }

    /// Builds a joint from `(x, y, p)` triples, merging repeated cells.
    ///
    /// Supports are sorted lexicographically. Triples with `p == 0` still
    /// register their support values.
    pub fn from_atoms<I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<f64>, Vec<f64>, f64)>,
    {
        let mut xs: BTreeMap<Vec<u64>, Vec<f64>> = BTreeMap::new();
        let mut ys: BTreeMap<Vec<u64>, Vec<f64>> = BTreeMap::new();
        let mut cells: HashMap<(Vec<u64>, Vec<u64>), f64> = HashMap::new();
        for (x, y, p) in triples {
            if p < 0.0 || !p.is_finite() {
                return Err(Error::InvalidJoint(format!("atom probability {p} is not a probability")));
            }
            let kx = vector_key(&x);
            let ky = vector_key(&y);
            *cells.entry((kx.clone(), ky.clone())).or_insert(0.0) += p;
            xs.entry(kx).or_insert_with(|| x.iter().map(|v| v + 0.0).collect());
            ys.entry(ky).or_insert_with(|| y.iter().map(|v| v + 0.0).collect());
        }
        let mut x_support: Vec<Vec<f64>> = xs.into_values().collect();
        let mut y_support: Vec<Vec<f64>> = ys.into_values().collect();
        x_support.sort_by(|a, b| cmp_vectors(a, b));
        y_support.sort_by(|a, b| cmp_vectors(a, b));
        let x_index: HashMap<Vec<u64>, usize> =
            x_support.iter().enumerate().map(|(i, v)| (vector_key(v), i)).collect();
        let y_index: HashMap<Vec<u64>, usize> =
            y_support.iter().enumerate().map(|(i, v)| (vector_key(v), i)).collect();
        let atoms = cells
            .into_iter()
            .map(|((kx, ky), p)| Atom { x: x_index[&kx], y: y_index[&ky], p })
            .collect();
        Self::from_sparse(x_support, y_support, atoms)
    }

    pub fn point_mass(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::from_sparse(vec![x], vec![y], vec![Atom { x: 0, y: 0, p: 1.0 }])
    }

    /// Independent joint with the given marginals.
    pub fn product(px: &[(Vec<f64>, f64)], py: &[(Vec<f64>, f64)]) -> Result<Self> {
        let mut atoms = Vec::with_capacity(px.len() * py.len());
        for (i, (_, p)) in px.iter().enumerate() {
            for (j, (_, q)) in py.iter().enumerate() {
                atoms.push(Atom { x: i, y: j, p: p * q });
            }
        }
        Self::from_sparse(
            px.iter().map(|(v, _)| v.clone()).collect(),
            py.iter().map(|(v, _)| v.clone()).collect(),
            atoms,
        )
    }

    pub fn x_support(&self) -> &[Vec<f64>] {
        &self.x_support
    }

    pub fn y_support(&self) -> &[Vec<f64>] {
        &self.y_support
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn dim_x(&self) -> usize {
        self.x_support[0].len()
    }

    pub fn dim_y(&self) -> usize {
        self.y_support[0].len()
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.atoms
            .binary_search_by_key(&(x, y), |a| (a.x, a.y))
            .map(|i| self.atoms[i].p)
            .unwrap_or(0.0)
    }

    pub fn pmf_dense(&self) -> Vec<Vec<f64>> {
        let mut pmf = vec![vec![0.0; self.y_support.len()]; self.x_support.len()];
        for a in &self.atoms {
            pmf[a.x][a.y] = a.p;
        }
        pmf
    }

    pub fn x_marginal(&self) -> Vec<f64> {
        let mut m = vec![CompensatedSum::new(); self.x_support.len()];
        for a in &self.atoms {
            m[a.x].add(a.p);
        }
        m.iter().map(CompensatedSum::value).collect()
    }

    pub fn y_marginal(&self) -> Vec<f64> {
        let mut m = vec![CompensatedSum::new(); self.y_support.len()];
        for a in &self.atoms {
            m[a.y].add(a.p);
        }
        m.iter().map(CompensatedSum::value).collect()
    }

    /// Product of the two marginals of this joint.
    pub fn independent_product(&self) -> Result<Self> {
        let px: Vec<_> = self.x_support.iter().cloned().zip(self.x_marginal()).collect();
        let py: Vec<_> = self.y_support.iter().cloned().zip(self.y_marginal()).collect();
        Self::product(&px, &py)
    }

    /// Pushes the joint through entrywise maps on `x` and `y`, merging
    /// atoms that land on the same cell.
    pub fn map<FX, FY>(&self, fx: FX, fy: FY) -> Result<Self>
    where
        FX: Fn(&[f64]) -> Vec<f64>,
        FY: Fn(&[f64]) -> Vec<f64>,
    {
        let mx: Vec<Vec<f64>> = self.x_support.iter().map(|v| fx(v)).collect();
        let my: Vec<Vec<f64>> = self.y_support.iter().map(|v| fy(v)).collect();
        Self::from_atoms(self.atoms.iter().map(|a| (mx[a.x].clone(), my[a.y].clone(), a.p)))
    }

    /// `E‖X‖^p` style functional: `Σ p(x, y) f(x)`.
    pub fn expect_x<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.p * f(&self.x_support[a.x])))
    }

    pub fn expect_y<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.p * f(&self.y_support[a.y])))
    }

    /// Largest absolute pmf difference after matching cells by value.
    pub fn max_abs_diff(&self, other: &FiniteJoint) -> f64 {
        let mut cells: HashMap<(Vec<u64>, Vec<u64>), f64> = HashMap::new();
        for a in &self.atoms {
            *cells
                .entry((vector_key(&self.x_support[a.x]), vector_key(&self.y_support[a.y])))
                .or_insert(0.0) += a.p;
        }
        for a in &other.atoms {
            *cells
                .entry((vector_key(&other.x_support[a.x]), vector_key(&other.y_support[a.y])))
                .or_insert(0.0) -= a.p;
        }
        cells.values().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Sampler drawing i.i.d. pairs from this joint.
    pub fn sampler(&self) -> Sampler {
        let mut cumulative = Vec::with_capacity(self.atoms.len());
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.p;
            cumulative.push(acc);
        }
        let joint = Arc::new(self.clone());
        let total = acc;
        Sampler::new(format!("finite joint ({} atoms)", self.atoms.len()), move |rng| {
            let u = rng.gen::<f64>() * total;
            let i = cumulative.partition_point(|&c| c <= u).min(joint.atoms.len() - 1);
            let a = joint.atoms[i];
            (joint.x_support[a.x].clone(), joint.y_support[a.y].clone())
        })
    }
}

type DrawFn = dyn Fn(&mut LabRng) -> (Vec<f64>, Vec<f64>) + Send + Sync;

/// Seeded generator of `(x, y)` pairs for a (typically continuous) law.
#[derive(Clone)]
pub struct Sampler {
    draw: Arc<DrawFn>,
    descriptor: String,
}

impl fmt::Debug for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sampler").field("descriptor", &self.descriptor).finish()
    }
}

impl Sampler {
    pub fn new<F>(descriptor: impl Into<String>, draw: F) -> Self
    where
        F: Fn(&mut LabRng) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    {
        Self { draw: Arc::new(draw), descriptor: descriptor.into() }
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn draw(&self, rng: &mut LabRng) -> (Vec<f64>, Vec<f64>) {
        (self.draw)(rng)
    }

    /// Draws `n` pairs from a fresh stream seeded with `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = seeded_rng(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }
}

/// Uniform draw on `[lo, hi)`.
pub fn uniform(rng: &mut LabRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Uniform draw on `{-1, +1}`.
pub fn rademacher(rng: &mut LabRng) -> f64 {
    if rng.gen::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// First and second order statistics of a joint law.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub eta_x: DVector<f64>,
    pub eta_y: DVector<f64>,
    pub c_x: DMatrix<f64>,
    pub c_y: DMatrix<f64>,
    pub c_xy: DMatrix<f64>,
    pub second_moment_x: f64,
    pub second_moment_y: f64,
}

fn check_covariance(name: &str, c: &DMatrix<f64>) -> Result<()> {
    if !c.is_square() {
        return Err(Error::InvalidMoments(format!("{name} is not square")));
    }
    let n = c.nrows();
    for i in 0..n {
        for j in 0..i {
            if (c[(i, j)] - c[(j, i)]).abs() > COVARIANCE_TOL {
                return Err(Error::InvalidMoments(format!("{name} is not symmetric")));
            }
        }
    }
    let min_eig = c.clone().symmetric_eigenvalues().min();
    if n > 0 && min_eig < -COVARIANCE_TOL {
        return Err(Error::InvalidMoments(format!("{name} has negative eigenvalue {min_eig}")));
    }
    Ok(())
}

impl MomentSummary {
    /// Assembles a summary from means and covariance blocks; the second
    /// moments are derived as `trace(C) + ‖η‖²`.
    pub fn from_parts(
        eta_x: DVector<f64>,
        eta_y: DVector<f64>,
        c_x: DMatrix<f64>,
        c_y: DMatrix<f64>,
        c_xy: DMatrix<f64>,
    ) -> Result<Self> {
        let second_moment_x = c_x.trace() + eta_x.norm_squared();
        let second_moment_y = c_y.trace() + eta_y.norm_squared();
        let m = Self { eta_x, eta_y, c_x, c_y, c_xy, second_moment_x, second_moment_y };
        m.validate()?;
        Ok(m)
    }

    /// Scalar-parameter, scalar-measurement convenience constructor.
    pub fn scalar(eta_x: f64, eta_y: f64, var_x: f64, var_y: f64, cov_xy: f64) -> Result<Self> {
        Self::from_parts(
            DVector::from_element(1, eta_x),
            DVector::from_element(1, eta_y),
            DMatrix::from_element(1, 1, var_x),
            DMatrix::from_element(1, 1, var_y),
            DMatrix::from_element(1, 1, cov_xy),
        )
    }

    pub fn dim_x(&self) -> usize {
        self.eta_x.len()
    }

    pub fn dim_y(&self) -> usize {
        self.eta_y.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (k, m) = (self.eta_x.len(), self.eta_y.len());
        if self.c_x.shape() != (k, k) || self.c_y.shape() != (m, m) || self.c_xy.shape() != (k, m) {
            return Err(Error::InvalidMoments("block shapes do not match the mean lengths".into()));
        }
        check_covariance("C_X", &self.c_x)?;
        check_covariance("C_Y", &self.c_y)?;
        let sx = self.c_x.trace() + self.eta_x.norm_squared();
        let sy = self.c_y.trace() + self.eta_y.norm_squared();
        let scale_x = 1.0f64.max(self.second_moment_x.abs());
        let scale_y = 1.0f64.max(self.second_moment_y.abs());
        if (sx - self.second_moment_x).abs() > COVARIANCE_TOL * scale_x
            || (sy - self.second_moment_y).abs() > COVARIANCE_TOL * scale_y
        {
            return Err(Error::InvalidMoments("second moments disagree with trace(C) + ‖η‖²".into()));
        }
        Ok(())
    }
}

fn weighted_moments<'a, I>(items: I, k: usize, m: usize) -> MomentSummary
where
    I: Iterator<Item = (&'a [f64], &'a [f64], f64)> + Clone,
{
    let mut mean_x = vec![CompensatedSum::new(); k];
    let mut mean_y = vec![CompensatedSum::new(); m];
    let mut sx = CompensatedSum::new();
    let mut sy = CompensatedSum::new();
    for (x, y, w) in items.clone() {
        for (acc, v) in mean_x.iter_mut().zip(x) {
            acc.add(w * v);
        }
        for (acc, v) in mean_y.iter_mut().zip(y) {
            acc.add(w * v);
        }
        sx.add(w * squared_norm(x));
        sy.add(w * squared_norm(y));
    }
    let eta_x = DVector::from_iterator(k, mean_x.iter().map(CompensatedSum::value));
    let eta_y = DVector::from_iterator(m, mean_y.iter().map(CompensatedSum::value));

    let mut cx = vec![CompensatedSum::new(); k * k];
    let mut cy = vec![CompensatedSum::new(); m * m];
    let mut cxy = vec![CompensatedSum::new(); k * m];
    let mut dx = vec![0.0; k];
    let mut dy = vec![0.0; m];
    for (x, y, w) in items {
        for i in 0..k {
            dx[i] = x[i] - eta_x[i];
        }
        for j in 0..m {
            dy[j] = y[j] - eta_y[j];
        }
        for i in 0..k {
            for j in i..k {
                cx[i * k + j].add(w * dx[i] * dx[j]);
            }
            for j in 0..m {
                cxy[i * m + j].add(w * dx[i] * dy[j]);
            }
        }
        for i in 0..m {
            for j in i..m {
                cy[i * m + j].add(w * dy[i] * dy[j]);
            }
        }
    }
    let c_x = DMatrix::from_fn(k, k, |i, j| cx[i.min(j) * k + i.max(j)].value());
    let c_y = DMatrix::from_fn(m, m, |i, j| cy[i.min(j) * m + i.max(j)].value());
    let c_xy = DMatrix::from_fn(k, m, |i, j| cxy[i * m + j].value());
    MomentSummary {
        eta_x,
        eta_y,
        c_x,
        c_y,
        c_xy,
        second_moment_x: sx.value(),
        second_moment_y: sy.value(),
    }
}

/// Exact moments of a finite joint (population convention).
pub fn moments_exact(joint: &FiniteJoint) -> MomentSummary {
    let items = joint
        .atoms()
        .iter()
        .map(|a| (joint.x_support[a.x].as_slice(), joint.y_support[a.y].as_slice(), a.p));
    weighted_moments(items, joint.dim_x(), joint.dim_y())
}

/// Sample moments with denominator-`n` covariances, accumulated in input order.
pub fn moments_empirical(samples: &[(Vec<f64>, Vec<f64>)]) -> Result<MomentSummary> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: samples.len() });
    }
    let (k, m) = (samples[0].0.len(), samples[0].1.len());
    if k == 0 || m == 0 {
        return Err(Error::DimensionMismatch("samples have an empty component".into()));
    }
    if let Some(i) = samples.iter().position(|(x, y)| x.len() != k || y.len() != m) {
        return Err(Error::DimensionMismatch(format!("sample {i} has inconsistent dimensions")));
    }
    let w = 1.0 / samples.len() as f64;
    let items = samples.iter().map(|(x, y)| (x.as_slice(), y.as_slice(), w));
    Ok(weighted_moments(items, k, m))
}

/// Largest integer `k` with `k·a ≤ v` in floating point.
fn floor_index(v: f64, a: f64) -> f64 {
    let mut k = (v / a).floor();
    if k * a > v {
        k -= 1.0;
    } else if (k + 1.0) * a <= v {
        k += 1.0;
    }
    k
}

/// Entrywise `⌊x/a⌋·a`.
///
/// The index is corrected so that the result is the largest representable
/// grid point not exceeding the input, which makes the map idempotent.
pub fn floor_quantize(x: &[f64], a: f64) -> Result<Vec<f64>> {
    if a <= 0.0 || !a.is_finite() {
        return Err(Error::NonPositiveStep(a));
    }
    Ok(x.iter().map(|&v| floor_index(v, a) * a).collect())
}

/// Empirical joint of floor-quantized samples on a grid of step `grid_step`.
pub fn discretize_samples(samples: &[(Vec<f64>, Vec<f64>)], grid_step: f64) -> Result<FiniteJoint> {
    if grid_step <= 0.0 || !grid_step.is_finite() {
        return Err(Error::NonPositiveStep(grid_step));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let index = |v: &[f64]| -> Vec<i64> { v.iter().map(|&c| floor_index(c, grid_step) as i64).collect() };
    let mut counts: BTreeMap<(Vec<i64>, Vec<i64>), u64> = BTreeMap::new();
    for (x, y) in samples {
        *counts.entry((index(x), index(y))).or_insert(0) += 1;
    }
    let xs: BTreeMap<Vec<i64>, usize> = counts.keys().map(|(kx, _)| (kx.clone(), 0)).collect();
    let ys: BTreeMap<Vec<i64>, usize> = counts.keys().map(|(_, ky)| (ky.clone(), 0)).collect();
    let to_values = |k: &Vec<i64>| -> Vec<f64> { k.iter().map(|&i| i as f64 * grid_step + 0.0).collect() };
    let x_support: Vec<Vec<f64>> = xs.keys().map(to_values).collect();
    let y_support: Vec<Vec<f64>> = ys.keys().map(to_values).collect();
    let x_pos: HashMap<&Vec<i64>, usize> = xs.keys().enumerate().map(|(i, k)| (k, i)).collect();
    let y_pos: HashMap<&Vec<i64>, usize> = ys.keys().enumerate().map(|(i, k)| (k, i)).collect();
    let n = samples.len() as f64;
    let atoms = counts
        .iter()
        .map(|((kx, ky), &c)| Atom { x: x_pos[kx], y: y_pos[ky], p: c as f64 / n })
        .collect();
    FiniteJoint::from_sparse(x_support, y_support, atoms)
}

/// Draws `n_samples` pairs and returns their quantized empirical joint.
pub fn discretize(sampler: &Sampler, grid_step: f64, n_samples: usize, seed: u64) -> Result<FiniteJoint> {
    if grid_step <= 0.0 || !grid_step.is_finite() {
        return Err(Error::NonPositiveStep(grid_step));
    }
    if n_samples == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    discretize_samples(&sampler.sample(n_samples, seed), grid_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(x: f64) -> Vec<f64> {
        vec![x]
    }

    fn example3_joint() -> FiniteJoint {
        let mut t = Vec::new();
        for x in [-1.0, 1.0] {
            for n in [-1.0, 1.0] {
                t.push((v(x), v(x + n), 0.25));
            }
        }
        FiniteJoint::from_atoms(t).unwrap()
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(FiniteJoint::new(vec![v(0.0)], vec![v(0.0)], vec![vec![0.5]]).is_err());
        assert!(FiniteJoint::new(vec![v(0.0)], vec![v(0.0)], vec![vec![-1.0]]).is_err());
        assert!(FiniteJoint::new(vec![v(0.0), v(0.0)], vec![v(0.0)], vec![vec![0.5], vec![0.5]]).is_err());
        assert!(FiniteJoint::new(vec![v(0.0), vec![0.0, 1.0]], vec![v(0.0)], vec![vec![0.5], vec![0.5]]).is_err());
        assert!(FiniteJoint::new(vec![], vec![v(0.0)], vec![]).is_err());
    }

    #[test]
    fn from_atoms_merges_cells_and_keeps_zero_mass_support() {
        let j = FiniteJoint::from_atoms(vec![
            (v(1.0), v(0.0), 0.25),
            (v(1.0), v(0.0), 0.25),
            (v(-1.0), v(2.0), 0.5),
            (v(-1.0), v(5.0), 0.0),
        ])
        .unwrap();
        assert_eq!(j.x_support(), &[v(-1.0), v(1.0)]);
        assert_eq!(j.y_support(), &[v(0.0), v(2.0), v(5.0)]);
        assert_eq!(j.prob(1, 0), 0.5);
        assert_eq!(j.y_marginal(), vec![0.5, 0.5, 0.0]);
        assert_eq!(j.atoms().len(), 2);
    }

    #[test]
    fn moments_of_perfect_measurement() {
        let j = FiniteJoint::from_atoms(vec![(v(-1.0), v(-1.0), 0.5), (v(1.0), v(1.0), 0.5)]).unwrap();
        let m = moments_exact(&j);
        assert_eq!(m.eta_x[0], 0.0);
        assert_eq!(m.c_x[(0, 0)], 1.0);
        assert_eq!(m.c_xy[(0, 0)], 1.0);
        m.validate().unwrap();
    }

    #[test]
    fn moments_of_rademacher_sum() {
        let m = moments_exact(&example3_joint());
        assert_abs_diff_eq!(m.c_x[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.c_y[(0, 0)], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.c_xy[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn moments_of_point_mass() {
        let m = moments_exact(&FiniteJoint::point_mass(vec![3.0, -2.0], v(7.0)).unwrap());
        assert_eq!(m.eta_x.as_slice(), &[3.0, -2.0]);
        assert!(m.c_x.iter().all(|&c| c == 0.0));
        assert_eq!(m.second_moment_x, 13.0);
    }

    #[test]
    fn independent_product_has_zero_cross_covariance() {
        let j = example3_joint();
        let m = moments_exact(&j.independent_product().unwrap());
        assert!(m.c_xy[(0, 0)].abs() <= 1e-10);
        assert_eq!(j.independent_product().unwrap().x_marginal(), j.x_marginal());
    }

    #[test]
    fn empirical_moments() {
        let m = moments_empirical(&[(v(1.0), v(1.0)), (v(-1.0), v(-1.0))]).unwrap();
        assert_eq!(m.eta_x[0], 0.0);
        assert_eq!(m.c_x[(0, 0)], 1.0);
        assert_eq!(m.c_xy[(0, 0)], 1.0);

        let c = moments_empirical(&vec![(v(2.5), vec![1.0, -1.0]); 10]).unwrap();
        assert!(c.c_x.iter().chain(c.c_y.iter()).chain(c.c_xy.iter()).all(|&e| e == 0.0));

        assert_eq!(
            moments_empirical(&[(v(1.0), v(1.0))]),
            Err(Error::InsufficientSamples { needed: 2, got: 1 })
        );
    }

    #[test]
    fn floor_quantize_examples() {
        assert_eq!(floor_quantize(&[2.7], 1.0).unwrap(), vec![2.0]);
        assert_eq!(floor_quantize(&[-0.3], 0.25).unwrap(), vec![-0.5]);
        assert_eq!(floor_quantize(&[1.0], 0.25).unwrap(), vec![1.0]);
        assert_eq!(floor_quantize(&[1.0], 0.0), Err(Error::NonPositiveStep(0.0)));
        assert_eq!(floor_quantize(&[1.0], -2.0), Err(Error::NonPositiveStep(-2.0)));
    }

    #[test]
    fn discretize_point_mass_and_determinism() {
        let point = Sampler::new("point", |_| (v(0.3), v(-0.7)));
        let j = discretize(&point, 0.25, 100, 1).unwrap();
        assert_eq!(j.atoms().len(), 1);
        assert_eq!(j.atoms()[0].p, 1.0);
        assert_eq!(j.x_support(), &[v(0.25)]);
        assert_eq!(j.y_support(), &[v(-0.75)]);

        let s = Sampler::new("uniform", |rng| {
            let x = uniform(rng, 0.0, 1.0);
            (v(x), v(x + uniform(rng, 0.0, 1.0)))
        });
        assert_eq!(discretize(&s, 0.1, 5000, 42).unwrap(), discretize(&s, 0.1, 5000, 42).unwrap());
        assert!(discretize(&s, 0.0, 10, 1).is_err());
    }

    #[test]
    fn joint_sampler_hits_atom_frequencies() {
        let j = example3_joint();
        let samples = j.sampler().sample(40_000, 3);
        let zero = samples.iter().filter(|(_, y)| y[0] == 0.0).count() as f64 / 40_000.0;
        assert!((zero - 0.5).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn floor_quantize_is_idempotent_and_bounded(x in -1e6f64..1e6, a in 1e-4f64..10.0) {
            let q = floor_quantize(&[x], a).unwrap();
            prop_assert_eq!(floor_quantize(&q, a).unwrap(), q.clone());
            let d = q[0] - x;
            prop_assert!(d <= 0.0);
            prop_assert!(d > -a * (1.0 + 1e-9));
        }

        #[test]
        fn from_atoms_normalizes_any_positive_table(weights in proptest::collection::vec(0.01f64..1.0, 1..30)) {
            let total: f64 = weights.iter().sum();
            let triples: Vec<_> = weights
                .iter()
                .enumerate()
                .map(|(i, w)| (v((i % 5) as f64), v((i / 5) as f64), w / total))
                .collect();
            let j = FiniteJoint::from_atoms(triples).unwrap();
            let s: f64 = j.atoms().iter().map(|a| a.p).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(j.atoms().iter().all(|a| a.p >= 0.0));
            moments_exact(&j).validate().unwrap();
        }
    }
}
