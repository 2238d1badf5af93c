//! Scenario sequences `(X_n, Y_n) → (X, Y)` and the audit of their MMSE
//! trajectories against a registered expected outcome.

mod catalog;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use catalog::{
    additive_noise_joint, builtin_scenarios, find_scenario, quantized_joint, quantized_uniform_joint,
    scenario_names, NOISE_LEVELS,
};

use crate::degradedness::{compose, estimator_gap, Channel};
use crate::error::{Error, Result};
use crate::exact::mmse_exact;
use crate::lmmse::lmmse;
use crate::mc::{mc_mmse_samples, Binning, RegressionConfig};
use crate::numeric::{squared_distance, squared_norm, tail_len};
use crate::prob::{discretize_samples, moments_empirical, moments_exact, FiniteJoint, Sampler};
use crate::rng::{derive_seed, seeded_rng, LabRng};

/// Threshold of the convergence-in-probability proxy, in units of `X`.
pub const PROB_EPSILON: f64 = 0.05;
/// Levels `a` of the uniform-integrability proxy.
pub const UI_LEVELS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
/// Draws used to estimate the convergence-in-probability proxy.
pub const COUPLING_DRAWS: usize = 20_000;
/// Entrywise agreement required between a witnessed composition and the realization.
pub const WITNESS_TOL: f64 = 1e-9;
/// Slack of the per-n ordering `mmse_n ≥ mmse_limit`.
pub const ORDERING_SLACK: f64 = 1e-9;
pub const DEFAULT_SAMPLES: usize = 100_000;

/// One member of a sequence (or its limit) as a finite table or a sampler.
#[derive(Debug, Clone)]
pub enum Realization {
    Exact(FiniteJoint),
    Sampled(Sampler),
}

impl Realization {
    pub fn is_exact(&self) -> bool {
        matches!(self, Realization::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&FiniteJoint> {
        match self {
            Realization::Exact(j) => Some(j),
            Realization::Sampled(_) => None,
        }
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            Realization::Exact(j) => (j.dim_x(), j.dim_y()),
            Realization::Sampled(s) => {
                let (x, y) = s.draw(&mut seeded_rng(0));
                (x.len(), y.len())
            }
        }
    }
}

/// Which error functional the trajectory tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mmse,
    Lmmse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeKind {
    /// The sequence value converges to the limit value.
    Continuous,
    /// The sequence value settles strictly below the limit value.
    DiscontinuousUsc,
    /// The sequence value settles strictly above the limit value.
    DiscontinuousLsc,
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeKind::Continuous => "CONTINUOUS",
            OutcomeKind::DiscontinuousUsc => "DISCONTINUOUS_USC",
            OutcomeKind::DiscontinuousLsc => "DISCONTINUOUS_LSC",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedOutcome {
    pub kind: OutcomeKind,
    pub limit_mmse: f64,
    pub sequence_limit_mmse: f64,
    pub source: String,
}

impl ExpectedOutcome {
    pub fn new(kind: OutcomeKind, limit_mmse: f64, sequence_limit_mmse: f64, source: impl Into<String>) -> Result<Self> {
        if !(limit_mmse >= 0.0 && limit_mmse.is_finite() && sequence_limit_mmse >= 0.0 && sequence_limit_mmse.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "expected values must be finite and nonnegative, got {limit_mmse} and {sequence_limit_mmse}"
            )));
        }
        let consistent = match kind {
            OutcomeKind::Continuous => limit_mmse == sequence_limit_mmse,
            OutcomeKind::DiscontinuousUsc => sequence_limit_mmse < limit_mmse,
            OutcomeKind::DiscontinuousLsc => sequence_limit_mmse > limit_mmse,
        };
        if !consistent {
            return Err(Error::InvalidConfig(format!(
                "{kind} is inconsistent with limit {limit_mmse} and sequence limit {sequence_limit_mmse}"
            )));
        }
        Ok(Self { kind, limit_mmse, sequence_limit_mmse, source: source.into() })
    }

    pub fn continuous(value: f64, source: impl Into<String>) -> Result<Self> {
        Self::new(OutcomeKind::Continuous, value, value, source)
    }
}

type StepFn = dyn Fn(Option<u64>) -> f64 + Send + Sync;
type BinningFn = dyn Fn(Option<u64>) -> Binning + Send + Sync;

/// How sampled realizations are evaluated. Index `None` stands for the limit.
#[derive(Clone)]
pub struct SamplingPlan {
    pub n_samples: usize,
    pub min_bin_count: usize,
    grid_step: Arc<StepFn>,
    binning: Arc<BinningFn>,
}

impl SamplingPlan {
    pub fn new(n_samples: usize) -> Self {
        Self {
            n_samples,
            min_bin_count: 5,
            grid_step: Arc::new(|_| 1.0 / 256.0),
            binning: Arc::new(|_| Binning::CubeRoot),
        }
    }

    /// Step of the coarse discretization; the fine path uses half of it.
    pub fn with_grid_step(mut self, f: impl Fn(Option<u64>) -> f64 + Send + Sync + 'static) -> Self {
        self.grid_step = Arc::new(f);
        self
    }

    pub fn with_binning(mut self, f: impl Fn(Option<u64>) -> Binning + Send + Sync + 'static) -> Self {
        self.binning = Arc::new(f);
        self
    }

    pub fn grid_step(&self, index: Option<u64>) -> f64 {
        (self.grid_step)(index)
    }

    pub fn binning(&self, index: Option<u64>) -> Binning {
        (self.binning)(index)
    }
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self::new(DEFAULT_SAMPLES)
    }
}

impl fmt::Debug for SamplingPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SamplingPlan")
            .field("n_samples", &self.n_samples)
            .field("min_bin_count", &self.min_bin_count)
            .finish_non_exhaustive()
    }
}

type RealizeFn = dyn Fn(u64) -> Result<Realization> + Send + Sync;
type WitnessFn = dyn Fn(u64) -> Result<Channel> + Send + Sync;
type CouplingFn = dyn Fn(u64, &mut LabRng) -> (Vec<f64>, Vec<f64>) + Send + Sync;
type MomentsFn = dyn Fn(Option<u64>) -> (f64, f64) + Send + Sync;

/// An indexed family `(X_n, Y_n)`, its limit pair and the registered outcome.
#[derive(Clone)]
pub struct ScenarioSequence {
    name: String,
    description: String,
    metric: Metric,
    realize: Arc<RealizeFn>,
    limit: Realization,
    expected: ExpectedOutcome,
    markov_witness: Option<Arc<WitnessFn>>,
    coupling: Option<Arc<CouplingFn>>,
    analytic_moments: Option<Arc<MomentsFn>>,
    sampling: SamplingPlan,
    default_grid: Vec<u64>,
}

impl fmt::Debug for ScenarioSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScenarioSequence")
            .field("name", &self.name)
            .field("metric", &self.metric)
            .field("expected", &self.expected)
            .field("markov_witness", &self.markov_witness.is_some())
            .field("coupling", &self.coupling.is_some())
            .finish_non_exhaustive()
    }
}

impl ScenarioSequence {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        realize: impl Fn(u64) -> Result<Realization> + Send + Sync + 'static,
        limit: Realization,
        expected: ExpectedOutcome,
    ) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            metric: Metric::Mmse,
            realize: Arc::new(realize),
            limit,
            expected,
            markov_witness: None,
            coupling: None,
            analytic_moments: None,
            sampling: SamplingPlan::default(),
            default_grid: geometric_grid(1, 64),
        }
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    /// Channel `D_n` on the limit measurement with `Y_n = D_n(Y)`.
    pub fn with_witness(mut self, f: impl Fn(u64) -> Result<Channel> + Send + Sync + 'static) -> Self {
        self.markov_witness = Some(Arc::new(f));
        self
    }

    /// Draws `(X_n, X)` on a common probability space.
    pub fn with_coupling(
        mut self,
        f: impl Fn(u64, &mut LabRng) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    ) -> Self {
        self.coupling = Some(Arc::new(f));
        self
    }

    /// Closed-form `(E‖X_n‖², E‖Y_n‖²)`; `None` asks for the limit.
    pub fn with_analytic_moments(mut self, f: impl Fn(Option<u64>) -> (f64, f64) + Send + Sync + 'static) -> Self {
        self.analytic_moments = Some(Arc::new(f));
        self
    }

    pub fn with_sampling(mut self, plan: SamplingPlan) -> Self {
        self.sampling = plan;
        self
    }

    pub fn with_default_grid(mut self, grid: Vec<u64>) -> Self {
        self.default_grid = grid;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn expected(&self) -> &ExpectedOutcome {
        &self.expected
    }

    pub fn limit(&self) -> &Realization {
        &self.limit
    }

    pub fn default_grid(&self) -> &[u64] {
        &self.default_grid
    }

    pub fn sampling(&self) -> &SamplingPlan {
        &self.sampling
    }

    pub fn has_witness(&self) -> bool {
        self.markov_witness.is_some()
    }

    pub fn realize(&self, n: u64) -> Result<Realization> {
        (self.realize)(n)
    }

    pub fn witness(&self, n: u64) -> Option<Result<Channel>> {
        self.markov_witness.as_ref().map(|w| w(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpacing {
    Linear,
    Geometric,
}

/// `start, start+1, …, stop`.
pub fn linear_grid(start: u64, stop: u64) -> Vec<u64> {
    (start..=stop).collect()
}

/// `start, 2·start, 4·start, …` up to `stop`.
pub fn geometric_grid(start: u64, stop: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut n = start.max(1);
    while n <= stop {
        out.push(n);
        n = match n.checked_mul(2) {
            Some(m) => m,
            None => break,
        };
    }
    out
}

pub fn make_grid(start: u64, stop: u64, spacing: GridSpacing) -> Result<Vec<u64>> {
    if start == 0 || start > stop {
        return Err(Error::InvalidConfig(format!("index grid needs 1 ≤ start ≤ stop, got {start}..{stop}")));
    }
    Ok(match spacing {
        GridSpacing::Linear => linear_grid(start, stop),
        GridSpacing::Geometric => geometric_grid(start, stop),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: u64,
    pub mmse: f64,
    pub std_err: f64,
    pub second_moment_x: f64,
    pub second_moment_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitRow {
    pub mmse: f64,
    pub std_err: f64,
    pub second_moment_x: f64,
    pub second_moment_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UiProxy {
    pub a: f64,
    /// Largest `E[1{‖X_n‖² > a}·‖X_n‖²]` over the tail window.
    pub tail_value: f64,
}

/// Exact MMSE of the discretized law at the coarse and at the halved step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscretizedPoint {
    /// `None` for the limit pair.
    pub n: Option<u64>,
    pub step: f64,
    pub coarse: f64,
    pub fine: f64,
}

impl DiscretizedPoint {
    /// Bias bound from halving the step.
    pub fn bias(&self) -> f64 {
        (self.coarse - self.fine).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsBundle {
    /// Largest `|E‖X_n‖² − E‖X‖²|` over the tail window.
    pub second_moment_gap: f64,
    /// Same for the measurement.
    pub second_moment_gap_y: f64,
    /// Largest `P(‖X_n − X‖ > ε)` over the tail window; `None` without a coupling.
    pub prob_convergence_proxy: Option<f64>,
    pub prob_convergence_epsilon: f64,
    pub ui_proxy: Vec<UiProxy>,
    /// `None` when the scenario has no exact witness to check.
    pub markov_verified: Option<bool>,
    /// `mmse_n ≥ mmse_limit` for every witnessed index.
    pub ordering_holds: Option<bool>,
    pub discretized: Vec<DiscretizedPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub metric: Metric,
    pub expected: ExpectedOutcome,
    pub rows: Vec<ReportRow>,
    pub limit: LimitRow,
    pub tol_abs: f64,
    pub seed: u64,
    pub tail_window: usize,
    pub tail_mean: f64,
    pub tail_max: f64,
    pub observed_kind: OutcomeKind,
    /// Whether every check agrees with the expected outcome.
    pub verdict: bool,
    pub mismatches: Vec<String>,
    pub diagnostics: DiagnosticsBundle,
}

impl ConvergenceReport {
    pub fn tail(&self) -> &[ReportRow] {
        &self.rows[self.rows.len() - self.tail_window..]
    }
}

struct Point {
    value: f64,
    std_error: f64,
    second_moment_x: f64,
    second_moment_y: f64,
    ui: Vec<f64>,
    exact_mmse: Option<f64>,
    discretized: Option<DiscretizedPoint>,
}

fn ui_mass(values: impl Iterator<Item = (f64, f64)>, a: f64) -> f64 {
    values.map(|(p, s)| if s > a { p * s } else { 0.0 }).sum()
}

/// `E[1{‖X‖² > a}·‖X‖²]` for a finite joint.
pub fn ui_tail_mass(joint: &FiniteJoint, a: f64) -> f64 {
    joint.expect_x(|x| {
        let s = squared_norm(x);
        if s > a {
            s
        } else {
            0.0
        }
    })
}

fn evaluate(s: &ScenarioSequence, realization: &Realization, index: Option<u64>, seed: u64) -> Result<Point> {
    match realization {
        Realization::Exact(joint) => {
            let exact = mmse_exact(joint)?;
            let moments = moments_exact(joint);
            let value = match s.metric {
                Metric::Mmse => exact.mmse,
                Metric::Lmmse => lmmse(&moments).value,
            };
            Ok(Point {
                value,
                std_error: 0.0,
                second_moment_x: moments.second_moment_x,
                second_moment_y: moments.second_moment_y,
                ui: UI_LEVELS.iter().map(|&a| ui_tail_mass(joint, a)).collect(),
                exact_mmse: Some(exact.mmse),
                discretized: None,
            })
        }
        Realization::Sampled(sampler) => {
            let plan = &s.sampling;
            let samples = sampler.sample(plan.n_samples, seed);
            let inv = 1.0 / samples.len() as f64;
            let (value, std_error, discretized) = match s.metric {
                Metric::Mmse => {
                    let config = RegressionConfig::new(plan.n_samples, seed)
                        .with_binning(plan.binning(index))
                        .with_min_bin_count(plan.min_bin_count);
                    let mc = mc_mmse_samples(&samples, &config)?;
                    let step = plan.grid_step(index);
                    let coarse = mmse_exact(&discretize_samples(&samples, step)?)?.mmse;
                    let fine = mmse_exact(&discretize_samples(&samples, step / 2.0)?)?.mmse;
                    (mc.value, mc.std_error, Some(DiscretizedPoint { n: index, step, coarse, fine }))
                }
                Metric::Lmmse => (lmmse(&moments_empirical(&samples)?).value, 0.0, None),
            };
            let (second_moment_x, second_moment_y) = match &s.analytic_moments {
                Some(f) => f(index),
                None => (
                    samples.iter().map(|(x, _)| squared_norm(x)).sum::<f64>() * inv,
                    samples.iter().map(|(_, y)| squared_norm(y)).sum::<f64>() * inv,
                ),
            };
            let ui = UI_LEVELS
                .iter()
                .map(|&a| ui_mass(samples.iter().map(|(x, _)| (inv, squared_norm(x))), a))
                .collect();
            Ok(Point {
                value,
                std_error,
                second_moment_x,
                second_moment_y,
                ui,
                exact_mmse: None,
                discretized,
            })
        }
    }
}

fn validate_grid(n_grid: &[u64]) -> Result<()> {
    if n_grid.is_empty() {
        return Err(Error::InvalidConfig("empty index grid".into()));
    }
    if n_grid[0] == 0 {
        return Err(Error::InvalidConfig("indices start at 1".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("index grid must be strictly increasing".into()));
    }
    Ok(())
}

fn validate_tol(tol_abs: f64) -> Result<()> {
    if tol_abs <= 0.0 || !tol_abs.is_finite() {
        return Err(Error::InvalidConfig(format!("tolerance must be positive and finite, got {tol_abs}")));
    }
    Ok(())
}

/// Evaluates the sequence on `n_grid` and its limit, and compares the tail
/// window against the expected outcome.
pub fn run_scenario(s: &ScenarioSequence, n_grid: &[u64], tol_abs: f64, seed: u64) -> Result<ConvergenceReport> {
    validate_grid(n_grid)?;
    validate_tol(tol_abs)?;
    let name = s.name.as_str();
    let limit_dims = s.limit.dims();

    let limit_seed = derive_seed(seed, name, 0);
    let limit = evaluate(s, &s.limit, None, limit_seed).map_err(|e| e.in_scenario(name, "limit"))?;

    let mut points = Vec::with_capacity(n_grid.len());
    let mut markov_verified: Option<bool> = None;
    let mut ordering_holds: Option<bool> = None;
    let mut mismatches = Vec::new();
    for &n in n_grid {
        let at = || format!("n = {n}");
        let realization = s.realize(n).map_err(|e| e.in_scenario(name, at()))?;
        if realization.dims() != limit_dims {
            return Err(Error::DimensionMismatch(format!(
                "realization has dimensions {:?}, limit has {:?}",
                realization.dims(),
                limit_dims
            ))
            .in_scenario(name, at()));
        }
        let point = evaluate(s, &realization, Some(n), derive_seed(seed, name, n)).map_err(|e| e.in_scenario(name, at()))?;

        if let (Some(witness), Realization::Exact(joint), Realization::Exact(limit_joint)) =
            (s.witness(n), &realization, &s.limit)
        {
            let channel = witness.map_err(|e| e.in_scenario(name, at()))?;
            let composed = compose(limit_joint, &channel).map_err(|e| e.in_scenario(name, at()))?;
            let reproduces = composed.max_abs_diff(joint) <= WITNESS_TOL;
            if !reproduces {
                mismatches.push(format!("witness channel does not reproduce the realization at n = {n}"));
            }
            *markov_verified.get_or_insert(true) &= reproduces;
            if let (Some(m_n), Some(m)) = (point.exact_mmse, limit.exact_mmse) {
                let ordered = m_n >= m - ORDERING_SLACK;
                if !ordered {
                    mismatches.push(format!("mmse at n = {n} ({m_n}) is below the limit mmse ({m})"));
                }
                *ordering_holds.get_or_insert(true) &= ordered;
            }
        }
        points.push((n, point));
    }

    let tail_window = tail_len(points.len());
    let tail = &points[points.len() - tail_window..];
    let expected = &s.expected;

    for (n, p) in tail {
        let band = tol_abs + 3.0 * p.std_error;
        if (p.value - expected.sequence_limit_mmse).abs() > band {
            mismatches.push(format!(
                "value {} at n = {n} is not within {band} of the expected sequence limit {}",
                p.value, expected.sequence_limit_mmse
            ));
        }
        if let Some(d) = p.discretized {
            let band = tol_abs + d.bias();
            if (d.fine - expected.sequence_limit_mmse).abs() > band {
                mismatches.push(format!(
                    "discretized value {} at n = {n} is not within {band} of the expected sequence limit {}",
                    d.fine, expected.sequence_limit_mmse
                ));
            }
        }
    }
    let band = tol_abs + 3.0 * limit.std_error;
    if (limit.value - expected.limit_mmse).abs() > band {
        mismatches.push(format!(
            "limit value {} is not within {band} of the expected {}",
            limit.value, expected.limit_mmse
        ));
    }
    if let Some(d) = limit.discretized {
        let band = tol_abs + d.bias();
        if (d.fine - expected.limit_mmse).abs() > band {
            mismatches.push(format!(
                "discretized limit value {} is not within {band} of the expected {}",
                d.fine, expected.limit_mmse
            ));
        }
    }

    let tail_mean = tail.iter().map(|(_, p)| p.value).sum::<f64>() / tail_window as f64;
    let tail_max = tail.iter().map(|(_, p)| p.value).fold(f64::NEG_INFINITY, f64::max);
    let tail_se = tail.iter().map(|(_, p)| p.std_error).fold(0.0, f64::max);
    let resolution = tol_abs + 3.0 * (tail_se + limit.std_error);
    let observed_kind = if (tail_mean - limit.value).abs() <= resolution {
        OutcomeKind::Continuous
    } else if tail_mean < limit.value {
        OutcomeKind::DiscontinuousUsc
    } else {
        OutcomeKind::DiscontinuousLsc
    };
    if observed_kind != expected.kind {
        mismatches.push(format!("observed {observed_kind}, expected {}", expected.kind));
    }

    let prob_convergence_proxy = s.coupling.as_ref().map(|coupling| {
        tail.iter()
            .map(|&(n, _)| {
                let mut rng = seeded_rng(derive_seed(seed, &format!("{name}/coupling"), n));
                let hits = (0..COUPLING_DRAWS)
                    .filter(|_| {
                        let (x_n, x) = coupling(n, &mut rng);
                        squared_distance(&x_n, &x) > PROB_EPSILON * PROB_EPSILON
                    })
                    .count();
                hits as f64 / COUPLING_DRAWS as f64
            })
            .fold(0.0, f64::max)
    });
    let ui_proxy = UI_LEVELS
        .iter()
        .enumerate()
        .map(|(i, &a)| UiProxy { a, tail_value: tail.iter().map(|(_, p)| p.ui[i]).fold(0.0, f64::max) })
        .collect();
    let gap = |f: fn(&Point) -> f64| tail.iter().map(|(_, p)| (f(p) - f(&limit)).abs()).fold(0.0, f64::max);
    let diagnostics = DiagnosticsBundle {
        second_moment_gap: gap(|p| p.second_moment_x),
        second_moment_gap_y: gap(|p| p.second_moment_y),
        prob_convergence_proxy,
        prob_convergence_epsilon: PROB_EPSILON,
        ui_proxy,
        markov_verified,
        ordering_holds,
        discretized: points
            .iter()
            .filter_map(|(_, p)| p.discretized)
            .chain(limit.discretized)
            .collect(),
    };

    Ok(ConvergenceReport {
        scenario: s.name.clone(),
        metric: s.metric,
        expected: s.expected.clone(),
        rows: points
            .iter()
            .map(|(n, p)| ReportRow {
                n: *n,
                mmse: p.value,
                std_err: p.std_error,
                second_moment_x: p.second_moment_x,
                second_moment_y: p.second_moment_y,
            })
            .collect(),
        limit: LimitRow {
            mmse: limit.value,
            std_err: limit.std_error,
            second_moment_x: limit.second_moment_x,
            second_moment_y: limit.second_moment_y,
        },
        tol_abs,
        seed,
        tail_window,
        tail_mean,
        tail_max,
        observed_kind,
        verdict: mismatches.is_empty(),
        mismatches,
        diagnostics,
    })
}

/// `limsup mmse_n ≤ mmse_limit`, read off the tail window.
pub fn usc_check(report: &ConvergenceReport, expected: &ExpectedOutcome, slack: f64) -> bool {
    let tail = report.tail();
    let max = tail.iter().map(|r| r.mmse).fold(f64::NEG_INFINITY, f64::max);
    let se = tail.iter().map(|r| r.std_err).fold(0.0, f64::max);
    max <= expected.limit_mmse + slack + 3.0 * se
}

/// Whether the second moments of the parameter converge, read off the tail.
pub fn usc_hypothesis_holds(report: &ConvergenceReport, tol: f64) -> bool {
    report.diagnostics.second_moment_gap < 10.0 * tol
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorConvergence {
    /// `(n, E‖E[X|Y_n] − E[X|Y]‖²)` over the coupling `(X, Y, Y_n)`.
    pub per_n: Vec<(u64, f64)>,
    pub tail_value: f64,
    pub non_increasing: bool,
}

/// Mean-square distance between the estimators from `Y_n` and from `Y`,
/// computed exactly on the witnessed coupling. The seed is unused for
/// exact scenarios.
pub fn estimator_convergence_check(s: &ScenarioSequence, n_grid: &[u64], _seed: u64) -> Result<EstimatorConvergence> {
    validate_grid(n_grid)?;
    if s.markov_witness.is_none() {
        return Err(Error::MissingWitness);
    }
    let limit = s.limit.as_exact().ok_or(Error::NotExact)?;
    let per_n = n_grid
        .iter()
        .map(|&n| {
            let channel = s.witness(n).expect("witness present")?;
            Ok((n, estimator_gap(limit, &channel)?))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_scenario(&s.name, "estimator check"))?;
    let tail = &per_n[per_n.len() - tail_len(per_n.len())..];
    let tail_value = tail.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let non_increasing = per_n.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    Ok(EstimatorConvergence { per_n, tail_value, non_increasing })
}
