//! Randomized invariant suites run by the `selftest` command.

use std::fmt;

use serde::Serialize;

use crate::degradedness::{blackwell_verify, is_degraded, DEFAULT_FEASIBILITY_TOL};
use crate::exact::{conditional_expectation, mmse_exact, orthogonality_residual, TestFunction, FORM_AGREEMENT_TOL};
use crate::lmmse::lmmse;
use crate::prob::moments_exact;
use crate::random::{random_channel, random_joint, random_support};
use crate::rng::{derive_seed, seeded_rng, LabRng};
use crate::Error;

type Lifted<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>;

pub const ORTHOGONALITY_TOL: f64 = 1e-10;
pub const DOMINANCE_TOL: f64 = 1e-8;

/// Deliberate engine corruption used as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Shifts every conditional-mean estimate by 0.1 before the orthogonality check.
    BrokenOrthogonality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelftestOptions {
    pub seed: u64,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest violation magnitude seen (0 when none).
    pub worst: f64,
    pub first_error: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub fault: Option<Fault>,
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "selftest seed {}", self.seed)?;
        for s in &self.suites {
            writeln!(
                f,
                "{:<24} {} cases={} failures={} worst={:e}",
                s.name,
                if s.passed() { "PASS" } else { "FAIL" },
                s.cases,
                s.failures,
                s.worst
            )?;
            if let Some(e) = &s.first_error {
                writeln!(f, "    first error: {e}")?;
            }
        }
        write!(f, "{}", if self.passed() { "all suites passed" } else { "some suites failed" })
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    worst: f64,
    first_error: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self { name, cases: 0, failures: 0, worst: 0.0, first_error: None }
    }

    /// Records one case whose violation is `excess` (positive means failure).
    fn record(&mut self, excess: f64) {
        self.cases += 1;
        if excess > 0.0 || excess.is_nan() {
            self.failures += 1;
            self.worst = self.worst.max(excess);
        }
    }

    fn error(&mut self, e: Error) {
        self.cases += 1;
        self.failures += 1;
        self.first_error.get_or_insert_with(|| e.to_string());
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            first_error: self.first_error,
        }
    }
}

fn rng_for(seed: u64, suite: &str) -> LabRng {
    seeded_rng(derive_seed(seed, suite, 0))
}

pub fn form_agreement(seed: u64, cases: usize) -> SuiteResult {
    let mut t = Tally::new("form_agreement");
    let mut rng = rng_for(seed, t.name);
    for _ in 0..cases {
        let j = random_joint(&mut rng, 8, 8);
        match mmse_exact(&j) {
            Ok(r) => {
                let gap = (r.mmse - r.difference_form).abs();
                t.record(gap - FORM_AGREEMENT_TOL * r.second_moment_x.max(1.0));
            }
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

pub fn orthogonality(seed: u64, cases: usize, fault: Option<Fault>) -> SuiteResult {
    let mut t = Tally::new("orthogonality");
    let mut rng = rng_for(seed, t.name);
    let one = |_: &[f64]| vec![1.0];
    let id = |y: &[f64]| y.to_vec();
    let square = |y: &[f64]| vec![y[0] * y[0]];
    let sign = |y: &[f64]| vec![y[0].signum()];
    let tests: [TestFunction<'_>; 4] = [&one, &id, &square, &sign];
    for _ in 0..cases {
        let j = random_joint(&mut rng, 8, 8);
        let k = j.dim_x();
        // Test functions are scalar; lift them to the parameter dimension.
        let lifted: Vec<Lifted<'_>> = tests
            .iter()
            .map(|g| {
                let g = *g;
                Box::new(move |y: &[f64]| vec![g(y)[0]; k]) as Lifted
            })
            .collect();
        let refs: Vec<TestFunction<'_>> = lifted.iter().map(|b| b.as_ref()).collect();
        match conditional_expectation(&j) {
            Ok(est) => {
                let est = match fault {
                    Some(Fault::BrokenOrthogonality) => est.shifted(0.1),
                    None => est,
                };
                t.record(orthogonality_residual(&j, &est, &refs) - ORTHOGONALITY_TOL);
            }
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

pub fn lmmse_dominates_mmse(seed: u64, cases: usize) -> SuiteResult {
    let mut t = Tally::new("lmmse_dominates_mmse");
    let mut rng = rng_for(seed, t.name);
    for _ in 0..cases {
        let j = random_joint(&mut rng, 8, 8);
        match mmse_exact(&j) {
            Ok(r) => t.record(r.mmse - lmmse(&moments_exact(&j)).value - DOMINANCE_TOL),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

pub fn blackwell_ordering(seed: u64, cases: usize) -> SuiteResult {
    let mut t = Tally::new("blackwell_ordering");
    let mut rng = rng_for(seed, t.name);
    for _ in 0..cases {
        let j = random_joint(&mut rng, 8, 8);
        let n_out = rand::Rng::gen_range(&mut rng, 1..=8);
        let d = random_channel(&mut rng, j.y_support(), n_out);
        match blackwell_verify(&j, &d) {
            Ok(r) => t.record(if r.ordered { 0.0 } else { r.mmse_before - r.mmse_after }),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

pub fn garbling_transitivity(seed: u64, cases: usize) -> SuiteResult {
    let mut t = Tally::new("garbling_transitivity");
    let mut rng = rng_for(seed, t.name);
    for _ in 0..cases {
        let n_in = rand::Rng::gen_range(&mut rng, 1..=5);
        let inputs = random_support(&mut rng, n_in);
        let sizes: [usize; 3] = std::array::from_fn(|_| rand::Rng::gen_range(&mut rng, 1..=5));
        let w1 = random_channel(&mut rng, &inputs, sizes[0]);
        let g1 = random_channel(&mut rng, w1.output_support(), sizes[1]);
        let g2 = random_channel(&mut rng, g1.output_support(), sizes[2]);
        let outcome = (|| {
            let w2 = w1.then(&g1)?;
            let w3 = w2.then(&g2)?;
            let checks = [
                is_degraded(&w1, &w2, DEFAULT_FEASIBILITY_TOL)?,
                is_degraded(&w2, &w3, DEFAULT_FEASIBILITY_TOL)?,
                is_degraded(&w1, &w3, DEFAULT_FEASIBILITY_TOL)?,
            ];
            Ok::<_, Error>(checks.iter().map(|c| c.residual - c.tolerance).fold(f64::NEG_INFINITY, f64::max))
        })();
        match outcome {
            // A residual equal to the tolerance is reported infeasible.
            Ok(excess) => t.record(if excess >= 0.0 { excess.max(f64::MIN_POSITIVE) } else { 0.0 }),
            Err(e) => t.error(e),
        }
    }
    t.finish()
}

pub fn run_selftest(options: SelftestOptions) -> SelftestReport {
    let seed = options.seed;
    SelftestReport {
        seed,
        fault: options.fault,
        suites: vec![
            form_agreement(seed, 200),
            orthogonality(seed, 200, options.fault),
            lmmse_dominates_mmse(seed, 200),
            blackwell_ordering(seed, 500),
            garbling_transitivity(seed, 100),
        ],
    }
}
