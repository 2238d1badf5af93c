//! Built-in scenario registry.

use rand::Rng;

use super::{
    geometric_grid, linear_grid, ExpectedOutcome, Metric, OutcomeKind, Realization, SamplingPlan, ScenarioSequence,
};
use crate::degradedness::{compose, Channel};
use crate::error::{Error, Result};
use crate::laws;
use crate::mc::Binning;
use crate::prob::{floor_quantize, rademacher, uniform, FiniteJoint, Sampler};

/// Number of grid points carrying the uniform noise of the additive-noise family.
pub const NOISE_LEVELS: usize = 32;

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn v(x: f64) -> Vec<f64> {
    vec![x]
}

fn exact(j: FiniteJoint) -> Result<Realization> {
    Ok(Realization::Exact(j))
}

fn expected(kind: OutcomeKind, limit: f64, sequence: f64, source: &str) -> ExpectedOutcome {
    ExpectedOutcome::new(kind, limit, sequence, source).expect("registry outcomes are consistent")
}

/// `X_n = X + γM`, `Y_n = X + N + λW` with `X`, `N` Rademacher and `M`, `W`
/// uniform over `k` midpoints of `[-√3, √3]`, all independent.
pub fn additive_noise_joint(gamma: f64, lambda: f64, k: usize) -> Result<FiniteJoint> {
    if k == 0 {
        return Err(Error::InvalidConfig("noise grid needs at least one point".into()));
    }
    let grid = laws::midpoint_grid(-SQRT3, SQRT3, k);
    let p = 0.25 / (k * k) as f64;
    let mut triples = Vec::with_capacity(4 * k * k);
    for x in [-1.0, 1.0] {
        for n in [-1.0, 1.0] {
            for m in &grid {
                for w in &grid {
                    triples.push((v(x + gamma * m), v(x + n + lambda * w), p));
                }
            }
        }
    }
    FiniteJoint::from_atoms(triples)
}

/// `(⌊X⌋_γ, ⌊Y⌋_λ)` of a finite joint.
pub fn quantized_joint(base: &FiniteJoint, gamma: f64, lambda: f64) -> Result<FiniteJoint> {
    floor_quantize(&[0.0], gamma)?;
    floor_quantize(&[0.0], lambda)?;
    base.map(
        |x| floor_quantize(x, gamma).expect("step checked"),
        |y| floor_quantize(y, lambda).expect("step checked"),
    )
}

/// Exact joint of `(⌊X⌋_γ, ⌊X⌋_λ)` for `X` uniform on `[0, 1)`.
pub fn quantized_uniform_joint(gamma: f64, lambda: f64) -> Result<FiniteJoint> {
    for a in [gamma, lambda] {
        if a <= 0.0 || !a.is_finite() {
            return Err(Error::NonPositiveStep(a));
        }
    }
    let cells = (1.0 / gamma).ceil();
    if cells > 1e6 {
        return Err(Error::InvalidConfig(format!("step {gamma} gives more than 10^6 cells")));
    }
    let mut triples = Vec::new();
    for i in 0..cells as u64 {
        let lo = i as f64 * gamma;
        let hi = ((i + 1) as f64 * gamma).min(1.0);
        if hi <= lo {
            continue;
        }
        let mut j = (lo / lambda).floor() as i64;
        loop {
            let cell_lo = j as f64 * lambda;
            let cell_hi = (j + 1) as f64 * lambda;
            if cell_lo >= hi {
                break;
            }
            let mass = hi.min(cell_hi) - lo.max(cell_lo);
            if mass > 0.0 {
                triples.push((v(lo), v(cell_lo), mass));
            }
            j += 1;
        }
    }
    FiniteJoint::from_atoms(triples)
}

fn example1() -> ScenarioSequence {
    ScenarioSequence::new(
        "example1",
        "spike parameter X_n = ±√n w.p. 1/(2n), else 0; Y_n = 0",
        |n| exact(laws::spike(n)),
        Realization::Exact(FiniteJoint::point_mass(v(0.0), v(0.0)).expect("point mass")),
        expected(
            OutcomeKind::DiscontinuousLsc,
            0.0,
            1.0,
            "mmse_n = E[X_n²] = 1 for every n; the limit X = 0 is known",
        ),
    )
    .with_default_grid(linear_grid(1, 100))
    .with_coupling(|n, rng| {
        let u = uniform(rng, 0.0, 1.0);
        let r = (n as f64).sqrt();
        let x_n = if u < 0.5 / n as f64 {
            -r
        } else if u < 1.0 / n as f64 {
            r
        } else {
            0.0
        };
        (v(x_n), v(0.0))
    })
}

fn example2() -> ScenarioSequence {
    let realize = |n: u64| {
        let nf = n as f64;
        Ok(Realization::Sampled(Sampler::new(format!("X ~ U[0,1), Y ~ Bernoulli(1/2), Y_n = Y + X/{n}"), move |rng| {
            let x = uniform(rng, 0.0, 1.0);
            let y = if rng.gen::<bool>() { 1.0 } else { 0.0 };
            (v(x), v(y + x / nf))
        })))
    };
    let limit = Sampler::new("X ~ U[0,1), Y ~ Bernoulli(1/2) independent", |rng| {
        let x = uniform(rng, 0.0, 1.0);
        let y = if rng.gen::<bool>() { 1.0 } else { 0.0 };
        (v(x), v(y))
    });
    let plan = SamplingPlan::default()
        .with_grid_step(|i| match i {
            Some(n) => 1.0 / (64.0 * n as f64),
            None => 1.0 / 64.0,
        })
        .with_binning(|i| match i {
            Some(n) => Binning::PerDimension(64 * (n as usize + 1)),
            None => Binning::CubeRoot,
        });
    ScenarioSequence::new(
        "example2",
        "X uniform on [0,1), Y Bernoulli(1/2) independent, Y_n = Y + X/n",
        realize,
        Realization::Sampled(limit),
        expected(
            OutcomeKind::DiscontinuousUsc,
            1.0 / 12.0,
            0.0,
            "X is recovered from the fractional part of n·Y_n; Y alone carries no information (Var X = 1/12)",
        ),
    )
    .with_sampling(plan)
    .with_default_grid(geometric_grid(1, 16))
    .with_analytic_moments(|i| match i {
        Some(n) => {
            let nf = n as f64;
            (1.0 / 3.0, 0.5 + 0.5 / nf + 1.0 / (3.0 * nf * nf))
        }
        None => (1.0 / 3.0, 0.5),
    })
    .with_coupling(|_, rng| {
        let x = uniform(rng, 0.0, 1.0);
        (v(x), v(x))
    })
}

fn example3() -> ScenarioSequence {
    ScenarioSequence::new(
        "example3",
        "X, N Rademacher; X_n = n/(n+1)·X, Y_n = X_n + N",
        |n| exact(laws::scaled_rademacher_sum(n as f64 / (n as f64 + 1.0))),
        Realization::Exact(laws::rademacher_sum()),
        expected(
            OutcomeKind::DiscontinuousUsc,
            0.5,
            0.0,
            "the four values of Y_n are distinct; Y = X + N with X, N Rademacher leaves mmse 1/2",
        ),
    )
    .with_coupling(|n, rng| {
        let x = rademacher(rng);
        (v(n as f64 / (n as f64 + 1.0) * x), v(x))
    })
}

fn example4() -> ScenarioSequence {
    let realize = |n: u64| {
        let nf = n as f64;
        Ok(Realization::Sampled(Sampler::new(format!("X, N ~ U[-√3, √3], Y_n = X + N/{n}"), move |rng| {
            let x = uniform(rng, -SQRT3, SQRT3);
            let noise = uniform(rng, -SQRT3, SQRT3);
            (v(x), v(x + noise / nf))
        })))
    };
    let limit = Sampler::new("X ~ U[-√3, √3], Y = X", |rng| {
        let x = uniform(rng, -SQRT3, SQRT3);
        (v(x), v(x))
    });
    ScenarioSequence::new(
        "example4",
        "X, N uniform on [-√3, √3] independent, Y_n = X + N/n",
        realize,
        Realization::Sampled(limit),
        expected(OutcomeKind::Continuous, 0.0, 0.0, "mmse_n ≤ Var(N/n) = 1/n² → 0 = mmse of X from Y = X"),
    )
    .with_sampling(SamplingPlan::default())
    .with_analytic_moments(|i| match i {
        Some(n) => (1.0, 1.0 + 1.0 / (n * n) as f64),
        None => (1.0, 1.0),
    })
    .with_coupling(|_, rng| {
        let x = uniform(rng, -SQRT3, SQRT3);
        (v(x), v(x))
    })
}

struct Path {
    suffix: &'static str,
    label: &'static str,
    gamma: fn(u64) -> f64,
    lambda: fn(u64) -> f64,
}

static PATHS: [Path; 3] = [
    Path { suffix: "", label: "γ = λ = 1/n", gamma: inv, lambda: inv },
    Path { suffix: "_fine_x", label: "γ = 1/n², λ = 1/n", gamma: inv_sq, lambda: inv },
    Path { suffix: "_fine_y", label: "γ = 1/n, λ = 1/n²", gamma: inv, lambda: inv_sq },
];

fn inv(n: u64) -> f64 {
    1.0 / n as f64
}

fn inv_sq(n: u64) -> f64 {
    1.0 / (n as f64 * n as f64)
}

fn additive(path: &'static Path) -> ScenarioSequence {
    ScenarioSequence::new(
        format!("cor1_additive{}", path.suffix),
        format!(
            "X, N Rademacher, Y = X + N; X_n = X + γM, Y_n = Y + λW with M, W uniform on {NOISE_LEVELS} points of [-√3, √3]; {}",
            path.label
        ),
        move |n| exact(additive_noise_joint((path.gamma)(n), (path.lambda)(n), NOISE_LEVELS)?),
        Realization::Exact(laws::rademacher_sum()),
        expected(
            OutcomeKind::Continuous,
            0.5,
            0.5,
            "vanishing independent additive noise on both sides preserves mmse 1/2",
        ),
    )
    .with_coupling(move |n, rng| {
        let x = rademacher(rng);
        let i = rng.gen_range(0..NOISE_LEVELS);
        let m = laws::midpoint_grid(-SQRT3, SQRT3, NOISE_LEVELS)[i];
        (v(x + (path.gamma)(n) * m), v(x))
    })
}

fn quantization(path: &'static Path) -> ScenarioSequence {
    ScenarioSequence::new(
        format!("cor2_quantization{}", path.suffix),
        format!("X, N Rademacher, Y = X + N; X_n = ⌊X⌋_γ, Y_n = ⌊Y⌋_λ; {}", path.label),
        move |n| exact(quantized_joint(&laws::rademacher_sum(), (path.gamma)(n), (path.lambda)(n))?),
        Realization::Exact(laws::rademacher_sum()),
        expected(OutcomeKind::Continuous, 0.5, 0.5, "vanishing floor quantization on both sides preserves mmse 1/2"),
    )
    .with_coupling(move |n, rng| {
        let x = v(rademacher(rng));
        (floor_quantize(&x, (path.gamma)(n)).expect("positive step"), x)
    })
}

fn markov_degraded_family() -> ScenarioSequence {
    let base = laws::bsc_joint(0.1);
    let limit = base.clone();
    ScenarioSequence::new(
        "markov_degraded_family",
        "X uniform on {-1, +1}, Y = BSC(0.1)(X), Y_n = BSC(0.1/n)(Y)",
        move |n| exact(compose(&base, &Channel::bsc(0.1 / n as f64)?)?),
        Realization::Exact(limit),
        expected(
            OutcomeKind::Continuous,
            0.36,
            0.36,
            "Y_n is a garbling of Y converging to Y; 1 − (1 − 2·0.1)² = 0.36",
        ),
    )
    .with_witness(|n| Channel::bsc(0.1 / n as f64))
    .with_coupling(|_, rng| {
        let x = v(rademacher(rng));
        (x.clone(), x)
    })
}

fn lmmse_mixture() -> ScenarioSequence {
    ScenarioSequence::new(
        "lmmse_mixture",
        "X Rademacher; Y_n = X w.p. 1 − 1/n, else ±√n independent of X; linear estimators only",
        |n| exact(laws::spike_measurement(n)),
        Realization::Exact(laws::bsc_joint(0.0)),
        expected(
            OutcomeKind::DiscontinuousLsc,
            0.0,
            0.5,
            "lmmse_n = 1 − (1 − 1/n)²/(2 − 1/n) → 1/2 while Y = X gives 0",
        ),
    )
    .with_metric(Metric::Lmmse)
    .with_default_grid(linear_grid(1, 200))
    .with_witness(|n| {
        let r = (n as f64).sqrt();
        let tail = 0.5 / n as f64;
        let row = |x: f64| vec![(v(x), 1.0 - 1.0 / n as f64), (v(r), tail), (v(-r), tail)];
        Channel::from_transitions(vec![v(-1.0), v(1.0)], vec![row(-1.0), row(1.0)])
    })
    .with_coupling(|_, rng| {
        let x = v(rademacher(rng));
        (x.clone(), x)
    })
}

/// Every registered scenario, in listing order.
pub fn builtin_scenarios() -> Vec<ScenarioSequence> {
    let mut out = vec![example1(), example2(), example3(), example4()];
    out.extend(PATHS.iter().map(additive));
    out.extend(PATHS.iter().map(quantization));
    out.push(markov_degraded_family());
    out.push(lmmse_mixture());
    out
}

pub fn scenario_names() -> Vec<String> {
    builtin_scenarios().iter().map(|s| s.name().to_string()).collect()
}

pub fn find_scenario(name: &str) -> Result<ScenarioSequence> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}
