//! Random finite joints, channels and Markov-degraded scenarios for the
//! property suites.

use rand::seq::index::sample;
use rand::Rng;

use crate::degradedness::{compose, Channel};
use crate::error::Result;
use crate::exact::mmse_exact;
use crate::numeric::squared_norm;
use crate::lab::{linear_grid, ExpectedOutcome, Realization, ScenarioSequence};
use crate::prob::FiniteJoint;
use crate::rng::{derive_seed, seeded_rng, LabRng};

/// `len` distinct scalar points drawn from a scaled integer lattice.
pub fn random_support(rng: &mut LabRng, len: usize) -> Vec<Vec<f64>> {
    let scale = rng.gen_range(0.25..2.0);
    let span = (4 * len).max(8);
    sample(rng, span, len)
        .into_iter()
        .map(|i| vec![(i as f64 - span as f64 / 2.0) * scale])
        .collect()
}

/// Probability vector with roughly `zero_fraction` of its entries set to zero
/// and at least one positive entry.
pub fn random_simplex(rng: &mut LabRng, len: usize, zero_fraction: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| if rng.gen_bool(zero_fraction) { 0.0 } else { rng.gen_range(0.01..1.0) })
        .collect();
    if w.iter().all(|&p| p == 0.0) {
        let i = rng.gen_range(0..len);
        w[i] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|p| p / s).collect()
}

/// Joint with up to `max_x` parameter and `max_y` measurement values. The
/// parameter is two-dimensional with probability 1/4.
pub fn random_joint(rng: &mut LabRng, max_x: usize, max_y: usize) -> FiniteJoint {
    let nx = rng.gen_range(1..=max_x);
    let ny = rng.gen_range(1..=max_y);
    let mut xs = random_support(rng, nx);
    if rng.gen_bool(0.25) {
        let second = random_support(rng, nx);
        for (x, s) in xs.iter_mut().zip(second) {
            x.push(s[0]);
        }
    }
    let ys = random_support(rng, ny);
    let flat = random_simplex(rng, nx * ny, 0.3);
    let pmf = flat.chunks(ny).map(<[f64]>::to_vec).collect();
    FiniteJoint::new(xs, ys, pmf).expect("valid by construction")
}

/// Channel from `input_support` to `n_out` fresh output values.
pub fn random_channel(rng: &mut LabRng, input_support: &[Vec<f64>], n_out: usize) -> Channel {
    let outputs = random_support(rng, n_out);
    let rows = input_support.iter().map(|_| random_simplex(rng, n_out, 0.3)).collect();
    Channel::new(input_support.to_vec(), outputs, rows).expect("valid by construction")
}

/// Channel on `support` into itself.
pub fn random_self_channel(rng: &mut LabRng, support: &[Vec<f64>]) -> Channel {
    let rows = support.iter().map(|_| random_simplex(rng, support.len(), 0.3)).collect();
    Channel::new(support.to_vec(), support.to_vec(), rows).expect("valid by construction")
}

/// `(1 − 1/n²)·I + R/n²` on the support of `r`.
pub fn vanishing_garbling(r: &Channel, n: u64) -> Result<Channel> {
    let w = 1.0 / (n as f64 * n as f64);
    let rows = r
        .matrix()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &p)| w * p + if i == j { 1.0 - w } else { 0.0 })
                .collect()
        })
        .collect();
    Channel::new(r.input_support().to_vec(), r.output_support().to_vec(), rows)
}

/// Random base joint, scaled to `E‖X‖² = 1`, with `Y_n = D_n(Y)` and
/// `D_n → I`; continuous at the base MMSE.
pub fn random_markov_scenario(seed: u64, index: u64) -> Result<ScenarioSequence> {
    let mut rng = seeded_rng(derive_seed(seed, "random_markov", index));
    let raw = random_joint(&mut rng, 6, 6);
    let power = raw.expect_x(squared_norm);
    let base = if power > 0.0 {
        let s = power.sqrt();
        raw.map(|x| x.iter().map(|c| c / s).collect(), <[f64]>::to_vec)?
    } else {
        raw
    };
    let r = random_self_channel(&mut rng, base.y_support());
    let limit = mmse_exact(&base)?.mmse;
    let expected = ExpectedOutcome::continuous(limit, "Y_n is a vanishing garbling of Y")?;
    let witness = r.clone();
    let realize_base = base.clone();
    Ok(ScenarioSequence::new(
        format!("random_markov_{index}"),
        "random finite joint with a vanishing random garbling of Y",
        move |n| Ok(Realization::Exact(compose(&realize_base, &vanishing_garbling(&r, n)?)?)),
        Realization::Exact(base),
        expected,
    )
    .with_witness(move |n| vanishing_garbling(&witness, n))
    .with_default_grid(linear_grid(1, 32)))
}
