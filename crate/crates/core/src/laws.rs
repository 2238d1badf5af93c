//! Finite joint laws that recur throughout the scenarios and tests.

use crate::prob::FiniteJoint;

fn v(x: f64) -> Vec<f64> {
    vec![x]
}

/// `X`, `N` independent Rademacher, `Y = X + N`.
pub fn rademacher_sum() -> FiniteJoint {
    scaled_rademacher_sum(1.0)
}

/// `X_s = s·X`, `Y_s = X_s + N` with `X`, `N` independent Rademacher.
pub fn scaled_rademacher_sum(scale: f64) -> FiniteJoint {
    let mut triples = Vec::with_capacity(4);
    for x in [-1.0, 1.0] {
        for n in [-1.0, 1.0] {
            let xs = scale * x;
            triples.push((v(xs), v(xs + n), 0.25));
        }
    }
    FiniteJoint::from_atoms(triples).expect("valid by construction")
}

/// Uniform `X ∈ {-1, +1}` observed through a binary symmetric channel with
/// flip probability `p`.
pub fn bsc_joint(p: f64) -> FiniteJoint {
    let mut triples = Vec::with_capacity(4);
    for x in [-1.0, 1.0] {
        for y in [-1.0, 1.0] {
            let q = if x == y { 1.0 - p } else { p };
            triples.push((v(x), v(y), 0.5 * q));
        }
    }
    FiniteJoint::from_atoms(triples).expect("valid by construction")
}

/// `X_n = ±√n` with probability `1/(2n)` each and `0` otherwise; `Y = 0`.
pub fn spike(n: u64) -> FiniteJoint {
    let nf = n as f64;
    let r = nf.sqrt();
    let tail = 1.0 / (2.0 * nf);
    FiniteJoint::from_atoms(vec![
        (v(-r), v(0.0), tail),
        (v(r), v(0.0), tail),
        (v(0.0), v(0.0), 1.0 - 1.0 / nf),
    ])
    .expect("valid by construction")
}

/// Rademacher `X`; `Y_n = X` with probability `1 − 1/n`, otherwise `±√n`
/// with probability `1/(2n)` each, drawn independently of `X`.
pub fn spike_measurement(n: u64) -> FiniteJoint {
    let nf = n as f64;
    let r = nf.sqrt();
    let mut triples = Vec::with_capacity(6);
    for x in [-1.0, 1.0] {
        triples.push((v(x), v(x), 0.5 * (1.0 - 1.0 / nf)));
        triples.push((v(x), v(r), 0.5 / (2.0 * nf)));
        triples.push((v(x), v(-r), 0.5 / (2.0 * nf)));
    }
    FiniteJoint::from_atoms(triples).expect("valid by construction")
}

/// `n` equally likely midpoints of a partition of `[lo, hi)` into `n` cells.
pub fn midpoint_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let w = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * w).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::moments_exact;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spike_has_unit_power() {
        for n in [1, 2, 7, 100] {
            let m = moments_exact(&spike(n));
            assert_abs_diff_eq!(m.second_moment_x, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spike_measurement_moments() {
        for n in [1u64, 2, 10, 200] {
            let nf = n as f64;
            let m = moments_exact(&spike_measurement(n));
            assert_abs_diff_eq!(m.c_y[(0, 0)], 2.0 - 1.0 / nf, epsilon = 1e-12);
            assert_abs_diff_eq!(m.c_xy[(0, 0)], 1.0 - 1.0 / nf, epsilon = 1e-12);
        }
        // √1 = 1 collides with the direct branch.
        assert_eq!(spike_measurement(1).y_support().len(), 2);
    }

    #[test]
    fn midpoint_grid_is_centered() {
        let g = midpoint_grid(-1.0, 1.0, 4);
        assert_eq!(g, vec![-0.75, -0.25, 0.25, 0.75]);
    }
}
