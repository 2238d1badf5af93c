//! Linear MMSE from second-order statistics.
//!
//! `C_Y` is inverted through its symmetric eigendecomposition. Eigenvalues at
//! or below `RANK_TOL_RELATIVE · λ_max` are treated as zero, which projects the
//! measurement onto its linearly independent part when `C_Y` is singular.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::tail_len;
use crate::prob::MomentSummary;

pub const RANK_TOL_RELATIVE: f64 = 1e-9;
/// Agreement required between the second-moment and the trace forms.
pub const FORM_AGREEMENT_TOL: f64 = 1e-8;
/// Negative values above `-CLAMP_TOL` are clamped to zero.
pub const CLAMP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LmmseResult {
    /// `A = C_XY C_Y⁺`
    pub gain: DMatrix<f64>,
    /// `b = η_X − A η_Y`
    pub offset: DVector<f64>,
    pub value: f64,
    pub c_y_rank: usize,
    pub clamped: bool,
    /// `|‖X‖² − ‖X̂‖² − trace form|`
    pub form_gap: f64,
}

struct Spectral {
    pinv: DMatrix<f64>,
    rank: usize,
}

fn spectral_pinv(c: &DMatrix<f64>) -> Spectral {
    let m = c.nrows();
    if m == 0 {
        return Spectral { pinv: DMatrix::zeros(0, 0), rank: 0 };
    }
    let eig = SymmetricEigen::new(c.clone());
    let lmax = eig.eigenvalues.max();
    let mut pinv = DMatrix::zeros(m, m);
    let mut rank = 0;
    if lmax > 0.0 {
        let thr = RANK_TOL_RELATIVE * lmax;
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l > thr {
                let v = eig.eigenvectors.column(i);
                pinv += (v * v.transpose()) / l;
                rank += 1;
            }
        }
    }
    Spectral { pinv, rank }
}

pub fn lmmse(moments: &MomentSummary) -> LmmseResult {
    let Spectral { pinv, rank } = spectral_pinv(&moments.c_y);
    let gain = &moments.c_xy * &pinv;
    let offset = &moments.eta_x - &gain * &moments.eta_y;

    let explained = (&moments.c_xy * &pinv * moments.c_xy.transpose()).trace();
    let trace_form = moments.c_x.trace() - explained;

    // E‖X̂‖² = ‖η_X‖² + trace(A C_Y Aᵀ) since E[X̂] = η_X.
    let estimate_power = moments.eta_x.norm_squared() + (&gain * &moments.c_y * gain.transpose()).trace();
    let difference_form = moments.second_moment_x - estimate_power;
    let form_gap = (difference_form - trace_form).abs();

    let (value, clamped) = if trace_form < 0.0 {
        debug_assert!(trace_form >= -CLAMP_TOL * moments.second_moment_x.max(1.0));
        (0.0, true)
    } else {
        (trace_form, false)
    };
    LmmseResult { gain, offset, value, c_y_rank: rank, clamped, form_gap }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SequenceVerdict {
    Converges,
    DivergesAsPredicted,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LmmseTrajectory {
    pub per_n: Vec<f64>,
    pub limit_value: f64,
    /// Largest `|value_n − limit|` over the tail window.
    pub tail_deviation: f64,
    pub verdict: SequenceVerdict,
}

/// LMMSE along a moment sequence against its limit.
///
/// The tail window is the last quarter of the sequence. `expected_gap`, when
/// given, is the registered `lim value_n − limit` that a known
/// counterexample predicts.
pub fn lmmse_sequence_limit(
    sequence: &[MomentSummary],
    limit: &MomentSummary,
    tol: f64,
    expected_gap: Option<f64>,
) -> Result<LmmseTrajectory> {
    if sequence.is_empty() {
        return Err(Error::InvalidConfig("empty moment sequence".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let limit_result = lmmse(limit);
    if limit_result.c_y_rank < limit.dim_y() {
        return Err(Error::SingularLimitCovariance { rank: limit_result.c_y_rank, dim: limit.dim_y() });
    }
    let per_n: Vec<f64> = sequence.iter().map(|m| lmmse(m).value).collect();
    let limit_value = limit_result.value;
    let tail = &per_n[per_n.len() - tail_len(per_n.len())..];
    let tail_deviation = tail.iter().map(|v| (v - limit_value).abs()).fold(0.0, f64::max);
    let verdict = if tail_deviation <= tol {
        SequenceVerdict::Converges
    } else if expected_gap.is_some_and(|g| tail.iter().all(|v| (v - limit_value - g).abs() <= tol)) {
        SequenceVerdict::DivergesAsPredicted
    } else {
        SequenceVerdict::Violation
    };
    Ok(LmmseTrajectory { per_n, limit_value, tail_deviation, verdict })
}
