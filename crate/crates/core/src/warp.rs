//! Sine-series parameterization of warping functions and the monotone clamp.
//!
//! `τ_n[t] = t + Σ_{k=1..K} a_k^n · sin(πk(t-1)/(T-1))`, so every warp starts
//! at 1 and ends at T regardless of the coefficients.

use std::f64::consts::PI;

use crate::error::{Result, TtwError};
use crate::series::{Matrix, WarpCoefficients, WarpingFunctions};

/// Cached sine basis `B[t][k] = sin(πk(t-1)/(T-1))`, stored T×K.
#[derive(Debug, Clone, PartialEq)]
pub struct DstBasis {
    values: Matrix,
}

impl DstBasis {
    pub fn new(t_len: usize, k: usize) -> Result<Self> {
        if t_len < 2 {
            return Err(TtwError::TooShort {
                index: 1,
                len: t_len,
            });
        }
        if k == 0 {
            return Err(TtwError::InvalidConfig("K must be at least 1".into()));
        }
        let mut values = Matrix::zeros(t_len, k);
        let denom = (t_len - 1) as f64;
        // rows 0 and T-1 stay exactly zero; sin(πk) only rounds to ~1e-16
        for t in 1..t_len - 1 {
            let row = values.row_mut(t);
            for (ki, b) in row.iter_mut().enumerate() {
                *b = (PI * (ki + 1) as f64 * t as f64 / denom).sin();
            }
        }
        Ok(Self { values })
    }

    pub fn t_len(&self) -> usize {
        self.values.rows()
    }

    pub fn k(&self) -> usize {
        self.values.cols()
    }

    /// Basis row for 0-based time index `t`.
    pub fn row(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.values
    }
}

/// Evaluates the sine series for every coefficient row. No clamping.
pub fn coefficients_to_warps(a: &WarpCoefficients, basis: &DstBasis) -> Result<WarpingFunctions> {
    if a.k() != basis.k() {
        return Err(TtwError::Dimension {
            what: "warp coefficients",
            expected_rows: a.n(),
            expected_cols: basis.k(),
            found_rows: a.n(),
            found_cols: a.k(),
        });
    }
    let mut tau = Matrix::zeros(a.n(), basis.t_len());
    for n in 0..a.n() {
        write_warp_row(a.row(n), basis, tau.row_mut(n));
    }
    Ok(WarpingFunctions::from_matrix(tau))
}

pub(crate) fn write_warp_row(coeffs: &[f64], basis: &DstBasis, out: &mut [f64]) {
    for (t, slot) in out.iter_mut().enumerate() {
        let offset: f64 = basis.row(t).iter().zip(coeffs).map(|(b, a)| b * a).sum();
        *slot = (t + 1) as f64 + offset;
    }
}

/// Single left-to-right pass per row: any sample below its predecessor is
/// raised to the predecessor's value.
pub fn project_monotone(tau: &WarpingFunctions) -> WarpingFunctions {
    let mut out = tau.clone();
    for n in 0..out.n() {
        clamp_row(out.row_mut(n));
    }
    out
}

/// In-place clamp of one row. Returns true when the last sample was raised.
pub(crate) fn clamp_row(row: &mut [f64]) -> bool {
    let last = row.len() - 1;
    let end_before = row[last];
    for t in 1..row.len() {
        if row[t] < row[t - 1] {
            row[t] = row[t - 1];
        }
    }
    row[last] != end_before
}

/// `∂τ_n[t]/∂a_k^n`; identical for every series, so just the basis.
pub fn warp_jacobian(basis: &DstBasis) -> &Matrix {
    basis.matrix()
}
