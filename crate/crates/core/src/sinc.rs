//! Windowed-sinc reader: evaluates a discrete signal at real-valued positions.
//!
//! For a read position `τ` the output is
//! `Σ_{m = ⌊τ⌋-W}^{⌊τ⌋+W} x[m] · sinc(τ - m)` with samples outside `1..=T`
//! treated as zero.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TtwError};

/// Half-width of the rectangular window applied to the sinc kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SincWindow {
    half_width: usize,
}

impl SincWindow {
    pub const DEFAULT_HALF_WIDTH: usize = 10;

    pub fn new(half_width: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(TtwError::InvalidConfig(
                "sinc window half-width must be at least 1".into(),
            ));
        }
        Ok(Self { half_width })
    }

    pub fn half_width(self) -> usize {
        self.half_width
    }
}

impl Default for SincWindow {
    fn default() -> Self {
        Self {
            half_width: Self::DEFAULT_HALF_WIDTH,
        }
    }
}

/// Normalized sinc, `sin(πt)/(πt)` with `sinc(0) = 1`.
pub fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let pt = PI * t;
        pt.sin() / pt
    }
}

/// Derivative of [`sinc`]: `(πt·cos(πt) - sin(πt)) / (πt²)`, zero at the origin.
pub fn sinc_derivative(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        let pt = PI * t;
        (pt * pt.cos() - pt.sin()) / (PI * t * t)
    }
}

/// Value and position-derivative of the windowed reader at one position.
///
/// Uses `sin(π(f + j)) = (-1)^j sin(πf)` so each position costs a single
/// `sin_cos` call regardless of the window width. The fractional part `f` is
/// exactly zero at integer positions, which keeps integer reads exact.
#[inline]
fn read_at(
    x: &[f64],
    tau: f64,
    half_width: usize,
    want_value: bool,
    want_slope: bool,
) -> (f64, f64) {
    let t_len = x.len() as i64;
    let base = tau.floor();
    let frac = tau - base;
    let base = base as i64;
    let w = half_width as i64;

    // m in [base - w, base + w] intersected with [1, T]; j = base - m.
    let m_lo = (base - w).max(1);
    let m_hi = (base + w).min(t_len);
    if m_lo > m_hi {
        return (0.0, 0.0);
    }

    let (s, c) = (PI * frac).sin_cos();
    let mut value = 0.0;
    let mut slope = 0.0;
    for m in m_lo..=m_hi {
        let xm = x[(m - 1) as usize];
        let j = base - m;
        let u = frac + j as f64;
        if u == 0.0 {
            // sinc(0) = 1, sinc'(0) = 0
            value += xm;
            continue;
        }
        let sign = if j & 1 == 0 { 1.0 } else { -1.0 };
        let sin_u = sign * s;
        if want_value {
            value += xm * sin_u / (PI * u);
        }
        if want_slope {
            let cos_u = sign * c;
            slope += xm * (cos_u / u - sin_u / (PI * u * u));
        }
    }
    (value, slope)
}

/// Reads `x` at every position of `tau`: `out[t] = x̄(τ[t])`.
pub fn warp_signal(x: &[f64], tau: &[f64], window: SincWindow) -> Vec<f64> {
    tau.iter()
        .map(|&p| read_at(x, p, window.half_width, true, false).0)
        .collect()
}

/// Element-wise derivative `∂x̃[t]/∂τ[t]` of [`warp_signal`].
pub fn warp_signal_derivative(x: &[f64], tau: &[f64], window: SincWindow) -> Vec<f64> {
    tau.iter()
        .map(|&p| read_at(x, p, window.half_width, false, true).1)
        .collect()
}

/// Both the warped signal and its derivative, written into the given buffers.
pub(crate) fn warp_with_derivative_into(
    x: &[f64],
    tau: &[f64],
    window: SincWindow,
    values: &mut [f64],
    slopes: &mut [f64],
) {
    for ((p, v), d) in tau.iter().zip(values.iter_mut()).zip(slopes.iter_mut()) {
        let (val, slope) = read_at(x, *p, window.half_width, true, true);
        *v = val;
        *d = slope;
    }
}
