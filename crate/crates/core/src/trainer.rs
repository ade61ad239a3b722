//! Gradient-trained alignment: forward pass, analytic backward pass and Adam.
//!
//! Each iteration builds warps from the coefficients, clamps them to be
//! monotone, reads every series through the windowed sinc, and scores the
//! within-group MSE. The gradient chains the per-sample slope of the sinc
//! reader with the sine basis; the clamp is treated as identity on the way
//! back.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TtwError};
use crate::series::{
    loss_and_centroid, AlignmentResult, LabeledDataset, Matrix, TimeSeries, WarpCoefficients,
    WarpingFunctions,
};
use crate::sinc::{warp_with_derivative_into, SincWindow};
use crate::warp::{clamp_row, write_warp_row, DstBasis};

/// Which derivative of the loss with respect to the warps to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    /// `2/(NT) · (x̃_n[t] - y[t]) · ∂x̃_n[t]/∂τ_n[t]`, centroid held fixed.
    #[default]
    Printed,
    /// Total derivative including the centroid's dependence on every row.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of sine components per warp.
    pub k: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub window_half_width: usize,
    /// Reserved; the training path is deterministic and does not draw from it.
    pub seed: u64,
    #[serde(default)]
    pub gradient: GradientMode,
    /// Stop once the relative loss change between consecutive iterations
    /// falls below this value. `None` runs all iterations.
    #[serde(default)]
    pub stop_rel_change: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 8,
            iterations: 100,
            step_size: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            window_half_width: SincWindow::DEFAULT_HALF_WIDTH,
            seed: 0,
            gradient: GradientMode::Printed,
            stop_rel_change: None,
        }
    }
}

impl TrainConfig {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TtwError::InvalidConfig(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad(format!(
                "step size must be positive, got {}",
                self.step_size
            ));
        }
        for (name, beta) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(beta > 0.0 && beta < 1.0) {
                return bad(format!("adam {name} must lie in (0, 1), got {beta}"));
            }
        }
        if !(self.adam_epsilon.is_finite() && self.adam_epsilon > 0.0) {
            return bad(format!(
                "adam epsilon must be positive, got {}",
                self.adam_epsilon
            ));
        }
        if self.window_half_width == 0 {
            return bad("window half-width must be at least 1".into());
        }
        if let Some(tol) = self.stop_rel_change {
            if !(tol.is_finite() && tol > 0.0) {
                return bad(format!("stopping tolerance must be positive, got {tol}"));
            }
        }
        Ok(())
    }

    pub fn window(&self) -> SincWindow {
        SincWindow::new(self.window_half_width).unwrap_or_default()
    }
}

/// Adam accumulators, shaped like the coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Matrix,
    second_moment: Matrix,
    step_count: u64,
}

impl AdamState {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            first_moment: Matrix::zeros(n, k),
            second_moment: Matrix::zeros(n, k),
            step_count: 0,
        }
    }

    pub fn first_moment(&self) -> &Matrix {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &Matrix {
        &self.second_moment
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One bias-corrected Adam step, applied in place.
pub fn adam_update(
    a: &mut WarpCoefficients,
    gradient: &Matrix,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    let (n, k) = (a.n(), a.k());
    for (what, m) in [
        ("gradient", gradient),
        ("adam first moment", &state.first_moment),
        ("adam second moment", &state.second_moment),
    ] {
        if m.rows() != n || m.cols() != k {
            return Err(TtwError::Dimension {
                what,
                expected_rows: n,
                expected_cols: k,
                found_rows: m.rows(),
                found_cols: m.cols(),
            });
        }
    }
    state.step_count += 1;
    let step = state.step_count as i32;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(step);
    let c2 = 1.0 - b2.powi(step);
    let params = a.matrix_mut().as_mut_slice();
    let m = state.first_moment.as_mut_slice();
    let v = state.second_moment.as_mut_slice();
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(gradient.as_slice())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.step_size * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
    }
    Ok(())
}

/// Everything the forward pass produced, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// Clamped warps actually used to read the signals.
    pub warps: WarpingFunctions,
    pub synchronized: Vec<Vec<f64>>,
    /// `∂x̃_n[t]/∂τ_n[t]` at the clamped warps.
    pub slopes: Vec<Vec<f64>>,
    pub centroid: Vec<f64>,
    pub loss: f64,
    /// Rows whose last sample the clamp lifted away from T.
    pub endpoint_violations: usize,
}

// warp row, synchronized row, slopes, endpoint lifted
type RowPass = (Vec<f64>, Vec<f64>, Vec<f64>, bool);

/// Holds the precomputed basis and window for one dataset and config.
#[derive(Debug, Clone)]
pub struct Aligner<'a> {
    data: &'a LabeledDataset,
    basis: DstBasis,
    window: SincWindow,
    mode: GradientMode,
}

impl<'a> Aligner<'a> {
    pub fn new(data: &'a LabeledDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            data,
            basis: DstBasis::new(data.series_len(), cfg.k)?,
            window: cfg.window(),
            mode: cfg.gradient,
        })
    }

    pub fn basis(&self) -> &DstBasis {
        &self.basis
    }

    fn check_shape(&self, a: &WarpCoefficients) -> Result<()> {
        if a.n() != self.data.len() || a.k() != self.basis.k() {
            return Err(TtwError::Dimension {
                what: "warp coefficients",
                expected_rows: self.data.len(),
                expected_cols: self.basis.k(),
                found_rows: a.n(),
                found_cols: a.k(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, a: &WarpCoefficients) -> Result<ForwardPass> {
        self.check_shape(a)?;
        let t_len = self.basis.t_len();
        let rows: Vec<RowPass> = self
            .data
            .series()
            .par_iter()
            .enumerate()
            .map(|(n, x)| {
                let mut tau = vec![0.0; t_len];
                write_warp_row(a.row(n), &self.basis, &mut tau);
                let lifted = clamp_row(&mut tau);
                let mut values = vec![0.0; t_len];
                let mut slopes = vec![0.0; t_len];
                warp_with_derivative_into(x.values(), &tau, self.window, &mut values, &mut slopes);
                (tau, values, slopes, lifted)
            })
            .collect();

        let mut warp_rows = Vec::with_capacity(rows.len());
        let mut synchronized = Vec::with_capacity(rows.len());
        let mut slopes = Vec::with_capacity(rows.len());
        let mut endpoint_violations = 0;
        for (tau, values, slope, lifted) in rows {
            warp_rows.push(tau);
            synchronized.push(values);
            slopes.push(slope);
            endpoint_violations += usize::from(lifted);
        }
        let (loss, centroid) = loss_and_centroid(&synchronized);
        Ok(ForwardPass {
            warps: WarpingFunctions::from_rows(warp_rows)?,
            synchronized,
            slopes,
            centroid,
            loss,
            endpoint_violations,
        })
    }

    /// `∂D/∂A = (∂D/∂τ) · B`, an N×K matrix.
    pub fn backward(&self, fp: &ForwardPass) -> Matrix {
        let n = fp.synchronized.len();
        let t_len = fp.centroid.len();
        let k = self.basis.k();
        let scale = 2.0 / (n * t_len) as f64;

        // Residual mean over rows, zero up to rounding since y is the row mean.
        let correction: Vec<f64> = match self.mode {
            GradientMode::Printed => vec![0.0; t_len],
            GradientMode::Exact => {
                let mut c = vec![0.0; t_len];
                for row in &fp.synchronized {
                    for ((ci, v), y) in c.iter_mut().zip(row).zip(&fp.centroid) {
                        *ci += v - y;
                    }
                }
                c.iter_mut().for_each(|ci| *ci /= n as f64);
                c
            }
        };

        let grad_rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|row| {
                let mut g = vec![0.0; k];
                let xs = &fp.synchronized[row];
                let slopes = &fp.slopes[row];
                for t in 0..t_len {
                    let d_tau = scale * (xs[t] - fp.centroid[t] - correction[t]) * slopes[t];
                    for (gk, b) in g.iter_mut().zip(self.basis.row(t)) {
                        *gk += d_tau * b;
                    }
                }
                g
            })
            .collect();
        let mut out = Matrix::zeros(n, k);
        for (r, g) in grad_rows.into_iter().enumerate() {
            out.row_mut(r).copy_from_slice(&g);
        }
        out
    }
}

/// Forward pass for coefficients `a` under `cfg`.
pub fn forward(
    data: &LabeledDataset,
    a: &WarpCoefficients,
    cfg: &TrainConfig,
) -> Result<ForwardPass> {
    Aligner::new(data, cfg)?.forward(a)
}

/// Gradient of the loss with respect to the coefficients for a forward pass
/// previously computed on `data`.
pub fn backward(fp: &ForwardPass, data: &LabeledDataset, cfg: &TrainConfig) -> Result<Matrix> {
    let aligner = Aligner::new(data, cfg)?;
    if fp.synchronized.len() != data.len() || fp.centroid.len() != data.series_len() {
        return Err(TtwError::Dimension {
            what: "forward pass",
            expected_rows: data.len(),
            expected_cols: data.series_len(),
            found_rows: fp.synchronized.len(),
            found_cols: fp.centroid.len(),
        });
    }
    Ok(aligner.backward(fp))
}

/// Iteration state of a training run.
#[derive(Debug)]
pub struct Trainer<'a> {
    aligner: Aligner<'a>,
    cfg: TrainConfig,
    coefficients: WarpCoefficients,
    adam: AdamState,
    loss_trace: Vec<f64>,
}

impl<'a> Trainer<'a> {
    /// Starts from all-zero coefficients (identity warps).
    pub fn new(data: &'a LabeledDataset, cfg: &TrainConfig) -> Result<Self> {
        let aligner = Aligner::new(data, cfg)?;
        let (n, k) = (data.len(), cfg.k);
        Ok(Self {
            aligner,
            cfg: cfg.clone(),
            coefficients: WarpCoefficients::zeros(n, k),
            adam: AdamState::new(n, k),
            loss_trace: Vec::with_capacity(cfg.iterations),
        })
    }

    /// One forward/backward/update iteration. Returns the pre-update loss.
    pub fn step(&mut self) -> Result<f64> {
        let fp = self.aligner.forward(&self.coefficients)?;
        if !fp.loss.is_finite() {
            return Err(TtwError::NonFiniteLoss {
                iteration: self.loss_trace.len() + 1,
            });
        }
        let grad = self.aligner.backward(&fp);
        adam_update(&mut self.coefficients, &grad, &mut self.adam, &self.cfg)?;
        self.loss_trace.push(fp.loss);
        Ok(fp.loss)
    }

    pub fn coefficients(&self) -> &WarpCoefficients {
        &self.coefficients
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    /// Final forward pass at the trained coefficients.
    pub fn finish(self) -> Result<AlignmentResult> {
        let fp = self.aligner.forward(&self.coefficients)?;
        if !fp.loss.is_finite() {
            return Err(TtwError::NonFiniteLoss {
                iteration: self.loss_trace.len() + 1,
            });
        }
        Ok(AlignmentResult {
            centroid: TimeSeries::from_vec_unchecked(fp.centroid),
            synchronized: fp
                .synchronized
                .into_iter()
                .map(TimeSeries::from_vec_unchecked)
                .collect(),
            warps: fp.warps,
            coefficients: self.coefficients,
            loss_trace: self.loss_trace,
            config: self.cfg,
            endpoint_violations: fp.endpoint_violations,
        })
    }
}

/// Runs the full optimization from zero coefficients.
pub fn train(data: &LabeledDataset, cfg: &TrainConfig) -> Result<AlignmentResult> {
    train_with_progress(data, cfg, |_, _| {})
}

/// As [`train`], calling `progress(iteration, loss)` after every iteration
/// (1-based).
pub fn train_with_progress(
    data: &LabeledDataset,
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<AlignmentResult> {
    let mut trainer = Trainer::new(data, cfg)?;
    let mut previous: Option<f64> = None;
    for i in 1..=cfg.iterations {
        let loss = trainer.step()?;
        progress(i, loss);
        if let (Some(tol), Some(prev)) = (cfg.stop_rel_change, previous) {
            if (prev - loss).abs() <= tol * prev.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        previous = Some(loss);
    }
    trainer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: Vec<Vec<f64>>) -> LabeledDataset {
        LabeledDataset::unlabeled(rows).unwrap()
    }

    fn ramp_pair() -> LabeledDataset {
        ds(vec![
            (0..20).map(|t| (t as f64 * 0.4).sin()).collect(),
            (0..20).map(|t| (t as f64 * 0.4 + 0.5).sin()).collect(),
        ])
    }

    #[test]
    fn defaults_follow_reference_settings() {
        let c = TrainConfig::default();
        assert_eq!((c.k, c.iterations, c.window_half_width), (8, 100, 10));
        assert_eq!(c.step_size, 0.01);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = TrainConfig::default();
        let cases = [
            TrainConfig {
                k: 0,
                ..base.clone()
            },
            TrainConfig {
                iterations: 0,
                ..base.clone()
            },
            TrainConfig {
                step_size: -1.0,
                ..base.clone()
            },
            TrainConfig {
                adam_beta1: 1.0,
                ..base.clone()
            },
            TrainConfig {
                adam_beta2: 0.0,
                ..base.clone()
            },
            TrainConfig {
                adam_epsilon: 0.0,
                ..base.clone()
            },
            TrainConfig {
                window_half_width: 0,
                ..base.clone()
            },
            TrainConfig {
                stop_rel_change: Some(-1.0),
                ..base
            },
        ];
        for c in cases {
            assert!(
                matches!(c.validate(), Err(TtwError::InvalidConfig(_))),
                "{c:?}"
            );
        }
    }

    #[test]
    fn zero_coefficients_reproduce_inputs() {
        let data = ramp_pair();
        let cfg = TrainConfig::default().with_k(3);
        let fp = forward(&data, &WarpCoefficients::zeros(2, 3), &cfg).unwrap();
        for (s, x) in fp.synchronized.iter().zip(data.series()) {
            assert_eq!(s.as_slice(), x.values());
        }
        let (loss, _) = crate::series::within_group_loss(&data.rows()).unwrap();
        assert_eq!(fp.loss, loss);
    }

    #[test]
    fn single_series_has_zero_loss_and_gradient() {
        let data = ds(vec![(0..15).map(|t| (t as f64).cos()).collect()]);
        let cfg = TrainConfig::default().with_k(4);
        let a = WarpCoefficients::from_rows(vec![vec![0.3, -0.2, 0.1, 0.05]]).unwrap();
        let fp = forward(&data, &a, &cfg).unwrap();
        assert_eq!(fp.loss, 0.0);
        let g = backward(&fp, &data, &cfg).unwrap();
        assert!(g.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identical_rows_have_zero_gradient() {
        let x: Vec<f64> = (0..25).map(|t| (t as f64 * 0.3).sin()).collect();
        let data = ds(vec![x.clone(), x.clone(), x]);
        let cfg = TrainConfig::default().with_k(5);
        let fp = forward(&data, &WarpCoefficients::zeros(3, 5), &cfg).unwrap();
        assert_eq!(fp.loss, 0.0);
        let g = backward(&fp, &data, &cfg).unwrap();
        assert!(g.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let data = ramp_pair();
        let cfg = TrainConfig::default().with_k(3);
        assert!(forward(&data, &WarpCoefficients::zeros(3, 3), &cfg).is_err());
        assert!(forward(&data, &WarpCoefficients::zeros(2, 4), &cfg).is_err());
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let cfg = TrainConfig::default();
        let mut a = WarpCoefficients::from_rows(vec![vec![0.5, -1.0]]).unwrap();
        let before = a.clone();
        let mut st = AdamState::new(1, 2);
        adam_update(&mut a, &Matrix::zeros(1, 2), &mut st, &cfg).unwrap();
        assert_eq!(a, before);
        assert!(st.first_moment().as_slice().iter().all(|v| *v == 0.0));
        assert!(st.second_moment().as_slice().iter().all(|v| *v == 0.0));
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_step_size_against_gradient() {
        let cfg = TrainConfig::default();
        let g = Matrix::from_rows(vec![vec![3.0, -0.002, 40.0]]).unwrap();
        let mut a = WarpCoefficients::zeros(1, 3);
        let mut st = AdamState::new(1, 3);
        adam_update(&mut a, &g, &mut st, &cfg).unwrap();
        // m̂ = g, v̂ = g², so the step is lr · g / (|g| + eps)
        for (p, gi) in a.row(0).iter().zip(g.as_slice()) {
            let expected = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((p - expected).abs() < 1e-15);
            assert!((p.abs() - 0.01).abs() < 1e-7);
            assert_eq!(p.signum(), -gi.signum());
        }
    }

    #[test]
    fn adam_accumulates_over_steps() {
        let cfg = TrainConfig::default();
        let g = Matrix::from_rows(vec![vec![1.0, 0.0]]).unwrap();
        let mut a = WarpCoefficients::zeros(1, 2);
        let mut st = AdamState::new(1, 2);
        adam_update(&mut a, &g, &mut st, &cfg).unwrap();
        adam_update(&mut a, &g, &mut st, &cfg).unwrap();
        assert_eq!(st.step_count(), 2);
        assert!(st.second_moment().get(0, 0) > 0.0);
        assert_eq!(st.second_moment().get(0, 1), 0.0);
        assert!(adam_update(&mut a, &Matrix::zeros(2, 2), &mut st, &cfg).is_err());
    }

    #[test]
    fn train_on_identical_signals_stays_put() {
        let x: Vec<f64> = (0..30).map(|t| (t as f64 * 0.2).sin()).collect();
        let data = ds(vec![x.clone(), x.clone()]);
        let r = train(&data, &TrainConfig::default().with_iterations(20)).unwrap();
        assert_eq!(r.loss_trace, vec![0.0; 20]);
        assert_eq!(r.centroid.values(), x.as_slice());
    }

    #[test]
    fn train_reduces_loss_on_shifted_pair() {
        let data = ramp_pair();
        let r = train(
            &data,
            &TrainConfig::default().with_k(2).with_iterations(150),
        )
        .unwrap();
        assert_eq!(r.loss_trace.len(), 150);
        assert!(r.loss_trace.last().unwrap() < &r.loss_trace[0]);
        r.check().unwrap();
    }

    #[test]
    fn early_stop_shortens_trace() {
        let x: Vec<f64> = (0..30).map(|t| (t as f64 * 0.2).sin()).collect();
        let data = ds(vec![x.clone(), x]);
        let cfg = TrainConfig {
            stop_rel_change: Some(1e-6),
            ..TrainConfig::default()
        };
        let r = train(&data, &cfg).unwrap();
        assert_eq!(r.loss_trace.len(), 2);
    }

    #[test]
    fn exact_and_printed_gradients_agree() {
        // The residuals sum to zero across rows, so the centroid term of the
        // total derivative vanishes.
        let data = ds(vec![
            (0..30).map(|t| (t as f64 * 0.31).sin()).collect(),
            (0..30).map(|t| (t as f64 * 0.27 + 0.4).sin()).collect(),
            (0..30).map(|t| (t as f64 * 0.35 - 0.2).cos()).collect(),
        ]);
        let a = WarpCoefficients::from_rows(vec![
            vec![0.2, -0.1, 0.05],
            vec![-0.3, 0.1, 0.0],
            vec![0.1, 0.2, -0.1],
        ])
        .unwrap();
        let printed = TrainConfig::default().with_k(3);
        let exact = TrainConfig {
            gradient: GradientMode::Exact,
            ..printed.clone()
        };
        let fp = forward(&data, &a, &printed).unwrap();
        let gp = backward(&fp, &data, &printed).unwrap();
        let ge = backward(&fp, &data, &exact).unwrap();
        for (p, e) in gp.as_slice().iter().zip(ge.as_slice()) {
            assert!((p - e).abs() <= 1e-14 * p.abs().max(1e-3));
        }
    }
}
