//! Synthetic data shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use ttw::{
    coefficients_to_warps, forward, DstBasis, LabeledDataset, TrainConfig, WarpCoefficients,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_rows(rng: &mut ChaCha8Rng, n: usize, t: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..t).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// Two smooth bumps and a dip, evaluated at a real-valued position in `1..=T`.
pub fn bump_template(pos: f64, t_len: usize) -> f64 {
    let s = (pos - 1.0) / (t_len - 1) as f64;
    let g = |c: f64, w: f64| (-((s - c) / w).powi(2) / 2.0).exp();
    1.5 * g(0.3, 0.05) + g(0.62, 0.04) - 0.8 * g(0.8, 0.06)
}

pub fn sine_template(pos: f64, t_len: usize) -> f64 {
    (2.0 * PI * 2.0 * (pos - 1.0) / (t_len - 1) as f64).sin()
}

pub fn square_template(pos: f64, t_len: usize) -> f64 {
    if sine_template(pos, t_len) >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Random warp with `k` sine components, each coefficient uniform in
/// `[-amplitude, amplitude]`.
pub fn random_warp(rng: &mut ChaCha8Rng, t_len: usize, k: usize, amplitude: f64) -> Vec<f64> {
    let basis = DstBasis::new(t_len, k).unwrap();
    let coeffs: Vec<f64> = (0..k)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect();
    let a = WarpCoefficients::from_rows(vec![coeffs]).unwrap();
    coefficients_to_warps(&a, &basis).unwrap().row(0).to_vec()
}

/// `n` copies of `template`, each read through its own random warp, plus
/// Gaussian noise.
pub fn warped_copies(
    rng: &mut ChaCha8Rng,
    template: fn(f64, usize) -> f64,
    n: usize,
    t_len: usize,
    k: usize,
    amplitude: f64,
    noise: f64,
) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, noise).unwrap();
    (0..n)
        .map(|_| {
            random_warp(rng, t_len, k, amplitude)
                .iter()
                .map(|&p| template(p, t_len) + noise.sample(rng))
                .collect()
        })
        .collect()
}

/// Random instance whose warps are strictly increasing and keep every
/// interior position at least `margin` away from an integer, so small
/// perturbations toggle neither the clamp nor the sinc window.
pub fn smooth_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    t_len: usize,
    k: usize,
    margin: f64,
) -> (LabeledDataset, WarpCoefficients) {
    let basis = DstBasis::new(t_len, k).unwrap();
    loop {
        let data = LabeledDataset::unlabeled(normal_rows(rng, n, t_len)).unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(-0.5..0.5)).collect())
            .collect();
        let a = WarpCoefficients::from_rows(rows).unwrap();
        let tau = coefficients_to_warps(&a, &basis).unwrap();
        let ok = (0..n).all(|r| {
            let row = tau.row(r);
            row.windows(2).all(|w| w[1] > w[0] + margin)
                && row[1..t_len - 1].iter().all(|p| {
                    let f = p - p.floor();
                    f > margin && f < 1.0 - margin
                })
        });
        if ok {
            return (data, a);
        }
    }
}

/// Central finite difference of the forward loss in every coefficient.
pub fn finite_difference_gradient(
    data: &LabeledDataset,
    a: &WarpCoefficients,
    cfg: &TrainConfig,
    h: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.n() * a.k());
    for n in 0..a.n() {
        for k in 0..a.k() {
            let mut up = a.clone();
            let mut dn = a.clone();
            let v = a.matrix().get(n, k);
            up.matrix_mut().set(n, k, v + h);
            dn.matrix_mut().set(n, k, v - h);
            let lu = forward(data, &up, cfg).unwrap().loss;
            let ld = forward(data, &dn, cfg).unwrap().loss;
            out.push((lu - ld) / (2.0 * h));
        }
    }
    out
}

/// Same difference, but of the surrogate loss whose centroid is frozen at the
/// unperturbed value.
pub fn finite_difference_fixed_centroid(
    data: &LabeledDataset,
    a: &WarpCoefficients,
    cfg: &TrainConfig,
    h: f64,
) -> Vec<f64> {
    let y = forward(data, a, cfg).unwrap().centroid;
    let surrogate = |coeffs: &WarpCoefficients| {
        let fp = forward(data, coeffs, cfg).unwrap();
        let (n, t) = (fp.synchronized.len(), y.len());
        fp.synchronized
            .iter()
            .flat_map(|row| row.iter().zip(&y).map(|(v, c)| (v - c) * (v - c)))
            .sum::<f64>()
            / (n * t) as f64
    };
    let mut out = Vec::with_capacity(a.n() * a.k());
    for n in 0..a.n() {
        for k in 0..a.k() {
            let mut up = a.clone();
            let mut dn = a.clone();
            let v = a.matrix().get(n, k);
            up.matrix_mut().set(n, k, v + h);
            dn.matrix_mut().set(n, k, v - h);
            out.push((surrogate(&up) - surrogate(&dn)) / (2.0 * h));
        }
    }
    out
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-8))
        .fold(0.0, f64::max)
}
