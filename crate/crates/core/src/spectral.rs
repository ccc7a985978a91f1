//! Fourier differentiation of periodic sample fields.
//!
//! Fields are uniform samples `f(x_j)`, `x_j = j·period/N`, of a smooth
//! periodic function. Derivatives are computed in frequency space with the
//! standard wavenumber layout (Nyquist bin zeroed for odd orders), with an
//! optional hard mode cap used by the stiff flow steppers.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::sync::Mutex;
use std::sync::OnceLock;

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn fft_forward(buf: &mut [Complex<f64>]) {
    let fft = planner().lock().unwrap().plan_fft_forward(buf.len());
    fft.process(buf);
}

fn fft_inverse(buf: &mut [Complex<f64>]) {
    let fft = planner().lock().unwrap().plan_fft_inverse(buf.len());
    fft.process(buf);
}

/// Signed frequency index of FFT bin `m` for length `n`.
#[inline]
fn freq_index(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Spectrum of a real field (forward FFT, unnormalized).
fn spectrum(f: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = f.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    buf
}

/// Inverse transform back to a real field (divides by N).
fn to_field(mut spec: Vec<Complex<f64>>) -> Vec<f64> {
    let n = spec.len();
    fft_inverse(&mut spec);
    spec.iter().map(|c| c.re / n as f64).collect()
}

/// Derivatives of orders `0..=max_k` of a periodic field, computed from one
/// forward transform. `mode_cap` zeroes every bin with `|freq| > cap` in all
/// returned orders (including order 0).
pub fn deriv_fields_multi(
    f: &[f64],
    period: f64,
    max_k: usize,
    mode_cap: Option<usize>,
) -> Vec<Vec<f64>> {
    let n = f.len();
    assert!(n >= 2 && period > 0.0);
    let base = spectrum(f);
    let kappa = std::f64::consts::TAU / period;
    let mut out = Vec::with_capacity(max_k + 1);
    for k in 0..=max_k {
        let mut spec = base.clone();
        for (m, c) in spec.iter_mut().enumerate() {
            let im = freq_index(m, n);
            if let Some(cap) = mode_cap {
                if im.unsigned_abs() as usize > cap {
                    *c = Complex::new(0.0, 0.0);
                    continue;
                }
            }
            if k == 0 {
                continue;
            }
            // Nyquist bin has no well-defined sign; zero it for odd orders.
            if n % 2 == 0 && m == n / 2 && k % 2 == 1 {
                *c = Complex::new(0.0, 0.0);
                continue;
            }
            let mult = Complex::new(0.0, kappa * im as f64).powu(k as u32);
            *c *= mult;
        }
        out.push(to_field(spec));
    }
    out
}

/// `k`-th derivative of a periodic field.
pub fn deriv_field(f: &[f64], period: f64, k: usize, mode_cap: Option<usize>) -> Vec<f64> {
    deriv_fields_multi(f, period, k, mode_cap).pop().unwrap()
}

/// Low-pass filter retaining modes with `|freq| ≤ cap`.
pub fn low_pass(f: &[f64], cap: usize) -> Vec<f64> {
    deriv_fields_multi(f, std::f64::consts::TAU, 0, Some(cap))
        .pop()
        .unwrap()
}

/// Mean value of a field.
pub fn mean(f: &[f64]) -> f64 {
    f.iter().sum::<f64>() / f.len() as f64
}

/// Integral of a periodic field over one period (trapezoid = exact mean rule).
pub fn integrate_periodic(f: &[f64], period: f64) -> f64 {
    mean(f) * period
}

/// Cumulative integral `F(x_j) = ∫_0^{x_j} f`, with the mean of `f`
/// contributing a linear (non-periodic) part. `F[0] = 0` exactly.
pub fn antiderivative(f: &[f64], period: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 2 && period > 0.0);
    let kappa = std::f64::consts::TAU / period;
    let mut spec = spectrum(f);
    let mean = spec[0].re / n as f64;
    for (m, c) in spec.iter_mut().enumerate() {
        let im = freq_index(m, n);
        // The mean goes into the linear part; the Nyquist bin has no
        // well-defined sign, so its (real) content is dropped.
        if im == 0 || (n % 2 == 0 && m == n / 2) {
            *c = Complex::new(0.0, 0.0);
            continue;
        }
        *c /= Complex::new(0.0, kappa * im as f64);
    }
    let osc = to_field(spec);
    let dx = period / n as f64;
    (0..n)
        .map(|j| mean * dx * j as f64 + osc[j] - osc[0])
        .collect()
}

/// Magnitude of the largest Fourier coefficient with `|freq| > cap`,
/// normalized by N; measures spectral content above the cap.
pub fn tail_energy(f: &[f64], cap: usize) -> f64 {
    let n = f.len();
    let spec = spectrum(f);
    let mut worst = 0.0f64;
    for (m, c) in spec.iter().enumerate() {
        if freq_index(m, n).unsigned_abs() as usize > cap {
            worst = worst.max(c.norm() / n as f64);
        }
    }
    worst
}

/// Complex spectrum amplitude (|coefficient|/N) of a given nonnegative mode.
pub fn mode_amplitude(f: &[f64], mode: usize) -> f64 {
    let n = f.len();
    assert!(mode <= n / 2);
    let spec = spectrum(f);
    spec[mode].norm() / n as f64
}

/// Phase of a given nonnegative mode of the field.
pub fn mode_phase(f: &[f64], mode: usize) -> f64 {
    let n = f.len();
    assert!(mode <= n / 2);
    let spec = spectrum(f);
    spec[mode].arg()
}
