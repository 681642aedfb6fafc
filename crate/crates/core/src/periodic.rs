//! Uniformly sampled periodic functions on `T¹ = [0, 1)`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Forward DFT normalized so that `f(s_j) = Σ_k c_k e^{2πi k s_j}`.
pub fn dft(samples: &[Complex64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

pub fn idft(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    buf
}

/// Signed wavenumber of DFT slot `k` for length `n`. The Nyquist slot of an
/// even length is reported as `+n/2`; callers split it symmetrically.
#[inline]
pub fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 { k as i64 } else { k as i64 - n as i64 }
}

/// Spectral derivative of order `order` of real periodic samples.
pub fn spectral_derivative(samples: &[f64], order: u32) -> Vec<f64> {
    let n = samples.len();
    let c: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut hat = dft(&c);
    for (k, h) in hat.iter_mut().enumerate() {
        let w = wavenumber(k, n);
        if n.is_multiple_of(2) && w as usize == n / 2 && order % 2 == 1 {
            *h = Complex64::new(0.0, 0.0);
            continue;
        }
        *h *= Complex64::new(0.0, 2.0 * PI * w as f64).powu(order);
    }
    idft(&hat).iter().map(|c| c.re).collect()
}

/// Four-point (cubic Lagrange) interpolation of periodic samples at `s`.
pub fn cubic(samples: &[f64], s: f64) -> f64 {
    let n = samples.len();
    let x = s.rem_euclid(1.0) * n as f64;
    let i = x.floor() as i64;
    let t = x - i as f64;
    let at = |k: i64| samples[k.rem_euclid(n as i64) as usize];
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
}

/// Trigonometric interpolation of real periodic samples at `s`.
pub fn trig(samples: &[f64], s: f64) -> f64 {
    let c: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let hat = dft(&c);
    trig_eval(&hat, s)
}

/// Evaluates a real trigonometric interpolant from its DFT coefficients.
pub fn trig_eval(hat: &[Complex64], s: f64) -> f64 {
    let n = hat.len();
    let mut acc = hat[0].re;
    let w = Complex64::from_polar(1.0, 2.0 * PI * s);
    let mut p = w;
    for k in 1..=n / 2 {
        let term = (hat[k] * p).re;
        acc += if n.is_multiple_of(2) && k == n / 2 { term } else { 2.0 * term };
        p *= w;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|j| f(j as f64 / n as f64)).collect()
    }

    #[test]
    fn spectral_derivative_of_trig_polynomial() {
        let f = |s: f64| (2.0 * PI * s).sin() + 0.5 * (6.0 * PI * s).cos();
        let df = |s: f64| 2.0 * PI * (2.0 * PI * s).cos() - 3.0 * PI * (6.0 * PI * s).sin();
        let d = spectral_derivative(&samples(32, f), 1);
        for (j, v) in d.iter().enumerate() {
            assert!((v - df(j as f64 / 32.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn interpolants_reproduce_smooth_data() {
        let f = |s: f64| (2.0 * PI * s).cos() * 0.3 + 1.0;
        let u = samples(64, f);
        for s in [0.013, 0.5, 0.9871] {
            assert!((trig(&u, s) - f(s)).abs() < 1e-13);
            assert!((cubic(&u, s) - f(s)).abs() < 1e-5);
            assert!((cubic(&u, s + 1.0) - f(s)).abs() < 1e-5);
        }
    }
}
