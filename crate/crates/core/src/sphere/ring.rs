//! Orthonormal real Fourier transform on a periodic ring of sites.
//!
//! Coefficients are stored per wavenumber `k = 0..=n/2` as `(re, im)` pairs,
//! scaled so that the sum of squared coefficients equals the plain sum of
//! squares over the sites.

use rustfft::{num_complex::Complex64, FftPlanner};

fn scale(n: usize, k: usize) -> f64 {
    let nf = n as f64;
    if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
        1.0 / nf.sqrt()
    } else {
        (2.0 / nf).sqrt()
    }
}

/// Number of wavenumbers `0..=n/2` on a ring of `n` sites.
pub fn ring_wavenumbers(n: usize) -> usize {
    n / 2 + 1
}

pub fn ring_analysis(values: &[f64]) -> Vec<(f64, f64)> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (0..ring_wavenumbers(n))
        .map(|k| {
            let s = scale(n, k);
            let c = buf[k] * s;
            if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                (c.re, 0.0)
            } else {
                (c.re, c.im)
            }
        })
        .collect()
}

pub fn ring_synthesis(coeffs: &[(f64, f64)], n: usize) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (k, &(re, im)) in coeffs.iter().enumerate().take(ring_wavenumbers(n)) {
        buf[k] = Complex64::new(re, im) * scale(n, k);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Per-wavenumber power `re² + im²`.
pub fn ring_power_spectrum(values: &[f64]) -> Vec<f64> {
    ring_analysis(values)
        .into_iter()
        .map(|(re, im)| re * re + im * im)
        .collect()
}

/// Removes every wavenumber above `k_max`.
pub fn ring_truncate(values: &[f64], k_max: usize) -> Vec<f64> {
    let mut c = ring_analysis(values);
    for (k, ck) in c.iter_mut().enumerate() {
        if k > k_max {
            *ck = (0.0, 0.0);
        }
    }
    ring_synthesis(&c, values.len())
}
