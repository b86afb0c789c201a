use std::f64::consts::PI;

/// Nodes (descending) and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Index of `(l, m)` in triangular l-major storage.
#[inline]
pub fn lm_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Real-basis orthonormal associated Legendre functions at `mu = sin(latitude)`
/// for all `0 <= m <= l <= truncation`, in l-major order.
///
/// The functions are normalized so that `L_lm(mu) cos(m phi)` and
/// `L_lm(mu) sin(m phi)` have unit L2 norm on the unit sphere; no
/// Condon–Shortley phase.
pub fn normalized_legendre(truncation: usize, mu: f64) -> Vec<f64> {
    let t = truncation;
    let mut out = vec![0.0; lm_index(t, t) + 1];
    let s = (1.0 - mu * mu).max(0.0).sqrt();
    // Complex-orthonormal P̄_mm by recurrence on m.
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=t {
        if m > 0 {
            let mf = m as f64;
            pmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        let real_basis = if m == 0 { 1.0 } else { 2f64.sqrt() };
        out[lm_index(m, m)] = pmm * real_basis;
        if m == t {
            break;
        }
        let mf = m as f64;
        let mut p_lm2 = pmm;
        let mut p_lm1 = (2.0 * mf + 3.0).sqrt() * mu * pmm;
        out[lm_index(m + 1, m)] = p_lm1 * real_basis;
        for l in (m + 2)..=t {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            let p = a * (mu * p_lm1 - b * p_lm2);
            out[lm_index(l, m)] = p * real_basis;
            p_lm2 = p_lm1;
            p_lm1 = p;
        }
    }
    out
}
