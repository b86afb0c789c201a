//! Gauss–Legendre grids, spherical-harmonic transforms with triangular
//! truncation, power spectra and quadrature-weighted norms.
//!
//! Coefficients use the real orthonormal basis: the stored complex value
//! `c_lm` for `m > 0` multiplies `L_lm(mu) (cos(m phi), -sin(m phi))`, with
//! `L_lm` carrying the `sqrt(2)` factor. Hence `sum_l P_l` equals the
//! integral of the squared field over the unit sphere (measure `4 pi`).

mod legendre;
mod ring;

pub use legendre::{gauss_legendre_nodes, lm_index, normalized_legendre};
pub use ring::{ring_analysis, ring_power_spectrum, ring_synthesis, ring_truncate, ring_wavenumbers};

use crate::error::{check_len, HdaError, Result};
use crate::parallel::Exec;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Rectangular Gauss–Legendre grid on the sphere.
    Gauss,
    /// One-dimensional periodic ring, `nlat = 1`, unit weights.
    Ring,
}

/// Lattice metadata plus quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub kind: GridKind,
    pub nlat: usize,
    pub nlon: usize,
    /// Sine of latitude, descending. `[0.0]` on a ring.
    pub latitudes: Vec<f64>,
    /// Latitude quadrature weights.
    pub weights: Vec<f64>,
    /// Weight of each longitude node.
    pub lon_weight: f64,
}

impl Grid {
    pub fn gauss(nlat: usize, nlon: usize) -> Self {
        assert!(nlat >= 1 && nlon >= 1);
        let (latitudes, weights) = gauss_legendre_nodes(nlat);
        Grid {
            kind: GridKind::Gauss,
            nlat,
            nlon,
            latitudes,
            weights,
            lon_weight: 2.0 * PI / nlon as f64,
        }
    }

    pub fn ring(n: usize) -> Self {
        assert!(n >= 1);
        Grid {
            kind: GridKind::Ring,
            nlat: 1,
            nlon: n,
            latitudes: vec![0.0],
            weights: vec![1.0],
            lon_weight: 1.0,
        }
    }

    /// Smallest Gauss grid that represents truncation `T` exactly.
    pub fn minimal_for(truncation: usize) -> Self {
        Grid::gauss(truncation + 1, 2 * truncation + 1)
    }

    pub fn npoints(&self) -> usize {
        self.nlat * self.nlon
    }

    /// Quadrature weight of grid point `(i, j)`.
    pub fn point_weight(&self, lat: usize) -> f64 {
        self.weights[lat] * self.lon_weight
    }

    /// Sum of all point weights: `4 pi` on the sphere, `n` on a ring.
    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.lon_weight * self.nlon as f64
    }

    pub fn check_truncation(&self, truncation: usize) -> Result<()> {
        if self.nlat < truncation + 1 || self.nlon < 2 * truncation + 1 {
            return Err(HdaError::GridTooCoarse {
                nlat: self.nlat,
                nlon: self.nlon,
                truncation,
            });
        }
        Ok(())
    }
}

/// Values on a `(variable, latitude, longitude)` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid, names: Vec<String>) -> Self {
        let len = names.len() * grid.npoints();
        GridField {
            grid,
            names,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(grid: Grid, names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        check_len("grid field values", names.len() * grid.npoints(), values.len())?;
        Ok(GridField {
            grid,
            names,
            values,
        })
    }

    pub fn nvar(&self) -> usize {
        self.names.len()
    }

    pub fn var(&self, v: usize) -> &[f64] {
        let n = self.grid.npoints();
        &self.values[v * n..(v + 1) * n]
    }

    pub fn var_mut(&mut self, v: usize) -> &mut [f64] {
        let n = self.grid.npoints();
        &mut self.values[v * n..(v + 1) * n]
    }
}

/// Triangular-truncation coefficients, `2 * dof_count(T)` reals per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub truncation: usize,
    pub names: Vec<String>,
    /// Per variable, `(re, im)` interleaved in l-major `(l, m)` order.
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(truncation: usize, names: Vec<String>) -> Self {
        let len = names.len() * 2 * dof_count(truncation);
        SpectralField {
            truncation,
            names,
            coeffs: vec![0.0; len],
        }
    }

    pub fn nvar(&self) -> usize {
        self.names.len()
    }

    pub fn var(&self, v: usize) -> &[f64] {
        let n = 2 * dof_count(self.truncation);
        &self.coeffs[v * n..(v + 1) * n]
    }

    pub fn var_mut(&mut self, v: usize) -> &mut [f64] {
        let n = 2 * dof_count(self.truncation);
        &mut self.coeffs[v * n..(v + 1) * n]
    }

    /// `(re, im)` of coefficient `(l, m)` of variable `v`.
    pub fn get(&self, v: usize, l: usize, m: usize) -> (f64, f64) {
        let c = self.var(v);
        let k = 2 * lm_index(l, m);
        (c[k], c[k + 1])
    }

    pub fn set(&mut self, v: usize, l: usize, m: usize, re: f64, im: f64) {
        let k = 2 * lm_index(l, m);
        let c = self.var_mut(v);
        c[k] = re;
        c[k + 1] = if m == 0 { 0.0 } else { im };
    }

    /// Signed spatial-mean coefficient (the `(0, 0)` mode).
    pub fn mean_coefficient(&self, v: usize) -> f64 {
        self.var(v)[0]
    }

    pub fn sq_norm(&self, v: usize) -> f64 {
        self.var(v).iter().map(|c| c * c).sum()
    }
}

/// Complex coefficients retained by triangular truncation `T`.
pub fn dof_count(truncation: usize) -> usize {
    (truncation + 1) * (truncation + 2) / 2
}

/// Legendre functions tabulated at the latitudes of a grid.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    pub truncation: usize,
    values: Vec<Vec<f64>>,
}

impl LegendreTable {
    pub fn new(grid: &Grid, truncation: usize) -> Self {
        let values = grid
            .latitudes
            .iter()
            .map(|&mu| normalized_legendre(truncation, mu))
            .collect();
        LegendreTable { truncation, values }
    }

    pub fn at(&self, lat: usize) -> &[f64] {
        &self.values[lat]
    }
}

fn require_gauss(grid: &Grid) -> Result<()> {
    if grid.kind != GridKind::Gauss {
        return Err(HdaError::Config(
            "spherical-harmonic transforms need a Gauss grid".into(),
        ));
    }
    Ok(())
}

/// Grid-point to spectral transform: longitudinal DFT then Gauss–Legendre
/// quadrature against the Legendre functions, per variable.
pub fn sh_analysis(field: &GridField, truncation: usize) -> Result<SpectralField> {
    let grid = &field.grid;
    require_gauss(grid)?;
    grid.check_truncation(truncation)?;
    let table = LegendreTable::new(grid, truncation);
    let per_var = Exec::auto().map_range(field.nvar(), |v| {
        analyse_var(grid, &table, field.var(v))
    });
    Ok(SpectralField {
        truncation,
        names: field.names.clone(),
        coeffs: per_var.concat(),
    })
}

fn analyse_var(grid: &Grid, table: &LegendreTable, values: &[f64]) -> Vec<f64> {
    let t = table.truncation;
    let nlon = grid.nlon;
    let fft = FftPlanner::new().plan_fft_forward(nlon);
    let mut out = vec![0.0; 2 * dof_count(t)];
    let mut row = vec![Complex64::new(0.0, 0.0); nlon];
    for i in 0..grid.nlat {
        for (r, &v) in row.iter_mut().zip(&values[i * nlon..(i + 1) * nlon]) {
            *r = Complex64::new(v, 0.0);
        }
        fft.process(&mut row);
        let lp = table.at(i);
        let w = grid.weights[i] * grid.lon_weight;
        for m in 0..=t {
            let fm = row[m] * w;
            for l in m..=t {
                let k = lm_index(l, m);
                out[2 * k] += lp[k] * fm.re;
                if m > 0 {
                    out[2 * k + 1] += lp[k] * fm.im;
                }
            }
        }
    }
    out
}

/// Evaluates the truncated series on `grid`.
pub fn sh_synthesis(spec: &SpectralField, grid: &Grid) -> Result<GridField> {
    require_gauss(grid)?;
    grid.check_truncation(spec.truncation)?;
    let table = LegendreTable::new(grid, spec.truncation);
    let per_var = Exec::auto().map_range(spec.nvar(), |v| {
        synthesise_var(grid, &table, spec.var(v))
    });
    Ok(GridField {
        grid: grid.clone(),
        names: spec.names.clone(),
        values: per_var.concat(),
    })
}

fn synthesise_var(grid: &Grid, table: &LegendreTable, coeffs: &[f64]) -> Vec<f64> {
    let t = table.truncation;
    let nlon = grid.nlon;
    let ifft = FftPlanner::new().plan_fft_inverse(nlon);
    let mut out = vec![0.0; grid.npoints()];
    let mut row = vec![Complex64::new(0.0, 0.0); nlon];
    for i in 0..grid.nlat {
        row.iter_mut().for_each(|r| *r = Complex64::new(0.0, 0.0));
        let lp = table.at(i);
        for m in 0..=t {
            let mut g = Complex64::new(0.0, 0.0);
            for l in m..=t {
                let k = lm_index(l, m);
                g += Complex64::new(coeffs[2 * k], coeffs[2 * k + 1]) * lp[k];
            }
            row[m] = g;
        }
        ifft.process(&mut row);
        for (o, r) in out[i * nlon..(i + 1) * nlon].iter_mut().zip(&row) {
            *o = r.re;
        }
    }
    out
}

/// Keeps the coefficients with `l <= t_low`.
pub fn truncate(spec: &SpectralField, t_low: usize) -> Result<SpectralField> {
    if t_low > spec.truncation {
        return Err(HdaError::TruncationIncrease {
            from: spec.truncation,
            to: t_low,
        });
    }
    let n_low = 2 * dof_count(t_low);
    let coeffs = (0..spec.nvar())
        .flat_map(|v| spec.var(v)[..n_low].iter().copied())
        .collect();
    Ok(SpectralField {
        truncation: t_low,
        names: spec.names.clone(),
        coeffs,
    })
}

/// `P_l = sum over m <= l of re² + im²` for `l = 0..=T`.
pub fn power_spectrum(spec: &SpectralField, var: usize) -> Result<Vec<f64>> {
    if var >= spec.nvar() {
        return Err(HdaError::OutOfRange {
            what: "spectral variable",
            index: var,
            len: spec.nvar(),
        });
    }
    let c = spec.var(var);
    Ok((0..=spec.truncation)
        .map(|l| {
            (0..=l)
                .map(|m| {
                    let k = 2 * lm_index(l, m);
                    c[k] * c[k] + c[k + 1] * c[k + 1]
                })
                .sum()
        })
        .collect())
}

/// Quadrature-weighted squared norm over the variables in `vars`.
pub fn weighted_sq_norm(field: &GridField, vars: &[usize]) -> f64 {
    let grid = &field.grid;
    vars.iter()
        .map(|&v| {
            let vals = field.var(v);
            (0..grid.nlat)
                .map(|i| {
                    let row = &vals[i * grid.nlon..(i + 1) * grid.nlon];
                    grid.point_weight(i) * row.iter().map(|x| x * x).sum::<f64>()
                })
                .sum::<f64>()
        })
        .sum()
}

/// Measure-weighted spatial variance: `weighted_sq_norm` minus the squared
/// mean mode. Equals `sum_{l >= 1} P_l` for band-limited fields.
pub fn weighted_variance(field: &GridField, var: usize) -> f64 {
    let grid = &field.grid;
    let vals = field.var(var);
    let measure = grid.total_measure();
    let integral: f64 = (0..grid.nlat)
        .map(|i| {
            grid.point_weight(i) * vals[i * grid.nlon..(i + 1) * grid.nlon].iter().sum::<f64>()
        })
        .sum();
    let mean_mode_sq = integral * integral / measure;
    weighted_sq_norm(field, &[var]) - mean_mode_sq
}

/// Spectral representation used by the diagnostics: spherical harmonics on a
/// Gauss grid or Fourier modes on a ring.
#[derive(Debug, Clone)]
pub enum SpectralBackend {
    Sphere { grid: Grid, truncation: usize },
    Ring { n: usize },
}

impl SpectralBackend {
    pub fn for_grid(grid: &Grid) -> Self {
        match grid.kind {
            GridKind::Ring => SpectralBackend::Ring { n: grid.nlon },
            GridKind::Gauss => SpectralBackend::Sphere {
                truncation: (grid.nlat - 1).min((grid.nlon - 1) / 2),
                grid: grid.clone(),
            },
        }
    }

    /// Number of spectral degrees (wavenumbers) reported.
    pub fn n_degrees(&self) -> usize {
        match self {
            SpectralBackend::Sphere { truncation, .. } => truncation + 1,
            SpectralBackend::Ring { n } => ring_wavenumbers(*n),
        }
    }

    pub fn npoints(&self) -> usize {
        match self {
            SpectralBackend::Sphere { grid, .. } => grid.npoints(),
            SpectralBackend::Ring { n } => *n,
        }
    }

    /// Power spectrum of one variable given as grid-point values.
    pub fn power_spectrum(&self, values: &[f64]) -> Result<Vec<f64>> {
        check_len("spectral backend values", self.npoints(), values.len())?;
        match self {
            SpectralBackend::Ring { .. } => Ok(ring_power_spectrum(values)),
            SpectralBackend::Sphere { grid, truncation } => {
                let f = GridField::from_values(grid.clone(), vec!["v".into()], values.to_vec())?;
                power_spectrum(&sh_analysis(&f, *truncation)?, 0)
            }
        }
    }

    /// Projects grid-point values onto degrees `<= k`.
    pub fn truncate_values(&self, values: &[f64], k: usize) -> Result<Vec<f64>> {
        check_len("spectral backend values", self.npoints(), values.len())?;
        match self {
            SpectralBackend::Ring { .. } => Ok(ring_truncate(values, k)),
            SpectralBackend::Sphere { grid, truncation } => {
                let f = GridField::from_values(grid.clone(), vec!["v".into()], values.to_vec())?;
                let s = truncate(&sh_analysis(&f, *truncation)?, k.min(*truncation))?;
                Ok(sh_synthesis(&s, grid)?.values)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(t: usize, nvar: usize, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = (0..nvar).map(|v| format!("v{v}")).collect();
        let mut s = SpectralField::zeros(t, names);
        for v in 0..nvar {
            for l in 0..=t {
                for m in 0..=l {
                    s.set(v, l, m, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
            }
        }
        s
    }

    fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
            / scale
    }

    #[test]
    fn dof_counts() {
        assert_eq!(dof_count(15), 136);
        assert_eq!(dof_count(0), 1);
        let enumerated = (0..=31usize).map(|l| l + 1).sum::<usize>();
        assert_eq!(dof_count(31), enumerated);
        assert_eq!(dof_count(31), 528);
    }

    #[test]
    fn constant_field_has_only_mean_mode() {
        let grid = Grid::gauss(16, 31);
        let c = 2.5;
        let f = GridField::from_values(grid.clone(), vec!["c".into()], vec![c; grid.npoints()])
            .unwrap();
        let s = sh_analysis(&f, 15).unwrap();
        let expect = c * (4.0 * PI).sqrt();
        assert!((s.mean_coefficient(0) - expect).abs() < 1e-12);
        for (k, x) in s.var(0).iter().enumerate().skip(1) {
            assert!(x.abs() < 1e-12, "coefficient {k} = {x}");
        }
    }

    #[test]
    fn zero_field_gives_zero_coefficients() {
        let f = GridField::zeros(Grid::gauss(16, 31), vec!["z".into()]);
        assert!(sh_analysis(&f, 15).unwrap().coeffs.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn round_trip_at_t15_on_minimal_grid() {
        let spec = random_spec(15, 2, 7);
        let grid = Grid::gauss(16, 31);
        let back = sh_analysis(&sh_synthesis(&spec, &grid).unwrap(), 15).unwrap();
        assert!(max_rel_diff(&back.coeffs, &spec.coeffs) < 1e-10);
        for v in 0..2 {
            for l in 0..=15 {
                assert_eq!(back.get(v, l, 0).1, 0.0);
            }
        }
    }

    #[test]
    fn band_limited_resampling_on_finer_grid() {
        let spec = random_spec(15, 1, 11);
        let fine = Grid::gauss(64, 127);
        let back = sh_analysis(&sh_synthesis(&spec, &fine).unwrap(), 15).unwrap();
        assert!(max_rel_diff(&back.coeffs, &spec.coeffs) < 1e-10);
    }

    #[test]
    fn y10_is_antisymmetric_and_proportional_to_sin_lat() {
        let mut spec = SpectralField::zeros(15, vec!["y".into()]);
        spec.set(0, 1, 0, 1.0, 0.0);
        let grid = Grid::gauss(16, 31);
        let f = sh_synthesis(&spec, &grid).unwrap();
        let k = (3.0 / (4.0 * PI)).sqrt();
        for i in 0..16 {
            for j in 0..31 {
                let v = f.values[i * 31 + j];
                assert!((v - k * grid.latitudes[i]).abs() < 1e-12);
                let mirror = f.values[(15 - i) * 31 + j];
                assert!((v + mirror).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let f = GridField::zeros(Grid::gauss(15, 31), vec!["z".into()]);
        assert!(matches!(sh_analysis(&f, 15), Err(HdaError::GridTooCoarse { .. })));
        let f = GridField::zeros(Grid::gauss(16, 30), vec!["z".into()]);
        assert!(matches!(sh_analysis(&f, 15), Err(HdaError::GridTooCoarse { .. })));
        let s = SpectralField::zeros(15, vec!["z".into()]);
        assert!(sh_synthesis(&s, &Grid::gauss(8, 31)).is_err());
    }

    #[test]
    fn truncation_semantics() {
        let spec = random_spec(15, 1, 3);
        assert_eq!(truncate(&spec, 15).unwrap(), spec);
        let t0 = truncate(&spec, 0).unwrap();
        assert_eq!(t0.coeffs.len(), 2);
        let p = power_spectrum(&spec, 0).unwrap();
        let low = truncate(&spec, 6).unwrap();
        let pl: f64 = power_spectrum(&low, 0).unwrap().iter().sum();
        assert!((pl - p[..=6].iter().sum::<f64>()).abs() < 1e-12);
        assert_eq!(truncate(&low, 6).unwrap(), low);
        assert!(matches!(
            truncate(&low, 7),
            Err(HdaError::TruncationIncrease { .. })
        ));
    }

    #[test]
    fn single_coefficient_spectrum() {
        let mut spec = SpectralField::zeros(5, vec!["x".into()]);
        spec.set(0, 2, 1, 1.0, 0.0);
        let p = power_spectrum(&spec, 0).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(power_spectrum(&spec, 1).is_err());
    }

    #[test]
    fn weighted_norm_basics() {
        let grid = Grid::gauss(8, 15);
        let z = GridField::zeros(grid.clone(), vec!["a".into()]);
        assert_eq!(weighted_sq_norm(&z, &[0]), 0.0);
        let c = 1.7;
        let f = GridField::from_values(grid.clone(), vec!["a".into()], vec![c; grid.npoints()])
            .unwrap();
        assert!((weighted_sq_norm(&f, &[0]) - c * c * 4.0 * PI).abs() < 1e-12);
        assert!((grid.total_measure() - 4.0 * PI).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn parseval_and_variance(seed in 0u64..10_000, t in 1usize..12) {
            let spec = random_spec(t, 1, seed);
            let grid = Grid::gauss(t + 3, 2 * t + 5);
            let f = sh_synthesis(&spec, &grid).unwrap();
            let p = power_spectrum(&spec, 0).unwrap();
            let total: f64 = p.iter().sum();
            prop_assert!((total - spec.sq_norm(0)).abs() <= 1e-12 * total.max(1.0));
            let wn = weighted_sq_norm(&f, &[0]);
            prop_assert!((wn - total).abs() <= 1e-10 * total);
            let var = weighted_variance(&f, 0);
            let spec_var: f64 = p[1..].iter().sum();
            prop_assert!((var - spec_var).abs() <= 1e-10 * total);
            let mean = spec.mean_coefficient(0);
            prop_assert!((mean * mean - p[0]).abs() <= 1e-12 * total.max(1.0));
        }

        #[test]
        fn analysis_is_linear(seed in 0u64..10_000, a in -3.0f64..3.0) {
            let grid = Grid::gauss(10, 19);
            let s1 = random_spec(9, 1, seed);
            let s2 = random_spec(9, 1, seed + 1);
            let f1 = sh_synthesis(&s1, &grid).unwrap();
            let f2 = sh_synthesis(&s2, &grid).unwrap();
            let comb = GridField::from_values(
                grid.clone(),
                vec!["x".into()],
                f1.values.iter().zip(&f2.values).map(|(x, y)| a * x + y).collect(),
            ).unwrap();
            let s = sh_analysis(&comb, 9).unwrap();
            for k in 0..s.coeffs.len() {
                let expect = a * s1.coeffs[k] + s2.coeffs[k];
                prop_assert!((s.coeffs[k] - expect).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn backends_truncate_consistently() {
        let ring = SpectralBackend::Ring { n: 36 };
        let v: Vec<f64> = (0..36).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect();
        let p = ring.power_spectrum(&v).unwrap();
        assert_eq!(p.len(), 19);
        let t = ring.truncate_values(&v, 4).unwrap();
        let pt = ring.power_spectrum(&t).unwrap();
        for k in 0..19 {
            let expect = if k <= 4 { p[k] } else { 0.0 };
            assert!((pt[k] - expect).abs() < 1e-10);
        }
        let grid = Grid::gauss(16, 31);
        let sph = SpectralBackend::for_grid(&grid);
        assert_eq!(sph.n_degrees(), 16);
    }
}
