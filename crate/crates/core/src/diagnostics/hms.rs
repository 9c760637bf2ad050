//! `Ḣ^{-s}` norms of signed piecewise-constant fields in the plane.

use super::table::KernelTable;
use crate::error::{Error, Result, Warned};
use crate::grid::GridField;
use crate::kernels::sigma_constant;
use crate::quad::{gauss_jacobi, gauss_legendre};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Angular nodes on the full circle for the Fourier route.
pub const FOURIER_ANGLES: usize = 64;
/// Relative tail contribution above which a truncation warning is raised.
pub const TAIL_WARNING: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HmsMethod {
    FourierQuadrature,
    KernelDoubleIntegral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmsGridInfo {
    pub shape: Vec<usize>,
    pub h: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub n_radial: usize,
    pub n_angular: usize,
    /// Bandwidth used to coarse-grain particles, when applicable.
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmsNorm {
    /// `‖μ‖_{Ḣ^{-s}}`.
    pub value: f64,
    /// `‖μ‖²`, as computed (may be a rounding-level negative number).
    pub squared: f64,
    pub method: HmsMethod,
    pub grid: HmsGridInfo,
    /// Relative contribution of `k_max < |ξ| < 3k_max` (Fourier route).
    pub tail_fraction: f64,
}

/// `E_s` (unregularized) as a function of `|x|²` in the plane.
pub fn es_plane(s: f64) -> Result<impl Fn(f64) -> f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1], got {s}")));
    }
    let log = s == 1.0;
    let coef = if log { 1.0 / (2.0 * PI) } else { sigma_constant(2, s)? };
    let hp = 1.0 - s;
    Ok(move |r2: f64| if log { -0.25 * coef * 2.0 * r2.ln() } else { coef * r2.powf(-hp) })
}

/// Cell-pair table of `E_s` for a grid of the given shape and spacing.
pub fn es_table(shape: [usize; 2], h: f64, s: f64) -> Result<KernelTable> {
    KernelTable::new(shape, h, es_plane(s)?, true)
}

fn shape2(mu: &GridField) -> Result<[usize; 2]> {
    if mu.grid.dim() != 2 {
        return Err(Error::InvalidSpec("Ḣ^{-s} norms are implemented for planar grids".into()));
    }
    Ok([mu.grid.shape[0], mu.grid.shape[1]])
}

fn info(mu: &GridField) -> HmsGridInfo {
    HmsGridInfo {
        shape: mu.grid.shape.clone(),
        h: mu.grid.h,
        k_min: 0.0,
        k_max: 0.0,
        n_radial: 0,
        n_angular: 0,
        bandwidth: None,
    }
}

fn check_mass(mu: &GridField, s: f64) -> Result<()> {
    let total = mu.integral();
    let scale = mu.values.iter().map(|v| v.abs()).sum::<f64>() * mu.grid.cell_volume();
    if s >= 1.0 && total.abs() > 1e-9 * scale.max(1e-300) {
        return Err(Error::Domain("Ḣ^{-1} norm in the plane needs zero total mass".into()));
    }
    Ok(())
}

/// `‖μ‖²_{Ḣ^{-s}}` of a planar grid field.
pub fn hminus_s_norm(mu: &GridField, s: f64, method: HmsMethod) -> Result<Warned<HmsNorm>> {
    match method {
        HmsMethod::KernelDoubleIntegral => {
            let table = es_table(shape2(mu)?, mu.grid.h, s)?;
            hminus_s_norm_with_table(mu, s, &table).map(Warned::clean)
        }
        HmsMethod::FourierQuadrature => fourier_norm(mu, s, FOURIER_ANGLES),
    }
}

/// Kernel route with a prebuilt `E_s` table (which fixes the grid and `s`).
pub fn hminus_s_norm_with_table(mu: &GridField, s: f64, table: &KernelTable) -> Result<HmsNorm> {
    let shape = shape2(mu)?;
    if table.shape != shape || (table.h - mu.grid.h).abs() > 1e-14 * mu.grid.h {
        return Err(Error::InvalidSpec("kernel table does not match the field grid".into()));
    }
    check_mass(mu, s)?;
    let q = mu.masses();
    let sq = table.quadratic(&q)?;
    Ok(HmsNorm {
        value: sq.max(0.0).sqrt(),
        squared: sq,
        method: HmsMethod::KernelDoubleIntegral,
        grid: info(mu),
        tail_fraction: 0.0,
    })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `|μ̂(ξ)|²` of the piecewise-constant field, evaluated exactly.
struct Transform<'a> {
    q: Vec<f64>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    h: f64,
    _mu: &'a GridField,
}

impl<'a> Transform<'a> {
    fn new(mu: &'a GridField) -> Self {
        let g = &mu.grid;
        let xs = (0..g.shape[0]).map(|i| g.lo[0] + g.h * (i as f64 + 0.5)).collect();
        let ys = (0..g.shape[1]).map(|j| g.lo[1] + g.h * (j as f64 + 0.5)).collect();
        Transform { q: mu.masses(), xs, ys, h: g.h, _mu: mu }
    }

    fn power(&self, k1: f64, k2: f64) -> f64 {
        let m1 = self.ys.len();
        let ey: Vec<(f64, f64)> = self.ys.iter().map(|y| ((k2 * y).cos(), -(k2 * y).sin())).collect();
        let (mut re, mut im) = (0.0, 0.0);
        for (i, x) in self.xs.iter().enumerate() {
            let row = &self.q[i * m1..(i + 1) * m1];
            let (mut sr, mut si) = (0.0, 0.0);
            for (qv, (c, sn)) in row.iter().zip(&ey) {
                sr += qv * c;
                si += qv * sn;
            }
            let (c, sn) = ((k1 * x).cos(), -(k1 * x).sin());
            re += c * sr - sn * si;
            im += c * si + sn * sr;
        }
        let f = sinc(0.5 * k1 * self.h) * sinc(0.5 * k2 * self.h);
        (re * re + im * im) * f * f
    }

    /// `∫|μ̂(kθ)|² dθ` over the full circle using the half-circle symmetry.
    fn ring(&self, k: f64, n_ang: usize) -> f64 {
        let half = n_ang / 2;
        let mut acc = 0.0;
        for a in 0..half {
            let th = PI * (a as f64 + 0.5) / half as f64;
            acc += self.power(k * th.cos(), k * th.sin());
        }
        2.0 * acc * PI / half as f64
    }
}

fn fourier_norm(mu: &GridField, s: f64, n_ang: usize) -> Result<Warned<HmsNorm>> {
    shape2(mu)?;
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1], got {s}")));
    }
    check_mass(mu, s)?;
    let g = &mu.grid;
    let lx = g.h * g.shape[0] as f64;
    let ly = g.h * g.shape[1] as f64;
    let k_min = 2.0 * PI / lx.max(ly);
    let k_max = PI / g.h;
    let diam = (lx * lx + ly * ly).sqrt();
    let tr = Transform::new(mu);
    let norm = 1.0 / (4.0 * PI * PI);
    // ∫_0^{k_min} k^{1-2s} ring(k) dk
    let mut total = 0.0;
    let mut n_rad = 0;
    if s < 1.0 {
        let (x, w) = gauss_jacobi(12, 0.0, 1.0 - 2.0 * s);
        let scale = (0.5 * k_min).powf(2.0 - 2.0 * s);
        for (xi, wi) in x.iter().zip(&w) {
            let k = 0.5 * k_min * (1.0 + xi);
            total += wi * scale * tr.ring(k, n_ang);
        }
    } else {
        let (x, w) = gauss_legendre(12);
        for (xi, wi) in x.iter().zip(&w) {
            let k = 0.5 * k_min * (1.0 + xi);
            total += wi * 0.5 * k_min * k.powf(1.0 - 2.0 * s) * tr.ring(k, n_ang);
        }
    }
    n_rad += 12;
    // log-spaced panels, each no wider than π/diam
    let panels = |lo: f64, hi: f64, n_rad: &mut usize| -> f64 {
        let (gx, gw) = gauss_legendre(8);
        let mut acc = 0.0;
        let mut a = lo;
        while a < hi * (1.0 - 1e-12) {
            let b = (a * 2f64.sqrt()).min(a + PI / diam).min(hi);
            for (xi, wi) in gx.iter().zip(&gw) {
                let k = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                acc += wi * 0.5 * (b - a) * k.powf(1.0 - 2.0 * s) * tr.ring(k, n_ang);
            }
            *n_rad += 8;
            a = b;
        }
        acc
    };
    total += panels(k_min, k_max, &mut n_rad);
    let value = total * norm;
    // the first alias band of the cell transform sits near 2π/h
    let mut extra = 0;
    let tail = panels(k_max, 3.0 * k_max, &mut extra) * norm;
    let tail_fraction = if value > 0.0 { tail / value } else { 0.0 };
    let mut warnings = Vec::new();
    if tail_fraction > TAIL_WARNING {
        warnings.push(format!("frequency tail beyond k_max = {k_max:.3e} estimated at {tail_fraction:.2e} of the norm"));
    }
    let mut gi = info(mu);
    gi.k_min = k_min;
    gi.k_max = k_max;
    gi.n_radial = n_rad;
    gi.n_angular = n_ang;
    Ok(Warned {
        value: HmsNorm { value: value.max(0.0).sqrt(), squared: value, method: HmsMethod::FourierQuadrature, grid: gi, tail_fraction },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxGrid;

    fn bumps(m: usize, half: f64) -> GridField {
        let g = BoxGrid::centered(&[0.0, 0.0], half, m).unwrap();
        let s2 = 0.09;
        let bump = |c: [f64; 2]| {
            let f = GridField::sample(g.clone(), |x| (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (2.0 * s2)).exp());
            let m = f.integral();
            f.scaled(1.0 / m)
        };
        bump([0.25, 0.0]).sub(&bump([-0.25, 0.1])).unwrap()
    }

    #[test]
    fn zero_field_and_homogeneity() {
        let mu = bumps(24, 2.0);
        let zero = mu.scaled(0.0);
        assert_eq!(hminus_s_norm(&zero, 0.5, HmsMethod::KernelDoubleIntegral).unwrap().value.value, 0.0);
        assert_eq!(hminus_s_norm(&zero, 0.5, HmsMethod::FourierQuadrature).unwrap().value.value, 0.0);
        let a = hminus_s_norm(&mu, 0.5, HmsMethod::KernelDoubleIntegral).unwrap().value.value;
        let b = hminus_s_norm(&mu.scaled(-3.0), 0.5, HmsMethod::KernelDoubleIntegral).unwrap().value.value;
        assert!((b - 3.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn methods_agree_on_offset_bumps() {
        let mu = bumps(48, 2.0);
        for s in [0.5, 0.75, 1.0] {
            let k = hminus_s_norm(&mu, s, HmsMethod::KernelDoubleIntegral).unwrap().value;
            let f = hminus_s_norm(&mu, s, HmsMethod::FourierQuadrature).unwrap();
            let rel = (k.squared - f.value.squared).abs() / k.squared;
            assert!(rel < 1e-3 && rel < 2.0 * f.value.tail_fraction.max(1e-6), "s {s}: kernel {} fourier {} rel {rel:e} tail {}", k.squared, f.value.squared, f.value.tail_fraction);
        }
    }

    #[test]
    fn log_norm_needs_zero_mass() {
        let g = BoxGrid::centered(&[0.0, 0.0], 1.0, 8).unwrap();
        let mu = GridField::sample(g, |_| 1.0);
        assert!(hminus_s_norm(&mu, 1.0, HmsMethod::KernelDoubleIntegral).is_err());
        assert!(hminus_s_norm(&mu, 0.5, HmsMethod::KernelDoubleIntegral).unwrap().value.squared > 0.0);
    }
}
