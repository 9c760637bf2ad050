//! Potentials `Φ = W * ρ` of analytic profiles and particle clouds.

use super::{MinimizerProfile, ProfileShape};
use crate::error::{Error, Result};
use crate::kernels::{sigma_constant, KernelSpec, PerturbationSpec};
use crate::quad::{gauss_jacobi, gauss_legendre_on, periodic_trapezoid, tanh_sinh};
use std::f64::consts::PI;

const REL_TOL: f64 = 1e-13;

/// `amp(1 - x₁²/a₁² - x₂²/a₂²)_+^p` centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticDensity {
    pub a: [f64; 2],
    pub amp: f64,
    pub p: f64,
}

/// `E_s` on the plane as a function of the distance, with the primitives
/// used on rays.
#[derive(Debug, Clone, Copy)]
enum PlaneKernel {
    Log,
    Power { sigma: f64, s: f64 },
}

impl PlaneKernel {
    fn new(s: f64) -> Result<Self> {
        if s >= 1.0 {
            Ok(PlaneKernel::Log)
        } else {
            Ok(PlaneKernel::Power { sigma: sigma_constant(2, s)?, s })
        }
    }

    /// `E(r)·r`.
    fn radial(&self, r: f64) -> f64 {
        match *self {
            PlaneKernel::Log => -r * r.ln() / (2.0 * PI),
            PlaneKernel::Power { sigma, s } => sigma * r.powf(2.0 * s - 1.0),
        }
    }

    /// `∫₀^r E(t) t dt`.
    fn primitive(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match *self {
            PlaneKernel::Log => -(0.5 * r * r * r.ln() - 0.25 * r * r) / (2.0 * PI),
            PlaneKernel::Power { sigma, s } => sigma * r.powf(2.0 * s) / (2.0 * s),
        }
    }

    /// `E'(r)·r`.
    fn radial_derivative(&self, r: f64) -> f64 {
        match *self {
            PlaneKernel::Log => -1.0 / (2.0 * PI),
            PlaneKernel::Power { sigma, s } => sigma * (2.0 * s - 2.0) * r.powf(2.0 * s - 2.0),
        }
    }

    /// `∫_{r₀}^{r₁} E'(t) t dt` for `0 < r₀ ≤ r₁`.
    fn derivative_primitive(&self, r0: f64, r1: f64) -> f64 {
        match *self {
            PlaneKernel::Log => -(r1 - r0) / (2.0 * PI),
            PlaneKernel::Power { sigma, s } => {
                let k = 2.0 * s - 1.0;
                if k.abs() < 1e-12 {
                    sigma * (2.0 * s - 2.0) * (r1 / r0).ln()
                } else {
                    sigma * (2.0 * s - 2.0) * (r1.powf(k) - r0.powf(k)) / k
                }
            }
        }
    }
}

/// Intersection of the ray `x + r e` with the ellipse.
#[derive(Debug, Clone, Copy)]
struct Chord {
    ae: f64,
    r_minus: f64,
    r_plus: f64,
}

impl EllipticDensity {
    pub fn new(a: [f64; 2], amp: f64, p: f64) -> Self {
        EllipticDensity { a, amp, p }
    }

    pub fn mass(&self) -> f64 {
        self.amp * PI * self.a[0] * self.a[1] / (self.p + 1.0)
    }

    /// `∫ x_j² ρ`.
    pub fn second_moment(&self, j: usize) -> f64 {
        self.amp * self.a[0] * self.a[1] * self.a[j] * self.a[j] * PI / (2.0 * (self.p + 1.0) * (self.p + 2.0))
    }

    /// `|x|²_A`.
    pub fn level(&self, x: [f64; 2]) -> f64 {
        (x[0] / self.a[0]).powi(2) + (x[1] / self.a[1]).powi(2)
    }

    pub fn density(&self, x: [f64; 2]) -> f64 {
        let q = 1.0 - self.level(x);
        if q > 0.0 {
            self.amp * q.powf(self.p)
        } else {
            0.0
        }
    }

    fn chord(&self, x: [f64; 2], theta: f64) -> Option<Chord> {
        let (sn, cs) = theta.sin_cos();
        let ia = [1.0 / (self.a[0] * self.a[0]), 1.0 / (self.a[1] * self.a[1])];
        let ae = cs * cs * ia[0] + sn * sn * ia[1];
        let b = x[0] * cs * ia[0] + x[1] * sn * ia[1];
        let c = self.level(x) - 1.0;
        let disc = b * b - ae * c;
        if disc < 0.0 {
            return None;
        }
        let q = -(b + b.signum() * disc.sqrt());
        if q == 0.0 {
            return None;
        }
        let (r1, r2) = (q / ae, c / q);
        Some(Chord { ae, r_minus: r1.min(r2), r_plus: r1.max(r2) })
    }

    /// `∫_{lo}^{r₊} g(r) amp (A_e(r - r₋)(r₊ - r))^p dr` with `lo ≥ r₋`.
    fn ray_integral<G: Fn(f64) -> f64>(&self, ch: Chord, lo: f64, g: G) -> Result<f64> {
        let p = self.p;
        let amp = self.amp;
        let off = lo - ch.r_minus;
        let res = tanh_sinh(
            |_, da, db| {
                let r = lo + da;
                amp * (ch.ae * (da + off) * db).powf(p) * g(r)
            },
            lo,
            ch.r_plus,
            REL_TOL,
            0.0,
        );
        if !res.converged && res.error > 1e-9 * res.value.abs().max(1e-300) {
            return Err(Error::Quadrature(format!("ray integral on [{lo}, {}]", ch.r_plus)));
        }
        Ok(res.value)
    }

    /// Angular range `[φ₋, φ₊]` of rays from an exterior point that meet the ellipse.
    fn visible_cone(&self, x: [f64; 2]) -> (f64, f64) {
        let y = [x[0] / self.a[0], x[1] / self.a[1]];
        let n2 = y[0] * y[0] + y[1] * y[1];
        let h = (n2 - 1.0).max(0.0).sqrt();
        let perp = [-y[1], y[0]];
        let center = (-x[1]).atan2(-x[0]);
        let mut ang = [0.0; 2];
        for (k, sgn) in [1.0, -1.0].iter().enumerate() {
            let t = [(y[0] + sgn * h * perp[0]) / n2, (y[1] + sgn * h * perp[1]) / n2];
            let d = [self.a[0] * t[0] - x[0], self.a[1] * t[1] - x[1]];
            let mut rel = d[1].atan2(d[0]) - center;
            while rel > PI {
                rel -= 2.0 * PI;
            }
            while rel <= -PI {
                rel += 2.0 * PI;
            }
            ang[k] = center + rel;
        }
        (ang[0].min(ang[1]), ang[0].max(ang[1]))
    }

    /// `(E_s * ρ)(x)` for `N = 2` without regularization.
    pub fn es_potential(&self, s: f64, x: [f64; 2]) -> Result<f64> {
        let k = PlaneKernel::new(s)?;
        let exact = self.p == 0.0;
        let abs_tol = 1e-14 * self.amp * PI * self.a[0] * self.a[1] * (1.0 + self.a[0].max(self.a[1]));
        let mut failure = None;
        if self.level(x) < 1.0 {
            let res = periodic_trapezoid(
                |theta| {
                    let Some(ch) = self.chord(x, theta) else { return 0.0 };
                    if exact {
                        return self.amp * k.primitive(ch.r_plus);
                    }
                    match self.ray_integral(ch, 0.0, |r| k.radial(r)) {
                        Ok(v) => v,
                        Err(e) => {
                            failure = Some(e);
                            0.0
                        }
                    }
                },
                16,
                1 << 14,
                REL_TOL,
                abs_tol,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            if !res.converged {
                return Err(Error::Quadrature(format!("angular integral at {x:?}")));
            }
            Ok(res.value)
        } else {
            let (lo, hi) = self.visible_cone(x);
            let res = tanh_sinh(
                |theta, _, _| {
                    let Some(ch) = self.chord(x, theta) else { return 0.0 };
                    if ch.r_minus <= 0.0 {
                        return 0.0;
                    }
                    if exact {
                        return self.amp * (k.primitive(ch.r_plus) - k.primitive(ch.r_minus));
                    }
                    match self.ray_integral(ch, ch.r_minus, |r| k.radial(r)) {
                        Ok(v) => v,
                        Err(e) => {
                            failure = Some(e);
                            0.0
                        }
                    }
                },
                lo,
                hi,
                REL_TOL,
                abs_tol,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            if !res.converged && res.error > 1e-10 * res.value.abs() + abs_tol {
                return Err(Error::Quadrature(format!("angular integral at {x:?}")));
            }
            Ok(res.value)
        }
    }

    /// `∇(E_s * ρ)(x)` at an exterior point.
    pub fn es_gradient(&self, s: f64, x: [f64; 2]) -> Result<[f64; 2]> {
        if self.level(x) <= 1.0 {
            return Err(Error::Domain("gradient quadrature needs a point outside the support".into()));
        }
        let k = PlaneKernel::new(s)?;
        let exact = self.p == 0.0;
        let (lo, hi) = self.visible_cone(x);
        let mut out = [0.0; 2];
        for (j, o) in out.iter_mut().enumerate() {
            let mut failure = None;
            let res = tanh_sinh(
                |theta, _, _| {
                    let Some(ch) = self.chord(x, theta) else { return 0.0 };
                    if ch.r_minus <= 0.0 {
                        return 0.0;
                    }
                    let e = if j == 0 { theta.cos() } else { theta.sin() };
                    let inner = if exact {
                        self.amp * k.derivative_primitive(ch.r_minus, ch.r_plus)
                    } else {
                        match self.ray_integral(ch, ch.r_minus, |r| k.radial_derivative(r)) {
                            Ok(v) => v,
                            Err(err) => {
                                failure = Some(err);
                                0.0
                            }
                        }
                    };
                    -e * inner
                },
                lo,
                hi,
                REL_TOL,
                1e-15,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            *o = res.value;
        }
        Ok(out)
    }

    /// `∫ c e^{-|x-y|²/(2σ_w²)} ρ(y) dy` by Gauss-Jacobi in `|y|²_A` and trapezoid in angle.
    pub fn gaussian_potential(&self, c: f64, width: f64, x: [f64; 2]) -> f64 {
        self.gaussian_terms(c, width, x).0
    }

    fn gaussian_terms(&self, c: f64, width: f64, x: [f64; 2]) -> (f64, [f64; 2]) {
        let inv = 0.5 / (width * width);
        let (u, wu) = gauss_jacobi(32, self.p, 0.0);
        let nt = 128;
        let scale = self.amp * self.a[0] * self.a[1] * 0.5 * 0.5f64.powf(self.p) * 0.5;
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (ui, wi) in u.iter().zip(&wu) {
            let rho = (0.5 * (1.0 + ui)).sqrt();
            for k in 0..nt {
                let t = 2.0 * PI * k as f64 / nt as f64;
                let y = [self.a[0] * rho * t.cos(), self.a[1] * rho * t.sin()];
                let d = [x[0] - y[0], x[1] - y[1]];
                let e = c * (-inv * (d[0] * d[0] + d[1] * d[1])).exp();
                let w = wi * scale * 2.0 * PI / nt as f64;
                v += w * e;
                g[0] += -2.0 * inv * d[0] * e * w;
                g[1] += -2.0 * inv * d[1] * e * w;
            }
        }
        (v, g)
    }
}

/// `∫_{-R}^{R} k(|t - t'|) amp ((R - t')(R + t')/R²)^p dt'` with the
/// singular point split off.
pub(crate) fn segment_convolution<K: Fn(f64) -> f64>(r: f64, amp: f64, p: f64, t: f64, k: K) -> Result<f64> {
    let rho = |rm: f64, rp: f64| amp * (rm * rp / (r * r)).max(0.0).powf(p);
    let mut total = 0.0;
    if t > -r {
        let hi = t.min(r);
        let res = tanh_sinh(|_, da, db| k(db + (t - hi)) * rho(db + (r - hi), da), -r, hi, 1e-15, 0.0);
        if !res.converged && res.error > 1e-11 * res.value.abs() {
            return Err(Error::Quadrature(format!("segment convolution at t = {t}")));
        }
        total += res.value;
    }
    if t < r {
        let lo = t.max(-r);
        let res = tanh_sinh(|_, da, db| k(da + (lo - t)) * rho(db, da + (lo + r)), lo, r, 1e-15, 0.0);
        if !res.converged && res.error > 1e-11 * res.value.abs() {
            return Err(Error::Quadrature(format!("segment convolution at t = {t}")));
        }
        total += res.value;
    }
    Ok(total)
}

fn quadratic_part(spec: &KernelSpec, mass: f64, m2: &[f64], y: &[f64]) -> f64 {
    let inv = spec.lambda_inv2();
    (0..spec.dim).map(|j| 0.5 * spec.beta * inv[j] * (mass * y[j] * y[j] + m2[j])).sum()
}

/// `Φ(x) = (W * ρ)(x)`.
///
/// Analytic profiles use the unregularized kernel; clouds use the kernel as
/// specified (including `δ`).
pub fn potential(profile: &MinimizerProfile, spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    if x.len() != profile.dim || spec.dim != profile.dim {
        return Err(Error::InvalidSpec("dimension mismatch between profile, kernel and point".into()));
    }
    let y: Vec<f64> = x.iter().zip(&profile.center).map(|(a, c)| a - c).collect();
    if let ProfileShape::ParticleCloud { positions, weights } = &profile.shape {
        let k = spec.prepared();
        let mut d = vec![0.0; spec.dim];
        let mut v = 0.0;
        for (pt, w) in positions.chunks(spec.dim).zip(weights) {
            for j in 0..spec.dim {
                d[j] = x[j] - pt[j];
            }
            if spec.regularization_delta == 0.0 && d.iter().all(|t| *t == 0.0) {
                return Err(Error::Singularity);
            }
            v += w * k.value(&d);
        }
        return Ok(v);
    }
    if let ProfileShape::OneDim { .. } = profile.shape {
        return super::one_dim::potential_1d(profile, y[0]);
    }
    let mass = profile.integrated_mass();
    let m2 = profile.second_moments();
    let quad = quadratic_part(spec, mass, &m2, &y);
    let gauss = match spec.perturbation {
        PerturbationSpec::None => None,
        PerturbationSpec::Gaussian { amplitude, width } => Some((amplitude, width)),
    };
    match profile.dim {
        2 => {
            let e = profile.elliptic().ok_or_else(|| Error::InvalidSpec("profile has no planar form".into()))?;
            let yy = [y[0], y[1]];
            let mut v = spec.alpha * e.es_potential(spec.s, yy)? + quad;
            if let Some((c, w)) = gauss {
                v += e.gaussian_potential(c, w, yy);
            }
            Ok(v)
        }
        1 => {
            let (r, amp, p) = match profile.shape {
                ProfileShape::RadialIndicator { radius, c0 } => (radius, c0, 0.0),
                ProfileShape::RadialPower { radius, c, exponent } => (radius, c * radius.powf(2.0 * exponent), exponent),
                _ => return Err(Error::InvalidSpec("unsupported 1-D profile".into())),
            };
            let es = if spec.is_log() {
                segment_convolution(r, amp, p, y[0], |d| -d.ln() / PI)?
            } else {
                let sig = sigma_constant(1, spec.s)?;
                let e = 1.0 - 2.0 * spec.s;
                segment_convolution(r, amp, p, y[0], |d| sig * d.powf(-e))?
            };
            let mut v = spec.alpha * es + quad;
            if let Some((c, w)) = gauss {
                let inv = 0.5 / (w * w);
                v += segment_convolution(r, amp, p, y[0], |d| c * (-inv * d * d).exp())?;
            }
            Ok(v)
        }
        _ => Err(Error::InvalidSpec("analytic potentials are implemented for N ≤ 2".into())),
    }
}

/// `∇Φ(x)` at a point outside the support of a planar analytic profile.
pub(crate) fn exterior_gradient(profile: &MinimizerProfile, spec: &KernelSpec, x: [f64; 2]) -> Result<[f64; 2]> {
    let e = profile.elliptic().ok_or_else(|| Error::InvalidSpec("profile has no planar form".into()))?;
    let y = [x[0] - profile.center[0], x[1] - profile.center[1]];
    let mut g = e.es_gradient(spec.s, y)?;
    let inv = spec.lambda_inv2();
    let mass = e.mass();
    for j in 0..2 {
        g[j] = spec.alpha * g[j] + spec.beta * inv[j] * mass * y[j];
    }
    if let PerturbationSpec::Gaussian { amplitude, width } = spec.perturbation {
        let (_, gg) = e.gaussian_terms(amplitude, width, y);
        g[0] += gg[0];
        g[1] += gg[1];
    }
    Ok(g)
}

/// `(1/m)∫Φρ` for analytic profiles; equals the Frostman constant of a minimizer.
pub(crate) fn mean_potential(profile: &MinimizerProfile, spec: &KernelSpec) -> Result<f64> {
    let mass = profile.integrated_mass();
    match profile.dim {
        2 => {
            let e = profile.elliptic().ok_or_else(|| Error::InvalidSpec("profile has no planar form".into()))?;
            // u = |y|²_A on [0,1] with weight (1-u)^p, angle over a quarter by symmetry
            let (u, wu) = gauss_jacobi(8, e.p, 0.0);
            let radial = e.a[0] == e.a[1];
            let (t, wt) = if radial { (vec![0.0], vec![PI / 2.0]) } else { gauss_legendre_on(8, 0.0, PI / 2.0) };
            let mut acc = 0.0;
            for (ui, wi) in u.iter().zip(&wu) {
                let rho = (0.5 * (1.0 + ui)).sqrt();
                for (ti, wti) in t.iter().zip(&wt) {
                    let x = [
                        profile.center[0] + e.a[0] * rho * ti.cos(),
                        profile.center[1] + e.a[1] * rho * ti.sin(),
                    ];
                    // dy = a₁a₂ du dt / 2, (1-u)^p = 2^{-p}(1-ξ)^p, du = dξ/2
                    let w = wi * wti * 4.0 * e.amp * e.a[0] * e.a[1] * 0.25 * 0.5f64.powf(e.p);
                    acc += w * potential(profile, spec, &x)?;
                }
            }
            Ok(acc / mass)
        }
        1 => {
            let (r, amp, p) = match profile.shape {
                ProfileShape::RadialIndicator { radius, c0 } => (radius, c0, 0.0),
                ProfileShape::RadialPower { radius, c, exponent } => (radius, c * radius.powf(2.0 * exponent), exponent),
                ProfileShape::OneDim { r_s, c_s, exponent } => (r_s, c_s, exponent),
                _ => return Err(Error::InvalidSpec("unsupported 1-D profile".into())),
            };
            let (t, w) = gauss_jacobi(16, p, p);
            let mut acc = 0.0;
            for (ti, wi) in t.iter().zip(&w) {
                acc += wi * r * amp * potential(profile, spec, &[profile.center[0] + r * ti])?;
            }
            Ok(acc / mass)
        }
        _ => Err(Error::InvalidSpec("analytic potentials are implemented for N ≤ 2".into())),
    }
}
