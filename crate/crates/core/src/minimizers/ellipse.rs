//! Two-dimensional ellipsoidal minimizers for anisotropic attraction.
//!
//! For `s < 1` the minimizer is `c(1 - |x|²_A)^{1-s}` with semi-axes fixed by
//! inverting the gradient of the convex function `ζ`. For `s = 1` the density is
//! uniform and the axes have a closed form.

use super::reduced::{reduced_constants, dyda_constant};
use super::{MinimizerProfile, ProfileShape};
use crate::error::{Error, Result, Warned};
use crate::kernels::{KernelSpec, PerturbationSpec};
use crate::quad::periodic_trapezoid;
use nalgebra::{Matrix2, Vector2};
use serde::Serialize;
use std::f64::consts::PI;

const ZETA_TOL: f64 = 1e-10;

/// Angular integrals `∫q^{s-1}`, `∫e_i² q^{s-2}` and `∫e_ie_j q^{s-3}` with
/// `q = r₁cos²τ + r₂sin²τ`.
struct Moments {
    i0: f64,
    g: [f64; 2],
    h: [f64; 3],
    error: f64,
}

fn moments(r: [f64; 2], s: f64) -> Moments {
    let mut acc = [[0.0f64; 6]; 2];
    let mut n = 16usize;
    let eval = |tau: f64| -> [f64; 6] {
        let (c2, s2) = (tau.cos().powi(2), tau.sin().powi(2));
        let q = r[0] * c2 + r[1] * s2;
        let p1 = q.powf(s - 1.0);
        let p2 = p1 / q;
        let p3 = p2 / q;
        [p1, c2 * p2, s2 * p2, c2 * c2 * p3, c2 * s2 * p3, s2 * s2 * p3]
    };
    let two_pi = 2.0 * PI;
    let mut sum = [0.0f64; 6];
    for k in 0..n {
        let v = eval(two_pi * k as f64 / n as f64);
        for j in 0..6 {
            sum[j] += v[j];
        }
    }
    acc[0] = sum.map(|v| v * two_pi / n as f64);
    let mut error = f64::INFINITY;
    while n < (1 << 18) {
        for k in 0..n {
            let v = eval(two_pi * (k as f64 + 0.5) / n as f64);
            for j in 0..6 {
                sum[j] += v[j];
            }
        }
        n *= 2;
        acc[1] = sum.map(|v| v * two_pi / n as f64);
        error = (0..6)
            .map(|j| (acc[1][j] - acc[0][j]).abs() / acc[1][j].abs().max(1e-300))
            .fold(0.0, f64::max);
        acc[0] = acc[1];
        if error < 1e-15 {
            break;
        }
    }
    let v = acc[0];
    Moments { i0: v[0], g: [v[1], v[2]], h: [v[3], v[4], v[5]], error }
}

/// Prefactor of `ζ`: `(2-s)m/π · 2^{3-2s}β_s R_s^{3-2s}/(C_s(1-s))`.
fn zeta_prefactor(s: f64, m: f64) -> Result<f64> {
    let c = reduced_constants(s);
    if !c.valid() {
        return Err(Error::Domain(format!("reduced-problem constants are not valid for s = {s}")));
    }
    Ok((2.0 - s) * m / PI * 2f64.powf(3.0 - 2.0 * s) * c.beta_s * c.r_s.powf(3.0 - 2.0 * s) / (c.c_s * (1.0 - s)))
}

fn check_r(r: [f64; 2]) -> Result<()> {
    if !(r[0] > 0.0 && r[1] > 0.0) {
        return Err(Error::Domain(format!("zeta needs r1, r2 > 0, got {r:?}")));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("zeta needs s in (0, 1), got {s}")));
    }
    Ok(())
}

fn precision_warnings(m: &Moments) -> Vec<String> {
    if m.error > ZETA_TOL {
        vec![format!("zeta quadrature converged only to {:.2e}", m.error)]
    } else {
        vec![]
    }
}

/// `ζ(r₁, r₂)` for mass `m`.
pub fn zeta(r: [f64; 2], s: f64, m: f64) -> Result<Warned<f64>> {
    check_r(r)?;
    check_s(s)?;
    let mo = moments(r, s);
    Ok(Warned { value: zeta_prefactor(s, m)? * mo.i0, warnings: precision_warnings(&mo) })
}

/// `∇ζ(r₁, r₂)`, differentiated under the integral sign.
pub fn grad_zeta(r: [f64; 2], s: f64, m: f64) -> Result<Warned<[f64; 2]>> {
    check_r(r)?;
    check_s(s)?;
    let mo = moments(r, s);
    let z = zeta_prefactor(s, m)? * (s - 1.0);
    Ok(Warned { value: [z * mo.g[0], z * mo.g[1]], warnings: precision_warnings(&mo) })
}

/// Hessian of `ζ` as `[h11, h12, h22]`.
pub fn hess_zeta(r: [f64; 2], s: f64, m: f64) -> Result<[f64; 3]> {
    check_r(r)?;
    check_s(s)?;
    let mo = moments(r, s);
    let z = zeta_prefactor(s, m)? * (s - 1.0) * (s - 2.0);
    Ok([z * mo.h[0], z * mo.h[1], z * mo.h[2]])
}

/// `2π ln((√r₁ + √r₂)/2)`.
pub fn zeta_closed_form_s1(r: [f64; 2]) -> Result<f64> {
    check_r(r)?;
    Ok(2.0 * PI * ((r[0].sqrt() + r[1].sqrt()) / 2.0).ln())
}

/// `½∫₀^{2π} ln(r₁cos²τ + r₂sin²τ) dτ` by periodic quadrature.
pub fn zeta_log_numeric(r: [f64; 2]) -> Result<f64> {
    check_r(r)?;
    let q = periodic_trapezoid(
        |t| (r[0] * t.cos().powi(2) + r[1] * t.sin().powi(2)).ln(),
        16,
        1 << 20,
        1e-15,
        1e-15,
    );
    Ok(0.5 * q.value)
}

/// Target `z` of the gradient equation `∇ζ(a₁², a₂²) = z`.
///
/// `z = -(mβ/α)·ν_s·(1/λ₁², 1/λ₂²)` where `ν_s = 2π·2^{3-2s}β_sR_s^{3-2s}/(C_sκ_s)`
/// and `κ_s = 4^{1-s}Γ(2-s)²` is the constant of `(-Δ)^{1-s}(1-|x|²)_+^{1-s}`.
pub fn ellipse_target(spec: &KernelSpec, m: f64) -> Result<[f64; 2]> {
    let s = spec.s;
    let unit = normalized_target(spec)?;
    let z = zeta_prefactor(s, m)?;
    Ok([z * unit[0], z * unit[1]])
}

/// Target for the prefactor-free integral `I(r) = ∫q^{s-1}`.
fn normalized_target(spec: &KernelSpec) -> Result<[f64; 2]> {
    let s = spec.s;
    let kappa = dyda_constant(2, 1.0 - s);
    let scale = -(spec.beta / spec.alpha) * 2.0 * PI * PI * (1.0 - s) / ((2.0 - s) * kappa);
    let l = spec.lambda_inv2();
    Ok([scale * l[0], scale * l[1]])
}

/// Coefficients `q_i` with `E_s * (1-|x|²_A)_+^{1-s} = V₀ - q₁x₁² - q₂x₂²` inside the ellipse.
pub fn quadratic_coefficients(a: [f64; 2], s: f64) -> [f64; 2] {
    let kappa = dyda_constant(2, 1.0 - s);
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let q = periodic_trapezoid(
            |t| {
                let (c, sn) = (t.cos(), t.sin());
                let e = if i == 0 { c } else { sn };
                let w = c * c / (a[0] * a[0]) + sn * sn / (a[1] * a[1]);
                e * e / (a[i] * a[i]) * w.powf(-s)
            },
            16,
            1 << 18,
            1e-15,
            0.0,
        );
        *o = kappa / (4.0 * PI) * q.value;
    }
    out
}

/// Semi-axes of the uniform (s = 1) minimizer:
/// `(a₁+a₂)² = α(λ₁²+λ₂²)/(πβ)`, `a_i = αλ_i²/(πβ(a₁+a₂))`.
pub fn uniform_ellipse_axes(alpha: f64, beta: f64, lambda: [f64; 2]) -> [f64; 2] {
    let l2 = [lambda[0] * lambda[0], lambda[1] * lambda[1]];
    let sum = (alpha * (l2[0] + l2[1]) / (PI * beta)).sqrt();
    [alpha * l2[0] / (PI * beta * sum), alpha * l2[1] / (PI * beta * sum)]
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipseSolution {
    pub a: [f64; 2],
    /// `|∇ζ(a²) - z| / |z|`.
    pub relative_residual: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

fn check_ellipse_spec(spec: &KernelSpec) -> Result<()> {
    spec.validate()?;
    if spec.dim != 2 {
        return Err(Error::InvalidSpec("ellipsoid solver needs N = 2".into()));
    }
    if spec.perturbation != PerturbationSpec::None {
        return Err(Error::InvalidSpec("ellipsoid solver needs w = none".into()));
    }
    Ok(())
}

/// Maximizes `ℓ(r) = r·z - ζ(r)` by damped Newton in `u = ln r`.
pub fn solve_ellipse(spec: &KernelSpec) -> Result<EllipseSolution> {
    check_ellipse_spec(spec)?;
    let s = spec.s;
    if s >= 1.0 {
        let a = uniform_ellipse_axes(spec.alpha, spec.beta, [spec.lambda[0], spec.lambda[1]]);
        return Ok(EllipseSolution { a, relative_residual: 0.0, iterations: 0, warnings: vec![] });
    }
    let t = normalized_target(spec)?;
    let tn = (t[0] * t[0] + t[1] * t[1]).sqrt();
    // isotropic start: (s-1)π r^{s-2} = mean target
    let tm = 0.5 * (t[0] + t[1]);
    let r0 = (tm / ((s - 1.0) * PI)).powf(1.0 / (s - 2.0));
    let mut r = [r0, r0];
    let objective = |r: [f64; 2]| -> (f64, Moments) {
        let mo = moments(r, s);
        (mo.i0 - t[0] * r[0] - t[1] * r[1], mo)
    };
    let (mut f, mut mo) = objective(r);
    let mut warnings = Vec::new();
    for it in 0..200 {
        let g = Vector2::new((s - 1.0) * mo.g[0] - t[0], (s - 1.0) * mo.g[1] - t[1]);
        let res = g.norm() / tn;
        if res < 1e-14 || (res < 1e-11 && it > 60) {
            if mo.error > ZETA_TOL {
                warnings.push(format!("zeta quadrature converged only to {:.2e}", mo.error));
            }
            return Ok(EllipseSolution { a: [r[0].sqrt(), r[1].sqrt()], relative_residual: res, iterations: it, warnings });
        }
        let c = (s - 1.0) * (s - 2.0);
        let h = Matrix2::new(c * mo.h[0], c * mo.h[1], c * mo.h[1], c * mo.h[2]);
        let dr = h
            .cholesky()
            .ok_or_else(|| Error::NonConvergence("zeta Hessian lost positive definiteness".into()))?
            .solve(&(-g));
        let mut du = [dr[0] / r[0], dr[1] / r[1]];
        let big = du[0].abs().max(du[1].abs());
        if big > 0.5 {
            du = [du[0] * 0.5 / big, du[1] * 0.5 / big];
        }
        let slope = g[0] * r[0] * du[0] + g[1] * r[1] * du[1];
        let mut tau = 1.0;
        loop {
            let trial = [r[0] * (tau * du[0]).exp(), r[1] * (tau * du[1]).exp()];
            let (ft, mt) = objective(trial);
            if ft <= f + 1e-4 * tau * slope || res < 1e-8 || tau < 1e-10 {
                r = trial;
                f = ft;
                mo = mt;
                break;
            }
            tau *= 0.5;
        }
        if !(r[0] > 1e-12 * r0 && r[1] > 1e-12 * r0) {
            return Err(Error::Boundary(format!("iterate {r:?} collapsed toward r_i = 0")));
        }
        if !(r[0] < 1e12 * r0 && r[1] < 1e12 * r0) {
            return Err(Error::NonConvergence(format!("iterate {r:?} escaped")));
        }
    }
    Err(Error::NonConvergence("Newton iteration exceeded its budget".into()))
}

/// Ellipsoidal minimizer of mass `m` for `N = 2`, `w = none`.
pub fn ellipsoid_shape_from_lambda(spec: &KernelSpec, m: f64) -> Result<MinimizerProfile> {
    if !(m > 0.0) {
        return Err(Error::InvalidSpec("mass must be positive".into()));
    }
    let sol = solve_ellipse(spec)?;
    let s = spec.s;
    let p = 1.0 - s;
    let [a1, a2] = sol.a;
    let c = m * (p + 1.0) / (PI * a1 * a2);
    Ok(MinimizerProfile {
        shape: ProfileShape::Ellipsoid2d { a1, a2, c, exponent: p },
        mass: m,
        dim: 2,
        center: vec![0.0, 0.0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::tanh_sinh;

    #[test]
    fn isotropic_zeta_is_constant_integrand() {
        let s = 0.75;
        let r = 1.7;
        let z = zeta([r, r], s, 1.0).unwrap().value;
        let pref = zeta_prefactor(s, 1.0).unwrap();
        assert!((z - pref * 2.0 * PI * r.powf(s - 1.0)).abs() < 1e-13 * z.abs());
    }

    #[test]
    fn grad_zeta_swap_symmetry() {
        let g = grad_zeta([1.3, 0.4], 0.6, 1.0).unwrap().value;
        let h = grad_zeta([0.4, 1.3], 0.6, 1.0).unwrap().value;
        assert!((g[0] - h[1]).abs() < 1e-14 * g[0].abs());
        assert!((g[1] - h[0]).abs() < 1e-14 * g[1].abs());
    }

    #[test]
    fn zeta_matches_adaptive_oracle() {
        let (s, r) = (0.75, [1.0, 4.0]);
        let pref = zeta_prefactor(s, 1.0).unwrap();
        // quarter period by symmetry, tanh-sinh as independent rule
        let oracle = 4.0
            * tanh_sinh(|t, _, _| (r[0] * t.cos().powi(2) + r[1] * t.sin().powi(2)).powf(s - 1.0), 0.0, PI / 2.0, 1e-15, 0.0)
                .value;
        let z = zeta(r, s, 1.0).unwrap();
        assert!(z.warnings.is_empty());
        assert!((z.value - pref * oracle).abs() < 1e-9 * z.value.abs());
        // gradient by central differences
        let g = grad_zeta(r, s, 1.0).unwrap().value;
        let h = 1e-4;
        let fd = (zeta([1.0 + h, 4.0], s, 1.0).unwrap().value - zeta([1.0 - h, 4.0], s, 1.0).unwrap().value) / (2.0 * h);
        assert!((fd - g[0]).abs() < 1e-8 * g[0].abs());
    }

    #[test]
    fn zeta_is_convex() {
        for s in [0.55, 0.75, 0.95] {
            for r in [[1.0, 1.0], [0.2, 3.0], [5.0, 0.7]] {
                let h = hess_zeta(r, s, 1.0).unwrap();
                assert!(h[0] > 0.0 && h[0] * h[2] - h[1] * h[1] > 0.0);
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(zeta([0.0, 1.0], 0.5, 1.0).is_err());
        assert!(zeta_closed_form_s1([-1.0, 1.0]).is_err());
        assert!(zeta([1.0, 1.0], 0.4, 1.0).is_err());
    }

    #[test]
    fn closed_form_s1_examples() {
        assert_eq!(zeta_closed_form_s1([1.0, 1.0]).unwrap(), 0.0);
        let v = zeta_closed_form_s1([3.0, 1.0]).unwrap();
        assert!((v - 1.959_759_163_762_466).abs() < 1e-13);
        assert!((v - zeta_log_numeric([3.0, 1.0]).unwrap()).abs() < 1e-13);
        let v = zeta_closed_form_s1([4.0, 4.0]).unwrap();
        assert!((v - 2.0 * PI * 2f64.ln()).abs() < 1e-14);
        // integrand constant ln 4: full integral 2π ln 4, halved
        assert!((0.5 * 2.0 * PI * 4f64.ln() - v).abs() < 1e-14);
    }

    #[test]
    fn quadratic_coefficients_match_zeta_gradient() {
        // q_i = (κ/4π) a₁a₂ ∫ e_i² (a₁²cos² + a₂²sin²)^{s-2}
        let s = 0.7;
        let a = [0.6, 1.1];
        let q = quadratic_coefficients(a, s);
        let mo = moments([a[0] * a[0], a[1] * a[1]], s);
        let kappa = dyda_constant(2, 1.0 - s);
        for i in 0..2 {
            let alt = kappa / (4.0 * PI) * a[0] * a[1] * mo.g[i];
            assert!((q[i] - alt).abs() < 1e-13 * q[i], "{} {}", q[i], alt);
        }
    }

    #[test]
    fn kirchhoff_coefficients_for_uniform_ellipse() {
        // s = 1: -Δψ = 1 inside, ψ = V₀ - (a₂x₁² + a₁x₂²)/(2(a₁+a₂))
        let a = [0.5, 1.5];
        let q = quadratic_coefficients(a, 1.0);
        assert!((q[0] - a[1] / (2.0 * (a[0] + a[1]))).abs() < 1e-14);
        assert!((q[1] - a[0] / (2.0 * (a[0] + a[1]))).abs() < 1e-14);
    }

    #[test]
    fn uniform_axes_match_bisection_inversion() {
        // invert the closed-form gradient π/(a_i(a₁+a₂)) = π²β/(αλ_i²) by bisection
        let (alpha, beta, lambda) = (1.0, 1.0, [1.0, 2.0]);
        let target = [PI * PI * beta / (alpha * lambda[0] * lambda[0]), PI * PI * beta / (alpha * lambda[1] * lambda[1])];
        let grad = |a: [f64; 2]| {
            let r = [a[0] * a[0], a[1] * a[1]];
            let h = 1e-6;
            let f = |r: [f64; 2]| zeta_closed_form_s1(r).unwrap();
            [
                (f([r[0] * (1.0 + h), r[1]]) - f([r[0] * (1.0 - h), r[1]])) / (2.0 * h * r[0]),
                (f([r[0], r[1] * (1.0 + h)]) - f([r[0], r[1] * (1.0 - h)])) / (2.0 * h * r[1]),
            ]
        };
        // the gradient ratio fixes a₂/a₁ = λ₂²/λ₁²; bisect on the scale
        let ratio = lambda[1] * lambda[1] / (lambda[0] * lambda[0]);
        let (mut lo, mut hi) = (1e-3, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if grad([mid, mid * ratio])[0] > target[0] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a = uniform_ellipse_axes(alpha, beta, lambda);
        assert!((a[0] - lo).abs() < 1e-6, "{a:?} {lo}");
        assert!((a[1] - lo * ratio).abs() < 1e-6);
        // second component of the closed-form gradient also matched
        let g = grad(a);
        assert!((g[1] / target[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn isotropic_solver_gives_disk() {
        let spec = KernelSpec::isotropic(2, 0.75, 1.0, 1.0).unwrap();
        let sol = solve_ellipse(&spec).unwrap();
        assert!((sol.a[0] / sol.a[1] - 1.0).abs() < 1e-10);
        assert!(sol.relative_residual < 1e-10);
    }

    #[test]
    fn anisotropic_solver_round_trip() {
        for s in [0.6, 0.75, 0.9] {
            for ratio in [1.0, 2.0, 4.0] {
                let spec = KernelSpec::new(2, s, 1.0, 1.0, vec![1.0, ratio]).unwrap();
                let p = ellipsoid_shape_from_lambda(&spec, 1.0).unwrap();
                let ProfileShape::Ellipsoid2d { a1, a2, .. } = p.shape else { panic!() };
                let z = ellipse_target(&spec, 1.0).unwrap();
                let g = grad_zeta([a1 * a1, a2 * a2], s, 1.0).unwrap().value;
                let res = ((g[0] - z[0]).powi(2) + (g[1] - z[1]).powi(2)).sqrt();
                assert!(res < 1e-8, "s {s} ratio {ratio} residual {res}");
                assert!((p.integrated_mass() - 1.0).abs() < 1e-12);
                if ratio > 1.0 {
                    assert!(a2 > a1);
                }
            }
        }
    }
}
