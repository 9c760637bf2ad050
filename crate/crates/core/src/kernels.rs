//! Interaction kernel `W = αE_s + βW_a + w`, its gradient and Fourier symbol.
//!
//! `E_s` is the fundamental solution of `(-Δ)^s`, so that its Fourier symbol is
//! `|ξ|^{-2s}`. The attractive part is `W_a(x) = Σ_j x_j²/(2λ_j²)` and is never
//! regularized. Singular kernels can be replaced by their blob version where
//! `|x|` becomes `sqrt(|x|² + δ²)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Optional smooth perturbation `w` of the interaction law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PerturbationSpec {
    #[default]
    None,
    /// `w(x) = c·exp(-|x|²/(2σ_w²))`.
    Gaussian { amplitude: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub dim: usize,
    pub s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub regularization_delta: f64,
}

impl KernelSpec {
    pub fn new(dim: usize, s: f64, alpha: f64, beta: f64, lambda: Vec<f64>) -> Result<Self> {
        let spec = KernelSpec {
            dim,
            s,
            alpha,
            beta,
            lambda,
            perturbation: PerturbationSpec::None,
            regularization_delta: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `Λ = I`, no perturbation, no regularization.
    pub fn isotropic(dim: usize, s: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(dim, s, alpha, beta, vec![1.0; dim])
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.regularization_delta = delta;
        self
    }

    pub fn with_perturbation(mut self, p: PerturbationSpec) -> Self {
        self.perturbation = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidSpec(format!("dim must be 1, 2 or 3, got {}", self.dim)));
        }
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(Error::InvalidSpec(format!("s must lie in (0, 1], got {}", self.s)));
        }
        let half_n = self.dim as f64 / 2.0;
        if self.s > half_n {
            return Err(Error::InvalidSpec(format!(
                "s = {} exceeds N/2 = {half_n}; only the repulsive regime s <= N/2 is supported",
                self.s
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidSpec("alpha must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidSpec("beta must be positive".into()));
        }
        if self.lambda.len() != self.dim {
            return Err(Error::InvalidSpec(format!(
                "lambda has {} entries, expected {}",
                self.lambda.len(),
                self.dim
            )));
        }
        if self.lambda.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidSpec("every lambda_j must be positive".into()));
        }
        if !(self.regularization_delta >= 0.0 && self.regularization_delta.is_finite()) {
            return Err(Error::InvalidSpec("delta must be nonnegative".into()));
        }
        if let PerturbationSpec::Gaussian { amplitude, width } = self.perturbation {
            if !(width > 0.0 && width.is_finite() && amplitude.is_finite()) {
                return Err(Error::InvalidSpec("gaussian perturbation needs width > 0".into()));
            }
        }
        Ok(())
    }

    /// True when `s = N/2` and `E_s` is logarithmic.
    pub fn is_log(&self) -> bool {
        (self.s - self.dim as f64 / 2.0).abs() < 1e-15
    }

    pub fn is_isotropic(&self) -> bool {
        self.lambda.iter().all(|l| (*l - 1.0).abs() < 1e-15)
    }

    /// `Λ_jj = 1/λ_j²`.
    pub fn lambda_inv2(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| 1.0 / (l * l)).collect()
    }

    pub fn prepared(&self) -> PreparedKernel {
        PreparedKernel::new(self)
    }
}

/// `σ(N, s) = Γ(N/2 - s) / (4^s Γ(s) π^{N/2})` for `0 < s < N/2`.
pub fn sigma_constant(n: usize, s: f64) -> Result<f64> {
    let half_n = n as f64 / 2.0;
    if !(s > 0.0) || s >= half_n {
        return Err(Error::Domain(format!("sigma(N={n}, s={s}) requires 0 < s < N/2")));
    }
    Ok(gamma(half_n - s) / (4f64.powf(s) * gamma(s) * PI.powf(half_n)))
}

/// Prefactor `c` in `E_{N/2}(x) = -c ln|x|`: `1/(2π)` in 2-D, `1/π` in 1-D.
fn log_constant(n: usize) -> f64 {
    match n {
        1 => 1.0 / PI,
        _ => 1.0 / (2.0 * PI),
    }
}

/// Kernel constants unpacked for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct PreparedKernel {
    pub dim: usize,
    pub log: bool,
    /// `σ` for the power branch, log prefactor for the log branch.
    pub coef: f64,
    /// Exponent `(N - 2s)/2` applied to `|x|² + δ²`.
    pub half_power: f64,
    pub delta2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub inv_lam2: [f64; 3],
    /// `(c, 1/(2σ_w²))` for a Gaussian perturbation.
    pub gauss: Option<(f64, f64)>,
}

impl PreparedKernel {
    fn new(spec: &KernelSpec) -> Self {
        let log = spec.is_log();
        let coef = if log { log_constant(spec.dim) } else { sigma_constant(spec.dim, spec.s).unwrap_or(f64::NAN) };
        let mut inv_lam2 = [0.0; 3];
        for (j, l) in spec.lambda.iter().enumerate() {
            inv_lam2[j] = 1.0 / (l * l);
        }
        let gauss = match spec.perturbation {
            PerturbationSpec::None => None,
            PerturbationSpec::Gaussian { amplitude, width } => Some((amplitude, 0.5 / (width * width))),
        };
        PreparedKernel {
            dim: spec.dim,
            log,
            coef,
            half_power: 0.5 * (spec.dim as f64 - 2.0 * spec.s),
            delta2: spec.regularization_delta * spec.regularization_delta,
            alpha: spec.alpha,
            beta: spec.beta,
            inv_lam2,
            gauss,
        }
    }

    /// `E_s` as a function of `|x|²` (regularized).
    #[inline]
    pub fn es_r2(&self, r2: f64) -> f64 {
        let q = r2 + self.delta2;
        if self.log {
            -0.5 * self.coef * q.ln()
        } else {
            self.coef * q.powf(-self.half_power)
        }
    }

    /// `g` with `∇E_s(x) = g·x`.
    #[inline]
    pub fn es_grad_factor(&self, r2: f64) -> f64 {
        let q = r2 + self.delta2;
        if self.log {
            -self.coef / q
        } else {
            -2.0 * self.half_power * self.coef * q.powf(-self.half_power - 1.0)
        }
    }

    /// Full kernel `W(x)`.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut r2 = 0.0;
        let mut quad = 0.0;
        for j in 0..self.dim {
            r2 += x[j] * x[j];
            quad += x[j] * x[j] * self.inv_lam2[j];
        }
        let mut v = self.alpha * self.es_r2(r2) + 0.5 * self.beta * quad;
        if let Some((c, a)) = self.gauss {
            v += c * (-a * r2).exp();
        }
        v
    }

    /// Full gradient `∇W(x)` written into `out`.
    #[inline]
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        let mut r2 = 0.0;
        for j in 0..self.dim {
            r2 += x[j] * x[j];
        }
        let mut g = self.alpha * self.es_grad_factor(r2);
        if let Some((c, a)) = self.gauss {
            g += -2.0 * a * c * (-a * r2).exp();
        }
        for j in 0..self.dim {
            out[j] = g * x[j] + self.beta * self.inv_lam2[j] * x[j];
        }
    }

    /// `W(x)` and `∇W(x)` sharing one transcendental evaluation.
    #[inline]
    pub fn value_grad(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let mut r2 = 0.0;
        let mut quad = 0.0;
        for j in 0..self.dim {
            r2 += x[j] * x[j];
            quad += x[j] * x[j] * self.inv_lam2[j];
        }
        let q = r2 + self.delta2;
        let (e, mut g) = if self.log {
            (-0.5 * self.coef * q.ln(), -self.coef / q)
        } else {
            let p = self.coef * q.powf(-self.half_power);
            (p, -2.0 * self.half_power * p / q)
        };
        let mut v = self.alpha * e + 0.5 * self.beta * quad;
        g *= self.alpha;
        if let Some((c, a)) = self.gauss {
            let ex = c * (-a * r2).exp();
            v += ex;
            g -= 2.0 * a * ex;
        }
        for j in 0..self.dim {
            out[j] = (g + self.beta * self.inv_lam2[j]) * x[j];
        }
        v
    }

    /// Magnitude of the Hessian of `αE_s^δ` at the origin (stiffness scale).
    pub fn es_curvature_at_origin(&self) -> f64 {
        if self.delta2 == 0.0 {
            return f64::INFINITY;
        }
        self.alpha * self.es_grad_factor(0.0).abs()
    }
}

fn check_point(spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.dim {
        return Err(Error::InvalidSpec(format!("point has {} coordinates, expected {}", x.len(), spec.dim)));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 == 0.0 && spec.regularization_delta == 0.0 {
        return Err(Error::Singularity);
    }
    Ok(r2)
}

/// `E_s(x)` with blob regularization `|x|_δ`.
pub fn eval_es(spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    spec.validate()?;
    let r2 = check_point(spec, x)?;
    Ok(spec.prepared().es_r2(r2))
}

/// Full interaction kernel `W(x)`.
pub fn eval_w(spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_point(spec, x)?;
    Ok(spec.prepared().value(x))
}

/// `∇W(x) = α∇E_s^δ(x) + β(x_j/λ_j²)_j + ∇w(x)`.
pub fn grad_w(spec: &KernelSpec, x: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    check_point(spec, x)?;
    let mut out = vec![0.0; spec.dim];
    spec.prepared().grad_into(x, &mut out);
    Ok(out)
}

/// Fourier symbol of `E_s`: `|ξ|^{-2s}`.
pub fn es_symbol(s: f64, xi_norm: f64) -> f64 {
    xi_norm.powf(-2.0 * s)
}

/// Closed-form Fourier transform of the perturbation, `ŵ(|ξ|)`.
pub fn perturbation_symbol(spec: &KernelSpec, xi_norm: f64) -> f64 {
    match spec.perturbation {
        PerturbationSpec::None => 0.0,
        PerturbationSpec::Gaussian { amplitude, width } => {
            let s2 = width * width;
            amplitude * (2.0 * PI * s2).powf(spec.dim as f64 / 2.0) * (-0.5 * s2 * xi_norm * xi_norm).exp()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2bReport {
    pub holds: bool,
    pub worst_margin: f64,
    pub worst_xi: Vec<f64>,
}

/// Verifies `ŵ(ξ) ≥ -κα|ξ|^{-2s}` on the given frequencies.
pub fn check_h2b(spec: &KernelSpec, kappa: f64, xi_grid: &[Vec<f64>]) -> Result<H2bReport> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Domain(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    let mut worst = f64::INFINITY;
    let mut worst_xi = vec![];
    for xi in xi_grid {
        let k = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if k == 0.0 {
            return Err(Error::Domain("frequency grid must exclude ξ = 0".into()));
        }
        let margin = perturbation_symbol(spec, k) + kappa * spec.alpha * es_symbol(spec.s, k);
        if margin < worst {
            worst = margin;
            worst_xi = xi.clone();
        }
    }
    Ok(H2bReport { holds: worst >= 0.0, worst_margin: worst, worst_xi })
}

/// Smallest `κ ≥ 0` with `ŵ(ξ) ≥ -κα|ξ|^{-2s}` for every ξ (exact for the Gaussian menu).
pub fn certified_kappa(spec: &KernelSpec) -> f64 {
    match spec.perturbation {
        PerturbationSpec::None => 0.0,
        PerturbationSpec::Gaussian { amplitude, width } => {
            if amplitude >= 0.0 {
                return 0.0;
            }
            // sup_k k^{2s} exp(-σ²k²/2) is reached at k² = 2s/σ²
            let s = spec.s;
            let s2 = width * width;
            let peak = (2.0 * s / s2).powf(s) * (-s).exp();
            -amplitude * (2.0 * PI * s2).powf(spec.dim as f64 / 2.0) * peak / spec.alpha
        }
    }
}

/// Frequencies on a radial-logarithmic grid with `n_ang` directions (2-D) or
/// the coordinate axes (1-D, 3-D).
pub fn radial_log_grid(dim: usize, k_min: f64, k_max: f64, n_rad: usize, n_ang: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..n_rad {
        let t = if n_rad == 1 { 0.0 } else { i as f64 / (n_rad - 1) as f64 };
        let k = k_min * (k_max / k_min).powf(t);
        match dim {
            1 => out.push(vec![k]),
            2 => {
                for a in 0..n_ang {
                    let th = PI * a as f64 / n_ang as f64;
                    out.push(vec![k * th.cos(), k * th.sin()]);
                }
            }
            _ => {
                out.push(vec![k, 0.0, 0.0]);
                out.push(vec![0.0, k, 0.0]);
                out.push(vec![0.0, 0.0, k]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gauss_legendre_on;
    use proptest::prelude::*;

    #[test]
    fn sigma_examples() {
        assert!((sigma_constant(3, 1.0).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-12 / (4.0 * PI));
        assert!((sigma_constant(2, 0.5).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-14);
        assert!(matches!(sigma_constant(3, 1.5), Err(Error::Domain(_))));
        assert!(matches!(sigma_constant(2, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn eval_es_examples() {
        let log = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(eval_es(&log, &[1.0, 0.0]).unwrap(), 0.0);
        let half = KernelSpec::isotropic(2, 0.5, 1.0, 1.0).unwrap();
        assert!((eval_es(&half, &[2.0, 0.0]).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let newton = KernelSpec::isotropic(3, 1.0, 1.0, 1.0).unwrap();
        assert!((eval_es(&newton, &[0.0, 2.0, 0.0]).unwrap() - 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert_eq!(eval_es(&newton, &[0.0, 0.0, 0.0]), Err(Error::Singularity));
        assert!(eval_es(&newton.clone().with_delta(0.1), &[0.0, 0.0, 0.0]).is_ok());
        // log branch: -(1/2π) ln|x|
        let v = eval_es(&log, &[0.0, 3.0]).unwrap();
        assert!((v + 3f64.ln() / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn grad_w_examples() {
        let quad = KernelSpec::isotropic(2, 1.0, 1e-300, 1.0).unwrap();
        let g = grad_w(&quad, &[1.0, 0.0]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12 && g[1] == 0.0);
        let half = KernelSpec::isotropic(2, 0.5, 1.0, 1e-300).unwrap();
        let g = grad_w(&half, &[1.0, 0.0]).unwrap();
        assert!((g[0] + 1.0 / (2.0 * PI)).abs() < 1e-15 && g[1] == 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = KernelSpec::new(2, 0.75, 1.3, 0.7, vec![1.0, 2.0])
            .unwrap()
            .with_delta(0.05)
            .with_perturbation(PerturbationSpec::Gaussian { amplitude: -0.2, width: 0.4 });
        let x = [0.3, -0.2];
        let g = grad_w(&spec, &x).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (eval_w(&spec, &xp).unwrap() - eval_w(&spec, &xm).unwrap()) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "{fd} {}", g[j]);
        }
    }

    #[test]
    fn regularization_converges_quadratically() {
        let spec = KernelSpec::isotropic(3, 0.75, 1.0, 1.0).unwrap();
        let x = [0.4, 0.3, 0.0];
        let exact = eval_es(&spec, &x).unwrap();
        let e1 = (eval_es(&spec.clone().with_delta(1e-2), &x).unwrap() - exact).abs();
        let e2 = (eval_es(&spec.clone().with_delta(5e-3), &x).unwrap() - exact).abs();
        assert!((e1 / e2 - 4.0).abs() < 0.05, "{}", e1 / e2);
    }

    /// Fourier transform of a Gaussian-mollified `E_s` compared with `|ξ|^{-2s}`.
    fn mollified_symbol(dim: usize, s: f64, k: f64) -> f64 {
        let sigma = sigma_constant(dim, s).unwrap();
        let l = 25.0;
        let mut total = 0.0;
        let panels = 4000;
        let rmax = 10.0 * l;
        let integrand = |r: f64| {
            let e = sigma * r.powf(-(dim as f64 - 2.0 * s)) * (-(r * r) / (2.0 * l * l)).exp();
            match dim {
                1 => 2.0 * e * (k * r).cos(),
                _ => 4.0 * PI * r * r * e * (k * r).sin() / (k * r),
            }
        };
        total += crate::quad::tanh_sinh(|_, da, _| integrand(da), 0.0, rmax / panels as f64, 1e-13, 0.0).value;
        for p in 1..panels {
            let a = rmax * p as f64 / panels as f64;
            let b = rmax * (p + 1) as f64 / panels as f64;
            let (x, w) = gauss_legendre_on(8, a, b);
            for (r, wt) in x.iter().zip(&w) {
                total += wt * integrand(*r);
            }
        }
        total
    }

    #[test]
    fn fourier_symbol_of_es() {
        for (dim, s) in [(3usize, 1.0), (3, 0.6), (1, 0.3)] {
            for k in [1.0, 2.0, 4.0] {
                let num = mollified_symbol(dim, s, k);
                let rel = (num / es_symbol(s, k) - 1.0).abs();
                assert!(rel < 1e-2, "dim {dim} s {s} k {k}: rel {rel}");
            }
        }
    }

    #[test]
    fn h2b_examples() {
        let base = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let grid = radial_log_grid(2, 0.1, 50.0, 60, 8);
        let r = check_h2b(&base, 0.5, &grid).unwrap();
        assert!(r.holds);
        let expected = 0.5 * 50f64.powf(-2.0);
        assert!((r.worst_margin - expected).abs() < 1e-12);
        let pos = base.clone().with_perturbation(PerturbationSpec::Gaussian { amplitude: 2.0, width: 0.3 });
        assert!(check_h2b(&pos, 0.1, &grid).unwrap().holds);
    }

    #[test]
    fn h2b_negative_amplitude_matches_brute_force() {
        for amp in [-0.05, -0.2, -0.5] {
            let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0)
                .unwrap()
                .with_perturbation(PerturbationSpec::Gaussian { amplitude: amp, width: 0.5 });
            // oracle: maximize |c| ĝ(ξ)|ξ|² on a fine grid and compare with κα
            let mut best: f64 = 0.0;
            for i in 1..200_000 {
                let k = i as f64 * 1e-4;
                best = best.max(-perturbation_symbol(&spec, k) * k * k);
            }
            let oracle_holds = best <= 0.5 * spec.alpha;
            let grid = radial_log_grid(2, 0.01, 100.0, 2000, 4);
            let r = check_h2b(&spec, 0.5, &grid).unwrap();
            assert_eq!(r.holds, oracle_holds, "amp {amp}");
            assert!((certified_kappa(&spec) - best / spec.alpha).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn evenness_is_exact(x in -3.0f64..3.0, y in -3.0f64..3.0, s in 0.05f64..1.0) {
            prop_assume!(x * x + y * y > 1e-8);
            let spec = KernelSpec::new(2, s, 1.0, 2.0, vec![1.0, 0.5]).unwrap()
                .with_perturbation(PerturbationSpec::Gaussian { amplitude: -0.3, width: 0.7 });
            let g1 = grad_w(&spec, &[x, y]).unwrap();
            let g2 = grad_w(&spec, &[-x, -y]).unwrap();
            prop_assert_eq!(g1[0], -g2[0]);
            prop_assert_eq!(g1[1], -g2[1]);
            prop_assert_eq!(eval_w(&spec, &[x, y]).unwrap(), eval_w(&spec, &[-x, -y]).unwrap());
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(KernelSpec::isotropic(2, 1.5, 1.0, 1.0).is_err());
        assert!(KernelSpec::isotropic(2, 1.0, 0.0, 1.0).is_err());
        assert!(KernelSpec::new(2, 0.5, 1.0, 1.0, vec![1.0]).is_err());
        assert!(KernelSpec::isotropic(1, 0.75, 1.0, 1.0).is_err());
        assert!(KernelSpec::isotropic(1, 0.5, 1.0, 1.0).unwrap().is_log());
    }
}
