//! Quadrature rules shared by the potential, energy and norm computations.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::beta::beta;

/// Result of an adaptive rule: value plus the last refinement difference.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

const TS_TMAX: f64 = 6.0;
const TS_MAX_LEVEL: usize = 12;

/// Double-exponential (tanh-sinh) rule on `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)`; the two distances are computed
/// without cancellation so endpoint singularities can be evaluated accurately.
pub fn tanh_sinh<F>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> QuadResult
where
    F: FnMut(f64, f64, f64) -> f64,
{
    if b <= a {
        return QuadResult { value: 0.0, error: 0.0, converged: true };
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let hp = std::f64::consts::FRAC_PI_2;
    let fmid = f(mid, half, half);

    let mut eval_pair = |t: f64| -> f64 {
        let u = hp * t.sinh();
        let ch = u.cosh();
        let w = hp * t.cosh() / (ch * ch);
        // 1 - tanh(u) for u >= 0
        let e = (-2.0 * u).exp();
        let dx = half * 2.0 * e / (1.0 + e);
        if dx <= 0.0 || !w.is_finite() || w == 0.0 {
            return 0.0;
        }
        let fr = f(b - dx, 2.0 * half - dx, dx);
        let fl = f(a + dx, dx, 2.0 * half - dx);
        let fr = if fr.is_finite() { fr } else { 0.0 };
        let fl = if fl.is_finite() { fl } else { 0.0 };
        w * (fr + fl)
    };

    let mut sum = hp * fmid;
    let mut h = 1.0;
    let mut k = 1;
    while (k as f64) * h <= TS_TMAX {
        sum += eval_pair(k as f64 * h);
        k += 1;
    }
    let mut prev = sum * h * half;
    let mut err = f64::INFINITY;
    for level in 1..=TS_MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= TS_TMAX {
            sum += eval_pair(k as f64 * h);
            k += 2;
        }
        let cur = sum * h * half;
        err = (cur - prev).abs();
        if level >= 3 && (err <= rel_tol * cur.abs() || err <= abs_tol) {
            return QuadResult { value: cur, error: err, converged: true };
        }
        prev = cur;
    }
    QuadResult { value: prev, error: err, converged: false }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x[0] = 0.0;
            w[0] = 2.0;
            return (x, w);
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|t| h * t).collect())
}

/// Gauss-Jacobi rule for the weight `(1-x)^a (1+x)^b` on `[-1, 1]` (Golub-Welsch).
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && a > -1.0 && b > -1.0);
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let den = 2.0 * kf + a + b;
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (den * (den + 2.0))
        };
        j[(k, k)] = diag;
        if k + 1 < n {
            let k1 = kf + 1.0;
            let d1 = 2.0 * k1 + a + b;
            let num = 4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b);
            let off = (num / (d1 * d1 * (d1 + 1.0) * (d1 - 1.0))).sqrt();
            j[(k, k + 1)] = off;
            j[(k + 1, k)] = off;
        }
    }
    let mu0 = 2f64.powf(a + b + 1.0) * beta(a + 1.0, b + 1.0);
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// Periodic trapezoid on `[0, 2π)` with doubling until two successive values agree.
pub fn periodic_trapezoid<F>(mut f: F, start_n: usize, max_n: usize, rel_tol: f64, abs_tol: f64) -> QuadResult
where
    F: FnMut(f64) -> f64,
{
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut n = start_n.max(4);
    let mut sum: f64 = (0..n).map(|k| f(two_pi * k as f64 / n as f64)).sum();
    let mut prev = sum * two_pi / n as f64;
    let mut err = f64::INFINITY;
    while n < max_n {
        let add: f64 = (0..n).map(|k| f(two_pi * (k as f64 + 0.5) / n as f64)).sum();
        sum += add;
        n *= 2;
        let cur = sum * two_pi / n as f64;
        err = (cur - prev).abs();
        prev = cur;
        if err <= rel_tol * cur.abs() || err <= abs_tol {
            return QuadResult { value: cur, error: err, converged: true };
        }
    }
    QuadResult { value: prev, error: err, converged: false }
}

/// Ordinary least squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let r = tanh_sinh(|_, da, _| da.powf(-0.5), 0.0, 1.0, 1e-14, 0.0);
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-12, "{}", r.value);
        // ∫_0^1 ln x dx = -1
        let r = tanh_sinh(|_, da, _| da.ln(), 0.0, 1.0, 1e-14, 0.0);
        assert!((r.value + 1.0).abs() < 1e-12);
        // right endpoint: ∫_0^2 (2-x)^{-0.3} = 2^{0.7}/0.7
        let r = tanh_sinh(|_, _, db| db.powf(-0.3), 0.0, 2.0, 1e-14, 0.0);
        assert!((r.value - 2f64.powf(0.7) / 0.7).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(1);
        assert_eq!((x[0], w[0]), (0.0, 2.0));
        let (x, w) = gauss_legendre_on(7, 1.0, 3.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((s - 26.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn gauss_jacobi_matches_beta_moments() {
        // ∫_{-1}^1 (1-x)^a (1+x)^b x^2 for a=0.25, b=0 vs tanh-sinh
        let (a, b) = (0.25, 0.0);
        let (x, w) = gauss_jacobi(12, a, b);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let r = tanh_sinh(|x, _, db| db.powf(a) * x * x, -1.0, 1.0, 1e-15, 0.0);
        assert!((s - r.value).abs() < 1e-12, "{s} {}", r.value);
        let total: f64 = w.iter().sum();
        assert!((total - 2f64.powf(a + b + 1.0) * beta(a + 1.0, b + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn periodic_trapezoid_is_spectral() {
        let r = periodic_trapezoid(|t| (t.cos()).exp(), 8, 1 << 12, 1e-15, 0.0);
        // 2π I0(1)
        assert!((r.value - 2.0 * std::f64::consts::PI * 1.266_065_877_752_008_4).abs() < 1e-13);
    }

    #[test]
    fn loglog_slope_recovers_power() {
        let x: Vec<f64> = (1..10).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(1.75)).collect();
        assert!((loglog_slope(&x, &y) - 1.75).abs() < 1e-12);
    }
}
