use serde::Serialize;
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Constants of the one-dimensional reduced problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedConstants {
    pub s: f64,
    /// `B(1-s, 1-s)`.
    pub beta_s: f64,
    pub r_s: f64,
    /// `R_s cos((1-s)π)/((1-s)(3-2s)π)` as printed.
    pub c_s_printed: f64,
    /// Normalization giving `∫ρ̃ = 1`: `1/(R_s B(1/2, (5-2s)/2))`.
    pub c_s: f64,
    /// Constant value of the 1-D potential on `[-R_s, R_s]`.
    pub v1: f64,
    /// `R_s²(1/(2(1-s)) + 1/(2(3-2s)))` as printed.
    pub v1_printed: f64,
    /// `cos((1-s)π)`, nonpositive for `s ≤ 1/2`.
    pub cos_factor: f64,
}

impl ReducedConstants {
    /// False outside the range where `R_s` and `C_s` are finite and positive.
    pub fn valid(&self) -> bool {
        self.cos_factor > 1e-12 && self.r_s.is_finite() && self.r_s > 0.0 && self.c_s_printed > 0.0
    }
}

pub fn reduced_constants(s: f64) -> ReducedConstants {
    let cos_factor = ((1.0 - s) * PI).cos();
    let k = cos_factor / ((1.0 - s) * (3.0 - 2.0 * s) * PI);
    let b = beta(0.5, (5.0 - 2.0 * s) / 2.0);
    let r_s = (k * b).powf(-1.0 / (4.0 - 2.0 * s));
    ReducedConstants {
        s,
        beta_s: beta(1.0 - s, 1.0 - s),
        r_s,
        c_s_printed: r_s * k,
        c_s: 1.0 / (r_s * b),
        v1: r_s * r_s * (1.0 / (2.0 * (1.0 - s)) + 1.0 / (2.0 * (3.0 - s))),
        v1_printed: r_s * r_s * (1.0 / (2.0 * (1.0 - s)) + 1.0 / (2.0 * (3.0 - 2.0 * s))),
        cos_factor,
    }
}

/// `(-Δ)^σ (1-|x|²)_+^σ = κ` on the unit ball: `κ = 4^σ Γ(1+σ) Γ(N/2+σ)/Γ(N/2)`.
pub fn dyda_constant(n: usize, sigma: f64) -> f64 {
    let h = n as f64 / 2.0;
    4f64.powf(sigma) * gamma(1.0 + sigma) * gamma(h + sigma) / gamma(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_constant_gives_unit_mass() {
        for s in [0.6, 0.75, 0.9] {
            let c = reduced_constants(s);
            assert!(c.valid());
            let mass = c.c_s * c.r_s * beta(0.5, 2.5 - s);
            assert!((mass - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reference_values() {
        // high-precision reference evaluations of the corrected constants
        let c = reduced_constants(0.75);
        assert!((c.v1 - 2.500_306_661_877_462).abs() < 1e-12);
        assert!((c.c_s - 0.655_704_562_545_915_7).abs() < 1e-12);
        let c = reduced_constants(0.9);
        assert!((c.v1 - 1.549_698_480_690_493).abs() < 1e-12);
    }

    #[test]
    fn invalid_range_detected() {
        assert!(!reduced_constants(0.5).valid());
        assert!(!reduced_constants(0.3).valid());
    }

    #[test]
    fn dyda_constant_laplacian_case() {
        // σ = 1: -Δ(1-|x|²) = 2N
        for n in 1..=3 {
            assert!((dyda_constant(n, 1.0) - 2.0 * n as f64).abs() < 1e-12);
        }
    }
}
