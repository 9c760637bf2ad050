//! Global minimizers of the interaction energy and their certification.

mod reduced;
mod ellipse;
mod explicit;
mod frostman;
mod gradient_flow;
mod one_dim;
mod potential;

pub use reduced::{reduced_constants, dyda_constant, ReducedConstants};
pub use ellipse::{
    ellipse_target, ellipsoid_shape_from_lambda, grad_zeta, hess_zeta, quadratic_coefficients, solve_ellipse,
    uniform_ellipse_axes, zeta, zeta_closed_form_s1, zeta_log_numeric, EllipseSolution,
};
pub use explicit::explicit_radial_minimizer;
pub use frostman::{conditionsurphi_check, frostman_check, CollarRay, ConditionReport, ProbeGrid, VectorField};
pub use gradient_flow::{gradient_flow_minimizer, gradient_flow_with, GradientFlowOptions, GradientFlowTrace};
pub use one_dim::{frostman_1d_check, minimizer_1d_profile, potential_1d};
pub use potential::{potential, EllipticDensity};
#[cfg(test)]
pub(crate) use potential::mean_potential;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Shape of a minimizer; serialized as `{variant, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
pub enum ProfileShape {
    /// `c₀·1_{|x|<R}`.
    RadialIndicator { radius: f64, c0: f64 },
    /// `c(R² - |x|²)_+^{exponent}`.
    RadialPower { radius: f64, c: f64, exponent: f64 },
    /// `c(1 - x₁²/a₁² - x₂²/a₂²)_+^{exponent}`.
    Ellipsoid2d { a1: f64, a2: f64, c: f64, exponent: f64 },
    /// `C_s(1 - t²/R_s²)_+^{exponent}` on the line.
    OneDim { r_s: f64, c_s: f64, exponent: f64 },
    /// Weighted atoms, positions stored row-major.
    ParticleCloud { positions: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerProfile {
    #[serde(flatten)]
    pub shape: ProfileShape,
    pub mass: f64,
    pub dim: usize,
    pub center: Vec<f64>,
}

/// Outcome of a Frostman-condition check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanReport {
    pub a0: f64,
    pub max_interior_deviation: f64,
    pub min_exterior_slack: f64,
    pub boundary_exponent_fit: f64,
}

impl FrostmanReport {
    pub fn relative_interior_deviation(&self) -> f64 {
        self.max_interior_deviation / self.a0.abs()
    }

    pub fn certified(&self, rel_tol: f64) -> bool {
        self.relative_interior_deviation() <= rel_tol && self.min_exterior_slack >= -rel_tol * self.a0.abs()
    }
}

/// Volume of the unit ball in `R^N`.
pub fn unit_ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0)
}

impl MinimizerProfile {
    pub fn n_particles(&self) -> Option<usize> {
        match &self.shape {
            ProfileShape::ParticleCloud { weights, .. } => Some(weights.len()),
            _ => None,
        }
    }

    /// Density at `x` (analytic variants only).
    pub fn density(&self, x: &[f64]) -> f64 {
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let r2: f64 = y.iter().map(|v| v * v).sum();
        match &self.shape {
            ProfileShape::RadialIndicator { radius, c0 } => {
                if r2 < radius * radius {
                    *c0
                } else {
                    0.0
                }
            }
            ProfileShape::RadialPower { radius, c, exponent } => {
                let q = radius * radius - r2;
                if q > 0.0 {
                    c * q.powf(*exponent)
                } else {
                    0.0
                }
            }
            ProfileShape::Ellipsoid2d { a1, a2, c, exponent } => {
                let q = 1.0 - y[0] * y[0] / (a1 * a1) - y[1] * y[1] / (a2 * a2);
                if q > 0.0 {
                    c * q.powf(*exponent)
                } else {
                    0.0
                }
            }
            ProfileShape::OneDim { r_s, c_s, exponent } => {
                let q = 1.0 - r2 / (r_s * r_s);
                if q > 0.0 {
                    c_s * q.powf(*exponent)
                } else {
                    0.0
                }
            }
            ProfileShape::ParticleCloud { .. } => 0.0,
        }
    }

    /// Elliptic description `amp(1 - |x|²_A)^p` of analytic 2-D profiles.
    pub fn elliptic(&self) -> Option<EllipticDensity> {
        if self.dim != 2 {
            return None;
        }
        match &self.shape {
            ProfileShape::RadialIndicator { radius, c0 } => Some(EllipticDensity::new([*radius, *radius], *c0, 0.0)),
            ProfileShape::RadialPower { radius, c, exponent } => {
                Some(EllipticDensity::new([*radius, *radius], c * radius.powf(2.0 * exponent), *exponent))
            }
            ProfileShape::Ellipsoid2d { a1, a2, c, exponent } => Some(EllipticDensity::new([*a1, *a2], *c, *exponent)),
            _ => None,
        }
    }

    /// Semi-axes of the support (radius repeated for radial profiles).
    pub fn semi_axes(&self) -> Vec<f64> {
        match &self.shape {
            ProfileShape::RadialIndicator { radius, .. } | ProfileShape::RadialPower { radius, .. } => {
                vec![*radius; self.dim]
            }
            ProfileShape::Ellipsoid2d { a1, a2, .. } => vec![*a1, *a2],
            ProfileShape::OneDim { r_s, .. } => vec![*r_s],
            ProfileShape::ParticleCloud { positions, .. } => {
                let mut ext = vec![0.0f64; self.dim];
                for p in positions.chunks(self.dim) {
                    for j in 0..self.dim {
                        ext[j] = ext[j].max((p[j] - self.center[j]).abs());
                    }
                }
                ext
            }
        }
    }

    /// Total mass from the profile parameters (closed form or weight sum).
    pub fn integrated_mass(&self) -> f64 {
        let n = self.dim as f64;
        match &self.shape {
            ProfileShape::RadialIndicator { radius, c0 } => c0 * unit_ball_volume(self.dim) * radius.powf(n),
            ProfileShape::RadialPower { radius, c, exponent } => {
                // ∫(R²-|x|²)^p = R^{N+2p} π^{N/2} Γ(p+1)/Γ(N/2+p+1)
                c * radius.powf(n + 2.0 * exponent) * PI.powf(n / 2.0) * gamma(exponent + 1.0)
                    / gamma(n / 2.0 + exponent + 1.0)
            }
            ProfileShape::Ellipsoid2d { a1, a2, c, exponent } => c * a1 * a2 * PI / (exponent + 1.0),
            ProfileShape::OneDim { r_s, c_s, exponent } => {
                c_s * r_s * statrs::function::beta::beta(0.5, exponent + 1.0)
            }
            ProfileShape::ParticleCloud { weights, .. } => weights.iter().sum(),
        }
    }

    /// `∫ x_j² dρ` about the profile center.
    pub fn second_moments(&self) -> Vec<f64> {
        if let Some(e) = self.elliptic() {
            return vec![e.second_moment(0), e.second_moment(1)];
        }
        let n = self.dim as f64;
        match &self.shape {
            ProfileShape::RadialIndicator { .. } | ProfileShape::RadialPower { .. } => {
                // ∫|x|² over a radial profile split evenly between coordinates
                let (radius, p, amp) = match &self.shape {
                    ProfileShape::RadialIndicator { radius, c0 } => (*radius, 0.0, *c0),
                    ProfileShape::RadialPower { radius, c, exponent } => {
                        (*radius, *exponent, c * radius.powf(2.0 * exponent))
                    }
                    _ => unreachable!(),
                };
                // ∫_{B_R} |x|² (1-|x|²/R²)^p = |S^{N-1}| R^{N+2} B(N/2+1, p+1)/2
                let sphere = 2.0 * PI.powf(n / 2.0) / gamma(n / 2.0);
                let total = amp * sphere * radius.powf(n + 2.0) * statrs::function::beta::beta(n / 2.0 + 1.0, p + 1.0) / 2.0;
                vec![total / n; self.dim]
            }
            ProfileShape::OneDim { r_s, c_s, exponent } => {
                // ∫ t² C(1-t²/R²)^p dt = C R³ B(3/2, p+1)
                vec![c_s * r_s.powi(3) * statrs::function::beta::beta(1.5, exponent + 1.0)]
            }
            ProfileShape::ParticleCloud { positions, weights } => {
                let mut m2 = vec![0.0; self.dim];
                for (p, w) in positions.chunks(self.dim).zip(weights) {
                    for j in 0..self.dim {
                        let d = p[j] - self.center[j];
                        m2[j] += w * d * d;
                    }
                }
                m2
            }
            ProfileShape::Ellipsoid2d { .. } => unreachable!(),
        }
    }

    /// Weighted center of mass (clouds) or the stored center.
    pub fn center_of_mass(&self) -> Vec<f64> {
        match &self.shape {
            ProfileShape::ParticleCloud { positions, weights } => {
                let mut c = vec![0.0; self.dim];
                let m: f64 = weights.iter().sum();
                for (p, w) in positions.chunks(self.dim).zip(weights) {
                    for j in 0..self.dim {
                        c[j] += w * p[j];
                    }
                }
                c.iter().map(|v| v / m).collect()
            }
            _ => self.center.clone(),
        }
    }

    /// Copy translated by `shift`.
    pub fn translated(&self, shift: &[f64]) -> MinimizerProfile {
        let mut out = self.clone();
        for j in 0..self.dim {
            out.center[j] += shift[j];
        }
        if let ProfileShape::ParticleCloud { positions, .. } = &mut out.shape {
            for p in positions.chunks_mut(self.dim) {
                for j in 0..self.dim {
                    p[j] += shift[j];
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("profile JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_document_has_variant_params_mass() {
        let p = MinimizerProfile {
            shape: ProfileShape::RadialIndicator { radius: 0.5, c0: 2.0 },
            mass: 1.0,
            dim: 2,
            center: vec![0.0, 0.0],
        };
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v["variant"], "radial_indicator");
        assert_eq!(v["params"]["c0"], 2.0);
        assert_eq!(v["mass"], 1.0);
        assert_eq!(MinimizerProfile::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn closed_form_masses_agree_with_each_other() {
        let r = 0.7;
        let p = 0.25;
        let c = 1.3;
        let radial = MinimizerProfile {
            shape: ProfileShape::RadialPower { radius: r, c, exponent: p },
            mass: 0.0,
            dim: 2,
            center: vec![0.0; 2],
        };
        let ell = MinimizerProfile {
            shape: ProfileShape::Ellipsoid2d { a1: r, a2: r, c: c * r.powf(2.0 * p), exponent: p },
            mass: 0.0,
            dim: 2,
            center: vec![0.0; 2],
        };
        assert!((radial.integrated_mass() - ell.integrated_mass()).abs() < 1e-14);
        let m2r = radial.second_moments();
        let m2e = ell.second_moments();
        assert!((m2r[0] - m2e[0]).abs() < 1e-14);
    }
}
