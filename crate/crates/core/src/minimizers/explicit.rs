use super::reduced::dyda_constant;
use super::{unit_ball_volume, MinimizerProfile, ProfileShape};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, PerturbationSpec};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Radial minimizer for `Λ = I`, `w = none`.
///
/// `s = 1`: uniform ball with `c₀ = βmN/α` and `c₀|B_R| = m`.
/// `s < 1`: `c(R² - |x|²)_+^{1-s}`. With `σ = 1-s` the potential of
/// `(R²-|x|²)^σ` is `V₀ - κ|x|²/(2N)` inside the ball, where `κ` is the
/// fractional-Laplacian constant of `(1-|x|²)^σ`; flatness of `Φ₀` then gives
/// `c = βmN/(ακ)` and the mass constraint fixes `R`.
pub fn explicit_radial_minimizer(spec: &KernelSpec, m: f64) -> Result<MinimizerProfile> {
    spec.validate()?;
    if !spec.is_isotropic() {
        return Err(Error::InvalidSpec("explicit radial minimizer needs Λ = I".into()));
    }
    if spec.perturbation != PerturbationSpec::None {
        return Err(Error::InvalidSpec("explicit radial minimizer needs w = none".into()));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidSpec("mass must be positive".into()));
    }
    let n = spec.dim as f64;
    let shape = if spec.s >= 1.0 {
        let c0 = spec.beta * m * n / spec.alpha;
        let radius = (m / (c0 * unit_ball_volume(spec.dim))).powf(1.0 / n);
        ProfileShape::RadialIndicator { radius, c0 }
    } else {
        let sigma = 1.0 - spec.s;
        let kappa = dyda_constant(spec.dim, sigma);
        let c = spec.beta * m * n / (spec.alpha * kappa);
        // c R^{N+2σ} π^{N/2} Γ(σ+1)/Γ(N/2+σ+1) = m
        let rp = m * gamma(n / 2.0 + sigma + 1.0) / (c * PI.powf(n / 2.0) * gamma(sigma + 1.0));
        let radius = rp.powf(1.0 / (n + 2.0 * sigma));
        ProfileShape::RadialPower { radius, c, exponent: sigma }
    };
    Ok(MinimizerProfile { shape, mass: m, dim: spec.dim, center: vec![0.0; spec.dim] })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(alpha: f64) -> (f64, f64) {
        let spec = KernelSpec::isotropic(2, 1.0, alpha, 1.0).unwrap();
        match explicit_radial_minimizer(&spec, 1.0).unwrap().shape {
            ProfileShape::RadialIndicator { radius, c0 } => (c0, radius),
            _ => panic!(),
        }
    }

    #[test]
    fn disk_examples() {
        let (c0, r) = disk(1.0);
        assert!((c0 - 2.0).abs() < 1e-15);
        assert!((r - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let (c0, r) = disk(2.0);
        assert!((c0 - 1.0).abs() < 1e-15);
        assert!((r - 1.0 / PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn power_profile_has_requested_mass() {
        for (dim, s) in [(2usize, 0.5), (2, 0.75), (3, 0.4), (1, 0.3)] {
            let spec = KernelSpec::isotropic(dim, s, 1.0, 1.0).unwrap();
            let p = explicit_radial_minimizer(&spec, 2.5).unwrap();
            assert!((p.integrated_mass() - 2.5).abs() < 1e-12, "{dim} {s}");
        }
    }

    #[test]
    fn support_is_mass_independent() {
        let spec = KernelSpec::isotropic(2, 0.6, 1.0, 1.0).unwrap();
        let a = explicit_radial_minimizer(&spec, 1.0).unwrap().semi_axes();
        let b = explicit_radial_minimizer(&spec, 7.0).unwrap().semi_axes();
        assert!((a[0] - b[0]).abs() < 1e-14);
    }

    #[test]
    fn rejects_anisotropy_and_perturbation() {
        let spec = KernelSpec::new(2, 1.0, 1.0, 1.0, vec![1.0, 2.0]).unwrap();
        assert!(explicit_radial_minimizer(&spec, 1.0).is_err());
        let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0)
            .unwrap()
            .with_perturbation(PerturbationSpec::Gaussian { amplitude: 1.0, width: 1.0 });
        assert!(explicit_radial_minimizer(&spec, 1.0).is_err());
    }
}
