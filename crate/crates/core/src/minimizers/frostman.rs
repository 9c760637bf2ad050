//! Euler-Lagrange (Frostman) verification for minimizer candidates.

use super::potential::{exterior_gradient, mean_potential, potential};
use super::{FrostmanReport, MinimizerProfile, ProfileShape};
use crate::error::{Error, Result, Warned};
use crate::kernels::KernelSpec;
use crate::quad::{linear_fit, loglog_slope};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Points along the outward normal at one boundary point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollarRay {
    pub base: Vec<f64>,
    pub normal: Vec<f64>,
    pub distances: Vec<f64>,
}

impl CollarRay {
    pub fn point(&self, d: f64) -> Vec<f64> {
        self.base.iter().zip(&self.normal).map(|(b, n)| b + d * n).collect()
    }
}

/// Probe points for a Frostman check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub interior: Vec<Vec<f64>>,
    pub exterior: Vec<Vec<f64>>,
    pub collar: Vec<CollarRay>,
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1).max(1) as f64)).collect()
}

impl ProbeGrid {
    /// Default grid: elliptic-polar interior and exterior rings, and a collar
    /// with distances in `[10⁻³, 10⁻¹]·diam` on rays covering the first quadrant.
    pub fn for_profile(profile: &MinimizerProfile) -> Result<Self> {
        Self::refined(profile, 0)
    }

    /// Grid at refinement `level`: twice the angles per level, and collar
    /// distances reaching down by a factor 4 per level.
    pub fn refined(profile: &MinimizerProfile, level: usize) -> Result<Self> {
        let axes = profile.semi_axes();
        let diam = 2.0 * axes.iter().cloned().fold(0.0, f64::max);
        let c = &profile.center;
        let dmin = 1e-3 * diam / 4f64.powi(level as i32);
        let dmax = 1e-1 * diam;
        let nd = 9 + 4 * level;
        let distances = geometric(dmin, dmax, nd);
        match (profile.dim, &profile.shape) {
            (_, ProfileShape::ParticleCloud { .. }) => {
                Err(Error::InvalidSpec("probe grids are built for analytic profiles".into()))
            }
            (1, _) => {
                let r = axes[0];
                let n = 21 << level;
                let interior = (0..n).map(|k| vec![c[0] - r + 2.0 * r * (k as f64 + 0.5) / n as f64]).collect();
                let mut exterior = Vec::new();
                for f in [1.05, 1.2, 1.5, 2.0, 3.0] {
                    exterior.push(vec![c[0] + f * r]);
                    exterior.push(vec![c[0] - f * r]);
                }
                let collar = [1.0, -1.0]
                    .iter()
                    .map(|sg| CollarRay { base: vec![c[0] + sg * r], normal: vec![*sg], distances: distances.clone() })
                    .collect();
                Ok(ProbeGrid { interior, exterior, collar })
            }
            (2, _) => {
                let (a1, a2) = (axes[0], axes[1]);
                let nang = 12 << level;
                let mut interior = vec![c.clone()];
                for rho in [0.2, 0.4, 0.6, 0.8, 0.9, 0.97] {
                    for k in 0..nang {
                        let t = 2.0 * PI * (k as f64 + 0.5) / nang as f64;
                        interior.push(vec![c[0] + a1 * rho * t.cos(), c[1] + a2 * rho * t.sin()]);
                    }
                }
                let mut exterior = Vec::new();
                for rho in [1.05, 1.2, 1.5, 2.0, 3.0] {
                    for k in 0..nang {
                        let t = 2.0 * PI * k as f64 / nang as f64;
                        exterior.push(vec![c[0] + a1 * rho * t.cos(), c[1] + a2 * rho * t.sin()]);
                    }
                }
                let nrays = 6 << level;
                let collar = (0..=nrays)
                    .map(|k| {
                        let t = 0.5 * PI * k as f64 / nrays as f64;
                        let (sn, cs) = t.sin_cos();
                        let n = [cs / a1, sn / a2];
                        let nn = (n[0] * n[0] + n[1] * n[1]).sqrt();
                        CollarRay {
                            base: vec![c[0] + a1 * cs, c[1] + a2 * sn],
                            normal: vec![n[0] / nn, n[1] / nn],
                            distances: distances.clone(),
                        }
                    })
                    .collect();
                Ok(ProbeGrid { interior, exterior, collar })
            }
            _ => Err(Error::InvalidSpec("probe grids are built for N ≤ 2".into())),
        }
    }

    /// Grids for levels `0..levels`.
    pub fn refinement_sequence(profile: &MinimizerProfile, levels: usize) -> Result<Vec<Self>> {
        (0..levels).map(|l| Self::refined(profile, l)).collect()
    }
}

/// Weighted mean of `Φ` over the atoms of a cloud, and the per-atom values.
fn cloud_potentials(profile: &MinimizerProfile, spec: &KernelSpec) -> Result<(f64, Vec<f64>)> {
    let ProfileShape::ParticleCloud { positions, weights } = &profile.shape else { unreachable!() };
    let mut vals = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for (p, w) in positions.chunks(profile.dim).zip(weights) {
        let v = potential(profile, spec, p)?;
        acc += w * v;
        vals.push(v);
    }
    Ok((acc / weights.iter().sum::<f64>(), vals))
}

/// Fits `ln(Φ - A₀)` against `ln d` on each collar ray and averages the slopes.
/// Points whose gap is below `floor` are dropped as quadrature noise.
fn collar_exponent(rays: &[(Vec<f64>, Vec<f64>)], floor: f64) -> f64 {
    let mut slopes = Vec::new();
    for (d, g) in rays {
        let (dd, gg): (Vec<f64>, Vec<f64>) = d.iter().zip(g).filter(|(_, v)| **v > floor).map(|(a, b)| (*a, *b)).unzip();
        if dd.len() >= 3 {
            slopes.push(loglog_slope(&dd, &gg));
        }
    }
    if slopes.is_empty() {
        f64::NAN
    } else {
        slopes.iter().sum::<f64>() / slopes.len() as f64
    }
}

/// Computes `Φ₀ = W * ρ₀` on the probe grid and compares with
/// `A₀ = (1/m)∫Φ₀ dρ₀`.
///
/// Clouds are checked at their own atoms (interior) and on the exterior
/// probes only; their exponent fit is `NaN`.
pub fn frostman_check(profile: &MinimizerProfile, spec: &KernelSpec, probe: &ProbeGrid) -> Result<FrostmanReport> {
    if let ProfileShape::ParticleCloud { .. } = profile.shape {
        let (a0, vals) = cloud_potentials(profile, spec)?;
        let dev = vals.iter().map(|v| (v - a0).abs()).fold(0.0, f64::max);
        let mut slack = f64::INFINITY;
        for x in &probe.exterior {
            slack = slack.min(potential(profile, spec, x)? - a0);
        }
        return Ok(FrostmanReport {
            a0,
            max_interior_deviation: dev,
            min_exterior_slack: slack,
            boundary_exponent_fit: f64::NAN,
        });
    }
    let a0 = mean_potential(profile, spec)?;
    let mut dev: f64 = 0.0;
    for x in &probe.interior {
        dev = dev.max((potential(profile, spec, x)? - a0).abs());
    }
    let mut slack = f64::INFINITY;
    for x in &probe.exterior {
        slack = slack.min(potential(profile, spec, x)? - a0);
    }
    let mut rays = Vec::new();
    for ray in &probe.collar {
        let mut gaps = Vec::with_capacity(ray.distances.len());
        for d in &ray.distances {
            let g = potential(profile, spec, &ray.point(*d))? - a0;
            slack = slack.min(g);
            gaps.push(g);
        }
        rays.push((ray.distances.clone(), gaps));
    }
    let floor = 1e-11 * a0.abs().max(1.0) + 10.0 * dev;
    Ok(FrostmanReport {
        a0,
        max_interior_deviation: dev,
        min_exterior_slack: slack,
        boundary_exponent_fit: collar_exponent(&rays, floor),
    })
}

/// Lipschitz fields for the tangential-derivative condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum VectorField {
    /// `(-x₂, x₁)`.
    Rotation,
    /// `(-a₁x₂/a₂, a₂x₁/a₁)`, tangent to the ellipse with semi-axes `(a₁, a₂)`.
    EllipticRotation { a1: f64, a2: f64 },
    /// `x`; normal to every centered ellipse, used as a negative control.
    Radial,
}

impl VectorField {
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            VectorField::Rotation => [-x[1], x[0]],
            VectorField::EllipticRotation { a1, a2 } => [-a1 * x[1] / a2, a2 * x[0] / a1],
            VectorField::Radial => x,
        }
    }
}

/// Result of the tangential-derivative condition check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Largest ratio on the finest grid.
    pub constant: f64,
    /// Sup of `|F·∇Φ₀|/(Φ₀ - A₀)` on each grid of the refinement sequence.
    pub level_sups: Vec<f64>,
    /// Relative change of the sup between the last two grids.
    pub last_change: f64,
    /// Fitted exponent of the sup against the smallest collar distance
    /// (near zero when the ratio saturates, near `-1` when it blows up).
    pub growth_exponent: f64,
    pub stable: bool,
}

/// `sup |F·∇Φ₀|/(Φ₀ - A₀)` over the collars of a refinement sequence.
///
/// `stable` requires the sups on the last two grids to agree within 20%.
pub fn conditionsurphi_check(
    profile: &MinimizerProfile,
    spec: &KernelSpec,
    field: VectorField,
    probes: &[ProbeGrid],
) -> Result<Warned<ConditionReport>> {
    if profile.dim != 2 || profile.elliptic().is_none() {
        return Err(Error::InvalidSpec("tangential condition is checked for planar analytic profiles".into()));
    }
    if probes.is_empty() {
        return Err(Error::InvalidSpec("need at least one probe grid".into()));
    }
    let a0 = mean_potential(profile, spec)?;
    let mut sups = Vec::new();
    let mut dmins = Vec::new();
    for grid in probes {
        let mut sup: f64 = 0.0;
        let mut dmin = f64::INFINITY;
        for ray in &grid.collar {
            for d in &ray.distances {
                let x = ray.point(*d);
                let gap = potential(profile, spec, &x)? - a0;
                let g = exterior_gradient(profile, spec, [x[0], x[1]])?;
                let y = [x[0] - profile.center[0], x[1] - profile.center[1]];
                let f = field.eval(y);
                let num = (f[0] * g[0] + f[1] * g[1]).abs();
                let ratio = if gap > 0.0 { num / gap } else { f64::INFINITY };
                sup = sup.max(ratio);
                dmin = dmin.min(*d);
            }
        }
        sups.push(sup);
        dmins.push(dmin);
    }
    let n = sups.len();
    let last_change = if n >= 2 { (sups[n - 1] - sups[n - 2]).abs() / sups[n - 2].max(1e-300) } else { 0.0 };
    let growth_exponent = if n >= 2 && sups.iter().all(|v| *v > 0.0 && v.is_finite()) {
        let lx: Vec<f64> = dmins.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = sups.iter().map(|v| v.ln()).collect();
        linear_fit(&lx, &ly).0
    } else {
        0.0
    };
    let stable = sups.iter().all(|v| v.is_finite()) && (last_change <= 0.2 || sups[n - 1] < 1e-6);
    let mut warnings = Vec::new();
    if !stable {
        warnings.push(format!("ratio does not saturate under refinement: sups {sups:?}"));
    }
    Ok(Warned {
        value: ConditionReport { constant: sups[n - 1], level_sups: sups, last_change, growth_exponent, stable },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimizers::{ellipsoid_shape_from_lambda, explicit_radial_minimizer, frostman_1d_check, minimizer_1d_profile};

    #[test]
    fn disk_minimizer_is_certified() {
        let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let p = explicit_radial_minimizer(&spec, 1.0).unwrap();
        let rep = frostman_check(&p, &spec, &ProbeGrid::for_profile(&p).unwrap()).unwrap();
        assert!(rep.relative_interior_deviation() < 1e-10, "{rep:?}");
        assert!(rep.min_exterior_slack > 0.0);
        assert!((rep.boundary_exponent_fit - 2.0).abs() < 0.15, "{rep:?}");
    }

    #[test]
    fn disk_energy_matches_closed_form() {
        // 𝓔 = ∫∫Wρρ for the uniform disk of mass 1, α = β = 1:
        // log part -(1/2π)·m²(ln R - 1/4), quadratic part m·M2
        let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let p = explicit_radial_minimizer(&spec, 1.0).unwrap();
        let r = p.semi_axes()[0];
        let m2: f64 = p.second_moments().iter().sum();
        let energy = -(r.ln() - 0.25) / (2.0 * PI) + m2;
        let a0 = mean_potential(&p, &spec).unwrap();
        assert!((a0 - energy).abs() < 1e-12, "{a0} {energy}");
    }

    #[test]
    fn ellipse_minimizers_are_certified() {
        for s in [0.75, 1.0] {
            let spec = KernelSpec::new(2, s, 1.0, 1.0, vec![1.0, 2.0]).unwrap();
            let p = ellipsoid_shape_from_lambda(&spec, 1.0).unwrap();
            let rep = frostman_check(&p, &spec, &ProbeGrid::for_profile(&p).unwrap()).unwrap();
            assert!(rep.relative_interior_deviation() < 1e-8, "{s}: {rep:?}");
            assert!(rep.min_exterior_slack > 0.0, "{s}: {rep:?}");
            assert!((rep.boundary_exponent_fit - (1.0 + s)).abs() < 0.15, "{s}: {rep:?}");
        }
    }

    #[test]
    fn perturbed_axes_fail_the_check() {
        let spec = KernelSpec::new(2, 1.0, 1.0, 1.0, vec![1.0, 2.0]).unwrap();
        let mut p = ellipsoid_shape_from_lambda(&spec, 1.0).unwrap();
        if let ProfileShape::Ellipsoid2d { a1, c, a2, .. } = &mut p.shape {
            *a1 *= 1.05;
            *c = 1.0 / (PI * *a1 * *a2);
        }
        let rep = frostman_check(&p, &spec, &ProbeGrid::for_profile(&p).unwrap()).unwrap();
        assert!(rep.relative_interior_deviation() > 1e-3);
    }

    #[test]
    fn one_dim_profile_on_shared_path() {
        let p = minimizer_1d_profile(0.75).unwrap().value;
        let a = frostman_1d_check(&p).unwrap();
        assert!(a.min_exterior_slack > 0.0);
    }

    #[test]
    fn rotation_ratio_vanishes_for_disk() {
        let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let p = explicit_radial_minimizer(&spec, 1.0).unwrap();
        let grids = ProbeGrid::refinement_sequence(&p, 2).unwrap();
        let rep = conditionsurphi_check(&p, &spec, VectorField::Rotation, &grids).unwrap().value;
        assert!(rep.constant < 1e-5, "{rep:?}");
    }

    #[test]
    fn elliptic_rotation_is_bounded_and_radial_diverges() {
        let spec = KernelSpec::new(2, 1.0, 1.0, 1.0, vec![1.0, 2.0]).unwrap();
        let p = ellipsoid_shape_from_lambda(&spec, 1.0).unwrap();
        let ax = p.semi_axes();
        let grids = ProbeGrid::refinement_sequence(&p, 3).unwrap();
        let tang = conditionsurphi_check(&p, &spec, VectorField::EllipticRotation { a1: ax[0], a2: ax[1] }, &grids)
            .unwrap()
            .value;
        assert!(tang.stable, "{tang:?}");
        let rad = conditionsurphi_check(&p, &spec, VectorField::Radial, &grids).unwrap().value;
        assert!(!rad.stable && rad.growth_exponent < -0.8, "{rad:?}");
    }
}
