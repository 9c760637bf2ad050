//! One-dimensional reduced problem with kernel `|t|^{-2(1-s)} + |t|²`.

use super::reduced::reduced_constants;
use super::{FrostmanReport, MinimizerProfile, ProfileShape};
use crate::error::{Error, Result, Warned};
use super::potential::segment_convolution;
use crate::quad::loglog_slope;

/// `ρ̃(t) = C_s(1 - t²/R_s²)_+^{3/2-s}`, normalized to unit mass.
pub fn minimizer_1d_profile(s: f64) -> Result<Warned<MinimizerProfile>> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("1-D profile needs s in (0, 1), got {s}")));
    }
    let c = reduced_constants(s);
    let mut warnings = Vec::new();
    if !c.valid() {
        warnings.push(format!(
            "constants outside their validity range at s = {s}: cos((1-s)π) = {:.3e}, R_s = {}, printed C_s = {}",
            c.cos_factor, c.r_s, c.c_s_printed
        ));
    }
    let profile = MinimizerProfile {
        shape: ProfileShape::OneDim { r_s: c.r_s, c_s: c.c_s, exponent: 1.5 - s },
        mass: 1.0,
        dim: 1,
        center: vec![0.0],
    };
    Ok(Warned { value: profile, warnings })
}

fn unpack(profile: &MinimizerProfile) -> Result<(f64, f64, f64)> {
    match profile.shape {
        ProfileShape::OneDim { r_s, c_s, exponent } => Ok((r_s, c_s, exponent)),
        _ => Err(Error::InvalidSpec("expected a one_dim profile".into())),
    }
}

/// `∫(|t-t'|^{-2(1-s)} + |t-t'|²) ρ̃(t') dt'`.
pub fn potential_1d(profile: &MinimizerProfile, t: f64) -> Result<f64> {
    let (r, c, p) = unpack(profile)?;
    let s = 1.5 - p;
    let q = -2.0 * (1.0 - s);
    let m2 = profile.second_moments()[0];
    let mass = profile.integrated_mass();
    let quadratic = t * t * mass + m2;
    let singular = segment_convolution(r, c, p, t, |d| d.powf(q))?;
    Ok(singular + quadratic)
}

/// Compares the potential of `ρ̃` with `V₁` on `[-R_s, R_s]` and outside it.
pub fn frostman_1d_check(profile: &MinimizerProfile) -> Result<FrostmanReport> {
    let (r, _, p) = unpack(profile)?;
    let s = 1.5 - p;
    let v1 = reduced_constants(s).v1;
    let mut dev: f64 = 0.0;
    let n = 41;
    for k in 0..n {
        let t = -r + 2.0 * r * (k as f64 + 0.5) / n as f64;
        dev = dev.max((potential_1d(profile, t)? - v1).abs());
    }
    dev = dev.max((potential_1d(profile, r)? - v1).abs());
    let mut slack = f64::INFINITY;
    for k in 1..=20 {
        let t = r * (1.0 + 0.05 * k as f64);
        slack = slack.min(potential_1d(profile, t)? - v1);
    }
    let mut ds = Vec::new();
    let mut vals = Vec::new();
    for k in 0..12 {
        let d = 2.0 * r * 1e-3 * 100f64.powf(k as f64 / 11.0);
        ds.push(d);
        vals.push(potential_1d(profile, r + d)? - v1);
    }
    Ok(FrostmanReport {
        a0: v1,
        max_interior_deviation: dev,
        min_exterior_slack: slack,
        boundary_exponent_fit: if vals.iter().all(|v| *v > 0.0) { loglog_slope(&ds, &vals) } else { f64::NAN },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_is_flat_for_valid_s() {
        for s in [0.6, 0.75, 0.9] {
            let w = minimizer_1d_profile(s).unwrap();
            assert!(w.warnings.is_empty());
            assert!((w.value.integrated_mass() - 1.0).abs() < 1e-8);
            let rep = frostman_1d_check(&w.value).unwrap();
            assert!(rep.relative_interior_deviation() < 1e-4, "s {s}: {rep:?}");
            assert!(rep.min_exterior_slack > 0.0);
        }
    }

    #[test]
    fn warns_outside_validity_range() {
        let w = minimizer_1d_profile(0.5).unwrap();
        assert_eq!(w.warnings.len(), 1);
    }

    #[test]
    fn potential_matches_plain_quadrature_away_from_singularity() {
        let p = minimizer_1d_profile(0.75).unwrap().value;
        let (r, c, e) = unpack(&p).unwrap();
        let t = 3.0 * r;
        let (x, w) = crate::quad::gauss_jacobi(60, e, e);
        let mut v = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            let tp = r * xi;
            v += wi * r * c * ((t - tp).abs().powf(-0.5) + (t - tp).powi(2));
        }
        assert!((v - potential_1d(&p, t).unwrap()).abs() < 1e-12 * v);
    }
}
