//! Property suites shared by the `check` command and the acceptance tests.

use crate::asymptotic::{integrate_xv, linear_flow_exact};
use crate::diagnostics::{hminus_s_norm, CoercivityContext, HmsMethod};
use crate::error::Result;
use crate::experiments::{xv_residual_halving, SweepOutcome, SweepSettings};
use crate::grid::{BoxGrid, GridField};
use crate::kernels::{certified_kappa, check_h2b, grad_w, radial_log_grid, sigma_constant, KernelSpec, PerturbationSpec};
use crate::minimizers::{
    conditionsurphi_check, ellipse_target, ellipsoid_shape_from_lambda, explicit_radial_minimizer, frostman_1d_check,
    frostman_check, grad_zeta, minimizer_1d_profile, solve_ellipse, zeta_log_numeric, ProbeGrid, ProfileShape,
    VectorField,
};
use crate::simulator::{observables, ExternalFieldSpec, Integrator, ParticleEnsemble, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckOutcome { name: name.into(), passed, detail }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((p, d)) => Self::new(name, p, d),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

pub const SUITES: [&str; 5] = ["kernels", "minimizers", "coercivity", "ode", "modulated"];

/// Runs a named suite (`all` runs every suite); `None` for unknown names.
pub fn run_suite(name: &str) -> Option<Vec<CheckOutcome>> {
    let out = match name {
        "kernels" => kernel_suite(),
        "minimizers" => vec![
            disk_certification(),
            ellipse_solver(),
            log_zeta_closed_form(),
            one_dim_frostman(),
            boundary_exponent(),
        ],
        "coercivity" => vec![coercivity_trials(200, 2024)],
        "ode" => vec![ode_order(), conservation_and_dissipation()],
        "modulated" => modulated_suite(),
        "all" => SUITES.iter().flat_map(|s| run_suite(s).unwrap()).collect(),
        _ => return None,
    };
    Some(out)
}

pub fn kernel_suite() -> Vec<CheckOutcome> {
    let sigma = CheckOutcome::from_result(
        "sigma(3,1) = 1/(4π)",
        sigma_constant(3, 1.0).map(|v| {
            let rel = (v * 4.0 * PI - 1.0).abs();
            (rel < 1e-12, format!("relative error {rel:.2e}"))
        }),
    );
    let grad = CheckOutcome::from_result(
        "kernel gradient vs central differences",
        (|| {
            let spec = KernelSpec::new(2, 0.75, 1.3, 0.7, vec![1.0, 2.0])?
                .with_perturbation(PerturbationSpec::Gaussian { amplitude: 0.2, width: 0.5 });
            let k = spec.prepared();
            let mut worst: f64 = 0.0;
            for x in [[0.3, -0.2], [1.1, 0.4], [-0.05, 0.7]] {
                let g = grad_w(&spec, &x)?;
                for j in 0..2 {
                    let h = 1e-6;
                    let (mut p, mut m) = (x, x);
                    p[j] += h;
                    m[j] -= h;
                    let fd = (k.value(&p) - k.value(&m)) / (2.0 * h);
                    worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
                }
            }
            Ok((worst < 1e-7, format!("worst relative deviation {worst:.2e}")))
        })(),
    );
    let h2b = CheckOutcome::from_result(
        "certified κ is sharp for H2b",
        (|| {
            let spec = KernelSpec::isotropic(2, 0.75, 1.0, 1.0)?
                .with_perturbation(PerturbationSpec::Gaussian { amplitude: -0.05, width: 0.3 });
            let kappa = certified_kappa(&spec);
            let grid = radial_log_grid(2, 1e-2, 1e3, 400, 16);
            let ok = check_h2b(&spec, kappa * (1.0 + 1e-9), &grid)?;
            let bad = check_h2b(&spec, 0.9 * kappa, &grid)?;
            Ok((ok.holds && !bad.holds, format!("κ = {kappa:.6e}, margin at 0.9κ = {:.2e}", bad.worst_margin)))
        })(),
    );
    vec![sigma, grad, h2b]
}

/// Disk minimizer for `s = 1`, `Λ = I`, `α = β = m = 1`.
pub fn disk_certification() -> CheckOutcome {
    let start = Instant::now();
    CheckOutcome::from_result(
        "disk minimizer Frostman certificate",
        (|| {
            let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0)?;
            let p = explicit_radial_minimizer(&spec, 1.0)?;
            let r = frostman_check(&p, &spec, &ProbeGrid::for_profile(&p)?)?;
            let secs = start.elapsed().as_secs_f64();
            let ok = r.relative_interior_deviation() < 1e-3 && r.min_exterior_slack > 0.0 && secs < 10.0;
            Ok((
                ok,
                format!(
                    "interior {:.2e}·|A0|, exterior slack {:.3e}, {secs:.2} s",
                    r.relative_interior_deviation(),
                    r.min_exterior_slack
                ),
            ))
        })(),
    )
}

pub fn ellipse_solver() -> CheckOutcome {
    CheckOutcome::from_result(
        "ellipse solver round trip and certification",
        (|| {
            let (mut worst_res, mut worst_dev): (f64, f64) = (0.0, 0.0);
            for s in [0.6, 0.75, 0.9] {
                for ratio in [1.0, 2.0, 4.0] {
                    let spec = KernelSpec::new(2, s, 1.0, 1.0, vec![1.0, ratio])?;
                    let p = ellipsoid_shape_from_lambda(&spec, 1.0)?;
                    let ProfileShape::Ellipsoid2d { a1, a2, .. } = p.shape else { unreachable!() };
                    let z = ellipse_target(&spec, 1.0)?;
                    let g = grad_zeta([a1 * a1, a2 * a2], s, 1.0)?.value;
                    let res = ((g[0] - z[0]).powi(2) + (g[1] - z[1]).powi(2)).sqrt() / (z[0].hypot(z[1]));
                    worst_res = worst_res.max(res);
                    let rep = frostman_check(&p, &spec, &ProbeGrid::for_profile(&p)?)?;
                    if !rep.certified(1e-3) {
                        return Ok((false, format!("s {s} ratio {ratio}: {rep:?}")));
                    }
                    worst_dev = worst_dev.max(rep.relative_interior_deviation());
                }
            }
            let iso = solve_ellipse(&KernelSpec::isotropic(2, 0.75, 1.0, 1.0)?)?;
            let aspect = iso.a[0] / iso.a[1];
            let ok = worst_res < 1e-8 && (aspect - 1.0).abs() < 1e-6;
            Ok((
                ok,
                format!("residual {worst_res:.2e}, Λ=I aspect {aspect:.12}, worst Frostman {worst_dev:.2e}"),
            ))
        })(),
    )
}

pub fn log_zeta_closed_form() -> CheckOutcome {
    CheckOutcome::from_result(
        "s = 1 ζ closed form",
        (|| {
            let rs: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
            let mut worst: f64 = 0.0;
            for r1 in rs {
                for r2 in rs {
                    let exact = 2.0 * PI * ((r1.sqrt() + r2.sqrt()) / 2.0).ln();
                    let num = zeta_log_numeric([r1, r2])?;
                    let err = if exact == 0.0 { num.abs() } else { ((num - exact) / exact).abs() };
                    worst = worst.max(err);
                }
            }
            Ok((worst < 1e-8, format!("worst relative error {worst:.2e} on a 5×5 grid")))
        })(),
    )
}

pub fn one_dim_frostman() -> CheckOutcome {
    CheckOutcome::from_result(
        "1-D Frostman plateau",
        (|| {
            let mut worst: f64 = 0.0;
            for s in [0.6, 0.75, 0.9] {
                let p = minimizer_1d_profile(s)?.value;
                let r = frostman_1d_check(&p)?;
                worst = worst.max(r.relative_interior_deviation());
            }
            Ok((worst < 1e-4, format!("worst relative deviation from V1 {worst:.2e}")))
        })(),
    )
}

pub fn boundary_exponent() -> CheckOutcome {
    CheckOutcome::from_result(
        "boundary exponent and tangential condition",
        (|| {
            let mut detail = Vec::new();
            let mut ok = true;
            for s in [0.75, 1.0] {
                let spec = KernelSpec::new(2, s, 1.0, 1.0, vec![1.0, 2.0])?;
                let p = ellipsoid_shape_from_lambda(&spec, 1.0)?;
                let r = frostman_check(&p, &spec, &ProbeGrid::for_profile(&p)?)?;
                let fit = r.boundary_exponent_fit;
                ok &= (fit - (1.0 + s)).abs() <= 0.15;
                detail.push(format!("s={s}: exponent {fit:.3}"));
            }
            let spec = KernelSpec::new(2, 1.0, 1.0, 1.0, vec![1.0, 2.0])?;
            let p = ellipsoid_shape_from_lambda(&spec, 1.0)?;
            let ax = p.semi_axes();
            let grids = ProbeGrid::refinement_sequence(&p, 3)?;
            let tang =
                conditionsurphi_check(&p, &spec, VectorField::EllipticRotation { a1: ax[0], a2: ax[1] }, &grids)?.value;
            let rad = conditionsurphi_check(&p, &spec, VectorField::Radial, &grids)?.value;
            ok &= tang.stable && tang.constant.is_finite() && !rad.stable;
            detail.push(format!(
                "tangential C {:.3e} (stable {}), normal growth {:.2}",
                tang.constant, tang.stable, rad.growth_exponent
            ));
            Ok((ok, detail.join("; ")))
        })(),
    )
}

/// Randomized coercivity trials, half on the log kernel and half on an
/// anisotropic power kernel with a certified Gaussian perturbation.
pub fn coercivity_trials(count: usize, seed: u64) -> CheckOutcome {
    CheckOutcome::from_result(
        "coercivity on randomized trials",
        (|| {
            let log = KernelSpec::isotropic(2, 1.0, 1.0, 1.0)?;
            let log_ref = explicit_radial_minimizer(&log, 1.0)?;
            let a = CoercivityContext::with_default_grid(&log, &log_ref, 40, 0.0)?;
            let pert = KernelSpec::new(2, 0.75, 1.0, 1.0, vec![1.0, 2.0])?
                .with_perturbation(PerturbationSpec::Gaussian { amplitude: -0.05, width: 0.3 });
            let base = KernelSpec { perturbation: PerturbationSpec::None, ..pert.clone() };
            let pref = ellipsoid_shape_from_lambda(&base, 1.0)?;
            let b = CoercivityContext::with_default_grid(&pert, &pref, 32, certified_kappa(&pert))?;
            let eq_a = a.check(&a.reference)?;
            let eq_b = b.check(&b.reference)?;
            let exact = eq_a.lhs == 0.0 && eq_a.rhs == 0.0 && eq_b.lhs == 0.0 && eq_b.rhs == 0.0;
            let mut reports = a.trials(count / 2, seed)?;
            reports.extend(b.trials(count - count / 2, seed + 1)?);
            let held = reports.iter().filter(|r| r.holds).count();
            let worst = reports.iter().map(|r| r.slack()).fold(f64::INFINITY, f64::min);
            Ok((
                held == reports.len() && exact,
                format!("{held}/{} hold, smallest slack {worst:.3e}, μ = 0 exact: {exact}", reports.len()),
            ))
        })(),
    )
}

/// Global RK4 error ratio under halving on a linear field.
pub fn ode_order() -> CheckOutcome {
    CheckOutcome::from_result(
        "limit ODE fourth order",
        (|| {
            let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0)?;
            let p = explicit_radial_minimizer(&spec, 1.0)?;
            let a = vec![vec![-0.5, 0.2], vec![0.2, -0.3]];
            let b = vec![0.3, 0.1];
            let f = ExternalFieldSpec::Linear { a: a.clone(), b: b.clone() };
            let (x0, v0) = ([0.1, 0.0], [0.5, 0.0]);
            let (xe, ve) = linear_flow_exact(&a, &b, 1.0, &x0, &v0, 1.0)?;
            let err = |dt: f64| -> Result<f64> {
                let tr = integrate_xv(&p, &f, 1.0, &x0, &v0, 1.0, dt)?;
                let (x, v) = (tr.x.last().unwrap(), tr.v.last().unwrap());
                Ok((0..2).map(|j| (x[j] - xe[j]).abs().max((v[j] - ve[j]).abs())).fold(0.0, f64::max))
            };
            let ratio = err(0.1)? / err(0.05)?;
            Ok(((14.0..=18.0).contains(&ratio), format!("error ratio {ratio:.3}")))
        })(),
    )
}

fn random_cloud(n: usize, thermal: f64, seed: u64) -> Result<ParticleEnsemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = Vec::with_capacity(2 * n);
    let mut vel = Vec::with_capacity(2 * n);
    for _ in 0..2 * n {
        let z: f64 = StandardNormal.sample(&mut rng);
        pos.push(0.3 * z);
        let z: f64 = StandardNormal.sample(&mut rng);
        vel.push(thermal * z);
    }
    ParticleEnsemble::new(2, pos, vel, 1.0 / n as f64)
}

/// Mass over 10⁴ steps, momentum drift without drag, and per-step decay of
/// `H_ε` with drag and `u_ext = 0`.
pub fn conservation_and_dissipation() -> CheckOutcome {
    CheckOutcome::from_result(
        "conservation and dissipation",
        (|| {
            let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0)?.with_delta(0.05);
            let mut cfg = SimConfig {
                epsilon: 0.1,
                lambda_drag: 0.0,
                dt: 1e-3,
                t_final: 10.0,
                kernel: spec.clone(),
                external_field: ExternalFieldSpec::Zero,
                seed: 0,
            };
            let mut st = random_cloud(60, 0.3, 5)?;
            let m0 = st.mass();
            let p0 = st.total_momentum();
            let mut it = Integrator::new(&cfg, &st)?;
            let mut mass_ok = true;
            for _ in 0..10_000 {
                it.step(&mut st)?;
                mass_ok &= observables(&st, &cfg, 0.0).mass == m0;
            }
            let p1 = st.total_momentum();
            let drift = (p1[0] - p0[0]).hypot(p1[1] - p0[1]) / st.time;

            cfg.lambda_drag = 1.0;
            cfg.epsilon = 0.05;
            cfg.dt = 2e-3;
            cfg.t_final = 2.0;
            let mut st = random_cloud(200, 0.5, 6)?;
            let mut it = Integrator::new(&cfg, &st)?;
            let mut h = observables(&st, &cfg, 0.0).total_energy_h;
            let mut worst: f64 = 0.0;
            for _ in 0..cfg.n_steps() {
                it.step(&mut st)?;
                let hn = observables(&st, &cfg, 0.0).total_energy_h;
                worst = worst.max(hn - h);
                h = hn;
            }
            let ok = mass_ok && drift < 1e-12 && worst < 1e-6;
            Ok((
                ok,
                format!("mass constant: {mass_ok}, momentum drift {drift:.2e}/time, worst H increase {worst:.2e}"),
            ))
        })(),
    )
}

pub fn modulated_suite() -> Vec<CheckOutcome> {
    let hms = CheckOutcome::from_result(
        "Ḣ^{-s} methods agree",
        (|| {
            let g = BoxGrid::centered(&[0.0, 0.0], 3.0, 96)?;
            let bump = |x: &[f64], c: f64| (-((x[0] - c).powi(2) + x[1] * x[1]) / (2.0 * 0.16)).exp();
            let mu = GridField::sample(g, |x| bump(x, 0.5) - bump(x, -0.5));
            let a = hminus_s_norm(&mu, 0.5, HmsMethod::FourierQuadrature)?.value.value;
            let b = hminus_s_norm(&mu, 0.5, HmsMethod::KernelDoubleIntegral)?.value.value;
            let rel = ((a - b) / b).abs();
            Ok((rel < 1e-3, format!("relative gap {rel:.2e}")))
        })(),
    );
    let eq = CheckOutcome::from_result(
        "stationary minimizer keeps 𝓗 ≈ 0",
        (|| {
            let s = SweepSettings {
                epsilons: vec![0.1, 0.05, 0.025],
                n: 300,
                relax_steps: 400,
                thermal_coeff: 0.0,
                v0: vec![0.0, 0.0],
                records: 10,
                ..Default::default()
            };
            let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0)?;
            let field = ExternalFieldSpec::Zero;
            let reference = crate::experiments::prepare_reference(&spec, &s)?;
            let strong = crate::experiments::limit_solution(&reference, &field, &s)?;
            let run = crate::experiments::run_one(&reference, &field, &strong, &s, 0.05, 1)?;
            let worst = run.modulated.iter().map(|r| r.total).fold(0.0, f64::max);
            Ok((worst <= 1e-8, format!("max 𝓗 {worst:.2e} over [0, 1]")))
        })(),
    );
    vec![hms, eq]
}

/// Energy-gap slope and CoM errors of a finished sweep, plus a dt-halving run at the largest ε.
pub fn sweep_theorem1(out: &SweepOutcome, field: &ExternalFieldSpec, s: &SweepSettings) -> CheckOutcome {
    let sm = &out.summary;
    let halving = xv_residual_halving(&out.reference, field, s, s.epsilons[0], 0.2);
    let (ratio, hd) = match halving {
        Ok((a, b)) => (a / b, format!("xv residual {a:.2e} → {b:.2e}")),
        Err(e) => (f64::NAN, format!("halving failed: {e}")),
    };
    let ok = sm.checks.energy_gap_slope_ok && sm.checks.dx_decreasing && sm.checks.dv_decreasing && (3.0..=5.0).contains(&ratio);
    CheckOutcome::new(
        "ε-sweep: energy gap and centre of mass",
        ok,
        format!(
            "gap slope {:.3}, max|ΔX| {:?}, max|ΔV| {:?}, {hd} (ratio {ratio:.2})",
            sm.energy_gap_slope,
            sm.max_dx.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>(),
            sm.max_dv.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>()
        ),
    )
}

/// Modulated-energy checks of a finished sweep.
pub fn sweep_theorem2(out: &SweepOutcome) -> CheckOutcome {
    let sm = &out.summary;
    let c = &sm.checks;
    let ok = c.modulated_decreasing && c.entco_everywhere && c.gronwall_stable && c.r_integral_decreasing;
    CheckOutcome::new(
        "ε-sweep: modulated energy",
        ok,
        format!(
            "𝓗(1) {:?}, C_fit {:?} (spread {:.3}), ∫R {:?}, min bound margin {:.2e}",
            sm.final_modulated.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            sm.c_fit.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            sm.c_spread,
            sm.integral_r.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>(),
            sm.min_bound_margin.iter().cloned().fold(f64::INFINITY, f64::min)
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_none_and_kernels_pass() {
        assert!(run_suite("everything").is_none());
        let out = run_suite("kernels").unwrap();
        assert!(!out.is_empty());
        assert!(out.iter().all(|c| c.passed), "{out:?}");
    }

    #[test]
    fn quick_analytic_checks_pass() {
        for c in [disk_certification(), log_zeta_closed_form(), one_dim_frostman(), ode_order()] {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
