//! ε-sweep harness: well-prepared runs of the particle system compared with
//! the limiting centre-of-mass dynamics and the rigid-transport solution.

use crate::asymptotic::{integrate_xv, rigid_transport_solution, LimitTrajectory, StrongSolution};
use crate::diagnostics::{gronwall_check, gronwall_spread, r_eps, GronwallReport, ModulatedEnergyReport, ModulationSetup};
use crate::error::{Error, Result};
use crate::kernels::{certified_kappa, KernelSpec};
use crate::minimizers::{explicit_radial_minimizer, gradient_flow_with, GradientFlowOptions, MinimizerProfile, ProfileShape};
use crate::pairs::pair_energy;
use crate::simulator::{
    default_delta, mean_external_field, observables, ExternalFieldSpec, Integrator, ObservableRecord, ParticleEnsemble,
    SimConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    pub n: usize,
    pub mass: f64,
    pub t_final: f64,
    pub lambda_drag: f64,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    /// `dt ≤ dt_factor·sqrt(ε)`.
    pub dt_factor: f64,
    /// Number of recording intervals on `[0, T]`.
    pub records: usize,
    /// Thermal velocity spread `thermal_coeff·sqrt(ε)`.
    pub thermal_coeff: f64,
    /// Gradient-flow steps for the reference cloud.
    pub relax_steps: usize,
    /// KDE bandwidth in units of δ.
    pub bandwidth_factor: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            epsilons: vec![0.1, 0.05, 0.025, 0.0125],
            seeds: vec![1],
            n: 2000,
            mass: 1.0,
            t_final: 1.0,
            lambda_drag: 1.0,
            x0: vec![0.0, 0.0],
            v0: vec![0.5, 0.0],
            dt_factor: 0.02,
            records: 50,
            thermal_coeff: 0.5,
            relax_steps: 100,
            bandwidth_factor: 3.0,
        }
    }
}

/// Disk kernel (`N = 2`, `s = 1`, `α = β = 1`) with the symmetric linear
/// field `u(x) = Ax + b` used by the default sweep.
pub fn default_sweep_problem() -> (KernelSpec, ExternalFieldSpec) {
    let kernel = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).expect("valid disk kernel");
    let field = ExternalFieldSpec::Linear { a: vec![vec![-0.5, 0.2], vec![0.2, -0.3]], b: vec![0.3, 0.1] };
    (kernel, field)
}

impl SweepSettings {
    pub fn validate(&self) -> Result<()> {
        let e = &self.epsilons;
        if e.len() < 3 {
            return Err(Error::Config("the sweep needs at least three ε values".into()));
        }
        if e.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("ε values must be positive".into()));
        }
        let r = e[1] / e[0];
        if !(r < 1.0) || e.windows(2).any(|w| ((w[1] / w[0]) / r - 1.0).abs() > 1e-9) {
            return Err(Error::Config("ε values must decrease in geometric progression".into()));
        }
        if self.seeds.is_empty() || self.n < 100 || self.records == 0 {
            return Err(Error::Config("need seeds, n ≥ 100 and records ≥ 1".into()));
        }
        if !(self.mass > 0.0 && self.t_final > 0.0 && self.dt_factor > 0.0 && self.bandwidth_factor > 0.0) {
            return Err(Error::Config("mass, t_final, dt_factor and bandwidth_factor must be positive".into()));
        }
        if !(self.lambda_drag >= 0.0 && self.thermal_coeff >= 0.0) {
            return Err(Error::Config("lambda_drag and thermal_coeff must be non-negative".into()));
        }
        Ok(())
    }

    /// `(dt, steps, stride)` with `steps = records·stride` and `dt ≤ dt_factor·sqrt(ε)`.
    pub fn time_grid(&self, epsilon: f64) -> (f64, usize, usize) {
        let target = self.dt_factor * epsilon.sqrt();
        let stride = (self.t_final / (self.records as f64 * target)).ceil().max(1.0) as usize;
        let steps = stride * self.records;
        (self.t_final / steps as f64, steps, stride)
    }
}

/// Relaxed reference cloud, its energy and the analytic profile.
#[derive(Debug, Clone)]
pub struct SweepReference {
    pub spec: KernelSpec,
    pub profile: MinimizerProfile,
    pub cloud: Vec<f64>,
    pub e_min: f64,
    pub weight: f64,
    pub radius: f64,
}

pub fn prepare_reference(kernel: &KernelSpec, s: &SweepSettings) -> Result<SweepReference> {
    if kernel.dim != 2 || !kernel.is_isotropic() {
        return Err(Error::Config("the sweep runs isotropic planar kernels".into()));
    }
    let base = KernelSpec { regularization_delta: 0.0, ..kernel.clone() };
    let profile = explicit_radial_minimizer(&base, s.mass)?;
    let radius = profile.semi_axes()[0];
    let delta = if kernel.regularization_delta > 0.0 {
        kernel.regularization_delta
    } else {
        default_delta(radius, s.n, 2)
    };
    let spec = base.with_delta(delta);
    let opts = GradientFlowOptions { n: s.n, steps: s.relax_steps, speed_tol: 1e-9, ..Default::default() };
    let (relaxed, _) = gradient_flow_with(&spec, s.mass, &opts)?;
    let cloud = match relaxed.shape {
        ProfileShape::ParticleCloud { positions, .. } => positions,
        _ => return Err(Error::NonConvergence("gradient flow returned no cloud".into())),
    };
    let mut com = [0.0; 2];
    for p in cloud.chunks(2) {
        com[0] += p[0] / s.n as f64;
        com[1] += p[1] / s.n as f64;
    }
    let cloud: Vec<f64> = cloud.chunks(2).flat_map(|p| [p[0] - com[0], p[1] - com[1]]).collect();
    let weight = s.mass / s.n as f64;
    let e_min = 2.0 * weight * weight * pair_energy(&spec.prepared(), &cloud);
    Ok(SweepReference { spec, profile, cloud, e_min, weight, radius })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub epsilon: f64,
    pub seed: u64,
    pub dt: f64,
    pub steps: usize,
    pub observables: Vec<ObservableRecord>,
    pub modulated: Vec<ModulatedEnergyReport>,
    pub r_eps: Vec<f64>,
    /// `max_t(𝓔[ρ_ε] - 𝓔_m)` over recorded times.
    pub max_energy_gap: f64,
    pub max_dx: f64,
    pub max_dv: f64,
    /// Largest trapezoid residual of the discrete centre-of-mass equations.
    pub xv_residual: f64,
    pub gronwall: GronwallReport,
    /// `min_t(total - kinetic_modulated - hms_term)`.
    pub min_entco_margin: f64,
    /// `min_t(total - hms_lower_bound)`.
    pub min_full_bound_margin: f64,
}

impl SweepRun {
    pub fn final_total(&self) -> f64 {
        self.modulated.last().map(|r| r.total).unwrap_or(0.0)
    }

    pub fn integral_r(&self) -> f64 {
        self.gronwall.integral_r.last().copied().unwrap_or(0.0)
    }
}

/// The limit trajectory and rigid-transport solution for a linear field.
pub fn limit_solution(reference: &SweepReference, field: &ExternalFieldSpec, s: &SweepSettings) -> Result<StrongSolution> {
    let (a, b) = match field {
        ExternalFieldSpec::Linear { a, b } => (a.clone(), b.clone()),
        ExternalFieldSpec::Zero => (vec![vec![0.0; 2]; 2], vec![0.0; 2]),
        ExternalFieldSpec::Constant { b } => (vec![vec![0.0; 2]; 2], b.clone()),
        ExternalFieldSpec::Rotation { .. } => {
            return Err(Error::Config("rigid transport needs a symmetric linear field".into()));
        }
    };
    let lin = ExternalFieldSpec::Linear { a: a.clone(), b: b.clone() };
    let traj: LimitTrajectory =
        integrate_xv(&reference.profile, &lin, s.lambda_drag, &s.x0, &s.v0, s.t_final, s.t_final / 2000.0)?;
    rigid_transport_solution(&traj, &a, &b)
}

/// Well-prepared data: the reference cloud moved to `X0`, velocities
/// `V0 + thermal_coeff·sqrt(ε)·ξ`.
pub fn initial_state(reference: &SweepReference, s: &SweepSettings, epsilon: f64, seed: u64) -> Result<ParticleEnsemble> {
    let pos: Vec<f64> = reference.cloud.chunks(2).flat_map(|p| [p[0] + s.x0[0], p[1] + s.x0[1]]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = s.thermal_coeff * epsilon.sqrt();
    let vel: Vec<f64> = (0..pos.len())
        .map(|k| {
            let xi: f64 = StandardNormal.sample(&mut rng);
            s.v0[k % 2] + amp * xi
        })
        .collect();
    ParticleEnsemble::new(2, pos, vel, reference.weight)
}

/// One particle run at `epsilon`.
pub fn run_one(
    reference: &SweepReference,
    field: &ExternalFieldSpec,
    strong: &StrongSolution,
    s: &SweepSettings,
    epsilon: f64,
    seed: u64,
) -> Result<SweepRun> {
    let (dt, steps, stride) = s.time_grid(epsilon);
    let cfg = SimConfig {
        epsilon,
        lambda_drag: s.lambda_drag,
        dt,
        t_final: s.t_final,
        kernel: reference.spec.clone(),
        external_field: field.clone(),
        seed,
    };
    let mut state = initial_state(reference, s, epsilon, seed)?;
    let kappa = certified_kappa(&reference.spec);
    let bandwidth = s.bandwidth_factor * reference.spec.regularization_delta;
    let half = 1.6 * reference.radius + 6.0 * bandwidth;
    let setup = ModulationSetup::new(
        &reference.spec,
        epsilon,
        kappa,
        &reference.cloud,
        reference.weight,
        reference.e_min,
        bandwidth,
        half,
    )?;
    let mut it = Integrator::new(&cfg, &state)?;
    let mut obs = Vec::with_capacity(s.records + 1);
    let mut modulated = Vec::with_capacity(s.records + 1);
    let mut rs = Vec::with_capacity(s.records + 1);
    let (mut max_dx, mut max_dv, mut res) = (0.0f64, 0.0f64, 0.0f64);
    let lam = s.lambda_drag;
    let mut prev = (state.center_of_mass(), state.mean_velocity(), mean_external_field(&state, field));
    for k in 0..=steps {
        if k > 0 {
            it.step(&mut state)?;
            let cur = (state.center_of_mass(), state.mean_velocity(), mean_external_field(&state, field));
            for j in 0..2 {
                let rx = (cur.0[j] - prev.0[j]) / dt - 0.5 * (cur.1[j] + prev.1[j]);
                let rv = (cur.1[j] - prev.1[j]) / dt - lam * (0.5 * (cur.2[j] + prev.2[j]) - 0.5 * (cur.1[j] + prev.1[j]));
                res = res.max(rx.abs()).max(rv.abs());
            }
            prev = cur;
        }
        if k % stride == 0 {
            // pin the clock to the grid so every ε shares the same record times
            state.time = s.t_final * (k / stride) as f64 / s.records as f64;
            let o = observables(&state, &cfg, reference.e_min);
            let (x, v) = strong.trajectory.state_at(state.time)?;
            for j in 0..2 {
                max_dx = max_dx.max((o.x_eps[j] - x[j]).abs());
                max_dv = max_dv.max((o.v_eps[j] - v[j]).abs());
            }
            modulated.push(setup.evaluate(&state, strong)?);
            rs.push(r_eps(&state, strong)?);
            obs.push(o);
        }
    }
    let times: Vec<f64> = modulated.iter().map(|r| r.time).collect();
    let h: Vec<f64> = modulated.iter().map(|r| r.total).collect();
    let gronwall = gronwall_check(&times, &h, &rs)?;
    let max_energy_gap = obs.iter().map(|o| o.interaction_energy - reference.e_min).fold(f64::NEG_INFINITY, f64::max);
    let min_entco_margin = modulated.iter().map(|r| r.entco_margin()).fold(f64::INFINITY, f64::min);
    let min_full_bound_margin = modulated.iter().map(|r| r.total - r.hms_lower_bound).fold(f64::INFINITY, f64::min);
    Ok(SweepRun {
        epsilon,
        seed,
        dt,
        steps,
        observables: obs,
        modulated,
        r_eps: rs,
        max_energy_gap,
        max_dx,
        max_dv,
        xv_residual: res,
        gronwall,
        min_entco_margin,
        min_full_bound_margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepChecks {
    pub energy_gap_slope_ok: bool,
    pub dx_decreasing: bool,
    pub dv_decreasing: bool,
    pub modulated_decreasing: bool,
    pub entco_everywhere: bool,
    pub gronwall_stable: bool,
    pub r_integral_decreasing: bool,
}

impl SweepChecks {
    pub fn all(&self) -> bool {
        self.energy_gap_slope_ok
            && self.dx_decreasing
            && self.dv_decreasing
            && self.modulated_decreasing
            && self.entco_everywhere
            && self.gronwall_stable
            && self.r_integral_decreasing
    }
}

/// Seed-averaged quantities per ε, in sweep order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub epsilons: Vec<f64>,
    pub e_min: f64,
    pub delta: f64,
    pub max_energy_gap: Vec<f64>,
    pub max_dx: Vec<f64>,
    pub max_dv: Vec<f64>,
    pub final_modulated: Vec<f64>,
    pub c_fit: Vec<f64>,
    pub integral_r: Vec<f64>,
    /// `min_t(total - hms_lower_bound)`, potential term included.
    pub min_bound_margin: Vec<f64>,
    /// Same without the potential term.
    pub min_reduced_margin: Vec<f64>,
    pub energy_gap_slope: f64,
    pub dx_slope: f64,
    pub dv_slope: f64,
    pub modulated_slope: f64,
    pub c_spread: f64,
    pub checks: SweepChecks,
}

/// Tolerance on the lower-bound margin, relative to the largest total.
pub const ENTCO_TOLERANCE: f64 = 1e-8;

pub fn summarize(reference: &SweepReference, s: &SweepSettings, runs: &[SweepRun]) -> SweepSummary {
    let per = |f: &dyn Fn(&SweepRun) -> f64| -> Vec<f64> {
        s.epsilons
            .iter()
            .map(|e| {
                let v: Vec<f64> = runs.iter().filter(|r| r.epsilon == *e).map(f).collect();
                v.iter().sum::<f64>() / v.len().max(1) as f64
            })
            .collect()
    };
    let gap = per(&|r| r.max_energy_gap);
    let dx = per(&|r| r.max_dx);
    let dv = per(&|r| r.max_dv);
    let hf = per(&|r| r.final_total());
    let c = per(&|r| r.gronwall.c_fit);
    let ir = per(&|r| r.integral_r());
    let margin = per(&|r| r.min_full_bound_margin);
    let reduced = per(&|r| r.min_entco_margin);
    let scale = runs.iter().flat_map(|r| r.modulated.iter().map(|m| m.total.abs())).fold(1.0, f64::max);
    let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let eps = &s.epsilons;
    let energy_gap_slope = loglog_slope(eps, &gap);
    let c_spread = gronwall_spread(&c);
    let checks = SweepChecks {
        energy_gap_slope_ok: energy_gap_slope >= 0.8,
        dx_decreasing: dec(&dx),
        dv_decreasing: dec(&dv),
        modulated_decreasing: dec(&hf),
        entco_everywhere: runs.iter().all(|r| r.min_full_bound_margin >= -ENTCO_TOLERANCE * scale),
        gronwall_stable: c.iter().all(|v| v.is_finite()) && c_spread <= 0.2,
        r_integral_decreasing: dec(&ir.iter().map(|v| v.abs()).collect::<Vec<_>>()),
    };
    SweepSummary {
        epsilons: eps.clone(),
        e_min: reference.e_min,
        delta: reference.spec.regularization_delta,
        energy_gap_slope,
        dx_slope: loglog_slope(eps, &dx),
        dv_slope: loglog_slope(eps, &dv),
        modulated_slope: loglog_slope(eps, &hf),
        max_energy_gap: gap,
        max_dx: dx,
        max_dv: dv,
        final_modulated: hf,
        c_fit: c,
        integral_r: ir,
        min_bound_margin: margin,
        min_reduced_margin: reduced,
        c_spread,
        checks,
    }
}

/// Least-squares slope of `ln y` against `ln x`; NaN when some `y ≤ 0`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    if y.iter().any(|v| !(*v > 0.0)) || x.len() < 2 {
        return f64::NAN;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub reference: SweepReference,
    pub strong: StrongSolution,
    pub runs: Vec<SweepRun>,
    pub summary: SweepSummary,
}

/// Runs every `(ε, seed)` pair on its own worker and merges by ε, then seed.
pub fn run_sweep(kernel: &KernelSpec, field: &ExternalFieldSpec, s: &SweepSettings) -> Result<SweepOutcome> {
    s.validate()?;
    let reference = prepare_reference(kernel, s)?;
    let strong = limit_solution(&reference, field, s)?;
    let jobs: Vec<(f64, u64)> = s.epsilons.iter().flat_map(|e| s.seeds.iter().map(move |sd| (*e, *sd))).collect();
    let results: Vec<Result<SweepRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(e, sd)| {
                let (r, st) = (&reference, &strong);
                scope.spawn(move || run_one(r, field, st, s, *e, *sd))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon).then(a.seed.cmp(&b.seed)));
    let summary = summarize(&reference, s, &runs);
    Ok(SweepOutcome { reference, strong, runs, summary })
}

/// Trapezoid residuals of the discrete centre-of-mass equations at `dt` and
/// `dt/2` over a short horizon; second order gives a ratio near 4.
pub fn xv_residual_halving(
    reference: &SweepReference,
    field: &ExternalFieldSpec,
    s: &SweepSettings,
    epsilon: f64,
    horizon: f64,
) -> Result<(f64, f64)> {
    let short = SweepSettings { t_final: horizon, records: 1, ..s.clone() };
    let strong = limit_solution(reference, field, &short)?;
    let coarse = run_one(reference, field, &strong, &short, epsilon, s.seeds[0])?;
    let fine_s = SweepSettings { dt_factor: 0.5 * coarse.dt * (1.0 + 1e-9) / epsilon.sqrt(), ..short };
    let fine = run_one(reference, field, &strong, &fine_s, epsilon, s.seeds[0])?;
    Ok((coarse.xv_residual, fine.xv_residual))
}

/// Diagnostics CSV rows for every run.
pub fn write_sweep_csv<W: Write>(w: W, runs: &[SweepRun]) -> std::io::Result<()> {
    let rows: Vec<_> = runs
        .iter()
        .flat_map(|r| r.modulated.iter().zip(&r.r_eps).map(move |(m, re)| (r.epsilon, r.seed, m, *re)))
        .collect();
    crate::diagnostics::write_diagnostics_csv(w, &rows)
}

/// `time,X_eps..,V_eps..,X..,V..` for one run.
pub fn write_com_csv<W: Write>(mut w: W, run: &SweepRun, strong: &StrongSolution) -> Result<()> {
    writeln!(w, "time,X_eps1,X_eps2,V_eps1,V_eps2,X1,X2,V1,V2")?;
    for o in &run.observables {
        let (x, v) = strong.trajectory.state_at(o.time)?;
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            o.time, o.x_eps[0], o.x_eps[1], o.v_eps[0], o.v_eps[1], x[0], x[1], v[0], v[1]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grid_is_shared() {
        let s = SweepSettings::default();
        for e in &s.epsilons {
            let (dt, steps, stride) = s.time_grid(*e);
            assert_eq!(steps, stride * s.records);
            assert!(dt <= s.dt_factor * e.sqrt() + 1e-15);
            assert!((dt * steps as f64 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_of_a_power_law() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
        assert!(loglog_slope(&x, &[1.0, 0.0, 1.0]).is_nan());
    }

    #[test]
    fn settings_validation() {
        let mut s = SweepSettings::default();
        assert!(s.validate().is_ok());
        s.epsilons = vec![0.1, 0.05, 0.02];
        assert!(s.validate().is_err());
        s.epsilons = vec![0.1, 0.05];
        assert!(s.validate().is_err());
    }
}
