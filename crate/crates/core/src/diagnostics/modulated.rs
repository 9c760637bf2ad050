//! Modulated energy of a particle ensemble against a rigid-transport strong
//! solution, and the Grönwall fit of its time series.

use super::hms::es_table;
use super::table::KernelTable;
use crate::asymptotic::StrongSolution;
use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridField};
use crate::kernels::{KernelSpec, PreparedKernel};
use crate::pairs::{cross_energy, pair_energy};
use crate::simulator::{coarse_grain, ParticleEnsemble};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulatedEnergyReport {
    pub time: f64,
    /// `½Σw|v_i - 𝒱(x_i)|²`.
    pub kinetic_modulated: f64,
    /// `(𝓔[ρ_ε] - 𝓔_m)/(2ε)`.
    pub energy_gap: f64,
    /// `(βm/ε)Σ|X_ε,j - X_j|²/λ_j²`.
    pub com_position_term: f64,
    /// `|V_ε - V|²/(2ε)`.
    pub com_velocity_term: f64,
    pub total: f64,
    /// Same displacement with the `βm²/(2ε)` weight of the coercivity bound.
    pub com_position_term_m2: f64,
    /// `‖ρ_ε - ρ̄(· - X)‖²` after smoothing both with the KDE bandwidth.
    pub hms_sq: f64,
    /// `((1-κ)α/(2ε))·hms_sq`.
    pub hms_term: f64,
    /// `(1/ε)∫(Φ̄ - A0)dρ_ε`.
    pub potential_term: f64,
    /// `kinetic_modulated + hms_term + potential_term`.
    pub hms_lower_bound: f64,
    pub bandwidth: f64,
}

impl ModulatedEnergyReport {
    /// `total - (kinetic_modulated + hms_term)`.
    pub fn entco_margin(&self) -> f64 {
        self.total - self.kinetic_modulated - self.hms_term
    }
}

/// Reference cloud, kernel and grid shared by every evaluation of one run.
#[derive(Debug, Clone)]
pub struct ModulationSetup {
    pub spec: KernelSpec,
    pub epsilon: f64,
    pub kappa: f64,
    pub e_min: f64,
    pub bandwidth: f64,
    /// Reference atoms with centre of mass at the origin.
    reference: Vec<f64>,
    weight: f64,
    a0: f64,
    half: f64,
    cells: usize,
    table: KernelTable,
    kernel: PreparedKernel,
}

impl ModulationSetup {
    /// `reference` is a relaxed cloud of equal weights `weight`; `e_min` its
    /// discrete energy. The grid spans `half_width` around `X(t)` with cell
    /// size at most `bandwidth/2`.
    pub fn new(
        spec: &KernelSpec,
        epsilon: f64,
        kappa: f64,
        reference: &[f64],
        weight: f64,
        e_min: f64,
        bandwidth: f64,
        half_width: f64,
    ) -> Result<Self> {
        spec.validate()?;
        if spec.dim != 2 {
            return Err(Error::InvalidSpec("modulated energy is implemented for N = 2".into()));
        }
        if spec.regularization_delta <= 0.0 {
            return Err(Error::InvalidSpec("modulated energy of atoms needs δ > 0".into()));
        }
        if !(epsilon > 0.0 && bandwidth > 0.0 && half_width > 0.0 && weight > 0.0) {
            return Err(Error::InvalidSpec("ε, bandwidth, width and weight must be positive".into()));
        }
        if reference.is_empty() || reference.len() % 2 != 0 {
            return Err(Error::InvalidSpec("reference cloud is empty or ragged".into()));
        }
        let n = reference.len() / 2;
        let mut com = [0.0; 2];
        for p in reference.chunks(2) {
            com[0] += p[0] / n as f64;
            com[1] += p[1] / n as f64;
        }
        let reference: Vec<f64> = reference.chunks(2).flat_map(|p| [p[0] - com[0], p[1] - com[1]]).collect();
        let kernel = spec.prepared();
        let mass = weight * n as f64;
        let self_term = n as f64 * weight * weight * kernel.value(&[0.0, 0.0]);
        let a0 = (2.0 * weight * weight * pair_energy(&kernel, &reference) + self_term) / mass;
        let cells = (4.0 * half_width / bandwidth).ceil() as usize;
        let h = 2.0 * half_width / cells as f64;
        let table = es_table([cells, cells], h, spec.s)?;
        Ok(ModulationSetup {
            spec: spec.clone(),
            epsilon,
            kappa,
            e_min,
            bandwidth,
            reference,
            weight,
            a0,
            half: half_width,
            cells,
            table,
            kernel,
        })
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn grid_at(&self, center: &[f64]) -> Result<BoxGrid> {
        BoxGrid::centered(center, self.half, self.cells)
    }

    fn smoothed(&self, positions: Vec<f64>, grid: &BoxGrid, mass: f64) -> Result<GridField> {
        let n = positions.len() / 2;
        let ens = ParticleEnsemble::new(2, positions, vec![0.0; 2 * n], self.weight)?;
        let f = coarse_grain(&ens, grid, self.bandwidth)?.density;
        Ok(f.scaled(mass / f.integral()))
    }

    /// Every term of the modulated energy at `state.time`.
    pub fn evaluate(&self, state: &ParticleEnsemble, strong: &StrongSolution) -> Result<ModulatedEnergyReport> {
        if state.dim != 2 {
            return Err(Error::InvalidSpec("ensemble must be planar".into()));
        }
        if (state.weight - self.weight).abs() > 1e-12 * self.weight {
            return Err(Error::InvalidSpec("ensemble and reference weights differ".into()));
        }
        let t = state.time;
        let eps = self.epsilon;
        let (x, v) = strong.trajectory.state_at(t)?;
        let w = state.weight;
        let m = state.mass();
        let mut kin = 0.0;
        for (p, u) in state.positions.chunks(2).zip(state.velocities.chunks(2)) {
            let vf = strong.velocity(t, p)?;
            kin += 0.5 * w * ((u[0] - vf[0]).powi(2) + (u[1] - vf[1]).powi(2));
        }
        let energy = 2.0 * w * w * pair_energy(&self.kernel, &state.positions);
        let xe = state.center_of_mass();
        let ve = state.mean_velocity();
        let li = self.spec.lambda_inv2();
        let disp: f64 = (0..2).map(|j| self.spec.beta * (xe[j] - x[j]).powi(2) * li[j]).sum();
        let dv2: f64 = (0..2).map(|j| (ve[j] - v[j]).powi(2)).sum();
        let energy_gap = (energy - self.e_min) / (2.0 * eps);
        let com_position_term = m * disp / eps;
        let com_velocity_term = dv2 / (2.0 * eps);
        let total = kin + energy_gap + com_position_term + com_velocity_term;

        let shifted: Vec<f64> = self.reference.chunks(2).flat_map(|p| [p[0] + x[0], p[1] + x[1]]).collect();
        let phi = w * w * cross_energy(&self.kernel, &state.positions, &shifted);
        let potential_term = (phi - self.a0 * m) / eps;

        let grid = self.grid_at(&x)?;
        let rho = self.smoothed(state.positions.clone(), &grid, m)?;
        let bar = self.smoothed(shifted, &grid, m)?;
        let mu = rho.sub(&bar)?.masses();
        let hms_sq = self.table.quadratic(&mu)?.max(0.0);
        let hms_term = (1.0 - self.kappa) * self.spec.alpha * hms_sq / (2.0 * eps);
        Ok(ModulatedEnergyReport {
            time: t,
            kinetic_modulated: kin,
            energy_gap,
            com_position_term,
            com_velocity_term,
            total,
            com_position_term_m2: m * m * disp / (2.0 * eps),
            hms_sq,
            hms_term,
            potential_term,
            hms_lower_bound: kin + hms_term + potential_term,
            bandwidth: self.bandwidth,
        })
    }
}

/// `∫(ρ_ε𝒱 - j_ε)·(∂_t𝒱 + 𝒱·∇𝒱 + λ𝒱 - λu_ext)`, summed over the atoms.
/// For rigid transport `∇𝒱 = 0`; Gaussian smoothing leaves the value unchanged
/// because the integrand is affine in `x`.
pub fn r_eps(state: &ParticleEnsemble, strong: &StrongSolution) -> Result<f64> {
    let t = state.time;
    let traj = &strong.trajectory;
    let lam = traj.lambda_drag;
    let dv = traj.acceleration_at(t)?;
    let d = state.dim;
    let mut acc = 0.0;
    let mut u = vec![0.0; d];
    for (p, q) in state.positions.chunks(d).zip(state.velocities.chunks(d)) {
        let vf = strong.velocity(t, p)?;
        traj.u_ext.eval_into(t, p, &mut u);
        for j in 0..d {
            acc += (vf[j] - q[j]) * (dv[j] + lam * vf[j] - lam * u[j]);
        }
    }
    Ok(acc * state.weight)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    /// Smallest `C` with `𝓗(t) ≤ e^{Ct}(𝓗(0) + ∫₀ᵗR_ε)` on the samples.
    pub c_fit: f64,
    pub satisfied: bool,
    /// `∫₀ᵗR_ε` by the trapezoid rule, one entry per sample.
    pub integral_r: Vec<f64>,
}

pub fn gronwall_check(times: &[f64], h: &[f64], r: &[f64]) -> Result<GronwallReport> {
    if times.len() != h.len() || times.len() != r.len() || times.is_empty() {
        return Err(Error::InvalidSpec("series must share one non-empty time grid".into()));
    }
    let mut integral_r = vec![0.0; times.len()];
    for k in 1..times.len() {
        integral_r[k] = integral_r[k - 1] + 0.5 * (times[k] - times[k - 1]) * (r[k] + r[k - 1]);
    }
    let mut c = f64::NEG_INFINITY;
    for k in 1..times.len() {
        let dt = times[k] - times[0];
        if dt <= 0.0 || h[k] <= 0.0 {
            continue;
        }
        let base = h[0] + integral_r[k];
        let ck = if base > 0.0 { (h[k] / base).ln() / dt } else { f64::INFINITY };
        c = c.max(ck);
    }
    if c == f64::NEG_INFINITY {
        c = 0.0;
    }
    Ok(GronwallReport { c_fit: c, satisfied: c.is_finite(), integral_r })
}

/// Largest relative deviation of the fitted constants from their mean.
pub fn gronwall_spread(c: &[f64]) -> f64 {
    let mean = c.iter().sum::<f64>() / c.len() as f64;
    c.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max) / mean.abs()
}

/// One row per report: `epsilon,seed,time,kinetic_mod,energy_gap,com_pos,com_vel,total,hms_sq,R_eps`.
pub fn write_diagnostics_csv<W: Write>(
    mut w: W,
    rows: &[(f64, u64, &ModulatedEnergyReport, f64)],
) -> std::io::Result<()> {
    writeln!(w, "epsilon,seed,time,kinetic_mod,energy_gap,com_pos,com_vel,total,hms_sq,R_eps")?;
    for (eps, seed, r, re) in rows {
        writeln!(
            w,
            "{eps:.17e},{seed},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{re:.17e}",
            r.time,
            r.kinetic_modulated,
            r.energy_gap,
            r.com_position_term,
            r.com_velocity_term,
            r.total,
            r.hms_sq
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::{integrate_xv, rigid_transport_solution};
    use crate::minimizers::{gradient_flow_minimizer, ProfileShape};
    use crate::simulator::{ExternalFieldSpec, Integrator, SimConfig};

    fn cloud(spec: &KernelSpec, n: usize) -> (Vec<f64>, crate::minimizers::MinimizerProfile) {
        let p = gradient_flow_minimizer(spec, 1.0, n, 60).unwrap();
        match &p.shape {
            ProfileShape::ParticleCloud { positions, .. } => (positions.clone(), p),
            _ => unreachable!(),
        }
    }

    #[test]
    fn gronwall_fit_of_an_exponential() {
        let t: Vec<f64> = (0..11).map(|k| k as f64 * 0.1).collect();
        let h: Vec<f64> = t.iter().map(|s| 2.0 * (0.7 * s).exp()).collect();
        let r = vec![0.0; t.len()];
        let g = gronwall_check(&t, &h, &r).unwrap();
        assert!((g.c_fit - 0.7).abs() < 1e-12);
        assert!(g.satisfied);
        let g = gronwall_check(&t, &h, &vec![1.0; t.len()]).unwrap();
        assert!((g.integral_r[10] - 1.0).abs() < 1e-12);
        assert!(g.c_fit < 0.7);
        assert!(gronwall_spread(&[1.0, 1.1, 0.9]) < 0.11);
    }

    #[test]
    fn equilibrium_stays_unmodulated() {
        let spec0 = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let n = 200;
        let delta = 0.5 / (n as f64).sqrt();
        let spec = spec0.with_delta(delta);
        let (pos, prof) = cloud(&spec, n);
        let w = 1.0 / n as f64;
        let e_min = 2.0 * w * w * pair_energy(&spec.prepared(), &pos);
        let eps = 0.05;
        let field = ExternalFieldSpec::Zero;
        let traj = integrate_xv(&prof, &field, 1.0, &[0.0, 0.0], &[0.0, 0.0], 1.0, 0.01).unwrap();
        let zero = vec![vec![0.0; 2]; 2];
        let field_lin = ExternalFieldSpec::Linear { a: zero.clone(), b: vec![0.0; 2] };
        let traj = crate::asymptotic::LimitTrajectory { u_ext: field_lin, ..traj };
        let strong = rigid_transport_solution(&traj, &zero, &[0.0, 0.0]).unwrap();
        let setup = ModulationSetup::new(&spec, eps, 0.0, &pos, w, e_min, 3.0 * delta, 1.6).unwrap();
        let mut state = ParticleEnsemble::new(2, pos.clone(), vec![0.0; 2 * n], w).unwrap();
        let r0 = setup.evaluate(&state, &strong).unwrap();
        assert!(r0.total.abs() < 1e-12, "{r0:?}");
        assert!(r0.hms_sq < 1e-20);
        let cfg = SimConfig {
            epsilon: eps,
            lambda_drag: 1.0,
            dt: 0.01 * eps.sqrt(),
            t_final: 0.2,
            kernel: spec.clone(),
            external_field: ExternalFieldSpec::Zero,
            seed: 0,
        };
        let mut it = Integrator::new(&cfg, &state).unwrap();
        for _ in 0..cfg.n_steps() {
            it.step(&mut state).unwrap();
        }
        let r1 = setup.evaluate(&state, &strong).unwrap();
        assert!(r1.total < 1e-8, "{r1:?}");
        assert!(r_eps(&state, &strong).unwrap().abs() < 1e-8);
    }
}
