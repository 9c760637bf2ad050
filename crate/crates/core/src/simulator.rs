//! Particle approximation of the kinetic swarm model with stiffness `1/ε`.
//!
//! Each step is a Strang splitting: exact drag relaxation over `dt/2`, a
//! kick–drift–kick core driven by the regularized interaction, and a second
//! drag half-step.

use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridField};
use crate::kernels::{KernelSpec, PreparedKernel};
use crate::minimizers::{MinimizerProfile, ProfileShape};
use crate::pairs::{pair_energy, pair_gradient};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::SQRT_2;
use std::io::{Read, Write};

/// Prefactor in the stability bound `dt ≤ C·sqrt(ε/K)`.
pub const STABILITY_CONSTANT: f64 = 0.5;
/// Effective neighbour count used in the stiffness estimate `K`.
pub const STIFFNESS_NEIGHBOURS: f64 = 8.0;
/// Default `c_δ` in `δ = c_δ·R·n^{-1/N}`.
pub const DEFAULT_DELTA_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub dim: usize,
    /// Row-major, `n × dim`.
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub weight: f64,
    pub time: f64,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, positions: Vec<f64>, velocities: Vec<f64>, weight: f64) -> Result<Self> {
        let e = ParticleEnsemble { dim, positions, velocities, weight, time: 0.0 };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidSpec(format!("dimension {} not supported", self.dim)));
        }
        if self.positions.is_empty() || self.positions.len() % self.dim != 0 || self.positions.len() != self.velocities.len() {
            return Err(Error::InvalidSpec("positions and velocities must hold n ≥ 1 points".into()));
        }
        if !(self.weight > 0.0) {
            return Err(Error::InvalidSpec("particle weight must be positive".into()));
        }
        if self.positions.iter().chain(&self.velocities).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite coordinate".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn mass(&self) -> f64 {
        self.n() as f64 * self.weight
    }

    fn mean(&self, v: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for p in v.chunks(self.dim) {
            for j in 0..self.dim {
                c[j] += p[j];
            }
        }
        c.iter().map(|x| x / self.n() as f64).collect()
    }

    /// `X_ε`.
    pub fn center_of_mass(&self) -> Vec<f64> {
        self.mean(&self.positions)
    }

    /// `V_ε`.
    pub fn mean_velocity(&self) -> Vec<f64> {
        self.mean(&self.velocities)
    }

    pub fn total_momentum(&self) -> Vec<f64> {
        self.mean_velocity().iter().map(|v| v * self.mass()).collect()
    }
}

/// External velocity field `u_ext(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ExternalFieldSpec {
    #[default]
    Zero,
    Constant { b: Vec<f64> },
    /// `A x + b`, `A` given by rows.
    Linear { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `ω x^⊥` in the plane.
    Rotation { omega: f64 },
}

impl ExternalFieldSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            ExternalFieldSpec::Zero => Ok(()),
            ExternalFieldSpec::Constant { b } => {
                if b.len() != dim || !finite(b) {
                    return Err(Error::InvalidSpec(format!("constant field needs {dim} finite components")));
                }
                Ok(())
            }
            ExternalFieldSpec::Linear { a, b } => {
                if b.len() != dim || a.len() != dim || a.iter().any(|r| r.len() != dim || !finite(r)) || !finite(b) {
                    return Err(Error::InvalidSpec(format!("linear field needs a finite {dim}×{dim} matrix and offset")));
                }
                Ok(())
            }
            ExternalFieldSpec::Rotation { omega } => {
                if dim != 2 || !omega.is_finite() {
                    return Err(Error::InvalidSpec("rotation field needs N = 2 and finite ω".into()));
                }
                Ok(())
            }
        }
    }

    /// Writes `u_ext(t, x)` into `out`.
    #[inline]
    pub fn eval_into(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        match self {
            ExternalFieldSpec::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            ExternalFieldSpec::Constant { b } => out.copy_from_slice(b),
            ExternalFieldSpec::Linear { a, b } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = b[i] + a[i].iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
                }
            }
            ExternalFieldSpec::Rotation { omega } => {
                out[0] = -omega * x[1];
                out[1] = omega * x[0];
            }
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(t, x, &mut out);
        out
    }

    /// Linear part and offset, when the field is affine.
    pub fn affine(&self, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let zero = vec![vec![0.0; dim]; dim];
        match self {
            ExternalFieldSpec::Zero => (zero, vec![0.0; dim]),
            ExternalFieldSpec::Constant { b } => (zero, b.clone()),
            ExternalFieldSpec::Linear { a, b } => (a.clone(), b.clone()),
            ExternalFieldSpec::Rotation { omega } => (vec![vec![0.0, -omega], vec![*omega, 0.0]], vec![0.0, 0.0]),
        }
    }

    /// Lipschitz constant in the Frobenius norm.
    pub fn lipschitz(&self, dim: usize) -> f64 {
        let (a, _) = self.affine(dim);
        a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub epsilon: f64,
    pub lambda_drag: f64,
    pub dt: f64,
    pub t_final: f64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub external_field: ExternalFieldSpec,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Checks the configuration for an ensemble of `n` particles of total mass `m`.
    pub fn validate(&self, n: usize, m: f64) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidSpec("epsilon must be positive".into()));
        }
        if !(self.lambda_drag >= 0.0) {
            return Err(Error::InvalidSpec("lambda_drag must be non-negative".into()));
        }
        if !(self.dt > 0.0) || !(self.t_final >= 0.0) {
            return Err(Error::InvalidSpec("dt must be positive and t_final non-negative".into()));
        }
        self.kernel.validate()?;
        if !(self.kernel.regularization_delta > 0.0) {
            return Err(Error::InvalidSpec("particle simulations need δ > 0".into()));
        }
        self.external_field.validate(self.kernel.dim)?;
        let bound = stability_bound(self, n, m);
        if self.dt > bound {
            return Err(Error::Instability {
                step: 0,
                reason: format!("dt = {:.3e} exceeds the stability bound {:.3e}", self.dt, bound),
            });
        }
        Ok(())
    }
}

/// `dt_max = C·sqrt(ε/K)` with `K = n_nb·α·w·|∇²E_δ(0)| + m(β max λ_j^{-2} + |∇²w(0)|)`;
/// a lone particle feels no force.
pub fn stability_bound(cfg: &SimConfig, n: usize, m: f64) -> f64 {
    let k = cfg.kernel.prepared();
    let w = m / n.max(1) as f64;
    let others = n.saturating_sub(1) as f64;
    if others == 0.0 {
        return f64::INFINITY;
    }
    let local = STIFFNESS_NEIGHBOURS.min(others) * w * k.es_curvature_at_origin();
    let lmax = k.inv_lam2[..k.dim].iter().cloned().fold(0.0, f64::max);
    let pert = k.gauss.map(|(c, a)| 2.0 * a * c.abs()).unwrap_or(0.0);
    let stiff = local + m * (k.beta * lmax + pert);
    STABILITY_CONSTANT * (cfg.epsilon / stiff).sqrt()
}

/// `δ = c_δ·R·n^{-1/N}`.
pub fn default_delta(radius: f64, n: usize, dim: usize) -> f64 {
    DEFAULT_DELTA_FACTOR * radius * (n as f64).powf(-1.0 / dim as f64)
}

/// Stepper holding the prepared kernel and the force at the current positions.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub cfg: SimConfig,
    kernel: PreparedKernel,
    grad: Vec<f64>,
    fresh: bool,
    steps: usize,
    u: Vec<f64>,
}

impl Integrator {
    pub fn new(cfg: &SimConfig, state: &ParticleEnsemble) -> Result<Self> {
        state.validate()?;
        if state.dim != cfg.kernel.dim {
            return Err(Error::InvalidSpec("ensemble and kernel dimensions differ".into()));
        }
        cfg.validate(state.n(), state.mass())?;
        Ok(Integrator {
            cfg: cfg.clone(),
            kernel: cfg.kernel.prepared(),
            grad: vec![0.0; state.positions.len()],
            fresh: false,
            steps: 0,
            u: vec![0.0; state.dim],
        })
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    fn drag(&mut self, st: &mut ParticleEnsemble, h: f64) {
        let lam = self.cfg.lambda_drag;
        if lam == 0.0 {
            return;
        }
        let decay = (-lam * h).exp();
        let d = st.dim;
        for (x, v) in st.positions.chunks(d).zip(st.velocities.chunks_mut(d)) {
            self.cfg.external_field.eval_into(st.time, x, &mut self.u);
            for j in 0..d {
                v[j] = self.u[j] + (v[j] - self.u[j]) * decay;
            }
        }
    }

    fn kick(&mut self, st: &mut ParticleEnsemble, h: f64) {
        if !self.fresh {
            pair_gradient(&self.kernel, &st.positions, &mut self.grad);
            self.fresh = true;
        }
        let c = h * st.weight / self.cfg.epsilon;
        for (v, g) in st.velocities.iter_mut().zip(&self.grad) {
            *v -= c * g;
        }
    }

    /// Advances one Strang step of size `dt`.
    pub fn step(&mut self, st: &mut ParticleEnsemble) -> Result<()> {
        let dt = self.cfg.dt;
        self.drag(st, 0.5 * dt);
        self.kick(st, 0.5 * dt);
        for (x, v) in st.positions.iter_mut().zip(&st.velocities) {
            *x += dt * v;
        }
        self.fresh = false;
        self.kick(st, 0.5 * dt);
        st.time += dt;
        self.drag(st, 0.5 * dt);
        self.steps += 1;
        if let Some(bad) = st.positions.iter().chain(&st.velocities).position(|v| !v.is_finite() || v.abs() > 1e150) {
            return Err(Error::Instability {
                step: self.steps,
                reason: format!("non-finite or overflowing coordinate at index {bad}"),
            });
        }
        Ok(())
    }
}

/// One step from scratch (forces are recomputed); see [`Integrator`] for loops.
pub fn step(state: &ParticleEnsemble, cfg: &SimConfig) -> Result<ParticleEnsemble> {
    let mut it = Integrator::new(cfg, state)?;
    let mut next = state.clone();
    it.step(&mut next)?;
    Ok(next)
}

/// Runs `cfg.n_steps()` steps, calling `observe` at step 0, every `every`
/// steps and at the final step.
pub fn run<F>(state: &mut ParticleEnsemble, cfg: &SimConfig, every: usize, mut observe: F) -> Result<()>
where
    F: FnMut(usize, &ParticleEnsemble) -> Result<()>,
{
    let mut it = Integrator::new(cfg, state)?;
    let total = cfg.n_steps();
    let every = every.max(1);
    observe(0, state)?;
    for k in 1..=total {
        it.step(state)?;
        if k % every == 0 || k == total {
            observe(k, state)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub time: f64,
    pub mass: f64,
    pub x_eps: Vec<f64>,
    pub v_eps: Vec<f64>,
    pub kinetic_energy: f64,
    pub interaction_energy: f64,
    pub total_energy_h: f64,
    pub second_moment: f64,
}

/// `Σ_{i≠j} w²W_δ(x_i - x_j)`.
pub fn interaction_energy_of(state: &ParticleEnsemble, kernel: &KernelSpec) -> f64 {
    2.0 * state.weight * state.weight * pair_energy(&kernel.prepared(), &state.positions)
}

/// Macroscopic observables; `e_min` is the reference energy `𝓔_m`.
pub fn observables(state: &ParticleEnsemble, cfg: &SimConfig, e_min: f64) -> ObservableRecord {
    let w = state.weight;
    let kinetic = 0.5 * w * state.velocities.iter().map(|v| v * v).sum::<f64>();
    let interaction = interaction_energy_of(state, &cfg.kernel);
    ObservableRecord {
        time: state.time,
        mass: state.mass(),
        x_eps: state.center_of_mass(),
        v_eps: state.mean_velocity(),
        kinetic_energy: kinetic,
        interaction_energy: interaction,
        total_energy_h: kinetic + (interaction - e_min) / (2.0 * cfg.epsilon),
        second_moment: w * state.positions.iter().map(|v| v * v).sum::<f64>(),
    }
}

/// `∫ρ_ε u_ext(t, ·) / m`.
pub fn mean_external_field(state: &ParticleEnsemble, field: &ExternalFieldSpec) -> Vec<f64> {
    let d = state.dim;
    let mut acc = vec![0.0; d];
    let mut u = vec![0.0; d];
    for x in state.positions.chunks(d) {
        field.eval_into(state.time, x, &mut u);
        for j in 0..d {
            acc[j] += u[j];
        }
    }
    acc.iter().map(|v| v / state.n() as f64).collect()
}

/// Samples `n` particles from `ρ₀(· - X_init)/m` with velocities
/// `V_field(x) + thermal·ξ`.
///
/// Analytic profiles use rejection sampling with proposals drawn one per
/// stratum of a jittered grid over the bounding box. A particle cloud with
/// exactly `n` atoms is copied.
pub fn well_prepared_initial_data(
    profile: &MinimizerProfile,
    x_init: &[f64],
    v_field: &ExternalFieldSpec,
    n: usize,
    thermal: f64,
    seed: u64,
) -> Result<ParticleEnsemble> {
    let dim = profile.dim;
    if x_init.len() != dim {
        return Err(Error::InvalidSpec("X_init has the wrong dimension".into()));
    }
    if !(thermal >= 0.0) || n == 0 {
        return Err(Error::InvalidSpec("need thermal ≥ 0 and n ≥ 1".into()));
    }
    v_field.validate(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = Vec::with_capacity(n * dim);
    match &profile.shape {
        ProfileShape::ParticleCloud { positions, .. } => {
            if positions.len() != n * dim {
                return Err(Error::Sampling(format!("cloud holds {} atoms, {} requested", positions.len() / dim, n)));
            }
            for p in positions.chunks(dim) {
                for j in 0..dim {
                    pos.push(p[j] - profile.center[j] + x_init[j]);
                }
            }
        }
        _ => sample_profile(profile, n, &mut rng, &mut pos)?,
    }
    if !matches!(profile.shape, ProfileShape::ParticleCloud { .. }) {
        for p in pos.chunks_mut(dim) {
            for j in 0..dim {
                p[j] += x_init[j] - profile.center[j];
            }
        }
    }
    let mut vel = Vec::with_capacity(n * dim);
    let mut u = vec![0.0; dim];
    for x in pos.chunks(dim) {
        v_field.eval_into(0.0, x, &mut u);
        for j in 0..dim {
            let xi: f64 = if thermal > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            vel.push(u[j] + thermal * xi);
        }
    }
    ParticleEnsemble::new(dim, pos, vel, profile.mass / n as f64)
}

fn sample_profile(profile: &MinimizerProfile, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> Result<()> {
    let dim = profile.dim;
    let axes = profile.semi_axes();
    if axes.len() != dim || axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::Sampling("degenerate bounding box".into()));
    }
    let peak = profile.density(&profile.center);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Sampling("profile density must be finite and positive at its centre".into()));
    }
    // strata per axis so that a sweep offers roughly 2n proposals
    let per_axis = ((2 * n) as f64).powf(1.0 / dim as f64).ceil() as usize;
    let cells = per_axis.pow(dim as u32);
    let mut order: Vec<usize> = (0..cells).collect();
    let mut accepted = 0;
    let mut sweeps = 0;
    let mut p = vec![0.0; dim];
    while accepted < n {
        sweeps += 1;
        if sweeps > 1000 {
            return Err(Error::Sampling("rejection sampler made no progress".into()));
        }
        // Fisher–Yates so that a partial sweep is unbiased
        for i in (1..cells).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for &c in &order {
            let mut k = c;
            for j in 0..dim {
                let cell = k % per_axis;
                k /= per_axis;
                let u: f64 = rng.random();
                p[j] = profile.center[j] + axes[j] * (-1.0 + 2.0 * (cell as f64 + u) / per_axis as f64);
            }
            let acc: f64 = rng.random();
            if acc * peak < profile.density(&p) {
                out.extend_from_slice(&p);
                accepted += 1;
                if accepted == n {
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Gaussian kernel density and flux estimates of `ρ_ε` and `j_ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseFields {
    pub time: f64,
    pub density: GridField,
    /// One field per velocity component.
    pub flux: Vec<GridField>,
}

/// Fraction of each Gaussian bump outside the grid is summed; more than
/// 0.1% of the mass outside is a coverage error.
pub fn coarse_grain(state: &ParticleEnsemble, grid: &BoxGrid, bandwidth: f64) -> Result<CoarseFields> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidSpec("bandwidth must be positive".into()));
    }
    let d = state.dim;
    if grid.dim() != d {
        return Err(Error::InvalidSpec("grid and ensemble dimensions differ".into()));
    }
    let hi = grid.hi();
    let mut outside = 0.0;
    for x in state.positions.chunks(d) {
        let mut inside = 1.0;
        for j in 0..d {
            let a = (grid.lo[j] - x[j]) / (SQRT_2 * bandwidth);
            let b = (hi[j] - x[j]) / (SQRT_2 * bandwidth);
            inside *= 0.5 * (erf(b) - erf(a));
        }
        outside += 1.0 - inside;
    }
    let frac = outside / state.n() as f64;
    if frac > 1e-3 {
        return Err(Error::Coverage(format!("{:.3}% of the mass lies outside the grid", 100.0 * frac)));
    }
    let mut rho = GridField::zeros(grid.clone());
    let mut flux = vec![GridField::zeros(grid.clone()); d];
    let reach = (5.0 * bandwidth / grid.h).ceil() as isize;
    let norm = state.weight / (2.0 * std::f64::consts::PI * bandwidth * bandwidth).powf(d as f64 / 2.0);
    let inv2 = 0.5 / (bandwidth * bandwidth);
    let mut w1 = vec![Vec::new(); d];
    let mut lo_idx = [0usize; 3];
    for (x, v) in state.positions.chunks(d).zip(state.velocities.chunks(d)) {
        // separable weights along each axis
        for j in 0..d {
            let c = ((x[j] - grid.lo[j]) / grid.h).floor() as isize;
            let a = (c - reach).max(0);
            let b = (c + reach).min(grid.shape[j] as isize - 1);
            w1[j].clear();
            lo_idx[j] = a.max(0) as usize;
            if a > b {
                continue;
            }
            for i in a..=b {
                let z = grid.lo[j] + grid.h * (i as f64 + 0.5) - x[j];
                w1[j].push((-z * z * inv2).exp());
            }
        }
        if w1.iter().any(|w| w.is_empty()) {
            continue;
        }
        let mut idx = [0usize; 3];
        let lens: Vec<usize> = w1.iter().map(|w| w.len()).collect();
        let total: usize = lens.iter().product();
        for t in 0..total {
            let mut r = t;
            let mut wt = norm;
            for j in (0..d).rev() {
                let q = r % lens[j];
                r /= lens[j];
                idx[j] = lo_idx[j] + q;
                wt *= w1[j][q];
            }
            let k = grid.flat(&idx[..d]);
            rho.values[k] += wt;
            for j in 0..d {
                flux[j].values[k] += wt * v[j];
            }
        }
    }
    Ok(CoarseFields { time: state.time, density: rho, flux })
}

/// CSV header for a trajectory of dimension `dim`.
pub fn trajectory_header(dim: usize) -> String {
    let mut h = vec!["time".to_string(), "mass".to_string()];
    h.extend((1..=dim).map(|j| format!("X{j}")));
    h.extend((1..=dim).map(|j| format!("V{j}")));
    h.extend(["kinetic", "interaction", "H_eps", "second_moment"].iter().map(|s| s.to_string()));
    h.join(",")
}

pub fn write_trajectory_csv<W: Write>(mut w: W, records: &[ObservableRecord]) -> std::io::Result<()> {
    let dim = records.first().map(|r| r.x_eps.len()).unwrap_or(1);
    writeln!(w, "{}", trajectory_header(dim))?;
    for r in records {
        let mut fields = vec![r.time, r.mass];
        fields.extend(&r.x_eps);
        fields.extend(&r.v_eps);
        fields.extend([r.kinetic_energy, r.interaction_energy, r.total_energy_h, r.second_moment]);
        let line: Vec<String> = fields.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Layout: `n` and `N` as little-endian `u64`, then `n·N` positions and
/// `n·N` velocities as little-endian `f64`.
pub fn write_snapshot<W: Write>(mut w: W, state: &ParticleEnsemble) -> std::io::Result<()> {
    w.write_all(&(state.n() as u64).to_le_bytes())?;
    w.write_all(&(state.dim as u64).to_le_bytes())?;
    for v in state.positions.iter().chain(&state.velocities) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a snapshot; the weight is `mass/n` since the layout does not store it.
pub fn read_snapshot<R: Read>(mut r: R, mass: f64) -> Result<ParticleEnsemble> {
    let io = |e: std::io::Error| Error::InvalidSpec(format!("snapshot: {e}"));
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(io)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8).map_err(io)?;
    let dim = u64::from_le_bytes(b8) as usize;
    if n == 0 || !(1..=3).contains(&dim) {
        return Err(Error::InvalidSpec(format!("snapshot header n = {n}, N = {dim}")));
    }
    let mut vals = vec![0.0; 2 * n * dim];
    for v in vals.iter_mut() {
        r.read_exact(&mut b8).map_err(io)?;
        *v = f64::from_le_bytes(b8);
    }
    let vel = vals.split_off(n * dim);
    ParticleEnsemble::new(dim, vals, vel, mass / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimizers::explicit_radial_minimizer;

    fn cfg(eps: f64, lam: f64, dt: f64, field: ExternalFieldSpec) -> SimConfig {
        SimConfig {
            epsilon: eps,
            lambda_drag: lam,
            dt,
            t_final: 1.0,
            kernel: KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap().with_delta(0.05),
            external_field: field,
            seed: 0,
        }
    }

    #[test]
    fn single_particle_drag_is_exact() {
        let mut st = ParticleEnsemble::new(2, vec![0.3, -0.2], vec![1.0, 2.0], 1.0).unwrap();
        let c = cfg(1.0, 0.7, 0.05, ExternalFieldSpec::Zero);
        let mut it = Integrator::new(&c, &st).unwrap();
        for _ in 0..40 {
            it.step(&mut st).unwrap();
        }
        let t: f64 = st.time;
        let decay = (-0.7 * t).exp();
        assert!((st.velocities[0] - decay).abs() < 1e-14);
        assert!((st.velocities[1] - 2.0 * decay).abs() < 1e-14);
        // x(t) = x0 + v0(1 - e^{-λt})/λ up to the splitting error
        let exact = 0.3 + (1.0 - decay) / 0.7;
        assert!((st.positions[0] - exact).abs() < 1e-3);
    }

    #[test]
    fn symmetric_pair_keeps_center() {
        let mut st = ParticleEnsemble::new(2, vec![0.1, 0.2, -0.1, -0.2], vec![0.0, 1.0, 0.0, -1.0], 0.5).unwrap();
        let c = cfg(0.1, 0.0, 0.005, ExternalFieldSpec::Zero);
        let mut it = Integrator::new(&c, &st).unwrap();
        for _ in 0..200 {
            it.step(&mut st).unwrap();
        }
        assert!(st.center_of_mass().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn stability_bound_rejects_large_steps() {
        let st = ParticleEnsemble::new(2, vec![0.0, 0.0, 0.1, 0.0], vec![0.0; 4], 0.5).unwrap();
        let c = cfg(1e-3, 0.0, 1.0, ExternalFieldSpec::Zero);
        assert!(matches!(Integrator::new(&c, &st), Err(Error::Instability { step: 0, .. })));
    }

    #[test]
    fn monokinetic_sampling_and_coarse_grain() {
        let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let prof = explicit_radial_minimizer(&spec, 1.0).unwrap();
        let v0 = ExternalFieldSpec::Constant { b: vec![0.5, -0.25] };
        let st = well_prepared_initial_data(&prof, &[1.0, 2.0], &v0, 3000, 0.0, 7).unwrap();
        assert!(st.velocities.chunks(2).all(|v| v == [0.5, -0.25]));
        assert_eq!(st.mass(), 1.0);
        let r = prof.semi_axes()[0];
        let x = st.center_of_mass();
        assert!((x[0] - 1.0).abs() < 3.0 * r / 3000f64.sqrt());
        assert!((x[1] - 2.0).abs() < 3.0 * r / 3000f64.sqrt());
        for p in st.positions.chunks(2) {
            assert!(((p[0] - 1.0).powi(2) + (p[1] - 2.0).powi(2)).sqrt() <= r);
        }
        let grid = BoxGrid::centered(&[1.0, 2.0], 1.0, 64).unwrap();
        let f = coarse_grain(&st, &grid, 0.05).unwrap();
        assert!((f.density.integral() - 1.0).abs() < 1e-3);
        assert!((f.flux[0].integral() - 0.5).abs() < 1e-3);
        for k in 0..grid.len() {
            assert!((f.flux[1].values[k] + 0.25 * f.density.values[k]).abs() < 1e-12 * (1.0 + f.density.values[k]));
        }
        let small = BoxGrid::centered(&[1.0, 2.0], 0.3, 16).unwrap();
        assert!(matches!(coarse_grain(&st, &small, 0.05), Err(Error::Coverage(_))));
    }

    #[test]
    fn snapshot_round_trip() {
        let st = ParticleEnsemble::new(2, vec![0.1, 0.2, 0.3, 0.4], vec![1.0, -1.0, 0.5, 0.25], 0.5).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &st).unwrap();
        assert_eq!(buf.len(), 16 + 8 * 8);
        assert_eq!(&buf[..8], &2u64.to_le_bytes());
        let back = read_snapshot(&buf[..], 1.0).unwrap();
        assert_eq!(back.positions, st.positions);
        assert_eq!(back.velocities, st.velocities);
        assert_eq!(back.weight, 0.5);
    }

    #[test]
    fn csv_header() {
        assert_eq!(trajectory_header(2), "time,mass,X1,X2,V1,V2,kinetic,interaction,H_eps,second_moment");
    }

    #[test]
    fn field_variants() {
        let f = ExternalFieldSpec::Linear { a: vec![vec![1.0, 2.0], vec![3.0, 4.0]], b: vec![0.5, 0.0] };
        assert_eq!(f.eval(0.0, &[1.0, 1.0]), vec![3.5, 7.0]);
        assert_eq!(ExternalFieldSpec::Rotation { omega: 2.0 }.eval(0.0, &[1.0, 0.0]), vec![0.0, 2.0]);
        assert!(ExternalFieldSpec::Rotation { omega: 1.0 }.validate(3).is_err());
        assert!(ExternalFieldSpec::Constant { b: vec![f64::NAN, 0.0] }.validate(2).is_err());
    }
}
