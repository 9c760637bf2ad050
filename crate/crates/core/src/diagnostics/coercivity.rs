//! Coercivity of the energy around a minimizer, evaluated on planar grid fields.
//!
//! All functionals share one cell-pair table, so the bound reduces to
//! `καE_s(μ,μ) + ∫∫w dμ dμ ≥ 0` up to rounding.

use super::energy::{project_profile, GridKernel};
use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridField};
use crate::kernels::KernelSpec;
use crate::minimizers::MinimizerProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const COERCIVITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    /// `𝓔[ρ] - 𝓔_m + βm²Σ|X_j - X̄_j|²/λ_j²`.
    pub lhs: f64,
    /// `2∫(Φ̄ - A0)dρ + α(1-κ)‖ρ - ρ̄‖²`.
    pub rhs: f64,
    pub energy_gap: f64,
    pub com_term: f64,
    pub potential_term: f64,
    pub hms_sq: f64,
    /// Sides of the centred bound `𝓔[ρ] ≥ βmΣ∫|x_j - X_j|²/λ_j² dρ + α(1-κ)‖ρ‖²`,
    /// only for `s < N/2`.
    pub lhs0: Option<f64>,
    pub rhs0: Option<f64>,
    pub kappa: f64,
    pub holds: bool,
}

impl CoercivityReport {
    pub fn slack(&self) -> f64 {
        let s = self.lhs - self.rhs;
        match (self.lhs0, self.rhs0) {
            (Some(a), Some(b)) => s.min(a - b),
            _ => s,
        }
    }
}

/// Reference minimizer projected on a grid, with its potential and energy.
#[derive(Debug, Clone)]
pub struct CoercivityContext {
    pub kernel: GridKernel,
    pub reference: GridField,
    pub kappa: f64,
    mass: f64,
    ref_masses: Vec<f64>,
    phi_bar: Vec<f64>,
    /// `∫Φ̄ dρ̄ = m·A0 = 𝓔_m`.
    e_m: f64,
    ref_com: [f64; 2],
}

impl CoercivityContext {
    pub fn new(spec: &KernelSpec, reference: &MinimizerProfile, grid: &BoxGrid, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa < 1.0) {
            return Err(Error::InvalidSpec("κ must lie in [0, 1)".into()));
        }
        let kernel = GridKernel::new(spec, grid)?;
        let reference = project_profile(reference, grid)?;
        let ref_masses = reference.masses();
        let phi_bar = kernel.potential(&ref_masses)?;
        let e_m = dot(&ref_masses, &phi_bar);
        let (mass, s1, _) = kernel.moments(&ref_masses);
        Ok(CoercivityContext {
            kernel,
            reference,
            kappa,
            mass,
            ref_masses,
            phi_bar,
            e_m,
            ref_com: [s1[0] / mass, s1[1] / mass],
        })
    }

    /// Default layout: `m` cells per axis over `1.6×` the largest semi-axis.
    pub fn with_default_grid(spec: &KernelSpec, reference: &MinimizerProfile, cells: usize, kappa: f64) -> Result<Self> {
        let r = reference.semi_axes().into_iter().fold(0.0, f64::max);
        let grid = BoxGrid::centered(&reference.center, 1.6 * r, cells)?;
        Self::new(spec, reference, &grid, kappa)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `𝓔_m` of the projected reference.
    pub fn minimum_energy(&self) -> f64 {
        self.e_m
    }

    pub fn a0(&self) -> f64 {
        self.e_m / self.mass
    }

    pub fn check(&self, rho: &GridField) -> Result<CoercivityReport> {
        if rho.grid != self.reference.grid {
            return Err(Error::InvalidSpec("ρ must live on the reference grid".into()));
        }
        if rho.values.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidSpec("ρ must be nonnegative".into()));
        }
        let q = rho.masses();
        let (m, s1, s2) = self.kernel.moments(&q);
        if (m - self.mass).abs() > 1e-12 * self.mass {
            return Err(Error::InvalidSpec(format!("ρ has mass {m}, expected {}", self.mass)));
        }
        let spec = &self.kernel.spec;
        let li = spec.lambda_inv2();
        let energy = dot(&q, &self.kernel.potential(&q)?);
        let energy_gap = energy - self.e_m;
        let com_term: f64 = (0..2)
            .map(|j| {
                let d = s1[j] / m - self.ref_com[j];
                spec.beta * self.mass * self.mass * d * d * li[j]
            })
            .sum();
        let potential_term = 2.0 * (dot(&q, &self.phi_bar) - (m / self.mass) * self.e_m);
        let mu: Vec<f64> = q.iter().zip(&self.ref_masses).map(|(a, b)| a - b).collect();
        let hms_sq = self.kernel.es_quadratic(&mu)?;
        let c = spec.alpha * (1.0 - self.kappa);
        let lhs = energy_gap + com_term;
        let rhs = potential_term + c * hms_sq;
        let (lhs0, rhs0) = if !spec.is_log() && spec.s < 1.0 {
            let spread: f64 = (0..2).map(|j| spec.beta * m * (s2[j] - s1[j] * s1[j] / m) * li[j]).sum();
            (Some(energy), Some(spread + c * self.kernel.es_quadratic(&q)?))
        } else {
            (None, None)
        };
        let mut r = CoercivityReport {
            lhs,
            rhs,
            energy_gap,
            com_term,
            potential_term,
            hms_sq,
            lhs0,
            rhs0,
            kappa: self.kappa,
            holds: false,
        };
        r.holds = r.slack() >= -COERCIVITY_SLACK;
        Ok(r)
    }

    /// Mass-preserving random perturbation of the reference: a whole-cell
    /// translate blended with a few Gaussian bumps.
    pub fn random_trial(&self, rng: &mut ChaCha8Rng) -> GridField {
        let grid = &self.reference.grid;
        let half = 0.5 * grid.h * grid.shape[0] as f64;
        let r = half / 1.6;
        let shift = [rng.random_range(-3..=3i64) as isize, rng.random_range(-3..=3i64) as isize];
        let base = translate_cells(&self.reference, shift);
        let theta: f64 = if rng.random::<f64>() < 0.1 { 0.0 } else { rng.random() };
        let bumps: Vec<([f64; 2], f64, f64)> = (0..rng.random_range(1..=4))
            .map(|_| {
                let rad = 1.2 * r * rng.random::<f64>().sqrt();
                let ang = std::f64::consts::TAU * rng.random::<f64>();
                let c = [self.ref_com[0] + rad * ang.cos(), self.ref_com[1] + rad * ang.sin()];
                (c, r * (0.08 + 0.32 * rng.random::<f64>()), 0.2 + rng.random::<f64>())
            })
            .collect();
        let blob = GridField::sample(grid.clone(), |x| {
            bumps
                .iter()
                .map(|(c, w, a)| {
                    let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                    a * (-d2 / (2.0 * w * w)).exp()
                })
                .sum()
        });
        let blob = blob.scaled(self.mass / blob.integral());
        let mut f = GridField::zeros(grid.clone());
        for (k, v) in f.values.iter_mut().enumerate() {
            *v = (1.0 - theta) * base.values[k] + theta * blob.values[k];
        }
        f.scaled(self.mass / f.integral())
    }

    /// `count` pinned-seed trials.
    pub fn trials(&self, count: usize, seed: u64) -> Result<Vec<CoercivityReport>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.check(&self.random_trial(&mut rng))).collect()
    }
}

/// One-shot check; builds the grid tables every call.
pub fn coercivity_check(
    rho: &GridField,
    reference: &MinimizerProfile,
    spec: &KernelSpec,
    kappa: f64,
) -> Result<CoercivityReport> {
    CoercivityContext::new(spec, reference, &rho.grid, kappa)?.check(rho)
}

/// Shifts a planar field by whole cells, dropping what leaves the box.
pub fn translate_cells(f: &GridField, shift: [isize; 2]) -> GridField {
    let g = &f.grid;
    let (m0, m1) = (g.shape[0] as isize, g.shape[1] as isize);
    let mut out = GridField::zeros(g.clone());
    for i in 0..m0 {
        for j in 0..m1 {
            let (a, b) = (i + shift[0], j + shift[1]);
            if (0..m0).contains(&a) && (0..m1).contains(&b) {
                out.values[(a * m1 + b) as usize] = f.values[(i * m1 + j) as usize];
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
