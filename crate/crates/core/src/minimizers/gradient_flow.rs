//! Particle gradient descent on the discrete interaction energy.

use super::{MinimizerProfile, ProfileShape};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, PreparedKernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientFlowOptions {
    pub n: usize,
    /// Maximum number of accepted steps.
    pub steps: usize,
    pub seed: u64,
    /// Stop once the rms particle speed falls below `speed_tol·R`.
    pub speed_tol: f64,
    /// Divergence bound on `∫|x|² dρ / m`, in units of the initial radius squared.
    pub max_second_moment: f64,
    pub initial_step: f64,
}

impl Default for GradientFlowOptions {
    fn default() -> Self {
        GradientFlowOptions { n: 400, steps: 2000, seed: 1, speed_tol: 1e-6, max_second_moment: 1e4, initial_step: 1e-2 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GradientFlowTrace {
    /// Discrete energy after each accepted step (first entry: initial cloud).
    pub energies: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub rejected: usize,
    pub final_rms_speed: f64,
}

/// `Σ_{i≠j} w_i w_j W(x_i - x_j)` and the descent velocities
/// `v_i = -(1/w_i)∂E/∂x_i`.
pub(crate) fn energy_and_velocity(k: &PreparedKernel, _dim: usize, x: &[f64], w: f64, vel: &mut [f64]) -> f64 {
    // E = 2w²Σ_{i<j}W, v_i = -2wΣ_j ∇W(x_i - x_j)
    let e = crate::pairs::pair_energy_gradient(k, x, vel);
    vel.iter_mut().for_each(|v| *v *= -2.0 * w);
    2.0 * w * w * e
}

/// Deterministic near-uniform disk or segment, with a small seeded jitter.
fn initial_cloud(dim: usize, n: usize, radius: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * dim);
    let golden = PI * (3.0 - 5f64.sqrt());
    for i in 0..n {
        let jit = 1e-3 * radius;
        match dim {
            1 => x.push(radius * (2.0 * (i as f64 + 0.5) / n as f64 - 1.0) + jit * rng.random_range(-1.0..1.0)),
            2 => {
                let r = radius * ((i as f64 + 0.5) / n as f64).sqrt();
                let t = golden * i as f64;
                x.push(r * t.cos() + jit * rng.random_range(-1.0..1.0));
                x.push(r * t.sin() + jit * rng.random_range(-1.0..1.0));
            }
            _ => {
                // Fibonacci shells scaled by the cube root of the rank
                let r = radius * ((i as f64 + 0.5) / n as f64).cbrt();
                let z = 1.0 - 2.0 * ((i as f64 * 0.618_033_988_75) % 1.0);
                let rho = (1.0 - z * z).sqrt();
                let t = golden * i as f64;
                x.push(r * rho * t.cos() + jit * rng.random_range(-1.0..1.0));
                x.push(r * rho * t.sin() + jit * rng.random_range(-1.0..1.0));
                x.push(r * z + jit * rng.random_range(-1.0..1.0));
            }
        }
    }
    x
}

/// Gradient descent with `n` particles and at most `steps` accepted steps.
pub fn gradient_flow_minimizer(spec: &KernelSpec, m: f64, n: usize, steps: usize) -> Result<MinimizerProfile> {
    let opts = GradientFlowOptions { n, steps, ..Default::default() };
    gradient_flow_with(spec, m, &opts).map(|r| r.0)
}

/// Explicit-Euler descent with step halving on energy increase and step
/// growth after acceptance.
pub fn gradient_flow_with(
    spec: &KernelSpec,
    m: f64,
    opts: &GradientFlowOptions,
) -> Result<(MinimizerProfile, GradientFlowTrace)> {
    spec.validate()?;
    if opts.n < 100 {
        return Err(Error::InvalidSpec(format!("gradient flow needs n ≥ 100, got {}", opts.n)));
    }
    if !(spec.regularization_delta > 0.0) {
        return Err(Error::InvalidSpec("gradient flow needs a regularized kernel (δ > 0)".into()));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidSpec("mass must be positive".into()));
    }
    let dim = spec.dim;
    let n = opts.n;
    let w = m / n as f64;
    let k = spec.prepared();
    let lmax = spec.lambda.iter().cloned().fold(0.0, f64::max);
    // uniform-ball radius for the log/Newtonian case as a length scale
    let radius = (spec.alpha / (spec.beta * m)).powf(1.0 / dim as f64).max(1e-3) * lmax.powf(2.0 / dim as f64) * 0.5;
    let mut x = initial_cloud(dim, n, radius, opts.seed);
    let mut vel = vec![0.0; x.len()];
    let mut e = energy_and_velocity(&k, dim, &x, w, &mut vel);
    let mut trace = GradientFlowTrace { energies: vec![e], ..Default::default() };
    let mut tau = opts.initial_step;
    let mut trial = x.clone();
    let mut tvel = vel.clone();
    let bound = opts.max_second_moment * radius * radius;
    let mut accepted = 0;
    let mut rms = f64::INFINITY;
    while accepted < opts.steps {
        rms = (vel.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        if rms < opts.speed_tol * radius {
            break;
        }
        for (t, (xi, vi)) in trial.iter_mut().zip(x.iter().zip(&vel)) {
            *t = xi + tau * vi;
        }
        let et = energy_and_velocity(&k, dim, &trial, w, &mut tvel);
        if et.is_finite() && et <= e {
            std::mem::swap(&mut x, &mut trial);
            std::mem::swap(&mut vel, &mut tvel);
            e = et;
            trace.energies.push(e);
            trace.step_sizes.push(tau);
            accepted += 1;
            tau *= 1.2;
            let m2 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
            if !(m2 <= bound) {
                return Err(Error::Divergence(format!("second moment {m2:.3e} exceeds {bound:.3e}")));
            }
        } else {
            trace.rejected += 1;
            tau *= 0.5;
            if tau < 1e-14 {
                break;
            }
        }
    }
    trace.final_rms_speed = rms;
    let mut c = vec![0.0; dim];
    for p in x.chunks(dim) {
        for j in 0..dim {
            c[j] += p[j] / n as f64;
        }
    }
    for p in x.chunks_mut(dim) {
        for j in 0..dim {
            p[j] -= c[j];
        }
    }
    let profile = MinimizerProfile {
        shape: ProfileShape::ParticleCloud { positions: x, weights: vec![w; n] },
        mass: m,
        dim,
        center: vec![0.0; dim],
    };
    Ok((profile, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimizers::explicit_radial_minimizer;

    #[test]
    fn energy_and_velocity_match_finite_differences() {
        let spec = KernelSpec::new(2, 0.75, 1.0, 1.0, vec![1.0, 0.5]).unwrap().with_delta(0.05);
        let k = spec.prepared();
        let x = initial_cloud(2, 120, 0.5, 3);
        let w = 1.0 / 120.0;
        let mut v = vec![0.0; x.len()];
        let e0 = energy_and_velocity(&k, 2, &x, w, &mut v);
        let h = 1e-6;
        for idx in [0, 7, 101] {
            let mut xp = x.clone();
            xp[idx] += h;
            let mut xm = x.clone();
            xm[idx] -= h;
            let mut tmp = v.clone();
            let fd = (energy_and_velocity(&k, 2, &xp, w, &mut tmp) - energy_and_velocity(&k, 2, &xm, w, &mut tmp)) / (2.0 * h);
            assert!((-fd / w - v[idx]).abs() < 1e-6 * (1.0 + v[idx].abs()), "{idx}");
        }
        assert!(e0.is_finite());
    }

    #[test]
    fn disk_radius_and_monotone_energy() {
        let n = 300;
        let spec0 = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let r = explicit_radial_minimizer(&spec0, 1.0).unwrap().semi_axes()[0];
        let spec = spec0.with_delta(0.5 * r / (n as f64).sqrt());
        let opts = GradientFlowOptions { n, steps: 800, ..Default::default() };
        let (p, trace) = gradient_flow_with(&spec, 1.0, &opts).unwrap();
        assert!(trace.energies.windows(2).all(|e| e[1] <= e[0]));
        let m2: f64 = p.second_moments().iter().sum();
        let rc = (2.0 * m2).sqrt();
        assert!((rc - r).abs() < 0.1 * r, "{rc} {r}");
        assert!(p.center_of_mass().iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn rejects_unregularized_kernel_and_small_n() {
        let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        assert!(gradient_flow_minimizer(&spec, 1.0, 200, 10).is_err());
        assert!(gradient_flow_minimizer(&spec.with_delta(0.1), 1.0, 50, 10).is_err());
    }
}
