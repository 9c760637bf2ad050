//! All-pairs sums over a particle cloud.

use crate::kernels::PreparedKernel;

/// Returns `Σ_{i<j} W(x_i - x_j)` and writes `g_i = Σ_{j≠i} ∇W(x_i - x_j)`.
pub fn pair_energy_gradient(k: &PreparedKernel, x: &[f64], g: &mut [f64]) -> f64 {
    match k.dim {
        1 => run::<1, true>(k, x, g),
        2 => run::<2, true>(k, x, g),
        _ => run::<3, true>(k, x, g),
    }
}

/// Same as [`pair_energy_gradient`] without the energy.
pub fn pair_gradient(k: &PreparedKernel, x: &[f64], g: &mut [f64]) {
    match k.dim {
        1 => run::<1, false>(k, x, g),
        2 => run::<2, false>(k, x, g),
        _ => run::<3, false>(k, x, g),
    };
}

/// `Σ_{i<j} W(x_i - x_j)`.
pub fn pair_energy(k: &PreparedKernel, x: &[f64]) -> f64 {
    let d = k.dim;
    let n = x.len() / d;
    let mut e = 0.0;
    for i in 0..n {
        let xi = &x[i * d..(i + 1) * d];
        let mut row = 0.0;
        for j in (i + 1)..n {
            let xj = &x[j * d..(j + 1) * d];
            let mut dx = [0.0; 3];
            for c in 0..d {
                dx[c] = xi[c] - xj[c];
            }
            row += k.value(&dx[..d]);
        }
        e += row;
    }
    e
}

/// `Σ_{i,j} W(x_i - y_j)` between two clouds.
pub fn cross_energy(k: &PreparedKernel, x: &[f64], y: &[f64]) -> f64 {
    let d = k.dim;
    let mut e = 0.0;
    for xi in x.chunks(d) {
        let mut row = 0.0;
        for yj in y.chunks(d) {
            let mut dx = [0.0; 3];
            for c in 0..d {
                dx[c] = xi[c] - yj[c];
            }
            row += k.value(&dx[..d]);
        }
        e += row;
    }
    e
}

fn run<const D: usize, const E: bool>(k: &PreparedKernel, x: &[f64], g: &mut [f64]) -> f64 {
    let n = x.len() / D;
    g.iter_mut().for_each(|v| *v = 0.0);
    let mut bq = [0.0; D];
    for c in 0..D {
        bq[c] = k.beta * k.inv_lam2[c];
    }
    let (alpha, coef, hp, d2) = (k.alpha, k.coef, k.half_power, k.delta2);
    let mut energy = 0.0;
    for i in 0..n {
        let mut xi = [0.0; D];
        xi.copy_from_slice(&x[i * D..(i + 1) * D]);
        let mut gi = [0.0; D];
        let mut row = 0.0;
        for j in (i + 1)..n {
            let mut dx = [0.0; D];
            let mut r2 = 0.0;
            let mut quad = 0.0;
            for c in 0..D {
                dx[c] = xi[c] - x[j * D + c];
                r2 += dx[c] * dx[c];
                quad += bq[c] * dx[c] * dx[c];
            }
            let q = r2 + d2;
            let mut f;
            if k.log {
                f = -alpha * coef / q;
                if E {
                    row += -0.5 * alpha * coef * q.ln() + 0.5 * quad;
                }
            } else {
                let p = alpha * coef * q.powf(-hp);
                f = -2.0 * hp * p / q;
                if E {
                    row += p + 0.5 * quad;
                }
            }
            if let Some((c, a)) = k.gauss {
                let ex = c * (-a * r2).exp();
                f -= 2.0 * a * ex;
                if E {
                    row += ex;
                }
            }
            for c in 0..D {
                let gc = (f + bq[c]) * dx[c];
                gi[c] += gc;
                g[j * D + c] -= gc;
            }
        }
        for c in 0..D {
            g[i * D + c] += gi[c];
        }
        energy += row;
    }
    energy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelSpec, PerturbationSpec};

    #[test]
    fn matches_pointwise_kernel() {
        let spec = KernelSpec::new(2, 0.75, 1.3, 0.7, vec![1.0, 2.0])
            .unwrap()
            .with_delta(0.05)
            .with_perturbation(PerturbationSpec::Gaussian { amplitude: -0.1, width: 0.3 });
        let k = spec.prepared();
        let x: Vec<f64> = (0..40).map(|i| ((i * 37 % 17) as f64 * 0.13).sin()).collect();
        let mut g = vec![0.0; x.len()];
        let e = pair_energy_gradient(&k, &x, &mut g);
        assert!((e - pair_energy(&k, &x)).abs() < 1e-12 * e.abs().max(1.0));
        let mut g2 = vec![0.0; x.len()];
        pair_gradient(&k, &x, &mut g2);
        let mut tmp = [0.0; 2];
        for i in 0..20 {
            let mut acc = [0.0; 2];
            for j in 0..20 {
                if i != j {
                    let d = [x[2 * i] - x[2 * j], x[2 * i + 1] - x[2 * j + 1]];
                    k.grad_into(&d, &mut tmp);
                    acc[0] += tmp[0];
                    acc[1] += tmp[1];
                }
            }
            for c in 0..2 {
                assert!((acc[c] - g[2 * i + c]).abs() < 1e-12 * (1.0 + acc[c].abs()));
                assert_eq!(g[2 * i + c], g2[2 * i + c]);
            }
        }
    }
}
