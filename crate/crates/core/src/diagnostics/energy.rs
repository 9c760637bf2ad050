//! Interaction energy `𝓔[ρ] = ∫∫W dρ dρ` of clouds and grid fields.

use super::hms::es_plane;
use super::table::KernelTable;
use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridField};
use crate::kernels::KernelSpec;
use crate::minimizers::MinimizerProfile;
use crate::pairs::pair_energy;

/// A finite measure the energy can be evaluated on.
#[derive(Debug, Clone, Copy)]
pub enum Measure<'a> {
    /// Weighted atoms, positions row-major.
    Cloud { dim: usize, positions: &'a [f64], weights: &'a [f64] },
    Grid(&'a GridField),
}

/// Clouds: `Σ_{i≠j} w_i w_j W_δ(x_i - x_j)`. Grids: exact double integral of
/// the piecewise-constant field, with singular cell pairs by Duffy quadrature.
pub fn interaction_energy(measure: Measure<'_>, spec: &KernelSpec) -> Result<f64> {
    spec.validate()?;
    match measure {
        Measure::Cloud { dim, positions, weights } => {
            if dim != spec.dim || positions.len() != dim * weights.len() {
                return Err(Error::InvalidSpec("cloud does not match the kernel dimension".into()));
            }
            let k = spec.prepared();
            if weights.iter().all(|w| *w == weights[0]) {
                return Ok(2.0 * weights[0] * weights[0] * pair_energy(&k, positions));
            }
            let mut e = 0.0;
            let mut d = [0.0; 3];
            for (i, (xi, wi)) in positions.chunks(dim).zip(weights).enumerate() {
                for (xj, wj) in positions.chunks(dim).zip(weights).skip(i + 1) {
                    for c in 0..dim {
                        d[c] = xi[c] - xj[c];
                    }
                    e += 2.0 * wi * wj * k.value(&d[..dim]);
                }
            }
            Ok(e)
        }
        Measure::Grid(f) => {
            let gk = GridKernel::new(spec, &f.grid)?;
            gk.energy(&f.masses())
        }
    }
}

/// The interaction kernel tabulated on a planar grid, split into the
/// rotation-invariant part `αE_s + w` and the quadratic part `βW_a`, which is
/// handled through exact cell moments.
#[derive(Debug, Clone)]
pub struct GridKernel {
    pub spec: KernelSpec,
    pub grid: BoxGrid,
    /// `αE_s + w` cell-pair averages.
    pub table: KernelTable,
    /// `E_s` cell-pair averages (for `Ḣ^{-s}` norms).
    pub es: KernelTable,
}

impl GridKernel {
    pub fn new(spec: &KernelSpec, grid: &BoxGrid) -> Result<Self> {
        if spec.dim != 2 || grid.dim() != 2 {
            return Err(Error::InvalidSpec("grid energies are implemented for N = 2".into()));
        }
        let shape = [grid.shape[0], grid.shape[1]];
        let k = spec.prepared();
        let es = if spec.regularization_delta == 0.0 {
            KernelTable::new(shape, grid.h, es_plane(spec.s)?, true)?
        } else {
            let kk = k.clone();
            KernelTable::new(shape, grid.h, move |r2| kk.es_r2(r2), true)?
        };
        let table = match k.gauss {
            None => KernelTable::combine(spec.alpha, &es, 0.0, &es)?,
            Some((c, a)) => {
                let w = KernelTable::new(shape, grid.h, move |r2| c * (-a * r2).exp(), false)?;
                KernelTable::combine(spec.alpha, &es, 1.0, &w)?
            }
        };
        Ok(GridKernel { spec: spec.clone(), grid: grid.clone(), table, es })
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.grid.len() {
            return Err(Error::InvalidSpec("cell masses do not match the grid".into()));
        }
        Ok(())
    }

    /// Mass, first and second moments (with the in-cell variance `h²/12`).
    pub fn moments(&self, q: &[f64]) -> (f64, [f64; 2], [f64; 2]) {
        let g = &self.grid;
        let (mut m, mut s1, mut s2) = (0.0, [0.0; 2], [0.0; 2]);
        let var = g.h * g.h / 12.0;
        let m1 = g.shape[1];
        for (k, qk) in q.iter().enumerate() {
            let x = [g.lo[0] + g.h * ((k / m1) as f64 + 0.5), g.lo[1] + g.h * ((k % m1) as f64 + 0.5)];
            m += qk;
            for j in 0..2 {
                s1[j] += qk * x[j];
                s2[j] += qk * (x[j] * x[j] + var);
            }
        }
        (m, s1, s2)
    }

    fn quadratic_part(&self, a: (f64, [f64; 2], [f64; 2]), b: (f64, [f64; 2], [f64; 2])) -> f64 {
        let li = self.spec.lambda_inv2();
        (0..2)
            .map(|j| 0.5 * self.spec.beta * li[j] * (a.0 * b.2[j] + b.0 * a.2[j] - 2.0 * a.1[j] * b.1[j]))
            .sum()
    }

    /// `∫∫W dρ dσ` for cell masses `q`, `r`.
    pub fn bilinear(&self, q: &[f64], r: &[f64]) -> Result<f64> {
        self.check(q)?;
        self.check(r)?;
        let c = self.table.convolve(r)?;
        let iso: f64 = q.iter().zip(&c).map(|(a, b)| a * b).sum();
        Ok(iso + self.quadratic_part(self.moments(q), self.moments(r)))
    }

    pub fn energy(&self, q: &[f64]) -> Result<f64> {
        self.bilinear(q, q)
    }

    /// Cell averages of `Φ = W * ρ`.
    pub fn potential(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check(q)?;
        let mut phi = self.table.convolve(q)?;
        let (m, s1, s2) = self.moments(q);
        let li = self.spec.lambda_inv2();
        let g = &self.grid;
        let var = g.h * g.h / 12.0;
        let m1 = g.shape[1];
        for (k, p) in phi.iter_mut().enumerate() {
            let x = [g.lo[0] + g.h * ((k / m1) as f64 + 0.5), g.lo[1] + g.h * ((k % m1) as f64 + 0.5)];
            for j in 0..2 {
                *p += 0.5 * self.spec.beta * li[j] * (m * (x[j] * x[j] + var) - 2.0 * x[j] * s1[j] + s2[j]);
            }
        }
        Ok(phi)
    }

    /// `∫∫E_s dμ dμ` with the table's regularization.
    pub fn es_quadratic(&self, q: &[f64]) -> Result<f64> {
        self.check(q)?;
        self.es.quadratic(q)
    }
}

/// Cell averages of an analytic profile (4×4 sub-samples per cell), rescaled
/// to the profile mass.
pub fn project_profile(profile: &MinimizerProfile, grid: &BoxGrid) -> Result<GridField> {
    if profile.dim != grid.dim() || profile.n_particles().is_some() {
        return Err(Error::InvalidSpec("projection needs an analytic profile of the grid dimension".into()));
    }
    let sub: usize = 4;
    let d = grid.dim();
    let mut f = GridField::zeros(grid.clone());
    let nsub = sub.pow(d as u32);
    let mut p = vec![0.0; d];
    for k in 0..grid.len() {
        let c = grid.center(k);
        let mut acc = 0.0;
        for t in 0..nsub {
            let mut r = t;
            for j in 0..d {
                let o = r % sub;
                r /= sub;
                p[j] = c[j] + grid.h * ((o as f64 + 0.5) / sub as f64 - 0.5);
            }
            acc += profile.density(&p);
        }
        f.values[k] = acc / nsub as f64;
    }
    let m = f.integral();
    if !(m > 0.0) {
        return Err(Error::Coverage("profile support misses the grid".into()));
    }
    Ok(f.scaled(profile.mass / m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimizers::explicit_radial_minimizer;

    #[test]
    fn two_particles_quadratic_only() {
        let spec = KernelSpec::isotropic(2, 1.0, 1e-300, 1.0).unwrap().with_delta(1e-3);
        let w = 0.3;
        let x = [0.0, 0.0, 0.6, 0.8];
        let e = interaction_energy(Measure::Cloud { dim: 2, positions: &x, weights: &[w, w] }, &spec).unwrap();
        assert!((e - w * w * 1.0).abs() < 1e-14);
        let e2 = interaction_energy(Measure::Cloud { dim: 2, positions: &x, weights: &[w, 0.5] }, &spec).unwrap();
        assert!((e2 - w * 0.5).abs() < 1e-14);
    }

    #[test]
    fn translation_invariance() {
        let spec = KernelSpec::new(2, 0.75, 1.0, 1.0, vec![1.0, 2.0]).unwrap().with_delta(0.01);
        let x: Vec<f64> = (0..60).map(|i| ((i * 13 % 7) as f64 * 0.37).cos()).collect();
        let y: Vec<f64> = x.chunks(2).flat_map(|p| [p[0] + 3.0, p[1] - 1.0]).collect();
        let w = vec![1.0 / 30.0; 30];
        let a = interaction_energy(Measure::Cloud { dim: 2, positions: &x, weights: &w }, &spec).unwrap();
        let b = interaction_energy(Measure::Cloud { dim: 2, positions: &y, weights: &w }, &spec).unwrap();
        assert!((a - b).abs() < 1e-13 * a.abs());
    }

    #[test]
    fn grid_energy_of_disk_matches_closed_form() {
        // log kernel, uniform disk of radius R and mass m:
        // 𝓔 = m²(1/(8π))(1/2 - 2ln R)·... computed as ∫Φρ with Φ known
        let spec = KernelSpec::isotropic(2, 1.0, 1.0, 1.0).unwrap();
        let prof = explicit_radial_minimizer(&spec, 1.0).unwrap();
        let r = prof.semi_axes()[0];
        let a0 = crate::minimizers::mean_potential(&prof, &spec).unwrap();
        let exact = a0 * 1.0;
        let mut errs = Vec::new();
        for m in [32, 64] {
            let grid = BoxGrid::centered(&[0.0, 0.0], 1.25 * r, m).unwrap();
            let f = project_profile(&prof, &grid).unwrap();
            let e = interaction_energy(Measure::Grid(&f), &spec).unwrap();
            errs.push((e - exact).abs());
        }
        assert!(errs[1] < 2e-3 && errs[1] < errs[0], "{errs:?}");
    }

    #[test]
    fn potential_pairs_with_bilinear_form() {
        let spec = KernelSpec::new(2, 0.75, 1.0, 0.7, vec![1.0, 1.5]).unwrap();
        let grid = BoxGrid::centered(&[0.1, 0.0], 1.0, 12).unwrap();
        let gk = GridKernel::new(&spec, &grid).unwrap();
        let q: Vec<f64> = (0..144).map(|i| ((i * 5 % 13) as f64) * 0.01).collect();
        let r: Vec<f64> = (0..144).map(|i| ((i * 3 % 7) as f64) * 0.02).collect();
        let phi = gk.potential(&r).unwrap();
        let lhs: f64 = q.iter().zip(&phi).map(|(a, b)| a * b).sum();
        let rhs = gk.bilinear(&q, &r).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs());
        let sym = gk.bilinear(&r, &q).unwrap();
        assert!((sym - rhs).abs() < 1e-12 * rhs.abs());
    }
}
