//! Cell-pair averaged kernels on uniform 2-D grids.
//!
//! For piecewise-constant fields with cell masses `q`, any radial kernel `K`
//! gives `∫∫K(x - y)dμ(x)dμ(y) = Σ_{c,c'} q_c q_{c'} K̄(c - c')` where `K̄` is the
//! average of `K` over a pair of cells. The offset `x - y` between uniform
//! points of two cells has the tent density `(1 - |u|)(1 - |v|)` on `[-1, 1]²`
//! around the cell offset.

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, tanh_sinh};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

#[derive(Debug, Clone)]
pub struct KernelTable {
    pub shape: [usize; 2],
    pub h: f64,
    /// `K̄(di, dj)` for `0 ≤ di < shape[0]`, `0 ≤ dj < shape[1]`.
    quarter: Vec<f64>,
    pad: [usize; 2],
    spectrum: Vec<Complex<f64>>,
}

fn unit_square_gl(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (x.iter().map(|v| 0.5 * (v + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
}

/// Integral of `f(a, b)` over `[0,1]²` when `f` may be singular at the origin
/// (Duffy splitting, tanh-sinh in the radial variable).
fn corner_integral<F: Fn(f64, f64) -> f64>(f: &F) -> Result<f64> {
    let (eta, weta) = unit_square_gl(24);
    let mut total = 0.0;
    for (e, we) in eta.iter().zip(&weta) {
        for swap in [false, true] {
            let r = tanh_sinh(
                |_, xi, _| {
                    let (a, b) = if swap { (xi * e, xi) } else { (xi, xi * e) };
                    xi * f(a, b)
                },
                0.0,
                1.0,
                1e-13,
                1e-15,
            );
            if !r.converged && r.error > 1e-10 * r.value.abs().max(1e-300) {
                return Err(Error::Quadrature(format!("singular cell integral, error {:.2e}", r.error)));
            }
            total += we * r.value;
        }
    }
    Ok(total)
}

/// Local coordinate of the kernel singularity along one axis of a quadrant.
fn singular_at(d: f64, sign: f64) -> Option<f64> {
    if d == 0.0 {
        Some(0.0)
    } else if d == 1.0 && sign < 0.0 {
        Some(1.0)
    } else {
        None
    }
}

impl KernelTable {
    /// Builds `K̄` for a radial kernel given as a function of `|x|²`.
    /// `singular` selects Duffy quadrature for the cell pairs that touch.
    pub fn new<F: Fn(f64) -> f64>(shape: [usize; 2], h: f64, kernel: F, singular: bool) -> Result<Self> {
        if !(h > 0.0) || shape[0] == 0 || shape[1] == 0 {
            return Err(Error::InvalidSpec("kernel table needs h > 0 and a non-empty grid".into()));
        }
        let g8 = unit_square_gl(8);
        let g4 = unit_square_gl(4);
        let mut quarter = vec![0.0; shape[0] * shape[1]];
        for di in 0..shape[0] {
            for dj in 0..shape[1] {
                let (d1, d2) = (di as f64, dj as f64);
                let near = singular && di <= 1 && dj <= 1;
                let mut acc = 0.0;
                // quadrants of the tent support, each a unit square
                for (su, sv) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                    // local coordinates a, b ∈ [0,1] measured from the origin of [-1,1]²
                    let eval = |a: f64, b: f64| -> f64 {
                        let (u, v) = (su * a, sv * b);
                        let (x, y) = (h * (d1 + u), h * (d2 + v));
                        (1.0 - a) * (1.0 - b) * kernel(x * x + y * y)
                    };
                    if near {
                        if let (Some(ca), Some(cb)) = (singular_at(d1, su), singular_at(d2, sv)) {
                            // reflect so that the singular corner sits at (0, 0)
                            let g = |p: f64, q: f64| eval(if ca == 0.0 { p } else { 1.0 - p }, if cb == 0.0 { q } else { 1.0 - q });
                            acc += corner_integral(&g)?;
                            continue;
                        }
                    }
                    let (x, w) = if di.max(dj) <= 4 { &g8 } else { &g4 };
                    for (a, wa) in x.iter().zip(w) {
                        for (b, wb) in x.iter().zip(w) {
                            acc += wa * wb * eval(*a, *b);
                        }
                    }
                }
                quarter[di * shape[1] + dj] = acc;
            }
        }
        Self::from_quarter(shape, h, quarter)
    }

    fn from_quarter(shape: [usize; 2], h: f64, quarter: Vec<f64>) -> Result<Self> {
        if quarter.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature("non-finite kernel table entry".into()));
        }
        let pad = [2 * shape[0], 2 * shape[1]];
        let mut spec = vec![Complex::new(0.0, 0.0); pad[0] * pad[1]];
        for i in -(shape[0] as isize - 1)..shape[0] as isize {
            for j in -(shape[1] as isize - 1)..shape[1] as isize {
                let k = quarter[i.unsigned_abs() * shape[1] + j.unsigned_abs()];
                let pi = i.rem_euclid(pad[0] as isize) as usize;
                let pj = j.rem_euclid(pad[1] as isize) as usize;
                spec[pi * pad[1] + pj] = Complex::new(k, 0.0);
            }
        }
        fft2(&mut spec, pad, false);
        Ok(KernelTable { shape, h, quarter, pad, spectrum: spec })
    }

    /// `a·A + b·B` on the same grid.
    pub fn combine(a: f64, ta: &KernelTable, b: f64, tb: &KernelTable) -> Result<Self> {
        if ta.shape != tb.shape || ta.h != tb.h {
            return Err(Error::InvalidSpec("kernel tables differ in grid".into()));
        }
        let q = ta.quarter.iter().zip(&tb.quarter).map(|(x, y)| a * x + b * y).collect();
        Self::from_quarter(ta.shape, ta.h, q)
    }

    pub fn entry(&self, di: isize, dj: isize) -> f64 {
        self.quarter[di.unsigned_abs() * self.shape[1] + dj.unsigned_abs()]
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.shape[0] * self.shape[1] {
            return Err(Error::InvalidSpec("field does not match the kernel table grid".into()));
        }
        Ok(())
    }

    /// `(K̄ * q)_c = Σ_{c'} K̄(c - c') q_{c'}`.
    pub fn convolve(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check(q)?;
        let [m0, m1] = self.shape;
        let [p0, p1] = self.pad;
        let mut buf = vec![Complex::new(0.0, 0.0); p0 * p1];
        for i in 0..m0 {
            for j in 0..m1 {
                buf[i * p1 + j].re = q[i * m1 + j];
            }
        }
        fft2(&mut buf, self.pad, false);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        fft2(&mut buf, self.pad, true);
        let scale = 1.0 / (p0 * p1) as f64;
        let mut out = vec![0.0; m0 * m1];
        for i in 0..m0 {
            for j in 0..m1 {
                out[i * m1 + j] = buf[i * p1 + j].re * scale;
            }
        }
        Ok(out)
    }

    /// `Σ q_c q_{c'} K̄(c - c')`.
    pub fn quadratic(&self, q: &[f64]) -> Result<f64> {
        let c = self.convolve(q)?;
        Ok(q.iter().zip(&c).map(|(a, b)| a * b).sum())
    }

    /// Direct `O(M⁴)` evaluation, for testing the FFT path.
    pub fn quadratic_direct(&self, q: &[f64]) -> Result<f64> {
        self.check(q)?;
        let [m0, m1] = self.shape;
        let mut acc = 0.0;
        for a in 0..m0 * m1 {
            if q[a] == 0.0 {
                continue;
            }
            let (ai, aj) = ((a / m1) as isize, (a % m1) as isize);
            for b in 0..m0 * m1 {
                let (bi, bj) = ((b / m1) as isize, (b % m1) as isize);
                acc += q[a] * q[b] * self.entry(ai - bi, aj - bj);
            }
        }
        Ok(acc)
    }
}

fn fft2(data: &mut [Complex<f64>], pad: [usize; 2], inverse: bool) {
    let [p0, p1] = pad;
    let mut planner = FftPlanner::new();
    let (rows, cols) = if inverse {
        (planner.plan_fft_inverse(p1), planner.plan_fft_inverse(p0))
    } else {
        (planner.plan_fft_forward(p1), planner.plan_fft_forward(p0))
    };
    rows.process(data);
    let mut col = vec![Complex::new(0.0, 0.0); p0];
    for j in 0..p1 {
        for i in 0..p0 {
            col[i] = data[i * p1 + j];
        }
        cols.process(&mut col);
        for i in 0..p0 {
            data[i * p1 + j] = col[i];
        }
    }
}
