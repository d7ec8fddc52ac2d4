//! Unitary 2-D discrete Fourier transform over `Array2<Complex64>`.
//!
//! Forward: `X[u, v] = (1/√(RC)) Σ x[r, c]·exp(-j2π(ur/R + vc/C))`; the
//! inverse uses the conjugate kernel and the same scale, so both directions
//! preserve the Frobenius norm.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned forward and inverse transforms for one grid shape.
pub struct Dft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Dft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft2")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl Dft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft2 {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
            scale: 1.0 / ((rows * cols) as f64).sqrt(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn forward(&self, x: &Array2<Complex64>) -> Array2<Complex64> {
        self.apply(x, &self.row_fwd, &self.col_fwd)
    }

    pub fn inverse(&self, x: &Array2<Complex64>) -> Array2<Complex64> {
        self.apply(x, &self.row_inv, &self.col_inv)
    }

    fn apply(&self, x: &Array2<Complex64>, row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) -> Array2<Complex64> {
        assert_eq!(x.dim(), (self.rows, self.cols), "Dft2 shape mismatch");
        // Row-major buffer: transform rows in place, then columns through a
        // transposed scratch.
        let mut buf: Vec<Complex64> = x.iter().copied().collect();
        for r in buf.chunks_exact_mut(self.cols) {
            row.process(r);
        }
        let mut t = vec![Complex64::new(0.0, 0.0); buf.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[c * self.rows + r] = buf[r * self.cols + c];
            }
        }
        for c in t.chunks_exact_mut(self.rows) {
            col.process(c);
        }
        for r in 0..self.rows {
            for c in 0..self.cols {
                buf[r * self.cols + c] = t[c * self.rows + r] * self.scale;
            }
        }
        Array2::from_shape_vec((self.rows, self.cols), buf).expect("shape preserved")
    }
}

/// One-shot unitary forward transform of a real grid.
pub fn forward_real(x: &Array2<f64>) -> Array2<Complex64> {
    let (r, c) = x.dim();
    Dft2::new(r, c).forward(&x.mapv(|v| Complex64::new(v, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive(x: &Array2<Complex64>) -> Array2<Complex64> {
        let (rr, cc) = x.dim();
        let s = 1.0 / ((rr * cc) as f64).sqrt();
        Array2::from_shape_fn((rr, cc), |(u, v)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..rr {
                for c in 0..cc {
                    let ph = -2.0 * PI * ((u * r) as f64 / rr as f64 + (v * c) as f64 / cc as f64);
                    acc += x[[r, c]] * Complex64::from_polar(1.0, ph);
                }
            }
            acc * s
        })
    }

    #[test]
    fn matches_direct_sum_and_inverts() {
        let x = Array2::from_shape_fn((6, 10), |(r, c)| {
            Complex64::new((r * 3 + c) as f64 % 7.0 - 3.0, (r as f64 - c as f64) * 0.25)
        });
        let d = Dft2::new(6, 10);
        let fx = d.forward(&x);
        let err: f64 = (&fx - &naive(&x)).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-12);
        let back = d.inverse(&fx);
        assert!((&back - &x).iter().all(|v| v.norm() < 1e-12));
        let e0: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let e1: f64 = fx.iter().map(|v| v.norm_sqr()).sum();
        assert!((e0 - e1).abs() < 1e-10 * e0);
    }
}
