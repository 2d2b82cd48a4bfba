//! Zero-padded 3-D FFT convolution of spinor slabs with kernel tables.
//!
//! A slab of `n0 x n1 x n2` cells is embedded in a `2n0 x 2n1 x 2n2` box, so
//! the circular convolution with a table indexed by the offset `y - x` (stored
//! modulo the box size) equals the linear one on the original cells.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::spinor::Spinor;

pub type C = Complex64;

pub struct Fft3 {
    pub cells: [usize; 3],
    pub dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("cells", &self.cells).field("dims", &self.dims).finish()
    }
}

/// The five scalar coefficient tables of a kernel without scalar or `ffd`
/// part: `Σ V_j e_j + Ff f + Ffd fd`.
#[derive(Clone, Debug)]
pub struct KernelHat {
    pub v: [Vec<C>; 3],
    pub ff: Vec<C>,
    pub ffd: Vec<C>,
}

/// Real-space kernel table on the padded box.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    pub v: [Vec<f64>; 3],
    pub ff: Vec<f64>,
    pub ffd: Vec<f64>,
}

impl KernelTable {
    pub fn zeros(len: usize) -> Self {
        Self { v: std::array::from_fn(|_| vec![0.0; len]), ff: vec![0.0; len], ffd: vec![0.0; len] }
    }

    /// `self += a * o`.
    pub fn axpy(&mut self, a: f64, o: &KernelTable) {
        let pairs = self.v.iter_mut().zip(o.v.iter()).chain([(&mut self.ff, &o.ff), (&mut self.ffd, &o.ffd)]);
        for (x, y) in pairs {
            for (p, q) in x.iter_mut().zip(y) {
                *p += a * q;
            }
        }
    }
}

/// Spectrum of a spinor slab, one array per real component.
#[derive(Clone, Debug)]
pub struct SlabHat(pub [Vec<C>; 8]);

impl Fft3 {
    pub fn new(cells: [usize; 3]) -> Self {
        let dims = cells.map(|n| 2 * n);
        let mut planner = FftPlanner::new();
        let fwd = dims.map(|d| planner.plan_fft_forward(d));
        let inv = dims.map(|d| planner.plan_fft_inverse(d));
        Self { cells, dims, fwd, inv }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    /// Padded index of the offset `d` (negative offsets wrap).
    #[cfg(test)]
    pub fn offset_index(&self, d: [isize; 3]) -> usize {
        let w = |a: usize| d[a].rem_euclid(self.dims[a] as isize) as usize;
        (w(0) * self.dims[1] + w(1)) * self.dims[2] + w(2)
    }

    fn cell_index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    fn transform(&self, data: &mut [C], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        let [d0, d1, d2] = self.dims;
        plans[2].process(data);
        let mut line = vec![C::default(); d0.max(d1)];
        for i in 0..d0 {
            for l in 0..d2 {
                for j in 0..d1 {
                    line[j] = data[(i * d1 + j) * d2 + l];
                }
                plans[1].process(&mut line[..d1]);
                for j in 0..d1 {
                    data[(i * d1 + j) * d2 + l] = line[j];
                }
            }
        }
        for j in 0..d1 {
            for l in 0..d2 {
                for i in 0..d0 {
                    line[i] = data[(i * d1 + j) * d2 + l];
                }
                plans[0].process(&mut line[..d0]);
                for i in 0..d0 {
                    data[(i * d1 + j) * d2 + l] = line[i];
                }
            }
        }
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<C> {
        let mut d: Vec<C> = x.iter().map(|&r| C::new(r, 0.0)).collect();
        self.transform(&mut d, false);
        d
    }

    pub fn kernel_hat(&self, t: &KernelTable) -> KernelHat {
        KernelHat {
            v: std::array::from_fn(|j| self.forward_real(&t.v[j])),
            ff: self.forward_real(&t.ff),
            ffd: self.forward_real(&t.ffd),
        }
    }

    /// Spectrum of a slab given as `values[cell_index]` in row-major cell order.
    pub fn slab_hat(&self, values: &[Spinor]) -> SlabHat {
        let [n0, n1, n2] = self.cells;
        let len = self.len();
        SlabHat(std::array::from_fn(|comp| {
            let mut d = vec![C::default(); len];
            for i in 0..n0 {
                for j in 0..n1 {
                    for l in 0..n2 {
                        d[self.cell_index([i, j, l])] = C::new(values[(i * n1 + j) * n2 + l][comp], 0.0);
                    }
                }
            }
            self.transform(&mut d, false);
            d
        }))
    }

    pub fn zero_hat(&self) -> SlabHat {
        SlabHat(std::array::from_fn(|_| vec![C::default(); self.len()]))
    }

    /// Inverse transform, returning the cell values in row-major order.
    pub fn slab_values(&self, mut hat: SlabHat) -> Vec<Spinor> {
        let [n0, n1, n2] = self.cells;
        let scale = 1.0 / self.len() as f64;
        let mut out = vec![Spinor::ZERO; n0 * n1 * n2];
        for (comp, d) in hat.0.iter_mut().enumerate() {
            self.transform(d, true);
            for i in 0..n0 {
                for j in 0..n1 {
                    for l in 0..n2 {
                        out[(i * n1 + j) * n2 + l][comp] = d[self.cell_index([i, j, l])].re * scale;
                    }
                }
            }
        }
        out
    }
}

#[inline]
fn e_left_c(j: usize, a: [C; 4]) -> [C; 4] {
    match j {
        0 => [-a[1], a[0], -a[3], a[2]],
        1 => [-a[2], a[3], a[0], -a[1]],
        _ => [-a[3], -a[2], a[1], a[0]],
    }
}

/// `acc += K * src` in the spectral domain, `K` acting on spinors through
/// `(a, b) -> (Ff b + Σ V_j e_j a, Ffd a - Σ V_j e_j b)`.
pub fn accumulate(acc: &mut SlabHat, k: &KernelHat, src: &SlabHat) {
    let len = k.ff.len();
    for i in 0..len {
        let a = [src.0[0][i], src.0[1][i], src.0[2][i], src.0[3][i]];
        let b = [src.0[4][i], src.0[5][i], src.0[6][i], src.0[7][i]];
        let mut up = [C::default(); 4];
        let mut lo = [C::default(); 4];
        for c in 0..4 {
            up[c] = k.ff[i] * b[c];
            lo[c] = k.ffd[i] * a[c];
        }
        for j in 0..3 {
            let v = k.v[j][i];
            let (ea, eb) = (e_left_c(j, a), e_left_c(j, b));
            for c in 0..4 {
                up[c] += v * ea[c];
                lo[c] -= v * eb[c];
            }
        }
        for c in 0..4 {
            acc.0[c][i] += up[c];
            acc.0[4 + c][i] += lo[c];
        }
    }
}
