//! Spectral machinery on the periodic box: per-axis line FFTs, spectral
//! derivatives (default), a 4th-order centered finite-difference
//! fallback, and full transforms for Fourier-multiplier propagators.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{GridFn, C};
use crate::grid::GridSpec;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DerivativeScheme {
    Spectral,
    /// 4th-order centered differences, periodic wrap.
    Fd4,
}

impl Default for DerivativeScheme {
    fn default() -> Self {
        DerivativeScheme::Spectral
    }
}

pub struct SpectralOps<R> {
    pub grid: GridSpec<R>,
    pub scheme: DerivativeScheme,
    fwd: Arc<dyn Fft<R>>,
    inv: Arc<dyn Fft<R>>,
}

impl<R: Real> SpectralOps<R> {
    pub fn new(grid: GridSpec<R>) -> Self {
        Self::with_scheme(grid, DerivativeScheme::Spectral)
    }

    pub fn with_scheme(grid: GridSpec<R>, scheme: DerivativeScheme) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft(grid.points, FftDirection::Forward);
        let inv = planner.plan_fft(grid.points, FftDirection::Inverse);
        SpectralOps {
            grid,
            scheme,
            fwd,
            inv,
        }
    }

    #[inline]
    fn line_stride(&self, axis: usize) -> usize {
        self.grid.points.pow((self.grid.dim - 1 - axis) as u32)
    }

    /// Apply `f` to every line of `plane` along `axis` in chunks; the
    /// closure receives contiguous copies of the lines and a reusable
    /// scratch allocation, and writes them back.
    fn for_each_line(
        &self,
        plane: &mut [C<R>],
        axis: usize,
        f: impl Fn(&mut [C<R>], &mut Vec<C<R>>) + Sync,
    ) {
        let p = self.grid.points;
        let stride = self.line_stride(axis);
        if stride == 1 {
            plane.par_chunks_mut(p * 16).for_each(|chunk| {
                let mut scratch: Vec<C<R>> = Vec::new();
                for line in chunk.chunks_mut(p) {
                    f(line, &mut scratch);
                }
            });
            return;
        }
        // Lines are strided. Consecutive lines within one block sit at
        // consecutive offsets, so gathering a group of them reads
        // contiguous memory per stride step; the group is then handed
        // to the closure as back-to-back lines.
        let nlines = self.grid.nodes() / p;
        struct Ptr<T>(*mut T);
        unsafe impl<T> Sync for Ptr<T> {}
        impl<T: Copy> Ptr<T> {
            #[inline]
            unsafe fn read(&self, i: usize) -> T {
                *self.0.add(i)
            }
            #[inline]
            unsafe fn write(&self, i: usize, v: T) {
                *self.0.add(i) = v;
            }
        }
        let ptr = Ptr(plane.as_mut_ptr());
        let group = 64usize.min(stride);
        // groups never straddle a block boundary: lines l and l+1 share
        // a block iff (l % stride) + 1 < stride
        let mut starts: Vec<(usize, usize)> = Vec::new(); // (first line, count)
        let mut l = 0usize;
        while l < nlines {
            let within = l % stride;
            let room = (stride - within).min(group).min(nlines - l);
            starts.push((l, room));
            l += room;
        }
        starts.par_iter().for_each(|&(first, count)| {
            let zero = Complex::new(R::zero(), R::zero());
            let mut buf: Vec<C<R>> = vec![zero; count * p];
            let mut scratch: Vec<C<R>> = Vec::new();
            let block = first / stride;
            let within = first % stride;
            let base = block * stride * p + within;
            unsafe {
                for i in 0..p {
                    let src = base + i * stride;
                    for c in 0..count {
                        buf[c * p + i] = ptr.read(src + c);
                    }
                }
            }
            for c in 0..count {
                f(&mut buf[c * p..(c + 1) * p], &mut scratch);
            }
            unsafe {
                for i in 0..p {
                    let dst = base + i * stride;
                    for c in 0..count {
                        ptr.write(dst + c, buf[c * p + i]);
                    }
                }
            }
        });
    }

    fn fft_lines(&self, plane: &mut [C<R>], axis: usize, dir: FftDirection) {
        let fft = match dir {
            FftDirection::Forward => self.fwd.clone(),
            FftDirection::Inverse => self.inv.clone(),
        };
        let inv_scale = R::one() / R::from_usize(self.grid.points).unwrap();
        let need = fft.get_inplace_scratch_len();
        self.for_each_line(plane, axis, move |line, scratch| {
            if scratch.len() < need {
                scratch.resize(need, Complex::new(R::zero(), R::zero()));
            }
            fft.process_with_scratch(line, &mut scratch[..need]);
            if dir == FftDirection::Inverse {
                for v in line.iter_mut() {
                    *v = *v * inv_scale;
                }
            }
        });
    }

    /// Spectral partial derivative of one component plane along `axis`.
    fn derivative_plane_spectral(&self, plane: &[C<R>], axis: usize) -> Vec<C<R>> {
        let g = self.grid;
        let mut buf = Vec::with_capacity(plane.len());
        buf.extend_from_slice(plane);
        self.fft_lines(&mut buf, axis, FftDirection::Forward);
        // Multiply line spectra by i*k; kill the Nyquist mode of odd
        // derivatives to keep real fields real.
        let p = g.points;
        let stride = self.line_stride(axis);
        buf.par_chunks_mut(8192).enumerate().for_each(|(ci, chunk)| {
            let base = ci * 8192;
            for (o, v) in chunk.iter_mut().enumerate() {
                let idx = base + o;
                let j = (idx / stride) % p;
                let m = g.mode_number(j);
                if m == -(p as isize) / 2 {
                    *v = Complex::new(R::zero(), R::zero());
                } else {
                    let k = g.wavenumber(j);
                    *v = Complex::new(-v.im * k, v.re * k);
                }
            }
        });
        self.fft_lines(&mut buf, axis, FftDirection::Inverse);
        buf
    }

    fn derivative_plane_fd4(&self, plane: &[C<R>], axis: usize) -> Vec<C<R>> {
        let g = self.grid;
        let p = g.points;
        let stride = self.line_stride(axis);
        let denom = R::lit(12.0) * g.dx();
        let c8 = R::lit(8.0);
        let n = plane.len();
        (0..n)
            .into_par_iter()
            .map(|idx| {
                let j = (idx / stride) % p;
                let shift = |d: isize| {
                    let jn = (j as isize + d).rem_euclid(p as isize) as usize;
                    let base = idx - j * stride;
                    plane[base + jn * stride]
                };
                let num =
                    (shift(-2) - shift(2)) + (shift(1) - shift(-1)) * Complex::new(c8, R::zero());
                num / Complex::new(denom, R::zero())
            })
            .collect()
    }

    pub fn derivative_plane(&self, plane: &[C<R>], axis: usize) -> Vec<C<R>> {
        match self.scheme {
            DerivativeScheme::Spectral => self.derivative_plane_spectral(plane, axis),
            DerivativeScheme::Fd4 => self.derivative_plane_fd4(plane, axis),
        }
    }

    /// Partial derivative `d_a f` of every component.
    pub fn derivative(&self, f: &GridFn<R>, axis: usize) -> Result<GridFn<R>> {
        if axis >= self.grid.dim {
            return Err(Error::rejected(format!(
                "axis {axis} out of range for dim {}",
                self.grid.dim
            )));
        }
        f.assert_finite("derivative input")?;
        let mut out = GridFn::zeros(f.grid, f.comps);
        for c in 0..f.comps {
            let d = self.derivative_plane(f.plane(c), axis);
            out.plane_mut(c).copy_from_slice(&d);
        }
        Ok(out)
    }

    /// All spatial first derivatives: `out[a] = d_a f`.
    pub fn gradient(&self, f: &GridFn<R>) -> Result<Vec<GridFn<R>>> {
        (0..self.grid.dim).map(|a| self.derivative(f, a)).collect()
    }

    /// Laplacian via spectral `-|k|^2` line passes (or FD4 twice).
    pub fn laplacian(&self, f: &GridFn<R>) -> Result<GridFn<R>> {
        match self.scheme {
            DerivativeScheme::Spectral => {
                let g = self.grid;
                let mut out = GridFn::zeros(f.grid, f.comps);
                for c in 0..f.comps {
                    let mut acc = vec![Complex::new(R::zero(), R::zero()); f.nodes()];
                    for axis in 0..g.dim {
                        let mut buf = f.plane(c).to_vec();
                        self.fft_lines(&mut buf, axis, FftDirection::Forward);
                        let p = g.points;
                        let stride = self.line_stride(axis);
                        buf.par_chunks_mut(8192).enumerate().for_each(|(ci, chunk)| {
                            let base = ci * 8192;
                            for (o, v) in chunk.iter_mut().enumerate() {
                                let j = ((base + o) / stride) % p;
                                let k = g.wavenumber(j);
                                *v = *v * (-k * k);
                            }
                        });
                        self.fft_lines(&mut buf, axis, FftDirection::Inverse);
                        for (a, b) in acc.iter_mut().zip(buf.iter()) {
                            *a += *b;
                        }
                    }
                    out.plane_mut(c).copy_from_slice(&acc);
                }
                Ok(out)
            }
            DerivativeScheme::Fd4 => {
                let mut out = GridFn::zeros(f.grid, f.comps);
                for axis in 0..self.grid.dim {
                    let d1 = self.derivative(f, axis)?;
                    let d2 = self.derivative(&d1, axis)?;
                    out.axpy(Complex::new(R::one(), R::zero()), &d2);
                }
                Ok(out)
            }
        }
    }

    /// Full n-D forward transform of every component (unnormalized).
    pub fn to_spectrum(&self, f: &GridFn<R>) -> GridFn<R> {
        let mut out = f.clone();
        self.to_spectrum_inplace(&mut out);
        out
    }

    pub fn to_spectrum_inplace(&self, f: &mut GridFn<R>) {
        for c in 0..f.comps {
            for axis in 0..self.grid.dim {
                self.fft_lines(f.plane_mut(c), axis, FftDirection::Forward);
            }
        }
    }

    /// Full n-D inverse transform (normalized by `1/P` per axis).
    pub fn from_spectrum(&self, f: &GridFn<R>) -> GridFn<R> {
        let mut out = f.clone();
        self.from_spectrum_inplace(&mut out);
        out
    }

    pub fn from_spectrum_inplace(&self, f: &mut GridFn<R>) {
        for c in 0..f.comps {
            for axis in 0..self.grid.dim {
                self.fft_lines(f.plane_mut(c), axis, FftDirection::Inverse);
            }
        }
    }

    /// Parseval factor: `||f||_{L^2}^2 = parseval() * sum_k |fhat_k|^2`
    /// for the unnormalized spectrum produced by [`to_spectrum`].
    pub fn parseval(&self) -> R {
        self.grid.cell_volume() / R::from_usize(self.grid.nodes()).unwrap()
    }
}
