//! Periodic computational box `[-L, L)^n` with an even number of nodes
//! per axis. The box emulates whole space at desk scale: initial data is
//! supported well inside and runs are short enough that nothing wraps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<R> {
    pub dim: usize,
    /// Nodes per axis (even, >= 16).
    pub points: usize,
    /// Half-width `L`; the box is `[-L, L)^dim`.
    pub half_width: R,
}

impl<R: Real> GridSpec<R> {
    pub fn new(dim: usize, points: usize, half_width: R) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if points < 16 || points % 2 != 0 {
            return Err(Error::rejected(format!(
                "points_per_axis must be even and >= 16, got {points}"
            )));
        }
        if half_width <= R::zero() {
            return Err(Error::rejected("half_width must be positive"));
        }
        Ok(GridSpec {
            dim,
            points,
            half_width,
        })
    }

    #[inline]
    pub fn dx(&self) -> R {
        (self.half_width + self.half_width) / R::from_usize(self.points).unwrap()
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Quadrature weight of one node, `dx^dim`.
    #[inline]
    pub fn cell_volume(&self) -> R {
        let dx = self.dx();
        let mut w = dx;
        for _ in 1..self.dim {
            w = w * dx;
        }
        w
    }

    /// Coordinate of node index `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> R {
        -self.half_width + R::from_usize(i).unwrap() * self.dx()
    }

    /// Decompose a flat node index (last axis fastest).
    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; MAX_DIM] {
        let p = self.points;
        let mut out = [0usize; MAX_DIM];
        match self.dim {
            2 => {
                out[0] = idx / p;
                out[1] = idx % p;
            }
            3 => {
                out[2] = idx % p;
                let rest = idx / p;
                out[1] = rest % p;
                out[0] = rest / p;
            }
            _ => unreachable!(),
        }
        out
    }

    /// Spatial position of a flat node index.
    #[inline]
    pub fn position(&self, idx: usize) -> [R; MAX_DIM] {
        let ii = self.unravel(idx);
        let mut x = [R::zero(); MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.coord(ii[a]);
        }
        x
    }

    #[inline]
    pub fn radius(&self, idx: usize) -> R {
        let x = self.position(idx);
        let mut r2 = R::zero();
        for a in 0..self.dim {
            r2 = r2 + x[a] * x[a];
        }
        r2.sqrt()
    }

    /// Signed integer mode number of spectral index `j` along one axis.
    #[inline]
    pub fn mode_number(&self, j: usize) -> isize {
        let p = self.points as isize;
        let j = j as isize;
        if j < p / 2 {
            j
        } else {
            j - p
        }
    }

    /// Angular wavenumber of spectral index `j`: `pi * m / L`.
    #[inline]
    pub fn wavenumber(&self, j: usize) -> R {
        R::PI() * R::from_isize(self.mode_number(j)).unwrap() / self.half_width
    }

    /// Wavevector of a flat spectral index.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [R; MAX_DIM] {
        let ii = self.unravel(idx);
        let mut k = [R::zero(); MAX_DIM];
        for a in 0..self.dim {
            k[a] = self.wavenumber(ii[a]);
        }
        k
    }

    /// Nodes with `r < 2 dx` are excluded from `x/r`-type evaluations.
    #[inline]
    pub fn origin_masked(&self, idx: usize) -> bool {
        self.radius(idx) < self.dx() * R::lit(2.0)
    }

    /// True when the node lies in the outermost `shell` layers of the box.
    #[inline]
    pub fn boundary_shell(&self, idx: usize, shell: usize) -> bool {
        let ii = self.unravel(idx);
        for a in 0..self.dim {
            if ii[a] < shell || ii[a] >= self.points - shell {
                return true;
            }
        }
        false
    }
}

/// Fraction of a node's cell lying in the exterior region `r >= t - 1`.
/// Sharp indicator smoothed over one cell; keeps region quadrature
/// second-order accurate without moving the membership threshold.
#[inline]
pub fn exterior_weight<R: Real>(r: R, t: R, dx: R) -> R {
    let half = R::lit(0.5);
    let f = (r - (t - R::one())) / dx + half;
    f.max(R::zero()).min(R::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::<f64>::new(4, 32, 1.0).is_err());
        assert!(GridSpec::<f64>::new(2, 15, 1.0).is_err());
        assert!(GridSpec::<f64>::new(2, 8, 1.0).is_err());
        assert!(GridSpec::<f64>::new(2, 32, -1.0).is_err());
    }

    #[test]
    fn coords_and_modes() {
        let g = GridSpec::<f64>::new(2, 32, 8.0).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.coord(0), -8.0);
        assert_eq!(g.coord(16), 0.0);
        assert_eq!(g.mode_number(0), 0);
        assert_eq!(g.mode_number(1), 1);
        assert_eq!(g.mode_number(31), -1);
        assert_eq!(g.mode_number(16), -16);
        // k_1 for m = 1 is pi / L
        assert!((g.wavenumber(1) - std::f64::consts::PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn unravel_roundtrip_3d() {
        let g = GridSpec::<f64>::new(3, 16, 4.0).unwrap();
        let idx = (3 * 16 + 5) * 16 + 7;
        assert_eq!(g.unravel(idx)[..3], [3, 5, 7]);
        let x = g.position(idx);
        assert_eq!(x[0], g.coord(3));
        assert_eq!(x[2], g.coord(7));
    }
}
