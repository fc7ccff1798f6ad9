//! Grid functions: multi-component complex fields on a [`GridSpec`].
//!
//! A scalar field is a 1-component `GridFn` with (numerically) vanishing
//! imaginary part; a spinor field has `N0` components. Components are
//! stored plane-major so each component is contiguous for the FFT.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::real::{indexed_max, indexed_sum, Real};

pub type C<R> = Complex<R>;

#[derive(Clone, Debug, PartialEq)]
pub struct GridFn<R> {
    pub grid: GridSpec<R>,
    pub comps: usize,
    data: Vec<C<R>>,
}

impl<R: Real> GridFn<R> {
    pub fn zeros(grid: GridSpec<R>, comps: usize) -> Self {
        GridFn {
            grid,
            comps,
            data: vec![C::new(R::zero(), R::zero()); comps * grid.nodes()],
        }
    }

    pub fn from_fn(grid: GridSpec<R>, comps: usize, f: impl Fn(usize, usize) -> C<R>) -> Self {
        let nodes = grid.nodes();
        let mut data = Vec::with_capacity(comps * nodes);
        for c in 0..comps {
            for i in 0..nodes {
                data.push(f(c, i));
            }
        }
        GridFn { grid, comps, data }
    }

    /// Real scalar field from a position closure.
    pub fn scalar_from(grid: GridSpec<R>, f: impl Fn(&[R]) -> R) -> Self {
        GridFn::from_fn(grid, 1, |_, i| {
            C::new(f(&grid.position(i)[..grid.dim]), R::zero())
        })
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.grid.nodes()
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[C<R>] {
        let n = self.nodes();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [C<R>] {
        let n = self.nodes();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn planes_mut(&mut self) -> impl Iterator<Item = &mut [C<R>]> {
        let n = self.grid.nodes();
        self.data.chunks_mut(n)
    }

    #[inline]
    pub fn at(&self, c: usize, idx: usize) -> C<R> {
        self.data[c * self.nodes() + idx]
    }

    #[inline]
    pub fn set(&mut self, c: usize, idx: usize, v: C<R>) {
        let n = self.nodes();
        self.data[c * n + idx] = v;
    }

    /// Components of the field at one node.
    #[inline]
    pub fn gather(&self, idx: usize) -> Vec<C<R>> {
        (0..self.comps).map(|c| self.at(c, idx)).collect()
    }

    pub fn data(&self) -> &[C<R>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C<R>] {
        &mut self.data
    }

    pub fn fill_from(&mut self, other: &GridFn<R>) {
        self.data.copy_from_slice(&other.data);
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: C<R>, other: &GridFn<R>) {
        use rayon::prelude::*;
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .par_chunks_mut(16384)
            .zip(other.data.par_chunks(16384))
            .for_each(|(da, db)| {
                for (a, b) in da.iter_mut().zip(db.iter()) {
                    *a += s * *b;
                }
            });
    }

    pub fn scale(&mut self, s: C<R>) {
        for a in self.data.iter_mut() {
            *a *= s;
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(C<R>) -> C<R> + Sync) {
        use rayon::prelude::*;
        self.data.par_chunks_mut(8192).for_each(|chunk| {
            for v in chunk {
                *v = f(*v);
            }
        });
    }

    /// Pointwise squared modulus summed over components.
    #[inline]
    pub fn abs2_at(&self, idx: usize) -> R {
        let mut s = R::zero();
        for c in 0..self.comps {
            s = s + self.at(c, idx).norm_sqr();
        }
        s
    }

    /// `L^2` norm over the box, `(sum |u|^2 dx^n)^{1/2}`.
    pub fn l2_norm(&self) -> R {
        let vol = self.grid.cell_volume();
        (indexed_sum(self.nodes(), |i| self.abs2_at(i)) * vol).sqrt()
    }

    /// Max over nodes of the pointwise modulus, skipping masked nodes.
    pub fn sup_norm(&self, mask: SupMask) -> R {
        let g = self.grid;
        indexed_max(self.nodes(), |i| {
            if mask.skips(&g, i) {
                R::zero()
            } else {
                self.abs2_at(i)
            }
        })
        .max(R::zero())
        .sqrt()
    }

    pub fn max_imag_abs(&self) -> R {
        indexed_max(self.data.len(), |i| self.data[i].im.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn assert_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }
}

/// Node-skipping rules for sup-norms: the masked origin ball and the
/// outermost boundary shell carry discretization artifacts.
#[derive(Clone, Copy, Debug)]
pub struct SupMask {
    pub skip_origin: bool,
    pub boundary_shell: usize,
}

impl SupMask {
    pub const NONE: SupMask = SupMask {
        skip_origin: false,
        boundary_shell: 0,
    };

    /// Default mask used by all reported sup-norms.
    pub const STANDARD: SupMask = SupMask {
        skip_origin: true,
        boundary_shell: 4,
    };

    #[inline]
    pub fn skips<R: Real>(&self, grid: &GridSpec<R>, idx: usize) -> bool {
        (self.skip_origin && grid.origin_masked(idx))
            || (self.boundary_shell > 0 && grid.boundary_shell(idx, self.boundary_shell))
    }
}

// ---------------------------------------------------------------------
// Checkpoint serialization: flat binary, little-endian f64 payload.
// Header: magic "DKGF", version u32, kind u32, dim u32, points u32,
// comps u32, half_width f64, time f64.
// ---------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"DKGF";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Spinor = 0,
    Scalar = 1,
    ScalarDt = 2,
    WavePotential = 3,
    WavePotentialDt = 4,
}

impl FieldKind {
    fn from_u32(v: u32) -> Result<Self> {
        Ok(match v {
            0 => FieldKind::Spinor,
            1 => FieldKind::Scalar,
            2 => FieldKind::ScalarDt,
            3 => FieldKind::WavePotential,
            4 => FieldKind::WavePotentialDt,
            k => return Err(Error::Checkpoint(format!("unknown field kind {k}"))),
        })
    }
}

pub fn write_field<R: Real, W: std::io::Write>(
    w: &mut W,
    f: &GridFn<R>,
    kind: FieldKind,
    time: R,
) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(kind as u32).to_le_bytes())?;
    w.write_all(&(f.grid.dim as u32).to_le_bytes())?;
    w.write_all(&(f.grid.points as u32).to_le_bytes())?;
    w.write_all(&(f.comps as u32).to_le_bytes())?;
    w.write_all(&f.grid.half_width.as_f64().to_le_bytes())?;
    w.write_all(&time.as_f64().to_le_bytes())?;
    for z in f.data.iter() {
        w.write_all(&z.re.as_f64().to_le_bytes())?;
        w.write_all(&z.im.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field<R: Real, Rd: std::io::Read>(rd: &mut Rd) -> Result<(GridFn<R>, FieldKind, R)> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    rd.read_exact(&mut b4)?;
    if &b4 != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    rd.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(Error::Checkpoint("unsupported version".into()));
    }
    rd.read_exact(&mut b4)?;
    let kind = FieldKind::from_u32(u32::from_le_bytes(b4))?;
    rd.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    rd.read_exact(&mut b4)?;
    let points = u32::from_le_bytes(b4) as usize;
    rd.read_exact(&mut b4)?;
    let comps = u32::from_le_bytes(b4) as usize;
    rd.read_exact(&mut b8)?;
    let half_width = R::lit(f64::from_le_bytes(b8));
    rd.read_exact(&mut b8)?;
    let time = R::lit(f64::from_le_bytes(b8));
    let grid = GridSpec::new(dim, points, half_width)?;
    let mut f = GridFn::zeros(grid, comps);
    for z in f.data_mut() {
        rd.read_exact(&mut b8)?;
        let re = R::lit(f64::from_le_bytes(b8));
        rd.read_exact(&mut b8)?;
        let im = R::lit(f64::from_le_bytes(b8));
        *z = C::new(re, im);
    }
    Ok((f, kind, time))
}
