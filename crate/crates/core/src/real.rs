//! Scalar abstraction: the whole library is generic over the floating
//! point type through [`Real`], with `f64` aliases exported at the crate
//! root. `f32` is supported for smoke-level work; the shipped tolerances
//! assume `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, Signed};
use rustfft::FftNum;

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Signed
    + FftNum
    + Sum<Self>
    + Display
    + LowerExp
    + Debug
{
    /// Lift an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Deterministic pairwise sum. The reduction tree depends only on the
/// length of the input, never on thread scheduling, so reports are
/// bit-identical across runs with any `--threads` setting.
pub fn pairwise_sum<R: Real>(xs: &[R]) -> R {
    match xs.len() {
        0 => R::zero(),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

pub(crate) const SUM_CHUNK: usize = 4096;

/// Deterministic parallel reduction of `f(i)` over `0..len`:
/// fixed-size chunks are summed sequentially (possibly on different
/// threads), then combined pairwise in chunk order.
pub fn indexed_sum<R: Real, F>(len: usize, f: F) -> R
where
    F: Fn(usize) -> R + Sync,
{
    use rayon::prelude::*;
    if len == 0 {
        return R::zero();
    }
    let nchunks = len.div_ceil(SUM_CHUNK);
    let partials: Vec<R> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SUM_CHUNK;
            let hi = (lo + SUM_CHUNK).min(len);
            let mut acc = R::zero();
            for i in lo..hi {
                acc += f(i);
            }
            acc
        })
        .collect();
    pairwise_sum(&partials)
}

/// Deterministic parallel reduction of a small vector of integrands in
/// one pass over `0..len`.
pub fn indexed_sum_array<R: Real, const N: usize, F>(len: usize, f: F) -> [R; N]
where
    F: Fn(usize) -> [R; N] + Sync,
{
    use rayon::prelude::*;
    if len == 0 {
        return [R::zero(); N];
    }
    let nchunks = len.div_ceil(SUM_CHUNK);
    let partials: Vec<[R; N]> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SUM_CHUNK;
            let hi = (lo + SUM_CHUNK).min(len);
            let mut acc = [R::zero(); N];
            for i in lo..hi {
                let v = f(i);
                for k in 0..N {
                    acc[k] += v[k];
                }
            }
            acc
        })
        .collect();
    let mut out = [R::zero(); N];
    for k in 0..N {
        let col: Vec<R> = partials.iter().map(|p| p[k]).collect();
        out[k] = pairwise_sum(&col);
    }
    out
}

/// Deterministic parallel maximum of `f(i)` over `0..len`.
pub fn indexed_max<R: Real, F>(len: usize, f: F) -> R
where
    F: Fn(usize) -> R + Sync,
{
    use rayon::prelude::*;
    if len == 0 {
        return R::zero();
    }
    let nchunks = len.div_ceil(SUM_CHUNK);
    let partials: Vec<R> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * SUM_CHUNK;
            let hi = (lo + SUM_CHUNK).min(len);
            let mut m = R::neg_infinity();
            for i in lo..hi {
                let v = f(i);
                if v > m {
                    m = v;
                }
            }
            m
        })
        .collect();
    partials
        .into_iter()
        .fold(R::neg_infinity(), |a, b| if b > a { b } else { a })
}
