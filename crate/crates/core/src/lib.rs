//! Numerical laboratory for the Dirac-Klein-Gordon system
//!
//! ```text
//!   i g^u d_u psi + M psi = v psi
//!   -Box v + v            = psi^* g^0 psi
//! ```
//!
//! on a periodic box emulating `R^n` (`n = 2` with `M = 0`, `n = 3` with
//! `M in [0, 1]`), with data posed at `t = 2`. The library evolves the
//! coupled system pseudospectrally and measures the structures that
//! govern its long-time behavior: weighted exterior energies, ghost
//! space-time norms, light-cone flux, truncated-hyperboloid energies,
//! spinor projections, nonlinear transforms, pointwise decay exponents,
//! and scattering tails.
//!
//! The core is generic over the scalar type through [`real::Real`];
//! concrete `f64` aliases are exported below.

pub mod acceptance;
pub mod clifford;
pub mod config;
pub mod driver;
pub mod error;
pub mod fft;
pub mod field;
pub mod foliation;
pub mod functionals;
pub mod grid;
pub mod ineq;
pub mod jet;
pub mod real;
pub mod scattering;
pub mod solver;
pub mod state;
pub mod transforms;

pub use error::{Error, Result};
pub use real::Real;

// Concrete f64 aliases used by the CLI and the acceptance suite.
pub type Scalar = f64;
pub type GridSpec = grid::GridSpec<Scalar>;
pub type GridFn = field::GridFn<Scalar>;
pub type SpectralOps = fft::SpectralOps<Scalar>;
pub type GammaRep = clifford::GammaRep<Scalar>;
pub type Spinor = clifford::Spinor<Scalar>;
pub type SimState = state::SimState<Scalar>;
pub type History = solver::History<Scalar>;
pub type FieldJet = jet::FieldJet<Scalar>;
pub type FunctionalParams = functionals::FunctionalParams<Scalar>;
