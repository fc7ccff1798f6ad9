//! Randomized analytic test families for the inequality lab.
//!
//! Every family is a closed-form space-time function with hand-coded
//! derivatives, so vector fields can be applied either pointwise (via
//! 2-jets at arbitrary `(t, x)`) or on a grid slice (analytic time
//! derivatives to any order, spatial derivatives spectral). All
//! families decay before the box edge; the integral inequalities
//! require decay and the Hardy-type ones compact support.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::field::GridFn;
use crate::grid::GridSpec;
use crate::jet::FieldJet;
use crate::real::Real;

/// Value, space-time gradient and Hessian at a point; index 0 is time.
#[derive(Clone, Copy, Debug)]
pub struct Jet2<R> {
    pub v: R,
    pub d: [R; 4],
    pub dd: [[R; 4]; 4],
}

impl<R: Real> Jet2<R> {
    pub fn zero() -> Self {
        Jet2 {
            v: R::zero(),
            d: [R::zero(); 4],
            dd: [[R::zero(); 4]; 4],
        }
    }

    pub fn scaled(&self, s: R) -> Self {
        let mut out = *self;
        out.v = out.v * s;
        for i in 0..4 {
            out.d[i] = out.d[i] * s;
            for j in 0..4 {
                out.dd[i][j] = out.dd[i][j] * s;
            }
        }
        out
    }

    pub fn add(&self, o: &Jet2<R>) -> Self {
        let mut out = *self;
        out.v = out.v + o.v;
        for i in 0..4 {
            out.d[i] = out.d[i] + o.d[i];
            for j in 0..4 {
                out.dd[i][j] = out.dd[i][j] + o.dd[i][j];
            }
        }
        out
    }

    /// Product rule to second order.
    pub fn mul(&self, o: &Jet2<R>) -> Self {
        let mut out = Jet2::zero();
        out.v = self.v * o.v;
        for i in 0..4 {
            out.d[i] = self.d[i] * o.v + self.v * o.d[i];
            for j in 0..4 {
                out.dd[i][j] = self.dd[i][j] * o.v
                    + self.d[i] * o.d[j]
                    + self.d[j] * o.d[i]
                    + self.v * o.dd[i][j];
            }
        }
        out
    }
}

/// First-order jet (value and gradient), produced by one vector-field
/// application on a [`Jet2`].
#[derive(Clone, Copy, Debug)]
pub struct Jet1<R> {
    pub v: R,
    pub d: [R; 4],
}

/// `L_a` applied to a 2-jet at `(t, x)`: value and full gradient.
pub fn boost_jet2<R: Real>(j: &Jet2<R>, t: R, x: &[R], a: usize) -> Jet1<R> {
    // L_a w = x_a w_t + t w_a ;
    // d_mu(L_a w) = x_a w_{t mu} + t w_{a mu} + delta_{mu 0} w_a
    //               + delta_{mu a} w_t
    let xa = x[a - 1];
    let mut out = Jet1 {
        v: xa * j.d[0] + t * j.d[a],
        d: [R::zero(); 4],
    };
    for mu in 0..4 {
        let mut dv = xa * j.dd[0][mu] + t * j.dd[a][mu];
        if mu == 0 {
            dv = dv + j.d[a];
        }
        if mu == a {
            dv = dv + j.d[0];
        }
        out.d[mu] = dv;
    }
    out
}

/// `O_ab` applied to a 2-jet.
pub fn rot_jet2<R: Real>(j: &Jet2<R>, x: &[R], a: usize, b: usize) -> Jet1<R> {
    let xa = x[a - 1];
    let xb = x[b - 1];
    let mut out = Jet1 {
        v: xa * j.d[b] - xb * j.d[a],
        d: [R::zero(); 4],
    };
    for mu in 0..4 {
        let mut dv = xa * j.dd[b][mu] - xb * j.dd[a][mu];
        if mu == a {
            dv = dv + j.d[b];
        }
        if mu == b {
            dv = dv - j.d[a];
        }
        out.d[mu] = dv;
    }
    out
}

/// `L_0` applied to a 2-jet.
pub fn scaling_jet2<R: Real>(j: &Jet2<R>, t: R, x: &[R], dim: usize) -> Jet1<R> {
    let mut v = t * j.d[0];
    for c in 1..=dim {
        v = v + x[c - 1] * j.d[c];
    }
    let mut out = Jet1 { v, d: [R::zero(); 4] };
    for mu in 0..4 {
        let mut dv = t * j.dd[0][mu];
        for c in 1..=dim {
            dv = dv + x[c - 1] * j.dd[c][mu];
        }
        if mu == 0 {
            dv = dv + j.d[0];
        } else if mu <= dim {
            dv = dv + j.d[mu];
        }
        out.d[mu] = dv;
    }
    out
}

/// `L_b` applied to a 1-jet (value only survives).
pub fn boost_jet1<R: Real>(j: &Jet1<R>, t: R, x: &[R], b: usize) -> R {
    x[b - 1] * j.d[0] + t * j.d[b]
}

pub fn rot_jet1<R: Real>(j: &Jet1<R>, x: &[R], a: usize, b: usize) -> R {
    x[a - 1] * j.d[b] - x[b - 1] * j.d[a]
}

/// Closed-form 2-jet of `s/t` with `s = sqrt(t^2 - r^2)` (cone interior).
pub fn sigma_jet2<R: Real>(t: R, x: &[R], dim: usize) -> Jet2<R> {
    let mut r2 = R::zero();
    for a in 0..dim {
        r2 = r2 + x[a] * x[a];
    }
    let s2 = t * t - r2;
    let s = s2.sqrt();
    let sig = s / t;
    let mut j = Jet2::zero();
    j.v = sig;
    // d_t sigma = r^2 / (t^2 s) ; d_a sigma = -x_a / (t s)
    j.d[0] = r2 / (t * t * s);
    for a in 1..=dim {
        j.d[a] = -x[a - 1] / (t * s);
    }
    // second derivatives from sigma = sqrt(1 - r^2/t^2):
    // with q = r^2 / t^2, sigma = sqrt(1 - q), derivatives via q.
    let dq = {
        let mut d = [R::zero(); 4];
        d[0] = -R::lit(2.0) * r2 / (t * t * t);
        for a in 1..=dim {
            d[a] = R::lit(2.0) * x[a - 1] / (t * t);
        }
        d
    };
    let mut ddq = [[R::zero(); 4]; 4];
    ddq[0][0] = R::lit(6.0) * r2 / (t * t * t * t);
    for a in 1..=dim {
        ddq[0][a] = -R::lit(4.0) * x[a - 1] / (t * t * t);
        ddq[a][0] = ddq[0][a];
        for b in 1..=dim {
            ddq[a][b] = if a == b {
                R::lit(2.0) / (t * t)
            } else {
                R::zero()
            };
        }
    }
    // sigma = (1-q)^{1/2}: sigma' = -1/(2 sigma), sigma'' = -1/(4 sigma^3)
    let sp = -R::lit(0.5) / sig;
    let spp = -R::lit(0.25) / (sig * sig * sig);
    for mu in 0..4 {
        for nu in 0..4 {
            j.dd[mu][nu] = spp * dq[mu] * dq[nu] + sp * ddq[mu][nu];
        }
    }
    j
}

// ---------------------------------------------------------------------
// Concrete families
// ---------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum Family<R> {
    /// Sum of standing/travelling plane waves on exact grid modes,
    /// multiplied by a radial envelope so integrals converge.
    Waves {
        terms: Vec<WaveTerm<R>>,
        envelope: Envelope<R>,
    },
    /// Gaussian bumps with harmonic time factors.
    Bumps { terms: Vec<BumpTerm<R>> },
    /// Outgoing radial pulse `a f(r - t) chi(r)` with a Gaussian
    /// profile and a radial envelope.
    Outgoing {
        amp: R,
        offset: R,
        width: R,
        envelope: Envelope<R>,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct WaveTerm<R> {
    pub amp: R,
    pub k: [R; 3],
    pub omega: R,
    pub phase: R,
}

#[derive(Clone, Copy, Debug)]
pub struct BumpTerm<R> {
    pub amp: R,
    pub center: [R; 3],
    pub width: R,
    pub tfreq: R,
    pub tphase: R,
}

/// Radial super-Gaussian envelope `exp(-(r/r0)^4)`.
#[derive(Clone, Copy, Debug)]
pub struct Envelope<R> {
    pub r0: R,
}

impl<R: Real> Envelope<R> {
    fn jet2(&self, x: &[R], dim: usize) -> Jet2<R> {
        let mut r2 = R::zero();
        for a in 0..dim {
            r2 = r2 + x[a] * x[a];
        }
        let r04 = self.r0 * self.r0 * self.r0 * self.r0;
        let u = r2 * r2 / r04; // (r/r0)^4
        let e = (-u).exp();
        let mut j = Jet2::zero();
        j.v = e;
        // du/dx_a = 4 r2 x_a / r0^4
        let mut du = [R::zero(); 4];
        for a in 1..=dim {
            du[a] = R::lit(4.0) * r2 * x[a - 1] / r04;
        }
        let mut ddu = [[R::zero(); 4]; 4];
        for a in 1..=dim {
            for b in 1..=dim {
                let mut v = R::lit(8.0) * x[a - 1] * x[b - 1] / r04;
                if a == b {
                    v = v + R::lit(4.0) * r2 / r04;
                }
                ddu[a][b] = v;
            }
        }
        for mu in 0..4 {
            j.d[mu] = -e * du[mu];
            for nu in 0..4 {
                j.dd[mu][nu] = e * (du[mu] * du[nu] - ddu[mu][nu]);
            }
        }
        j
    }
}

impl<R: Real> Family<R> {
    /// Pointwise 2-jet at `(t, x)`.
    pub fn jet2(&self, t: R, x: &[R], dim: usize) -> Jet2<R> {
        match self {
            Family::Waves { terms, envelope } => {
                let mut acc = Jet2::zero();
                for w in terms {
                    let mut phase = w.phase - w.omega * t;
                    for a in 0..dim {
                        phase = phase + w.k[a] * x[a];
                    }
                    let mut j = Jet2::zero();
                    let (sn, cs) = (phase.sin(), phase.cos());
                    j.v = w.amp * cs;
                    let coef = |mu: usize| if mu == 0 { -w.omega } else { w.k[mu - 1] };
                    for mu in 0..=dim {
                        j.d[mu] = -w.amp * sn * coef(mu);
                        for nu in 0..=dim {
                            j.dd[mu][nu] = -w.amp * cs * coef(mu) * coef(nu);
                        }
                    }
                    acc = acc.add(&j);
                }
                acc.mul(&envelope.jet2(x, dim))
            }
            Family::Bumps { terms } => {
                let mut acc = Jet2::zero();
                for b in terms {
                    let mut j = Jet2::zero();
                    let mut d2 = R::zero();
                    for a in 0..dim {
                        let d = x[a] - b.center[a];
                        d2 = d2 + d * d;
                    }
                    let w2 = b.width * b.width;
                    let e = (-d2 / w2).exp();
                    let ph = b.tfreq * t + b.tphase;
                    let (cs, sn) = (ph.cos(), ph.sin());
                    j.v = b.amp * e * cs;
                    // spatial derivatives of e, time of cos
                    let mut de = [R::zero(); 4];
                    for a in 1..=dim {
                        de[a] = -R::lit(2.0) * (x[a - 1] - b.center[a - 1]) / w2;
                    }
                    // value derivatives
                    j.d[0] = -b.amp * e * sn * b.tfreq;
                    for a in 1..=dim {
                        j.d[a] = b.amp * e * de[a] * cs;
                    }
                    j.dd[0][0] = -b.amp * e * cs * b.tfreq * b.tfreq;
                    for a in 1..=dim {
                        j.dd[0][a] = -b.amp * e * de[a] * sn * b.tfreq;
                        j.dd[a][0] = j.dd[0][a];
                        for c in 1..=dim {
                            let mut v = de[a] * de[c];
                            if a == c {
                                v = v - R::lit(2.0) / w2;
                            }
                            j.dd[a][c] = b.amp * e * v * cs;
                        }
                    }
                    acc = acc.add(&j);
                }
                acc
            }
            Family::Outgoing {
                amp,
                offset,
                width,
                envelope,
            } => {
                let mut r2 = R::zero();
                for a in 0..dim {
                    r2 = r2 + x[a] * x[a];
                }
                let r = r2.sqrt().max(R::lit(1e-9));
                let u = r - t - *offset;
                let w2 = *width * *width;
                let f = (-u * u / w2).exp();
                let fp = -R::lit(2.0) * u / w2 * f;
                let fpp = (R::lit(4.0) * u * u / (w2 * w2) - R::lit(2.0) / w2) * f;
                // jets of u(t,x) = r - t - z0
                let mut dj = [R::zero(); 4];
                dj[0] = -R::one();
                for a in 1..=dim {
                    dj[a] = x[a - 1] / r;
                }
                let mut ddj = [[R::zero(); 4]; 4];
                for a in 1..=dim {
                    for b in 1..=dim {
                        let mut v = -x[a - 1] * x[b - 1] / (r * r * r);
                        if a == b {
                            v = v + R::one() / r;
                        }
                        ddj[a][b] = v;
                    }
                }
                let mut j = Jet2::zero();
                j.v = *amp * f;
                for mu in 0..4 {
                    j.d[mu] = *amp * fp * dj[mu];
                    for nu in 0..4 {
                        j.dd[mu][nu] = *amp * (fpp * dj[mu] * dj[nu] + fp * ddj[mu][nu]);
                    }
                }
                j.mul(&envelope.jet2(x, dim))
            }
        }
    }

    /// Analytic `q`-th time derivative at `(t, x)` (value only).
    pub fn time_derivative(&self, t: R, x: &[R], dim: usize, q: usize) -> R {
        match self {
            Family::Waves { terms, envelope } => {
                let env = envelope.jet2(x, dim).v;
                let mut acc = R::zero();
                for w in terms {
                    let mut phase = w.phase - w.omega * t;
                    for a in 0..dim {
                        phase = phase + w.k[a] * x[a];
                    }
                    // d^q/dt^q cos(phase(t)) with phase' = -omega
                    let omq = (-w.omega).powi(q as i32);
                    let v = match q % 4 {
                        0 => phase.cos(),
                        1 => -phase.sin(),
                        2 => -phase.cos(),
                        _ => phase.sin(),
                    };
                    acc = acc + w.amp * omq * v;
                }
                acc * env
            }
            Family::Bumps { terms } => {
                let mut acc = R::zero();
                for b in terms {
                    let mut d2 = R::zero();
                    for a in 0..dim {
                        let d = x[a] - b.center[a];
                        d2 = d2 + d * d;
                    }
                    let e = (-d2 / (b.width * b.width)).exp();
                    let ph = b.tfreq * t + b.tphase;
                    let fq = b.tfreq.powi(q as i32);
                    let v = match q % 4 {
                        0 => ph.cos(),
                        1 => -ph.sin(),
                        2 => -ph.cos(),
                        _ => ph.sin(),
                    };
                    acc = acc + b.amp * e * fq * v;
                }
                acc
            }
            Family::Outgoing {
                amp,
                offset,
                width,
                envelope,
            } => {
                let mut r2 = R::zero();
                for a in 0..dim {
                    r2 = r2 + x[a] * x[a];
                }
                let r = r2.sqrt();
                let u = r - t - *offset;
                let w2 = *width * *width;
                let f = (-u * u / w2).exp();
                // d^q/dt^q f(r - t - z0) = (-1)^q f^{(q)}(u)
                let fq = match q {
                    0 => f,
                    1 => -R::lit(2.0) * u / w2 * f,
                    2 => (R::lit(4.0) * u * u / (w2 * w2) - R::lit(2.0) / w2) * f,
                    3 => {
                        (-R::lit(8.0) * u * u * u / (w2 * w2 * w2)
                            + R::lit(12.0) * u / (w2 * w2))
                            * f
                    }
                    4 => {
                        (R::lit(16.0) * u.powi(4) / (w2 * w2 * w2 * w2)
                            - R::lit(48.0) * u * u / (w2 * w2 * w2)
                            + R::lit(12.0) / (w2 * w2))
                            * f
                    }
                    _ => panic!("time derivatives beyond order 4 not provided"),
                };
                let sign = if q % 2 == 0 { R::one() } else { -R::one() };
                *amp * sign * fq * envelope.jet2(x, dim).v
            }
        }
    }

    /// Build a grid-slice time jet (value plus analytic time
    /// derivatives) for the vector-field machinery.
    pub fn field_jet(&self, grid: GridSpec<R>, t: R, depth: usize) -> FieldJet<R> {
        let dim = grid.dim;
        let mut orders = Vec::with_capacity(depth + 1);
        for q in 0..=depth {
            let f = GridFn::from_fn(grid, 1, |_, i| {
                let x = grid.position(i);
                num_complex::Complex::new(self.time_derivative(t, &x[..dim], dim, q), R::zero())
            });
            orders.push(f);
        }
        FieldJet { t, orders }
    }
}

/// Draw a random family of the given kind; amplitudes O(1). The wave
/// mode cap is passed explicitly so that refinement studies re-evaluate
/// identical functions at higher resolution.
pub fn sample_family<R: Real>(
    rng: &mut ChaCha8Rng,
    grid: GridSpec<R>,
    kind: usize,
    max_mode: isize,
) -> Family<R> {
    let dim = grid.dim;
    let l = grid.half_width.as_f64();
    let envelope = Envelope {
        r0: R::lit(0.45 * l),
    };
    match kind % 3 {
        0 => {
            let nterms = rng.gen_range(2..=4);
            let max_mode = max_mode.max(1);
            let terms = (0..nterms)
                .map(|_| {
                    let mut k = [R::zero(); 3];
                    for a in 0..dim {
                        let m = rng.gen_range(-max_mode..=max_mode);
                        k[a] = R::PI() * R::from_isize(m).unwrap() / grid.half_width;
                    }
                    WaveTerm {
                        amp: R::lit(rng.gen_range(-1.0..1.0)),
                        k,
                        omega: R::lit(rng.gen_range(0.3..2.0)),
                        phase: R::lit(rng.gen_range(0.0..6.28)),
                    }
                })
                .collect();
            Family::Waves { terms, envelope }
        }
        1 => {
            let nterms = rng.gen_range(2..=4);
            let terms = (0..nterms)
                .map(|_| {
                    let mut center = [R::zero(); 3];
                    for a in 0..dim {
                        center[a] = R::lit(rng.gen_range(-0.3 * l..0.3 * l));
                    }
                    BumpTerm {
                        amp: R::lit(rng.gen_range(-1.0..1.0)),
                        center,
                        width: R::lit(rng.gen_range(1.0..2.5)),
                        tfreq: R::lit(rng.gen_range(0.2..1.5)),
                        tphase: R::lit(rng.gen_range(0.0..6.28)),
                    }
                })
                .collect();
            Family::Bumps { terms }
        }
        _ => Family::Outgoing {
            amp: R::lit(rng.gen_range(0.2..1.0)),
            offset: R::lit(rng.gen_range(1.0..3.0)),
            width: R::lit(rng.gen_range(0.8..1.6)),
            envelope,
        },
    }
}
