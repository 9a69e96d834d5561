//! Stress, momentum, continuity and interface residuals.
//!
//! The operators are written once against [`Algebra`], which is implemented
//! both by the tape (differentiable) and by plain `f64` arithmetic. Both
//! backends perform the same floating-point operations in the same order.

use crate::net::FlowJets;
use crate::tape::{Tape, Var};

/// Slots of `u`, `v`, `p`, each ordered val, dx, dy, dt, dxx, dxy, dyy.
pub type FlowSlots<V> = [[V; 7]; 3];

const U: usize = 0;
const V: usize = 1;
const P: usize = 2;
const VAL: usize = 0;
const DX: usize = 1;
const DY: usize = 2;
const DT: usize = 3;
const DXX: usize = 4;
const DXY: usize = 5;
const DYY: usize = 6;

pub trait Algebra {
    type V: Copy;
    fn mul(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn add_const(&mut self, a: Self::V, c: f64) -> Self::V;
    /// `sum_i c_i a_i`, accumulated left to right from zero.
    fn lincomb(&mut self, terms: &[(Self::V, f64)]) -> Self::V;
}

impl Algebra for Tape {
    type V = Var;
    fn mul(&mut self, a: Var, b: Var) -> Var {
        Tape::mul(self, a, b)
    }
    fn add_const(&mut self, a: Var, c: f64) -> Var {
        Tape::add_const(self, a, c)
    }
    fn lincomb(&mut self, terms: &[(Var, f64)]) -> Var {
        Tape::lincomb(self, terms)
    }
}

/// Plain double-precision arithmetic.
pub struct Plain;

impl Algebra for Plain {
    type V = f64;
    fn mul(&mut self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn add_const(&mut self, a: f64, c: f64) -> f64 {
        a + c
    }
    fn lincomb(&mut self, terms: &[(f64, f64)]) -> f64 {
        let mut acc = 0.0;
        for &(v, c) in terms {
            acc += c * v;
        }
        acc
    }
}

/// Density and viscosity of one phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseParams {
    pub rho: f64,
    pub mu: f64,
}

impl PhaseParams {
    pub const UNIT: PhaseParams = PhaseParams { rho: 1.0, mu: 1.0 };
}

impl FlowJets {
    pub fn slots(&self) -> FlowSlots<Var> {
        [self.u.slots(), self.v.slots(), self.p.slots()]
    }
}

/// Traction `sigma n` with `sigma = -p I + mu (grad v + grad v^T)`.
pub fn stress_apply<A: Algebra>(alg: &mut A, s: &FlowSlots<A::V>, mu: f64, n: [f64; 2]) -> [A::V; 2] {
    let [nx, ny] = n;
    [
        alg.lincomb(&[
            (s[P][VAL], -nx),
            (s[U][DX], 2.0 * mu * nx),
            (s[U][DY], mu * ny),
            (s[V][DX], mu * ny),
        ]),
        alg.lincomb(&[
            (s[U][DY], mu * nx),
            (s[V][DX], mu * nx),
            (s[P][VAL], -ny),
            (s[V][DY], 2.0 * mu * ny),
        ]),
    ]
}

/// `rho (dv/dt + (v . grad) v) - div sigma - f`.
pub fn momentum_residual<A: Algebra>(
    alg: &mut A,
    s: &FlowSlots<A::V>,
    params: PhaseParams,
    f: [f64; 2],
) -> [A::V; 2] {
    let PhaseParams { rho, mu } = params;
    let (u, v) = (s[U][VAL], s[V][VAL]);
    let uux = alg.mul(u, s[U][DX]);
    let vuy = alg.mul(v, s[U][DY]);
    let uvx = alg.mul(u, s[V][DX]);
    let vvy = alg.mul(v, s[V][DY]);
    let rx = alg.lincomb(&[
        (s[U][DT], rho),
        (uux, rho),
        (vuy, rho),
        (s[P][DX], 1.0),
        (s[U][DXX], -2.0 * mu),
        (s[U][DYY], -mu),
        (s[V][DXY], -mu),
    ]);
    let ry = alg.lincomb(&[
        (s[V][DT], rho),
        (uvx, rho),
        (vvy, rho),
        (s[P][DY], 1.0),
        (s[V][DXX], -mu),
        (s[V][DYY], -2.0 * mu),
        (s[U][DXY], -mu),
    ]);
    [alg.add_const(rx, -f[0]), alg.add_const(ry, -f[1])]
}

/// `du/dx + dv/dy`.
pub fn divergence_residual<A: Algebra>(alg: &mut A, s: &FlowSlots<A::V>) -> A::V {
    alg.lincomb(&[(s[U][DX], 1.0), (s[V][DY], 1.0)])
}

/// Velocity jump `v1 - v2 - g1` and traction jump `sigma1 n1 + sigma2 n2 - g2`
/// with `n2 = -n1`.
#[allow(clippy::too_many_arguments)]
pub fn interface_residuals<A: Algebra>(
    alg: &mut A,
    s1: &FlowSlots<A::V>,
    s2: &FlowSlots<A::V>,
    mu1: f64,
    mu2: f64,
    n1: [f64; 2],
    g1: [f64; 2],
    g2: [f64; 2],
) -> ([A::V; 2], [A::V; 2]) {
    let du = alg.lincomb(&[(s1[U][VAL], 1.0), (s2[U][VAL], -1.0)]);
    let dv = alg.lincomb(&[(s1[V][VAL], 1.0), (s2[V][VAL], -1.0)]);
    let t1 = stress_apply(alg, s1, mu1, n1);
    let t2 = stress_apply(alg, s2, mu2, n1);
    let tx = alg.lincomb(&[(t1[0], 1.0), (t2[0], -1.0)]);
    let ty = alg.lincomb(&[(t1[1], 1.0), (t2[1], -1.0)]);
    (
        [alg.add_const(du, -g1[0]), alg.add_const(dv, -g1[1])],
        [alg.add_const(tx, -g2[0]), alg.add_const(ty, -g2[1])],
    )
}
