//! Jet-mode evaluation of networks on a tape.

use super::{layer_spans, Mlp};
use crate::tape::{slot, Block, JetOrder, Tape, Var};

/// A field value with its input derivatives, each a tape node.
///
/// Slots beyond the evaluated [`JetOrder`] hold a shared zero constant.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub val: Var,
    pub dx: Var,
    pub dy: Var,
    pub dt: Var,
    pub dxx: Var,
    pub dxy: Var,
    pub dyy: Var,
}

impl Jet {
    pub fn from_slots(s: [Var; 7]) -> Self {
        Jet {
            val: s[slot::VAL],
            dx: s[slot::DX],
            dy: s[slot::DY],
            dt: s[slot::DT],
            dxx: s[slot::DXX],
            dxy: s[slot::DXY],
            dyy: s[slot::DYY],
        }
    }

    /// Jet of known numbers, recorded as constants.
    pub fn constant(tape: &mut Tape, s: [f64; 7]) -> Self {
        Jet::from_slots(s.map(|v| tape.constant(v)))
    }

    pub fn slots(&self) -> [Var; 7] {
        [
            self.val, self.dx, self.dy, self.dt, self.dxx, self.dxy, self.dyy,
        ]
    }

    pub fn values(&self) -> [f64; 7] {
        self.slots().map(|v| v.value())
    }
}

/// Velocity and pressure jets at one point.
#[derive(Clone, Copy, Debug)]
pub struct FlowJets {
    pub u: Jet,
    pub v: Jet,
    pub p: Jet,
}

/// Anything that produces flow jets on a tape: trained networks, or closed
/// form fields used as oracles.
pub trait FlowModel {
    fn eval(&self, tape: &mut Tape, points: &[[f64; 3]], order: JetOrder) -> Vec<FlowJets>;
}

/// A network whose parameters are recorded as one leaf block on a tape.
#[derive(Clone, Copy, Debug)]
pub struct BoundMlp<'a> {
    net: &'a Mlp,
    params: Block,
}

impl Mlp {
    /// Records the parameters as leaves so gradients can be read back.
    pub fn bind<'a>(&'a self, tape: &mut Tape) -> BoundMlp<'a> {
        BoundMlp {
            net: self,
            params: tape.leaf_block(&self.params),
        }
    }

    /// Jets of `(u, v, p)` at a single point.
    pub fn forward_jet(&self, tape: &mut Tape, point: [f64; 3]) -> FlowJets {
        self.bind(tape).eval(tape, &[point], JetOrder::Second)[0]
    }
}

impl BoundMlp<'_> {
    /// Parameter leaves, laid out like [`Mlp::params`].
    pub fn params(&self) -> Block {
        self.params
    }

    pub fn net(&self) -> &Mlp {
        self.net
    }
}

impl FlowModel for BoundMlp<'_> {
    fn eval(&self, tape: &mut Tape, points: &[[f64; 3]], order: JetOrder) -> Vec<FlowJets> {
        if points.is_empty() {
            return Vec::new();
        }
        let k = order.lanes();
        let n = points.len();
        let lanes = n * k;
        let mut seed = vec![0.0; 3 * lanes];
        for (c, row) in seed.chunks_exact_mut(lanes).enumerate() {
            for (p, pt) in points.iter().enumerate() {
                row[p * k] = pt[c];
                if k > 1 {
                    row[p * k + 1 + c] = 1.0;
                }
            }
        }
        let mut act = tape.leaf_block(&seed);
        let spans = layer_spans(&self.net.shape);
        let last = spans.len() - 1;
        for (l, span) in spans.iter().enumerate() {
            let w = Block {
                start: self.params.start + span.weight,
                len: span.n_in * span.n_out,
            };
            let b = Block {
                start: self.params.start + span.bias,
                len: span.n_out,
            };
            act = tape.affine(act, w, b, span.n_out, n, order);
            if l != last {
                act = tape.tanh_jet(act, n, order);
            }
        }
        let zero = tape.constant(0.0);
        let field = |tape: &Tape, o: usize, p: usize| {
            let mut s = [zero; 7];
            for (c, slot) in s.iter_mut().enumerate().take(k) {
                *slot = tape.var_at(act.start + o * lanes + p * k + c);
            }
            Jet::from_slots(s)
        };
        (0..n)
            .map(|p| FlowJets {
                u: field(tape, 0, p),
                v: field(tape, 1, p),
                p: field(tape, 2, p),
            })
            .collect()
    }
}
