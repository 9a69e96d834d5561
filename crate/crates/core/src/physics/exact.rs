//! Closed-form reference solutions with hand-coded derivatives.

use super::residual::FlowSlots;
use crate::geometry::Phase;
use crate::net::{FlowJets, FlowModel, Jet};
use crate::tape::{JetOrder, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactSolution {
    /// Different velocity and pressure fields in each phase.
    Example1And2,
    /// Continuous velocity, phase-wise pressure.
    Example3,
}

/// val, dx, dy, dt, dxx, dxy, dyy
type Slots = [f64; 7];

impl ExactSolution {
    /// All jet slots of `(u, v, p)` in the given phase.
    pub fn slots(&self, phase: Phase, x: f64, y: f64, t: f64) -> FlowSlots<f64> {
        let (sx, cx) = x.sin_cos();
        let (sy, cy) = y.sin_cos();
        let (st, ct) = t.sin_cos();
        let et = t.exp();
        let p = match phase {
            Phase::One => {
                let p = et * sx * sy;
                [p, et * cx * sy, et * sx * cy, p, -p, et * cx * cy, -p]
            }
            Phase::Two => {
                let (sxy, cxy) = (x + y).sin_cos();
                let p = ct * cxy;
                let d = -ct * sxy;
                [p, d, d, -st * cxy, -p, -p, -p]
            }
        };
        let (u, v) = match (self, phase) {
            (ExactSolution::Example1And2, Phase::One) => {
                let u = et * sx * cy;
                let v = -et * cx * sy;
                let u: Slots = [u, et * cx * cy, -et * sx * sy, u, -u, -et * cx * sy, -u];
                let v: Slots = [v, et * sx * sy, -et * cx * cy, v, -v, et * sx * cy, -v];
                (u, v)
            }
            (ExactSolution::Example1And2, Phase::Two) => {
                let u = ct * cx * cy;
                let v = ct * sx * sy;
                let u: Slots = [u, -ct * sx * cy, -ct * cx * sy, -st * cx * cy, -u, ct * sx * sy, -u];
                let v: Slots = [v, ct * cx * sy, ct * sx * cy, -st * sx * sy, -v, ct * cx * cy, -v];
                (u, v)
            }
            (ExactSolution::Example3, _) => {
                let u = ct * sx * cy;
                let v = -ct * cx * sy;
                let u: Slots = [u, ct * cx * cy, -ct * sx * sy, -st * sx * cy, -u, -ct * cx * sy, -u];
                let v: Slots = [v, ct * sx * sy, -ct * cx * cy, st * cx * sy, -v, ct * sx * cy, -v];
                (u, v)
            }
        };
        [u, v, p]
    }

    pub fn velocity(&self, phase: Phase, x: f64, y: f64, t: f64) -> [f64; 2] {
        let s = self.slots(phase, x, y, t);
        [s[0][0], s[1][0]]
    }

    pub fn pressure(&self, phase: Phase, x: f64, y: f64, t: f64) -> f64 {
        self.slots(phase, x, y, t)[2][0]
    }
}

/// A reference solution posing as a network: its jets are constants on the
/// tape, so every residual built from them can be checked against zero.
#[derive(Clone, Copy, Debug)]
pub struct ExactModel {
    pub exact: ExactSolution,
    pub phase: Phase,
}

impl FlowModel for ExactModel {
    fn eval(&self, tape: &mut Tape, points: &[[f64; 3]], _order: JetOrder) -> Vec<FlowJets> {
        points
            .iter()
            .map(|&[x, y, t]| {
                let [u, v, p] = self.exact.slots(self.phase, x, y, t);
                FlowJets {
                    u: Jet::constant(tape, u),
                    v: Jet::constant(tape, v),
                    p: Jet::constant(tape, p),
                }
            })
            .collect()
    }
}
