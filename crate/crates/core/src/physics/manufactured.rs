//! Forcing, jump, boundary and initial data that make a reference solution
//! solve the two-phase system exactly.

use super::exact::ExactSolution;
use super::residual::{interface_residuals, momentum_residual, PhaseParams, Plain};
use crate::geometry::Phase;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Manufactured {
    pub exact: ExactSolution,
    pub phases: [PhaseParams; 2],
}

pub fn manufacture_data(exact: ExactSolution, phases: [PhaseParams; 2]) -> Manufactured {
    Manufactured { exact, phases }
}

impl Manufactured {
    pub fn params(&self, phase: Phase) -> PhaseParams {
        match phase {
            Phase::One => self.phases[0],
            Phase::Two => self.phases[1],
        }
    }

    /// Body force `f_i`.
    pub fn forcing(&self, phase: Phase, x: f64, y: f64, t: f64) -> [f64; 2] {
        let s = self.exact.slots(phase, x, y, t);
        momentum_residual(&mut Plain, &s, self.params(phase), [0.0, 0.0])
    }

    /// Velocity jump `g1 = v1 - v2`.
    pub fn g1(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        self.jumps(x, y, t, [1.0, 0.0]).0
    }

    /// Traction jump `g2 = sigma1 n1 + sigma2 n2` for the normal `n1`.
    pub fn g2(&self, x: f64, y: f64, t: f64, n1: [f64; 2]) -> [f64; 2] {
        self.jumps(x, y, t, n1).1
    }

    fn jumps(&self, x: f64, y: f64, t: f64, n1: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let s1 = self.exact.slots(Phase::One, x, y, t);
        let s2 = self.exact.slots(Phase::Two, x, y, t);
        interface_residuals(
            &mut Plain,
            &s1,
            &s2,
            self.phases[0].mu,
            self.phases[1].mu,
            n1,
            [0.0; 2],
            [0.0; 2],
        )
    }

    /// Dirichlet data on the outer boundary.
    pub fn boundary_velocity(&self, phase: Phase, x: f64, y: f64, t: f64) -> [f64; 2] {
        self.exact.velocity(phase, x, y, t)
    }

    pub fn initial_velocity(&self, phase: Phase, x: f64, y: f64) -> [f64; 2] {
        self.exact.velocity(phase, x, y, 0.0)
    }
}
