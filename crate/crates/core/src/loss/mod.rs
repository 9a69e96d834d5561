//! Mean-squared loss terms and their weighted total.
//!
//! Term order everywhere: interior phase 1 and 2, interface, boundary phase 1
//! and 2, initial phase 1 and 2, pressure observations.

mod adaptive;
mod eval;

pub use adaptive::AdaptiveState;
pub use eval::{evaluate, evaluate_values, TermEval, DEFAULT_SHARD};

use crate::geometry::Phase;
use crate::net::FlowModel;
use crate::physics::{
    divergence_residual, interface_residuals, momentum_residual, Manufactured, PhaseParams,
};
use crate::sampling::{InterfaceSample, Observation, Sample, SampleSet};
use crate::tape::{JetOrder, Tape, Var};
use thiserror::Error;

pub const N_TERMS: usize = 8;
/// Terms subject to adaptive weighting.
pub const N_BALANCED: usize = 7;

pub const L1: usize = 0;
pub const L2: usize = 1;
pub const GAMMA: usize = 2;
pub const B1: usize = 3;
pub const B2: usize = 4;
pub const I1: usize = 5;
pub const I2: usize = 6;
pub const D: usize = 7;

pub const TERM_NAMES: [&str; N_TERMS] = ["F_L1", "F_L2", "F_Gamma", "F_B1", "F_B2", "F_I1", "F_I2", "F_D"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("no sample points for {0}")]
    EmptySet(&'static str),
}

/// Problem data consumed by the loss terms.
pub trait ProblemData: Sync {
    fn params(&self, phase: Phase) -> PhaseParams;
    fn forcing(&self, phase: Phase, p: [f64; 3]) -> [f64; 2];
    fn g1(&self, p: [f64; 3]) -> [f64; 2];
    fn g2(&self, p: [f64; 3], n1: [f64; 2]) -> [f64; 2];
    fn boundary_velocity(&self, phase: Phase, p: [f64; 3]) -> [f64; 2];
    fn initial_velocity(&self, phase: Phase, p: [f64; 3]) -> [f64; 2];
}

impl ProblemData for Manufactured {
    fn params(&self, phase: Phase) -> PhaseParams {
        Manufactured::params(self, phase)
    }
    fn forcing(&self, phase: Phase, p: [f64; 3]) -> [f64; 2] {
        Manufactured::forcing(self, phase, p[0], p[1], p[2])
    }
    fn g1(&self, p: [f64; 3]) -> [f64; 2] {
        Manufactured::g1(self, p[0], p[1], p[2])
    }
    fn g2(&self, p: [f64; 3], n1: [f64; 2]) -> [f64; 2] {
        Manufactured::g2(self, p[0], p[1], p[2], n1)
    }
    fn boundary_velocity(&self, phase: Phase, p: [f64; 3]) -> [f64; 2] {
        Manufactured::boundary_velocity(self, phase, p[0], p[1], p[2])
    }
    fn initial_velocity(&self, phase: Phase, p: [f64; 3]) -> [f64; 2] {
        Manufactured::initial_velocity(self, phase, p[0], p[1])
    }
}

/// Loss weights in term order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights(pub [f64; N_TERMS]);

impl Weights {
    pub fn ones() -> Self {
        Weights([1.0; N_TERMS])
    }

    /// Unit weights except interface and boundary terms.
    pub fn fixed(interface_and_boundary: f64) -> Self {
        let mut w = [1.0; N_TERMS];
        w[GAMMA] = interface_and_boundary;
        w[B1] = interface_and_boundary;
        w[B2] = interface_and_boundary;
        Weights(w)
    }

    pub fn with_observation(mut self, w_d: f64) -> Self {
        self.0[D] = w_d;
        self
    }
}

/// Term nodes and their weighted sum on one tape.
///
/// Categories without points (the outer boundary never touches phase 2 when
/// it is immersed; observations may be absent) are recorded as constant zero
/// and flagged inactive.
#[derive(Clone, Copy, Debug)]
pub struct LossBreakdown {
    pub terms: [Var; N_TERMS],
    pub active: [bool; N_TERMS],
    pub total: Var,
}

fn phase_index(phase: Phase) -> usize {
    match phase {
        Phase::One => 0,
        Phase::Two => 1,
    }
}

fn coords(samples: &[Sample]) -> Vec<[f64; 3]> {
    samples.iter().map(|s| s.p).collect()
}

/// `scale * sum |momentum|^2 + div^2` over the given points.
pub(crate) fn interior_partial(
    tape: &mut Tape,
    model: &dyn FlowModel,
    samples: &[Sample],
    phase: Phase,
    data: &dyn ProblemData,
    scale: f64,
) -> Var {
    let jets = model.eval(tape, &coords(samples), JetOrder::Second);
    let params = data.params(phase);
    let mut sq = Vec::with_capacity(3 * samples.len());
    for (j, s) in jets.iter().zip(samples) {
        let slots = j.slots();
        let [rx, ry] = momentum_residual(tape, &slots, params, data.forcing(phase, s.p));
        let div = divergence_residual(tape, &slots);
        for r in [rx, ry, div] {
            sq.push((tape.sq(r), scale));
        }
    }
    tape.lincomb(&sq)
}

pub(crate) fn interface_partial(
    tape: &mut Tape,
    m1: &dyn FlowModel,
    m2: &dyn FlowModel,
    samples: &[InterfaceSample],
    data: &dyn ProblemData,
    scale: f64,
) -> Var {
    let pts: Vec<[f64; 3]> = samples.iter().map(|s| s.p).collect();
    let j1 = m1.eval(tape, &pts, JetOrder::First);
    let j2 = m2.eval(tape, &pts, JetOrder::First);
    let (mu1, mu2) = (data.params(Phase::One).mu, data.params(Phase::Two).mu);
    let mut sq = Vec::with_capacity(4 * samples.len());
    for ((a, b), s) in j1.iter().zip(&j2).zip(samples) {
        let (dv, dt) = interface_residuals(
            tape,
            &a.slots(),
            &b.slots(),
            mu1,
            mu2,
            s.n1,
            data.g1(s.p),
            data.g2(s.p, s.n1),
        );
        for r in dv.into_iter().chain(dt) {
            sq.push((tape.sq(r), scale));
        }
    }
    tape.lincomb(&sq)
}

/// `scale * sum weight |target - V|^2`.
fn velocity_mismatch(
    tape: &mut Tape,
    model: &dyn FlowModel,
    samples: &[Sample],
    target: impl Fn([f64; 3]) -> [f64; 2],
    weight: f64,
    scale: f64,
) -> Var {
    let jets = model.eval(tape, &coords(samples), JetOrder::Value);
    let mut sq = Vec::with_capacity(2 * samples.len());
    for (j, s) in jets.iter().zip(samples) {
        let v = target(s.p);
        for (field, want) in [(j.u.val, v[0]), (j.v.val, v[1])] {
            let r = tape.add_const(field, -want);
            sq.push((tape.sq(r), weight * scale));
        }
    }
    tape.lincomb(&sq)
}

pub(crate) fn boundary_partial(
    tape: &mut Tape,
    model: &dyn FlowModel,
    samples: &[Sample],
    phase: Phase,
    data: &dyn ProblemData,
    scale: f64,
) -> Var {
    velocity_mismatch(tape, model, samples, |p| data.boundary_velocity(phase, p), 1.0, scale)
}

pub(crate) fn initial_partial(
    tape: &mut Tape,
    model: &dyn FlowModel,
    samples: &[Sample],
    phase: Phase,
    data: &dyn ProblemData,
    scale: f64,
) -> Var {
    let rho = data.params(phase).rho;
    velocity_mismatch(tape, model, samples, |p| data.initial_velocity(phase, p), rho, scale)
}

pub(crate) fn observation_partial(tape: &mut Tape, m2: &dyn FlowModel, obs: &[Observation], scale: f64) -> Var {
    let pts: Vec<[f64; 3]> = obs.iter().map(|o| o.p).collect();
    let jets = m2.eval(tape, &pts, JetOrder::Value);
    let mut sq = Vec::with_capacity(obs.len());
    for (j, o) in jets.iter().zip(obs) {
        let r = tape.add_const(j.p.val, -o.pressure);
        sq.push((tape.sq(r), scale));
    }
    tape.lincomb(&sq)
}

fn nonempty<T>(s: &[T], what: &'static str) -> Result<f64, LossError> {
    if s.is_empty() {
        Err(LossError::EmptySet(what))
    } else {
        Ok(1.0 / s.len() as f64)
    }
}

/// Mean of `|momentum residual|^2 + |divergence|^2`.
pub fn term_interior(
    tape: &mut Tape,
    model: &dyn FlowModel,
    samples: &[Sample],
    phase: Phase,
    data: &dyn ProblemData,
) -> Result<Var, LossError> {
    let scale = nonempty(samples, "interior")?;
    Ok(interior_partial(tape, model, samples, phase, data, scale))
}

/// Mean of `|velocity jump|^2 + |traction jump|^2`.
pub fn term_interface(
    tape: &mut Tape,
    m1: &dyn FlowModel,
    m2: &dyn FlowModel,
    samples: &[InterfaceSample],
    data: &dyn ProblemData,
) -> Result<Var, LossError> {
    let scale = nonempty(samples, "interface")?;
    Ok(interface_partial(tape, m1, m2, samples, data, scale))
}

/// Mean of `|v_b - V|^2`.
pub fn term_boundary(
    tape: &mut Tape,
    model: &dyn FlowModel,
    samples: &[Sample],
    phase: Phase,
    data: &dyn ProblemData,
) -> Result<Var, LossError> {
    let scale = nonempty(samples, "boundary")?;
    Ok(boundary_partial(tape, model, samples, phase, data, scale))
}

/// Mean of `rho |v_0 - V|^2`.
pub fn term_initial(
    tape: &mut Tape,
    model: &dyn FlowModel,
    samples: &[Sample],
    phase: Phase,
    data: &dyn ProblemData,
) -> Result<Var, LossError> {
    let scale = nonempty(samples, "initial")?;
    Ok(initial_partial(tape, model, samples, phase, data, scale))
}

/// Mean of `|p_2 - P_2|^2`.
pub fn term_observation(tape: &mut Tape, m2: &dyn FlowModel, obs: &[Observation]) -> Result<Var, LossError> {
    let scale = nonempty(obs, "observation")?;
    Ok(observation_partial(tape, m2, obs, scale))
}

/// `sum_j w_j F_j`.
pub fn total(tape: &mut Tape, terms: &[Var; N_TERMS], weights: &Weights) -> Var {
    let pairs: Vec<(Var, f64)> = terms.iter().copied().zip(weights.0).collect();
    tape.lincomb(&pairs)
}

/// Builds every term on one tape. Interior, interface and initial sets must
/// be nonempty; boundary and observation categories may be empty.
pub fn assemble(
    tape: &mut Tape,
    models: [&dyn FlowModel; 2],
    samples: &SampleSet,
    data: &dyn ProblemData,
    weights: &Weights,
) -> Result<LossBreakdown, LossError> {
    let zero = tape.constant(0.0);
    let mut terms = [zero; N_TERMS];
    let mut active = [true; N_TERMS];
    for phase in [Phase::One, Phase::Two] {
        let k = phase_index(phase);
        let m = models[k];
        terms[L1 + k] = term_interior(tape, m, &samples.interior[k], phase, data)?;
        if samples.boundary[k].is_empty() {
            active[B1 + k] = false;
        } else {
            terms[B1 + k] = term_boundary(tape, m, &samples.boundary[k], phase, data)?;
        }
        terms[I1 + k] = term_initial(tape, m, &samples.initial[k], phase, data)?;
    }
    terms[GAMMA] = term_interface(tape, models[0], models[1], &samples.interface, data)?;
    if samples.observation.is_empty() {
        active[D] = false;
    } else {
        terms[D] = term_observation(tape, models[1], &samples.observation)?;
    }
    let total = total(tape, &terms, weights);
    Ok(LossBreakdown {
        terms,
        active,
        total,
    })
}

/// Square root of the unit-weight total.
pub fn loss_error(values: &[f64; N_TERMS]) -> f64 {
    values.iter().sum::<f64>().sqrt()
}
