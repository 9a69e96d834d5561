//! Sharded loss and gradient evaluation.
//!
//! Every term is split into fixed-size chunks of its sample points. Each chunk
//! is recorded on its own tape and differentiated independently; chunk values
//! and gradients are then summed per term in chunk order, so the result does
//! not depend on how many threads ran the chunks.

use super::{
    boundary_partial, initial_partial, interface_partial, interior_partial, observation_partial,
    LossError, ProblemData, Weights, B1, D, GAMMA, I1, L1, N_TERMS,
};
use crate::geometry::Phase;
use crate::net::{BoundMlp, Mlp};
use crate::sampling::SampleSet;
use crate::tape::{Tape, Var};
use rayon::prelude::*;
use std::cell::RefCell;
use std::ops::Range;

/// Sample points per chunk.
pub const DEFAULT_SHARD: usize = 128;

thread_local! {
    static TAPE: RefCell<Tape> = RefCell::new(Tape::new());
}

#[derive(Clone, Debug)]
enum Job {
    Interior(usize, Range<usize>),
    Boundary(usize, Range<usize>),
    Initial(usize, Range<usize>),
    Interface(Range<usize>),
    Observation(Range<usize>),
}

impl Job {
    fn term(&self) -> usize {
        match self {
            Job::Interior(k, _) => L1 + k,
            Job::Boundary(k, _) => B1 + k,
            Job::Initial(k, _) => I1 + k,
            Job::Interface(_) => GAMMA,
            Job::Observation(_) => D,
        }
    }
}

/// Term values and per-term gradients with respect to both parameter vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct TermEval {
    pub values: [f64; N_TERMS],
    pub active: [bool; N_TERMS],
    /// `grads[term][phase]`, empty when gradients were not requested.
    pub grads: Vec<[Vec<f64>; 2]>,
}

impl TermEval {
    pub fn total(&self, w: &Weights) -> f64 {
        let mut acc = 0.0;
        for j in 0..N_TERMS {
            acc += w.0[j] * self.values[j];
        }
        acc
    }

    /// `sum_j w_j grad F_j` for each phase network.
    pub fn weighted_grad(&self, w: &Weights) -> [Vec<f64>; 2] {
        let mut out = [
            vec![0.0; self.grads[0][0].len()],
            vec![0.0; self.grads[0][1].len()],
        ];
        for (j, g) in self.grads.iter().enumerate() {
            for k in 0..2 {
                for (o, x) in out[k].iter_mut().zip(&g[k]) {
                    *o += w.0[j] * x;
                }
            }
        }
        out
    }
}

fn chunks(n: usize, shard: usize) -> impl Iterator<Item = Range<usize>> {
    (0..n).step_by(shard.max(1)).map(move |s| s..(s + shard.max(1)).min(n))
}

fn plan(samples: &SampleSet, shard: usize) -> Result<(Vec<Job>, [usize; N_TERMS]), LossError> {
    let mut jobs = Vec::new();
    let mut counts = [0usize; N_TERMS];
    for k in 0..2 {
        let n = samples.interior[k].len();
        if n == 0 {
            return Err(LossError::EmptySet("interior"));
        }
        counts[L1 + k] = n;
        jobs.extend(chunks(n, shard).map(|r| Job::Interior(k, r)));
    }
    let n = samples.interface.len();
    if n == 0 {
        return Err(LossError::EmptySet("interface"));
    }
    counts[GAMMA] = n;
    jobs.extend(chunks(n, shard).map(Job::Interface));
    for k in 0..2 {
        let n = samples.boundary[k].len();
        counts[B1 + k] = n;
        jobs.extend(chunks(n, shard).map(|r| Job::Boundary(k, r)));
    }
    for k in 0..2 {
        let n = samples.initial[k].len();
        if n == 0 {
            return Err(LossError::EmptySet("initial"));
        }
        counts[I1 + k] = n;
        jobs.extend(chunks(n, shard).map(|r| Job::Initial(k, r)));
    }
    let n = samples.observation.len();
    counts[D] = n;
    jobs.extend(chunks(n, shard).map(Job::Observation));
    Ok((jobs, counts))
}

struct JobOut {
    term: usize,
    value: f64,
    grads: [Option<Vec<f64>>; 2],
}

fn phase(k: usize) -> Phase {
    if k == 0 {
        Phase::One
    } else {
        Phase::Two
    }
}

fn run_job(
    job: &Job,
    nets: [&Mlp; 2],
    samples: &SampleSet,
    data: &dyn ProblemData,
    scale: f64,
    want_grad: bool,
) -> JobOut {
    TAPE.with(|cell| {
        let mut tape = cell.borrow_mut();
        tape.clear();
        let tape = &mut *tape;
        let uses: [bool; 2] = match job {
            Job::Interior(k, _) | Job::Boundary(k, _) | Job::Initial(k, _) => [*k == 0, *k == 1],
            Job::Interface(_) => [true, true],
            Job::Observation(_) => [false, true],
        };
        let bound: [Option<BoundMlp>; 2] = [
            uses[0].then(|| nets[0].bind(tape)),
            uses[1].then(|| nets[1].bind(tape)),
        ];
        let root: Var = match job {
            Job::Interior(k, r) => interior_partial(
                tape,
                bound[*k].as_ref().unwrap(),
                &samples.interior[*k][r.clone()],
                phase(*k),
                data,
                scale,
            ),
            Job::Boundary(k, r) => boundary_partial(
                tape,
                bound[*k].as_ref().unwrap(),
                &samples.boundary[*k][r.clone()],
                phase(*k),
                data,
                scale,
            ),
            Job::Initial(k, r) => initial_partial(
                tape,
                bound[*k].as_ref().unwrap(),
                &samples.initial[*k][r.clone()],
                phase(*k),
                data,
                scale,
            ),
            Job::Interface(r) => interface_partial(
                tape,
                bound[0].as_ref().unwrap(),
                bound[1].as_ref().unwrap(),
                &samples.interface[r.clone()],
                data,
                scale,
            ),
            Job::Observation(r) => observation_partial(
                tape,
                bound[1].as_ref().unwrap(),
                &samples.observation[r.clone()],
                scale,
            ),
        };
        let grads = if want_grad {
            let g = tape.backward(root);
            bound.map(|b| b.map(|b| g.block(b.params()).to_vec()))
        } else {
            [None, None]
        };
        JobOut {
            term: job.term(),
            value: root.value(),
            grads,
        }
    })
}

fn run(
    nets: [&Mlp; 2],
    samples: &SampleSet,
    data: &dyn ProblemData,
    shard: usize,
    want_grad: bool,
) -> Result<TermEval, LossError> {
    let (jobs, counts) = plan(samples, shard)?;
    let outs: Vec<JobOut> = jobs
        .par_iter()
        .map(|job| {
            let scale = 1.0 / counts[job.term()] as f64;
            run_job(job, nets, samples, data, scale, want_grad)
        })
        .collect();
    let mut values = [0.0; N_TERMS];
    let active = counts.map(|c| c > 0);
    let mut grads: Vec<[Vec<f64>; 2]> = if want_grad {
        (0..N_TERMS)
            .map(|_| [vec![0.0; nets[0].len()], vec![0.0; nets[1].len()]])
            .collect()
    } else {
        Vec::new()
    };
    for out in outs {
        values[out.term] += out.value;
        if want_grad {
            for k in 0..2 {
                if let Some(g) = &out.grads[k] {
                    for (acc, x) in grads[out.term][k].iter_mut().zip(g) {
                        *acc += x;
                    }
                }
            }
        }
    }
    Ok(TermEval {
        values,
        active,
        grads,
    })
}

/// Term values and per-term parameter gradients.
pub fn evaluate(
    nets: [&Mlp; 2],
    samples: &SampleSet,
    data: &dyn ProblemData,
    shard: usize,
) -> Result<TermEval, LossError> {
    run(nets, samples, data, shard, true)
}

/// Term values only.
pub fn evaluate_values(
    nets: [&Mlp; 2],
    samples: &SampleSet,
    data: &dyn ProblemData,
    shard: usize,
) -> Result<TermEval, LossError> {
    run(nets, samples, data, shard, false)
}
