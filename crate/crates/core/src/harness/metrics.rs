//! Relative L2 errors against the exact solution and field export.

use crate::geometry::{uniform_angles, Domain, InterfaceState, Membership, MotionLaw, Phase};
use crate::net::Mlp;
use crate::physics::ExactSolution;
use crate::sampling::{closed_times, rk4_trajectory, OBSERVATION_RK4_STEP};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Phase assignment of evaluation points.
#[derive(Clone, Debug)]
pub enum Classifier {
    Law(MotionLaw, Membership),
    /// Polygons interpolated in time.
    Polygons(InterfaceState),
}

impl Classifier {
    pub fn phase(&self, p: [f64; 3]) -> Phase {
        match self {
            Classifier::Law(law, m) => law.classify([p[0], p[1]], p[2], *m),
            Classifier::Polygons(state) => {
                if state.contains([p[0], p[1]], p[2]).unwrap_or(false) {
                    Phase::Two
                } else {
                    Phase::One
                }
            }
        }
    }
}

/// Markers on the initial circle advected by the exact phase-2 velocity,
/// recorded at `times` (which must start at 0).
pub fn reference_interface(exact: ExactSolution, n_vertices: usize, times: &[f64]) -> InterfaceState {
    let law = MotionLaw::example3_initial();
    let vel = |x: [f64; 2], t: f64| exact.velocity(Phase::Two, x[0], x[1], t);
    let mut pts: Vec<[f64; 2]> = uniform_angles(n_vertices)
        .into_iter()
        .map(|th| law.interface_point(th, 0.0).unwrap())
        .collect();
    let mut slices = vec![pts.clone()];
    for w in times.windows(2) {
        for p in &mut pts {
            *p = rk4_trajectory(vel, *p, w[0], w[1], OBSERVATION_RK4_STEP);
        }
        slices.push(pts.clone());
    }
    InterfaceState::new(times.to_vec(), slices).expect("reference interface stays simple")
}

/// Cell-centred `nx x ny` grid at `nt` times spanning `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalGrid {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub domain: Domain,
    pub t_end: f64,
}

impl EvalGrid {
    pub fn times(&self) -> Vec<f64> {
        closed_times(self.nt, self.t_end)
    }

    pub fn plane(&self, t: f64) -> Vec<[f64; 3]> {
        let d = self.domain;
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            let y = d.ymin + (j as f64 + 0.5) * (d.ymax - d.ymin) / self.ny as f64;
            for i in 0..self.nx {
                let x = d.xmin + (i as f64 + 0.5) * (d.xmax - d.xmin) / self.nx as f64;
                out.push([x, y, t]);
            }
        }
        out
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        self.times().into_iter().flat_map(|t| self.plane(t)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenError {
    pub velocity: f64,
    pub pressure: f64,
}

/// Sum in ascending order, so the result does not depend on point order.
fn sorted_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum()
}

/// Predicted `(u, v, p)` for points of one phase.
pub type Predict<'a> = dyn Fn(Phase, &[[f64; 3]]) -> Vec<[f64; 3]> + 'a;

fn phase_split(points: &[[f64; 3]], classify: &Classifier) -> [Vec<[f64; 3]>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for &p in points {
        match classify.phase(p) {
            Phase::One => out[0].push(p),
            Phase::Two => out[1].push(p),
        }
    }
    out
}

/// Relative L2 errors over both phases. Pressure errors are measured after
/// removing the mean of each phase at each time, from both fields.
pub fn gen_error_with(predict: &Predict, exact: ExactSolution, classify: &Classifier, points: &[[f64; 3]]) -> GenError {
    let mut dv = Vec::new();
    let mut nv = Vec::new();
    let mut dp = Vec::new();
    let mut np = Vec::new();
    for (k, pts) in phase_split(points, classify).iter().enumerate() {
        let phase = if k == 0 { Phase::One } else { Phase::Two };
        let pred = predict(phase, pts);
        let mut groups: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
        for (p, q) in pts.iter().zip(&pred) {
            let [u, v] = exact.velocity(phase, p[0], p[1], p[2]);
            dv.push((u - q[0]).powi(2) + (v - q[1]).powi(2));
            nv.push(u * u + v * v);
            groups
                .entry(p[2].to_bits())
                .or_default()
                .push((exact.pressure(phase, p[0], p[1], p[2]), q[2]));
        }
        for g in groups.values() {
            let n = g.len() as f64;
            let me = sorted_sum(g.iter().map(|x| x.0).collect()) / n;
            let mp = sorted_sum(g.iter().map(|x| x.1).collect()) / n;
            for &(pe, pp) in g {
                dp.push(((pe - me) - (pp - mp)).powi(2));
                np.push((pe - me).powi(2));
            }
        }
    }
    GenError {
        velocity: (sorted_sum(dv) / sorted_sum(nv)).sqrt(),
        pressure: (sorted_sum(dp) / sorted_sum(np)).sqrt(),
    }
}

/// Errors of a pair of phase networks on the evaluation grid.
pub fn gen_error(nets: [&Mlp; 2], exact: ExactSolution, classify: &Classifier, grid: &EvalGrid) -> GenError {
    let predict = |phase: Phase, pts: &[[f64; 3]]| match phase {
        Phase::One => nets[0].forward(pts),
        Phase::Two => nets[1].forward(pts),
    };
    gen_error_with(&predict, exact, classify, &grid.points())
}

/// Final results of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub example: u8,
    pub epochs: usize,
    pub gen_error_velocity: f64,
    pub gen_error_pressure: f64,
    pub loss_error: f64,
    pub final_terms: [f64; 8],
    pub wall_time_s: f64,
}

impl MetricsReport {
    /// Equality of everything except the wall time.
    pub fn same_results(&self, other: &Self) -> bool {
        self.example == other.example
            && self.epochs == other.epochs
            && self.gen_error_velocity.to_bits() == other.gen_error_velocity.to_bits()
            && self.gen_error_pressure.to_bits() == other.gen_error_pressure.to_bits()
            && self.loss_error.to_bits() == other.loss_error.to_bits()
            && self.final_terms.map(f64::to_bits) == other.final_terms.map(f64::to_bits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub phase: u8,
    pub u: f64,
    pub v: f64,
    pub p: f64,
    pub u_exact: f64,
    pub v_exact: f64,
    pub p_exact: f64,
    pub err: f64,
}

/// Predicted and exact fields on one time plane of the grid.
pub fn export_fields(nets: [&Mlp; 2], exact: ExactSolution, classify: &Classifier, grid: &EvalGrid, t: f64) -> Vec<FieldRow> {
    grid.plane(t)
        .into_iter()
        .map(|p| {
            let phase = classify.phase(p);
            let k = usize::from(phase == Phase::Two);
            let [u, v, pr] = nets[k].forward(&[p])[0];
            let [ue, ve, pe] = exact.slots(phase, p[0], p[1], p[2]).map(|s| s[0]);
            FieldRow {
                x: p[0],
                y: p[1],
                t,
                phase: k as u8 + 1,
                u,
                v,
                p: pr,
                u_exact: ue,
                v_exact: ve,
                p_exact: pe,
                err: (u - ue).hypot(v - ve),
            }
        })
        .collect()
}

pub fn write_fields(path: &Path, rows: &[FieldRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_fields(path: &Path) -> csv::Result<Vec<FieldRow>> {
    csv::Reader::from_path(path)?.deserialize().collect()
}
