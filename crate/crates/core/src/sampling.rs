//! Training point sets: interior, boundary, interface, initial and
//! observation points.
//!
//! Interior points come from one cell-centred spatial grid over the whole box,
//! repeated at `nt` times in `(0, T]` and split by phase. Boundary, interface
//! and initial sets follow the same uniform layout. A seeded random mode draws
//! the same counts uniformly instead.

use crate::geometry::{
    uniform_angles, Domain, GeometryError, InterfaceState, Membership, MotionLaw, Phase,
};
use crate::physics::ExactSolution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("cannot parse grid {0:?}; expected e.g. 10x10x5")]
    BadGrid(String),
    #[error("grid counts must be at least 1: {0:?}")]
    ZeroCount(Vec<usize>),
    #[error("observation points exist for examples 2 and 3 only, not {0}")]
    NoObservations(u8),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad sample record: {0}")]
    BadRecord(String),
}

/// Parses table labels such as `10x10x5` or `10×10×5`.
pub fn parse_dims(s: &str) -> Result<Vec<usize>, SamplingError> {
    let dims: Vec<usize> = s
        .split(['x', 'X', '×', '*'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| SamplingError::BadGrid(s.to_string()))?;
    if dims.contains(&0) {
        return Err(SamplingError::ZeroCount(dims));
    }
    Ok(dims)
}

fn dims<const N: usize>(s: &str) -> Result<[usize; N], SamplingError> {
    let d = parse_dims(s)?;
    d.try_into()
        .map_err(|_| SamplingError::BadGrid(s.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    Uniform,
    SeededRandom(u64),
}

/// Grid sizes of every point category.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplingSpec {
    /// `nx, ny, nt`
    pub interior: [usize; 3],
    /// points per side, sides, `nt`
    pub boundary: [usize; 3],
    /// angles, `nt`
    pub interface: [usize; 2],
    /// `nx, ny`
    pub initial: [usize; 2],
    pub mode: SamplingMode,
}

impl SamplingSpec {
    /// Builds a spec from table labels, e.g. `("10x10x5", "4x4x5", "4x5", "4x4")`.
    pub fn parse(interior: &str, boundary: &str, interface: &str, initial: &str) -> Result<Self, SamplingError> {
        let boundary = dims::<3>(boundary)?;
        if boundary[1] != 4 {
            return Err(SamplingError::BadGrid(format!(
                "boundary must cover 4 sides, got {}",
                boundary[1]
            )));
        }
        Ok(Self {
            interior: dims(interior)?,
            boundary,
            interface: dims(interface)?,
            initial: dims(initial)?,
            mode: SamplingMode::Uniform,
        })
    }

    /// `(M_L, M_B, M_Gamma, M_I)`.
    pub fn counts(&self) -> [usize; 4] {
        [
            self.interior.iter().product(),
            self.boundary.iter().product(),
            self.interface.iter().product(),
            self.initial.iter().product(),
        ]
    }

    pub fn labels(&self) -> [String; 4] {
        let j = |d: &[usize]| d.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        [
            j(&self.interior),
            j(&self.boundary),
            j(&self.interface),
            j(&self.initial),
        ]
    }
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            interior: [10, 10, 5],
            boundary: [4, 4, 5],
            interface: [4, 5],
            initial: [4, 4],
            mode: SamplingMode::Uniform,
        }
    }
}

/// A space-time point with a stable index into its generating grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub p: [f64; 3],
    pub id: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfaceSample {
    pub p: [f64; 3],
    /// Curve parameter, or vertex index for polygonal interfaces.
    pub theta: f64,
    /// Unit normal pointing into phase 2.
    pub n1: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub p: [f64; 3],
    /// Reference phase-2 pressure.
    pub pressure: f64,
}

/// Classified training points. Index 0 holds phase 1, index 1 phase 2.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SampleSet {
    pub interior: [Vec<Sample>; 2],
    pub boundary: [Vec<Sample>; 2],
    pub interface: Vec<InterfaceSample>,
    pub initial: [Vec<Sample>; 2],
    pub observation: Vec<Observation>,
}

fn slot(phase: Phase) -> usize {
    match phase {
        Phase::One => 0,
        Phase::Two => 1,
    }
}

fn cell(lo: f64, hi: f64, n: usize, j: usize) -> f64 {
    lo + (j as f64 + 0.5) * (hi - lo) / n as f64
}

/// `n` times on `[0, T]` with both ends, or `{0}` for `n = 1`.
pub fn closed_times(n: usize, t_end: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

/// `n` times `kT/n`, `k = 1..n`.
pub fn open_times(n: usize, t_end: f64) -> Vec<f64> {
    (1..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

fn split(points: Vec<[f64; 3]>, mut phase_of: impl FnMut([f64; 3]) -> Phase) -> [Vec<Sample>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (id, p) in points.into_iter().enumerate() {
        out[slot(phase_of(p))].push(Sample { p, id: id as u32 });
    }
    out
}

fn rng_for(mode: SamplingMode, stream: u64) -> Option<ChaCha8Rng> {
    match mode {
        SamplingMode::Uniform => None,
        SamplingMode::SeededRandom(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            Some(rng)
        }
    }
}

pub fn interior_points(spec: &SamplingSpec, domain: Domain, t_end: f64) -> Vec<[f64; 3]> {
    let [nx, ny, nt] = spec.interior;
    if let Some(mut rng) = rng_for(spec.mode, 1) {
        return (0..nx * ny * nt)
            .map(|_| {
                [
                    rng.gen_range(domain.xmin..domain.xmax),
                    rng.gen_range(domain.ymin..domain.ymax),
                    t_end * (1.0 - rng.gen::<f64>()),
                ]
            })
            .collect();
    }
    let mut pts = Vec::with_capacity(nx * ny * nt);
    for t in open_times(nt, t_end) {
        for j in 0..ny {
            for i in 0..nx {
                pts.push([
                    cell(domain.xmin, domain.xmax, nx, i),
                    cell(domain.ymin, domain.ymax, ny, j),
                    t,
                ]);
            }
        }
    }
    pts
}

pub fn gen_interior(
    spec: &SamplingSpec,
    law: &MotionLaw,
    domain: Domain,
    t_end: f64,
    membership: Membership,
) -> [Vec<Sample>; 2] {
    split(interior_points(spec, domain, t_end), |p| {
        law.classify([p[0], p[1]], p[2], membership)
    })
}

/// Points on the outer boundary, counter-clockwise side by side.
pub fn boundary_points(spec: &SamplingSpec, domain: Domain, t_end: f64) -> Vec<[f64; 3]> {
    let [per_side, sides, nt] = spec.boundary;
    let Domain {
        xmin,
        xmax,
        ymin,
        ymax,
    } = domain;
    let on_side = |side: usize, s: f64| -> [f64; 2] {
        match side % 4 {
            0 => [xmin + s * (xmax - xmin), ymin],
            1 => [xmax, ymin + s * (ymax - ymin)],
            2 => [xmax - s * (xmax - xmin), ymax],
            _ => [xmin, ymax - s * (ymax - ymin)],
        }
    };
    if let Some(mut rng) = rng_for(spec.mode, 2) {
        return (0..per_side * sides * nt)
            .map(|k| {
                let [x, y] = on_side(k % sides, rng.gen());
                [x, y, t_end * rng.gen::<f64>()]
            })
            .collect();
    }
    let mut pts = Vec::with_capacity(per_side * sides * nt);
    for t in closed_times(nt, t_end) {
        for side in 0..sides {
            for j in 0..per_side {
                let [x, y] = on_side(side, (j as f64 + 0.5) / per_side as f64);
                pts.push([x, y, t]);
            }
        }
    }
    pts
}

pub fn gen_boundary(
    spec: &SamplingSpec,
    law: &MotionLaw,
    domain: Domain,
    t_end: f64,
    membership: Membership,
) -> [Vec<Sample>; 2] {
    split(boundary_points(spec, domain, t_end), |p| {
        law.classify([p[0], p[1]], p[2], membership)
    })
}

/// Interface points with normals on an analytic interface.
pub fn gen_interface(spec: &SamplingSpec, law: &MotionLaw, t_end: f64) -> Result<Vec<InterfaceSample>, SamplingError> {
    let [ntheta, nt] = spec.interface;
    let mut params = Vec::with_capacity(ntheta * nt);
    if let Some(mut rng) = rng_for(spec.mode, 3) {
        for _ in 0..ntheta * nt {
            params.push((rng.gen_range(0.0..TAU), t_end * rng.gen::<f64>()));
        }
    } else {
        for t in closed_times(nt, t_end) {
            for &theta in &uniform_angles(ntheta) {
                params.push((theta, t));
            }
        }
    }
    params
        .into_iter()
        .map(|(theta, t)| {
            let [x, y] = law.interface_point(theta, t)?;
            Ok(InterfaceSample {
                p: [x, y, t],
                theta,
                n1: law.normal(theta, t)?,
            })
        })
        .collect()
}

/// Interface points at every vertex of every slice of a polygonal interface.
pub fn interface_from_state(state: &InterfaceState) -> Result<Vec<InterfaceSample>, SamplingError> {
    let mut out = Vec::with_capacity(state.times().len() * state.vertex_count());
    for (&t, poly) in state.times().iter().zip(state.slices()) {
        for (i, v) in poly.iter().enumerate() {
            out.push(InterfaceSample {
                p: [v[0], v[1], t],
                theta: i as f64,
                n1: crate::geometry::vertex_normal(poly, i)?,
            });
        }
    }
    Ok(out)
}

pub fn initial_points(spec: &SamplingSpec, domain: Domain) -> Vec<[f64; 3]> {
    let [nx, ny] = spec.initial;
    if let Some(mut rng) = rng_for(spec.mode, 4) {
        return (0..nx * ny)
            .map(|_| {
                [
                    rng.gen_range(domain.xmin..domain.xmax),
                    rng.gen_range(domain.ymin..domain.ymax),
                    0.0,
                ]
            })
            .collect();
    }
    let mut pts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            pts.push([
                cell(domain.xmin, domain.xmax, nx, i),
                cell(domain.ymin, domain.ymax, ny, j),
                0.0,
            ]);
        }
    }
    pts
}

pub fn gen_initial(spec: &SamplingSpec, law: &MotionLaw, domain: Domain, membership: Membership) -> [Vec<Sample>; 2] {
    split(initial_points(spec, domain), |p| {
        law.classify([p[0], p[1]], 0.0, membership)
    })
}

/// Observation times.
pub const OBSERVATION_TIMES: [f64; 10] = [0.01, 0.12, 0.23, 0.34, 0.45, 0.56, 0.67, 0.78, 0.89, 1.00];

/// Step of the trajectory integration for moving observation points.
pub const OBSERVATION_RK4_STEP: f64 = 1e-3;

/// Classical RK4 for `x' = v(x, t)` from `t0` to `t1` with about `h` steps.
pub fn rk4_trajectory(v: impl Fn([f64; 2], f64) -> [f64; 2], x0: [f64; 2], t0: f64, t1: f64, h: f64) -> [f64; 2] {
    let steps = ((t1 - t0) / h).round().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let mut x = x0;
    let mut t = t0;
    let axpy = |x: [f64; 2], a: f64, k: [f64; 2]| [x[0] + a * k[0], x[1] + a * k[1]];
    for _ in 0..steps {
        let k1 = v(x, t);
        let k2 = v(axpy(x, 0.5 * h, k1), t + 0.5 * h);
        let k3 = v(axpy(x, 0.5 * h, k2), t + 0.5 * h);
        let k4 = v(axpy(x, h, k3), t + h);
        for c in 0..2 {
            x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        t += h;
    }
    x
}

/// Five angles times ten instants of pressure data on the interface.
///
/// Example 2 places the points on the moving curve; example 3 advects the
/// points of the initial circle with the reference phase-2 velocity.
pub fn gen_observation(example: u8, exact: ExactSolution, membership: Membership) -> Result<Vec<Observation>, SamplingError> {
    let angles = uniform_angles(5);
    let mut out = Vec::with_capacity(50);
    match example {
        2 => {
            let law = MotionLaw::example2();
            for &t in &OBSERVATION_TIMES {
                for &theta in &angles {
                    let [x, y] = match membership {
                        Membership::Parametrization => law.interface_point(theta, t)?,
                        Membership::Unrotated => {
                            let r = 1.0 - 0.3 * t * (5.0 * theta).cos();
                            [1.2 + 0.6 * t + r * theta.cos(), 1.2 + 0.6 * t + r * theta.sin()]
                        }
                    };
                    out.push(Observation {
                        p: [x, y, t],
                        pressure: exact.pressure(Phase::Two, x, y, t),
                    });
                }
            }
        }
        3 => {
            let law = MotionLaw::example3_initial();
            let vel = |x: [f64; 2], t: f64| exact.velocity(Phase::Two, x[0], x[1], t);
            for &t in &OBSERVATION_TIMES {
                for &theta in &angles {
                    let x0 = law.interface_point(theta, 0.0)?;
                    let [x, y] = rk4_trajectory(vel, x0, 0.0, t, OBSERVATION_RK4_STEP);
                    out.push(Observation {
                        p: [x, y, t],
                        pressure: exact.pressure(Phase::Two, x, y, t),
                    });
                }
            }
        }
        other => return Err(SamplingError::NoObservations(other)),
    }
    Ok(out)
}

impl SampleSet {
    /// Generates every category for an analytic interface.
    pub fn generate(
        spec: &SamplingSpec,
        law: &MotionLaw,
        domain: Domain,
        t_end: f64,
        membership: Membership,
    ) -> Result<Self, SamplingError> {
        Ok(Self {
            interior: gen_interior(spec, law, domain, t_end, membership),
            boundary: gen_boundary(spec, law, domain, t_end, membership),
            interface: gen_interface(spec, law, t_end)?,
            initial: gen_initial(spec, law, domain, membership),
            observation: Vec::new(),
        })
    }

    /// Re-partitions interior, boundary and initial points with a new phase
    /// rule, keeping the generating-grid order within each phase.
    pub fn repartition(&mut self, mut phase_of: impl FnMut([f64; 3]) -> Phase) {
        for set in [&mut self.interior, &mut self.boundary, &mut self.initial] {
            let mut all: Vec<Sample> = set.iter().flatten().copied().collect();
            all.sort_by_key(|s| s.id);
            let mut out = [Vec::new(), Vec::new()];
            for s in all {
                out[slot(phase_of(s.p))].push(s);
            }
            *set = out;
        }
    }

    /// Ray-casts every point against the interpolated polygon at its own time.
    pub fn reclassify(&mut self, state: &InterfaceState) -> Result<(), SamplingError> {
        let mut polys: HashMap<u64, Vec<[f64; 2]>> = HashMap::new();
        for set in [&self.interior, &self.boundary, &self.initial] {
            for s in set.iter().flatten() {
                if let std::collections::hash_map::Entry::Vacant(e) = polys.entry(s.p[2].to_bits()) {
                    e.insert(state.interp_vertices(s.p[2])?);
                }
            }
        }
        self.repartition(|p| {
            let poly = &polys[&p[2].to_bits()];
            if crate::geometry::polygon::ray_cast_unchecked(poly, [p[0], p[1]]) {
                Phase::Two
            } else {
                Phase::One
            }
        });
        Ok(())
    }

    pub fn interior_count(&self) -> usize {
        self.interior[0].len() + self.interior[1].len()
    }

    /// Writes all categories as CSV rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SamplingError> {
        let mut out = csv::Writer::from_writer(w);
        let mut row = |category: &str, p: [f64; 3], phase: u8, n: Option<[f64; 2]>, data: Option<f64>| {
            out.serialize(SampleRecord {
                category: category.to_string(),
                x: p[0],
                y: p[1],
                t: p[2],
                phase,
                nx1: n.map(|n| n[0]),
                ny1: n.map(|n| n[1]),
                data,
            })
        };
        for (category, set) in [
            ("interior", &self.interior),
            ("boundary", &self.boundary),
            ("initial", &self.initial),
        ] {
            for (k, list) in set.iter().enumerate() {
                for s in list {
                    row(category, s.p, k as u8 + 1, None, Some(s.id as f64))?;
                }
            }
        }
        for s in &self.interface {
            row("interface", s.p, 0, Some(s.n1), Some(s.theta))?;
        }
        for o in &self.observation {
            row("observation", o.p, 2, None, Some(o.pressure))?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, SamplingError> {
        let mut set = SampleSet::default();
        for rec in csv::Reader::from_reader(r).deserialize() {
            let rec: SampleRecord = rec?;
            let p = [rec.x, rec.y, rec.t];
            let bad = || SamplingError::BadRecord(format!("{rec:?}"));
            let phase = match rec.phase {
                1 => 0,
                2 => 1,
                _ => usize::MAX,
            };
            match rec.category.as_str() {
                "interior" | "boundary" | "initial" => {
                    if phase > 1 {
                        return Err(bad());
                    }
                    let id = rec.data.ok_or_else(bad)? as u32;
                    let target = match rec.category.as_str() {
                        "interior" => &mut set.interior,
                        "boundary" => &mut set.boundary,
                        _ => &mut set.initial,
                    };
                    target[phase].push(Sample { p, id });
                }
                "interface" => set.interface.push(InterfaceSample {
                    p,
                    theta: rec.data.ok_or_else(bad)?,
                    n1: [rec.nx1.ok_or_else(bad)?, rec.ny1.ok_or_else(bad)?],
                }),
                "observation" => set.observation.push(Observation {
                    p,
                    pressure: rec.data.ok_or_else(bad)?,
                }),
                _ => return Err(bad()),
            }
        }
        Ok(set)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    category: String,
    x: f64,
    y: f64,
    t: f64,
    phase: u8,
    nx1: Option<f64>,
    ny1: Option<f64>,
    data: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn ex1() -> (MotionLaw, Domain) {
        (MotionLaw::example1(), Domain::square(0.0, 3.0))
    }

    #[test]
    fn parse_table_labels() {
        assert_eq!(parse_dims("10×10×5").unwrap(), vec![10, 10, 5]);
        assert_eq!(parse_dims("4x5").unwrap(), vec![4, 5]);
        assert!(parse_dims("4y5").is_err());
        assert!(parse_dims("0x5").is_err());
        assert!(SamplingSpec::parse("10x10", "4x4x5", "4x5", "4x4").is_err());
    }

    #[test]
    fn interior_grid_arithmetic() {
        let (law, dom) = ex1();
        let spec = SamplingSpec::default();
        let [a, b] = gen_interior(&spec, &law, dom, 1.0, Membership::default());
        assert_eq!(a.len() + b.len(), 500);
        let mut times: Vec<f64> = a.iter().chain(&b).map(|s| s.p[2]).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let expect = [0.2, 0.4, 0.6, 0.8, 1.0];
        assert_eq!(times.len(), 5);
        assert!(times.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(a.iter().chain(&b).all(|s| s.p[0] > 0.0 && s.p[0] < 3.0 && s.p[1] > 0.0 && s.p[1] < 3.0));
    }

    #[test]
    fn interior_partition_matches_brute_force() {
        let (law, dom) = ex1();
        let spec = SamplingSpec {
            interior: [40, 40, 20],
            ..Default::default()
        };
        let [a, b] = gen_interior(&spec, &law, dom, 1.0, Membership::default());
        let brute = interior_points(&spec, dom, 1.0)
            .iter()
            .filter(|p| {
                let (s, c) = (TAU * p[2]).sin_cos();
                let (dx, dy) = (p[0] - 1.2 - 0.6 * p[2], p[1] - 1.2 - 0.6 * p[2]);
                let (xi, eta) = (c * dx + s * dy, -s * dx + c * dy);
                (xi / (1.0 + 0.1 * p[2])).powi(2) + (eta / (1.0 - 0.1 * p[2])).powi(2) <= 1.0
            })
            .count();
        assert_eq!(b.len(), brute);
        assert_eq!(a.len() + b.len(), 32000);
        assert!(a.iter().all(|s| !b.iter().any(|t| t.id == s.id)));
    }

    #[test]
    fn boundary_counts_and_edges() {
        let (law, dom) = ex1();
        let spec = SamplingSpec::default();
        let [b1, b2] = gen_boundary(&spec, &law, dom, 1.0, Membership::default());
        assert_eq!(b1.len(), 80);
        assert!(b2.is_empty());
        assert!(b1
            .iter()
            .all(|s| s.p[0] == 0.0 || s.p[0] == 3.0 || s.p[1] == 0.0 || s.p[1] == 3.0));
        let single = SamplingSpec {
            boundary: [4, 4, 1],
            ..spec
        };
        assert!(boundary_points(&single, dom, 1.0).iter().all(|p| p[2] == 0.0));
    }

    #[test]
    fn circle_interface_points() {
        let law = MotionLaw::example3_initial();
        let pts = gen_interface(&SamplingSpec::default(), &law, 1.0).unwrap();
        assert_eq!(pts.len(), 20);
        let first: Vec<[f64; 3]> = pts.iter().take(4).map(|s| s.p).collect();
        let expect = [[2.5, 1.5], [1.5, 2.5], [0.5, 1.5], [1.5, 0.5]];
        for (p, e) in first.iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-15 && (p[1] - e[1]).abs() < 1e-15 && p[2] == 0.0);
        }
        assert!(pts.iter().all(|s| (s.n1[0].hypot(s.n1[1]) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ellipse_interface_points_satisfy_profile() {
        let (law, _) = ex1();
        let spec = SamplingSpec {
            interface: [32, 20],
            ..Default::default()
        };
        for s in gen_interface(&spec, &law, 1.0).unwrap() {
            let t = s.p[2];
            let (sn, c) = (TAU * t).sin_cos();
            let (dx, dy) = (s.p[0] - 1.2 - 0.6 * t, s.p[1] - 1.2 - 0.6 * t);
            let (xi, eta) = (c * dx + sn * dy, -sn * dx + c * dy);
            let lhs = (xi / (1.0 + 0.1 * t)).powi(2) + (eta / (1.0 - 0.1 * t)).powi(2);
            assert!((lhs - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_grid_classification() {
        for (law, dom) in [
            (MotionLaw::example1(), Domain::square(0.0, 3.0)),
            (MotionLaw::example2(), Domain::square(0.0, 3.5)),
            (MotionLaw::example3_initial(), Domain::square(0.0, 3.0)),
        ] {
            let [a, b] = gen_initial(&SamplingSpec::default(), &law, dom, Membership::default());
            assert_eq!(a.len() + b.len(), 16);
            let spec = SamplingSpec {
                initial: [5, 5],
                ..Default::default()
            };
            let [a, b] = gen_initial(&spec, &law, dom, Membership::default());
            let brute = initial_points(&spec, dom)
                .iter()
                .filter(|p| law.classify([p[0], p[1]], 0.0, Membership::default()) == Phase::Two)
                .count();
            assert_eq!(b.len(), brute);
            assert_eq!(a.len() + b.len(), 25);
            let centre = cell(dom.xmin, dom.xmax, 5, 2);
            assert!(b.iter().any(|s| s.p[0] == centre && s.p[1] == centre));
        }
    }

    #[test]
    fn observation_sets() {
        let obs = gen_observation(2, ExactSolution::Example1And2, Membership::default()).unwrap();
        assert_eq!(obs.len(), 50);
        let last = obs.iter().find(|o| o.p[2] == 1.0).unwrap();
        assert!((last.p[0] - 2.5).abs() < 1e-12 && (last.p[1] - 1.8).abs() < 1e-12);
        let text = gen_observation(2, ExactSolution::Example1And2, Membership::Unrotated).unwrap();
        let last = text.iter().find(|o| o.p[2] == 1.0).unwrap();
        assert!((last.p[0] - 2.5).abs() < 1e-12 && (last.p[1] - 1.8).abs() < 1e-12);
        assert!(gen_observation(1, ExactSolution::Example1And2, Membership::default()).is_err());

        let obs3 = gen_observation(3, ExactSolution::Example3, Membership::default()).unwrap();
        assert_eq!(obs3.len(), 50);
        let first = obs3[0];
        assert!((first.p[0] - 2.5).abs() < 0.02 && (first.p[1] - 1.5).abs() < 0.02);
        for o in &obs3 {
            let p = ExactSolution::Example3.pressure(Phase::Two, o.p[0], o.p[1], o.p[2]);
            assert_eq!(o.pressure, p);
        }
    }

    #[test]
    fn rk4_is_exact_on_linear_flow() {
        let x = rk4_trajectory(|_, t| [2.0 * t, 1.0], [0.0, 0.0], 0.0, 1.0, 0.1);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn generation_is_deterministic() {
        let (law, dom) = ex1();
        for mode in [SamplingMode::Uniform, SamplingMode::SeededRandom(3)] {
            let spec = SamplingSpec {
                mode,
                ..Default::default()
            };
            let a = SampleSet::generate(&spec, &law, dom, 1.0, Membership::default()).unwrap();
            let b = SampleSet::generate(&spec, &law, dom, 1.0, Membership::default()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.interior_count(), 500);
            assert_eq!(a.interface.len(), 20);
        }
    }

    #[test]
    fn reclassification_is_idempotent() {
        let (law, dom) = ex1();
        let spec = SamplingSpec::default();
        let mut set = SampleSet::generate(&spec, &law, dom, 1.0, Membership::default()).unwrap();
        let before = set.clone();
        set.repartition(|p| law.classify([p[0], p[1]], p[2], Membership::default()));
        assert_eq!(set, before);

        let circle: Vec<[f64; 2]> = uniform_angles(64)
            .iter()
            .map(|a| [1.5 + a.cos(), 1.5 + a.sin()])
            .collect();
        let state = InterfaceState::stationary(vec![0.0, 1.0], circle).unwrap();
        set.reclassify(&state).unwrap();
        let once = set.clone();
        set.reclassify(&state).unwrap();
        assert_eq!(set, once);
        let law = MotionLaw::SolutionDriven(Arc::new(state));
        for s in &set.interior[1] {
            assert_eq!(law.classify([s.p[0], s.p[1]], s.p[2], Membership::default()), Phase::Two);
        }
    }

    #[test]
    fn csv_round_trip() {
        let (law, dom) = ex1();
        let mut set = SampleSet::generate(&SamplingSpec::default(), &law, dom, 1.0, Membership::default()).unwrap();
        set.observation = gen_observation(2, ExactSolution::Example1And2, Membership::default()).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let back = SampleSet::read_csv(&buf[..]).unwrap();
        assert_eq!(back, set);
    }
}
