//! Interface tracking along vertex trajectories.
//!
//! Vertex `i` of slice `k` is the tracked position of the `i`-th marker at the
//! `k`-th slice time. A new set of positions is obtained by integrating the
//! velocity sampled on the current trajectories with the trapezoidal rule.

use crate::geometry::{GeometryError, InterfaceState, Vertex};
use crate::net::Mlp;

/// A velocity field evaluated in batches of space-time points.
pub trait VelocityField: Sync {
    fn velocities(&self, points: &[[f64; 3]]) -> Vec<[f64; 2]>;
}

impl VelocityField for Mlp {
    fn velocities(&self, points: &[[f64; 3]]) -> Vec<[f64; 2]> {
        self.forward(points).into_iter().map(|[u, v, _]| [u, v]).collect()
    }
}

/// Adapts a pointwise closure.
pub struct FnField<F>(pub F);

impl<F: Fn([f64; 3]) -> [f64; 2] + Sync> VelocityField for FnField<F> {
    fn velocities(&self, points: &[[f64; 3]]) -> Vec<[f64; 2]> {
        points.iter().map(|&p| (self.0)(p)).collect()
    }
}

/// Velocities sampled on the stored trajectories, with cumulative
/// trapezoidal displacements.
pub struct Tracker<'a> {
    state: &'a InterfaceState,
    vel: Vec<Vec<Vertex>>,
    disp: Vec<Vec<Vertex>>,
}

impl<'a> Tracker<'a> {
    pub fn new(state: &'a InterfaceState, field: &dyn VelocityField) -> Self {
        let times = state.times();
        let n = state.vertex_count();
        let points: Vec<[f64; 3]> = times
            .iter()
            .zip(state.slices())
            .flat_map(|(&t, s)| s.iter().map(move |v| [v[0], v[1], t]))
            .collect();
        let flat = field.velocities(&points);
        let vel: Vec<Vec<Vertex>> = flat.chunks(n).map(|c| c.to_vec()).collect();
        let mut disp = vec![vec![[0.0; 2]; n]];
        for k in 1..times.len() {
            let h = 0.5 * (times[k] - times[k - 1]);
            let prev = &disp[k - 1];
            let next = (0..n)
                .map(|i| {
                    [
                        prev[i][0] + h * (vel[k - 1][i][0] + vel[k][i][0]),
                        prev[i][1] + h * (vel[k - 1][i][1] + vel[k][i][1]),
                    ]
                })
                .collect();
            disp.push(next);
        }
        Self { state, vel, disp }
    }

    /// False when the field produced NaN or infinite velocities.
    pub fn is_finite(&self) -> bool {
        self.vel.iter().flatten().flatten().all(|x| x.is_finite())
    }

    /// Positions at every slice time.
    pub fn advance(&self) -> Result<InterfaceState, GeometryError> {
        let p0 = &self.state.slices()[0];
        let slices = self
            .disp
            .iter()
            .map(|d| p0.iter().zip(d).map(|(p, d)| [p[0] + d[0], p[1] + d[1]]).collect())
            .collect();
        InterfaceState::new(self.state.times().to_vec(), slices)
    }

    /// Positions at each of the times `ts`; the last partial step uses the
    /// velocity at the linearly interpolated trajectory position.
    pub fn positions(&self, ts: &[f64], field: &dyn VelocityField) -> Result<Vec<Vec<Vertex>>, GeometryError> {
        let times = self.state.times();
        let slices = self.state.slices();
        let n = self.state.vertex_count();
        let mut brackets = Vec::with_capacity(ts.len());
        let mut probes = Vec::new();
        for &t in ts {
            let j = self.state.bracket(t)?;
            if t == times[0] || times.len() == 1 {
                brackets.push(None);
                continue;
            }
            let j = if t == times[j] { j - 1 } else { j };
            let w = (t - times[j]) / (times[j + 1] - times[j]);
            for i in 0..n {
                let (a, b) = (slices[j][i], slices[j + 1][i]);
                probes.push([(1.0 - w) * a[0] + w * b[0], (1.0 - w) * a[1] + w * b[1], t]);
            }
            brackets.push(Some(j));
        }
        let v_probe = field.velocities(&probes);
        let p0 = &slices[0];
        let mut cursor = 0;
        Ok(ts
            .iter()
            .zip(brackets)
            .map(|(&t, b)| match b {
                None => p0.clone(),
                Some(j) => {
                    let h = 0.5 * (t - times[j]);
                    let out = (0..n)
                        .map(|i| {
                            let vt = v_probe[cursor + i];
                            [
                                p0[i][0] + self.disp[j][i][0] + h * (self.vel[j][i][0] + vt[0]),
                                p0[i][1] + self.disp[j][i][1] + h * (self.vel[j][i][1] + vt[1]),
                            ]
                        })
                        .collect();
                    cursor += n;
                    out
                }
            })
            .collect())
    }
}

/// Tracked marker positions at time `t`.
pub fn interface_position(
    t: f64,
    state: &InterfaceState,
    field: &dyn VelocityField,
) -> Result<Vec<Vertex>, GeometryError> {
    let tracker = Tracker::new(state, field);
    Ok(tracker.positions(&[t], field)?.pop().unwrap())
}

/// Re-integrates every slice from the velocity on the current trajectories.
pub fn update_interface(state: &InterfaceState, field: &dyn VelocityField) -> Result<InterfaceState, GeometryError> {
    Tracker::new(state, field).advance()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{uniform_angles, MotionLaw, Phase};
    use crate::physics::ExactSolution;
    use crate::sampling::{closed_times, rk4_trajectory};

    fn circle_state(n: usize, k: usize) -> InterfaceState {
        let law = MotionLaw::example3_initial();
        let poly: Vec<Vertex> = uniform_angles(n)
            .into_iter()
            .map(|th| law.interface_point(th, 0.0).unwrap())
            .collect();
        InterfaceState::stationary(closed_times(k, 1.0), poly).unwrap()
    }

    fn max_dist(a: &[Vertex], b: &[Vertex]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_velocity_is_exact() {
        let s = circle_state(8, 7);
        let f = FnField(|_| [1.0, 0.0]);
        let p = interface_position(0.5, &s, &f).unwrap();
        for (q, p0) in p.iter().zip(&s.slices()[0]) {
            assert!((q[0] - p0[0] - 0.5).abs() < 1e-14);
            assert_eq!(q[1], p0[1]);
        }
    }

    #[test]
    fn linear_in_time_is_exact() {
        let s = circle_state(6, 11);
        let f = FnField(|p: [f64; 3]| [2.0 * p[2], 0.0]);
        let p = interface_position(1.0, &s, &f).unwrap();
        for (q, p0) in p.iter().zip(&s.slices()[0]) {
            assert!((q[0] - p0[0] - 1.0).abs() < 1e-14);
        }
        let mid = interface_position(0.37, &s, &f).unwrap();
        for (q, p0) in mid.iter().zip(&s.slices()[0]) {
            assert!((q[0] - p0[0] - 0.37 * 0.37).abs() < 1e-14);
        }
    }

    #[test]
    fn start_time_returns_initial_markers() {
        let s = circle_state(5, 4);
        let f = FnField(|_| [3.0, -1.0]);
        assert_eq!(interface_position(0.0, &s, &f).unwrap(), s.slices()[0]);
        assert!(matches!(
            interface_position(1.5, &s, &f),
            Err(GeometryError::OutOfRange { .. })
        ));
    }

    #[test]
    fn zero_velocity_keeps_state() {
        let s = circle_state(12, 5);
        let f = FnField(|_| [0.0, 0.0]);
        assert_eq!(update_interface(&s, &f).unwrap(), s);
    }

    #[test]
    fn translation_shifts_every_slice() {
        let s = circle_state(12, 5);
        let c = 0.3;
        let f = FnField(move |_| [c, 0.0]);
        let u = update_interface(&s, &f).unwrap();
        for (k, (&t, poly)) in u.times().iter().zip(u.slices()).enumerate() {
            for (q, p0) in poly.iter().zip(&s.slices()[0]) {
                assert!((q[0] - p0[0] - c * t).abs() < 1e-14, "slice {k}");
                assert_eq!(q[1], p0[1]);
            }
        }
    }

    #[test]
    fn update_is_deterministic() {
        let s = circle_state(12, 5);
        let net = crate::net::init_mlp(4, &crate::net::DEFAULT_SHAPE).unwrap();
        let scaled = FnField(|p: [f64; 3]| {
            let [u, v] = net.velocities(&[p])[0];
            [0.1 * u, 0.1 * v]
        });
        assert_eq!(update_interface(&s, &scaled).unwrap(), update_interface(&s, &scaled).unwrap());
    }

    #[test]
    fn slice_times_agree_with_full_update() {
        let s = circle_state(10, 6);
        let f = FnField(|p: [f64; 3]| [p[1].sin() * p[2], p[0].cos()]);
        let first = update_interface(&s, &f).unwrap();
        let tr = Tracker::new(&first, &f);
        let next = tr.advance().unwrap();
        let at = tr.positions(first.times(), &f).unwrap();
        for (a, b) in at.iter().zip(next.slices()) {
            assert!(max_dist(a, b) < 1e-14);
        }
    }

    fn converged(n: usize, k: usize) -> InterfaceState {
        let exact = ExactSolution::Example3;
        let f = FnField(move |p: [f64; 3]| exact.velocity(Phase::Two, p[0], p[1], p[2]));
        let mut s = circle_state(n, k);
        for _ in 0..100 {
            let next = update_interface(&s, &f).unwrap();
            let done = next
                .slices()
                .iter()
                .zip(s.slices())
                .all(|(a, b)| max_dist(a, b) < 1e-15);
            s = next;
            if done {
                break;
            }
        }
        s
    }

    #[test]
    fn fixed_point_is_second_order() {
        let exact = ExactSolution::Example3;
        let v = |x: [f64; 2], t: f64| exact.velocity(Phase::Two, x[0], x[1], t);
        let mut errs = Vec::new();
        let dts = [0.1, 0.05, 0.025];
        for dt in dts {
            let k = (1.0 / dt) as usize + 1;
            let s = converged(8, k);
            let end = s.slices().last().unwrap();
            let err = s.slices()[0]
                .iter()
                .zip(end)
                .map(|(p0, q)| {
                    let r = rk4_trajectory(v, *p0, 0.0, 1.0, 1e-4);
                    (r[0] - q[0]).hypot(r[1] - q[1])
                })
                .fold(0.0, f64::max);
            errs.push(err);
        }
        let lx: Vec<f64> = dts.iter().map(|d: &f64| d.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = lx.iter().sum::<f64>() / 3.0;
        let my = ly.iter().sum::<f64>() / 3.0;
        let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 2.0).abs() <= 0.2, "slope {slope}, errors {errs:?}");
    }
}
