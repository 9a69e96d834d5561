//! Interfaces represented by vertex trajectories over time slices.

use super::polygon::{find_self_intersection, ray_cast_unchecked, signed_area, vertex_normal};
use super::{GeometryError, Vertex};
use std::io::Write;

/// Polygon snapshots of a moving interface at increasing times.
///
/// All slices share vertex count and connectivity; vertex `i` of every slice
/// belongs to the trajectory that starts at vertex `i` of the first slice.
/// Vertices are stored counter-clockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceState {
    times: Vec<f64>,
    slices: Vec<Vec<Vertex>>,
}

impl InterfaceState {
    /// Validates and, if the first slice is clockwise, reverses every slice.
    pub fn new(times: Vec<f64>, mut slices: Vec<Vec<Vertex>>) -> Result<Self, GeometryError> {
        if times.is_empty() || times.len() != slices.len() {
            return Err(GeometryError::BadSlices(format!(
                "{} times for {} slices",
                times.len(),
                slices.len()
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) || times.iter().any(|t| !t.is_finite()) {
            return Err(GeometryError::BadSlices(
                "slice times must be finite and strictly increasing".into(),
            ));
        }
        let n = slices[0].len();
        if n < 3 {
            return Err(GeometryError::DegeneratePolygon(n));
        }
        if slices.iter().any(|s| s.len() != n) {
            return Err(GeometryError::BadSlices("vertex counts differ".into()));
        }
        if signed_area(&slices[0]) < 0.0 {
            for s in &mut slices {
                s.reverse();
            }
        }
        for (k, s) in slices.iter().enumerate() {
            if let Some((a, b)) = find_self_intersection(s) {
                return Err(GeometryError::SelfIntersection {
                    slice: k,
                    time: times[k],
                    edges: (a, b),
                    vertices: s.clone(),
                });
            }
            if signed_area(s) <= 0.0 {
                return Err(GeometryError::OrientationFlip { slice: k });
            }
        }
        Ok(Self { times, slices })
    }

    /// The same polygon at every time.
    pub fn stationary(times: Vec<f64>, polygon: Vec<Vertex>) -> Result<Self, GeometryError> {
        let slices = vec![polygon; times.len()];
        Self::new(times, slices)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn slices(&self) -> &[Vec<Vertex>] {
        &self.slices
    }

    pub fn vertex_count(&self) -> usize {
        self.slices[0].len()
    }

    /// Index `k` with `times[k] <= t <= times[k + 1]`.
    pub fn bracket(&self, t: f64) -> Result<usize, GeometryError> {
        let (t0, t1) = (self.times[0], self.times[self.times.len() - 1]);
        if !(t0..=t1).contains(&t) {
            return Err(GeometryError::OutOfRange { t, t0, t1 });
        }
        if self.times.len() == 1 {
            return Ok(0);
        }
        let k = self.times.partition_point(|&s| s <= t);
        Ok(k.saturating_sub(1).min(self.times.len() - 2))
    }

    /// Per-vertex linear interpolation between the bracketing slices.
    pub fn interp_vertices(&self, t: f64) -> Result<Vec<Vertex>, GeometryError> {
        let k = self.bracket(t)?;
        if self.times.len() == 1 || t == self.times[k] {
            return Ok(self.slices[k].clone());
        }
        if t == self.times[k + 1] {
            return Ok(self.slices[k + 1].clone());
        }
        let (ta, tb) = (self.times[k], self.times[k + 1]);
        let w = (t - ta) / (tb - ta);
        Ok(self.slices[k]
            .iter()
            .zip(&self.slices[k + 1])
            .map(|(a, b)| [(1.0 - w) * a[0] + w * b[0], (1.0 - w) * a[1] + w * b[1]])
            .collect())
    }

    /// Inside test against the interpolated polygon at time `t`.
    pub fn contains(&self, p: Vertex, t: f64) -> Result<bool, GeometryError> {
        let poly = self.interp_vertices(t)?;
        Ok(ray_cast_unchecked(&poly, p))
    }

    /// Normal at vertex `i` of the interpolated polygon, into the enclosed phase.
    pub fn normal(&self, i: usize, t: f64) -> Result<Vertex, GeometryError> {
        vertex_normal(&self.interp_vertices(t)?, i)
    }

    /// Appends rows `epoch,slice_time,vertex_index,x,y` for every vertex.
    pub fn write_history<W: Write>(&self, out: &mut csv::Writer<W>, epoch: usize) -> csv::Result<()> {
        for (t, s) in self.times.iter().zip(&self.slices) {
            for (i, v) in s.iter().enumerate() {
                out.serialize((epoch, t, i, v[0], v[1]))?;
            }
        }
        Ok(())
    }
}

/// Header row of interface history files.
pub const HISTORY_HEADER: [&str; 5] = ["epoch", "slice_time", "vertex_index", "x", "y"];

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(shift: f64) -> Vec<Vertex> {
        vec![
            [shift, 0.0],
            [shift + 1.0, 0.0],
            [shift + 1.0, 1.0],
            [shift, 1.0],
        ]
    }

    #[test]
    fn slice_time_returns_slice() {
        let st = InterfaceState::new(vec![0.0, 1.0], vec![square(0.0), square(2.0)]).unwrap();
        assert_eq!(st.interp_vertices(1.0).unwrap(), square(2.0));
        assert_eq!(st.interp_vertices(0.0).unwrap(), square(0.0));
    }

    #[test]
    fn midpoint_interpolation() {
        let st = InterfaceState::new(vec![0.0, 1.0], vec![square(0.0), square(1.0)]).unwrap();
        assert_eq!(st.interp_vertices(0.5).unwrap()[0], [0.5, 0.0]);
    }

    #[test]
    fn out_of_range() {
        let st = InterfaceState::stationary(vec![0.0, 1.0], square(0.0)).unwrap();
        assert!(matches!(
            st.interp_vertices(1.5),
            Err(GeometryError::OutOfRange { .. })
        ));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let mut cw = square(0.0);
        cw.reverse();
        let st = InterfaceState::stationary(vec![0.0], cw).unwrap();
        assert!(signed_area(&st.slices()[0]) > 0.0);
    }

    #[test]
    fn self_intersection_is_reported() {
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        let err = InterfaceState::new(vec![0.0, 1.0], vec![square(0.0), bow]).unwrap_err();
        assert!(matches!(err, GeometryError::SelfIntersection { slice: 1, .. }));
    }

    #[test]
    fn mismatched_slices_are_rejected() {
        assert!(InterfaceState::new(vec![0.0, 1.0], vec![square(0.0)]).is_err());
        assert!(InterfaceState::new(vec![1.0, 0.0], vec![square(0.0), square(0.0)]).is_err());
        let tri = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(InterfaceState::new(vec![0.0, 1.0], vec![square(0.0), tri]).is_err());
    }

    #[test]
    fn bracket_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut times: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
        times.sort_by(f64::total_cmp);
        let st = InterfaceState::stationary(times.clone(), square(0.0)).unwrap();
        for _ in 0..1000 {
            let t = rng.gen_range(times[0]..=times[9]);
            let scan = (0..9)
                .find(|&k| times[k] <= t && t <= times[k + 1])
                .unwrap();
            let k = st.bracket(t).unwrap();
            assert!(times[k] <= t && t <= times[k + 1]);
            // the scan picks the lowest bracket; both agree unless t is a slice time
            if !times.contains(&t) {
                assert_eq!(k, scan);
            }
        }
    }

    #[test]
    fn history_rows() {
        let st = InterfaceState::new(vec![0.0, 1.0], vec![square(0.0), square(1.0)]).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HISTORY_HEADER).unwrap();
        st.write_history(&mut w, 3).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().count(), 1 + 8);
        assert!(text.lines().nth(1).unwrap().starts_with("3,0.0,0,0.0,0.0"));
    }
}
