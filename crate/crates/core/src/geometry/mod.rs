//! Interface motion laws, phase membership and interface normals.
//!
//! Phase 2 is the bounded region enclosed by the interface, phase 1 its
//! complement in the computational box. Interface normals `n1` point from
//! phase 1 into phase 2.

mod interface;
pub mod polygon;

pub use interface::{InterfaceState, HISTORY_HEADER};
pub use polygon::{ray_cast, vertex_normal, Vertex};

use std::f64::consts::{PI, TAU};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    DegeneratePolygon(usize),
    #[error("tangent vanishes")]
    ZeroTangent,
    #[error("time {t} outside [{t0}, {t1}]")]
    OutOfRange { t: f64, t0: f64, t1: f64 },
    #[error("slice {slice} (t = {time}) self-intersects at edges {edges:?}; vertices {vertices:?}")]
    SelfIntersection {
        slice: usize,
        time: f64,
        edges: (usize, usize),
        vertices: Vec<Vertex>,
    },
    #[error("slice {slice} changed orientation")]
    OrientationFlip { slice: usize },
    #[error("invalid slices: {0}")]
    BadSlices(String),
    #[error("solution-driven interfaces have no closed-form parametrization")]
    NoParametrization,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    One,
    Two,
}

/// Which inequality decides prescribed-motion membership.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Membership {
    /// Rotate into the profile's frame before testing; consistent with the
    /// sampled interface points.
    #[default]
    Parametrization,
    /// Translate only, ignoring the rotation of the profile.
    Unrotated,
}

/// Axis-aligned computational box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Domain {
    pub fn square(lo: f64, hi: f64) -> Self {
        Self {
            xmin: lo,
            xmax: hi,
            ymin: lo,
            ymax: hi,
        }
    }
}

/// Centre motion shared by the helicoid laws: `c(t) = (x0 + vx t, y0 + vy t)`,
/// profile rotated by `omega t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drift {
    pub x0: f64,
    pub y0: f64,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Drift {
    pub fn centre(&self, t: f64) -> Vertex {
        [self.x0 + self.vx * t, self.y0 + self.vy * t]
    }
}

#[derive(Clone, Debug)]
pub enum MotionLaw {
    /// Rotating, translating ellipse with semi-axes `a0 + a1 t`, `b0 + b1 t`.
    HelicoidEllipse {
        drift: Drift,
        a: (f64, f64),
        b: (f64, f64),
    },
    /// Rotating, translating curve `r(theta, t) = 1 - amp t cos(lobes theta)`.
    CyclicHarmonic {
        drift: Drift,
        amp: f64,
        lobes: f64,
    },
    /// Stationary circle.
    Circle { cx: f64, cy: f64, r: f64 },
    /// Interface carried by vertex trajectories.
    SolutionDriven(Arc<InterfaceState>),
}

const DRIFT: Drift = Drift {
    x0: 1.2,
    y0: 1.2,
    vx: 0.6,
    vy: 0.6,
    omega: TAU,
};

impl MotionLaw {
    pub fn example1() -> Self {
        MotionLaw::HelicoidEllipse {
            drift: DRIFT,
            a: (1.0, 0.1),
            b: (1.0, -0.1),
        }
    }

    pub fn example2() -> Self {
        MotionLaw::CyclicHarmonic {
            drift: DRIFT,
            amp: 0.3,
            lobes: 5.0,
        }
    }

    /// Initial interface of the solution-driven example.
    pub fn example3_initial() -> Self {
        MotionLaw::Circle {
            cx: 1.5,
            cy: 1.5,
            r: 1.0,
        }
    }

    fn harmonic_radius(amp: f64, lobes: f64, theta: f64, t: f64) -> f64 {
        1.0 - amp * t * (lobes * theta).cos()
    }

    /// Interface point at parameter `theta` and time `t`.
    pub fn interface_point(&self, theta: f64, t: f64) -> Result<Vertex, GeometryError> {
        match self {
            MotionLaw::HelicoidEllipse { drift, a, b } => {
                let (a, b) = (a.0 + a.1 * t, b.0 + b.1 * t);
                let (sw, cw) = (drift.omega * t).sin_cos();
                let (s, c) = theta.sin_cos();
                let [cx, cy] = drift.centre(t);
                Ok([
                    cx + a * c * cw - b * s * sw,
                    cy + a * c * sw + b * s * cw,
                ])
            }
            MotionLaw::CyclicHarmonic { drift, amp, lobes } => {
                let r = Self::harmonic_radius(*amp, *lobes, theta, t);
                let (s, c) = (theta + drift.omega * t).sin_cos();
                let [cx, cy] = drift.centre(t);
                Ok([cx + r * c, cy + r * s])
            }
            MotionLaw::Circle { cx, cy, r } => {
                let (s, c) = theta.sin_cos();
                Ok([cx + r * c, cy + r * s])
            }
            MotionLaw::SolutionDriven(_) => Err(GeometryError::NoParametrization),
        }
    }

    /// Derivative of [`MotionLaw::interface_point`] with respect to `theta`.
    pub fn tangent(&self, theta: f64, t: f64) -> Result<Vertex, GeometryError> {
        match self {
            MotionLaw::HelicoidEllipse { drift, a, b } => {
                let (a, b) = (a.0 + a.1 * t, b.0 + b.1 * t);
                let (sw, cw) = (drift.omega * t).sin_cos();
                let (s, c) = theta.sin_cos();
                Ok([-a * s * cw - b * c * sw, -a * s * sw + b * c * cw])
            }
            MotionLaw::CyclicHarmonic { drift, amp, lobes } => {
                let r = Self::harmonic_radius(*amp, *lobes, theta, t);
                let r_theta = amp * t * lobes * (lobes * theta).sin();
                let (s, c) = (theta + drift.omega * t).sin_cos();
                Ok([r_theta * c - r * s, r_theta * s + r * c])
            }
            MotionLaw::Circle { r, .. } => {
                let (s, c) = theta.sin_cos();
                Ok([-r * s, r * c])
            }
            MotionLaw::SolutionDriven(_) => Err(GeometryError::NoParametrization),
        }
    }

    /// Unit normal at parameter `theta` (analytic laws) or vertex index
    /// `theta as usize` (solution-driven), pointing into phase 2.
    pub fn normal(&self, theta: f64, t: f64) -> Result<Vertex, GeometryError> {
        if let MotionLaw::SolutionDriven(state) = self {
            return state.normal(theta as usize, t);
        }
        let [tx, ty] = self.tangent(theta, t)?;
        let len = tx.hypot(ty);
        if len < 1e-12 {
            return Err(GeometryError::ZeroTangent);
        }
        Ok([-ty / len, tx / len])
    }

    /// Phase of point `p` at time `t`; points on the interface belong to phase 2.
    pub fn classify(&self, p: Vertex, t: f64, membership: Membership) -> Phase {
        let inside = match self {
            MotionLaw::HelicoidEllipse { drift, a, b } => {
                let (a, b) = (a.0 + a.1 * t, b.0 + b.1 * t);
                let [cx, cy] = drift.centre(t);
                let (dx, dy) = (p[0] - cx, p[1] - cy);
                let (xi, eta) = match membership {
                    Membership::Parametrization => {
                        let (s, c) = (drift.omega * t).sin_cos();
                        (c * dx + s * dy, -s * dx + c * dy)
                    }
                    Membership::Unrotated => (dx, dy),
                };
                (xi / a).powi(2) + (eta / b).powi(2) <= 1.0
            }
            MotionLaw::CyclicHarmonic { drift, amp, lobes } => {
                let [cx, cy] = drift.centre(t);
                let (dx, dy) = (p[0] - cx, p[1] - cy);
                let phi = dy.atan2(dx);
                let theta = match membership {
                    Membership::Parametrization => phi - drift.omega * t,
                    Membership::Unrotated => phi,
                };
                dx.hypot(dy) <= Self::harmonic_radius(*amp, *lobes, theta, t)
            }
            MotionLaw::Circle { cx, cy, r } => (p[0] - cx).hypot(p[1] - cy) <= *r,
            MotionLaw::SolutionDriven(state) => state.contains(p, t).unwrap_or(false),
        };
        if inside {
            Phase::Two
        } else {
            Phase::One
        }
    }
}

/// `n` evenly spaced angles on `[0, 2 pi)`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}
