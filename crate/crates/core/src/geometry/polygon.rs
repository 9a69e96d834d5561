//! Planar polygon utilities.

use super::GeometryError;

pub type Vertex = [f64; 2];

/// Point-in-polygon by crossing parity of a horizontal ray towards `+x`.
///
/// An edge is counted when one endpoint lies strictly above the ray and the
/// other at or below it, so rays through vertices are counted once.
pub fn ray_cast(polygon: &[Vertex], p: Vertex) -> Result<bool, GeometryError> {
    if polygon.len() < 3 {
        return Err(GeometryError::DegeneratePolygon(polygon.len()));
    }
    Ok(ray_cast_unchecked(polygon, p))
}

pub(crate) fn ray_cast_unchecked(polygon: &[Vertex], p: Vertex) -> bool {
    let [px, py] = p;
    let mut inside = false;
    let mut j = polygon.len() - 1;
    for i in 0..polygon.len() {
        let [xi, yi] = polygon[i];
        let [xj, yj] = polygon[j];
        if (yi > py) != (yj > py) {
            let x_cross = xi + (py - yi) * (xj - xi) / (yj - yi);
            if px < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area(polygon: &[Vertex]) -> f64 {
    let n = polygon.len();
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = polygon[i];
        let [x1, y1] = polygon[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc
}

fn orient(a: Vertex, b: Vertex, c: Vertex) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: Vertex, b: Vertex, p: Vertex) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test, touching included.
pub fn segments_intersect(a: Vertex, b: Vertex, c: Vertex, d: Vertex) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// First pair of intersecting non-adjacent edges, if any.
pub fn find_self_intersection(polygon: &[Vertex]) -> Option<(usize, usize)> {
    let n = polygon.len();
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (polygon[j], polygon[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Unit normal at vertex `i` of a counter-clockwise polygon, pointing into
/// the enclosed region: the renormalized mean of the two adjacent edges'
/// inward normals.
pub fn vertex_normal(polygon: &[Vertex], i: usize) -> Result<Vertex, GeometryError> {
    let n = polygon.len();
    if n < 3 {
        return Err(GeometryError::DegeneratePolygon(n));
    }
    let prev = polygon[(i + n - 1) % n];
    let cur = polygon[i];
    let next = polygon[(i + 1) % n];
    let inward = |a: Vertex, b: Vertex| -> Result<Vertex, GeometryError> {
        let e = [b[0] - a[0], b[1] - a[1]];
        let len = e[0].hypot(e[1]);
        if len < 1e-12 {
            return Err(GeometryError::ZeroTangent);
        }
        Ok([-e[1] / len, e[0] / len])
    };
    let a = inward(prev, cur)?;
    let b = inward(cur, next)?;
    let s = [a[0] + b[0], a[1] + b[1]];
    let len = s[0].hypot(s[1]);
    if len < 1e-12 {
        return Err(GeometryError::ZeroTangent);
    }
    Ok([s[0] / len, s[1] / len])
}
