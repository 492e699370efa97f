use serde::{Deserialize, Serialize};

/// Geometry of one inclusion, in unit-disc coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Closed polygon; the last vertex connects back to the first.
    Polygon { vertices: Vec<[f64; 2]> },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        rotation: f64,
    },
}

/// A straight cut through an inclusion. Points `p` with
/// `p · (cos angle, sin angle) > offset` take `conductivity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub angle: f64,
    pub offset: f64,
    pub conductivity: f64,
}

impl Split {
    pub fn on_cut_side(&self, p: [f64; 2]) -> bool {
        p[0] * self.angle.cos() + p[1] * self.angle.sin() > self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionSpec {
    pub label: String,
    pub shape: Shape,
    pub conductivity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl InclusionSpec {
    /// Conductivity at `p` if the point lies inside this inclusion.
    pub fn value_at(&self, p: [f64; 2]) -> Option<f64> {
        if !self.shape.contains(p) {
            return None;
        }
        match &self.split {
            Some(s) if s.on_cut_side(p) => Some(s.conductivity),
            _ => Some(self.conductivity),
        }
    }
}

impl Shape {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Shape::Polygon { vertices } => point_in_polygon(vertices, p),
            Shape::Ellipse {
                center,
                semi_axes,
                rotation,
            } => {
                let (s, c) = rotation.sin_cos();
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let u = (c * dx + s * dy) / semi_axes[0];
                let v = (-s * dx + c * dy) / semi_axes[1];
                u * u + v * v <= 1.0
            }
        }
    }

    /// `count` points on the boundary (polygon vertices are returned as is).
    pub fn boundary_points(&self, count: usize) -> Vec<[f64; 2]> {
        match self {
            Shape::Polygon { vertices } => vertices.clone(),
            Shape::Ellipse {
                center,
                semi_axes,
                rotation,
            } => {
                let (s, c) = rotation.sin_cos();
                (0..count)
                    .map(|i| {
                        let t = std::f64::consts::TAU * i as f64 / count as f64;
                        let (x, y) = (semi_axes[0] * t.cos(), semi_axes[1] * t.sin());
                        [center[0] + c * x - s * y, center[1] + s * x + c * y]
                    })
                    .collect()
            }
        }
    }

    /// Largest distance from the origin, exact for polygons and sampled on 256
    /// boundary points for ellipses.
    pub fn max_radius(&self) -> f64 {
        self.boundary_points(256)
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0, f64::max)
    }

    pub fn vertical_extent(&self) -> (f64, f64) {
        let pts = self.boundary_points(256);
        let lo = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Even-odd crossing test.
pub fn point_in_polygon(vertices: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    ((d1 > 0.0) != (d2 > 0.0)) && ((d3 > 0.0) != (d4 > 0.0)) && d1 != 0.0 && d3 != 0.0
}

/// True when no two non-adjacent edges of the closed polygon intersect.
pub fn is_simple_polygon(vertices: &[[f64; 2]]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
