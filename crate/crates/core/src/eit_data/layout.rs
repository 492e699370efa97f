use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// Circle of the given radius (meters) centred at the origin, traversed
    /// counterclockwise from the positive x axis.
    Circle { radius: f64 },
    /// Closed polyline around the origin; arclength starts at the first point.
    Polygon { points: Vec<[f64; 2]> },
}

/// One electrode: centre position as arclength along the boundary, and width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElectrodePlacement {
    List(Vec<Electrode>),
    Equispaced {
        count: usize,
        width: f64,
        #[serde(default)]
        offset: f64,
    },
}

/// On-disk description of a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub id: String,
    pub boundary: Boundary,
    pub electrodes: ElectrodePlacement,
}

/// Boundary curve with electrode geometry resolved: centres, outward normals
/// and the boundary arclength attributed to each electrode.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeLayout {
    spec: LayoutSpec,
    electrodes: Vec<Electrode>,
    perimeter: f64,
    r0: f64,
    centers: Vec<[f64; 2]>,
    normals: Vec<[f64; 2]>,
    spacing: Vec<f64>,
}

struct Polyline {
    points: Vec<[f64; 2]>,
    cumulative: Vec<f64>,
}

impl Polyline {
    fn new(mut points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Invalid("polygon boundary needs at least 3 points".into()));
        }
        let n = points.len();
        let area: f64 = (0..n)
            .map(|i| {
                let (a, b) = (points[i], points[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if area == 0.0 {
            return Err(Error::Invalid("polygon boundary has zero area".into()));
        }
        if area < 0.0 {
            points.reverse();
            points.rotate_right(1);
        }
        let mut cumulative = vec![0.0];
        for i in 0..n {
            let (a, b) = (points[i], points[(i + 1) % n]);
            cumulative.push(cumulative[i] + (b[0] - a[0]).hypot(b[1] - a[1]));
        }
        Ok(Polyline { points, cumulative })
    }

    fn perimeter(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn at(&self, s: f64) -> [f64; 2] {
        let p = self.perimeter();
        let s = s.rem_euclid(p);
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(self.points.len() - 1),
            Err(i) => i - 1,
        };
        let (a, b) = (self.points[i], self.points[(i + 1) % self.points.len()]);
        let len = self.cumulative[i + 1] - self.cumulative[i];
        let t = if len > 0.0 { (s - self.cumulative[i]) / len } else { 0.0 };
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    }
}

impl ElectrodeLayout {
    pub fn from_spec(spec: LayoutSpec) -> Result<Self> {
        let (perimeter, r0, position): (f64, f64, Box<dyn Fn(f64) -> [f64; 2]>) = match &spec.boundary {
            Boundary::Circle { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::Invalid(format!("circle radius must be positive, got {radius}")));
                }
                let r = *radius;
                (TAU * r, r, Box::new(move |s: f64| [r * (s / r).cos(), r * (s / r).sin()]))
            }
            Boundary::Polygon { points } => {
                let line = Polyline::new(points.clone())?;
                let r0 = points.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
                (line.perimeter(), r0, Box::new(move |s: f64| line.at(s)))
            }
        };
        let electrodes = match &spec.electrodes {
            ElectrodePlacement::List(list) => list.clone(),
            ElectrodePlacement::Equispaced {
                count,
                width,
                offset,
            } => (0..*count)
                .map(|l| Electrode {
                    center: offset + perimeter * l as f64 / *count as f64,
                    width: *width,
                })
                .collect(),
        };
        let l = electrodes.len();
        if l < 3 {
            return Err(Error::Invalid(format!("need at least 3 electrodes, got {l}")));
        }
        for (i, e) in electrodes.iter().enumerate() {
            if !(e.width > 0.0 && e.width.is_finite() && e.center.is_finite()) {
                return Err(Error::Invalid(format!("electrode {i} has invalid geometry {e:?}")));
            }
        }
        for i in 0..l {
            let (a, b) = (electrodes[i], electrodes[(i + 1) % l]);
            let mut gap = b.center - a.center;
            if i + 1 == l {
                gap += perimeter;
            }
            if gap < 0.5 * (a.width + b.width) - 1e-12 * perimeter {
                return Err(Error::Invalid(format!(
                    "electrodes {i} and {} overlap or are out of order",
                    (i + 1) % l
                )));
            }
        }
        let step = match &spec.boundary {
            Boundary::Circle { .. } => 1e-6 * perimeter,
            Boundary::Polygon { points } => perimeter / points.len() as f64,
        };
        let mut centers = Vec::with_capacity(l);
        let mut normals = Vec::with_capacity(l);
        for e in &electrodes {
            centers.push(position(e.center));
            let (a, b) = (position(e.center - step), position(e.center + step));
            let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
            let len = tx.hypot(ty);
            normals.push([ty / len, -tx / len]);
        }
        let spacing = (0..l)
            .map(|i| {
                let prev = electrodes[(i + l - 1) % l].center - if i == 0 { perimeter } else { 0.0 };
                let next = electrodes[(i + 1) % l].center + if i + 1 == l { perimeter } else { 0.0 };
                0.5 * (next - prev)
            })
            .collect();
        Ok(ElectrodeLayout {
            spec,
            electrodes,
            perimeter,
            r0,
            centers,
            normals,
            spacing,
        })
    }

    /// `count` equispaced electrodes of equal width on a circle, the first
    /// centred on the positive x axis.
    pub fn circle(radius: f64, count: usize, width: f64) -> Result<Self> {
        Self::from_spec(LayoutSpec {
            id: format!("circle-{count}"),
            boundary: Boundary::Circle { radius },
            electrodes: ElectrodePlacement::Equispaced {
                count,
                width,
                offset: 0.0,
            },
        })
    }

    /// Circle with electrodes covering the whole boundary.
    pub fn full_coverage_circle(radius: f64, count: usize) -> Result<Self> {
        Self::circle(radius, count, TAU * radius / count as f64)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: LayoutSpec =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        Self::from_spec(spec).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn spec(&self) -> &LayoutSpec {
        &self.spec
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn len(&self) -> usize {
        self.electrodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electrodes.is_empty()
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn widths(&self) -> Vec<f64> {
        self.electrodes.iter().map(|e| e.width).collect()
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// Largest distance of the boundary from the origin.
    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn normals(&self) -> &[[f64; 2]] {
        &self.normals
    }

    /// Boundary arclength attributed to each electrode (half the distance to
    /// each neighbour's centre), used as quadrature weights.
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Angles of the electrode centres.
    pub fn angles(&self) -> Vec<f64> {
        self.centers.iter().map(|c| c[1].atan2(c[0])).collect()
    }

    pub fn circle_radius(&self) -> Option<f64> {
        match self.spec.boundary {
            Boundary::Circle { radius } => Some(radius),
            Boundary::Polygon { .. } => None,
        }
    }
}
