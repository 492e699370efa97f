use rand::Rng;
use serde::{Deserialize, Serialize};

use super::shape::{InclusionSpec, Shape, Split};
use super::{Phantom, SUPPORT_RADIUS};
use crate::error::{Error, Result};

/// Sampling laws for split-ellipse phantoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kit4Params {
    pub max_inclusions: usize,
    pub semi_axis_range: [f64; 2],
    pub center_radius: f64,
    pub background_range: [f64; 2],
    pub conductive_range: [f64; 2],
    pub resistive_range: [f64; 2],
    pub split_probability: f64,
    /// Smallest allowed area fraction of either side of a split.
    pub min_split_fraction: f64,
    pub placement_retries: usize,
    pub phantom_retries: usize,
}

impl Default for Kit4Params {
    fn default() -> Self {
        Kit4Params {
            max_inclusions: 3,
            semi_axis_range: [0.2, 0.35],
            center_radius: 0.6,
            background_range: [0.13, 0.145],
            conductive_range: [0.29, 0.34],
            resistive_range: [0.05, 0.075],
            split_probability: 1.0 / 3.0,
            min_split_fraction: 0.25,
            placement_retries: 200,
            phantom_retries: 100,
        }
    }
}

/// Area fraction of the unit disc beyond the chord at signed distance `s`.
fn cap_fraction(s: f64) -> f64 {
    (s.acos() - s * (1.0 - s * s).sqrt()) / std::f64::consts::PI
}

/// Largest normalized chord offset `s` for which both sides of a cut through an
/// ellipse keep at least `min_fraction` of its area.
///
/// Affine maps preserve area ratios, so the ellipse case reduces to the unit disc.
pub fn split_offset_limit(min_fraction: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cap_fraction(mid) > min_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn overlaps(a: &Shape, b: &Shape) -> bool {
    let centre = |s: &Shape| match s {
        Shape::Ellipse { center, .. } => *center,
        Shape::Polygon { vertices } => vertices[0],
    };
    if a.contains(centre(b)) || b.contains(centre(a)) {
        return true;
    }
    a.boundary_points(256).into_iter().any(|p| b.contains(p))
        || b.boundary_points(256).into_iter().any(|p| a.contains(p))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    rng.random_range(r[0]..=r[1])
}

fn place<R: Rng + ?Sized>(rng: &mut R, p: &Kit4Params, placed: &[Shape]) -> Option<Shape> {
    for _ in 0..p.placement_retries {
        let rho = rng.random_range(0.0..=p.center_radius);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let shape = Shape::Ellipse {
            center: [rho * theta.cos(), rho * theta.sin()],
            semi_axes: [uniform(rng, p.semi_axis_range), uniform(rng, p.semi_axis_range)],
            rotation: rng.random_range(0.0..std::f64::consts::TAU),
        };
        if shape.max_radius() <= SUPPORT_RADIUS && placed.iter().all(|s| !overlaps(s, &shape)) {
            return Some(shape);
        }
    }
    None
}

fn split_for<R: Rng + ?Sized>(rng: &mut R, p: &Kit4Params, shape: &Shape, other: f64) -> Split {
    let Shape::Ellipse {
        center,
        semi_axes,
        rotation,
    } = shape
    else {
        unreachable!("split ellipses only")
    };
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let phi = angle - rotation;
    let width = (semi_axes[0] * phi.cos()).hypot(semi_axes[1] * phi.sin());
    let limit = split_offset_limit(p.min_split_fraction);
    let s = rng.random_range(-limit..=limit);
    Split {
        angle,
        offset: center[0] * angle.cos() + center[1] * angle.sin() + s * width,
        conductivity: other,
    }
}

/// Random phantom of one to three disjoint ellipses, some of them split.
pub fn generate_kit4_phantom<R: Rng + ?Sized>(rng: &mut R, params: &Kit4Params) -> Result<Phantom> {
    if params.max_inclusions == 0 {
        return Err(Error::Invalid("max_inclusions must be at least 1".into()));
    }
    'attempt: for _ in 0..params.phantom_retries {
        let count = rng.random_range(1..=params.max_inclusions);
        let mut shapes: Vec<Shape> = Vec::with_capacity(count);
        for _ in 0..count {
            match place(rng, params, &shapes) {
                Some(s) => shapes.push(s),
                None => continue 'attempt,
            }
        }
        let background = uniform(rng, params.background_range);
        let mut inclusions = Vec::with_capacity(count);
        for (i, shape) in shapes.into_iter().enumerate() {
            let conductive = rng.random::<bool>();
            let (own, opposite) = if conductive {
                (params.conductive_range, params.resistive_range)
            } else {
                (params.resistive_range, params.conductive_range)
            };
            let conductivity = uniform(rng, own);
            let split = if rng.random::<f64>() < params.split_probability {
                let other = if rng.random::<bool>() {
                    background
                } else {
                    uniform(rng, opposite)
                };
                Some(split_for(rng, params, &shape, other))
            } else {
                None
            };
            inclusions.push(InclusionSpec {
                label: format!("ellipse{i}"),
                shape,
                conductivity,
                split,
            });
        }
        return Ok(Phantom {
            background,
            inclusions,
        });
    }
    Err(Error::Geometry(format!(
        "no overlap-free ellipse placement after {} phantom attempts",
        params.phantom_retries
    )))
}
