use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::shape::{is_simple_polygon, InclusionSpec, Shape, Split};
use super::{Phantom, SUPPORT_RADIUS};
use crate::error::{Error, Result};

const BUILTIN_TEMPLATE: &str = include_str!("../../data/act4_template.json");

/// Retries of an organ's boundary noise before giving up.
const NOISE_RETRIES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrganSpec {
    pub name: String,
    /// Tissue class, used to look up measured values when building truth images.
    pub class: String,
    pub probability: f64,
    pub range: [f64; 2],
    pub injurable: bool,
    pub points: Vec<[f64; 2]>,
}

/// Approximate organ outlines plus the sampling laws for thorax phantoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrganTemplate {
    pub background_range: [f64; 2],
    pub injury_probability: f64,
    pub injury_range: [f64; 2],
    /// Standard deviation of the Gaussian perturbation of each outline point.
    pub noise_sd: f64,
    pub organs: Vec<OrganSpec>,
}

fn check_range(what: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
        return Err(Error::Invalid(format!("{what} range {r:?} is not a positive interval")));
    }
    Ok(())
}

fn check_probability(what: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Invalid(format!("{what} probability {p} outside [0, 1]")));
    }
    Ok(())
}

impl OrganTemplate {
    /// The outlines shipped with the crate.
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_TEMPLATE).expect("bundled organ template is valid JSON")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: OrganTemplate = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("organ template: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        check_range("background", self.background_range)?;
        check_range("injury", self.injury_range)?;
        check_probability("injury", self.injury_probability)?;
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Invalid(format!("noise_sd {} must be >= 0", self.noise_sd)));
        }
        for o in &self.organs {
            check_range(&o.name, o.range)?;
            check_probability(&o.name, o.probability)?;
            if !is_simple_polygon(&o.points) {
                return Err(Error::Invalid(format!(
                    "outline of {} is not a simple closed polygon",
                    o.name
                )));
            }
            let r = Shape::Polygon {
                vertices: o.points.clone(),
            }
            .max_radius();
            if r > SUPPORT_RADIUS {
                return Err(Error::Invalid(format!(
                    "outline of {} reaches radius {r:.3}",
                    o.name
                )));
            }
        }
        Ok(())
    }

    pub fn organ(&self, name: &str) -> Option<&OrganSpec> {
        self.organs.iter().find(|o| o.name == name)
    }
}

/// Injury of one lung: the cut sits at `level` (0 = lowest outline point,
/// 1 = highest) and the injured part is above the cut when `top`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjuryDraw {
    pub level: f64,
    pub top: bool,
    pub conductivity: f64,
}

/// All discrete and conductivity draws of one thorax phantom, separated from
/// the outline noise so tests can force particular outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Act4Draws {
    pub background: f64,
    pub included: Vec<bool>,
    pub conductivities: Vec<f64>,
    pub injuries: Vec<Option<InjuryDraw>>,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

impl Act4Draws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, template: &OrganTemplate) -> Self {
        let background = uniform(rng, template.background_range);
        let mut included = Vec::new();
        let mut conductivities = Vec::new();
        let mut injuries = Vec::new();
        for organ in &template.organs {
            let inc = rng.random::<f64>() < organ.probability;
            included.push(inc);
            conductivities.push(uniform(rng, organ.range));
            let injury = if inc && organ.injurable && rng.random::<f64>() < template.injury_probability {
                Some(InjuryDraw {
                    level: rng.random::<f64>(),
                    top: rng.random::<bool>(),
                    conductivity: uniform(rng, template.injury_range),
                })
            } else {
                None
            };
            injuries.push(injury);
        }
        Act4Draws {
            background,
            included,
            conductivities,
            injuries,
        }
    }

    /// Builds the phantom, drawing only the outline noise from `rng`.
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R, template: &OrganTemplate) -> Result<Phantom> {
        let count = template.organs.len();
        if self.included.len() != count
            || self.conductivities.len() != count
            || self.injuries.len() != count
        {
            return Err(Error::Invalid(format!(
                "draws cover {} organs, template has {count}",
                self.included.len()
            )));
        }
        let mut inclusions = Vec::new();
        for (i, organ) in template.organs.iter().enumerate() {
            if !self.included[i] {
                continue;
            }
            let vertices = perturb_outline(rng, &organ.points, template.noise_sd)
                .map_err(|e| Error::Geometry(format!("{}: {e}", organ.name)))?;
            let shape = Shape::Polygon { vertices };
            let split = self.injuries[i].map(|inj| {
                let (lo, hi) = shape.vertical_extent();
                let y = lo + inj.level * (hi - lo);
                let (angle, offset) = if inj.top {
                    (std::f64::consts::FRAC_PI_2, y)
                } else {
                    (-std::f64::consts::FRAC_PI_2, -y)
                };
                Split {
                    angle,
                    offset,
                    conductivity: inj.conductivity,
                }
            });
            inclusions.push(InclusionSpec {
                label: organ.name.clone(),
                shape,
                conductivity: self.conductivities[i],
                split,
            });
        }
        Ok(Phantom {
            background: self.background,
            inclusions,
        })
    }
}

/// Gaussian perturbation of each point followed by a circular 3-point moving
/// average, retried until the outline is simple and inside the support radius.
fn perturb_outline<R: Rng + ?Sized>(
    rng: &mut R,
    points: &[[f64; 2]],
    sd: f64,
) -> std::result::Result<Vec<[f64; 2]>, String> {
    if sd == 0.0 {
        return Ok(points.to_vec());
    }
    let normal = Normal::new(0.0, sd).map_err(|e| e.to_string())?;
    let n = points.len();
    for _ in 0..NOISE_RETRIES {
        let noisy: Vec<[f64; 2]> = points
            .iter()
            .map(|p| [p[0] + normal.sample(rng), p[1] + normal.sample(rng)])
            .collect();
        let smooth: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let (a, b, c) = (noisy[(i + n - 1) % n], noisy[i], noisy[(i + 1) % n]);
                [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
            })
            .collect();
        let radius = smooth.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        if is_simple_polygon(&smooth) && radius <= SUPPORT_RADIUS {
            return Ok(smooth);
        }
    }
    Err(format!("no valid perturbed outline after {NOISE_RETRIES} attempts"))
}

/// Random thorax phantom: organ inclusion, conductivities, outline noise and
/// horizontal lung injuries.
pub fn generate_act4_phantom<R: Rng + ?Sized>(rng: &mut R, template: &OrganTemplate) -> Result<Phantom> {
    let draws = Act4Draws::sample(rng, template);
    draws.build(rng, template)
}
