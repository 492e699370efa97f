use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SquareGrid;
use crate::phantom::{OrganTemplate, Phantom, Shape, Split};

/// A conductivity in S/m, or a named special value such as `"inf"` for
/// perfect conductors, which have no finite truth image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionValue {
    Finite(f64),
    Named(String),
}

impl RegionValue {
    fn finite(&self, label: &str) -> Result<f64> {
        match self {
            RegionValue::Finite(v) if v.is_finite() && *v >= 0.0 => Ok(*v),
            RegionValue::Finite(v) => Err(Error::Invalid(format!("region '{label}' has conductivity {v}"))),
            RegionValue::Named(name) if is_infinite(name) => Err(Error::Unsupported(format!(
                "region '{label}' is a perfect conductor; no finite truth image exists"
            ))),
            RegionValue::Named(name) => Err(Error::Invalid(format!(
                "region '{label}' has unrecognised value '{name}'"
            ))),
        }
    }
}

fn is_infinite(name: &str) -> bool {
    matches!(name.to_ascii_lowercase().as_str(), "inf" | "infinite" | "infinity")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSplit {
    /// Direction of the cut-side normal, radians.
    pub angle: f64,
    pub offset: f64,
    pub value: RegionValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRegion {
    pub label: String,
    pub shape: Shape,
    pub value: RegionValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<TruthSplit>,
}

/// Regions drawn in order over the background; later regions win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub background: RegionValue,
    pub regions: Vec<TruthRegion>,
}

impl From<&Phantom> for TruthSpec {
    fn from(p: &Phantom) -> Self {
        TruthSpec {
            background: RegionValue::Finite(p.background),
            regions: p
                .inclusions
                .iter()
                .map(|inc| TruthRegion {
                    label: inc.label.clone(),
                    shape: inc.shape.clone(),
                    value: RegionValue::Finite(inc.conductivity),
                    split: inc.split.map(|s| TruthSplit {
                        angle: s.angle,
                        offset: s.offset,
                        value: RegionValue::Finite(s.conductivity),
                    }),
                })
                .collect(),
        }
    }
}

impl TruthSpec {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Rasterizes a truth spec on `grid`. Refuses specs with infinite values.
pub fn build_truth_image(spec: &TruthSpec, grid: &SquareGrid) -> Result<Vec<f64>> {
    let background = spec.background.finite("background")?;
    let mut regions = Vec::with_capacity(spec.regions.len());
    for r in &spec.regions {
        let value = r.value.finite(&r.label)?;
        let split = match &r.split {
            Some(s) => Some(Split {
                angle: s.angle,
                offset: s.offset,
                conductivity: s.value.finite(&r.label)?,
            }),
            None => None,
        };
        regions.push((&r.shape, value, split));
    }
    Ok(grid
        .points()
        .map(|z| {
            let p = [z.re, z.im];
            let mut v = background;
            for (shape, value, split) in &regions {
                if shape.contains(p) {
                    v = match split {
                        Some(s) if s.on_cut_side(p) => s.conductivity,
                        _ => *value,
                    };
                }
            }
            v
        })
        .collect())
}

/// Truth spec for a thorax tank from the organ template: each organ gets the
/// measured value of its class; an injury value, when given, replaces the
/// whole lower half (below mid-height) of the right lung.
pub fn act4_truth_spec(
    template: &OrganTemplate,
    background: RegionValue,
    class_values: &BTreeMap<String, RegionValue>,
    injury: Option<RegionValue>,
) -> Result<TruthSpec> {
    let mut regions = Vec::new();
    for organ in &template.organs {
        let value = class_values.get(&organ.class).cloned().ok_or_else(|| {
            Error::Invalid(format!("no measured value for tissue class '{}'", organ.class))
        })?;
        let shape = Shape::Polygon {
            vertices: organ.points.clone(),
        };
        let split = match (&injury, organ.name.as_str()) {
            (Some(v), "right_lung") => {
                let (lo, hi) = shape.vertical_extent();
                let mid = 0.5 * (lo + hi);
                Some(TruthSplit {
                    angle: -std::f64::consts::FRAC_PI_2,
                    offset: -mid,
                    value: v.clone(),
                })
            }
            _ => None,
        };
        regions.push(TruthRegion {
            label: organ.name.clone(),
            shape,
            value,
            split,
        });
    }
    Ok(TruthSpec { background, regions })
}
