//! PNG rendering of image-grid values with a min/max sidecar.
//!
//! Output is 8-bit RGB. Image rows run from `y = +1` at the top down to
//! `y = −1`, columns from `x = −1` on the left; each node becomes a
//! `scale × scale` block.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colormap {
    Viridis,
    Gray,
}

impl std::str::FromStr for Colormap {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "viridis" => Ok(Colormap::Viridis),
            "gray" | "grey" => Ok(Colormap::Gray),
            other => Err(format!("unknown colormap '{other}' (expected viridis or gray)")),
        }
    }
}

impl Colormap {
    pub fn rgb(self, t: f64) -> [u8; 3] {
        let t = t.clamp(0.0, 1.0);
        match self {
            Colormap::Viridis => {
                let c = colorous::VIRIDIS.eval_continuous(t);
                [c.r, c.g, c.b]
            }
            Colormap::Gray => {
                let v = (t * 255.0).round() as u8;
                [v, v, v]
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Colormap::Viridis => "viridis",
            Colormap::Gray => "gray",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub colormap: Colormap,
    /// Fixed value range; the image's own min/max when absent.
    pub range: Option<(f64, f64)>,
    pub scale: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            colormap: Colormap::Viridis,
            range: None,
            scale: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderInfo {
    pub min: f64,
    pub max: f64,
    pub colormap: Colormap,
}

/// Finite min and max of `values`.
pub fn value_range(values: &[f64]) -> Result<(f64, f64)> {
    let mut it = values.iter().copied().filter(|v| v.is_finite());
    let first = it
        .next()
        .ok_or_else(|| Error::Invalid("image has no finite values".into()))?;
    Ok(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("txt")
}

/// Renders an `n × n` row-major image (row index along `y`) and writes the
/// PNG plus a sidecar text file with the value range.
pub fn render_png(values: &[f64], n: usize, opts: &RenderOptions, path: &Path) -> Result<RenderInfo> {
    if values.len() != n * n || n == 0 {
        return Err(Error::GridMismatch(format!(
            "expected {n}x{n} values, got {}",
            values.len()
        )));
    }
    if opts.scale == 0 {
        return Err(Error::Invalid("render scale must be positive".into()));
    }
    let (min, max) = match opts.range {
        Some((lo, hi)) if lo <= hi && lo.is_finite() && hi.is_finite() => (lo, hi),
        Some((lo, hi)) => return Err(Error::Invalid(format!("invalid render range [{lo}, {hi}]"))),
        None => value_range(values)?,
    };
    let s = opts.scale;
    let side = n as u32 * s;
    let img = image::RgbImage::from_fn(side, side, |x, y| {
        let row = n - 1 - (y / s) as usize;
        let col = (x / s) as usize;
        let v = values[row * n + col];
        let t = if max > min { (v - min) / (max - min) } else { 0.0 };
        image::Rgb(opts.colormap.rgb(t))
    });
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let side_path = sidecar_path(path);
    let text = format!(
        "min: {min}\nmax: {max}\ncolormap: {}\nsize: {n}x{n}\nscale: {s}\norientation: top row is y = +1, left column is x = -1\n",
        opts.colormap.name()
    );
    std::fs::write(&side_path, text).map_err(|e| Error::io(&side_path, e))?;
    Ok(RenderInfo {
        min,
        max,
        colormap: opts.colormap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_gives_constant_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let info = render_png(&[0.3; 64], 8, &RenderOptions::default(), &path).unwrap();
        assert_eq!((info.min, info.max), (0.3, 0.3));
        let img = image::open(&path).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (32, 32));
        let first = *img.get_pixel(0, 0);
        assert!(img.pixels().all(|p| *p == first));
        let side = std::fs::read_to_string(sidecar_path(&path)).unwrap();
        assert!(side.contains("min: 0.3") && side.contains("max: 0.3"));
    }

    #[test]
    fn shared_range_maps_values_identically() {
        let dir = tempfile::tempdir().unwrap();
        let a: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..16).map(|i| 5.0 + (i % 3) as f64).collect();
        let opts = RenderOptions {
            colormap: Colormap::Gray,
            range: Some((0.0, 15.0)),
            scale: 1,
        };
        let (pa, pb) = (dir.path().join("a.png"), dir.path().join("b.png"));
        render_png(&a, 4, &opts, &pa).unwrap();
        render_png(&b, 4, &opts, &pb).unwrap();
        let (ia, ib) = (image::open(&pa).unwrap().to_rgb8(), image::open(&pb).unwrap().to_rgb8());
        // Value 5 sits at row 1, col 1 in `a` and row 0, col 0 in `b`;
        // row 0 is drawn at the bottom.
        assert_eq!(ia.get_pixel(1, 2), ib.get_pixel(0, 3));
        assert_eq!(ia.get_pixel(0, 3)[0], 0);
        assert_eq!(ia.get_pixel(3, 0)[0], 255);
    }

    #[test]
    fn rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        assert!(render_png(&[1.0; 15], 4, &RenderOptions::default(), &p).is_err());
        let bad = RenderOptions {
            range: Some((2.0, 1.0)),
            ..RenderOptions::default()
        };
        assert!(render_png(&[1.0; 16], 4, &bad, &p).is_err());
        assert!("jet".parse::<Colormap>().is_err());
    }
}
