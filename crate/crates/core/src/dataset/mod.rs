//! Training pairs `{σ̃, σ_DB}`: phantom → τ on the simulation grid → T →
//! random radius → resample → truncate/threshold → low-pass reconstruction,
//! written as EITP files with a JSON manifest.

pub mod eitp;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beltrami::{beltrami_coefficient, beltrami_scattering, BeltramiConfig};
use crate::dbar::{reconstruct, DbarSolveConfig};
use crate::error::{Error, Result};
use crate::numerics::{KrylovConfig, SquareGrid};
use crate::phantom::{
    generate_act4_phantom, generate_kit4_phantom, scale_to_unit_boundary, Kit4Params,
    OrganTemplate, Phantom,
};
use crate::scattering::{resample, tau_to_t, truncate_threshold, DEFAULT_THRESHOLD};

pub use eitp::{read_pair, write_pair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Act4,
    Kit4,
    /// Reconstruction from measurements; no truth image.
    Measured,
}

impl Style {
    pub fn code(self) -> u8 {
        match self {
            Style::Act4 => 0,
            Style::Kit4 => 1,
            Style::Measured => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Style::Act4),
            1 => Some(Style::Kit4),
            2 => Some(Style::Measured),
            _ => None,
        }
    }
}

impl FromStr for Style {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "act4" => Ok(Style::Act4),
            "kit4" => Ok(Style::Kit4),
            "measured" => Ok(Style::Measured),
            other => Err(format!("unknown style '{other}' (expected act4 or kit4)")),
        }
    }
}

impl std::fmt::Display for Style {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Style::Act4 => "act4",
            Style::Kit4 => "kit4",
            Style::Measured => "measured",
        })
    }
}

/// One square grid: `n` nodes per side on `[-half_width, half_width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub half_width: f64,
}

impl GridSpec {
    pub fn grid(&self) -> Result<SquareGrid> {
        SquareGrid::new(self.n, self.half_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub style: Style,
    pub count: usize,
    pub master_seed: u64,
    /// Index of the first pair; disjoint index ranges give disjoint seeds.
    #[serde(default)]
    pub first_index: u64,
    /// k-grid on which τ is simulated.
    pub sim_k: GridSpec,
    /// `R_n` is uniform on this closed interval.
    pub radius_range: [f64; 2],
    /// Nodes per side of the resampled k-grid on `[-R_n, R_n)`.
    pub out_k: usize,
    pub thresh: f64,
    /// Nodes per side of the image grid on `[-1, 1)`.
    pub z_grid: usize,
    pub beltrami: BeltramiConfig,
    pub dbar: KrylovConfig,
    /// Fresh-seed attempts per pair after the first failure.
    pub max_retries: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act4_template: Option<OrganTemplate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kit4_params: Option<Kit4Params>,
}

impl DatasetConfig {
    /// Sizes, grids and radii of the two training sets.
    pub fn for_style(style: Style) -> Result<Self> {
        let (count, half_width, radius_range) = match style {
            Style::Act4 => (4096, 5.0, [3.5, 5.0]),
            Style::Kit4 => (15360, 5.5, [4.0, 5.5]),
            Style::Measured => {
                return Err(Error::Invalid("datasets are generated for act4 or kit4 only".into()))
            }
        };
        Ok(DatasetConfig {
            style,
            count,
            master_seed: 0,
            first_index: 0,
            sim_k: GridSpec { n: 32, half_width },
            radius_range,
            out_k: 64,
            thresh: DEFAULT_THRESHOLD,
            z_grid: 64,
            beltrami: BeltramiConfig::default(),
            dbar: KrylovConfig::default(),
            max_retries: 3,
            act4_template: None,
            kit4_params: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.style == Style::Measured {
            return Err(Error::Invalid("datasets are generated for act4 or kit4 only".into()));
        }
        if self.count == 0 {
            return Err(Error::Invalid("count must be positive".into()));
        }
        self.sim_k.grid()?;
        self.beltrami.grid()?;
        SquareGrid::new(self.out_k, 1.0)?;
        self.z_grid()?;
        let [lo, hi] = self.radius_range;
        if !(lo > 0.0 && lo <= hi && hi <= self.sim_k.half_width) {
            return Err(Error::Invalid(format!(
                "radius range [{lo}, {hi}] must lie in (0, {}]",
                self.sim_k.half_width
            )));
        }
        if !(self.thresh > 0.0) {
            return Err(Error::Invalid(format!("threshold must be positive, got {}", self.thresh)));
        }
        if let Some(t) = &self.act4_template {
            t.validate()?;
        }
        Ok(())
    }

    pub fn z_grid(&self) -> Result<SquareGrid> {
        SquareGrid::new(self.z_grid, 1.0)
    }

    pub fn dbar_config(&self) -> Result<DbarSolveConfig> {
        Ok(DbarSolveConfig {
            z_grid: self.z_grid()?,
            krylov: self.dbar,
        })
    }
}

/// Truth and reconstruction on the same `n × n` image grid over `[-1, 1)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub style: Style,
    pub n: usize,
    pub truth: Vec<f64>,
    pub recon: Vec<f64>,
    pub m0_imag: Vec<f64>,
    pub seed: u64,
    pub radius: f64,
    pub sigma_b: f64,
}

impl TrainingPair {
    pub fn grid(&self) -> Result<SquareGrid> {
        SquareGrid::with_any_size(self.n, 1.0)
    }

    pub fn check(&self) -> Result<()> {
        let len = self.n * self.n;
        if self.n == 0 || self.truth.len() != len || self.recon.len() != len || self.m0_imag.len() != len {
            return Err(Error::GridMismatch(format!(
                "pair arrays must all hold {len} values (truth {}, recon {}, imag {})",
                self.truth.len(),
                self.recon.len(),
                self.m0_imag.len()
            )));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of attempt `attempt` for pair `index`.
pub fn derive_seed(master: u64, index: u64, attempt: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ index) ^ attempt)
}

/// Runs the pipeline on a given phantom; `rng` supplies `R_n`.
pub fn pair_from_phantom<R: Rng + ?Sized>(
    phantom: &Phantom,
    rng: &mut R,
    seed: u64,
    cfg: &DatasetConfig,
) -> Result<TrainingPair> {
    let [lo, hi] = cfg.radius_range;
    let radius = if lo == hi { lo } else { rng.random_range(lo..=hi) };

    let sigma_b = phantom.background;
    let box_image = phantom.rasterize(cfg.beltrami.grid()?)?;
    let scaled = scale_to_unit_boundary(&box_image)?;
    let mu = beltrami_coefficient(&scaled)?;
    let tau = beltrami_scattering(&mu, cfg.sim_k.grid()?, &cfg.beltrami.krylov)?;
    let t = tau_to_t(&tau)?;
    let t = resample(&t, SquareGrid::new(cfg.out_k, radius)?)?;
    let t = truncate_threshold(&t, radius, cfg.thresh)?;
    let dbar_cfg = cfg.dbar_config()?;
    let recon = reconstruct(&t, sigma_b, &dbar_cfg)?;
    if recon.nonpositive_count() > 0 {
        return Err(Error::Singular(format!(
            "{} reconstruction nodes are not positive",
            recon.nonpositive_count()
        )));
    }
    let truth = phantom.rasterize(dbar_cfg.z_grid)?;
    Ok(TrainingPair {
        style: cfg.style,
        n: cfg.z_grid,
        truth: truth.into_values(),
        recon: recon.sigma_db,
        m0_imag: recon.m0.iter().map(|m| m.im).collect(),
        seed,
        radius,
        sigma_b,
    })
}

/// Draws the phantom of the configured style from `rng`.
pub fn draw_phantom<R: Rng + ?Sized>(rng: &mut R, cfg: &DatasetConfig) -> Result<Phantom> {
    match cfg.style {
        Style::Act4 => {
            let builtin;
            let template = match &cfg.act4_template {
                Some(t) => t,
                None => {
                    builtin = OrganTemplate::builtin();
                    &builtin
                }
            };
            generate_act4_phantom(rng, template)
        }
        Style::Kit4 => generate_kit4_phantom(rng, &cfg.kit4_params.clone().unwrap_or_default()),
        Style::Measured => Err(Error::Invalid("no phantom generator for measured data".into())),
    }
}

/// One attempt at pair `index` with its derived seed.
pub fn generate_pair_attempt(index: u64, attempt: u64, cfg: &DatasetConfig) -> Result<TrainingPair> {
    let seed = derive_seed(cfg.master_seed, index, attempt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phantom = draw_phantom(&mut rng, cfg)?;
    pair_from_phantom(&phantom, &mut rng, seed, cfg)
}

/// All attempts at pair `index` (absolute, i.e. including `first_index`):
/// the pair if one attempt succeeded, and every failed attempt.
pub fn run_pair_attempts(index: u64, cfg: &DatasetConfig) -> (Option<TrainingPair>, Vec<FailureRecord>) {
    let mut failures = Vec::new();
    for attempt in 0..=cfg.max_retries as u64 {
        match generate_pair_attempt(index, attempt, cfg) {
            Ok(pair) => return (Some(pair), failures),
            Err(e) => failures.push(FailureRecord {
                index,
                attempt,
                seed: derive_seed(cfg.master_seed, index, attempt),
                error: e.to_string(),
            }),
        }
    }
    (None, failures)
}

/// Pair `index`, retrying with fresh derived seeds.
pub fn generate_pair(index: u64, cfg: &DatasetConfig) -> Result<TrainingPair> {
    match run_pair_attempts(index, cfg) {
        (Some(pair), _) => Ok(pair),
        (None, failures) => Err(Error::PartialFailure {
            failed: failures.len(),
            total: failures.len(),
            first: format!(
                "pair {index}: {}",
                failures.first().map(|f| f.error.as_str()).unwrap_or("")
            ),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub index: u64,
    pub attempt: u64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub index: u64,
    pub file: String,
    pub seed: u64,
    pub radius: f64,
    pub sigma_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u16,
    pub config: DatasetConfig,
    pub pairs: Vec<PairRecord>,
    pub failures: Vec<FailureRecord>,
    /// Indices that failed every attempt.
    pub missing: Vec<u64>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Largest fraction of pairs allowed to fail all attempts.
pub const MAX_FAILED_PAIRS: f64 = 0.01;

pub fn pair_file_name(index: u64) -> String {
    format!("pair_{index:06}.eitp")
}

/// Generates (or resumes) a dataset in `out`.
///
/// An existing manifest must carry the same configuration. With `resume`,
/// pair files that decode and carry the expected seed are kept; the rest are
/// regenerated. `progress` is called after each pair with (done, total).
pub fn generate_dataset(
    cfg: &DatasetConfig,
    out: &Path,
    resume: bool,
    mut progress: impl FnMut(usize, usize),
) -> Result<Manifest> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let manifest_path = out.join(MANIFEST_NAME);
    let previous = if manifest_path.exists() {
        let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
        if &m.config != cfg {
            return Err(Error::Invalid(format!(
                "{} was written with a different configuration",
                manifest_path.display()
            )));
        }
        Some(m)
    } else {
        None
    };

    let mut manifest = Manifest {
        format: "EITP".into(),
        version: eitp::VERSION,
        config: cfg.clone(),
        pairs: Vec::with_capacity(cfg.count),
        failures: Vec::new(),
        missing: Vec::new(),
    };
    if previous.is_none() {
        // Records the configuration up front so an interrupted run can only be
        // resumed with the same settings.
        write_manifest(&manifest, &manifest_path)?;
    }
    let limit = (MAX_FAILED_PAIRS * cfg.count as f64).floor() as usize;
    for offset in 0..cfg.count as u64 {
        let index = cfg.first_index + offset;
        let file = pair_file_name(index);
        let path: PathBuf = out.join(&file);
        let kept = if resume { reusable(&path, index, cfg, previous.as_ref()) } else { None };
        let (pair, attempt_failures) = match kept {
            Some(k) => (Some(k.0), k.1),
            None => {
                let (pair, failures) = run_pair_attempts(index, cfg);
                if let Some(p) = &pair {
                    write_pair(p, &path)?;
                }
                (pair, failures)
            }
        };
        manifest.failures.extend(attempt_failures);
        match pair {
            Some(pair) => manifest.pairs.push(PairRecord {
                index,
                file,
                seed: pair.seed,
                radius: pair.radius,
                sigma_b: pair.sigma_b,
            }),
            None => {
                manifest.missing.push(index);
                if manifest.missing.len() > limit {
                    write_manifest(&manifest, &manifest_path)?;
                    return Err(Error::PartialFailure {
                        failed: manifest.missing.len(),
                        total: cfg.count,
                        first: manifest
                            .failures
                            .iter()
                            .find(|f| f.index == manifest.missing[0])
                            .map(|f| format!("pair {}: {}", f.index, f.error))
                            .unwrap_or_default(),
                    });
                }
            }
        }
        progress(offset as usize + 1, cfg.count);
    }
    write_manifest(&manifest, &manifest_path)?;
    Ok(manifest)
}

fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::format(path, e.to_string()))?;
    eitp::write_atomic(path, text.as_bytes())
}

/// An existing pair file that decodes and carries the seed this run would
/// produce, with the failed attempts recorded before it.
fn reusable(
    path: &Path,
    index: u64,
    cfg: &DatasetConfig,
    previous: Option<&Manifest>,
) -> Option<(TrainingPair, Vec<FailureRecord>)> {
    let pair = read_pair(path).ok()?;
    let prior: Vec<FailureRecord> = previous
        .map(|m| m.failures.iter().filter(|f| f.index == index).cloned().collect())
        .unwrap_or_default();
    let expected = derive_seed(cfg.master_seed, index, prior.len() as u64);
    (pair.seed == expected && pair.n == cfg.z_grid && pair.style == cfg.style).then_some((pair, prior))
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

#[cfg(test)]
mod tests;
