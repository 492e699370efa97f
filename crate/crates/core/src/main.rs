use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use serde::Serialize;

use eit_dbar::dataset::{generate_dataset, read_pair, write_pair, DatasetConfig, Style};
use eit_dbar::eit_data::{ElectrodeLayout, ElectrodeModel, ForwardConfig, MeasurementFile, PatternKind};
use eit_dbar::error::ErrorClass;
use eit_dbar::metrics::{build_truth_image, evaluate, EvalReport, MaskKind, SsimParams, TruthSpec};
use eit_dbar::numerics::SquareGrid;
use eit_dbar::phantom::{generate_act4_phantom, generate_kit4_phantom, Kit4Params, OrganTemplate, Phantom};
use eit_dbar::pipeline::{reconstruct_measurement, simulate_measurement, MeasuredConfig, Sigma0Mode};
use eit_dbar::render::{render_png, value_range, Colormap, RenderOptions};
use eit_dbar::Error;

const RUN_CONFIG: &str = "run_config.json";

#[derive(Parser)]
#[command(name = "eit-dbar", version, about = "D-bar reconstruction and training data for absolute EIT")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate phantoms and write EITP training pairs plus a manifest.
    GenerateDataset(GenerateArgs),
    /// Simulate electrode measurements of a phantom in a circular tank.
    Simulate(SimulateArgs),
    /// Reconstruct a conductivity image from a measurement file.
    Reconstruct(ReconstructArgs),
    /// SSIM and relative errors of EITP reconstructions.
    Evaluate(EvaluateArgs),
    /// Render EITP images to PNG.
    Render(RenderArgs),
}

#[derive(Args, Serialize)]
struct GenerateArgs {
    #[arg(long)]
    style: Style,
    /// Number of pairs (style default when absent).
    #[arg(long)]
    count: Option<usize>,
    /// Master seed (default 0, or the value in --config).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Keep valid pair files from an interrupted run.
    #[arg(long)]
    resume: bool,
    /// Index of the first pair; use disjoint ranges for validation sets.
    #[arg(long)]
    first_index: Option<u64>,
    /// Dataset configuration as JSON (bare, or an echoed run_config.json);
    /// other flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Nodes per side of the simulation k-grid.
    #[arg(long)]
    sim_k_nodes: Option<usize>,
    /// Nodes per side of the Beltrami grid.
    #[arg(long)]
    beltrami_nodes: Option<usize>,
    /// Nodes per side of the resampled k-grid.
    #[arg(long)]
    out_k_nodes: Option<usize>,
    /// Nodes per side of the image grid.
    #[arg(long)]
    z_nodes: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    radius_range: Option<Vec<f64>>,
    /// Relative tolerance of the iterative solvers.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PhantomKind {
    Kit4,
    Act4,
    Homogeneous,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PatternArg {
    Trigonometric,
    Adjacent,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelArg {
    Continuum,
    Gap,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    phantom: PhantomKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Background conductivity of the homogeneous phantom (S/m).
    #[arg(long, default_value_t = 0.3)]
    background: f64,
    /// Layout file; an equispaced circular layout is built when absent.
    #[arg(long)]
    layout: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    electrodes: usize,
    /// Tank radius (m).
    #[arg(long, default_value_t = 0.15)]
    tank_radius: f64,
    /// Electrode width (m).
    #[arg(long, default_value_t = 0.0125)]
    electrode_width: f64,
    #[arg(long, value_enum, default_value = "trigonometric")]
    patterns: PatternArg,
    #[arg(long, value_enum, default_value = "continuum")]
    model: ModelArg,
    #[arg(long, default_value_t = 128)]
    radial_cells: usize,
    #[arg(long, default_value_t = 256)]
    angular_cells: usize,
    /// Measurement JSON to write. The layout and truth spec go next to it.
    #[arg(long)]
    out: PathBuf,
}

fn parse_sigma0(s: &str) -> Result<Sigma0Mode, String> {
    if s == "fit" {
        return Ok(Sigma0Mode::Fit);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Sigma0Mode::Given(v)),
        _ => Err(format!("expected 'fit' or a positive conductivity, got '{s}'")),
    }
}

#[derive(Args, Serialize)]
struct ReconstructArgs {
    #[arg(long)]
    measurement: PathBuf,
    #[arg(long)]
    layout: PathBuf,
    /// Truncation radius of the scattering data.
    #[arg(long, default_value_t = 4.0)]
    radius: f64,
    /// `fit` or a known background conductivity (default: the value stored
    /// in the measurement file, else `fit`).
    #[arg(long, value_parser = parse_sigma0)]
    sigma0: Option<Sigma0Mode>,
    /// Scaling length (default: largest boundary radius).
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long, default_value_t = 32)]
    k_nodes: usize,
    #[arg(long, default_value_t = 64)]
    z_nodes: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Truth spec to embed in the output file.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "viridis")]
    colormap: Colormap,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ReportFormat {
    Text,
    Row,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Truth spec; the embedded truth is used when absent.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    mask: MaskKind,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
    /// SSIM dynamic range (default: the truth's max - min).
    #[arg(long)]
    dynamic_range: Option<f64>,
    /// Also write the report here, with the run config beside it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Field {
    Recon,
    Truth,
    Imag,
}

#[derive(Args, Serialize)]
struct RenderArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "recon")]
    field: Field,
    #[arg(long, default_value = "viridis")]
    colormap: Colormap,
    /// One min/max across all files instead of one per image.
    #[arg(long)]
    shared_scale: bool,
    /// Fixed value range.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"])]
    range: Option<Vec<f64>>,
    /// Pixels per grid node.
    #[arg(long, default_value_t = 4)]
    pixel_scale: u32,
    /// Output directory (default: next to each input).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunConfig<'a, A: Serialize, R: Serialize> {
    subcommand: &'a str,
    version: &'a str,
    threads: Option<usize>,
    args: &'a A,
    resolved: R,
}

fn echo_config<A: Serialize, R: Serialize>(
    path: &Path,
    subcommand: &str,
    threads: Option<usize>,
    args: &A,
    resolved: R,
) -> eit_dbar::Result<()> {
    let cfg = RunConfig {
        subcommand,
        version: env!("CARGO_PKG_VERSION"),
        threads,
        args,
        resolved,
    };
    let text = to_json(&cfg)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_file(path, text)
}

fn to_json<T: Serialize>(value: &T) -> eit_dbar::Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))
}

/// Prefixes load errors with the flag that named the file.
fn flag_context(flag: &str, e: Error) -> Error {
    match e {
        Error::Io { path, source } => Error::Invalid(format!("{flag} {}: {source}", path.display())),
        Error::Format { path, reason } => Error::Invalid(format!("{flag} {}: {reason}", path.display())),
        other => other,
    }
}

fn create_dir(dir: &Path) -> eit_dbar::Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: impl AsRef<[u8]>) -> eit_dbar::Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> eit_dbar::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_generate(args: &GenerateArgs, threads: Option<usize>) -> eit_dbar::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let value: serde_json::Value = read_json(path)?;
            // Accepts a bare configuration or an echoed run config.
            let value = match value.get("resolved") {
                Some(inner) => inner.clone(),
                None => value,
            };
            let cfg: DatasetConfig = serde_json::from_value(value).map_err(|e| Error::Format {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            if cfg.style != args.style {
                return Err(Error::Invalid(format!(
                    "--style {} disagrees with style {} in {}",
                    args.style,
                    cfg.style,
                    path.display()
                )));
            }
            cfg
        }
        None => DatasetConfig::for_style(args.style)?,
    };
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(c) = args.count {
        cfg.count = c;
    }
    if let Some(f) = args.first_index {
        cfg.first_index = f;
    }
    if let Some(n) = args.sim_k_nodes {
        cfg.sim_k.n = n;
    }
    if let Some(n) = args.beltrami_nodes {
        cfg.beltrami.n = n;
    }
    if let Some(n) = args.out_k_nodes {
        cfg.out_k = n;
    }
    if let Some(n) = args.z_nodes {
        cfg.z_grid = n;
    }
    if let Some(r) = &args.radius_range {
        cfg.radius_range = [r[0], r[1]];
    }
    if let Some(t) = args.tol {
        cfg.beltrami.krylov.tol = t;
        cfg.dbar.tol = t;
    }
    cfg.validate()?;
    create_dir(&args.out)?;
    echo_config(&args.out.join(RUN_CONFIG), "generate-dataset", threads, args, &cfg)?;
    let quiet = args.quiet;
    let manifest = generate_dataset(&cfg, &args.out, args.resume, |done, total| {
        if !quiet {
            eprintln!("pair {done}/{total}");
        }
    })?;
    println!(
        "wrote {} pairs to {} ({} failed attempts, {} missing)",
        manifest.pairs.len(),
        args.out.display(),
        manifest.failures.len(),
        manifest.missing.len()
    );
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, threads: Option<usize>) -> eit_dbar::Result<()> {
    let layout = match &args.layout {
        Some(path) => ElectrodeLayout::load(path)?,
        None => ElectrodeLayout::circle(args.tank_radius, args.electrodes, args.electrode_width)?,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let phantom = match args.phantom {
        PhantomKind::Kit4 => generate_kit4_phantom(&mut rng, &Kit4Params::default())?,
        PhantomKind::Act4 => generate_act4_phantom(&mut rng, &OrganTemplate::builtin())?,
        PhantomKind::Homogeneous => {
            if !(args.background > 0.0 && args.background.is_finite()) {
                return Err(Error::Invalid(format!("--background must be positive, got {}", args.background)));
            }
            Phantom::homogeneous(args.background)
        }
    };
    let patterns = match args.patterns {
        PatternArg::Trigonometric => PatternKind::Trigonometric,
        PatternArg::Adjacent => PatternKind::Adjacent,
    };
    let forward = ForwardConfig {
        radial: args.radial_cells,
        angular: args.angular_cells,
        model: match args.model {
            ModelArg::Continuum => ElectrodeModel::Continuum,
            ModelArg::Gap => ElectrodeModel::Gap,
        },
        ..ForwardConfig::default()
    };
    let file = simulate_measurement(&phantom, &layout, patterns, &forward)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    file.save(&args.out)?;
    let layout_path = sibling(&args.out, ".layout.json");
    let truth_path = sibling(&args.out, ".truth.json");
    write_file(&layout_path, to_json(layout.spec())?)?;
    write_file(&truth_path, to_json(&TruthSpec::from(&phantom))?)?;
    echo_config(
        &sibling(&args.out, ".run_config.json"),
        "simulate",
        threads,
        args,
        serde_json::json!({ "forward": forward, "phantom": phantom, "layout": layout.spec() }),
    )?;
    println!(
        "wrote {} ({} patterns), {} and {}",
        args.out.display(),
        file.currents.len(),
        layout_path.display(),
        truth_path.display()
    );
    Ok(())
}

fn cmd_reconstruct(args: &ReconstructArgs, threads: Option<usize>) -> eit_dbar::Result<()> {
    let layout = ElectrodeLayout::load(&args.layout).map_err(|e| flag_context("--layout", e))?;
    let file = MeasurementFile::load(&args.measurement).map_err(|e| flag_context("--measurement", e))?;
    let (layout, data) = file
        .resolve(&args.measurement, Some(&layout))
        .map_err(|e| flag_context("--measurement", e))?;
    let sigma0 = args
        .sigma0
        .or(file.sigma0.map(Sigma0Mode::Given))
        .unwrap_or(Sigma0Mode::Fit);
    let cfg = MeasuredConfig {
        radius: args.radius,
        k_nodes: args.k_nodes,
        z_nodes: args.z_nodes,
        sigma0,
        r0: args.r0.or(file.r0),
        forward: ForwardConfig::default(),
        dbar: eit_dbar::numerics::KrylovConfig {
            tol: args.tol,
            ..Default::default()
        },
    };
    cfg.validate()?;
    let truth = match &args.truth {
        Some(path) => {
            let spec = TruthSpec::load(path)?;
            Some(build_truth_image(&spec, &SquareGrid::new(args.z_nodes, 1.0)?)?)
        }
        None => None,
    };
    create_dir(&args.out)?;
    echo_config(&args.out.join(RUN_CONFIG), "reconstruct", threads, args, &cfg)?;
    let out = reconstruct_measurement(&layout, &data, &cfg)?;
    let pair = out.to_pair(truth)?;
    let eitp = args.out.join("recon.eitp");
    write_pair(&pair, &eitp)?;
    let png = args.out.join("recon.png");
    let opts = RenderOptions {
        colormap: args.colormap,
        ..RenderOptions::default()
    };
    let info = render_png(&pair.recon, pair.n, &opts, &png)?;
    println!("sigma0: {}", out.sigma0);
    println!("r0: {}", out.r0);
    println!("nd_asymmetry: {:.3e}", out.asymmetry);
    println!("max_imag_ratio: {:.3e}", out.recon.max_imag_ratio());
    println!("failed_nodes: {}", out.recon.masked.len());
    println!("range: [{}, {}]", info.min, info.max);
    if out.recon.imag_flagged() {
        eprintln!("warning: Im m(z,0) is large relative to Re m(z,0)");
    }
    println!("wrote {} and {}", eitp.display(), png.display());
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs, threads: Option<usize>) -> eit_dbar::Result<()> {
    let spec = args.truth.as_deref().map(TruthSpec::load).transpose()?;
    let params = SsimParams {
        dynamic_range: args.dynamic_range,
        ..SsimParams::default()
    };
    let mut reports = Vec::new();
    for path in &args.files {
        let pair = read_pair(path)?;
        let truth = match &spec {
            Some(s) => build_truth_image(s, &SquareGrid::with_any_size(pair.n, 1.0)?)?,
            None => {
                if pair.truth.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Invalid(format!(
                        "{} carries no truth image; pass --truth",
                        path.display()
                    )));
                }
                pair.truth.clone()
            }
        };
        reports.push((path.display().to_string(), evaluate(&pair.recon, &truth, pair.n, args.mask, &params)?));
    }
    let mut text = String::new();
    match args.format {
        ReportFormat::Text => {
            for (name, r) in &reports {
                text.push_str(&format!("file: {name}\n{}", r.to_text()));
            }
        }
        ReportFormat::Row => {
            text.push_str(EvalReport::ROW_HEADER);
            text.push('\n');
            for (name, r) in &reports {
                text.push_str(&r.to_row(name));
                text.push('\n');
            }
        }
    }
    print!("{text}");
    if let Some(out) = &args.out {
        echo_config(&sibling(out, ".run_config.json"), "evaluate", threads, args, params)?;
        write_file(out, &text)?;
    }
    Ok(())
}

fn cmd_render(args: &RenderArgs, threads: Option<usize>) -> eit_dbar::Result<()> {
    let mut images = Vec::new();
    for path in &args.files {
        let pair = read_pair(path)?;
        let values = match args.field {
            Field::Recon => pair.recon,
            Field::Truth => pair.truth,
            Field::Imag => pair.m0_imag,
        };
        images.push((path, pair.n, values));
    }
    let range = match (&args.range, args.shared_scale) {
        (Some(r), _) => Some((r[0], r[1])),
        (None, true) => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (_, _, v) in &images {
                let (a, b) = value_range(v)?;
                lo = lo.min(a);
                hi = hi.max(b);
            }
            Some((lo, hi))
        }
        (None, false) => None,
    };
    let opts = RenderOptions {
        colormap: args.colormap,
        range,
        scale: args.pixel_scale,
    };
    let suffix = match args.field {
        Field::Recon => "recon",
        Field::Truth => "truth",
        Field::Imag => "imag",
    };
    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
        echo_config(&dir.join("render_config.json"), "render", threads, args, opts)?;
    }
    for (path, n, values) in &images {
        let name = format!(
            "{}.{suffix}.png",
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        );
        let target = match &args.out_dir {
            Some(dir) => dir.join(name),
            None => {
                let target = path.with_file_name(name);
                echo_config(&sibling(&target, ".run_config.json"), "render", threads, args, opts)?;
                target
            }
        };
        let info = render_png(values, *n, &opts, &target)?;
        println!("{}: [{}, {}]", target.display(), info.min, info.max);
    }
    Ok(())
}

fn run(cli: Cli) -> eit_dbar::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invalid(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::GenerateDataset(a) => cmd_generate(a, cli.threads),
        Command::Simulate(a) => cmd_simulate(a, cli.threads),
        Command::Reconstruct(a) => cmd_reconstruct(a, cli.threads),
        Command::Evaluate(a) => cmd_evaluate(a, cli.threads),
        Command::Render(a) => cmd_render(a, cli.threads),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Validation => 1,
                ErrorClass::Numerical => 2,
            })
        }
    }
}
