//! C interface to `eit_dbar`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_read`/
//! `*_generate`-style calls and released by the matching `*_free`. Every
//! fallible call returns an `EitStatus`; on failure the message is
//! available from `eit_last_error_message` on the same thread until the
//! next failing call. Panics are caught and reported as
//! `EitStatus::Panic`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use eit_dbar::dataset::{generate_pair, read_pair, write_pair, DatasetConfig, Style, TrainingPair};
use eit_dbar::dbar::{reconstruct, DbarSolveConfig, LowPassReconstruction};
use eit_dbar::eit_data::{ElectrodeLayout, MeasurementFile};
use eit_dbar::error::ErrorClass;
use eit_dbar::metrics::{evaluate, MaskKind, SsimParams};
use eit_dbar::numerics::{KrylovConfig, SquareGrid};
use eit_dbar::pipeline::{reconstruct_measurement, MeasuredConfig, Sigma0Mode};
use eit_dbar::scattering::{Flavor, ScatteringData};
use eit_dbar::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EitStatus {
    Ok = 0,
    /// Bad arguments, malformed files or unsupported input.
    Invalid = 1,
    /// Solver failure or ill-conditioned data.
    Numerical = 2,
    NullPointer = 3,
    Io = 4,
    Panic = 5,
    /// Destination buffer too small.
    BufferTooSmall = 6,
}

/// Which image of a pair to copy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EitField {
    Truth = 0,
    Recon = 1,
    M0Imag = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EitMetrics {
    pub ssim: f64,
    /// Percent.
    pub rel_l1: f64,
    /// Percent.
    pub rel_l2: f64,
}

/// Scattering data `t(k)` on a square k-grid.
pub struct EitScattering(ScatteringData);

/// A D-bar reconstruction on the image grid.
pub struct EitImage(LowPassReconstruction);

/// Truth/reconstruction pair as stored in EITP files.
pub struct EitPair(TrainingPair);

enum Failure {
    Core(Error),
    Null(&'static str),
    Buffer { needed: usize, given: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EitStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            EitStatus::NullPointer
        }
        Ok(Err(Failure::Buffer { needed, given })) => {
            set_error(format!("buffer holds {given} values, {needed} needed"));
            EitStatus::BufferTooSmall
        }
        Ok(Err(Failure::Core(e))) => {
            let status = match (&e, e.class()) {
                (Error::Io { .. }, _) => EitStatus::Io,
                (_, ErrorClass::Numerical) => EitStatus::Numerical,
                (_, ErrorClass::Validation) => EitStatus::Invalid,
            };
            set_error(e.to_string());
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            EitStatus::Panic
        }
    }
}

unsafe fn reference<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char, what: &'static str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::Invalid(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(Failure::Null("buffer"));
    }
    if len < src.len() {
        return Err(Failure::Buffer {
            needed: src.len(),
            given: len,
        });
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call or `eit_clear_error` on this thread.
#[no_mangle]
pub extern "C" fn eit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn eit_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Scattering data from `n × n` row-major samples on `[-half_width, half_width)²`
/// (row index along Im k). Nodes with `|k| > radius` are ignored by the solver.
#[no_mangle]
pub unsafe extern "C" fn eit_scattering_new(
    n: usize,
    half_width: f64,
    radius: f64,
    re: *const f64,
    im: *const f64,
    out: *mut *mut EitScattering,
) -> EitStatus {
    guard(|| {
        let len = n.checked_mul(n).ok_or(Error::Invalid("grid too large".into()))?;
        let re = slice_arg(re, len, "re")?;
        let im = slice_arg(im, len, "im")?;
        let grid = SquareGrid::new(n, half_width)?;
        let values = re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let t = ScatteringData::new(grid, values, radius, Flavor::T)?;
        store(out, EitScattering(t))
    })
}

#[no_mangle]
pub unsafe extern "C" fn eit_scattering_free(s: *mut EitScattering) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// D-bar reconstruction on a `z_nodes × z_nodes` grid over `[-1, 1)²`.
/// `tol <= 0` selects the default solver tolerance.
#[no_mangle]
pub unsafe extern "C" fn eit_reconstruct(
    scattering: *const EitScattering,
    sigma_b: f64,
    z_nodes: usize,
    tol: f64,
    out: *mut *mut EitImage,
) -> EitStatus {
    guard(|| {
        let t = reference(scattering, "scattering")?;
        let mut krylov = KrylovConfig::default();
        if tol > 0.0 {
            krylov.tol = tol;
        }
        let cfg = DbarSolveConfig {
            z_grid: SquareGrid::new(z_nodes, 1.0)?,
            krylov,
        };
        let recon = reconstruct(&t.0, sigma_b, &cfg)?;
        store(out, EitImage(recon))
    })
}

/// Reconstruction from a measurement JSON file and a layout JSON file.
/// `sigma0 <= 0` fits the background conductivity.
#[no_mangle]
pub unsafe extern "C" fn eit_reconstruct_measurement(
    measurement_path: *const c_char,
    layout_path: *const c_char,
    radius: f64,
    sigma0: f64,
    z_nodes: usize,
    out: *mut *mut EitImage,
) -> EitStatus {
    guard(|| {
        let mpath = path_arg(measurement_path, "measurement_path")?;
        let lpath = path_arg(layout_path, "layout_path")?;
        let layout = ElectrodeLayout::load(&lpath)?;
        let file = MeasurementFile::load(&mpath)?;
        let (layout, data) = file.resolve(&mpath, Some(&layout))?;
        let cfg = MeasuredConfig {
            radius,
            z_nodes,
            sigma0: if sigma0 > 0.0 {
                Sigma0Mode::Given(sigma0)
            } else {
                Sigma0Mode::Fit
            },
            ..MeasuredConfig::default()
        };
        let outcome = reconstruct_measurement(&layout, &data, &cfg)?;
        store(out, EitImage(outcome.recon))
    })
}

/// Nodes per side of the image.
#[no_mangle]
pub unsafe extern "C" fn eit_image_size(image: *const EitImage) -> usize {
    image.as_ref().map_or(0, |i| i.0.grid.n())
}

/// Copies `σ_DB` (row-major, `n²` values) into `buf`.
#[no_mangle]
pub unsafe extern "C" fn eit_image_copy_sigma(image: *const EitImage, buf: *mut f64, len: usize) -> EitStatus {
    guard(|| copy_out(&reference(image, "image")?.0.sigma_db, buf, len))
}

/// Copies `m(z, 0)` into separate real and imaginary buffers.
#[no_mangle]
pub unsafe extern "C" fn eit_image_copy_m0(
    image: *const EitImage,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> EitStatus {
    guard(|| {
        let m0 = &reference(image, "image")?.0.m0;
        let r: Vec<f64> = m0.iter().map(|m| m.re).collect();
        let i: Vec<f64> = m0.iter().map(|m| m.im).collect();
        copy_out(&r, re, len)?;
        copy_out(&i, im, len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn eit_image_free(image: *mut EitImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

#[no_mangle]
pub unsafe extern "C" fn eit_pair_read(path: *const c_char, out: *mut *mut EitPair) -> EitStatus {
    guard(|| {
        let p = path_arg(path, "path")?;
        store(out, EitPair(read_pair(&p)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn eit_pair_write(pair: *const EitPair, path: *const c_char) -> EitStatus {
    guard(|| {
        let pair = reference(pair, "pair")?;
        let p = path_arg(path, "path")?;
        Ok(write_pair(&pair.0, &p)?)
    })
}

/// Simulates training pair `index` of a dataset. `style` is the EITP style
/// code (0 ACT4, 1 KIT4). `config_json` may be NULL for the style defaults;
/// otherwise it is a full dataset configuration whose seed is replaced by
/// `master_seed`.
#[no_mangle]
pub unsafe extern "C" fn eit_pair_generate(
    style: u8,
    master_seed: u64,
    index: u64,
    config_json: *const c_char,
    out: *mut *mut EitPair,
) -> EitStatus {
    guard(|| {
        let style = Style::from_code(style).ok_or(Error::Invalid(format!("unknown style code {style}")))?;
        let mut cfg = if config_json.is_null() {
            DatasetConfig::for_style(style)?
        } else {
            let text = CStr::from_ptr(config_json)
                .to_str()
                .map_err(|_| Error::Invalid("config_json is not valid UTF-8".into()))?;
            let cfg: DatasetConfig =
                serde_json::from_str(text).map_err(|e| Error::Invalid(format!("config_json: {e}")))?;
            if cfg.style != style {
                return Err(Error::Invalid(format!("config style {} differs from style code", cfg.style)).into());
            }
            cfg
        };
        cfg.master_seed = master_seed;
        cfg.validate()?;
        store(out, EitPair(generate_pair(index, &cfg)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn eit_pair_size(pair: *const EitPair) -> usize {
    pair.as_ref().map_or(0, |p| p.0.n)
}

/// EITP style code of the pair, or 255 for NULL.
#[no_mangle]
pub unsafe extern "C" fn eit_pair_style(pair: *const EitPair) -> u8 {
    pair.as_ref().map_or(u8::MAX, |p| p.0.style.code())
}

#[no_mangle]
pub unsafe extern "C" fn eit_pair_seed(pair: *const EitPair) -> u64 {
    pair.as_ref().map_or(0, |p| p.0.seed)
}

#[no_mangle]
pub unsafe extern "C" fn eit_pair_copy(pair: *const EitPair, field: EitField, buf: *mut f64, len: usize) -> EitStatus {
    guard(|| {
        let p = &reference(pair, "pair")?.0;
        let src = match field {
            EitField::Truth => &p.truth,
            EitField::Recon => &p.recon,
            EitField::M0Imag => &p.m0_imag,
        };
        copy_out(src, buf, len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn eit_pair_free(pair: *mut EitPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// SSIM and relative errors of `recon` against `truth` (`n × n` each).
/// `disc_mask` restricts the comparison to `|z| ≤ 1`.
#[no_mangle]
pub unsafe extern "C" fn eit_evaluate(
    recon: *const f64,
    truth: *const f64,
    n: usize,
    disc_mask: bool,
    out: *mut EitMetrics,
) -> EitStatus {
    guard(|| {
        let len = n.checked_mul(n).ok_or(Error::Invalid("grid too large".into()))?;
        let recon = slice_arg(recon, len, "recon")?;
        let truth = slice_arg(truth, len, "truth")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let mask = if disc_mask { MaskKind::Disc } else { MaskKind::Full };
        let r = evaluate(recon, truth, n, mask, &SsimParams::default())?;
        *out = EitMetrics {
            ssim: r.ssim,
            rel_l1: r.rel_l1,
            rel_l2: r.rel_l2,
        };
        Ok(())
    })
}
