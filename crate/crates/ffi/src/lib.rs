//! C ABI for snspdkit.
//!
//! Every fallible function returns an [`SnspdStatus`]; on failure the
//! message is available from [`snspd_last_error_message`] on the same
//! thread. Handles are opaque and must be released with their `_free`
//! function. Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use snspdkit::config::RunConfig;
use snspdkit::countsim;
use snspdkit::metrology::{self, BiasSweep, FringeScan};
use snspdkit::modesolver::{self, ModeField};
use snspdkit::profile::{build_index_profile, IndexGrid, Polarization};
use snspdkit::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnspdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    BufferTooSmall = 5,
    NoGuidedMode = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnspdPolarization {
    Te = 0,
    Tm = 1,
}

impl From<SnspdPolarization> for Polarization {
    fn from(p: SnspdPolarization) -> Self {
        match p {
            SnspdPolarization::Te => Polarization::TE,
            SnspdPolarization::Tm => Polarization::TM,
        }
    }
}

/// Run configuration (chip, grid, materials, simulation settings).
pub struct SnspdConfig {
    inner: RunConfig,
}

/// Fundamental guided mode together with the index profile it was solved on.
pub struct SnspdMode {
    mode: ModeField,
    profile: IndexGrid,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SnspdFiberOverlap {
    pub overlap: f64,
    pub center_x_um: f64,
    pub center_y_um: f64,
    pub mfd_um: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SnspdAbsorption {
    pub delta_n_eff_re: f64,
    pub delta_n_eff_im: f64,
    pub alpha_db_per_cm: f64,
    pub absorption_per_device: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SnspdLossEstimate {
    pub contrast_k: f64,
    pub r_eta: f64,
    pub single_pass_transmission: f64,
    pub alpha_db_per_cm: f64,
}

/// Sigmoid fit of a bias sweep. Dark-count fields are NaN when no dark
/// model was fitted.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SnspdBiasFit {
    pub inflection_ua: f64,
    pub width_ua: f64,
    pub plateau_rate: f64,
    pub plateau_start_ua: f64,
    pub plateau_flatness: f64,
    pub has_plateau: bool,
    pub dark_scale: f64,
    pub dark_current_ua: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    let c = CString::new(text).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SnspdStatus {
    match err {
        Error::Io { .. } => SnspdStatus::Io,
        e if e.is_numerical() => SnspdStatus::Numerical,
        _ => SnspdStatus::InvalidArgument,
    }
}

/// Run `f`, recording any error or panic for [`snspd_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), SnspdStatus>) -> SnspdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnspdStatus::Ok,
        Ok(Err(s)) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SnspdStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, SnspdStatus>;
}

impl<T> OrStatus<T> for snspdkit::Result<T> {
    fn or_status(self) -> Result<T, SnspdStatus> {
        self.map_err(|e| {
            set_last_error(e.to_string());
            status_of(&e)
        })
    }
}

fn null(what: &str) -> SnspdStatus {
    set_last_error(format!("{what} is null"));
    SnspdStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, SnspdStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, SnspdStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], SnspdStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], SnspdStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn snspd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn snspd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Built-in default configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn snspd_config_default(out: *mut *mut SnspdConfig) -> SnspdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(SnspdConfig {
            inner: RunConfig::default(),
        }));
        Ok(())
    })
}

/// Parse and validate a TOML configuration. Relative input paths resolve
/// against the current directory.
///
/// # Safety
/// `toml` must be a NUL-terminated UTF-8 string; `out` as for
/// [`snspd_config_default`].
#[no_mangle]
pub unsafe extern "C" fn snspd_config_from_toml(toml: *const c_char, out: *mut *mut SnspdConfig) -> SnspdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| {
            set_last_error(format!("configuration is not UTF-8: {e}"));
            SnspdStatus::InvalidArgument
        })?;
        let cfg = RunConfig::from_toml(text, Path::new("<ffi>")).or_status()?;
        cfg.validate().or_status()?;
        *out = Box::into_raw(Box::new(SnspdConfig { inner: cfg }));
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn snspd_config_set_seed(config: *mut SnspdConfig, seed: u64) -> SnspdStatus {
    guard(|| {
        out_ref(config, "config")?.inner.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snspd_config_free(config: *mut SnspdConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Solve the fundamental mode of the configured waveguide.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snspd_mode_solve(
    config: *const SnspdConfig,
    polarization: SnspdPolarization,
    out: *mut *mut SnspdMode,
) -> SnspdStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.inner;
        let out = out_ref(out, "out")?;
        let profile = build_index_profile(&cfg.diffusion, &cfg.grid.spec().or_status()?).or_status()?;
        let sol = modesolver::solve_modes(&profile, polarization.into(), 1, cfg.wavelength_nm()).or_status()?;
        let mode = match sol {
            modesolver::ModeSolution::Guided(mut m) => m.swap_remove(0),
            modesolver::ModeSolution::NoGuidedMode { best_n_eff, cutoff_index } => {
                set_last_error(format!(
                    "no guided mode (best Re(n_eff) {best_n_eff:.6} <= cutoff {cutoff_index:.6})"
                ));
                return Err(SnspdStatus::NoGuidedMode);
            }
        };
        *out = Box::into_raw(Box::new(SnspdMode { mode, profile }));
        Ok(())
    })
}

/// # Safety
/// `mode` must be a live handle; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn snspd_mode_n_eff(mode: *const SnspdMode, re: *mut f64, im: *mut f64) -> SnspdStatus {
    guard(|| {
        let m = &deref(mode, "mode")?.mode;
        let (re, im) = (out_ref(re, "re")?, out_ref(im, "im")?);
        *re = m.n_eff.re;
        *im = m.n_eff.im;
        Ok(())
    })
}

/// Field array shape. Samples are stored row-major with `rows` along x.
///
/// # Safety
/// `mode` must be a live handle; `rows` and `cols` writable.
#[no_mangle]
pub unsafe extern "C" fn snspd_mode_shape(mode: *const SnspdMode, rows: *mut usize, cols: *mut usize) -> SnspdStatus {
    guard(|| {
        let m = &deref(mode, "mode")?.mode;
        let (r, c) = (out_ref(rows, "rows")?, out_ref(cols, "cols")?);
        (*r, *c) = m.psi.dim();
        Ok(())
    })
}

/// Copy the unit-power field into `buf` (row-major, `rows * cols` values).
///
/// # Safety
/// `mode` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn snspd_mode_copy_field(mode: *const SnspdMode, buf: *mut f64, len: usize) -> SnspdStatus {
    guard(|| {
        let m = &deref(mode, "mode")?.mode;
        let n = m.psi.len();
        if len < n {
            set_last_error(format!("buffer holds {len} values, field has {n}"));
            return Err(SnspdStatus::BufferTooSmall);
        }
        let dst = slice_mut(buf, n, "buf")?;
        for (d, s) in dst.iter_mut().zip(m.psi.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Best overlap with a Gaussian fiber mode of diameter `mfd_um`.
///
/// # Safety
/// `mode` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snspd_mode_fiber_overlap(
    mode: *const SnspdMode,
    mfd_um: f64,
    out: *mut SnspdFiberOverlap,
) -> SnspdStatus {
    guard(|| {
        let m = &deref(mode, "mode")?.mode;
        let out = out_ref(out, "out")?;
        let r = modesolver::optimize_fiber_overlap(m, mfd_um).or_status()?;
        *out = SnspdFiberOverlap {
            overlap: r.overlap,
            center_x_um: r.center_x_um,
            center_y_um: r.center_y_um,
            mfd_um: r.mfd_um,
        };
        Ok(())
    })
}

/// Per-device absorption of the configured nanowire meander. A finite
/// `wire_kappa` overrides the wire extinction coefficient; pass NaN to keep
/// the configured material.
///
/// # Safety
/// `config` and `mode` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snspd_mode_absorption(
    config: *const SnspdConfig,
    mode: *const SnspdMode,
    wire_kappa: f64,
    out: *mut SnspdAbsorption,
) -> SnspdStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.inner;
        let m = deref(mode, "mode")?;
        let out = out_ref(out, "out")?;
        let reg = cfg.registry().or_status()?;
        let mut wires = cfg.nanowire_geometry(&reg).or_status()?;
        if !wire_kappa.is_nan() {
            wires = wires.with_wire_kappa(wire_kappa);
            wires.validate().or_status()?;
        }
        let a = modesolver::absorption_perturbation(&m.mode, &wires, &m.profile).or_status()?;
        *out = SnspdAbsorption {
            delta_n_eff_re: a.delta_n_eff.re,
            delta_n_eff_im: a.delta_n_eff.im,
            alpha_db_per_cm: a.alpha_db_per_cm,
            absorption_per_device: a.absorption_per_device,
        };
        Ok(())
    })
}

/// # Safety
/// `mode` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snspd_mode_free(mode: *mut SnspdMode) {
    if !mode.is_null() {
        drop(Box::from_raw(mode));
    }
}

/// Click probability `1 - exp(-eta mu)` for Poissonian light.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snspd_click_probability(mu: f64, eta: f64, out: *mut f64) -> SnspdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = countsim::click_probability(mu, eta).or_status()?;
        Ok(())
    })
}

fn loss_out(e: metrology::LossEstimate) -> SnspdLossEstimate {
    SnspdLossEstimate {
        contrast_k: e.contrast_k,
        r_eta: e.r_eta,
        single_pass_transmission: e.single_pass_transmission,
        alpha_db_per_cm: e.alpha_db_per_cm,
    }
}

/// Propagation loss from a measured fringe contrast.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snspd_fp_loss_from_contrast(
    contrast: f64,
    reflectance: f64,
    length_cm: f64,
    out: *mut SnspdLossEstimate,
) -> SnspdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = loss_out(metrology::fp_loss_extract(contrast, reflectance, length_cm).or_status()?);
        Ok(())
    })
}

/// Fit a fringe scan and extract the propagation loss.
///
/// # Safety
/// `phase_rad` and `power` must each hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snspd_fp_loss_from_scan(
    phase_rad: *const f64,
    power: *const f64,
    n: usize,
    reflectance: f64,
    length_cm: f64,
    out: *mut SnspdLossEstimate,
) -> SnspdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let scan = FringeScan {
            phase_samples_rad: slice(phase_rad, n, "phase_rad")?.to_vec(),
            power_samples: slice(power, n, "power")?.to_vec(),
            facet_reflectance: reflectance,
            chip_length_cm: length_cm,
        };
        let fit = metrology::fit_airy(&scan).or_status()?;
        *out = loss_out(metrology::fp_loss_extract(fit.contrast, reflectance, length_cm).or_status()?);
        Ok(())
    })
}

/// Sigmoid plateau fit of a bias sweep (counts per second).
///
/// # Safety
/// The three arrays must each hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snspd_bias_fit(
    bias_ua: *const f64,
    photon_counts: *const f64,
    dark_counts: *const f64,
    n: usize,
    integration_s: f64,
    out: *mut SnspdBiasFit,
) -> SnspdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let sweep = BiasSweep {
            bias_ua: slice(bias_ua, n, "bias_ua")?.to_vec(),
            photon_counts: slice(photon_counts, n, "photon_counts")?.to_vec(),
            dark_counts: slice(dark_counts, n, "dark_counts")?.to_vec(),
            integration_s,
        };
        let f = metrology::fit_bias_response(&sweep).or_status()?;
        *out = SnspdBiasFit {
            inflection_ua: f.inflection_ua,
            width_ua: f.width_ua,
            plateau_rate: f.plateau_rate,
            plateau_start_ua: f.plateau_start_ua,
            plateau_flatness: f.plateau_flatness,
            has_plateau: f.has_plateau,
            dark_scale: f.dark.map_or(f64::NAN, |d| d.scale),
            dark_current_ua: f.dark.map_or(f64::NAN, |d| d.current),
        };
        Ok(())
    })
}

/// Detector jitter after removing known components in quadrature.
///
/// # Safety
/// `components_ps` must hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snspd_jitter_decompose(
    system_fwhm_ps: f64,
    components_ps: *const f64,
    n: usize,
    out: *mut f64,
) -> SnspdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = metrology::jitter_decompose(system_fwhm_ps, slice(components_ps, n, "components_ps")?).or_status()?;
        Ok(())
    })
}

/// Synthetic fringe scan of `n` points; identical seeds give identical
/// output.
///
/// # Safety
/// `phase_out` and `power_out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn snspd_simulate_fringe(
    alpha_db_per_cm: f64,
    reflectance: f64,
    length_cm: f64,
    n: usize,
    noise_rel: f64,
    seed: u64,
    phase_out: *mut f64,
    power_out: *mut f64,
) -> SnspdStatus {
    guard(|| {
        let phase = slice_mut(phase_out, n, "phase_out")?;
        let power = slice_mut(power_out, n, "power_out")?;
        let scan =
            countsim::simulate_fringe_scan(alpha_db_per_cm, reflectance, length_cm, n, noise_rel, seed).or_status()?;
        phase.copy_from_slice(&scan.phase_samples_rad);
        power.copy_from_slice(&scan.power_samples);
        Ok(())
    })
}
