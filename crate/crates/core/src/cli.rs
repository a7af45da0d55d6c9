//! Command-line front end.
//!
//! Exit status: 0 on success, 1 for invalid input or usage, 2 for a
//! numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::RunConfig;
use crate::countsim::{
    simulate_bias_sweep, simulate_fringe_scan, simulate_measurement_set, simulate_timetags, RNG_ALGORITHM,
};
use crate::error::{Error, Result};
use crate::export::{self, Provenance};
use crate::metrology::{self, io as mio};
use crate::modesolver::{
    absorption_perturbation, calibrate_wire_kappa, gaussian_fiber_mode, mode_overlap, optimize_fiber_overlap,
    solve_modes, AbsorptionResult, ModeField, ModeSolution, ModeSummary,
};
use crate::profile::{build_index_profile, IndexGrid, Polarization};
use crate::reproduce::{self, Suite};
use crate::taper::{taper_mode_size_profile, taper_neff_sweep};

#[derive(Debug, Parser)]
#[command(name = "snspdkit", version, about = "Waveguide-integrated SNSPD modelling and metrology")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every stochastic path (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Polarization for single-polarization commands.
    #[arg(long, global = true, value_enum, default_value_t = Pol::Te)]
    pub polarization: Pol,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pol {
    Te,
    Tm,
}

impl From<Pol> for Polarization {
    fn from(p: Pol) -> Self {
        match p {
            Pol::Te => Polarization::TE,
            Pol::Tm => Polarization::TM,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export the diffused index profile.
    Profile,
    /// Solve guided modes and write fields and a summary.
    Modes {
        /// Number of modes (overrides `modes.count`).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Per-device absorption of the nanowire meander for TE and TM.
    Absorb {
        /// Calibrate the wire extinction so TE reaches the target
        /// absorption.
        #[arg(long)]
        calibrate: bool,
        /// Wire extinction coefficient (overrides the material table).
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Fiber overlap: optimum plus a scan over centre offsets.
    Overlap {
        /// Fiber mode-field diameter (overrides `fiber.mfd_um`).
        #[arg(long)]
        mfd_um: Option<f64>,
    },
    /// Effective-index taper sweep and mode-size profile.
    Taper {
        /// Only the effective-index sweep.
        #[arg(long)]
        no_size_profile: bool,
    },
    /// Fringe contrast and propagation loss from a fringe scan.
    Fploss {
        #[command(flatten)]
        input: InputArg,
        /// Facet reflectance; defaults to the configured or Fresnel value.
        #[arg(long)]
        reflectance: Option<f64>,
        /// Chip length (overrides `metrology.chip_length_cm`).
        #[arg(long)]
        length_cm: Option<f64>,
    },
    /// Bidirectional coupling-independent efficiency calibration.
    Calibrate {
        #[command(flatten)]
        input: InputArg,
    },
    /// Sigmoid plateau fit of a bias sweep.
    Biasfit {
        #[command(flatten)]
        input: InputArg,
    },
    /// Generate synthetic data.
    Simulate {
        /// Data set to generate.
        #[arg(value_enum)]
        kind: SimKind,
        /// Relative noise (overrides `countsim.noise_rel`).
        #[arg(long)]
        noise: Option<f64>,
        /// Propagation loss of generated fringe scans.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run the acceptance criteria and write a pass/fail report.
    Reproduce {
        /// Exit with status 2 when any criterion fails.
        #[arg(long)]
        strict: bool,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

#[derive(Debug, Args)]
pub struct InputArg {
    /// Input file (CSV or JSON); defaults to the path in the config.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    Fringe,
    Efficiency,
    Bias,
    Timetags,
}

/// Parse `args` (including the program name), run, and return the exit
/// status. Diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let status = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if status == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return status;
        }
    };
    match execute(&cli, out) {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    config_text: String,
    out_dir: PathBuf,
    pol: Polarization,
}

impl Ctx {
    fn provenance(&self, command: &str) -> Provenance {
        Provenance::new(command, &self.config_text)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn profile(&self) -> Result<IndexGrid> {
        build_index_profile(&self.cfg.diffusion, &self.cfg.grid.spec()?)
    }

    fn fundamental(&self, profile: &IndexGrid, pol: Polarization) -> Result<ModeField> {
        solve_modes(profile, pol, 1, self.cfg.wavelength_nm())?.fundamental()
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    // The output location does not affect results, so it stays out of the hash.
    let mut hashed = cfg.clone();
    hashed.output_dir = PathBuf::new();
    let ctx = Ctx {
        config_text: hashed.to_toml(),
        out_dir: cfg.output_dir.clone(),
        pol: cli.polarization.into(),
        cfg,
    };
    let say = |out: &mut dyn Write, line: String| -> Result<()> {
        writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
    };
    match &cli.command {
        Command::Profile => {
            let p = ctx.profile()?;
            let prov = ctx.provenance("profile").with_parameters(ctx.cfg.diffusion);
            export::write_index_grid(&ctx.path("profile"), &prov, &p)?;
            for pol in Polarization::BOTH {
                let name = format!("profile_{}.csv", pol.as_str());
                export::write_csv(&ctx.path(&name), &prov, &export::index_rows(&p, pol))?;
            }
            say(out, format!("wrote profile ({} x {} nodes) to {}", p.grid.nx, p.grid.ny, ctx.out_dir.display()))?;
        }
        Command::Modes { count } => {
            let count = count.unwrap_or(ctx.cfg.modes.count);
            let p = ctx.profile()?;
            let modes = match solve_modes(&p, ctx.pol, count, ctx.cfg.wavelength_nm())? {
                ModeSolution::Guided(m) => m,
                ModeSolution::NoGuidedMode { best_n_eff, cutoff_index } => {
                    return Err(Error::Invalid(format!(
                        "{}: no guided mode (best Re(n_eff) {best_n_eff:.6} <= cutoff {cutoff_index:.6})",
                        ctx.pol
                    )))
                }
            };
            let prov = ctx.provenance("modes").with_parameters(serde_json::json!({
                "polarization": ctx.pol,
                "count": count,
            }));
            let summary: Vec<ModeSummary> = modes.iter().map(ModeSummary::of).collect();
            let tag = ctx.pol.as_str();
            export::write_json(&ctx.path(&format!("modes_{tag}.json")), &prov, &summary)?;
            export::write_csv(&ctx.path(&format!("modes_{tag}.csv")), &prov, &summary)?;
            for m in &modes {
                export::write_mode(&ctx.path(&format!("mode_{tag}_{}", m.order)), &prov, m)?;
            }
            for s in &summary {
                say(
                    out,
                    format!(
                        "{} mode {}: n_eff = {:.6} + {:.3e}i, D4sigma {:.2} x {:.2} um",
                        s.polarization, s.order, s.n_eff_re, s.n_eff_im, s.d4sigma_x_um, s.d4sigma_y_um
                    ),
                )?;
            }
        }
        Command::Absorb { calibrate, kappa } => {
            let p = ctx.profile()?;
            let (te, tm) = rayon::join(
                || ctx.fundamental(&p, Polarization::TE),
                || ctx.fundamental(&p, Polarization::TM),
            );
            let (te, tm) = (te?, tm?);
            let reg = ctx.cfg.registry()?;
            let mut wires = ctx.cfg.nanowire_geometry(&reg)?;
            if let Some(k) = kappa {
                wires = wires.with_wire_kappa(*k);
                wires.validate()?;
            }
            #[derive(Serialize)]
            struct Absorb {
                wire_kappa: f64,
                te: AbsorptionResult,
                tm: AbsorptionResult,
                te_to_tm_ratio: f64,
                calibration: Option<crate::modesolver::WireCalibration>,
            }
            let a_te = absorption_perturbation(&te, &wires, &p)?;
            let a_tm = absorption_perturbation(&tm, &wires, &p)?;
            let calibration = if *calibrate {
                Some(calibrate_wire_kappa(&te, &tm, &wires, &p, ctx.cfg.nanowire.target_te_absorption)?)
            } else {
                None
            };
            let result = Absorb {
                wire_kappa: wires.wire_material.kappa,
                te: a_te,
                tm: a_tm,
                te_to_tm_ratio: a_te.absorption_per_device / a_tm.absorption_per_device,
                calibration,
            };
            let prov = ctx.provenance("absorb").with_parameters(&ctx.cfg.nanowire);
            export::write_json(&ctx.path("absorb.json"), &prov, &result)?;
            #[derive(Serialize)]
            struct Row {
                polarization: Polarization,
                wire_kappa: f64,
                delta_n_eff_re: f64,
                delta_n_eff_im: f64,
                alpha_db_per_cm: f64,
                absorption_per_device: f64,
            }
            let mut rows = Vec::new();
            let mut push = |pol, kappa, a: &AbsorptionResult| {
                rows.push(Row {
                    polarization: pol,
                    wire_kappa: kappa,
                    delta_n_eff_re: a.delta_n_eff.re,
                    delta_n_eff_im: a.delta_n_eff.im,
                    alpha_db_per_cm: a.alpha_db_per_cm,
                    absorption_per_device: a.absorption_per_device,
                })
            };
            push(Polarization::TE, result.wire_kappa, &a_te);
            push(Polarization::TM, result.wire_kappa, &a_tm);
            if let Some(c) = &result.calibration {
                push(Polarization::TE, c.kappa, &c.te);
                push(Polarization::TM, c.kappa, &c.tm);
            }
            export::write_csv(&ctx.path("absorb.csv"), &prov, &rows)?;
            say(
                out,
                format!(
                    "kappa {:.4}: TE {:.4}% / TM {:.4}% per device",
                    result.wire_kappa,
                    100.0 * a_te.absorption_per_device,
                    100.0 * a_tm.absorption_per_device
                ),
            )?;
            if let Some(c) = &result.calibration {
                say(
                    out,
                    format!(
                        "calibrated kappa {:.4}: TE {:.4}% / TM {:.4}% per device",
                        c.kappa,
                        100.0 * c.te.absorption_per_device,
                        100.0 * c.tm.absorption_per_device
                    ),
                )?;
            }
        }
        Command::Overlap { mfd_um } => {
            let mfd = mfd_um.unwrap_or(ctx.cfg.fiber.mfd_um);
            let p = ctx.profile()?;
            let mode = ctx.fundamental(&p, ctx.pol)?;
            let best = optimize_fiber_overlap(&mode, mfd)?;
            #[derive(Serialize)]
            struct ScanRow {
                offset_x_um: f64,
                offset_y_um: f64,
                overlap: f64,
            }
            let f = &ctx.cfg.fiber;
            let steps = (f.scan_half_range_um / f.scan_step_um).floor() as i64;
            let mut rows = Vec::new();
            for i in -steps..=steps {
                for j in -steps..=steps {
                    let (ox, oy) = (i as f64 * f.scan_step_um, j as f64 * f.scan_step_um);
                    let fiber = gaussian_fiber_mode(mfd, &mode.grid, (best.center_x_um + ox, best.center_y_um + oy))?;
                    rows.push(ScanRow {
                        offset_x_um: ox,
                        offset_y_um: oy,
                        overlap: mode_overlap(&mode, &fiber.mode)?,
                    });
                }
            }
            let tag = ctx.pol.as_str();
            let prov = ctx.provenance("overlap").with_parameters(serde_json::json!({
                "polarization": ctx.pol,
                "fiber": f,
                "mfd_um": mfd,
            }));
            export::write_json(&ctx.path(&format!("overlap_{tag}.json")), &prov, &best)?;
            export::write_csv(&ctx.path(&format!("overlap_{tag}_scan.csv")), &prov, &rows)?;
            say(
                out,
                format!(
                    "{} overlap {:.4} with {mfd} um fiber at ({:.2}, {:.2}) um",
                    ctx.pol, best.overlap, best.center_x_um, best.center_y_um
                ),
            )?;
        }
        Command::Taper { no_size_profile } => {
            let reg = ctx.cfg.registry()?;
            let stack = ctx.cfg.taper_stack(&reg)?;
            let t = &ctx.cfg.taper;
            let p = build_index_profile(&ctx.cfg.taper_diffusion(&reg)?, &t.grid.spec()?)?;
            let base = ctx.fundamental(&p, ctx.pol)?;
            let sweep = taper_neff_sweep(&stack, base.n_eff.re, &t.widths_um(), ctx.pol)?;
            let tag = ctx.pol.as_str();
            let prov = ctx.provenance("taper").with_parameters(serde_json::json!({
                "polarization": ctx.pol,
                "taper": t,
            }));
            let mut columns = vec!["width_um".to_string()];
            columns.extend((0..sweep.n_eff_by_mode.len()).map(|m| format!("mode{m}")));
            let rows: Vec<Vec<Option<f64>>> = sweep
                .widths_um
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    std::iter::once(Some(*w))
                        .chain(sweep.n_eff_by_mode.iter().map(|m| m[k]))
                        .collect()
                })
                .collect();
            export::write_table(&ctx.path(&format!("taper_sweep_{tag}.csv")), &prov, &columns, &rows)?;
            let sizes = if *no_size_profile {
                None
            } else {
                let w_max = t.max_width_um;
                let length = t.length_um;
                let ramp = move |z: f64| w_max * z / length;
                let s = taper_mode_size_profile(length, &ramp, &stack, &p, &base, t.size_samples)?;
                export::write_csv(&ctx.path(&format!("taper_size_{tag}.csv")), &prov, &s)?;
                Some(s)
            };
            #[derive(Serialize)]
            struct TaperSummary<'a> {
                sweep: &'a crate::taper::TaperSweep,
                size_profile: &'a Option<Vec<crate::taper::SizeProfilePoint>>,
            }
            export::write_json(
                &ctx.path(&format!("taper_{tag}.json")),
                &prov,
                &TaperSummary {
                    sweep: &sweep,
                    size_profile: &sizes,
                },
            )?;
            say(
                out,
                format!(
                    "loaded slab {:.6}, unloaded {:.6}, cutoffs {:?} um",
                    sweep.loaded_index, sweep.unloaded_index, sweep.cutoff_widths_um
                ),
            )?;
            if let Some(last) = sizes.as_ref().and_then(|s| s.last()) {
                say(out, format!("area ratio at {} um width: {:.3}", last.width_um, last.area_ratio))?;
            }
        }
        Command::Fploss {
            input,
            reflectance,
            length_cm,
        } => {
            let path = input_path(&input.input, &ctx.cfg.metrology.fringe_scan, "fringe scan")?;
            let r = match reflectance {
                Some(r) => *r,
                None => ctx.cfg.facet_reflectance(ctx.pol)?,
            };
            let l = length_cm.unwrap_or(ctx.cfg.metrology.chip_length_cm);
            let scan = mio::load_fringe_scan(&path, r, l)?;
            let fit = metrology::fit_airy(&scan)?;
            let est = metrology::fp_loss_extract(fit.contrast, scan.facet_reflectance, scan.chip_length_cm)?;
            let m = &ctx.cfg.metrology;
            let attribution = match m.alpha_before_db_per_cm {
                Some(before) => Some(metrology::detector_absorption_from_loss(
                    before,
                    m.alpha_after_db_per_cm.unwrap_or(est.alpha_db_per_cm),
                    scan.chip_length_cm,
                    m.n_detectors,
                )?),
                None => None,
            };
            #[derive(Serialize)]
            struct Fploss {
                fit: metrology::AiryFit,
                estimate: metrology::LossEstimate,
                facet_reflectance: f64,
                chip_length_cm: f64,
                absorption_per_detector: Option<f64>,
            }
            let prov = ctx.provenance("fploss").with_input(&path)?;
            export::write_json(
                &ctx.path("fploss.json"),
                &prov,
                &Fploss {
                    fit,
                    estimate: est,
                    facet_reflectance: scan.facet_reflectance,
                    chip_length_cm: scan.chip_length_cm,
                    absorption_per_detector: attribution,
                },
            )?;
            say(
                out,
                format!(
                    "K = {:.6}, R*eta = {:.6}, alpha = {:.6} dB/cm",
                    est.contrast_k, est.r_eta, est.alpha_db_per_cm
                ),
            )?;
        }
        Command::Calibrate { input } => {
            let path = input_path(&input.input, &ctx.cfg.metrology.efficiency, "efficiency measurement")?;
            let set = mio::load_efficiency_set(&path)?;
            let cal = metrology::calibrate_bidirectional(&set)?;
            #[derive(Serialize)]
            struct Row {
                polarization: Polarization,
                detector: usize,
                z_cm: f64,
                detection_efficiency: f64,
                closed_form: f64,
            }
            let mut rows = Vec::new();
            for c in &cal.polarizations {
                for (i, z) in set.detector_positions_cm.iter().enumerate() {
                    rows.push(Row {
                        polarization: c.polarization,
                        detector: i,
                        z_cm: *z,
                        detection_efficiency: c.detection_efficiency[i],
                        closed_form: c.closed_form[i],
                    });
                }
            }
            let prov = ctx.provenance("calibrate").with_input(&path)?;
            export::write_json(&ctx.path("calibrate.json"), &prov, &cal)?;
            export::write_csv(&ctx.path("calibrate.csv"), &prov, &rows)?;
            for c in &cal.polarizations {
                let effs: Vec<String> = c.detection_efficiency.iter().map(|d| format!("{:.4}%", 100.0 * d)).collect();
                say(
                    out,
                    format!(
                        "{}: kappa_L {:.4}, kappa_R {:.4}, on-chip efficiency {}",
                        c.polarization,
                        c.kappa_left,
                        c.kappa_right,
                        effs.join(" ")
                    ),
                )?;
            }
        }
        Command::Biasfit { input } => {
            let path = input_path(&input.input, &ctx.cfg.metrology.bias_sweep, "bias sweep")?;
            let sweep = mio::load_bias_sweep(&path, ctx.cfg.metrology.integration_s)?;
            let fit = metrology::fit_bias_response(&sweep)?;
            #[derive(Serialize)]
            struct Row {
                bias_ua: f64,
                photon_counts: f64,
                dark_counts: f64,
                model_signal: f64,
                model_dark: Option<f64>,
            }
            let rows: Vec<Row> = (0..sweep.bias_ua.len())
                .map(|k| {
                    let b = sweep.bias_ua[k];
                    Row {
                        bias_ua: b,
                        photon_counts: sweep.photon_counts[k],
                        dark_counts: sweep.dark_counts[k],
                        model_signal: metrology::sigmoid_rate(b, fit.inflection_ua, fit.width_ua, fit.plateau_rate),
                        model_dark: fit.dark.map(|d| d.rate(b)),
                    }
                })
                .collect();
            let prov = ctx.provenance("biasfit").with_input(&path)?;
            export::write_json(&ctx.path("biasfit.json"), &prov, &fit)?;
            export::write_csv(&ctx.path("biasfit.csv"), &prov, &rows)?;
            say(
                out,
                format!(
                    "I0 = {:.3} uA, width = {:.3} uA, plateau = {:.4e} /s from {:.2} uA, flatness {:.4}, plateau: {}",
                    fit.inflection_ua,
                    fit.width_ua,
                    fit.plateau_rate,
                    fit.plateau_start_ua,
                    fit.plateau_flatness,
                    fit.has_plateau
                ),
            )?;
        }
        Command::Simulate { kind, noise, alpha } => simulate(&ctx, *kind, *noise, *alpha, out)?,
        Command::Reproduce { strict, only } => {
            let suite = Suite::new(ctx.cfg.clone());
            let mut reports = Vec::new();
            for id in reproduce::CRITERIA.iter().filter(|id| only.is_empty() || only.contains(id)) {
                let r = suite.run(*id);
                say(out, r.to_string())?;
                reports.push(r);
            }
            let prov = ctx.provenance("reproduce");
            export::write_json(&ctx.path("reproduce.json"), &prov, &reports)?;
            let failed = reports.iter().filter(|r| !r.passed).count();
            say(out, format!("{} of {} criteria passed", reports.len() - failed, reports.len()))?;
            if *strict && failed > 0 {
                return Ok(2);
            }
        }
    }
    Ok(0)
}

fn input_path(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    let p = flag
        .clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| Error::Invalid(format!("no {what} file: pass --input or set it in the config")))?;
    if !Path::new(&p).is_file() {
        return Err(Error::Invalid(format!("{what} file {} does not exist", p.display())));
    }
    Ok(p)
}

fn simulate(ctx: &Ctx, kind: SimKind, noise: Option<f64>, alpha: Option<f64>, out: &mut dyn Write) -> Result<()> {
    let c = &ctx.cfg.countsim;
    let seed = ctx.cfg.seed;
    let noise = noise.unwrap_or(c.noise_rel);
    let say = |out: &mut dyn Write, line: String| -> Result<()> {
        writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
    };
    match kind {
        SimKind::Fringe => {
            let alpha = alpha.unwrap_or(c.alpha_db_per_cm);
            let r = ctx.cfg.facet_reflectance(ctx.pol)?;
            let l = ctx.cfg.metrology.chip_length_cm;
            let scan = simulate_fringe_scan(alpha, r, l, c.fringe_points, noise, seed)?;
            let prov = ctx
                .provenance("simulate fringe")
                .with_seed(seed, RNG_ALGORITHM, "multiplicative log-normal on power")
                .with_parameters(serde_json::json!({
                    "alpha_db_per_cm": alpha,
                    "facet_reflectance": r,
                    "chip_length_cm": l,
                    "points": c.fringe_points,
                    "noise_rel": noise,
                }));
            export::write_csv(&ctx.path("sim_fringe.csv"), &prov, &mio::fringe_rows(&scan))?;
            export::write_json(&ctx.path("sim_fringe.json"), &prov, &scan)?;
            say(out, format!("fringe scan: {} points, alpha {alpha} dB/cm, R {r:.4}, L {l} cm", c.fringe_points))?;
        }
        SimKind::Efficiency => {
            let set = simulate_measurement_set(&c.truth, noise, seed)?;
            let prov = ctx
                .provenance("simulate efficiency")
                .with_seed(seed, RNG_ALGORITHM, "multiplicative log-normal on efficiencies and transmission")
                .with_parameters(serde_json::json!({ "truth": c.truth, "noise_rel": noise }));
            export::write_csv(&ctx.path("sim_efficiency.csv"), &prov, &mio::efficiency_rows(&set))?;
            export::write_json(&ctx.path("sim_efficiency.json"), &prov, &set)?;
            say(
                out,
                format!(
                    "efficiency set: {} detectors x {} polarizations",
                    set.detector_positions_cm.len(),
                    set.measurements.len()
                ),
            )?;
        }
        SimKind::Bias => {
            let sweep = simulate_bias_sweep(&c.bias, &c.biases_ua(), c.integration_s, seed)?;
            let prov = ctx
                .provenance("simulate bias")
                .with_seed(seed, RNG_ALGORITHM, "Poisson counts")
                .with_parameters(serde_json::json!({
                    "model": c.bias,
                    "integration_s": c.integration_s,
                }));
            export::write_csv(&ctx.path("sim_bias.csv"), &prov, &mio::bias_rows(&sweep))?;
            export::write_json(&ctx.path("sim_bias.json"), &prov, &sweep)?;
            say(out, format!("bias sweep: {} points, {} s per point", sweep.bias_ua.len(), c.integration_s))?;
        }
        SimKind::Timetags => {
            let h = simulate_timetags(&c.source, c.detector_jitter_ps, c.n_events, c.bin_width_ps, seed)?;
            let detector = metrology::jitter_decompose(h.fwhm_ps, &[c.source.jitter_fwhm_ps])?;
            #[derive(Serialize)]
            struct Row {
                time_ps: f64,
                counts: u64,
            }
            let rows: Vec<Row> = (0..h.counts.len())
                .map(|k| Row {
                    time_ps: h.bin_center_ps(k),
                    counts: h.counts[k],
                })
                .collect();
            #[derive(Serialize)]
            struct Summary<'a> {
                histogram: &'a crate::countsim::TimetagHistogram,
                detector_jitter_fwhm_ps: f64,
            }
            let prov = ctx
                .provenance("simulate timetags")
                .with_seed(seed, RNG_ALGORITHM, "Gaussian timing jitter")
                .with_parameters(serde_json::json!({
                    "source": c.source,
                    "detector_jitter_ps": c.detector_jitter_ps,
                    "events": c.n_events,
                    "bin_width_ps": c.bin_width_ps,
                }));
            export::write_csv(&ctx.path("sim_timetags.csv"), &prov, &rows)?;
            export::write_json(
                &ctx.path("sim_timetags.json"),
                &prov,
                &Summary {
                    histogram: &h,
                    detector_jitter_fwhm_ps: detector,
                },
            )?;
            say(
                out,
                format!("system jitter {:.1} ps FWHM; detector after removing the source: {detector:.1} ps", h.fwhm_ps),
            )?;
        }
    }
    Ok(())
}
