//! Run configuration: one TOML file describing the chip, shared by every
//! subcommand.
//!
//! Every table and key is optional; missing entries take the defaults
//! shipped in `config/default.toml`. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::countsim::{BiasModel, ChipGroundTruth, DetectorTruth, PolarizationTruth, SourceSpec};
use crate::error::{ensure, Error, Result};
use crate::materials::{MaterialConstants, MaterialRegistry};
use crate::modesolver::NanowireGeometry;
use crate::profile::{GridSpec, Polarization, TiDiffusionParams};
use crate::taper::{Layer, SlabStack};

/// Diffusion lengths are accepted in this range.
pub const DIFFUSION_LENGTH_RANGE_UM: (f64, f64) = (1.0, 15.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Overrides merged onto the built-in material table.
    pub materials: BTreeMap<String, MaterialConstants>,
    pub diffusion: TiDiffusionParams,
    pub grid: GridConfig,
    pub modes: ModesConfig,
    pub nanowire: NanowireConfig,
    pub fiber: FiberConfig,
    pub taper: TaperConfig,
    pub metrology: MetrologyConfig,
    pub countsim: CountsimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min_um: f64,
    pub x_max_um: f64,
    pub y_min_um: f64,
    pub y_max_um: f64,
    pub dx_um: f64,
    pub dy_um: f64,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::with_spacing(self.x_min_um, self.x_max_um, self.y_min_um, self.y_max_um, self.dx_um, self.dy_um)
    }
}

impl Default for GridConfig {
    /// The surface y = 0 falls midway between two rows.
    fn default() -> Self {
        Self {
            x_min_um: -25.0,
            x_max_um: 25.0,
            y_min_um: -32.05,
            y_max_um: 6.05,
            dx_um: 0.25,
            dy_um: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesConfig {
    pub count: usize,
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self { count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NanowireConfig {
    pub wire_width_nm: f64,
    pub wire_thickness_nm: f64,
    pub gap_nm: f64,
    pub num_wires: usize,
    pub device_length_um: f64,
    pub cap_thickness_nm: f64,
    pub wire_material: String,
    pub cap_material: String,
    pub center_x_um: f64,
    /// TE per-device absorption the wire extinction is calibrated to.
    pub target_te_absorption: f64,
}

impl Default for NanowireConfig {
    fn default() -> Self {
        Self {
            wire_width_nm: 160.0,
            wire_thickness_nm: 5.0,
            gap_nm: 160.0,
            num_wires: 4,
            device_length_um: 400.0,
            cap_thickness_nm: 2.0,
            wire_material: "wsi".into(),
            cap_material: "si".into(),
            center_x_um: 0.0,
            target_te_absorption: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberConfig {
    pub mfd_um: f64,
    /// Half-width of the centre-offset scan around the optimum.
    pub scan_half_range_um: f64,
    pub scan_step_um: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        Self {
            mfd_um: 10.4,
            scan_half_range_um: 4.0,
            scan_step_um: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaperConfig {
    pub substrate_material: String,
    pub film_material: String,
    pub film_thickness_nm: f64,
    pub cover_material: String,
    pub max_width_um: f64,
    pub width_steps: usize,
    /// Linear ramp from zero to `max_width_um` over this length.
    pub length_um: f64,
    pub size_samples: usize,
    /// Finer vertical grid so the thin film is resolved in 2-D solves.
    pub grid: GridConfig,
}

impl Default for TaperConfig {
    fn default() -> Self {
        Self {
            substrate_material: "linbo3_no".into(),
            film_material: "si".into(),
            film_thickness_nm: 60.0,
            cover_material: "sio2".into(),
            max_width_um: 3.0,
            width_steps: 31,
            length_um: 100.0,
            size_samples: 7,
            grid: GridConfig {
                y_min_um: -32.025,
                y_max_um: 6.025,
                dy_um: 0.05,
                ..GridConfig::default()
            },
        }
    }
}

impl TaperConfig {
    pub fn widths_um(&self) -> Vec<f64> {
        let n = self.width_steps.max(2);
        (0..n)
            .map(|k| self.max_width_um * k as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetrologyConfig {
    pub fringe_scan: Option<PathBuf>,
    /// Defaults to the Fresnel reflectance of the substrate against air.
    pub facet_reflectance: Option<f64>,
    pub chip_length_cm: f64,
    pub efficiency: Option<PathBuf>,
    pub bias_sweep: Option<PathBuf>,
    /// Integration time for bias sweeps read from CSV.
    pub integration_s: f64,
    pub alpha_before_db_per_cm: Option<f64>,
    pub alpha_after_db_per_cm: Option<f64>,
    pub n_detectors: usize,
    pub system_jitter_ps: Option<f64>,
    pub jitter_components_ps: Vec<f64>,
}

impl Default for MetrologyConfig {
    fn default() -> Self {
        Self {
            fringe_scan: None,
            facet_reflectance: None,
            chip_length_cm: 2.3,
            efficiency: None,
            bias_sweep: None,
            integration_s: 1.0,
            alpha_before_db_per_cm: None,
            alpha_after_db_per_cm: None,
            n_detectors: 5,
            system_jitter_ps: None,
            jitter_components_ps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountsimConfig {
    pub noise_rel: f64,
    pub fringe_points: usize,
    pub alpha_db_per_cm: f64,
    pub source: SourceSpec,
    pub detector_jitter_ps: f64,
    pub n_events: usize,
    pub bin_width_ps: f64,
    pub bias: BiasModel,
    pub bias_start_ua: f64,
    pub bias_stop_ua: f64,
    pub bias_points: usize,
    pub integration_s: f64,
    pub truth: ChipGroundTruth,
}

impl Default for CountsimConfig {
    fn default() -> Self {
        let positions = [0.65, 0.9, 1.15, 1.4, 1.65];
        let detectors = |a: f64| -> Vec<DetectorTruth> {
            positions
                .iter()
                .map(|&z| DetectorTruth {
                    z_cm: z,
                    absorption: a,
                    internal_efficiency: 1.0,
                })
                .collect()
        };
        Self {
            noise_rel: 0.01,
            fringe_points: 1024,
            alpha_db_per_cm: 0.03,
            source: SourceSpec::default(),
            detector_jitter_ps: 379.66,
            n_events: 1_000_000,
            bin_width_ps: 4.0,
            bias: BiasModel {
                inflection_ua: 3.0,
                width_ua: 0.4,
                plateau_rate: 1e5,
                dark_scale: 1e-3,
                dark_exponent_ua: 0.5,
            },
            bias_start_ua: 0.0,
            bias_stop_ua: 7.0,
            bias_points: 71,
            integration_s: 1.0,
            truth: ChipGroundTruth {
                chip_length_cm: 2.3,
                facet_reflectance: 0.1422,
                polarizations: vec![
                    PolarizationTruth {
                        polarization: Polarization::TE,
                        kappa_left: 0.26,
                        kappa_right: 0.48,
                        alpha_db_per_cm: 0.1,
                        detectors: detectors(0.007),
                    },
                    PolarizationTruth {
                        polarization: Polarization::TM,
                        kappa_left: 0.26,
                        kappa_right: 0.48,
                        alpha_db_per_cm: 0.05,
                        detectors: detectors(0.001),
                    },
                ],
            },
        }
    }
}

impl CountsimConfig {
    pub fn biases_ua(&self) -> Vec<f64> {
        let n = self.bias_points.max(2);
        (0..n)
            .map(|k| self.bias_start_ua + (self.bias_stop_ua - self.bias_start_ua) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("out"),
            materials: BTreeMap::new(),
            diffusion: TiDiffusionParams::default(),
            grid: GridConfig::default(),
            modes: ModesConfig::default(),
            nanowire: NanowireConfig::default(),
            fiber: FiberConfig::default(),
            taper: TaperConfig::default(),
            metrology: MetrologyConfig::default(),
            countsim: CountsimConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text, path)?;
        // Relative input paths are taken from the config's directory.
        if let Some(dir) = path.parent() {
            let m = &mut cfg.metrology;
            for p in [&mut m.fringe_scan, &mut m.efficiency, &mut m.bias_sweep].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.diffusion;
        d.validate()?;
        let (lo, hi) = DIFFUSION_LENGTH_RANGE_UM;
        for (name, v) in [
            ("lateral", d.lateral_diffusion_len_um),
            ("depth", d.depth_diffusion_len_um),
        ] {
            ensure!(
                (lo..=hi).contains(&v),
                "{name} diffusion length {v} um outside [{lo}, {hi}] um"
            );
        }
        self.grid.spec()?;
        self.taper.grid.spec()?;
        ensure!(self.modes.count >= 1, "modes.count must be >= 1");
        let reg = self.registry()?;
        self.nanowire_geometry(&reg)?.validate()?;
        ensure!(
            (0.0..1.0).contains(&self.nanowire.target_te_absorption) && self.nanowire.target_te_absorption > 0.0,
            "target TE absorption must be in (0, 1)"
        );
        ensure!(self.fiber.mfd_um > 0.0, "fiber mode-field diameter must be positive");
        ensure!(
            self.fiber.scan_half_range_um >= 0.0 && self.fiber.scan_step_um > 0.0,
            "fiber scan range must be >= 0 and step positive"
        );
        self.taper_stack(&reg)?;
        ensure!(
            self.taper.max_width_um > 0.0 && self.taper.length_um > 0.0 && self.taper.size_samples >= 2,
            "taper width, length and sample count must be positive (samples >= 2)"
        );
        let m = &self.metrology;
        ensure!(m.chip_length_cm > 0.0, "chip length must be positive");
        ensure!(m.integration_s > 0.0, "integration time must be positive");
        if let Some(r) = m.facet_reflectance {
            ensure!(r > 0.0 && r < 1.0, "facet reflectance must be in (0, 1)");
        }
        let c = &self.countsim;
        ensure!(c.noise_rel >= 0.0, "noise level must be >= 0");
        c.source.validate()?;
        c.bias.validate()?;
        c.truth.validate()?;
        Ok(())
    }

    pub fn registry(&self) -> Result<MaterialRegistry> {
        MaterialRegistry::with_overrides(&self.materials)
    }

    pub fn wavelength_nm(&self) -> f64 {
        self.diffusion.wavelength_nm
    }

    pub fn nanowire_geometry(&self, reg: &MaterialRegistry) -> Result<NanowireGeometry> {
        let n = &self.nanowire;
        let wl = self.wavelength_nm();
        Ok(NanowireGeometry {
            wire_width_nm: n.wire_width_nm,
            wire_thickness_nm: n.wire_thickness_nm,
            gap_nm: n.gap_nm,
            num_wires: n.num_wires,
            device_length_um: n.device_length_um,
            cap_thickness_nm: n.cap_thickness_nm,
            wire_material: reg.lookup(&n.wire_material, wl)?,
            cap_material: reg.lookup(&n.cap_material, wl)?,
            center_x_um: n.center_x_um,
        })
    }

    pub fn taper_stack(&self, reg: &MaterialRegistry) -> Result<SlabStack> {
        let t = &self.taper;
        let wl = self.wavelength_nm();
        SlabStack::new(
            vec![
                Layer {
                    thickness_nm: None,
                    material: reg.lookup(&t.substrate_material, wl)?,
                },
                Layer {
                    thickness_nm: Some(t.film_thickness_nm),
                    material: reg.lookup(&t.film_material, wl)?,
                },
                Layer {
                    thickness_nm: None,
                    material: reg.lookup(&t.cover_material, wl)?,
                },
            ],
            wl,
        )
    }

    /// Diffusion parameters with the taper's cover material above the
    /// surface.
    pub fn taper_diffusion(&self, reg: &MaterialRegistry) -> Result<TiDiffusionParams> {
        let cover = reg.lookup(&self.taper.cover_material, self.wavelength_nm())?;
        Ok(TiDiffusionParams {
            cover_index: cover.n,
            ..self.diffusion
        })
    }

    /// Facet reflectance: configured value or the Fresnel reflectance of
    /// the substrate against air.
    pub fn facet_reflectance(&self, pol: Polarization) -> Result<f64> {
        match self.metrology.facet_reflectance {
            Some(r) => Ok(r),
            None => Ok(crate::modesolver::facet_fresnel(self.diffusion.substrate_index(pol), 1.0)?.reflectance),
        }
    }

    /// Validate that referenced input files exist.
    pub fn check_inputs(&self) -> Result<()> {
        let m = &self.metrology;
        for p in [&m.fringe_scan, &m.efficiency, &m.bias_sweep].into_iter().flatten() {
            ensure!(p.is_file(), "input file {} does not exist", p.display());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_matches_builtin() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml("", Path::new("x")).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::from_toml("[grid]\ndz_um = 1.0\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn diffusion_range_enforced() {
        let err = RunConfig::from_toml("[diffusion]\nlateral_diffusion_len_um = 20.0\n", Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("lateral"));
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml(), Path::new("x")).unwrap(), cfg);
    }
}
