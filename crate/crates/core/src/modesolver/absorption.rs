//! Nanowire absorption by first-order index perturbation.
//!
//! The wires (5 nm) and their cap (2 nm) never resolve on the mode grid.
//! Their contribution is integrated over exact sub-cell overlap areas with
//! the field interpolated at each overlap's centroid:
//!
//! ```text
//! delta_n_eff = sum(delta_eps * |psi|^2 dA) / (2 n_eff * sum(|psi|^2 dA))
//! alpha       = 2 k0 Im(n_eff + delta_n_eff)
//! ```

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{wavenumber_per_um, ModeField};
use crate::error::{ensure, Error, Result};
use crate::materials::OpticalMaterial;
use crate::profile::IndexGrid;

/// dB per neper of power.
const DB_PER_NEPER: f64 = 4.342_944_819_032_518;

/// Cross-section of the meander: `num_wires` parallel strips on the
/// surface (y = 0), each covered by a cap layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NanowireGeometry {
    pub wire_width_nm: f64,
    pub wire_thickness_nm: f64,
    pub gap_nm: f64,
    pub num_wires: usize,
    pub device_length_um: f64,
    pub cap_thickness_nm: f64,
    pub wire_material: OpticalMaterial,
    pub cap_material: OpticalMaterial,
    pub center_x_um: f64,
}

impl NanowireGeometry {
    /// The four-strip "w" meander: 160 nm wires at 160 nm spacing, 5 nm
    /// WSi under a 2 nm Si cap, 400 um long.
    pub fn with_materials(wire_material: OpticalMaterial, cap_material: OpticalMaterial) -> Self {
        Self {
            wire_width_nm: 160.0,
            wire_thickness_nm: 5.0,
            gap_nm: 160.0,
            num_wires: 4,
            device_length_um: 400.0,
            cap_thickness_nm: 2.0,
            wire_material,
            cap_material,
            center_x_um: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.wire_width_nm > 0.0
                && self.wire_thickness_nm > 0.0
                && self.gap_nm > 0.0
                && self.device_length_um > 0.0
                && self.cap_thickness_nm > 0.0,
            "nanowire dimensions must be positive"
        );
        ensure!(self.num_wires >= 1, "need at least one wire");
        self.wire_material.validate()?;
        self.cap_material.validate()?;
        Ok(())
    }

    pub fn lateral_extent_nm(&self) -> f64 {
        self.num_wires as f64 * self.wire_width_nm + (self.num_wires - 1) as f64 * self.gap_nm
    }

    /// (x0, x1) of each wire in micrometres.
    pub fn wire_spans_um(&self) -> Vec<(f64, f64)> {
        let left = self.center_x_um - 0.5e-3 * self.lateral_extent_nm();
        (0..self.num_wires)
            .map(|k| {
                let x0 = left + 1e-3 * k as f64 * (self.wire_width_nm + self.gap_nm);
                (x0, x0 + 1e-3 * self.wire_width_nm)
            })
            .collect()
    }

    /// Same geometry with the wire extinction coefficient replaced.
    pub fn with_wire_kappa(&self, kappa: f64) -> Self {
        let mut g = self.clone();
        g.wire_material.kappa = kappa;
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionResult {
    pub delta_n_eff: Complex64,
    pub alpha_db_per_cm: f64,
    /// Fraction of the guided power absorbed over one device length.
    pub absorption_per_device: f64,
}

impl AbsorptionResult {
    /// Attenuation of a mode whose index is shifted by `delta_n_eff`.
    pub fn from_shift(mode: &ModeField, delta_n_eff: Complex64, length_um: f64) -> Self {
        let k0 = wavenumber_per_um(mode.wavelength_nm);
        let alpha_per_um = 2.0 * k0 * (mode.n_eff + delta_n_eff).im;
        let alpha_db_per_cm = DB_PER_NEPER * alpha_per_um * 1e4;
        let absorption_per_device = 1.0 - 10f64.powf(-alpha_db_per_cm * length_um * 1e-4 / 10.0);
        Self {
            delta_n_eff,
            alpha_db_per_cm,
            absorption_per_device,
        }
    }
}

/// First-order shift of n_eff for a permittivity change sampled on the
/// mode grid.
pub fn perturbation_shift(mode: &ModeField, delta_eps: &Array2<Complex64>) -> Result<Complex64> {
    ensure!(
        delta_eps.dim() == mode.grid.shape(),
        "permittivity change does not match the mode grid"
    );
    let num: Complex64 = mode
        .psi
        .iter()
        .zip(delta_eps.iter())
        .map(|(p, d)| d * (p * p))
        .sum::<Complex64>()
        * mode.grid.cell_area();
    Ok(num / (2.0 * mode.n_eff.re * mode.power()))
}

/// An axis-aligned rectangle with a permittivity contrast.
struct Patch {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    eps: Complex64,
}

pub fn absorption_perturbation(mode: &ModeField, wires: &NanowireGeometry, profile: &IndexGrid) -> Result<AbsorptionResult> {
    wires.validate()?;
    ensure!(
        mode.grid.same_as(&profile.grid),
        "mode and index profile are on different grids"
    );
    let g = &profile.grid;
    let t_wire = 1e-3 * wires.wire_thickness_nm;
    let t_cap = 1e-3 * wires.cap_thickness_nm;
    let mut patches = Vec::new();
    for (x0, x1) in wires.wire_spans_um() {
        if !g.contains(x0, 0.0) || !g.contains(x1, t_wire + t_cap) {
            return Err(Error::GridTooSmall(format!(
                "wire [{x0:.3}, {x1:.3}] x [0, {:.4}] um lies outside the grid",
                t_wire + t_cap
            )));
        }
        patches.push(Patch {
            x0,
            x1,
            y0: 0.0,
            y1: t_wire,
            eps: wires.wire_material.permittivity(),
        });
        patches.push(Patch {
            x0,
            x1,
            y0: t_wire,
            y1: t_wire + t_cap,
            eps: wires.cap_material.permittivity(),
        });
    }

    let sheet = profile.sheet(mode.polarization);
    let mut integral = Complex64::new(0.0, 0.0);
    for p in &patches {
        for (cell, area) in overlap_cells(g, p) {
            if area < 0.0 {
                return Err(Error::Invalid(format!("negative sub-cell coverage {area} in {cell:?}")));
            }
            let (cx, cy) = cell.centroid;
            let (cover, j_top) = cover_permittivity(profile, sheet, cx, p.y1);
            let psi = evanescent_sample(mode, cover.re, cx, cy, j_top);
            integral += (p.eps - cover) * (psi * psi * area);
        }
    }
    let delta = integral / (2.0 * mode.n_eff.re * mode.power());
    Ok(AbsorptionResult::from_shift(mode, delta, wires.device_length_um))
}

#[derive(Debug)]
struct OverlapCell {
    #[allow(dead_code)]
    node: (usize, usize),
    centroid: (f64, f64),
}

/// Exact overlap of a patch with the node-centred cells of the grid.
fn overlap_cells(g: &crate::profile::GridSpec, p: &Patch) -> Vec<(OverlapCell, f64)> {
    crate::profile::cell_coverage(g, p.x0, p.x1, p.y0, p.y1)
        .into_iter()
        .map(|((i, j), frac)| {
            let (cx, cy) = (g.x(i), g.y(j));
            let (hx, hy) = (0.5 * g.dx(), 0.5 * g.dy());
            let ax = (cx - hx).max(p.x0);
            let bx = (cx + hx).min(p.x1);
            let ay = (cy - hy).max(p.y0);
            let by = (cy + hy).min(p.y1);
            (
                OverlapCell {
                    node: (i, j),
                    centroid: (0.5 * (ax + bx), 0.5 * (ay + by)),
                },
                frac * g.cell_area(),
            )
        })
        .collect()
}

/// Permittivity of the cover medium in the column at `x` and the row of
/// the first cover node at or above `y_top`.
fn cover_permittivity(profile: &IndexGrid, sheet: &Array2<Complex64>, x: f64, y_top: f64) -> (Complex64, usize) {
    let g = &profile.grid;
    let i = (((x - g.x_min_um) / g.dx()).round() as usize).min(g.nx - 1);
    let mut j = (((y_top - g.y_min_um) / g.dy()).ceil() as usize).min(g.ny - 1);
    while j + 1 < g.ny && g.y(j) <= 0.0 {
        j += 1;
    }
    let n = sheet[[i, j]];
    (n * n, j)
}

/// Field inside a sub-cell film on the surface. Between the surface and
/// the first cover node the field is an evanescent tail, so it is carried
/// down from that node with the cover decay constant rather than
/// interpolated linearly across the interface.
fn evanescent_sample(mode: &ModeField, eps_cover: f64, x: f64, y: f64, j_top: usize) -> f64 {
    let y_top = mode.grid.y(j_top);
    let k0 = wavenumber_per_um(mode.wavelength_nm);
    let n2 = mode.n_eff.re * mode.n_eff.re;
    if y > y_top || n2 <= eps_cover {
        return mode.sample(x, y);
    }
    let gamma = k0 * (n2 - eps_cover).sqrt();
    mode.sample(x, y_top) * (gamma * (y_top - y)).exp()
}

/// Result of fitting the wire extinction coefficient to a target
/// TE absorption.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireCalibration {
    pub kappa: f64,
    pub target_te_absorption: f64,
    pub te: AbsorptionResult,
    pub tm: AbsorptionResult,
}

/// Scale the wire's extinction coefficient until the TE per-device
/// absorption equals `target`; reports the TM absorption implied by the
/// same constants.
pub fn calibrate_wire_kappa(
    te_mode: &ModeField,
    tm_mode: &ModeField,
    wires: &NanowireGeometry,
    profile: &IndexGrid,
    target: f64,
) -> Result<WireCalibration> {
    ensure!(target > 0.0 && target < 1.0, "target absorption must be in (0, 1)");
    let te_at = |kappa: f64| absorption_perturbation(te_mode, &wires.with_wire_kappa(kappa), profile);
    let mut lo = 0.0;
    let mut hi = wires.wire_material.kappa.max(1.0);
    let mut expansions = 0;
    while te_at(hi)?.absorption_per_device < target {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::NoConvergence {
                what: "wire kappa calibration bracket",
                iterations: expansions,
                residual: te_at(hi)?.absorption_per_device - target,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if te_at(mid)?.absorption_per_device < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let kappa = 0.5 * (lo + hi);
    let calibrated = wires.with_wire_kappa(kappa);
    Ok(WireCalibration {
        kappa,
        target_te_absorption: target,
        te: absorption_perturbation(te_mode, &calibrated, profile)?,
        tm: absorption_perturbation(tm_mode, &calibrated, profile)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modesolver::eigenmodes;
    use crate::profile::{GridSpec, Polarization};

    fn slab_profile() -> IndexGrid {
        // Surface slab: LN-like core below y = 0, air above.
        let g = GridSpec::with_spacing(-6.0, 6.0, -8.0, 2.0, 0.1, 0.05).unwrap();
        IndexGrid::from_fn(g, |x, y| {
            let n = if y > 0.0 {
                1.0
            } else if y > -3.0 && x.abs() < 4.0 {
                2.22
            } else {
                2.211
            };
            Complex64::new(n, 0.0)
        })
        .unwrap()
    }

    fn geometry(kappa: f64) -> NanowireGeometry {
        NanowireGeometry::with_materials(
            OpticalMaterial::new("wsi", 4.2, kappa, 1550.0).unwrap(),
            OpticalMaterial::new("si", 3.48, 0.0, 1550.0).unwrap(),
        )
    }

    #[test]
    fn lossless_wires_do_not_absorb() {
        let prof = slab_profile();
        let m = &eigenmodes(&prof, Polarization::TE, 1, 1550.0).unwrap()[0];
        let r = absorption_perturbation(m, &geometry(0.0), &prof).unwrap();
        assert_eq!(r.alpha_db_per_cm, 0.0);
        assert_eq!(r.absorption_per_device, 0.0);
        assert!(r.delta_n_eff.re > 0.0);
    }

    #[test]
    fn halving_loss_halves_alpha() {
        let prof = slab_profile();
        let m = &eigenmodes(&prof, Polarization::TE, 1, 1550.0).unwrap()[0];
        // Im(eps) = 2 n kappa is linear in kappa at fixed n.
        let a = absorption_perturbation(m, &geometry(4.8), &prof).unwrap();
        let b = absorption_perturbation(m, &geometry(2.4), &prof).unwrap();
        assert!(a.alpha_db_per_cm > 0.0);
        assert!((b.alpha_db_per_cm / a.alpha_db_per_cm - 0.5).abs() < 1e-3);
    }

    #[test]
    fn wires_outside_grid_rejected() {
        let prof = slab_profile();
        let m = &eigenmodes(&prof, Polarization::TE, 1, 1550.0).unwrap()[0];
        let mut geo = geometry(4.8);
        geo.center_x_um = 50.0;
        assert!(matches!(
            absorption_perturbation(m, &geo, &prof),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn w_geometry_extent() {
        let g = geometry(4.8);
        assert_eq!(g.lateral_extent_nm(), 4.0 * 160.0 + 3.0 * 160.0);
        let spans = g.wire_spans_um();
        assert_eq!(spans.len(), 4);
        assert!((spans[0].0 + 0.56).abs() < 1e-12 && (spans[3].1 - 0.56).abs() < 1e-12);
    }
}
