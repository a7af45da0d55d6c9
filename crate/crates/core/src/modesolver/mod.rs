//! Semivectorial finite-difference eigenmodes of an [`IndexGrid`].
//!
//! Quasi-TE modes solve the scalar Helmholtz problem
//! `(dxx + dyy + k0^2 eps) psi = beta^2 psi`. Quasi-TM modes use the
//! transverse magnetic field, whose normal derivative scaled by `1/eps` is
//! continuous across horizontal interfaces:
//! `(dxx + eps dy (1/eps) dy + k0^2 eps) psi = beta^2 psi`.
//! Both use five-point differences with Dirichlet walls on the grid edge.

pub mod absorption;
pub mod coupling;
pub mod size;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::{largest_eigenpairs_below, Stencil5};
use crate::error::{ensure, Error, Result};
use crate::profile::{GridSpec, IndexGrid, Polarization};

pub use absorption::{absorption_perturbation, calibrate_wire_kappa, AbsorptionResult, NanowireGeometry, WireCalibration};
pub use coupling::{facet_fresnel, gaussian_fiber_mode, mode_overlap, optimize_fiber_overlap, FiberMode, FiberOverlap, FresnelFacet};
pub use size::{mode_size, ModeSizeReport};

/// Coarsest spacing accepted for guided-mode solves.
pub const MAX_CELL_UM: f64 = 0.25;

pub fn wavenumber_per_um(wavelength_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI / (wavelength_nm * 1e-3)
}

/// A power-normalised transverse field on a grid, indexed `[ix, iy]`,
/// zero on the grid boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub grid: GridSpec,
    pub psi: Array2<f64>,
    pub n_eff: Complex64,
    pub polarization: Polarization,
    pub order: usize,
    pub wavelength_nm: f64,
}

impl ModeField {
    /// Integral of |psi|^2 over the grid (1 for a normalised mode).
    pub fn power(&self) -> f64 {
        self.psi.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()
    }

    /// Scale to unit power and make the largest-magnitude sample positive.
    pub fn normalize(&mut self) {
        let p = self.power();
        if p > 0.0 {
            let s = p.sqrt();
            self.psi.mapv_inplace(|v| v / s);
        }
        let peak = self
            .psi
            .iter()
            .copied()
            .fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if peak < 0.0 {
            self.psi.mapv_inplace(|v| -v);
        }
    }

    /// Bilinear interpolation of psi at (x, y); zero outside the grid.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        if !g.contains(x, y) {
            return 0.0;
        }
        let fx = ((x - g.x_min_um) / g.dx()).clamp(0.0, (g.nx - 1) as f64);
        let fy = ((y - g.y_min_um) / g.dy()).clamp(0.0, (g.ny - 1) as f64);
        let i = (fx.floor() as usize).min(g.nx - 2);
        let j = (fy.floor() as usize).min(g.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let p = &self.psi;
        (1.0 - tx) * (1.0 - ty) * p[[i, j]]
            + tx * (1.0 - ty) * p[[i + 1, j]]
            + (1.0 - tx) * ty * p[[i, j + 1]]
            + tx * ty * p[[i + 1, j + 1]]
    }
}

/// Outcome of a guided-mode solve.
#[derive(Debug, Clone)]
pub enum ModeSolution {
    Guided(Vec<ModeField>),
    /// Every eigenvalue found lies at or below the cutoff index.
    NoGuidedMode { best_n_eff: f64, cutoff_index: f64 },
}

impl ModeSolution {
    pub fn modes(&self) -> &[ModeField] {
        match self {
            ModeSolution::Guided(m) => m,
            ModeSolution::NoGuidedMode { .. } => &[],
        }
    }

    pub fn into_modes(self) -> Vec<ModeField> {
        match self {
            ModeSolution::Guided(m) => m,
            ModeSolution::NoGuidedMode { .. } => Vec::new(),
        }
    }

    /// The fundamental mode, or an error describing the cutoff.
    pub fn fundamental(self) -> Result<ModeField> {
        match self {
            ModeSolution::Guided(mut m) => Ok(m.swap_remove(0)),
            ModeSolution::NoGuidedMode { best_n_eff, cutoff_index } => Err(Error::Invalid(format!(
                "no guided mode: best Re(n_eff) = {best_n_eff:.6} <= cutoff index {cutoff_index:.6}"
            ))),
        }
    }
}

/// Solve for up to `count` guided modes, sorted by Re(n_eff) descending.
///
/// A mode is guided when Re(n_eff) exceeds the largest index on the grid
/// boundary.
pub fn solve_modes(profile: &IndexGrid, pol: Polarization, count: usize, wavelength_nm: f64) -> Result<ModeSolution> {
    let g = &profile.grid;
    ensure!(
        g.dx() <= MAX_CELL_UM + 1e-12 && g.dy() <= MAX_CELL_UM + 1e-12,
        "grid spacing {:.3} x {:.3} um is coarser than {} um",
        g.dx(),
        g.dy(),
        MAX_CELL_UM
    );
    let modes = eigenmodes(profile, pol, count, wavelength_nm)?;
    let cutoff = profile.boundary_index(pol);
    let best = modes.first().map(|m| m.n_eff.re).unwrap_or(f64::NAN);
    let guided: Vec<ModeField> = modes.into_iter().filter(|m| m.n_eff.re > cutoff).collect();
    if guided.is_empty() {
        Ok(ModeSolution::NoGuidedMode {
            best_n_eff: best,
            cutoff_index: cutoff,
        })
    } else {
        Ok(ModeSolution::Guided(guided))
    }
}

/// The `count` highest eigenmodes of the grid operator, guided or not.
/// Intended for closed-box checks; no resolution limit is enforced.
pub fn eigenmodes(profile: &IndexGrid, pol: Polarization, count: usize, wavelength_nm: f64) -> Result<Vec<ModeField>> {
    ensure!(count >= 1, "mode count must be >= 1");
    ensure!(wavelength_nm > 0.0, "wavelength must be positive");
    profile.validate()?;
    let k0 = wavenumber_per_um(wavelength_nm);
    let sheet = profile.sheet(pol);
    let g = profile.grid;
    let eps = sheet.mapv(|n| n.re * n.re);
    let (op, layout) = build_operator(&g, &eps, pol, k0);
    // Both transverse parts are negative semidefinite, so k0^2 max(eps)
    // bounds the spectrum.
    let eps_max = eps.iter().copied().fold(0.0, f64::max);
    let pairs = largest_eigenpairs_below(&op, count, Some(k0 * k0 * eps_max))?;
    let (_, hi) = profile.real_range(pol);

    let mut out = Vec::with_capacity(pairs.len());
    for (order, pair) in pairs.into_iter().enumerate() {
        let mut psi = Array2::zeros(g.shape());
        for (k, v) in pair.vector.iter().enumerate() {
            let (i, j) = layout.node(k);
            // TM: undo the symmetrising similarity transform, H = eps^(1/2) phi.
            let scale = match pol {
                Polarization::TE => 1.0,
                Polarization::TM => eps[[i, j]].sqrt(),
            };
            psi[[i, j]] = v * scale;
        }
        let n_re = pair.value.max(0.0).sqrt() / k0;
        // Closed-box modes may sit below the smallest index; none may
        // exceed the largest.
        if pair.value <= 0.0 || n_re > hi + 1e-9 {
            return Err(Error::NoConvergence {
                what: "mode solve (eigenvalue outside the index range of the grid)",
                iterations: 0,
                residual: n_re,
            });
        }
        let mut mode = ModeField {
            grid: g,
            psi,
            n_eff: Complex64::new(n_re, 0.0),
            polarization: pol,
            order,
            wavelength_nm,
        };
        mode.normalize();
        // Material loss enters at first order.
        let loss: f64 = mode
            .psi
            .indexed_iter()
            .map(|(ij, v)| {
                let n = sheet[ij];
                (n * n).im * v * v
            })
            .sum::<f64>()
            * g.cell_area();
        mode.n_eff.im = loss / (2.0 * n_re);
        out.push(mode);
    }
    Ok(out)
}

/// Maps unknown indices to interior grid nodes. The shorter axis runs
/// fastest to keep the Cholesky bandwidth small.
struct Layout {
    x_fast: bool,
    mx: usize,
    my: usize,
}

impl Layout {
    fn node(&self, k: usize) -> (usize, usize) {
        if self.x_fast {
            (k % self.mx + 1, k / self.mx + 1)
        } else {
            (k / self.my + 1, k % self.my + 1)
        }
    }
}

fn build_operator(g: &GridSpec, eps: &Array2<f64>, pol: Polarization, k0: f64) -> (Stencil5, Layout) {
    let (mx, my) = (g.nx - 2, g.ny - 2);
    let layout = Layout {
        x_fast: mx <= my,
        mx,
        my,
    };
    let n = mx * my;
    let (hx2, hy2) = (g.dx().powi(2), g.dy().powi(2));
    let mut diag = vec![0.0; n];
    let mut off_fast = vec![0.0; n];
    let mut off_slow = vec![0.0; n];

    // Coupling between (i, j) and (i, j+1) and the matching diagonal part.
    let y_coupling = |i: usize, j: usize| -> (f64, f64, f64) {
        match pol {
            Polarization::TE => (1.0 / hy2, -1.0 / hy2, -1.0 / hy2),
            Polarization::TM => {
                let (e0, e1) = (eps[[i, j]], eps[[i, j + 1]]);
                let mid = 0.5 * (e0 + e1);
                // off, diag contribution to (i, j), diag contribution to (i, j+1)
                ((e0 * e1).sqrt() / (mid * hy2), -e0 / (mid * hy2), -e1 / (mid * hy2))
            }
        }
    };

    let index = |i: usize, j: usize| -> usize {
        if layout.x_fast {
            (j - 1) * mx + (i - 1)
        } else {
            (i - 1) * my + (j - 1)
        }
    };

    for i in 1..=mx {
        for j in 1..=my {
            let k = index(i, j);
            diag[k] += k0 * k0 * eps[[i, j]] - 2.0 / hx2;
            if i < mx {
                let k1 = index(i + 1, j);
                if layout.x_fast {
                    off_fast[k.min(k1)] = 1.0 / hx2;
                } else {
                    off_slow[k.min(k1)] = 1.0 / hx2;
                }
            }
        }
        // y couplings including the faces to the Dirichlet walls.
        for j in 0..=my {
            let (off, d0, d1) = y_coupling(i, j);
            if j >= 1 {
                diag[index(i, j)] += d0;
            }
            if j < my {
                diag[index(i, j + 1)] += d1;
            }
            if j >= 1 && j < my {
                let (k, k1) = (index(i, j), index(i, j + 1));
                if layout.x_fast {
                    off_slow[k.min(k1)] = off;
                } else {
                    off_fast[k.min(k1)] = off;
                }
            }
        }
    }
    let (n_fast, n_slow) = if layout.x_fast { (mx, my) } else { (my, mx) };
    (
        Stencil5 {
            n_fast,
            n_slow,
            diag,
            off_fast,
            off_slow,
        },
        layout,
    )
}

/// Inner product of two modes; TM modes use the 1/eps weight under
/// which they are orthogonal.
pub fn mode_inner_product(a: &ModeField, b: &ModeField, profile: &IndexGrid) -> Result<f64> {
    ensure!(a.grid.same_as(&b.grid), "modes live on different grids");
    ensure!(a.polarization == b.polarization, "modes have different polarizations");
    let sheet = profile.sheet(a.polarization);
    let weighted = a.polarization == Polarization::TM;
    let s: f64 = a
        .psi
        .indexed_iter()
        .map(|(ij, va)| {
            let w = if weighted {
                let e = sheet[ij].re * sheet[ij].re;
                1.0 / e
            } else {
                1.0
            };
            va * b.psi[ij] * w
        })
        .sum();
    Ok(s * a.grid.cell_area())
}

/// Summary row for JSON/CSV output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeSummary {
    pub polarization: Polarization,
    pub order: usize,
    pub n_eff_re: f64,
    pub n_eff_im: f64,
    pub d4sigma_x_um: f64,
    pub d4sigma_y_um: f64,
    pub effective_area_um2: f64,
}

impl ModeSummary {
    pub fn of(mode: &ModeField) -> Self {
        let s = mode_size(mode);
        Self {
            polarization: mode.polarization,
            order: mode.order,
            n_eff_re: mode.n_eff.re,
            n_eff_im: mode.n_eff.im,
            d4sigma_x_um: s.d4sigma_x_um,
            d4sigma_y_um: s.d4sigma_y_um,
            effective_area_um2: s.effective_area_um2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const LAMBDA: f64 = 1550.0;

    fn box_grid(nx: usize, ny: usize) -> GridSpec {
        GridSpec::new(0.0, 6.0, 0.0, 4.0, nx, ny).unwrap()
    }

    /// Analytic beta^2 for mode (p, q) of a homogeneous Dirichlet box.
    fn box_beta2(n0: f64, a: f64, b: f64, p: usize, q: usize) -> f64 {
        let k0 = wavenumber_per_um(LAMBDA);
        k0 * k0 * n0 * n0 - (p as f64 * PI / a).powi(2) - (q as f64 * PI / b).powi(2)
    }

    #[test]
    fn homogeneous_box_with_richardson() {
        let n0 = 2.2;
        let coarse = IndexGrid::uniform(box_grid(61, 41), Complex64::new(n0, 0.0)).unwrap();
        let fine = IndexGrid::uniform(box_grid(121, 81), Complex64::new(n0, 0.0)).unwrap();
        let k0 = wavenumber_per_um(LAMBDA);
        let mc = eigenmodes(&coarse, Polarization::TE, 3, LAMBDA).unwrap();
        let mf = eigenmodes(&fine, Polarization::TE, 3, LAMBDA).unwrap();
        // (1,1), (2,1), (1,2) for a 6 x 4 box
        for (k, (p, q)) in [(1, 1), (2, 1), (1, 2)].into_iter().enumerate() {
            let b2c = (k0 * mc[k].n_eff.re).powi(2);
            let b2f = (k0 * mf[k].n_eff.re).powi(2);
            let rich = (4.0 * b2f - b2c) / 3.0;
            let want = box_beta2(n0, 6.0, 4.0, p, q);
            assert!(((rich - want) / want).abs() < 1e-6, "mode {k}: {rich} vs {want}");
        }
    }

    #[test]
    fn modes_are_normalised_and_signed() {
        let prof = IndexGrid::uniform(box_grid(41, 31), Complex64::new(1.5, 0.0)).unwrap();
        for pol in Polarization::BOTH {
            for m in eigenmodes(&prof, pol, 3, LAMBDA).unwrap() {
                assert!((m.power() - 1.0).abs() < 1e-12);
                let peak = m.psi.iter().copied().fold(0.0_f64, |a, v| if v.abs() > a.abs() { v } else { a });
                assert!(peak > 0.0);
            }
        }
    }

    #[test]
    fn uniform_loss_gives_first_order_imaginary_part() {
        let kappa = 1e-4;
        let n0 = 2.0;
        let prof = IndexGrid::uniform(box_grid(41, 31), Complex64::new(n0, kappa)).unwrap();
        let m = &eigenmodes(&prof, Polarization::TE, 1, LAMBDA).unwrap()[0];
        // Im(eps) = 2 n kappa; Im(n_eff) = Im(eps)/(2 n_eff)
        let want = 2.0 * n0 * kappa / (2.0 * m.n_eff.re);
        assert!((m.n_eff.im - want).abs() < 1e-12);
    }

    #[test]
    fn too_coarse_grid_rejected() {
        let g = GridSpec::new(-10.0, 10.0, -10.0, 2.0, 21, 21).unwrap();
        let prof = IndexGrid::uniform(g, Complex64::new(2.0, 0.0)).unwrap();
        assert!(solve_modes(&prof, Polarization::TE, 1, LAMBDA).is_err());
    }

    #[test]
    fn homogeneous_box_has_no_guided_mode() {
        let prof = IndexGrid::uniform(box_grid(41, 31), Complex64::new(2.0, 0.0)).unwrap();
        match solve_modes(&prof, Polarization::TE, 2, LAMBDA).unwrap() {
            ModeSolution::NoGuidedMode { best_n_eff, cutoff_index } => {
                assert!(best_n_eff < cutoff_index);
                assert_eq!(cutoff_index, 2.0);
            }
            ModeSolution::Guided(_) => panic!("a homogeneous box cannot guide"),
        }
    }

    #[test]
    fn tm_symmetrised_operator_matches_te_without_interfaces() {
        let prof = IndexGrid::uniform(box_grid(41, 31), Complex64::new(2.1, 0.0)).unwrap();
        let te = eigenmodes(&prof, Polarization::TE, 2, LAMBDA).unwrap();
        let tm = eigenmodes(&prof, Polarization::TM, 2, LAMBDA).unwrap();
        for (a, b) in te.iter().zip(&tm) {
            assert!((a.n_eff.re - b.n_eff.re).abs() < 1e-12);
        }
    }
}
