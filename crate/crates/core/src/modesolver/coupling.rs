//! Fiber-to-waveguide coupling: Gaussian fiber modes, overlap integrals
//! and normal-incidence facet reflection.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::ModeField;
use crate::error::{ensure, Result};
use crate::profile::{GridSpec, Polarization};

/// Nominal effective index of a standard single-mode fiber at 1550 nm.
pub const FIBER_N_EFF: f64 = 1.4446;

/// Truncated power above which a fiber mode carries a warning.
pub const TRUNCATION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct FiberMode {
    pub mode: ModeField,
    /// Fraction of the untruncated Gaussian's power outside the grid.
    pub truncated_power: f64,
    pub warning: Option<String>,
}

/// A Gaussian fiber mode `exp(-r^2 / w^2)` with `w = mfd / 2`, sampled on
/// `grid` and normalised to unit power.
pub fn gaussian_fiber_mode(mfd_um: f64, grid: &GridSpec, center: (f64, f64)) -> Result<FiberMode> {
    ensure!(mfd_um > 0.0 && mfd_um.is_finite(), "mode field diameter must be positive");
    grid.validate()?;
    let w = 0.5 * mfd_um;
    let (cx, cy) = center;
    let psi = Array2::from_shape_fn(grid.shape(), |(i, j)| {
        let r2 = (grid.x(i) - cx).powi(2) + (grid.y(j) - cy).powi(2);
        (-r2 / (w * w)).exp()
    });
    // Intensity exp(-2 r^2 / w^2) factorises; the retained fraction per
    // axis is an erf difference.
    let s = std::f64::consts::SQRT_2 / w;
    let inside = |lo: f64, hi: f64, c: f64| 0.5 * (erf(s * (hi - c)) - erf(s * (lo - c)));
    let kept = inside(grid.x_min_um, grid.x_max_um, cx) * inside(grid.y_min_um, grid.y_max_um, cy);
    let truncated_power = (1.0 - kept).max(0.0);
    let warning = (truncated_power > TRUNCATION_LIMIT).then(|| {
        format!("fiber mode truncated by the grid: {truncated_power:.2e} of its power lies outside")
    });
    let mut mode = ModeField {
        grid: *grid,
        psi,
        n_eff: Complex64::new(FIBER_N_EFF, 0.0),
        polarization: Polarization::TE,
        order: 0,
        wavelength_nm: crate::materials::DEFAULT_WAVELENGTH_NM,
    };
    mode.normalize();
    Ok(FiberMode {
        mode,
        truncated_power,
        warning,
    })
}

/// Power overlap `|<a, b>|^2 / (<a, a> <b, b>)`. Polarization tags are
/// not compared.
pub fn mode_overlap(a: &ModeField, b: &ModeField) -> Result<f64> {
    ensure!(
        a.grid.same_as(&b.grid),
        "overlap needs both fields on the same grid (no resampling is done)"
    );
    let ab: f64 = a.psi.iter().zip(b.psi.iter()).map(|(x, y)| x * y).sum();
    let aa: f64 = a.psi.iter().map(|x| x * x).sum();
    let bb: f64 = b.psi.iter().map(|x| x * x).sum();
    ensure!(aa > 0.0 && bb > 0.0, "overlap of an all-zero field");
    Ok((ab * ab / (aa * bb)).min(1.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberOverlap {
    pub overlap: f64,
    pub center_x_um: f64,
    pub center_y_um: f64,
    pub mfd_um: f64,
    pub truncated_power: f64,
}

/// Maximise the overlap of `mode` with a Gaussian of diameter `mfd_um`
/// over the Gaussian's center.
pub fn optimize_fiber_overlap(mode: &ModeField, mfd_um: f64) -> Result<FiberOverlap> {
    let g = mode.grid;
    let eval = |x: f64, y: f64| -> Result<f64> { mode_overlap(mode, &gaussian_fiber_mode(mfd_um, &g, (x, y))?.mode) };

    // Start from the intensity centroid and scan depth coarsely.
    let (mut cx, cy0) = centroid(mode);
    let step = 0.25 * mfd_um;
    let mut cy = cy0;
    let mut best = eval(cx, cy)?;
    for k in -8..=8 {
        let y = cy0 + step * k as f64 / 4.0;
        if !g.contains(cx, y) {
            continue;
        }
        let v = eval(cx, y)?;
        if v > best {
            best = v;
            cy = y;
        }
    }
    for _ in 0..3 {
        cy = golden_max(|y| eval(cx, y), cy - step, cy + step, 1e-4)?;
        cx = golden_max(|x| eval(x, cy), cx - step, cx + step, 1e-4)?;
    }
    let fiber = gaussian_fiber_mode(mfd_um, &g, (cx, cy))?;
    Ok(FiberOverlap {
        overlap: mode_overlap(mode, &fiber.mode)?,
        center_x_um: cx,
        center_y_um: cy,
        mfd_um,
        truncated_power: fiber.truncated_power,
    })
}

fn centroid(mode: &ModeField) -> (f64, f64) {
    let g = &mode.grid;
    let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for ((i, j), v) in mode.psi.indexed_iter() {
        let p = v * v;
        s += p;
        sx += p * g.x(i);
        sy += p * g.y(j);
    }
    (sx / s, sy / s)
}

/// Golden-section search for the maximum of a unimodal `f` on [a, b].
fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FresnelFacet {
    pub reflectance: f64,
    pub transmittance: f64,
}

/// Normal-incidence power reflectance between two lossless media.
pub fn facet_fresnel(n_wg: f64, n_medium: f64) -> Result<FresnelFacet> {
    ensure!(
        n_wg >= 1.0 && n_medium >= 1.0,
        "facet indices must be >= 1 (got {n_wg}, {n_medium})"
    );
    let r = ((n_wg - n_medium) / (n_wg + n_medium)).powi(2);
    Ok(FresnelFacet {
        reflectance: r,
        transmittance: 1.0 - r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::with_spacing(-25.0, 25.0, -25.0, 25.0, 0.1, 0.1).unwrap()
    }

    #[test]
    fn fiber_mode_is_normalised() {
        let f = gaussian_fiber_mode(10.4, &grid(), (0.0, 0.0)).unwrap();
        assert!((f.mode.power() - 1.0).abs() < 1e-9);
        assert!(f.warning.is_none());
    }

    #[test]
    fn truncation_warns() {
        let f = gaussian_fiber_mode(10.4, &grid(), (0.0, 22.0)).unwrap();
        assert!(f.truncated_power > 1e-3);
        assert!(f.warning.is_some());
    }

    #[test]
    fn two_gaussian_overlap() {
        let g = grid();
        let a = gaussian_fiber_mode(10.4, &g, (0.0, 0.0)).unwrap().mode;
        let b = gaussian_fiber_mode(7.0, &g, (0.0, 0.0)).unwrap().mode;
        let (w1, w2): (f64, f64) = (5.2, 3.5);
        let want = (2.0 * w1 * w2 / (w1 * w1 + w2 * w2)).powi(2);
        assert!((mode_overlap(&a, &b).unwrap() - want).abs() < 1e-3);
        assert!((mode_overlap(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_rejects_mismatched_grids() {
        let a = gaussian_fiber_mode(10.4, &grid(), (0.0, 0.0)).unwrap().mode;
        let g2 = GridSpec::with_spacing(-25.0, 25.0, -25.0, 25.0, 0.2, 0.2).unwrap();
        let b = gaussian_fiber_mode(10.4, &g2, (0.0, 0.0)).unwrap().mode;
        assert!(mode_overlap(&a, &b).is_err());
    }

    #[test]
    fn optimiser_finds_offset_gaussian() {
        let g = grid();
        let target = gaussian_fiber_mode(8.0, &g, (1.5, -2.0)).unwrap().mode;
        let o = optimize_fiber_overlap(&target, 8.0).unwrap();
        assert!((o.overlap - 1.0).abs() < 1e-6);
        assert!((o.center_x_um - 1.5).abs() < 1e-3 && (o.center_y_um + 2.0).abs() < 1e-3);
    }

    #[test]
    fn fresnel_values() {
        assert!((facet_fresnel(2.211, 1.0).unwrap().reflectance - 0.1422).abs() < 1e-4);
        assert!((facet_fresnel(2.211, 1.5).unwrap().reflectance - 0.0367).abs() < 1e-4);
        let m = facet_fresnel(2.0, 2.0).unwrap();
        assert_eq!((m.reflectance, m.transmittance), (0.0, 1.0));
        assert!(facet_fresnel(0.5, 1.0).is_err());
    }
}
