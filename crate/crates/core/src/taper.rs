//! Effective-index model of a silicon strip taper on the waveguide.
//!
//! A vertical multilayer slab solve gives the index under the strip; the
//! waveguide's own fundamental index is the background beside it. A
//! symmetric lateral slab of the strip's width between those two indices
//! then gives the family of taper modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::materials::{MaterialRegistry, OpticalMaterial};
use crate::modesolver::{mode_size, solve_modes, wavenumber_per_um, ModeField};
use crate::profile::{IndexGrid, Polarization};

/// Bisection stops once the bracket is this narrow in n_eff.
const ROOT_TOL: f64 = 1e-13;

/// Widths accepted by [`taper_neff_sweep`].
pub const MAX_SWEEP_WIDTH_UM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `None` for the semi-infinite substrate and cover.
    pub thickness_nm: Option<f64>,
    pub material: OpticalMaterial,
}

/// Layers listed from substrate to cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabStack {
    pub layers: Vec<Layer>,
    pub wavelength_nm: f64,
}

impl SlabStack {
    pub fn new(layers: Vec<Layer>, wavelength_nm: f64) -> Result<Self> {
        let s = Self { layers, wavelength_nm };
        s.validate()?;
        Ok(s)
    }

    /// Substrate / one film / cover.
    pub fn three_layer(substrate: OpticalMaterial, film: OpticalMaterial, thickness_nm: f64, cover: OpticalMaterial) -> Result<Self> {
        let wl = substrate.wavelength_nm;
        Self::new(
            vec![
                Layer { thickness_nm: None, material: substrate },
                Layer { thickness_nm: Some(thickness_nm), material: film },
                Layer { thickness_nm: None, material: cover },
            ],
            wl,
        )
    }

    /// LiNbO3 (ordinary) / 60 nm Si / SiO2 from the registry.
    pub fn silicon_taper(registry: &MaterialRegistry) -> Result<Self> {
        let wl = registry.wavelength_nm;
        Self::three_layer(
            registry.lookup("linbo3_no", wl)?,
            registry.lookup("si", wl)?,
            60.0,
            registry.lookup("sio2", wl)?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.layers.len() >= 2, "a slab stack needs at least substrate and cover");
        ensure!(self.wavelength_nm > 0.0, "wavelength must be positive");
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            l.material.validate()?;
            let outer = k == 0 || k == last;
            match (outer, l.thickness_nm) {
                (true, None) => {}
                (true, Some(_)) => {
                    return Err(Error::Invalid(format!("layer {k} is outermost and must be semi-infinite")));
                }
                (false, Some(t)) if t > 0.0 && t.is_finite() => {}
                (false, _) => {
                    return Err(Error::Invalid(format!("inner layer {k} needs a positive finite thickness")));
                }
            }
        }
        Ok(())
    }

    fn indices(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.material.n).collect()
    }

    fn thicknesses_um(&self) -> Vec<f64> {
        self.layers[1..self.layers.len() - 1]
            .iter()
            .map(|l| 1e-3 * l.thickness_nm.unwrap_or(0.0))
            .collect()
    }

    /// Total thickness of the finite layers.
    pub fn film_thickness_um(&self) -> f64 {
        self.thicknesses_um().iter().sum()
    }
}

/// Guided indices of a multilayer slab, descending.
pub fn slab_solve(stack: &SlabStack, pol: Polarization, count: usize) -> Result<Vec<f64>> {
    stack.validate()?;
    ensure!(count >= 1, "mode count must be >= 1");
    Ok(layered_roots(&stack.indices(), &stack.thicknesses_um(), pol, stack.wavelength_nm, count))
}

/// Guided indices of a symmetric slab of width `width_um` (TE-like).
pub fn lateral_solve(core: f64, cladding: f64, width_um: f64, wavelength_nm: f64, count: usize) -> Result<Vec<f64>> {
    ensure!(width_um >= 0.0, "width must be non-negative");
    ensure!(core >= cladding && cladding > 0.0, "lateral core index must be >= cladding");
    if width_um == 0.0 {
        return Ok(Vec::new());
    }
    Ok(layered_roots(&[cladding, core, cladding], &[width_um], Polarization::TE, wavelength_nm, count))
}

/// Roots of the transfer-matrix dispersion function, found by a dense sign
/// scan over (max outer index, max inner index) and bisection.
fn layered_roots(n: &[f64], t_um: &[f64], pol: Polarization, wavelength_nm: f64, count: usize) -> Vec<f64> {
    let lo = n[0].max(n[n.len() - 1]);
    let hi = n[1..n.len() - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Vec::new();
    }
    let k0 = wavenumber_per_um(wavelength_nm);
    let f = |ne: f64| dispersion(n, t_um, pol, k0, ne);
    // Enough samples that adjacent roots are resolved: the phase across
    // the film grows at most by k0 * t * sqrt(hi^2 - lo^2).
    let phase: f64 = t_um.iter().sum::<f64>() * k0 * (hi * hi - lo * lo).sqrt();
    let samples = (2000.0 + 400.0 * phase).min(2e6) as usize;
    // Uniform in u with n^2 = lo^2 + (hi^2 - lo^2) u^2, which spreads out
    // the roots of modes just above cutoff.
    let at = |u: f64| (lo * lo + (hi * hi - lo * lo) * u * u).sqrt();
    let mut roots = Vec::new();
    let mut prev_x = hi;
    let mut prev = f(hi);
    for s in 1..samples {
        let x = at(1.0 - s as f64 / samples as f64);
        let v = f(x);
        if prev == 0.0 {
            roots.push(prev_x);
        } else if v.signum() != prev.signum() && v != 0.0 {
            roots.push(bisect(&f, x, prev_x));
        }
        if roots.len() >= count {
            break;
        }
        prev = v;
        prev_x = x;
    }
    roots.truncate(count);
    roots
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa0 = f(a);
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa0.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Mismatch of the upward-propagated substrate solution with a decaying
/// cover field. State is (psi, p psi') with p = 1 (TE) or 1/n^2 (TM).
fn dispersion(n: &[f64], t_um: &[f64], pol: Polarization, k0: f64, ne: f64) -> f64 {
    let weight = |ni: f64| match pol {
        Polarization::TE => 1.0,
        Polarization::TM => 1.0 / (ni * ni),
    };
    let decay = |ni: f64| k0 * (ne * ne - ni * ni).max(0.0).sqrt();
    let (ns, nc) = (n[0], n[n.len() - 1]);
    let mut psi = 1.0;
    let mut q = weight(ns) * decay(ns);
    for (ni, t) in n[1..n.len() - 1].iter().zip(t_um) {
        let p = weight(*ni);
        let d = ni * ni - ne * ne;
        let (p1, q1) = if d > 0.0 {
            let k = k0 * d.sqrt();
            let (s, c) = (k * t).sin_cos();
            (psi * c + q * s / (p * k), -p * k * psi * s + q * c)
        } else if d < 0.0 {
            let g = k0 * (-d).sqrt();
            let (s, c) = ((g * t).sinh(), (g * t).cosh());
            (psi * c + q * s / (p * g), p * g * psi * s + q * c)
        } else {
            (psi + q * t / p, q)
        };
        // Keep magnitudes bounded; only the sign pattern matters.
        let scale = p1.abs().max(q1.abs()).max(1e-300);
        psi = p1 / scale;
        q = q1 / scale;
    }
    q + weight(nc) * decay(nc) * psi
}

/// Effective indices of the lateral taper modes over a width sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaperSweep {
    pub widths_um: Vec<f64>,
    /// `n_eff_by_mode[m][k]` is mode m at `widths_um[k]`, `None` below
    /// cutoff.
    pub n_eff_by_mode: Vec<Vec<Option<f64>>>,
    /// Width above which mode m is guided (0 for the fundamental).
    pub cutoff_widths_um: Vec<f64>,
    pub loaded_index: f64,
    pub unloaded_index: f64,
    pub polarization: Polarization,
}

impl TaperSweep {
    pub fn fundamental(&self) -> Vec<f64> {
        self.n_eff_by_mode[0].iter().map(|v| v.unwrap_or(self.unloaded_index)).collect()
    }
}

/// Width at which lateral mode `m` of a symmetric slab is cut off.
pub fn cutoff_width_um(m: usize, loaded: f64, unloaded: f64, wavelength_nm: f64) -> f64 {
    let na = (loaded * loaded - unloaded * unloaded).sqrt();
    m as f64 * wavelength_nm * 1e-3 / (2.0 * na)
}

pub fn taper_neff_sweep(stack: &SlabStack, waveguide_surface_index: f64, widths_um: &[f64], pol: Polarization) -> Result<TaperSweep> {
    ensure!(!widths_um.is_empty(), "width list is empty");
    ensure!(
        widths_um.windows(2).all(|w| w[1] > w[0]),
        "widths must be strictly increasing"
    );
    ensure!(
        widths_um[0] >= 0.0 && widths_um[widths_um.len() - 1] <= MAX_SWEEP_WIDTH_UM,
        "widths must lie in [0, {MAX_SWEEP_WIDTH_UM}] um"
    );
    let loaded = *slab_solve(stack, pol, 1)?
        .first()
        .ok_or_else(|| Error::Invalid("the loaded slab guides no mode".into()))?;
    let unloaded = waveguide_surface_index;
    if loaded <= unloaded {
        return Err(Error::Invalid(format!(
            "loaded slab index {loaded:.6} <= unloaded index {unloaded:.6}; effective-index method inapplicable"
        )));
    }
    let wl = stack.wavelength_nm;
    let max_w = widths_um[widths_um.len() - 1];
    let mut cutoffs = Vec::new();
    loop {
        let c = cutoff_width_um(cutoffs.len(), loaded, unloaded, wl);
        if c >= max_w && !cutoffs.is_empty() {
            break;
        }
        cutoffs.push(c);
    }
    let per_width: Vec<Vec<f64>> = widths_um
        .par_iter()
        .map(|&w| lateral_solve(loaded, unloaded, w, wl, cutoffs.len()))
        .collect::<Result<_>>()?;
    let mut n_eff_by_mode = vec![vec![None; widths_um.len()]; cutoffs.len()];
    for (k, roots) in per_width.iter().enumerate() {
        for (m, v) in roots.iter().enumerate() {
            n_eff_by_mode[m][k] = Some(*v);
        }
        if widths_um[k] == 0.0 {
            // No strip: the waveguide mode itself.
            n_eff_by_mode[0][k] = Some(unloaded);
        }
    }
    Ok(TaperSweep {
        widths_um: widths_um.to_vec(),
        n_eff_by_mode,
        cutoff_widths_um: cutoffs,
        loaded_index: loaded,
        unloaded_index: unloaded,
        polarization: pol,
    })
}

/// Paint the stack's finite layers as a strip of width `width_um`
/// centred at x = 0 on top of the surface (y = 0).
pub fn paint_strip(profile: &IndexGrid, stack: &SlabStack, width_um: f64) -> Result<IndexGrid> {
    stack.validate()?;
    if width_um <= 0.0 {
        return Ok(profile.clone());
    }
    let mut out = profile.clone();
    let mut y = 0.0;
    for l in &stack.layers[1..stack.layers.len() - 1] {
        let t = 1e-3 * l.thickness_nm.unwrap_or(0.0);
        out = out.with_rectangle(-0.5 * width_um, 0.5 * width_um, y, y + t, l.material.index())?;
        y += t;
    }
    Ok(out)
}

/// Mode size at one position along the taper, relative to the unloaded
/// waveguide mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeProfilePoint {
    pub z_um: f64,
    pub width_um: f64,
    pub n_eff: f64,
    /// D4sigma area ratio.
    pub area_ratio: f64,
    /// Square root of the area ratio.
    pub linear_ratio: f64,
    pub effective_area_ratio: f64,
}

/// Re-solve the local fundamental mode at `samples` evenly spaced
/// positions along the taper.
pub fn taper_mode_size_profile(
    taper_length_um: f64,
    width_profile: &(dyn Fn(f64) -> f64 + Sync),
    stack: &SlabStack,
    base_profile: &IndexGrid,
    base_mode: &ModeField,
    samples: usize,
) -> Result<Vec<SizeProfilePoint>> {
    ensure!(taper_length_um > 0.0, "taper length must be positive");
    ensure!(samples >= 2, "need at least two samples along the taper");
    ensure!(
        width_profile(0.0).abs() < 1e-12,
        "the width profile must start at zero"
    );
    let base = mode_size(base_mode);
    let pol = base_mode.polarization;
    let zs: Vec<f64> = (0..samples)
        .map(|k| taper_length_um * k as f64 / (samples - 1) as f64)
        .collect();
    zs.par_iter()
        .map(|&z| {
            let w = width_profile(z);
            let at = |e: Error| Error::AtTaperPosition { z_um: z, source: Box::new(e) };
            ensure!(w.is_finite() && w >= 0.0, "width profile gave {w} um at z = {z} um");
            let mode = if w == 0.0 {
                base_mode.clone()
            } else {
                let local = paint_strip(base_profile, stack, w).map_err(at)?;
                solve_modes(&local, pol, 1, base_mode.wavelength_nm)
                    .and_then(|s| s.fundamental())
                    .map_err(at)?
            };
            let s = mode_size(&mode);
            let area_ratio = s.d4sigma_area_um2() / base.d4sigma_area_um2();
            Ok(SizeProfilePoint {
                z_um: z,
                width_um: w,
                n_eff: mode.n_eff.re,
                area_ratio,
                linear_ratio: area_ratio.sqrt(),
                effective_area_ratio: s.effective_area_um2 / base.effective_area_um2,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(name: &str, n: f64) -> OpticalMaterial {
        OpticalMaterial::new(name, n, 0.0, 1550.0).unwrap()
    }

    /// Even TE modes of a symmetric slab: k tan(k d/2) = gamma.
    fn symmetric_even_root(n1: f64, n2: f64, d: f64) -> f64 {
        let k0 = wavenumber_per_um(1550.0);
        let g = |ne: f64| {
            let k = k0 * (n1 * n1 - ne * ne).sqrt();
            let gam = k0 * (ne * ne - n2 * n2).sqrt();
            k * (k * d / 2.0).tan() - gam
        };
        let (mut a, mut b) = (n2 + 1e-12, n1 - 1e-12);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn symmetric_slab_matches_even_root() {
        let s = SlabStack::three_layer(mat("c", 2.211), mat("f", 2.214), 4000.0, mat("c", 2.211)).unwrap();
        let te = slab_solve(&s, Polarization::TE, 3).unwrap();
        assert_eq!(te.len(), 1);
        assert!((te[0] - symmetric_even_root(2.214, 2.211, 4.0)).abs() < 1e-8);
    }

    #[test]
    fn vanishing_film_guides_nothing() {
        let s = SlabStack::three_layer(mat("ln", 2.211), mat("si", 3.48), 0.01, mat("sio2", 1.444)).unwrap();
        assert!(slab_solve(&s, Polarization::TE, 3).unwrap().is_empty());
    }

    #[test]
    fn silicon_film_on_niobate_has_one_te_mode() {
        let s = SlabStack::silicon_taper(&MaterialRegistry::default()).unwrap();
        let te = slab_solve(&s, Polarization::TE, 5).unwrap();
        assert_eq!(te.len(), 1);
        assert!(te[0] > 2.211 && te[0] < 3.48);
    }

    #[test]
    fn malformed_stacks_rejected() {
        let bad = vec![
            Layer { thickness_nm: Some(10.0), material: mat("a", 2.0) },
            Layer { thickness_nm: None, material: mat("b", 1.0) },
        ];
        assert!(SlabStack::new(bad, 1550.0).is_err());
        assert!(SlabStack::three_layer(mat("a", 2.0), mat("b", 3.0), 0.0, mat("c", 1.0)).is_err());
    }

    #[test]
    fn sweep_degenerate_width_and_cutoffs() {
        let s = SlabStack::silicon_taper(&MaterialRegistry::default()).unwrap();
        let widths: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
        let sw = taper_neff_sweep(&s, 2.2116, &widths, Polarization::TE).unwrap();
        assert_eq!(sw.n_eff_by_mode[0][0], Some(2.2116));
        assert!(sw.cutoff_widths_um.windows(2).all(|c| c[1] > c[0]));
        for (m, row) in sw.n_eff_by_mode.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let guided = widths[k] > sw.cutoff_widths_um[m];
                if m > 0 || widths[k] > 0.0 {
                    assert_eq!(v.is_some(), guided, "mode {m} at {}", widths[k]);
                }
            }
        }
    }

    #[test]
    fn sweep_rejects_unloaded_above_loaded() {
        let s = SlabStack::silicon_taper(&MaterialRegistry::default()).unwrap();
        assert!(taper_neff_sweep(&s, 2.5, &[0.0, 1.0], Polarization::TE).is_err());
        assert!(taper_neff_sweep(&s, 2.2116, &[1.0, 0.5], Polarization::TE).is_err());
        assert!(taper_neff_sweep(&s, 2.2116, &[0.0, 12.0], Polarization::TE).is_err());
    }
}
