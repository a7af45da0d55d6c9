//! Graded refractive-index profile of a Ti-indiffused LiNbO3 channel.
//!
//! The index increase below the surface (y <= 0) is separable,
//!
//! ```text
//! dn(x, y) = dn_max * exp(-y^2 / d^2) * F(x) / F(0)
//! F(x)     = 0.5 * [erf((w/2 - x)/l) + erf((w/2 + x)/l)]
//! ```
//!
//! with stripe width `w`, lateral diffusion length `l` and depth diffusion
//! length `d`. Above the surface the index is that of the cover medium.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{ensure, Error, Result};
use crate::materials::DEFAULT_WAVELENGTH_NM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// In-plane field, sees the ordinary index in z-cut LiNbO3.
    TE,
    /// Out-of-plane field, sees the extraordinary index.
    TM,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::TE, Polarization::TM];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarization::TE => "te",
            Polarization::TM => "tm",
        }
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarization::TE => "TE",
            Polarization::TM => "TM",
        })
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "te" => Ok(Polarization::TE),
            "tm" => Ok(Polarization::TM),
            other => Err(Error::Invalid(format!("unknown polarization '{other}' (te|tm)"))),
        }
    }
}

/// Uniform rectangular sampling grid; nodes include both end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min_um: f64,
    pub x_max_um: f64,
    /// Substrate depth is y <= 0, cover is y > 0.
    pub y_min_um: f64,
    pub y_max_um: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub const MIN_SAMPLES: usize = 16;

    pub fn new(x_min_um: f64, x_max_um: f64, y_min_um: f64, y_max_um: f64, nx: usize, ny: usize) -> Result<Self> {
        let g = Self {
            x_min_um,
            x_max_um,
            y_min_um,
            y_max_um,
            nx,
            ny,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid with the given spacings; extents are rounded outwards to whole cells.
    pub fn with_spacing(x_min_um: f64, x_max_um: f64, y_min_um: f64, y_max_um: f64, dx: f64, dy: f64) -> Result<Self> {
        ensure!(dx > 0.0 && dy > 0.0, "grid spacing must be positive");
        let nx = ((x_max_um - x_min_um) / dx - 1e-9).ceil() as usize + 1;
        let ny = ((y_max_um - y_min_um) / dy - 1e-9).ceil() as usize + 1;
        Self::new(
            x_min_um,
            x_min_um + dx * (nx - 1) as f64,
            y_min_um,
            y_min_um + dy * (ny - 1) as f64,
            nx,
            ny,
        )
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.nx >= Self::MIN_SAMPLES && self.ny >= Self::MIN_SAMPLES,
            "grid needs at least {} samples per axis, got {}x{}",
            Self::MIN_SAMPLES,
            self.nx,
            self.ny
        );
        ensure!(
            self.x_max_um > self.x_min_um && self.y_max_um > self.y_min_um,
            "grid extents must be increasing"
        );
        ensure!(
            [self.x_min_um, self.x_max_um, self.y_min_um, self.y_max_um]
                .iter()
                .all(|v| v.is_finite()),
            "grid extents must be finite"
        );
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max_um - self.x_min_um) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max_um - self.y_min_um) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min_um + self.dx() * i as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min_um + self.dy() * j as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min_um && x <= self.x_max_um && y >= self.y_min_um && y <= self.y_max_um
    }

    /// Grids are the same if their sample positions agree to round-off.
    pub fn same_as(&self, other: &GridSpec) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        self.nx == other.nx
            && self.ny == other.ny
            && close(self.x_min_um, other.x_min_um)
            && close(self.x_max_um, other.x_max_um)
            && close(self.y_min_um, other.y_min_um)
            && close(self.y_max_um, other.y_max_um)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiDiffusionParams {
    pub stripe_width_um: f64,
    pub ti_thickness_nm: f64,
    pub lateral_diffusion_len_um: f64,
    pub depth_diffusion_len_um: f64,
    pub dn_o_max: f64,
    pub dn_e_max: f64,
    pub n_o_sub: f64,
    pub n_e_sub: f64,
    pub wavelength_nm: f64,
    /// Index of the medium above the surface.
    pub cover_index: f64,
}

impl Default for TiDiffusionParams {
    fn default() -> Self {
        Self {
            stripe_width_um: 7.0,
            ti_thickness_nm: 80.0,
            lateral_diffusion_len_um: 4.0,
            depth_diffusion_len_um: 10.0,
            dn_o_max: 0.003,
            dn_e_max: 0.005,
            n_o_sub: 2.211,
            n_e_sub: 2.133,
            wavelength_nm: DEFAULT_WAVELENGTH_NM,
            cover_index: 1.0,
        }
    }
}

impl TiDiffusionParams {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.stripe_width_um > 0.0 && self.ti_thickness_nm > 0.0 && self.wavelength_nm > 0.0,
            "stripe width, Ti thickness and wavelength must be positive"
        );
        ensure!(
            self.lateral_diffusion_len_um > 0.0 && self.depth_diffusion_len_um > 0.0,
            "diffusion lengths must be positive (lateral {}, depth {})",
            self.lateral_diffusion_len_um,
            self.depth_diffusion_len_um
        );
        ensure!(
            (0.0..0.1).contains(&self.dn_o_max) && (0.0..0.1).contains(&self.dn_e_max),
            "peak index increases must lie in [0, 0.1)"
        );
        ensure!(
            self.n_e_sub < self.n_o_sub,
            "LiNbO3 is negative uniaxial: need n_e < n_o"
        );
        ensure!(self.cover_index >= 1.0, "cover index must be >= 1");
        Ok(())
    }

    pub fn substrate_index(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::TE => self.n_o_sub,
            Polarization::TM => self.n_e_sub,
        }
    }

    pub fn peak_increase(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::TE => self.dn_o_max,
            Polarization::TM => self.dn_e_max,
        }
    }

    /// Normalised lateral shape F(x)/F(0).
    pub fn lateral_shape(&self, x: f64) -> f64 {
        let half = 0.5 * self.stripe_width_um;
        let l = self.lateral_diffusion_len_um;
        let f = |x: f64| 0.5 * (erf((half - x) / l) + erf((half + x) / l));
        f(x) / f(0.0)
    }

    pub fn depth_shape(&self, y: f64) -> f64 {
        let d = self.depth_diffusion_len_um;
        (-(y / d).powi(2)).exp()
    }

    /// Real index at a point, evaluated directly from the closed form.
    pub fn index_at(&self, pol: Polarization, x: f64, y: f64) -> f64 {
        if y > 0.0 {
            self.cover_index
        } else {
            self.substrate_index(pol) + self.peak_increase(pol) * self.depth_shape(y) * self.lateral_shape(x)
        }
    }
}

/// Complex index sampled on a grid, one sheet per polarization.
/// Arrays are indexed `[ix, iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexGrid {
    pub grid: GridSpec,
    pub n_te: Array2<Complex64>,
    pub n_tm: Array2<Complex64>,
}

impl IndexGrid {
    pub fn new(grid: GridSpec, n_te: Array2<Complex64>, n_tm: Array2<Complex64>) -> Result<Self> {
        grid.validate()?;
        let g = Self { grid, n_te, n_tm };
        g.validate()?;
        Ok(g)
    }

    /// Same isotropic index everywhere.
    pub fn uniform(grid: GridSpec, n: Complex64) -> Result<Self> {
        let a = Array2::from_elem(grid.shape(), n);
        Self::new(grid, a.clone(), a)
    }

    /// Build from a real-index function of (x, y), isotropic.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let a = Array2::from_shape_fn(grid.shape(), |(i, j)| f(grid.x(i), grid.y(j)));
        Self::new(grid, a.clone(), a)
    }

    pub fn validate(&self) -> Result<()> {
        for sheet in [&self.n_te, &self.n_tm] {
            ensure!(
                sheet.dim() == self.grid.shape(),
                "index sheet shape {:?} does not match grid {:?}",
                sheet.dim(),
                self.grid.shape()
            );
            ensure!(
                sheet.iter().all(|n| n.re >= 1.0 && n.im >= 0.0 && n.is_finite()),
                "index sheet needs Re(n) >= 1 and Im(n) >= 0 everywhere"
            );
        }
        Ok(())
    }

    pub fn sheet(&self, pol: Polarization) -> &Array2<Complex64> {
        match pol {
            Polarization::TE => &self.n_te,
            Polarization::TM => &self.n_tm,
        }
    }

    /// (min, max) of Re(n) over a sheet.
    pub fn real_range(&self, pol: Polarization) -> (f64, f64) {
        self.sheet(pol)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| (lo.min(n.re), hi.max(n.re)))
    }

    /// Largest Re(n) on the outer boundary of the grid; modes must exceed
    /// this to be guided.
    pub fn boundary_index(&self, pol: Polarization) -> f64 {
        let s = self.sheet(pol);
        let (nx, ny) = self.grid.shape();
        let mut hi = f64::NEG_INFINITY;
        for i in 0..nx {
            hi = hi.max(s[[i, 0]].re).max(s[[i, ny - 1]].re);
        }
        for j in 0..ny {
            hi = hi.max(s[[0, j]].re).max(s[[nx - 1, j]].re);
        }
        hi
    }

    /// Paint an isotropic rectangle onto both sheets. Cells that are only
    /// partly covered receive the area-weighted mean permittivity, so layers
    /// much thinner than a cell keep their integrated weight.
    pub fn with_rectangle(&self, x0: f64, x1: f64, y0: f64, y1: f64, index: Complex64) -> Result<Self> {
        ensure!(x1 >= x0 && y1 >= y0, "rectangle extents must be ordered");
        let mut out = self.clone();
        let eps_rect = index * index;
        for ((i, j), frac) in cell_coverage(&self.grid, x0, x1, y0, y1) {
            for sheet in [&mut out.n_te, &mut out.n_tm] {
                let eps = sheet[[i, j]] * sheet[[i, j]];
                let mixed = eps * (1.0 - frac) + eps_rect * frac;
                sheet[[i, j]] = principal_index(mixed);
            }
        }
        Ok(out)
    }
}

/// Index with non-negative imaginary part from a permittivity.
pub(crate) fn principal_index(eps: Complex64) -> Complex64 {
    let n = eps.sqrt();
    if n.re < 0.0 {
        -n
    } else {
        n
    }
}

/// Fraction of each node's cell covered by an axis-aligned rectangle.
/// Node cells are centred on the nodes and clipped to the grid extent.
pub(crate) fn cell_coverage(grid: &GridSpec, x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<((usize, usize), f64)> {
    let (dx, dy) = (grid.dx(), grid.dy());
    let span = |lo: f64, hi: f64, min: f64, h: f64, n: usize| -> Vec<(usize, f64)> {
        let first = (((lo - min) / h - 0.5).floor().max(0.0)) as usize;
        let last = ((((hi - min) / h) + 0.5).ceil() as usize).min(n - 1);
        (first..=last)
            .filter_map(|k| {
                let c = min + h * k as f64;
                let a = (c - 0.5 * h).max(min).max(lo);
                let b = (c + 0.5 * h).min(min + h * (n - 1) as f64).min(hi);
                (b > a).then(|| (k, (b - a) / h))
            })
            .collect()
    };
    let xs = span(x0, x1, grid.x_min_um, dx, grid.nx);
    let ys = span(y0, y1, grid.y_min_um, dy, grid.ny);
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &(i, fx) in &xs {
        for &(j, fy) in &ys {
            out.push(((i, j), fx * fy));
        }
    }
    out
}

/// Sample the Ti-indiffused profile for both polarizations.
pub fn build_index_profile(params: &TiDiffusionParams, grid: &GridSpec) -> Result<IndexGrid> {
    params.validate()?;
    grid.validate()?;
    let w = params.stripe_width_um;
    if grid.x_min_um > -w || grid.x_max_um < w {
        return Err(Error::GridTooSmall(format!(
            "x range [{}, {}] must contain +/-{} um",
            grid.x_min_um, grid.x_max_um, w
        )));
    }
    let depth = 3.0 * params.depth_diffusion_len_um;
    if grid.y_min_um > -depth || grid.y_max_um <= 0.0 {
        return Err(Error::GridTooSmall(format!(
            "y range [{}, {}] must reach {} um into the substrate and include cover (y > 0)",
            grid.y_min_um, grid.y_max_um, -depth
        )));
    }
    let sheet = |pol| {
        Array2::from_shape_fn(grid.shape(), |(i, j)| {
            Complex64::new(params.index_at(pol, grid.x(i), grid.y(j)), 0.0)
        })
    };
    IndexGrid::new(*grid, sheet(Polarization::TE), sheet(Polarization::TM))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::with_spacing(-20.0, 20.0, -32.0, 4.0, 0.25, 0.25).unwrap()
    }

    #[test]
    fn peak_matches_paper_endpoint() {
        let p = TiDiffusionParams::default();
        let g = grid();
        let prof = build_index_profile(&p, &g).unwrap();
        let i0 = g.xs().iter().position(|x| x.abs() < 1e-9).unwrap();
        let j0 = g.ys().iter().position(|y| y.abs() < 1e-9).unwrap();
        assert!((prof.n_te[[i0, j0]].re - 2.214).abs() < 1e-12);
        assert!((prof.n_tm[[i0, j0]].re - 2.138).abs() < 1e-12);
        let (_, hi) = prof.real_range(Polarization::TE);
        assert!((hi - 2.214).abs() < 1e-12);
    }

    #[test]
    fn zero_perturbation_is_uniform_substrate() {
        let p = TiDiffusionParams {
            dn_o_max: 0.0,
            dn_e_max: 0.0,
            ..Default::default()
        };
        let g = grid();
        let prof = build_index_profile(&p, &g).unwrap();
        for ((_, j), n) in prof.n_te.indexed_iter() {
            let want = if g.y(j) <= 0.0 { 2.211 } else { 1.0 };
            assert_eq!(n.re, want);
        }
        for ((_, j), n) in prof.n_tm.indexed_iter() {
            let want = if g.y(j) <= 0.0 { 2.133 } else { 1.0 };
            assert_eq!(n.re, want);
        }
    }

    #[test]
    fn pointwise_closed_form() {
        // Independent evaluation of the erf x Gaussian profile at (2, -2).
        let p = TiDiffusionParams::default();
        let (w, l, d) = (7.0_f64, 4.0_f64, 10.0_f64);
        let f = |x: f64| 0.5 * (erf((w / 2.0 - x) / l) + erf((w / 2.0 + x) / l));
        let want = 2.211 + 0.003 * (-(2.0_f64 / d).powi(2)).exp() * f(2.0) / f(0.0);
        let g = grid();
        let prof = build_index_profile(&p, &g).unwrap();
        let i = g.xs().iter().position(|x| (x - 2.0).abs() < 1e-9).unwrap();
        let j = g.ys().iter().position(|y| (y + 2.0).abs() < 1e-9).unwrap();
        assert!((prof.n_te[[i, j]].re - want).abs() < 1e-14);
    }

    #[test]
    fn mirror_symmetric_and_monotone_in_depth() {
        let g = grid();
        let prof = build_index_profile(&TiDiffusionParams::default(), &g).unwrap();
        for pol in Polarization::BOTH {
            let s = prof.sheet(pol);
            for i in 0..g.nx {
                for j in 0..g.ny {
                    assert_eq!(s[[i, j]], s[[g.nx - 1 - i, j]]);
                }
            }
            let i0 = g.nx / 2;
            let mut prev = f64::INFINITY;
            for j in (0..g.ny).rev().filter(|&j| g.y(j) <= 0.0) {
                assert!(s[[i0, j]].re <= prev);
                prev = s[[i0, j]].re;
            }
        }
    }

    #[test]
    fn wide_stripe_slab_limit() {
        let p = TiDiffusionParams {
            stripe_width_um: 1000.0,
            ..Default::default()
        };
        for &x in &[-20.0, -3.0, 0.0, 5.5, 20.0] {
            for &y in &[0.0, -1.0, -7.5, -25.0] {
                let slab = 2.211 + 0.003 * (-(y / 10.0_f64).powi(2)).exp();
                assert!((p.index_at(Polarization::TE, x, y) - slab).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_small_grid_and_bad_lengths() {
        let p = TiDiffusionParams::default();
        let narrow = GridSpec::new(-5.0, 5.0, -32.0, 4.0, 41, 145).unwrap();
        assert!(matches!(build_index_profile(&p, &narrow), Err(Error::GridTooSmall(_))));
        let shallow = GridSpec::new(-20.0, 20.0, -10.0, 4.0, 41, 57).unwrap();
        assert!(matches!(build_index_profile(&p, &shallow), Err(Error::GridTooSmall(_))));
        let bad = TiDiffusionParams {
            depth_diffusion_len_um: 0.0,
            ..p
        };
        assert!(build_index_profile(&bad, &grid()).is_err());
    }

    #[test]
    fn thin_rectangle_keeps_integrated_permittivity() {
        let g = GridSpec::with_spacing(-5.0, 5.0, -5.0, 5.0, 0.1, 0.1).unwrap();
        let base = IndexGrid::uniform(g, Complex64::new(1.0, 0.0)).unwrap();
        let si = Complex64::new(3.48, 0.0);
        let painted = base.with_rectangle(-1.5, 1.5, 0.0, 0.06, si).unwrap();
        let extra: f64 = painted
            .n_te
            .iter()
            .map(|n| (n * n).re - 1.0)
            .sum::<f64>()
            * g.cell_area();
        let want = (3.48_f64.powi(2) - 1.0) * 3.0 * 0.06;
        assert!((extra - want).abs() < 1e-9 * want, "{extra} vs {want}");
    }
}
