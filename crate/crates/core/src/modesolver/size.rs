//! Second-moment mode sizes.

use serde::{Deserialize, Serialize};

use super::ModeField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSizeReport {
    pub d4sigma_x_um: f64,
    pub d4sigma_y_um: f64,
    /// `(sum I dA)^2 / sum I^2 dA` with `I = |psi|^2`.
    pub effective_area_um2: f64,
}

impl ModeSizeReport {
    /// Product of the D4sigma widths, the area measure used for ratios.
    pub fn d4sigma_area_um2(&self) -> f64 {
        self.d4sigma_x_um * self.d4sigma_y_um
    }
}

pub fn mode_size(mode: &ModeField) -> ModeSizeReport {
    let g = &mode.grid;
    let (mut s, mut sx, mut sy, mut s2) = (0.0, 0.0, 0.0, 0.0);
    for ((i, j), v) in mode.psi.indexed_iter() {
        let p = v * v;
        s += p;
        sx += p * g.x(i);
        sy += p * g.y(j);
        s2 += p * p;
    }
    let (mx, my) = (sx / s, sy / s);
    let (mut vx, mut vy) = (0.0, 0.0);
    for ((i, j), v) in mode.psi.indexed_iter() {
        let p = v * v;
        vx += p * (g.x(i) - mx).powi(2);
        vy += p * (g.y(j) - my).powi(2);
    }
    ModeSizeReport {
        d4sigma_x_um: 4.0 * (vx / s).sqrt(),
        d4sigma_y_um: 4.0 * (vy / s).sqrt(),
        effective_area_um2: s * s * g.cell_area() / s2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modesolver::gaussian_fiber_mode;
    use crate::profile::GridSpec;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_moments() {
        let g = GridSpec::with_spacing(-20.0, 20.0, -20.0, 20.0, 0.1, 0.1).unwrap();
        let w = 3.0;
        let m = gaussian_fiber_mode(2.0 * w, &g, (0.0, 0.0)).unwrap().mode;
        let r = mode_size(&m);
        assert!((r.d4sigma_x_um / (2.0 * w) - 1.0).abs() < 1e-2);
        assert!((r.d4sigma_y_um / (2.0 * w) - 1.0).abs() < 1e-2);
        // For psi = exp(-r^2/w^2) the area integral closes to pi w^2.
        assert!((r.effective_area_um2 / (PI * w * w) - 1.0).abs() < 2e-2);
    }

    #[test]
    fn scaling_scales_widths() {
        let g1 = GridSpec::new(-10.0, 10.0, -8.0, 8.0, 81, 65).unwrap();
        let s = 1.7;
        let g2 = GridSpec::new(-10.0 * s, 10.0 * s, -8.0 * s, 8.0 * s, 81, 65).unwrap();
        let a = gaussian_fiber_mode(5.0, &g1, (1.0, -0.5)).unwrap().mode;
        let mut b = a.clone();
        b.grid = g2;
        b.psi.mapv_inplace(|v| v / s);
        let (ra, rb) = (mode_size(&a), mode_size(&b));
        assert!((rb.d4sigma_x_um - s * ra.d4sigma_x_um).abs() < 1e-12);
        assert!((rb.d4sigma_y_um - s * ra.d4sigma_y_um).abs() < 1e-12);
    }
}
