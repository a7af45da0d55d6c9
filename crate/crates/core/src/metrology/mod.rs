//! Characterisation mathematics: Fabry-Perot loss, loss attribution,
//! bidirectional efficiency calibration, bias-plateau fits and jitter.

pub mod bias;
pub mod calibration;
pub mod fringe;
pub mod io;

pub use bias::{fit_bias_response, sigmoid_rate, BiasSweep, DarkFit, SigmoidFit, MAX_BIAS_UA, MIN_BIAS_POINTS};
pub use calibration::{
    calibrate_bidirectional, detected_fraction_from_ratio, CalibrationResult, EfficiencyMeasurementSet,
    PolarizationCalibration, PolarizationMeasurement,
};
pub use fringe::{
    airy_transmission, contrast_from_r_eta, detector_absorption_from_loss, fit_airy, fp_contrast, fp_loss_extract,
    AiryFit, FringeScan, LossEstimate,
};

use crate::error::{ensure, Error, Result};

/// Jitter left after removing known Gaussian contributions in quadrature.
pub fn jitter_decompose(system_fwhm_ps: f64, known_components_ps: &[f64]) -> Result<f64> {
    ensure!(system_fwhm_ps >= 0.0, "system jitter must be >= 0");
    ensure!(
        known_components_ps.iter().all(|c| *c >= 0.0),
        "jitter components must be >= 0"
    );
    let known: f64 = known_components_ps.iter().map(|c| c * c).sum();
    let radicand = system_fwhm_ps * system_fwhm_ps - known;
    // Exact closures like 5 = 3 (+) 4 land a few ulps either side of 0.
    let tol = 1e-12 * system_fwhm_ps * system_fwhm_ps;
    if radicand < -tol {
        return Err(Error::Invalid(format!(
            "known jitter components ({:.3} ps in quadrature) exceed the system jitter {system_fwhm_ps} ps",
            known.sqrt()
        )));
    }
    Ok(radicand.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature() {
        assert!((jitter_decompose(380.0, &[16.0]).unwrap() - 379.66).abs() < 5e-3);
        assert_eq!(jitter_decompose(42.0, &[]).unwrap(), 42.0);
        assert_eq!(jitter_decompose(5.0, &[3.0, 4.0]).unwrap(), 0.0);
        assert!(jitter_decompose(5.0, &[4.0, 4.0]).is_err());
    }
}
