//! Waveguide Fabry-Perot loss measurement.
//!
//! The chip's polished facets form a low-finesse cavity. Its transmission
//! as a function of round-trip phase is the Airy function
//!
//! ```text
//! T(phi) = (1 - R)^2 eta / ((1 - R eta)^2 + 4 R eta sin^2 phi)
//! ```
//!
//! whose contrast `K = 2 R eta / (1 + (R eta)^2)` fixes the single-pass
//! transmission `eta` once the facet reflectance R is known.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub const MIN_FRINGE_SAMPLES: usize = 32;

/// Relative slack on `R eta <= R` before a result is called gain-like;
/// absorbs round-off in the lossless limit.
const GAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub phase_samples_rad: Vec<f64>,
    pub power_samples: Vec<f64>,
    pub facet_reflectance: f64,
    pub chip_length_cm: f64,
}

impl FringeScan {
    pub fn validate(&self) -> Result<()> {
        let n = self.phase_samples_rad.len();
        ensure!(
            n == self.power_samples.len(),
            "fringe scan has {} phases but {} powers",
            n,
            self.power_samples.len()
        );
        ensure!(n >= MIN_FRINGE_SAMPLES, "fringe scan needs >= {MIN_FRINGE_SAMPLES} samples, got {n}");
        let (lo, hi) = self
            .phase_samples_rad
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| (a.min(p), b.max(p)));
        ensure!(
            hi - lo >= 2.0 * std::f64::consts::PI - 1e-9,
            "fringe scan spans {:.3} rad of phase; at least 2 pi is needed",
            hi - lo
        );
        ensure!(
            self.power_samples.iter().all(|p| p.is_finite() && *p >= 0.0),
            "fringe powers must be finite and >= 0"
        );
        ensure!(
            self.facet_reflectance > 0.0 && self.facet_reflectance < 1.0,
            "facet reflectance must be in (0, 1)"
        );
        ensure!(self.chip_length_cm > 0.0, "chip length must be positive");
        Ok(())
    }
}

/// Airy transmission of a lossy cavity.
pub fn airy_transmission(phi: f64, reflectance: f64, eta: f64) -> f64 {
    let re = reflectance * eta;
    (1.0 - reflectance).powi(2) * eta / ((1.0 - re).powi(2) + 4.0 * re * phi.sin().powi(2))
}

/// Fringe contrast of a cavity with round-trip factor `r_eta`.
pub fn contrast_from_r_eta(r_eta: f64) -> f64 {
    2.0 * r_eta / (1.0 + r_eta * r_eta)
}

/// Least-squares fit of `P = 1 / (c0 + c1 cos 2phi + c2 sin 2phi)`, the
/// Airy function with free scale and phase offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AiryFit {
    pub contrast: f64,
    pub coefficients: [f64; 3],
    pub residual_rms: f64,
    pub iterations: usize,
}

pub fn fit_airy(scan: &FringeScan) -> Result<AiryFit> {
    scan.validate()?;
    let phi = &scan.phase_samples_rad;
    let p = &scan.power_samples;
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    ensure!(mean > 0.0, "fringe scan carries no power");
    // Work in units of the mean power.
    let y: Vec<f64> = p.iter().map(|v| v / mean).collect();
    let basis = |ph: f64| Vector3::new(1.0, (2.0 * ph).cos(), (2.0 * ph).sin());

    // Linear start on 1/P, weighted by P^2 so each row carries the error
    // of P rather than of 1/P.
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for (ph, v) in phi.iter().zip(&y) {
        if *v <= 0.0 {
            continue;
        }
        let b = basis(*ph);
        let w = v * v;
        ata += w * b * b.transpose();
        atb += w * b / *v;
    }
    let mut c = ata
        .try_inverse()
        .map(|inv| inv * atb)
        .unwrap_or_else(|| Vector3::new(1.0, 0.0, 0.0));
    if !(c[0] > c.fixed_rows::<2>(1).norm()) {
        c = Vector3::new(1.0, 0.0, 0.0);
    }

    // Levenberg-Marquardt on P itself.
    let cost = |c: &Vector3<f64>| -> Option<f64> {
        let mut s = 0.0;
        for (ph, v) in phi.iter().zip(&y) {
            let d = c.dot(&basis(*ph));
            if d <= 0.0 {
                return None;
            }
            s += (v - 1.0 / d).powi(2);
        }
        Some(s)
    };
    let mut current = cost(&c).ok_or(Error::NoConvergence {
        what: "Airy fit (start)",
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=200 {
        iterations = it;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (ph, v) in phi.iter().zip(&y) {
            let b = basis(*ph);
            let d = c.dot(&b);
            let model = 1.0 / d;
            let grad = -b * (model * model);
            jtj += grad * grad.transpose();
            jtr += grad * (v - model);
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] *= 1.0 + lambda;
                damped[(k, k)] += 1e-300;
            }
            let Some(step) = damped.try_inverse().map(|m| m * jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = c + step;
            match cost(&trial) {
                Some(t) if t <= current => {
                    let rel = (current - t) / current.max(1e-300);
                    c = trial;
                    current = t;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if rel < 1e-15 || step.norm() < 1e-14 * c.norm() {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    let residual_rms = (current / y.len() as f64).sqrt();
    if !converged {
        return Err(Error::NoConvergence {
            what: "Airy fit",
            iterations,
            residual: residual_rms,
        });
    }
    let amplitude = (c[1] * c[1] + c[2] * c[2]).sqrt();
    Ok(AiryFit {
        contrast: amplitude / c[0],
        coefficients: [c[0] / mean, c[1] / mean, c[2] / mean],
        residual_rms,
        iterations,
    })
}

/// Fringe contrast `(P_max - P_min) / (P_max + P_min)` of the fitted Airy
/// function.
pub fn fp_contrast(scan: &FringeScan) -> Result<f64> {
    Ok(fit_airy(scan)?.contrast)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    pub contrast_k: f64,
    pub r_eta: f64,
    pub single_pass_transmission: f64,
    pub alpha_db_per_cm: f64,
}

/// Invert the contrast for the single-pass loss.
pub fn fp_loss_extract(k: f64, reflectance: f64, length_cm: f64) -> Result<LossEstimate> {
    ensure!(k > 0.0 && k < 1.0, "contrast must be in (0, 1), got {k}");
    ensure!(
        reflectance > 0.0 && reflectance < 1.0,
        "facet reflectance must be in (0, 1)"
    );
    ensure!(length_cm > 0.0, "chip length must be positive");
    // Stable form of (1 - sqrt(1 - K^2)) / K.
    let r_eta = k / (1.0 + (1.0 - k * k).sqrt());
    if r_eta > reflectance * (1.0 + GAIN_SLACK) {
        return Err(Error::GainLike { r_eta, reflectance });
    }
    let eta = (r_eta / reflectance).min(1.0);
    Ok(LossEstimate {
        contrast_k: k,
        r_eta,
        single_pass_transmission: eta,
        alpha_db_per_cm: -10.0 * eta.log10() / length_cm,
    })
}

/// Per-detector absorption implied by a loss increase spread evenly over
/// `n_detectors`.
pub fn detector_absorption_from_loss(alpha_before: f64, alpha_after: f64, length_cm: f64, n_detectors: usize) -> Result<f64> {
    ensure!(
        alpha_after >= alpha_before,
        "loss after detector deposition ({alpha_after}) is below the bare loss ({alpha_before})"
    );
    ensure!(length_cm > 0.0, "chip length must be positive");
    ensure!(n_detectors >= 1, "need at least one detector");
    let added_db = (alpha_after - alpha_before) * length_cm;
    Ok(1.0 - 10f64.powf(-added_db / (10.0 * n_detectors as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scan(r: f64, eta: f64, n: usize) -> FringeScan {
        let phase: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / (n - 1) as f64).collect();
        FringeScan {
            power_samples: phase.iter().map(|&p| airy_transmission(p + 0.3, r, eta)).collect(),
            phase_samples_rad: phase,
            facet_reflectance: r,
            chip_length_cm: 2.3,
        }
    }

    #[test]
    fn noiseless_contrast() {
        let s = scan(0.14, 1.0, 64);
        assert!((fp_contrast(&s).unwrap() - contrast_from_r_eta(0.14)).abs() < 1e-10);
        assert!((contrast_from_r_eta(0.14) - 0.2746).abs() < 1e-4);
    }

    #[test]
    fn flat_scan_has_no_contrast() {
        let mut s = scan(0.14, 1.0, 40);
        s.power_samples.iter_mut().for_each(|p| *p = 3.0);
        assert!(fp_contrast(&s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn short_or_narrow_scans_rejected() {
        let s = scan(0.14, 1.0, 20);
        assert!(fp_contrast(&s).is_err());
        let mut s = scan(0.14, 1.0, 40);
        s.phase_samples_rad.iter_mut().for_each(|p| *p *= 0.5);
        assert!(fp_contrast(&s).is_err());
    }

    #[test]
    fn lossless_inverse() {
        let r: f64 = 0.14;
        let est = fp_loss_extract(2.0 * r / (1.0 + r * r), r, 2.3).unwrap();
        assert!(est.alpha_db_per_cm.abs() < 1e-9);
    }

    #[test]
    fn gain_like_flagged() {
        let err = fp_loss_extract(contrast_from_r_eta(0.2), 0.14, 2.3).unwrap_err();
        assert!(matches!(err, Error::GainLike { .. }));
    }

    #[test]
    fn loss_attribution_arithmetic() {
        assert_eq!(detector_absorption_from_loss(0.03, 0.03, 2.3, 5).unwrap(), 0.0);
        let te = detector_absorption_from_loss(0.03, 0.10, 2.3, 5).unwrap();
        let tm = detector_absorption_from_loss(0.03, 0.05, 2.3, 5).unwrap();
        assert!((te - 0.0074).abs() < 5e-5);
        assert!((tm - 0.0021).abs() < 5e-5);
        assert!(detector_absorption_from_loss(0.1, 0.03, 2.3, 5).is_err());
        assert!(detector_absorption_from_loss(0.03, 0.1, 2.3, 0).is_err());
    }
}
