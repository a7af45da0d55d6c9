//! Coupling-independent on-chip efficiency from bidirectional
//! measurements.
//!
//! With light launched from the left the i-th detector sees
//!
//! ```text
//! eta_i^L = kappa_L 10^(-alpha z_i / 10) prod_{j<i} (1 - d_j) d_i
//! ```
//!
//! and mirrored from the right; the end-to-end transmission is
//! `T = kappa_L kappa_R 10^(-alpha L / 10) prod_j (1 - d_j)`. Here `d = a xi`
//! is the detected fraction, taken equal to the absorbed fraction (internal
//! efficiency saturated on the bias plateau). Per detector
//! `eta^L eta^R / T = d^2 / (1 - d)` independent of coupling and loss.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::profile::Polarization;

/// Measurements for one polarization. Detectors are ordered by position;
/// `None` marks a missing measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationMeasurement {
    pub polarization: Polarization,
    pub eta_left: Vec<Option<f64>>,
    pub eta_right: Vec<Option<f64>>,
    pub transmission: Option<f64>,
    /// Background propagation loss.
    pub alpha_db_per_cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyMeasurementSet {
    pub detector_positions_cm: Vec<f64>,
    pub chip_length_cm: f64,
    pub measurements: Vec<PolarizationMeasurement>,
}

impl EfficiencyMeasurementSet {
    pub fn validate(&self) -> Result<()> {
        let z = &self.detector_positions_cm;
        ensure!(!z.is_empty(), "no detectors in the measurement set");
        ensure!(self.chip_length_cm > 0.0, "chip length must be positive");
        ensure!(
            z.iter().all(|&v| v > 0.0 && v < self.chip_length_cm),
            "detector positions must lie strictly inside the chip"
        );
        ensure!(
            z.windows(2).all(|w| w[1] > w[0]),
            "detector positions must be strictly increasing"
        );
        for m in &self.measurements {
            ensure!(
                m.eta_left.len() == z.len() && m.eta_right.len() == z.len(),
                "{}: expected {} efficiencies per direction",
                m.polarization,
                z.len()
            );
            ensure!(m.alpha_db_per_cm >= 0.0, "{}: propagation loss must be >= 0", m.polarization);
            let all = m.eta_left.iter().chain(&m.eta_right).chain(std::iter::once(&m.transmission));
            for v in all.flatten() {
                ensure!(
                    v.is_finite() && *v > 0.0 && *v <= 1.0,
                    "{}: efficiencies and transmission must be in (0, 1], got {v}",
                    m.polarization
                );
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationCalibration {
    pub polarization: Polarization,
    pub kappa_left: f64,
    pub kappa_right: f64,
    /// Detected fraction `a xi` per detector.
    pub detection_efficiency: Vec<f64>,
    /// Per-detector closed-form values, before the joint fit.
    pub closed_form: Vec<f64>,
    /// Norm of the log-domain residual of the joint fit.
    pub residual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub polarizations: Vec<PolarizationCalibration>,
}

impl CalibrationResult {
    pub fn get(&self, pol: Polarization) -> Option<&PolarizationCalibration> {
        self.polarizations.iter().find(|c| c.polarization == pol)
    }
}

/// `d` with `d^2 / (1 - d) = q`.
pub fn detected_fraction_from_ratio(q: f64) -> f64 {
    0.5 * (-q + (q * q + 4.0 * q).sqrt())
}

pub fn calibrate_bidirectional(meas: &EfficiencyMeasurementSet) -> Result<CalibrationResult> {
    meas.validate()?;
    ensure!(!meas.measurements.is_empty(), "measurement set holds no polarization");
    let polarizations = meas
        .measurements
        .iter()
        .map(|m| calibrate_one(m, &meas.detector_positions_cm, meas.chip_length_cm))
        .collect::<Result<_>>()?;
    Ok(CalibrationResult { polarizations })
}

fn calibrate_one(m: &PolarizationMeasurement, z: &[f64], length: f64) -> Result<PolarizationCalibration> {
    let pol = m.polarization;
    let t = m
        .transmission
        .ok_or_else(|| Error::Underdetermined(format!("{pol}: chip transmission missing")))?;
    let n = z.len();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let l = m.eta_left[i]
            .ok_or_else(|| Error::Underdetermined(format!("{pol}: detector {i} has no left-launch measurement")))?;
        let r = m.eta_right[i]
            .ok_or_else(|| Error::Underdetermined(format!("{pol}: detector {i} has no right-launch measurement")))?;
        left.push(l);
        right.push(r);
    }

    let closed_form: Vec<f64> = (0..n)
        .map(|i| detected_fraction_from_ratio(left[i] * right[i] / t))
        .collect();

    // Log-domain Gauss-Newton over (ln kappa_L, ln kappa_R, ln d_i).
    let ln10 = std::f64::consts::LN_10;
    let att = |zz: f64| -m.alpha_db_per_cm * zz * ln10 / 10.0;
    let mut obs = Vec::with_capacity(2 * n + 1);
    obs.extend(left.iter().map(|v| v.ln()));
    obs.extend(right.iter().map(|v| v.ln()));
    obs.push(t.ln());

    let model = |p: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let d: Vec<f64> = (0..n).map(|i| p[2 + i].exp()).collect();
        // d ln(1 - d) / d ln d
        let dl: Vec<f64> = d.iter().map(|v| (1.0 - v).ln()).collect();
        let ddl: Vec<f64> = d.iter().map(|v| -v / (1.0 - v)).collect();
        let rows = 2 * n + 1;
        let mut f = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, n + 2);
        for i in 0..n {
            f[i] = p[0] + att(z[i]) + dl[..i].iter().sum::<f64>() + p[2 + i];
            jac[(i, 0)] = 1.0;
            jac[(i, 2 + i)] = 1.0;
            for j in 0..i {
                jac[(i, 2 + j)] = ddl[j];
            }
            let r = n + i;
            f[r] = p[1] + att(length - z[i]) + dl[i + 1..].iter().sum::<f64>() + p[2 + i];
            jac[(r, 1)] = 1.0;
            jac[(r, 2 + i)] = 1.0;
            for j in i + 1..n {
                jac[(r, 2 + j)] = ddl[j];
            }
        }
        let r = 2 * n;
        f[r] = p[0] + p[1] + att(length) + dl.iter().sum::<f64>();
        jac[(r, 0)] = 1.0;
        jac[(r, 1)] = 1.0;
        for j in 0..n {
            jac[(r, 2 + j)] = ddl[j];
        }
        (f, jac)
    };

    // Start: closed-form d, kappas from the left/right launches averaged.
    let mut p = DVector::zeros(n + 2);
    for i in 0..n {
        ensure!(
            closed_form[i] < 1.0,
            "{pol}: detector {i} closed-form efficiency is not below 1"
        );
        p[2 + i] = closed_form[i].ln();
    }
    let (f0, _) = model(&p);
    let obs_v = DVector::from_vec(obs);
    p[0] = (0..n).map(|i| obs_v[i] - f0[i]).sum::<f64>() / n as f64;
    p[1] = (0..n).map(|i| obs_v[n + i] - f0[n + i]).sum::<f64>() / n as f64;

    let mut residual_norm = f64::INFINITY;
    for _ in 0..100 {
        let (f, jac) = model(&p);
        let r = &obs_v - &f;
        residual_norm = r.norm();
        let jt = jac.transpose();
        let Some(step) = (&jt * &jac).try_inverse().map(|inv| inv * (&jt * &r)) else {
            return Err(Error::NoConvergence {
                what: "bidirectional calibration (singular normal equations)",
                iterations: 0,
                residual: residual_norm,
            });
        };
        // Keep every d below 1 along the step.
        let mut scale: f64 = 1.0;
        for i in 0..n {
            while p[2 + i] + scale * step[2 + i] >= 0.0 {
                scale *= 0.5;
            }
        }
        p += scale * &step;
        if (scale * step.norm()) < 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    let (f, _) = model(&p);
    residual_norm = (&obs_v - &f).norm().min(residual_norm);

    let kappa_left = p[0].exp();
    let kappa_right = p[1].exp();
    let detection_efficiency: Vec<f64> = (0..n).map(|i| p[2 + i].exp()).collect();
    for (name, v) in [("kappa_left", kappa_left), ("kappa_right", kappa_right)] {
        if !(v > 0.0 && v <= 1.0 + 1e-9) {
            return Err(Error::Inconsistent {
                message: format!("{pol}: {name} = {v:.6} outside (0, 1]"),
                residual: residual_norm,
            });
        }
    }
    Ok(PolarizationCalibration {
        polarization: pol,
        kappa_left,
        kappa_right,
        detection_efficiency,
        closed_form,
        residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(kl: f64, kr: f64, d: f64) -> EfficiencyMeasurementSet {
        EfficiencyMeasurementSet {
            detector_positions_cm: vec![1.0],
            chip_length_cm: 2.3,
            measurements: vec![PolarizationMeasurement {
                polarization: Polarization::TE,
                eta_left: vec![Some(kl * d)],
                eta_right: vec![Some(kr * d)],
                transmission: Some(kl * kr * (1.0 - d)),
                alpha_db_per_cm: 0.0,
            }],
        }
    }

    #[test]
    fn single_detector_closes() {
        let m = single(0.3, 0.2, 0.01);
        let pm = &m.measurements[0];
        assert!((pm.eta_left[0].unwrap() - 0.003).abs() < 1e-15);
        assert!((pm.transmission.unwrap() - 0.0594).abs() < 1e-15);
        let c = calibrate_bidirectional(&m).unwrap();
        let te = c.get(Polarization::TE).unwrap();
        assert!((te.detection_efficiency[0] - 0.01).abs() < 1e-6 * 0.01);
        assert!((te.kappa_left - 0.3).abs() < 1e-9 && (te.kappa_right - 0.2).abs() < 1e-9);
    }

    #[test]
    fn missing_direction_is_named() {
        let mut m = single(0.3, 0.2, 0.01);
        m.measurements[0].eta_right[0] = None;
        let err = calibrate_bidirectional(&m).unwrap_err();
        assert!(matches!(err, Error::Underdetermined(ref s) if s.contains("right")));
    }

    #[test]
    fn impossible_coupling_is_inconsistent() {
        // d = 0.8 from eta^L eta^R / T, so eta = 0.9 needs kappa > 1.
        let mut m = single(0.3, 0.2, 0.01);
        m.measurements[0].transmission = Some(0.5);
        m.measurements[0].eta_left = vec![Some(0.9)];
        m.measurements[0].eta_right = vec![Some(0.9)];
        assert!(matches!(calibrate_bidirectional(&m), Err(Error::Inconsistent { .. })));
    }

    #[test]
    fn invalid_positions_rejected() {
        let mut m = single(0.3, 0.2, 0.01);
        m.detector_positions_cm = vec![3.0];
        assert!(calibrate_bidirectional(&m).is_err());
    }
}
