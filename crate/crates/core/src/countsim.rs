//! Synthetic data generators for the metrology routines.
//!
//! Noise models: multiplicative log-normal for powers and efficiencies,
//! Poisson for counts, Gaussian for timing. Every generator draws from its
//! own stream of one ChaCha8 generator seeded by the caller, so a seed fixes
//! the output bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::metrology::{
    airy_transmission, BiasSweep, EfficiencyMeasurementSet, FringeScan, PolarizationMeasurement, MAX_BIAS_UA,
};
use crate::profile::Polarization;

/// Identity of the random generator, for provenance records.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), one stream per generator";

const STREAM_FRINGE: u64 = 1;
const STREAM_MEASUREMENT: u64 = 2;
const STREAM_BIAS: u64 = 3;
const STREAM_TIMETAGS: u64 = 4;

/// FWHM of a Gaussian in units of its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn lognormal(sigma: f64) -> Option<LogNormal<f64>> {
    (sigma > 0.0).then(|| LogNormal::new(0.0, sigma).expect("sigma checked positive"))
}

/// Probability that a threshold detector clicks for a Poissonian pulse of
/// mean `mu` photons detected with efficiency `eta`.
pub fn click_probability(mu: f64, eta: f64) -> Result<f64> {
    ensure!(mu >= 0.0 && mu.is_finite(), "mean photon number must be finite and >= 0");
    ensure!((0.0..=1.0).contains(&eta), "efficiency must be in [0, 1]");
    Ok(-(-mu * eta).exp_m1())
}

/// Single-pass transmission `10^(-alpha L / 10)`.
pub fn single_pass_transmission(alpha_db_per_cm: f64, length_cm: f64) -> f64 {
    10f64.powf(-alpha_db_per_cm * length_cm / 10.0)
}

/// Airy fringe scan sampled at `phi_k = 2 pi k / (n - 1)`.
pub fn simulate_fringe_scan(
    alpha_db_per_cm: f64,
    reflectance: f64,
    length_cm: f64,
    n_points: usize,
    noise_rel: f64,
    seed: u64,
) -> Result<FringeScan> {
    ensure!(alpha_db_per_cm >= 0.0, "propagation loss must be >= 0");
    ensure!((0.0..1.0).contains(&reflectance), "facet reflectance must be in [0, 1)");
    ensure!(length_cm > 0.0, "chip length must be positive");
    ensure!(n_points >= 2, "need at least two phase samples");
    ensure!(noise_rel >= 0.0, "noise level must be >= 0");
    let eta = single_pass_transmission(alpha_db_per_cm, length_cm);
    let noise = lognormal(noise_rel);
    let mut r = rng(seed, STREAM_FRINGE);
    let phase: Vec<f64> = (0..n_points)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / (n_points - 1) as f64)
        .collect();
    let power = phase
        .iter()
        .map(|&p| {
            let t = airy_transmission(p, reflectance, eta);
            noise.as_ref().map_or(t, |d| t * d.sample(&mut r))
        })
        .collect();
    Ok(FringeScan {
        phase_samples_rad: phase,
        power_samples: power,
        facet_reflectance: reflectance,
        chip_length_cm: length_cm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSpec {
    pub wavelength_nm: f64,
    pub pulse_rate_hz: f64,
    pub mean_photons_per_pulse: f64,
    pub pulse_width_ps: f64,
    pub jitter_fwhm_ps: f64,
}

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            wavelength_nm: 1556.3,
            pulse_rate_hz: 1e6,
            mean_photons_per_pulse: 1.0,
            pulse_width_ps: 9.0,
            jitter_fwhm_ps: 16.0,
        }
    }
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("wavelength_nm", self.wavelength_nm),
            ("pulse_rate_hz", self.pulse_rate_hz),
            ("mean_photons_per_pulse", self.mean_photons_per_pulse),
            ("pulse_width_ps", self.pulse_width_ps),
            ("jitter_fwhm_ps", self.jitter_fwhm_ps),
        ] {
            ensure!(v.is_finite() && v > 0.0, "source {name} must be positive, got {v}");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorTruth {
    pub z_cm: f64,
    /// Absorbed fraction `a`.
    pub absorption: f64,
    /// Internal efficiency `xi`.
    pub internal_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarizationTruth {
    pub polarization: Polarization,
    pub kappa_left: f64,
    pub kappa_right: f64,
    pub alpha_db_per_cm: f64,
    pub detectors: Vec<DetectorTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipGroundTruth {
    pub chip_length_cm: f64,
    pub facet_reflectance: f64,
    pub polarizations: Vec<PolarizationTruth>,
}

impl ChipGroundTruth {
    /// Absorptions of exactly 0 are accepted so the no-detector limit can
    /// be generated; such sets do not pass measurement validation.
    pub fn validate(&self) -> Result<()> {
        ensure!(self.chip_length_cm > 0.0, "chip length must be positive");
        ensure!(
            (0.0..1.0).contains(&self.facet_reflectance),
            "facet reflectance must be in [0, 1)"
        );
        ensure!(!self.polarizations.is_empty(), "ground truth holds no polarization");
        let z0: Vec<f64> = self.polarizations[0].detectors.iter().map(|d| d.z_cm).collect();
        ensure!(!z0.is_empty(), "ground truth holds no detector");
        for p in &self.polarizations {
            let pol = p.polarization;
            for (name, k) in [("kappa_left", p.kappa_left), ("kappa_right", p.kappa_right)] {
                ensure!(k > 0.0 && k <= 1.0, "{pol}: {name} must be in (0, 1]");
            }
            ensure!(p.alpha_db_per_cm >= 0.0, "{pol}: propagation loss must be >= 0");
            ensure!(
                p.detectors.iter().map(|d| d.z_cm).eq(z0.iter().copied()),
                "{pol}: detector positions must match across polarizations"
            );
            for d in &p.detectors {
                ensure!(
                    d.absorption >= 0.0 && d.absorption < 1.0,
                    "{pol}: absorption must be in [0, 1)"
                );
                ensure!(
                    d.internal_efficiency > 0.0 && d.internal_efficiency <= 1.0,
                    "{pol}: internal efficiency must be in (0, 1]"
                );
            }
        }
        ensure!(
            z0.iter().all(|&z| z > 0.0 && z < self.chip_length_cm) && z0.windows(2).all(|w| w[1] > w[0]),
            "detector positions must be strictly increasing inside the chip"
        );
        Ok(())
    }
}

/// Bidirectional efficiencies and transmission from the forward model.
/// Upstream detectors remove their absorbed fraction `a`; each detector
/// registers `a xi` of what reaches it.
pub fn simulate_measurement_set(
    truth: &ChipGroundTruth,
    noise_rel: f64,
    seed: u64,
) -> Result<EfficiencyMeasurementSet> {
    truth.validate()?;
    ensure!(noise_rel >= 0.0, "noise level must be >= 0");
    let noise = lognormal(noise_rel);
    let mut r = rng(seed, STREAM_MEASUREMENT);
    let mut perturb = |v: f64| noise.as_ref().map_or(v, |d| v * d.sample(&mut r));
    let length = truth.chip_length_cm;
    let mut measurements = Vec::with_capacity(truth.polarizations.len());
    for p in &truth.polarizations {
        let det = &p.detectors;
        let n = det.len();
        let att = |dz: f64| single_pass_transmission(p.alpha_db_per_cm, dz);
        let left: Vec<f64> = (0..n)
            .map(|i| {
                let shadow: f64 = det[..i].iter().map(|d| 1.0 - d.absorption).product();
                p.kappa_left * att(det[i].z_cm) * shadow * det[i].absorption * det[i].internal_efficiency
            })
            .collect();
        let right: Vec<f64> = (0..n)
            .map(|i| {
                let shadow: f64 = det[i + 1..].iter().map(|d| 1.0 - d.absorption).product();
                p.kappa_right * att(length - det[i].z_cm) * shadow * det[i].absorption * det[i].internal_efficiency
            })
            .collect();
        let through: f64 = det.iter().map(|d| 1.0 - d.absorption).product();
        let t = p.kappa_left * p.kappa_right * att(length) * through;
        measurements.push(PolarizationMeasurement {
            polarization: p.polarization,
            eta_left: left.into_iter().map(|v| Some(perturb(v))).collect(),
            eta_right: right.into_iter().map(|v| Some(perturb(v))).collect(),
            transmission: Some(perturb(t)),
            alpha_db_per_cm: p.alpha_db_per_cm,
        });
    }
    Ok(EfficiencyMeasurementSet {
        detector_positions_cm: truth.polarizations[0].detectors.iter().map(|d| d.z_cm).collect(),
        chip_length_cm: length,
        measurements,
    })
}

/// Photon response `plateau / (1 + exp(-(I - I0) / dI))` on top of a dark
/// rate `dark_scale exp(I / dark_exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasModel {
    pub inflection_ua: f64,
    pub width_ua: f64,
    pub plateau_rate: f64,
    pub dark_scale: f64,
    pub dark_exponent_ua: f64,
}

impl BiasModel {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.inflection_ua.is_finite(), "inflection current must be finite");
        ensure!(self.width_ua > 0.0, "transition width must be positive");
        ensure!(self.plateau_rate >= 0.0, "plateau rate must be >= 0");
        ensure!(self.dark_scale >= 0.0, "dark-count scale must be >= 0");
        ensure!(self.dark_exponent_ua > 0.0, "dark-count exponent must be positive");
        Ok(())
    }

    pub fn photon_rate(&self, bias_ua: f64) -> f64 {
        crate::metrology::sigmoid_rate(bias_ua, self.inflection_ua, self.width_ua, self.plateau_rate)
    }

    pub fn dark_rate(&self, bias_ua: f64) -> f64 {
        self.dark_scale * (bias_ua / self.dark_exponent_ua).exp()
    }
}

/// Poisson-sampled light-on and dark rates over `integration_s` per bias.
pub fn simulate_bias_sweep(model: &BiasModel, biases_ua: &[f64], integration_s: f64, seed: u64) -> Result<BiasSweep> {
    model.validate()?;
    ensure!(integration_s > 0.0, "integration time must be positive");
    ensure!(!biases_ua.is_empty(), "no bias points");
    ensure!(
        biases_ua.windows(2).all(|w| w[1] > w[0]),
        "bias must increase monotonically"
    );
    ensure!(
        biases_ua.iter().all(|b| (0.0..=MAX_BIAS_UA).contains(b)),
        "bias values must be in [0, {MAX_BIAS_UA}] uA"
    );
    let mut r = rng(seed, STREAM_BIAS);
    let mut sample = |rate: f64| -> f64 {
        let mean = rate * integration_s;
        if mean <= 0.0 {
            return 0.0;
        }
        let counts: f64 = Poisson::new(mean).expect("mean checked positive").sample(&mut r);
        counts / integration_s
    };
    let mut photon = Vec::with_capacity(biases_ua.len());
    let mut dark = Vec::with_capacity(biases_ua.len());
    for &b in biases_ua {
        let d = model.dark_rate(b);
        photon.push(sample(model.photon_rate(b) + d));
        dark.push(sample(d));
    }
    Ok(BiasSweep {
        bias_ua: biases_ua.to_vec(),
        photon_counts: photon,
        dark_counts: dark,
        integration_s,
    })
}

/// Histogram of detection times relative to the laser pulse grid.
/// Bin `k` covers `[origin + k w, origin + (k + 1) w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimetagHistogram {
    pub bin_width_ps: f64,
    pub origin_ps: f64,
    pub counts: Vec<u64>,
    pub fwhm_ps: f64,
}

impl TimetagHistogram {
    pub fn bin_center_ps(&self, k: usize) -> f64 {
        self.origin_ps + (k as f64 + 0.5) * self.bin_width_ps
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Event times are the pulse grid plus Gaussian detector jitter and
/// Gaussian source jitter, both given as FWHM. Times are folded onto the
/// nearest pulse, which is exact while the jitter is far below the pulse
/// period.
pub fn simulate_timetags(
    source: &SourceSpec,
    detector_jitter_fwhm_ps: f64,
    n_events: usize,
    bin_width_ps: f64,
    seed: u64,
) -> Result<TimetagHistogram> {
    source.validate()?;
    ensure!(detector_jitter_fwhm_ps >= 0.0, "detector jitter must be >= 0");
    ensure!(bin_width_ps > 0.0, "bin width must be positive");
    ensure!(n_events > 0, "need at least one event");
    let period_ps = 1e12 / source.pulse_rate_hz;
    let total_sigma = detector_jitter_fwhm_ps.hypot(source.jitter_fwhm_ps) / FWHM_PER_SIGMA;
    ensure!(
        10.0 * total_sigma < period_ps,
        "jitter ({:.1} ps rms) is not small against the pulse period ({period_ps:.1} ps)",
        total_sigma
    );
    let normal = |fwhm: f64| Normal::new(0.0, fwhm / FWHM_PER_SIGMA).expect("width checked >= 0");
    let det = normal(detector_jitter_fwhm_ps);
    let src = normal(source.jitter_fwhm_ps);
    let mut r = rng(seed, STREAM_TIMETAGS);
    let times: Vec<f64> = (0..n_events)
        .map(|_| det.sample(&mut r) + src.sample(&mut r))
        .collect();
    Ok(histogram(&times, bin_width_ps))
}

/// Bin times on a grid with a bin centred on zero.
pub fn histogram(times_ps: &[f64], bin_width_ps: f64) -> TimetagHistogram {
    let index = |t: f64| (t / bin_width_ps).round() as i64;
    let kmin = times_ps.iter().map(|&t| index(t)).min().unwrap_or(0);
    let kmax = times_ps.iter().map(|&t| index(t)).max().unwrap_or(-1);
    let mut counts = vec![0u64; (kmax - kmin + 1).max(0) as usize];
    for &t in times_ps {
        counts[(index(t) - kmin) as usize] += 1;
    }
    let mut h = TimetagHistogram {
        bin_width_ps,
        origin_ps: (kmin as f64 - 0.5) * bin_width_ps,
        counts,
        fwhm_ps: 0.0,
    };
    h.fwhm_ps = histogram_fwhm(&h);
    h
}

/// Full width at half maximum of a single-peaked histogram.
///
/// The peak height comes from a log-quadratic fit over the bins above 80%
/// of the maximum; each half-height crossing from a straight-line fit to
/// the bins around it. A peak confined to one bin reports one bin width.
/// Empty histograms report 0.
pub fn histogram_fwhm(h: &TimetagHistogram) -> f64 {
    let c: Vec<f64> = h.counts.iter().map(|&v| v as f64).collect();
    let Some((peak, &max)) = c.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return 0.0;
    };
    if max == 0.0 {
        return 0.0;
    }
    let w = h.bin_width_ps;
    let occupied = c.iter().filter(|&&v| v > 0.0).count();
    if occupied == 1 {
        return w;
    }
    let height = peak_height(&c, peak).unwrap_or(max);
    let half = 0.5 * height;

    // First bins below half height on either side of the peak.
    let left = (0..peak).rev().find(|&k| c[k] < half);
    let right = (peak + 1..c.len()).find(|&k| c[k] < half);
    let (Some(left), Some(right)) = (left, right) else {
        // Peak runs into the histogram edge.
        return occupied as f64 * w;
    };
    let rough = (right - left) as f64;
    let window = ((0.05 * rough).ceil() as usize).max(1);
    // Straight line through the bins `lo..=hi`, solved for half height.
    let cross = |lo: usize, hi: usize| -> f64 {
        let pts: Vec<(f64, f64)> = (lo..=hi).map(|k| (k as f64, c[k])).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        mx + (half - my) * sxx / sxy
    };
    let x_left = cross((left + 1).saturating_sub(window), (left + window).min(peak));
    let x_right = cross(right.saturating_sub(window).max(peak), (right - 1 + window).min(c.len() - 1));
    (x_right - x_left) * w
}

/// Vertex height of a parabola fitted to the log counts of the bins
/// around `peak` that exceed 80% of its count.
fn peak_height(c: &[f64], peak: usize) -> Option<f64> {
    let cut = 0.8 * c[peak];
    let mut lo = peak;
    while lo > 0 && c[lo - 1] >= cut {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < c.len() && c[hi + 1] >= cut {
        hi += 1;
    }
    if hi - lo < 2 {
        return None;
    }
    // Weighted least squares of ln c on (1, x, x^2), weights c.
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for (k, &ck) in c.iter().enumerate().take(hi + 1).skip(lo) {
        let x = k as f64 - peak as f64;
        let b = nalgebra::Vector3::new(1.0, x, x * x);
        ata += ck * b * b.transpose();
        atb += ck * b * ck.ln();
    }
    let p = ata.try_inverse()? * atb;
    if p[2] >= 0.0 {
        return None;
    }
    let x0 = -p[1] / (2.0 * p[2]);
    if x0 < (lo as f64 - peak as f64) || x0 > (hi as f64 - peak as f64) {
        return None;
    }
    Some((p[0] + p[1] * x0 + p[2] * x0 * x0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

    #[test]
    fn click_probability_closed_form() {
        assert_eq!(click_probability(0.0, 0.7).unwrap(), 0.0);
        assert!((click_probability(1.0, 1.0).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-12);
        assert!(click_probability(-1.0, 0.5).is_err());
        assert!(click_probability(1.0, 1.5).is_err());
    }

    #[test]
    fn lossless_fringe_extrema() {
        let s = simulate_fringe_scan(0.0, 0.14, 2.3, 201, 0.0, 1).unwrap();
        let max = s.power_samples.iter().copied().fold(0.0, f64::max);
        let min = s.power_samples.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((max / min - (1.14f64 / 0.86).powi(2)).abs() < 1e-6);
    }

    #[test]
    fn no_cavity_is_flat() {
        let s = simulate_fringe_scan(0.05, 0.0, 2.3, 64, 0.0, 1).unwrap();
        assert!(s.power_samples.iter().all(|&p| p == s.power_samples[0]));
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = simulate_fringe_scan(0.03, 0.14, 2.3, 64, 0.01, 9).unwrap();
        let b = simulate_fringe_scan(0.03, 0.14, 2.3, 64, 0.01, 9).unwrap();
        let c = simulate_fringe_scan(0.03, 0.14, 2.3, 64, 0.01, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn truth(absorption: f64) -> ChipGroundTruth {
        ChipGroundTruth {
            chip_length_cm: 2.3,
            facet_reflectance: 0.14,
            polarizations: vec![PolarizationTruth {
                polarization: Polarization::TE,
                kappa_left: 0.3,
                kappa_right: 0.2,
                alpha_db_per_cm: 0.0,
                detectors: vec![DetectorTruth {
                    z_cm: 1.0,
                    absorption,
                    internal_efficiency: 1.0,
                }],
            }],
        }
    }

    #[test]
    fn single_detector_forward_model() {
        let m = simulate_measurement_set(&truth(0.01), 0.0, 0).unwrap();
        let p = &m.measurements[0];
        assert!((p.eta_left[0].unwrap() - 0.003).abs() < 1e-15);
        assert!((p.eta_right[0].unwrap() - 0.002).abs() < 1e-15);
        assert!((p.transmission.unwrap() - 0.0594).abs() < 1e-15);
    }

    #[test]
    fn no_absorption_gives_bare_transmission() {
        let m = simulate_measurement_set(&truth(0.0), 0.0, 0).unwrap();
        let p = &m.measurements[0];
        assert_eq!(p.eta_left[0], Some(0.0));
        assert_eq!(p.transmission, Some(0.3 * 0.2));
    }

    #[test]
    fn dark_only_without_light() {
        let model = BiasModel {
            inflection_ua: 3.0,
            width_ua: 0.4,
            plateau_rate: 0.0,
            dark_scale: 1e-3,
            dark_exponent_ua: 0.5,
        };
        let biases: Vec<f64> = (0..=20).map(|k| 0.35 * k as f64).collect();
        let s = simulate_bias_sweep(&model, &biases, 1.0, 4).unwrap();
        assert_eq!(s.photon_counts[0], 0.0);
        let hi_mean = model.dark_rate(7.0);
        assert!((s.photon_counts[20] - hi_mean).abs() < 6.0 * hi_mean.sqrt());
    }

    #[test]
    fn zero_jitter_lands_in_one_bin() {
        let src = SourceSpec {
            jitter_fwhm_ps: 1e-9,
            ..SourceSpec::default()
        };
        let h = simulate_timetags(&src, 0.0, 1000, 4.0, 2).unwrap();
        assert_eq!(h.counts, vec![1000]);
        assert!(h.fwhm_ps <= h.bin_width_ps);
    }

    #[test]
    fn fwhm_of_analytic_gaussian() {
        let sigma = 50.0;
        let w = 5.0;
        let g = StatNormal::new(0.0, sigma).unwrap();
        let kmax = 60i64;
        let counts: Vec<u64> = (-kmax..=kmax)
            .map(|k| {
                let a = (k as f64 - 0.5) * w;
                (1e7 * (g.cdf(a + w) - g.cdf(a))).round() as u64
            })
            .collect();
        let h = TimetagHistogram {
            bin_width_ps: w,
            origin_ps: (-kmax as f64 - 0.5) * w,
            counts,
            fwhm_ps: 0.0,
        };
        let fwhm = histogram_fwhm(&h);
        assert!((fwhm / (sigma * FWHM_PER_SIGMA) - 1.0).abs() < 0.01, "{fwhm}");
    }
}
