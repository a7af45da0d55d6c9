//! Bias-current response: sigmoid plateau fit and dark-count model.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub const MIN_BIAS_POINTS: usize = 10;
/// Bias ramps are accepted up to this current.
pub const MAX_BIAS_UA: f64 = 20.0;

/// Count rates (per second) over a bias ramp. `photon_counts` are taken
/// with light on and include dark counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSweep {
    pub bias_ua: Vec<f64>,
    pub photon_counts: Vec<f64>,
    pub dark_counts: Vec<f64>,
    pub integration_s: f64,
}

impl BiasSweep {
    pub fn validate(&self) -> Result<()> {
        let n = self.bias_ua.len();
        ensure!(
            self.photon_counts.len() == n && self.dark_counts.len() == n,
            "bias sweep columns differ in length"
        );
        ensure!(n >= MIN_BIAS_POINTS, "bias sweep needs >= {MIN_BIAS_POINTS} points, got {n}");
        ensure!(self.integration_s > 0.0, "integration time must be positive");
        ensure!(
            self.bias_ua.windows(2).all(|w| w[1] > w[0]),
            "bias must increase monotonically"
        );
        ensure!(
            self.bias_ua.iter().all(|b| b.is_finite() && *b >= 0.0),
            "bias values must be >= 0"
        );
        ensure!(
            self.photon_counts.iter().chain(&self.dark_counts).all(|c| c.is_finite() && *c >= 0.0),
            "count rates must be finite and >= 0"
        );
        Ok(())
    }
}

/// `dark(I) = scale exp(I / current)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkFit {
    pub scale: f64,
    pub current: f64,
}

impl DarkFit {
    pub fn rate(&self, bias: f64) -> f64 {
        self.scale * (bias / self.current).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidFit {
    pub inflection_ua: f64,
    pub width_ua: f64,
    pub plateau_rate: f64,
    pub plateau_start_ua: f64,
    /// |slope| x span / mean of the signal over the plateau region.
    pub plateau_flatness: f64,
    pub has_plateau: bool,
    /// Set when the data carry no transition, so inflection and width are
    /// not determined.
    pub width_unconstrained: bool,
    pub dark: Option<DarkFit>,
    pub residual_rms: f64,
}

/// `plateau / (1 + exp(-(I - I0) / dI))`.
pub fn sigmoid_rate(bias: f64, inflection: f64, width: f64, plateau: f64) -> f64 {
    plateau / (1.0 + (-(bias - inflection) / width).exp())
}

pub fn fit_bias_response(sweep: &BiasSweep) -> Result<SigmoidFit> {
    sweep.validate()?;
    let bias = &sweep.bias_ua;
    let n = bias.len();
    let (lo, hi) = (bias[0], bias[n - 1]);
    let span = hi - lo;
    ensure!(span > 0.0, "bias sweep spans no current");
    ensure!(
        hi <= MAX_BIAS_UA,
        "bias ramp reaches {hi} uA; sweeps are accepted up to {MAX_BIAS_UA} uA"
    );

    let dark = fit_dark(sweep);
    let signal: Vec<f64> = (0..n)
        .map(|k| {
            let d = dark.map_or(sweep.dark_counts[k], |f| f.rate(bias[k]));
            (sweep.photon_counts[k] - d).max(0.0)
        })
        .collect();

    let max = signal.iter().copied().fold(0.0, f64::max);
    let min = signal.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = signal.iter().sum::<f64>() / n as f64;
    if max <= 10.0 * min || max == 0.0 {
        // No transition in the data: a flat response with the sigmoid
        // fully switched on.
        return Ok(SigmoidFit {
            inflection_ua: lo,
            width_ua: span,
            plateau_rate: mean,
            plateau_start_ua: lo,
            plateau_flatness: flatness(bias, &signal, lo, lo + 0.7 * span),
            has_plateau: mean > 0.0,
            width_unconstrained: true,
            dark,
            residual_rms: rms(signal.iter().map(|s| s - mean)),
        });
    }

    // Normalised coordinates: bias on [0, 1], rate in units of the max.
    let x: Vec<f64> = bias.iter().map(|b| (b - lo) / span).collect();
    let y: Vec<f64> = signal.iter().map(|s| s / max).collect();
    // Poisson weights on the raw counts.
    let counts_per_unit = max * sweep.integration_s;
    let w: Vec<f64> = signal
        .iter()
        .map(|s| 1.0 / (s * sweep.integration_s).max(1.0) * counts_per_unit)
        .collect();

    // Start: plateau at the mean of the top few points, inflection at the
    // half-height crossing.
    let mut top = y.clone();
    top.sort_by(|a, b| b.total_cmp(a));
    let p0 = top[..3].iter().sum::<f64>() / 3.0;
    let x0 = (1..n)
        .find(|&k| y[k] >= 0.5 * p0)
        .map(|k| {
            let (ya, yb) = (y[k - 1], y[k]);
            let t = if yb > ya { (0.5 * p0 - ya) / (yb - ya) } else { 0.5 };
            x[k - 1] + t * (x[k] - x[k - 1])
        })
        .unwrap_or(0.5);
    let mut p = Vector3::new(p0, x0, (0.05f64).ln());

    let model = |p: &Vector3<f64>, xi: f64| sigmoid_rate(xi, p[1], p[2].exp(), p[0]);
    let cost = |p: &Vector3<f64>| -> f64 {
        x.iter()
            .zip(&y)
            .zip(&w)
            .map(|((xi, yi), wi)| wi * (yi - model(p, *xi)).powi(2))
            .sum()
    };
    let mut current = cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=500 {
        iterations = it;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        let dw = p[2].exp();
        for ((xi, yi), wi) in x.iter().zip(&y).zip(&w) {
            let e = (-(xi - p[1]) / dw).exp();
            let s = 1.0 / (1.0 + e);
            let ds = s * s * e; // d s / d ((x - x0) / dw)
            let g = Vector3::new(s, -p[0] * ds / dw, -p[0] * ds * (xi - p[1]) / dw);
            jtj += *wi * g * g.transpose();
            jtr += *wi * g * (yi - p[0] * s);
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] = a[(k, k)] * (1.0 + lambda) + 1e-300;
            }
            let Some(step) = a.try_inverse().map(|m| m * jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let c = cost(&trial);
            if c.is_finite() && c <= current {
                let rel = (current - c) / current.max(1e-300);
                p = trial;
                current = c;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    if !converged || !(p[0] > 0.0) {
        return Err(Error::NoConvergence {
            what: "bias sigmoid fit",
            iterations,
            residual: (current / n as f64).sqrt(),
        });
    }

    let plateau_rate = p[0] * max;
    let inflection_ua = lo + p[1] * span;
    let width_ua = p[2].exp() * span;
    let plateau_start_ua = inflection_ua + 3.0 * width_ua;
    let region_start = plateau_start_ua.max(lo + 0.7 * span);
    let reached_in_data = signal.iter().any(|s| *s >= 0.95 * plateau_rate);
    let reached_in_model = sigmoid_rate(hi, inflection_ua, width_ua, plateau_rate) >= 0.95 * plateau_rate;
    Ok(SigmoidFit {
        inflection_ua,
        width_ua,
        plateau_rate,
        plateau_start_ua,
        plateau_flatness: flatness(bias, &signal, region_start, lo + 0.7 * span),
        has_plateau: reached_in_data && reached_in_model,
        width_unconstrained: false,
        dark,
        residual_rms: rms(
            bias.iter()
                .zip(&signal)
                .map(|(b, s)| s - sigmoid_rate(*b, inflection_ua, width_ua, plateau_rate)),
        ),
    })
}

fn rms(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// Relative change of a straight-line fit across the region `bias >=
/// start` (or `bias >= fallback` when that leaves fewer than 3 points).
fn flatness(bias: &[f64], signal: &[f64], start: f64, fallback: f64) -> f64 {
    let pick = |from: f64| -> Vec<(f64, f64)> {
        bias.iter()
            .zip(signal)
            .filter(|(b, _)| **b >= from)
            .map(|(b, s)| (*b, *s))
            .collect()
    };
    let mut pts = pick(start);
    if pts.len() < 3 {
        pts = pick(fallback);
    }
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    if my <= 0.0 {
        return f64::INFINITY;
    }
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let width = pts[pts.len() - 1].0 - pts[0].0;
    (slope * width / my).abs()
}

/// Log-linear fit of the dark rate, weighted by counts. `None` when fewer
/// than three biases register dark counts.
fn fit_dark(sweep: &BiasSweep) -> Option<DarkFit> {
    let pts: Vec<(f64, f64, f64)> = sweep
        .bias_ua
        .iter()
        .zip(&sweep.dark_counts)
        .filter(|(_, d)| **d > 0.0)
        .map(|(b, d)| (*b, d.ln(), (d * sweep.integration_s).max(1.0)))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 || sxy <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(DarkFit {
        scale: (my - slope * mx).exp(),
        current: 1.0 / slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep(f: impl Fn(f64) -> f64) -> BiasSweep {
        let bias: Vec<f64> = (0..36).map(|k| 0.2 * k as f64).collect();
        BiasSweep {
            photon_counts: bias.iter().map(|b| f(*b)).collect(),
            dark_counts: vec![0.0; bias.len()],
            bias_ua: bias,
            integration_s: 1.0,
        }
    }

    #[test]
    fn exact_sigmoid_recovered() {
        let s = sweep(|b| sigmoid_rate(b, 3.0, 0.4, 1e5));
        let f = fit_bias_response(&s).unwrap();
        assert!((f.inflection_ua - 3.0).abs() < 1e-6);
        assert!((f.width_ua - 0.4).abs() < 1e-6);
        assert!((f.plateau_rate / 1e5 - 1.0).abs() < 1e-8);
        assert!(f.has_plateau && !f.width_unconstrained);
        assert!((f.plateau_start_ua - 4.2).abs() < 1e-5);
        assert!(f.plateau_flatness < 0.05);
    }

    #[test]
    fn constant_counts() {
        let s = sweep(|_| 500.0);
        let f = fit_bias_response(&s).unwrap();
        assert!(f.width_unconstrained);
        assert!(f.plateau_flatness < 1e-12);
        assert_eq!(f.plateau_rate, 500.0);
    }

    #[test]
    fn rising_edge_only_has_no_plateau() {
        let s = sweep(|b| sigmoid_rate(b, 9.0, 0.8, 1e5));
        let f = fit_bias_response(&s).unwrap();
        assert!(!f.has_plateau);
    }

    #[test]
    fn dark_model_subtracted() {
        let mut s = sweep(|b| sigmoid_rate(b, 3.0, 0.4, 1e4) + 2.0 * (b / 0.8).exp());
        s.dark_counts = s.bias_ua.iter().map(|b| 2.0 * (b / 0.8).exp()).collect();
        let f = fit_bias_response(&s).unwrap();
        let d = f.dark.unwrap();
        assert!((d.current - 0.8).abs() < 1e-9 && (d.scale - 2.0).abs() < 1e-9);
        assert!((f.plateau_rate / 1e4 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unit_change_keeps_plateau() {
        let s = sweep(|b| sigmoid_rate(b, 3.0, 0.4, 1e5) * (1.0 + 0.01 * (7.0 * b).sin()));
        let mut amps = s.clone();
        amps.bias_ua.iter_mut().for_each(|b| *b *= 1e-6);
        let (a, b) = (fit_bias_response(&s).unwrap(), fit_bias_response(&amps).unwrap());
        assert!((a.plateau_rate / b.plateau_rate - 1.0).abs() < 1e-9);
        assert_eq!(a.has_plateau, b.has_plateau);
    }

    #[test]
    fn too_few_points_rejected() {
        let mut s = sweep(|_| 1.0);
        s.bias_ua.truncate(5);
        s.photon_counts.truncate(5);
        s.dark_counts.truncate(5);
        assert!(fit_bias_response(&s).is_err());
    }
}
