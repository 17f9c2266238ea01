//! Exponential-decay estimators for ensemble-averaged ringdowns.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::simulate::{apply_detector_bandwidth, ShotEnsemble};
use crate::error::{Error, Result};
use crate::linalg;

/// How shots are combined before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingMode {
    /// `⟨|a_out|²⟩`, insensitive to dephasing.
    PowerAverage,
    /// `|⟨a_out⟩|²`, decays faster when the phase wanders.
    FieldAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub rate_stderr: f64,
    /// Fitted signal at `t_ref`, in the units of the averaged quantity.
    pub contrast: f64,
    pub t_ref: f64,
    pub mode: AveragingMode,
    pub samples_used: usize,
    pub reduced_chi2: f64,
}

impl DecayFit {
    /// Fitted signal extrapolated to time `t`.
    pub fn amplitude_at(&self, t: f64) -> f64 {
        self.contrast * (-self.rate * (t - self.t_ref)).exp()
    }
}

/// Contrast scaling a power boxcar of width `t_m` imposes on `e^{−κt}`.
pub fn bandwidth_contrast(kappa: f64, t_m: f64) -> f64 {
    let x = 0.5 * kappa * t_m;
    if x.abs() < 1e-8 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

const MAX_REFINE_STEPS: usize = 50;

struct Averaged {
    value: Vec<f64>,
    variance: Vec<f64>,
    floor: Vec<f64>,
}

fn averaged_power(ens: &ShotEnsemble) -> Averaged {
    let n = ens.len() as f64;
    let mean = ens.mean_power();
    let dt = ens.dt();
    let smooth = apply_detector_bandwidth(&mean, ens.t_m(), dt);
    let variance: Vec<f64> = (0..ens.samples())
        .map(|k| {
            if ens.len() < 2 {
                return 0.0;
            }
            let m = mean[k];
            let ss: f64 = ens.shots().iter().map(|s| (s[k].norm_sqr() - m).powi(2)).sum();
            ss / (n - 1.0) / n
        })
        .collect();
    let bias = ens.noise_power();
    let floor = 3.0 * bias / n.sqrt();
    Averaged {
        value: smooth.iter().map(|p| p - bias).collect(),
        variance,
        floor: vec![floor; ens.samples()],
    }
}

fn averaged_field(ens: &ShotEnsemble) -> Averaged {
    let n = ens.len() as f64;
    let mean = ens.mean_field();
    let smooth = apply_detector_bandwidth(&mean, ens.t_m(), ens.dt());
    let spread: Vec<f64> = (0..ens.samples())
        .map(|k| {
            if ens.len() < 2 {
                return 0.0;
            }
            let m: Complex64 = mean[k];
            let ss: f64 = ens.shots().iter().map(|s| (s[k] - m).norm_sqr()).sum();
            ss / (n - 1.0) / n
        })
        .collect();
    let value: Vec<f64> = smooth.iter().map(|a| a.norm_sqr()).collect();
    let variance = value.iter().zip(&spread).map(|(p, v)| 2.0 * p * v).collect();
    Averaged {
        value,
        variance,
        floor: spread.iter().map(|v| 3.0 * v).collect(),
    }
}

/// Inverse standard deviations from a quadratic in the model signal fitted
/// to the per-sample ensemble variances. Weighting by each sample's own
/// variance would favour samples that fluctuated low, biasing the rate.
fn smooth_weights(model: &[f64], observed: &[f64]) -> Vec<f64> {
    let uniform = vec![1.0; model.len()];
    if observed.iter().any(|v| !(*v > 0.0)) {
        return uniform;
    }
    let scale = model.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if !(scale > 0.0) {
        return uniform;
    }
    let x: Vec<f64> = model.iter().map(|y| y / scale).collect();
    let a = linalg::vandermonde(&x, 2);
    let b = DVector::from_column_slice(observed);
    let names = ["c0".to_string(), "c1".to_string(), "c2".to_string()];
    let Ok(fit) = linalg::lstsq(&a, &b, &names) else {
        return uniform;
    };
    let predicted = &a * &fit.coef;
    if predicted.iter().any(|v| !(*v > 0.0)) {
        return uniform;
    }
    predicted.iter().map(|v| 1.0 / v.sqrt()).collect()
}

/// Fit `A·e^{−rate·(t − t_start)}` to the averaged signal inside `window`.
///
/// A weighted straight line through the logarithm of the samples above three
/// times the noise floor gives the starting point. It is then refined by
/// weighted least squares on the linear signal over the samples where the
/// starting model stays above the floor. The parameter covariance is scaled
/// by the reduced χ².
pub fn fit_decay(ens: &ShotEnsemble, window: (f64, f64), mode: AveragingMode) -> Result<DecayFit> {
    let (t_start, t_end) = window;
    let dt = ens.dt();
    let last = ens.time(ens.samples() - 1);
    if !(t_end > t_start) {
        return Err(Error::domain("fit window must have t_end > t_start"));
    }
    if t_start < ens.pulse_end() - 1e-9 * dt {
        return Err(Error::domain(format!(
            "fit window starts at {t_start} s, before the pulse ends at {} s",
            ens.pulse_end()
        )));
    }
    if t_end > last + 1e-9 * dt {
        return Err(Error::domain(format!(
            "fit window ends at {t_end} s, after the record ends at {last} s"
        )));
    }

    let avg = match mode {
        AveragingMode::PowerAverage => averaged_power(ens),
        AveragingMode::FieldAverage => averaged_field(ens),
    };
    let k0 = (t_start / dt - 1e-9).ceil() as usize;
    let k1 = ((t_end / dt + 1e-9).floor() as usize).min(ens.samples() - 1);

    let mut ts = Vec::new();
    let mut ys = Vec::new();
    let mut vs = Vec::new();
    for k in k0..=k1 {
        let y = avg.value[k];
        if !(y > avg.floor[k]) || y <= 0.0 {
            break;
        }
        ts.push(ens.time(k) - t_start);
        ys.push(y);
        vs.push(avg.variance[k]);
    }
    if ts.len() < 3 {
        return Err(Error::InsufficientSnr(format!(
            "only {} positive samples above the noise floor in [{t_start}, {t_end}] s",
            ts.len()
        )));
    }

    let names = ["log_amplitude".to_string(), "rate".to_string()];
    let uniform = vs.iter().any(|v| !(*v > 0.0));
    let m = ts.len();
    let mut a = DMatrix::zeros(m, 2);
    let mut b = DVector::zeros(m);
    for i in 0..m {
        let w = if uniform { 1.0 } else { ys[i] / vs[i].sqrt() };
        a[(i, 0)] = w;
        a[(i, 1)] = -w * ts[i];
        b[i] = w * ys[i].ln();
    }
    let sol = linalg::lstsq(&a, &b, &names)?;
    let (mut log_amp, mut rate) = (sol.coef[0], sol.coef[1]);
    if !(rate > 0.0) {
        return Err(Error::InsufficientSnr(format!(
            "fitted rate {rate} is not positive; the window holds no decaying signal"
        )));
    }

    // Refine in linear space over the samples where the initial model stays
    // above the floor, so neither the weights nor the cutoff depend on noise.
    let idx: Vec<usize> = (k0..=k1)
        .take_while(|&k| (log_amp - rate * (ens.time(k) - t_start)).exp() > avg.floor[k])
        .collect();
    let mut refined = None;
    if idx.len() >= 3 {
        for _ in 0..MAX_REFINE_STEPS {
            let times: Vec<f64> = idx.iter().map(|&k| ens.time(k) - t_start).collect();
            let model: Vec<f64> = times.iter().map(|t| (log_amp - rate * t).exp()).collect();
            let observed: Vec<f64> = idx.iter().map(|&k| avg.variance[k]).collect();
            let weights = smooth_weights(&model, &observed);
            let mut j = DMatrix::zeros(idx.len(), 2);
            let mut r = DVector::zeros(idx.len());
            for row in 0..idx.len() {
                let w = weights[row];
                j[(row, 0)] = w * model[row];
                j[(row, 1)] = -w * times[row] * model[row];
                r[row] = w * (avg.value[idx[row]] - model[row]);
            }
            let step = linalg::lstsq(&j, &r, &names)?;
            log_amp += step.coef[0];
            rate += step.coef[1];
            let done = step.coef[1].abs() <= 1e-12 * rate.abs() && step.coef[0].abs() <= 1e-12;
            refined = Some(step);
            if done || !(rate > 0.0) {
                break;
            }
        }
    }
    if !(rate > 0.0 && log_amp.is_finite()) {
        return Err(Error::InsufficientSnr(format!(
            "fitted rate {rate} is not positive; the window holds no decaying signal"
        )));
    }
    let (stderr, reduced_chi2, m) = match refined {
        Some(step) => (step.stderr_scaled(), step.reduced_chi2(), idx.len()),
        None => (sol.stderr_scaled(), sol.reduced_chi2(), m),
    };
    if mode == AveragingMode::PowerAverage {
        let span = ts[ts.len() - 1];
        if rate * (t_end - t_start) < 2.0 && rate * span < 2.0 {
            return Err(Error::domain(format!(
                "window covers {:.2} decay constants; at least 2 are required",
                rate * (t_end - t_start)
            )));
        }
    }
    Ok(DecayFit {
        rate,
        rate_stderr: stderr[1],
        contrast: log_amp.exp(),
        t_ref: t_start,
        mode,
        samples_used: m,
        reduced_chi2,
    })
}
