//! Spectral weight functions and the second-order field-decay prediction.

use serde::{Deserialize, Serialize};

use super::jitter::JitterSpectrum;
use super::simulate::CavityModel;
use crate::quad::integrate_panels;

const PI: f64 = std::f64::consts::PI;
const MAX_PANELS: usize = 4096;

/// Threshold on `ω0²∫S·W0` above which the second-order expansion is
/// flagged as unreliable.
pub const EXPANSION_LIMIT: f64 = 0.5;

/// `W0(f, t) = sin²(πft)/(πf)²`, low-pass weight of the accumulated phase.
pub fn spectral_weight_w0(f: f64, t: f64) -> f64 {
    let x = PI * f;
    if (x * t).abs() < 1e-6 {
        // sin²(xt)/x² = t²(1 − (xt)²/3 + …)
        t * t * (1.0 - (x * t).powi(2) / 3.0)
    } else {
        (x * t).sin().powi(2) / (x * x)
    }
}

/// `W1(ω, t_m) = (1 − sinc²(ωt_m/2))/((κ/2)² + ω²)`, weight of jitter in the
/// detector-averaged power.
pub fn spectral_weight_w1(omega: f64, t_m: f64, kappa_tot: f64) -> f64 {
    let u = 0.5 * omega * t_m;
    let sinc = if u.abs() < 1e-8 { 1.0 - u * u / 6.0 } else { u.sin() / u };
    (1.0 - sinc * sinc) / (0.25 * kappa_tot * kappa_tot + omega * omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    W0,
    W1,
}

/// Dispatch on [`WeightKind`]. For `W0` the arguments are `(f, t)`; for `W1`
/// they are `(ω, t_m)`.
pub fn spectral_weight(kind: WeightKind, freq: f64, time: f64, kappa_tot: f64) -> f64 {
    match kind {
        WeightKind::W0 => spectral_weight_w0(freq, time),
        WeightKind::W1 => spectral_weight_w1(freq, time, kappa_tot),
    }
}

/// `∫ S(f)·W0(f, t) df`.
pub fn phase_variance_integral(spectrum: &JitterSpectrum, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    match spectrum {
        JitterSpectrum::None => 0.0,
        JitterSpectrum::DiscreteLines { lines } => lines
            .iter()
            .map(|l| l.weight * spectral_weight_w0(l.f_hz, t))
            .sum(),
        JitterSpectrum::Lorentzian {
            corner_hz, f_max_hz, ..
        } => {
            let edges = panel_edges(0.0, *f_max_hz, t, &[*corner_hz]);
            integrate(spectrum, &edges, t)
        }
        JitterSpectrum::OneOverF {
            f_low_hz, f_high_hz, ..
        } => {
            let edges = panel_edges(*f_low_hz, *f_high_hz, t, &[]);
            integrate(spectrum, &edges, t)
        }
    }
}

fn integrate(spectrum: &JitterSpectrum, edges: &[f64], t: f64) -> f64 {
    let scale = spectrum.variance() * t * t;
    let f = |x: f64| spectrum.density(x) * spectral_weight_w0(x, t);
    integrate_panels(&f, edges, 1e-10 * scale)
}

/// Panel edges on `[lo, hi]`: zeros of `W0` (multiples of `1/t`) where they
/// are affordable, logarithmic spacing beyond, plus extra breakpoints.
fn panel_edges(lo: f64, hi: f64, t: f64, extra: &[f64]) -> Vec<f64> {
    let mut edges = vec![lo, hi];
    let step = 1.0 / t;
    let first = (lo / step).ceil() as usize;
    let last = ((hi / step).floor() as usize).min(first + MAX_PANELS);
    for k in first.max(1)..=last {
        edges.push(k as f64 * step);
    }
    let linear_end = (last as f64 * step).max(lo);
    if linear_end < hi {
        let start = linear_end.max(hi * 1e-12);
        let n = 64;
        for k in 1..n {
            edges.push(start * (hi / start).powf(k as f64 / n as f64));
        }
    }
    if lo == 0.0 {
        // the logarithmic panels near zero keep the Lorentzian peak resolved
        let first_edge = step.min(hi);
        for k in 1..16 {
            edges.push(first_edge * 2f64.powi(-k));
        }
    }
    edges.extend(extra.iter().copied().filter(|x| *x > lo && *x < hi));
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite edges"));
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
    edges
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDecayPrediction {
    pub t: Vec<f64>,
    /// `|⟨a⟩|(t)` normalised to 1 at `t = 0`.
    pub amplitude: Vec<f64>,
    /// `ω0²∫S·W0` at each time.
    pub dephasing: Vec<f64>,
    /// Raised when any `dephasing` value exceeds [`EXPANSION_LIMIT`].
    pub expansion_invalid: bool,
}

/// `e^{−κt/2}·(1 − ½ω0²∫S·W0)` on the given time grid.
pub fn predict_field_decay(cavity: &CavityModel, t: &[f64]) -> FieldDecayPrediction {
    let w2 = cavity.omega0 * cavity.omega0;
    let dephasing: Vec<f64> = t
        .iter()
        .map(|&ti| w2 * phase_variance_integral(&cavity.jitter, ti))
        .collect();
    let amplitude = t
        .iter()
        .zip(&dephasing)
        .map(|(&ti, d)| (-0.5 * cavity.kappa_tot * ti).exp() * (1.0 - 0.5 * d))
        .collect();
    let expansion_invalid = dephasing.iter().any(|d| *d > EXPANSION_LIMIT);
    FieldDecayPrediction {
        t: t.to_vec(),
        amplitude,
        dephasing,
        expansion_invalid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ringdown::jitter::SpectralLine;

    #[test]
    fn w0_limits() {
        let t = 3e-3;
        assert!((spectral_weight_w0(0.0, t) - t * t).abs() < 1e-20);
        assert!((spectral_weight_w0(1e-9, t) / (t * t) - 1.0).abs() < 1e-12);
        let f = 1.0 / (2.0 * t);
        assert!((spectral_weight_w0(f, t) - 4.0 * t * t / (PI * PI)).abs() < 1e-18);
    }

    #[test]
    fn w1_vanishes_without_bandwidth() {
        assert_eq!(spectral_weight_w1(0.0, 0.0, 600.0), 0.0);
        assert!(spectral_weight_w1(0.0, 1e-9, 600.0) < 1e-18);
    }

    #[test]
    fn lorentzian_short_time_limit() {
        // for t ≪ 1/f_max, W0 ≈ t² and the integral is ⟨ε²⟩t²
        let s = JitterSpectrum::Lorentzian {
            s0_per_hz: 1e-12,
            corner_hz: 50.0,
            f_max_hz: 5e3,
        };
        let t = 1e-7;
        let got = phase_variance_integral(&s, t);
        assert!((got / (s.variance() * t * t) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn white_band_long_time_limit() {
        // flat spectrum: ∫ sin²(πft)/(πf)² df over [0, ∞) = t/2
        let s = JitterSpectrum::Lorentzian {
            s0_per_hz: 1.0,
            corner_hz: 1e12,
            f_max_hz: 1e6,
        };
        let t = 1e-2;
        let got = phase_variance_integral(&s, t);
        let tail = 1.0 / (2.0 * PI * PI * 1e6);
        assert!((got / (t / 2.0 - tail) - 1.0).abs() < 1e-3, "{got}");
    }

    #[test]
    fn discrete_line_closed_form() {
        let omega0 = 2.0 * PI * 4.55e9;
        let line = SpectralLine { f_hz: 120.0, weight: 1e-22 };
        let c = CavityModel::new(omega0, 600.0, 60.0, JitterSpectrum::DiscreteLines { lines: vec![line] }).unwrap();
        let t = [0.0, 1e-3, 4e-3];
        let p = predict_field_decay(&c, &t);
        for (i, &ti) in t.iter().enumerate() {
            let corr = 0.5 * omega0 * omega0 * line.weight * spectral_weight_w0(line.f_hz, ti);
            let expected = (-300.0 * ti).exp() * (1.0 - corr);
            assert!((p.amplitude[i] - expected).abs() < 1e-15);
        }
        assert!(!p.expansion_invalid);
    }

    #[test]
    fn no_jitter_is_pure_decay() {
        let c = CavityModel::new(1e10, 600.0, 60.0, JitterSpectrum::None).unwrap();
        let p = predict_field_decay(&c, &[0.0, 1e-3]);
        assert_eq!(p.amplitude[1], (-300.0f64 * 1e-3).exp());
    }
}
