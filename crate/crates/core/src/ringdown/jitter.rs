//! Fractional-frequency jitter `ε(t)`: spectra and their random realisations.
//!
//! A realisation is a sum of sinusoids with random phases whose powers
//! integrate the one-sided spectrum `S(f)` over frequency bins, so that
//! `⟨ε(t)ε(t')⟩ = ∫ S(f) cos(2πf(t−t')) df` up to binning.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consts::TWO_PI;
use crate::error::{Error, Result};

/// One discrete spectral line carrying variance `weight` at `f_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub f_hz: f64,
    pub weight: f64,
}

/// One-sided power spectral density of `ε(t)`, in 1/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JitterSpectrum {
    #[default]
    None,
    DiscreteLines { lines: Vec<SpectralLine> },
    /// `S(f) = s0 / (1 + (f/f_c)²)` for `f ≤ f_max`.
    Lorentzian {
        s0_per_hz: f64,
        corner_hz: f64,
        f_max_hz: f64,
    },
    /// `S(f) = A / f` on `[f_low, f_high]`.
    OneOverF {
        amplitude: f64,
        f_low_hz: f64,
        f_high_hz: f64,
    },
}

impl JitterSpectrum {
    /// Lorentzian scaled so the rms frequency excursion is `linewidths`
    /// times `κ_tot/2π`.
    pub fn lorentzian_with_rms(
        linewidths: f64,
        corner_hz: f64,
        f_max_hz: f64,
        omega0: f64,
        kappa_tot: f64,
    ) -> Result<Self> {
        let shape = JitterSpectrum::Lorentzian {
            s0_per_hz: 1.0,
            corner_hz,
            f_max_hz,
        };
        shape.validate()?;
        let eps_rms = linewidths * kappa_tot / omega0;
        let s0 = eps_rms * eps_rms / shape.variance();
        Ok(JitterSpectrum::Lorentzian {
            s0_per_hz: s0,
            corner_hz,
            f_max_hz,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            JitterSpectrum::None => Ok(()),
            JitterSpectrum::DiscreteLines { lines } => {
                for l in lines {
                    if !(l.f_hz > 0.0) || !(l.weight >= 0.0) {
                        return Err(Error::domain(format!("invalid spectral line {l:?}")));
                    }
                }
                Ok(())
            }
            JitterSpectrum::Lorentzian {
                s0_per_hz,
                corner_hz,
                f_max_hz,
            } => {
                if !(*s0_per_hz >= 0.0 && *corner_hz > 0.0 && *f_max_hz > 0.0) {
                    return Err(Error::domain("Lorentzian needs s0 >= 0, f_c > 0, f_max > 0"));
                }
                Ok(())
            }
            JitterSpectrum::OneOverF {
                amplitude,
                f_low_hz,
                f_high_hz,
            } => {
                if !(*amplitude >= 0.0 && *f_low_hz > 0.0 && f_high_hz > f_low_hz) {
                    return Err(Error::domain("1/f spectrum needs A >= 0 and 0 < f_low < f_high"));
                }
                Ok(())
            }
        }
    }

    pub fn is_none(&self) -> bool {
        match self {
            JitterSpectrum::None => true,
            _ => self.variance() == 0.0,
        }
    }

    /// Continuous part of `S(f)`; discrete lines are not included.
    pub fn density(&self, f: f64) -> f64 {
        match *self {
            JitterSpectrum::Lorentzian {
                s0_per_hz,
                corner_hz,
                f_max_hz,
            } if (0.0..=f_max_hz).contains(&f) => s0_per_hz / (1.0 + (f / corner_hz).powi(2)),
            JitterSpectrum::OneOverF {
                amplitude,
                f_low_hz,
                f_high_hz,
            } if (f_low_hz..=f_high_hz).contains(&f) => amplitude / f,
            _ => 0.0,
        }
    }

    /// `∫_{f1}^{f2} S(f) df` of the continuous part.
    pub fn band_power(&self, f1: f64, f2: f64) -> f64 {
        match *self {
            JitterSpectrum::Lorentzian {
                s0_per_hz,
                corner_hz,
                f_max_hz,
            } => {
                let a = f1.clamp(0.0, f_max_hz);
                let b = f2.clamp(0.0, f_max_hz);
                s0_per_hz * corner_hz * ((b / corner_hz).atan() - (a / corner_hz).atan())
            }
            JitterSpectrum::OneOverF {
                amplitude,
                f_low_hz,
                f_high_hz,
            } => {
                let a = f1.clamp(f_low_hz, f_high_hz);
                let b = f2.clamp(f_low_hz, f_high_hz);
                amplitude * (b / a).ln()
            }
            _ => 0.0,
        }
    }

    /// `⟨ε²⟩ = ∫ S(f) df`.
    pub fn variance(&self) -> f64 {
        match self {
            JitterSpectrum::None => 0.0,
            JitterSpectrum::DiscreteLines { lines } => lines.iter().map(|l| l.weight).sum(),
            _ => self.band_power(0.0, f64::INFINITY),
        }
    }

    /// Highest frequency carrying spectral weight, Hz.
    pub fn f_max(&self) -> f64 {
        match self {
            JitterSpectrum::None => 0.0,
            JitterSpectrum::DiscreteLines { lines } => {
                lines.iter().map(|l| l.f_hz).fold(0.0, f64::max)
            }
            JitterSpectrum::Lorentzian { f_max_hz, .. } => *f_max_hz,
            JitterSpectrum::OneOverF { f_high_hz, .. } => *f_high_hz,
        }
    }

    /// rms frequency excursion in units of `κ_tot/2π`.
    pub fn rms_linewidths(&self, omega0: f64, kappa_tot: f64) -> f64 {
        omega0 * self.variance().sqrt() / kappa_tot
    }

    /// Bin edges used to discretise the continuous part.
    fn bin_edges(&self, components: usize) -> Vec<f64> {
        let n = components.max(2);
        let log_edges = |lo: f64, hi: f64, count: usize| -> Vec<f64> {
            (0..=count)
                .map(|k| lo * (hi / lo).powf(k as f64 / count as f64))
                .collect()
        };
        match *self {
            JitterSpectrum::Lorentzian {
                corner_hz, f_max_hz, ..
            } => {
                let lo = (corner_hz * 1e-3).min(f_max_hz * 1e-3);
                let mut edges = vec![0.0];
                edges.extend(log_edges(lo, f_max_hz, n - 1));
                edges
            }
            JitterSpectrum::OneOverF {
                f_low_hz, f_high_hz, ..
            } => log_edges(f_low_hz, f_high_hz, n),
            _ => Vec::new(),
        }
    }

    /// Draw one realisation with `components` sinusoids for the continuous
    /// part (discrete lines use one sinusoid each).
    pub fn realize<R: Rng + ?Sized>(&self, components: usize, rng: &mut R) -> JitterRealization {
        let mut parts = Vec::new();
        match self {
            JitterSpectrum::None => {}
            JitterSpectrum::DiscreteLines { lines } => {
                for l in lines {
                    let phase = rng.random::<f64>() * TWO_PI;
                    parts.push(Sinusoid {
                        amplitude: (2.0 * l.weight).sqrt(),
                        f_hz: l.f_hz,
                        phase,
                    });
                }
            }
            _ => {
                let edges = self.bin_edges(components);
                for w in edges.windows(2) {
                    let power = self.band_power(w[0], w[1]);
                    let u: f64 = rng.random();
                    let phase = rng.random::<f64>() * TWO_PI;
                    let lo = w[0].max(1e-3 * w[1]);
                    let f_hz = lo + u * (w[1] - lo);
                    parts.push(Sinusoid {
                        amplitude: (2.0 * power).sqrt(),
                        f_hz,
                        phase,
                    });
                }
            }
        }
        JitterRealization { parts }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub f_hz: f64,
    pub phase: f64,
}

/// `ε(t) = Σ a_k cos(2π f_k t + φ_k)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JitterRealization {
    pub parts: Vec<Sinusoid>,
}

impl JitterRealization {
    pub fn epsilon(&self, t: f64) -> f64 {
        self.parts
            .iter()
            .map(|s| s.amplitude * (TWO_PI * s.f_hz * t + s.phase).cos())
            .sum()
    }

    /// Accumulated phase `θ(t) = ω0 ∫_0^t ε`.
    pub fn theta(&self, omega0: f64, t: f64) -> f64 {
        omega0
            * self
                .parts
                .iter()
                .map(|s| {
                    let w = TWO_PI * s.f_hz;
                    s.amplitude * ((w * t + s.phase).sin() - s.phase.sin()) / w
                })
                .sum::<f64>()
    }

    /// `θ` on the uniform grid `t_n = n·dt`, using rotating phasors that are
    /// re-anchored periodically to bound round-off drift.
    pub fn theta_on_grid(&self, omega0: f64, dt: f64, samples: usize) -> Vec<f64> {
        const REANCHOR: usize = 256;
        let mut out = vec![0.0; samples];
        if self.parts.is_empty() {
            return out;
        }
        let coef: Vec<f64> = self
            .parts
            .iter()
            .map(|s| omega0 * s.amplitude / (TWO_PI * s.f_hz))
            .collect();
        let offset: f64 = self
            .parts
            .iter()
            .zip(&coef)
            .map(|(s, c)| c * s.phase.sin())
            .sum();
        let rot: Vec<(f64, f64)> = self
            .parts
            .iter()
            .map(|s| {
                let a = TWO_PI * s.f_hz * dt;
                (a.cos(), a.sin())
            })
            .collect();
        let mut z: Vec<(f64, f64)> = vec![(0.0, 0.0); self.parts.len()];
        for (n, slot) in out.iter_mut().enumerate() {
            if n % REANCHOR == 0 {
                let t = n as f64 * dt;
                for (zk, s) in z.iter_mut().zip(&self.parts) {
                    let arg = TWO_PI * s.f_hz * t + s.phase;
                    *zk = (arg.cos(), arg.sin());
                }
            } else {
                for (zk, r) in z.iter_mut().zip(&rot) {
                    *zk = (zk.0 * r.0 - zk.1 * r.1, zk.0 * r.1 + zk.1 * r.0);
                }
            }
            let s: f64 = z.iter().zip(&coef).map(|(zk, c)| c * zk.1).sum();
            *slot = s - offset;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lorentzian() -> JitterSpectrum {
        JitterSpectrum::Lorentzian {
            s0_per_hz: 1e-12,
            corner_hz: 50.0,
            f_max_hz: 5e3,
        }
    }

    #[test]
    fn lorentzian_variance_closed_form() {
        let v = lorentzian().variance();
        let expected = 1e-12 * 50.0 * (100.0f64).atan();
        assert!((v - expected).abs() < 1e-24);
    }

    #[test]
    fn rms_scaling() {
        let omega0 = TWO_PI * 4.55e9;
        let kappa = TWO_PI * 100.0;
        let s = JitterSpectrum::lorentzian_with_rms(100.0, 50.0, 5e3, omega0, kappa).unwrap();
        assert!((s.rms_linewidths(omega0, kappa) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn realisation_power_matches_spectrum() {
        let s = lorentzian();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = s.realize(128, &mut rng);
        let total: f64 = r.parts.iter().map(|p| p.amplitude * p.amplitude / 2.0).sum();
        assert!(((total - s.variance()) / s.variance()).abs() < 1e-12);
    }

    #[test]
    fn ensemble_mean_is_zero() {
        let s = lorentzian();
        let n = 4000;
        let mut mean = 0.0;
        let mut sq = 0.0;
        for seed in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = s.realize(64, &mut rng).epsilon(0.0123);
            mean += e;
            sq += e * e;
        }
        mean /= n as f64;
        sq /= n as f64;
        let sd = s.variance().sqrt();
        assert!(mean.abs() < 5.0 * sd / (n as f64).sqrt());
        assert!((sq / s.variance() - 1.0).abs() < 0.1);
    }

    #[test]
    fn grid_theta_matches_direct() {
        let s = lorentzian();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = s.realize(64, &mut rng);
        let omega0 = TWO_PI * 4.55e9;
        let dt = 1e-5;
        let grid = r.theta_on_grid(omega0, dt, 2000);
        for n in [0usize, 1, 255, 256, 1000, 1999] {
            let direct = r.theta(omega0, n as f64 * dt);
            assert!((grid[n] - direct).abs() < 1e-9 * (1.0 + direct.abs()), "n={n}");
        }
        assert_eq!(grid[0], 0.0);
    }

    #[test]
    fn invalid_spectra() {
        assert!(JitterSpectrum::OneOverF { amplitude: 1.0, f_low_hz: 10.0, f_high_hz: 1.0 }
            .validate()
            .is_err());
        assert!(JitterSpectrum::DiscreteLines { lines: vec![SpectralLine { f_hz: -1.0, weight: 1.0 }] }
            .validate()
            .is_err());
    }
}
