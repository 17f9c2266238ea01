//! Two-level-system saturation model for power sweeps.
//!
//! `Q⁻¹(n) = Q_hp⁻¹ + Q_sat⁻¹ / √(1 + (n/n_c)^α)`

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_N_CUTOFF: f64 = 2e10;
const ALPHA_MIN: f64 = 1e-3;
const ALPHA_MAX: f64 = 2.0;
const ALPHA_STARTS: [f64; 3] = [0.25, 0.5, 1.0];
const PARAM_NAMES: [&str; 4] = ["Q_hp_inv", "Q_sat_inv", "ln_n_c", "alpha"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepPosition {
    #[default]
    Withdrawn,
    Inserted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub n_photons: f64,
    pub q_inv: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSweep {
    pub points: Vec<PowerPoint>,
    pub position: SweepPosition,
    #[serde(default)]
    pub p_cond: f64,
    #[serde(default)]
    pub p_ma: f64,
    #[serde(default)]
    pub p_bulk: f64,
}

impl PowerSweep {
    pub fn new(points: Vec<PowerPoint>, position: SweepPosition) -> Result<Self> {
        let s = PowerSweep {
            points,
            position,
            p_cond: 0.0,
            p_ma: 0.0,
            p_bulk: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_participations(mut self, p_cond: f64, p_ma: f64, p_bulk: f64) -> Self {
        self.p_cond = p_cond;
        self.p_ma = p_ma;
        self.p_bulk = p_bulk;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::domain("power sweep has no points"));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(p.n_photons > 0.0 && p.q_inv > 0.0 && p.sigma > 0.0)
                || !(p.n_photons.is_finite() && p.q_inv.is_finite() && p.sigma.is_finite())
            {
                return Err(Error::domain(format!(
                    "power sweep point {i}: n, Q_inv and sigma must be positive and finite"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluate the saturation model.
pub fn tls_loss(n: f64, q_hp_inv: f64, q_sat_inv: f64, n_c: f64, alpha: f64) -> f64 {
    q_hp_inv + q_sat_inv / (1.0 + (n / n_c).powf(alpha)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlsFit {
    pub q_hp_inv: f64,
    pub q_sat_inv: f64,
    pub n_c: f64,
    pub alpha: f64,
    pub q_hp_inv_err: f64,
    pub q_sat_inv_err: f64,
    pub n_c_err: f64,
    pub alpha_err: f64,
    pub chi2: f64,
    pub reduced_chi2: f64,
    /// Normalised residuals `(Q_i⁻¹ − model)/σ_i` of the fitted points.
    pub residuals: Vec<f64>,
    pub points_used: usize,
    pub points_excluded: usize,
}

impl TlsFit {
    pub fn eval(&self, n: f64) -> f64 {
        tls_loss(n, self.q_hp_inv, self.q_sat_inv, self.n_c, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsFitOptions {
    /// Points above this photon number are dropped from inserted sweeps.
    pub n_cutoff: Option<f64>,
    pub starts_per_decade: usize,
    pub max_iterations: usize,
}

impl Default for TlsFitOptions {
    fn default() -> Self {
        TlsFitOptions {
            n_cutoff: Some(DEFAULT_N_CUTOFF),
            starts_per_decade: 2,
            max_iterations: 400,
        }
    }
}

struct Data {
    ln_n: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Data {
    fn len(&self) -> usize {
        self.y.len()
    }

    /// Model values and Jacobian columns at `θ = [hp, sat, ln n_c, α]`.
    fn model(&self, th: &[f64; 4], jac: Option<&mut DMatrix<f64>>) -> Vec<f64> {
        let [hp, sat, lnc, alpha] = *th;
        let mut jac = jac;
        self.ln_n
            .iter()
            .enumerate()
            .map(|(i, &ln)| {
                let l = ln - lnc;
                let s = (alpha * l).exp();
                let g = (1.0 + s).powf(-0.5);
                if let Some(j) = jac.as_deref_mut() {
                    let g3 = g * g * g;
                    j[(i, 0)] = self.w[i];
                    j[(i, 1)] = self.w[i] * g;
                    j[(i, 2)] = self.w[i] * 0.5 * sat * alpha * s * g3;
                    j[(i, 3)] = -self.w[i] * 0.5 * sat * s * l * g3;
                }
                hp + sat * g
            })
            .collect()
    }

    fn residuals(&self, th: &[f64; 4]) -> Vec<f64> {
        self.model(th, None)
            .iter()
            .enumerate()
            .map(|(i, m)| (m - self.y[i]) * self.w[i])
            .collect()
    }

    fn chi2(&self, th: &[f64; 4]) -> f64 {
        self.residuals(th).iter().map(|r| r * r).sum()
    }
}

/// Best non-negative `(hp, sat)` for fixed `(n_c, α)`.
fn linear_amplitudes(d: &Data, lnc: f64, alpha: f64) -> (f64, f64) {
    let g: Vec<f64> = d
        .ln_n
        .iter()
        .map(|ln| (1.0 + (alpha * (ln - lnc)).exp()).powf(-0.5))
        .collect();
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..d.len() {
        let w2 = d.w[i] * d.w[i];
        s11 += w2;
        s12 += w2 * g[i];
        s22 += w2 * g[i] * g[i];
        b1 += w2 * d.y[i];
        b2 += w2 * d.y[i] * g[i];
    }
    let det = s11 * s22 - s12 * s12;
    if det > 1e-14 * s11 * s22 {
        let hp = (s22 * b1 - s12 * b2) / det;
        let sat = (s11 * b2 - s12 * b1) / det;
        if hp >= 0.0 && sat >= 0.0 {
            return (hp, sat);
        }
    }
    let only_hp = (b1 / s11).max(0.0);
    let only_sat = if s22 > 0.0 { (b2 / s22).max(0.0) } else { 0.0 };
    let c_hp = d.chi2(&[only_hp, 0.0, lnc, alpha]);
    let c_sat = d.chi2(&[0.0, only_sat, lnc, alpha]);
    if c_hp <= c_sat {
        (only_hp, 0.0)
    } else {
        (0.0, only_sat)
    }
}

fn project(th: &mut [f64; 4]) {
    th[0] = th[0].max(0.0);
    th[1] = th[1].max(0.0);
    th[3] = th[3].clamp(ALPHA_MIN, ALPHA_MAX);
}

struct LmResult {
    theta: [f64; 4],
    chi2: f64,
    converged: bool,
}

fn levenberg_marquardt(d: &Data, start: [f64; 4], max_iter: usize) -> LmResult {
    let m = d.len();
    let mut th = start;
    project(&mut th);
    let mut chi2 = d.chi2(&th);
    let mut lambda = 1e-3;
    let mut jac = DMatrix::zeros(m, 4);
    for _ in 0..max_iter {
        let model = d.model(&th, Some(&mut jac));
        let r = DVector::from_iterator(m, (0..m).map(|i| (model[i] - d.y[i]) * d.w[i]));
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = [th[0] + step[0], th[1] + step[1], th[2] + step[2], th[3] + step[3]];
            project(&mut trial);
            let c = d.chi2(&trial);
            if c.is_finite() && c <= chi2 {
                let small_change = chi2 - c <= 1e-12 * chi2.max(1e-300);
                let small_step = (0..4).all(|k| (trial[k] - th[k]).abs() <= 1e-10 * (th[k].abs() + 1e-300));
                th = trial;
                chi2 = c;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small_change || small_step {
                    return LmResult { theta: th, chi2, converged: true };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left: a local minimum of the projected problem
            return LmResult { theta: th, chi2, converged: chi2.is_finite() };
        }
    }
    LmResult { theta: th, chi2, converged: false }
}

/// Weighted nonlinear fit of the saturation model, started from a grid of
/// `(n_c, α)` values with the amplitudes solved linearly at each start.
pub fn fit_tls(sweep: &PowerSweep, options: &TlsFitOptions) -> Result<TlsFit> {
    sweep.validate()?;
    let cutoff = match (sweep.position, options.n_cutoff) {
        (SweepPosition::Inserted, Some(c)) => c,
        _ => f64::INFINITY,
    };
    let used: Vec<&PowerPoint> = sweep.points.iter().filter(|p| p.n_photons <= cutoff).collect();
    let excluded = sweep.points.len() - used.len();
    if used.len() < 5 {
        return Err(Error::domain(format!(
            "TLS fit needs at least 5 points, {} remain after the n cutoff",
            used.len()
        )));
    }
    let n_min = used.iter().map(|p| p.n_photons).fold(f64::INFINITY, f64::min);
    let n_max = used.iter().map(|p| p.n_photons).fold(0.0, f64::max);
    if n_max / n_min < 100.0 * (1.0 - 1e-12) {
        return Err(Error::domain("TLS fit needs points spanning at least two decades of n"));
    }
    let data = Data {
        ln_n: used.iter().map(|p| p.n_photons.ln()).collect(),
        y: used.iter().map(|p| p.q_inv).collect(),
        w: used.iter().map(|p| 1.0 / p.sigma).collect(),
    };

    let lo = (n_min / 10.0).ln();
    let hi = (n_max * 10.0).ln();
    let decades = (hi - lo) / std::f64::consts::LN_10;
    let count = ((decades * options.starts_per_decade.max(1) as f64).ceil() as usize).max(2);
    let mut starts = Vec::with_capacity(count * ALPHA_STARTS.len());
    for k in 0..=count {
        let lnc = lo + (hi - lo) * k as f64 / count as f64;
        for &alpha in &ALPHA_STARTS {
            let (hp, sat) = linear_amplitudes(&data, lnc, alpha);
            starts.push([hp, sat, lnc, alpha]);
        }
    }

    let results: Vec<LmResult> = starts
        .par_iter()
        .map(|s| levenberg_marquardt(&data, *s, options.max_iterations))
        .collect();
    // starts are ordered by n_c, so the first of equal minima wins the tie
    let mut best: Option<&LmResult> = None;
    for r in results.iter().filter(|r| r.converged) {
        if best.is_none_or(|b| r.chi2 < b.chi2 * (1.0 - 1e-12)) {
            best = Some(r);
        }
    }
    let dof = data.len().saturating_sub(4).max(1) as f64;
    let Some(best) = best else {
        let lowest = results.iter().map(|r| r.chi2).fold(f64::INFINITY, f64::min);
        return Err(Error::NonConvergence {
            best_reduced_chi2: lowest / dof,
        });
    };

    let th = best.theta;
    let mut jac = DMatrix::zeros(data.len(), 4);
    data.model(&th, Some(&mut jac));
    let names: Vec<String> = PARAM_NAMES.iter().map(|s| s.to_string()).collect();
    let cov = linalg::normal_inverse(&jac, &names)?;
    let err = |k: usize| cov[(k, k)].max(0.0).sqrt();
    let n_c = th[2].exp();
    let residuals = data.residuals(&th).iter().map(|r| -r).collect();
    Ok(TlsFit {
        q_hp_inv: th[0],
        q_sat_inv: th[1],
        n_c,
        alpha: th[3],
        q_hp_inv_err: err(0),
        q_sat_inv_err: err(1),
        n_c_err: n_c * err(2),
        alpha_err: err(3),
        chi2: best.chi2,
        reduced_chi2: best.chi2 / dof,
        residuals,
        points_used: data.len(),
        points_excluded: excluded,
    })
}

/// Fraction of the saturable loss already saturated at photon number `n`.
pub fn saturation_fraction(n: f64, fit: &TlsFit) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    1.0 - 1.0 / (1.0 + (n / fit.n_c).powf(fit.alpha)).sqrt()
}

/// Largest photon number whose saturation fraction stays below `f_max`.
pub fn low_power_boundary(f_max: f64, fit: &TlsFit) -> Result<f64> {
    if !(f_max > 0.0 && f_max < 1.0) {
        return Err(Error::domain("F_max must lie in (0, 1)"));
    }
    if fit.alpha == 0.0 {
        return Err(Error::DivisionByZero("alpha"));
    }
    let inner = 1.0 / (1.0 - f_max).powi(2) - 1.0;
    Ok(fit.n_c * inner.powf(1.0 / fit.alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityBounds {
    pub q_cond_lower: f64,
    pub q_cond_upper: f64,
    pub q_ma_lower: f64,
    pub q_ma_upper: f64,
    /// The loss change attributed to saturable surface loss.
    pub delta_q_inv: f64,
}

/// Bounds on the conductor and metal-air loss factors from a withdrawn
/// power sweep. With a fit, the saturable amplitude `Q_sat⁻¹` measures the
/// surface loss change; otherwise the raw spread of the sweep is used.
pub fn cavity_bounds(sweep: &PowerSweep, fit: Option<&TlsFit>, p_cond: f64, p_ma: f64) -> Result<CavityBounds> {
    sweep.validate()?;
    if p_cond == 0.0 {
        return Err(Error::DivisionByZero("p_cond"));
    }
    if p_ma == 0.0 {
        return Err(Error::DivisionByZero("p_MA"));
    }
    if !(p_cond > 0.0 && p_ma > 0.0) {
        return Err(Error::domain("participations must be positive"));
    }
    let q_min = sweep.points.iter().map(|p| p.q_inv).fold(f64::INFINITY, f64::min);
    let q_max = sweep.points.iter().map(|p| p.q_inv).fold(0.0, f64::max);
    let delta = match fit {
        Some(f) => f.q_sat_inv.min(q_max),
        None => q_max - q_min,
    };
    Ok(CavityBounds {
        q_cond_lower: 0.0,
        q_cond_upper: q_min / p_cond,
        q_ma_lower: delta / p_ma,
        q_ma_upper: q_max / p_ma,
        delta_q_inv: delta,
    })
}
