//! Expected substrate-loss resolution over a grid of bulk and surface loss
//! tangents.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::contour::{contour_lines, ContourLine};
use super::{covariance, LossSystem, Measurement};
use crate::error::{Error, Result};
use crate::participation::{predict_loss, LossFactors, ParticipationTable};

/// Fractional-error levels traced on every map.
pub const CONTOUR_LEVELS: [f64; 3] = [0.03, 0.1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityAssumptions {
    pub q_cond_inv: f64,
    pub q_ma_inv: f64,
    /// `σ_i / Q_i⁻¹` for every position.
    pub fractional_error: f64,
    pub omega_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityGrid {
    pub q_bulk_min: f64,
    pub q_bulk_max: f64,
    pub q_sa_min: f64,
    pub q_sa_max: f64,
    pub n_bulk: usize,
    pub n_sa: usize,
}

impl Default for SensitivityGrid {
    fn default() -> Self {
        SensitivityGrid {
            q_bulk_min: 1e-9,
            q_bulk_max: 1e-6,
            q_sa_min: 1e-5,
            q_sa_max: 1e-2,
            n_bulk: 61,
            n_sa: 61,
        }
    }
}

impl SensitivityGrid {
    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        (0..n)
            .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
            .collect()
    }

    pub fn q_bulk_axis(&self) -> Vec<f64> {
        Self::axis(self.q_bulk_min, self.q_bulk_max, self.n_bulk)
    }

    pub fn q_sa_axis(&self) -> Vec<f64> {
        Self::axis(self.q_sa_min, self.q_sa_max, self.n_sa)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.q_bulk_min > 0.0
            && self.q_bulk_max >= self.q_bulk_min
            && self.q_sa_min > 0.0
            && self.q_sa_max >= self.q_sa_min
            && self.n_bulk >= 1
            && self.n_sa >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::domain("sensitivity grid needs positive ordered extents and at least one point per axis"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub q_bulk_inv: f64,
    pub q_sa_inv: f64,
    pub q_sub_inv: f64,
    /// `2σ_{q_sub⁻¹}`
    pub ci: f64,
    pub frac_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityMap {
    pub grid: SensitivityGrid,
    /// Row-major: bulk index outer, surface index inner.
    pub points: Vec<SensitivityPoint>,
    /// Contours of `frac_err` in `(log10 q_bulk⁻¹, log10 q_SA⁻¹)`.
    pub contours: Vec<ContourLine>,
}

impl SensitivityMap {
    pub fn min_ci(&self) -> f64 {
        self.points.iter().map(|p| p.ci).fold(f64::INFINITY, f64::min)
    }
}

/// Evaluate the single-sample covariance of `q_sub⁻¹` at every grid point.
///
/// The surface channel enters through each row's `p_SA`, and `q_sub⁻¹` is
/// reported at the table's mean `p_SA/p_bulk`.
pub fn sensitivity_map(
    table: &ParticipationTable,
    assumptions: &SensitivityAssumptions,
    grid: &SensitivityGrid,
) -> Result<SensitivityMap> {
    grid.validate()?;
    if !(assumptions.fractional_error >= 0.0) {
        return Err(Error::domain("fractional error must be non-negative"));
    }
    let ratio = table.rows().iter().map(|r| r.p_sa / r.p_bulk).sum::<f64>() / table.len() as f64;
    let qb = grid.q_bulk_axis();
    let qs = grid.q_sa_axis();
    let cells: Vec<(f64, f64)> = qb.iter().flat_map(|&b| qs.iter().map(move |&s| (b, s))).collect();

    let points: Result<Vec<SensitivityPoint>> = cells
        .par_iter()
        .map(|&(q_bulk, q_sa)| {
            let q = LossFactors {
                q_cond_inv: assumptions.q_cond_inv,
                omega_ref: assumptions.omega_ref,
                q_ma_inv: assumptions.q_ma_inv,
                q_bulk_inv: q_bulk,
                q_sa_inv: q_sa,
                q_bulk_h_inv: 0.0,
            };
            let q_sub = q_bulk + ratio * q_sa;
            let ci = if assumptions.fractional_error == 0.0 {
                0.0
            } else {
                let meas = table
                    .rows()
                    .iter()
                    .map(|r| {
                        let l = predict_loss(r, &q)?;
                        Ok(Measurement {
                            q_inv: l,
                            sigma: assumptions.fractional_error * l,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let system = LossSystem::new(vec![table.clone()], vec![meas], assumptions.omega_ref)?;
                let c = covariance(&system)?;
                let k = system.sub_index(0);
                2.0 * c[(k, k)].max(0.0).sqrt()
            };
            let frac_err = if q_sub > 0.0 { ci / q_sub } else { f64::INFINITY };
            Ok(SensitivityPoint {
                q_bulk_inv: q_bulk,
                q_sa_inv: q_sa,
                q_sub_inv: q_sub,
                ci,
                frac_err,
            })
        })
        .collect();
    let points = points?;

    let xs: Vec<f64> = qb.iter().map(|v| v.log10()).collect();
    let ys: Vec<f64> = qs.iter().map(|v| v.log10()).collect();
    let field: Vec<Vec<f64>> = (0..qb.len())
        .map(|i| (0..qs.len()).map(|j| points[i * qs.len() + j].frac_err.log10()).collect())
        .collect();
    let log_levels: Vec<f64> = CONTOUR_LEVELS.iter().map(|l| l.log10()).collect();
    let contours = contour_lines(&xs, &ys, &field, &log_levels)
        .into_iter()
        .zip(CONTOUR_LEVELS)
        .map(|(c, level)| ContourLine {
            level,
            polylines: c.polylines,
        })
        .collect();
    Ok(SensitivityMap {
        grid: *grid,
        points,
        contours,
    })
}
