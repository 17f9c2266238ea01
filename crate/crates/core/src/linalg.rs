//! Small dense least-squares helpers shared by the fitting modules.
//!
//! All solves go through an SVD of the column-equilibrated design matrix.
//! Participation columns differ by many orders of magnitude, so scaling each
//! column to unit norm first keeps the singular-value test meaningful.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a design is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Lstsq {
    pub coef: DVector<f64>,
    /// `(AᵀA)⁻¹` for the (already weighted) design `A`.
    pub covariance: DMatrix<f64>,
    /// `b − A·coef` in weighted units.
    pub residuals: DVector<f64>,
    pub chi2: f64,
    pub dof: usize,
    /// Condition number of the column-equilibrated design.
    pub condition: f64,
}

impl Lstsq {
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            0.0
        } else {
            self.chi2 / self.dof as f64
        }
    }

    pub fn stderr(&self) -> Vec<f64> {
        (0..self.coef.len())
            .map(|j| self.covariance[(j, j)].max(0.0).sqrt())
            .collect()
    }

    /// Standard errors scaled by the reduced chi-square of the residuals.
    pub fn stderr_scaled(&self) -> Vec<f64> {
        let s = self.reduced_chi2().sqrt();
        self.stderr().into_iter().map(|e| e * s).collect()
    }
}

fn column_names(names: &[String], n: usize) -> Vec<String> {
    (0..n)
        .map(|j| names.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
        .collect()
}

/// Equilibrated SVD of `a`; returns `(svd, column scales)` or a rank error.
fn equilibrated_svd(
    a: &DMatrix<f64>,
    names: &[String],
) -> Result<(nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, DVector<f64>, f64)> {
    let (m, n) = a.shape();
    let names = column_names(names, n);
    if m < n {
        return Err(Error::RankDeficient { columns: names });
    }
    let scales = DVector::from_iterator(n, a.column_iter().map(|c| c.norm()));
    let zero: Vec<String> = (0..n)
        .filter(|&j| !(scales[j] > 0.0) || !scales[j].is_finite())
        .map(|j| names[j].clone())
        .collect();
    if !zero.is_empty() {
        return Err(Error::RankDeficient { columns: zero });
    }
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= scales[j];
    }
    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let (imin, smin) = sv.argmin();
    if !(smin > RANK_TOLERANCE * smax) {
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let row = v_t.row(imin);
        let peak = row.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let columns = (0..n)
            .filter(|&j| row[j].abs() > 0.1 * peak)
            .map(|j| names[j].clone())
            .collect();
        return Err(Error::RankDeficient { columns });
    }
    Ok((svd, scales, smax / smin))
}

/// Solve `min ‖A x − b‖²` for a design that already carries the row weights.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, names: &[String]) -> Result<Lstsq> {
    let (m, n) = a.shape();
    let (svd, scales, condition) = equilibrated_svd(a, names)?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sv = &svd.singular_values;

    let utb = u.transpose() * b;
    let mut y = DVector::zeros(n);
    for k in 0..n {
        y[k] = utb[k] / sv[k];
    }
    let mut coef = v_t.transpose() * y;
    for j in 0..n {
        coef[j] /= scales[j];
    }

    let mut inv_s2 = DMatrix::zeros(n, n);
    for k in 0..n {
        inv_s2[(k, k)] = 1.0 / (sv[k] * sv[k]);
    }
    let mut covariance = v_t.transpose() * inv_s2 * v_t;
    for i in 0..n {
        for j in 0..n {
            covariance[(i, j)] /= scales[i] * scales[j];
        }
    }
    // symmetrise against round-off
    let covariance = (&covariance + covariance.transpose()) * 0.5;

    let residuals = b - a * &coef;
    let chi2 = residuals.norm_squared();
    Ok(Lstsq {
        coef,
        covariance,
        residuals,
        chi2,
        dof: m - n,
        condition,
    })
}

/// `(AᵀA)⁻¹` without solving for coefficients.
pub fn normal_inverse(a: &DMatrix<f64>, names: &[String]) -> Result<DMatrix<f64>> {
    let b = DVector::zeros(a.nrows());
    lstsq(a, &b, names).map(|fit| fit.covariance)
}

/// Condition number of the column-equilibrated design.
pub fn condition_number(a: &DMatrix<f64>, names: &[String]) -> Result<f64> {
    equilibrated_svd(a, names).map(|(_, _, c)| c)
}

/// Vandermonde design `[1, x, x², …]` of the given polynomial order.
pub fn vandermonde(x: &[f64], order: usize) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), order + 1, |i, j| x[i].powi(j as i32))
}
