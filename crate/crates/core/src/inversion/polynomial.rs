use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::participation::PolynomialBasis;

/// Substrate loss from the linear coefficients of a polynomial basis, with
/// its uncertainty split into the three contributing terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialSensitivity {
    pub q_sub_inv: f64,
    pub sigma: f64,
    /// `σ_{y1}`
    pub term_y1: f64,
    /// `|x1_MA|·σ_{q_MA⁻¹}`
    pub term_q_ma: f64,
    /// `σ_{x1_MA}·q_MA⁻¹`
    pub term_x1_ma: f64,
}

/// `q_sub⁻¹ = y1 − x1_MA·q_MA⁻¹`. The uncertainty terms are added linearly.
pub fn polynomial_sensitivity(
    basis: &PolynomialBasis,
    q_ma_inv: f64,
    sigma_q_ma: f64,
) -> Result<PolynomialSensitivity> {
    if !(q_ma_inv >= 0.0 && sigma_q_ma >= 0.0) {
        return Err(Error::domain("q_MA⁻¹ and its sigma must be non-negative"));
    }
    if basis.y.len() < 2 || basis.x_ma.len() < 2 {
        return Err(Error::domain("basis needs linear coefficients"));
    }
    let y1 = basis.y[1];
    let x1 = basis.x_ma[1];
    let term_y1 = basis.y_err.get(1).copied().unwrap_or(0.0);
    let term_q_ma = x1.abs() * sigma_q_ma;
    let term_x1_ma = basis.x_ma_err.get(1).copied().unwrap_or(0.0) * q_ma_inv;
    Ok(PolynomialSensitivity {
        q_sub_inv: y1 - x1 * q_ma_inv,
        sigma: term_y1 + term_q_ma + term_x1_ma,
        term_y1,
        term_q_ma,
        term_x1_ma,
    })
}
