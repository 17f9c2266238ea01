use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ParticipationTable;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, vandermonde};

/// Loss and cavity participations expressed as polynomials in `p_bulk`.
///
/// Coefficient `k` multiplies `p_bulk^k`. Errors are OLS standard errors
/// scaled by the residual variance of each fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialBasis {
    pub order: usize,
    /// Reference frequency of the conductor participation, rad/s.
    pub omega_ref: f64,
    pub y: Vec<f64>,
    pub y_err: Vec<f64>,
    pub x_cond: Vec<f64>,
    pub x_cond_err: Vec<f64>,
    pub x_ma: Vec<f64>,
    pub x_ma_err: Vec<f64>,
}

/// Fits `Q⁻¹`, `p_cond·ω_ref/ω` and `p_MA` against `p_bulk` by unweighted
/// least squares. `order` must be 2, 3 or 4.
pub fn fit_polynomial_basis(
    table: &ParticipationTable,
    q_inv: &[f64],
    order: usize,
    omega_ref: f64,
) -> Result<PolynomialBasis> {
    if !(2..=4).contains(&order) {
        return Err(Error::domain(format!("polynomial order {order} outside 2..=4")));
    }
    if q_inv.len() != table.len() {
        return Err(Error::domain(format!(
            "{} loss values for {} rows",
            q_inv.len(),
            table.len()
        )));
    }
    if table.len() < order + 2 {
        return Err(Error::domain(format!(
            "order-{order} fit needs at least {} rows, got {}",
            order + 2,
            table.len()
        )));
    }
    if !(omega_ref > 0.0) {
        return Err(Error::domain("reference frequency must be positive"));
    }
    let rows = table.rows();
    let p_bulk: Vec<f64> = rows.iter().map(|r| r.p_bulk).collect();
    let distinct = {
        let mut v = p_bulk.clone();
        v.dedup();
        v.len()
    };
    let names: Vec<String> = (0..=order).map(|k| format!("p_bulk^{k}")).collect();
    if distinct < order + 1 {
        return Err(Error::RankDeficient { columns: names });
    }

    let design = vandermonde(&p_bulk, order);
    let fit = |values: Vec<f64>| -> Result<(Vec<f64>, Vec<f64>)> {
        let b = DVector::from_vec(values);
        let f = lstsq(&design, &b, &names)?;
        Ok((f.coef.iter().copied().collect(), f.stderr_scaled()))
    };
    let (y, y_err) = fit(q_inv.to_vec())?;
    let (x_cond, x_cond_err) = fit(rows.iter().map(|r| r.p_cond_normalized(omega_ref)).collect())?;
    let (x_ma, x_ma_err) = fit(rows.iter().map(|r| r.p_ma).collect())?;
    Ok(PolynomialBasis {
        order,
        omega_ref,
        y,
        y_err,
        x_cond,
        x_cond_err,
        x_ma,
        x_ma_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::TWO_PI;
    use crate::participation::{predict_loss, LossFactors, ParticipationRow, ProfileModel};

    const OMEGA_W: f64 = TWO_PI * 4.55e9;

    fn quadratic_table(n: usize) -> ParticipationTable {
        let rows = (0..n)
            .map(|i| {
                let pb = 0.002 + 0.06 * i as f64 / (n - 1) as f64;
                let p_ma = 249e-9 - 300e-9 * pb + 15800e-9 * pb * pb;
                ParticipationRow::new(OMEGA_W, 43.92e-6, p_ma, pb, 1e-5 * pb).unwrap()
            })
            .collect();
        ParticipationTable::new("q", rows).unwrap()
    }

    #[test]
    fn exact_quadratic_recovered() {
        let t = quadratic_table(12);
        let coeffs = [9.18e-9, 26e-9, 240e-9];
        let q: Vec<f64> = t
            .rows()
            .iter()
            .map(|r| coeffs[0] + coeffs[1] * r.p_bulk + coeffs[2] * r.p_bulk.powi(2))
            .collect();
        let basis = fit_polynomial_basis(&t, &q, 2, OMEGA_W).unwrap();
        for k in 0..3 {
            assert!(((basis.y[k] - coeffs[k]) / coeffs[k]).abs() < 1e-10, "y{k}");
        }
        assert!(((basis.x_ma[1] + 300e-9) / 300e-9).abs() < 1e-10);
        assert!(((basis.x_ma[2] - 15800e-9) / 15800e-9).abs() < 1e-10);
        assert!(((basis.x_cond[0] - 43.92e-6) / 43.92e-6).abs() < 1e-12);
        assert!(basis.x_cond[1].abs() < 1e-15 && basis.x_cond[2].abs() < 1e-13);
    }

    #[test]
    fn constant_loss_has_no_slope() {
        let t = quadratic_table(8);
        let q = vec![9.18e-9; 8];
        let b = fit_polynomial_basis(&t, &q, 2, OMEGA_W).unwrap();
        assert!(b.y[1].abs() < 1e-20 && b.y[2].abs() < 1e-19, "{:?}", b.y);
    }

    #[test]
    fn rank_deficient_design() {
        let rows = (0..5)
            .map(|i| {
                let pb = if i < 3 { 0.01 } else { 0.02 };
                ParticipationRow::new(OMEGA_W, 4e-5, 2.5e-7, pb, 0.0).unwrap()
            })
            .collect();
        let t = ParticipationTable::new("d", rows).unwrap();
        let q = vec![1e-8; 5];
        assert!(matches!(
            fit_polynomial_basis(&t, &q, 2, OMEGA_W),
            Err(Error::RankDeficient { .. })
        ));
        assert!(fit_polynomial_basis(&quadratic_table(3), &[1e-8; 3], 2, OMEGA_W).is_err());
        assert!(fit_polynomial_basis(&quadratic_table(8), &[1e-8; 8], 5, OMEGA_W).is_err());
    }

    #[test]
    fn constant_term_reproduces_background() {
        // y0 = x0_cond·q̃_cond⁻¹ + x0_MA·q_MA⁻¹ for data from the forward model
        let model = ProfileModel::sapphire_like("hemex", 4.9e-4, 7.1e-2, 30, 1.73e-5);
        let t = model.table().unwrap();
        let q = LossFactors::with_substrate(2e-5, model.withdrawn_omega(), 33e-3, 19e-9);
        let loss: Vec<f64> = t.rows().iter().map(|r| predict_loss(r, &q).unwrap()).collect();
        let b = fit_polynomial_basis(&t, &loss, 2, model.withdrawn_omega()).unwrap();
        let y0 = b.x_cond[0] * 2e-5 + b.x_ma[0] * 33e-3;
        // the frequency pull makes p̃_cond slightly non-polynomial; allow the
        // larger of the reported error and a relative 1e-3
        let tol = b.y_err[0].max(1e-3 * y0);
        assert!((b.y[0] - y0).abs() <= tol, "{} vs {y0}", b.y[0]);
        // the slope is q_sub + x1_MA q_MA + x1_cond q_cond
        let y1 = 19e-9 + b.x_ma[1] * 33e-3 + b.x_cond[1] * 2e-5;
        assert!((b.y[1] - y1).abs() <= b.y_err[1].max(1e-3 * y1.abs()));
    }
}
