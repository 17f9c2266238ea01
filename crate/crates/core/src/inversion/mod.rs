//! Bounded weighted inversion of the participation-matrix system.
//!
//! Unknowns are the frequency-referenced conductor loss `q̃_cond⁻¹`, the
//! metal-air loss `q_MA⁻¹` and one effective substrate loss `q_sub⁻¹` per
//! sample. Cavity columns may be shared across samples or split per sample.

mod contour;
mod polynomial;
mod sensitivity;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::participation::ParticipationTable;

pub use contour::{contour_lines, ContourLine};
pub use polynomial::{polynomial_sensitivity, PolynomialSensitivity};
pub use sensitivity::{
    sensitivity_map, SensitivityAssumptions, SensitivityGrid, SensitivityMap, SensitivityPoint,
    CONTOUR_LEVELS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub q_inv: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

impl Default for Bound {
    fn default() -> Self {
        Bound {
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedColumns {
    pub cond: bool,
    pub ma: bool,
}

impl Default for SharedColumns {
    fn default() -> Self {
        SharedColumns { cond: true, ma: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSystem {
    tables: Vec<ParticipationTable>,
    measurements: Vec<Vec<Measurement>>,
    omega_ref: f64,
    shared: SharedColumns,
    bounds: Vec<Bound>,
}

impl LossSystem {
    pub fn new(
        tables: Vec<ParticipationTable>,
        measurements: Vec<Vec<Measurement>>,
        omega_ref: f64,
    ) -> Result<Self> {
        Self::with_sharing(tables, measurements, omega_ref, SharedColumns::default())
    }

    pub fn with_sharing(
        tables: Vec<ParticipationTable>,
        measurements: Vec<Vec<Measurement>>,
        omega_ref: f64,
        shared: SharedColumns,
    ) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::domain("a loss system needs at least one sample"));
        }
        if tables.len() != measurements.len() {
            return Err(Error::domain(format!(
                "{} tables but {} measurement sets",
                tables.len(),
                measurements.len()
            )));
        }
        for (t, m) in tables.iter().zip(&measurements) {
            if t.len() != m.len() {
                return Err(Error::domain(format!(
                    "sample {}: {} rows but {} measurements",
                    t.sample_id(),
                    t.len(),
                    m.len()
                )));
            }
            for (i, x) in m.iter().enumerate() {
                if !(x.sigma > 0.0 && x.sigma.is_finite() && x.q_inv.is_finite()) {
                    return Err(Error::domain(format!(
                        "sample {} row {i}: sigma must be positive and Q_inv finite",
                        t.sample_id()
                    )));
                }
            }
        }
        if !(omega_ref > 0.0 && omega_ref.is_finite()) {
            return Err(Error::domain("reference frequency must be positive"));
        }
        let mut s = LossSystem {
            tables,
            measurements,
            omega_ref,
            shared,
            bounds: Vec::new(),
        };
        s.bounds = vec![Bound::default(); s.parameter_count()];
        Ok(s)
    }

    pub fn tables(&self) -> &[ParticipationTable] {
        &self.tables
    }

    pub fn measurements(&self) -> &[Vec<Measurement>] {
        &self.measurements
    }

    pub fn omega_ref(&self) -> f64 {
        self.omega_ref
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    /// Replace the bound of the parameter called `name`.
    pub fn set_bound(&mut self, name: &str, lower: f64, upper: f64) -> Result<()> {
        let idx = self
            .parameter_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::domain(format!("unknown parameter {name}")))?;
        if lower > upper {
            return Err(Error::InfeasibleBounds {
                name: name.to_string(),
                lower,
                upper,
            });
        }
        self.bounds[idx] = Bound { lower, upper };
        Ok(())
    }

    fn samples(&self) -> usize {
        self.tables.len()
    }

    fn cond_count(&self) -> usize {
        if self.shared.cond { 1 } else { self.samples() }
    }

    fn ma_count(&self) -> usize {
        if self.shared.ma { 1 } else { self.samples() }
    }

    pub fn parameter_count(&self) -> usize {
        self.cond_count() + self.ma_count() + self.samples()
    }

    fn cond_index(&self, s: usize) -> usize {
        if self.shared.cond { 0 } else { s }
    }

    fn ma_index(&self, s: usize) -> usize {
        self.cond_count() + if self.shared.ma { 0 } else { s }
    }

    /// Column index of `q_sub⁻¹` of sample `s`.
    pub fn sub_index(&self, s: usize) -> usize {
        self.cond_count() + self.ma_count() + s
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.parameter_count());
        let ids: Vec<&str> = self.tables.iter().map(|t| t.sample_id()).collect();
        if self.shared.cond {
            names.push("q_cond_inv".to_string());
        } else {
            names.extend(ids.iter().map(|id| format!("q_cond_inv[{id}]")));
        }
        if self.shared.ma {
            names.push("q_MA_inv".to_string());
        } else {
            names.extend(ids.iter().map(|id| format!("q_MA_inv[{id}]")));
        }
        names.extend(ids.iter().map(|id| format!("q_sub_inv[{id}]")));
        names
    }

    pub fn row_count(&self) -> usize {
        self.tables.iter().map(|t| t.len()).sum()
    }

    /// Unweighted design matrix, measured losses and their sigmas.
    pub fn design(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let m = self.row_count();
        let mut p = DMatrix::zeros(m, self.parameter_count());
        let mut y = DVector::zeros(m);
        let mut sigma = DVector::zeros(m);
        let mut r = 0;
        for (s, (table, meas)) in self.tables.iter().zip(&self.measurements).enumerate() {
            for (row, x) in table.rows().iter().zip(meas) {
                p[(r, self.cond_index(s))] = row.p_cond_normalized(self.omega_ref);
                p[(r, self.ma_index(s))] = row.p_ma;
                p[(r, self.sub_index(s))] = row.p_bulk;
                y[r] = x.q_inv;
                sigma[r] = x.sigma;
                r += 1;
            }
        }
        (p, y, sigma)
    }

    fn weighted(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (mut p, mut y, sigma) = self.design();
        for i in 0..p.nrows() {
            let w = 1.0 / sigma[i];
            p.row_mut(i).scale_mut(w);
            y[i] *= w;
        }
        (p, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveBound {
    pub index: usize,
    pub name: String,
    pub side: BoundSide,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSolution {
    pub names: Vec<String>,
    pub omega_ref: f64,
    pub q: Vec<f64>,
    /// Row-major covariance; rows and columns of active parameters are zero.
    pub covariance: Vec<Vec<f64>>,
    /// `Q_i⁻¹ − (P·q)_i` in row order.
    pub residuals: Vec<f64>,
    pub active_bounds: Vec<ActiveBound>,
    pub chi2: f64,
    pub condition_number: f64,
}

impl LossSolution {
    pub fn sigma(&self, j: usize) -> f64 {
        self.covariance[j][j].max(0.0).sqrt()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// `C = (P̃ᵀP̃)⁻¹` with `P̃_ij = P_ij/σ_i`.
pub fn covariance(system: &LossSystem) -> Result<DMatrix<f64>> {
    let (a, _) = system.weighted();
    let names = system.parameter_names();
    match linalg::normal_inverse(&a, &names) {
        Err(Error::RankDeficient { columns }) => Err(Error::Singular(format!(
            "normal matrix is singular; near-dependent columns {columns:?}"
        ))),
        other => other,
    }
}

fn check_bounds(system: &LossSystem) -> Result<()> {
    for (b, name) in system.bounds.iter().zip(system.parameter_names()) {
        if !(b.lower <= b.upper) || b.lower.is_nan() || b.upper.is_nan() {
            return Err(Error::InfeasibleBounds {
                name,
                lower: b.lower,
                upper: b.upper,
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Free,
    AtLower,
    AtUpper,
}

/// Least squares restricted to the free columns, the others held fixed.
fn solve_free(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>, state: &[State], names: &[String]) -> Result<DVector<f64>> {
    let free: Vec<usize> = (0..state.len()).filter(|&j| state[j] == State::Free).collect();
    let mut out = x.clone();
    if free.is_empty() {
        return Ok(out);
    }
    let mut rhs = b.clone();
    for j in 0..state.len() {
        if state[j] != State::Free {
            rhs -= a.column(j) * x[j];
        }
    }
    let sub = a.select_columns(free.iter());
    let sub_names: Vec<String> = free.iter().map(|&j| names[j].clone()).collect();
    let fit = linalg::lstsq(&sub, &rhs, &sub_names)?;
    for (k, &j) in free.iter().enumerate() {
        out[j] = fit.coef[k];
    }
    Ok(out)
}

/// Box-constrained weighted least squares by a primal active-set method.
pub fn solve(system: &LossSystem) -> Result<LossSolution> {
    check_bounds(system)?;
    let names = system.parameter_names();
    let (a, b) = system.weighted();
    let n = a.ncols();
    let condition = linalg::condition_number(&a, &names)?;
    let col_norm: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();

    let bounds = &system.bounds;
    let mut x = DVector::from_iterator(n, bounds.iter().map(|bd| 0.0f64.clamp(bd.lower, bd.upper)));
    let mut state: Vec<State> = bounds
        .iter()
        .map(|bd| if bd.lower == bd.upper { State::AtLower } else { State::Free })
        .collect();

    let max_iter = 10 * n + 20;
    for _ in 0..max_iter {
        let target = solve_free(&a, &b, &x, &state, &names)?;
        // largest step toward the free optimum that stays inside the box
        let mut step = 1.0;
        let mut blocking: Option<(usize, State)> = None;
        for j in 0..n {
            if state[j] != State::Free {
                continue;
            }
            let d = target[j] - x[j];
            if d < 0.0 && target[j] < bounds[j].lower {
                let s = (bounds[j].lower - x[j]) / d;
                if s < step {
                    step = s;
                    blocking = Some((j, State::AtLower));
                }
            } else if d > 0.0 && target[j] > bounds[j].upper {
                let s = (bounds[j].upper - x[j]) / d;
                if s < step {
                    step = s;
                    blocking = Some((j, State::AtUpper));
                }
            }
        }
        let step = step.max(0.0);
        for j in 0..n {
            if state[j] == State::Free {
                x[j] += step * (target[j] - x[j]);
            }
        }
        if let Some((j, side)) = blocking {
            state[j] = side;
            x[j] = if side == State::AtLower { bounds[j].lower } else { bounds[j].upper };
            continue;
        }
        // stationary on the free set: test the multipliers of the active set
        let r = &a * &x - &b;
        let rn = r.norm().max(1e-300);
        let g = a.transpose() * &r;
        let mut release: Option<(usize, f64)> = None;
        for j in 0..n {
            if bounds[j].lower == bounds[j].upper {
                continue;
            }
            let scaled = g[j] / (col_norm[j] * rn);
            let violation = match state[j] {
                State::AtLower => -scaled,
                State::AtUpper => scaled,
                State::Free => continue,
            };
            if violation > 1e-10 && release.is_none_or(|(_, v)| violation > v) {
                release = Some((j, violation));
            }
        }
        match release {
            Some((j, _)) => state[j] = State::Free,
            None => return finish(system, &a, &b, x, &state, names, condition),
        }
    }
    Err(Error::NonConvergence {
        best_reduced_chi2: {
            let r = &a * &x - &b;
            r.norm_squared() / (a.nrows().saturating_sub(n).max(1) as f64)
        },
    })
}

fn finish(
    system: &LossSystem,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: DVector<f64>,
    state: &[State],
    names: Vec<String>,
    condition: f64,
) -> Result<LossSolution> {
    let n = x.len();
    let free: Vec<usize> = (0..n).filter(|&j| state[j] == State::Free).collect();
    let mut cov = vec![vec![0.0; n]; n];
    if !free.is_empty() {
        let sub = a.select_columns(free.iter());
        let sub_names: Vec<String> = free.iter().map(|&j| names[j].clone()).collect();
        let c = linalg::normal_inverse(&sub, &sub_names)?;
        for (p, &i) in free.iter().enumerate() {
            for (q, &j) in free.iter().enumerate() {
                cov[i][j] = c[(p, q)];
            }
        }
    }
    let (p, y, _) = system.design();
    let residuals = (&y - &p * &x).iter().copied().collect();
    let chi2 = (a * &x - b).norm_squared();
    let active_bounds = (0..n)
        .filter(|&j| state[j] != State::Free)
        .map(|j| ActiveBound {
            index: j,
            name: names[j].clone(),
            side: if state[j] == State::AtLower { BoundSide::Lower } else { BoundSide::Upper },
            value: x[j],
        })
        .collect();
    Ok(LossSolution {
        names,
        omega_ref: system.omega_ref,
        q: x.iter().copied().collect(),
        covariance: cov,
        residuals,
        active_bounds,
        chi2,
        condition_number: condition,
    })
}
