//! Splitting substrate loss into bulk and surface (or electric and magnetic)
//! components, and the coherence limits those components imply.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::consts::TWO_PI;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    #[default]
    Equality,
    UpperBound,
}

/// The locus `q_x + ratio·q_y = q_sub` in the plane of two loss tangents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintLine {
    pub q_sub_inv: f64,
    pub sigma: f64,
    pub ratio: f64,
    #[serde(default)]
    pub ratio_sigma: f64,
    #[serde(default)]
    pub kind: LineKind,
}

impl ConstraintLine {
    pub fn new(q_sub_inv: f64, sigma: f64, ratio: f64) -> Result<Self> {
        let l = ConstraintLine {
            q_sub_inv,
            sigma,
            ratio,
            ratio_sigma: 0.0,
            kind: LineKind::Equality,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_sub_inv >= 0.0 && self.sigma >= 0.0 && self.ratio_sigma >= 0.0) {
            return Err(Error::domain("constraint line needs q_sub >= 0 and non-negative sigmas"));
        }
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::domain("constraint line ratio must be positive"));
        }
        Ok(())
    }

    pub fn intercept_x(&self) -> f64 {
        self.q_sub_inv
    }

    pub fn intercept_y(&self) -> f64 {
        self.q_sub_inv / self.ratio
    }

    /// Points along the segment between the two intercepts.
    pub fn polyline(&self, points: usize) -> Vec<(f64, f64)> {
        let n = points.max(2);
        (0..n)
            .map(|k| {
                let f = k as f64 / (n - 1) as f64;
                (self.intercept_x() * f, self.intercept_y() * (1.0 - f))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

/// Intersection of two constraint lines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPair {
    /// Axis-intercept quantity, e.g. `q_bulk⁻¹`.
    pub x: Estimate,
    /// Slope quantity, e.g. `q_SA⁻¹`.
    pub y: Estimate,
    pub covariance: [[f64; 2]; 2],
    /// Set when a negative coordinate was clipped to zero.
    pub clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Propagation {
    #[default]
    Jacobian,
    MonteCarlo { samples: usize, seed: u64 },
}

fn solve_pair(ma: f64, ra: f64, mb: f64, rb: f64) -> (f64, f64) {
    let d = ra - rb;
    let y = (ma - mb) / d;
    let x = (ra * mb - rb * ma) / d;
    (x, y)
}

pub fn intersect(a: &ConstraintLine, b: &ConstraintLine) -> Result<LossPair> {
    intersect_with(a, b, Propagation::Jacobian)
}

pub fn intersect_with(a: &ConstraintLine, b: &ConstraintLine, propagation: Propagation) -> Result<LossPair> {
    a.validate()?;
    b.validate()?;
    if a.kind != LineKind::Equality || b.kind != LineKind::Equality {
        return Err(Error::domain("intersection needs two equality lines"));
    }
    let d = a.ratio - b.ratio;
    let tol = (1e-9 * a.ratio.max(b.ratio)).max(a.ratio_sigma.hypot(b.ratio_sigma));
    if d.abs() <= tol {
        return Err(Error::DegenerateGeometry(format!(
            "ratios {} and {} are indistinguishable",
            a.ratio, b.ratio
        )));
    }
    let (x, y) = solve_pair(a.q_sub_inv, a.ratio, b.q_sub_inv, b.ratio);

    let covariance = match propagation {
        Propagation::Jacobian => {
            // partials with respect to (m_a, m_b, r_a, r_b)
            let jx = [-b.ratio / d, a.ratio / d, y * b.ratio / d, -y * a.ratio / d];
            let jy = [1.0 / d, -1.0 / d, -y / d, y / d];
            let var = [a.sigma.powi(2), b.sigma.powi(2), a.ratio_sigma.powi(2), b.ratio_sigma.powi(2)];
            let dot = |u: &[f64; 4], v: &[f64; 4]| (0..4).map(|k| u[k] * v[k] * var[k]).sum::<f64>();
            [[dot(&jx, &jx), dot(&jx, &jy)], [dot(&jx, &jy), dot(&jy, &jy)]]
        }
        Propagation::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::domain("Monte-Carlo propagation needs at least 2 samples"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let draw = |mean: f64, sd: f64, rng: &mut ChaCha8Rng| -> f64 {
                if sd > 0.0 {
                    Normal::new(mean, sd).expect("positive sd").sample(rng)
                } else {
                    mean
                }
            };
            let mut xs = Vec::with_capacity(samples);
            let mut ys = Vec::with_capacity(samples);
            for _ in 0..samples {
                let ma = draw(a.q_sub_inv, a.sigma, &mut rng);
                let mb = draw(b.q_sub_inv, b.sigma, &mut rng);
                let ra = draw(a.ratio, a.ratio_sigma, &mut rng);
                let rb = draw(b.ratio, b.ratio_sigma, &mut rng);
                let (sx, sy) = solve_pair(ma, ra, mb, rb);
                xs.push(sx);
                ys.push(sy);
            }
            let n = samples as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let cxx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / (n - 1.0);
            let cyy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (n - 1.0);
            let cxy = xs.iter().zip(&ys).map(|(u, v)| (u - mx) * (v - my)).sum::<f64>() / (n - 1.0);
            [[cxx, cxy], [cxy, cyy]]
        }
    };
    let clipped = x < 0.0 || y < 0.0;
    Ok(LossPair {
        x: Estimate {
            value: x.max(0.0),
            sigma: covariance[0][0].sqrt(),
        },
        y: Estimate {
            value: y.max(0.0),
            sigma: covariance[1][1].sqrt(),
        },
        covariance,
        clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    /// Uncertainty of the upper end.
    pub upper_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBounds {
    pub x: Interval,
    pub y: Interval,
}

/// With one sample, each loss tangent is bounded by its axis intercept.
pub fn single_sample_bounds(line: &ConstraintLine) -> Result<PairBounds> {
    line.validate()?;
    let y_sigma = {
        let rel = (line.sigma / line.q_sub_inv.max(f64::MIN_POSITIVE)).hypot(line.ratio_sigma / line.ratio);
        if line.q_sub_inv > 0.0 {
            line.intercept_y() * rel
        } else {
            line.sigma / line.ratio
        }
    };
    Ok(PairBounds {
        x: Interval {
            lower: 0.0,
            upper: line.intercept_x(),
            upper_sigma: line.sigma,
        },
        y: Interval {
            lower: 0.0,
            upper: line.intercept_y(),
            upper_sigma: y_sigma,
        },
    })
}

/// A bulk-loss measurement in a geometry with weak magnetic participation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipperConstraint {
    pub q_bulk_inv: f64,
    /// `p_E/p_H` of the dipper geometry.
    pub e_to_h_ratio: f64,
}

/// A resonator whose total loss bounds electric and magnetic bulk loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StriplineConstraint {
    pub q: f64,
    pub p_e: f64,
    pub p_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticBounds {
    pub q_e_min: f64,
    pub q_e_max: f64,
    pub q_h_min: f64,
    /// `None` when neither geometry is sensitive to magnetic loss.
    pub q_h_max: Option<f64>,
}

/// Intersect the dipper line `q_E + (p_H/p_E)·q_H = q_bulk` with the
/// stripline half-plane `p_E·q_E + p_H·q_H ≤ 1/Q`, for `q_E, q_H ≥ 0`.
pub fn magnetic_bounds(dipper: &DipperConstraint, stripline: &StriplineConstraint) -> Result<MagneticBounds> {
    if !(dipper.q_bulk_inv >= 0.0) {
        return Err(Error::domain("measured q_bulk must be non-negative"));
    }
    if !(dipper.e_to_h_ratio > 0.0) {
        return Err(Error::domain("dipper p_E/p_H must be positive"));
    }
    if !(stripline.q > 0.0 && stripline.p_e >= 0.0 && stripline.p_h >= 0.0) {
        return Err(Error::domain("stripline needs Q > 0 and non-negative participations"));
    }
    let m = dipper.q_bulk_inv;
    let rho = 1.0 / dipper.e_to_h_ratio;
    let rho = if rho.is_finite() { rho } else { 0.0 };
    let c = stripline.p_h - stripline.p_e * rho;
    let rhs = 1.0 / stripline.q - stripline.p_e * m;
    let line_end = if rho > 0.0 { Some(m / rho) } else { None };

    let empty = || {
        Error::EmptyIntersection(format!(
            "dipper line q_E + {rho:e}·q_H = {m:e} never satisfies the stripline bound 1/Q = {:e}",
            1.0 / stripline.q
        ))
    };
    let (q_h_min, q_h_max) = if c > 0.0 {
        if rhs < 0.0 {
            return Err(empty());
        }
        let cap = rhs / c;
        (0.0, Some(line_end.map_or(cap, |e| e.min(cap))))
    } else if c < 0.0 {
        let lo = (rhs / c).max(0.0);
        if line_end.is_some_and(|e| lo > e) {
            return Err(empty());
        }
        (lo, line_end)
    } else {
        if rhs < 0.0 {
            return Err(empty());
        }
        (0.0, line_end)
    };
    let q_e_max = m - rho * q_h_min;
    let q_e_min = match q_h_max {
        Some(h) => (m - rho * h).max(0.0),
        None if rho == 0.0 => m,
        None => 0.0,
    };
    Ok(MagneticBounds {
        q_e_min,
        q_e_max,
        q_h_min,
        q_h_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "limit", rename_all = "snake_case")]
pub enum CoherenceLimit {
    Bounded { q: f64, t1_s: f64 },
    Unbounded,
}

impl CoherenceLimit {
    pub fn q(&self) -> Option<f64> {
        match self {
            CoherenceLimit::Bounded { q, .. } => Some(*q),
            CoherenceLimit::Unbounded => None,
        }
    }

    pub fn t1_s(&self) -> Option<f64> {
        match self {
            CoherenceLimit::Bounded { t1_s, .. } => Some(*t1_s),
            CoherenceLimit::Unbounded => None,
        }
    }
}

/// `Q = 1/(p·q⁻¹)` and `T1 = Q/(2πf)` for a single loss channel.
pub fn coherence_limit(p: f64, q_inv: f64, f_hz: f64) -> Result<CoherenceLimit> {
    if !(f_hz > 0.0) {
        return Err(Error::domain("qubit frequency must be positive"));
    }
    if !(p >= 0.0 && q_inv >= 0.0) {
        return Err(Error::domain("participation and loss tangent must be non-negative"));
    }
    let loss = p * q_inv;
    if loss == 0.0 {
        return Ok(CoherenceLimit::Unbounded);
    }
    let q = 1.0 / loss;
    Ok(CoherenceLimit::Bounded {
        q,
        t1_s: q / (TWO_PI * f_hz),
    })
}

/// Fractional change `(Q_I⁻¹ − Q_W⁻¹)/Q_W⁻¹` between inserted and withdrawn
/// losses measured where conductor loss dominates.
pub fn pcond_check(q_inserted_inv: f64, q_withdrawn_inv: f64) -> Result<f64> {
    if q_withdrawn_inv == 0.0 {
        return Err(Error::DivisionByZero("withdrawn Q⁻¹"));
    }
    Ok((q_inserted_inv - q_withdrawn_inv) / q_withdrawn_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parallel_lines_rejected() {
        let a = ConstraintLine::new(1e-7, 1e-8, 1e-5).unwrap();
        let b = ConstraintLine::new(2e-7, 1e-8, 1e-5).unwrap();
        assert!(matches!(intersect(&a, &b), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn efg_pair() {
        let thin = ConstraintLine::new(170e-9, 13e-9, 7.13e-5).unwrap();
        let thick = ConstraintLine::new(88e-9, 6e-9, 1.67e-5).unwrap();
        let p = intersect(&thin, &thick).unwrap();
        assert!((p.x.value - 63e-9).abs() < 8e-9);
        assert!((p.y.value - 15e-4).abs() < 3e-4);
        assert!(!p.clipped);
        // closed-form sigmas with exact ratios
        let d = 7.13e-5 - 1.67e-5;
        let sy = (13e-9f64.powi(2) + 6e-9f64.powi(2)).sqrt() / d;
        assert!((p.y.sigma - sy).abs() < 1e-12 * sy);
        let mc = intersect_with(&thin, &thick, Propagation::MonteCarlo { samples: 20000, seed: 3 }).unwrap();
        assert!((mc.x.sigma / p.x.sigma - 1.0).abs() < 0.05);
        assert!((mc.y.sigma / p.y.sigma - 1.0).abs() < 0.05);
    }

    #[test]
    fn negative_solution_clipped() {
        let a = ConstraintLine::new(10e-9, 1e-9, 1e-5).unwrap();
        let b = ConstraintLine::new(50e-9, 1e-9, 2e-5).unwrap();
        let p = intersect(&a, &b).unwrap();
        assert!(p.clipped);
        assert_eq!(p.x.value, 0.0);
    }

    #[test]
    fn hemex_single_line() {
        let l = ConstraintLine::new(19e-9, 6e-9, 19e-9 / 11e-4).unwrap();
        let b = single_sample_bounds(&l).unwrap();
        assert!((b.x.upper - 19e-9).abs() < 1e-20);
        assert!((b.y.upper - 11e-4).abs() < 1e-15);
        assert!((b.y.upper_sigma - 11e-4 * 6.0 / 19.0).abs() < 1e-12);
        let z = single_sample_bounds(&ConstraintLine::new(0.0, 0.0, 1e-5).unwrap()).unwrap();
        assert_eq!((z.x.upper, z.y.upper), (0.0, 0.0));
    }

    fn appendix_inputs(q: f64) -> (DipperConstraint, StriplineConstraint) {
        (
            DipperConstraint { q_bulk_inv: 63e-9, e_to_h_ratio: 200.0 },
            StriplineConstraint { q, p_e: 0.40, p_h: 0.31 },
        )
    }

    #[test]
    fn magnetic_bounds_hand_solution() {
        let (d, s) = appendix_inputs(8e6);
        let b = magnetic_bounds(&d, &s).unwrap();
        let h = (1.0 / 8e6 - 0.4 * 63e-9) / (0.31 - 0.4 / 200.0);
        assert!((b.q_h_max.unwrap() - h).abs() < 1e-20);
        assert!((b.q_e_min - (63e-9 - h / 200.0)).abs() < 1e-22);
        assert_eq!(b.q_e_max, 63e-9);
        // binding endpoint sits on both constraints
        assert!((b.q_e_min + b.q_h_max.unwrap() / 200.0 - 63e-9).abs() < 1e-22);
        assert!((0.4 * b.q_e_min + 0.31 * b.q_h_max.unwrap() - 1.0 / 8e6).abs() < 1e-21);

        let (d2, s2) = appendix_inputs(16e6);
        let b2 = magnetic_bounds(&d2, &s2).unwrap();
        let h2 = (1.0 / 16e6 - 0.4 * 63e-9) / (0.31 - 0.4 / 200.0);
        assert!((b2.q_h_max.unwrap() - h2).abs() < 1e-20);
        assert!(b2.q_h_max.unwrap() < b.q_h_max.unwrap());
    }

    #[test]
    fn magnetic_insensitive_geometry() {
        let d = DipperConstraint { q_bulk_inv: 63e-9, e_to_h_ratio: f64::INFINITY };
        let s = StriplineConstraint { q: 8e6, p_e: 0.4, p_h: 0.0 };
        let b = magnetic_bounds(&d, &s).unwrap();
        assert_eq!(b.q_e_min, 63e-9);
        assert_eq!(b.q_e_max, 63e-9);
        assert!(b.q_h_max.is_none());
    }

    #[test]
    fn magnetic_inconsistent_inputs() {
        let d = DipperConstraint { q_bulk_inv: 1e-6, e_to_h_ratio: 200.0 };
        let s = StriplineConstraint { q: 8e6, p_e: 0.4, p_h: 0.31 };
        assert!(matches!(magnetic_bounds(&d, &s), Err(Error::EmptyIntersection(_))));
    }

    #[test]
    fn coherence_values() {
        let c = coherence_limit(0.8, 63e-9, 4e9).unwrap();
        assert!((c.q().unwrap() - 1.0 / (0.8 * 63e-9)).abs() < 1e-6);
        assert!((c.t1_s().unwrap() - c.q().unwrap() / (TWO_PI * 4e9)).abs() < 1e-18);
        assert_eq!(coherence_limit(0.8, 0.0, 4e9).unwrap(), CoherenceLimit::Unbounded);
        assert!(coherence_limit(0.8, 1e-9, 0.0).is_err());
    }

    #[test]
    fn pcond_values() {
        assert_eq!(pcond_check(2e-8, 2e-8).unwrap(), 0.0);
        assert!((pcond_check(1.008 * 3e-8, 3e-8).unwrap() - 0.008).abs() < 1e-12);
        assert!(pcond_check(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn intersection_reproduces_inputs(qb in 1e-10f64..1e-6, qs in 1e-6f64..1e-2, ra in 1e-6f64..1e-4, rb in 1e-6f64..1e-4) {
            prop_assume!((ra - rb).abs() > 1e-3 * ra.max(rb));
            let a = ConstraintLine::new(qb + ra * qs, 0.0, ra).unwrap();
            let b = ConstraintLine::new(qb + rb * qs, 0.0, rb).unwrap();
            let p = intersect(&a, &b).unwrap();
            for l in [a, b] {
                let back = p.x.value + l.ratio * p.y.value;
                prop_assert!((back - l.q_sub_inv).abs() <= 1e-12 * l.q_sub_inv + 1e-24);
            }
            for l in [a, b] {
                let bounds = single_sample_bounds(&l).unwrap();
                prop_assert!(p.x.value <= bounds.x.upper * (1.0 + 1e-12));
                prop_assert!(p.y.value <= bounds.y.upper * (1.0 + 1e-12));
            }
        }

        #[test]
        fn coherence_antitone(p in 1e-6f64..1.0, q in 1e-12f64..1e-3, k in 1.0f64..10.0) {
            let base = coherence_limit(p, q, 5e9).unwrap().q().unwrap();
            prop_assert!(coherence_limit(p * k, q, 5e9).unwrap().q().unwrap() <= base);
            prop_assert!(coherence_limit(p, q * k, 5e9).unwrap().q().unwrap() <= base);
        }
    }
}
