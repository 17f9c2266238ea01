use serde::{Deserialize, Serialize};

use super::{ParticipationRow, ParticipationTable};
use crate::consts::{SPEED_OF_LIGHT, TWO_PI};
use crate::error::{Error, Result};

/// Below-cutoff waveguide: the sample participation falls off as
/// `p_bulk(0)·exp(−2αz)` with `α = sqrt((ω_c/c)² − (ω/c)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvanescentGuide {
    pub cutoff_hz: f64,
    pub mode_hz: f64,
    /// `p_bulk` at the fully inserted position `z = 0`.
    pub p_bulk_at_origin: f64,
}

impl EvanescentGuide {
    pub fn new(cutoff_hz: f64, mode_hz: f64, p_bulk_at_origin: f64) -> Result<Self> {
        let guide = EvanescentGuide {
            cutoff_hz,
            mode_hz,
            p_bulk_at_origin,
        };
        guide.validate()?;
        Ok(guide)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mode_hz > 0.0) {
            return Err(Error::domain("mode frequency must be positive"));
        }
        if self.mode_hz >= self.cutoff_hz {
            return Err(Error::NotEvanescent {
                mode_hz: self.mode_hz,
                cutoff_hz: self.cutoff_hz,
            });
        }
        if !(0.0..=1.0).contains(&self.p_bulk_at_origin) {
            return Err(Error::domain("p_bulk(0) must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Field attenuation constant, 1/m.
    pub fn alpha(&self) -> f64 {
        let kc = TWO_PI * self.cutoff_hz / SPEED_OF_LIGHT;
        let k = TWO_PI * self.mode_hz / SPEED_OF_LIGHT;
        (kc * kc - k * k).sqrt()
    }

    pub fn p_bulk(&self, z: f64) -> Result<f64> {
        if !(z >= 0.0) {
            return Err(Error::domain(format!("position must be non-negative, got {z}")));
        }
        Ok(self.p_bulk_at_origin * (-2.0 * self.alpha() * z).exp())
    }

    /// Position at which `p_bulk` has fallen to `p`.
    pub fn position_of(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= self.p_bulk_at_origin) {
            return Err(Error::domain(format!("p_bulk {p} not reachable")));
        }
        Ok((self.p_bulk_at_origin / p).ln() / (2.0 * self.alpha()))
    }
}

/// `p_bulk(z)` for an evanescent guide.
pub fn attenuation_profile(z: f64, guide: &EvanescentGuide) -> Result<f64> {
    guide.validate()?;
    guide.p_bulk(z)
}

/// Generates synthetic position sweeps.
///
/// Positions are uniform in `z` between the fully inserted point and the
/// withdrawn point. The other participations are functions of `p_bulk`:
/// `p_MA` is a polynomial, `p_SA` a fixed multiple, `p_cond` linear, and the
/// mode frequency is pulled down linearly by the dielectric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileModel {
    pub sample_id: String,
    pub guide: EvanescentGuide,
    pub p_bulk_withdrawn: f64,
    pub positions: usize,
    pub p_cond: f64,
    /// Fractional change of `p_cond` per unit `p_bulk`.
    #[serde(default)]
    pub p_cond_slope: f64,
    /// `p_MA` polynomial coefficients in powers of `p_bulk`.
    pub p_ma_poly: Vec<f64>,
    pub sa_to_bulk_ratio: f64,
    /// Fractional frequency pull per unit `p_bulk`.
    pub frequency_pull: f64,
    /// `p_bulk(H)/p_bulk(E)`.
    #[serde(default)]
    pub h_to_e_ratio: f64,
}

impl ProfileModel {
    /// A sapphire-like sweep between the given withdrawn and inserted `p_bulk`,
    /// with cavity participations resembling a 4.55 GHz coaxial stub.
    pub fn sapphire_like(
        sample_id: &str,
        p_bulk_withdrawn: f64,
        p_bulk_inserted: f64,
        positions: usize,
        sa_to_bulk_ratio: f64,
    ) -> Self {
        ProfileModel {
            sample_id: sample_id.to_string(),
            guide: EvanescentGuide {
                cutoff_hz: 20e9,
                mode_hz: 4.55e9,
                p_bulk_at_origin: p_bulk_inserted,
            },
            p_bulk_withdrawn,
            positions,
            p_cond: 43.92e-6,
            p_cond_slope: 0.0,
            p_ma_poly: vec![249e-9, -300e-9, 15800e-9],
            sa_to_bulk_ratio,
            frequency_pull: 0.45,
            h_to_e_ratio: 1.0 / 200.0,
        }
    }

    pub fn withdrawn_omega(&self) -> f64 {
        TWO_PI * self.guide.mode_hz
    }

    pub fn row_at(&self, p_bulk: f64) -> Result<ParticipationRow> {
        let p_ma = self
            .p_ma_poly
            .iter()
            .enumerate()
            .map(|(k, c)| c * p_bulk.powi(k as i32))
            .sum::<f64>();
        let omega = self.withdrawn_omega() * (1.0 - self.frequency_pull * p_bulk);
        let p_cond = self.p_cond * (1.0 + self.p_cond_slope * p_bulk);
        ParticipationRow::new(omega, p_cond, p_ma, p_bulk, self.sa_to_bulk_ratio * p_bulk)?
            .with_magnetic(self.h_to_e_ratio * p_bulk)
    }

    pub fn table(&self) -> Result<ParticipationTable> {
        self.guide.validate()?;
        if self.positions < 2 {
            return Err(Error::domain("a profile needs at least two positions"));
        }
        let z_max = self.guide.position_of(self.p_bulk_withdrawn)?;
        let rows = (0..self.positions)
            .map(|i| {
                let z = z_max * i as f64 / (self.positions - 1) as f64;
                let p = self.guide.p_bulk(z)?;
                Ok(self.row_at(p)?.with_position(z))
            })
            .collect::<Result<Vec<_>>>()?;
        ParticipationTable::new(self.sample_id.clone(), rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn guide() -> EvanescentGuide {
        EvanescentGuide::new(20e9, 4.55e9, 0.05).unwrap()
    }

    #[test]
    fn anchor_and_withdrawal() {
        let g = guide();
        assert_eq!(attenuation_profile(0.0, &g).unwrap(), 0.05);
        assert!(attenuation_profile(1.0, &g).unwrap() < 1e-300);
    }

    #[test]
    fn half_point_matches_closed_form() {
        let g = guide();
        let c = 299_792_458.0;
        let two_pi = 2.0 * std::f64::consts::PI;
        let alpha = ((two_pi * 20e9 / c).powi(2) - (two_pi * 4.55e9 / c).powi(2)).sqrt();
        let z = 2f64.ln() / (2.0 * alpha);
        let p = attenuation_profile(z, &g).unwrap();
        assert!((p - 0.025).abs() < 1e-15);
    }

    #[test]
    fn above_cutoff_is_rejected() {
        assert!(matches!(
            EvanescentGuide::new(4e9, 4.55e9, 0.05),
            Err(Error::NotEvanescent { .. })
        ));
        assert!(EvanescentGuide::new(4.55e9, 4.55e9, 0.05).is_err());
        assert!(guide().p_bulk(-1e-3).is_err());
    }

    #[test]
    fn generated_table_spans_requested_range() {
        let m = ProfileModel::sapphire_like("thick", 1.2e-4, 5.66e-2, 30, 1.67e-5);
        let t = m.table().unwrap();
        assert_eq!(t.len(), 30);
        let first = t.rows()[0];
        let last = t.rows()[29];
        assert!((first.p_bulk - 1.2e-4).abs() < 1e-12);
        assert!((last.p_bulk - 5.66e-2).abs() < 1e-15);
        assert!((first.p_sa / first.p_bulk - 1.67e-5).abs() < 1e-18);
        // roughly 2.5% frequency pull at full insertion
        assert!((last.omega / first.omega - 1.0).abs() < 0.03);
    }

    proptest! {
        #[test]
        fn exponential_semigroup(z1 in 0.0..5e-3f64, z2 in 0.0..5e-3f64) {
            let g = guide();
            let lhs = g.p_bulk(z1 + z2).unwrap() * g.p_bulk(0.0).unwrap();
            let rhs = g.p_bulk(z1).unwrap() * g.p_bulk(z2).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs);
        }

        #[test]
        fn strictly_decreasing(z in 0.0..5e-3f64, dz in 1e-6..1e-3f64) {
            let g = guide();
            prop_assert!(g.p_bulk(z + dz).unwrap() < g.p_bulk(z).unwrap());
        }
    }
}
