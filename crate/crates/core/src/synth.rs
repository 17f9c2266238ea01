//! Forward-generated synthetic measurements.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use crate::error::{Error, Result};
use crate::inversion::Measurement;
use crate::io::{self, PositionSweep};
use crate::participation::{predict_loss, LossFactors, ParticipationTable, ProfileModel};
use crate::tls::{tls_loss, PowerPoint};

/// Parameters of the saturable TLS loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsParams {
    pub q_hp_inv: f64,
    pub q_sat_inv: f64,
    pub n_c: f64,
    pub alpha: f64,
}

/// Position sweep from the forward model, with Gaussian noise of standard
/// deviation `fractional_error·Q⁻¹` on each point. The reported sigma is the
/// noise standard deviation, or 1% of `Q⁻¹` for exact data.
pub fn position_sweep<R: Rng + ?Sized>(
    table: &ParticipationTable,
    factors: &LossFactors,
    fractional_error: f64,
    rng: &mut R,
) -> Result<PositionSweep> {
    if !(fractional_error >= 0.0) {
        return Err(Error::domain("fractional error must be non-negative"));
    }
    let measurements = table
        .rows()
        .iter()
        .map(|row| {
            let q = predict_loss(row, factors)?;
            let sigma = fractional_error * q;
            let noise: f64 = rng.sample(StandardNormal);
            Ok(Measurement {
                q_inv: q + sigma * noise,
                sigma: if sigma > 0.0 { sigma } else { 0.01 * q },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PositionSweep {
        table: table.clone(),
        measurements,
    })
}

/// Photon numbers spaced logarithmically over `[lo, hi]`.
pub fn log_photon_numbers(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    (0..count)
        .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
        .collect()
}

/// Power sweep from the TLS model with fractional Gaussian noise.
pub fn power_sweep<R: Rng + ?Sized>(
    params: &TlsParams,
    n_photons: &[f64],
    fractional_error: f64,
    rng: &mut R,
) -> Vec<PowerPoint> {
    n_photons
        .iter()
        .map(|&n| {
            let q = tls_loss(n, params.q_hp_inv, params.q_sat_inv, params.n_c, params.alpha);
            let sigma = fractional_error * q;
            let noise: f64 = rng.sample(StandardNormal);
            PowerPoint {
                n_photons: n,
                q_inv: q + sigma * noise,
                sigma,
            }
        })
        .collect()
}

/// Loss factors used for the EFG-pair data: `(q_cond⁻¹, q_MA⁻¹, q_bulk⁻¹, q_SA⁻¹)`.
pub const EFG_FACTORS: (f64, f64, f64, f64) = (2e-5, 33e-3, 63e-9, 15e-4);
/// Thin and thick EFG profiles: `(id, p_bulk withdrawn, p_bulk inserted, p_SA/p_bulk)`.
pub const EFG_PROFILES: [(&str, f64, f64, f64); 2] = [
    ("thin_EFG", 3.6e-5, 1.7e-2, 7.13e-5),
    ("thick_EFG", 1.2e-4, 5.66e-2, 1.67e-5),
];
const EFG_SEED: u64 = 20_210_415;
const EFG_NOISE: f64 = 0.01;
const EFG_POSITIONS: usize = 30;

/// Participation tables of the two EFG samples.
pub fn efg_tables() -> Result<Vec<ParticipationTable>> {
    EFG_PROFILES
        .iter()
        .map(|(id, pw, pi, ratio)| ProfileModel::sapphire_like(id, *pw, *pi, EFG_POSITIONS, *ratio).table())
        .collect()
}

/// Write the EFG-pair fixture (`positions.csv`, `power_withdrawn.csv`,
/// `config.json`) into `dir`.
pub fn write_efg_pair_fixture(dir: &Path) -> Result<()> {
    let (q_cond, q_ma, q_bulk, q_sa) = EFG_FACTORS;
    let tables = efg_tables()?;
    let omega_ref = tables[0].withdrawn_omega();
    let factors = LossFactors {
        q_cond_inv: q_cond,
        omega_ref,
        q_ma_inv: q_ma,
        q_bulk_inv: q_bulk,
        q_sa_inv: q_sa,
        q_bulk_h_inv: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(EFG_SEED);
    let sweeps = tables
        .iter()
        .map(|t| position_sweep(t, &factors, EFG_NOISE, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    io::write_position_sweeps(&dir.join("positions.csv"), &sweeps)?;

    // Withdrawn cavity: background at low power, part of the metal-air loss
    // saturating at high power.
    let withdrawn = tables[0].rows()[0];
    let q_lp = predict_loss(&withdrawn, &factors)?;
    let q_sat = 0.3 * withdrawn.p_ma * q_ma;
    let tls = TlsParams {
        q_hp_inv: q_lp - q_sat,
        q_sat_inv: q_sat,
        n_c: 8e9,
        alpha: 0.4,
    };
    let points = power_sweep(&tls, &log_photon_numbers(1e5, 1e14, 28), EFG_NOISE, &mut rng);
    io::write_power_sweep(&dir.join("power_withdrawn.csv"), &points)?;

    let config = json!({
        "schema": io::SCHEMA_VERSION,
        "seed": 7,
        "simulate": {
            "f0_Hz": 4.55e9,
            "kappa_tot_Hz": 100.0,
            "kappa_ext_Hz": 10.0,
            "jitter": {"kind": "lorentzian", "rms_linewidths": 10.0, "corner_Hz": 50.0, "f_max_Hz": 2000.0},
            "a0_sqrt_photons_per_s": 1.0e3,
            "t_p_s": 1.0e-4,
            "dt_s": 2.0e-5,
            "duration_s": 8.0e-3,
            "t_m_s": 1.0e-4,
            "shots": 16,
            "noise_power_photons_per_s": 1.0,
            "jitter_components": 64
        },
        "fit_ringdown": {"modes": ["power_average"]},
        "fit_power": {
            "sweeps": [{"label": "withdrawn", "path": "power_withdrawn.csv", "position": "withdrawn"}],
            "p_cond": withdrawn.p_cond,
            "p_MA": withdrawn.p_ma
        },
        "invert": {"sweeps": "positions.csv"},
        "sensitivity": {
            "profile": {
                "sample_id": "thick_EFG",
                "p_bulk_withdrawn": EFG_PROFILES[1].1,
                "p_bulk_inserted": EFG_PROFILES[1].2,
                "positions": EFG_POSITIONS,
                "p_SA_over_p_bulk": EFG_PROFILES[1].3
            },
            "q_cond_inv": 2e-5,
            "q_MA_inv": 3e-2,
            "fractional_error": 0.01,
            "grid": {"q_bulk_min": 1e-9, "q_bulk_max": 1e-6, "q_sa_min": 1e-5, "q_sa_max": 1e-2, "n_bulk": 9, "n_sa": 9}
        },
        "separate": {
            "transmon": {"p_bulk": 0.8, "f_Hz": 4e9},
            "magnetic": {
                "q_bulk_inv": q_bulk,
                "dipper_p_E_over_p_H": 200.0,
                "stripline_q": 8e6,
                "stripline_p_E": 0.40,
                "stripline_p_H": 0.31,
                "transmon_p_bulk_H": 0.025
            },
            "coherence": [{"label": "HEMEX bulk bound", "p": 0.8, "q_inv": 19e-9, "f_Hz": 4e9}]
        }
    });
    io::write_json(&dir.join("config.json"), &config)
}
