//! Coupling-rate extraction and intracavity photon number.

use serde::{Deserialize, Serialize};

use super::fit::{bandwidth_contrast, AveragingMode, DecayFit};
use super::simulate::{Pulse, ShotEnsemble};
use crate::consts::HBAR;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMethod {
    #[default]
    Exact,
    ShortPulse,
}

/// `κ_ext` from the reflected power at the start of the pulse (`P_start`)
/// and the emitted power just after it ends (`P_ring`).
pub fn extract_kappa_ext(
    p_start: f64,
    p_ring: f64,
    kappa_tot: f64,
    t_p: f64,
    method: CouplingMethod,
) -> Result<f64> {
    if !(p_start > 0.0) {
        return Err(Error::domain("P_start must be positive"));
    }
    if !(p_ring >= 0.0) {
        return Err(Error::domain(format!("P_ring = {p_ring} must be non-negative")));
    }
    if !(t_p > 0.0) {
        return Err(Error::domain("pulse duration must be positive"));
    }
    let root = (p_ring / p_start).sqrt();
    match method {
        CouplingMethod::ShortPulse => Ok(root / t_p),
        CouplingMethod::Exact => {
            if kappa_tot == 0.0 {
                return Err(Error::DivisionByZero("kappa_tot"));
            }
            if !(kappa_tot > 0.0) {
                return Err(Error::domain("kappa_tot must be positive"));
            }
            let x = 0.5 * kappa_tot * t_p;
            Ok(kappa_tot * root / (-2.0 * (-x).exp_m1()))
        }
    }
}

/// Receiver-chain scalars used when turning a recorded ensemble into
/// `P_start` and `P_ring`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingCalibration {
    /// Gain applied equally to the reference pulse and the ringdown record.
    pub receiver_gain: f64,
    /// Amplitude factor by which the large drive pulse was compressed
    /// relative to the reference pulse.
    pub compression: f64,
}

impl Default for CouplingCalibration {
    fn default() -> Self {
        CouplingCalibration {
            receiver_gain: 1.0,
            compression: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingMeasurement {
    pub kappa_ext: f64,
    pub p_start: f64,
    pub p_ring: f64,
}

/// Derive `κ_ext` from a power-average fit of the ringdown tail and an
/// off-resonant reference pulse of amplitude `pulse.a0`.
///
/// `P_ring` is the fitted power extrapolated back to the end of the pulse
/// and corrected for the detector boxcar.
pub fn measure_coupling(
    ens: &ShotEnsemble,
    pulse: &Pulse,
    fit: &DecayFit,
    calibration: &CouplingCalibration,
    method: CouplingMethod,
) -> Result<CouplingMeasurement> {
    if fit.mode != AveragingMode::PowerAverage {
        return Err(Error::domain("coupling extraction needs a power-average fit"));
    }
    if !(calibration.receiver_gain > 0.0 && calibration.compression > 0.0) {
        return Err(Error::domain("receiver gain and compression must be positive"));
    }
    let g = calibration.receiver_gain;
    let p_start = g * pulse.a0 * pulse.a0;
    let c2 = calibration.compression * calibration.compression;
    let p_ring = g * fit.amplitude_at(pulse.t_p) / bandwidth_contrast(fit.rate, ens.t_m()) / c2;
    let kappa_ext = extract_kappa_ext(p_start, p_ring, fit.rate, pulse.t_p, method)?;
    Ok(CouplingMeasurement {
        kappa_ext,
        p_start,
        p_ring,
    })
}

/// Ways of estimating the mean intracavity photon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum PhotonNumberInput {
    /// From the emitted photon flux `|a_out|²` after the pulse.
    OutputField { a_out_sq: f64, kappa_ext: f64 },
    /// From the incident pulse, at the end of the pulse.
    InputPulse {
        a0: f64,
        t_p: f64,
        kappa_ext: f64,
        kappa_tot: f64,
    },
    /// Short-pulse limit of `InputPulse`.
    ShortPulse { a0: f64, t_p: f64, kappa_ext: f64 },
}

pub fn photon_number(input: PhotonNumberInput) -> Result<f64> {
    match input {
        PhotonNumberInput::OutputField { a_out_sq, kappa_ext } => {
            if kappa_ext == 0.0 {
                return Err(Error::DivisionByZero("kappa_ext"));
            }
            if !(kappa_ext > 0.0 && a_out_sq >= 0.0) {
                return Err(Error::domain("need kappa_ext > 0 and |a_out|^2 >= 0"));
            }
            Ok(a_out_sq / kappa_ext)
        }
        PhotonNumberInput::InputPulse {
            a0,
            t_p,
            kappa_ext,
            kappa_tot,
        } => {
            if !(kappa_tot > 0.0 && kappa_ext >= 0.0 && t_p >= 0.0) {
                return Err(Error::domain("need kappa_tot > 0, kappa_ext >= 0, t_p >= 0"));
            }
            // 1 − 2e^{−x/2} + e^{−x} = (1 − e^{−x/2})²
            let h = -(-0.5 * kappa_tot * t_p).exp_m1();
            Ok(4.0 * kappa_ext * a0 * a0 / (kappa_tot * kappa_tot) * h * h)
        }
        PhotonNumberInput::ShortPulse { a0, t_p, kappa_ext } => {
            if !(kappa_ext >= 0.0 && t_p >= 0.0) {
                return Err(Error::domain("need kappa_ext >= 0 and t_p >= 0"));
            }
            Ok(kappa_ext * a0 * a0 * t_p * t_p)
        }
    }
}

/// Short-pulse photon number from the incident power `P_in` (W):
/// `n = P_in·t_p²/(ħ·Q_ext)`. The drive frequency cancels.
pub fn photons_from_input_power(p_in_w: f64, t_p: f64, q_ext: f64) -> Result<f64> {
    if !(q_ext > 0.0 && p_in_w >= 0.0 && t_p >= 0.0) {
        return Err(Error::domain("need Q_ext > 0, P_in >= 0, t_p >= 0"));
    }
    Ok(p_in_w * t_p * t_p / (HBAR * q_ext))
}

/// Photon number from the emitted power `P_out` (W): `n = P_out·Q_ext/(ħω²)`.
pub fn photons_from_output_power(p_out_w: f64, q_ext: f64, omega: f64) -> Result<f64> {
    if !(q_ext > 0.0 && omega > 0.0 && p_out_w >= 0.0) {
        return Err(Error::domain("need Q_ext > 0, omega > 0, P_out >= 0"));
    }
    Ok(p_out_w * q_ext / (HBAR * omega * omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::TWO_PI;

    #[test]
    fn zero_ring_power_means_no_coupling() {
        assert_eq!(extract_kappa_ext(1.0, 0.0, 600.0, 5e-6, CouplingMethod::Exact).unwrap(), 0.0);
    }

    #[test]
    fn exact_matches_short_pulse_for_brief_pulses() {
        let k = 1e3;
        let tp = 1e-3 / k;
        let e = extract_kappa_ext(1.0, 2e-7, k, tp, CouplingMethod::Exact).unwrap();
        let s = extract_kappa_ext(1.0, 2e-7, k, tp, CouplingMethod::ShortPulse).unwrap();
        assert!((e / s - 1.0).abs() < 1e-3);
    }

    #[test]
    fn exact_inverts_closed_form_ring_power() {
        let (k, ke, a0, tp): (f64, f64, f64, f64) = (628.3, 12.0, 7.0, 3e-3);
        let a_tp = 2.0 * a0 * ke.sqrt() / k * (1.0 - (-0.5 * k * tp).exp());
        let p_ring = ke * a_tp * a_tp;
        let got = extract_kappa_ext(a0 * a0, p_ring, k, tp, CouplingMethod::Exact).unwrap();
        assert!((got / ke - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_rejects_zero_kappa() {
        assert!(extract_kappa_ext(1.0, 1.0, 0.0, 1e-6, CouplingMethod::Exact).is_err());
        assert!(extract_kappa_ext(1.0, -1.0, 1.0, 1e-6, CouplingMethod::Exact).is_err());
    }

    #[test]
    fn photon_forms() {
        assert_eq!(
            photon_number(PhotonNumberInput::OutputField { a_out_sq: 0.0, kappa_ext: 3.0 }).unwrap(),
            0.0
        );
        assert!(photon_number(PhotonNumberInput::OutputField { a_out_sq: 1.0, kappa_ext: 0.0 }).is_err());
        let (a0, ke, k) = (1e4, 600.0, 1e4);
        let tp = 1e-4 / k;
        let full = photon_number(PhotonNumberInput::InputPulse { a0, t_p: tp, kappa_ext: ke, kappa_tot: k }).unwrap();
        let short = photon_number(PhotonNumberInput::ShortPulse { a0, t_p: tp, kappa_ext: ke }).unwrap();
        // leading correction is −κt_p/2
        assert!((full / short - 1.0).abs() < 1e-4);
    }

    #[test]
    fn power_forms_agree_with_amplitude_form() {
        let omega = TWO_PI * 4.55e9;
        let q_ext = 2e8;
        let tp = 5e-6;
        let ke = omega / q_ext;
        let target = 1e5;
        let a0_sq = target / (ke * tp * tp);
        let p_in = a0_sq * HBAR * omega;
        let n_power = photons_from_input_power(p_in, tp, q_ext).unwrap();
        let n_amp = photon_number(PhotonNumberInput::ShortPulse { a0: a0_sq.sqrt(), t_p: tp, kappa_ext: ke }).unwrap();
        assert!((n_power / target - 1.0).abs() < 1e-9);
        assert!((n_amp / target - 1.0).abs() < 1e-9);
        let p_out = target * ke * HBAR * omega;
        let n_out = photons_from_output_power(p_out, q_ext, omega).unwrap();
        assert!((n_out / target - 1.0).abs() < 1e-9);
    }
}
