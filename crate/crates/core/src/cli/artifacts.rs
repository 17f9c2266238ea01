//! JSON artifacts written by the commands. Each carries `schema: 1`.

use serde::{Deserialize, Serialize};

use crate::inversion::{LossSolution, PolynomialSensitivity, SensitivityMap};
use crate::ringdown::{CouplingMeasurement, DecayFit};
use crate::separation::{CoherenceLimit, ConstraintLine, LossPair, MagneticBounds, PairBounds};
use crate::tls::{CavityBounds, PowerPoint, SweepPosition, TlsFit};

pub const ENSEMBLE_JSON: &str = "ensemble.json";
pub const ENSEMBLE_CSV: &str = "ensemble.csv";
pub const RINGDOWN_JSON: &str = "ringdown_fit.json";
pub const POWER_JSON: &str = "power_fit.json";
pub const INVERSION_JSON: &str = "inversion.json";
pub const SENSITIVITY_JSON: &str = "sensitivity.json";
pub const SEPARATION_JSON: &str = "separation.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingdownArtifact {
    pub schema: u32,
    pub window_s: (f64, f64),
    pub fits: Vec<DecayFit>,
    /// Present when the ensemble records its pulse.
    pub coupling: Option<CouplingMeasurement>,
    /// Simulated `κ_tot`, when known.
    pub kappa_tot_true: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSweepResult {
    pub label: String,
    pub position: SweepPosition,
    pub points: Vec<PowerPoint>,
    pub fit: TlsFit,
    /// Largest photon number still in the low-power regime.
    pub low_power_n: f64,
    pub bounds: Option<CavityBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerArtifact {
    pub schema: u32,
    pub n_cutoff_photons: Option<f64>,
    pub sweeps: Vec<PowerSweepResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub sample_id: String,
    pub p_bulk: f64,
    pub q_inv: f64,
    pub sigma: f64,
    pub model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSubstrate {
    pub sample_id: String,
    pub q_sub_inv: f64,
    pub sigma: f64,
    /// Mean `p_SA/p_bulk` over the sample's positions.
    pub sa_to_bulk_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionArtifact {
    pub schema: u32,
    pub solution: LossSolution,
    pub samples: Vec<SampleSubstrate>,
    pub rows: Vec<FitRow>,
    pub polynomial: Option<PolynomialSensitivity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityArtifact {
    pub schema: u32,
    pub sample_id: String,
    pub min_ci: f64,
    pub map: SensitivityMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledLine {
    pub label: String,
    pub line: ConstraintLine,
    pub bounds: PairBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceEntry {
    pub label: String,
    pub p: f64,
    pub q_inv: f64,
    pub f_hz: f64,
    pub limit: CoherenceLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationArtifact {
    pub schema: u32,
    pub lines: Vec<LabelledLine>,
    /// Intersection of the first two lines, as `(q_bulk⁻¹, q_SA⁻¹)`.
    pub intersection: Option<LossPair>,
    pub magnetic: Option<MagneticBounds>,
    pub coherence: Vec<CoherenceEntry>,
    pub pcond_fractional_change: Option<f64>,
}
