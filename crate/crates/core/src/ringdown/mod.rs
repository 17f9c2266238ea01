//! Pulsed ringdown: simulation with frequency jitter and detector bandwidth,
//! and the estimators used on the resulting records.
//!
//! The energy decay `⟨|a_out|²⟩ ∝ e^{−κ_tot t}` is unaffected by jitter,
//! while the averaged field `|⟨a_out⟩|` also decays through dephasing.

mod coupling;
mod fit;
mod jitter;
mod simulate;
mod spectral;

pub use coupling::{
    extract_kappa_ext, measure_coupling, photon_number, photons_from_input_power,
    photons_from_output_power, CouplingCalibration, CouplingMeasurement, CouplingMethod,
    PhotonNumberInput,
};
pub use fit::{bandwidth_contrast, fit_decay, AveragingMode, DecayFit};
pub use jitter::{JitterRealization, JitterSpectrum, Sinusoid, SpectralLine};
pub use simulate::{
    apply_detector_bandwidth, simulate_ensemble, simulate_shot, CavityModel, EnsembleConfig,
    Pulse, ShotEnsemble, SimulationGrid,
};
pub use spectral::{
    phase_variance_integral, predict_field_decay, spectral_weight, spectral_weight_w0,
    spectral_weight_w1, FieldDecayPrediction, WeightKind, EXPANSION_LIMIT,
};
