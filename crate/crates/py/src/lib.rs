//! Python bindings for the `cavloss` toolkit.
//!
//! Structured inputs and results cross the boundary as plain dicts with the
//! same field names as the JSON artifacts. Failures raise `ValidationError`
//! or `NumericalError`, both subclasses of `CavlossError`, split the same way
//! as the command-line exit codes.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyComplex, PyDict, PyList};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use cavloss::cli::{self, EXIT_NUMERICAL};
use cavloss::inversion::{self, LossSystem, Measurement, SharedColumns};
use cavloss::participation::{self, ParticipationRow, ParticipationTable};
use cavloss::ringdown::{self, AveragingMode, CouplingCalibration, CouplingMethod, JitterSpectrum};
use cavloss::separation::{self, DipperConstraint, Propagation, StriplineConstraint};
use cavloss::tls::{self, PowerPoint, PowerSweep, SweepPosition, TlsFitOptions};
use cavloss::{synth, Error};

create_exception!(cavloss, CavlossError, PyException, "Base class for cavloss failures.");
create_exception!(cavloss, ValidationError, CavlossError, "Invalid input or configuration.");
create_exception!(cavloss, NumericalError, CavlossError, "A numerical procedure could not produce a result.");

fn raise(e: Error) -> PyErr {
    if cli::exit_code(&e) == EXIT_NUMERICAL {
        NumericalError::new_err(e.to_string())
    } else {
        ValidationError::new_err(e.to_string())
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| CavlossError::new_err(e.to_string()))?;
    let json = PyModule::import(py, "json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let json = PyModule::import(obj.py(), "json")?;
    let text: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| ValidationError::new_err(e.to_string()))
}

fn parse_enum<T: DeserializeOwned>(name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| ValidationError::new_err(format!("unknown option {name:?}")))
}

/// A single-mode cavity with optional frequency jitter.
#[pyclass(module = "cavloss", frozen)]
struct CavityModel {
    inner: ringdown::CavityModel,
}

#[pymethods]
impl CavityModel {
    /// `jitter` is a spectrum dict such as
    /// `{"kind": "lorentzian", "s0_per_hz": ..., "corner_hz": ..., "f_max_hz": ...}`.
    #[new]
    #[pyo3(signature = (omega0, kappa_tot, kappa_ext, jitter=None))]
    fn new(omega0: f64, kappa_tot: f64, kappa_ext: f64, jitter: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let jitter = match jitter {
            Some(j) if !j.is_none() => from_py(j)?,
            _ => JitterSpectrum::None,
        };
        let inner = ringdown::CavityModel::new(omega0, kappa_tot, kappa_ext, jitter).map_err(raise)?;
        Ok(CavityModel { inner })
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.inner.omega0
    }

    #[getter]
    fn kappa_tot(&self) -> f64 {
        self.inner.kappa_tot
    }

    #[getter]
    fn kappa_ext(&self) -> f64 {
        self.inner.kappa_ext
    }

    #[getter]
    fn kappa_int(&self) -> f64 {
        self.inner.kappa_int()
    }

    #[getter]
    fn q_tot(&self) -> f64 {
        self.inner.q_tot()
    }

    #[getter]
    fn q_ext(&self) -> f64 {
        self.inner.q_ext()
    }

    /// RMS frequency excursion of the jitter in units of the linewidth.
    fn jitter_rms_linewidths(&self) -> f64 {
        self.inner.jitter.rms_linewidths(self.inner.omega0, self.inner.kappa_tot)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "CavityModel(omega0={}, kappa_tot={}, kappa_ext={})",
            self.inner.omega0, self.inner.kappa_tot, self.inner.kappa_ext
        )
    }
}

/// Lorentzian jitter spectrum with the given RMS excursion in linewidths.
#[pyfunction]
fn lorentzian_jitter(
    py: Python<'_>,
    linewidths: f64,
    corner_hz: f64,
    f_max_hz: f64,
    omega0: f64,
    kappa_tot: f64,
) -> PyResult<Py<PyAny>> {
    let s = JitterSpectrum::lorentzian_with_rms(linewidths, corner_hz, f_max_hz, omega0, kappa_tot).map_err(raise)?;
    to_py(py, &s)
}

/// A square drive pulse of amplitude `a0` (sqrt(photons/s)) and length `t_p`.
#[pyclass(module = "cavloss", frozen)]
struct Pulse {
    inner: ringdown::Pulse,
}

#[pymethods]
impl Pulse {
    #[new]
    #[pyo3(signature = (a0, t_p, detuning=0.0))]
    fn new(a0: f64, t_p: f64, detuning: f64) -> PyResult<Self> {
        let inner = ringdown::Pulse::new(a0, t_p, detuning).map_err(raise)?;
        Ok(Pulse { inner })
    }

    #[getter]
    fn a0(&self) -> f64 {
        self.inner.a0
    }

    #[getter]
    fn t_p(&self) -> f64 {
        self.inner.t_p
    }

    #[getter]
    fn detuning(&self) -> f64 {
        self.inner.detuning
    }

    fn __repr__(&self) -> String {
        format!(
            "Pulse(a0={}, t_p={}, detuning={})",
            self.inner.a0, self.inner.t_p, self.inner.detuning
        )
    }
}

/// Result of an exponential fit to an averaged ringdown record.
#[pyclass(module = "cavloss", frozen)]
struct DecayFit {
    inner: ringdown::DecayFit,
}

#[pymethods]
impl DecayFit {
    #[getter]
    fn rate(&self) -> f64 {
        self.inner.rate
    }

    #[getter]
    fn rate_stderr(&self) -> f64 {
        self.inner.rate_stderr
    }

    #[getter]
    fn contrast(&self) -> f64 {
        self.inner.contrast
    }

    #[getter]
    fn t_ref(&self) -> f64 {
        self.inner.t_ref
    }

    #[getter]
    fn samples_used(&self) -> usize {
        self.inner.samples_used
    }

    #[getter]
    fn reduced_chi2(&self) -> f64 {
        self.inner.reduced_chi2
    }

    fn amplitude_at(&self, t: f64) -> f64 {
        self.inner.amplitude_at(t)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("DecayFit(rate={}, rate_stderr={})", self.inner.rate, self.inner.rate_stderr)
    }
}

/// Complex output-field records sharing one time grid.
#[pyclass(module = "cavloss", frozen)]
struct ShotEnsemble {
    inner: ringdown::ShotEnsemble,
}

#[pymethods]
impl ShotEnsemble {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn samples(&self) -> usize {
        self.inner.samples()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn t_m(&self) -> f64 {
        self.inner.t_m()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn times(&self) -> Vec<f64> {
        (0..self.inner.samples()).map(|k| self.inner.time(k)).collect()
    }

    fn mean_power(&self) -> Vec<f64> {
        self.inner.mean_power()
    }

    fn mean_field<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let values = self
            .inner
            .mean_field()
            .into_iter()
            .map(|c| PyComplex::from_doubles(py, c.re, c.im));
        PyList::new(py, values)
    }

    /// One shot as a list of complex samples.
    fn shot<'py>(&self, py: Python<'py>, index: usize) -> PyResult<Bound<'py, PyList>> {
        let shot = self
            .inner
            .shots()
            .get(index)
            .ok_or_else(|| ValidationError::new_err(format!("shot {index} out of range")))?;
        PyList::new(py, shot.iter().map(|c| PyComplex::from_doubles(py, c.re, c.im)))
    }

    /// The same records seen through a detector averaging window `t_m`.
    fn with_t_m(&self, t_m: f64) -> PyResult<ShotEnsemble> {
        let inner = self.inner.with_t_m(t_m).map_err(raise)?;
        Ok(ShotEnsemble { inner })
    }

    /// `mode` is "power_average" or "field_average".
    #[pyo3(signature = (t_start, t_end, mode="power_average"))]
    fn fit_decay(&self, py: Python<'_>, t_start: f64, t_end: f64, mode: &str) -> PyResult<DecayFit> {
        let mode: AveragingMode = parse_enum(mode)?;
        let inner = py
            .detach(|| ringdown::fit_decay(&self.inner, (t_start, t_end), mode))
            .map_err(raise)?;
        Ok(DecayFit { inner })
    }

    /// External coupling rate from a power-average fit of this ensemble.
    #[pyo3(signature = (pulse, fit, method="exact", receiver_gain=1.0, compression=1.0))]
    fn measure_coupling(
        &self,
        py: Python<'_>,
        pulse: &Pulse,
        fit: &DecayFit,
        method: &str,
        receiver_gain: f64,
        compression: f64,
    ) -> PyResult<Py<PyAny>> {
        let method: CouplingMethod = parse_enum(method)?;
        let calibration = CouplingCalibration {
            receiver_gain,
            compression,
        };
        let m = ringdown::measure_coupling(&self.inner, &pulse.inner, &fit.inner, &calibration, method)
            .map_err(raise)?;
        to_py(py, &m)
    }

    fn __repr__(&self) -> String {
        format!(
            "ShotEnsemble(shots={}, samples={}, dt={}, t_m={})",
            self.inner.len(),
            self.inner.samples(),
            self.inner.dt(),
            self.inner.t_m()
        )
    }
}

/// Simulate `shots` ringdown records in parallel.
#[pyfunction]
#[pyo3(signature = (cavity, pulse, shots, dt, duration, seed, t_m=None, noise_power=0.0, jitter_components=256))]
#[allow(clippy::too_many_arguments)]
fn simulate_ensemble(
    py: Python<'_>,
    cavity: &CavityModel,
    pulse: &Pulse,
    shots: usize,
    dt: f64,
    duration: f64,
    seed: u64,
    t_m: Option<f64>,
    noise_power: f64,
    jitter_components: usize,
) -> PyResult<ShotEnsemble> {
    let config = ringdown::EnsembleConfig {
        shots,
        grid: ringdown::SimulationGrid {
            dt,
            duration,
            jitter_components,
        },
        t_m: t_m.unwrap_or(dt),
        noise_power,
        seed,
    };
    let inner = py
        .detach(|| ringdown::simulate_ensemble(&cavity.inner, &pulse.inner, &config))
        .map_err(raise)?;
    Ok(ShotEnsemble { inner })
}

/// `κ_ext` from the pulse-start and ringdown powers.
#[pyfunction]
#[pyo3(signature = (p_start, p_ring, kappa_tot, t_p, method="exact"))]
fn extract_kappa_ext(p_start: f64, p_ring: f64, kappa_tot: f64, t_p: f64, method: &str) -> PyResult<f64> {
    let method: CouplingMethod = parse_enum(method)?;
    ringdown::extract_kappa_ext(p_start, p_ring, kappa_tot, t_p, method).map_err(raise)
}

#[pyfunction]
fn bandwidth_contrast(kappa: f64, t_m: f64) -> f64 {
    ringdown::bandwidth_contrast(kappa, t_m)
}

/// Two-level-system loss `Q⁻¹(n)`.
#[pyfunction]
fn tls_loss(n: f64, q_hp_inv: f64, q_sat_inv: f64, n_c: f64, alpha: f64) -> f64 {
    tls::tls_loss(n, q_hp_inv, q_sat_inv, n_c, alpha)
}

/// Fitted saturation curve of one power sweep.
#[pyclass(module = "cavloss", frozen)]
struct TlsFit {
    inner: tls::TlsFit,
}

#[pymethods]
impl TlsFit {
    #[getter]
    fn q_hp_inv(&self) -> f64 {
        self.inner.q_hp_inv
    }

    #[getter]
    fn q_sat_inv(&self) -> f64 {
        self.inner.q_sat_inv
    }

    #[getter]
    fn n_c(&self) -> f64 {
        self.inner.n_c
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn reduced_chi2(&self) -> f64 {
        self.inner.reduced_chi2
    }

    /// Standard errors of `(q_hp_inv, q_sat_inv, n_c, alpha)`.
    #[getter]
    fn errors(&self) -> (f64, f64, f64, f64) {
        let f = &self.inner;
        (f.q_hp_inv_err, f.q_sat_inv_err, f.n_c_err, f.alpha_err)
    }

    fn eval(&self, n: f64) -> f64 {
        self.inner.eval(n)
    }

    /// Fraction of the saturable loss already saturated at `n` photons.
    fn saturation_fraction(&self, n: f64) -> f64 {
        tls::saturation_fraction(n, &self.inner)
    }

    /// Largest photon number whose saturation fraction stays below `f_max`.
    fn low_power_boundary(&self, f_max: f64) -> PyResult<f64> {
        tls::low_power_boundary(f_max, &self.inner).map_err(raise)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        let f = &self.inner;
        format!(
            "TlsFit(q_hp_inv={}, q_sat_inv={}, n_c={}, alpha={})",
            f.q_hp_inv, f.q_sat_inv, f.n_c, f.alpha
        )
    }
}

/// Fit a power sweep. `position` is "withdrawn" or "inserted"; `n_cutoff`
/// drops inserted points above that photon number.
#[pyfunction]
#[pyo3(signature = (n_photons, q_inv, sigma, position="withdrawn", n_cutoff=None))]
fn fit_tls(
    py: Python<'_>,
    n_photons: Vec<f64>,
    q_inv: Vec<f64>,
    sigma: Vec<f64>,
    position: &str,
    n_cutoff: Option<f64>,
) -> PyResult<TlsFit> {
    if n_photons.len() != q_inv.len() || q_inv.len() != sigma.len() {
        return Err(ValidationError::new_err("n_photons, q_inv and sigma must have equal length"));
    }
    let position: SweepPosition = parse_enum(position)?;
    let points = n_photons
        .into_iter()
        .zip(q_inv)
        .zip(sigma)
        .map(|((n_photons, q_inv), sigma)| PowerPoint {
            n_photons,
            q_inv,
            sigma,
        })
        .collect();
    let sweep = PowerSweep::new(points, position).map_err(raise)?;
    let options = TlsFitOptions {
        n_cutoff,
        ..TlsFitOptions::default()
    };
    let inner = py.detach(|| tls::fit_tls(&sweep, &options)).map_err(raise)?;
    Ok(TlsFit { inner })
}

/// Substrate loss of a sample with bulk and substrate-air participations.
#[pyfunction]
fn composite_substrate_loss(p_bulk: f64, p_sa: f64, q_bulk_inv: f64, q_sa_inv: f64) -> PyResult<f64> {
    participation::composite_substrate_loss(p_bulk, p_sa, q_bulk_inv, q_sa_inv).map_err(raise)
}

#[derive(Deserialize)]
struct MeasuredRow {
    #[serde(flatten)]
    row: ParticipationRow,
    q_inv: f64,
    sigma: f64,
}

/// Solve the bounded participation-matrix system.
///
/// `samples` maps each sample id to a list of row dicts with keys `omega`,
/// `p_cond`, `p_ma`, `p_bulk`, `p_sa`, `q_inv` and `sigma`, plus optional
/// `z` and `p_bulk_h`. `bounds` maps parameter names to `(lower, upper)`
/// with `None` for no upper bound.
#[pyfunction]
#[pyo3(signature = (samples, f_ref_hz, bounds=None, shared_cond=true, shared_ma=true))]
fn solve(
    py: Python<'_>,
    samples: &Bound<'_, PyDict>,
    f_ref_hz: f64,
    bounds: Option<HashMap<String, (f64, Option<f64>)>>,
    shared_cond: bool,
    shared_ma: bool,
) -> PyResult<Py<PyAny>> {
    let mut tables = Vec::new();
    let mut measurements = Vec::new();
    for (id, rows) in samples.iter() {
        let id: String = id.extract()?;
        let mut rows: Vec<MeasuredRow> = from_py(&rows)?;
        // Tables order rows by p_bulk; keep each measurement with its row.
        rows.sort_by(|a, b| a.row.p_bulk.total_cmp(&b.row.p_bulk));
        measurements.push(
            rows.iter()
                .map(|r| Measurement {
                    q_inv: r.q_inv,
                    sigma: r.sigma,
                })
                .collect(),
        );
        let table = ParticipationTable::new(id, rows.into_iter().map(|r| r.row).collect()).map_err(raise)?;
        tables.push(table);
    }
    let shared = SharedColumns {
        cond: shared_cond,
        ma: shared_ma,
    };
    let mut system =
        LossSystem::with_sharing(tables, measurements, cavloss::consts::TWO_PI * f_ref_hz, shared).map_err(raise)?;
    for (name, (lower, upper)) in bounds.unwrap_or_default() {
        system
            .set_bound(&name, lower, upper.unwrap_or(f64::INFINITY))
            .map_err(raise)?;
    }
    let solution = py.detach(|| inversion::solve(&system)).map_err(raise)?;
    to_py(py, &solution)
}

/// The locus `q_x + ratio·q_y = q_sub` of one sample.
#[pyclass(module = "cavloss", frozen)]
struct ConstraintLine {
    inner: separation::ConstraintLine,
}

#[pymethods]
impl ConstraintLine {
    #[new]
    #[pyo3(signature = (q_sub_inv, sigma, ratio, ratio_sigma=0.0))]
    fn new(q_sub_inv: f64, sigma: f64, ratio: f64, ratio_sigma: f64) -> PyResult<Self> {
        let mut inner = separation::ConstraintLine::new(q_sub_inv, sigma, ratio).map_err(raise)?;
        inner.ratio_sigma = ratio_sigma;
        inner.validate().map_err(raise)?;
        Ok(ConstraintLine { inner })
    }

    #[getter]
    fn q_sub_inv(&self) -> f64 {
        self.inner.q_sub_inv
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    #[getter]
    fn ratio(&self) -> f64 {
        self.inner.ratio
    }

    fn intercepts(&self) -> (f64, f64) {
        (self.inner.intercept_x(), self.inner.intercept_y())
    }

    #[pyo3(signature = (points=50))]
    fn polyline(&self, points: usize) -> Vec<(f64, f64)> {
        self.inner.polyline(points)
    }

    /// Upper bounds on both loss tangents from this line alone.
    fn bounds(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let b = separation::single_sample_bounds(&self.inner).map_err(raise)?;
        to_py(py, &b)
    }

    fn __repr__(&self) -> String {
        format!(
            "ConstraintLine(q_sub_inv={}, sigma={}, ratio={})",
            self.inner.q_sub_inv, self.inner.sigma, self.inner.ratio
        )
    }
}

/// Intersection of two constraint lines. With `monte_carlo_samples` the
/// uncertainty is propagated by sampling instead of linearisation.
#[pyfunction]
#[pyo3(signature = (a, b, monte_carlo_samples=None, seed=0))]
fn intersect(
    py: Python<'_>,
    a: &ConstraintLine,
    b: &ConstraintLine,
    monte_carlo_samples: Option<usize>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let propagation = match monte_carlo_samples {
        Some(samples) => Propagation::MonteCarlo { samples, seed },
        None => Propagation::Jacobian,
    };
    let pair = separation::intersect_with(&a.inner, &b.inner, propagation).map_err(raise)?;
    to_py(py, &pair)
}

/// Electric and magnetic bulk loss bounds from a dipper measurement and a
/// stripline resonator.
#[pyfunction]
fn magnetic_bounds(
    py: Python<'_>,
    q_bulk_inv: f64,
    e_to_h_ratio: f64,
    stripline_q: f64,
    stripline_p_e: f64,
    stripline_p_h: f64,
) -> PyResult<Py<PyAny>> {
    let dipper = DipperConstraint {
        q_bulk_inv,
        e_to_h_ratio,
    };
    let stripline = StriplineConstraint {
        q: stripline_q,
        p_e: stripline_p_e,
        p_h: stripline_p_h,
    };
    let b = separation::magnetic_bounds(&dipper, &stripline).map_err(raise)?;
    to_py(py, &b)
}

/// `(Q, T1)` limit from one loss channel, or `None` when it is lossless.
#[pyfunction]
fn coherence_limit(p: f64, q_inv: f64, f_hz: f64) -> PyResult<Option<(f64, f64)>> {
    let limit = separation::coherence_limit(p, q_inv, f_hz).map_err(raise)?;
    Ok(limit.q().zip(limit.t1_s()))
}

#[pyfunction]
fn pcond_check(q_inserted_inv: f64, q_withdrawn_inv: f64) -> PyResult<f64> {
    separation::pcond_check(q_inserted_inv, q_withdrawn_inv).map_err(raise)
}

/// Run a command-line invocation, e.g. `run_cli(["pipeline", "-c", path])`,
/// and return `(summary, exit_code)` without printing.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> PyResult<(Py<PyAny>, i32)> {
    let argv = std::iter::once("cavloss".to_string()).chain(args);
    let (doc, code) = py.detach(|| cli::run_args(argv));
    Ok((to_py(py, &doc)?, code))
}

/// Write the synthetic two-sample fixture (config and CSV inputs) to `dir`.
#[pyfunction]
fn write_example_fixture(dir: PathBuf) -> PyResult<()> {
    synth::write_efg_pair_fixture(&dir).map_err(raise)
}

#[pymodule]
#[pyo3(name = "cavloss")]
fn cavloss_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("CavlossError", py.get_type::<CavlossError>())?;
    m.add("ValidationError", py.get_type::<ValidationError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<CavityModel>()?;
    m.add_class::<Pulse>()?;
    m.add_class::<ShotEnsemble>()?;
    m.add_class::<DecayFit>()?;
    m.add_class::<TlsFit>()?;
    m.add_class::<ConstraintLine>()?;
    m.add_function(wrap_pyfunction!(lorentzian_jitter, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(extract_kappa_ext, m)?)?;
    m.add_function(wrap_pyfunction!(bandwidth_contrast, m)?)?;
    m.add_function(wrap_pyfunction!(tls_loss, m)?)?;
    m.add_function(wrap_pyfunction!(fit_tls, m)?)?;
    m.add_function(wrap_pyfunction!(composite_substrate_loss, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(intersect, m)?)?;
    m.add_function(wrap_pyfunction!(magnetic_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(coherence_limit, m)?)?;
    m.add_function(wrap_pyfunction!(pcond_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_function(wrap_pyfunction!(write_example_fixture, m)?)?;
    Ok(())
}
