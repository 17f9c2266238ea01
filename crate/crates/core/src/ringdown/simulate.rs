//! Pulsed-ringdown simulator.
//!
//! In the frame of the drive the intracavity amplitude obeys
//! `ȧ = (iΔ + iω0ε(t) − κ/2)a − √κ_ext·a_in` and the port emits
//! `a_out = √κ_ext·a + a_in`. The equation is linear and only the phase is
//! stochastic, so each step is integrated exactly with the mean detuning of
//! that step (exponential Euler).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jitter::JitterSpectrum;
use crate::error::{Error, Result};

const MAX_KAPPA_DT: f64 = 0.1;
const MAX_JITTER_DT: f64 = 0.1;
const NOISE_STREAM_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityModel {
    pub omega0: f64,
    pub kappa_tot: f64,
    pub kappa_ext: f64,
    #[serde(default)]
    pub jitter: JitterSpectrum,
}

impl CavityModel {
    pub fn new(omega0: f64, kappa_tot: f64, kappa_ext: f64, jitter: JitterSpectrum) -> Result<Self> {
        let c = CavityModel {
            omega0,
            kappa_tot,
            kappa_ext,
            jitter,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::domain("omega0 must be positive and finite"));
        }
        if !(self.kappa_tot > 0.0 && self.kappa_tot.is_finite()) {
            return Err(Error::domain("kappa_tot must be positive and finite"));
        }
        if !(self.kappa_ext >= 0.0 && self.kappa_ext <= self.kappa_tot) {
            return Err(Error::domain(format!(
                "kappa_ext = {} must lie in [0, kappa_tot = {}]",
                self.kappa_ext, self.kappa_tot
            )));
        }
        self.jitter.validate()
    }

    pub fn q_tot(&self) -> f64 {
        self.omega0 / self.kappa_tot
    }

    pub fn q_ext(&self) -> f64 {
        self.omega0 / self.kappa_ext
    }

    pub fn kappa_int(&self) -> f64 {
        self.kappa_tot - self.kappa_ext
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub a0: f64,
    pub t_p: f64,
    #[serde(default)]
    pub detuning: f64,
}

impl Pulse {
    pub fn new(a0: f64, t_p: f64, detuning: f64) -> Result<Self> {
        let p = Pulse { a0, t_p, detuning };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_p > 0.0 && self.t_p.is_finite()) {
            return Err(Error::domain("pulse duration must be positive"));
        }
        if !(self.a0 >= 0.0 && self.a0.is_finite()) {
            return Err(Error::domain("pulse amplitude must be non-negative"));
        }
        if !self.detuning.is_finite() {
            return Err(Error::domain("detuning must be finite"));
        }
        Ok(())
    }

    /// Incident field at time `t` (drive frame).
    pub fn a_in(&self, t: f64) -> f64 {
        if (0.0..self.t_p).contains(&t) {
            self.a0
        } else {
            0.0
        }
    }
}

/// Sampling grid and synthesis resolution for one shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationGrid {
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "default_components")]
    pub jitter_components: usize,
}

fn default_components() -> usize {
    256
}

impl SimulationGrid {
    pub fn new(dt: f64, duration: f64) -> Self {
        SimulationGrid {
            dt,
            duration,
            jitter_components: default_components(),
        }
    }

    pub fn samples(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples()).map(|n| n as f64 * self.dt).collect()
    }

    fn check(&self, cavity: &CavityModel) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain("dt must be positive"));
        }
        if !(self.duration >= self.dt) {
            return Err(Error::domain("duration must be at least one step"));
        }
        let kdt = cavity.kappa_tot * self.dt;
        if kdt > MAX_KAPPA_DT {
            return Err(Error::UnstableStep(format!(
                "kappa_tot*dt = {kdt:.3e} exceeds {MAX_KAPPA_DT}"
            )));
        }
        if !cavity.jitter.is_none() {
            let fdt = cavity.jitter.f_max() * self.dt;
            if fdt > MAX_JITTER_DT {
                return Err(Error::UnstableStep(format!(
                    "jitter bandwidth not resolved: f_max*dt = {fdt:.3e} exceeds {MAX_JITTER_DT}"
                )));
            }
            if self.jitter_components == 0 {
                return Err(Error::domain("jitter_components must be positive"));
            }
        }
        Ok(())
    }
}

/// `(e^{λd} − 1)/λ` without cancellation for small `|λd|`.
fn phi1(lambda: Complex64, d: f64) -> Complex64 {
    let z = lambda * d;
    if z.norm() < 1e-300 {
        return Complex64::new(d, 0.0);
    }
    let ex = z.re.exp_m1();
    let s = (z.im * 0.5).sin();
    let em1 = Complex64::new(ex * z.im.cos() - 2.0 * s * s, (1.0 + ex) * z.im.sin());
    em1 / lambda
}

/// Exact update over a sub-interval of length `d` with constant drive `drive`
/// (the `−√κ_ext·a_in` term) and mean detuning `mean_det`.
fn advance(a: Complex64, d: f64, base: Complex64, mean_det: f64, drive: f64) -> Complex64 {
    let lambda = base + Complex64::new(0.0, mean_det);
    let prop = (lambda * d).exp();
    let mut next = a * prop;
    if drive != 0.0 {
        next += phi1(lambda, d) * drive;
    }
    next
}

/// Simulate one shot. The jitter realisation is drawn from stream
/// `shot_index` of the generator seeded with `seed`.
pub fn simulate_shot(
    cavity: &CavityModel,
    pulse: &Pulse,
    grid: &SimulationGrid,
    seed: u64,
    shot_index: u64,
) -> Result<Vec<Complex64>> {
    cavity.validate()?;
    pulse.validate()?;
    grid.check(cavity)?;

    let n = grid.samples();
    let dt = grid.dt;
    let realization = if cavity.jitter.is_none() {
        None
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot_index);
        Some(cavity.jitter.realize(grid.jitter_components, &mut rng))
    };
    let theta = match &realization {
        Some(r) => r.theta_on_grid(cavity.omega0, dt, n),
        None => vec![0.0; n],
    };
    let theta_at = |t: f64| match &realization {
        Some(r) => r.theta(cavity.omega0, t),
        None => 0.0,
    };

    let sk = cavity.kappa_ext.sqrt();
    let base = Complex64::new(-0.5 * cavity.kappa_tot, pulse.detuning);
    let drive = -sk * pulse.a0;
    let mut out = Vec::with_capacity(n);
    let mut a = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let t0 = k as f64 * dt;
        out.push(a * sk + pulse.a_in(t0));
        if k + 1 == n {
            break;
        }
        let t1 = t0 + dt;
        let dtheta = theta[k + 1] - theta[k];
        if t1 <= pulse.t_p {
            a = advance(a, dt, base, dtheta / dt, drive);
        } else if t0 >= pulse.t_p {
            a = advance(a, dt, base, dtheta / dt, 0.0);
        } else {
            let d_on = pulse.t_p - t0;
            let d_off = t1 - pulse.t_p;
            let th_p = theta_at(pulse.t_p);
            a = advance(a, d_on, base, (th_p - theta[k]) / d_on, drive);
            a = advance(a, d_off, base, (theta[k + 1] - th_p) / d_off, 0.0);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub shots: usize,
    pub grid: SimulationGrid,
    /// Detector averaging window, s.
    pub t_m: f64,
    /// Receiver noise power `E|n|²` per sample, photons/s.
    #[serde(default)]
    pub noise_power: f64,
    pub seed: u64,
}

/// A set of complex output-field records sharing one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotEnsemble {
    dt: f64,
    t_m: f64,
    seed: u64,
    pulse_end: f64,
    noise_power: f64,
    shots: Vec<Vec<Complex64>>,
}

impl ShotEnsemble {
    pub fn new(
        dt: f64,
        t_m: f64,
        seed: u64,
        pulse_end: f64,
        noise_power: f64,
        shots: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::domain("dt must be positive"));
        }
        if !(t_m >= dt * (1.0 - 1e-9)) {
            return Err(Error::domain(format!("t_m = {t_m} must be >= dt = {dt}")));
        }
        if !(noise_power >= 0.0) {
            return Err(Error::domain("noise power must be non-negative"));
        }
        let len = shots.first().map(Vec::len).unwrap_or(0);
        if shots.is_empty() || len == 0 {
            return Err(Error::domain("ensemble needs at least one non-empty shot"));
        }
        if shots.iter().any(|s| s.len() != len) {
            return Err(Error::domain("all shots must have equal length"));
        }
        Ok(ShotEnsemble {
            dt,
            t_m,
            seed,
            pulse_end,
            noise_power,
            shots,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn t_m(&self) -> f64 {
        self.t_m
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn pulse_end(&self) -> f64 {
        self.pulse_end
    }
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
    pub fn shots(&self) -> &[Vec<Complex64>] {
        &self.shots
    }
    pub fn len(&self) -> usize {
        self.shots.len()
    }
    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }
    pub fn samples(&self) -> usize {
        self.shots[0].len()
    }
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// A copy with a different detector window.
    pub fn with_t_m(&self, t_m: f64) -> Result<Self> {
        ShotEnsemble::new(
            self.dt,
            t_m,
            self.seed,
            self.pulse_end,
            self.noise_power,
            self.shots.clone(),
        )
    }

    /// `⟨|a_out|²⟩` per sample.
    pub fn mean_power(&self) -> Vec<f64> {
        let n = self.shots.len() as f64;
        (0..self.samples())
            .map(|k| self.shots.iter().map(|s| s[k].norm_sqr()).sum::<f64>() / n)
            .collect()
    }

    /// `⟨a_out⟩` per sample.
    pub fn mean_field(&self) -> Vec<Complex64> {
        let n = self.shots.len() as f64;
        (0..self.samples())
            .map(|k| self.shots.iter().map(|s| s[k]).sum::<Complex64>() / n)
            .collect()
    }
}

/// Simulate `config.shots` independent shots in parallel, optionally adding
/// complex Gaussian receiver noise. Output order and values do not depend on
/// the number of worker threads.
pub fn simulate_ensemble(
    cavity: &CavityModel,
    pulse: &Pulse,
    config: &EnsembleConfig,
) -> Result<ShotEnsemble> {
    if config.shots == 0 {
        return Err(Error::domain("at least one shot is required"));
    }
    if !(config.noise_power >= 0.0) {
        return Err(Error::domain("noise power must be non-negative"));
    }
    let sigma = (config.noise_power / 2.0).sqrt();
    let shots: Result<Vec<Vec<Complex64>>> = (0..config.shots as u64)
        .into_par_iter()
        .map(|i| {
            let mut shot = simulate_shot(cavity, pulse, &config.grid, config.seed, i)?;
            if sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(NOISE_STREAM_BIT | i);
                for s in shot.iter_mut() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *s += Complex64::new(re * sigma, im * sigma);
                }
            }
            Ok(shot)
        })
        .collect();
    ShotEnsemble::new(
        config.grid.dt,
        config.t_m,
        config.seed,
        pulse.t_p,
        config.noise_power,
        shots?,
    )
}

/// Centered boxcar of width `t_m`; the window shrinks symmetrically near the
/// ends of the record so every output sample is an unbiased local mean.
pub fn apply_detector_bandwidth<T>(series: &[T], t_m: f64, dt: f64) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let h = ((t_m / dt - 1.0) / 2.0).round().max(0.0) as usize;
    if h == 0 {
        return series.to_vec();
    }
    let mut prefix = Vec::with_capacity(series.len() + 1);
    prefix.push(T::default());
    let mut acc = T::default();
    for &x in series {
        acc = acc + x;
        prefix.push(acc);
    }
    let len = series.len();
    (0..len)
        .map(|k| {
            let half = h.min(k).min(len - 1 - k);
            let lo = k - half;
            let hi = k + half + 1;
            (prefix[hi] + prefix[lo] * -1.0) * (1.0 / (hi - lo) as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::TWO_PI;

    fn quiet(kappa_ext: f64) -> CavityModel {
        CavityModel::new(TWO_PI * 4.55e9, TWO_PI * 100.0, kappa_ext, JitterSpectrum::None).unwrap()
    }

    #[test]
    fn decoupled_port_passes_input() {
        let c = quiet(0.0);
        let p = Pulse::new(3.0, 1e-3, 0.0).unwrap();
        let g = SimulationGrid::new(1e-5, 3e-3);
        let out = simulate_shot(&c, &p, &g, 1, 0).unwrap();
        for (k, v) in out.iter().enumerate() {
            assert_eq!(*v, Complex64::new(p.a_in(k as f64 * g.dt), 0.0));
        }
    }

    #[test]
    fn steady_state_amplitude() {
        let k = TWO_PI * 100.0;
        let ke = 0.3 * k;
        let c = quiet(ke);
        let p = Pulse::new(2.0, 40.0 / k, 0.0).unwrap();
        let g = SimulationGrid::new(1e-5, p.t_p * 0.999);
        let out = simulate_shot(&c, &p, &g, 0, 0).unwrap();
        let last = *out.last().unwrap();
        let a = (last - p.a0) / ke.sqrt();
        let t = (out.len() - 1) as f64 * g.dt;
        let steady = 2.0 * p.a0 * ke.sqrt() / k;
        let expected = steady * (1.0 - (-0.5 * k * t).exp());
        assert!((a.norm() - expected).abs() < 1e-9 * expected);
        assert!((a.norm() - steady).abs() < 1e-6 * steady);
    }

    #[test]
    fn free_decay_matches_closed_form() {
        let k = TWO_PI * 100.0;
        let ke = 0.1 * k;
        let c = quiet(ke);
        let det = 0.7 * k;
        let p = Pulse::new(1.0, 2.3e-4, det).unwrap();
        let g = SimulationGrid::new(1e-5, 0.02);
        let out = simulate_shot(&c, &p, &g, 0, 0).unwrap();
        let lam = Complex64::new(-0.5 * k, det);
        let a_tp = p.a0 * ke.sqrt() / lam * (1.0 - (lam * p.t_p).exp());
        for (n, v) in out.iter().enumerate() {
            let t = n as f64 * g.dt;
            if t <= p.t_p {
                continue;
            }
            let expected = ke.sqrt() * a_tp.norm() * (-0.5 * k * (t - p.t_p)).exp();
            assert!((v.norm() - expected).abs() <= 1e-6 * expected, "t={t}");
        }
    }

    #[test]
    fn lossless_port_re_emits_input_energy() {
        let k = TWO_PI * 100.0;
        let c = quiet(k);
        let p = Pulse::new(1.0, 2.0 / k, 0.0).unwrap();
        let g = SimulationGrid::new(2e-6, 40.0 / k);
        let out = simulate_shot(&c, &p, &g, 0, 0).unwrap();
        let e_out: f64 = out.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.dt;
        let e_in = p.a0 * p.a0 * p.t_p;
        assert!((e_out / e_in - 1.0).abs() < 1e-3, "{}", e_out / e_in);
    }

    #[test]
    fn rejects_coarse_steps() {
        let c = quiet(1.0);
        let p = Pulse::new(1.0, 1e-4, 0.0).unwrap();
        let g = SimulationGrid::new(1e-3, 1e-2);
        assert!(matches!(simulate_shot(&c, &p, &g, 0, 0), Err(Error::UnstableStep(_))));
        let mut jc = c.clone();
        jc.jitter = JitterSpectrum::Lorentzian {
            s0_per_hz: 1e-20,
            corner_hz: 10.0,
            f_max_hz: 1e4,
        };
        let g = SimulationGrid::new(1e-4, 1e-2);
        assert!(matches!(simulate_shot(&jc, &p, &g, 0, 0), Err(Error::UnstableStep(_))));
    }

    #[test]
    fn ensemble_is_deterministic() {
        let mut c = quiet(TWO_PI * 10.0);
        c.jitter = JitterSpectrum::lorentzian_with_rms(3.0, 50.0, 5e3, c.omega0, c.kappa_tot).unwrap();
        let p = Pulse::new(1.0, 5e-6, 0.0).unwrap();
        let cfg = EnsembleConfig {
            shots: 8,
            grid: SimulationGrid {
                dt: 1e-5,
                duration: 2e-3,
                jitter_components: 32,
            },
            t_m: 1e-5,
            noise_power: 1e-3,
            seed: 42,
        };
        let a = simulate_ensemble(&c, &p, &cfg).unwrap();
        let b = simulate_ensemble(&c, &p, &cfg).unwrap();
        assert_eq!(a, b);
        let other = simulate_ensemble(&c, &p, &EnsembleConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn boxcar_identity_and_constant() {
        let x: Vec<f64> = (0..10).map(|k| k as f64 * 0.3).collect();
        assert_eq!(apply_detector_bandwidth(&x, 1e-3, 1e-3), x);
        let c = vec![Complex64::new(2.0, -1.0); 25];
        for v in apply_detector_bandwidth(&c, 7e-3, 1e-3) {
            assert!((v - Complex64::new(2.0, -1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn boxcar_on_decaying_power() {
        let kappa = 1000.0;
        let dt = 1e-6;
        let t_m = 2.0 / kappa + dt;
        let x: Vec<f64> = (0..20000).map(|k| (-kappa * k as f64 * dt).exp()).collect();
        let y = apply_detector_bandwidth(&x, t_m, dt);
        let k = 10000;
        let ratio = y[k] / x[k];
        let width = t_m;
        let expected = (kappa * width / 2.0).sinh() / (kappa * width / 2.0);
        assert!((ratio / expected - 1.0).abs() < 1e-4, "{ratio} vs {expected}");
    }

    #[test]
    fn boxcar_on_decaying_field() {
        let kappa = 1000.0;
        let dt = 1e-6;
        let t_m = 2.0 / kappa + dt;
        let x: Vec<f64> = (0..20000).map(|k| (-0.5 * kappa * k as f64 * dt).exp()).collect();
        let y = apply_detector_bandwidth(&x, t_m, dt);
        let ratio = y[10000] / x[10000];
        let u = kappa * t_m / 4.0;
        assert!((ratio / (u.sinh() / u) - 1.0).abs() < 1e-4);
    }
}
