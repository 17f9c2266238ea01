//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints one PASS/FAIL line; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cavloss::consts::TWO_PI;
use cavloss::inversion::{
    polynomial_sensitivity, sensitivity_map, solve, LossSystem, Measurement, SensitivityAssumptions,
    SensitivityGrid,
};
use cavloss::participation::{PolynomialBasis, ProfileModel};
use cavloss::ringdown::{
    bandwidth_contrast, extract_kappa_ext, fit_decay, measure_coupling, simulate_ensemble, AveragingMode,
    CavityModel, CouplingCalibration, CouplingMethod, EnsembleConfig, JitterSpectrum, Pulse, SimulationGrid,
};
use cavloss::separation::{
    coherence_limit, intersect, magnetic_bounds, single_sample_bounds, ConstraintLine, DipperConstraint,
    StriplineConstraint,
};
use cavloss::tls::{fit_tls, low_power_boundary, PowerPoint, PowerSweep, SweepPosition, TlsFit, TlsFitOptions};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn c1_jitter_invariance() -> Outcome {
    let start = Instant::now();
    let kappa = TWO_PI * 100.0;
    let jitter = JitterSpectrum::lorentzian_with_rms(100.0, 50.0, 5e3, TWO_PI * 4.55e9, kappa).unwrap();
    let cavity = CavityModel::new(TWO_PI * 4.55e9, kappa, 0.1 * kappa, jitter).unwrap();
    let pulse = Pulse::new(1e3, 1e-5, 0.0).unwrap();
    let dt = 2e-6;
    let cfg = EnsembleConfig {
        shots: 200,
        grid: SimulationGrid::new(dt, 5.0 / kappa * 1.6),
        t_m: dt,
        noise_power: 1e-2,
        seed: 1,
    };
    let ens = simulate_ensemble(&cavity, &pulse, &cfg).unwrap();
    let t0 = pulse.t_p + 2.0 * dt;
    let power = fit_decay(&ens, (t0, t0 + 5.0 / kappa), AveragingMode::PowerAverage).unwrap();
    let field = fit_decay(&ens, (t0, t0 + 40e-6), AveragingMode::FieldAverage).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let err = rel(power.rate, kappa);
    let ratio = field.rate / kappa;
    outcome(
        err < 0.01 && ratio >= 5.0 && elapsed < 60.0,
        format!(
            "power-average κ error {:.3}% (< 1%), field/power rate ratio {ratio:.1} (>= 5), {elapsed:.1} s (< 60 s)",
            100.0 * err
        ),
    )
}

fn c2_bandwidth_contrast() -> Outcome {
    let kappa = TWO_PI * 100.0;
    let cavity = CavityModel::new(TWO_PI * 4.55e9, kappa, 0.1 * kappa, JitterSpectrum::None).unwrap();
    let pulse = Pulse::new(1e3, 1e-5, 0.0).unwrap();
    let dt = 5e-6;
    let cfg = EnsembleConfig {
        shots: 1,
        grid: SimulationGrid::new(dt, 12.0 / kappa),
        t_m: dt,
        noise_power: 0.0,
        seed: 2,
    };
    let ens = simulate_ensemble(&cavity, &pulse, &cfg).unwrap();
    let end = 12.0 / kappa;
    let mut worst_c: f64 = 0.0;
    let mut worst_r: f64 = 0.0;
    for x in [0.1, 0.5, 1.0, 2.0] {
        let t_m = x / kappa;
        let window = (pulse.t_p + t_m, end - t_m);
        let reference = fit_decay(&ens, window, AveragingMode::PowerAverage).unwrap();
        let f = fit_decay(&ens.with_t_m(t_m).unwrap(), window, AveragingMode::PowerAverage).unwrap();
        let c = f.contrast / reference.amplitude_at(f.t_ref);
        worst_c = worst_c.max(rel(c, bandwidth_contrast(kappa, t_m)));
        worst_r = worst_r.max(rel(f.rate, reference.rate));
    }
    outcome(
        worst_c < 0.02 && worst_r < 0.01,
        format!(
            "worst contrast error {:.3}% (< 2%), worst rate error {:.3}% (< 1%)",
            100.0 * worst_c,
            100.0 * worst_r
        ),
    )
}

/// Output power just after a resonant square pulse of amplitude `a0`.
fn square_pulse_ring_power(a0: f64, kappa_ext: f64, kappa: f64, t_p: f64) -> f64 {
    let amp = 2.0 * kappa_ext.sqrt() / kappa * a0 * (1.0 - (-kappa * t_p / 2.0).exp());
    kappa_ext * amp * amp
}

fn c3_coupling_round_trip() -> Outcome {
    let kappa = TWO_PI * 100.0;
    let mut worst: f64 = 0.0;
    for k in 0..=12 {
        let ratio = 1e-3 * (0.5f64 / 1e-3).powf(k as f64 / 12.0);
        for kt in [1e-3, 0.1, 1.0, 3.0] {
            let t_p = kt / kappa;
            let ke = ratio * kappa;
            let p_ring = square_pulse_ring_power(1.0, ke, kappa, t_p);
            let got = extract_kappa_ext(1.0, p_ring, kappa, t_p, CouplingMethod::Exact).unwrap();
            worst = worst.max(rel(got, ke));
        }
    }
    // Simulated round trip through the fit and boxcar correction.
    let mut worst_sim: f64 = 0.0;
    for ratio in [1e-3, 0.1, 0.5] {
        let cavity = CavityModel::new(TWO_PI * 4.55e9, kappa, ratio * kappa, JitterSpectrum::None).unwrap();
        let pulse = Pulse::new(1e3, 2e-4, 0.0).unwrap();
        let ens = simulate_ensemble(
            &cavity,
            &pulse,
            &EnsembleConfig {
                shots: 1,
                grid: SimulationGrid::new(5e-6, 8.0 / kappa),
                t_m: 5e-5,
                noise_power: 0.0,
                seed: 3,
            },
        )
        .unwrap();
        let fit = fit_decay(&ens, (pulse.t_p + 1e-4, 6.0 / kappa), AveragingMode::PowerAverage).unwrap();
        let m = measure_coupling(&ens, &pulse, &fit, &CouplingCalibration::default(), CouplingMethod::Exact)
            .unwrap();
        worst_sim = worst_sim.max(rel(m.kappa_ext, ratio * kappa));
    }
    let t_p = 1e-3 / kappa;
    let p_ring = square_pulse_ring_power(1.0, 0.1 * kappa, kappa, t_p);
    let exact = extract_kappa_ext(1.0, p_ring, kappa, t_p, CouplingMethod::Exact).unwrap();
    let short = extract_kappa_ext(1.0, p_ring, kappa, t_p, CouplingMethod::ShortPulse).unwrap();
    let agree = rel(short, exact);
    outcome(
        worst < 0.02 && worst_sim < 0.02 && agree < 1e-3,
        format!(
            "closed-form worst error {:.2e}, simulated worst error {:.3}% (< 2%), exact vs short-pulse {:.3}% (< 0.1%)",
            worst,
            100.0 * worst_sim,
            100.0 * agree
        ),
    )
}

fn c4_low_power_boundary() -> Outcome {
    let fit = TlsFit {
        q_hp_inv: 0.0,
        q_sat_inv: 1.0,
        n_c: 1.0,
        alpha: 0.5,
        q_hp_inv_err: 0.0,
        q_sat_inv_err: 0.0,
        n_c_err: 0.0,
        alpha_err: 0.0,
        chi2: 0.0,
        reduced_chi2: 0.0,
        residuals: vec![],
        points_used: 0,
        points_excluded: 0,
    };
    let x = low_power_boundary(0.1, &fit).unwrap();
    outcome(
        rel(x, 5.5e-2) < 0.01,
        format!("n/n_c = {x:.4e} (expected 5.5e-2 within 1%)"),
    )
}

fn c5_tls_recovery() -> Outcome {
    let (hp, sat, nc, alpha) = (4e-8, 6e-8, 3e8, 0.40);
    let opts = TlsFitOptions {
        n_cutoff: None,
        ..TlsFitOptions::default()
    };
    let mut covered = 0;
    let trials = 100;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<PowerPoint> = (0..30)
            .map(|i| {
                let n = 10f64.powf(4.0 + 8.0 * i as f64 / 29.0);
                let q = cavloss::tls::tls_loss(n, hp, sat, nc, alpha);
                let e: f64 = rng.sample(StandardNormal);
                PowerPoint {
                    n_photons: n,
                    q_inv: q * (1.0 + 0.01 * e),
                    sigma: 0.01 * q,
                }
            })
            .collect();
        let sweep = PowerSweep::new(points, SweepPosition::Inserted).unwrap();
        let Ok(f) = fit_tls(&sweep, &opts) else { continue };
        let ok = (f.q_hp_inv - hp).abs() <= 3.0 * f.q_hp_inv_err
            && (f.q_sat_inv - sat).abs() <= 3.0 * f.q_sat_inv_err
            && (f.n_c.ln() - nc.ln()).abs() <= 3.0 * f.n_c_err / f.n_c
            && (f.alpha - alpha).abs() <= 3.0 * f.alpha_err;
        covered += ok as usize;
    }
    outcome(
        covered >= 95,
        format!("{covered}/{trials} trials recover all four parameters within 3σ (>= 95)"),
    )
}

const TABLE_VI: [(&str, f64, f64, f64, f64); 3] = [
    ("thin", 3.6e-5, 1.7e-2, 170e-9, 13e-9),
    ("thick", 1.2e-4, 5.66e-2, 88e-9, 6e-9),
    ("hemex", 4.9e-4, 7.1e-2, 19e-9, 6e-9),
];

fn table_vi_system(noise: f64, seed: u64) -> LossSystem {
    let omega_ref = TWO_PI * 4.55e9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tables = Vec::new();
    let mut meas = Vec::new();
    for (id, pw, pi, q_sub, _) in TABLE_VI {
        let t = ProfileModel::sapphire_like(id, pw, pi, 30, 0.0).table().unwrap();
        let m = t
            .rows()
            .iter()
            .map(|r| {
                let q = r.p_cond_normalized(omega_ref) * 2e-5 + r.p_ma * 33e-3 + r.p_bulk * q_sub;
                let e: f64 = rng.sample(StandardNormal);
                Measurement {
                    q_inv: q * (1.0 + noise * e),
                    sigma: 0.01 * q,
                }
            })
            .collect();
        tables.push(t);
        meas.push(m);
    }
    LossSystem::new(tables, meas, omega_ref).unwrap()
}

fn c6_inversion() -> Outcome {
    let truth = [2e-5, 33e-3, 170e-9, 88e-9, 19e-9];
    let exact = solve(&table_vi_system(0.0, 0)).unwrap();
    let worst = exact.q.iter().zip(truth).map(|(a, b)| rel(*a, b)).fold(0.0, f64::max);
    let triplet_within = |sol: &cavloss::inversion::LossSolution| {
        TABLE_VI
            .iter()
            .enumerate()
            .all(|(k, (_, _, _, q_sub, tol))| (sol.q[2 + k] - q_sub).abs() <= *tol)
    };
    let noisy = solve(&table_vi_system(0.01, 6)).unwrap();
    let parts: Vec<String> = TABLE_VI
        .iter()
        .enumerate()
        .map(|(k, (id, _, _, _, tol))| format!("{id} {:.1}(±{:.0})", noisy.q[2 + k] * 1e9, tol * 1e9))
        .collect();
    let seeds = 100;
    let robust = (0..seeds)
        .filter(|&s| triplet_within(&solve(&table_vi_system(0.01, 1000 + s)).unwrap()))
        .count();
    outcome(
        worst < 1e-10 && triplet_within(&noisy),
        format!(
            "noiseless worst relative error {worst:.1e} (< 1e-10); 1% noise q_sub [ppb]: {}; triplet within in {robust}/{seeds} further seeds",
            parts.join(", ")
        ),
    )
}

fn c7_sensitivity_floor() -> Outcome {
    let table = ProfileModel::sapphire_like("thick_EFG", 1.2e-4, 5.66e-2, 30, 1.67e-5).table().unwrap();
    let map = sensitivity_map(
        &table,
        &SensitivityAssumptions {
            q_cond_inv: 2e-5,
            q_ma_inv: 3e-2,
            fractional_error: 0.01,
            omega_ref: table.withdrawn_omega(),
        },
        &SensitivityGrid::default(),
    )
    .unwrap();
    let floor = map.min_ci();
    let basis = PolynomialBasis {
        order: 2,
        omega_ref: TWO_PI * 4.55e9,
        y: vec![9.18e-9, 26e-9, 240e-9],
        y_err: vec![0.05e-9, 3e-9, 40e-9],
        x_cond: vec![43.92e-6, 0.0, 0.0],
        x_cond_err: vec![0.01e-6, 0.0, 0.0],
        x_ma: vec![249e-9, -300e-9, 15800e-9],
        x_ma_err: vec![1e-9, 60e-9, 900e-9],
    };
    // Withdrawn-sweep bounds on q_MA⁻¹ treated as a uniform interval.
    let sigma_ma = (38.2e-3 - 8.62e-3) / 12f64.sqrt();
    let p = polynomial_sensitivity(&basis, 3e-2, sigma_ma).unwrap();
    let terms = [p.term_y1, p.term_q_ma, p.term_x1_ma];
    let terms_ok = terms.iter().all(|t| (1e-9..=3e-9).contains(t));
    let total_ok = (3e-9..=10e-9).contains(&p.sigma);
    outcome(
        (2.5e-9..=1e-8).contains(&floor) && terms_ok && total_ok,
        format!(
            "map floor 2σ = {:.2} ppb (2.5–10); polynomial terms {:.2}/{:.2}/{:.2} ppb (1–3 each), total {:.1} ppb",
            floor * 1e9,
            terms[0] * 1e9,
            terms[1] * 1e9,
            terms[2] * 1e9,
            p.sigma * 1e9
        ),
    )
}

fn c8_separation() -> Outcome {
    let (thin, thick) = (7.13e-5, 1.67e-5);
    let (qb, qs) = (63e-9, 15e-4);
    let a = ConstraintLine::new(qb + thin * qs, 13e-9, thin).unwrap();
    let b = ConstraintLine::new(qb + thick * qs, 6e-9, thick).unwrap();
    let exact = intersect(&a, &b).unwrap();
    let exact_ok = rel(exact.x.value, qb) < 1e-9 && rel(exact.y.value, qs) < 1e-9;
    let a = ConstraintLine::new(170e-9, 13e-9, thin).unwrap();
    let b = ConstraintLine::new(88e-9, 6e-9, thick).unwrap();
    let measured = intersect(&a, &b).unwrap();
    let measured_ok = (measured.x.value - qb).abs() <= 8e-9 && (measured.y.value - qs).abs() <= 3e-4;
    let hemex = single_sample_bounds(&ConstraintLine::new(19e-9, 6e-9, thick).unwrap()).unwrap();
    let hemex_ok = rel(hemex.x.upper, 19e-9) < 1e-12 && (10.5e-4..11.5e-4).contains(&hemex.y.upper);
    outcome(
        exact_ok && measured_ok && hemex_ok,
        format!(
            "exact ({:.3e}, {:.3e}); from 170(13)/88(6): ({:.1}±{:.1} ppb, {:.1}±{:.1}e-4); HEMEX bounds (<{:.0} ppb, <{:.1}e-4)",
            exact.x.value,
            exact.y.value,
            measured.x.value * 1e9,
            measured.x.sigma * 1e9,
            measured.y.value * 1e4,
            measured.y.sigma * 1e4,
            hemex.x.upper * 1e9,
            hemex.y.upper * 1e4
        ),
    )
}

fn c9_magnetic() -> Outcome {
    let m = magnetic_bounds(
        &DipperConstraint {
            q_bulk_inv: 63e-9,
            e_to_h_ratio: 200.0,
        },
        &StriplineConstraint {
            q: 8e6,
            p_e: 0.40,
            p_h: 0.31,
        },
    )
    .unwrap();
    let q_h = m.q_h_max.unwrap_or(f64::INFINITY);
    let transmon = coherence_limit(0.025, q_h, 4e9).unwrap().q().unwrap_or(f64::INFINITY);
    let ok = rel(m.q_e_min, 6.1e-8) < 0.03
        && rel(m.q_e_max, 6.3e-8) < 0.03
        && rel(q_h, 3.3e-7) < 0.03
        && rel(transmon, 1.2e8) < 0.03;
    outcome(
        ok,
        format!(
            "q_E ∈ [{:.3e}, {:.3e}], q_H ≤ {:.3e}, transmon magnetic Q > {:.3e} (each within 3%)",
            m.q_e_min, m.q_e_max, q_h, transmon
        ),
    )
}

fn c10_coherence() -> Outcome {
    let l = coherence_limit(0.8, 63e-9, 4e9).unwrap();
    let (q, t1) = (l.q().unwrap(), l.t1_s().unwrap());
    outcome(
        rel(q, 19.8e6) < 0.005 && rel(t1, 790e-6) < 0.005 && q <= 20e6 && t1 <= 800e-6,
        format!("Q = {:.3e}, T1 = {:.1} μs", q, t1 * 1e6),
    )
}

fn run_pipeline(out: &Path) -> bool {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/efg_pair/config.json");
    Command::new(env!("CARGO_BIN_EXE_cavloss"))
        .args(["pipeline", "--config"])
        .arg(&fixture)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (PathBuf::from(p.file_name().unwrap()), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    if !(run_pipeline(&a) && run_pipeline(&b)) {
        return outcome(false, "pipeline run failed".into());
    }
    let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
    outcome(
        !fa.is_empty() && fa == fb,
        format!("{} artifacts compared byte-for-byte", fa.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("jitter invariance of energy decay", c1_jitter_invariance),
        ("detector bandwidth contrast", c2_bandwidth_contrast),
        ("coupling round trip", c3_coupling_round_trip),
        ("low-power boundary", c4_low_power_boundary),
        ("TLS fit recovery", c5_tls_recovery),
        ("inversion oracle equivalence", c6_inversion),
        ("sensitivity floor", c7_sensitivity_floor),
        ("bulk/surface separation", c8_separation),
        ("magnetic bounding", c9_magnetic),
        ("coherence limits", c10_coherence),
        ("pipeline determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += !o.pass as usize;
        println!(
            "[{}] criterion {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
