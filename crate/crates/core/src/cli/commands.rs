use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::artifacts::*;
use super::config::*;
use super::figures;
use crate::consts::TWO_PI;
use crate::error::{Error, Result};
use crate::inversion::{
    polynomial_sensitivity, sensitivity_map, solve, Bound, LossSystem, SensitivityAssumptions, SharedColumns,
};
use crate::io::{self, json_text, read_ensemble, read_participation_tables, read_position_sweeps, read_power_sweep};
use crate::participation::{fit_polynomial_basis, ParticipationTable, ProfileModel};
use crate::ringdown::{
    fit_decay, measure_coupling, simulate_ensemble, AveragingMode, CavityModel, CouplingCalibration,
    EnsembleConfig, Pulse, ShotEnsemble, SimulationGrid,
};
use crate::separation::{
    coherence_limit, intersect_with, magnetic_bounds, pcond_check, single_sample_bounds, ConstraintLine,
    DipperConstraint, LineKind, StriplineConstraint,
};
use crate::tls::{cavity_bounds, fit_tls, low_power_boundary, PowerSweep, SweepPosition, TlsFitOptions};

use super::Command;

/// Artifacts held in memory until the whole command has succeeded.
#[derive(Debug, Default)]
pub struct Staged {
    files: BTreeMap<String, String>,
}

impl Staged {
    pub fn text(&mut self, name: impl Into<String>, text: String) {
        self.files.insert(name.into(), text);
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.text(name, json_text(value)?);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.keys().cloned().collect()
    }

    pub fn commit(&self, dir: &Path) -> Result<()> {
        for (name, text) in &self.files {
            io::write_atomic(&dir.join(name), text.as_bytes())?;
        }
        Ok(())
    }
}

/// Result of a successful command.
#[derive(Debug)]
pub struct Outcome {
    pub results: Map<String, Value>,
    pub staged: Staged,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out_dir: &'a Path,
    staged: Staged,
    results: Map<String, Value>,
}

impl Ctx<'_> {
    fn record<T: Serialize>(&mut self, key: &str, value: T) -> Result<()> {
        let v = serde_json::to_value(value).map_err(|e| Error::Config(e.to_string()))?;
        self.results.insert(key.to_string(), v);
        Ok(())
    }

    fn figure(&mut self, files: Vec<(String, String)>) {
        for (name, text) in files {
            self.staged.text(name, text);
        }
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::Config(format!("configuration has no `{name}` section")))
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
        })
    }
}

/// Check the inputs a command will read before any work starts.
fn check_inputs(cmd: Command, cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let all = cmd == Command::Pipeline;
    let stochastic = matches!(cmd, Command::Simulate) || (all && cfg.simulate.is_some());
    if stochastic {
        cfg.require_seed()?;
    }
    if cmd == Command::Simulate {
        section(&cfg.simulate, "simulate")?;
    }
    if cmd == Command::FitRingdown {
        let path = cfg
            .fit_ringdown
            .as_ref()
            .and_then(|f| f.ensemble.clone())
            .unwrap_or_else(|| out_dir.join(ENSEMBLE_JSON));
        require_file(&path)?;
    }
    if cmd == Command::FitPower || (all && cfg.fit_power.is_some()) {
        for s in &section(&cfg.fit_power, "fit_power")?.sweeps {
            require_file(&s.path)?;
        }
    }
    if cmd == Command::Invert || (all && cfg.invert.is_some()) {
        require_file(&section(&cfg.invert, "invert")?.sweeps)?;
    }
    if cmd == Command::Sensitivity || (all && cfg.sensitivity.is_some()) {
        let s = section(&cfg.sensitivity, "sensitivity")?;
        match (&s.participation, &s.profile) {
            (Some(p), _) => require_file(p)?,
            (None, Some(_)) => {}
            (None, None) => {
                return Err(Error::Config(
                    "sensitivity needs a `participation` file or a `profile`".into(),
                ))
            }
        }
    }
    if all && cfg.invert.is_none() && cfg.simulate.is_none() && cfg.fit_power.is_none() && cfg.sensitivity.is_none() {
        return Err(Error::Config("pipeline configuration has no stages".into()));
    }
    Ok(())
}

pub fn execute(cmd: Command, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome> {
    check_inputs(cmd, cfg, out_dir)?;
    let mut ctx = Ctx {
        cfg,
        out_dir,
        staged: Staged::default(),
        results: Map::new(),
    };
    match cmd {
        Command::Simulate => {
            simulate(&mut ctx)?;
        }
        Command::FitRingdown => {
            fit_ringdown(&mut ctx, None)?;
        }
        Command::FitPower => {
            fit_power(&mut ctx)?;
        }
        Command::Invert => {
            invert(&mut ctx)?;
        }
        Command::Sensitivity => sensitivity(&mut ctx)?,
        Command::Separate => separate(&mut ctx, None)?,
        Command::Pipeline => pipeline(&mut ctx)?,
    }
    Ok(Outcome {
        results: ctx.results,
        staged: ctx.staged,
    })
}

fn pipeline(ctx: &mut Ctx) -> Result<()> {
    if ctx.cfg.simulate.is_some() {
        let sim = simulate(ctx)?;
        fit_ringdown(ctx, Some(sim))?;
    }
    if ctx.cfg.fit_power.is_some() {
        fit_power(ctx)?;
    }
    let inversion = match ctx.cfg.invert {
        Some(_) => Some(invert(ctx)?),
        None => None,
    };
    if ctx.cfg.sensitivity.is_some() {
        sensitivity(ctx)?;
    }
    let has_lines = ctx.cfg.separate.as_ref().is_some_and(|s| !s.lines.is_empty());
    if inversion.is_some() || has_lines {
        separate(ctx, inversion.as_ref())?;
    }
    Ok(())
}

type Simulated = (ShotEnsemble, CavityModel, Pulse);

fn simulate(ctx: &mut Ctx) -> Result<Simulated> {
    let sc = section(&ctx.cfg.simulate, "simulate")?;
    let seed = ctx.cfg.require_seed()?;
    let cavity = CavityModel::new(sc.omega0(), sc.kappa_tot(), sc.kappa_ext(), sc.jitter_spectrum()?)?;
    let pulse = Pulse::new(sc.a0_sqrt_photons_per_s, sc.t_p_s, TWO_PI * sc.detuning_hz)?;
    let grid = SimulationGrid {
        dt: sc.dt_s,
        duration: sc.duration_s,
        jitter_components: sc.jitter_components,
    };
    let ens = simulate_ensemble(
        &cavity,
        &pulse,
        &EnsembleConfig {
            shots: sc.shots,
            grid,
            t_m: sc.t_m_s,
            noise_power: sc.noise_power_photons_per_s,
            seed,
        },
    )?;
    let (sidecar, csv) = io::render_ensemble(ENSEMBLE_CSV, &ens, Some(&cavity), Some(&pulse));
    ctx.staged.text(ENSEMBLE_CSV, csv);
    ctx.staged.json(ENSEMBLE_JSON, &sidecar)?;
    ctx.record(
        "simulate",
        json!({
            "shots": ens.len(),
            "samples": ens.samples(),
            "q_tot": cavity.q_tot(),
            "q_ext": cavity.q_ext(),
            "jitter_rms_linewidths": cavity.jitter.rms_linewidths(cavity.omega0, cavity.kappa_tot),
        }),
    )?;
    Ok((ens, cavity, pulse))
}

fn fit_ringdown(ctx: &mut Ctx, sim: Option<Simulated>) -> Result<RingdownArtifact> {
    let fc = ctx.cfg.fit_ringdown.clone().unwrap_or_default();
    let (ens, cavity, pulse) = match sim {
        Some((e, c, p)) => (e, Some(c), Some(p)),
        None => {
            let path = fc.ensemble.clone().unwrap_or_else(|| ctx.out_dir.join(ENSEMBLE_JSON));
            let (e, side) = read_ensemble(&path)?;
            (e, side.cavity, side.pulse)
        }
    };
    if ens.samples() < 2 {
        return Err(Error::domain("ensemble has fewer than two samples"));
    }
    let start = fc.window_start_s.unwrap_or(ens.pulse_end() + ens.t_m());
    let end = fc.window_end_s.unwrap_or(ens.time(ens.samples() - 1));
    let fits = fc
        .modes
        .iter()
        .map(|&m| fit_decay(&ens, (start, end), m))
        .collect::<Result<Vec<_>>>()?;
    let coupling = match (pulse, fits.iter().find(|f| f.mode == AveragingMode::PowerAverage)) {
        (Some(p), Some(f)) => Some(measure_coupling(
            &ens,
            &p,
            f,
            &CouplingCalibration {
                receiver_gain: fc.receiver_gain,
                compression: fc.compression,
            },
            fc.coupling_method,
        )?),
        _ => None,
    };
    let art = RingdownArtifact {
        schema: io::SCHEMA_VERSION,
        window_s: (start, end),
        fits,
        coupling,
        kappa_tot_true: cavity.map(|c| c.kappa_tot),
    };
    ctx.staged.json(RINGDOWN_JSON, &art)?;
    let rates: Map<String, Value> = art
        .fits
        .iter()
        .map(|f| {
            let key = match f.mode {
                AveragingMode::PowerAverage => "power_average",
                AveragingMode::FieldAverage => "field_average",
            };
            (key.to_string(), json!({"rate_per_s": f.rate, "rate_stderr": f.rate_stderr}))
        })
        .collect();
    ctx.record(
        "fit_ringdown",
        json!({
            "fits": rates,
            "kappa_ext": art.coupling.map(|c| c.kappa_ext),
            "kappa_tot_true": art.kappa_tot_true,
        }),
    )?;
    Ok(art)
}

fn fit_power(ctx: &mut Ctx) -> Result<PowerArtifact> {
    let fc = section(&ctx.cfg.fit_power, "fit_power")?;
    if fc.sweeps.is_empty() {
        return Err(Error::Config("fit_power lists no sweeps".into()));
    }
    let opts = TlsFitOptions {
        n_cutoff: fc.n_cutoff_photons,
        ..TlsFitOptions::default()
    };
    let mut sweeps = Vec::with_capacity(fc.sweeps.len());
    for sc in &fc.sweeps {
        let points = read_power_sweep(&sc.path)?;
        let sweep = PowerSweep::new(points, sc.position)?;
        let fit = fit_tls(&sweep, &opts)?;
        let low_power_n = low_power_boundary(fc.saturation_fraction_max, &fit)?;
        let bounds = match (sc.position, fc.p_cond, fc.p_ma) {
            (SweepPosition::Withdrawn, Some(pc), Some(pm)) => Some(cavity_bounds(&sweep, Some(&fit), pc, pm)?),
            _ => None,
        };
        sweeps.push(PowerSweepResult {
            label: sc.label.clone(),
            position: sc.position,
            points: sweep.points,
            fit,
            low_power_n,
            bounds,
        });
    }
    let art = PowerArtifact {
        schema: io::SCHEMA_VERSION,
        n_cutoff_photons: fc.n_cutoff_photons,
        sweeps,
    };
    ctx.staged.json(POWER_JSON, &art)?;
    ctx.figure(figures::fig3(&art));
    let summary: Vec<Value> = art
        .sweeps
        .iter()
        .map(|s| {
            json!({
                "label": s.label,
                "q_hp_inv": s.fit.q_hp_inv,
                "q_sat_inv": s.fit.q_sat_inv,
                "n_c": s.fit.n_c,
                "alpha": s.fit.alpha,
                "reduced_chi2": s.fit.reduced_chi2,
                "bounds": s.bounds,
            })
        })
        .collect();
    ctx.record("fit_power", summary)?;
    Ok(art)
}

fn invert(ctx: &mut Ctx) -> Result<InversionArtifact> {
    let ic = section(&ctx.cfg.invert, "invert")?;
    let sweeps = read_position_sweeps(&ic.sweeps)?;
    let omega_ref = match ic.f_ref_hz {
        Some(f) => TWO_PI * f,
        None => sweeps[0].table.withdrawn_omega(),
    };
    let tables: Vec<ParticipationTable> = sweeps.iter().map(|s| s.table.clone()).collect();
    let meas = sweeps.iter().map(|s| s.measurements.clone()).collect();
    let mut system = LossSystem::with_sharing(
        tables,
        meas,
        omega_ref,
        SharedColumns {
            cond: ic.shared_cond,
            ma: ic.shared_ma,
        },
    )?;
    for (name, (lo, hi)) in &ic.bounds {
        system.set_bound(name, *lo, hi.unwrap_or(Bound::default().upper))?;
    }
    let solution = solve(&system)?;
    let samples: Vec<SampleSubstrate> = sweeps
        .iter()
        .enumerate()
        .map(|(s, sw)| {
            let j = system.sub_index(s);
            let rows = sw.table.rows();
            SampleSubstrate {
                sample_id: sw.table.sample_id().to_string(),
                q_sub_inv: solution.q[j],
                sigma: solution.sigma(j),
                sa_to_bulk_ratio: rows.iter().map(|r| r.p_sa / r.p_bulk).sum::<f64>() / rows.len() as f64,
            }
        })
        .collect();
    let rows: Vec<FitRow> = sweeps
        .iter()
        .flat_map(|sw| {
            sw.table
                .rows()
                .iter()
                .zip(&sw.measurements)
                .map(move |(r, m)| (sw.table.sample_id(), r.p_bulk, *m))
        })
        .zip(&solution.residuals)
        .map(|((id, p_bulk, m), res)| FitRow {
            sample_id: id.to_string(),
            p_bulk,
            q_inv: m.q_inv,
            sigma: m.sigma,
            model: m.q_inv - res,
        })
        .collect();
    let polynomial = match &ic.polynomial {
        None => None,
        Some(pc) => {
            let sw = sweeps
                .iter()
                .find(|s| s.table.sample_id() == pc.sample_id)
                .ok_or_else(|| Error::Config(format!("no sample `{}` in {}", pc.sample_id, ic.sweeps.display())))?;
            let q: Vec<f64> = sw.measurements.iter().map(|m| m.q_inv).collect();
            let basis = fit_polynomial_basis(&sw.table, &q, pc.order, omega_ref)?;
            let ma = solution
                .index_of("q_MA_inv")
                .or_else(|| solution.index_of(&format!("q_MA_inv[{}]", pc.sample_id)))
                .expect("metal-air parameter present");
            Some(polynomial_sensitivity(&basis, solution.q[ma], pc.sigma_q_ma_inv)?)
        }
    };
    let art = InversionArtifact {
        schema: io::SCHEMA_VERSION,
        solution,
        samples,
        rows,
        polynomial,
    };
    ctx.staged.json(INVERSION_JSON, &art)?;
    ctx.figure(figures::fig4a(&art));
    let params: Map<String, Value> = art
        .solution
        .names
        .iter()
        .enumerate()
        .map(|(j, n)| (n.clone(), json!({"value": art.solution.q[j], "sigma": art.solution.sigma(j)})))
        .collect();
    ctx.record(
        "invert",
        json!({
            "parameters": params,
            "chi2": art.solution.chi2,
            "condition_number": art.solution.condition_number,
            "active_bounds": art.solution.active_bounds.iter().map(|b| b.name.clone()).collect::<Vec<_>>(),
            "polynomial": art.polynomial,
        }),
    )?;
    Ok(art)
}

fn sensitivity(ctx: &mut Ctx) -> Result<()> {
    let sc = section(&ctx.cfg.sensitivity, "sensitivity")?;
    let table = match (&sc.participation, &sc.profile) {
        (Some(path), _) => {
            let tables = read_participation_tables(path)?;
            match &sc.sample_id {
                Some(id) => tables
                    .into_iter()
                    .find(|t| t.sample_id() == id)
                    .ok_or_else(|| Error::Config(format!("no sample `{id}` in {}", path.display())))?,
                None => tables.into_iter().next().expect("reader rejects empty tables"),
            }
        }
        (None, Some(p)) => ProfileModel::sapphire_like(
            &p.sample_id,
            p.p_bulk_withdrawn,
            p.p_bulk_inserted,
            p.positions,
            p.sa_to_bulk_ratio,
        )
        .table()?,
        (None, None) => return Err(Error::Config("sensitivity needs a `participation` file or a `profile`".into())),
    };
    let assumptions = SensitivityAssumptions {
        q_cond_inv: sc.q_cond_inv,
        q_ma_inv: sc.q_ma_inv,
        fractional_error: sc.fractional_error,
        omega_ref: sc.f_ref_hz.map(|f| TWO_PI * f).unwrap_or_else(|| table.withdrawn_omega()),
    };
    let map = sensitivity_map(&table, &assumptions, &sc.grid.unwrap_or_default())?;
    let art = SensitivityArtifact {
        schema: io::SCHEMA_VERSION,
        sample_id: table.sample_id().to_string(),
        min_ci: map.min_ci(),
        map,
    };
    ctx.staged.json(SENSITIVITY_JSON, &art)?;
    ctx.figure(figures::fig2(&art));
    ctx.record(
        "sensitivity",
        json!({"sample_id": art.sample_id, "min_ci": art.min_ci, "points": art.map.points.len()}),
    )?;
    Ok(())
}

fn separate(ctx: &mut Ctx, inversion: Option<&InversionArtifact>) -> Result<()> {
    let sc = ctx.cfg.separate.clone().unwrap_or_default();
    let inputs: Vec<LineInput> = if !sc.lines.is_empty() {
        sc.lines.clone()
    } else {
        let loaded;
        let inv = match inversion {
            Some(i) => i,
            None => {
                let path: PathBuf = ctx.out_dir.join(INVERSION_JSON);
                if !path.is_file() {
                    return Err(Error::Config(format!(
                        "no `separate.lines` given and missing upstream artifact {}",
                        path.display()
                    )));
                }
                loaded = io::read_json::<InversionArtifact>(&path)?;
                &loaded
            }
        };
        inv.samples
            .iter()
            .map(|s| LineInput {
                label: s.sample_id.clone(),
                q_sub_inv: s.q_sub_inv.max(0.0),
                sigma: s.sigma,
                ratio: s.sa_to_bulk_ratio,
                ratio_sigma: 0.0,
            })
            .collect()
    };
    let mut lines = Vec::with_capacity(inputs.len());
    for l in &inputs {
        let line = ConstraintLine {
            q_sub_inv: l.q_sub_inv,
            sigma: l.sigma,
            ratio: l.ratio,
            ratio_sigma: l.ratio_sigma,
            kind: LineKind::Equality,
        };
        let bounds = single_sample_bounds(&line)
            .map_err(|e| Error::domain(format!("constraint line `{}`: {e}", l.label)))?;
        lines.push(LabelledLine {
            label: l.label.clone(),
            line,
            bounds,
        });
    }
    let intersection = match lines.as_slice() {
        [a, b, ..] => Some(intersect_with(&a.line, &b.line, sc.propagation)?),
        _ => None,
    };
    let magnetic = match &sc.magnetic {
        Some(m) => Some(magnetic_bounds(
            &DipperConstraint {
                q_bulk_inv: m.q_bulk_inv,
                e_to_h_ratio: m.dipper_e_to_h,
            },
            &StriplineConstraint {
                q: m.stripline_q,
                p_e: m.stripline_p_e,
                p_h: m.stripline_p_h,
            },
        )?),
        None => None,
    };
    let transmon = sc.transmon.unwrap_or_default();
    let mut coherence = Vec::new();
    let mut push = |label: String, p: f64, q_inv: f64, f_hz: f64| -> Result<()> {
        coherence.push(CoherenceEntry {
            label,
            p,
            q_inv,
            f_hz,
            limit: coherence_limit(p, q_inv, f_hz)?,
        });
        Ok(())
    };
    if let Some(pair) = &intersection {
        push("bulk".into(), transmon.p_bulk, pair.x.value, transmon.f_hz)?;
        if transmon.p_sa > 0.0 {
            push("surface".into(), transmon.p_sa, pair.y.value, transmon.f_hz)?;
        }
    } else {
        for l in &lines {
            push(format!("{} bulk bound", l.label), transmon.p_bulk, l.bounds.x.upper, transmon.f_hz)?;
        }
    }
    if let (Some(m), Some(mb)) = (&sc.magnetic, &magnetic) {
        if let (Some(p_h), Some(q_h)) = (m.transmon_p_bulk_h, mb.q_h_max) {
            push("magnetic".into(), p_h, q_h, transmon.f_hz)?;
        }
    }
    for c in &sc.coherence {
        push(c.label.clone(), c.p, c.q_inv, c.f_hz)?;
    }
    let pcond = match sc.pcond_check {
        Some(p) => Some(pcond_check(p.q_inserted_inv, p.q_withdrawn_inv)?),
        None => None,
    };
    let art = SeparationArtifact {
        schema: io::SCHEMA_VERSION,
        lines,
        intersection,
        magnetic,
        coherence,
        pcond_fractional_change: pcond,
    };
    ctx.staged.json(SEPARATION_JSON, &art)?;
    ctx.figure(figures::fig4b(&art));
    ctx.figure(figures::fig5(&art));
    let inter = art.intersection.map(|p| {
        json!({
            "q_bulk_inv": {"value": p.x.value, "sigma": p.x.sigma},
            "q_SA_inv": {"value": p.y.value, "sigma": p.y.sigma},
            "clipped": p.clipped,
        })
    });
    let limits: Vec<Value> = art
        .coherence
        .iter()
        .map(|c| json!({"label": c.label, "q": c.limit.q(), "t1_s": c.limit.t1_s()}))
        .collect();
    ctx.record(
        "separate",
        json!({
            "intersection": inter,
            "magnetic": art.magnetic,
            "coherence": limits,
            "pcond_fractional_change": art.pcond_fractional_change,
        }),
    )?;
    Ok(())
}
