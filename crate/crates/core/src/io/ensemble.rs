use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{csv_text, fmt_f64, read_csv, read_json, write_atomic, write_json, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::ringdown::{CavityModel, Pulse, ShotEnsemble};

/// JSON description stored next to the sample CSV of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSidecar {
    pub schema: u32,
    pub dt_s: f64,
    pub t_m_s: f64,
    pub seed: u64,
    pub pulse_end_s: f64,
    pub noise_power: f64,
    pub shots: usize,
    pub samples: usize,
    pub data_file: String,
    #[serde(default)]
    pub cavity: Option<CavityModel>,
    #[serde(default)]
    pub pulse: Option<Pulse>,
}

fn data_path(json_path: &Path) -> PathBuf {
    json_path.with_extension("csv")
}

/// Render the sample CSV (`shot,t_s,re,im`) and its sidecar, naming the
/// CSV `data_file`.
pub fn render_ensemble(
    data_file: &str,
    ens: &ShotEnsemble,
    cavity: Option<&CavityModel>,
    pulse: Option<&Pulse>,
) -> (EnsembleSidecar, String) {
    let rows = ens.shots().iter().enumerate().flat_map(|(i, shot)| {
        shot.iter().enumerate().map(move |(k, a)| {
            vec![
                i.to_string(),
                fmt_f64(ens.time(k)),
                fmt_f64(a.re),
                fmt_f64(a.im),
            ]
        })
    });
    let text = csv_text(&["shot", "t_s", "re", "im"], rows);
    let sidecar = EnsembleSidecar {
        schema: SCHEMA_VERSION,
        dt_s: ens.dt(),
        t_m_s: ens.t_m(),
        seed: ens.seed(),
        pulse_end_s: ens.pulse_end(),
        noise_power: ens.noise_power(),
        shots: ens.len(),
        samples: ens.samples(),
        data_file: data_file.to_string(),
        cavity: cavity.cloned(),
        pulse: pulse.copied(),
    };
    (sidecar, text)
}

/// Write `<stem>.json` and `<stem>.csv`.
pub fn write_ensemble(
    json_path: &Path,
    ens: &ShotEnsemble,
    cavity: Option<&CavityModel>,
    pulse: Option<&Pulse>,
) -> Result<EnsembleSidecar> {
    let csv_path = data_path(json_path);
    let name = csv_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (sidecar, text) = render_ensemble(&name, ens, cavity, pulse);
    write_atomic(&csv_path, text.as_bytes())?;
    write_json(json_path, &sidecar)?;
    Ok(sidecar)
}

pub fn read_ensemble(json_path: &Path) -> Result<(ShotEnsemble, EnsembleSidecar)> {
    let side: EnsembleSidecar = read_json(json_path)?;
    let dir = json_path.parent().unwrap_or(Path::new("."));
    let csv_path = dir.join(&side.data_file);
    let t = read_csv(&csv_path)?;
    let cols: Vec<usize> = ["shot", "re", "im"]
        .iter()
        .map(|n| t.column(&csv_path, n))
        .collect::<Result<_>>()?;
    let mut shots: Vec<Vec<Complex64>> = vec![Vec::with_capacity(side.samples); side.shots];
    for (line, f) in &t.rows {
        let parse = |k: usize| -> Result<f64> { super::number(&csv_path, *line, f, cols[k], ["shot", "re", "im"][k]) };
        let shot = parse(0)?;
        if shot < 0.0 || shot.fract() != 0.0 || shot as usize >= side.shots {
            return Err(Error::Parse {
                path: csv_path.clone(),
                line: *line,
                message: format!("shot index {shot} outside 0..{}", side.shots),
            });
        }
        shots[shot as usize].push(Complex64::new(parse(1)?, parse(2)?));
    }
    if shots.iter().any(|s| s.len() != side.samples) {
        return Err(Error::Parse {
            path: csv_path,
            line: 0,
            message: format!("expected {} samples per shot", side.samples),
        });
    }
    let ens = ShotEnsemble::new(side.dt_s, side.t_m_s, side.seed, side.pulse_end_s, side.noise_power, shots)?;
    Ok((ens, side))
}
