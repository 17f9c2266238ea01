//! Plot-ready CSV tables.
//!
//! | file | columns |
//! |------|---------|
//! | `fig2.csv` | `q_bulk_inv,q_SA_inv,q_sub_inv,ci,frac_err` |
//! | `fig2_contours.csv` | `level,polyline,q_bulk_inv,q_SA_inv` |
//! | `fig3.csv` | `label,kind,n_photons,Q_inv,sigma,used` (`kind` is `data` or `model`) |
//! | `fig4a.csv` | `sample_id,p_bulk,Q_inv,sigma,model` |
//! | `fig4b.csv` | `record,label,q_bulk_inv,q_SA_inv,sigma_bulk,sigma_SA` (`record` is `line` or `intersection`) |
//! | `fig5.csv` | `label,p,q_inv,f_Hz,Q_limit,T1_s` (`inf` when unbounded) |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::artifacts::*;
use crate::error::{Error, Result};
use crate::io::{csv_text, fmt_f64, read_json, write_atomic};

const MODEL_POINTS: usize = 200;
const LINE_POINTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4a,
    Fig4b,
    Fig5,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig2, Figure::Fig3, Figure::Fig4a, Figure::Fig4b, Figure::Fig5];

    /// The artifact each figure is drawn from.
    pub fn source(self) -> &'static str {
        match self {
            Figure::Fig2 => SENSITIVITY_JSON,
            Figure::Fig3 => POWER_JSON,
            Figure::Fig4a => INVERSION_JSON,
            Figure::Fig4b | Figure::Fig5 => SEPARATION_JSON,
        }
    }
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig4a" => Ok(Figure::Fig4a),
            "fig4b" => Ok(Figure::Fig4b),
            "fig5" => Ok(Figure::Fig5),
            _ => Err(Error::Config(format!("unknown figure `{s}`"))),
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_else(|| "inf".to_string())
}

pub fn fig2(a: &SensitivityArtifact) -> Vec<(String, String)> {
    let grid = a.map.points.iter().map(|p| {
        vec![
            fmt_f64(p.q_bulk_inv),
            fmt_f64(p.q_sa_inv),
            fmt_f64(p.q_sub_inv),
            fmt_f64(p.ci),
            fmt_f64(p.frac_err),
        ]
    });
    let contours = a.map.contours.iter().flat_map(|c| {
        c.polylines.iter().enumerate().flat_map(move |(k, line)| {
            line.iter().map(move |(x, y)| {
                vec![
                    fmt_f64(c.level),
                    k.to_string(),
                    fmt_f64(10f64.powf(*x)),
                    fmt_f64(10f64.powf(*y)),
                ]
            })
        })
    });
    vec![
        (
            "fig2.csv".into(),
            csv_text(&["q_bulk_inv", "q_SA_inv", "q_sub_inv", "ci", "frac_err"], grid),
        ),
        (
            "fig2_contours.csv".into(),
            csv_text(&["level", "polyline", "q_bulk_inv", "q_SA_inv"], contours),
        ),
    ]
}

pub fn fig3(a: &PowerArtifact) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    for s in &a.sweeps {
        for p in &s.points {
            let used = !(s.position == crate::tls::SweepPosition::Inserted
                && a.n_cutoff_photons.is_some_and(|c| p.n_photons > c));
            rows.push(vec![
                s.label.clone(),
                "data".into(),
                fmt_f64(p.n_photons),
                fmt_f64(p.q_inv),
                fmt_f64(p.sigma),
                (used as u8).to_string(),
            ]);
        }
        let lo = s.points.iter().map(|p| p.n_photons).fold(f64::INFINITY, f64::min);
        let hi = s.points.iter().map(|p| p.n_photons).fold(0.0, f64::max);
        if lo > 0.0 && hi >= lo {
            for k in 0..MODEL_POINTS {
                let n = lo * (hi / lo).powf(k as f64 / (MODEL_POINTS - 1) as f64);
                rows.push(vec![
                    s.label.clone(),
                    "model".into(),
                    fmt_f64(n),
                    fmt_f64(s.fit.eval(n)),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }
    vec![(
        "fig3.csv".into(),
        csv_text(&["label", "kind", "n_photons", "Q_inv", "sigma", "used"], rows),
    )]
}

pub fn fig4a(a: &InversionArtifact) -> Vec<(String, String)> {
    let rows = a.rows.iter().map(|r| {
        vec![
            r.sample_id.clone(),
            fmt_f64(r.p_bulk),
            fmt_f64(r.q_inv),
            fmt_f64(r.sigma),
            fmt_f64(r.model),
        ]
    });
    vec![(
        "fig4a.csv".into(),
        csv_text(&["sample_id", "p_bulk", "Q_inv", "sigma", "model"], rows),
    )]
}

pub fn fig4b(a: &SeparationArtifact) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    for l in &a.lines {
        for (x, y) in l.line.polyline(LINE_POINTS) {
            rows.push(vec![
                "line".into(),
                l.label.clone(),
                fmt_f64(x),
                fmt_f64(y),
                String::new(),
                String::new(),
            ]);
        }
    }
    if let Some(p) = &a.intersection {
        rows.push(vec![
            "intersection".into(),
            if p.clipped { "clipped" } else { "" }.into(),
            fmt_f64(p.x.value),
            fmt_f64(p.y.value),
            fmt_f64(p.x.sigma),
            fmt_f64(p.y.sigma),
        ]);
    }
    vec![(
        "fig4b.csv".into(),
        csv_text(
            &["record", "label", "q_bulk_inv", "q_SA_inv", "sigma_bulk", "sigma_SA"],
            rows,
        ),
    )]
}

pub fn fig5(a: &SeparationArtifact) -> Vec<(String, String)> {
    let rows = a.coherence.iter().map(|c| {
        vec![
            c.label.clone(),
            fmt_f64(c.p),
            fmt_f64(c.q_inv),
            fmt_f64(c.f_hz),
            opt(c.limit.q()),
            opt(c.limit.t1_s()),
        ]
    });
    vec![(
        "fig5.csv".into(),
        csv_text(&["label", "p", "q_inv", "f_Hz", "Q_limit", "T1_s"], rows),
    )]
}

fn load<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<T> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::Config(format!(
            "missing upstream artifact {}",
            path.display()
        )));
    }
    read_json(&path)
}

/// Render a figure's CSV files from the artifacts already in `dir`.
pub fn render_figure(dir: &Path, figure: Figure) -> Result<Vec<(String, String)>> {
    Ok(match figure {
        Figure::Fig2 => fig2(&load(dir, SENSITIVITY_JSON)?),
        Figure::Fig3 => fig3(&load(dir, POWER_JSON)?),
        Figure::Fig4a => fig4a(&load(dir, INVERSION_JSON)?),
        Figure::Fig4b => fig4b(&load(dir, SEPARATION_JSON)?),
        Figure::Fig5 => fig5(&load(dir, SEPARATION_JSON)?),
    })
}

/// Write a figure's CSV files next to the artifacts they are drawn from.
pub fn emit_figure_data(dir: &Path, figure: Figure) -> Result<Vec<PathBuf>> {
    let files = render_figure(dir, figure)?;
    let mut out = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        out.push(path);
    }
    Ok(out)
}
