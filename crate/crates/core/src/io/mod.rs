//! CSV and JSON persistence for sweeps, participation tables and ensembles.
//!
//! Every writer goes through [`write_atomic`], so a failed run never leaves a
//! half-written file behind.

mod ensemble;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::Measurement;
use crate::participation::{ParticipationRow, ParticipationTable};
use crate::tls::PowerPoint;

pub use ensemble::{read_ensemble, render_ensemble, write_ensemble, EnsembleSidecar};

/// Version stamped into every artifact.
pub const SCHEMA_VERSION: u32 = 1;

pub const PARTICIPATION_HEADER: [&str; 8] =
    ["sample_id", "z_m", "omega_rad_s", "p_cond", "p_MA", "p_bulk", "p_SA", "p_bulk_H"];
pub const POWER_HEADER: [&str; 3] = ["n_photons", "Q_inv", "sigma"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Write `bytes` to a sibling temporary file, then rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "artifact".to_string());
    let tmp: PathBuf = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err(path))
}

/// Pretty JSON with a trailing newline.
pub fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("cannot serialise: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, json_text(value)?.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

/// Shortest round-trip representation in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

struct CsvTable {
    header: Vec<String>,
    /// `(line, fields)`
    rows: Vec<(usize, Vec<String>)>,
}

fn read_csv(path: &Path) -> Result<CsvTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse_err(path, 1, format!("{other:?}")),
        })?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(parse_err(path, 1, "missing header"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    Ok(CsvTable { header, rows })
}

impl CsvTable {
    fn column(&self, path: &Path, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, 1, format!("missing column `{name}`")))
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn number(path: &Path, line: usize, fields: &[String], idx: usize, name: &str) -> Result<f64> {
    let raw = fields
        .get(idx)
        .ok_or_else(|| parse_err(path, line, format!("missing value for `{name}`")))?;
    let v: f64 = raw
        .parse()
        .map_err(|_| parse_err(path, line, format!("`{name}` = `{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("`{name}` must be finite")));
    }
    Ok(v)
}

fn measurement(path: &Path, line: usize, q_inv: f64, sigma: f64) -> Result<Measurement> {
    if q_inv < 0.0 {
        return Err(parse_err(path, line, format!("negative Q_inv {q_inv}")));
    }
    if !(sigma > 0.0) {
        return Err(parse_err(path, line, format!("sigma must be positive, got {sigma}")));
    }
    Ok(Measurement { q_inv, sigma })
}

/// Inverse-variance combination of repeated measurements.
pub fn merge_measurements(items: &[Measurement]) -> Measurement {
    let wsum: f64 = items.iter().map(|m| m.sigma.powi(-2)).sum();
    let q = items.iter().map(|m| m.q_inv * m.sigma.powi(-2)).sum::<f64>() / wsum;
    Measurement {
        q_inv: q,
        sigma: wsum.sqrt().recip(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSweep {
    pub table: ParticipationTable,
    pub measurements: Vec<Measurement>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Position,
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    Position(Vec<PositionSweep>),
    Power(Vec<PowerPoint>),
}

pub fn ingest_sweep(path: &Path, kind: SweepKind) -> Result<Sweep> {
    match kind {
        SweepKind::Position => read_position_sweeps(path).map(Sweep::Position),
        SweepKind::Power => read_power_sweep(path).map(Sweep::Power),
    }
}

struct RawRow {
    line: usize,
    sample: String,
    row: ParticipationRow,
    meas: Option<Measurement>,
}

fn read_rows(path: &Path, with_measurements: bool) -> Result<Vec<RawRow>> {
    let t = read_csv(path)?;
    let cols: Vec<usize> = PARTICIPATION_HEADER[..7]
        .iter()
        .map(|n| t.column(path, n))
        .collect::<Result<_>>()?;
    let h_col = t.optional("p_bulk_H");
    let meas_cols = if with_measurements {
        Some((t.column(path, "Q_inv")?, t.column(path, "sigma")?))
    } else {
        None
    };
    t.rows
        .iter()
        .map(|(line, f)| {
            let line = *line;
            let get = |k: usize| number(path, line, f, cols[k], PARTICIPATION_HEADER[k]);
            let sample = f.get(cols[0]).cloned().unwrap_or_default();
            if sample.is_empty() {
                return Err(parse_err(path, line, "empty sample_id"));
            }
            let z = f.get(cols[1]).filter(|s| !s.is_empty()).map(|_| get(1)).transpose()?;
            let mut row = ParticipationRow::new(get(2)?, get(3)?, get(4)?, get(5)?, get(6)?)
                .map_err(|e| parse_err(path, line, e.to_string()))?;
            if let Some(z) = z {
                row = row.with_position(z);
            }
            if let Some(hc) = h_col {
                if f.get(hc).is_some_and(|s| !s.is_empty()) {
                    let ph = number(path, line, f, hc, "p_bulk_H")?;
                    row = row.with_magnetic(ph).map_err(|e| parse_err(path, line, e.to_string()))?;
                }
            }
            let meas = match meas_cols {
                Some((qc, sc)) => Some(measurement(
                    path,
                    line,
                    number(path, line, f, qc, "Q_inv")?,
                    number(path, line, f, sc, "sigma")?,
                )?),
                None => None,
            };
            Ok(RawRow {
                line,
                sample,
                row,
                meas,
            })
        })
        .collect()
}

fn group_by_sample(rows: Vec<RawRow>) -> Vec<(String, Vec<RawRow>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<RawRow>> = BTreeMap::new();
    for r in rows {
        if !groups.contains_key(&r.sample) {
            order.push(r.sample.clone());
        }
        groups.entry(r.sample.clone()).or_default().push(r);
    }
    order
        .into_iter()
        .map(|k| {
            let v = groups.remove(&k).expect("grouped");
            (k, v)
        })
        .collect()
}

fn by_p_bulk(a: &ParticipationRow, b: &ParticipationRow) -> std::cmp::Ordering {
    a.p_bulk.partial_cmp(&b.p_bulk).expect("finite participations")
}

/// Read participation tables, one per `sample_id`, in first-seen order.
pub fn read_participation_tables(path: &Path) -> Result<Vec<ParticipationTable>> {
    group_by_sample(read_rows(path, false)?)
        .into_iter()
        .map(|(id, rows)| {
            let line = rows[0].line;
            ParticipationTable::new(id, rows.into_iter().map(|r| r.row).collect())
                .map_err(|e| parse_err(path, line, e.to_string()))
        })
        .collect()
}

/// Read position sweeps. Rows of one sample at the same position (same `z_m`,
/// or same participations when no position is given) are merged.
pub fn read_position_sweeps(path: &Path) -> Result<Vec<PositionSweep>> {
    let mut out = Vec::new();
    for (id, rows) in group_by_sample(read_rows(path, true)?) {
        let line = rows[0].line;
        let mut merged: Vec<(ParticipationRow, Vec<Measurement>)> = Vec::new();
        for r in rows {
            let m = r.meas.expect("measurement columns present");
            let same = |x: &ParticipationRow| match (x.z, r.row.z) {
                (Some(a), Some(b)) => a == b,
                _ => *x == r.row,
            };
            match merged.iter_mut().find(|(x, _)| same(x)) {
                Some((_, ms)) => ms.push(m),
                None => merged.push((r.row, vec![m])),
            }
        }
        merged.sort_by(|a, b| by_p_bulk(&a.0, &b.0));
        let measurements = merged.iter().map(|(_, ms)| merge_measurements(ms)).collect();
        let table = ParticipationTable::new(id, merged.into_iter().map(|(r, _)| r).collect())
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        out.push(PositionSweep { table, measurements });
    }
    Ok(out)
}

/// Read a power sweep; repeated photon numbers are merged.
pub fn read_power_sweep(path: &Path) -> Result<Vec<PowerPoint>> {
    let t = read_csv(path)?;
    let cols: Vec<usize> = POWER_HEADER.iter().map(|n| t.column(path, n)).collect::<Result<_>>()?;
    let mut merged: Vec<(f64, Vec<Measurement>)> = Vec::new();
    for (line, f) in &t.rows {
        let n = number(path, *line, f, cols[0], "n_photons")?;
        if !(n > 0.0) {
            return Err(parse_err(path, *line, format!("n_photons must be positive, got {n}")));
        }
        let m = measurement(
            path,
            *line,
            number(path, *line, f, cols[1], "Q_inv")?,
            number(path, *line, f, cols[2], "sigma")?,
        )?;
        if m.q_inv == 0.0 {
            return Err(parse_err(path, *line, "Q_inv must be positive in a power sweep"));
        }
        match merged.iter_mut().find(|(x, _)| *x == n) {
            Some((_, ms)) => ms.push(m),
            None => merged.push((n, vec![m])),
        }
    }
    merged.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    Ok(merged
        .into_iter()
        .map(|(n, ms)| {
            let m = merge_measurements(&ms);
            PowerPoint {
                n_photons: n,
                q_inv: m.q_inv,
                sigma: m.sigma,
            }
        })
        .collect())
}

fn participation_fields(id: &str, r: &ParticipationRow) -> Vec<String> {
    vec![
        id.to_string(),
        r.z.map(fmt_f64).unwrap_or_default(),
        fmt_f64(r.omega),
        fmt_f64(r.p_cond),
        fmt_f64(r.p_ma),
        fmt_f64(r.p_bulk),
        fmt_f64(r.p_sa),
        fmt_f64(r.p_bulk_h),
    ]
}

/// Render rows as CSV text.
pub fn csv_text<S: AsRef<str>>(header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.iter().map(|h| h.as_ref()).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

pub fn write_participation_tables(path: &Path, tables: &[ParticipationTable]) -> Result<()> {
    let rows = tables
        .iter()
        .flat_map(|t| t.rows().iter().map(move |r| participation_fields(t.sample_id(), r)));
    write_atomic(path, csv_text(&PARTICIPATION_HEADER, rows).as_bytes())
}

pub fn write_position_sweeps(path: &Path, sweeps: &[PositionSweep]) -> Result<()> {
    let mut header: Vec<&str> = PARTICIPATION_HEADER.to_vec();
    header.extend(["Q_inv", "sigma"]);
    let rows = sweeps.iter().flat_map(|s| {
        s.table.rows().iter().zip(&s.measurements).map(move |(r, m)| {
            let mut f = participation_fields(s.table.sample_id(), r);
            f.push(fmt_f64(m.q_inv));
            f.push(fmt_f64(m.sigma));
            f
        })
    });
    write_atomic(path, csv_text(&header, rows).as_bytes())
}

pub fn write_power_sweep(path: &Path, points: &[PowerPoint]) -> Result<()> {
    let rows = points
        .iter()
        .map(|p| vec![fmt_f64(p.n_photons), fmt_f64(p.q_inv), fmt_f64(p.sigma)]);
    write_atomic(path, csv_text(&POWER_HEADER, rows).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::participation::ProfileModel;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn header_only_rejected() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "s.csv", "n_photons,Q_inv,sigma\n");
        match read_power_sweep(&p) {
            Err(Error::Parse { message, .. }) => assert_eq!(message, "no data rows"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_power_points_merge() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "s.csv", "n_photons,Q_inv,sigma\n1e5,2e-7,1e-9\n1e5,2e-7,1e-9\n1e7,1e-7,1e-9\n");
        let pts = read_power_sweep(&p).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[0].sigma - 1e-9 / 2f64.sqrt()).abs() < 1e-24);
        assert_eq!(pts[0].q_inv, 2e-7);
    }

    #[test]
    fn negative_values_name_the_line() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "s.csv", "n_photons,Q_inv,sigma\n1e5,2e-7,1e-9\n1e6,-2e-7,1e-9\n");
        match read_power_sweep(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let p = write(d.path(), "t.csv", "n_photons,Q_inv,sigma\n1e5,2e-7,0\n");
        assert!(matches!(read_power_sweep(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn position_sweep_round_trip_and_order() {
        let d = tempfile::tempdir().unwrap();
        let table = ProfileModel::sapphire_like("thin", 3.6e-5, 1.7e-2, 30, 7.13e-5).table().unwrap();
        let meas: Vec<Measurement> = (0..30).map(|i| Measurement { q_inv: 1e-7 + i as f64 * 1e-9, sigma: 1e-9 }).collect();
        let sweep = PositionSweep { table, measurements: meas };
        let p = d.path().join("pos.csv");
        write_position_sweeps(&p, std::slice::from_ref(&sweep)).unwrap();
        let back = read_position_sweeps(&p).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0], sweep);
        let pb: Vec<f64> = back[0].table.rows().iter().map(|r| r.p_bulk).collect();
        assert!(pb.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn missing_column_reported() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "s.csv", "n_photons,Q_inv\n1e5,2e-7\n");
        assert!(matches!(read_power_sweep(&p), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_power_sweep(&d.path().join("absent.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("sub").join("a.json");
        write_json(&p, &serde_json::json!({"schema": 1})).unwrap();
        let names: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("a.json")]);
    }
}
