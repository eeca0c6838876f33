use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiments::{Fig2Data, Fig3Data, ResultBundle, Table1Data, WaistData};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

/// One row of a tidy per-figure table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TidyRow {
    pub x: f64,
    pub series: String,
    pub y: f64,
    pub yerr: f64,
}

fn row(x: f64, series: impl Into<String>, y: f64, yerr: f64) -> TidyRow {
    TidyRow {
        x,
        series: series.into(),
        y,
        yerr,
    }
}

/// The plottable curves of a bundle.
pub fn tidy_rows(bundle: &ResultBundle) -> Result<Vec<TidyRow>> {
    let data = bundle.data.clone();
    let mut rows = Vec::new();
    match bundle.experiment.as_str() {
        "fig2" => {
            let d: Fig2Data = serde_json::from_value(data)?;
            for t in &d.targets {
                for (ion, curve) in t.ions.iter().enumerate() {
                    let series = format!("target_{}/ion_{}", t.target, if ion == 0 { "A" } else { "B" });
                    for (i, &x) in t.durations.iter().enumerate() {
                        rows.push(row(x, series.clone(), curve.bright[i], curve.stderr[i]));
                    }
                }
            }
        }
        "fig3" => {
            let d: Fig3Data = serde_json::from_value(data)?;
            for (name, c) in [("site_1", &d.site_1), ("site_2", &d.site_2)] {
                for (i, &x) in c.starts.iter().enumerate() {
                    rows.push(row(x, name, c.bright[i], c.stderr[i]));
                }
            }
        }
        "waist" => {
            let d: WaistData = serde_json::from_value(data)?;
            rows.push(row(0.0, "pi_time", d.pi_time_a, 0.0));
            rows.push(row(1.0, "pi_time", d.pi_time_b, 0.0));
            rows.push(row(2.0, "pi_time", d.pi_time_c, 0.0));
            rows.push(row(0.0, "waist", d.estimate.waist, 0.5 * d.estimate.spread));
        }
        "table1" => {
            let d: Table1Data = serde_json::from_value(data)?;
            for (i, r) in d.rows.iter().enumerate() {
                let e = &r.ion_a.estimate;
                rows.push(row(i as f64, "fidelity_A", e.fidelity, e.half_width()));
                let e = &r.ion_b.estimate;
                rows.push(row(i as f64, "fidelity_B", e.fidelity, e.half_width()));
            }
        }
        other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
    }
    Ok(rows)
}

/// CSV with a header row; numbers carry 17 significant digits so they
/// parse back to the same `f64`.
pub fn to_csv(rows: &[TidyRow]) -> String {
    let mut out = String::from("x,series,y,yerr\n");
    for r in rows {
        let _ = writeln!(out, "{:.16e},{},{:.16e},{:.16e}", r.x, r.series, r.y, r.yerr);
    }
    out
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Writes `<experiment>.json` and/or `<experiment>_scan.csv` into `dir`.
pub fn write_bundle(dir: &Path, bundle: &ResultBundle, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.json() {
        let path = dir.join(format!("{}.json", bundle.experiment));
        write_atomic(&path, &(serde_json::to_string_pretty(bundle)? + "\n"))?;
        written.push(path);
    }
    if format.csv() {
        let path = dir.join(format!("{}_scan.csv", bundle.experiment));
        write_atomic(&path, &to_csv(&tidy_rows(bundle)?))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_bundle(path: &Path) -> Result<ResultBundle> {
    let text = fs::read_to_string(path).map_err(|source| Error::ReadFile {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
