use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ScenarioConfig;
use super::sim::ResultRow;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = ["profile", "snr_c_db", "th_a", "th_b", "th_c", "th_sys", "stage", "slots", "seed"];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Writes rows as CSV (LF line endings, shortest round-trip float formatting).
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.profile.name().to_string(),
            r.snr_c_db.to_string(),
            r.th[0].to_string(),
            r.th[1].to_string(),
            r.th[2].to_string(),
            r.th_sys.to_string(),
            r.stage.to_string(),
            r.slots.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::Io(format!("missing column {}", CSV_HEADER[i])))?;
    raw.parse().map_err(|_| Error::Io(format!("bad {} value {raw:?}", CSV_HEADER[i])))
}

/// Parses CSV written by [`write_csv`]. Standard errors are not stored in the CSV and come
/// back as `None`.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::Io("unexpected CSV header".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ResultRow {
                profile: parse(&rec, 0)?,
                snr_c_db: parse(&rec, 1)?,
                th: [parse(&rec, 2)?, parse(&rec, 3)?, parse(&rec, 4)?],
                th_sys: parse(&rec, 5)?,
                stage: parse(&rec, 6)?,
                slots: parse(&rec, 7)?,
                seed: parse(&rec, 8)?,
                th_sys_stderr: None,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct ManifestRow<'a> {
    profile: &'a str,
    snr_c_db: f64,
    stage: &'a str,
    th_sys_stderr: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    generator: String,
    config_hash: String,
    seed: u64,
    csv: String,
    config: &'a ScenarioConfig,
    rows: Vec<ManifestRow<'a>>,
}

/// Manifest path for a CSV path: `run.csv` becomes `run.manifest.json`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.json")
}

/// Writes the CSV and a JSON manifest holding the full config, its hash and the seed.
/// Returns the manifest path.
pub fn emit_results(rows: &[ResultRow], cfg: &ScenarioConfig, csv_path: &Path) -> Result<PathBuf> {
    write_csv(rows, File::create(csv_path)?)?;
    let manifest = Manifest {
        generator: format!("ncma-core {}", env!("CARGO_PKG_VERSION")),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        csv: csv_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        config: cfg,
        rows: rows
            .iter()
            .map(|r| ManifestRow {
                profile: r.profile.name(),
                snr_c_db: r.snr_c_db,
                stage: r.stage.name(),
                th_sys_stderr: r.th_sys_stderr,
            })
            .collect(),
    };
    let path = manifest_path(csv_path);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
