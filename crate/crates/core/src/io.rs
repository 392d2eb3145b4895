//! On-disk artifacts: per-chain sample CSVs, JSON documents and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::sampler::{ChainDiagnostics, PosteriorSamples};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Version string recorded in manifests: crate version plus the source
/// revision when the build could see one.
pub fn version_string() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("MRFCOX_GIT_REV"))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Self-describing record written next to every command's outputs. It holds
/// no timing or host information, so reruns reproduce it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command arguments (input and output paths, mode flags).
    pub args: serde_json::Value,
    /// Effective configuration after all overrides.
    pub config: RunConfig,
    /// Command-specific records such as derived seeds.
    pub details: serde_json::Value,
}

impl Manifest {
    pub fn new(
        command: &str,
        args: serde_json::Value,
        config: &RunConfig,
        details: serde_json::Value,
    ) -> Self {
        Self {
            tool: "mrfcox".into(),
            version: version_string(),
            command: command.into(),
            args,
            config: config.clone(),
            details,
        }
    }
}

fn fmt_row<'a>(values: impl Iterator<Item = &'a f64>) -> Vec<String> {
    values.map(|v| v.to_string()).collect()
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))?;
    write_atomic(path, &bytes)
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

fn parse_cell<T: std::str::FromStr>(path: &Path, row: usize, col: &str, cell: &str) -> Result<T> {
    cell.parse().map_err(|_| Error::Parse {
        path: path.display().to_string(),
        row,
        column: col.to_string(),
        message: format!("cannot parse `{cell}`"),
    })
}

fn parse_matrix<T: std::str::FromStr>(path: &Path) -> Result<(Vec<String>, Vec<Vec<T>>)> {
    let (header, rows) = read_rows(path)?;
    let parsed = rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .zip(&header)
                .map(|(cell, col)| parse_cell(path, r + 1, col, cell))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((header, parsed))
}

pub fn chain_dir(root: &Path, chain_id: u64) -> PathBuf {
    root.join(format!("chain_{}", chain_id + 1))
}

/// Writes `beta.csv`, `gamma.csv`, `h.csv`, `trace.csv` and `chain.json`.
pub fn write_samples(dir: &Path, samples: &PosteriorSamples, feature_names: &[String]) -> Result<()> {
    create_dir(dir)?;
    let names = feature_names.to_vec();
    write_rows(
        &dir.join("beta.csv"),
        &names,
        samples.beta_draws.iter().map(|b| fmt_row(b.iter())),
    )?;
    write_rows(
        &dir.join("gamma.csv"),
        &names,
        samples
            .gamma_draws
            .iter()
            .map(|g| g.iter().map(|&x| u8::from(x).to_string()).collect()),
    )?;
    let k = samples.h_draws.first().map_or(0, Vec::len);
    let h_names: Vec<String> = (1..=k).map(|i| format!("h{i}")).collect();
    write_rows(
        &dir.join("h.csv"),
        &h_names,
        samples.h_draws.iter().map(|h| fmt_row(h.iter())),
    )?;
    let trace_header = ["draw", "log_lik", "model_size"].map(String::from);
    write_rows(
        &dir.join("trace.csv"),
        &trace_header,
        samples
            .loglik_trace
            .iter()
            .zip(&samples.model_size_trace)
            .enumerate()
            .map(|(l, (ll, m))| vec![(l + 1).to_string(), ll.to_string(), m.to_string()]),
    )?;
    write_json(&dir.join("chain.json"), &samples.diagnostics)
}

/// Reads back what [`write_samples`] wrote; also returns the feature names.
pub fn read_samples(dir: &Path) -> Result<(PosteriorSamples, Vec<String>)> {
    let (names, beta_draws) = parse_matrix::<f64>(&dir.join("beta.csv"))?;
    let (gamma_names, gamma_raw) = parse_matrix::<u8>(&dir.join("gamma.csv"))?;
    let (_, h_draws) = parse_matrix::<f64>(&dir.join("h.csv"))?;
    let (_, trace) = parse_matrix::<f64>(&dir.join("trace.csv"))?;
    let diagnostics: ChainDiagnostics = read_json(&dir.join("chain.json"))?;
    let lens = [beta_draws.len(), gamma_raw.len(), h_draws.len(), trace.len()];
    if gamma_names != names || lens.iter().any(|&l| l != lens[0]) {
        return Err(Error::Format {
            path: dir.display().to_string(),
            message: "sample files disagree on features or draw counts".into(),
        });
    }
    let gamma_draws = gamma_raw
        .into_iter()
        .map(|g| g.into_iter().map(|x| x != 0).collect())
        .collect();
    let loglik_trace = trace.iter().map(|r| r[1]).collect();
    let model_size_trace = trace.iter().map(|r| r[2] as usize).collect();
    Ok((
        PosteriorSamples {
            beta_draws,
            gamma_draws,
            h_draws,
            loglik_trace,
            model_size_trace,
            diagnostics,
        },
        names,
    ))
}

/// Chain directories under a fit directory, in chain order.
pub fn list_chain_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut found: Vec<(u64, PathBuf)> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let id = name.strip_prefix("chain_")?.parse().ok()?;
            Some((id, e.path()))
        })
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no chain_* directories under {}",
            root.display()
        )));
    }
    Ok(found.into_iter().map(|(_, p)| p).collect())
}
