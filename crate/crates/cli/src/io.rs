//! Statistic input files and atomic output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fnc_core::statistic::{Scale, Sidedness, StatisticVector};
use fnc_core::FncError;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Parsed `id,value` rows.
#[derive(Debug, PartialEq)]
pub struct StatisticTable {
    pub ids: Vec<String>,
    pub values: Vec<f64>,
    /// Scale named by the header, if any.
    pub header_scale: Option<Scale>,
}

fn scale_from_header(name: &str) -> Option<Scale> {
    match name.trim().to_ascii_lowercase().as_str() {
        "p" | "pvalue" | "p_value" | "pval" => Some(Scale::P),
        "z" | "zscore" | "z_score" => Some(Scale::Z),
        _ => None,
    }
}

/// Read a CSV with columns `id,p` or `id,z`. A header row is detected when the
/// second field of the first row is not a number.
pub fn read_statistics(path: &Path) -> Result<StatisticTable, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut table = StatisticTable { ids: Vec::new(), values: Vec::new(), header_scale: None };
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(i + 1, |p| p.line() as usize);
            parse_error(line, e.to_string())
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(parse_error(line, format!("expected 2 fields (id, value), found {}", record.len())));
        }
        let value = record[1].parse::<f64>();
        if i == 0 && value.is_err() {
            table.header_scale = scale_from_header(&record[1]);
            if table.header_scale.is_none() {
                return Err(parse_error(line, format!("unrecognized value column '{}'; use p or z", &record[1])));
            }
            continue;
        }
        let value = value.map_err(|_| parse_error(line, format!("'{}' is not a number", &record[1])))?;
        table.ids.push(record[0].to_string());
        table.values.push(value);
    }
    Ok(table)
}

fn parse_error(line: usize, msg: String) -> CliError {
    CliError::Core(FncError::Parse { line, msg })
}

impl StatisticTable {
    /// Scale precedence: explicit flag, then header, then p.
    pub fn into_vector(self, scale: Option<Scale>, sidedness: Sidedness) -> Result<StatisticVector, CliError> {
        let scale = scale.or(self.header_scale).unwrap_or(Scale::P);
        Ok(StatisticVector::new(self.values, scale, sidedness)?.with_ids(self.ids)?)
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Write `path` through a temporary file in the same directory and rename it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut buf)?;
        buf.flush().map_err(|e| CliError::Output(e.to_string()))?;
    }
    tmp.persist(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn write_json_atomic<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(FncError::from)?;
        writeln!(w).map_err(|e| CliError::Output(e.to_string()))
    })
}

/// `dir/name.ext` sibling of `path`, e.g. `out.csv` → `out.summary.json`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}
