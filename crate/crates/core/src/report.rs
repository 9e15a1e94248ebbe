//! Report assembly, deterministic JSON/CSV rendering and binomial
//! intervals for rate displays.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::stats::normal_quantile;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Round to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Ten significant digits, shortest round-trip form.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x, 10);
    if r == 0.0 {
        // collapse -0
        return "0.0".into();
    }
    format!("{r:?}")
}

/// Wilson score interval for `successes / trials` at confidence `level`.
/// `None` when `trials` is zero or the inputs are inconsistent.
pub fn binomial_ci(successes: u64, trials: u64, level: f64) -> Option<(f64, f64)> {
    if trials == 0 || successes > trials || !(level > 0.0 && level < 1.0) {
        return None;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z = normal_quantile(0.5 + level / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    Some((lo, hi))
}

/// A headed table of preformatted cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<I, S>(header: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub tool_version: String,
    pub input_sha256: Option<String>,
    pub config: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// Taken from `SOURCE_DATE_EPOCH` only, so reruns stay byte-identical.
    pub timestamp: Option<String>,
}

impl Metadata {
    pub fn new() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub metadata: Metadata,
    /// Named result sections such as `rate_bounds` or `chisq`.
    pub sections: BTreeMap<String, Value>,
    /// Plot-data tables, one file each in a CSV bundle.
    #[serde(skip)]
    pub tables: BTreeMap<String, CsvTable>,
}

impl AuditReport {
    pub fn new(metadata: Metadata) -> Self {
        Self {
            metadata,
            ..Self::default()
        }
    }

    pub fn add_section<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.sections
            .insert(name.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn add_table(&mut self, name: &str, table: CsvTable) {
        self.tables.insert(name.to_string(), table);
    }
}

fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            serde_json::Number::from_f64(round_sig(x, 10)).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and floats rounded to ten significant digits.
pub fn render_json(report: &AuditReport) -> Result<String> {
    let v = canonical(serde_json::to_value(report)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    CsvBundle,
}

/// Write the report into `dir`: `report.json`, or one `<table>.csv` per
/// plot-data table. Returns the written paths.
pub fn render(report: &AuditReport, format: Format, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    match format {
        Format::Json => {
            let path = dir.join("report.json");
            std::fs::write(&path, render_json(report)?)?;
            Ok(vec![path])
        }
        Format::CsvBundle => report
            .tables
            .iter()
            .map(|(name, t)| {
                let path = dir.join(format!("{name}.csv"));
                t.write(&path)?;
                Ok(path)
            })
            .collect(),
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(2.0 / 3.0), "0.6666666667");
        assert_eq!(fmt_num(-0.0), "0.0");
        assert_eq!(fmt_num(1234567.891234), "1234567.891");
    }

    #[test]
    fn wilson_edges() {
        let (lo, hi) = binomial_ci(0, 10, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.35);
        let (a, b) = binomial_ci(3, 10, 0.95).unwrap();
        let (c, d) = binomial_ci(7, 10, 0.95).unwrap();
        assert!((a - (1.0 - d)).abs() < 1e-12 && (b - (1.0 - c)).abs() < 1e-12);
        assert_eq!(binomial_ci(1, 0, 0.95), None);
    }

    #[test]
    fn empty_report_is_metadata_only() {
        let r = AuditReport::new(Metadata {
            timestamp: None,
            ..Metadata::new()
        });
        let s = render_json(&r).unwrap();
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["metadata"]["schema_version"], 1);
        assert!(v["sections"].as_object().unwrap().is_empty());
        assert_eq!(render_json(&r).unwrap(), s);
    }
}
