//! Trial records and their CSV / JSON serialization.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Number, Value};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub experiment: String,
    /// Sub-case label within an experiment (scenario, loss family, cell);
    /// empty when there is only one kind of record.
    pub variant: String,
    pub config_hash: String,
    pub seed: u64,
    pub d_in: usize,
    pub d_out: usize,
    pub r: usize,
    pub metrics: BTreeMap<String, f64>,
}

impl TrialRecord {
    pub fn new(
        experiment: &str,
        variant: &str,
        config_hash: &str,
        seed: u64,
        d_in: usize,
        d_out: usize,
        r: usize,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            variant: variant.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            d_in,
            d_out,
            r,
            metrics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn metric(&self, name: &str) -> f64 {
        self.metrics.get(name).copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(HarnessError::Config(format!("unknown format `{other}` (csv, json)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

const FIXED_COLUMNS: [&str; 7] = ["experiment", "variant", "config_hash", "seed", "d_in", "d_out", "r"];

/// Sorted metric names shared by every record.
fn metric_names(records: &[TrialRecord]) -> std::result::Result<Vec<String>, String> {
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let names: Vec<String> = first.metrics.keys().cloned().collect();
    for (i, rec) in records.iter().enumerate() {
        if !rec.metrics.keys().eq(names.iter()) {
            return Err(format!("record {i} has a different metric set"));
        }
        if let Some((name, v)) = rec.metrics.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("record {i}: metric {name} = {v} is not finite"));
        }
    }
    Ok(names)
}

/// Seventeen significant digits, enough to round-trip any `f64`.
fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv(records: &[TrialRecord]) -> std::result::Result<String, String> {
    let names = metric_names(records)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let header: Vec<&str> = FIXED_COLUMNS.iter().copied().chain(names.iter().map(String::as_str)).collect();
    w.write_record(&header).map_err(|e| e.to_string())?;
    for rec in records {
        let mut row = vec![
            rec.experiment.clone(),
            rec.variant.clone(),
            rec.config_hash.clone(),
            rec.seed.to_string(),
            rec.d_in.to_string(),
            rec.d_out.to_string(),
            rec.r.to_string(),
        ];
        row.extend(rec.metrics.values().map(|&v| format_real(v)));
        w.write_record(&row).map_err(|e| e.to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| e.to_string())?;
    String::from_utf8(bytes).map_err(|e| e.to_string())
}

pub fn from_csv(text: &str) -> std::result::Result<Vec<TrialRecord>, String> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    if header.len() < FIXED_COLUMNS.len() || header[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err("unexpected header".into());
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        let int = |i: usize| row[i].parse::<u64>().map_err(|e| format!("column {}: {e}", header[i]));
        let mut rec =
            TrialRecord::new(&row[0], &row[1], &row[2], int(3)?, int(4)? as usize, int(5)? as usize, int(6)? as usize);
        for (i, name) in header.iter().enumerate().skip(FIXED_COLUMNS.len()) {
            let v: f64 = row[i].parse().map_err(|e| format!("column {name}: {e}"))?;
            rec.metrics.insert(name.clone(), v);
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn to_json(records: &[TrialRecord]) -> std::result::Result<String, String> {
    metric_names(records)?;
    let rows: Vec<Value> = records
        .iter()
        .map(|rec| {
            let mut obj = Map::new();
            obj.insert("experiment".into(), Value::String(rec.experiment.clone()));
            obj.insert("variant".into(), Value::String(rec.variant.clone()));
            obj.insert("config_hash".into(), Value::String(rec.config_hash.clone()));
            obj.insert("seed".into(), Value::from(rec.seed));
            obj.insert("d_in".into(), Value::from(rec.d_in));
            obj.insert("d_out".into(), Value::from(rec.d_out));
            obj.insert("r".into(), Value::from(rec.r));
            for (name, &v) in &rec.metrics {
                let n = Number::from_f64(v).expect("metrics are finite");
                obj.insert(name.clone(), Value::Number(n));
            }
            Value::Object(obj)
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&Value::Array(rows)).map_err(|e| e.to_string())?;
    text.push('\n');
    Ok(text)
}

pub fn from_json(text: &str) -> std::result::Result<Vec<TrialRecord>, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let rows = value.as_array().ok_or("expected a JSON array")?;
    rows.iter()
        .map(|row| {
            let obj = row.as_object().ok_or("expected an object")?;
            let text = |k: &str| obj.get(k).and_then(Value::as_str).map(String::from).ok_or(format!("missing {k}"));
            let int = |k: &str| obj.get(k).and_then(Value::as_u64).ok_or(format!("missing {k}"));
            let mut rec = TrialRecord::new(
                &text("experiment")?,
                &text("variant")?,
                &text("config_hash")?,
                int("seed")?,
                int("d_in")? as usize,
                int("d_out")? as usize,
                int("r")? as usize,
            );
            for (k, v) in obj {
                if FIXED_COLUMNS.contains(&k.as_str()) {
                    continue;
                }
                rec.metrics.insert(k.clone(), v.as_f64().ok_or(format!("{k} is not a number"))?);
            }
            Ok(rec)
        })
        .collect()
}

pub fn render(records: &[TrialRecord], format: Format) -> std::result::Result<String, String> {
    match format {
        Format::Csv => to_csv(records),
        Format::Json => to_json(records),
    }
}

/// Writes `records` to `path`, creating parent directories.
pub fn emit_report(records: &[TrialRecord], path: &Path, format: Format) -> Result<()> {
    let text = render(records, format).map_err(|message| HarnessError::Format { path: path.to_path_buf(), message })?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn read_report(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => from_json(&text),
        _ => from_csv(&text),
    };
    parsed.map_err(|message| HarnessError::Format { path: path.to_path_buf(), message })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(seed: u64) -> TrialRecord {
        TrialRecord::new("verify-lsq", "d8-r2", "abc", seed, 8, 8, 2)
            .with("gap", 0.1 + 0.2)
            .with("alpha", -1.0 / 3.0)
            .with("tiny", 5e-324)
    }

    #[test]
    fn empty_outputs() {
        assert_eq!(to_csv(&[]).unwrap(), "experiment,variant,config_hash,seed,d_in,d_out,r\n");
        assert_eq!(to_json(&[]).unwrap(), "[]\n");
    }

    #[test]
    fn one_record_one_row_sorted_metrics() {
        let csv = to_csv(&[sample(1)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].ends_with(",alpha,gap,tiny"));
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn csv_and_json_round_trip_exactly() {
        let recs = vec![sample(1), sample(2)];
        assert_eq!(from_csv(&to_csv(&recs).unwrap()).unwrap(), recs);
        assert_eq!(from_json(&to_json(&recs).unwrap()).unwrap(), recs);
    }

    #[test]
    fn mismatched_or_non_finite_metrics_are_refused() {
        let odd = TrialRecord::new("x", "", "h", 0, 1, 1, 1).with("other", 1.0);
        assert!(to_csv(&[sample(1), odd]).is_err());
        let bad = TrialRecord::new("x", "", "h", 0, 1, 1, 1).with("v", f64::NAN);
        assert!(to_json(&[bad]).is_err());
    }

    #[test]
    fn quoting_follows_rfc4180() {
        let rec = TrialRecord::new("x", "a,b \"c\"", "h", 0, 1, 1, 1).with("v", 1.0);
        let csv = to_csv(std::slice::from_ref(&rec)).unwrap();
        assert!(csv.contains("\"a,b \"\"c\"\"\""));
        assert_eq!(from_csv(&csv).unwrap(), vec![rec]);
    }
}
