use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Number, Value};

pub const SCHEMA_VERSION: u64 = 1;

/// Everything needed to reproduce an output file.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub command: String,
    pub args: Vec<String>,
    pub sigma: Option<String>,
    pub seed: Option<u64>,
}

impl Manifest {
    pub fn to_json(&self) -> Value {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        json!({
            "command": self.command,
            "args": self.args,
            "sigma": self.sigma,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "timestamp": timestamp,
        })
    }
}

/// 17 significant digits; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(format!("{x:.16e}").parse::<Number>().expect("valid number"))
    } else {
        Value::Null
    }
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn csv_num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        Some(v) if v.is_nan() => "nan".into(),
        Some(v) if v > 0.0 => "inf".into(),
        Some(_) => "-inf".into(),
        None => String::new(),
    }
}

/// One row of the moment table shared by `moments` and `simulate`.
#[derive(Debug, Clone, Default)]
pub struct Row {
    pub order: usize,
    pub limit: Option<f64>,
    pub finite_formula: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub empirical_mean: Option<f64>,
    pub empirical_stderr: Option<f64>,
    pub flags: Vec<&'static str>,
}

impl Row {
    pub fn to_json(&self) -> Value {
        json!({
            "order": self.order,
            "limit": opt_num(self.limit),
            "finite_formula": opt_num(self.finite_formula),
            "lower": opt_num(self.lower),
            "upper": opt_num(self.upper),
            "empirical_mean": opt_num(self.empirical_mean),
            "empirical_stderr": opt_num(self.empirical_stderr),
            "flags": self.flags,
        })
    }
}

pub const CSV_HEADER: &str = "order,limit,finite_formula,lower,upper,empirical_mean,empirical_stderr,flags";

pub fn rows_csv(manifest: &Value, rows: &[Row]) -> String {
    let mut out = format!("# manifest: {manifest}\n{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.order,
            csv_num(r.limit),
            csv_num(r.finite_formula),
            csv_num(r.lower),
            csv_num(r.upper),
            csv_num(r.empirical_mean),
            csv_num(r.empirical_stderr),
            r.flags.join(";")
        );
    }
    out
}

pub fn document(manifest: Value, payload: Map<String, Value>) -> Value {
    let mut doc = Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("manifest".into(), manifest);
    doc.extend(payload);
    Value::Object(doc)
}

/// Writes `text` to `path`, or stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn pretty(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("serializable");
    s.push('\n');
    s
}
