//! Report envelope and artifact writers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::{json, Map, Value};

use hierstab_core::ModelSpec;

pub const SCHEMA_VERSION: u32 = 1;
/// Version of the CSV layouts (`t,s,u`, `t,norm_L1_diff`, ...).
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub fn describe_model(model: &ModelSpec) -> Value {
    let r = model.rates();
    json!({
        "m": model.m(),
        "alpha": model.alpha(),
        "grid_n": model.grid().n(),
        "quadrature": model.quadrature,
        "estar_w_of_s": model.estar_w_of_s,
        "rates": {
            "w": r.w.to_string(),
            "beta": r.beta.to_string(),
            "gamma": r.gamma.to_string(),
            "mu": r.mu.to_string(),
        },
    })
}

/// Comparable payload plus a separate block of run information.
pub struct Report {
    pub command: &'static str,
    pub body: Map<String, Value>,
    pub artifacts: Vec<PathBuf>,
}

impl Report {
    pub fn new(command: &'static str, model: &ModelSpec) -> Self {
        let mut body = Map::new();
        body.insert("model".into(), describe_model(model));
        Report {
            command,
            body,
            artifacts: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl serde::Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.body.insert(key.to_string(), v);
    }

    pub fn finish(self, model_path: &Path, elapsed: Duration) -> Value {
        let mut top = Map::new();
        top.insert("schema_version".into(), json!(SCHEMA_VERSION));
        top.insert("command".into(), json!(self.command));
        for (k, v) in self.body {
            top.insert(k, v);
        }
        top.insert(
            "metadata".into(),
            json!({
                "tool": "hierstab",
                "tool_version": env!("CARGO_PKG_VERSION"),
                "model_path": model_path.display().to_string(),
                "threads": rayon::current_num_threads(),
                "elapsed_seconds": elapsed.as_secs_f64(),
                "csv_schema_version": CSV_SCHEMA_VERSION,
                "artifacts": self.artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            }),
        );
        Value::Object(top)
    }
}

pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_json(dir: &Path, value: &Value) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(path)
}
