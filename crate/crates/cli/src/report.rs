//! Aggregation of the primary documents in an output directory.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::{CliError, ExitCode, Result};
use crate::output::{object, to_canonical, write_atomic, SCHEMA_VERSION};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub document: Value,
    pub exit: ExitCode,
}

fn is_primary(v: &Value) -> bool {
    v["schema_version"].is_u64() && v["verb"].is_string() && v["pass"].is_boolean() && v["checks"].is_array()
}

/// Reads every `*.json` in `dir` except metadata and the report itself.
pub fn summarize(dir: &Path) -> Result<Summary> {
    let mut names: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_ok_and(|t| t.is_file()))
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.ends_with(".json") && !n.ends_with(".meta.json") && n != REPORT_FILE && !n.starts_with('.'))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(CliError::io(dir, e)),
    };
    names.sort();
    let mut entries = Vec::new();
    let mut missing = Vec::new();
    let mut invalid = Vec::new();
    for name in &names {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let v: Value = match serde_json::from_str(&text) {
            Ok(v) if is_primary(&v) => v,
            _ => {
                invalid.push(Value::from(name.as_str()));
                continue;
            }
        };
        let stem = name.trim_end_matches(".json");
        let meta = format!("{stem}.meta.json");
        if !dir.join(&meta).is_file() {
            missing.push(Value::from(meta));
        }
        for a in v["artifacts"].as_array().into_iter().flatten() {
            if let Some(a) = a.as_str().filter(|a| !dir.join(a).is_file()) {
                missing.push(Value::from(a));
            }
        }
        entries.push(object([
            ("checks", v["checks"].clone()),
            ("config_hash", v["config_hash"].clone()),
            ("file", Value::from(name.as_str())),
            ("pass", v["pass"].clone()),
            ("seed", v["seed"].clone()),
            ("verb", v["verb"].clone()),
        ]));
    }
    let all_pass = entries.iter().all(|e| e["pass"] == true);
    let complete = !entries.is_empty() && missing.is_empty() && invalid.is_empty();
    let exit = if !complete {
        ExitCode::Report
    } else if !all_pass {
        ExitCode::CheckFailed
    } else {
        ExitCode::Ok
    };
    let document = object([
        ("count", Value::from(entries.len())),
        ("entries", Value::Array(entries)),
        ("invalid", Value::Array(invalid)),
        ("missing", Value::Array(missing)),
        ("pass", Value::Bool(complete && all_pass)),
        ("schema_version", Value::from(SCHEMA_VERSION)),
        (
            "versions",
            object([
                ("randers", Value::from(randers::VERSION)),
                ("randers-cli", Value::from(env!("CARGO_PKG_VERSION"))),
            ]),
        ),
        ("verb", Value::from("report")),
    ]);
    Ok(Summary { document, exit })
}

/// Writes `report.json` into `dir`.
pub fn emit(dir: &Path) -> Result<Summary> {
    let s = summarize(dir)?;
    write_atomic(&dir.join(REPORT_FILE), to_canonical(&s.document).as_bytes())?;
    Ok(s)
}
