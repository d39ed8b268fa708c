//! Content-addressed result cache under `<out>/.cache`.
//!
//! A hit is trusted only after one randomly chosen invariant of the stored
//! result has been recomputed.

use std::collections::hash_map::RandomState;
use std::fs;
use std::hash::{BuildHasher, Hasher};
use std::path::{Path, PathBuf};

use serde_json::Value;
use sha2::{Digest, Sha256};

use randers::averaging::hamiltonian_bound;
use randers::spectral::{build_hamiltonian_operator, GridModel, Nyquist, OperatorOrdering};
use randers::{flow, IntegrationDomain};

use crate::config::ConfigFile;
use crate::output::{to_canonical, write_atomic};
use crate::verbs::{run_verb, Context};

/// Top-level keys that do not influence results.
const UNHASHED: [&str; 5] = ["command", "name", "output", "seed", "samples"];

/// Hex SHA-256 of the verb, every parameter, the effective seed and sample
/// count, and the contents of referenced table files.
pub fn config_hash(verb: &str, config: &ConfigFile, seed: u64, samples: usize, sources: &[String]) -> String {
    let mut h = Sha256::new();
    h.update(format!("verb={verb}\n"));
    for (k, e) in &config.doc.entries {
        if !UNHASHED.contains(&k.as_str()) {
            h.update(format!("{k}={}\n", e.value));
        }
    }
    h.update(format!("seed={seed}\nsamples={samples}\n"));
    for s in sources {
        h.update(format!("table {}\n", s.len()));
        h.update(s);
    }
    hex::encode(h.finalize())
}

/// A stored result: the primary document and its CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub primary: Value,
    pub files: Vec<(String, String)>,
    pub status: i32,
}

fn path(out: &Path, hash: &str) -> PathBuf {
    out.join(".cache").join(format!("{hash}.json"))
}

pub fn load(out: &Path, hash: &str) -> Option<Entry> {
    let text = fs::read_to_string(path(out, hash)).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    let files = v["files"]
        .as_array()?
        .iter()
        .map(|f| Some((f["name"].as_str()?.to_string(), f["text"].as_str()?.to_string())))
        .collect::<Option<Vec<_>>>()?;
    Some(Entry {
        primary: v["primary"].clone(),
        files,
        status: v["status"].as_i64()? as i32,
    })
}

pub fn store(out: &Path, hash: &str, entry: &Entry) -> crate::error::Result<()> {
    let files: Vec<Value> = entry
        .files
        .iter()
        .map(|(n, t)| serde_json::json!({ "name": n, "text": t }))
        .collect();
    let v = serde_json::json!({ "primary": entry.primary, "files": files, "status": entry.status });
    write_atomic(&path(out, hash), to_canonical(&v).as_bytes())
}

fn random_index(len: usize) -> usize {
    let mut h = RandomState::new().build_hasher();
    h.write_usize(len);
    (h.finish() % len.max(1) as u64) as usize
}

fn floats(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(Value::as_f64).collect()
}

fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').filter_map(|c| c.parse().ok()).collect())
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Recomputes one invariant of `entry`. `false` marks the entry stale.
pub fn spot_check(ctx: &Context, entry: &Entry) -> bool {
    let result = &entry.primary["result"];
    let field = &ctx.field.field;
    match ctx.verb {
        "average" => {
            let Some(points) = result["points"].as_array().filter(|p| !p.is_empty()) else {
                return false;
            };
            let p = &points[random_index(points.len())];
            let domain = match result["domain"].as_str() {
                Some("sphere") => IntegrationDomain::Sphere,
                _ => IntegrationDomain::Indicatrix,
            };
            let (Some(x), Some(bound)) = (floats(&p["x"]), p["hamiltonian"]["bound"].as_f64()) else {
                return false;
            };
            let rows: Option<Vec<Vec<f64>>> = p["h"].as_array().and_then(|r| r.iter().map(floats).collect());
            let Some(rows) = rows else { return false };
            let n = rows.len();
            let h = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            let spd = h.clone().cholesky().is_some();
            let same_bound = hamiltonian_bound(field, &x, domain).is_ok_and(|b| close(b, bound, 1e-12));
            spd == p["min_eigenvalue"].as_f64().is_some_and(|m| m > 0.0) && same_bound
        }
        "flow" => {
            let Some((_, text)) = entry.files.first() else { return false };
            let rows = parse_csv(text);
            if rows.len() < 2 {
                return rows.len() == 1;
            }
            let k = random_index(rows.len() - 1);
            let n = field.dim();
            let (a, b) = (&rows[k], &rows[k + 1]);
            let dt = b[0] - a[0];
            match flow(field, &a[1..=n], dt, dt) {
                Ok(t) => t.last_state().iter().zip(&b[1..=n]).all(|(p, q)| close(*p, *q, 1e-10)),
                Err(_) => false,
            }
        }
        "spectrum" => {
            let Some((_, text)) = entry.files.first() else { return false };
            let ev: Vec<f64> = parse_csv(text).iter().filter_map(|r| r.get(1).copied()).collect();
            let (Some(n), Some(length)) = (result["n"].as_u64(), result["length"].as_f64()) else {
                return false;
            };
            let nyquist = if result["nyquist"] == "signed" { Nyquist::Signed } else { Nyquist::Zero };
            let Ok(model) = GridModel::new(n as usize, length) else { return false };
            let Ok(h) = build_hamiltonian_operator(&model.with_nyquist(nyquist), field, OperatorOrdering::Symmetric) else {
                return false;
            };
            if ev.len() != h.dim() {
                return false;
            }
            let scale = h.entries.norm_squared().max(1.0);
            if random_index(2) == 0 {
                let trace: f64 = h.entries.diagonal().iter().map(|z| z.re).sum();
                close(ev.iter().sum(), trace, 1e-9 * scale.sqrt())
            } else {
                close(ev.iter().map(|l| l * l).sum(), h.entries.norm_squared(), 1e-9)
            }
        }
        _ => match run_verb(ctx) {
            Ok(out) => out.result == *result,
            Err(_) => false,
        },
    }
}
