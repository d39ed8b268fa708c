//! Experiment runner for the `randers` crate.
//!
//! Each invocation runs one verb on one configuration file and writes a
//! primary JSON document `<name>.json`, a metadata file `<name>.meta.json`
//! and any CSV tables into the output directory. Primary documents depend
//! only on the configuration, the seed and the sample count.

pub mod cache;
pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod verbs;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::config::ConfigFile;
use crate::error::{CliError, ExitCode, Result};
use crate::output::{num, object, to_canonical, write_atomic, SCHEMA_VERSION};
use crate::verbs::{compose_sources, default_samples, load_field, run_verb, Context};

#[derive(Debug, Parser)]
#[command(name = "randers", version, about = "Randers geometry experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the `samples` key.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output directory; overrides the `output` key.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Always recompute.
    #[arg(long)]
    pub no_cache: bool,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Check positivity of a and the Randers bound on sampled points.
    Validate(Common),
    /// F, g and optionally the Legendre dual at one point.
    Eval(Common),
    /// Fundamental and Cartan tensors at one point.
    Tensors(Common),
    /// Christoffel, nonlinear and Chern connections with residuals.
    Connections(Common),
    /// Indicatrix or sphere averages of g and of the Hamiltonian.
    Average(Common),
    /// Integrate dx/dt = 2 beta and check the speed and acceleration bounds.
    Flow(Common),
    /// Spectrum of the grid Hamiltonian, its split, evolution and shell average.
    Spectrum(Common),
    /// Direct sum or interacting composition of two fields.
    Compose(Common),
    /// Summarize every primary document in the output directory.
    Report(Common),
}

impl Verb {
    pub fn parts(&self) -> (&'static str, &Common) {
        match self {
            Verb::Validate(c) => ("validate", c),
            Verb::Eval(c) => ("eval", c),
            Verb::Tensors(c) => ("tensors", c),
            Verb::Connections(c) => ("connections", c),
            Verb::Average(c) => ("average", c),
            Verb::Flow(c) => ("flow", c),
            Verb::Spectrum(c) => ("spectrum", c),
            Verb::Compose(c) => ("compose", c),
            Verb::Report(c) => ("report", c),
        }
    }
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit: ExitCode,
    pub primary: PathBuf,
    /// `hit`, `miss`, `stale` or `disabled`.
    pub cache: &'static str,
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn csv_name(stem: &str, file: &str) -> String {
    if file.is_empty() {
        format!("{stem}.csv")
    } else {
        format!("{stem}_{file}.csv")
    }
}

pub fn run(verb: &Verb) -> Result<Outcome> {
    let (name, common) = verb.parts();
    if name == "report" {
        let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let s = report::emit(&dir)?;
        return Ok(Outcome { exit: s.exit, primary: dir.join(report::REPORT_FILE), cache: "disabled" });
    }
    let path = common.config.as_ref().ok_or_else(|| CliError::usage(format!("{name} needs --config")))?;
    let config = ConfigFile::load(path)?;
    run_config(name, &config, common)
}

/// Runs `verb` on an already loaded configuration.
pub fn run_config(verb: &str, config: &ConfigFile, common: &Common) -> Result<Outcome> {
    let started = unix_seconds();
    let clock = Instant::now();
    let doc = &config.doc;
    if let Some(c) = doc.get("command").filter(|c| c.value != verb) {
        return Err(CliError::usage(format!("{}: command = {} but the verb is {verb}", doc.name, c.value)));
    }
    let seed = match common.seed {
        Some(s) => s,
        None => doc.integer("seed")?.unwrap_or(0),
    };
    let samples = match common.samples {
        Some(s) => s,
        None => doc.integer("samples")?.map(|s| s as usize).unwrap_or_else(|| default_samples(verb)),
    };
    let field = load_field(config)?;
    let mut sources = field.sources.clone();
    if verb == "compose" {
        sources.extend(compose_sources(config)?);
    }
    let hash = cache::config_hash(verb, config, seed, samples, &sources);
    let out = match (&common.out, doc.string("output")) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => config.base.join(o),
        (None, None) => PathBuf::from("out"),
    };
    let stem = doc.string("name").unwrap_or(verb).to_string();
    let ctx = Context { verb, config, seed, samples, field: &field };

    let mut status = "disabled";
    let mut entry = None;
    if !common.no_cache {
        status = "miss";
        if let Some(cached) = cache::load(&out, &hash) {
            if cache::spot_check(&ctx, &cached) {
                status = "hit";
                entry = Some(cached);
            } else {
                status = "stale";
            }
        }
    }
    let entry = match entry {
        Some(e) => e,
        None => {
            let result = run_verb(&ctx)?;
            let pass = result.checks.iter().all(|c| c.pass()) && result.status.is_none();
            let files: Vec<(String, String)> = result.csv.iter().map(|c| (csv_name(&stem, &c.file), c.render())).collect();
            let exit = result.status.unwrap_or(if pass { ExitCode::Ok } else { ExitCode::CheckFailed });
            let primary = object([
                ("artifacts", Value::Array(files.iter().map(|(n, _)| Value::from(n.as_str())).collect())),
                ("checks", Value::Array(result.checks.iter().map(|c| c.to_json()).collect())),
                ("config_hash", Value::from(hash.as_str())),
                ("name", Value::from(stem.as_str())),
                ("pass", Value::Bool(pass)),
                ("result", result.result),
                ("samples", Value::from(samples)),
                ("schema_version", Value::from(SCHEMA_VERSION)),
                ("seed", Value::from(seed)),
                ("verb", Value::from(verb)),
            ]);
            let e = cache::Entry { primary, files, status: exit.code() };
            if !common.no_cache {
                cache::store(&out, &hash, &e)?;
            }
            e
        }
    };
    for (file, text) in &entry.files {
        write_atomic(&out.join(file), text.as_bytes())?;
    }
    let primary_path = out.join(format!("{stem}.json"));
    write_atomic(&primary_path, to_canonical(&entry.primary).as_bytes())?;
    let meta = object([
        ("cache", Value::from(status)),
        ("config", Value::from(doc.name.as_str())),
        ("duration_seconds", num(clock.elapsed().as_secs_f64())),
        ("finished_unix", num(unix_seconds())),
        ("started_unix", num(started)),
        (
            "versions",
            object([
                ("randers", Value::from(randers::VERSION)),
                ("randers-cli", Value::from(env!("CARGO_PKG_VERSION"))),
            ]),
        ),
    ]);
    write_atomic(&out.join(format!("{stem}.meta.json")), to_canonical(&meta).as_bytes())?;
    let exit = match entry.status {
        0 => ExitCode::Ok,
        5 => ExitCode::InvalidField,
        7 => ExitCode::DomainExit,
        _ => ExitCode::CheckFailed,
    };
    Ok(Outcome { exit, primary: primary_path, cache: status })
}

/// Runs a verb on configuration text, as if read from `base/name`.
pub fn run_text(verb: &str, name: &str, text: &str, base: &Path, common: &Common) -> Result<Outcome> {
    let config = ConfigFile::from_text(name, text, base)?;
    run_config(verb, &config, common)
}
