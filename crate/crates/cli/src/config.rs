//! Experiment configuration files.
//!
//! ```text
//! document := (blank | comment | section | entry)*
//! comment  := '#' any*                      (also allowed after a value)
//! section  := '[' name ('.' name)* ']'
//! entry    := key '=' value
//! key      := name ('.' name)*
//! name     := [A-Za-z0-9_]+
//! ```
//!
//! A key inside `[s]` is stored as `s.key`. Keys before the first section are
//! top level. Repeated keys are an error.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use randers::{Domain, RandersField, ScalarField, Table};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
    /// Column of the first character of the value.
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub name: String,
    pub entries: BTreeMap<String, Entry>,
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.split('.').all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

impl Document {
    pub fn parse(name: &str, text: &str) -> Result<Document> {
        let err = |line: usize, column: usize, message: String| CliError::Parse {
            file: name.to_string(),
            line,
            column,
            message,
        };
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            let trimmed = content.trim();
            if trimmed.is_empty() {
                continue;
            }
            let lead = content.len() - content.trim_start().len();
            if let Some(rest) = trimmed.strip_prefix('[') {
                let Some(inner) = rest.strip_suffix(']') else {
                    return Err(err(line, lead + trimmed.len() + 1, "expected ']' to close the section".into()));
                };
                let inner = inner.trim();
                if !is_name(inner) {
                    return Err(err(line, lead + 2, format!("invalid section name '{inner}'")));
                }
                section = inner.to_string();
                continue;
            }
            let Some(eq) = content.find('=') else {
                return Err(err(line, lead + 1, "expected 'key = value'".into()));
            };
            let key = content[..eq].trim();
            if !is_name(key) {
                return Err(err(line, lead + 1, format!("invalid key '{key}'")));
            }
            let after = &content[eq + 1..];
            let value = after.trim();
            if value.is_empty() {
                return Err(err(line, eq + 2, format!("missing value for '{key}'")));
            }
            let column = eq + 2 + (after.len() - after.trim_start().len());
            let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            if entries.contains_key(&full) {
                return Err(err(line, lead + 1, format!("duplicate key '{full}'")));
            }
            entries.insert(full, Entry { value: value.to_string(), line, column });
        }
        Ok(Document { name: name.to_string(), entries })
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn error(&self, e: &Entry, message: impl Into<String>) -> CliError {
        CliError::Parse {
            file: self.name.clone(),
            line: e.line,
            column: e.column,
            message: message.into(),
        }
    }

    pub fn string(&self, key: &str) -> Option<&str> {
        self.get(key).map(|e| e.value.as_str())
    }

    pub fn float(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|e| e.value.parse::<f64>().map_err(|_| self.error(e, format!("'{key}' must be a number"))))
            .transpose()
    }

    pub fn float_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.float(key)?.unwrap_or(default))
    }

    pub fn integer(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|e| e.value.parse::<u64>().map_err(|_| self.error(e, format!("'{key}' must be a nonnegative integer"))))
            .transpose()
    }

    pub fn boolean(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|e| match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(self.error(e, format!("'{key}' must be true or false"))),
            })
            .transpose()
    }

    /// Comma- or whitespace-separated numbers.
    pub fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.get(key) else { return Ok(None) };
        let mut out = Vec::new();
        let mut offset = 0;
        for piece in e.value.split(|c: char| c == ',' || c.is_whitespace()) {
            if !piece.is_empty() {
                let v = piece.parse::<f64>().map_err(|_| CliError::Parse {
                    file: self.name.clone(),
                    line: e.line,
                    column: e.column + offset,
                    message: format!("'{piece}' in '{key}' is not a number"),
                })?;
                out.push(v);
            }
            offset += piece.len() + 1;
        }
        Ok(Some(out))
    }

    /// One of `choices`, or `default` when absent.
    pub fn choice<'a>(&self, key: &str, choices: &[&'a str], default: &'a str) -> Result<&'a str> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => choices
                .iter()
                .find(|c| **c == e.value)
                .copied()
                .ok_or_else(|| self.error(e, format!("'{key}' must be one of {}", choices.join(", ")))),
        }
    }

    pub fn require(&self, key: &str) -> Result<&Entry> {
        self.get(key).ok_or_else(|| CliError::usage(format!("{}: missing required key '{key}'", self.name)))
    }
}

/// A parsed field together with the text it was built from.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub field: RandersField,
    /// Component sources and referenced table files, for hashing.
    pub sources: Vec<String>,
}

fn component(doc: &Document, e: &Entry, dim: usize, base: &Path, sources: &mut Vec<String>) -> Result<ScalarField> {
    if let Some(path) = e.value.strip_prefix('@') {
        let full = base.join(path.trim());
        let text = fs::read_to_string(&full).map_err(|err| CliError::io(&full, err))?;
        let table = Table::parse(&text).map_err(|err| match err {
            randers::Error::Parse { line, column, message } => CliError::Parse {
                file: full.display().to_string(),
                line,
                column,
                message,
            },
            other => other.into(),
        })?;
        if table.dim() != dim {
            return Err(randers::Error::Dimension {
                what: format!("table {}", full.display()),
                expected: dim,
                found: table.dim(),
            }
            .into());
        }
        sources.push(text);
        return Ok(ScalarField::Table(std::sync::Arc::new(table)));
    }
    ScalarField::parse_at(&e.value, dim, e.line, e.column).map_err(|err| match err {
        randers::Error::Parse { line, column, message } => CliError::Parse {
            file: doc.name.clone(),
            line,
            column,
            message,
        },
        other => other.into(),
    })
}

/// Reads the field in section `section`: `dim`, `a.ij` (i <= j, default identity),
/// `beta.i` (default 0), `lower`, `upper`, `periodic`, `margin`.
pub fn field_spec(doc: &Document, section: &str, base: &Path) -> Result<FieldSpec> {
    let key = |k: &str| format!("{section}.{k}");
    let dim_entry = doc.require(&key("dim"))?;
    let dim = doc.integer(&key("dim"))?.unwrap_or(0) as usize;
    if dim == 0 {
        return Err(doc.error(dim_entry, "dim must be positive"));
    }
    for (k, e) in doc.entries.range(format!("{section}.")..) {
        let Some(rest) = k.strip_prefix(&format!("{section}.")) else { break };
        let ok = match rest.split_once('.') {
            None => matches!(rest, "dim" | "lower" | "upper" | "periodic" | "margin"),
            Some(("a", ij)) => {
                let b = ij.as_bytes();
                b.len() == 2 && (b'1'..=b'9').contains(&b[0]) && (b'1'..=b'9').contains(&b[1])
                    && ((b[0] - b'0') as usize) <= dim && ((b[1] - b'0') as usize) <= dim && b[0] <= b[1]
            }
            Some(("beta", i)) => i.parse::<usize>().is_ok_and(|i| (1..=dim).contains(&i)),
            _ => false,
        };
        if !ok {
            return Err(doc.error(e, format!("unknown or out-of-range field key '{k}' for dim = {dim}")));
        }
    }
    let mut sources = Vec::new();
    let mut upper = Vec::new();
    for i in 1..=dim {
        for j in i..=dim {
            let c = match doc.get(&key(&format!("a.{i}{j}"))) {
                Some(e) => component(doc, e, dim, base, &mut sources)?,
                None => ScalarField::Constant(if i == j { 1.0 } else { 0.0 }),
            };
            upper.push(c);
        }
    }
    let mut beta = Vec::new();
    for i in 1..=dim {
        beta.push(match doc.get(&key(&format!("beta.{i}"))) {
            Some(e) => component(doc, e, dim, base, &mut sources)?,
            None => ScalarField::Constant(0.0),
        });
    }
    let lower = doc.floats(&key("lower"))?.unwrap_or_else(|| vec![-10.0; dim]);
    let upper_corner = doc.floats(&key("upper"))?.unwrap_or_else(|| vec![10.0; dim]);
    let mut domain = Domain::new(lower, upper_corner)?;
    if let Some(e) = doc.get(&key("periodic")) {
        let flags = e
            .value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| match s {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(doc.error(e, "periodic flags must be true or false")),
            })
            .collect::<Result<Vec<_>>>()?;
        domain = domain.with_periodic(flags)?;
    }
    let mut field = RandersField::from_upper(upper, beta, domain)?;
    if let Some(m) = doc.float(&key("margin"))? {
        field = field.with_margin(m);
    }
    Ok(FieldSpec { field, sources })
}

/// Period of the spectral grid, `2 pi` unless given.
pub fn default_length() -> f64 {
    2.0 * PI
}

/// A parsed config file with its location.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub doc: Document,
    pub text: String,
    pub base: PathBuf,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let doc = Document::parse(&path.display().to_string(), &text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(ConfigFile { doc, text, base })
    }

    pub fn from_text(name: &str, text: &str, base: &Path) -> Result<ConfigFile> {
        Ok(ConfigFile {
            doc: Document::parse(name, text)?,
            text: text.to_string(),
            base: base.to_path_buf(),
        })
    }
}
