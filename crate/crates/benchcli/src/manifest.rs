use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::catalog::Kind;
use crate::units::{parse_quantity, Dimension};
use crate::BenchError;

/// One schema violation: the offending field and why.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SchemaError {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

impl SchemaError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { field: field.into(), reason: reason.into() }
    }
}

/// A parsed manifest before kind-specific validation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub kind: Kind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub params: toml::Table,
    /// The manifest text as read.
    pub source: String,
}

const TOP_LEVEL: [&str; 4] = ["kind", "seed", "output", "params"];

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(BenchError::Schema)
    }

    pub fn parse(text: &str) -> Result<Self, Vec<SchemaError>> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| vec![SchemaError::new("manifest", e.message().to_string())])?;
        let mut errors = Vec::new();
        for key in table.keys() {
            if !TOP_LEVEL.contains(&key.as_str()) {
                errors.push(SchemaError::new(key.clone(), "unknown top-level field"));
            }
        }
        let kind = match table.get("kind") {
            None => {
                errors.push(SchemaError::new("kind", "missing"));
                None
            }
            Some(toml::Value::String(s)) => match Kind::from_name(s) {
                Some(k) => Some(k),
                None => {
                    errors.push(SchemaError::new("kind", format!("unknown experiment {s:?}; see `list`")));
                    None
                }
            },
            Some(_) => {
                errors.push(SchemaError::new("kind", "must be a string"));
                None
            }
        };
        let seed = match table.get("seed") {
            None => {
                errors.push(SchemaError::new("seed", "missing; runs never draw implicit entropy"));
                None
            }
            Some(toml::Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(_) => {
                errors.push(SchemaError::new("seed", "must be a non-negative integer"));
                None
            }
        };
        let output = match table.get("output") {
            None => None,
            Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => {
                errors.push(SchemaError::new("output", "must be a path string"));
                None
            }
        };
        let params = match table.get("params") {
            None => toml::Table::new(),
            Some(toml::Value::Table(t)) => t.clone(),
            Some(_) => {
                errors.push(SchemaError::new("params", "must be a table"));
                toml::Table::new()
            }
        };
        match (kind, seed, errors.is_empty()) {
            (Some(kind), Some(seed), true) => Ok(Self { kind, seed, output, params, source: text.to_string() }),
            _ => Err(errors),
        }
    }
}

/// Typed, error-collecting access to a `params` table.
///
/// Every getter records the key as used and pushes a [`SchemaError`] instead
/// of failing, so one pass reports every problem. [`Params::finish`] adds
/// errors for keys nobody asked for.
pub struct Params<'a> {
    table: &'a toml::Table,
    used: BTreeSet<String>,
    errors: Vec<SchemaError>,
}

fn field(name: &str) -> String {
    format!("params.{name}")
}

impl<'a> Params<'a> {
    pub fn new(table: &'a toml::Table) -> Self {
        Self { table, used: BTreeSet::new(), errors: Vec::new() }
    }

    pub fn has(&self, name: &str) -> bool {
        self.table.contains_key(name)
    }

    pub fn error(&mut self, name: &str, reason: impl Into<String>) {
        self.errors.push(SchemaError::new(field(name), reason));
    }

    fn get(&mut self, name: &str) -> Option<&'a toml::Value> {
        self.used.insert(name.to_string());
        self.table.get(name)
    }

    fn missing<T: Default>(&mut self, name: &str) -> T {
        self.error(name, "missing");
        T::default()
    }

    fn number(&mut self, name: &str, v: &toml::Value) -> f64 {
        match v {
            toml::Value::Float(x) => *x,
            toml::Value::Integer(i) => *i as f64,
            toml::Value::String(_) => {
                self.error(name, "dimensionless parameter must be a plain number");
                0.0
            }
            _ => {
                self.error(name, "must be a number");
                0.0
            }
        }
    }

    fn quantity_value(&mut self, name: &str, v: &toml::Value, dim: Dimension) -> f64 {
        match v {
            toml::Value::String(s) => parse_quantity(s, dim).unwrap_or_else(|e| {
                self.error(name, e);
                0.0
            }),
            toml::Value::Float(_) | toml::Value::Integer(_) => {
                self.error(
                    name,
                    format!(
                        "a {dim} needs an explicit unit, e.g. \"1.0 {}\"",
                        crate::units::accepted_units(dim).split(',').next().unwrap_or("")
                    ),
                );
                0.0
            }
            _ => {
                self.error(name, "must be a quantity string");
                0.0
            }
        }
    }

    pub fn quantity(&mut self, name: &str, dim: Dimension) -> f64 {
        match self.get(name) {
            Some(v) => self.quantity_value(name, v, dim),
            None => self.missing(name),
        }
    }

    pub fn quantity_or(&mut self, name: &str, dim: Dimension, default: f64) -> f64 {
        match self.get(name) {
            Some(v) => self.quantity_value(name, v, dim),
            None => default,
        }
    }

    pub fn quantity_list(&mut self, name: &str, dim: Dimension) -> Vec<f64> {
        match self.get(name) {
            Some(toml::Value::Array(items)) => items.iter().map(|v| self.quantity_value(name, v, dim)).collect(),
            Some(_) => {
                self.error(name, "must be an array of quantity strings");
                Vec::new()
            }
            None => self.missing(name),
        }
    }

    pub fn float(&mut self, name: &str) -> f64 {
        match self.get(name) {
            Some(v) => self.number(name, v),
            None => self.missing(name),
        }
    }

    pub fn float_or(&mut self, name: &str, default: f64) -> f64 {
        match self.get(name) {
            Some(v) => self.number(name, v),
            None => default,
        }
    }

    pub fn float_list(&mut self, name: &str) -> Vec<f64> {
        match self.get(name) {
            Some(toml::Value::Array(items)) => items.iter().map(|v| self.number(name, v)).collect(),
            Some(_) => {
                self.error(name, "must be an array of numbers");
                Vec::new()
            }
            None => self.missing(name),
        }
    }

    pub fn float_list_or(&mut self, name: &str, default: &[f64]) -> Vec<f64> {
        if self.table.contains_key(name) {
            self.float_list(name)
        } else {
            self.used.insert(name.to_string());
            default.to_vec()
        }
    }

    fn count_value(&mut self, name: &str, v: &toml::Value) -> usize {
        match v {
            toml::Value::Integer(i) if *i >= 0 => *i as usize,
            _ => {
                self.error(name, "must be a non-negative integer");
                0
            }
        }
    }

    pub fn count(&mut self, name: &str) -> usize {
        match self.get(name) {
            Some(v) => self.count_value(name, v),
            None => self.missing(name),
        }
    }

    pub fn count_or(&mut self, name: &str, default: usize) -> usize {
        match self.get(name) {
            Some(v) => self.count_value(name, v),
            None => default,
        }
    }

    pub fn count_list_or(&mut self, name: &str, default: &[usize]) -> Vec<usize> {
        match self.get(name) {
            Some(toml::Value::Array(items)) => items.iter().map(|v| self.count_value(name, v)).collect(),
            Some(_) => {
                self.error(name, "must be an array of non-negative integers");
                Vec::new()
            }
            None => default.to_vec(),
        }
    }

    pub fn text_or(&mut self, name: &str, default: &str) -> String {
        match self.get(name) {
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => {
                self.error(name, "must be a string");
                default.to_string()
            }
            None => default.to_string(),
        }
    }

    pub fn flag_or(&mut self, name: &str, default: bool) -> bool {
        match self.get(name) {
            Some(toml::Value::Boolean(b)) => *b,
            Some(_) => {
                self.error(name, "must be true or false");
                default
            }
            None => default,
        }
    }

    /// Array of arrays of plain numbers.
    pub fn rows_or(&mut self, name: &str, default: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        match self.get(name) {
            Some(toml::Value::Array(rows)) => rows
                .iter()
                .map(|r| match r {
                    toml::Value::Array(items) => items.iter().map(|v| self.number(name, v)).collect(),
                    _ => {
                        self.error(name, "must be an array of arrays");
                        Vec::new()
                    }
                })
                .collect(),
            Some(_) => {
                self.error(name, "must be an array of arrays");
                default
            }
            None => default,
        }
    }

    pub fn require(&mut self, ok: bool, name: &str, reason: &str) {
        if !ok {
            self.error(name, reason);
        }
    }

    pub fn positive(&mut self, value: f64, name: &str) {
        self.require(value > 0.0, name, "must be positive");
    }

    /// Reports unused keys and returns every error collected.
    pub fn finish(mut self) -> Vec<SchemaError> {
        for key in self.table.keys() {
            if !self.used.contains(key) {
                self.errors.push(SchemaError::new(field(key), "unknown parameter"));
            }
        }
        self.errors
    }
}
