//! Kind-specific parameter schemas and runners.

mod collapse;
mod hv;
mod pilot;

use serde_json::Value;

use crate::catalog::Kind;
use crate::manifest::{Params, RunManifest, SchemaError};
use crate::BenchError;

pub use collapse::{CslMaster, CslRun, Gambler, Predict, SlHits};
pub use hv::{HvPhoton, HvSinglet};
pub use pilot::{Distinguish, Relax, Signal, Subq};

/// A CSV table: header plus rows of already formatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&str]) -> Self {
        Self { name, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(name: &'static str, header: Vec<String>) -> Self {
        Self { name, header, rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|x| num(*x)).collect());
    }
}

/// Shortest round-trip decimal form; `NaN` and infinities spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub tables: Vec<Table>,
    pub summary: Value,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Experiment {
    Relax(Relax),
    Subq(Subq),
    Distinguish(Distinguish),
    Signal(Signal),
    HvSinglet(HvSinglet),
    HvPhoton(HvPhoton),
    CslRun(CslRun),
    CslMaster(CslMaster),
    SlHits(SlHits),
    Gambler(Gambler),
    Predict(Predict),
}

impl Experiment {
    /// Kind-specific schema validation of the manifest's `params` table.
    pub fn from_manifest(manifest: &RunManifest) -> Result<Self, Vec<SchemaError>> {
        let mut p = Params::new(&manifest.params);
        let seed = manifest.seed;
        let exp = match manifest.kind {
            Kind::Relax => Experiment::Relax(Relax::parse(&mut p, seed)),
            Kind::Subq => Experiment::Subq(Subq::parse(&mut p)),
            Kind::Distinguish => Experiment::Distinguish(Distinguish::parse(&mut p)),
            Kind::Signal => Experiment::Signal(Signal::parse(&mut p)),
            Kind::HvSinglet => Experiment::HvSinglet(HvSinglet::parse(&mut p)),
            Kind::HvPhoton => Experiment::HvPhoton(HvPhoton::parse(&mut p)),
            Kind::CslRun => Experiment::CslRun(CslRun::parse(&mut p)),
            Kind::CslMaster => Experiment::CslMaster(CslMaster::parse(&mut p)),
            Kind::SlHits => Experiment::SlHits(SlHits::parse(&mut p)),
            Kind::Gambler => Experiment::Gambler(Gambler::parse(&mut p)),
            Kind::Predict => Experiment::Predict(Predict::parse(&mut p)),
        };
        let errors = p.finish();
        if errors.is_empty() {
            Ok(exp)
        } else {
            Err(errors)
        }
    }

    pub fn run(&self, seed: u64) -> Result<Output, BenchError> {
        match self {
            Experiment::Relax(e) => e.run(seed),
            Experiment::Subq(e) => e.run(seed),
            Experiment::Distinguish(e) => e.run(seed),
            Experiment::Signal(e) => e.run(seed),
            Experiment::HvSinglet(e) => e.run(seed),
            Experiment::HvPhoton(e) => e.run(),
            Experiment::CslRun(e) => e.run(seed),
            Experiment::CslMaster(e) => e.run(),
            Experiment::SlHits(e) => e.run(seed),
            Experiment::Gambler(e) => e.run(seed),
            Experiment::Predict(e) => e.run(),
        }
    }
}

fn numerical<E: Into<beyondq::Error>>(context: &str) -> impl FnOnce(E) -> BenchError + '_ {
    move |e| BenchError::Numerical(format!("{context}: {}", e.into()))
}

fn to_json<S: serde::Serialize>(value: &S) -> Value {
    serde_json::to_value(value).expect("report types serialize")
}
