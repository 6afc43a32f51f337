use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::experiments::{Experiment, Output, Table};
use crate::manifest::RunManifest;
use crate::{BenchError, SCHEMA_VERSION};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything needed to trace the outputs of one run back to its inputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub kind: &'static str,
    pub seed: u64,
    pub manifest: String,
    pub threads: usize,
    pub wall_time_s: f64,
    /// Data files with checksums; identical across reruns of one manifest.
    pub outputs: Vec<OutputFile>,
    pub summary: Value,
}

impl RunRecord {
    pub fn checksum(&self, file: &str) -> Option<&str> {
        self.outputs.iter().find(|o| o.file == file).map(|o| o.sha256.as_str())
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn csv_bytes(table: &Table) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header).map_err(|e| BenchError::Io(e.to_string()))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| BenchError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| BenchError::Io(e.to_string()))
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), BenchError> {
    let io = |e: std::io::Error| BenchError::Io(format!("{}: {e}", dir.join(name).display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(dir.join(name)).map_err(|e| io(e.error))?;
    Ok(())
}

/// Runs the manifest's experiment and writes its CSV tables, `summary.json`
/// and `record.json` into the output directory.
pub fn run_manifest(manifest: &RunManifest, options: &RunOptions) -> Result<RunRecord, BenchError> {
    let experiment = Experiment::from_manifest(manifest).map_err(BenchError::Schema)?;
    let seed = options.seed.unwrap_or(manifest.seed);
    let out =
        options.out.clone().or_else(|| manifest.output.clone()).ok_or_else(|| {
            BenchError::Schema(vec![crate::manifest::SchemaError::new("output", "no output directory in manifest or --out")])
        })?;
    std::fs::create_dir_all(&out).map_err(|e| BenchError::Io(format!("{}: {e}", out.display())))?;

    let start = Instant::now();
    let Output { tables, summary } = experiment.run(seed)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let mut files = Vec::new();
    for table in &tables {
        files.push((format!("{}.csv", table.name), csv_bytes(table)?));
    }
    let summary_doc = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": manifest.kind.name(),
        "seed": seed,
        "summary": summary,
    });
    files.push(("summary.json".into(), serde_json::to_vec_pretty(&summary_doc).expect("JSON values serialize")));

    let mut outputs = Vec::new();
    for (name, bytes) in &files {
        write_atomic(&out, name, bytes)?;
        outputs.push(OutputFile { file: name.clone(), sha256: hex::encode(Sha256::digest(bytes)), bytes: bytes.len() });
    }
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        kind: manifest.kind.name(),
        seed,
        manifest: manifest.source.clone(),
        threads: rayon::current_num_threads(),
        wall_time_s,
        outputs,
        summary,
    };
    write_atomic(&out, "record.json", &serde_json::to_vec_pretty(&record).expect("record serializes"))?;
    Ok(record)
}
