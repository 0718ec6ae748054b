//! Execution of vetted analysis scripts in a throwaway sandbox directory.
//!
//! Layout of one run:
//!
//! ```text
//! <sandbox>/in/    frames as CSV + JSON sidecar + manifest.json
//! <sandbox>/out/   the script's `/tmp/` after remapping
//! <sandbox>/home/  HOME and plotting caches
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use beaconql_core::codegen::frame_variable;
use beaconql_core::frame::{ColumnKind, ResultFrame};
use beaconql_core::guard::{GuardReport, VettedScript};
use beaconql_core::session::ExecutionRecord;
use serde_json::{json, Map, Value};

use crate::config::AnalyticsConfig;

/// Environment variable consulted when no interpreter is configured.
pub const INTERPRETER_ENV: &str = "BEACONQL_PYTHON";

const WRAPPER: &str = r#"import builtins
import json
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

_LIBS = {"pd": pd, "np": np, "plt": plt, "sns": sns}
_WITHHELD = {"__import__", "open", "eval", "exec", "compile", "input", "breakpoint", "globals", "locals", "vars",
             "getattr", "setattr", "delattr", "memoryview", "exit", "quit", "help"}
_DTYPES = {"text": "object", "integer": "Int64", "real": "float64", "boolean": "boolean"}


def _frame(spec):
    scalar = [c for c in spec["columns"] if c["kind"] in _DTYPES]
    if scalar:
        dtypes = {c["name"]: _DTYPES[c["kind"]] for c in scalar}
        flat = pd.read_csv(spec["csv"], dtype=dtypes, keep_default_na=False, na_values=[""])
    else:
        flat = pd.DataFrame(index=range(spec["rows"]))
    with open(spec["sidecar"], encoding="utf-8") as fh:
        nested = json.load(fh)
    cols = {}
    for c in spec["columns"]:
        cols[c["name"]] = pd.Series(nested[c["name"]], dtype="object") if c["name"] in nested else flat[c["name"]]
    return pd.DataFrame(cols, columns=[c["name"] for c in spec["columns"]])


def main():
    with open(sys.argv[1], encoding="utf-8") as fh:
        manifest = json.load(fh)
    env = {name: _LIBS[name] for name in manifest["aliases"] if name in _LIBS}
    for spec in manifest["frames"]:
        env[spec["variable"]] = _frame(spec)
    denied = set(manifest["deny"]) | _WITHHELD
    env["__builtins__"] = {k: v for k, v in vars(builtins).items() if k not in denied}
    env["__name__"] = "__main__"
    with open(manifest["script"], encoding="utf-8") as fh:
        source = fh.read()
    exec(compile(source, "script.py", "exec"), env)
    sys.stdout.flush()


main()
"#;

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("script did not pass the guard")]
    GuardNotPassed(GuardReport),
    #[error("script exceeded the {limit_ms} ms limit")]
    Timeout { limit_ms: u64, stdout: String, stderr: String },
    #[error("no usable interpreter: {0}")]
    InterpreterMissing(String),
    #[error("sandbox io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProducedFile {
    /// Path as declared by the script, e.g. `/tmp/plot.png`.
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub stdout: String,
    pub stderr: String,
    pub exit_status: Option<i32>,
    /// Declared files that exist after the run.
    pub produced_files: Vec<ProducedFile>,
    /// Files the script wrote but did not declare; reported, not returned.
    pub undeclared_files: Vec<String>,
    pub truncated: bool,
    pub wall_time: Duration,
    /// Exact bytes that ran, and the guard verdict computed on them.
    pub executed_code: String,
    pub guard: GuardReport,
}

impl ExecutionResult {
    pub fn record(&self) -> ExecutionRecord {
        ExecutionRecord {
            stdout: self.stdout.clone(),
            stderr: self.stderr.clone(),
            exit_status: self.exit_status,
            timed_out: false,
            files: self.produced_files.iter().map(|f| f.path.clone()).collect(),
            undeclared_files: self.undeclared_files.clone(),
            wall_time_ms: self.wall_time.as_millis() as u64,
        }
    }
}

/// Interpreter from config, then [`INTERPRETER_ENV`], then `python3`.
pub fn resolve_interpreter(config: &AnalyticsConfig) -> PathBuf {
    config
        .interpreter
        .clone()
        .or_else(|| std::env::var_os(INTERPRETER_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("python3"))
}

/// The interpreter if it starts and has the pre-bound libraries.
pub fn probe_interpreter(config: &AnalyticsConfig) -> Option<PathBuf> {
    let python = resolve_interpreter(config);
    let status = Command::new(&python)
        .args(["-I", "-B", "-c", "import matplotlib, numpy, pandas, seaborn"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .ok()?;
    status.success().then_some(python)
}

fn write_frame(dir: &Path, variable: &str, frame: &ResultFrame) -> std::io::Result<Value> {
    let csv_path = dir.join(format!("{variable}.csv"));
    let sidecar_path = dir.join(format!("{variable}.json"));
    let nested = |k: ColumnKind| matches!(k, ColumnKind::Object | ColumnKind::List);
    let scalar: Vec<usize> = (0..frame.columns.len()).filter(|&i| !nested(frame.columns[i].kind)).collect();

    let mut writer = csv::Writer::from_path(&csv_path).map_err(std::io::Error::other)?;
    writer.write_record(scalar.iter().map(|&i| frame.columns[i].name.as_str())).map_err(std::io::Error::other)?;
    for row in &frame.rows {
        writer.write_record(scalar.iter().map(|&i| ResultFrame::cell_text(&row[i]))).map_err(std::io::Error::other)?;
    }
    writer.flush()?;

    let mut sidecar = Map::new();
    for (i, column) in frame.columns.iter().enumerate() {
        if nested(column.kind) {
            sidecar.insert(column.name.clone(), frame.rows.iter().map(|r| r[i].clone()).collect());
        }
    }
    std::fs::write(&sidecar_path, serde_json::to_vec(&sidecar).expect("json"))?;

    let columns: Vec<Value> = frame
        .columns
        .iter()
        .map(|c| {
            let kind = match c.kind {
                ColumnKind::Text => "text",
                ColumnKind::Integer => "integer",
                ColumnKind::Real => "real",
                ColumnKind::Boolean => "boolean",
                ColumnKind::Object => "object",
                ColumnKind::List => "list",
            };
            json!({ "name": c.name, "kind": kind })
        })
        .collect();
    Ok(json!({
        "variable": variable,
        "csv": csv_path,
        "sidecar": sidecar_path,
        "rows": frame.rows.len(),
        "columns": columns,
    }))
}

fn spawn_reader<R: Read + Send + 'static>(mut source: R, cap: usize) -> JoinHandle<(Vec<u8>, bool)> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut truncated = false;
        let mut buf = [0u8; 8192];
        loop {
            match source.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    if n > room {
                        truncated = true;
                    }
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        (kept, truncated)
    })
}

fn wait_with_deadline(child: &mut Child, limit: Duration) -> std::io::Result<Option<std::process::ExitStatus>> {
    let start = Instant::now();
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Some(status));
        }
        if start.elapsed() >= limit {
            child.kill()?;
            child.wait()?;
            return Ok(None);
        }
        thread::sleep(Duration::from_millis(10));
    }
}

fn collect_outputs(out: &Path, declared: &[String], prefix: &str) -> std::io::Result<(Vec<ProducedFile>, Vec<String>)> {
    let declared: BTreeSet<&str> = declared.iter().map(String::as_str).collect();
    let mut found = BTreeMap::new();
    let mut stack = vec![out.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let entry = entry?;
            let path = entry.path();
            if entry.file_type()?.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(out).expect("under out").to_string_lossy().replace('\\', "/");
                found.insert(format!("{prefix}{rel}"), path);
            }
        }
    }
    let mut produced = Vec::new();
    let mut undeclared = Vec::new();
    for (name, path) in found {
        if declared.contains(name.as_str()) {
            produced.push(ProducedFile { bytes: std::fs::read(&path)?, path: name });
        } else {
            undeclared.push(name);
        }
    }
    Ok((produced, undeclared))
}

/// Runs a vetted script over `frames`. The sandbox directory is removed
/// before this returns.
pub fn run_script(
    script: &VettedScript,
    frames: &[ResultFrame],
    config: &AnalyticsConfig,
) -> Result<ExecutionResult, AnalyticsError> {
    let guard = config.guard();
    // The config may be stricter than the one the script was vetted under.
    let report = beaconql_core::guard::guard_script(script.artifact(), &guard);
    if !report.passed() {
        return Err(AnalyticsError::GuardNotPassed(report));
    }

    let sandbox = match &config.sandbox_root {
        Some(root) => tempfile::Builder::new().prefix("beaconql-run-").tempdir_in(root)?,
        None => tempfile::Builder::new().prefix("beaconql-run-").tempdir()?,
    };
    let root = sandbox.path();
    let (inputs, out, home) = (root.join("in"), root.join("out"), root.join("home"));
    for dir in [&inputs, &out, &home] {
        std::fs::create_dir(dir)?;
    }

    let mut specs = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        let variable = frame_variable(frame.name.as_deref(), i);
        specs.push(write_frame(&inputs, &variable, frame)?);
    }
    let out_prefix = format!("{}/", out.display());
    let remapped = script.code().replace(&guard.output_prefix, &out_prefix);
    let script_path = inputs.join("script.py");
    std::fs::write(&script_path, &remapped)?;
    let wrapper_path = inputs.join("wrapper.py");
    std::fs::write(&wrapper_path, WRAPPER)?;
    let manifest_path = inputs.join("manifest.json");
    let manifest = json!({
        "aliases": guard.aliases,
        "deny": guard.deny_names,
        "frames": specs,
        "script": script_path,
    });
    std::fs::write(&manifest_path, serde_json::to_vec(&manifest).expect("json"))?;

    let python = resolve_interpreter(config);
    let started = Instant::now();
    let mut child = Command::new(&python)
        .arg("-I")
        .arg("-B")
        .arg("-u")
        .arg(&wrapper_path)
        .arg(&manifest_path)
        .current_dir(root)
        .env_clear()
        .env("HOME", &home)
        .env("MPLCONFIGDIR", home.join("mpl"))
        .env("XDG_CACHE_HOME", home.join("cache"))
        .env("XDG_CONFIG_HOME", home.join("config"))
        .env("TMPDIR", &home)
        .env("LANG", "C.UTF-8")
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                AnalyticsError::InterpreterMissing(format!("{}: {e}", python.display()))
            }
            _ => AnalyticsError::Io(e),
        })?;
    let stdout_reader = spawn_reader(child.stdout.take().expect("piped"), config.output_cap_bytes);
    let stderr_reader = spawn_reader(child.stderr.take().expect("piped"), config.output_cap_bytes);
    let status = wait_with_deadline(&mut child, config.timeout())?;
    let wall_time = started.elapsed();
    let (stdout, out_trunc) = stdout_reader.join().expect("reader");
    let (stderr, err_trunc) = stderr_reader.join().expect("reader");
    let stdout = String::from_utf8_lossy(&stdout).replace(&out_prefix, &guard.output_prefix);
    let stderr = String::from_utf8_lossy(&stderr).replace(&out_prefix, &guard.output_prefix);

    let Some(status) = status else {
        return Err(AnalyticsError::Timeout { limit_ms: config.timeout().as_millis() as u64, stdout, stderr });
    };
    let (produced_files, undeclared_files) = collect_outputs(&out, script.files(), &guard.output_prefix)?;
    sandbox.close()?;
    Ok(ExecutionResult {
        stdout,
        stderr,
        exit_status: status.code(),
        produced_files,
        undeclared_files,
        truncated: out_trunc || err_trunc,
        wall_time,
        executed_code: script.code().to_string(),
        guard: report,
    })
}
