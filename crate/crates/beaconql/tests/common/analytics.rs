//! Sandbox fixtures and the pie-chart golden run.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::SystemTime;

use beaconql::analytics::{probe_interpreter, run_script};
use beaconql::config::AnalyticsConfig;
use beaconql::mocks::pie_chart_script;
use beaconql_core::cohort::{generate_fixture, FixtureSpec, KaryotypicSex};
use beaconql_core::frame::ResultFrame;
use beaconql_core::guard::{ScriptArtifact, VettedScript};

/// Config for the local interpreter, or `None` when it lacks the libraries.
pub fn interpreter() -> Option<AnalyticsConfig> {
    let config = AnalyticsConfig { timeout_secs: 60.0, ..Default::default() };
    probe_interpreter(&config).map(|_| config)
}

pub fn cohort_frame() -> ResultFrame {
    let fixture = generate_fixture(&FixtureSpec::default_spec()).unwrap();
    let records: Vec<_> = fixture.individuals.iter().map(|i| i.record()).collect();
    ResultFrame::from_records(&records, 1000).unwrap()
}

pub fn vet(code: &str, files: &[&str], config: &AnalyticsConfig) -> VettedScript {
    let artifact = ScriptArtifact {
        code: code.into(),
        files: files.iter().map(|f| f.to_string()).collect(),
        assumptions: vec![],
        feedback: vec![],
    };
    VettedScript::vet(artifact, &config.guard()).expect("fixture passes the guard")
}

type Snapshot = BTreeMap<String, (u64, Option<SystemTime>)>;

fn snapshot(root: &Path, depth: usize, out: &mut Snapshot) {
    let Ok(entries) = std::fs::read_dir(root) else { return };
    for entry in entries.flatten() {
        let path = entry.path();
        let Ok(meta) = entry.metadata() else { continue };
        out.insert(path.display().to_string(), (meta.len(), meta.modified().ok()));
        if meta.is_dir() && depth > 0 {
            snapshot(&path, depth - 1, out);
        }
    }
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(message()) }
}

/// Runs the shipped pie-chart script over the cohort: exit 0, exactly the
/// declared image, per-sex counts on stdout, and no change outside the sandbox.
pub fn pie_chart_golden(mut config: AnalyticsConfig) -> Result<(), String> {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    config.sandbox_root = Some(root.path().to_path_buf());
    let script = vet(pie_chart_script(), &["/tmp/karyotypic_sex_pie.png"], &config);

    let watched = [root.path().to_path_buf(), std::env::current_dir().unwrap()];
    let mut before = Snapshot::new();
    for dir in &watched {
        snapshot(dir, 3, &mut before);
    }
    let result = run_script(&script, &[cohort_frame()], &config).map_err(|e| e.to_string())?;
    let mut after = Snapshot::new();
    for dir in &watched {
        snapshot(dir, 3, &mut after);
    }

    ensure(result.exit_status == Some(0), || format!("exit {:?}, stderr: {}", result.exit_status, result.stderr))?;
    ensure(result.stderr.is_empty(), || format!("stderr: {}", result.stderr))?;
    let names: Vec<_> = result.produced_files.iter().map(|f| f.path.as_str()).collect();
    ensure(names == ["/tmp/karyotypic_sex_pie.png"], || format!("produced {names:?}"))?;
    ensure(result.produced_files[0].bytes.starts_with(b"\x89PNG"), || "image is not a PNG".into())?;
    ensure(result.undeclared_files.is_empty(), || format!("undeclared {:?}", result.undeclared_files))?;
    ensure(before == after, || "files changed outside the sandbox".into())?;

    let fixture = generate_fixture(&FixtureSpec::default_spec()).unwrap();
    for sex in [KaryotypicSex::XX, KaryotypicSex::XY] {
        let n = fixture.individuals.iter().filter(|i| i.karyotypic_sex == sex).count();
        let line = result.stdout.lines().find(|l| l.starts_with(sex.as_str())).ok_or("no count line")?;
        ensure(line.split_whitespace().last() == Some(n.to_string().as_str()), || format!("count line {line:?}, expected {n}"))?;
    }
    Ok(())
}
