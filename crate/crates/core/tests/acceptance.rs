//! End-to-end acceptance run: every named scenario at full size, one line
//! per criterion, then a rerun of each scenario under 4 and 8 workers that
//! must reproduce the single-worker result file byte for byte.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use walkmax::parallel::with_workers;
use walkmax::scenarios::{run, ScenarioOutcome, SCENARIOS};

/// Written straight to stderr so the lines show without `--nocapture`.
fn line(text: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{text}");
}

fn summary(outcome: &ScenarioOutcome) -> String {
    outcome
        .reports
        .iter()
        .map(|r| {
            format!(
                "{} {:.6} <= {} ({})",
                r.statistic, r.observed, r.threshold, r.target
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn result_path(dir: &Path, name: &str, workers: usize) -> PathBuf {
    dir.join(format!("{name}.w{workers}.json"))
}

#[test]
fn acceptance() {
    let seed = 1;
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();

    let mut failed = Vec::new();
    for (i, name) in SCENARIOS.iter().enumerate() {
        let start = Instant::now();
        let outcome = with_workers(1, || run(name, seed)).unwrap();
        let secs = start.elapsed().as_secs_f64();
        std::fs::write(result_path(&dir, name, 1), outcome.to_json()).unwrap();
        let verdict = if outcome.pass() { "PASS" } else { "FAIL" };
        line(&format!(
            "A{} {name}: {verdict} [{secs:.1}s] {}",
            i + 1,
            summary(&outcome)
        ));
        if !outcome.pass() {
            failed.push(format!("A{}", i + 1));
        }
    }

    let start = Instant::now();
    let mut mismatched = Vec::new();
    for name in SCENARIOS {
        let reference = std::fs::read(result_path(&dir, name, 1)).unwrap();
        for workers in [4, 8] {
            let outcome = with_workers(workers, || run(name, seed)).unwrap();
            let path = result_path(&dir, name, workers);
            std::fs::write(&path, outcome.to_json()).unwrap();
            if std::fs::read(&path).unwrap() != reference {
                mismatched.push(format!("{name}@{workers}"));
            }
        }
    }
    let verdict = if mismatched.is_empty() {
        "PASS"
    } else {
        "FAIL"
    };
    line(&format!(
        "A13 determinism: {verdict} [{:.1}s] {} scenarios x workers {{1, 4, 8}}, mismatches: {:?}",
        start.elapsed().as_secs_f64(),
        SCENARIOS.len(),
        mismatched
    ));
    if !mismatched.is_empty() {
        failed.push("A13".to_string());
    }

    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
