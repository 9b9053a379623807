//! Acceptance criteria 1-9, one PASS/FAIL line each.

use std::process::Command;
use std::time::Instant;

use slnq_core::suite::{run_criterion, SuiteOptions, CRITERIA};

const FOURIER_BUDGET_S: f64 = 60.0;
const VERIFY_BUDGET_S: f64 = 600.0;

fn verify_end_to_end() -> (bool, String, f64) {
    let out = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let run = Command::new(env!("CARGO_BIN_EXE_slnq"))
        .args(["verify", "--out"])
        .arg(out.path())
        .output()
        .expect("spawn slnq");
    let secs = start.elapsed().as_secs_f64();
    let stdout = String::from_utf8_lossy(&run.stdout);
    let passed = stdout.lines().filter(|l| l.starts_with("criterion") && l.contains(" PASS ")).count();
    let manifest = out.path().join("manifest.json").exists();
    let ok = run.status.success() && passed == CRITERIA.len() && manifest && secs < VERIFY_BUDGET_S;
    let detail = format!("exit {:?}, {passed}/{} criteria passed, manifest written: {manifest}", run.status.code(), CRITERIA.len());
    (ok, detail, secs)
}

#[test]
fn acceptance() {
    let opts = SuiteOptions::default();
    let mut all = true;
    for &(id, _) in &CRITERIA {
        let mut r = run_criterion(id, &opts);
        if id == 1 && r.elapsed >= FOURIER_BUDGET_S {
            r.pass = false;
            r.detail.push_str(&format!("; over the {FOURIER_BUDGET_S} s budget"));
        }
        println!("{}", r.line());
        all &= r.pass;
    }
    let (ok, detail, secs) = verify_end_to_end();
    println!("criterion 9 {:<22} {}  {detail} ({secs:.2} s, budget {VERIFY_BUDGET_S} s)", "end-to-end-verify", if ok { "PASS" } else { "FAIL" });
    all &= ok;
    assert!(all, "at least one acceptance criterion failed");
}
