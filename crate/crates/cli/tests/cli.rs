use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use slnq_core::bogolyubov::groumvirate_enumerate;
use slnq_core::gf::FieldCtx;
use slnq_core::globality::GoodUmvirate;
use slnq_core::groups::{GroupKind, GroupTable};

fn slnq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slnq"))
        .current_dir(dir)
        .env_remove("SLNQ_THREADS")
        .env_remove("SLNQ_CACHE_DIR")
        .args(args)
        .output()
        .expect("spawn slnq")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn fourier_of_a_constant() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("const1.csv"), "index,re,im\n0,1,0\n1,1,0\n").unwrap();
    let o = slnq(dir.path(), &["fourier", "--q", "2", "--n", "1", "--m", "1", "--input", "const1.csv", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spectrum = fs::read_to_string(dir.path().join("o/spectrum.csv")).unwrap();
    let rows: Vec<&str> = spectrum.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    let parse = |r: &str| r.split(',').map(|t| t.parse::<f64>().unwrap()).collect::<Vec<_>>();
    let (x0, x1) = (parse(rows[0]), parse(rows[1]));
    assert_eq!((x0[0], x0[1], x1[0], x1[1]), (0.0, 0.0, 1.0, 1.0));
    assert!((x0[2] - 1.0).abs() < 1e-12 && x0[3].abs() < 1e-12);
    assert!(x1[2].abs() < 1e-12 && x1[3].abs() < 1e-12);
    assert!(stdout(&o).contains("X=0 rank 0"));
    assert!(!stdout(&o).contains("X=1"));
    assert!(dir.path().join("o/manifest.json").exists());
}

#[test]
fn set_files_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.txt"), "1,0,0,1\n1,1,1,1\n").unwrap();
    let o = slnq(dir.path(), &["approx-group", "--q", "2", "--n", "2", "--set", "bad.txt", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    fs::write(dir.path().join("id.txt"), "1,0,0,1\n").unwrap();
    let o = slnq(dir.path(), &["approx-group", "--q", "2", "--n", "2", "--set", "id.txt", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("|A| = 1, |A^2| = 1"));
    fs::write(dir.path().join("empty.txt"), "").unwrap();
    let o = slnq(dir.path(), &["bogolyubov", "--q", "2", "--n", "2", "--set", "empty.txt", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty set"));
}

#[test]
fn bogolyubov_on_a_groumvirate_coset() {
    let g = GroupTable::enumerate(GroupKind::SL, 3, std::sync::Arc::new(FieldCtx::new(2).unwrap())).unwrap();
    let e = groumvirate_enumerate(&g, 1).unwrap();
    let coset = GoodUmvirate { h: g.mat(77).clone(), ..e.groumvirates[2].good.clone() };
    let mut text = String::new();
    for o in coset.members(&g) {
        let m = g.mat(o);
        let entries: Vec<String> = (0..3).flat_map(|r| m.row(r).to_vec()).map(|v| v.to_string()).collect();
        text.push_str(&entries.join(","));
        text.push('\n');
    }
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("coset.txt"), text).unwrap();
    let o = slnq(dir.path(), &["bogolyubov", "--q", "2", "--n", "3", "--set", "coset.txt", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("good 1-groumvirate of density 0.035714 (6/168)"), "{}", stdout(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/bogolyubov.json")).unwrap()).unwrap();
    assert_eq!(report["search"]["contained_at_k"], 1);
}

#[test]
fn group_commands_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let o = slnq(dir.path(), &["levels", "--q", "3", "--n", "2", "--cache-dir", "cache", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("o/levels.csv")).unwrap();
    assert_eq!(csv.lines().last().unwrap().split(',').nth(1), Some("24"));
    assert_eq!(fs::read_dir(dir.path().join("cache")).unwrap().count(), 1);
    let again = slnq(dir.path(), &["levels", "--q", "3", "--n", "2", "--cache-dir", "cache", "--out", "o2"]);
    assert_eq!(stdout(&o), stdout(&again));
    let o = slnq(dir.path(), &["isotypic", "--q", "3", "--n", "2", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("sum of squared dims 24 (|G| = 24), 7 clusters, 7 conjugacy classes"));
    let o = slnq(dir.path(), &["levels", "--q", "3", "--n", "2", "--include-dual", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn convolution_and_mixing_from_sets() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "1,0,0,1\n1,1,0,1\n0,1,1,0\n").unwrap();
    fs::write(dir.path().join("b.txt"), "1,1,0,1\n1,0,1,1\n").unwrap();
    let o = slnq(dir.path(), &["convolve", "--q", "2", "--n", "2", "--set", "a.txt", "--set2", "b.txt", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("oracle residual 0.0e0"));
    let o = slnq(dir.path(), &["mixing", "--q", "2", "--n", "2", "--set", "a.txt", "--set2", "b.txt", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = slnq(dir.path(), &["product-mixing", "--q", "2", "--n", "2", "--set", "a.txt", "--set2", "b.txt", "--set3", "a.txt", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = slnq(dir.path(), &["opnorm", "--q", "2", "--n", "2", "--set", "a.txt", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("o/opnorm.csv").exists());
}

#[test]
fn scheme_audits() {
    let dir = tempfile::tempdir().unwrap();
    let f: String = (0..16).filter(|i| i % 3 == 0).map(|i| format!("{i},1,0\n")).collect();
    fs::write(dir.path().join("f.csv"), f).unwrap();
    for cmd in [
        vec!["global-audit"],
        vec!["global-audit", "--lp", "1.5"],
        vec!["influence-audit"],
        vec!["project-degree", "--d", "1", "--pure"],
    ] {
        let mut args = cmd.clone();
        args.extend(["--q", "2", "--n", "2", "--input", "f.csv", "--out", "o"]);
        let o = slnq(dir.path(), &args);
        assert!(o.status.success(), "{cmd:?}: {}", stderr(&o));
    }
    let audit = fs::read_to_string(dir.path().join("o/global_audit.csv")).unwrap();
    assert!(audit.lines().nth(1).unwrap().starts_with("0,"));
    assert!(dir.path().join("o/lp_audit_ell4.csv").exists());
}

#[test]
fn artifacts_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("f.csv"), "0,1,0\n5,0.5,-0.25\n8,2,0\n").unwrap();
    let args = |out: &'static str| vec!["global-audit", "--q", "3", "--n", "1", "--m", "2", "--input", "f.csv", "--out", out];
    assert!(slnq(dir.path(), &args("r1")).status.success());
    assert!(slnq(dir.path(), &args("r1b")).status.success());
    for name in ["global_audit.csv", "global_audit.json", "lp_audit_ell8.csv"] {
        let a = fs::read(dir.path().join("r1").join(name)).unwrap();
        let b = fs::read(dir.path().join("r1b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let o = slnq(dir.path(), &["verify", "--only", "7", "--out", "v1"]);
    assert!(o.status.success());
    let o = slnq(dir.path(), &["verify", "--only", "7", "--out", "v2"]);
    assert!(o.status.success());
    assert_eq!(fs::read(dir.path().join("v1/verify.json")).unwrap(), fs::read(dir.path().join("v2/verify.json")).unwrap());
}

#[test]
fn verify_on_one_group() {
    let dir = tempfile::tempdir().unwrap();
    let o = slnq(dir.path(), &["verify", "--q", "2", "--n", "2", "--group", "sl", "--only", "5,6,7,8", "--out", "o"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("SL_2(F_2)") && !out.contains("SL_3(F_2)"), "{out}");
    assert!(out.contains("4 of 4 criteria passed"));
}

#[test]
fn threads_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_slnq"))
        .current_dir(dir.path())
        .env("SLNQ_THREADS", "3")
        .args(["field-info", "--q", "9", "--out", "o"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["threads"], 3);
    assert_eq!(m["config"]["q"], 9);
}

#[test]
fn bad_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!slnq(dir.path(), &["no-such-command"]).status.success());
    let o = slnq(dir.path(), &["field-info", "--q", "6", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unsupported field size q = 6"));
    let o = slnq(dir.path(), &["fourier", "--q", "2", "--n", "5", "--m", "5", "--cap", "1000", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exceeds cap"));
    let o = slnq(dir.path(), &["fourier", "--q", "2", "--n", "1", "--m", "1", "--out", "o"]);
    assert!(stderr(&o).contains("--input"));
}
