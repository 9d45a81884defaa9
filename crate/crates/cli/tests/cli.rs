use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use narrowops_cli::report::Status;
use narrowops_cli::{run, verify_run, CliError, Experiment, Format, Manifest, RunOptions, RunOutcome};

fn manifests() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("manifests")
}

fn opts(dir: &Path) -> RunOptions {
    RunOptions {
        out: dir.to_path_buf(),
        format: Format::Csv,
        gnuplot: false,
    }
}

fn run_in(dir: &Path, exp: Experiment, m: &Manifest) -> RunOutcome {
    run(exp, m, &opts(dir)).unwrap_or_else(|e| panic!("{} failed: {e}", exp.name()))
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn small(name: &str) -> Manifest {
    Manifest {
        name: name.into(),
        depth: 3,
        levels: 1,
        ..Manifest::default()
    }
}

#[test]
fn burkholder_rows() {
    let dir = tempfile::tempdir().unwrap();
    let m = Manifest {
        name: "b".into(),
        p: vec![1.5, 2.0, 3.0],
        ..Manifest::default()
    };
    let out = run_in(dir.path(), Experiment::Burkholder, &m);
    let (h, rows) = csv_rows(&out.table_path("burkholder.csv"));
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[col(&h, "p")].parse().unwrap(), r[col(&h, "beta")].parse().unwrap()))
        .collect();
    assert_eq!(pairs, vec![(1.5, 2.0), (2.0, 1.0), (3.0, 2.0)]);
    assert!(rows.iter().all(|r| r[col(&h, "beta_method")] == "exact"));
}

#[test]
fn bundled_thm43_example() {
    let dir = tempfile::tempdir().unwrap();
    let m = Manifest::load(&manifests().join("thm43_8atoms.toml")).unwrap();
    let out = run_in(dir.path(), Experiment::Thm43, &m);
    assert_eq!(out.exit_code(), 0);
    let (h, rows) = csv_rows(&out.table_path("thm43.csv"));
    assert_eq!(rows.len(), m.instances);
    for r in &rows {
        assert_eq!(r[col(&h, "status")], "ok");
        let measured: f64 = r[col(&h, "measured_upper")].parse().unwrap();
        assert!(measured <= m.epsilon, "{measured}");
        assert_eq!(r[col(&h, "within_epsilon")], "true");
    }
    let (h, signs) = csv_rows(&out.table_path("signs.csv"));
    for i in 0..m.instances {
        let vals: Vec<f64> = signs
            .iter()
            .filter(|r| r[col(&h, "instance")] == i.to_string())
            .map(|r| r[col(&h, "sign")].parse().unwrap())
            .collect();
        assert_eq!(vals.len(), 8);
        assert!(vals.iter().all(|v| v.abs() == 1.0));
        assert_eq!(vals.iter().sum::<f64>(), 0.0);
    }
    assert!(out.summary.certificates.iter().all(|c| c.passed));
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn identical_manifests_give_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let thm43 = Manifest::load(&manifests().join("thm43_8atoms.toml")).unwrap();
    let defect = Manifest {
        instances: 3,
        ..small("det")
    };
    for (exp, m) in [(Experiment::Thm43, &thm43), (Experiment::Defect, &defect), (Experiment::Uncond, &defect)] {
        let x = run_in(a.path(), exp, m);
        let y = run_in(b.path(), exp, m);
        assert_eq!(x.dir.file_name(), y.dir.file_name());
        let (bx, by) = (dir_bytes(&x.dir), dir_bytes(&y.dir));
        assert!(bx.iter().any(|(n, _)| n.ends_with(".csv")));
        assert_eq!(bx, by, "{}", exp.name());
    }
}

#[test]
fn seed_changes_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_in(dir.path(), Experiment::Defect, &small("s"));
    let b = run_in(dir.path(), Experiment::Defect, &Manifest { seed: 9, ..small("s") });
    assert_ne!(a.dir, b.dir);
    let log = fs::read_to_string(dir.path().join("runs.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
}

fn edit_summary(dir: &Path, f: impl FnOnce(&mut serde_json::Value)) {
    let path = dir.join("summary.json");
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    f(&mut v);
    fs::write(&path, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
}

#[test]
fn verify_passes_then_names_the_perturbed_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let m = Manifest::load(&manifests().join("thm43_8atoms.toml")).unwrap();
    let out = run_in(dir.path(), Experiment::Thm43, &m);
    let rep = verify_run(&out.dir).unwrap();
    assert!(rep.passed());
    assert_eq!(rep.checked, 2 * m.instances);

    edit_summary(&out.dir, |v| {
        let sign = &mut v["checks"][0]["sign"][0];
        *sign = (-sign.as_f64().unwrap()).into();
    });
    let rep = verify_run(&out.dir).unwrap();
    assert_eq!(rep.failures.len(), 1);
    assert_eq!(rep.failures[0].certificate, "thm43[0]: sign");
}

#[test]
fn verify_rechecks_factorization_cuts() {
    let dir = tempfile::tempdir().unwrap();
    let m = Manifest::load(&manifests().join("thm43_8atoms.toml")).unwrap();
    let out = run_in(dir.path(), Experiment::Thm43, &m);
    edit_summary(&out.dir, |v| {
        let checks = v["checks"].as_array_mut().unwrap();
        let fact = checks.iter_mut().find(|c| c["kind"] == "factorization").unwrap();
        fact["v_bound"] = 12.5.into();
    });
    let rep = verify_run(&out.dir).unwrap();
    assert_eq!(rep.failures.len(), 1);
    assert!(rep.failures[0].certificate.ends_with("‖V‖ bound"), "{}", rep.failures[0]);
}

#[test]
fn verify_accepts_older_artifacts_but_not_unknown_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), Experiment::Signbuild, &small("sb"));
    edit_summary(&out.dir, |v| {
        v["artifact_version"] = "0.0.1".into();
        v["manifest"]["artifact_version"] = "0.0.1".into();
    });
    assert!(verify_run(&out.dir).unwrap().passed());
    edit_summary(&out.dir, |v| v["version"] = 99.into());
    assert!(matches!(verify_run(&out.dir), Err(CliError::Corrupt(_))));
    fs::write(out.dir.join("summary.json"), "{ not json").unwrap();
    assert!(matches!(verify_run(&out.dir), Err(CliError::Corrupt(_))));
}

#[test]
fn tolerance_failures_are_recorded_with_the_node() {
    let dir = tempfile::tempdir().unwrap();
    let m = Manifest {
        operator: narrowops_cli::OperatorSpec::Identity,
        ..small("id")
    };
    let out = run_in(dir.path(), Experiment::Tree, &m);
    assert_eq!(out.summary.status, Status::Infeasible);
    assert_eq!(out.exit_code(), 3);
    let d = &out.summary.diagnostics[0];
    assert_eq!(d.node.as_deref(), Some("∅"));
    assert_eq!(d.achieved, Some(1.0));
}

const INPUT_COLUMNS: [&str; 20] = [
    "instance", "status", "atoms", "p", "depth", "level", "m", "slices", "c", "epsilon", "terms", "blocks",
    "partitions", "functions", "evaluations", "samples", "atom", "node", "start", "cut",
];

/// Every numeric cell belongs to a tagged claim or to an input column.
fn assert_tagged(path: &Path) {
    let (h, rows) = csv_rows(path);
    let has = |c: &str| h.iter().any(|x| x == c);
    for (i, name) in h.iter().enumerate() {
        let numeric = rows.iter().any(|r| r[i].parse::<f64>().is_ok());
        if !numeric || INPUT_COLUMNS.contains(&name.as_str()) || name.ends_with("_method") {
            continue;
        }
        let stem = name.trim_end_matches("_lower").trim_end_matches("_upper");
        let tagged = has(&format!("{name}_method"))
            || has(&format!("{stem}_method"))
            || (matches!(name.as_str(), "lower" | "upper") && has("method"));
        assert!(tagged, "{}: column {name} has no method tag", path.display());
    }
}

#[test]
fn every_numeric_claim_is_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let base = small("tags");
    let lb = Manifest {
        slices: Some(8),
        ..small("tags")
    };
    let fact = Manifest {
        operator: narrowops_cli::OperatorSpec::RankOneSeries { max_terms: 3, scale: 0.005 },
        instances: 3,
        ..small("tags")
    };
    let thm43 = Manifest::load(&manifests().join("thm43_8atoms.toml")).unwrap();
    let runs = [
        (Experiment::Defect, &base),
        (Experiment::Tree, &Manifest { operator: narrowops_cli::OperatorSpec::Integration { x: vec![] }, ..small("tags") }),
        (Experiment::Hpp, &base),
        (Experiment::Uncond, &base),
        (Experiment::Burkholder, &base),
        (Experiment::Factorize, &fact),
        (Experiment::LbCheck, &lb),
        (Experiment::Thm33, &lb),
        (Experiment::Thm43, &thm43),
        (Experiment::Cor44, &thm43),
        (Experiment::Counterexample, &base),
        (Experiment::Signbuild, &base),
    ];
    for (exp, m) in runs {
        let out = run_in(dir.path(), exp, m);
        for t in &out.summary.tables {
            assert_tagged(&out.dir.join(t));
        }
    }
}

#[test]
fn json_and_gnuplot_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = RunOptions {
        out: dir.path().to_path_buf(),
        format: Format::Json,
        gnuplot: true,
    };
    let out = run(Experiment::Burkholder, &small("fmt"), &o).unwrap();
    assert_eq!(out.summary.tables, vec!["burkholder.json", "burkholder.dat"]);
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&fs::read(out.dir.join("burkholder.json")).unwrap()).unwrap();
    assert_eq!(rows[0]["beta"], "2.0");
    let dat = fs::read_to_string(out.dir.join("burkholder.dat")).unwrap();
    assert!(dat.starts_with("# p beta beta_method\n1.5 2.0 exact\n"));
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_narrowops"))
}

#[test]
fn exit_codes_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let ok = bin().args(["burkholder", "--out", out]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let line: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(line["status"], "ok");

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"bad\"\nepsilon = -1.0\n").unwrap();
    let r = bin().args(["tree", "--out", out, "--manifest", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
    let diag: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(diag["kind"], "manifest");

    let id = dir.path().join("id.toml");
    fs::write(&id, "name = \"id\"\ndepth = 3\nlevels = 1\n[operator]\nkind = \"identity\"\n").unwrap();
    let r = bin().args(["tree", "--out", out, "--manifest", id.to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(3));
    let diag: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(diag["diagnostics"][0]["node"], "∅");

    let m = manifests().join("thm43_8atoms.toml");
    let r = bin().args(["thm43", "--out", out, "--manifest", m.to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(0));
    let line: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    let run_dir = line["run_dir"].as_str().unwrap().to_string();
    assert_eq!(bin().args(["verify", &run_dir]).status().unwrap().code(), Some(0));
    edit_summary(Path::new(&run_dir), |v| v["checks"][0]["sign"][1] = 0.5.into());
    let r = bin().args(["verify", &run_dir]).output().unwrap();
    assert_eq!(r.status.code(), Some(4));
    let diag: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(diag["failures"][0]["certificate"], "thm43[0]: sign");

    let r = bin().args(["verify", dir.path().join("missing").to_str().unwrap()]).output().unwrap();
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn seed_and_exact_cap_flags_override_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = bin()
        .args(["defect", "--out", out, "--seed", "5", "--exact-cap", "4", "--threads", "1"])
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let line: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(Path::new(line["run_dir"].as_str().unwrap()).join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["manifest"]["seed"], 5);
    assert_eq!(summary["manifest"]["budget"]["exact_cap"], 4);
    let (h, rows) = csv_rows(&Path::new(line["run_dir"].as_str().unwrap()).join("defect.csv"));
    assert_eq!(rows[0][col(&h, "optimality")], "heuristic");
}
