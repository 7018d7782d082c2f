use std::fs;
use std::path::Path;

use queue_kpi::cli;
use queue_kpi::dataset::{self, LINKS_FILE, META_FILE, PATHS_FILE};

const GRID: &str = r#"
loads = [0.3, 0.6, 0.9, 1.1]
K = [16]
services = [{ kind = "exponential" }, { kind = "truncated-normal", cv = 0.5 }]
topologies = [{ kind = "single" }, { kind = "chain", links = 3 }]
replications = 2
measured_events = 10000
"#;

fn run(args: &[&str]) -> i32 {
    let mut all = vec!["queue-kpi", "-q"];
    all.extend_from_slice(args);
    cli::run(all)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, seed: &str) -> std::path::PathBuf {
    let grid = dir.join("grid.toml");
    fs::write(&grid, GRID).unwrap();
    let out = dir.join(name);
    assert_eq!(run(&["gen-data", "--grid", s(&grid), "--out", s(&out), "--seed", seed]), 0);
    out
}

#[test]
fn help_for_every_subcommand() {
    assert_eq!(cli::run(["queue-kpi", "--help"]), 0);
    for sub in ["gen-data", "featurize", "select", "fit", "predict", "eval", "simulate"] {
        assert_eq!(cli::run(["queue-kpi", sub, "--help"]), 0, "{sub}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["fit"]), 1);
    assert_eq!(run(&["no-such-command"]), 1);
    assert_eq!(run(&["eval", "--data", "x", "--out", "y"]), 1);
}

#[test]
fn missing_data_exits_two_and_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.toml");
    assert_eq!(run(&["fit", "--data", s(&dir.path().join("absent")), "--out", s(&out), "--kind", "linear"]), 2);
    assert!(!out.exists());
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = gen(d, "data", "7");
    for f in [LINKS_FILE, PATHS_FILE, META_FILE] {
        assert!(data.join(f).exists());
    }
    let loaded = dataset::load(&data).unwrap();
    assert!(loaded.links.len() >= 32);

    let feats = d.join("features.csv");
    assert_eq!(run(&["featurize", "--data", s(&data), "--out", s(&feats), "--expand"]), 0);
    let header = fs::read_to_string(&feats).unwrap().lines().next().unwrap().to_string();
    assert!(header.contains("rho_e") && header.contains("Se"), "{header}");

    assert_eq!(run(&["select", "--data", s(&data), "--max-features", "3"]), 0);

    let bern = d.join("bern.toml");
    assert_eq!(run(&["fit", "--data", s(&data), "--out", s(&bern), "--kind", "bernstein", "--K", "32"]), 0);
    let doc = dataset::load_model(&bern).unwrap();
    assert_eq!(doc.model.parameter_count(), 33);

    let imp = d.join("imp.toml");
    assert_eq!(
        run(&["fit", "--data", s(&data), "--out", s(&imp), "--kind", "implicit", "--N", "12", "--iterations", "500"]),
        0
    );
    assert_eq!(dataset::load_model(&imp).unwrap().model.parameter_count(), 24);

    let pred = d.join("pred.csv");
    assert_eq!(run(&["predict", "--model", s(&bern), "--data", s(&data), "--out", s(&pred)]), 0);
    let rows = fs::read_to_string(&pred).unwrap().lines().count() - 1;
    assert_eq!(rows, loaded.samples().count());

    let report = d.join("report");
    let code = run(&[
        "eval", "--data", s(&data), "--out", s(&report), "--model", "linear", "--model", "exp-poly:3",
        "--model", "bernstein:16", "--threads", "2",
    ]);
    assert_eq!(code, 0);
    for f in ["report.csv", "report.txt", "plot.csv"] {
        assert!(report.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(report.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("model,"));
}

#[test]
fn simulate_prints_estimates() {
    assert_eq!(run(&["simulate", "--lambda", "0.5", "--service", "exp:1", "--K", "5", "--events", "20000"]), 0);
    assert_eq!(run(&["simulate", "--lambda", "0.5", "--service", "tnorm:1:0.3", "--K", "5", "--events", "20000"]), 0);
    assert_eq!(run(&["simulate", "--lambda", "0.5", "--service", "bogus", "--K", "5"]), 1);
}

fn without_timing(csv: &str) -> String {
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let keep: Vec<usize> = (0..headers.len()).filter(|&i| !headers[i].ends_with("_s")).collect();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            keep.iter().map(|&i| r[i].to_string()).collect::<Vec<_>>().join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = gen(d, "a", "11");
    let b = gen(d, "b", "11");
    for f in [LINKS_FILE, PATHS_FILE, META_FILE] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = gen(d, "c", "12");
    assert_ne!(fs::read(a.join(LINKS_FILE)).unwrap(), fs::read(c.join(LINKS_FILE)).unwrap());

    for kind in ["linear", "exp-poly", "bernstein", "implicit"] {
        let m1 = d.join(format!("{kind}1.toml"));
        let m2 = d.join(format!("{kind}2.toml"));
        for m in [&m1, &m2] {
            assert_eq!(run(&["fit", "--data", s(&a), "--out", s(m), "--kind", kind, "--iterations", "300"]), 0);
        }
        assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap(), "{kind}");
    }

    let r1 = d.join("r1");
    let r2 = d.join("r2");
    for r in [&r1, &r2] {
        assert_eq!(run(&["eval", "--data", s(&a), "--out", s(r), "--model", "linear", "--model", "mm1k:8"]), 0);
    }
    let read = |p: &Path| fs::read_to_string(p.join("report.csv")).unwrap();
    assert_eq!(without_timing(&read(&r1)), without_timing(&read(&r2)));
    assert_eq!(fs::read(r1.join("plot.csv")).unwrap(), fs::read(r2.join("plot.csv")).unwrap());
}
