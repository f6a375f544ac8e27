use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn curvalign(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvalign"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = curvalign(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn torus(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec!["synth", "generate", "--family", "torus", "--n", "40", "--seed", "2", "--out", name];
    args.extend_from_slice(extra);
    ok(dir, &args);
}

const SMALL: &[&str] = &["--subsample-size", "20", "--subsample-iterations", "4", "--flow-iterations", "4"];

fn pipeline(dir: &Path, inputs: &[&str], out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["pipeline", "--out", out];
    for i in inputs {
        args.extend(["--input", i]);
    }
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    curvalign(dir, &args)
}

#[test]
fn stages_chain_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    torus(d, "a.csv", &[]);
    torus(d, "b.csv", &["--sigmoid"]);
    for (pts, tag) in [("a.csv", "a"), ("b.csv", "b")] {
        ok(d, &["graph", "--input", pts, "--out", &format!("{tag}/graph.json")]);
        ok(d, &["curvature", "--graph", &format!("{tag}/graph.json"), "--out", &format!("{tag}/curv.json")]);
        ok(d, &["flow", "--graph", &format!("{tag}/graph.json"), "--iterations", "4", "--out", &format!("{tag}/flow.json")]);
    }
    ok(d, &["communities", "--graph", "a/graph.json", "--flow", "a/flow.json", "--out", "comm.json"]);
    ok(d, &["gmm", "--curvature", "a/curv.json", "--seed", "1", "--out", "gmm.json"]);
    ok(d, &["rdm", "--graph", "a/graph.json", "--flow", "a/flow.json", "--metric", "flow_metric", "--out", "rf.csv"]);
    ok(d, &["rdm", "--input", "a.csv", "--metric", "euclidean", "--out", "re.csv"]);
    ok(d, &["ingest", "--input", "a.csv", "--out", "de.csv"]);
    ok(
        d,
        &[
            "compare", "--rdm", "re.csv", "de.csv", "--curvature", "a/curv.json", "a/curv.json", "--graph",
            "a/graph.json", "b/graph.json", "--flow", "a/flow.json", "b/flow.json", "--out", "cmp.json",
        ],
    );

    let cmp = json(&d.join("cmp.json"));
    // the ingested Euclidean distances and the Euclidean RDM are the same matrix
    assert_eq!(cmp["rsa"]["r"], 1.0);
    assert_eq!(cmp["ws1"], 0.0);
    assert_eq!(cmp["kld"], 0.0);
    assert!(cmp["heat"]["value"].as_f64().unwrap() > 0.0);
    assert_eq!(cmp["heat"]["channel"], "flow");

    let comm = json(&d.join("comm.json"));
    assert_eq!(comm["assignment"]["labels"].as_array().unwrap().len(), 40);
    let gmm = json(&d.join("gmm.json"));
    assert!(gmm["best"]["k"].as_u64().unwrap() >= 1);
    assert_eq!(gmm["seed"], 1);
}

#[test]
fn every_output_names_hash_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    torus(d, "a.csv", &[]);
    torus(d, "b.csv", &["--sigmoid"]);
    let out = pipeline(d, &["a=a.csv", "b=b.csv"], "run", &["--seed", "9", "--sweep-k", "4,6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = json(&d.join("run/manifest.json"));
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    assert_eq!(manifest["seed"], 9);
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["path"] == "sweep.csv"));
    for f in files {
        let rel = f["path"].as_str().unwrap();
        let text = fs::read_to_string(d.join("run").join(rel)).unwrap();
        if rel.ends_with(".csv") {
            assert_eq!(text.lines().next().unwrap(), format!("# config_hash={hash} seed=9"), "{rel}");
        } else {
            let v: Value = serde_json::from_str(&text).unwrap();
            let (h, s) = match v.get("provenance") {
                Some(p) if p.get("config_hash").is_some() => (&p["config_hash"], &p["seed"]),
                _ => (&v["config_hash"], &v["seed"]),
            };
            assert_eq!(h.as_str(), Some(hash.as_str()), "{rel}");
            assert_eq!(s, 9, "{rel}");
        }
    }

    // pipeline outputs feed the stage commands
    ok(d, &["communities", "--graph", "run/a/graph.json", "--flow", "run/a/flow.json", "--out", "c.json"]);
    ok(d, &["gmm", "--curvature", "run/a/curvature.json", "--seed", "9", "--out", "g.json"]);
}

#[test]
fn self_comparison_is_perfect_and_reruns_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    torus(d, "a.csv", &[]);
    fs::copy(d.join("a.csv"), d.join("a2.csv")).unwrap();
    let config = "seed = 5\nflow_iterations = 4\nsubsample_size = 20\nsubsample_iterations = 4\n\
                  [[inputs]]\nid = \"x\"\npath = \"a.csv\"\nkind = \"embeddings\"\n\
                  [[inputs]]\nid = \"y\"\npath = \"a2.csv\"\nkind = \"embeddings\"\n";
    fs::create_dir(d.join("cfg")).unwrap();
    fs::write(d.join("cfg/run.toml"), config).unwrap();
    fs::rename(d.join("a.csv"), d.join("cfg/a.csv")).unwrap();
    fs::rename(d.join("a2.csv"), d.join("cfg/a2.csv")).unwrap();

    ok(d, &["pipeline", "--config", "cfg/run.toml", "--out", "one"]);
    ok(d, &["pipeline", "--config", "cfg/run.toml", "--out", "two"]);
    assert_eq!(fs::read(d.join("one/manifest.json")).unwrap(), fs::read(d.join("two/manifest.json")).unwrap());

    let cmp = &json(&d.join("one/pairs/x__y.json"))["results"]["comparison"];
    for (metric, r) in cmp["rsa"].as_object().unwrap() {
        assert_eq!(r.as_f64(), Some(1.0), "{metric}");
    }
    assert_eq!(cmp["ws1"], 0.0);
    assert_eq!(cmp["heat"]["value"], 0.0);

    // a different seed is a different configuration
    ok(d, &["pipeline", "--config", "cfg/run.toml", "--seed", "6", "--out", "three"]);
    assert_ne!(json(&d.join("one/manifest.json"))["config_hash"], json(&d.join("three/manifest.json"))["config_hash"]);
}

#[test]
fn stochastic_stages_demand_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    torus(d, "a.csv", &[]);
    assert!(!pipeline(d, &["a=a.csv"], "run", &[]).status.success());
    assert!(!d.join("run").exists());
    for args in [
        &["synth", "generate", "--family", "torus", "--out", "x.csv"][..],
        &["synth", "family-check", "--out", "x.json"],
        &["gmm", "--curvature", "c.json", "--out", "x.json"],
    ] {
        let out = curvalign(d, args);
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"), "{args:?}");
    }
}

#[test]
fn failed_stage_is_reported_and_others_continue() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    torus(d, "a.csv", &[]);
    torus(d, "b.csv", &["--sigmoid"]);
    let out = pipeline(d, &["a=a.csv", "gone=missing.csv", "b=b.csv"], "run", &["--seed", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest [gone]"));
    let manifest = json(&d.join("run/manifest.json"));
    let errors = manifest["errors"].as_array().unwrap();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0]["stage"], "ingest");
    assert_eq!(errors[0]["input"], "gone");
    assert!(d.join("run/a/report.json").exists());
    assert!(d.join("run/pairs/a__b.json").exists());
}

#[test]
fn bad_parameters_fail_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    torus(d, "a.csv", &[]);
    assert!(!pipeline(d, &["a=a.csv"], "run", &["--seed", "1", "--k-min", "8", "--k-max", "4"]).status.success());
    assert!(!pipeline(d, &["a=a.csv"], "run", &["--seed", "1", "--alpha", "1.5"]).status.success());
    assert!(!curvalign(d, &["rdm", "--input", "a.csv", "--metric", "minkowski:0.5", "--out", "r.csv"]).status.success());
    assert!(!curvalign(d, &["pipeline", "--seed", "1", "--input", "no-equals-sign", "--out", "r"]).status.success());
}

#[test]
fn family_check_separates_torus_from_swiss_roll() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "family-check", "--n", "200", "--seed", "1", "--out", "family.json"]);
    let report = json(&d.join("family.json"));
    assert_eq!(report["passed"], true);
    assert!(report["within_max"].as_f64().unwrap() < report["cross_min"].as_f64().unwrap());
    assert_eq!(report["labels"].as_array().unwrap().len(), 4);
}
