use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causeway"))
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn three_outcome() -> Vec<PathBuf> {
    ["sleep", "blood_pressure", "wellbeing"].iter().map(|g| fixture(&format!("three_outcome/{g}.json"))).collect()
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = run(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    run(args, cwd).status.code().unwrap()
}

#[test]
fn collider_discovery_orients_the_v_structure() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--kind", "collider", "--n", "10000", "--seed", "7", "--out", "c.csv", "--truth", "t.json"], dir.path());
    ok(&["discover", "--dataset", "c.csv", "--outcome", "Z", "--algos", "pc", "--out", "snap.json", "--graph-out", "g.json"], dir.path());
    let snap: Value = serde_json::from_slice(&fs::read(dir.path().join("snap.json")).unwrap()).unwrap();
    assert_eq!(snap["pc"]["directed"], json!([["X", "Z"], ["Y", "Z"]]));
    assert_eq!(snap["pc"]["undirected"], json!([]));
    assert_eq!(snap["status"]["continuous"]["state"], "Skipped");
    let g: Value = serde_json::from_slice(&fs::read(dir.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(g["outcome"], "Z");
    assert_eq!(g["edges"].as_array().unwrap().len(), 2);
    assert!(g["edges"].as_array().unwrap().iter().all(|e| e["effect"].is_number()));
    assert!(g["layout"]["Z"]["rank"].as_u64().unwrap() > 0);
    let report = ok(&["eval", "--pred", "snap.json", "--truth", "t.json"], dir.path());
    assert!(report.contains("accuracy 1.000"), "{report}");
}

#[test]
fn compressed_layout_of_bundled_fixture_reports_lower_stress() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = vec!["layout".into(), "--mode".into(), "compressed".into(), "--stress".into(), "--svg".into(), "svg".into(), "--graphs".into()];
    args.extend(three_outcome().iter().map(|p| p.display().to_string()));
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = ok(&argv, dir.path());
    let mut pairs = 0;
    for line in out.lines().filter(|l| l.contains("\textracted ")) {
        let nums: Vec<f64> = line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
        assert_eq!(nums.len(), 2, "{line}");
        assert!(nums[1] <= nums[0], "{line}");
        pairs += 1;
    }
    assert_eq!(pairs, 3);
    assert!(out.contains("compressed <= extracted for 3/3 graphs"));
    for g in ["sleep", "blood_pressure", "wellbeing"] {
        assert!(dir.path().join(format!("svg/{g}.svg")).is_file());
    }
}

fn graph_nodes(path: &Path) -> Vec<String> {
    let v: Value = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
    v["nodes"].as_array().unwrap().iter().map(|n| n.as_str().unwrap().to_string()).collect()
}

#[test]
fn svg_output_is_valid_xml_with_every_node_once() {
    let dir = tempfile::tempdir().unwrap();
    let graphs = three_outcome();
    for mode in ["super", "extracted", "compressed"] {
        let mut args: Vec<String> = vec!["layout".into(), "--mode".into(), mode.into(), "--svg".into(), mode.into(), "--graphs".into()];
        args.extend(graphs.iter().map(|p| p.display().to_string()));
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&argv, dir.path());
        let files: Vec<(PathBuf, Vec<String>)> = if mode == "super" {
            let mut all: Vec<String> = graphs.iter().flat_map(|p| graph_nodes(p)).collect();
            all.sort();
            all.dedup();
            vec![(dir.path().join("super/supergraph.svg"), all)]
        } else {
            graphs.iter().map(|p| (dir.path().join(mode).join(p.file_name().unwrap()).with_extension("svg"), graph_nodes(p))).collect()
        };
        for (file, nodes) in files {
            let text = fs::read_to_string(&file).unwrap();
            let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", file.display()));
            for n in &nodes {
                let hits = doc.descendants().filter(|d| d.attribute("data-name") == Some(n.as_str())).count();
                assert_eq!(hits, 1, "{} {n}", file.display());
            }
            let total = doc.descendants().filter(|d| d.attribute("data-name").is_some()).count();
            assert_eq!(total, nodes.len(), "{}", file.display());
        }
    }
}

#[test]
fn eval_of_truth_against_itself_is_perfect() {
    let g = fixture("three_outcome/sleep.json");
    let out = ok(&["eval", "--pred", g.to_str().unwrap(), "--truth", g.to_str().unwrap()], Path::new("."));
    assert!(out.contains("accuracy 1.000"), "{out}");
    assert!(out.contains("fpr 0.000"));
    assert!(out.contains("hamming 0"));
}

#[test]
fn eval_matches_hand_evaluated_example() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("truth.json"), r#"{"nodes":["A","B","C"],"edges":[["A","B"],["B","C"]]}"#).unwrap();
    fs::write(dir.path().join("pred.json"), r#"{"undirected":[["A","B"],["A","C"]]}"#).unwrap();
    let out = ok(&["eval", "--pred", "pred.json", "--truth", "truth.json", "--json"], dir.path());
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["rows"][0], json!({ "name": "pred", "accuracy": 0.5, "fpr": 1.0, "hamming": 2 }));
}

#[test]
fn subcommands_are_deterministic_under_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let a = ok(&["synth", "--kind", "mixed-sem", "--n", "800", "--seed", "3"], p);
    let b = ok(&["synth", "--kind", "mixed-sem", "--n", "800", "--seed", "3"], p);
    assert_eq!(a, b);
    assert_ne!(a, ok(&["synth", "--kind", "mixed-sem", "--n", "800", "--seed", "4"], p));
    fs::write(p.join("d.csv"), &a).unwrap();
    let args = ["discover", "--dataset", "d.csv", "--outcome", "Y", "--top", "3", "--max-epochs", "8", "--seed", "5", "--graph-out", "g.json"];
    let s1 = ok(&args, p);
    let g1 = fs::read(p.join("g.json")).unwrap();
    let s2 = ok(&args, p);
    let g2 = fs::read(p.join("g.json")).unwrap();
    assert_eq!(s1, s2);
    assert_eq!(g1, g2);
    let snap: Value = serde_json::from_str(&s1).unwrap();
    assert_eq!(snap["variables"].as_array().unwrap().len(), 4);
    assert_eq!(snap["continuous"]["losses"].as_array().unwrap().len(), 8);

    let mut layout: Vec<String> = vec!["layout".into(), "--out".into(), "set.json".into(), "--graphs".into()];
    layout.extend(three_outcome().iter().map(|p| p.display().to_string()));
    let argv: Vec<&str> = layout.iter().map(String::as_str).collect();
    ok(&argv, p);
    let first = fs::read(p.join("set.json")).unwrap();
    ok(&argv, p);
    assert_eq!(first, fs::read(p.join("set.json")).unwrap());
}

#[test]
fn ingest_into_a_data_dir_then_discover_by_id() {
    let dir = tempfile::tempdir().unwrap();
    let csv = fixture("mixed_sem.csv");
    let info: Value = serde_json::from_str(&ok(&["ingest", csv.to_str().unwrap(), "--data-dir", "data"], dir.path())).unwrap();
    assert_eq!(info["rows"], 2000);
    assert_eq!(info["variables"].as_array().unwrap().len(), 5);
    let id = info["id"].as_str().unwrap();
    assert!(dir.path().join(format!("data/datasets/{id}.csv")).is_file());
    let snap: Value =
        serde_json::from_str(&ok(&["discover", "--dataset", id, "--data-dir", "data", "--outcome", "Y", "--algos", "pc,hybrid"], dir.path())).unwrap();
    assert_eq!(snap["status"]["pc"]["state"], "Done");
    assert_eq!(snap["status"]["hybrid"]["state"], "Done");
    let again: Value = serde_json::from_str(&ok(&["ingest", csv.to_str().unwrap(), "--categorical", "T"], dir.path())).unwrap();
    assert_ne!(again["id"], info["id"], "overrides are part of the id");
}

#[test]
fn compare_reads_saved_history() {
    let dir = tempfile::tempdir().unwrap();
    let hist = dir.path().join("data/history");
    fs::create_dir_all(&hist).unwrap();
    for (i, p) in three_outcome().iter().enumerate() {
        let graph: Value = serde_json::from_slice(&fs::read(p).unwrap()).unwrap();
        let entry = json!({ "id": format!("h{i}"), "graph_id": graph["id"], "outcome": graph["outcome"], "saved_at": "2026-01-01T00:00:00Z", "graph": graph });
        fs::write(hist.join(format!("h{i}.json")), entry.to_string()).unwrap();
    }
    let set: Value = serde_json::from_str(&ok(&["compare", "--history", "data", "--ids", "h2", "h0"], dir.path())).unwrap();
    assert_eq!(set["graph_ids"], json!(["h2", "h0"]));
    assert_eq!(set["stress"].as_array().unwrap().len(), 2);
    assert_eq!(code(&["compare", "--history", "data", "--ids", "h0"], dir.path()), 1);
    assert_eq!(code(&["compare", "--history", "data", "--ids", "h0", "nope"], dir.path()), 1);
}

#[test]
fn user_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&["nonsense"], p), 1);
    assert_eq!(code(&["synth", "--kind", "spiral"], p), 1);
    assert_eq!(code(&["ingest", "missing.csv"], p), 1);
    fs::write(p.join("bad.csv"), "a,a\n1,2\n").unwrap();
    assert_eq!(code(&["ingest", "bad.csv"], p), 1);
    fs::write(p.join("ok.csv"), "a,b\n1,2\n2,1\n3,5\n").unwrap();
    assert_eq!(code(&["discover", "--dataset", "ok.csv", "--outcome", "zz"], p), 1);
    assert_eq!(code(&["discover", "--dataset", "ok.csv", "--outcome", "b", "--alpha", "3"], p), 1);
    fs::write(p.join("cyc.json"), r#"{"id":"c","outcome":"A","nodes":["A","B"],"edges":[{"from":"A","to":"B"},{"from":"B","to":"A"}]}"#).unwrap();
    assert_eq!(code(&["layout", "--graphs", "cyc.json", "--mode", "extracted"], p), 1);
    let g = fixture("three_outcome/sleep.json");
    assert_eq!(code(&["layout", "--graphs", g.to_str().unwrap(), "--mode", "compressed"], p), 1);
    assert_eq!(code(&["eval", "--pred", g.to_str().unwrap(), "--truth", fixture("three_outcome/wellbeing.json").to_str().unwrap()], p), 1);
    assert_eq!(code(&["serve", "--ci-alpha", "0"], p), 1);
    assert_eq!(code(&["--help"], p), 0);
}

#[test]
fn serve_answers_on_the_printed_address() {
    use std::io::{BufRead, BufReader};
    let dir = tempfile::tempdir().unwrap();
    let mut child = bin()
        .args(["serve", "--addr", "127.0.0.1:0", "--data-dir"])
        .arg(dir.path().join("data"))
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let base = line.trim().strip_prefix("listening on ").unwrap().to_string();
    let health: Value = reqwest::blocking::get(format!("{base}/healthz")).unwrap().json().unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(health["status"], "ok");
    assert!(dir.path().join("data/history").is_dir());
}
