//! The command-line interface: exit codes, output files, and stats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pushgcs::core::Cone;
use pushgcs::planner::build_mode_graph;
use pushgcs::io::taskfile::TaskFile;

fn task(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tasks").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pushgcs")).args(args).output().expect("binary runs")
}

fn stats(task_file: &Path, extra: &[&str]) -> serde_json::Value {
    let mut args = vec!["stats", task_file.to_str().unwrap()];
    args.extend(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn malformed_task_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(task("box.json")).unwrap().replace("\"theta\": 0.8", "\"phi\": 0.8");
    std::fs::write(&bad, text).unwrap();
    let out = run(&["plan", bad.to_str().unwrap(), "--out", dir.path().join("p.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("target.slider.phi"), "{err}");

    let out = run(&["plan", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["plan", task("box.json").to_str().unwrap(), "--solver-tol", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn no_rounded_path_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("plan.json");
    let out = run(&["plan", task("box.json").to_str().unwrap(), "--rounding-attempts", "0", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_path.exists());
}

#[test]
fn stats_report_the_relaxation_structure() {
    let box_stats = stats(&task("box.json"), &[]);
    let tee_stats = stats(&task("tee.json"), &[]);
    let box4 = stats(&task("box.json"), &["--knots", "4"]);
    assert_eq!(box_stats["interior_vertices"], 28);
    assert_eq!(tee_stats["interior_vertices"], 232);
    assert!(box_stats["reference"].is_object());
    assert!(box4["reference"].is_null());

    // Every edge carries a copy of both endpoint programs.
    let spec = TaskFile::load(&task("box.json")).unwrap().to_task().unwrap();
    let graph = build_mode_graph(&spec).unwrap();
    let psd = |v: usize| graph.gcs.vertices[v].program.constraints.iter().filter(|c| matches!(c.cone, Cone::Psd { .. })).count();
    let structural: usize = graph.gcs.edges.iter().map(|e| psd(e.from) + psd(e.to)).sum();
    let n_psd = box_stats["num_psd_blocks"].as_u64().unwrap() as usize;
    assert!(n_psd > 0);
    assert_eq!(n_psd, structural);

    for key in ["num_constraints", "num_scalar_variables", "num_psd_blocks"] {
        let (b, t, b4) = (box_stats[key].as_u64().unwrap(), tee_stats[key].as_u64().unwrap(), box4[key].as_u64().unwrap());
        assert!(t > b, "{key}: tee {t} vs box {b}");
        assert!(b4 >= b, "{key}: N=4 {b4} vs N=3 {b}");
    }
    assert!(box4["num_constraints"].as_u64() > box_stats["num_constraints"].as_u64());
}

#[test]
fn stats_export_sdpa() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("box.dat-s");
    stats(&task("box.json"), &["--export-sdpa", path.to_str().unwrap()]);
    let text = std::fs::read_to_string(&path).unwrap();
    let program = pushgcs::io::sdpa::import(&text).unwrap();
    assert!(program.num_vars > 0);
}

#[test]
fn plan_writes_json_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("plan.json");
    let out = run(&["plan", task("box.json").to_str().unwrap(), "--no-timings", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(plan["schema_version"], 1);
    assert!(plan.get("timings").is_none());
    let costs = &plan["costs"];
    assert!(costs["c_relax"].as_f64().unwrap() <= costs["c_round"].as_f64().unwrap() + 1e-6);
    let knots: usize = plan["segments"].as_array().unwrap().iter().map(|s| s["knots"].as_array().unwrap().len()).sum();
    let svg = std::fs::read_to_string(out_path.with_extension("svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let groups = doc.descendants().filter(|n| n.attribute("class") == Some("knot")).count();
    assert_eq!(groups, knots);
}
