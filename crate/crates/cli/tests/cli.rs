use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CORPUS: &str = "\
1\tbanana\tis_a\tfruit
1\tbanana\tcolor\tyellow
2\tbanana\tis_a\tfruit
3\tbanana\tis_a\tplant
3\tbanana\tcolor\tyellow
";

fn semcom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semcom"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn compress_then_decompress_restores_the_graph() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("corpus.tsv"), CORPUS).unwrap();
    fs::write(
        d.join("msg.json"),
        r#"{"triples": [["banana","is_a","fruit"], ["banana","color","yellow"], ["kiwi","grows_in","nz"]]}"#,
    )
    .unwrap();
    assert_eq!(code(&semcom(d, &["build-graph", "--corpus", "corpus.tsv", "--out", "g.spgr"])), 0);
    let out = semcom(
        d,
        &["compress", "--graph", "g.spgr", "--input", "msg.json", "--out", "m.scmp", "--report", "r.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["stages"][0]["omitted"], 2);

    assert_eq!(code(&semcom(d, &["decompress", "--graph", "g.spgr", "--input", "m.scmp", "--out", "back.json"])), 0);
    let back: serde_json::Value = serde_json::from_slice(&fs::read(d.join("back.json")).unwrap()).unwrap();
    let mut got: Vec<Vec<String>> = serde_json::from_value(back["triples"].clone()).unwrap();
    got.sort();
    let want = [["banana", "color", "yellow"], ["banana", "is_a", "fruit"], ["kiwi", "grows_in", "nz"]];
    assert_eq!(got, want.map(|t| t.map(String::from).to_vec()).to_vec());
}

#[test]
fn message_from_another_graph_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.tsv"), CORPUS).unwrap();
    fs::write(d.join("b.tsv"), "1\tx\tr\ty\n").unwrap();
    fs::write(d.join("msg.tsv"), "banana\tis_a\tfruit\n").unwrap();
    semcom(d, &["build-graph", "--corpus", "a.tsv", "--out", "a.spgr"]);
    semcom(d, &["build-graph", "--corpus", "b.tsv", "--out", "b.spgr"]);
    semcom(d, &["compress", "--graph", "a.spgr", "--input", "msg.tsv", "--out", "m.scmp"]);
    let out = semcom(d, &["decompress", "--graph", "b.spgr", "--input", "m.scmp", "--out", "x.json"]);
    assert_eq!(code(&out), 2);
    assert!(!d.join("x.json").exists());
}

#[test]
fn estimate_q_reports_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("corpus.tsv"), CORPUS).unwrap();
    semcom(d, &["build-graph", "--corpus", "corpus.tsv", "--out", "g.spgr"]);
    let out = semcom(d, &["estimate-q", "--graph", "g.spgr", "--corpus", "corpus.tsv"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["m_total"], 2);
    assert_eq!(v["q"], serde_json::json!([1.0]));
}

#[test]
fn optimize_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = semcom(d, &["optimize"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for algo in ["jccpg", "simplified", "traditional"] {
        assert_eq!(v[algo]["feasible"], true, "{algo}");
    }
    assert!(v["jccpg"]["e_total"].as_f64() <= v["traditional"]["e_total"].as_f64());

    fs::write(d.join("tight.toml"), "latency_budget_ms = 0.001\n").unwrap();
    assert_eq!(code(&semcom(d, &["optimize", "--config", "tight.toml"])), 3);
    fs::write(d.join("typo.toml"), "bandwith_mhz = 10\n").unwrap();
    let out = semcom(d, &["optimize", "--config", "typo.toml"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bandwith_mhz"));
    assert_eq!(code(&semcom(d, &["optimize", "--config", "missing.toml"])), 4);
}

#[test]
fn optimize_trace_lists_each_omission_count() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "m_total = 20\nq = [0.5]\n").unwrap();
    let out = semcom(dir.path(), &["optimize", "--config", "c.toml", "--trace"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["jccpg"]["per_e_trace"].as_array().unwrap().len(), 11);
}

#[test]
fn sweep_writes_csv_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = semcom(
        d,
        &["sweep", "--var", "m_total", "--grid", "50,100,150", "--csv", "s.csv", "--plotdata", "p.json"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(d.join("s.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("var,algo,e_total_j,e1_j,e2_j,p_w,e_omit,feasible"));
    assert_eq!(lines.count(), 9);
    let plot: serde_json::Value = serde_json::from_slice(&fs::read(d.join("p.json")).unwrap()).unwrap();
    assert_eq!(plot["series"].as_array().unwrap().len(), 3);

    let bad = semcom(d, &["sweep", "--var", "m_total", "--grid", "100,50", "--csv", "s.csv"]);
    assert_eq!(code(&bad), 2);
}
