use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mhn::hetgraph::{load_graph_dir, load_labels};
use mhn::mhn::{read_embeddings, MhnModel, ModelConfig};
use mhn::metapath::load_metapaths;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/figure1")
}

fn mhn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mhn")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    mhn(args).status.code().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = mhn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small bipartite graph in `dir/graph`.
fn synthetic(dir: &Path) -> PathBuf {
    let g = dir.join("graph");
    stdout(&["make-synthetic", "--kind", "bipartite", "--nodes-per-type", "30", "--seed", "4", "--out-dir", s(&g)]);
    g
}

fn train(graph: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mp = graph.join("metapaths.json");
    let mut args = vec!["train", "--graph", s(graph), "--metapaths", s(&mp), "--out-dir", s(out), "--dim", "8", "-q"];
    args.extend_from_slice(extra);
    code(&args)
}

#[test]
fn sample_prints_figure1_neighborhood() {
    let f = fixture();
    let mp = f.join("metapaths.json");
    let base = ["sample", "--graph", s(&f), "--metapaths", s(&mp), "--node", "user1", "--metapath", "UIIU"];
    let mut args = base.to_vec();
    args.push("--enumerate");
    let out = stdout(&args);
    let instances: Vec<&str> = out.lines().filter_map(|l| l.strip_prefix("instance\t")).collect();
    assert_eq!(instances, ["user1 item1 item2 user2", "user1 item3 item4 user3"]);
    let sampled = stdout(&base);
    assert!(sampled.contains("bfs\titem1,item3\n"), "{sampled}");
    assert_eq!(sampled, stdout(&base));
    assert_eq!(code(&[&base[..], &["--metapath", "nope"]].concat()), 1);
}

#[test]
fn validate_reports_counts() {
    let f = fixture();
    let out = stdout(&["validate", "--graph", s(&f), "--metapaths", s(&f.join("metapaths.json"))]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["nodes"], 7);
    assert_eq!(v["edges"], 6);
    assert_eq!(v["node_counts"]["U"], 3);
    assert_eq!(code(&["validate", "--graph", "/no/such/dir"]), 1);
}

#[test]
fn gen_metapaths_finds_uiiu() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mp.json");
    let rules = "starts-with=U,ends-with=U,min-length=4,max-length=4";
    let args = ["gen-metapaths", "--graph", s(&f), "--rules", rules, "--seed", "1", "--out", s(&out)];
    stdout(&args);
    let g = load_graph_dir(&f).unwrap();
    let mps = load_metapaths(g.schema(), &out).unwrap();
    assert_eq!(mps.len(), 1);
    let types: Vec<&str> = mps[0].node_types().iter().map(|&t| g.schema().node_type_name(t)).collect();
    assert_eq!(types, ["U", "I", "I", "U"]);
    let first = std::fs::read(&out).unwrap();
    stdout(&args);
    assert_eq!(std::fs::read(&out).unwrap(), first);

    assert_eq!(code(&["gen-metapaths", "--graph", s(&f), "--top-k", "0", "--out", s(&out)]), 1);
    // walks of 10 nodes cannot produce 11 node types
    let impossible = "starts-with=U,min-length=11";
    assert_eq!(code(&["gen-metapaths", "--graph", s(&f), "--rules", impossible, "--out", s(&out)]), 2);
    assert_eq!(code(&["gen-metapaths", "--graph", s(&f), "--rules", "starts-with=Q", "--out", s(&out)]), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["train", "--bogus"]), 1);
    assert_eq!(code(&["--workers", "0", "validate", "--graph", "x"]), 1);
    assert_eq!(code(&["--help"]), 0);
    let help = stdout(&["train", "--help"]);
    for flag in ["--encoder", "--fusion", "--negatives", "--freeze-sampling", "--workers", "--config"] {
        assert!(help.contains(flag), "{flag} undocumented");
    }
}

#[test]
fn supervised_training_needs_labels() {
    let dir = tempfile::tempdir().unwrap();
    let g = synthetic(dir.path());
    assert_eq!(train(&g, &dir.path().join("run"), &["--mode", "supervised"]), 1);
}

#[test]
fn zero_epochs_writes_the_initial_model() {
    let dir = tempfile::tempdir().unwrap();
    let g = synthetic(dir.path());
    let run = dir.path().join("run");
    assert_eq!(train(&g, &run, &["--epochs", "0", "--seed", "9"]), 0);
    let graph = load_graph_dir(&g).unwrap();
    let mps = load_metapaths(graph.schema(), &g.join("metapaths.json")).unwrap();
    let fresh = MhnModel::new(&graph, mps, ModelConfig { dim: 8, seed: 9, ..Default::default() }, None).unwrap();
    let loaded = MhnModel::load(&run.join("checkpoint.mhn"), &graph).unwrap();
    assert_eq!(loaded.params().values(), fresh.params().values());
}

#[test]
fn supervised_toy_run_reduces_validation_loss() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("graph");
    stdout(&["make-synthetic", "--kind", "classification", "--nodes-per-type", "40", "--out-dir", s(&g)]);
    let run = dir.path().join("run");
    let labels = g.join("labels.tsv");
    let extra = ["--mode", "supervised", "--labels", s(&labels), "--epochs", "40", "--val-fraction", "0.2"];
    assert_eq!(train(&g, &run, &extra), 0);
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    let rows: Vec<Vec<f64>> = history
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!(!rows.is_empty() && rows.len() <= 40);
    let best = rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    assert!(best < rows[0][2], "validation loss never improved: {history}");

    let metrics = dir.path().join("nc.json");
    let ckpt = run.join("checkpoint.mhn");
    let args = [
        "eval-nodeclass", "--graph", s(&g), "--checkpoint", s(&ckpt), "--labels", s(&labels), "--train-fractions",
        "0.5", "--out", s(&metrics),
    ];
    stdout(&args);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    let text = v.to_string();
    assert!(text.contains("micro_f1") && text.contains("macro_f1"), "{text}");
}

#[test]
fn link_prediction_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let g = synthetic(dir.path());
    let split = dir.path().join("split");
    stdout(&["split-edges", "--graph", s(&g), "--fraction", "0.1", "--out-dir", s(&split)]);
    std::fs::copy(g.join("metapaths.json"), split.join("metapaths.json")).unwrap();
    let run = dir.path().join("run");
    assert_eq!(train(&split, &run, &["--epochs", "5", "--nonlinearity", "relu", "--negatives", "1"]), 0);
    let ckpt = run.join("checkpoint.mhn");

    let metrics = dir.path().join("lp.json");
    let (test_edges, test_negatives) = (split.join("test_edges.tsv"), split.join("test_negatives.tsv"));
    let args = [
        "eval-linkpred", "--graph", s(&split), "--checkpoint", s(&ckpt), "--test-edges", s(&test_edges),
        "--test-negatives", s(&test_negatives), "--out", s(&metrics),
    ];
    stdout(&args);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    for key in ["roc_auc", "pr_auc", "f1", "ap"] {
        let x = v[key].as_f64().unwrap_or_else(|| panic!("{key} missing: {v}"));
        assert!((0.0..=1.0).contains(&x));
    }

    // exported embeddings equal the in-memory ones
    let export = dir.path().join("emb.tsv");
    stdout(&["export", "--graph", s(&split), "--checkpoint", s(&ckpt), "--out", s(&export)]);
    let graph = load_graph_dir(&split).unwrap();
    let model = MhnModel::load(&ckpt, &graph).unwrap();
    assert_eq!(read_embeddings(&graph, &export).unwrap(), model.embed_all(&graph).unwrap().values);

    let out = stdout(&["knn", "--graph", s(&split), "--checkpoint", s(&ckpt), "--query", "u0", "--k", "3"]);
    let line = out.lines().next().unwrap();
    let (q, list) = line.split_once('\t').unwrap();
    assert_eq!(q, "u0");
    assert_eq!(list.split(',').count(), 3);

    // a checkpoint does not load against a different graph
    let f = fixture();
    assert_eq!(code(&["export", "--graph", s(&f), "--checkpoint", s(&ckpt), "--out", s(&export)]), 1);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let g = synthetic(dir.path());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"model": {"dim": 4, "encoder": "weighted"}, "train": {"epochs": 2, "lr": 0.05}}"#).unwrap();
    let run = dir.path().join("run");
    assert_eq!(train(&g, &run, &["--config", s(&cfg), "--epochs", "1"]), 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let c = &manifest["config"];
    // --dim 8 from the helper beats the file, the file beats defaults
    assert_eq!(c["model"]["dim"], 8);
    assert_eq!(c["model"]["encoder"], "weighted");
    assert_eq!(c["train"]["epochs"], 1);
    assert_eq!(c["train"]["lr"], 0.05);
    assert_eq!(c["train"]["patience"], 5);

    // the manifest itself is accepted as a config
    let again = dir.path().join("again");
    assert_eq!(train(&g, &again, &["--config", s(&run.join("manifest.json"))]), 0);
    assert_eq!(
        std::fs::read(run.join("checkpoint.mhn")).unwrap(),
        std::fs::read(again.join("checkpoint.mhn")).unwrap()
    );

    std::fs::write(&cfg, r#"{"model": {"dimension": 4}}"#).unwrap();
    assert_eq!(train(&g, &dir.path().join("bad"), &["--config", s(&cfg)]), 1);
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let g = synthetic(dir.path());
    let before: Vec<Vec<u8>> = ["nodes.tsv", "edges.tsv", "schema.json", "metapaths.json", "labels.tsv"]
        .iter()
        .map(|f| std::fs::read(g.join(f)).unwrap())
        .collect();
    assert_eq!(train(&g, &dir.path().join("run"), &["--epochs", "1"]), 0);
    stdout(&["split-edges", "--graph", s(&g), "--out-dir", s(&dir.path().join("split"))]);
    let after: Vec<Vec<u8>> = ["nodes.tsv", "edges.tsv", "schema.json", "metapaths.json", "labels.tsv"]
        .iter()
        .map(|f| std::fs::read(g.join(f)).unwrap())
        .collect();
    assert_eq!(before, after);
    let graph = load_graph_dir(&g).unwrap();
    assert!(load_labels(&graph, &g.join("labels.tsv"), None).is_ok());
}

#[test]
fn walk_pairs_train_at_default_size() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("graph");
    stdout(&["make-synthetic", "--kind", "bipartite", "--seed", "1", "--out-dir", s(&g)]);
    let mp = g.join("metapaths.json");
    let run = dir.path().join("run");
    let args = [
        "train", "--graph", s(&g), "--metapaths", s(&mp), "--out-dir", s(&run), "--pair-source", "walks",
        "--epochs", "2", "-q",
    ];
    assert_eq!(code(&args), 0);
    assert!(run.join("checkpoint.mhn").exists());
}
