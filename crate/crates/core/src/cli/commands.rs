use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::args::*;
use super::manifest::Recorder;
use super::CliError;
use crate::evalkit::{
    add_edges, eval_linkpred, eval_nodeclass, hit_rate, knn_batch, sample_test_negatives, split_edges,
};
use crate::hetgraph::{
    data_lines, load_graph, load_labels, read_edge_list, read_text, write_edge_list, write_graph, write_labels,
    GraphError, HeteroGraph, NodeId,
};
use crate::metapath::{
    enumerate_instances, generate_metapaths, load_metapaths, metapaths_to_json, parse_rules, seeded_neighborhood,
    GenerateConfig, Metapath, SamplingConfig, ScoreConfig,
};
use crate::mhn::{write_atomic, write_embeddings, MhnModel, ModelConfig};
use crate::synthetic::{generate, SyntheticConfig};
use crate::training::{fit, split_labels, split_pairs, write_history, Splits, TrainConfig, TrainError, TrainMode};

pub(crate) fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let w = cli.workers;
    match &cli.command {
        Command::MakeSynthetic(a) => make_synthetic(a, w),
        Command::Validate(a) => validate(a),
        Command::GenMetapaths(a) => gen_metapaths(a, w),
        Command::Train(a) => train(a, w),
        Command::EvalNodeclass(a) => eval_nodeclass_cmd(a, w),
        Command::EvalLinkpred(a) => eval_linkpred_cmd(a, w),
        Command::Knn(a) => knn(a, w),
        Command::Export(a) => export(a, w),
        Command::Sample(a) => sample(a),
        Command::SplitEdges(a) => split_edges_cmd(a, w),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        GraphError::Io {
            path: dir.display().to_string(),
            source,
        }
        .into()
    })
}

fn load(args: &GraphArgs, rec: Option<&mut Recorder>) -> Result<HeteroGraph, CliError> {
    let nodes = args.graph.join("nodes.tsv");
    let edges = args.graph.join("edges.tsv");
    let schema = args.schema_path();
    let g = load_graph(&nodes, &edges, &schema)?;
    if let Some(rec) = rec {
        for p in [&nodes, &edges, &schema] {
            rec.input(p)?;
        }
    }
    Ok(g)
}

fn load_model(args: &CheckpointArgs, rec: &mut Recorder) -> Result<(HeteroGraph, MhnModel), CliError> {
    let graph = load(&args.graph, Some(rec))?;
    rec.input(&args.checkpoint)?;
    let model = MhnModel::load(&args.checkpoint, &graph)?;
    Ok((graph, model))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    write_atomic(path, &text)?;
    Ok(())
}

/// `<file>.manifest.json` beside a single-file artifact.
fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn make_synthetic(a: &MakeSyntheticArgs, workers: usize) -> Result<(), CliError> {
    let mut cfg = SyntheticConfig::for_kind(a.kind);
    cfg.seed = a.seed;
    if let Some(v) = a.nodes_per_type {
        cfg.nodes_per_type = v;
    }
    if let Some(v) = a.blocks {
        cfg.blocks = v;
    }
    if let Some(v) = a.p_in {
        cfg.p_in = v;
    }
    if let Some(v) = a.p_out {
        cfg.p_out = v;
    }
    if let Some(v) = a.noise {
        cfg.noise = v;
    }
    if let Some(v) = a.locality {
        cfg.locality = v;
    }
    let mut rec = Recorder::new("make-synthetic", cfg.seed, workers, json!(cfg));
    let data = generate(&cfg).map_err(CliError::Usage)?;
    rec.stage("generate");
    create_dir(&a.out_dir)?;
    write_graph(&data.graph, &a.out_dir)?;
    let mut written = vec!["nodes.tsv", "edges.tsv", "schema.json", "metapaths.json"];
    write_atomic(
        &a.out_dir.join("metapaths.json"),
        &metapaths_to_json(data.graph.schema(), &data.metapaths, None),
    )?;
    if let Some(labels) = &data.labels {
        write_labels(&data.graph, labels, &a.out_dir.join("labels.tsv"))?;
        written.push("labels.tsv");
    }
    for f in written {
        rec.artifact(&a.out_dir.join(f))?;
    }
    rec.stage("write");
    rec.write(&a.out_dir.join("manifest.json"))?;
    println!(
        "wrote {} nodes and {} edges to {}",
        data.graph.node_count(),
        data.graph.edge_count(),
        a.out_dir.display()
    );
    Ok(())
}

fn validate(a: &ValidateArgs) -> Result<(), CliError> {
    let g = load(&a.graph, None)?;
    let report = g.validate();
    let mut out = serde_json::to_value(&report).expect("report serializes");
    if let Some(p) = &a.metapaths {
        let mps = load_metapaths(g.schema(), p)?;
        out["metapaths"] = json!(mps.iter().map(|m| m.id()).collect::<Vec<_>>());
    }
    if let Some(p) = &a.labels {
        let labels = load_labels(&g, p, None)?;
        out["labeled_nodes"] = json!(labels.len());
        out["classes"] = json!(labels.num_classes());
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn gen_metapaths(a: &GenMetapathsArgs, workers: usize) -> Result<(), CliError> {
    if a.top_k == 0 {
        return Err(CliError::Usage("--top-k must be at least 1".into()));
    }
    let cfg = GenerateConfig {
        walk_len: a.walk_len,
        walks_per_node: a.walks_per_node,
        rules: parse_rules(&a.rules)?,
        score: ScoreConfig {
            numerator_type: a.score_num_type.clone(),
            denominator_type: a.score_den_type.clone(),
        },
        top_k: a.top_k,
        seed: a.seed,
    };
    let mut rec = Recorder::new("gen-metapaths", a.seed, workers, json!(cfg));
    let g = load(&a.graph, Some(&mut rec))?;
    let ranked = generate_metapaths(&g, &cfg)?;
    rec.stage("generate");
    if ranked.is_empty() {
        return Err(CliError::Empty("no metapath satisfies the rules".into()));
    }
    let mps: Vec<Metapath> = ranked.iter().map(|r| r.metapath.clone()).collect();
    let scores: Vec<f64> = ranked.iter().map(|r| r.score).collect();
    write_atomic(&a.out, &metapaths_to_json(g.schema(), &mps, Some(&scores)))?;
    rec.artifact(&a.out)?;
    rec.write(&sibling_manifest(&a.out))?;
    for r in &ranked {
        println!("{}\t{}\t{}", r.metapath.id(), r.instance_count, r.score);
    }
    Ok(())
}

/// Everything `train` reads from a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn read_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = read_text(path)?;
    let bad = |e: serde_json::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let value: Value = serde_json::from_str(&text).map_err(bad)?;
    let value = if value.get("format").and_then(Value::as_str) == Some(super::MANIFEST_FORMAT) {
        value.get("config").cloned().unwrap_or(Value::Null)
    } else {
        value
    };
    serde_json::from_value(value).map_err(bad)
}

fn resolve_config(a: &TrainArgs) -> Result<RunConfig, CliError> {
    let mut c = match &a.config {
        Some(p) => read_run_config(p)?,
        None => RunConfig::default(),
    };
    let (m, t) = (&mut c.model, &mut c.train);
    if let Some(v) = a.seed {
        m.seed = v;
        t.seed = v;
    }
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    set!(a.mode, t.mode);
    set!(a.epochs, t.epochs);
    set!(a.lr, t.lr);
    set!(a.patience, t.patience);
    set!(a.negatives, t.negatives);
    set!(a.pair_source, t.pair_source);
    set!(a.batch_size, t.batch_size);
    set!(a.val_fraction, t.val_fraction);
    set!(a.dim, m.dim);
    set!(a.encoder, m.encoder);
    set!(a.nonlinearity, m.nonlinearity);
    set!(a.fusion, m.fusion);
    set!(a.heads, m.heads);
    if a.freeze_sampling {
        m.freeze_sampling = true;
    }
    m.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    t.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(c)
}

fn train(a: &TrainArgs, workers: usize) -> Result<(), CliError> {
    let cfg = resolve_config(a)?;
    if cfg.train.mode == TrainMode::Supervised && a.labels.is_none() {
        return Err(CliError::Usage("supervised training requires --labels".into()));
    }
    let mut rec = Recorder::new("train", cfg.train.seed, workers, json!(cfg));
    if let Some(p) = &a.config {
        rec.input(p)?;
    }
    let graph = load(&a.graph, Some(&mut rec))?;
    let metapaths = load_metapaths(graph.schema(), &a.metapaths)?;
    rec.input(&a.metapaths)?;
    let (splits, classes) = match cfg.train.mode {
        TrainMode::Supervised => {
            let path = a.labels.as_ref().expect("checked above");
            let labels = load_labels(&graph, path, None)?;
            rec.input(path)?;
            let (train, val) = split_labels(&labels, cfg.train.val_fraction, cfg.train.seed);
            (Splits::Supervised { train, val }, Some(labels.num_classes()))
        }
        TrainMode::Unsupervised => {
            let (train, val) = split_pairs(&graph, &metapaths, &cfg.train)?;
            (Splits::Unsupervised { train, val }, None)
        }
    };
    let model = MhnModel::new(&graph, metapaths, cfg.model.clone(), classes)?;
    rec.stage("setup");
    create_dir(&a.out_dir)?;
    let ckpt = a.out_dir.join("checkpoint.mhn");
    let hist = a.out_dir.join("history.csv");
    let result = match fit(&graph, model, &cfg.train, &splits) {
        Ok(r) => r,
        Err(TrainError::Diverged {
            epoch,
            last_finite,
            history,
        }) => {
            last_finite.save(&graph, &ckpt)?;
            write_history(&history, &hist)?;
            return Err(CliError::Train(TrainError::Diverged {
                epoch,
                last_finite,
                history,
            }));
        }
        Err(e) => return Err(e.into()),
    };
    rec.stage("fit");
    result.model.save(&graph, &ckpt)?;
    write_history(&result.history, &hist)?;
    rec.artifact(&ckpt)?;
    rec.artifact(&hist)?;
    rec.stage("write");
    rec.write(&a.out_dir.join("manifest.json"))?;
    match result.history.last() {
        Some(last) => println!(
            "trained {} epochs (best {}{}), final train loss {}, val loss {}",
            result.history.len(),
            result.best_epoch,
            if result.stopped_early { ", stopped early" } else { "" },
            last.train_loss,
            last.val_loss
        ),
        None => println!("no epochs run; checkpoint holds the initialization"),
    }
    Ok(())
}

fn eval_nodeclass_cmd(a: &EvalNodeclassArgs, workers: usize) -> Result<(), CliError> {
    let mut rec = Recorder::new(
        "eval-nodeclass",
        a.seed,
        workers,
        json!({"train_fractions": a.train_fractions, "seed": a.seed}),
    );
    let (graph, model) = load_model(&a.model, &mut rec)?;
    let labels = load_labels(&graph, &a.labels, None)?;
    rec.input(&a.labels)?;
    let emb = model.embed_all(&graph)?;
    let reports = eval_nodeclass(&emb.values, &labels, &a.train_fractions, a.seed)?;
    rec.stage("evaluate");
    let mut metrics = serde_json::Map::new();
    println!("{:>10}  {:>10}  {:>10}", "train", "micro_f1", "macro_f1");
    for r in &reports {
        metrics.insert(format!("micro_f1@{}", r.train_fraction), json!(r.micro_f1));
        metrics.insert(format!("macro_f1@{}", r.train_fraction), json!(r.macro_f1));
        println!("{:>10}  {:>10.4}  {:>10.4}", r.train_fraction, r.micro_f1, r.macro_f1);
    }
    write_json(&a.out, &metrics)?;
    rec.artifact(&a.out)?;
    rec.write(&sibling_manifest(&a.out))
}

fn eval_linkpred_cmd(a: &EvalLinkpredArgs, workers: usize) -> Result<(), CliError> {
    let mut rec = Recorder::new(
        "eval-linkpred",
        a.seed,
        workers,
        json!({"threshold": a.threshold, "seed": a.seed}),
    );
    let (graph, model) = load_model(&a.model, &mut rec)?;
    let test = read_edge_list(&graph, &a.test_edges)?;
    rec.input(&a.test_edges)?;
    if test.is_empty() {
        return Err(CliError::Empty("the test edge file is empty".into()));
    }
    let negatives = match &a.test_negatives {
        Some(p) => {
            rec.input(p)?;
            read_edge_list(&graph, p)?
        }
        None => {
            let full = add_edges(&graph, &test)?;
            sample_test_negatives(&full, &test, a.seed, 1000)
        }
    };
    let emb = model.embed_all(&graph)?;
    let report = eval_linkpred(&emb.values, &test, &negatives, a.threshold)?;
    rec.stage("evaluate");
    println!("{:>8}  {:>8}  {:>8}  {:>8}", "roc_auc", "pr_auc", "f1", "ap");
    println!(
        "{:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}",
        report.roc_auc, report.pr_auc, report.f1, report.ap
    );
    write_json(&a.out, &report)?;
    rec.artifact(&a.out)?;
    rec.write(&sibling_manifest(&a.out))
}

fn knn(a: &KnnArgs, workers: usize) -> Result<(), CliError> {
    let mut rec = Recorder::new(
        "knn",
        0,
        workers,
        json!({"k": a.k, "candidate_type": a.candidate_type}),
    );
    let (graph, model) = load_model(&a.model, &mut rec)?;
    let mut queries: Vec<NodeId> = a.queries.iter().map(|q| graph.node(q)).collect::<Result<_, _>>()?;
    let mut targets = Vec::new();
    if let Some(p) = &a.targets {
        rec.input(p)?;
        for (line, text) in data_lines(&read_text(p)?) {
            let fields: Vec<&str> = text.split('\t').collect();
            if fields.len() != 2 {
                return Err(CliError::Usage(format!(
                    "{}:{line}: expected query<TAB>target",
                    p.display()
                )));
            }
            let q = graph.node(fields[0]).map_err(|e| e.at(&p.display().to_string(), line))?;
            let t = graph.node(fields[1]).map_err(|e| e.at(&p.display().to_string(), line))?;
            targets.push((queries.len(), t));
            queries.push(q);
        }
    }
    if queries.is_empty() {
        return Err(CliError::Usage("give --query or --targets".into()));
    }
    let candidates: Option<Vec<usize>> = match &a.candidate_type {
        Some(t) => {
            let t = graph.schema().node_type_id(t)?;
            Some(graph.nodes_of_type(t).iter().map(|n| n.0).collect())
        }
        None => None,
    };
    let emb = model.embed_all(&graph)?;
    let rows: Vec<usize> = queries.iter().map(|n| n.0).collect();
    let results = knn_batch(&emb.values, &rows, a.k, candidates.as_deref())?;
    rec.stage("search");
    let mut listing = Vec::new();
    for (q, res) in queries.iter().zip(&results) {
        let names: Vec<&str> = res.iter().map(|&(i, _)| graph.node_name(NodeId(i))).collect();
        println!("{}\t{}", graph.node_name(*q), names.join(","));
        listing.push(json!({
            "query": graph.node_name(*q),
            "neighbors": res.iter().map(|&(i, d)| json!({"node": graph.node_name(NodeId(i)), "distance": d})).collect::<Vec<_>>(),
        }));
    }
    let mut out = json!({"k": a.k, "results": listing});
    if !targets.is_empty() {
        let recs: Vec<Vec<usize>> = targets.iter().map(|&(i, _)| results[i].iter().map(|e| e.0).collect()).collect();
        let truth: Vec<usize> = targets.iter().map(|&(_, t)| t.0).collect();
        let hr = hit_rate(&recs, &truth, a.k)?;
        println!("hit_rate@{}\t{hr}", a.k);
        out["hit_rate"] = json!(hr);
    }
    if let Some(path) = &a.out {
        write_json(path, &out)?;
        rec.artifact(path)?;
        rec.write(&sibling_manifest(path))?;
    }
    Ok(())
}

fn export(a: &ExportArgs, workers: usize) -> Result<(), CliError> {
    let mut rec = Recorder::new("export", 0, workers, json!({}));
    let (graph, model) = load_model(&a.model, &mut rec)?;
    let emb = model.embed_all(&graph)?;
    rec.stage("embed");
    write_embeddings(&graph, &emb.values, &a.out)?;
    rec.artifact(&a.out)?;
    let unreachable = emb.reachable.iter().filter(|r| !**r).count();
    if unreachable > 0 {
        log::warn!("{unreachable} node(s) are reached by no metapath and use the attribute-only fallback");
    }
    println!("wrote {} embeddings to {}", graph.node_count(), a.out.display());
    rec.write(&sibling_manifest(&a.out))
}

fn sample(a: &SampleArgs) -> Result<(), CliError> {
    let graph = load(&a.graph, None)?;
    let mps = load_metapaths(graph.schema(), &a.metapaths)?;
    let mp = mps
        .iter()
        .find(|m| m.id() == a.metapath)
        .ok_or_else(|| CliError::Usage(format!("no metapath {:?} in {}", a.metapath, a.metapaths.display())))?;
    let u = graph.node(&a.node)?;
    if graph.node_type(u) != mp.start_type() {
        return Err(CliError::Usage(format!(
            "metapath {} does not start at the type of {}",
            mp.id(),
            a.node
        )));
    }
    let names = |ns: &[NodeId]| ns.iter().map(|&n| graph.node_name(n)).collect::<Vec<_>>();
    let mut text = String::new();
    let _ = writeln!(text, "node\t{}\nmetapath\t{}", a.node, mp.id());
    if a.enumerate {
        for inst in enumerate_instances(&graph, u, mp) {
            let _ = writeln!(text, "instance\t{}", names(&inst.nodes).join(" "));
        }
    } else {
        let cfg = SamplingConfig {
            n_instances: a.n_instances,
            max_retries: a.max_retries,
            ..SamplingConfig::default()
        };
        let s = seeded_neighborhood(&graph, u, mp, &cfg, a.seed, a.epoch);
        for inst in &s.instances {
            let _ = writeln!(text, "instance\t{}", names(&inst.nodes).join(" "));
        }
        let _ = writeln!(text, "bfs\t{}", names(&s.bfs).join(","));
        let _ = writeln!(text, "dfs\t{}", names(&s.dfs).join(","));
    }
    print!("{text}");
    Ok(())
}

fn split_edges_cmd(a: &SplitEdgesArgs, workers: usize) -> Result<(), CliError> {
    let mut rec = Recorder::new(
        "split-edges",
        a.seed,
        workers,
        json!({"fraction": a.fraction, "edge_types": a.edge_types, "seed": a.seed}),
    );
    let graph = load(&a.graph, Some(&mut rec))?;
    let types = a
        .edge_types
        .iter()
        .map(|t| graph.schema().edge_type_id(t))
        .collect::<Result<Vec<_>, _>>()?;
    let split = split_edges(&graph, &types, a.fraction, a.seed)?;
    let negatives = sample_test_negatives(&graph, &split.test, a.seed, 1000);
    rec.stage("split");
    create_dir(&a.out_dir)?;
    write_graph(&split.train_graph, &a.out_dir)?;
    write_edge_list(&graph, &split.test, &a.out_dir.join("test_edges.tsv"))?;
    write_edge_list(&graph, &negatives, &a.out_dir.join("test_negatives.tsv"))?;
    for f in ["nodes.tsv", "edges.tsv", "schema.json", "test_edges.tsv", "test_negatives.tsv"] {
        rec.artifact(&a.out_dir.join(f))?;
    }
    rec.write(&a.out_dir.join("manifest.json"))?;
    println!(
        "held out {} edges with {} negatives in {}",
        split.test.len(),
        negatives.len(),
        a.out_dir.display()
    );
    Ok(())
}
