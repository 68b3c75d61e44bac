use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use causeway_core::comparison::{assemble, assemble_graphs, ComparisonSet};
use causeway_core::dataset::{load_csv, pearson_correlations, top_n, MixedDataset, VariableKind};
use causeway_core::discovery::{backbone_graph, run_discovery, DiscoverySnapshot, JobConfig};
use causeway_core::effects::annotate_effects;
use causeway_core::graph::CausalGraph;
use causeway_core::layout::{attach_layout, layout_graph, to_dot, to_svg, LayeredLayout, SvgScene};
use causeway_core::metrics::{eval_metrics, PredictedEdges};
use causeway_core::synth::generate;
use causeway_service::store::{read_dir_json, FileStore, HistoryEntry, Kind};
use causeway_service::{dataset_id, AppState, DatasetInfo, ServiceConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::*;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::user(format!("cannot read {}: {e}", path.display())))
}

fn read_json(path: &Path) -> Result<Value> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::user(format!("{}: invalid JSON: {e}", path.display())))
}

fn from_value<T: serde::de::DeserializeOwned>(v: Value, path: &Path) -> Result<T> {
    serde_json::from_value(v).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_file(p, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(CliError::internal)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(CliError::internal)?;
    v.push(b'\n');
    Ok(v)
}

fn overrides(t: &TypeOverrides) -> Result<BTreeMap<String, VariableKind>> {
    let mut out = BTreeMap::new();
    for n in &t.categorical {
        out.insert(n.clone(), VariableKind::Categorical);
    }
    for n in &t.continuous {
        if out.insert(n.clone(), VariableKind::Continuous).is_some() {
            return Err(CliError::user(format!("{n:?} is declared both categorical and continuous")));
        }
    }
    Ok(out)
}

pub fn ingest(a: &IngestArgs) -> Result<()> {
    let bytes = read(&a.csv)?;
    let ov = overrides(&a.types)?;
    let ds = load_csv(&bytes, &ov)?;
    let id = dataset_id(&bytes, &ov);
    if let Some(dir) = &a.data_dir {
        let store = FileStore::open(dir).map_err(CliError::internal)?;
        store.put_bytes(Kind::Dataset, &id, "csv", &bytes).map_err(CliError::internal)?;
        store.put(Kind::Dataset, &id, &ds).map_err(CliError::internal)?;
    }
    let info = DatasetInfo { id, variables: ds.variables().to_vec(), rows: ds.row_count(), dropped_rows: ds.dropped_rows() };
    emit(a.out.as_deref(), &to_json(&info)?)
}

fn load_dataset(a: &DiscoverArgs) -> Result<(String, MixedDataset)> {
    let path = PathBuf::from(&a.dataset);
    if path.is_file() {
        let bytes = read(&path)?;
        let ov = overrides(&a.types)?;
        let ds = load_csv(&bytes, &ov)?;
        return Ok((dataset_id(&bytes, &ov), ds));
    }
    let Some(dir) = &a.data_dir else {
        return Err(CliError::user(format!("no such file {}", a.dataset)));
    };
    let store = FileStore::open(dir).map_err(CliError::internal)?;
    let ds: Option<MixedDataset> = store.get(Kind::Dataset, &a.dataset).map_err(|e| CliError::user(format!("dataset {}: {e}", a.dataset)))?;
    let ds = ds.ok_or_else(|| CliError::user(format!("no dataset {:?} in {}", a.dataset, dir.display())))?;
    Ok((a.dataset.clone(), ds))
}

fn selection(a: &DiscoverArgs, ds: &MixedDataset) -> Result<Vec<String>> {
    ds.require(&a.outcome)?;
    let mut vars = if let Some(n) = a.top {
        top_n(&pearson_correlations(ds, &a.outcome)?, n)
    } else if !a.vars.is_empty() {
        a.vars.iter().filter(|v| **v != a.outcome).cloned().collect()
    } else {
        ds.variables().iter().map(|v| v.name.clone()).filter(|v| *v != a.outcome).collect()
    };
    vars.push(a.outcome.clone());
    Ok(vars)
}

/// Backbone graph with effects estimated and a layout attached.
pub fn rendered_graph(id: &str, outcome: &str, dataset: &str, ds: &MixedDataset, snap: &DiscoverySnapshot, a: causeway_core::discovery::Algorithm) -> Result<CausalGraph> {
    let mut g = backbone_graph(id, outcome, snap, a)?;
    g.dataset = Some(dataset.to_string());
    for (from, to, e) in annotate_effects(ds, &mut g) {
        eprintln!("warning: no effect for {from} -> {to}: {e}");
    }
    let l = layout_graph(&g)?;
    attach_layout(&mut g, &l);
    Ok(g)
}

pub fn discover(a: &DiscoverArgs) -> Result<()> {
    let (id, ds) = load_dataset(a)?;
    let vars = selection(a, &ds)?;
    let mut config = JobConfig::new(id.clone(), vars, a.outcome.clone());
    config.ci_alpha = a.alpha;
    config.continuous.threshold = a.threshold;
    config.continuous.max_epochs = a.max_epochs;
    config.rng_seed = a.seed;
    config.algorithms = a.algos.clone();
    let snap = run_discovery(&ds, &config)?;
    for algo in &config.algorithms {
        eprintln!("{:<10} {:?}", format!("{algo:?}").to_lowercase(), snap.status.get(*algo));
    }
    if let Some(path) = &a.graph_out {
        let gid = a.graph_id.clone().unwrap_or_else(|| a.outcome.clone());
        let g = rendered_graph(&gid, &a.outcome, &id, &ds, &snap, a.backbone)?;
        write_file(path, &to_json(&g)?)?;
    }
    emit(a.out.as_deref(), &to_json(&snap)?)
}

/// Reads a graph, a graph view or a history entry.
pub fn load_graph(path: &Path) -> Result<CausalGraph> {
    let mut v = read_json(path)?;
    if let Some(inner) = v.get_mut("graph").filter(|g| g.is_object()) {
        v = inner.take();
    }
    from_value(v, path)
}

fn scene_for(title: &str, layout: &LayeredLayout, graphs: &[&CausalGraph]) -> String {
    to_svg(&SvgScene::new(title, layout, graphs.iter().map(|g| g.outcome.clone()), graphs))
}

fn print_stress(set: &ComparisonSet) {
    let mut wins = 0;
    for s in &set.stress {
        println!("{}\textracted {:.4}\tcompressed {:.4}", s.graph_id, s.extracted, s.compressed);
        if s.compressed <= s.extracted {
            wins += 1;
        }
    }
    println!("compressed <= extracted for {wins}/{} graphs", set.stress.len());
}

fn write_views(set: &ComparisonSet, mode: LayoutMode, svg: Option<&Path>, dot: Option<&Path>) -> Result<()> {
    let by_id: BTreeMap<&str, &CausalGraph> = set.graphs.iter().map(|g| (g.id.as_str(), g)).collect();
    let layout_of = |id: &str| match mode {
        LayoutMode::Super => &set.supergraph.layout,
        LayoutMode::Extracted => &set.extracted[id],
        LayoutMode::Compressed => &set.compressed.subgraphs[id],
    };
    if let Some(dir) = svg {
        if mode == LayoutMode::Super {
            let all: Vec<&CausalGraph> = set.graphs.iter().collect();
            write_file(&dir.join("supergraph.svg"), scene_for("supergraph", &set.supergraph.layout, &all).as_bytes())?;
        } else {
            for (id, g) in &by_id {
                let title = format!("{id} ({})", g.outcome);
                write_file(&dir.join(format!("{id}.svg")), scene_for(&title, layout_of(id), &[g]).as_bytes())?;
            }
        }
    }
    if let Some(dir) = dot {
        for (id, g) in &by_id {
            write_file(&dir.join(format!("{id}.dot")), to_dot(g, Some(layout_of(id))).as_bytes())?;
        }
    }
    Ok(())
}

pub fn layout(a: &LayoutArgs) -> Result<()> {
    let graphs = a.graphs.iter().map(|p| load_graph(p)).collect::<Result<Vec<_>>>()?;
    if graphs.len() == 1 {
        if a.mode != LayoutMode::Extracted || a.stress {
            return Err(CliError::user("supergraph, compressed and stress views need at least two graphs"));
        }
        let g = &graphs[0];
        let l = layout_graph(g)?;
        if let Some(dir) = &a.svg {
            write_file(&dir.join(format!("{}.svg", g.id)), scene_for(&g.id, &l, &[g]).as_bytes())?;
        }
        if let Some(dir) = &a.dot {
            write_file(&dir.join(format!("{}.dot", g.id)), to_dot(g, Some(&l)).as_bytes())?;
        }
        if let Some(out) = &a.out {
            write_file(out, &to_json(&l)?)?;
        }
        return Ok(());
    }
    let set = assemble_graphs(&graphs)?;
    write_views(&set, a.mode, a.svg.as_deref(), a.dot.as_deref())?;
    if a.stress {
        print_stress(&set);
    }
    if let Some(out) = &a.out {
        write_file(out, &to_json(&set)?)?;
    }
    Ok(())
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let nested = a.history.join("history");
    let dir = if nested.is_dir() { nested } else { a.history.clone() };
    if !dir.is_dir() {
        return Err(CliError::user(format!("no history directory at {}", a.history.display())));
    }
    let (entries, errors) = read_dir_json::<HistoryEntry>(&dir).map_err(CliError::internal)?;
    for e in errors {
        eprintln!("warning: {e}");
    }
    let by_id: BTreeMap<String, CausalGraph> = entries.into_iter().map(|e| (e.id, e.graph)).collect();
    let set = assemble(&a.ids, |id| by_id.get(id).cloned())?;
    for s in &set.stress {
        eprintln!("{}\textracted {:.4}\tcompressed {:.4}", s.graph_id, s.extracted, s.compressed);
    }
    emit(a.out.as_deref(), &to_json(&set)?)
}

/// Known structure as written next to synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub coefficients: Vec<f64>,
}

fn load_truth(path: &Path) -> Result<Truth> {
    let v = read_json(path)?;
    if v.get("outcome").is_some() || v.get("graph").is_some() {
        let g = load_graph(path)?;
        if let Some(e) = g.edges.iter().find(|e| !e.directed) {
            return Err(CliError::user(format!("truth edge {} - {} is undirected", e.from, e.to)));
        }
        let edges = g.edges.iter().map(|e| (e.from.clone(), e.to.clone())).collect();
        return Ok(Truth { nodes: g.nodes, edges, coefficients: Vec::new() });
    }
    from_value(v, path)
}

fn graph_prediction(g: &CausalGraph) -> PredictedEdges {
    let mut p = PredictedEdges::default();
    for e in &g.edges {
        let pair = (e.from.clone(), e.to.clone());
        if e.directed {
            p.directed.insert(pair);
        } else {
            p.undirected.insert(pair);
        }
    }
    p
}

/// Named predictions in a file: one per finished algorithm of a snapshot,
/// otherwise one named after the file.
fn load_predictions(path: &Path) -> Result<Vec<(String, PredictedEdges)>> {
    let v = read_json(path)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "pred".into());
    if v.get("status").is_some() && v.get("variables").is_some() {
        let snap: DiscoverySnapshot = from_value(v, path)?;
        let mut out = Vec::new();
        if let Some(p) = &snap.pc {
            out.push(("pc".to_string(), PredictedEdges::from(p)));
        }
        if let Some(c) = &snap.continuous {
            out.push(("continuous".to_string(), PredictedEdges::directed(c.edges.clone())));
        }
        if let Some(h) = &snap.hybrid {
            out.push(("hybrid".to_string(), PredictedEdges::directed(h.edges.clone())));
        }
        if out.is_empty() {
            return Err(CliError::user(format!("{}: snapshot holds no results", path.display())));
        }
        return Ok(out);
    }
    if v.get("outcome").is_some() || v.get("graph").is_some() {
        return Ok(vec![(stem, graph_prediction(&load_graph(path)?))]);
    }
    if v.get("directed").is_some() || v.get("undirected").is_some() {
        return Ok(vec![(stem, from_value(v, path)?)]);
    }
    Err(CliError::user(format!("{}: not a snapshot, graph or edge set", path.display())))
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let truth = load_truth(&a.truth)?;
    let mut preds = Vec::new();
    for p in &a.pred {
        preds.extend(load_predictions(p)?);
    }
    let edges: BTreeSet<(String, String)> = truth.edges.iter().cloned().collect();
    let report = eval_metrics(&truth.nodes, &preds, &edges)?;
    if a.json {
        return emit(None, &to_json(&report)?);
    }
    for r in &report.rows {
        println!("{:<12} accuracy {:.3}  fpr {:.3}  hamming {}", r.name, r.accuracy, r.fpr, r.hamming);
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    if a.n < 2 {
        return Err(CliError::user("--n must be at least 2"));
    }
    let s = generate(a.kind, a.n, a.seed);
    if let Some(path) = &a.truth {
        let truth = Truth { nodes: s.data.variables().iter().map(|v| v.name.clone()).collect(), edges: s.truth.clone(), coefficients: s.coefficients.clone() };
        write_file(path, &to_json(&truth)?)?;
    }
    emit(a.out.as_deref(), &causeway_core::dataset::to_csv(&s.data))
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let config = ServiceConfig { addr: a.addr, data_dir: a.data_dir.clone(), ci_alpha: a.ci_alpha, threshold: a.threshold, max_epochs: a.max_epochs };
    if !(config.ci_alpha > 0.0 && config.ci_alpha < 1.0) || !(config.threshold > 0.0) || config.max_epochs == 0 {
        return Err(CliError::user("--ci-alpha must lie in (0, 1); --threshold and --max-epochs must be positive"));
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(CliError::internal)?;
    rt.block_on(async {
        let state = AppState::open(config.clone()).map_err(|e| CliError::user(format!("cannot open {}: {e}", config.data_dir.display())))?;
        let listener = tokio::net::TcpListener::bind(config.addr).await.map_err(|e| CliError::user(format!("cannot bind {}: {e}", config.addr)))?;
        let addr = listener.local_addr().map_err(CliError::internal)?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        causeway_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(CliError::internal)
    })
}
