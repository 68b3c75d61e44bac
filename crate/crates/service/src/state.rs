//! Shared service state: cached entities over the file store, live jobs and
//! per-graph mutation guards.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::mpsc::{channel, Receiver};
use std::sync::Arc;

use axum::http::StatusCode;
use causeway_core::comparison::{assemble, ComparisonSet};
use causeway_core::dataset::{load_csv, pairwise_summaries, pearson_correlations, top_n, MixedDataset, PairMatrix, VariableKind, VariableSpec};
use causeway_core::discovery::job::{Job, JobEvent};
use causeway_core::discovery::{backbone_graph, overlays, Algorithm, AlgoStatus, DiscoverySnapshot, JobConfig, OverlayEdge};
use causeway_core::effects::annotate_effects;
use causeway_core::graph::{apply_edit, CausalGraph, EditOp};
use causeway_core::layout::{attach_layout, layout_graph};
use chrono::Utc;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::ApiError;
use crate::store::{valid_id, FileStore, GraphRecord, HistoryEntry, JobRecord, Kind};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8787";

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
    /// Defaults applied to job requests that leave these fields out.
    pub ci_alpha: f64,
    pub threshold: f64,
    pub max_epochs: u32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let c = causeway_core::discovery::ContinuousConfig::default();
        Self {
            addr: DEFAULT_ADDR.parse().expect("valid default address"),
            data_dir: PathBuf::from("causeway-data"),
            ci_alpha: 0.05,
            threshold: c.threshold,
            max_epochs: c.max_epochs,
        }
    }
}

/// Content address of a CSV upload together with its type overrides.
pub fn dataset_id(bytes: &[u8], overrides: &BTreeMap<String, VariableKind>) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.update([0u8]);
    h.update(serde_json::to_vec(overrides).expect("serialisable overrides"));
    hex::encode(&h.finalize()[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub variables: Vec<VariableSpec>,
    pub rows: usize,
    pub dropped_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationView {
    pub outcome: String,
    pub entries: Vec<causeway_core::dataset::CorrelationEntry>,
    /// The `top` most correlated variable names.
    pub top: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub id: String,
    pub config: JobConfig,
    pub finished: bool,
    pub snapshot: DiscoverySnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectFailure {
    pub from: String,
    pub to: String,
    pub message: String,
}

/// A graph as served: effects and layout filled in for its current version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphView {
    pub graph: CausalGraph,
    pub job_id: String,
    pub backbone: Algorithm,
    pub overlays: BTreeMap<Algorithm, Vec<OverlayEdge>>,
    pub effect_errors: Vec<EffectFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Control {
    Pause,
    Resume,
    Stop,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NewGraph {
    pub job_id: String,
    #[serde(default)]
    pub algorithm: Option<Algorithm>,
    #[serde(default)]
    pub outcome: Option<String>,
}

enum JobSlot {
    Live(Arc<Job>),
    Archived(Arc<JobRecord>),
}

pub struct AppState {
    pub config: ServiceConfig,
    store: FileStore,
    datasets: RwLock<HashMap<String, Arc<MixedDataset>>>,
    jobs: RwLock<HashMap<String, JobSlot>>,
    graphs: RwLock<HashMap<String, Arc<Mutex<GraphRecord>>>>,
    views: Mutex<HashMap<String, Arc<GraphView>>>,
}

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

impl AppState {
    /// Opens the data directory and reloads graphs and jobs. Jobs that were
    /// still running when the previous process exited are marked failed.
    pub fn open(config: ServiceConfig) -> std::io::Result<Arc<Self>> {
        let store = FileStore::open(&config.data_dir)?;
        let (records, errors) = store.list::<GraphRecord>(Kind::Graph)?;
        for e in errors {
            tracing::warn!("skipping unreadable graph document {e}");
        }
        let graphs = records.into_iter().map(|r| (r.graph.id.clone(), Arc::new(Mutex::new(r)))).collect();
        let (jobs, errors) = store.list::<JobRecord>(Kind::Job)?;
        for e in errors {
            tracing::warn!("skipping unreadable job document {e}");
        }
        let mut slots = HashMap::new();
        for mut j in jobs {
            if !j.finished {
                for a in [Algorithm::Pc, Algorithm::Continuous, Algorithm::Hybrid] {
                    if !j.snapshot.status.get(a).is_terminal() {
                        j.snapshot.status.set(a, AlgoStatus::Failed("interrupted by a service restart".into()));
                    }
                }
                j.finished = true;
                store.put(Kind::Job, &j.id, &j)?;
            }
            slots.insert(j.id.clone(), JobSlot::Archived(Arc::new(j)));
        }
        Ok(Arc::new(Self {
            config,
            store,
            datasets: RwLock::new(HashMap::new()),
            jobs: RwLock::new(slots),
            graphs: RwLock::new(graphs),
            views: Mutex::new(HashMap::new()),
        }))
    }

    pub fn store(&self) -> &FileStore {
        &self.store
    }

    // Datasets

    pub fn ingest(&self, bytes: &[u8], overrides: &BTreeMap<String, VariableKind>) -> Result<DatasetInfo, ApiError> {
        let id = dataset_id(bytes, overrides);
        let ds = match self.dataset(&id) {
            Ok(ds) => ds,
            Err(_) => {
                let ds = load_csv(bytes, overrides)?;
                self.store.put_bytes(Kind::Dataset, &id, "csv", bytes)?;
                self.store.put(Kind::Dataset, &id, &ds)?;
                let ds = Arc::new(ds);
                self.datasets.write().insert(id.clone(), ds.clone());
                ds
            }
        };
        Ok(DatasetInfo { id, variables: ds.variables().to_vec(), rows: ds.row_count(), dropped_rows: ds.dropped_rows() })
    }

    pub fn dataset(&self, id: &str) -> Result<Arc<MixedDataset>, ApiError> {
        if let Some(ds) = self.datasets.read().get(id) {
            return Ok(ds.clone());
        }
        let ds: MixedDataset = self.store.get(Kind::Dataset, id)?.ok_or_else(|| ApiError::not_found("dataset", id))?;
        let ds = Arc::new(ds);
        self.datasets.write().insert(id.to_string(), ds.clone());
        Ok(ds)
    }

    pub fn dataset_info(&self, id: &str) -> Result<DatasetInfo, ApiError> {
        let ds = self.dataset(id)?;
        Ok(DatasetInfo { id: id.to_string(), variables: ds.variables().to_vec(), rows: ds.row_count(), dropped_rows: ds.dropped_rows() })
    }

    pub fn correlations(&self, id: &str, outcome: &str, top: usize) -> Result<CorrelationView, ApiError> {
        let ds = self.dataset(id)?;
        let rep = pearson_correlations(&ds, outcome)?;
        Ok(CorrelationView { top: top_n(&rep, top), outcome: rep.outcome, entries: rep.entries })
    }

    pub fn matrix(&self, id: &str, vars: &[String], cap: usize) -> Result<PairMatrix, ApiError> {
        let ds = self.dataset(id)?;
        Ok(pairwise_summaries(&ds, vars, cap)?)
    }

    // Jobs

    /// Fills fields the request left out from the service defaults.
    fn job_config(&self, mut body: Value) -> Result<JobConfig, ApiError> {
        let obj = body.as_object_mut().ok_or_else(|| ApiError::bad_request("invalid_job", "job configuration must be a JSON object"))?;
        obj.entry("ci_alpha").or_insert(json!(self.config.ci_alpha));
        let cont = obj.entry("continuous").or_insert(json!({}));
        if let Some(c) = cont.as_object_mut() {
            c.entry("threshold").or_insert(json!(self.config.threshold));
            c.entry("max_epochs").or_insert(json!(self.config.max_epochs));
        }
        serde_json::from_value(body).map_err(|e| ApiError::bad_request("invalid_job", e.to_string()))
    }

    pub fn create_job(self: &Arc<Self>, body: Value) -> Result<JobView, ApiError> {
        let config = self.job_config(body)?;
        config.validate()?;
        let ds = self.dataset(&config.dataset)?;
        let id = new_id();
        let job = Job::spawn(id.clone(), ds, config.clone())?;
        let record = JobRecord { id: id.clone(), config: config.clone(), created_at: Utc::now(), snapshot: (*job.snapshot()).clone(), finished: false };
        self.store.put(Kind::Job, &id, &record)?;
        self.jobs.write().insert(id.clone(), JobSlot::Live(job.clone()));
        let state = Arc::clone(self);
        std::thread::Builder::new()
            .name(format!("archive-{id}"))
            .spawn(move || {
                job.wait();
                if let Err(e) = state.archive(&job) {
                    tracing::error!("cannot persist finished job {}: {}", job.id(), e.body.message);
                }
            })
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(JobView { id, config, finished: false, snapshot: record.snapshot })
    }

    fn archive(&self, job: &Job) -> Result<(), ApiError> {
        let mut record: JobRecord = self.store.get(Kind::Job, job.id())?.ok_or_else(|| ApiError::not_found("job", job.id()))?;
        record.snapshot = (*job.snapshot()).clone();
        record.finished = job.is_finished();
        self.store.put(Kind::Job, job.id(), &record)?;
        Ok(())
    }

    fn live_or_archived(&self, id: &str) -> Result<Result<Arc<Job>, Arc<JobRecord>>, ApiError> {
        match self.jobs.read().get(id) {
            Some(JobSlot::Live(j)) => Ok(Ok(j.clone())),
            Some(JobSlot::Archived(r)) => Ok(Err(r.clone())),
            None => Err(ApiError::not_found("job", id)),
        }
    }

    pub fn job(&self, id: &str) -> Result<JobView, ApiError> {
        Ok(match self.live_or_archived(id)? {
            Ok(j) => JobView { id: id.to_string(), config: j.config().clone(), finished: j.is_finished(), snapshot: (*j.snapshot()).clone() },
            Err(r) => JobView { id: r.id.clone(), config: r.config.clone(), finished: true, snapshot: r.snapshot.clone() },
        })
    }

    /// Blocks until the worker acknowledges the request.
    pub fn control(&self, id: &str, op: Control) -> Result<DiscoverySnapshot, ApiError> {
        let job = match self.live_or_archived(id)? {
            Ok(j) => j,
            Err(r) => {
                return Err(ApiError::new(StatusCode::CONFLICT, "job_finished", "job has already finished", json!({ "status": r.snapshot.status })));
            }
        };
        let snap = match op {
            Control::Pause => job.pause()?,
            Control::Resume => job.resume()?,
            Control::Stop => job.stop()?,
        };
        if job.is_finished() {
            self.archive(&job)?;
        }
        Ok((*snap).clone())
    }

    pub fn subscribe(&self, id: &str) -> Result<(DiscoverySnapshot, Receiver<JobEvent>), ApiError> {
        Ok(match self.live_or_archived(id)? {
            Ok(j) => {
                let (s, rx) = j.subscribe();
                ((*s).clone(), rx)
            }
            Err(r) => (r.snapshot.clone(), channel().1),
        })
    }

    // Graphs

    pub fn create_graph(&self, req: NewGraph) -> Result<GraphView, ApiError> {
        let job = self.job(&req.job_id)?;
        let outcome = req.outcome.unwrap_or_else(|| job.config.outcome.clone());
        if !job.config.variables.contains(&outcome) {
            return Err(ApiError::bad_request("invalid_graph", format!("outcome {outcome:?} is not among the job's variables")));
        }
        let backbone = req.algorithm.unwrap_or(Algorithm::Pc);
        let mut graph = backbone_graph(new_id(), &outcome, &job.snapshot, backbone)?;
        graph.dataset = Some(job.config.dataset.clone());
        let record = GraphRecord { graph, job_id: job.id, backbone, overlays: overlays(&job.snapshot) };
        let id = record.graph.id.clone();
        self.store.put(Kind::Graph, &id, &record)?;
        self.graphs.write().insert(id.clone(), Arc::new(Mutex::new(record)));
        self.graph(&id)
    }

    fn record(&self, id: &str) -> Result<Arc<Mutex<GraphRecord>>, ApiError> {
        self.graphs.read().get(id).cloned().ok_or_else(|| ApiError::not_found("graph", id))
    }

    pub fn edit(&self, id: &str, op: &EditOp) -> Result<GraphView, ApiError> {
        let slot = self.record(id)?;
        let view = {
            let mut rec = slot.lock();
            let mut next = rec.clone();
            next.graph = apply_edit(&rec.graph, op)?;
            next.graph.clear_effects();
            next.graph.layout = None;
            self.store.put(Kind::Graph, id, &next)?;
            *rec = next;
            self.render(&rec)
        };
        Ok(view)
    }

    pub fn graph(&self, id: &str) -> Result<GraphView, ApiError> {
        let slot = self.record(id)?;
        let rec = slot.lock();
        Ok(self.render(&rec))
    }

    /// Effects and layout for the record's current version, cached per
    /// version.
    fn render(&self, rec: &GraphRecord) -> GraphView {
        if let Some(v) = self.views.lock().get(&rec.graph.id) {
            if v.graph.version == rec.graph.version {
                return (**v).clone();
            }
        }
        let mut graph = rec.graph.clone();
        let mut effect_errors = Vec::new();
        match graph.dataset.clone().map(|d| self.dataset(&d)) {
            Some(Ok(ds)) => {
                for (from, to, e) in annotate_effects(&ds, &mut graph) {
                    effect_errors.push(EffectFailure { from, to, message: e.to_string() });
                }
            }
            Some(Err(e)) => effect_errors.push(EffectFailure { from: String::new(), to: String::new(), message: e.body.message }),
            None => {}
        }
        match layout_graph(&graph) {
            Ok(l) => attach_layout(&mut graph, &l),
            Err(e) => tracing::warn!("layout of graph {} failed: {e}", graph.id),
        }
        let view = GraphView { graph, job_id: rec.job_id.clone(), backbone: rec.backbone, overlays: rec.overlays.clone(), effect_errors };
        self.views.lock().insert(rec.graph.id.clone(), Arc::new(view.clone()));
        view
    }

    pub fn save(&self, id: &str) -> Result<HistoryEntry, ApiError> {
        let slot = self.record(id)?;
        let rec = slot.lock();
        let view = self.render(&rec);
        let entry = HistoryEntry { id: new_id(), graph_id: id.to_string(), outcome: view.graph.outcome.clone(), saved_at: Utc::now(), graph: view.graph };
        self.store.put(Kind::History, &entry.id, &entry)?;
        Ok(entry)
    }

    pub fn history(&self) -> Result<Vec<HistoryEntry>, ApiError> {
        let (mut entries, errors) = self.store.list::<HistoryEntry>(Kind::History)?;
        for e in errors {
            tracing::warn!("skipping unreadable history document {e}");
        }
        entries.sort_by(|a, b| a.saved_at.cmp(&b.saved_at).then_with(|| a.id.cmp(&b.id)));
        Ok(entries)
    }

    pub fn history_entry(&self, id: &str) -> Result<HistoryEntry, ApiError> {
        self.store.get(Kind::History, id)?.ok_or_else(|| ApiError::not_found("history entry", id))
    }

    /// Ids may name history entries or live graphs; history is tried first.
    pub fn compare(&self, ids: &[String]) -> Result<ComparisonSet, ApiError> {
        let lookup = |id: &str| -> Option<CausalGraph> {
            if !valid_id(id) {
                return None;
            }
            if let Ok(Some(h)) = self.store.get::<HistoryEntry>(Kind::History, id) {
                return Some(h.graph);
            }
            self.graph(id).ok().map(|v| v.graph)
        };
        Ok(assemble(ids, lookup)?)
    }
}
