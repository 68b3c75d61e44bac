//! One JSON document per entity under a data directory. Every write goes to
//! a temporary file that is synced and renamed into place.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use causeway_core::discovery::{Algorithm, DiscoverySnapshot, JobConfig, OverlayEdge};
use causeway_core::graph::CausalGraph;
use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Dataset,
    Job,
    Graph,
    History,
}

impl Kind {
    fn dir(self) -> &'static str {
        match self {
            Kind::Dataset => "datasets",
            Kind::Job => "jobs",
            Kind::Graph => "graphs",
            Kind::History => "history",
        }
    }
}

/// A saved, immutable copy of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub id: String,
    pub graph_id: String,
    pub outcome: String,
    pub saved_at: DateTime<Utc>,
    pub graph: CausalGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub config: JobConfig,
    pub created_at: DateTime<Utc>,
    /// Latest persisted state; final once `finished` is set.
    pub snapshot: DiscoverySnapshot,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub graph: CausalGraph,
    pub job_id: String,
    pub backbone: Algorithm,
    pub overlays: BTreeMap<Algorithm, Vec<OverlayEdge>>,
}

/// Ids become file names, so only a conservative alphabet is accepted.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

#[derive(Debug, Clone)]
pub struct FileStore {
    root: PathBuf,
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        for k in [Kind::Dataset, Kind::Job, Kind::Graph, Kind::History] {
            fs::create_dir_all(root.join(k.dir()))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, kind: Kind) -> PathBuf {
        self.root.join(kind.dir())
    }

    fn path(&self, kind: Kind, id: &str, ext: &str) -> io::Result<PathBuf> {
        if !valid_id(id) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("invalid id {id:?}")));
        }
        Ok(self.dir(kind).join(format!("{id}.{ext}")))
    }

    pub fn put_bytes(&self, kind: Kind, id: &str, ext: &str, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.path(kind, id, ext)?, bytes)
    }

    pub fn put<T: Serialize>(&self, kind: Kind, id: &str, value: &T) -> io::Result<()> {
        let bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        self.put_bytes(kind, id, "json", &bytes)
    }

    pub fn get<T: DeserializeOwned>(&self, kind: Kind, id: &str) -> io::Result<Option<T>> {
        let path = match self.path(kind, id, "json") {
            Ok(p) => p,
            Err(_) => return Ok(None),
        };
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn exists(&self, kind: Kind, id: &str) -> bool {
        self.path(kind, id, "json").map(|p| p.exists()).unwrap_or(false)
    }

    /// Every readable document of `kind`. Unreadable files are skipped and
    /// reported.
    pub fn list<T: DeserializeOwned>(&self, kind: Kind) -> io::Result<(Vec<T>, Vec<String>)> {
        read_dir_json(&self.dir(kind))
    }
}

pub fn read_dir_json<T: DeserializeOwned>(dir: &Path) -> io::Result<(Vec<T>, Vec<String>)> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for p in names {
        match fs::read(&p).map_err(|e| e.to_string()).and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string())) {
            Ok(v) => out.push(v),
            Err(e) => errors.push(format!("{}: {e}", p.display())),
        }
    }
    Ok((out, errors))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("store paths have a parent");
    let tmp = dir.join(format!(".{}.{}.tmp", path.file_name().and_then(|n| n.to_str()).unwrap_or("doc"), uuid::Uuid::new_v4().simple()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        // Persist the rename itself.
        File::open(dir)?.sync_all()
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}
