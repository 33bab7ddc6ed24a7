//! File-backed event store with a fitted-model registry.
//!
//! Layout of a store directory:
//!
//! ```text
//! events.jsonl        one GeoEvent per line, append-only
//! models/<id>.json    one StoredModel per fit or imported table
//! ```
//!
//! Readers take a cheap snapshot and never wait on writers. Mutations
//! (ingest, fit, table import) hold a single writer lease; a second mutation
//! attempted meanwhile fails with [`StoreError::Busy`].

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{Datelike, NaiveDate};
use eventmap::corpus::{corpus_from_events, Corpus, Stopwords};
use eventmap::dyntopic::{fit_cdtm, theta_from_state, CdtmParams, Epochs};
use eventmap::lda::{fit_gibbs, LdaModel, LdaParams, ThetaMatrix};
use eventmap::relevance::{build_table, ProportionTable};
use eventmap::GeoEvent;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const LOG_FILE: &str = "events.jsonl";
const MODEL_DIR: &str = "models";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("another write is in progress")]
    Busy,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt event log at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("invalid filter: {0}")]
    Filter(String),
    #[error("no fitted model available for topic filtering")]
    NoModel,
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("unknown job {0:?}")]
    UnknownJob(String),
    #[error("store has no events")]
    Empty,
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("injected crash after log write")]
    InjectedCrash,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Result of [`EventStore::ingest`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub appended: usize,
    pub duplicates: Vec<String>,
}

#[derive(Debug, Default)]
struct Snapshot {
    events: Vec<GeoEvent>,
    by_id: HashMap<String, usize>,
    by_fips: BTreeMap<String, Vec<usize>>,
    by_month: BTreeMap<(i32, u32), Vec<usize>>,
    by_type: BTreeMap<String, Vec<usize>>,
    models: BTreeMap<String, Arc<StoredModel>>,
}

impl Snapshot {
    fn push(&mut self, event: GeoEvent) {
        if self.by_id.contains_key(event.id()) {
            return;
        }
        let i = self.events.len();
        self.by_id.insert(event.raw.id.clone(), i);
        self.by_fips.entry(event.fips.clone()).or_default().push(i);
        self.by_month.entry((event.date().year(), event.date().month())).or_default().push(i);
        self.by_type.entry(event.raw.event_type.clone()).or_default().push(i);
        self.events.push(event);
    }

    fn with_events(events: Vec<GeoEvent>, models: BTreeMap<String, Arc<StoredModel>>) -> Self {
        let mut s = Snapshot { models, ..Default::default() };
        for e in events {
            s.push(e);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lda,
    Cdtm,
    Table,
}

/// What to fit. Unset fields take the model's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub model: ModelKind,
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_count: Option<usize>,
}

impl FitSpec {
    pub fn lda(k: usize, seed: u64) -> Self {
        Self {
            model: ModelKind::Lda,
            k,
            seed,
            alpha: None,
            eta: None,
            iterations: None,
            burn_in: None,
            sigma2_rate: None,
            v0: None,
            max_iters: None,
            min_count: None,
        }
    }
}

/// A fitted model or imported table, with everything needed to answer
/// topic queries without refitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub id: String,
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<FitSpec>,
    pub topic_labels: Vec<String>,
    pub top_words: Vec<Vec<String>>,
    /// Ids of the events the model was fitted on, aligned with `theta`.
    pub event_ids: Vec<String>,
    pub theta: ThetaMatrix,
    /// Serialized LDA or dynamic model; absent for tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<serde_json::Value>,
    /// CSV of an imported proportion table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_csv: Option<String>,
}

impl StoredModel {
    pub fn topic_index(&self, topic: &str) -> Option<usize> {
        self.topic_labels
            .iter()
            .position(|l| l == topic)
            .or_else(|| topic.parse::<usize>().ok().filter(|&k| k < self.topic_labels.len()))
    }

    pub fn model_bytes(&self) -> Vec<u8> {
        self.model.as_ref().map(|m| serde_json::to_vec(m).expect("value serializes")).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done { model_id: String },
    Failed { error: String },
}

/// Conjunctive event filter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventFilter {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub fips: Option<String>,
    pub event_type: Option<String>,
    pub topic: Option<String>,
    pub min_prop: Option<f64>,
    /// Model used for the topic filter; the latest fit when unset.
    pub model: Option<String>,
}

struct Lease<'a>(&'a AtomicBool);

impl Drop for Lease<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

pub struct EventStore {
    dir: PathBuf,
    snapshot: RwLock<Arc<Snapshot>>,
    writer: AtomicBool,
    crash_after_log_write: AtomicBool,
    jobs: Mutex<BTreeMap<String, JobStatus>>,
    next_job: AtomicU64,
    stopwords: Stopwords,
}

impl EventStore {
    /// Opens or creates a store, rebuilding every index from the log. A
    /// final line cut short by a crash is discarded.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::open_with(dir, Stopwords::english())
    }

    pub fn open_with(dir: impl AsRef<Path>, stopwords: Stopwords) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join(MODEL_DIR))?;
        let events = read_log(&dir.join(LOG_FILE))?;
        let mut models = BTreeMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir.join(MODEL_DIR))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let model: StoredModel = serde_json::from_slice(&fs::read(&path)?)?;
            models.insert(model.id.clone(), Arc::new(model));
        }
        let job_base = models.len() as u64;
        Ok(Self {
            dir,
            snapshot: RwLock::new(Arc::new(Snapshot::with_events(events, models))),
            writer: AtomicBool::new(false),
            crash_after_log_write: AtomicBool::new(false),
            jobs: Mutex::new(BTreeMap::new()),
            next_job: AtomicU64::new(job_base + 1),
            stopwords,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn snap(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn lease(&self) -> Result<Lease<'_>, StoreError> {
        self.writer
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map(|_| Lease(&self.writer))
            .map_err(|_| StoreError::Busy)
    }

    /// Makes the next ingest stop after writing the log and before
    /// publishing the new indexes, as a crash would.
    pub fn inject_crash_after_log_write(&self) {
        self.crash_after_log_write.store(true, Ordering::SeqCst);
    }

    pub fn len(&self) -> usize {
        self.snap().events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every event in log order.
    pub fn events(&self) -> Vec<GeoEvent> {
        self.snap().events.clone()
    }

    /// Appends events whose ids are new. Ids already stored, or repeated
    /// within the batch, are reported and skipped.
    pub fn ingest(&self, events: &[GeoEvent]) -> Result<IngestReport, StoreError> {
        let _lease = self.lease()?;
        let current = self.snap();
        let mut seen = std::collections::HashSet::new();
        let mut fresh = Vec::new();
        let mut duplicates = Vec::new();
        for e in events {
            if current.by_id.contains_key(e.id()) || !seen.insert(e.id().to_string()) {
                duplicates.push(e.id().to_string());
            } else {
                fresh.push(e.clone());
            }
        }
        if fresh.is_empty() {
            return Ok(IngestReport { appended: 0, duplicates });
        }
        let mut lines = Vec::new();
        for e in &fresh {
            serde_json::to_writer(&mut lines, e)?;
            lines.push(b'\n');
        }
        append_or_rollback(&self.dir.join(LOG_FILE), &lines)?;
        if self.crash_after_log_write.swap(false, Ordering::SeqCst) {
            return Err(StoreError::InjectedCrash);
        }
        let mut next = Snapshot::with_events(current.events.clone(), current.models.clone());
        for e in fresh.iter().cloned() {
            next.push(e);
        }
        *self.snapshot.write().expect("snapshot lock") = Arc::new(next);
        tracing::info!(appended = fresh.len(), duplicates = duplicates.len(), "ingested events");
        Ok(IngestReport { appended: fresh.len(), duplicates })
    }

    /// Events matching every set predicate, sorted by date then id.
    pub fn query(&self, filter: &EventFilter) -> Result<Vec<GeoEvent>, StoreError> {
        if let (Some(from), Some(to)) = (filter.from, filter.to) {
            if from > to {
                return Err(StoreError::Filter(format!("from {from} is after to {to}")));
            }
        }
        if filter.min_prop.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
            return Err(StoreError::Filter("min_prop must lie in [0, 1]".into()));
        }
        if filter.min_prop.is_some() && filter.topic.is_none() {
            return Err(StoreError::Filter("min_prop needs a topic".into()));
        }
        let snap = self.snap();
        let topic = match &filter.topic {
            Some(t) => {
                let model = resolve_model(&snap, filter.model.as_deref(), true)?;
                let k = model.topic_index(t).ok_or_else(|| StoreError::UnknownTopic(t.clone()))?;
                let rows: HashMap<String, f64> = model
                    .event_ids
                    .iter()
                    .zip(model.theta.rows())
                    .map(|(id, row)| (id.clone(), row[k]))
                    .collect();
                Some((rows, filter.min_prop))
            }
            None => None,
        };

        let candidates: Vec<usize> = if let Some(f) = &filter.fips {
            snap.by_fips.get(f).cloned().unwrap_or_default()
        } else if let Some(t) = &filter.event_type {
            snap.by_type.get(t).cloned().unwrap_or_default()
        } else {
            let lo = filter.from.map_or((i32::MIN, 0), |d| (d.year(), d.month()));
            let hi = filter.to.map_or((i32::MAX, 12), |d| (d.year(), d.month()));
            snap.by_month.range(lo..=hi).flat_map(|(_, v)| v.iter().copied()).collect()
        };
        let mut out: Vec<GeoEvent> = candidates
            .into_iter()
            .map(|i| &snap.events[i])
            .filter(|e| filter.from.is_none_or(|d| e.date() >= d))
            .filter(|e| filter.to.is_none_or(|d| e.date() <= d))
            .filter(|e| filter.fips.as_ref().is_none_or(|f| &e.fips == f))
            .filter(|e| filter.event_type.as_ref().is_none_or(|t| &e.raw.event_type == t))
            .filter(|e| match &topic {
                Some((rows, min)) => rows.get(e.id()).is_some_and(|p| min.is_none_or(|m| *p > m)),
                None => true,
            })
            .cloned()
            .collect();
        out.sort_by(|a, b| a.date().cmp(&b.date()).then_with(|| a.raw.id.cmp(&b.raw.id)));
        Ok(out)
    }

    pub fn models(&self) -> Vec<Arc<StoredModel>> {
        self.snap().models.values().cloned().collect()
    }

    /// A model by id, or the most recent fitted one when `id` is `None`.
    pub fn model(&self, id: Option<&str>) -> Result<Arc<StoredModel>, StoreError> {
        resolve_model(&self.snap(), id, false)
    }

    /// Proportion table of a model: imported as is, or averaged from θ.
    pub fn table(&self, id: Option<&str>) -> Result<ProportionTable, StoreError> {
        let snap = self.snap();
        let model = resolve_model(&snap, id, false)?;
        model_table(&snap, &model)
    }

    /// Events aligned with a fitted model's θ rows.
    pub fn model_events(&self, model: &StoredModel) -> Result<Vec<GeoEvent>, StoreError> {
        let snap = self.snap();
        model_events(&snap, model)
    }

    pub fn import_table(&self, id: &str, table: &ProportionTable) -> Result<String, StoreError> {
        let _lease = self.lease()?;
        let model = StoredModel {
            id: id.to_string(),
            kind: ModelKind::Table,
            spec: None,
            topic_labels: table.topics().to_vec(),
            top_words: vec![Vec::new(); table.topics().len()],
            event_ids: Vec::new(),
            theta: ThetaMatrix(Vec::new()),
            model: None,
            table_csv: Some(String::from_utf8(table.to_csv()).expect("csv is utf-8")),
        };
        self.publish_model(model)
    }

    fn publish_model(&self, model: StoredModel) -> Result<String, StoreError> {
        let path = self.dir.join(MODEL_DIR).join(format!("{}.json", model.id));
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec(&model)?)?;
        fs::rename(&tmp, &path)?;
        let id = model.id.clone();
        let mut guard = self.snapshot.write().expect("snapshot lock");
        let mut models = guard.models.clone();
        models.insert(id.clone(), Arc::new(model));
        let events = guard.events.clone();
        *guard = Arc::new(Snapshot::with_events(events, models));
        Ok(id)
    }

    /// Fits synchronously and registers the model.
    pub fn fit(&self, spec: &FitSpec) -> Result<String, StoreError> {
        let _lease = self.lease()?;
        self.fit_locked(spec)
    }

    fn fit_locked(&self, spec: &FitSpec) -> Result<String, StoreError> {
        let snap = self.snap();
        if snap.events.is_empty() {
            return Err(StoreError::Empty);
        }
        let mut events = snap.events.clone();
        events.sort_by(|a, b| a.date().cmp(&b.date()).then_with(|| a.raw.id.cmp(&b.raw.id)));
        let id = next_model_id(&snap, spec.model);
        let model = fit_model(&id, spec, &events, &self.stopwords)?;
        self.publish_model(model)
    }

    /// Starts a fit in the background and returns its job id. Fails at once
    /// with [`StoreError::Busy`] while another write is in progress.
    pub fn start_fit_job(self: &Arc<Self>, spec: FitSpec) -> Result<String, StoreError> {
        self.writer
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map_err(|_| StoreError::Busy)?;
        let job = format!("job-{}", self.next_job.fetch_add(1, Ordering::SeqCst));
        self.set_job(&job, JobStatus::Queued);
        let store = Arc::clone(self);
        let job_id = job.clone();
        std::thread::spawn(move || {
            let _lease = Lease(&store.writer);
            store.set_job(&job_id, JobStatus::Running);
            let status = match store.fit_locked(&spec) {
                Ok(model_id) => JobStatus::Done { model_id },
                Err(e) => JobStatus::Failed { error: e.to_string() },
            };
            store.set_job(&job_id, status);
        });
        Ok(job)
    }

    fn set_job(&self, id: &str, status: JobStatus) {
        self.jobs.lock().expect("jobs lock").insert(id.to_string(), status);
    }

    pub fn job(&self, id: &str) -> Result<JobStatus, StoreError> {
        self.jobs.lock().expect("jobs lock").get(id).cloned().ok_or_else(|| StoreError::UnknownJob(id.into()))
    }

    /// Polls a job until it leaves the queued and running states.
    pub fn wait_job(&self, id: &str) -> Result<JobStatus, StoreError> {
        loop {
            match self.job(id)? {
                JobStatus::Queued | JobStatus::Running => std::thread::sleep(std::time::Duration::from_millis(20)),
                done => return Ok(done),
            }
        }
    }
}

fn resolve_model(snap: &Snapshot, id: Option<&str>, fitted_only: bool) -> Result<Arc<StoredModel>, StoreError> {
    match id {
        Some(id) => {
            let m = snap.models.get(id).cloned().ok_or_else(|| StoreError::UnknownModel(id.into()))?;
            if fitted_only && m.kind == ModelKind::Table {
                return Err(StoreError::NoModel);
            }
            Ok(m)
        }
        None => snap
            .models
            .values()
            .filter(|m| !fitted_only || m.kind != ModelKind::Table)
            .max_by(|a, b| model_order(&a.id).cmp(&model_order(&b.id)))
            .cloned()
            .ok_or(StoreError::NoModel),
    }
}

/// Sort key putting later fits last: the numeric suffix, then the id.
fn model_order(id: &str) -> (u64, &str) {
    let n = id.rsplit('-').next().and_then(|s| s.parse().ok()).unwrap_or(0);
    (n, id)
}

fn next_model_id(snap: &Snapshot, kind: ModelKind) -> String {
    let n = snap.models.keys().map(|k| model_order(k).0).max().unwrap_or(0) + 1;
    let prefix = match kind {
        ModelKind::Lda => "lda",
        ModelKind::Cdtm => "cdtm",
        ModelKind::Table => "table",
    };
    format!("{prefix}-{n:04}")
}

fn model_events(snap: &Snapshot, model: &StoredModel) -> Result<Vec<GeoEvent>, StoreError> {
    model
        .event_ids
        .iter()
        .map(|id| {
            snap.by_id
                .get(id)
                .map(|&i| snap.events[i].clone())
                .ok_or_else(|| StoreError::Fit(format!("model {} refers to missing event {id}", model.id)))
        })
        .collect()
}

fn model_table(snap: &Snapshot, model: &StoredModel) -> Result<ProportionTable, StoreError> {
    match &model.table_csv {
        Some(csv) => ProportionTable::from_csv(csv.as_bytes()).map_err(|e| StoreError::Fit(e.to_string())),
        None => {
            let events = model_events(snap, model)?;
            build_table(&model.theta, &events, &model.topic_labels).map_err(|e| StoreError::Fit(e.to_string()))
        }
    }
}

/// Names each topic after the event type most often dominated by it, when
/// that name is unique among topics; otherwise `topic k`.
fn topic_labels(theta: &ThetaMatrix, events: &[GeoEvent], k: usize) -> Vec<String> {
    let mut votes: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); k];
    for (d, e) in events.iter().enumerate() {
        *votes[theta.argmax(d)].entry(e.raw.event_type.as_str()).or_insert(0) += 1;
    }
    let winners: Vec<Option<&str>> = votes
        .iter()
        .map(|v| v.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0))).map(|(t, _)| *t))
        .collect();
    winners
        .iter()
        .enumerate()
        .map(|(i, w)| match w {
            Some(name) if winners.iter().filter(|x| *x == w).count() == 1 => name.to_string(),
            _ => format!("topic {i}"),
        })
        .collect()
}

fn words(corpus: &Corpus, ids: &[u32]) -> Vec<String> {
    ids.iter().filter_map(|&w| corpus.vocabulary.word(w).map(str::to_string)).collect()
}

fn fit_model(id: &str, spec: &FitSpec, events: &[GeoEvent], stopwords: &Stopwords) -> Result<StoredModel, StoreError> {
    let fail = |e: &dyn std::fmt::Display| StoreError::Fit(e.to_string());
    if spec.k < 1 {
        return Err(StoreError::Fit("invalid argument: K must be at least 1".into()));
    }
    let corpus = corpus_from_events(events, stopwords, spec.min_count.unwrap_or(1)).map_err(|e| fail(&e))?;
    let (theta, top_words, model) = match spec.model {
        ModelKind::Lda => {
            let defaults = LdaParams::new(spec.k);
            let params = LdaParams {
                alpha: spec.alpha.unwrap_or(defaults.alpha),
                eta: spec.eta.unwrap_or(defaults.eta),
                iterations: spec.iterations.unwrap_or(defaults.iterations),
                burn_in: spec.burn_in.unwrap_or(defaults.burn_in),
                seed: spec.seed,
                ..defaults
            };
            let (model, theta): (LdaModel, ThetaMatrix) = fit_gibbs(&corpus, &params).map_err(|e| fail(&e))?;
            let top = (0..spec.k).map(|k| words(&corpus, &model.top_words(k, 10))).collect();
            (theta, top, serde_json::from_slice(&model.to_json())?)
        }
        ModelKind::Cdtm => {
            let defaults = CdtmParams::new(spec.k);
            let params = CdtmParams {
                alpha: spec.alpha.unwrap_or(defaults.alpha),
                sigma2_rate: spec.sigma2_rate.unwrap_or(defaults.sigma2_rate),
                v0: spec.v0.unwrap_or(defaults.v0),
                max_iters: spec.max_iters.unwrap_or(defaults.max_iters),
                init_sweeps: spec.iterations.unwrap_or(defaults.init_sweeps),
                seed: spec.seed,
                ..defaults
            };
            let epochs = Epochs::monthly(&corpus);
            let fit = fit_cdtm(&corpus, &epochs, &params).map_err(|e| fail(&e))?;
            let top = (0..spec.k)
                .map(|k| {
                    let mean = fit.model.mean_word_probs(k);
                    let mut order: Vec<u32> = (0..mean.len() as u32).collect();
                    order.sort_by(|&a, &b| mean[b as usize].total_cmp(&mean[a as usize]).then(a.cmp(&b)));
                    order.truncate(10);
                    words(&corpus, &order)
                })
                .collect();
            let mut value: serde_json::Value = serde_json::from_slice(&fit.model.to_json())?;
            value["vocab"] = serde_json::to_value(corpus.vocabulary.words())?;
            (theta_from_state(&fit.state), top, value)
        }
        ModelKind::Table => return Err(StoreError::Fit("tables are imported, not fitted".into())),
    };
    Ok(StoredModel {
        id: id.to_string(),
        kind: spec.model,
        spec: Some(spec.clone()),
        topic_labels: topic_labels(&theta, events, spec.k),
        top_words,
        event_ids: events.iter().map(|e| e.raw.id.clone()).collect(),
        theta,
        model: Some(model),
        table_csv: None,
    })
}

fn read_log(path: &Path) -> Result<Vec<GeoEvent>, StoreError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let bytes = fs::read(path)?;
    let mut events = Vec::new();
    let mut good_len = 0usize;
    let mut reader = BufReader::new(&bytes[..]);
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            break;
        }
        n += 1;
        let complete = line.ends_with('\n');
        match (serde_json::from_str::<GeoEvent>(line.trim_end()), complete) {
            (Ok(e), true) => events.push(e),
            (Ok(e), false) => {
                events.push(e);
                OpenOptions::new().append(true).open(path)?.write_all(b"\n")?;
            }
            (Err(_), false) => {
                tracing::warn!(line = n, "discarding torn final log line");
                OpenOptions::new().write(true).open(path)?.set_len(good_len as u64)?;
                break;
            }
            (Err(_), true) if line.trim().is_empty() => {}
            (Err(e), true) => return Err(StoreError::Corrupt { line: n, message: e.to_string() }),
        }
        good_len += read;
    }
    Ok(events)
}

fn append_or_rollback(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let mut file: File = OpenOptions::new().create(true).append(true).open(path)?;
    let before = file.metadata()?.len();
    let result = file.write_all(bytes).and_then(|_| file.sync_data());
    if let Err(e) = result {
        let _ = file.set_len(before);
        return Err(e.into());
    }
    Ok(())
}
