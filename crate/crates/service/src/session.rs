//! Sessions and their registry.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime};

use pmax_agents::{
    provider_from_config, LoopLimits, MockProvider, Provider, ProviderConfig, SharedState, TurnOptions,
    DEFAULT_ROW_THRESHOLD,
};
use pmax_core::artifacts::ArtifactStore;
use pmax_core::event_log::{EventLog, LogAbstraction};
use pmax_core::script::Environment;
use serde::Deserialize;

fn default_rows() -> usize {
    DEFAULT_ROW_THRESHOLD
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub provider: ProviderConfig,
    #[serde(default)]
    pub limits: LoopLimits,
    #[serde(default = "default_rows")]
    pub row_threshold: usize,
    /// Canned responses; replaces the endpoint with a mock provider.
    #[serde(default)]
    pub mock_transcript: Option<Vec<String>>,
}

impl SessionSpec {
    /// `(field path, message)` of the first invalid field.
    pub fn validate(&self) -> Result<(), (String, String)> {
        self.provider
            .validate()
            .map_err(|m| split_field("provider", &m))?;
        self.limits.validate().map_err(|m| split_field("limits", &m))?;
        if self.row_threshold == 0 {
            return Err(("row_threshold".into(), "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn options(&self) -> TurnOptions {
        TurnOptions {
            limits: self.limits,
            row_threshold: self.row_threshold,
        }
    }
}

fn split_field(prefix: &str, message: &str) -> (String, String) {
    match message.split_once(": ") {
        Some((field, rest)) => (format!("{prefix}.{field}"), rest.to_string()),
        None => (prefix.to_string(), message.to_string()),
    }
}

pub type ProviderFactory = Arc<dyn Fn(&SessionSpec) -> Result<Arc<dyn Provider>, String> + Send + Sync>;

pub fn default_factory() -> ProviderFactory {
    Arc::new(|spec: &SessionSpec| {
        if let Some(t) = &spec.mock_transcript {
            let m = MockProvider::new(t.clone()).with_model(&spec.provider.model, spec.provider.max_tokens);
            return Ok(Arc::new(m) as Arc<dyn Provider>);
        }
        provider_from_config(&spec.provider)
            .map(Arc::from)
            .map_err(|e| e.to_string())
    })
}

/// The part of a session a query works on.
pub struct Work {
    pub state: SharedState,
    pub env: Environment,
}

#[derive(Default)]
struct Data {
    /// `None` before the first upload and while a query runs.
    work: Option<Work>,
    has_log: bool,
    abstraction: Option<LogAbstraction>,
    /// Read-only view for artifact endpoints.
    snapshot: ArtifactStore,
    /// Store and turn kept when no work is loaded yet.
    store: Option<ArtifactStore>,
}

pub struct Session {
    pub id: String,
    pub spec: SessionSpec,
    pub provider: Arc<dyn Provider>,
    pub created: SystemTime,
    busy: AtomicBool,
    last_used: Mutex<Instant>,
    data: Mutex<Data>,
}

#[derive(Debug, PartialEq, Eq)]
pub enum Busy {
    QueryInFlight,
    NoLog,
}

/// Marks a session busy until dropped.
pub struct BusyGuard(Arc<Session>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::SeqCst);
    }
}

impl Session {
    fn new(id: String, spec: SessionSpec, provider: Arc<dyn Provider>, mirror: Option<PathBuf>) -> Self {
        let store = match mirror {
            Some(dir) => ArtifactStore::with_mirror(dir),
            None => ArtifactStore::new(),
        };
        Session {
            id,
            spec,
            provider,
            created: SystemTime::now(),
            busy: AtomicBool::new(false),
            last_used: Mutex::new(Instant::now()),
            data: Mutex::new(Data {
                snapshot: store.fork(),
                store: Some(store),
                ..Data::default()
            }),
        }
    }

    pub fn touch(&self) {
        *self.last_used.lock().expect("session lock") = Instant::now();
    }

    pub fn idle_for(&self) -> Duration {
        self.last_used.lock().expect("session lock").elapsed()
    }

    pub fn is_busy(&self) -> bool {
        self.busy.load(Ordering::SeqCst)
    }

    pub fn try_begin(self: &Arc<Self>) -> Option<BusyGuard> {
        self.busy
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
            .ok()
            .map(|_| BusyGuard(Arc::clone(self)))
    }

    /// Replaces the log and clears the agents' memory. Artifacts, their id
    /// counter and the turn counter carry over, so ids stay unique.
    pub fn install(&self, log: EventLog, abstraction: LogAbstraction, _guard: &BusyGuard) {
        let mut d = self.data.lock().expect("session lock");
        let (store, turn, index) = match d.work.take() {
            Some(w) => (w.env.store, w.state.turn, w.state.artifact_index),
            None => (d.store.take().expect("store present without work"), 0, Vec::new()),
        };
        let mut state = SharedState::new(abstraction.clone());
        state.turn = turn;
        state.artifact_index = index;
        let env = Environment::new(log, store, turn);
        d.snapshot = env.store.fork();
        d.work = Some(Work { state, env });
        d.has_log = true;
        d.abstraction = Some(abstraction);
    }

    pub fn take_work(&self, _guard: &BusyGuard) -> Result<Work, Busy> {
        self.data.lock().expect("session lock").work.take().ok_or(Busy::NoLog)
    }

    pub fn restore(&self, work: Work, _guard: &BusyGuard) {
        let mut d = self.data.lock().expect("session lock");
        d.snapshot = work.env.store.fork();
        d.work = Some(work);
    }

    pub fn with_snapshot<T>(&self, f: impl FnOnce(&ArtifactStore) -> T) -> T {
        f(&self.data.lock().expect("session lock").snapshot)
    }

    pub fn has_log(&self) -> bool {
        self.data.lock().expect("session lock").has_log
    }

    pub fn abstraction(&self) -> Option<LogAbstraction> {
        self.data.lock().expect("session lock").abstraction.clone()
    }
}

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub idle_timeout: Duration,
    /// Sessions mirror their artifacts under `<data_dir>/<session id>/artifacts`.
    pub data_dir: Option<PathBuf>,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            idle_timeout: Duration::from_secs(60 * 60),
            data_dir: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Arc<Session>>>>,
    pub config: Arc<AppConfig>,
    factory: ProviderFactory,
}

impl AppState {
    pub fn new(config: AppConfig) -> Self {
        Self::with_factory(config, default_factory())
    }

    pub fn with_factory(config: AppConfig, factory: ProviderFactory) -> Self {
        AppState {
            sessions: Arc::new(Mutex::new(HashMap::new())),
            config: Arc::new(config),
            factory,
        }
    }

    pub fn create(&self, spec: SessionSpec) -> Result<Arc<Session>, String> {
        let provider = (self.factory)(&spec)?;
        let mut sessions = self.sessions.lock().expect("registry lock");
        let id = loop {
            let id = format!("{:032x}", rand::random::<u128>());
            if !sessions.contains_key(&id) {
                break id;
            }
        };
        let mirror = self
            .config
            .data_dir
            .as_ref()
            .map(|d| d.join(&id).join("artifacts"));
        let s = Arc::new(Session::new(id.clone(), spec, provider, mirror));
        sessions.insert(id, Arc::clone(&s));
        Ok(s)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        let s = self.sessions.lock().expect("registry lock").get(id).cloned();
        if let Some(s) = &s {
            s.touch();
        }
        s
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle longer than the configured timeout; returns how
    /// many went.
    pub fn evict_idle(&self) -> usize {
        let limit = self.config.idle_timeout;
        let mut sessions = self.sessions.lock().expect("registry lock");
        let before = sessions.len();
        sessions.retain(|_, s| s.is_busy() || s.idle_for() <= limit);
        before - sessions.len()
    }
}
