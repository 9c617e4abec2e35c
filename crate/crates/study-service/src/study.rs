//! The running study: assignment, per-session serialization and persistence.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use coax::data::{DatasetSpec, SplitSizes};
use coax::experiment::{derive_seed, Domain, DomainConfig, ExplainedPool, SessionRecord, XaiConfig, XaiType};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{StudyConfig, XaiWeights};
use crate::screening::items_for;
use crate::session::{Answer, Assignment, Phase, SessionState, TrialPayload};
use crate::store::{Event, Store};
use crate::StudyError;

/// An explained instance pool sessions draw their splits from.
#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub spec: DatasetSpec,
    pub pool: ExplainedPool,
}

impl PoolEntry {
    pub fn name(&self) -> &str {
        &self.pool.dataset
    }
}

/// Trains the AI model of every configured dataset and explains its pool.
pub fn prepare_pools(cfg: &StudyConfig) -> Result<Vec<PoolEntry>, StudyError> {
    cfg.datasets
        .iter()
        .map(|d| {
            let dc = DomainConfig {
                n_attributes: d.n_attributes,
                ..DomainConfig::new(d.dataset, d.seed)
            };
            let domain = Domain::prepare(&dc)?;
            tracing::info!(dataset = %domain.name, accuracy = domain.accuracy, "AI model ready");
            Ok(PoolEntry {
                spec: domain.spec.clone(),
                pool: domain.explain(&cfg.explainer)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct CreateRequest {
    /// Opaque participant code; generated when absent.
    #[serde(default)]
    pub participant_id: Option<String>,
    /// Token of a completed session to continue with a second session.
    #[serde(default)]
    pub continue_from: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CreateResponse {
    pub token: String,
    pub session_id: String,
    pub assignment: Assignment,
    pub trial: TrialPayload,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SubmitRequest {
    /// The payload `step` being answered.
    pub step: usize,
    #[serde(default)]
    pub label: Option<coax::Label>,
    #[serde(default)]
    pub choice: Option<usize>,
}

impl SubmitRequest {
    pub fn answer(&self) -> Result<Answer, StudyError> {
        match (self.label, self.choice) {
            (Some(l), None) => Ok(Answer::Label(l)),
            (None, Some(c)) => Ok(Answer::Choice(c)),
            (None, None) => Ok(Answer::Acknowledge),
            (Some(_), Some(_)) => Err(StudyError::BadRequest("send either `label` or `choice`".into())),
        }
    }
}

/// Draws an XAI type with probability proportional to its weight.
pub fn draw_xai_type(weights: &XaiWeights, rng: &mut impl Rng) -> XaiType {
    let w = WeightedIndex::new(XaiType::ALL.map(|t| weights.get(t))).expect("weights are validated");
    XaiType::ALL[w.sample(rng)]
}

type Shared = Arc<Mutex<SessionState>>;

#[derive(Default)]
struct Registry {
    by_token: HashMap<String, Shared>,
    order: Vec<Shared>,
    next_split: HashMap<String, usize>,
}

pub struct Study {
    config: StudyConfig,
    pools: Vec<PoolEntry>,
    store: Store,
    registry: RwLock<Registry>,
    unsnapshotted: AtomicUsize,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn random_hex(bytes: usize) -> String {
    let mut rng = rand::rng();
    (0..bytes).map(|_| format!("{:02x}", rng.random::<u8>())).collect()
}

fn lock(s: &Shared) -> std::sync::MutexGuard<'_, SessionState> {
    s.lock().unwrap_or_else(|e| e.into_inner())
}

impl Study {
    /// Opens the data directory and restores every persisted session.
    pub fn open(config: StudyConfig, pools: Vec<PoolEntry>) -> Result<Self, StudyError> {
        config.validate()?;
        if pools.is_empty() {
            return Err(StudyError::Config("no instance pools".into()));
        }
        let store = Store::open(&config.data_dir)?;
        let mut registry = Registry::default();
        for state in store.recover()? {
            let next = registry.next_split.entry(state.assignment.dataset.clone()).or_default();
            *next = (*next).max(state.assignment.split + 1);
            let shared = Arc::new(Mutex::new(state));
            registry.by_token.insert(lock(&shared).token.clone(), shared.clone());
            registry.order.push(shared);
        }
        tracing::info!(sessions = registry.order.len(), "study state restored");
        Ok(Self {
            config,
            pools,
            store,
            registry: RwLock::new(registry),
            unsnapshotted: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn pool_index(&self, name: &str) -> Option<usize> {
        self.pools.iter().position(|p| p.name() == name)
    }

    fn session(&self, token: &str) -> Result<Shared, StudyError> {
        let reg = self.registry.read().unwrap_or_else(|e| e.into_inner());
        reg.by_token.get(token).cloned().ok_or(StudyError::Auth)
    }

    pub fn create(&self, req: &CreateRequest) -> Result<CreateResponse, StudyError> {
        let mut reg = self.registry.write().unwrap_or_else(|e| e.into_inner());
        let seq = reg.order.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &[0, seq]));
        let capacity = self.config.splits_per_dataset;
        let has_room = |reg: &Registry, name: &str| reg.next_split.get(name).copied().unwrap_or(0) < capacity;

        let previous = match &req.continue_from {
            Some(t) => {
                let prev = reg.by_token.get(t).cloned().ok_or(StudyError::Auth)?;
                let prev = lock(&prev).clone();
                if prev.phase() != Phase::Complete {
                    return Err(StudyError::BadRequest(
                        "only a completed session can be continued".into(),
                    ));
                }
                Some(prev)
            }
            None => None,
        };
        let (pool_idx, xai_type, participant_id) = match &previous {
            Some(p) => (
                self.pool_index(&p.assignment.dataset).ok_or_else(|| {
                    StudyError::Config(format!("dataset `{}` is no longer served", p.assignment.dataset))
                })?,
                p.assignment.xai_type,
                p.participant_id.clone(),
            ),
            None => {
                let pool_idx = match &self.config.assignment.fixed_dataset {
                    Some(name) => self
                        .pool_index(name)
                        .ok_or_else(|| StudyError::Config(format!("fixed dataset `{name}` is not served")))?,
                    None => {
                        let open: Vec<usize> = (0..self.pools.len())
                            .filter(|&i| has_room(&reg, self.pools[i].name()))
                            .collect();
                        if open.is_empty() {
                            return Err(StudyError::Capacity("every dataset has used all its splits".into()));
                        }
                        open[rng.random_range(0..open.len())]
                    }
                };
                let xai = self
                    .config
                    .assignment
                    .fixed_xai_type
                    .unwrap_or_else(|| draw_xai_type(&self.config.assignment.weights, &mut rng));
                let pid = match &req.participant_id {
                    Some(p) if valid_participant_id(p) => p.clone(),
                    Some(_) => {
                        return Err(StudyError::BadRequest(
                            "participant_id must be 1-64 letters, digits, `-` or `_`".into(),
                        ))
                    }
                    None => format!("p-{}", random_hex(6)),
                };
                (pool_idx, xai, pid)
            }
        };
        let entry = &self.pools[pool_idx];
        if !has_room(&reg, entry.name()) {
            return Err(StudyError::Capacity(format!(
                "dataset `{}` has used all {capacity} splits",
                entry.name()
            )));
        }
        let split = reg.next_split.get(entry.name()).copied().unwrap_or(0);
        let materials = entry.pool.materials(
            SplitSizes::default(),
            derive_seed(self.config.seed, &[1, pool_idx as u64, split as u64]),
        )?;
        let schedule = XaiConfig::new(xai_type).schedule(&mut rng);
        let screening = if previous.is_none() && self.config.screening.enabled {
            items_for(&self.config.screening.items, xai_type)
        } else {
            Vec::new()
        };
        let screening_pass = self
            .config
            .screening
            .min_correct
            .unwrap_or(screening.len())
            .min(screening.len());
        let state = SessionState {
            seq,
            session_id: format!("s{seq:08}"),
            token: random_hex(16),
            participant_id,
            assignment: Assignment {
                dataset: entry.name().to_string(),
                xai_type,
                split,
            },
            created_ms: now_ms(),
            completion_code: random_hex(4).to_uppercase(),
            attribute_names: entry.spec.attributes.iter().map(|a| a.name.clone()).collect(),
            label_names: entry.spec.label_names.clone(),
            materials,
            schedule,
            screening,
            screening_pass,
            answers: Vec::new(),
        };
        self.store.append(
            &state.session_id,
            &Event::Created {
                session: Box::new(state.clone()),
            },
        )?;
        reg.next_split.insert(entry.name().to_string(), split + 1);
        let response = CreateResponse {
            token: state.token.clone(),
            session_id: state.session_id.clone(),
            assignment: state.assignment.clone(),
            trial: state.payload()?,
        };
        let shared = Arc::new(Mutex::new(state));
        reg.by_token.insert(response.token.clone(), shared.clone());
        reg.order.push(shared);
        drop(reg);
        self.note_event()?;
        Ok(response)
    }

    pub fn current(&self, token: &str) -> Result<TrialPayload, StudyError> {
        lock(&self.session(token)?).payload()
    }

    /// Accepts one answer; the event is on disk before this returns.
    pub fn submit(&self, token: &str, req: &SubmitRequest) -> Result<TrialPayload, StudyError> {
        let shared = self.session(token)?;
        let answer = req.answer()?;
        let payload = {
            let mut state = lock(&shared);
            state.check(req.step, answer)?;
            let at_ms = now_ms();
            self.store.append(
                &state.session_id,
                &Event::Answered {
                    step: req.step,
                    answer: crate::session::AcceptedAnswer { answer, at_ms },
                },
            )?;
            state.accept(req.step, answer, at_ms)?;
            state.payload()?
        };
        self.note_event()?;
        Ok(payload)
    }

    fn note_event(&self) -> Result<(), StudyError> {
        if self.unsnapshotted.fetch_add(1, Ordering::SeqCst) + 1 >= self.config.snapshot_every {
            self.snapshot()?;
        }
        Ok(())
    }

    /// Writes a snapshot of every session now.
    pub fn snapshot(&self) -> Result<(), StudyError> {
        let reg = self.registry.read().unwrap_or_else(|e| e.into_inner());
        let states: Vec<SessionState> = reg.order.iter().map(|s| lock(s).clone()).collect();
        self.unsnapshotted.store(0, Ordering::SeqCst);
        self.store.write_snapshot(&states)
    }

    /// Session states in creation order.
    pub fn sessions(&self) -> Vec<SessionState> {
        let reg = self.registry.read().unwrap_or_else(|e| e.into_inner());
        reg.order.iter().map(|s| lock(s).clone()).collect()
    }

    /// Records of finished sessions in creation order; excluded sessions only
    /// when asked for.
    pub fn records(&self, include_excluded: bool) -> Result<Vec<SessionRecord>, StudyError> {
        self.sessions()
            .iter()
            .filter(|s| match s.phase() {
                Phase::Complete => true,
                Phase::Excluded => include_excluded,
                _ => false,
            })
            .map(SessionState::record)
            .collect()
    }

    /// Line-delimited export of [`Study::records`].
    pub fn export(&self, include_excluded: bool) -> Result<String, StudyError> {
        Ok(coax::jsonl::to_string(&self.records(include_excluded)?)?)
    }
}

fn valid_participant_id(p: &str) -> bool {
    (1..=64).contains(&p.len()) && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}
