//! Registry of known tarpits and the events that escaped them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phash::{PHash, Threshold};
use crate::ui::{InteractionType, Rect, UiEvent, UiState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub theta_mem: Threshold,
    pub p_reuse: f64,
}

impl MemoryConfig {
    pub fn new(theta_mem: f64, p_reuse: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_reuse) {
            return Err(Error::InvalidConfig(format!(
                "reuse probability {p_reuse} outside [0, 1]"
            )));
        }
        Ok(Self {
            theta_mem: Threshold::new(theta_mem)?,
            p_reuse,
        })
    }
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            theta_mem: Threshold::new(0.99).unwrap(),
            p_reuse: 0.8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TarpitRecord {
    pub tarpit_id: u32,
    pub representative_hash: PHash,
    /// First state seen for this tarpit; `None` for imported records.
    pub representative_state: Option<UiState>,
    pub actions: Vec<UiEvent>,
}

impl TarpitRecord {
    fn add(&mut self, event: UiEvent) -> bool {
        if self.actions.iter().any(|a| a.same_action(&event)) {
            false
        } else {
            self.actions.push(event);
            true
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dispatch {
    Reuse { tarpit_id: u32, event: UiEvent },
    Delegate,
}

#[derive(Debug, Clone, Default)]
pub struct TarpitMemory {
    records: Vec<TarpitRecord>,
}

impl TarpitMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[TarpitRecord] {
        &self.records
    }

    pub fn lookup(&self, state: &UiState, cfg: &MemoryConfig) -> Option<&TarpitRecord> {
        self.lookup_hash(state.phash(), cfg)
    }

    /// Lowest-id record whose representative clears `theta_mem`.
    pub fn lookup_hash(&self, hash: PHash, cfg: &MemoryConfig) -> Option<&TarpitRecord> {
        // records are kept in id order
        self.records
            .iter()
            .find(|r| cfg.theta_mem.accepts(r.representative_hash, hash))
    }

    /// Stores `event` as an escape from `state`; returns the tarpit id.
    pub fn record_escape(&mut self, state: &UiState, event: UiEvent, cfg: &MemoryConfig) -> u32 {
        let hash = state.phash();
        if let Some(pos) = self
            .records
            .iter()
            .position(|r| cfg.theta_mem.accepts(r.representative_hash, hash))
        {
            let record = &mut self.records[pos];
            record.add(event);
            return record.tarpit_id;
        }
        let tarpit_id = self.next_id();
        self.records.push(TarpitRecord {
            tarpit_id,
            representative_hash: hash,
            representative_state: Some(state.clone()),
            actions: vec![event],
        });
        tarpit_id
    }

    fn next_id(&self) -> u32 {
        self.records.last().map_or(0, |r| r.tarpit_id + 1)
    }

    /// Reuse a remembered escape when the state is known and `zeta <= p`,
    /// sampling uniformly among the record's actions.
    pub fn dispatch<R: Rng + ?Sized>(
        &self,
        state: &UiState,
        zeta: f64,
        cfg: &MemoryConfig,
        rng: &mut R,
    ) -> Dispatch {
        match self.lookup(state, cfg) {
            Some(record) if zeta <= cfg.p_reuse && !record.actions.is_empty() => {
                let pick = rng.gen_range(0..record.actions.len());
                Dispatch::Reuse {
                    tarpit_id: record.tarpit_id,
                    event: record.actions[pick].clone(),
                }
            }
            _ => Dispatch::Delegate,
        }
    }

    pub fn export(&self) -> Vec<ExportedRecord> {
        self.records
            .iter()
            .map(|r| ExportedRecord {
                tarpit_id: r.tarpit_id,
                screenshot_hash: r.representative_hash.to_hex(),
                actions: r
                    .actions
                    .iter()
                    .map(|a| ExportedAction {
                        kind: a.kind,
                        bounds: a.bounds,
                        payload: a.payload.clone(),
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.export())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut exported: Vec<ExportedRecord> = serde_json::from_str(text)?;
        exported.sort_by_key(|r| r.tarpit_id);
        let mut records = Vec::with_capacity(exported.len());
        for r in exported {
            let hash = r.screenshot_hash.parse().map_err(|_| {
                Error::InvalidConfig(format!("bad screenshot hash {:?}", r.screenshot_hash))
            })?;
            if records
                .last()
                .is_some_and(|prev: &TarpitRecord| prev.tarpit_id == r.tarpit_id)
            {
                return Err(Error::InvalidConfig(format!(
                    "duplicate tarpit id {}",
                    r.tarpit_id
                )));
            }
            let mut record = TarpitRecord {
                tarpit_id: r.tarpit_id,
                representative_hash: hash,
                representative_state: None,
                actions: Vec::new(),
            };
            for a in r.actions {
                record.add(UiEvent {
                    action_id: 0,
                    bounds: a.bounds,
                    kind: a.kind,
                    payload: a.payload,
                });
            }
            records.push(record);
        }
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportedRecord {
    pub tarpit_id: u32,
    pub screenshot_hash: String,
    pub actions: Vec<ExportedAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportedAction {
    #[serde(rename = "type")]
    pub kind: InteractionType,
    pub bounds: Rect,
    #[serde(default)]
    pub payload: Option<String>,
}
