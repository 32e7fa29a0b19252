//! The hybrid campaign loop: random events until a tarpit is detected,
//! then an escape session, repeated until the event budget is spent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::advisor::Advisor;
use crate::detector::{has_tarpit, DetectorConfig, StateSequence};
use crate::device::{CrashRecord, Device};
use crate::error::{Error, Result};
use crate::escape::{run_escape, EscapeConfig, EscapeOutcome, EscapeParams, Phase};
use crate::memory::{MemoryConfig, TarpitMemory};
use crate::sim::AppModel;
use crate::ui::{build_action_space, InteractionType, UiEvent, UiState};

/// Payloads drawn for randomly generated text input.
pub const TEXT_DICTIONARY: [&str; 4] = ["test", "123", "a@b.c", ""];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Hybrid,
    RandomOnly,
    NoReuse,
    NoLlm,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Hybrid, Mode::RandomOnly, Mode::NoReuse, Mode::NoLlm];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Hybrid => "hybrid",
            Mode::RandomOnly => "random_only",
            Mode::NoReuse => "no_reuse",
            Mode::NoLlm => "no_llm",
        }
    }

    /// Whether detected tarpits start an escape session.
    pub fn escapes(self) -> bool {
        matches!(self, Mode::Hybrid | Mode::NoReuse)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CampaignConfig {
    pub seed: u64,
    pub event_budget: usize,
    /// Optional wall-clock limit, checked between events.
    pub time_budget: Option<Duration>,
    pub detector: DetectorConfig,
    pub memory: MemoryConfig,
    pub escape: EscapeConfig,
    pub mode: Mode,
}

impl CampaignConfig {
    pub fn new(mode: Mode, seed: u64, event_budget: usize) -> Self {
        Self {
            seed,
            event_budget,
            time_budget: None,
            detector: DetectorConfig::default(),
            memory: MemoryConfig::default(),
            escape: EscapeConfig::default(),
            mode,
        }
    }
}

/// Uniform draw over the state's action space.
pub fn gen_random_event<R: Rng + ?Sized>(state: &UiState, rng: &mut R) -> UiEvent {
    let space = build_action_space(state);
    let pick = rng.gen_range(0..space.len());
    let mut event = space.events()[pick].clone();
    if event.kind == InteractionType::TextInput {
        event.payload = Some(TEXT_DICTIONARY[rng.gen_range(0..TEXT_DICTIONARY.len())].to_string());
    }
    event
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub index: usize,
    pub event: UiEvent,
    pub phase: Phase,
    pub pre_state: usize,
    pub post_state: usize,
    pub pre_screen: String,
    pub post_screen: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLogEntry {
    pub prompt_sha256: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TarpitEpisode {
    /// False for tarpits observed in modes without an escape phase.
    pub active: bool,
    /// State index where the detected window begins.
    pub window_start: usize,
    /// State index at which the tarpit was detected.
    pub detected_at: usize,
    /// State index at which the episode ended.
    pub end: usize,
    pub screen: String,
    pub escaped: bool,
    pub crashed: bool,
    pub attempts: usize,
    /// Events executed by the session, including a forced back.
    pub events: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escape_event: Option<UiEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_escape_state: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<QueryLogEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub events: usize,
    pub screens: usize,
    pub transitions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignReport {
    pub app: String,
    pub app_fingerprint: String,
    pub mode: Mode,
    pub seed: u64,
    pub event_budget: usize,
    pub advisor: String,
    pub initial_screen: String,
    pub trace: Vec<TraceEntry>,
    pub tarpit_episodes: Vec<TarpitEpisode>,
    /// First occurrence of each distinct crash signature.
    pub crashes: Vec<CrashRecord>,
    /// Events executed up to and including the first crash.
    pub events_to_first_crash: Option<usize>,
    pub coverage_series: Vec<CoveragePoint>,
    pub advisor_queries: usize,
    #[serde(skip)]
    pub memory: TarpitMemory,
    #[serde(skip)]
    pub state_hashes: Vec<crate::phash::PHash>,
}

impl CampaignReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn unique_screens(&self) -> usize {
        self.coverage_series.last().map_or(0, |p| p.screens)
    }

    /// One CSV row per trace entry.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "index",
            "phase",
            "action_id",
            "type",
            "bounds",
            "payload",
            "pre_state",
            "post_state",
            "pre_screen",
            "post_screen",
            "crash",
        ])?;
        for t in &self.trace {
            let b = t.event.bounds;
            w.write_record([
                t.index.to_string(),
                phase_name(t.phase).to_string(),
                t.event.action_id.to_string(),
                t.event.kind.to_string(),
                format!("[{},{},{},{}]", b.left, b.top, b.right, b.bottom),
                t.event.payload.clone().unwrap_or_default(),
                t.pre_state.to_string(),
                t.post_state.to_string(),
                t.pre_screen.clone(),
                t.post_screen.clone(),
                t.crash.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Random => "random",
        Phase::Escape => "escape",
        Phase::Reuse => "reuse",
    }
}

struct Recorder {
    trace: Vec<TraceEntry>,
    crashes: Vec<CrashRecord>,
    first_crash: Option<usize>,
    screens: BTreeSet<String>,
    transitions: BTreeSet<(String, String)>,
    coverage: Vec<CoveragePoint>,
}

impl Recorder {
    fn new(initial: &str) -> Self {
        let mut screens = BTreeSet::new();
        screens.insert(initial.to_string());
        Self {
            trace: Vec::new(),
            crashes: Vec::new(),
            first_crash: None,
            screens,
            transitions: BTreeSet::new(),
            coverage: vec![CoveragePoint {
                events: 0,
                screens: 1,
                transitions: 0,
            }],
        }
    }

    fn record(
        &mut self,
        states: &StateSequence,
        event: UiEvent,
        phase: Phase,
        post_state: usize,
        crash: Option<CrashRecord>,
    ) {
        let index = self.trace.len();
        let pre_state = post_state - 1;
        let screen_of = |i: usize| {
            states
                .get(i)
                .expect("recorded state")
                .true_screen_id
                .clone()
        };
        let pre_screen = screen_of(pre_state);
        let post_screen = screen_of(post_state);
        // A crash leaves the restart screen behind; the transition went nowhere.
        let mut grew = self.screens.insert(post_screen.clone());
        if crash.is_none() {
            grew |= self
                .transitions
                .insert((pre_screen.clone(), post_screen.clone()));
        }
        if let Some(c) = &crash {
            if self.first_crash.is_none() {
                self.first_crash = Some(index + 1);
            }
            if !self.crashes.iter().any(|k| k.signature == c.signature) {
                self.crashes.push(c.clone());
            }
        }
        self.trace.push(TraceEntry {
            index,
            event,
            phase,
            pre_state,
            post_state,
            pre_screen,
            post_screen,
            crash: crash.map(|c| c.signature),
        });
        if grew {
            self.coverage.push(CoveragePoint {
                events: index + 1,
                screens: self.screens.len(),
                transitions: self.transitions.len(),
            });
        }
    }

    fn finish(&mut self) {
        let events = self.trace.len();
        let last = *self.coverage.last().expect("seeded with the initial point");
        if last.events != events {
            self.coverage.push(CoveragePoint { events, ..last });
        }
    }
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs one campaign on `device`. `app` supplies the report's identity.
pub fn run_campaign<D>(
    device: &mut D,
    app: &AppModel,
    cfg: &CampaignConfig,
    advisor: &mut dyn Advisor,
) -> CampaignReport
where
    D: Device + ?Sized,
{
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut states = StateSequence::new();
    let mut memory = TarpitMemory::new();
    let mut episodes: Vec<TarpitEpisode> = Vec::new();
    let mut queries = 0;
    let params = EscapeParams {
        detector: cfg.detector,
        memory: cfg.memory,
        escape: cfg.escape,
        reuse: cfg.mode == Mode::Hybrid,
    };

    let initial = device.observe();
    let mut rec = Recorder::new(&initial.true_screen_id);
    let initial_screen = initial.true_screen_id.clone();
    states.push(initial);
    // Index into `episodes` of the passive tarpit currently being observed.
    let mut passive: Option<usize> = None;
    let window = cfg.detector.k - 1;

    while rec.trace.len() < cfg.event_budget {
        if cfg
            .time_budget
            .is_some_and(|limit| started.elapsed() >= limit)
        {
            break;
        }
        let trapped = cfg.mode != Mode::RandomOnly && has_tarpit(&states, &cfg.detector);
        if trapped && cfg.mode.escapes() {
            let detected_at = states.len() - 1;
            let screen = states.last().expect("non-empty").true_screen_id.clone();
            let report = run_escape(device, &mut states, &mut memory, advisor, &params, &mut rng);
            for step in &report.steps {
                rec.record(
                    &states,
                    step.event.clone(),
                    step.phase,
                    step.post_state,
                    step.crash.clone(),
                );
            }
            queries += report.session.prompt_log.len();
            let (escaped, crashed, escape_event, end) = match &report.outcome {
                EscapeOutcome::Escaped { event, final_state } => {
                    (true, false, Some(event.clone()), *final_state)
                }
                EscapeOutcome::Exhausted { final_state } => (false, false, None, *final_state),
                EscapeOutcome::Crashed { final_state, .. } => (false, true, None, *final_state),
            };
            episodes.push(TarpitEpisode {
                active: true,
                window_start: detected_at - window,
                detected_at,
                end,
                screen,
                escaped,
                crashed,
                attempts: report.session.attempts.len(),
                events: report.steps.len(),
                escape_event,
                pre_escape_state: report.pre_escape_state,
                queries: report
                    .session
                    .prompt_log
                    .iter()
                    .map(|x| QueryLogEntry {
                        prompt_sha256: sha256_hex(&x.prompt),
                        response: x.response.clone(),
                    })
                    .collect(),
            });
            continue;
        }

        if cfg.mode == Mode::NoLlm {
            match (trapped, passive) {
                (true, None) => {
                    let detected_at = states.len() - 1;
                    passive = Some(episodes.len());
                    episodes.push(TarpitEpisode {
                        active: false,
                        window_start: detected_at - window,
                        detected_at,
                        end: detected_at,
                        screen: states.last().expect("non-empty").true_screen_id.clone(),
                        escaped: false,
                        crashed: false,
                        attempts: 0,
                        events: 0,
                        escape_event: None,
                        pre_escape_state: None,
                        queries: Vec::new(),
                    });
                }
                (true, Some(i)) => episodes[i].end = states.len() - 1,
                (false, Some(_)) => passive = None,
                (false, None) => {}
            }
        }

        let event = gen_random_event(states.last().expect("non-empty"), &mut rng);
        let step = device.execute(&event);
        let post = states.push(step.state);
        rec.record(&states, event, Phase::Random, post, step.crash);
    }
    rec.finish();

    CampaignReport {
        app: app.name().to_string(),
        app_fingerprint: app.fingerprint().to_string(),
        mode: cfg.mode,
        seed: cfg.seed,
        event_budget: cfg.event_budget,
        advisor: if cfg.mode.escapes() {
            advisor.name().to_string()
        } else {
            "none".to_string()
        },
        initial_screen,
        trace: rec.trace,
        tarpit_episodes: episodes,
        crashes: rec.crashes,
        events_to_first_crash: rec.first_crash,
        coverage_series: rec.coverage,
        advisor_queries: queries,
        memory,
        state_hashes: states.hashes().to_vec(),
    }
}

/// Aggregate metrics of one campaign. Rates without a denominator are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub app: String,
    pub mode: Mode,
    pub seed: u64,
    pub events: usize,
    pub episodes: usize,
    pub escaped: usize,
    pub esr: Option<f64>,
    pub faer: Option<f64>,
    pub tdp: Option<f64>,
    pub time_in_tarpit: Option<f64>,
    pub unique_screens: usize,
    pub screen_coverage: f64,
    pub unique_crashes: usize,
    pub events_to_first_crash: Option<usize>,
    pub advisor_queries: usize,
}

/// Marker written for undefined rates in CSV output.
pub const NOT_APPLICABLE: &str = "n/a";

pub fn compute_metrics(report: &CampaignReport, app: &AppModel) -> Result<MetricSummary> {
    if report.app_fingerprint != app.fingerprint() {
        return Err(Error::GroundTruthMismatch {
            report: report.app_fingerprint.clone(),
            app: app.fingerprint().to_string(),
        });
    }
    let mut visited = BTreeSet::new();
    visited.insert(report.initial_screen.as_str());
    for t in &report.trace {
        visited.insert(t.pre_screen.as_str());
        visited.insert(t.post_screen.as_str());
    }
    for e in &report.tarpit_episodes {
        visited.insert(e.screen.as_str());
    }
    if let Some(unknown) = visited.iter().find(|id| app.screen_by_id(id).is_none()) {
        return Err(Error::GroundTruthMismatch {
            report: format!("{} (screen {unknown:?})", report.app_fingerprint),
            app: app.fingerprint().to_string(),
        });
    }

    let active: Vec<_> = report.tarpit_episodes.iter().filter(|e| e.active).collect();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let escaped = active.iter().filter(|e| e.escaped).count();
    let first = active
        .iter()
        .filter(|e| e.escaped && e.attempts == 1)
        .count();
    let all = &report.tarpit_episodes;
    let true_tarpits = all
        .iter()
        .filter(|e| app.screen_by_id(&e.screen).is_some_and(|s| s.def.tarpit))
        .count();

    // Episodes cover trace entries [window_start, end); overlapping spans count once.
    let mut spans: Vec<(usize, usize)> = all
        .iter()
        .map(|e| (e.window_start, e.end.max(e.window_start)))
        .collect();
    spans.sort_unstable();
    let mut covered = 0;
    let mut reach = 0;
    for (s, e) in spans {
        let s = s.max(reach);
        if e > s {
            covered += e - s;
            reach = e;
        }
    }
    let events = report.trace.len();

    Ok(MetricSummary {
        app: report.app.clone(),
        mode: report.mode,
        seed: report.seed,
        events,
        episodes: active.len(),
        escaped,
        esr: ratio(escaped, active.len()),
        faer: ratio(first, active.len()),
        tdp: ratio(true_tarpits, all.len()),
        time_in_tarpit: ratio(covered.min(events), events),
        unique_screens: visited.len(),
        screen_coverage: visited.len() as f64 / app.screens().len() as f64,
        unique_crashes: report.crashes.len(),
        events_to_first_crash: report.events_to_first_crash,
        advisor_queries: report.advisor_queries,
    })
}

impl MetricSummary {
    pub const CSV_HEADER: [&'static str; 15] = [
        "app",
        "mode",
        "seed",
        "events",
        "episodes",
        "escaped",
        "esr",
        "faer",
        "tdp",
        "time_in_tarpit",
        "unique_screens",
        "screen_coverage",
        "unique_crashes",
        "events_to_first_crash",
        "advisor_queries",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        let rate =
            |v: Option<f64>| v.map_or_else(|| NOT_APPLICABLE.to_string(), |x| format!("{x:.4}"));
        vec![
            self.app.clone(),
            self.mode.to_string(),
            self.seed.to_string(),
            self.events.to_string(),
            self.episodes.to_string(),
            self.escaped.to_string(),
            rate(self.esr),
            rate(self.faer),
            rate(self.tdp),
            rate(self.time_in_tarpit),
            self.unique_screens.to_string(),
            format!("{:.4}", self.screen_coverage),
            self.unique_crashes.to_string(),
            self.events_to_first_crash
                .map_or_else(|| NOT_APPLICABLE.to_string(), |n| n.to_string()),
            self.advisor_queries.to_string(),
        ]
    }
}

pub fn write_summary_csv<W: Write>(rows: &[MetricSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MetricSummary::CSV_HEADER)?;
    for r in rows {
        w.write_record(r.csv_row())?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Count of trace entries per phase, keyed by phase name.
pub fn phase_counts(report: &CampaignReport) -> BTreeMap<&'static str, usize> {
    let mut counts = BTreeMap::new();
    for t in &report.trace {
        *counts.entry(phase_name(t.phase)).or_insert(0) += 1;
    }
    counts
}
