//! Monte-Carlo reproductions of the worked example and mode comparisons.

use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advisor::{
    Advisor, AdvisorError, CassetteAdvisor, HttpChatAdvisor, OracleAdvisor, ScriptedAdvisor,
};
use crate::detector::{window_is_tarpit, DetectorConfig};
use crate::device::Device;
use crate::driver::{
    compute_metrics, gen_random_event, run_campaign, CampaignConfig, CampaignReport, MetricSummary,
    Mode,
};
use crate::error::{Error, Result};
use crate::sim::{motivating, AppModel, SimRuntime};
use crate::ui::build_action_space;

/// Closed-form quantities of the podcast example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticValues {
    pub events_b: usize,
    pub events_c: usize,
    pub exits_b: usize,
    /// Probability that one random event leaves page b unchanged.
    pub p_stay: f64,
    /// Probability of staying through eight consecutive random events.
    pub p_trapped: f64,
    /// Probability of subscribe then back in two random events.
    pub p_bug: f64,
}

pub const TRAP_EVENTS: usize = 8;

fn widget_events(model: &AppModel, screen: &str) -> usize {
    let mut rt = SimRuntime::new(Arc::new(model.clone()));
    rt.reset_to(screen, &[]);
    build_action_space(&rt.observe()).widget_event_count()
}

/// Derives the analytic values from the model's own action spaces.
pub fn analytic_values(model: &AppModel) -> AnalyticValues {
    let events_b = widget_events(model, "b");
    let events_c = widget_events(model, "c");
    let exits_b = model
        .screen_by_id("b")
        .map_or(0, |s| s.def.escape_actions.len());
    let p_stay = (events_b - exits_b) as f64 / events_b as f64;
    AnalyticValues {
        events_b,
        events_c,
        exits_b,
        p_stay,
        p_trapped: p_stay.powi(TRAP_EVENTS as i32),
        p_bug: 1.0 / (events_b * events_c) as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub trials: u64,
    pub hits: u64,
    pub value: f64,
    /// 95% Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn new(hits: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(hits, trials, 1.959_963_984_540_054);
        Self {
            trials,
            hits,
            value: if trials == 0 {
                0.0
            } else {
                hits as f64 / trials as f64
            },
            ci_low,
            ci_high,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.ci_low..=self.ci_high).contains(&x)
    }
}

pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(trial)
}

/// Fraction of random-only runs started on page b that stay on
/// b-like states for eight consecutive events.
pub fn trap_probability_mc(model: &Arc<AppModel>, trials: u64, seed: u64) -> Estimate {
    let mut rt = SimRuntime::new(model.clone());
    // Eight events give nine states; all adjacent pairs must be similar.
    let window = DetectorConfig::new(TRAP_EVENTS + 1, 0.95).expect("valid window");
    let mut advisor = ScriptedAdvisor::new(Vec::<String>::new());
    let mut hits = 0;
    for t in 0..trials {
        rt.reset_to("b", &[]);
        let cfg = CampaignConfig::new(Mode::RandomOnly, trial_seed(seed, t), TRAP_EVENTS);
        let report = run_campaign(&mut rt, model, &cfg, &mut advisor);
        if window_is_tarpit(&report.state_hashes, &window) {
            hits += 1;
        }
    }
    Estimate::new(hits, trials)
}

/// Fraction of two-event random runs from page b, with multi-select
/// already on, that crash (subscribe followed by back).
pub fn bug_probability_mc(model: &Arc<AppModel>, trials: u64, seed: u64) -> Estimate {
    let mut rt = SimRuntime::new(model.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    for _ in 0..trials {
        rt.reset_to("b", &[motivating::FLAG_MULTI_SELECT]);
        let first = gen_random_event(&rt.observe(), &mut rng);
        let step = rt.execute(&first);
        if step.state.true_screen_id != "c" {
            continue;
        }
        let second = gen_random_event(&step.state, &mut rng);
        if rt.execute(&second).crash.is_some() {
            hits += 1;
        }
    }
    Estimate::new(hits, trials)
}

#[derive(Debug, Clone, Serialize)]
pub struct Reproduction {
    pub analytic: AnalyticValues,
    pub trapped: Estimate,
    pub bug: Estimate,
    pub trapped_tolerance: f64,
}

impl Reproduction {
    pub fn trapped_ok(&self) -> bool {
        (self.trapped.value - self.analytic.p_trapped).abs() <= self.trapped_tolerance
    }

    pub fn bug_ok(&self) -> bool {
        self.bug.contains(self.analytic.p_bug)
    }
}

/// Absolute tolerance on the trapped fraction.
pub const TRAPPED_TOLERANCE: f64 = 0.02;

pub fn reproduce(trap_trials: u64, bug_trials: u64, seed: u64) -> Reproduction {
    let model = Arc::new(motivating::motivating_example());
    Reproduction {
        analytic: analytic_values(&model),
        trapped: trap_probability_mc(&model, trap_trials, seed),
        bug: bug_probability_mc(&model, bug_trials, seed ^ 0xb0b),
        trapped_tolerance: TRAPPED_TOLERANCE,
    }
}

/// Which advisor a campaign uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdvisorSpec {
    Oracle {
        noise: f64,
    },
    Scripted {
        responses: Vec<String>,
    },
    Http {
        endpoint: String,
        model: String,
        timeout_secs: f64,
        /// Records every exchange to this cassette when set.
        cassette: Option<String>,
    },
    Replay {
        cassette: String,
    },
}

impl AdvisorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AdvisorSpec::Oracle { .. } => "oracle",
            AdvisorSpec::Scripted { .. } => "scripted",
            AdvisorSpec::Http { .. } => "http",
            AdvisorSpec::Replay { .. } => "replay",
        }
    }

    /// Builds an advisor wired to `runtime` (the oracle reads its probe).
    pub fn build(
        &self,
        runtime: &SimRuntime,
        seed: u64,
    ) -> std::result::Result<Box<dyn Advisor>, AdvisorError> {
        Ok(match self {
            AdvisorSpec::Oracle { noise } => Box::new(OracleAdvisor::new(
                runtime.model().clone(),
                runtime.probe(),
                *noise,
                seed,
            )),
            AdvisorSpec::Scripted { responses } => {
                Box::new(ScriptedAdvisor::new(responses.clone()))
            }
            AdvisorSpec::Http {
                endpoint,
                model,
                timeout_secs,
                cassette,
            } => {
                if endpoint.is_empty() {
                    return Err(AdvisorError::Config(
                        "the http advisor needs an endpoint".into(),
                    ));
                }
                if !(timeout_secs.is_finite() && *timeout_secs > 0.0) {
                    return Err(AdvisorError::Config(format!(
                        "invalid timeout {timeout_secs}"
                    )));
                }
                let http = HttpChatAdvisor::from_env(
                    endpoint.clone(),
                    model.clone(),
                    Duration::from_secs_f64(*timeout_secs),
                );
                match cassette {
                    Some(path) => Box::new(CassetteAdvisor::record(path, Box::new(http))?),
                    None => Box::new(http),
                }
            }
            AdvisorSpec::Replay { cassette } => Box::new(CassetteAdvisor::replay(cassette)?),
        })
    }
}

/// Runs one campaign on a fresh runtime of `model`.
pub fn run_single(
    model: &Arc<AppModel>,
    cfg: &CampaignConfig,
    advisor: &AdvisorSpec,
) -> std::result::Result<(CampaignReport, MetricSummary), CellError> {
    let mut rt = SimRuntime::new(model.clone());
    let mut adv = advisor.build(&rt, cfg.seed).map_err(CellError::Advisor)?;
    let report = run_campaign(&mut rt, model, cfg, &mut adv);
    let metrics = compute_metrics(&report, model).map_err(CellError::Engine)?;
    Ok((report, metrics))
}

#[derive(Debug, thiserror::Error)]
pub enum CellError {
    #[error(transparent)]
    Advisor(AdvisorError),
    #[error(transparent)]
    Engine(Error),
}

/// The mode × seed × app grid of a comparison.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub apps: Vec<Arc<AppModel>>,
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    pub budget: usize,
    pub advisor: AdvisorSpec,
    /// Worker threads; `None` uses all logical CPUs.
    pub workers: Option<usize>,
    pub base: CampaignConfig,
}

impl ExperimentSpec {
    pub fn new(
        apps: Vec<Arc<AppModel>>,
        modes: Vec<Mode>,
        seeds: Vec<u64>,
        budget: usize,
        advisor: AdvisorSpec,
    ) -> Self {
        Self {
            apps,
            modes,
            seeds,
            budget,
            advisor,
            workers: None,
            base: CampaignConfig::new(Mode::Hybrid, 0, budget),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.apps.is_empty() || self.modes.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "a comparison needs at least one app, mode and seed".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig(
                "worker count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct Cell {
    pub app: usize,
    pub mode: Mode,
    pub seed: u64,
    pub outcome: std::result::Result<(CampaignReport, MetricSummary), CellError>,
}

/// Runs every cell of the grid on a bounded worker pool. Results come
/// back in grid order (app, mode, seed) regardless of scheduling.
pub fn run_grid(spec: &ExperimentSpec) -> Result<Vec<Cell>> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for app in 0..spec.apps.len() {
        for &mode in &spec.modes {
            for &seed in &spec.seeds {
                jobs.push((app, mode, seed));
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        jobs.into_par_iter()
            .map(|(app, mode, seed)| {
                let cfg = CampaignConfig {
                    mode,
                    seed,
                    event_budget: spec.budget,
                    ..spec.base
                };
                Cell {
                    app,
                    mode,
                    seed,
                    outcome: run_single(&spec.apps[app], &cfg, &spec.advisor),
                }
            })
            .collect()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Quartiles with linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some(Quartiles {
        q1: at(0.25),
        median: at(0.5),
        q3: at(0.75),
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    quartiles(values).map(|q| q.median)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeAggregate {
    pub mode: Mode,
    pub campaigns: usize,
    pub unique_screens: Option<Quartiles>,
    pub unique_crashes: Option<Quartiles>,
    pub esr: Option<f64>,
    pub faer: Option<f64>,
    pub time_in_tarpit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub aggregates: Vec<ModeAggregate>,
    pub rows: Vec<MetricSummary>,
}

impl ComparisonSummary {
    pub fn from_rows(modes: &[Mode], rows: Vec<MetricSummary>) -> Self {
        let aggregates = modes
            .iter()
            .map(|&mode| {
                let mine: Vec<_> = rows.iter().filter(|r| r.mode == mode).collect();
                let col = |f: &dyn Fn(&MetricSummary) -> Option<f64>| -> Vec<f64> {
                    mine.iter().filter_map(|r| f(r)).collect()
                };
                ModeAggregate {
                    mode,
                    campaigns: mine.len(),
                    unique_screens: quartiles(&col(&|r| Some(r.unique_screens as f64))),
                    unique_crashes: quartiles(&col(&|r| Some(r.unique_crashes as f64))),
                    esr: median(&col(&|r| r.esr)),
                    faer: median(&col(&|r| r.faer)),
                    time_in_tarpit: median(&col(&|r| r.time_in_tarpit)),
                }
            })
            .collect();
        Self { aggregates, rows }
    }

    pub fn aggregate(&self, mode: Mode) -> Option<&ModeAggregate> {
        self.aggregates.iter().find(|a| a.mode == mode)
    }

    pub fn write_aggregate_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "mode",
            "campaigns",
            "screens_q1",
            "screens_median",
            "screens_q3",
            "crashes_q1",
            "crashes_median",
            "crashes_q3",
            "esr_median",
            "faer_median",
            "time_in_tarpit_median",
        ])?;
        let opt = |v: Option<f64>| {
            v.map_or_else(
                || crate::driver::NOT_APPLICABLE.to_string(),
                |x| format!("{x:.4}"),
            )
        };
        for a in &self.aggregates {
            let s = a.unique_screens;
            let c = a.unique_crashes;
            w.write_record([
                a.mode.to_string(),
                a.campaigns.to_string(),
                opt(s.map(|q| q.q1)),
                opt(s.map(|q| q.median)),
                opt(s.map(|q| q.q3)),
                opt(c.map(|q| q.q1)),
                opt(c.map(|q| q.median)),
                opt(c.map(|q| q.q3)),
                opt(a.esr),
                opt(a.faer),
                opt(a.time_in_tarpit),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
