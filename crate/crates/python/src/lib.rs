//! Python bindings: hashing, scenarios, campaigns and the worked-example
//! reproduction. Structured results cross the boundary as JSON strings or
//! plain tuples.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use tarpit_escape::device::Device;
use tarpit_escape::driver::{CampaignConfig, Mode};
use tarpit_escape::harness::experiments::{self, AdvisorSpec};
use tarpit_escape::phash::{self, Bitmap, PHash};
use tarpit_escape::sim::{generate, motivating, AppModel, GeneratorParams, SimRuntime};
use tarpit_escape::ui::build_action_space;

/// `(id, type, (left, top, right, bottom))`.
type EventRow = (u32, String, (i32, i32, i32, i32));

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// 64-bit difference hash of a row-major grayscale image.
#[pyfunction]
fn dhash(width: u32, height: u32, pixels: Vec<u8>) -> PyResult<u64> {
    let bitmap = Bitmap::new(width, height, pixels).map_err(value_err)?;
    Ok(bitmap.phash().bits())
}

#[pyfunction]
fn hamming(a: u64, b: u64) -> u32 {
    phash::hamming(PHash(a), PHash(b))
}

/// `1 - hamming(a, b) / 64`.
#[pyfunction]
fn similarity(a: u64, b: u64) -> f64 {
    phash::hash_similarity(PHash(a), PHash(b))
}

#[pyfunction]
fn motivating_scenario() -> PyResult<String> {
    motivating::motivating_scenario()
        .to_json()
        .map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (screens, tarpit_factor=0.85, seed=0))]
fn generate_scenario(screens: usize, tarpit_factor: f64, seed: u64) -> PyResult<String> {
    let params = GeneratorParams::new(screens, tarpit_factor, seed);
    generate::generate(&params)
        .and_then(|s| s.to_json())
        .map_err(value_err)
}

/// A validated scenario.
#[pyclass(frozen)]
struct App {
    model: Arc<AppModel>,
}

#[pymethods]
impl App {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let scenario = tarpit_escape::sim::Scenario::from_json(text).map_err(value_err)?;
        let model = AppModel::from_scenario(scenario).map_err(value_err)?;
        Ok(Self {
            model: Arc::new(model),
        })
    }

    #[staticmethod]
    fn motivating() -> Self {
        Self {
            model: Arc::new(motivating::motivating_example()),
        }
    }

    #[getter]
    fn name(&self) -> String {
        self.model.name().to_string()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.model.fingerprint().to_string()
    }

    fn screen_ids(&self) -> Vec<String> {
        self.model
            .screens()
            .iter()
            .map(|s| s.id().to_string())
            .collect()
    }

    /// `(id, type, (left, top, right, bottom))` for every event on `screen`.
    fn action_space(&self, screen: &str) -> PyResult<Vec<EventRow>> {
        if self.model.screen_index(screen).is_none() {
            return Err(value_err(format!("unknown screen {screen:?}")));
        }
        let mut rt = SimRuntime::new(self.model.clone());
        rt.reset_to(screen, &[]);
        let space = build_action_space(&rt.observe());
        Ok(space
            .events()
            .iter()
            .map(|e| {
                let b = e.bounds;
                (
                    e.action_id,
                    e.kind.to_string(),
                    (b.left, b.top, b.right, b.bottom),
                )
            })
            .collect())
    }

    /// Runs one campaign with the oracle advisor; returns
    /// `(report_json, metrics_json)`.
    #[pyo3(signature = (mode="hybrid", seed=0, budget=5000, noise=0.0))]
    fn run(&self, mode: &str, seed: u64, budget: usize, noise: f64) -> PyResult<(String, String)> {
        let mode: Mode = mode.parse().map_err(value_err)?;
        let cfg = CampaignConfig::new(mode, seed, budget);
        let (report, metrics) =
            experiments::run_single(&self.model, &cfg, &AdvisorSpec::Oracle { noise })
                .map_err(value_err)?;
        let metrics = serde_json::to_string(&metrics).map_err(value_err)?;
        Ok((report.to_json().map_err(value_err)?, metrics))
    }
}

/// Analytic and Monte-Carlo values of the podcast example as JSON.
#[pyfunction]
#[pyo3(signature = (trials=10_000, bug_trials=100_000, seed=1))]
fn reproduce(trials: u64, bug_trials: u64, seed: u64) -> PyResult<String> {
    serde_json::to_string(&experiments::reproduce(trials, bug_trials, seed)).map_err(value_err)
}

#[pymodule]
fn pytarpit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dhash, m)?)?;
    m.add_function(wrap_pyfunction!(hamming, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(motivating_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    m.add_class::<App>()?;
    Ok(())
}
