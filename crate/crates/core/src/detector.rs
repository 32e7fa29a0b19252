//! Sliding-window UI tarpit detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phash::{PHash, Threshold};
use crate::ui::UiState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Window length in states.
    pub k: usize,
    pub theta: Threshold,
}

impl DetectorConfig {
    pub fn new(k: usize, theta: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!(
                "window length k = {k} must be at least 2"
            )));
        }
        Ok(Self {
            k,
            theta: Threshold::new(theta)?,
        })
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            k: 8,
            theta: Threshold::new(0.95).unwrap(),
        }
    }
}

/// Append-only sequence of visited states with their hashes.
#[derive(Debug, Clone, Default)]
pub struct StateSequence {
    states: Vec<UiState>,
    hashes: Vec<PHash>,
}

impl StateSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, state: UiState) -> usize {
        self.hashes.push(state.phash());
        self.states.push(state);
        self.states.len() - 1
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&UiState> {
        self.states.get(index)
    }

    pub fn last(&self) -> Option<&UiState> {
        self.states.last()
    }

    /// The state before the last one (`S[|S|-2]`).
    pub fn penultimate(&self) -> Option<&UiState> {
        self.states.len().checked_sub(2).map(|i| &self.states[i])
    }

    pub fn hashes(&self) -> &[PHash] {
        &self.hashes
    }

    pub fn states(&self) -> &[UiState] {
        &self.states
    }
}

/// True when the last `k` states are pairwise-adjacent similar.
pub fn has_tarpit(seq: &StateSequence, cfg: &DetectorConfig) -> bool {
    window_is_tarpit(seq.hashes(), cfg)
}

pub fn window_is_tarpit(hashes: &[PHash], cfg: &DetectorConfig) -> bool {
    let n = hashes.len();
    if n < cfg.k {
        return false;
    }
    hashes[n - cfg.k..]
        .windows(2)
        .all(|pair| cfg.theta.accepts(pair[0], pair[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> DetectorConfig {
        DetectorConfig::default()
    }

    #[test]
    fn short_sequences_never_trigger() {
        let hashes = vec![PHash(0); 7];
        assert!(!window_is_tarpit(&hashes, &cfg()));
        assert!(window_is_tarpit(&[PHash(0); 8], &cfg()));
    }

    #[test]
    fn one_dissimilar_state_breaks_the_window() {
        for pos in 0..8 {
            let mut hashes = vec![PHash(0); 8];
            hashes[pos] = PHash(0xffff);
            assert!(!window_is_tarpit(&hashes, &cfg()), "position {pos}");
        }
        // only the suffix matters
        let mut hashes = vec![PHash(u64::MAX); 3];
        hashes.extend(vec![PHash(0); 8]);
        assert!(window_is_tarpit(&hashes, &cfg()));
    }

    #[test]
    fn three_bit_drift_is_tolerated_at_default_threshold() {
        // 3/64 differing bits -> 0.953 similarity
        let hashes: Vec<_> = (0..8)
            .map(|i| PHash(if i % 2 == 0 { 0 } else { 0b111 }))
            .collect();
        assert!(window_is_tarpit(&hashes, &cfg()));
        let hashes: Vec<_> = (0..8)
            .map(|i| PHash(if i % 2 == 0 { 0 } else { 0b1111 }))
            .collect();
        assert!(!window_is_tarpit(&hashes, &cfg()));
    }

    #[test]
    fn config_validation() {
        assert!(DetectorConfig::new(1, 0.95).is_err());
        assert!(DetectorConfig::new(8, 0.0).is_err());
        assert!(DetectorConfig::new(2, 1.0).is_ok());
    }
}
