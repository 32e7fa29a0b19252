//! Sliding-window detection over hash sequences and rendered screens.

use std::sync::Arc;

use proptest::prelude::*;
use tarpit_escape::detector::{has_tarpit, window_is_tarpit, DetectorConfig, StateSequence};
use tarpit_escape::device::Device;
use tarpit_escape::phash::PHash;
use tarpit_escape::sim::{motivating, SimRuntime};
use tarpit_escape::ui::build_action_space;

fn cfg() -> DetectorConfig {
    DetectorConfig::default()
}

/// Direct reading of the rule: k states, every adjacent pair similar.
fn reference(hashes: &[u64], k: usize, theta: f64) -> bool {
    if hashes.len() < k {
        return false;
    }
    let tail = &hashes[hashes.len() - k..];
    (1..k).all(|i| 1.0 - f64::from((tail[i - 1] ^ tail[i]).count_ones()) / 64.0 >= theta)
}

#[test]
fn fewer_than_k_states_never_trigger() {
    for n in 0..8 {
        assert!(!window_is_tarpit(&vec![PHash(42); n], &cfg()));
    }
    assert!(window_is_tarpit(&[PHash(42); 8], &cfg()));
}

#[test]
fn one_outlier_anywhere_in_the_window_breaks_it() {
    for pos in 0..8 {
        let mut hashes = vec![PHash(0); 8];
        hashes[pos] = PHash(u64::MAX);
        assert!(!window_is_tarpit(&hashes, &cfg()));
    }
}

#[test]
fn only_the_suffix_is_examined() {
    let mut hashes = vec![PHash(u64::MAX), PHash(0x0f0f), PHash(1)];
    hashes.extend([PHash(7); 8]);
    assert!(window_is_tarpit(&hashes, &cfg()));
    hashes.push(PHash(!7));
    assert!(!window_is_tarpit(&hashes, &cfg()));
}

#[test]
fn rendered_trap_page_is_detected() {
    let model = Arc::new(motivating::motivating_example());
    let mut rt = SimRuntime::new(model);
    rt.reset_to("b", &[]);
    let mut seq = StateSequence::new();
    seq.push(rt.observe());
    // Self-loops re-render the same page on new frames; the clock blink
    // must not break the window.
    for n in 1..8 {
        let event = build_action_space(seq.last().unwrap()).events()[1].clone();
        let next = rt.execute(&event).state;
        assert_eq!(next.true_screen_id, "b");
        seq.push(next);
        assert_eq!(has_tarpit(&seq, &cfg()), n == 7);
    }
    rt.reset_to("a", &[]);
    seq.push(rt.observe());
    assert!(!has_tarpit(&seq, &cfg()));
}

proptest! {
    #[test]
    fn matches_reference(hashes in prop::collection::vec(prop::sample::select(vec![0u64, 1, 3, 7, 0xff, u64::MAX]), 0..20),
                         k in 2usize..10, theta in 0.5f64..=1.0) {
        let cfg = DetectorConfig::new(k, theta).unwrap();
        let ph: Vec<PHash> = hashes.iter().copied().map(PHash).collect();
        prop_assert_eq!(window_is_tarpit(&ph, &cfg), reference(&hashes, k, theta));
    }

    #[test]
    fn stricter_threshold_never_adds_detections(hashes in prop::collection::vec(any::<u64>(), 8..16),
                                                drift in prop::collection::vec(0u32..6, 16),
                                                t1 in 0.5f64..=1.0, t2 in 0.5f64..=1.0) {
        // Small bit drifts around one base hash so both outcomes occur.
        let base = hashes[0];
        let ph: Vec<PHash> = drift.iter().map(|d| PHash(base ^ ((1u64 << d) - 1))).collect();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let strict = window_is_tarpit(&ph, &DetectorConfig::new(8, hi).unwrap());
        let loose = window_is_tarpit(&ph, &DetectorConfig::new(8, lo).unwrap());
        prop_assert!(!strict || loose);
    }
}
