//! Tarpit memory: lookup, recording, reuse dispatch and persistence.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tarpit_escape::memory::{Dispatch, MemoryConfig, TarpitMemory};
use tarpit_escape::phash::{Bitmap, PHash};
use tarpit_escape::ui::{InteractionType, Rect, UiEvent, UiState};

/// A 9x8 image whose dHash is exactly `hash`.
fn state_for_hash(hash: u64) -> UiState {
    let mut px = Vec::with_capacity(72);
    for i in 0..8 {
        let mut v = 128u8;
        px.push(v);
        for j in 0..8 {
            v = if hash >> (i * 8 + j) & 1 == 1 {
                v - 1
            } else {
                v + 1
            };
            px.push(v);
        }
    }
    let bitmap = Bitmap::new(9, 8, px).unwrap();
    assert_eq!(bitmap.phash(), PHash(hash));
    UiState {
        screenshot: Arc::new(bitmap),
        widgets: Arc::new(Vec::new()),
        true_screen_id: format!("{hash:016x}"),
    }
}

fn event(id: u32, left: i32, kind: InteractionType) -> UiEvent {
    UiEvent {
        action_id: id,
        bounds: Rect::new(left, 10, left + 20, 30).unwrap(),
        kind,
        payload: None,
    }
}

#[test]
fn lookup_examples() {
    let cfg = MemoryConfig::default();
    let base = 0x1234_5678_9abc_def0;
    let mut m = TarpitMemory::new();
    assert!(m.lookup(&state_for_hash(base), &cfg).is_none());
    m.record_escape(
        &state_for_hash(base),
        event(3, 0, InteractionType::Click),
        &cfg,
    );
    assert_eq!(m.lookup(&state_for_hash(base), &cfg).unwrap().tarpit_id, 0);
    // 63/64 = 0.984 falls below 0.99: one flipped bit is a different tarpit.
    assert!(m.lookup(&state_for_hash(base ^ 1), &cfg).is_none());
    let loose = MemoryConfig::new(0.98, 0.8).unwrap();
    assert!(m.lookup(&state_for_hash(base ^ 1), &loose).is_some());
    assert!(m.lookup(&state_for_hash(base ^ 0b11), &loose).is_none());
}

#[test]
fn recording_merges_similar_states_and_dedups_actions() {
    let cfg = MemoryConfig::new(0.98, 0.8).unwrap();
    let mut m = TarpitMemory::new();
    let a = event(1, 0, InteractionType::Click);
    let b = event(2, 40, InteractionType::LongClick);
    assert_eq!(m.record_escape(&state_for_hash(0), a.clone(), &cfg), 0);
    assert_eq!(m.record_escape(&state_for_hash(1), b.clone(), &cfg), 0);
    assert_eq!(
        m.record_escape(
            &state_for_hash(0),
            event(9, 0, InteractionType::Click),
            &cfg
        ),
        0
    );
    assert_eq!(m.records()[0].actions, vec![a, b]);
    assert_eq!(m.records()[0].representative_hash, PHash(0));
    assert_eq!(
        m.record_escape(
            &state_for_hash(u64::MAX),
            event(0, 0, InteractionType::Back),
            &cfg
        ),
        1
    );
    assert_eq!(m.len(), 2);
    // Lowest id wins when several records match.
    assert_eq!(m.lookup(&state_for_hash(0), &cfg).unwrap().tarpit_id, 0);
}

#[test]
fn dispatch_rate_matches_reuse_probability() {
    let cfg = MemoryConfig::default();
    let s = state_for_hash(0xdead_beef);
    let mut m = TarpitMemory::new();
    m.record_escape(&s, event(1, 0, InteractionType::Click), &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20_000;
    let reused = (0..n)
        .filter(|_| {
            let zeta: f64 = rng.gen();
            matches!(m.dispatch(&s, zeta, &cfg, &mut rng), Dispatch::Reuse { .. })
        })
        .count();
    let rate = reused as f64 / n as f64;
    assert!((rate - 0.80).abs() <= 0.03, "reuse rate {rate}");
    // Unknown states always delegate.
    assert_eq!(
        m.dispatch(&state_for_hash(!0xdead_beef), 0.0, &cfg, &mut rng),
        Dispatch::Delegate
    );
}

#[test]
fn reuse_samples_actions_uniformly() {
    let cfg = MemoryConfig::default();
    let s = state_for_hash(77);
    let mut m = TarpitMemory::new();
    let a = event(1, 0, InteractionType::Click);
    m.record_escape(&s, a.clone(), &cfg);
    m.record_escape(&s, event(2, 50, InteractionType::Click), &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 10_000;
    let mut first = 0;
    for _ in 0..n {
        match m.dispatch(&s, 0.0, &cfg, &mut rng) {
            Dispatch::Reuse { event, .. } if event == a => first += 1,
            Dispatch::Reuse { .. } => {}
            Dispatch::Delegate => panic!("zeta 0 must reuse"),
        }
    }
    let share = first as f64 / n as f64;
    assert!((share - 0.5).abs() <= 0.03, "share {share}");
}

#[test]
fn boundary_probabilities() {
    let s = state_for_hash(9);
    let mut m = TarpitMemory::new();
    let never = MemoryConfig::new(0.99, 0.0).unwrap();
    let always = MemoryConfig::new(0.99, 1.0).unwrap();
    m.record_escape(&s, event(1, 0, InteractionType::Click), &never);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(
        m.dispatch(&s, 0.000_1, &never, &mut rng),
        Dispatch::Delegate
    );
    assert!(matches!(
        m.dispatch(&s, 1.0, &always, &mut rng),
        Dispatch::Reuse { .. }
    ));
}

#[test]
fn export_import_through_a_file() {
    let cfg = MemoryConfig::default();
    let mut m = TarpitMemory::new();
    m.record_escape(
        &state_for_hash(1),
        event(1, 0, InteractionType::Click),
        &cfg,
    );
    let mut typed = event(4, 60, InteractionType::TextInput);
    typed.payload = Some("abc".into());
    m.record_escape(&state_for_hash(1), typed, &cfg);
    m.record_escape(
        &state_for_hash(u64::MAX),
        event(0, 0, InteractionType::Scroll),
        &cfg,
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("memory.json");
    std::fs::write(&path, m.to_json().unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value[0]["screenshot_hash"], "0000000000000001");
    assert_eq!(value[0]["actions"][1]["type"], "text_input");
    assert_eq!(value[0]["actions"][1]["payload"], "abc");
    assert_eq!(
        value[1]["actions"][0]["bounds"],
        serde_json::json!([0, 10, 20, 30])
    );

    let back = TarpitMemory::from_json(&text).unwrap();
    assert_eq!(back.export(), m.export());
    assert!(back.lookup(&state_for_hash(u64::MAX), &cfg).is_some());
    assert!(TarpitMemory::from_json(
        "[{\"tarpit_id\":0,\"screenshot_hash\":\"00\",\"actions\":[],\"extra\":1}]"
    )
    .is_err());
    let dup = r#"[{"tarpit_id":0,"screenshot_hash":"0000000000000000","actions":[]},
                  {"tarpit_id":0,"screenshot_hash":"0000000000000001","actions":[]}]"#;
    assert!(TarpitMemory::from_json(dup).is_err());
}
