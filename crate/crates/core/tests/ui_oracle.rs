//! Occlusion filtering, linearization and action spaces.

mod common;

use common::{brute_force_valid, random_layout, widget};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tarpit_escape::ui::{
    build_action_space_for, get_valid_widgets, linearize, InteractionType, Rect, UiEvent, Widget,
};

const SCREEN: Rect = Rect {
    left: 0,
    top: 0,
    right: 180,
    bottom: 320,
};

#[test]
fn occlusion_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let layout = random_layout(&mut rng);
        let ours: Vec<u32> = get_valid_widgets(&layout)
            .iter()
            .map(|w| w.widget_id)
            .collect();
        if ours != brute_force_valid(&layout) {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn occlusion_examples() {
    use InteractionType::Click;
    let disjoint = [
        widget(0, 0, 0, 10, 10, &[Click]),
        widget(1, 20, 20, 30, 30, &[Click]),
    ];
    assert_eq!(get_valid_widgets(&disjoint).len(), 2);

    let nested = [
        widget(0, 10, 10, 20, 20, &[Click]),
        widget(1, 0, 0, 100, 100, &[Click]),
    ];
    let kept: Vec<_> = get_valid_widgets(&nested)
        .iter()
        .map(|w| w.widget_id)
        .collect();
    assert_eq!(kept, vec![1]);

    let twins = [
        widget(0, 0, 0, 50, 50, &[Click]),
        widget(1, 0, 0, 50, 50, &[Click]),
    ];
    assert!(get_valid_widgets(&twins).is_empty());

    // A centre on a shared edge counts as covered.
    let touching = [
        widget(0, 0, 0, 20, 20, &[Click]),
        widget(1, 10, 0, 40, 20, &[Click]),
    ];
    let kept: Vec<_> = get_valid_widgets(&touching)
        .iter()
        .map(|w| w.widget_id)
        .collect();
    assert_eq!(kept, vec![1]);
    assert!(get_valid_widgets(&[]).is_empty());
}

#[test]
fn linearize_examples() {
    use InteractionType::Click;
    let ws = vec![
        widget(0, 0, 10, 5, 15, &[Click]),
        widget(1, 0, 5, 5, 8, &[Click]),
    ];
    let tops: Vec<_> = linearize(ws).iter().map(|w| w.bounds.top).collect();
    assert_eq!(tops, vec![5, 10]);
    let ws = vec![
        widget(0, 30, 0, 40, 5, &[Click]),
        widget(1, 20, 0, 25, 5, &[Click]),
    ];
    let lefts: Vec<_> = linearize(ws).iter().map(|w| w.bounds.left).collect();
    assert_eq!(lefts, vec![20, 30]);
    let ws = vec![
        widget(4, 0, 0, 5, 5, &[Click]),
        widget(2, 0, 0, 9, 9, &[Click]),
    ];
    let ids: Vec<_> = linearize(ws).iter().map(|w| w.widget_id).collect();
    assert_eq!(ids, vec![2, 4]);
}

fn grid_page(n_pairs: usize, toolbar_top: bool) -> Vec<Widget> {
    use InteractionType::{Click, LongClick};
    let mut ws = Vec::new();
    let offset = if toolbar_top { 30 } else { 0 };
    for k in 0..n_pairs {
        let (row, col) = ((k / 4) as i32, (k % 4) as i32);
        let (l, t) = (4 + col * 44, offset + 4 + row * 7);
        ws.push(widget(k as u32, l, t, l + 40, t + 5, &[Click, LongClick]));
    }
    let bar = if toolbar_top {
        (0, 0, 180, 28)
    } else {
        (0, 300, 180, 320)
    };
    ws.push(widget(
        n_pairs as u32,
        bar.0,
        bar.1,
        bar.2,
        bar.3,
        &InteractionType::ALL,
    ));
    ws
}

#[test]
fn worked_example_action_space_sizes() {
    let b = build_action_space_for(&grid_page(32, false), SCREEN);
    assert_eq!(b.widget_event_count(), 70);
    assert_eq!(b.len(), 70, "a widget exposes back, so no synthetic back");
    let c = build_action_space_for(&grid_page(37, true), SCREEN);
    assert_eq!(c.widget_event_count(), 80);
    assert!(!c.has_synthetic_back());

    let empty = build_action_space_for(&[], SCREEN);
    assert_eq!(empty.len(), 1);
    assert_eq!(empty.events()[0].kind, InteractionType::Back);
    assert_eq!(empty.events()[0].bounds, SCREEN);
}

fn check_space(layout: &[Widget]) -> Result<(), TestCaseError> {
    let space = build_action_space_for(layout, SCREEN);
    let valid = linearize(get_valid_widgets(layout));
    // Dense ids in linearized order.
    for (i, e) in space.events().iter().enumerate() {
        prop_assert_eq!(e.action_id as usize, i);
        if e.kind == InteractionType::Back {
            prop_assert_eq!(e.bounds, SCREEN);
        }
    }
    let widget_events: usize = valid.iter().map(|w| w.interactions.len()).sum();
    let exposes_back = valid
        .iter()
        .any(|w| w.interactions.contains(&InteractionType::Back));
    prop_assert_eq!(space.len(), widget_events + usize::from(!exposes_back));
    prop_assert_eq!(space.widget_event_count(), widget_events);
    // Survivors never cover each other's centres.
    for a in &valid {
        for b in &valid {
            if a.widget_id != b.widget_id {
                prop_assert!(!b.bounds.contains(a.bounds.center()));
            }
        }
    }
    // Filtering is contractive.
    for w in &valid {
        prop_assert!(layout.iter().any(|x| x == w));
    }
    let again = build_action_space_for(layout, SCREEN);
    prop_assert_eq!(space.events(), again.events());
    let lookups: Vec<&UiEvent> = space
        .events()
        .iter()
        .filter_map(|e| space.find_equivalent(e))
        .collect();
    prop_assert_eq!(lookups.len(), space.len());
    Ok(())
}

proptest! {
    #[test]
    fn action_space_invariants(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layout = random_layout(&mut rng);
        // Interaction lists are sets.
        for w in &mut layout {
            w.interactions.sort_by_key(|i| i.as_str());
            w.interactions.dedup();
        }
        check_space(&layout)?;
    }

    #[test]
    fn linearize_is_a_sorted_permutation(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = random_layout(&mut rng);
        let out = linearize(layout.clone());
        prop_assert_eq!(out.len(), layout.len());
        for pair in out.windows(2) {
            let key = |w: &Widget| (w.bounds.top, w.bounds.left, w.widget_id);
            prop_assert!(key(&pair[0]) <= key(&pair[1]));
        }
        prop_assert_eq!(linearize(out.clone()), out);
    }
}

#[test]
fn rect_serde_and_validation() {
    assert!(Rect::new(5, 0, 5, 10).is_none());
    assert!(Rect::new(0, 10, 5, 10).is_none());
    let r: Rect = serde_json::from_str("[1,2,3,4]").unwrap();
    assert_eq!(r, Rect::new(1, 2, 3, 4).unwrap());
    assert!(serde_json::from_str::<Rect>("[3,2,1,4]").is_err());
    assert_eq!(serde_json::to_string(&r).unwrap(), "[1,2,3,4]");
    assert_eq!(Rect::new(0, 0, 5, 5).unwrap().center(), (2, 2));
}
