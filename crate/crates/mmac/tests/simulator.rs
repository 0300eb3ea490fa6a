mod common;

use std::collections::{BTreeMap, BTreeSet};

use mmac::fixtures::{apps_dir, FixtureLibrary};
use mmac_core::action::UIAction;
use mmac_core::simenv::{
    candidate_actions, check_goal, enumerate_reachable, frame_events, ground, render, step, AppFixture,
    ElementKind, RenderedElement, Screenshot, SimState, VideoClip, MAX_REACH_DEPTH,
};
use serde_json::json;

fn lib() -> FixtureLibrary {
    FixtureLibrary::load_dir(&apps_dir(&common::fixtures_root())).unwrap()
}

/// Exhaustive depth-first enumeration of every action sequence up to
/// `depth`, keeping the shortest depth per canonical state.
fn oracle(f: &AppFixture, s: &SimState, depth: usize, seen: &mut BTreeMap<String, usize>, d: usize) {
    let k = s.canonical();
    match seen.get(&k) {
        Some(&prev) if prev <= d => return,
        _ => {
            seen.insert(k, d);
        }
    }
    if d == depth {
        return;
    }
    for a in candidate_actions(f, s) {
        let (t, _) = step(f, s, &a);
        oracle(f, &t, depth, seen, d + 1);
    }
}

#[test]
fn every_fixture_validates() {
    let lib = lib();
    assert_eq!(lib.len(), 9);
    for f in lib.iter() {
        f.validate().unwrap();
        assert!(!f.goals.is_empty(), "{} has no goals", f.name);
    }
}

#[test]
fn every_goal_reachable_within_depth_limit() {
    for f in lib().iter() {
        let start = SimState::initial(f);
        let reach = enumerate_reachable(f, &start, MAX_REACH_DEPTH).unwrap();
        for (name, g) in &f.goals {
            let hit = reach.states().filter(|s| check_goal(f, s, g)).filter_map(|s| reach.distance(s)).min();
            assert!(hit.is_some(), "{}: goal {name} unreachable within {MAX_REACH_DEPTH}", f.name);
        }
    }
}

#[test]
fn bfs_matches_exhaustive_oracle() {
    for f in lib().iter() {
        let start = SimState::initial(f);
        for depth in 0..=3 {
            let mut seen = BTreeMap::new();
            oracle(f, &start, depth, &mut seen, 0);
            let reach = enumerate_reachable(f, &start, depth).unwrap();
            assert_eq!(reach.len(), seen.len(), "{} depth {depth}", f.name);
            for s in reach.states() {
                assert_eq!(reach.distance(s), seen.get(&s.canonical()).copied(), "{} depth {depth}", f.name);
            }
        }
    }
}

#[test]
fn depth_guard() {
    let lib = lib();
    let f = lib.require("spotify").unwrap();
    assert!(enumerate_reachable(f, &SimState::initial(f), MAX_REACH_DEPTH + 1).is_err());
}

#[test]
fn spotify_home_after_launch() {
    let lib = lib();
    let f = lib.require("spotify").unwrap();
    let s0 = SimState::initial(f);
    assert_eq!(s0.screen, "desktop");
    let (s1, rep) = step(f, &s0, &UIAction::launch("Spotify"));
    assert!(rep.changed && rep.fault.is_none());
    let shot = render(f, &s1);
    let search = shot.element("search_box").unwrap();
    assert_eq!(search.kind, ElementKind::Textbox);
    let play = shot.element("play").unwrap();
    assert_eq!(play.kind, ElementKind::Button);
    assert!(!play.enabled);
}

#[test]
fn exact_label_beats_partial_match() {
    let lib = lib();
    let f = lib.require("spotify").unwrap();
    let (s1, _) = step(f, &SimState::initial(f), &UIAction::launch("Spotify"));
    let g = ground(&render(f, &s1), "search").unwrap();
    assert_eq!(g.element, "search_box");
    assert!(g.tied_with.is_empty());
    assert_eq!(ground(&render(f, &s1), "play button").unwrap().element, "play");
}

#[test]
fn grounding_tie_goes_to_lowest_id() {
    let el = |id: &str, kind: ElementKind, label: &str| RenderedElement {
        id: id.into(),
        kind,
        label: label.into(),
        enabled: true,
        content: String::new(),
    };
    let shot = Screenshot {
        screen_id: "home".into(),
        title: String::new(),
        elements: vec![
            el("search_history", ElementKind::ListItem, "Search history"),
            el("search_box", ElementKind::Textbox, "Search songs"),
            el("play", ElementKind::Button, "Play"),
        ],
        focused: None,
    };
    let g = ground(&shot, "search").unwrap();
    assert_eq!(g.element, "search_box");
    assert_eq!(g.tied_with, vec!["search_history".to_string()]);
}

#[test]
fn love_story_playing_at_depth_four() {
    let lib = lib();
    let f = lib.require("spotify").unwrap();
    let start = SimState::initial(f);
    let playing = |s: &SimState| s.vars.get("now_playing") == Some(&json!("Love Story"));
    let r3 = enumerate_reachable(f, &start, 3).unwrap();
    assert!(!r3.any(playing));
    let r4 = enumerate_reachable(f, &start, 4).unwrap();
    assert!(r4.any(playing));
}

#[test]
fn scripted_path_reaches_love_story() {
    let lib = lib();
    let f = lib.require("spotify").unwrap();
    let mut s = SimState::initial(f);
    for a in [
        UIAction::launch("Spotify"),
        UIAction::click("search_box"),
        UIAction::type_text("Love Story"),
        UIAction::click("play"),
    ] {
        let (t, rep) = step(f, &s, &a);
        assert!(rep.fault.is_none(), "{a}: {:?}", rep.fault);
        s = t;
    }
    assert!(check_goal(f, &s, f.goal("play_love_story").unwrap()));
}

/// Independent frame differ: element ids present in the later frame only.
fn appeared(a: &Screenshot, b: &Screenshot) -> BTreeSet<String> {
    let before: BTreeSet<&str> = a.elements.iter().map(|e| e.id.as_str()).collect();
    b.elements
        .iter()
        .filter(|e| !before.contains(e.id.as_str()))
        .map(|e| e.label.clone())
        .collect()
}

#[test]
fn frame_events_agree_with_diff_oracle() {
    let lib = lib();
    for f in lib.iter() {
        let mut s = SimState::initial(f);
        let mut clip = VideoClip::default();
        clip.push(0, render(f, &s));
        let mut t = 0;
        // Walk a few steps along the first changing candidate each time.
        for _ in 0..4 {
            let next = candidate_actions(f, &s)
                .into_iter()
                .map(|a| step(f, &s, &a).0)
                .find(|n| n != &s);
            let Some(n) = next else { break };
            s = n;
            t += 1000;
            clip.push(t, render(f, &s));
        }
        let events = frame_events(&clip);
        for w in clip.frames().windows(2) {
            let (a, b) = (&w[0].shot, &w[1].shot);
            let at: Vec<&str> = events.iter().filter(|e| e.t == w[1].t).map(|e| e.description.as_str()).collect();
            if a.screen_id != b.screen_id {
                assert!(at.iter().any(|d| d.starts_with("screen changed to")), "{}: {at:?}", f.name);
            } else {
                for label in appeared(a, b) {
                    assert!(at.iter().any(|d| d.starts_with(&label) && d.ends_with("appeared")), "{}: {label}", f.name);
                }
            }
            assert!(events.iter().all(|e| clip.has_timestamp(e.t)));
        }
    }
}

#[test]
fn dialog_appearing_in_second_frame() {
    let el = |id: &str, label: &str| RenderedElement {
        id: id.into(),
        kind: ElementKind::Button,
        label: label.into(),
        enabled: true,
        content: String::new(),
    };
    let shot = |elements: Vec<RenderedElement>| Screenshot {
        screen_id: "main".into(),
        title: "Main".into(),
        elements,
        focused: None,
    };
    let mut clip = VideoClip::default();
    clip.push(0, shot(vec![el("ok", "OK")]));
    clip.push(1000, shot(vec![el("ok", "OK"), el("dialog", "Confirm dialog")]));
    clip.push(2000, shot(vec![el("ok", "OK"), el("dialog", "Confirm dialog")]));
    let events = frame_events(&clip);
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].t, 1000);
    assert_eq!(events[0].description, "Confirm dialog button appeared");
}
