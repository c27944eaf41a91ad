mod common;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skillrepair::game::{build_game, compute_winning_states, is_realizable};
use skillrepair::logic::State;
use skillrepair::repair::*;

use common::{cell, corner_task, named};

#[test]
fn winning_set_for_blocked_goal() {
    let fx = corner_task();
    let g = build_game(&fx.spec, &fx.space).unwrap();
    assert!(!is_realizable(&g).unwrap());
    let w = compute_winning_states(&g).unwrap();
    let b = w.blocking.expect("blocked");
    assert_eq!(b.goal, 0);
    let v = &fx.vocab;
    let expect: BTreeSet<State> = [
        named(v, &["x2", "y1", "pi_L2R"]),
        named(v, &["x2", "y2", "pi_R2L"]),
        named(v, &["x2", "y2"]),
    ]
    .into();
    assert_eq!(b.attractor, expect);
}

#[test]
fn precondition_then_postcondition_steps() {
    let fx = corner_task();
    let v = &fx.vocab;
    let s = |n: &[&str]| named(v, n);
    let g = build_game(&fx.spec, &fx.space).unwrap();
    let z = compute_winning_states(&g).unwrap().blocking.unwrap().attractor;
    let rel = Relations::from_partition(&MutablePartition::from_spec(&fx.spec, &fx.space).unwrap());
    let awr = always_win_and_reachable(&fx.space, &rel, &z);
    let expect: Rel = [
        (s(&["x2", "y0", "pi_L2R"]), s(&["x2", "y1", "pi_L2R"])),
        (s(&["x2", "y1", "pi_L2R"]), s(&["x2", "y2", "pi_R2L"])),
        (s(&["x2", "y1", "pi_L2R"]), s(&["x2", "y2"])),
    ]
    .into();
    assert_eq!(awr, expect);

    let cons = RepairConstraints::permissive(&fx.space);
    let allow = allowable_precondition_changes(&fx.space, &rel, &z, &cons);
    let targets: BTreeSet<State> = allow.iter().map(|t| t.2).collect();
    let expect: BTreeSet<State> = [cell(v, 0, 1), cell(v, 0, 2), cell(v, 1, 1), cell(v, 1, 2)].into();
    assert_eq!(targets, expect);

    // find the seed picking the lower-right precondition moved to {x1, y1}
    let wanted = (s(&["x2", "y0", "pi_L2R"]), s(&["x2", "y1", "pi_L2R"]), cell(v, 1, 1));
    let out = (0..200)
        .map(|k| modify_preconditions(&fx.space, &rel, &z, &cons, &mut ChaCha8Rng::seed_from_u64(k)))
        .find(|o| o.selected == vec![wanted])
        .expect("some seed selects the change");
    let r2 = &out.relations;
    assert!(r2.tau_sys_mutable.contains(&(s(&["x1", "y0", "pi_L2R"]), s(&["x1", "y1", "pi_L2R"]))));
    assert!(r2.tau_sys_mutable.is_superset(&rel.tau_sys_mutable));
    assert_eq!(r2.tau_sys_hard, rel.tau_sys_hard);
    let from_x1y1: Vec<State> =
        r2.tau_env.iter().filter(|(a, _)| *a == s(&["x1", "y1", "pi_L2R"])).map(|p| p.1).collect();
    assert_eq!(from_x1y1, vec![cell(v, 2, 1)]);
    assert!(r2.tau_env.contains(&(s(&["x1", "y0", "pi_L2R"]), cell(v, 1, 1))));

    let g2 = r2.game(&g);
    let z2 = compute_winning_states(&g2).unwrap().blocking.unwrap().attractor;
    assert!(z2.contains(&s(&["x1", "y1", "pi_L2R"])));
    let post = allowable_postcondition_changes(&fx.space, r2, &z2, &cons);
    let wanted = (s(&["x1", "y0", "pi_L2R"]), s(&["x2", "y0", "pi_L2R"]), cell(v, 1, 1));
    assert!(post.contains(&wanted));
    assert!(post.iter().all(|t| t.0 == s(&["x1", "y0", "pi_L2R"])));
    let out = (0..200)
        .map(|k| modify_postconditions(&fx.space, r2, &z2, &cons, &mut ChaCha8Rng::seed_from_u64(k)))
        .find(|o| o.selected == vec![wanted])
        .unwrap();
    assert_eq!(out.removed_env, [(s(&["x1", "y0", "pi_L2R"]), cell(v, 2, 0))].into());
    assert!(out.added_env.is_empty());
    assert!(is_realizable(&out.relations.game(&g)).unwrap());
}

fn centre_route(v: &skillrepair::logic::Vocabulary) -> Vec<(State, State)> {
    let c = |x, y| cell(v, x, y);
    let mut e = vec![(c(0, 0), c(1, 0)), (c(1, 0), c(1, 1)), (c(1, 1), c(2, 1)), (c(2, 1), c(2, 2))];
    e.sort();
    e
}

#[test]
fn end_to_end_over_seeds() {
    let fx = corner_task();
    let v = &fx.vocab;
    let cons = RepairConstraints::permissive(&fx.space);
    let mut hits = 0;
    for seed in 0..10 {
        let cfg = RepairConfig { seed, ..RepairConfig::default() };
        let res = repair(&fx.spec, &fx.space, &fx.skills, &cons, &cfg, &mut |_| Vec::new());
        let Ok(res) = res else { continue };
        assert!(is_realizable(&res.game).unwrap());
        for s in &res.suggestions {
            assert!(!s.skill.unique().contains(&cell(v, 2, 0)));
            if s.base_skill == "L2R" && s.chain() == centre_route(v) {
                hits += 1;
            }
        }
    }
    assert!(hits > 0);
}
