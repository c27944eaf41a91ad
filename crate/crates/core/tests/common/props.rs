//! Property checks shared by the proptest suite and the acceptance run.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillrepair::dmp::{dist, DmpConfig, DmpSkillController};
use skillrepair::game::{build_game, compute_winning_states};
use skillrepair::logic::{eval_step, State};
use skillrepair::repair::*;
use skillrepair::skill::Skill;
use skillrepair::trajectory::*;

use super::{cell, corner_task, corner_task_react, staircase, Fixture};

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// A suggestion with a branch, so some preconditions have two successors.
pub fn forked() -> Skill {
    let v = corner_task().vocab;
    let c = |x, y| cell(&v, x, y);
    let mut s = Skill::chain("L2R", "pi_L2R", &[c(0, 0), c(1, 0), c(1, 1), c(2, 1), c(2, 2)]);
    s.add_edge(c(1, 0), c(2, 0));
    s.add_edge(c(2, 0), c(2, 1));
    s
}

/// Oracle: every implication on every step, the unique disjunction on every state.
fn satisfies(trace: &[State], c: &TrajectoryConstraint) -> bool {
    let v = corner_task().vocab;
    let fs = c.to_formulas(&v);
    let (unique, implications) = fs.split_last().unwrap();
    let steps = trace.windows(2).all(|w| implications.iter().all(|f| eval_step(f, w[0], w[1]).unwrap()));
    let states = trace.iter().all(|&s| eval_step(unique, s, s).unwrap());
    steps && states
}

/// Mostly steps along the staircase, sometimes any cell.
pub fn random_trace(rng: &mut ChaCha8Rng) -> Vec<State> {
    let v = corner_task().vocab;
    let chain = [(0, 0), (1, 0), (1, 1), (2, 1), (2, 2)];
    (0..rng.gen_range(1..24))
        .map(|_| {
            let (x, y) = if rng.gen_bool(0.75) { chain[rng.gen_range(0..5)] } else { (rng.gen_range(0..3), rng.gen_range(0..3)) };
            cell(&v, x, y)
        })
        .collect()
}

/// The per-transition monitors agree with the implications one by one, and
/// their conjunction with the whole constraint.
pub fn decomposition(trace: &[State], branch: bool) -> Check {
    let c = suggestion_to_constraint(&if branch { forked() } else { staircase() });
    let r = monitor_trace(trace, &c);
    ensure(r.all_pass() == satisfies(trace, &c), || format!("monitor disagrees on {trace:?}"))?;
    let v = corner_task().vocab;
    let fs = c.to_formulas(&v);
    for ((pre, _), f) in c.implications.iter().zip(&fs) {
        let holds = trace.windows(2).all(|w| eval_step(f, w[0], w[1]).unwrap());
        ensure(r.per_transition[pre] == holds, || format!("transition {pre:?} disagrees on {trace:?}"))?;
    }
    Ok(())
}

fn walk(fx: &Fixture, seed: u64, pre_first: bool, mut each: impl FnMut(&Relations, &StepOutcome) -> Check) -> Check {
    let g = build_game(&fx.spec, &fx.space).unwrap();
    let cons = RepairConstraints::permissive(&fx.space);
    let mut rel = Relations::from_partition(&MutablePartition::from_spec(&fx.spec, &fx.space).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pre = pre_first;
    for _ in 0..6 {
        let w = compute_winning_states(&rel.game(&g)).unwrap();
        let Some(b) = w.blocking else { break };
        let out = if pre {
            modify_preconditions(&fx.space, &rel, &b.attractor, &cons, &mut rng)
        } else {
            modify_postconditions(&fx.space, &rel, &b.attractor, &cons, &mut rng)
        };
        each(&rel, &out)?;
        rel = out.relations;
        pre = !pre;
    }
    Ok(())
}

/// Steps only add system transitions and never touch the hard relations.
pub fn monotone(seed: u64, pre_first: bool) -> Check {
    let fx = corner_task();
    let start = Relations::from_partition(&MutablePartition::from_spec(&fx.spec, &fx.space).unwrap());
    walk(&fx, seed, pre_first, |rel, out| {
        let r = &out.relations;
        ensure(r.tau_sys_mutable.is_superset(&rel.tau_sys_mutable), || "system relation shrank".into())?;
        ensure(r.tau_sys_hard == start.tau_sys_hard, || "hard system relation changed".into())?;
        ensure(r.tau_env_hard == start.tau_env_hard, || "hard environment relation changed".into())?;
        ensure(r.tau_env.is_subset(&start.tau_env_hard), || "environment left its hard bound".into())
    })
}

/// Every change also appears with the user input flipped.
pub fn user_closure(seed: u64, pre_first: bool) -> Check {
    let fx = corner_task_react();
    let u = fx.vocab.user_mask();
    let flip = |s: State| State(s.0 ^ u);
    walk(&fx, seed, pre_first, |_, out| {
        let selected: BTreeSet<_> = out.selected.iter().copied().collect();
        for &(a, b, n) in &selected {
            ensure(selected.contains(&(flip(a), flip(b), flip(n))), || format!("change {a:?} {b:?} {n:?} not closed"))?;
        }
        for &(a, b) in &out.added_sys {
            ensure(out.relations.tau_sys_mutable.contains(&(flip(a), flip(b))), || "system edge not closed".into())?;
        }
        for &(a, e) in &out.added_env {
            ensure(out.relations.tau_env.contains(&(flip(a), flip(e))), || "environment edge not closed".into())?;
        }
        Ok(())
    })
}

/// Rollouts start exactly at the start, settle at the goal and stay put
/// when both coincide.
pub fn endpoints(start: [f64; 2], goal: [f64; 2], weights: &[f64]) -> Check {
    let mut c = DmpSkillController::zero(2, &DmpConfig::default());
    c.weights = vec![weights[..25].to_vec(), weights[25..50].to_vec()];
    let t = c.rollout(&start, &goal);
    ensure(t.len() == 50, || format!("{} samples", t.len()))?;
    ensure(t[0] == start.to_vec(), || "first sample moved".into())?;
    ensure(dist(&t[49], &goal) < 1e-2, || format!("ends at {:?}", t[49]))?;
    let still = c.rollout(&start, &start);
    ensure(still.iter().all(|p| dist(p, &start) < 1e-12), || "drifts without displacement".into())
}

/// Two symbolic repair runs with one seed agree on everything.
pub fn repair_deterministic(seed: u64) -> Check {
    let fx = corner_task();
    let cons = RepairConstraints::permissive(&fx.space);
    let cfg = RepairConfig { seed, ..RepairConfig::default() };
    let run = || repair(&fx.spec, &fx.space, &fx.skills, &cons, &cfg, &mut |_| Vec::new());
    match (run(), run()) {
        (Ok(a), Ok(b)) => ensure(a.suggestions == b.suggestions && a.log == b.log && a.relations == b.relations, || {
            format!("seed {seed}: runs differ")
        }),
        (Err(a), Err(b)) => ensure(a == b, || format!("seed {seed}: errors differ")),
        _ => Err(format!("seed {seed}: one run failed")),
    }
}
