//! One PASS/FAIL line per acceptance criterion, each under its time budget.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillrepair::dmp::fit_dmp;
use skillrepair::game::{build_game, compute_winning_states, oracle_winning_states};
use skillrepair::logic::{parse_formula, Formula, State, Vocabulary};
use skillrepair::repair::*;
use skillrepair::skill::{encode_skill_env, encode_skills_sys, Skill};
use skillrepair::trajectory::*;
use skillrepair::workbench::{emit_plots, run, verify_report, Outcome, RepairReport, Workbench};

use common::{cell, corner_task, props, random_game, scenarios, staircase};

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn canonical(text: &str, v: &Vocabulary) -> Vec<String> {
    let mut out: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_formula(l, v).unwrap().to_text(v))
        .collect();
    out.sort();
    out
}

fn rendered(fs: &[Formula], v: &Vocabulary) -> Vec<String> {
    let mut out: Vec<String> = fs.iter().map(|f| f.to_text(v)).collect();
    out.sort();
    out
}

fn encoding_golden() -> Verdict {
    let fx = corner_task();
    let v = &fx.vocab;
    let env = rendered(&encode_skill_env(v, &fx.skills[0]), v);
    ensure(env == canonical(include_str!("fixtures/l2r_env.ltl"), v), || "L2R postconditions differ".into())?;
    let sys = rendered(&encode_skills_sys(v, &fx.skills[..1]).all(), v);
    ensure(sys == canonical(include_str!("fixtures/l2r_sys.ltl"), v), || "L2R preconditions differ".into())?;
    let sug = rendered(&suggestion_to_constraint(&staircase()).to_formulas(v), v);
    ensure(sug == canonical(include_str!("fixtures/l2r_suggestion.ltl"), v), || "suggestion constraint differs".into())?;
    Ok(format!("{} + {} + {} clauses", env.len(), sys.len(), sug.len()))
}

fn oracle_equivalence() -> Verdict {
    for seed in 0..100 {
        let g = random_game(seed);
        let fast = compute_winning_states(&g).map_err(|e| e.to_string())?;
        let slow = oracle_winning_states(&g).map_err(|e| e.to_string())?;
        ensure(fast.states == slow.states, || format!("seed {seed} differs"))?;
    }
    Ok("100 games".into())
}

fn cells(v: &Vocabulary, xy: &[(usize, usize)]) -> Vec<State> {
    xy.iter().map(|&(x, y)| cell(v, x, y)).collect()
}

/// The staircase, or a symmetric monotone route through {x0,y1} or {x1,y2}.
fn corner_route(s: &Skill, v: &Vocabulary) -> bool {
    let eq5 = cells(v, &[(0, 0), (1, 0), (1, 1), (2, 1), (2, 2)]);
    let mut path = vec![*s.pre_init.iter().next().unwrap()];
    while let Some(n) = s.post(*path.last().unwrap()).into_iter().next() {
        if s.post(*path.last().unwrap()).len() != 1 || path.len() > 9 {
            return false;
        }
        path.push(n);
    }
    if path == eq5 {
        return true;
    }
    let alt = cells(v, &[(0, 1), (1, 2)]);
    let (_, g) = skillrepair::skill::nine_squares();
    path.len() == 5
        && path[0] == cell(v, 0, 0)
        && path[4] == cell(v, 2, 2)
        && path.windows(2).all(|w| g.cells_adjacent(v, w[0], w[1]))
        && path.iter().any(|c| alt.contains(c))
}

struct Example1 {
    wb: Workbench,
    report: RepairReport,
    suggestion: Skill,
}

fn example1_end_to_end(keep: &mut Option<Example1>) -> Verdict {
    let mut wb = Workbench::load(&scenarios().join("example1/spec.toml")).map_err(|e| e.to_string())?;
    let avoided = cell(&wb.vocab, 2, 0);
    for seed in 0..10 {
        wb.run.seed = seed;
        let t = Instant::now();
        let out = run(&wb).map_err(|e| e.to_string())?;
        ensure(t.elapsed() < Duration::from_secs(300), || format!("seed {seed} over budget"))?;
        let r = out.report;
        ensure(!r.realizable_as_given, || "original spec realizable".into())?;
        if r.outcome != Outcome::Repaired {
            continue;
        }
        let skills: Vec<Skill> = r.suggestions.iter().map(|s| s.to_skill(&wb.vocab).unwrap()).collect();
        ensure(skills.iter().all(|s| !s.unique().contains(&avoided)), || format!("seed {seed} enters {{x2, y0}}"))?;
        ensure(verify_report(&wb, &r).map_err(|e| e.to_string())?, || "repaired game not realizable".into())?;
        if let Some(s) = skills.iter().find(|s| s.name == "L2R" && corner_route(s, &wb.vocab)) {
            let chain = r.suggestions.iter().find(|x| x.skill == "L2R").unwrap().chain.join(", ");
            *keep = Some(Example1 { suggestion: s.clone(), wb, report: r });
            return Ok(format!("seed {seed}: {chain}"));
        }
    }
    Err("no seed produced the corner route".into())
}

fn trajectory_threshold(ex: Option<&Example1>) -> Verdict {
    let ex = ex.ok_or("no accepted suggestion from criterion 3")?;
    let wb = &ex.wb;
    let last = ex.report.feasibility.iter().rev().find(|f| f.skill == "L2R").ok_or("no verdict in the report")?;
    ensure(last.accepted && last.pass_fraction >= 0.9, || format!("report verdict {}", last.pass_fraction))?;
    let l2r = wb.skills.iter().find(|s| s.name == "L2R").unwrap();
    let base = fit_dmp(&wb.demos_for(l2r).unwrap(), &wb.run.dmp).map_err(|e| e.to_string())?;
    let c = suggestion_to_constraint(&ex.suggestion);
    let sampler = EndpointSampler::for_skill(&ex.suggestion);
    let (g, v) = (&wb.grounding, &wb.vocab);
    let ctrl = repair_trajectory(&base, &c, g, v, &sampler, &wb.run.trajectory, &mut ChaCha8Rng::seed_from_u64(0))
        .map_err(|e| e.to_string())?;
    let cfg = FeasibilityConfig { samples: 100, threshold: 0.9 };
    let verdict = check_feasibility(&ctrl, &c, g, v, &sampler, &Holonomic, &cfg, &mut ChaCha8Rng::seed_from_u64(1))
        .map_err(|e| e.to_string())?;
    ensure(verdict.pass_fraction >= 0.9, || format!("pass fraction {}", verdict.pass_fraction))?;
    for (pre, (_, ok, att)) in &verdict.per_transition {
        ensure(*att > 0 && *ok as f64 >= 0.9 * *att as f64, || format!("{} succeeds {ok}/{att}", v.show(*pre)))?;
    }
    Ok(format!("pass fraction {:.2} over {} rollouts", verdict.pass_fraction, verdict.samples))
}

fn feedback_loop() -> Verdict {
    let wb = Workbench::load(&scenarios().join("example1/blocked.toml")).map_err(|e| e.to_string())?;
    let out = run(&wb).map_err(|e| e.to_string())?;
    let want = ["{x1, y0, pi_L2R} -> {x1, y1}", "{x1, y1, pi_L2R} -> {x2, y1}"];
    let centre = out.report.feasibility.iter().find(|f| f.failing.iter().any(|t| t.ends_with("-> {x1, y1}")));
    let centre = centre.ok_or("the centre route was never checked")?;
    ensure(!centre.accepted && centre.failing == want, || format!("emitted {:?}", centre.failing))?;

    let v = &wb.vocab;
    let s = |n: &[&str]| v.state(n).unwrap();
    let failures = vec![
        (s(&["x1", "y0", "pi_L2R"]), BTreeSet::from([cell(v, 1, 1)])),
        (s(&["x1", "y1", "pi_L2R"]), BTreeSet::from([cell(v, 2, 1)])),
    ];
    let reported: BTreeSet<_> = out.report.disallowed.iter().map(|[a, b]| (v.state(a).unwrap(), v.state(b).unwrap())).collect();
    for (a, bs) in &failures {
        ensure(bs.iter().all(|b| reported.contains(&(*a, *b))), || "report lacks a disallowed pair".into())?;
    }
    let fx = corner_task();
    let cons = RepairConstraints::permissive(&fx.space);
    let fed = add_disallowed(&cons, &failures);
    let g = build_game(&fx.spec, &fx.space).unwrap();
    let z = compute_winning_states(&g).unwrap().blocking.unwrap().attractor;
    let rel = Relations::from_partition(&MutablePartition::from_spec(&fx.spec, &fx.space).unwrap());
    let before = allowable_precondition_changes(&fx.space, &rel, &z, &cons);
    let after = allowable_precondition_changes(&fx.space, &rel, &z, &fed);
    let lifted = |t: &(State, State, State)| (State(t.2 .0 | (t.0 .0 & v.output_mask())), t.1.restrict(v.input_mask()));
    for t in &before {
        ensure(fed.disallowed.contains(&lifted(t)) != after.contains(t), || format!("change {t:?} misjudged"))?;
    }
    let post = allowable_postcondition_changes(&fx.space, &rel, &z, &fed);
    ensure(post.iter().all(|&(a, _, n)| !fed.disallowed.contains(&(a, n))), || "post change uses a failed transition".into())?;
    Ok(format!("{} of {} precondition changes excluded; run {:?}", before.len() - after.len(), before.len(), out.report.outcome))
}

fn scenario_suite() -> Verdict {
    let results = skillrepair::workbench::run_scenario_suite(&scenarios().join("suite.toml")).map_err(|e| e.to_string())?;
    let mut line = Vec::new();
    for c in &results {
        ensure(c.passed, || format!("{}: {}", c.name, c.detail))?;
        ensure(c.seconds < 300.0, || format!("{} took {:.0} s", c.name, c.seconds))?;
        line.push(format!("{} {:.1}s", c.name, c.seconds));
    }
    ensure(results.len() == 8, || format!("{} cases", results.len()))?;
    Ok(line.join(", "))
}

fn property_suites(ex: Option<&Example1>) -> Verdict {
    for seed in 0..24 {
        props::monotone(seed, seed % 2 == 0)?;
        props::user_closure(seed, seed % 2 == 1)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for k in 0..1000 {
        props::decomposition(&props::random_trace(&mut rng), k % 2 == 0)?;
    }
    for _ in 0..64 {
        let mut p = || [rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)];
        let (a, b) = (p(), p());
        let w: Vec<f64> = (0..50).map(|_| rng.gen_range(-20.0..20.0)).collect();
        props::endpoints(a, b, &w)?;
    }
    for seed in 0..4 {
        props::repair_deterministic(seed)?;
    }
    let ex = ex.ok_or("no Example 1 report to repeat")?;
    let again = run(&ex.wb).map_err(|e| e.to_string())?.report;
    ensure(again.without_timing() == ex.report.without_timing(), || "repeated run differs".into())?;
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let f1 = emit_plots(&ex.report, d1.path()).map_err(|e| e.to_string())?;
    let f2 = emit_plots(&again, d2.path()).map_err(|e| e.to_string())?;
    ensure(f1.len() == f2.len() && f1.len() > 1, || "plot file sets differ".into())?;
    for (a, b) in f1.iter().zip(&f2) {
        ensure(std::fs::read(a).unwrap() == std::fs::read(b).unwrap(), || format!("{} differs", a.display()))?;
    }
    Ok(format!("monotonicity, closure, 1000 traces, 64 rollouts, identical reports and {} plot files", f1.len()))
}

fn check(id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let t = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let took = t.elapsed();
    let r = r.and_then(|m| if took <= budget { Ok(m) } else { Err(format!("over budget: {m}")) });
    match &r {
        Ok(m) => println!("criterion {id} PASS {name} ({:.1} s): {m}", took.as_secs_f64()),
        Err(m) => println!("criterion {id} FAIL {name} ({:.1} s): {m}", took.as_secs_f64()),
    }
    r.is_ok()
}

#[test]
fn acceptance() {
    let min = |m: u64| Duration::from_secs(60 * m);
    let mut ex = None;
    let results = [
        check(1, "encoding golden", Duration::from_secs(1), encoding_golden),
        check(2, "winning-set oracle", Duration::from_secs(30), oracle_equivalence),
        check(3, "example 1 end to end", min(50), || example1_end_to_end(&mut ex)),
        check(4, "trajectory repair threshold", min(10), || trajectory_threshold(ex.as_ref())),
        check(5, "feedback loop", min(10), feedback_loop),
        check(6, "scenario suite", min(40), scenario_suite),
        check(7, "property suites", min(10), || property_suites(ex.as_ref())),
    ];
    assert!(results.iter().all(|&ok| ok), "{results:?}");
}
