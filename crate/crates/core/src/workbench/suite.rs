//! Scenario regressions: each case runs over several seeds and is judged by
//! a qualitative predicate.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::load::{read_toml, Workbench};
use super::pipeline::run;
use super::report::{Outcome, SuggestionRecord};
use super::WorkbenchError;
use crate::game::{build_game, compute_winning_states};
use crate::repair::{allowable_postcondition_changes, MutablePartition, Relations};
use crate::skill::assemble_spec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(rename = "case")]
    pub cases: Vec<CaseFile>,
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub name: String,
    pub spec: String,
    pub check: Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Check {
    /// At least `min` different suggestion sets across seeds.
    DistinctChains { min: usize },
    /// Some seed modifies exactly `count` skills.
    SkillsModified { count: usize },
    /// Some seed leaves no skill with a transition into `cell`.
    NoEntry { cell: Vec<String> },
    /// Some suggestion passes through `cell` between its endpoints.
    ChainContains { cell: Vec<String> },
    /// Some seed modifies skills into deterministic chains and leaves `untouched` alone.
    DeterministicUntouched { untouched: String },
    /// The original game admits postcondition redirects both onto an existing
    /// outcome and onto a new one.
    RedirectKinds,
    /// The same distinct suggestion sets across seeds as another case.
    SameAs { case: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: Outcome,
    pub suggestions: Vec<SuggestionRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub runs: Vec<SeedRun>,
}

/// Shape of a suggestion set, without provenance.
type Key = Vec<(String, Vec<Vec<String>>, Vec<Vec<String>>, Vec<[Vec<String>; 2]>)>;

fn key(s: &[SuggestionRecord]) -> Key {
    let mut k: Key = s.iter().map(|r| (r.skill.clone(), r.pre.clone(), r.post.clone(), r.edges.clone())).collect();
    k.sort();
    k
}

fn same(a: &[String], b: &[String]) -> bool {
    a.iter().collect::<BTreeSet<_>>() == b.iter().collect::<BTreeSet<_>>()
}

fn run_case(dir: &Path, case: &CaseFile, seeds: &[u64]) -> Result<(Workbench, Vec<SeedRun>), WorkbenchError> {
    let mut wb = Workbench::load(&dir.join(&case.spec))?;
    let mut runs = Vec::new();
    for &seed in seeds {
        wb.run.seed = seed;
        let out = run(&wb)?;
        runs.push(SeedRun { seed, outcome: out.report.outcome, suggestions: out.report.suggestions });
    }
    Ok((wb, runs))
}

fn judge(wb: &Workbench, runs: &[SeedRun], check: &Check) -> Result<(bool, String), WorkbenchError> {
    let repaired: Vec<&SeedRun> = runs.iter().filter(|r| r.outcome == Outcome::Repaired).collect();
    let seeds_where = |f: &dyn Fn(&SeedRun) -> bool| -> Vec<u64> { repaired.iter().filter(|r| f(r)).map(|r| r.seed).collect() };
    let verdict = |hits: Vec<u64>| (!hits.is_empty(), format!("{} of {} repaired seeds match: {hits:?}", hits.len(), repaired.len()));
    Ok(match check {
        Check::DistinctChains { min } => {
            let sets: BTreeSet<Key> = repaired.iter().map(|r| key(&r.suggestions)).collect();
            (sets.len() >= *min, format!("{} distinct suggestion sets over {} repaired seeds", sets.len(), repaired.len()))
        }
        Check::SkillsModified { count } => verdict(seeds_where(&|r| r.suggestions.len() == *count)),
        Check::NoEntry { cell } => verdict(seeds_where(&|r| {
            wb.skills.iter().all(|s| match r.suggestions.iter().find(|x| x.skill == s.name) {
                Some(x) => !x.edges.iter().any(|[_, b]| same(b, cell)),
                None => {
                    let c = wb.vocab.state(cell).ok();
                    !s.post_map.values().any(|bs| c.is_some_and(|c| bs.contains(&c)))
                }
            })
        })),
        Check::ChainContains { cell } => verdict(seeds_where(&|r| {
            r.suggestions.iter().any(|x| {
                let ends = x.pre.iter().chain(&x.post).any(|e| same(e, cell));
                !ends && x.edges.iter().any(|[a, b]| same(a, cell) || same(b, cell))
            })
        })),
        Check::DeterministicUntouched { untouched } => verdict(seeds_where(&|r| {
            let mut outs: BTreeMap<(&str, &[String]), usize> = BTreeMap::new();
            for x in &r.suggestions {
                for [a, _] in &x.edges {
                    *outs.entry((&x.skill, a)).or_default() += 1;
                }
            }
            !r.suggestions.is_empty()
                && r.suggestions.iter().all(|x| &x.skill != untouched)
                && outs.values().all(|&n| n == 1)
        })),
        Check::RedirectKinds => {
            let spec = assemble_spec(&wb.vocab, &wb.grounding, &wb.skills, &wb.task);
            let g = build_game(&spec, &wb.space)?;
            let w = compute_winning_states(&g)?;
            let z = w.blocking.map(|b| b.attractor).unwrap_or(w.states);
            let rel = Relations::from_partition(&MutablePartition::from_spec(&spec, &wb.space).map_err(crate::repair::RepairError::from)?);
            let changes = allowable_postcondition_changes(&wb.space, &rel, &z, &wb.constraints);
            let reduces = changes.iter().filter(|(a, _, n)| rel.tau_env.contains(&(*a, *n))).count();
            let alters = changes.len() - reduces;
            (reduces > 0 && alters > 0, format!("{reduces} reducing and {alters} changing redirects"))
        }
        Check::SameAs { .. } => unreachable!("judged against the other case"),
    })
}

/// Run every case of a suite file. Case failures are recorded and the suite
/// continues; cases run on separate threads.
pub fn run_scenario_suite(suite_path: &Path) -> Result<Vec<CaseResult>, WorkbenchError> {
    let suite: SuiteFile = read_toml(suite_path)?;
    let dir: PathBuf = suite_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut results: Vec<CaseResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = suite
            .cases
            .iter()
            .map(|case| {
                let (dir, seeds) = (&dir, &suite.seeds);
                scope.spawn(move || {
                    let t = Instant::now();
                    let judged = run_case(dir, case, seeds).and_then(|(wb, runs)| match &case.check {
                        Check::SameAs { .. } => Ok((true, String::new(), runs)),
                        c => judge(&wb, &runs, c).map(|(ok, d)| (ok, d, runs)),
                    });
                    let (passed, detail, runs) = judged.unwrap_or_else(|e| (false, format!("error: {e}"), Vec::new()));
                    CaseResult { name: case.name.clone(), passed, detail, seconds: t.elapsed().as_secs_f64(), runs }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("case thread")).collect()
    });
    for (i, case) in suite.cases.iter().enumerate() {
        let Check::SameAs { case: other } = &case.check else { continue };
        if results[i].detail.starts_with("error") {
            continue;
        }
        let Some(o) = results.iter().find(|r| &r.name == other).cloned() else {
            results[i].passed = false;
            results[i].detail = format!("no case `{other}`");
            continue;
        };
        let sets = |runs: &[SeedRun]| -> BTreeSet<Key> {
            runs.iter().filter(|r| r.outcome == Outcome::Repaired).map(|r| key(&r.suggestions)).collect()
        };
        let (mine, theirs) = (sets(&results[i].runs), sets(&o.runs));
        results[i].passed = !mine.is_empty() && mine == theirs;
        results[i].detail = format!("{} distinct suggestion sets; same as `{other}`: {}", mine.len(), mine == theirs);
    }
    Ok(results)
}
