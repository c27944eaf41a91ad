//! Encode, synthesize, repair and check one workbench spec.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::format::{CheckerKind, FeasibilityMode};
use super::load::Workbench;
use super::report::*;
use super::WorkbenchError;
use crate::dmp::{fit_dmp, DmpSkillController};
use crate::game::{build_game, extract_strategy, is_realizable};
use crate::logic::State;
use crate::repair::{repair, RepairConfig, RepairError, SkillSuggestion};
use crate::skill::{admissible_world_states, assemble_spec, Skill};
use crate::trajectory::*;

/// Report plus the strategy table of the final game, if any.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RepairReport,
    pub strategy: Option<String>,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        self.report.outcome.exit_code()
    }
}

impl Workbench {
    pub fn checker(&self) -> Box<dyn KinematicChecker> {
        match (self.run.checker, &self.run.reachable_box) {
            (CheckerKind::ReachableBox, Some(b)) => Box::new(b.clone()),
            _ => Box::new(Holonomic),
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.run.seed);
        r.set_stream(stream);
        r
    }
}

struct Physical<'a> {
    wb: &'a Workbench,
    checker: Box<dyn KinematicChecker>,
    fitted: BTreeMap<String, DmpSkillController>,
    round: usize,
    records: Vec<FeasibilityRecord>,
    last: Vec<(SkillSuggestion, DmpSkillController)>,
    error: Option<WorkbenchError>,
    elapsed: f64,
}

impl<'a> Physical<'a> {
    fn base(&mut self, skill: &Skill) -> Result<DmpSkillController, WorkbenchError> {
        if let Some(c) = self.fitted.get(&skill.name) {
            return Ok(c.clone());
        }
        let demos = self.wb.demos_for(skill).ok_or_else(|| WorkbenchError::Pipeline(format!("no demos for `{}`", skill.name)))?;
        let c = fit_dmp(&demos, &self.wb.run.dmp)?;
        self.fitted.insert(skill.name.clone(), c.clone());
        Ok(c)
    }

    fn check(&mut self, sugs: &[SkillSuggestion]) -> Result<Vec<(State, BTreeSet<State>)>, WorkbenchError> {
        let wb = self.wb;
        let (g, v) = (&wb.grounding, &wb.vocab);
        let mut fails = Vec::new();
        self.last.clear();
        for (k, s) in sugs.iter().enumerate() {
            let orig = wb.skills.iter().find(|o| o.name == s.base_skill).expect("suggestion of a known skill");
            let (accepted, pass_fraction, failing) = match wb.run.feasibility {
                FeasibilityMode::None => (true, 1.0, Vec::new()),
                FeasibilityMode::Continuity => {
                    let f = continuity_failures(std::slice::from_ref(&s.skill), g, v);
                    (f.is_empty(), if f.is_empty() { 1.0 } else { 0.0 }, f)
                }
                FeasibilityMode::Trajectory => {
                    let base = self.base(orig)?;
                    let c = suggestion_to_constraint(&s.skill);
                    let sampler = EndpointSampler::for_skill(&s.skill);
                    let stream = 1000 + 2 * (self.round * sugs.len() + k) as u64;
                    let ctrl = repair_trajectory(&base, &c, g, v, &sampler, &wb.run.trajectory, &mut wb.rng(stream))?;
                    let cfg = FeasibilityConfig { samples: wb.run.samples, threshold: wb.run.threshold };
                    let verdict =
                        check_feasibility(&ctrl, &c, g, v, &sampler, self.checker.as_ref(), &cfg, &mut wb.rng(stream + 1))?;
                    let mut f = failing_transitions_to_constraints(&verdict, v, &s.skill.activation, wb.run.threshold);
                    if !verdict.accepted && f.is_empty() {
                        // blame the weakest transitions when none falls below the threshold
                        let worst = verdict
                            .per_transition
                            .values()
                            .filter(|(succ, _, att)| *att > 0 && !succ.is_empty())
                            .map(|(_, ok, att)| *ok as f64 / *att as f64)
                            .fold(f64::INFINITY, f64::min);
                        f = failing_transitions_to_constraints(&verdict, v, &s.skill.activation, worst + 1e-9);
                    }
                    if !verdict.accepted && f.is_empty() {
                        return Err(WorkbenchError::Pipeline(format!(
                            "suggestion for `{}` failed without attributable transitions",
                            s.base_skill
                        )));
                    }
                    self.last.push((s.clone(), ctrl));
                    (verdict.accepted, verdict.pass_fraction, f)
                }
            };
            self.records.push(FeasibilityRecord {
                round: self.round,
                skill: s.base_skill.clone(),
                pass_fraction,
                accepted,
                failing: failing
                    .iter()
                    .map(|(a, bs)| {
                        let bs: Vec<String> = bs.iter().map(|&b| v.show(b)).collect();
                        format!("{} -> {}", v.show(*a), bs.join(" | "))
                    })
                    .collect(),
            });
            fails.extend(failing);
        }
        self.round += 1;
        Ok(fails)
    }

    /// Rollouts of the original and repaired controllers at shared endpoints.
    fn dumps(&mut self) -> Result<Vec<TrajectoryDump>, WorkbenchError> {
        let wb = self.wb;
        let (g, v) = (&wb.grounding, &wb.vocab);
        let mut out = Vec::new();
        let last = std::mem::take(&mut self.last);
        for (k, (s, ctrl)) in last.iter().enumerate() {
            let orig = wb.skills.iter().find(|o| o.name == s.base_skill).expect("known skill");
            let base = self.base(orig)?;
            let c = suggestion_to_constraint(&s.skill);
            let sampler = EndpointSampler::for_skill(&s.skill);
            let mut rng = wb.rng(500 + k as u64);
            for _ in 0..wb.run.dump_rollouts {
                let (a, b) = sampler.sample(g, v, &mut rng)?;
                for (kind, c0) in [("original", &base), ("repaired", ctrl)] {
                    let t = c0.rollout(&a, &b);
                    let passed = abstract_trajectory(&t, g, v).map(|tr| monitor_trace(&tr, &c).all_pass()).unwrap_or(false)
                        && self.checker.check(&t);
                    out.push(TrajectoryDump { skill: s.base_skill.clone(), kind: kind.into(), passed, points: t });
                }
            }
        }
        Ok(out)
    }
}

/// Run the full pipeline on a loaded spec.
pub fn run(wb: &Workbench) -> Result<RunOutput, WorkbenchError> {
    let start = Instant::now();
    let v = &wb.vocab;
    let spec = assemble_spec(v, &wb.grounding, &wb.skills, &wb.task);
    let base = build_game(&spec, &wb.space)?;
    let realizable = is_realizable(&base)?;
    let mut timing = Timing { synthesis_s: start.elapsed().as_secs_f64(), ..Timing::default() };
    let cells = admissible_world_states(&wb.grounding, v)
        .into_iter()
        .filter_map(|s| {
            let (lo, hi) = wb.grounding.cell_box(v, s)?;
            Some(CellRecord { cell: v.state_names(s).into_iter().map(String::from).collect(), lo, hi })
        })
        .collect();
    let mut report = RepairReport {
        schema: REPORT_SCHEMA.into(),
        spec: wb.path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        seed: wb.run.seed,
        outcome: Outcome::RealizableAsGiven,
        realizable_as_given: realizable,
        attempts: Vec::new(),
        feasibility: Vec::new(),
        suggestions: Vec::new(),
        disallowed: Vec::new(),
        cells,
        trajectories: Vec::new(),
        timing: Timing::default(),
    };
    if realizable {
        let table = strategy_table(&extract_strategy(&base)?, v);
        timing.total_s = start.elapsed().as_secs_f64();
        report.timing = timing;
        return Ok(RunOutput { report, strategy: Some(table) });
    }

    let mut phys = Physical {
        wb,
        checker: wb.checker(),
        fitted: BTreeMap::new(),
        round: 0,
        records: Vec::new(),
        last: Vec::new(),
        error: None,
        elapsed: 0.0,
    };
    let cfg = RepairConfig { seed: wb.run.seed, max_iterations: wb.run.max_iterations, step_budget: wb.run.step_budget };
    let t0 = Instant::now();
    let result = repair(&spec, &wb.space, &wb.skills, &wb.constraints, &cfg, &mut |sugs: &[SkillSuggestion]| {
        if phys.error.is_some() {
            return Vec::new();
        }
        let t = Instant::now();
        let out = phys.check(sugs).unwrap_or_else(|e| {
            phys.error = Some(e);
            Vec::new()
        });
        phys.elapsed += t.elapsed().as_secs_f64();
        out
    });
    if let Some(e) = phys.error.take() {
        return Err(e);
    }
    let mut strategy = None;
    match result {
        Ok(r) => {
            report.outcome = Outcome::Repaired;
            report.attempts = r.log.iter().map(|a| AttemptRecord::new(a.iteration, a.ordering, a.realizable, a.steps.clone())).collect();
            report.suggestions = r.suggestions.iter().map(|s| SuggestionRecord::new(v, s)).collect();
            report.disallowed = RepairReport::render_pairs(v, r.constraints.disallowed.difference(&wb.constraints.disallowed).copied());
            strategy = Some(strategy_table(&extract_strategy(&r.game)?, v));
        }
        Err(RepairError::Exhausted { disallowed, log }) => {
            report.outcome = Outcome::Exhausted;
            report.attempts = log.iter().map(|a| AttemptRecord::new(a.iteration, a.ordering, a.realizable, a.steps.clone())).collect();
            report.disallowed = RepairReport::render_pairs(v, disallowed.difference(&wb.constraints.disallowed).copied());
        }
        Err(e) => return Err(e.into()),
    }
    timing.repair_s = t0.elapsed().as_secs_f64();
    if report.outcome == Outcome::Repaired {
        let t = Instant::now();
        report.trajectories = phys.dumps()?;
        phys.elapsed += t.elapsed().as_secs_f64();
    }
    report.feasibility = std::mem::take(&mut phys.records);
    timing.trajectory_s = phys.elapsed;
    timing.total_s = start.elapsed().as_secs_f64();
    report.timing = timing;
    Ok(RunOutput { report, strategy })
}

/// Re-encode the reported suggestions and re-synthesize: whether the result
/// matches the reported verdict.
pub fn verify_report(wb: &Workbench, report: &RepairReport) -> Result<bool, WorkbenchError> {
    let mut skills = wb.skills.clone();
    for s in &report.suggestions {
        let k = s.to_skill(&wb.vocab).map_err(|e| WorkbenchError::Pipeline(e.to_string()))?;
        match skills.iter_mut().find(|o| o.name == s.skill) {
            Some(slot) => *slot = k,
            None => return Ok(false),
        }
    }
    let spec = assemble_spec(&wb.vocab, &wb.grounding, &skills, &wb.task);
    let realizable = is_realizable(&build_game(&spec, &wb.space)?)?;
    Ok(match report.outcome {
        Outcome::RealizableAsGiven => realizable && report.suggestions.is_empty(),
        Outcome::Repaired => realizable,
        Outcome::Exhausted => !realizable,
    })
}
