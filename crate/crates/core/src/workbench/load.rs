//! Loading and validating a workbench spec with everything it references.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;

use super::format::*;
use super::WorkbenchError;
use crate::dmp::{resample, Trajectory};
use crate::logic::{check_safety, eval_state, parse_formula, Formula, State, StateSpace, Vocabulary};
use crate::repair::RepairConstraints;
use crate::skill::{grounded_space, Grounding, Skill, Task};
use crate::trajectory::sample_in_cell;

/// A validated spec with every referenced file resolved.
#[derive(Debug, Clone)]
pub struct Workbench {
    pub path: PathBuf,
    pub vocab: Vocabulary,
    pub grounding: Grounding,
    pub skills: Vec<Skill>,
    /// Demonstration recipes by skill name.
    pub demos: BTreeMap<String, DemoFile>,
    pub task: Task,
    pub space: StateSpace,
    pub constraints: RepairConstraints,
    pub run: RunConfig,
}

fn invalid(file: &Path, field: impl Into<String>, msg: impl ToString) -> WorkbenchError {
    WorkbenchError::Invalid { file: file.to_path_buf(), field: field.into(), msg: msg.to_string() }
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T, WorkbenchError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| WorkbenchError::Io { file: path.to_path_buf(), msg: e.to_string() })?;
    toml::from_str(&text).map_err(|e| {
        let field = e.span().map(|s| text[s].lines().next().unwrap_or("").trim().to_string()).unwrap_or_default();
        invalid(path, field, e.message())
    })
}

/// Goal of a liveness entry: `G(F(goal))`, `G F goal` or the bare goal.
pub fn liveness_goal(f: Formula) -> Formula {
    match f {
        Formula::Always(inner) => match *inner {
            Formula::Eventually(g) => *g,
            other => Formula::Always(Box::new(other)),
        },
        other => other,
    }
}

impl Workbench {
    pub fn load(path: &Path) -> Result<Self, WorkbenchError> {
        let spec: SpecFile = read_toml(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let skill_files = spec
            .skills
            .iter()
            .map(|s| read_toml::<SkillFile>(&dir.join(s)).map(|f| (dir.join(s), f)))
            .collect::<Result<Vec<_>, _>>()?;
        let outputs = spec
            .vocabulary
            .outputs
            .clone()
            .unwrap_or_else(|| skill_files.iter().map(|(_, f)| f.activation.clone()).collect());
        let vocab = Vocabulary::new(&spec.vocabulary.world, &spec.vocabulary.user, &outputs)
            .map_err(|e| invalid(path, "vocabulary", e))?;

        let gpath = dir.join(&spec.grounding);
        let grounding: Grounding = read_toml(&gpath)?;
        grounding.check(&vocab).map_err(|e| invalid(&gpath, "regions", e))?;
        let space = grounded_space(&vocab, &grounding);

        let mut skills = Vec::new();
        let mut demos = BTreeMap::new();
        for (file, sf) in &skill_files {
            if vocab.output_bit(&sf.activation).is_none() {
                return Err(invalid(file, "activation", format!("`{}` is not a declared output", sf.activation)));
            }
            if skills.iter().any(|s: &Skill| s.name == sf.name) {
                return Err(invalid(file, "name", format!("duplicate skill `{}`", sf.name)));
            }
            let skill = skill_of(file, sf, &vocab, &space)?;
            if let Some(d) = &sf.demos {
                if d.count == 0 {
                    return Err(invalid(file, "demos.count", "must be positive"));
                }
                if d.order.iter().any(|&i| i >= grounding.dims()) {
                    return Err(invalid(file, "demos.order", "dimension out of range"));
                }
                demos.insert(sf.name.clone(), d.clone());
            }
            skills.push(skill);
        }
        if let Some(o) = outputs.iter().find(|o| !skills.iter().any(|s| &s.activation == *o)) {
            return Err(invalid(path, "vocabulary.outputs", format!("`{o}` activates no skill")));
        }

        let task = task_of(path, &spec.task, &vocab)?;
        let constraints = match &spec.constraints {
            None => RepairConstraints::permissive(&space),
            Some(c) => {
                let cpath = dir.join(c);
                let cf: ConstraintsFile = read_toml(&cpath)?;
                let parse = |field: &str, t: &Option<String>| {
                    t.as_ref().map(|t| parse_formula(t, &vocab).map_err(|e| invalid(&cpath, field, e))).transpose()
                };
                let poss = parse("poss_changes", &cf.poss_changes)?;
                let dis = parse("disallowed", &cf.disallowed)?;
                RepairConstraints::from_formulas(&space, poss.as_ref(), dis.as_ref())
                    .map_err(|e| invalid(&cpath, "poss_changes", e))?
            }
        };

        let run = spec.run.clone();
        check_run(path, &run, &grounding, &demos, &skills)?;
        Ok(Workbench { path: path.to_path_buf(), vocab, grounding, skills, demos, task, space, constraints, run })
    }

    /// Check the run configuration again after overrides.
    pub fn revalidate(&self) -> Result<(), WorkbenchError> {
        check_run(&self.path, &self.run, &self.grounding, &self.demos, &self.skills)
    }

    /// Demonstrations for a skill from its recipe.
    pub fn demos_for(&self, skill: &Skill) -> Option<Vec<Trajectory>> {
        let d = self.demos.get(&skill.name)?;
        let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
        let pick = |v: &[State], rng: &mut ChaCha8Rng| if v.len() == 1 { v[0] } else { v[rng.gen_range(0..v.len())] };
        let pres: Vec<State> = skill.pre_init.iter().copied().collect();
        let posts: Vec<State> = skill.post_final.iter().copied().collect();
        let n = self.run.dmp.timesteps;
        let mut out = Vec::with_capacity(d.count);
        for _ in 0..d.count {
            let a = pick(&pres, &mut rng);
            let b = pick(&posts, &mut rng);
            let s = sample_in_cell(a, &self.grounding, &self.vocab, 0.15, &mut rng).ok()?;
            let g = sample_in_cell(b, &self.grounding, &self.vocab, 0.15, &mut rng).ok()?;
            let mut pts = vec![s.clone()];
            match d.kind {
                DemoKind::Axis => {
                    let mut p = s.clone();
                    for &i in &d.order {
                        p[i] = g[i];
                        pts.push(p.clone());
                    }
                }
                DemoKind::Waypoints => {
                    let mut cur = a;
                    while let Some(next) = skill.post(cur).into_iter().next() {
                        if skill.post_final.contains(&next) {
                            break;
                        }
                        let (lo, hi) = self.grounding.cell_box(&self.vocab, next)?;
                        pts.push(lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect());
                        cur = next;
                    }
                }
            }
            if pts.last() != Some(&g) {
                pts.push(g);
            }
            out.push(resample(&pts, n));
        }
        Some(out)
    }
}

fn skill_of(file: &Path, sf: &SkillFile, vocab: &Vocabulary, space: &StateSpace) -> Result<Skill, WorkbenchError> {
    let mut skill = Skill::new(&sf.name, &sf.activation);
    if sf.paths.is_empty() {
        return Err(invalid(file, "paths", "needs at least one path"));
    }
    for (i, path) in sf.paths.iter().enumerate() {
        let field = format!("paths[{i}]");
        if path.len() < 2 {
            return Err(invalid(file, &field, "a path needs at least two cells"));
        }
        let cells = path
            .iter()
            .map(|c| {
                if let Some(n) = c.iter().find(|n| !vocab.world().contains(n)) {
                    return Err(invalid(file, &field, format!("`{n}` is not a world proposition")));
                }
                let s = vocab.state(c).map_err(|e| invalid(file, &field, e))?;
                if !space.admits(s) {
                    return Err(invalid(file, &field, format!("{} is not an admissible cell", vocab.show(s))));
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>, _>>()?;
        skill.pre_init.insert(cells[0]);
        skill.post_final.insert(*cells.last().unwrap());
        for w in cells.windows(2) {
            skill.add_edge(w[0], w[1]);
        }
    }
    skill.validate().map_err(|e| invalid(file, "paths", e))?;
    Ok(skill)
}

fn task_of(file: &Path, t: &TaskFile, vocab: &Vocabulary) -> Result<Task, WorkbenchError> {
    let parse = |field: &str, texts: &[String], safety: bool| -> Result<Vec<Formula>, WorkbenchError> {
        texts
            .iter()
            .enumerate()
            .map(|(i, text)| {
                let at = format!("task.{field}[{i}]");
                let f = parse_formula(text, vocab).map_err(|e| invalid(file, &at, e))?;
                let f = if field == "sys_liveness" { liveness_goal(f) } else { f };
                if safety {
                    check_safety(&f).map_err(|e| invalid(file, &at, e))?;
                } else {
                    eval_state(&f, State(0)).map_err(|e| invalid(file, &at, e))?;
                }
                Ok(f)
            })
            .collect()
    };
    for (i, text) in t.env_liveness.iter().enumerate() {
        if text.trim() != "true" {
            return Err(invalid(file, format!("task.env_liveness[{i}]"), "only `true` is supported"));
        }
    }
    Ok(Task {
        env_init: parse("env_init", &t.env_init, false)?,
        sys_init: parse("sys_init", &t.sys_init, false)?,
        env_safety: parse("env_safety", &t.env_safety, true)?,
        sys_safety: parse("sys_safety", &t.sys_safety, true)?,
        sys_liveness: parse("sys_liveness", &t.sys_liveness, false)?,
    })
}

fn check_run(
    file: &Path,
    r: &RunConfig,
    g: &Grounding,
    demos: &BTreeMap<String, DemoFile>,
    skills: &[Skill],
) -> Result<(), WorkbenchError> {
    let bad = |field: &str, msg: &str| Err(invalid(file, format!("run.{field}"), msg));
    if r.max_iterations == 0 {
        return bad("max_iterations", "must be positive");
    }
    if r.step_budget == 0 {
        return bad("step_budget", "must be positive");
    }
    if r.samples == 0 {
        return bad("samples", "must be positive");
    }
    if !(r.threshold > 0.0 && r.threshold <= 1.0) {
        return bad("threshold", "must lie in (0, 1]");
    }
    if r.dmp.timesteps < 2 || r.dmp.n_basis == 0 || r.dmp.substeps == 0 {
        return bad("dmp", "timesteps >= 2, n_basis >= 1 and substeps >= 1 required");
    }
    let t = &r.trajectory;
    if t.batch == 0 || t.train_pairs == 0 || !(t.step_size > 0.0) || !(t.clip > 0.0) || !(t.beta > 0.0) || t.w_ltl < 0.0 {
        return bad("trajectory", "batch, train_pairs, step_size, clip and beta must be positive, w_ltl non-negative");
    }
    if r.checker == CheckerKind::ReachableBox {
        match &r.reachable_box {
            None => return bad("reachable_box", "required by the reachable-box checker"),
            Some(b) if b.lo.len() != g.dims() || b.hi.len() != g.dims() => {
                return bad("reachable_box", "dimension differs from the grounding")
            }
            _ => {}
        }
    }
    if r.feasibility == FeasibilityMode::Trajectory {
        if let Some(s) = skills.iter().find(|s| !demos.contains_key(&s.name)) {
            return bad("feasibility", &format!("skill `{}` has no demos for trajectory feasibility", s.name));
        }
    }
    Ok(())
}
