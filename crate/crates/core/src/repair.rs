//! Precondition and postcondition repair over explicit transition sets.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::game::{
    build_game, compute_winning_states, extract_strategy, realizable_with, GameError, GameStructure, Gr1Spec,
    Strategy,
};
use crate::logic::{eval_step, relation_of, Formula, LogicError, Slice, State, StateSpace, Vocabulary};
use crate::skill::Skill;

/// A set of (current, next) pairs.
pub type Rel = BTreeSet<(State, State)>;

/// User limits on how repair may rewrite inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairConstraints {
    /// (inputs, inputs′) pairs a state may be rewritten along.
    pub poss_changes: Rel,
    /// (full state, inputs′) pairs known to be infeasible.
    pub disallowed: Rel,
}

impl RepairConstraints {
    /// Any admissible input state may replace any other with the same user inputs.
    pub fn permissive(space: &StateSpace) -> Self {
        let ins = space.states(Slice::Inputs);
        let umask = space.vocab.user_mask();
        let poss = ins
            .iter()
            .flat_map(|&a| ins.iter().filter(move |b| b.restrict(umask) == a.restrict(umask)).map(move |&b| (a, b)))
            .collect();
        RepairConstraints { poss_changes: poss, disallowed: Rel::new() }
    }

    /// Constraints from formulas; `poss` is read over (inputs, inputs′) and
    /// `disallowed` lists what must hold, so violating pairs are disallowed.
    pub fn from_formulas(
        space: &StateSpace,
        poss: Option<&Formula>,
        disallowed: Option<&Formula>,
    ) -> Result<Self, LogicError> {
        let mut c = Self::permissive(space);
        if let Some(f) = poss {
            c.poss_changes = relation_of(f, space, Slice::Inputs, Slice::Inputs)?.pairs;
        }
        if let Some(f) = disallowed {
            for a in space.states(Slice::All) {
                for b in space.states(Slice::Inputs) {
                    if !eval_step(f, a, b)? {
                        c.disallowed.insert((a, b));
                    }
                }
            }
        }
        Ok(c)
    }
}

/// Add every (pre, post) pair of failed transitions to the disallowed set.
pub fn add_disallowed(c: &RepairConstraints, failures: &[(State, BTreeSet<State>)]) -> RepairConstraints {
    let mut out = c.clone();
    for (pre, posts) in failures {
        for p in posts {
            out.disallowed.insert((*pre, *p));
        }
    }
    out
}

/// Mutable and hard parts of both safety relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutablePartition {
    pub tau_env_mutable: Rel,
    pub tau_env_hard: Rel,
    pub tau_sys_mutable: Rel,
    pub tau_sys_hard: Rel,
}

impl MutablePartition {
    pub fn from_spec(spec: &Gr1Spec, space: &StateSpace) -> Result<Self, LogicError> {
        let rel = |v: &[Formula], cod| -> Result<Rel, LogicError> {
            Ok(relation_of(&Formula::and(v.to_vec()), space, Slice::All, cod)?.pairs)
        };
        Ok(MutablePartition {
            tau_env_mutable: rel(&spec.env_safety_mutable, Slice::Inputs)?,
            tau_env_hard: rel(&spec.env_safety_hard, Slice::Inputs)?,
            tau_sys_mutable: rel(&spec.sys_safety_mutable, Slice::All)?,
            tau_sys_hard: rel(&spec.sys_safety_hard, Slice::All)?,
        })
    }

    pub fn tau_env(&self) -> Rel {
        self.tau_env_mutable.intersection(&self.tau_env_hard).copied().collect()
    }

    pub fn tau_sys(&self) -> Rel {
        self.tau_sys_mutable.intersection(&self.tau_sys_hard).copied().collect()
    }
}

/// Relations a repair step reads and rewrites. `tau_env` is the effective
/// environment relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relations {
    pub tau_env: Rel,
    pub tau_env_hard: Rel,
    pub tau_sys_mutable: Rel,
    pub tau_sys_hard: Rel,
}

impl Relations {
    pub fn from_partition(p: &MutablePartition) -> Self {
        Relations {
            tau_env: p.tau_env(),
            tau_env_hard: p.tau_env_hard.clone(),
            tau_sys_mutable: p.tau_sys_mutable.clone(),
            tau_sys_hard: p.tau_sys_hard.clone(),
        }
    }

    /// The game these relations describe.
    pub fn game(&self, base: &GameStructure) -> GameStructure {
        let mut g = base.clone();
        g.tau_env.pairs = self.tau_env.clone();
        g.tau_sys.pairs = self.tau_sys_mutable.intersection(&self.tau_sys_hard).copied().collect();
        g
    }
}

/// Masks and enumerations shared by the repair steps.
struct Ctx<'a> {
    space: &'a StateSpace,
    imask: u32,
    omask: u32,
    umask: u32,
}

impl<'a> Ctx<'a> {
    fn new(space: &'a StateSpace) -> Self {
        let v = &space.vocab;
        Ctx { space, imask: v.input_mask(), omask: v.output_mask(), umask: v.user_mask() }
    }

    fn i(&self, s: State) -> State {
        s.restrict(self.imask)
    }

    fn o(&self, s: State) -> State {
        s.restrict(self.omask)
    }

    fn outputs(&self) -> Vec<State> {
        let n = self.space.vocab.outputs().len();
        let off = self.space.vocab.len() - n;
        (0u32..1 << n).map(|k| State(k << off)).collect()
    }

    /// States entered by some system move the environment also allows.
    fn reached(&self, r: &Relations) -> BTreeSet<State> {
        r.tau_sys_mutable
            .iter()
            .filter(|&&(a, b)| r.tau_env.contains(&(a, self.i(b))))
            .map(|&(_, b)| b)
            .collect()
    }

    fn reachable(&self, r: &Relations) -> Rel {
        let reached = self.reached(r);
        r.tau_env.iter().filter(|(a, _)| reached.contains(a)).copied().collect()
    }

    /// Every copy of a tuple under each user-proposition assignment of σ1 and σ2.
    /// The replacement σI3 follows σ2 when `post`, σ1 otherwise.
    fn user_closure(&self, t: (State, State, State), post: bool) -> Vec<(State, State, State)> {
        if self.umask == 0 {
            return vec![t];
        }
        let clear = !self.umask;
        let set = |s: State, u: u32| State((s.0 & clear) | u);
        let all = self.user_assignments();
        let mut out = Vec::new();
        for &u1 in &all {
            for &u2 in &all {
                out.push((set(t.0, u1), set(t.1, u2), set(t.2, if post { u2 } else { u1 })));
            }
        }
        out
    }

    fn user_assignments(&self) -> Vec<u32> {
        let mut out = Vec::new();
        let mut u = 0u32;
        loop {
            out.push(u);
            u = (u.wrapping_sub(self.umask)) & self.umask;
            if u == 0 {
                break;
            }
        }
        out
    }
}

fn by_source(r: &Rel) -> BTreeMap<State, Vec<State>> {
    let mut m: BTreeMap<State, Vec<State>> = BTreeMap::new();
    for &(a, b) in r {
        m.entry(a).or_default().push(b);
    }
    m
}

/// Reachable transitions from states the system can always steer into `z`,
/// landing in `z`.
pub fn always_win_and_reachable(space: &StateSpace, r: &Relations, z: &BTreeSet<State>) -> Rel {
    let c = Ctx::new(space);
    let sys = by_source(&r.tau_sys_mutable);
    let env = by_source(&r.tau_env);
    let can_win = |a: State, e: State| {
        sys.get(&a).into_iter().flatten().any(|&b| c.i(b) == e && z.contains(&b))
    };
    let always = |a: State| {
        c.o(a).0 != 0 && env.get(&a).into_iter().flatten().all(|&e| can_win(a, e))
    };
    let reachable = c.reachable(r);
    let mut out = Rel::new();
    for &(a, b) in &r.tau_sys_mutable {
        if z.contains(&b) && reachable.contains(&(a, c.i(b))) && always(a) {
            out.insert((a, b));
        }
    }
    out
}

/// Tuples (σ1, σ2, σI3): the transition σ1 → σ2 may also be taken from the
/// new precondition σI3 with σ1's outputs.
pub fn allowable_precondition_changes(
    space: &StateSpace,
    r: &Relations,
    z: &BTreeSet<State>,
    cons: &RepairConstraints,
) -> BTreeSet<(State, State, State)> {
    let c = Ctx::new(space);
    let awr = always_win_and_reachable(space, r, z);
    let reachable = c.reachable(r);
    let changing: BTreeSet<State> = awr.iter().map(|&(a, _)| c.o(a)).collect();
    let pre_skills: BTreeSet<State> =
        reachable.iter().map(|&(a, _)| a).filter(|a| changing.contains(&c.o(*a))).collect();
    // (outputs, inputs) pairs entered under a skill and never left under it
    let sources: BTreeSet<State> = reachable.iter().map(|&(a, _)| a).collect();
    let final_post: BTreeSet<State> = reachable
        .iter()
        .map(|&(a, e)| e.union(c.o(a)))
        .filter(|s| !sources.contains(s))
        .collect();
    // moving σ1 also moves the edges that lead into it
    let leads_in = |a: State| r.tau_sys_mutable.iter().filter(move |(_, b)| *b == a).map(|&(p, _)| p);
    let mut out = BTreeSet::new();
    for &(a, b) in &awr {
        let (ia, oa, ib) = (c.i(a), c.o(a), c.i(b));
        for &(p, n) in cons.poss_changes.range((ia, State(0))..) {
            if p != ia {
                break;
            }
            let moved = n.union(oa);
            if !space.admits(moved)
                || n == ib
                || cons.disallowed.contains(&(moved, ib))
                || leads_in(a).any(|pp| cons.disallowed.contains(&(pp, n)))
                || pre_skills.contains(&moved)
                || !r.tau_sys_hard.contains(&(moved, b))
                || awr.contains(&(moved, b))
                || final_post.contains(&moved)
            {
                continue;
            }
            out.insert((a, b, n));
        }
    }
    out
}

/// What one repair step did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub relations: Relations,
    /// Selected (σ1, σ2, σI3) tuples after grouping and user closure; empty
    /// when nothing was allowable.
    pub selected: Vec<(State, State, State)>,
    /// System transitions added.
    pub added_sys: Rel,
    /// Environment transitions added and removed.
    pub added_env: Rel,
    pub removed_env: Rel,
}

impl StepOutcome {
    fn unchanged(r: &Relations) -> Self {
        StepOutcome {
            relations: r.clone(),
            selected: Vec::new(),
            added_sys: Rel::new(),
            added_env: Rel::new(),
            removed_env: Rel::new(),
        }
    }

    pub fn changed(&self) -> bool {
        !self.selected.is_empty()
    }
}

fn pick<T: Copy>(v: &BTreeSet<T>, rng: &mut ChaCha8Rng) -> T {
    *v.iter().nth(rng.gen_range(0..v.len())).unwrap()
}

/// Let a winning skill start from a new precondition.
pub fn modify_preconditions(
    space: &StateSpace,
    r: &Relations,
    z: &BTreeSet<State>,
    cons: &RepairConstraints,
    rng: &mut ChaCha8Rng,
) -> StepOutcome {
    let c = Ctx::new(space);
    let allowable = allowable_precondition_changes(space, r, z, cons);
    if allowable.is_empty() {
        return StepOutcome::unchanged(r);
    }
    let (a0, b0, n0) = pick(&allowable, rng);
    // every mutable move from σ1 into the same next inputs
    let mut grouped = Vec::new();
    for &(a, b) in r.tau_sys_mutable.range((a0, State(0))..) {
        if a != a0 {
            break;
        }
        if c.i(b) == c.i(b0) {
            grouped.push((a, b, n0));
        }
    }
    let selected: Vec<(State, State, State)> = grouped
        .into_iter()
        .flat_map(|t| c.user_closure(t, false))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let new_skill: Rel = selected.iter().map(|&(a, b, n)| (n.union(c.o(a)), b)).collect();
    let old_skill: Rel = selected.iter().map(|&(a, b, _)| (a, b)).collect();
    let old_sources: BTreeSet<State> = old_skill.iter().map(|&(a, _)| a).collect();
    let new_sources: BTreeSet<State> = new_skill.iter().map(|&(a, _)| a).collect();

    let old_pre_pre: BTreeSet<State> =
        r.tau_sys_mutable.iter().filter(|(_, b)| old_sources.contains(b)).map(|&(a, _)| a).collect();
    let mut new_pre_pre: Rel = old_pre_pre
        .iter()
        .flat_map(|&a| new_sources.iter().map(move |&n| (a, n)))
        .collect();

    let outs = c.outputs();
    let initial = new_pre_pre
        .iter()
        .all(|&(a, b)| outs.iter().all(|&o| new_pre_pre.contains(&(c.i(a).union(o), b))));
    if initial {
        let only_inputs: BTreeSet<State> = new_pre_pre.iter().map(|&(_, b)| c.i(b)).collect();
        let from_any = |ia: State, b: State| {
            outs.iter().all(|&o| r.tau_sys_mutable.contains(&(ia.union(o), b)))
        };
        let remove: BTreeSet<(State, State)> = r
            .tau_sys_mutable
            .iter()
            .filter(|&&(a, b)| only_inputs.contains(&c.i(b)) && !from_any(c.i(a), b))
            .map(|&(a, b)| (a, c.i(b)))
            .collect();
        new_pre_pre.retain(|&(a, b)| !remove.contains(&(a, c.i(b))));
    }

    let mut tau_sys_mutable = r.tau_sys_mutable.clone();
    let mut added_sys = Rel::new();
    for &t in new_pre_pre.iter().chain(&new_skill) {
        if tau_sys_mutable.insert(t) {
            added_sys.insert(t);
        }
    }

    let reachable = c.reachable(r);
    let old_pre_new: BTreeSet<State> = reachable
        .iter()
        .filter(|&&(a, e)| old_sources.contains(&e.union(c.o(a))))
        .map(|&(a, _)| a)
        .collect();
    let mut env_add = Rel::new();
    for &a in &old_pre_new {
        for &n in &new_sources {
            if c.o(n) == c.o(a) {
                env_add.insert((a, c.i(n)));
            }
        }
    }
    for &(a, b) in &new_skill {
        env_add.insert((a, c.i(b)));
    }
    let mut tau_env: Rel = r.tau_env.iter().filter(|(a, _)| !new_sources.contains(a)).copied().collect();
    tau_env.extend(env_add.iter().copied());
    tau_env.retain(|t| r.tau_env_hard.contains(t));
    let added_env = tau_env.difference(&r.tau_env).copied().collect();
    let removed_env = r.tau_env.difference(&tau_env).copied().collect();

    StepOutcome {
        relations: Relations { tau_env, tau_sys_mutable, ..r.clone() },
        selected,
        added_sys,
        added_env,
        removed_env,
    }
}

/// Reachable skill transitions that neither start nor end in `z`. A move
/// counts as part of a skill when the skill keeps running or stops at a
/// state it never leaves.
pub fn not_winning(space: &StateSpace, r: &Relations, z: &BTreeSet<State>) -> Rel {
    let c = Ctx::new(space);
    let reachable = c.reachable(r);
    let sources: BTreeSet<State> = reachable.iter().map(|&(a, _)| a).collect();
    r.tau_sys_mutable
        .iter()
        .filter(|&&(a, b)| {
            let part = c.o(a) == c.o(b) || !sources.contains(&c.i(b).union(c.o(a)));
            c.o(a).0 != 0
                && part
                && reachable.contains(&(a, c.i(b)))
                && !z.contains(&a)
                && !z.contains(&b)
        })
        .copied()
        .collect()
}

/// Tuples (σ1, σ2, σI3): redirect the outcome σI2 of σ1 to σI3.
pub fn allowable_postcondition_changes(
    space: &StateSpace,
    r: &Relations,
    z: &BTreeSet<State>,
    cons: &RepairConstraints,
) -> BTreeSet<(State, State, State)> {
    let c = Ctx::new(space);
    let reachable = c.reachable(r);
    let cur_pres: BTreeSet<State> = reachable.iter().map(|&(a, _)| a).collect();
    let mut out = BTreeSet::new();
    for (a, b) in not_winning(space, r, z) {
        let (ia, oa, ib, ob) = (c.i(a), c.o(a), c.i(b), c.o(b));
        for &(p, n) in cons.poss_changes.range((ib, State(0))..) {
            if p != ib {
                break;
            }
            if n == ia
                || n == ib
                || cons.disallowed.contains(&(a, n))
                || !z.contains(&n.union(ob))
                || !r.tau_sys_mutable.contains(&(a, n.union(ob)))
                || (cur_pres.contains(&n.union(oa)) && !reachable.contains(&(a, n)))
            {
                continue;
            }
            out.insert((a, b, n));
        }
    }
    out
}

/// Redirect one non-winning skill outcome into the winning set.
pub fn modify_postconditions(
    space: &StateSpace,
    r: &Relations,
    z: &BTreeSet<State>,
    cons: &RepairConstraints,
    rng: &mut ChaCha8Rng,
) -> StepOutcome {
    let c = Ctx::new(space);
    let allowable = allowable_postcondition_changes(space, r, z, cons);
    if allowable.is_empty() {
        return StepOutcome::unchanged(r);
    }
    let selected: Vec<(State, State, State)> = c
        .user_closure(pick(&allowable, rng), true)
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let add: Rel = selected.iter().map(|&(a, _, n)| (a, n)).collect();
    let old: Rel = selected.iter().map(|&(a, b, _)| (a, c.i(b))).collect();
    let mut tau_env: Rel = r.tau_env.difference(&old).copied().collect();
    tau_env.extend(add.iter().copied());
    let added_env = tau_env.difference(&r.tau_env).copied().collect();
    let removed_env = r.tau_env.difference(&tau_env).copied().collect();
    StepOutcome {
        relations: Relations { tau_env, ..r.clone() },
        selected,
        added_sys: Rel::new(),
        added_env,
        removed_env,
    }
}

/// Human-readable tuple `{σ1} -> {σ2} via {σI3}`.
pub fn show_change(v: &Vocabulary, t: (State, State, State)) -> String {
    format!("{} -> {} via {}", v.show(t.0), v.show(t.1), v.show(t.2))
}

/// A proposed replacement for one skill.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillSuggestion {
    pub base_skill: String,
    /// Same shape as a skill: initial, transitions, final.
    pub skill: Skill,
    /// Repair steps that led here.
    pub provenance: Vec<String>,
}

impl SkillSuggestion {
    /// World-state transitions of the suggestion in canonical order.
    pub fn chain(&self) -> Vec<(State, State)> {
        self.skill.post_map.iter().flat_map(|(&a, bs)| bs.iter().map(move |&b| (a, b))).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepairError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("suggestion for `{0}` is not a connected chain")]
    Disconnected(String),
    #[error("repair exhausted after {} attempts; {} disallowed transitions", log.len(), disallowed.len())]
    Exhausted { disallowed: Rel, log: Vec<Attempt> },
}

/// Skill transitions a strategy takes, grouped into per-skill chains, for
/// every skill whose behaviour changed against the original relations.
pub fn extract_suggestions(
    vocab: &Vocabulary,
    strategy: &Strategy,
    tau_env_orig: &Rel,
    tau_sys_mutable_orig: &Rel,
    skills: &[Skill],
) -> Result<Vec<SkillSuggestion>, RepairError> {
    let imask = vocab.input_mask();
    let wmask = vocab.world_mask();
    let w = |s: State| s.restrict(wmask);
    let moves = strategy.transitions();
    let mut out = Vec::new();
    for skill in skills {
        let Some(bit) = vocab.output_bit(&skill.activation) else { continue };
        let on = |s: State| s.0 & bit != 0;
        let added = moves.iter().any(|&(a, b)| {
            (on(a) || on(b))
                && (!tau_env_orig.contains(&(a, b.restrict(imask))) || !tau_sys_mutable_orig.contains(&(a, b)))
        });
        // outcomes the strategy no longer has to answer
        let removed = moves.iter().filter(|(a, _)| on(*a)).any(|&(a, _)| {
            tau_env_orig
                .range((a, State(0))..)
                .take_while(|(x, _)| *x == a)
                .any(|&(_, e)| !moves.iter().any(|&(x, b)| x == a && b.restrict(imask) == e))
        });
        let changed = added || removed;
        if !changed {
            continue;
        }
        let mut s = Skill::new(&skill.name, &skill.activation);
        for &i in &strategy.initial {
            if on(i) {
                s.pre_init.insert(w(i));
            }
        }
        for &(a, b) in &moves {
            match (on(a), on(b)) {
                (false, true) => {
                    s.pre_init.insert(w(b));
                }
                (true, false) => {
                    s.post_final.insert(w(b));
                }
                _ => {}
            }
            if on(a) && w(a) != w(b) {
                s.add_edge(w(a), w(b));
            }
        }
        if !s.is_connected() || s.pre_init.is_empty() || s.post_final.is_empty() {
            return Err(RepairError::Disconnected(skill.name.clone()));
        }
        if s.pre_init == skill.pre_init && s.post_final == skill.post_final && s.post_map == skill.post_map {
            continue;
        }
        out.push(SkillSuggestion { base_skill: skill.name.clone(), skill: s, provenance: Vec::new() });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    PreThenPost,
    PostThenPre,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairConfig {
    pub seed: u64,
    /// Outer iterations, each a pair of symbolic attempts and a feasibility check.
    pub max_iterations: usize,
    /// Repair steps per symbolic attempt.
    pub step_budget: usize,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig { seed: 0, max_iterations: 20, step_budget: 20 }
    }
}

/// One symbolic attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempt {
    pub iteration: usize,
    pub ordering: Ordering,
    pub steps: Vec<String>,
    pub realizable: bool,
}

#[derive(Debug, Clone)]
pub struct RepairResult {
    pub suggestions: Vec<SkillSuggestion>,
    pub game: GameStructure,
    pub relations: Relations,
    pub constraints: RepairConstraints,
    pub log: Vec<Attempt>,
}

/// Winning set targeted by the next step: the blocking goal's attractor.
fn target(g: &GameStructure) -> Result<Option<BTreeSet<State>>, GameError> {
    let w = compute_winning_states(g)?;
    if realizable_with(g, &w) {
        return Ok(None);
    }
    if g.space.vocab.user().is_empty() {
        return Ok(Some(w.blocking.map(|b| b.attractor).unwrap_or(w.states)));
    }
    // aim at goal states the user inputs cannot satisfy on their own
    let strict = GameStructure { sys_liveness: g.sys_liveness.iter().map(|f| user_universal(f, &g.space.vocab)).collect(), ..g.clone() };
    let ws = compute_winning_states(&strict)?;
    let blocking = ws.blocking.or(w.blocking);
    Ok(Some(blocking.map(|b| b.attractor).unwrap_or(w.states)))
}

/// `∀u. f`: the goal holds under every assignment of the user inputs.
fn user_universal(f: &Formula, vocab: &Vocabulary) -> Formula {
    let user = vocab.world().len()..vocab.world().len() + vocab.user().len();
    user.fold(f.clone(), |f, i| Formula::and(vec![f.assign(i, false), f.assign(i, true)]))
}

/// Alternate precondition and postcondition steps until realizable.
pub fn symbolic_attempt(
    base: &GameStructure,
    start: &Relations,
    cons: &RepairConstraints,
    ordering: Ordering,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Relations, Vec<String>, bool), GameError> {
    let space = &base.space;
    let mut rel = start.clone();
    let mut steps = Vec::new();
    let mut pre = ordering == Ordering::PreThenPost;
    let mut stalls = 0;
    for _ in 0..budget {
        let Some(z) = target(&rel.game(base))? else {
            return Ok((rel, steps, true));
        };
        let out = if pre {
            modify_preconditions(space, &rel, &z, cons, rng)
        } else {
            modify_postconditions(space, &rel, &z, cons, rng)
        };
        if out.changed() {
            let kind = if pre { "pre" } else { "post" };
            for &t in &out.selected {
                steps.push(format!("{kind}: {}", show_change(&space.vocab, t)));
            }
            rel = out.relations;
            stalls = 0;
        } else {
            stalls += 1;
            if stalls == 2 {
                return Ok((rel, steps, false));
            }
        }
        pre = !pre;
    }
    let done = target(&rel.game(base))?.is_none();
    Ok((rel, steps, done))
}

/// Physical feedback: failed (pre, successors) transitions of a suggestion set.
pub type Feasibility<'a> = dyn FnMut(&[SkillSuggestion]) -> Vec<(State, BTreeSet<State>)> + 'a;

/// Synthesize, repair on failure, and loop on physical feedback.
pub fn repair(
    spec: &Gr1Spec,
    space: &StateSpace,
    skills: &[Skill],
    constraints: &RepairConstraints,
    config: &RepairConfig,
    feasible: &mut Feasibility<'_>,
) -> Result<RepairResult, RepairError> {
    let base = build_game(spec, space)?;
    let partition = MutablePartition::from_spec(spec, space)?;
    let start = Relations::from_partition(&partition);
    let mut cons = constraints.clone();
    let mut log = Vec::new();
    if target(&base)?.is_none() {
        return Ok(RepairResult { suggestions: Vec::new(), game: base, relations: start, constraints: cons, log });
    }
    for iteration in 0..config.max_iterations {
        let mut found = None;
        for (k, ordering) in [Ordering::PreThenPost, Ordering::PostThenPre].into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream((iteration * 2 + k) as u64);
            let (rel, steps, ok) = symbolic_attempt(&base, &start, &cons, ordering, config.step_budget, &mut rng)?;
            log.push(Attempt { iteration, ordering, steps: steps.clone(), realizable: ok });
            if ok {
                found = Some((rel, steps));
                break;
            }
        }
        let Some((rel, steps)) = found else { continue };
        let game = rel.game(&base);
        let strategy = extract_strategy(&game)?;
        let mut suggestions =
            extract_suggestions(&space.vocab, &strategy, &start.tau_env, &start.tau_sys_mutable, skills)?;
        for s in &mut suggestions {
            s.provenance = steps.clone();
        }
        let failures = feasible(&suggestions);
        if failures.is_empty() {
            return Ok(RepairResult { suggestions, game, relations: rel, constraints: cons, log });
        }
        cons = add_disallowed(&cons, &failures);
    }
    Err(RepairError::Exhausted { disallowed: cons.disallowed, log })
}
