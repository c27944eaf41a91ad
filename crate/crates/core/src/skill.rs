//! Skills with intermediate states, groundings, and their GR(1) encoding.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::Gr1Spec;
use crate::logic::{state_formula, Formula, Slice, State, StateSpace, Vocabulary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkillError {
    #[error("point {0:?} lies outside the workspace")]
    OutOfWorkspace(Vec<f64>),
    #[error("trace {index}: {msg}")]
    BadTrace { index: usize, msg: String },
    #[error("grounding: {0}")]
    Grounding(String),
    #[error("skill `{skill}`: {msg}")]
    Invalid { skill: String, msg: String },
}

/// Continuous region a world proposition grounds to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    /// Closed-open box `[lo, hi)` per dimension.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Closed ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Region::Box { lo, hi } => p.iter().zip(lo.iter().zip(hi)).all(|(x, (l, h))| l <= x && x < h),
            Region::Ball { center, radius } => dist(p, center) <= *radius,
        }
    }

    /// Signed margin: positive inside, negative outside.
    pub fn margin(&self, p: &[f64]) -> f64 {
        match self {
            Region::Box { lo, hi } => {
                let mut m = f64::INFINITY;
                for d in 0..p.len() {
                    m = m.min(p[d] - lo[d]).min(hi[d] - p[d]);
                }
                m
            }
            Region::Ball { center, radius } => radius - dist(p, center),
        }
    }

    fn dims(&self) -> usize {
        match self {
            Region::Box { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    fn disjoint(&self, other: &Region) -> bool {
        match (self, other) {
            (Region::Box { lo: a0, hi: a1 }, Region::Box { lo: b0, hi: b1 }) => {
                (0..a0.len()).any(|d| a1[d] <= b0[d] || b1[d] <= a0[d])
            }
            (Region::Ball { center: c1, radius: r1 }, Region::Ball { center: c2, radius: r2 }) => {
                dist(c1, c2) > r1 + r2
            }
            (Region::Box { lo, hi }, Region::Ball { center, radius })
            | (Region::Ball { center, radius }, Region::Box { lo, hi }) => {
                let q: Vec<f64> = (0..lo.len()).map(|d| center[d].clamp(lo[d], hi[d])).collect();
                dist(&q, center) > *radius
            }
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Map from world propositions to regions, inside a box-shaped workspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub regions: BTreeMap<String, Region>,
}

impl Grounding {
    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn check(&self, vocab: &Vocabulary) -> Result<(), SkillError> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(SkillError::Grounding("workspace bounds disagree in dimension".into()));
        }
        for w in vocab.world() {
            match self.regions.get(w) {
                None => return Err(SkillError::Grounding(format!("no region for `{w}`"))),
                Some(r) if r.dims() != self.dims() => {
                    return Err(SkillError::Grounding(format!("region of `{w}` has wrong dimension")))
                }
                _ => {}
            }
        }
        if let Some(extra) = self.regions.keys().find(|k| !vocab.world().contains(k)) {
            return Err(SkillError::Grounding(format!("`{extra}` is not a world proposition")));
        }
        Ok(())
    }

    /// Region membership where a box touching the workspace's upper face
    /// keeps that face.
    pub fn contains(&self, r: &Region, p: &[f64]) -> bool {
        match r {
            Region::Box { lo, hi } => p
                .iter()
                .enumerate()
                .all(|(d, x)| lo[d] <= *x && (*x < hi[d] || (*x == hi[d] && hi[d] == self.upper[d]))),
            r => r.contains(p),
        }
    }

    pub fn in_workspace(&self, p: &[f64]) -> bool {
        p.len() == self.dims() && p.iter().zip(self.lower.iter().zip(&self.upper)).all(|(x, (l, u))| l <= x && x <= u)
    }

    /// Regions of the world propositions in vocabulary order.
    pub fn ordered<'a>(&'a self, vocab: &'a Vocabulary) -> Vec<&'a Region> {
        vocab.world().iter().map(|w| &self.regions[w]).collect()
    }

    /// Box of the cell `σ` when every positive proposition is a box: the
    /// intersection of its regions.
    pub fn cell_box(&self, vocab: &Vocabulary, s: State) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut lo = self.lower.clone();
        let mut hi = self.upper.clone();
        for (i, w) in vocab.world().iter().enumerate() {
            if !s.has(i) {
                continue;
            }
            match &self.regions[w] {
                Region::Box { lo: a, hi: b } => {
                    for d in 0..lo.len() {
                        lo[d] = lo[d].max(a[d]);
                        hi[d] = hi[d].min(b[d]);
                    }
                }
                Region::Ball { .. } => return None,
            }
        }
        (0..lo.len()).all(|d| lo[d] < hi[d]).then_some((lo, hi))
    }

    /// Whether two cells share a face or overlap, so a path can cross from one
    /// into the other without entering a third. Cells with ball regions count as
    /// adjacent.
    pub fn cells_adjacent(&self, vocab: &Vocabulary, a: State, b: State) -> bool {
        let (Some((la, ha)), Some((lb, hb))) = (self.cell_box(vocab, a), self.cell_box(vocab, b)) else {
            return true;
        };
        let mut touching = 0;
        for d in 0..la.len() {
            if la[d] > hb[d] || lb[d] > ha[d] {
                return false;
            }
            if la[d] == hb[d] || lb[d] == ha[d] {
                touching += 1;
            }
        }
        touching <= 1
    }
}

/// The symbolic state of a point.
pub fn abstract_point(p: &[f64], g: &Grounding, vocab: &Vocabulary) -> Result<State, SkillError> {
    if !g.in_workspace(p) {
        return Err(SkillError::OutOfWorkspace(p.to_vec()));
    }
    let mut bits = 0;
    for (i, r) in g.ordered(vocab).into_iter().enumerate() {
        if g.contains(r, p) {
            bits |= 1 << i;
        }
    }
    Ok(State(bits))
}

/// World states realised by some point of the workspace.
///
/// Boxes are covered exactly by probing every breakpoint and every midpoint
/// between breakpoints; balls add a regular grid.
pub fn admissible_world_states(g: &Grounding, vocab: &Vocabulary) -> Vec<State> {
    let dims = g.dims();
    let mut axes: Vec<Vec<f64>> = (0..dims).map(|d| vec![g.lower[d], g.upper[d]]).collect();
    let mut has_ball = false;
    for r in g.regions.values() {
        match r {
            Region::Box { lo, hi } => {
                for d in 0..dims {
                    axes[d].push(lo[d]);
                    axes[d].push(hi[d]);
                }
            }
            Region::Ball { center, radius } => {
                has_ball = true;
                for d in 0..dims {
                    axes[d].push(center[d] - radius);
                    axes[d].push(center[d] + radius);
                    axes[d].push(center[d]);
                }
            }
        }
    }
    for d in 0..dims {
        if has_ball {
            for k in 0..=64 {
                axes[d].push(g.lower[d] + (g.upper[d] - g.lower[d]) * k as f64 / 64.0);
            }
        }
        axes[d].retain(|x| *x >= g.lower[d] && *x <= g.upper[d]);
        axes[d].sort_by(|a, b| a.partial_cmp(b).unwrap());
        axes[d].dedup();
        let mids: Vec<f64> = axes[d].windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        axes[d].extend(mids);
    }
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; dims];
    let mut p = vec![0.0; dims];
    loop {
        for d in 0..dims {
            p[d] = axes[d][idx[d]];
        }
        if let Ok(s) = abstract_point(&p, g, vocab) {
            out.insert(s);
        }
        let mut d = 0;
        while d < dims {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }
    out.into_iter().collect()
}

/// State space restricted to the world states a grounding can realise.
pub fn grounded_space(vocab: &Vocabulary, g: &Grounding) -> StateSpace {
    StateSpace::with_world(vocab.clone(), admissible_world_states(g, vocab))
}

/// A skill with its intermediate structure; states range over world inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skill {
    pub name: String,
    pub activation: String,
    pub pre_init: BTreeSet<State>,
    pub post_final: BTreeSet<State>,
    pub post_map: BTreeMap<State, BTreeSet<State>>,
    /// Number of observed executions per edge, when learned.
    pub edge_counts: BTreeMap<(State, State), usize>,
}

impl Skill {
    pub fn new(name: &str, activation: &str) -> Self {
        Skill {
            name: name.into(),
            activation: activation.into(),
            pre_init: BTreeSet::new(),
            post_final: BTreeSet::new(),
            post_map: BTreeMap::new(),
            edge_counts: BTreeMap::new(),
        }
    }

    /// A skill whose post map is a single chain of states.
    pub fn chain(name: &str, activation: &str, chain: &[State]) -> Self {
        let mut s = Skill::new(name, activation);
        s.pre_init.insert(chain[0]);
        s.post_final.insert(*chain.last().unwrap());
        for w in chain.windows(2) {
            s.add_edge(w[0], w[1]);
        }
        s
    }

    pub fn add_edge(&mut self, a: State, b: State) {
        self.post_map.entry(a).or_default().insert(b);
    }

    pub fn post(&self, s: State) -> BTreeSet<State> {
        self.post_map.get(&s).cloned().unwrap_or_default()
    }

    pub fn pre_map(&self) -> BTreeMap<State, BTreeSet<State>> {
        let mut m: BTreeMap<State, BTreeSet<State>> = BTreeMap::new();
        for (&a, bs) in &self.post_map {
            for &b in bs {
                m.entry(b).or_default().insert(a);
            }
        }
        m
    }

    pub fn unique(&self) -> BTreeSet<State> {
        let mut u: BTreeSet<State> = self.pre_init.union(&self.post_final).copied().collect();
        for (&a, bs) in &self.post_map {
            u.insert(a);
            u.extend(bs);
        }
        u
    }

    pub fn only_intermediate(&self) -> BTreeSet<State> {
        self.unique()
            .into_iter()
            .filter(|s| !self.pre_init.contains(s) && !self.post_final.contains(s))
            .collect()
    }

    /// (pre, post) pairs with `post` only intermediate.
    pub fn intermediate_triples(&self) -> Vec<(State, State)> {
        let pre = self.pre_map();
        let mut v = Vec::new();
        for post in self.only_intermediate() {
            for &p in pre.get(&post).into_iter().flatten() {
                v.push((p, post));
            }
        }
        v
    }

    fn reach(&self, from: State) -> BTreeSet<State> {
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        while let Some(s) = stack.pop() {
            for t in self.post(s) {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// Structural invariants of a skill.
    pub fn validate(&self) -> Result<(), SkillError> {
        let bad = |msg: String| Err(SkillError::Invalid { skill: self.name.clone(), msg });
        if self.pre_init.is_empty() || self.post_final.is_empty() {
            return bad("needs initial preconditions and final postconditions".into());
        }
        for f in &self.post_final {
            if !self.post(*f).is_empty() {
                return bad("a final postcondition has successors".into());
            }
        }
        for p in &self.pre_init {
            let r = self.reach(*p);
            if let Some(f) = self.post_final.iter().find(|f| !r.contains(f)) {
                return bad(format!("final state {f:?} unreachable from {p:?}"));
            }
        }
        Ok(())
    }

    /// Every state reachable from some initial and reaching some final state.
    pub fn is_connected(&self) -> bool {
        let mut fwd = BTreeSet::new();
        for p in &self.pre_init {
            fwd.extend(self.reach(*p));
        }
        self.unique().iter().all(|s| fwd.contains(s) && self.reach(*s).iter().any(|t| self.post_final.contains(t)))
    }
}

/// Points of one execution, start to termination.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub samples: Vec<Vec<f64>>,
}

/// Fill a skill's post map from executions; dwelling in a cell adds no edge.
pub fn learn_intermediate_structure(
    traces: &[ExecutionTrace],
    g: &Grounding,
    vocab: &Vocabulary,
    draft: &Skill,
) -> Result<Skill, SkillError> {
    let mut skill = draft.clone();
    for (index, t) in traces.iter().enumerate() {
        if t.samples.is_empty() {
            return Err(SkillError::BadTrace { index, msg: "empty trace".into() });
        }
        let mut cells = Vec::new();
        for p in &t.samples {
            let s = abstract_point(p, g, vocab).map_err(|e| SkillError::BadTrace { index, msg: e.to_string() })?;
            if cells.last() != Some(&s) {
                cells.push(s);
            }
        }
        if !draft.pre_init.contains(&cells[0]) {
            return Err(SkillError::BadTrace { index, msg: "does not start in an initial precondition".into() });
        }
        if !draft.post_final.contains(cells.last().unwrap()) {
            return Err(SkillError::BadTrace { index, msg: "does not end in a final postcondition".into() });
        }
        for w in cells.windows(2) {
            skill.add_edge(w[0], w[1]);
            *skill.edge_counts.entry((w[0], w[1])).or_default() += 1;
        }
    }
    Ok(skill)
}

fn act(vocab: &Vocabulary, skill: &Skill) -> Formula {
    Formula::Atom(vocab.index(&skill.activation).expect("activation declared"))
}

fn literals(f: Formula) -> Vec<Formula> {
    match f {
        Formula::And(v) => v,
        f => vec![f],
    }
}

/// Postcondition clauses: `G((π ∧ φσ) → X ∨ φpost)` per non-final state.
pub fn encode_skill_env(vocab: &Vocabulary, skill: &Skill) -> Vec<Formula> {
    let pi = act(vocab, skill);
    let mut out = Vec::new();
    for s in skill.unique() {
        if skill.post_final.contains(&s) {
            continue;
        }
        let mut lhs = vec![pi.clone()];
        lhs.extend(literals(state_formula(s, vocab, Slice::World)));
        let posts = skill.post(s).into_iter().map(|p| state_formula(p, vocab, Slice::World)).collect();
        out.push(Formula::always(Formula::implies(Formula::and(lhs), Formula::next(Formula::or(posts)))));
    }
    out
}

fn triple(vocab: &Vocabulary, pi: &Formula, pre: State, post: State) -> Formula {
    let mut v = literals(state_formula(pre, vocab, Slice::World));
    v.push(pi.clone());
    v.push(Formula::next(state_formula(post, vocab, Slice::World)));
    Formula::And(v)
}

/// Activation and continuation constraints of a set of skills.
#[derive(Debug, Clone, PartialEq)]
pub struct SysEncoding {
    /// One activation gate per skill.
    pub choose: Vec<Formula>,
    pub continue_: Vec<Formula>,
}

impl SysEncoding {
    pub fn all(&self) -> Vec<Formula> {
        self.choose.iter().chain(&self.continue_).cloned().collect()
    }
}

pub fn encode_skills_sys(vocab: &Vocabulary, skills: &[Skill]) -> SysEncoding {
    let mut choose = Vec::new();
    let mut cont = Vec::new();
    for skill in skills {
        let pi = act(vocab, skill);
        let mut allowed: Vec<Formula> = skill
            .pre_init
            .iter()
            .map(|&p| Formula::next(state_formula(p, vocab, Slice::World)))
            .collect();
        for (pre, post) in skill.intermediate_triples() {
            allowed.push(triple(vocab, &pi, pre, post));
            cont.push(Formula::always(Formula::implies(
                triple(vocab, &pi, pre, post),
                Formula::next(pi.clone()),
            )));
        }
        choose.push(Formula::always(Formula::implies(
            Formula::not(Formula::or(allowed)),
            Formula::not(Formula::next(pi)),
        )));
    }
    SysEncoding { choose, continue_: cont }
}

/// Hard safety: world mutexes and frame axiom for the environment, skill
/// mutexes for the system.
pub fn build_hard_constraints(vocab: &Vocabulary, g: &Grounding) -> (Vec<Formula>, Vec<Formula>) {
    let mut env = Vec::new();
    let regs = g.ordered(vocab);
    let nw = vocab.world().len();
    for i in 0..nw {
        for j in i + 1..nw {
            if regs[i].disjoint(regs[j]) {
                env.push(Formula::always(Formula::not(Formula::And(vec![Formula::Atom(i), Formula::Atom(j)]))));
            }
        }
    }
    let off = nw + vocab.user().len();
    let no = vocab.outputs().len();
    if nw > 0 {
        let idle = Formula::and((0..no).map(|k| Formula::not(Formula::Atom(off + k))).collect());
        let same = Formula::and(
            (0..nw).map(|i| Formula::iff(Formula::Atom(i), Formula::next(Formula::Atom(i)))).collect(),
        );
        env.push(Formula::always(Formula::implies(idle, same)));
    }
    let mut sys = Vec::new();
    for a in 0..no {
        for b in a + 1..no {
            let both = Formula::And(vec![Formula::Atom(off + a), Formula::Atom(off + b)]);
            sys.push(Formula::always(Formula::not(both.clone())));
            sys.push(Formula::always(Formula::not(Formula::next(both))));
        }
    }
    (env, sys)
}

/// User-authored parts of a task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Task {
    pub env_init: Vec<Formula>,
    pub sys_init: Vec<Formula>,
    pub env_safety: Vec<Formula>,
    pub sys_safety: Vec<Formula>,
    pub sys_liveness: Vec<Formula>,
}

/// Full specification: skill encodings on the mutable side, grounding and
/// user constraints on the hard side.
pub fn assemble_spec(vocab: &Vocabulary, g: &Grounding, skills: &[Skill], task: &Task) -> Gr1Spec {
    let (mut env_hard, mut sys_hard) = build_hard_constraints(vocab, g);
    env_hard.extend(task.env_safety.iter().cloned());
    sys_hard.extend(task.sys_safety.iter().cloned());
    Gr1Spec {
        env_init: task.env_init.clone(),
        sys_init: task.sys_init.clone(),
        env_safety_mutable: skills.iter().flat_map(|s| encode_skill_env(vocab, s)).collect(),
        env_safety_hard: env_hard,
        sys_safety_mutable: encode_skills_sys(vocab, skills).all(),
        sys_safety_hard: sys_hard,
        env_liveness: Vec::new(),
        sys_liveness: task.sys_liveness.clone(),
    }
}

/// The nine-squares grounding: `xi = [i, i+1)` along x, `yj = [j, j+1)` along y.
pub fn nine_squares() -> (Vocabulary, Grounding) {
    let vocab = Vocabulary::new(&["x0", "x1", "x2", "y0", "y1", "y2"], &[], &["pi_L2R", "pi_R2L"]).unwrap();
    let mut regions = BTreeMap::new();
    for i in 0..3 {
        let k = i as f64;
        regions.insert(format!("x{i}"), Region::Box { lo: vec![k, 0.0], hi: vec![k + 1.0, 3.0] });
        regions.insert(format!("y{i}"), Region::Box { lo: vec![0.0, k], hi: vec![3.0, k + 1.0] });
    }
    (vocab, Grounding { lower: vec![0.0, 0.0], upper: vec![3.0, 3.0], regions })
}

#[cfg(test)]
mod test {
    use super::*;

    #[test]
    fn abstraction_examples() {
        let (v, g) = nine_squares();
        assert_eq!(abstract_point(&[0.5, 0.5], &g, &v).unwrap(), v.state(&["x0", "y0"]).unwrap());
        assert_eq!(abstract_point(&[1.0, 0.0], &g, &v).unwrap(), v.state(&["x1", "y0"]).unwrap());
        assert!(abstract_point(&[3.5, 0.0], &g, &v).is_err());
    }

    #[test]
    fn overlapping_regions_both_hold() {
        let v = Vocabulary::new(&["B", "E"], &[], &["go"]).unwrap();
        let mut regions = BTreeMap::new();
        regions.insert("B".into(), Region::Box { lo: vec![0.0, 0.0], hi: vec![4.0, 2.0] });
        regions.insert("E".into(), Region::Box { lo: vec![1.0, 0.0], hi: vec![2.0, 1.0] });
        let g = Grounding { lower: vec![0.0, 0.0], upper: vec![4.0, 4.0], regions };
        assert_eq!(abstract_point(&[1.5, 0.5], &g, &v).unwrap(), v.state(&["B", "E"]).unwrap());
        let (env, sys) = build_hard_constraints(&v, &g);
        assert_eq!(env.len(), 1, "only the frame axiom");
        assert!(sys.is_empty());
    }

    #[test]
    fn nine_squares_admits_nine_cells() {
        let (v, g) = nine_squares();
        let cells = admissible_world_states(&g, &v);
        assert_eq!(cells.len(), 9);
        assert!(cells.iter().all(|s| s.0.count_ones() == 2));
    }

    #[test]
    fn hard_mutex_present() {
        let (v, g) = nine_squares();
        let (env, _) = build_hard_constraints(&v, &g);
        let texts: Vec<String> = env.iter().map(|f| f.to_text(&v)).collect();
        assert!(texts.contains(&"G(!(x0 & x1))".to_string()));
        assert!(!texts.contains(&"G(!(x0 & y0))".to_string()));
    }

    #[test]
    fn degenerate_trace_rejected() {
        let (v, g) = nine_squares();
        let c = |n: &[&str]| v.state(n).unwrap();
        let mut draft = Skill::new("L2R", "pi_L2R");
        draft.pre_init.insert(c(&["x0", "y0"]));
        draft.post_final.insert(c(&["x2", "y2"]));
        let t = ExecutionTrace { samples: vec![vec![0.5, 0.5], vec![0.6, 0.5]] };
        let e = learn_intermediate_structure(&[t], &g, &v, &draft).unwrap_err();
        assert!(matches!(e, SkillError::BadTrace { index: 0, .. }));
    }

    #[test]
    fn no_intermediates_gates_on_precondition_only() {
        let (v, _) = nine_squares();
        let a = v.state(&["x0", "y0"]).unwrap();
        let b = v.state(&["x1", "y0"]).unwrap();
        let s = Skill::chain("S", "pi_L2R", &[a, b]);
        let enc = encode_skills_sys(&v, &[s]);
        assert!(enc.continue_.is_empty());
        assert_eq!(enc.choose[0].to_text(&v), "G(!X(x0 & y0 & !x1 & !x2 & !y1 & !y2) -> !X(pi_L2R))");
    }
}
