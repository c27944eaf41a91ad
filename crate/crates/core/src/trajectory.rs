//! Trajectory constraints from suggestions, monitors, re-optimisation and
//! feasibility checks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dmp::{DmpSkillController, Point};
use crate::logic::{state_formula, Formula, Slice, State, Vocabulary};
use crate::skill::{abstract_point, Grounding, Region, Skill, SkillError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error("no point found in the grounding of {0}")]
    SamplerExhausted(String),
    #[error("loss became non-finite at epoch {epoch}: {loss}")]
    NonFinite { epoch: usize, loss: f64 },
}

/// Stay in the unique states and move only along the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryConstraint {
    /// Precondition and the states allowed next, the precondition included.
    pub implications: Vec<(State, BTreeSet<State>)>,
    pub unique: BTreeSet<State>,
}

pub fn suggestion_to_constraint(skill: &Skill) -> TrajectoryConstraint {
    let implications = skill
        .unique()
        .into_iter()
        .filter(|s| !skill.post_final.contains(s))
        .map(|s| {
            let mut next = skill.post(s);
            next.insert(s);
            (s, next)
        })
        .collect();
    TrajectoryConstraint { implications, unique: skill.unique() }
}

impl TrajectoryConstraint {
    pub fn successors(&self, pre: State) -> Option<&BTreeSet<State>> {
        self.implications.iter().find(|(p, _)| *p == pre).map(|(_, n)| n)
    }

    /// The constraint as formulas: one implication per precondition, then
    /// the unique-state disjunction.
    pub fn to_formulas(&self, vocab: &Vocabulary) -> Vec<Formula> {
        let phi = |s: State| state_formula(s, vocab, Slice::World);
        let mut out = Vec::new();
        for (pre, next) in &self.implications {
            let mut alts = vec![phi(*pre)];
            alts.extend(next.iter().filter(|s| *s != pre).map(|&s| phi(s)));
            out.push(Formula::always(Formula::implies(phi(*pre), Formula::next(Formula::or(alts)))));
        }
        out.push(Formula::always(Formula::or(self.unique.iter().map(|&s| phi(s)).collect())));
        out
    }
}

/// Pointwise abstraction; dwell steps are kept.
pub fn abstract_trajectory(t: &[Point], g: &Grounding, vocab: &Vocabulary) -> Result<Vec<State>, SkillError> {
    t.iter().map(|p| abstract_point(p, g, vocab)).collect()
}

/// Monitor results for one symbol trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorReport {
    /// Per precondition: whether every step leaving it was allowed.
    pub per_transition: BTreeMap<State, bool>,
    /// Per precondition: whether the trace visited it before its last step.
    pub visited: BTreeMap<State, bool>,
    pub unique_ok: bool,
}

impl MonitorReport {
    pub fn all_pass(&self) -> bool {
        self.unique_ok && self.per_transition.values().all(|&b| b)
    }
}

pub fn monitor_trace(trace: &[State], c: &TrajectoryConstraint) -> MonitorReport {
    let mut per_transition = BTreeMap::new();
    let mut visited = BTreeMap::new();
    for (pre, next) in &c.implications {
        let mut ok = true;
        let mut seen = false;
        for w in trace.windows(2) {
            if w[0] == *pre {
                seen = true;
                ok &= next.contains(&w[1]);
            }
        }
        per_transition.insert(*pre, ok);
        visited.insert(*pre, seen);
    }
    let unique_ok = trace.iter().all(|s| c.unique.contains(s));
    MonitorReport { per_transition, visited, unique_ok }
}

/// Pluggable physical check on rollouts.
pub trait KinematicChecker {
    fn name(&self) -> &str;
    fn point_ok(&self, p: &[f64]) -> bool;
    fn check(&self, t: &[Point]) -> bool {
        t.iter().all(|p| self.point_ok(p))
    }
}

/// Follows any trajectory.
#[derive(Debug, Clone, Copy, Default)]
pub struct Holonomic;

impl KinematicChecker for Holonomic {
    fn name(&self) -> &str {
        "holonomic"
    }
    fn point_ok(&self, _: &[f64]) -> bool {
        true
    }
}

/// Rejects waypoints outside a reachable region, or inside any excluded box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachableBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub excluded: Vec<Region>,
}

impl KinematicChecker for ReachableBox {
    fn name(&self) -> &str {
        "reachable-box"
    }
    fn point_ok(&self, p: &[f64]) -> bool {
        let inside = p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| l <= x && x <= h);
        inside && !self.excluded.iter().any(|r| r.contains(p))
    }
}

/// Draws (start, goal) pairs inside the groundings of endpoint states.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointSampler {
    pub starts: Vec<State>,
    pub goals: Vec<State>,
    /// Fraction of each cell's width kept clear at its borders.
    pub inset: f64,
}

impl EndpointSampler {
    pub fn for_skill(skill: &Skill) -> Self {
        EndpointSampler {
            starts: skill.pre_init.iter().copied().collect(),
            goals: skill.post_final.iter().copied().collect(),
            inset: 0.15,
        }
    }

    pub fn sample(
        &self,
        g: &Grounding,
        vocab: &Vocabulary,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Point, Point), TrajectoryError> {
        let pick = |v: &[State], rng: &mut ChaCha8Rng| -> Result<State, TrajectoryError> {
            if v.is_empty() {
                return Err(TrajectoryError::SamplerExhausted("an empty state list".into()));
            }
            Ok(v[rng.gen_range(0..v.len())])
        };
        let a = pick(&self.starts, rng)?;
        let b = pick(&self.goals, rng)?;
        Ok((sample_in_cell(a, g, vocab, self.inset, rng)?, sample_in_cell(b, g, vocab, self.inset, rng)?))
    }
}

/// Uniform point whose abstraction is `s`.
pub fn sample_in_cell(
    s: State,
    g: &Grounding,
    vocab: &Vocabulary,
    inset: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Point, TrajectoryError> {
    let (lo, hi) = g.cell_box(vocab, s).unwrap_or((g.lower.clone(), g.upper.clone()));
    for _ in 0..10_000 {
        let p: Point = (0..lo.len())
            .map(|d| {
                let pad = inset * (hi[d] - lo[d]);
                let (a, b) = (lo[d] + pad, hi[d] - pad);
                if a < b {
                    rng.gen_range(a..b)
                } else {
                    0.5 * (lo[d] + hi[d])
                }
            })
            .collect();
        if abstract_point(&p, g, vocab).ok() == Some(s) {
            return Ok(p);
        }
    }
    Err(TrajectoryError::SamplerExhausted(vocab.show(s)))
}

/// Value with gradient over a fixed set of coordinates.
#[derive(Debug, Clone)]
struct Dual {
    v: f64,
    g: Vec<f64>,
}

impl Dual {
    fn neg(mut self) -> Dual {
        self.v = -self.v;
        self.g.iter_mut().for_each(|x| *x = -*x);
        self
    }
}

/// Smooth maximum (`sign = 1`) or minimum (`sign = -1`) by log-sum-exp,
/// shifted so it never exceeds the true maximum nor the true minimum.
fn soft(xs: Vec<Dual>, beta: f64, sign: f64) -> Dual {
    let n = xs[0].g.len();
    let m = xs.iter().map(|x| sign * x.v).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (beta * (sign * x.v - m)).exp()).collect();
    let z: f64 = e.iter().sum();
    let mut v = sign * (m + z.ln() / beta);
    if sign > 0.0 {
        v -= (xs.len() as f64).ln() / beta;
    }
    let mut g = vec![0.0; n];
    for (x, w) in xs.iter().zip(&e) {
        for k in 0..n {
            g[k] += w / z * x.g[k];
        }
    }
    Dual { v, g }
}

/// Signed membership margin of a region at slot `slot` of a 2-point window.
fn region_margin(r: &Region, p: &[f64], slot: usize) -> Dual {
    let dims = p.len();
    let unit = |d: usize, s: f64| {
        let mut g = vec![0.0; 2 * dims];
        g[slot * dims + d] = s;
        g
    };
    match r {
        Region::Box { lo, hi } => {
            let mut terms = Vec::new();
            for d in 0..dims {
                terms.push(Dual { v: p[d] - lo[d], g: unit(d, 1.0) });
                terms.push(Dual { v: hi[d] - p[d], g: unit(d, -1.0) });
            }
            terms.into_iter().min_by(|a, b| a.v.total_cmp(&b.v)).expect("nonempty box")
        }
        Region::Ball { center, radius } => {
            let n = crate::dmp::dist(p, center).max(1e-12);
            let mut g = vec![0.0; 2 * dims];
            for d in 0..dims {
                g[slot * dims + d] = -(p[d] - center[d]) / n;
            }
            Dual { v: radius - n, g }
        }
    }
}

/// Margin of being in cell `s`, or of being outside it when `outside`,
/// given the region margins of one point.
fn cell_margin(s: State, regions: &[Dual], beta: f64, outside: bool) -> Dual {
    let sign = if outside { -1.0 } else { 1.0 };
    let terms = regions
        .iter()
        .enumerate()
        .map(|(i, m)| if s.has(i) == outside { m.clone().neg() } else { m.clone() })
        .collect();
    soft(terms, beta, -sign)
}

fn point_margins(p: &[f64], slot: usize, g: &Grounding, vocab: &Vocabulary) -> Vec<Dual> {
    g.ordered(vocab).into_iter().map(|r| region_margin(r, p, slot)).collect()
}

/// Smooth robustness of each step of a rollout; gradients over (p_t, p_{t+1}).
fn step_robustness(
    t: &[Point],
    c: &TrajectoryConstraint,
    g: &Grounding,
    vocab: &Vocabulary,
    beta: f64,
) -> Vec<Dual> {
    let here: Vec<_> = t.iter().map(|p| point_margins(p, 0, g, vocab)).collect();
    let next: Vec<_> = t.iter().skip(1).map(|p| point_margins(p, 1, g, vocab)).collect();
    let mut out = Vec::with_capacity(t.len());
    for i in 0..t.len() {
        let mut clauses =
            vec![soft(c.unique.iter().map(|&s| cell_margin(s, &here[i], beta, false)).collect(), beta, 1.0)];
        if let Some(nx) = next.get(i) {
            for (pre, succ) in &c.implications {
                let away = cell_margin(*pre, &here[i], beta, true);
                let go = soft(succ.iter().map(|&s| cell_margin(s, nx, beta, false)).collect(), beta, 1.0);
                clauses.push(soft(vec![away, go], beta, 1.0));
            }
        }
        out.push(soft(clauses, beta, -1.0));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairTrajectoryConfig {
    pub epochs: usize,
    /// Weight of the constraint loss against the proximity loss.
    pub w_ltl: f64,
    pub step_size: f64,
    pub clip: f64,
    pub beta: f64,
    /// Endpoint pairs per optimizer step.
    pub batch: usize,
    /// Endpoint pairs drawn once and swept every epoch.
    pub train_pairs: usize,
}

impl Default for RepairTrajectoryConfig {
    fn default() -> Self {
        RepairTrajectoryConfig { epochs: 100, w_ltl: 50.0, step_size: 1e-2, clip: 10.0, beta: 10.0, batch: 16, train_pairs: 128 }
    }
}

/// Robustness hinge and per-timestep proximity of one rollout, with the
/// gradient on its points.
fn rollout_loss(
    t: &[Point],
    base: &[Point],
    c: &TrajectoryConstraint,
    g: &Grounding,
    vocab: &Vocabulary,
    cfg: &RepairTrajectoryConfig,
) -> (f64, f64, Vec<Vec<f64>>) {
    let n = t.len() as f64;
    let dims = t[0].len();
    let mut grad = vec![vec![0.0; dims]; t.len()];
    let steps = step_robustness(t, c, g, vocab, cfg.beta);
    let (worst, rho) = steps
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.v))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty rollout");
    let mut lc = 0.0;
    if rho < 0.0 {
        lc = -rho;
        let r = &steps[worst];
        for d in 0..dims {
            grad[worst][d] -= cfg.w_ltl * r.g[d];
            if worst + 1 < t.len() {
                grad[worst + 1][d] -= cfg.w_ltl * r.g[dims + d];
            }
        }
    }
    let mut lp = 0.0;
    for i in 0..t.len() {
        for d in 0..dims {
            let e = t[i][d] - base[i][d];
            lp += e * e / n;
            grad[i][d] += 2.0 * e / n;
        }
    }
    (lc, lp, grad)
}

/// Constraint loss of a controller on fixed endpoint pairs, for diagnostics.
pub fn constraint_loss(
    ctrl: &DmpSkillController,
    pairs: &[(Point, Point)],
    c: &TrajectoryConstraint,
    g: &Grounding,
    vocab: &Vocabulary,
    beta: f64,
) -> f64 {
    let r = ctrl.responses();
    let cfg = RepairTrajectoryConfig { beta, ..Default::default() };
    pairs
        .iter()
        .map(|(a, b)| {
            let t = ctrl.rollout_with(&r, a, b);
            rollout_loss(&t, &t, c, g, vocab, &cfg).0
        })
        .sum::<f64>()
        / pairs.len().max(1) as f64
}

/// Re-optimise basis weights toward the constraint while staying close to `base`.
pub fn repair_trajectory(
    base: &DmpSkillController,
    c: &TrajectoryConstraint,
    g: &Grounding,
    vocab: &Vocabulary,
    sampler: &EndpointSampler,
    cfg: &RepairTrajectoryConfig,
    rng: &mut ChaCha8Rng,
) -> Result<DmpSkillController, TrajectoryError> {
    let resp = base.responses();
    let mut ctrl = base.clone();
    let shape = (base.dims, base.n_basis);
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut m = vec![vec![0.0; shape.1]; shape.0];
    let mut v = m.clone();
    let pairs = (0..cfg.train_pairs.max(1))
        .map(|_| sampler.sample(g, vocab, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let bases: Vec<_> = pairs.iter().map(|(a, b)| base.rollout_with(&resp, a, b)).collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch.max(1)) {
            let mut grad = vec![vec![0.0; shape.1]; shape.0];
            let mut loss = 0.0;
            let w = 1.0 / chunk.len() as f64;
            for &j in chunk {
                let (a, b) = &pairs[j];
                let t = ctrl.rollout_with(&resp, a, b);
                let (lc, lp, dy) = rollout_loss(&t, &bases[j], c, g, vocab, cfg);
                loss += (cfg.w_ltl * lc + lp) * w;
                for d in 0..shape.0 {
                    let s = b[d] - a[d];
                    // the first sample is pinned to the start
                    for k in 0..shape.1 {
                        let mut acc = 0.0;
                        for i in 1..t.len() {
                            acc += resp.basis[(i, k)] * dy[i][d];
                        }
                        grad[d][k] += s * acc * w;
                    }
                }
            }
            if !loss.is_finite() {
                return Err(TrajectoryError::NonFinite { epoch, loss });
            }
            let norm = grad.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            let scale = if norm > cfg.clip { cfg.clip / norm } else { 1.0 };
            step += 1;
            for d in 0..shape.0 {
                for k in 0..shape.1 {
                    let gk = grad[d][k] * scale;
                    m[d][k] = b1 * m[d][k] + (1.0 - b1) * gk;
                    v[d][k] = b2 * v[d][k] + (1.0 - b2) * gk * gk;
                    let mh = m[d][k] / (1.0 - b1.powi(step));
                    let vh = v[d][k] / (1.0 - b2.powi(step));
                    ctrl.weights[d][k] -= cfg.step_size * mh / (vh.sqrt() + eps);
                }
            }
        }
    }
    Ok(ctrl)
}

/// Outcome of sampled rollouts against a constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityVerdict {
    pub pass_fraction: f64,
    /// Per precondition: successors, successes, attempts.
    pub per_transition: BTreeMap<State, (BTreeSet<State>, usize, usize)>,
    pub kinematic_ok: bool,
    pub accepted: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeasibilityConfig {
    pub samples: usize,
    pub threshold: f64,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        FeasibilityConfig { samples: 100, threshold: 0.9 }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn check_feasibility(
    ctrl: &DmpSkillController,
    c: &TrajectoryConstraint,
    g: &Grounding,
    vocab: &Vocabulary,
    sampler: &EndpointSampler,
    checker: &dyn KinematicChecker,
    cfg: &FeasibilityConfig,
    rng: &mut ChaCha8Rng,
) -> Result<FeasibilityVerdict, TrajectoryError> {
    let resp = ctrl.responses();
    let mut per: BTreeMap<State, (BTreeSet<State>, usize, usize)> = c
        .implications
        .iter()
        .map(|(p, n)| (*p, (n.iter().filter(|s| *s != p).copied().collect(), 0, 0)))
        .collect();
    let mut passed = 0;
    let mut kinematic_ok = true;
    for _ in 0..cfg.samples {
        let (a, b) = sampler.sample(g, vocab, rng)?;
        let t = ctrl.rollout_with(&resp, &a, &b);
        let Ok(trace) = abstract_trajectory(&t, g, vocab) else { continue };
        let report = monitor_trace(&trace, c);
        let ok = report.all_pass();
        for (pre, (_, succ, att)) in per.iter_mut() {
            if !report.visited[pre] {
                continue;
            }
            *att += 1;
            let steps_ok = (0..t.len() - 1)
                .filter(|&i| trace[i] == *pre)
                .all(|i| checker.point_ok(&t[i]) && checker.point_ok(&t[i + 1]));
            if report.per_transition[pre] && steps_ok {
                *succ += 1;
            }
        }
        if ok {
            passed += 1;
            kinematic_ok &= checker.check(&t);
        }
    }
    let pass_fraction = passed as f64 / cfg.samples.max(1) as f64;
    Ok(FeasibilityVerdict {
        pass_fraction,
        per_transition: per,
        kinematic_ok,
        accepted: pass_fraction >= cfg.threshold && kinematic_ok,
        samples: cfg.samples,
    })
}

/// Transitions whose success rate is below `threshold`, as (pre with the
/// skill active, successors) for every user-proposition assignment.
pub fn failing_transitions_to_constraints(
    v: &FeasibilityVerdict,
    vocab: &Vocabulary,
    activation: &str,
    threshold: f64,
) -> Vec<(State, BTreeSet<State>)> {
    let failed = v.per_transition.iter().filter(|(_, (succ, ok, att))| {
        *att > 0 && ((*ok as f64) / (*att as f64)) < threshold && !succ.is_empty()
    });
    lift_failures(vocab, activation, failed.map(|(pre, (succ, _, _))| (*pre, succ.clone())))
}

/// Transitions of the skills that jump between cells without a shared face, as
/// feedback constraints. Exact when the groundings tile the workspace.
pub fn continuity_failures(skills: &[Skill], g: &Grounding, vocab: &Vocabulary) -> Vec<(State, BTreeSet<State>)> {
    let mut out = Vec::new();
    for s in skills {
        let bad = s.post_map.iter().filter_map(|(&a, bs)| {
            let far: BTreeSet<State> = bs.iter().copied().filter(|&b| !g.cells_adjacent(vocab, a, b)).collect();
            (!far.is_empty()).then_some((a, far))
        });
        out.extend(lift_failures(vocab, &s.activation, bad));
    }
    out
}

/// Expand over every user assignment and set the activation bit on the precondition.
fn lift_failures(
    vocab: &Vocabulary,
    activation: &str,
    failed: impl Iterator<Item = (State, BTreeSet<State>)>,
) -> Vec<(State, BTreeSet<State>)> {
    let bit = vocab.output_bit(activation).unwrap_or(0);
    let umask = vocab.user_mask();
    let mut out = Vec::new();
    for (pre, succ) in failed {
        let mut u = 0u32;
        loop {
            let lift = |s: State| State(s.0 | u);
            out.push((State(lift(pre).0 | bit), succ.iter().map(|&s| lift(s)).collect()));
            u = u.wrapping_sub(umask) & umask;
            if u == 0 {
                break;
            }
        }
    }
    out
}
