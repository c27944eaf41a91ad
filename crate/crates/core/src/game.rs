//! GR(1) game structure, winning states and strategy extraction.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::logic::{
    eval_state, relation_of, Formula, LogicError, Slice, State, StateSpace, TransitionRelation,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("game is unrealizable")]
    Unrealizable,
    #[error("oracle bound exceeded: {0} states")]
    OracleCapacity(usize),
}

/// Six-part specification with mutable and hard safety partitions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gr1Spec {
    pub env_init: Vec<Formula>,
    pub sys_init: Vec<Formula>,
    pub env_safety_mutable: Vec<Formula>,
    pub env_safety_hard: Vec<Formula>,
    pub sys_safety_mutable: Vec<Formula>,
    pub sys_safety_hard: Vec<Formula>,
    /// Kept for completeness; treated as the constant-true assumption.
    pub env_liveness: Vec<Formula>,
    pub sys_liveness: Vec<Formula>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameStructure {
    pub space: StateSpace,
    pub theta_init: BTreeSet<State>,
    /// Pairs from a full state to next inputs.
    pub tau_env: TransitionRelation,
    /// Pairs from a full state to a full next state.
    pub tau_sys: TransitionRelation,
    pub env_liveness: Vec<Formula>,
    pub sys_liveness: Vec<Formula>,
}

/// Initial states of a spec over the admissible space.
pub fn init_states(space: &StateSpace, inits: &[&Formula]) -> Result<BTreeSet<State>, LogicError> {
    let mut out = BTreeSet::new();
    'outer: for s in space.states(Slice::All) {
        for f in inits {
            if !eval_state(f, s)? {
                continue 'outer;
            }
        }
        out.insert(s);
    }
    Ok(out)
}

pub fn build_game(spec: &Gr1Spec, space: &StateSpace) -> Result<GameStructure, GameError> {
    let inits: Vec<&Formula> = spec.env_init.iter().chain(&spec.sys_init).collect();
    let theta_init = init_states(space, &inits)?;
    let env = Formula::and(
        spec.env_safety_mutable.iter().chain(&spec.env_safety_hard).cloned().collect(),
    );
    let sys = Formula::and(
        spec.sys_safety_mutable.iter().chain(&spec.sys_safety_hard).cloned().collect(),
    );
    Ok(GameStructure {
        space: space.clone(),
        theta_init,
        tau_env: relation_of(&env, space, Slice::All, Slice::Inputs)?,
        tau_sys: relation_of(&sys, space, Slice::All, Slice::All)?,
        env_liveness: spec.env_liveness.clone(),
        sys_liveness: spec.sys_liveness.clone(),
    })
}

/// The goal whose attractor first excluded a required initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blocking {
    pub goal: usize,
    pub attractor: BTreeSet<State>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinningSet {
    /// Z.
    pub states: BTreeSet<State>,
    /// Attractor toward each goal computed in the first round, against all states.
    pub per_liveness: Vec<BTreeSet<State>>,
    pub blocking: Option<Blocking>,
}

/// Indexed view of a game used by the solvers.
pub(crate) struct Arena {
    pub states: Vec<State>,
    pub index: HashMap<State, usize>,
    /// Per state: env inputs with the system replies available for each.
    pub moves: Vec<Vec<(State, Vec<usize>)>>,
    pub goals: Vec<Vec<bool>>,
}

impl Arena {
    pub fn new(g: &GameStructure) -> Result<Self, GameError> {
        let states = g.space.states(Slice::All);
        let index: HashMap<State, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let imask = g.space.vocab.input_mask();
        let mut env: Vec<BTreeMap<State, Vec<usize>>> = vec![BTreeMap::new(); states.len()];
        for &(a, e) in &g.tau_env.pairs {
            if let Some(&i) = index.get(&a) {
                env[i].insert(e.restrict(imask), Vec::new());
            }
        }
        for &(a, b) in &g.tau_sys.pairs {
            let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) else { continue };
            if let Some(v) = env[i].get_mut(&b.restrict(imask)) {
                v.push(j);
            }
        }
        let moves = env
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|(e, mut v)| {
                        v.sort_unstable();
                        v.dedup();
                        (e, v)
                    })
                    .collect()
            })
            .collect();
        let liv: Vec<Formula> = if g.sys_liveness.is_empty() {
            vec![Formula::True]
        } else {
            g.sys_liveness.clone()
        };
        let mut goals = Vec::new();
        for f in &liv {
            let mut v = Vec::with_capacity(states.len());
            for &s in &states {
                v.push(eval_state(f, s)?);
            }
            goals.push(v);
        }
        Ok(Arena { states, index, moves, goals })
    }

    pub fn cpre(&self, i: usize, target: &[bool]) -> bool {
        self.moves[i].iter().all(|(_, reply)| reply.iter().any(|&j| target[j]))
    }

    /// Attractor layers toward `goal ∧ Cpre(z)`; rank 0 means outside.
    pub fn attractor(&self, goal: usize, z: &[bool]) -> Vec<u32> {
        let n = self.states.len();
        let mut rank = vec![0u32; n];
        let mut inside = vec![false; n];
        let mut r = 1;
        loop {
            let mut add = Vec::new();
            for i in 0..n {
                if !inside[i] && ((self.goals[goal][i] && self.cpre(i, z)) || self.cpre(i, &inside)) {
                    add.push(i);
                }
            }
            if add.is_empty() {
                break;
            }
            for i in add {
                inside[i] = true;
                rank[i] = r;
            }
            r += 1;
        }
        rank
    }

    fn to_set(&self, v: &[bool]) -> BTreeSet<State> {
        v.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| self.states[i]).collect()
    }
}

/// Input assignments of θ_init that need a winning completion.
fn required_inputs(g: &GameStructure) -> BTreeMap<State, Vec<State>> {
    let imask = g.space.vocab.input_mask();
    let mut m: BTreeMap<State, Vec<State>> = BTreeMap::new();
    for &s in &g.theta_init {
        m.entry(s.restrict(imask)).or_default().push(s);
    }
    m
}

fn covers_init(g: &GameStructure, set: &BTreeSet<State>) -> bool {
    required_inputs(g).values().all(|c| c.iter().any(|s| set.contains(s)))
}

pub fn compute_winning_states(g: &GameStructure) -> Result<WinningSet, GameError> {
    let a = Arena::new(g)?;
    let n = a.states.len();
    let mut z = vec![true; n];
    let mut per_liveness = Vec::new();
    let mut blocking = None;
    let mut first = true;
    loop {
        let mut next = vec![true; n];
        for j in 0..a.goals.len() {
            let rank = a.attractor(j, &z);
            let y: Vec<bool> = rank.iter().map(|&r| r > 0).collect();
            let ys = a.to_set(&y);
            let m = a.goals.len();
            // the cycle through the goals breaks when the previous goal cannot reach this one
            let breaks = first && m > 1 && !(0..n).any(|i| y[i] && a.goals[(j + m - 1) % m][i]);
            if blocking.is_none() && (breaks || !covers_init(g, &ys)) {
                blocking = Some(Blocking { goal: j, attractor: ys.clone() });
            }
            if first {
                per_liveness.push(ys);
            }
            for i in 0..n {
                next[i] &= y[i];
            }
        }
        first = false;
        if next == z {
            break;
        }
        z = next;
    }
    Ok(WinningSet { states: a.to_set(&z), per_liveness, blocking })
}

pub fn is_realizable(g: &GameStructure) -> Result<bool, GameError> {
    let w = compute_winning_states(g)?;
    Ok(realizable_with(g, &w))
}

pub fn realizable_with(g: &GameStructure, w: &WinningSet) -> bool {
    covers_init(g, &w.states)
}

/// Deterministic strategy with the active goal index as memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    /// Initial state chosen for each environment initial choice.
    pub initial: Vec<State>,
    /// (current state, next inputs, goal) to (next state, next goal).
    pub moves: BTreeMap<(State, State, usize), (State, usize)>,
}

impl Strategy {
    /// Every (current, next) transition the strategy can take.
    pub fn transitions(&self) -> BTreeSet<(State, State)> {
        self.moves.iter().map(|(&(s, _, _), &(t, _))| (s, t)).collect()
    }
}

pub fn extract_strategy(g: &GameStructure) -> Result<Strategy, GameError> {
    let w = compute_winning_states(g)?;
    if !realizable_with(g, &w) {
        return Err(GameError::Unrealizable);
    }
    let a = Arena::new(g)?;
    let z: Vec<bool> = a.states.iter().map(|s| w.states.contains(s)).collect();
    let ranks: Vec<Vec<u32>> = (0..a.goals.len()).map(|j| a.attractor(j, &z)).collect();
    let m = a.goals.len();
    let mut initial = Vec::new();
    for cands in required_inputs(g).values() {
        let s = *cands.iter().find(|s| w.states.contains(s)).expect("covered");
        initial.push(s);
    }
    let mut moves = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<(usize, usize)> = initial.iter().map(|s| (a.index[s], 0)).collect();
    while let Some((i, j)) = queue.pop_front() {
        if !seen.insert((i, j)) {
            continue;
        }
        let done = a.goals[j][i] && a.cpre(i, &z);
        for (e, reply) in &a.moves[i] {
            let (t, nj) = if done {
                (*reply.iter().find(|&&t| z[t]).expect("cpre"), (j + 1) % m)
            } else {
                let best = reply
                    .iter()
                    .filter(|&&t| ranks[j][t] > 0)
                    .min_by_key(|&&t| ranks[j][t])
                    .copied();
                match best {
                    Some(t) if ranks[j][t] < ranks[j][i] => (t, j),
                    _ => unreachable!("state outside its attractor"),
                }
            };
            moves.insert((a.states[i], *e, j), (a.states[t], nj));
            queue.push_back((t, nj));
        }
    }
    Ok(Strategy { initial, moves })
}

/// Winning states by explicit backward induction over the enumerated graph.
pub fn oracle_winning_states(g: &GameStructure) -> Result<WinningSet, GameError> {
    let states = g.space.states(Slice::All);
    if states.len() > 4096 {
        return Err(GameError::OracleCapacity(states.len()));
    }
    let n = states.len();
    let pos: BTreeMap<State, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let imask = g.space.vocab.input_mask();
    // env node i has choice nodes (i, e); choice node has sys edges to env nodes
    let mut choices: Vec<(usize, State)> = Vec::new();
    let mut choice_of: BTreeMap<(usize, State), usize> = BTreeMap::new();
    for &(a, e) in &g.tau_env.pairs {
        let i = pos[&a];
        let k = choices.len();
        choice_of.entry((i, e.restrict(imask))).or_insert_with(|| {
            choices.push((i, e.restrict(imask)));
            k
        });
    }
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); choices.len()];
    for &(a, b) in &g.tau_sys.pairs {
        if let Some(&c) = choice_of.get(&(pos[&a], b.restrict(imask))) {
            succ[c].push(pos[&b]);
        }
    }
    let mut env_children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, &(i, _)) in choices.iter().enumerate() {
        env_children[i].push(c);
    }
    let mut choice_preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, v) in succ.iter().enumerate() {
        for &t in v {
            choice_preds[t].push(c);
        }
    }
    let liv: Vec<Formula> =
        if g.sys_liveness.is_empty() { vec![Formula::True] } else { g.sys_liveness.clone() };
    let mut goal = vec![vec![false; n]; liv.len()];
    for (j, f) in liv.iter().enumerate() {
        for (i, &s) in states.iter().enumerate() {
            goal[j][i] = eval_state(f, s)?;
        }
    }

    // env node i wins into `target` if every choice has a successor in target
    let one_step = |i: usize, target: &[bool]| env_children[i].iter().all(|&c| succ[c].iter().any(|&t| target[t]));

    // least set closed under backward propagation from seeds
    let attract = |seed: Vec<bool>| -> Vec<bool> {
        let mut win = seed;
        let mut choice_win = vec![false; choices.len()];
        let mut missing: Vec<usize> = (0..n).map(|i| env_children[i].len()).collect();
        let mut work: Vec<usize> = (0..n).filter(|&i| win[i]).collect();
        for i in 0..n {
            if !win[i] && missing[i] == 0 {
                win[i] = true;
                work.push(i);
            }
        }
        while let Some(t) = work.pop() {
            for &c in &choice_preds[t] {
                if choice_win[c] {
                    continue;
                }
                choice_win[c] = true;
                let i = choices[c].0;
                missing[i] -= 1;
                if missing[i] == 0 && !win[i] {
                    win[i] = true;
                    work.push(i);
                }
            }
        }
        win
    };

    let mut z = vec![true; n];
    let mut per_liveness = Vec::new();
    let mut first = true;
    loop {
        let mut next = vec![true; n];
        for gj in &goal {
            let seed: Vec<bool> = (0..n).map(|i| gj[i] && one_step(i, &z)).collect();
            let y = attract(seed);
            if first {
                per_liveness.push(
                    y.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| states[i]).collect(),
                );
            }
            for i in 0..n {
                next[i] = next[i] && y[i];
            }
        }
        first = false;
        if next == z {
            break;
        }
        z = next;
    }
    let zs: BTreeSet<State> = z.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| states[i]).collect();
    Ok(WinningSet { states: zs, per_liveness, blocking: None })
}

#[cfg(test)]
mod test {
    use super::*;
    use crate::logic::{parse_formula, Vocabulary};

    fn tiny() -> (Vocabulary, StateSpace) {
        let v = Vocabulary::new(&["p"], &[], &["a"]).unwrap();
        (v.clone(), StateSpace::full(v))
    }

    #[test]
    fn full_relations_win_everywhere() {
        let (v, sp) = tiny();
        let spec = Gr1Spec { sys_liveness: vec![Formula::True], ..Default::default() };
        let g = build_game(&spec, &sp).unwrap();
        assert_eq!(g.tau_env.len(), 4 * 2);
        assert_eq!(g.tau_sys.len(), 16);
        let w = compute_winning_states(&g).unwrap();
        assert_eq!(w.states.len(), 4);
        let _ = v;
    }

    #[test]
    fn goal_true_initially() {
        let (v, sp) = tiny();
        let spec = Gr1Spec {
            sys_init: vec![parse_formula("p & !a", &v).unwrap()],
            env_safety_hard: vec![parse_formula("G(p -> X p)", &v).unwrap()],
            sys_safety_hard: vec![parse_formula("G(!a')", &v).unwrap()],
            sys_liveness: vec![parse_formula("p", &v).unwrap()],
            ..Default::default()
        };
        let g = build_game(&spec, &sp).unwrap();
        assert!(is_realizable(&g).unwrap());
        let s = extract_strategy(&g).unwrap();
        assert_eq!(s.moves.len(), 1);
        let (&(cur, e, j), &(nxt, nj)) = s.moves.iter().next().unwrap();
        assert_eq!((cur, e, j, nxt, nj), (State(1), State(1), 0, State(1), 0));
    }

    #[test]
    fn unreachable_goal_unrealizable() {
        let (v, sp) = tiny();
        let spec = Gr1Spec {
            sys_init: vec![parse_formula("!p", &v).unwrap()],
            env_safety_hard: vec![parse_formula("G(!p')", &v).unwrap()],
            sys_liveness: vec![parse_formula("p", &v).unwrap()],
            ..Default::default()
        };
        let g = build_game(&spec, &sp).unwrap();
        let w = compute_winning_states(&g).unwrap();
        assert!(!realizable_with(&g, &w));
        assert_eq!(w.blocking.as_ref().unwrap().goal, 0);
        assert_eq!(w, WinningSet { blocking: None, ..oracle_winning_states(&g).unwrap() }.with_blocking(&w));
    }

    impl WinningSet {
        fn with_blocking(mut self, other: &WinningSet) -> Self {
            self.blocking = other.blocking.clone();
            self
        }
    }
}
