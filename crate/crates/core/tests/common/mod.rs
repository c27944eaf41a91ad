#![allow(dead_code)]

pub mod props;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillrepair::dmp::{fit_dmp, resample, DmpConfig, DmpSkillController, Trajectory};
use skillrepair::game::{GameStructure, Gr1Spec};
use skillrepair::logic::{parse_formula, state_formula, Formula, Slice, State, StateSpace, TransitionRelation, Vocabulary};
use skillrepair::skill::{assemble_spec, grounded_space, nine_squares, Grounding, Skill, Task};

pub struct Fixture {
    pub vocab: Vocabulary,
    pub grounding: Grounding,
    pub skills: Vec<Skill>,
    pub task: Task,
    pub space: StateSpace,
    pub spec: Gr1Spec,
}

pub fn cell(v: &Vocabulary, x: usize, y: usize) -> State {
    v.state(&[format!("x{x}"), format!("y{y}")]).unwrap()
}

pub fn named(v: &Vocabulary, names: &[&str]) -> State {
    v.state(names).unwrap()
}

/// Corner-to-corner task avoiding the lower right cell.
pub fn corner_task() -> Fixture {
    let (vocab, grounding) = nine_squares();
    with_vocab(vocab, grounding)
}

/// The same task with an unconstrained user input `react`.
pub fn corner_task_react() -> Fixture {
    let (_, grounding) = nine_squares();
    let vocab =
        Vocabulary::new(&["x0", "x1", "x2", "y0", "y1", "y2"], &["react"], &["pi_L2R", "pi_R2L"]).unwrap();
    with_vocab(vocab, grounding)
}

fn with_vocab(vocab: Vocabulary, grounding: Grounding) -> Fixture {
    let c = |x, y| cell(&vocab, x, y);
    let l2r = Skill::chain("L2R", "pi_L2R", &[c(0, 0), c(1, 0), c(2, 0), c(2, 1), c(2, 2)]);
    let r2l = Skill::chain("R2L", "pi_R2L", &[c(2, 2), c(1, 2), c(0, 2), c(0, 1), c(0, 0)]);
    let f = |t: &str| parse_formula(t, &vocab).unwrap();
    let task = Task {
        sys_init: vec![f("x0 & y0")],
        sys_safety: vec![f("G(!(x2 & y0))"), f("G(!X(x2 & y0))")],
        sys_liveness: vec![f("x2 & y2"), f("x0 & y0")],
        ..Task::default()
    };
    let skills = vec![l2r, r2l];
    let space = grounded_space(&vocab, &grounding);
    let spec = assemble_spec(&vocab, &grounding, &skills, &task);
    Fixture { vocab, grounding, skills, task, space, spec }
}

/// Corner paths from the lower left to the upper right cell, moving along x first.
pub fn corner_demos(n: usize, seed: u64) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = [rng.gen_range(0.15..0.85), rng.gen_range(0.15..0.85)];
            let g = [rng.gen_range(2.15..2.85), rng.gen_range(2.15..2.85)];
            resample(&[s.to_vec(), vec![g[0], s[1]], g.to_vec()], 50)
        })
        .collect()
}

pub fn fitted() -> DmpSkillController {
    fit_dmp(&corner_demos(100, 7), &DmpConfig::default()).unwrap()
}

/// The repaired L2R through the centre cell.
pub fn staircase() -> Skill {
    let (vocab, _) = nine_squares();
    let c = |x, y| cell(&vocab, x, y);
    Skill::chain("L2R", "pi_L2R", &[c(0, 0), c(1, 0), c(1, 1), c(2, 1), c(2, 2)])
}

/// Small seeded game with up to four world inputs, one user input and two outputs.
pub fn random_game(seed: u64) -> GameStructure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nw = rng.gen_range(1..=4);
    let nu = rng.gen_range(0..=1);
    let no = rng.gen_range(1..=2);
    let names = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let vocab = Vocabulary::new(&names("w", nw), &names("u", nu), &names("o", no)).unwrap();
    let world: Vec<State> = (0..1u32 << nw).filter(|_| rng.gen_bool(0.8)).map(State).collect();
    let world = if world.is_empty() { vec![State(0)] } else { world };
    let space = StateSpace::with_world(vocab, world);
    let all = space.states(Slice::All);
    let inputs = space.states(Slice::Inputs);
    let (pe, ps) = (rng.gen_range(0.2..0.9), rng.gen_range(0.05..0.5));
    let mut tau_env = TransitionRelation::empty(Slice::All, Slice::Inputs);
    let mut tau_sys = TransitionRelation::empty(Slice::All, Slice::All);
    for &a in &all {
        for &e in &inputs {
            if rng.gen_bool(pe) {
                tau_env.pairs.insert((a, e));
            }
        }
        for &b in &all {
            if rng.gen_bool(ps) {
                tau_sys.pairs.insert((a, b));
            }
        }
    }
    let theta_init = all.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
    let goals = rng.gen_range(1..=2);
    let sys_liveness = (0..goals)
        .map(|_| {
            let picked: Vec<Formula> = all
                .iter()
                .filter(|_| rng.gen_bool(0.25))
                .map(|&s| state_formula(s, &space.vocab, Slice::All))
                .collect();
            if picked.is_empty() {
                Formula::False
            } else {
                Formula::or(picked)
            }
        })
        .collect();
    GameStructure { space, theta_init, tau_env, tau_sys, env_liveness: Vec::new(), sys_liveness }
}

/// The bundled scenario directory.
pub fn scenarios() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}
