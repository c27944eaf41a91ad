//! Repair report, strategy table and their text forms.

use serde::{Deserialize, Serialize};

use crate::game::Strategy;
use crate::logic::{State, Vocabulary};
use crate::repair::{Ordering, SkillSuggestion};
use crate::skill::Skill;

pub const REPORT_SCHEMA: &str = "skillrepair.report.v1";
pub const STRATEGY_HEADER: &str = "# skillrepair.strategy.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    RealizableAsGiven,
    Repaired,
    Exhausted,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::RealizableAsGiven => 0,
            Outcome::Repaired => 1,
            Outcome::Exhausted => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    pub schema: String,
    pub spec: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub realizable_as_given: bool,
    /// Symbolic attempts in the order they ran.
    #[serde(default)]
    pub attempts: Vec<AttemptRecord>,
    /// Physical checks in the order they ran.
    #[serde(default)]
    pub feasibility: Vec<FeasibilityRecord>,
    #[serde(default)]
    pub suggestions: Vec<SuggestionRecord>,
    /// Accumulated (state, next inputs) pairs ruled out by feedback.
    #[serde(default)]
    pub disallowed: Vec<[Vec<String>; 2]>,
    #[serde(default)]
    pub cells: Vec<CellRecord>,
    #[serde(default)]
    pub trajectories: Vec<TrajectoryDump>,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub iteration: usize,
    pub ordering: String,
    pub realizable: bool,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRecord {
    /// Feedback round, counted from zero.
    pub round: usize,
    pub skill: String,
    pub pass_fraction: f64,
    pub accepted: bool,
    /// Rendered `pre -> {successors}` transitions sent back as disallowed.
    pub failing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionRecord {
    pub skill: String,
    pub activation: String,
    pub pre: Vec<Vec<String>>,
    pub post: Vec<Vec<String>>,
    pub edges: Vec<[Vec<String>; 2]>,
    /// `a -> b` lines of the transition chain.
    pub chain: Vec<String>,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDump {
    pub skill: String,
    /// `original` or `repaired`.
    pub kind: String,
    pub passed: bool,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub synthesis_s: f64,
    pub repair_s: f64,
    pub trajectory_s: f64,
    pub total_s: f64,
}

fn names(v: &Vocabulary, s: State) -> Vec<String> {
    v.state_names(s).into_iter().map(String::from).collect()
}

impl AttemptRecord {
    pub fn new(iteration: usize, ordering: Ordering, realizable: bool, steps: Vec<String>) -> Self {
        let ordering = match ordering {
            Ordering::PreThenPost => "pre-then-post",
            Ordering::PostThenPre => "post-then-pre",
        };
        AttemptRecord { iteration, ordering: ordering.into(), realizable, steps }
    }
}

impl SuggestionRecord {
    pub fn new(v: &Vocabulary, s: &SkillSuggestion) -> Self {
        let k = &s.skill;
        SuggestionRecord {
            skill: s.base_skill.clone(),
            activation: k.activation.clone(),
            pre: k.pre_init.iter().map(|&x| names(v, x)).collect(),
            post: k.post_final.iter().map(|&x| names(v, x)).collect(),
            edges: s.chain().into_iter().map(|(a, b)| [names(v, a), names(v, b)]).collect(),
            chain: s.chain().into_iter().map(|(a, b)| format!("{} -> {}", v.show(a), v.show(b))).collect(),
            provenance: s.provenance.clone(),
        }
    }

    /// The suggested skill over `v`.
    pub fn to_skill(&self, v: &Vocabulary) -> Result<Skill, crate::logic::LogicError> {
        let mut k = Skill::new(&self.skill, &self.activation);
        for p in &self.pre {
            k.pre_init.insert(v.state(p)?);
        }
        for p in &self.post {
            k.post_final.insert(v.state(p)?);
        }
        for [a, b] in &self.edges {
            k.add_edge(v.state(a)?, v.state(b)?);
        }
        Ok(k)
    }
}

impl RepairReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// The report with wall-clock fields zeroed.
    pub fn without_timing(&self) -> Self {
        RepairReport { timing: Timing::default(), ..self.clone() }
    }

    /// `(state, inputs′)` pairs rendered for the report.
    pub fn render_pairs(v: &Vocabulary, pairs: impl IntoIterator<Item = (State, State)>) -> Vec<[Vec<String>; 2]> {
        pairs.into_iter().map(|(a, b)| [names(v, a), names(v, b)]).collect()
    }
}

/// One line per move: `state | inputs′ | goal => next | goal′`.
pub fn strategy_table(st: &Strategy, v: &Vocabulary) -> String {
    let mut out = format!("{STRATEGY_HEADER}\n");
    for s in &st.initial {
        out.push_str(&format!("init {}\n", v.show(*s)));
    }
    for (&(s, e, j), &(t, k)) in &st.moves {
        out.push_str(&format!("{} | {} | {j} => {} | {k}\n", v.show(s), v.show(e), v.show(t)));
    }
    out
}
