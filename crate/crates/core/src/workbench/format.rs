//! On-disk shapes of spec, skill and constraint files.

use serde::{Deserialize, Serialize};

use crate::dmp::DmpConfig;
use crate::trajectory::{ReachableBox, RepairTrajectoryConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    /// Grounding file, relative to the spec file.
    pub grounding: String,
    pub skills: Vec<String>,
    #[serde(default)]
    pub constraints: Option<String>,
    pub vocabulary: VocabularyFile,
    #[serde(default)]
    pub task: TaskFile,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyFile {
    pub world: Vec<String>,
    #[serde(default)]
    pub user: Vec<String>,
    /// Defaults to the skills' activation propositions in file order.
    #[serde(default)]
    pub outputs: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskFile {
    pub env_init: Vec<String>,
    pub sys_init: Vec<String>,
    pub env_safety: Vec<String>,
    pub sys_safety: Vec<String>,
    /// Only `true` or an empty list is accepted.
    pub env_liveness: Vec<String>,
    /// `G(F(goal))` or the bare goal.
    pub sys_liveness: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeasibilityMode {
    /// Fit, repair and sample DMP controllers.
    Trajectory,
    /// Reject transitions between cells that share no face.
    Continuity,
    /// Accept every suggestion.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckerKind {
    Holonomic,
    ReachableBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub max_iterations: usize,
    pub step_budget: usize,
    pub feasibility: FeasibilityMode,
    pub checker: CheckerKind,
    pub samples: usize,
    pub threshold: f64,
    /// Rollouts kept per suggestion for plotting.
    pub dump_rollouts: usize,
    pub dmp: DmpConfig,
    pub trajectory: RepairTrajectoryConfig,
    pub reachable_box: Option<ReachableBox>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            max_iterations: 20,
            step_budget: 20,
            feasibility: FeasibilityMode::Trajectory,
            checker: CheckerKind::Holonomic,
            samples: 100,
            threshold: 0.9,
            dump_rollouts: 20,
            dmp: DmpConfig::default(),
            trajectory: RepairTrajectoryConfig::default(),
            reachable_box: None,
        }
    }
}

/// A cell is the list of world propositions that hold in it.
pub type Cell = Vec<String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillFile {
    pub name: String,
    pub activation: String,
    /// Each path runs from an initial precondition to a final postcondition.
    pub paths: Vec<Vec<Cell>>,
    #[serde(default)]
    pub demos: Option<DemoFile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemoKind {
    /// Start and goal drawn in endpoint cells, joined by axis-aligned legs.
    Axis,
    /// Start and goal drawn in endpoint cells, through the centres of a path's cells.
    Waypoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoFile {
    pub kind: DemoKind,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Dimension order of the legs for `axis`.
    #[serde(default)]
    pub order: Vec<usize>,
}

fn default_count() -> usize {
    100
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintsFile {
    /// Formula over inputs and primed inputs.
    pub poss_changes: Option<String>,
    /// Formula over the full state and primed inputs that feasible moves satisfy.
    pub disallowed: Option<String>,
}
