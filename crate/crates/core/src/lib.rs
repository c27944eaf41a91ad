//! Skill encoding, GR(1) synthesis and symbolic/physical task repair.

pub mod logic;
pub mod game;
pub mod skill;
pub mod repair;
pub mod dmp;
pub mod trajectory;
pub mod workbench;

/// Guide chapters, compiled as doc tests.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/logic.md")]
    pub mod logic {}
    #[doc = include_str!("../../../book/src/skills.md")]
    pub mod skills {}
    #[doc = include_str!("../../../book/src/repair.md")]
    pub mod repair {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    pub mod trajectories {}
    #[doc = include_str!("../../../book/src/workbench.md")]
    pub mod workbench {}
    #[doc = include_str!("../../../book/src/formats.md")]
    pub mod formats {}
}
