//! Deterministic 2.5D grid-world simulator and heuristic agent for
//! open-vocabulary pick-and-place episodes, plus the evaluation harness
//! that scores them.

pub mod agent;
pub mod classes;
pub mod config;
pub mod eval;
pub mod grid;
pub mod mapping;
pub mod perception;
pub mod planning;
pub mod render;
pub mod rng;
pub mod trace;
pub mod world;

pub use agent::{AblationFlags, Agent, AgentConfig, AgentStatus, Phase};
pub use classes::{ClassId, ClassKind, ClassRegistry, ClassSpec, SizeClass};
pub use config::{ConfigError, RunConfig, DEFAULT_BUDGET};
pub use eval::{
    fingerprint, post_hoc_success, run_episode, run_episode_on, run_suite, Diagnostics,
    EpisodeOutcome, EpisodeResult, EpisodeRow, EpisodeRun, Stages, StepView, SuiteReport,
    Termination, VariantReport,
};
pub use grid::{Cell, Dir8, Grid};
pub use perception::{Detection, NoiseConfig};
pub use render::{render_ascii, render_pgm, MapChannel, RenderMarks};
pub use trace::{read_trace, write_trace, TraceHeader, TraceRecord};
pub use world::{
    generate_scene, observe, step, Action, CellKind, Event, GoalSpec, ObjectInstance, ObjectState,
    Observation, PickFailReason, Pose, ReceptacleInstance, RobotState, Scene, SceneBuilder,
    SceneConfig,
};
