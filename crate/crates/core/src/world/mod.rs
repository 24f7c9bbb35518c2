pub mod generate;
pub mod physics;
pub mod scene;
pub mod text;
pub mod visibility;

pub use generate::{generate_scene, GenerateError};
pub use physics::{step, Action, Event, PickFailReason, RobotState, StepError, FALL_MARGIN};
pub use scene::{
    footprint_edge_distance, CellKind, GoalSpec, ObjectInstance, ObjectState, Pose,
    ReceptacleInstance, Scene, SceneBuilder, SceneConfig, SceneError,
};
pub use text::{scene_from_text, scene_to_text, TextError};
pub use visibility::{cell_visible, observe, Observation, VisibleCell};
