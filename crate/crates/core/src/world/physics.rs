//! Action semantics: motion, grasping, and placement. Everything here is
//! deterministic; the only failure surface is the world itself.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::SizeClass;
use crate::grid::{Cell, Dir8};
use crate::world::scene::{CellKind, ObjectState, Pose, Scene};
use crate::world::visibility::cell_visible;

/// Safety margin built into placement physics: a cell within this Chebyshev
/// distance of the footprint edge cannot hold an object.
pub const FALL_MARGIN: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    MoveForward,
    TurnLeft30,
    TurnRight30,
    Pick { target: Cell },
    Place { target: Cell, drop: bool },
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PickFailReason {
    OutOfRange,
    NotInView,
    NoObject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    None,
    Collision,
    PickSuccess,
    PickFailure(PickFailReason),
    PlaceSuccess,
    /// The object slid off: placed on a footprint edge, or released over an
    /// invalid target entirely.
    PlaceFallen,
    /// A large object jammed against the surface; it stays in the gripper.
    PlaceCollision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub held: Option<u32>,
}

impl RobotState {
    pub fn at_start(scene: &Scene) -> Self {
        RobotState {
            pose: scene.start_pose,
            held: None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("invalid action: {0}")]
    InvalidAction(&'static str),
}

fn within_reach(scene: &Scene, from: Cell, target: Cell) -> bool {
    from.dist2(target) <= (scene.reach as i64).pow(2)
}

/// Advance the world by one action. Returns the event the action produced.
pub fn step(scene: &mut Scene, robot: &mut RobotState, action: Action) -> Result<Event, StepError> {
    match action {
        Action::Stop => Ok(Event::None),
        Action::TurnLeft30 => {
            robot.pose = robot.pose.turned_left();
            Ok(Event::None)
        }
        Action::TurnRight30 => {
            robot.pose = robot.pose.turned_right();
            Ok(Event::None)
        }
        Action::MoveForward => {
            let dir = Dir8::from_bearing(robot.pose.heading_deg as f64);
            let (dx, dy) = dir.delta();
            let target = robot.pose.cell.offset(dx, dy);
            // Large objects on the ground block the base; small ones are
            // driven over.
            let blocked = scene
                .object_at(target)
                .is_some_and(|o| o.size == SizeClass::Large);
            if scene.is_free(target) && !blocked {
                robot.pose = Pose::new(target, robot.pose.heading_deg);
                Ok(Event::None)
            } else {
                Ok(Event::Collision)
            }
        }
        Action::Pick { target } => {
            if robot.held.is_some() {
                return Err(StepError::InvalidAction("pick while holding"));
            }
            if !within_reach(scene, robot.pose.cell, target) {
                return Ok(Event::PickFailure(PickFailReason::OutOfRange));
            }
            if !cell_visible(scene, robot.pose, target) {
                return Ok(Event::PickFailure(PickFailReason::NotInView));
            }
            let goal_class = scene.goal.object_class;
            match scene.object_at(target) {
                Some(o) if o.class == goal_class => {
                    let id = o.id;
                    let here = robot.pose.cell;
                    let obj = scene.objects.iter_mut().find(|o| o.id == id).unwrap();
                    obj.state = ObjectState::Held;
                    obj.cell = here;
                    robot.held = Some(id);
                    Ok(Event::PickSuccess)
                }
                _ => Ok(Event::PickFailure(PickFailReason::NoObject)),
            }
        }
        Action::Place { target, drop } => {
            let Some(held_id) = robot.held else {
                return Err(StepError::InvalidAction("place while not holding"));
            };
            let valid_surface = matches!(scene.kind(target), CellKind::Receptacle(_))
                && within_reach(scene, robot.pose.cell, target)
                && cell_visible(scene, robot.pose, target);
            if !valid_surface {
                // Released blindly: the object ends up on the ground.
                let obj = scene.objects.iter_mut().find(|o| o.id == held_id).unwrap();
                obj.state = ObjectState::Fallen;
                obj.cell = target;
                robot.held = None;
                return Ok(Event::PlaceFallen);
            }
            let rec = scene.receptacle_at(target).expect("valid surface has owner");
            let rec_id = rec.id;
            if rec.edge_distance(target) <= FALL_MARGIN {
                let obj = scene.objects.iter_mut().find(|o| o.id == held_id).unwrap();
                obj.state = ObjectState::Fallen;
                obj.cell = target;
                robot.held = None;
                return Ok(Event::PlaceFallen);
            }
            let obj = scene.objects.iter_mut().find(|o| o.id == held_id).unwrap();
            if obj.size == SizeClass::Large && !drop {
                return Ok(Event::PlaceCollision);
            }
            obj.state = ObjectState::OnReceptacle(rec_id);
            obj.cell = target;
            robot.held = None;
            Ok(Event::PlaceSuccess)
        }
    }
}
