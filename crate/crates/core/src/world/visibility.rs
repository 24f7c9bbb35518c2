//! Line-of-sight model. A cell is visible when it sits inside the view cone
//! and range and no occluder lies strictly between it and the robot. Walls
//! occlude everything behind them. Receptacle cells occlude too, except that
//! a receptacle never hides its own footprint: the camera sits above surface
//! height, so the whole top of a table is observable from any side you face.

use serde::{Deserialize, Serialize};

use crate::classes::ClassId;
use crate::grid::{cells_strictly_between, in_cone, Cell};
use crate::world::scene::{CellKind, Pose, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibleCell {
    pub cell: Cell,
    pub kind: CellKind,
    pub distance: f64,
    /// Receptacle class when the cell is part of an instance footprint.
    pub class: Option<ClassId>,
    /// Surface height in meters: 0 for floor and walls.
    pub surface_height: f64,
    /// Object resting at this cell, if any (held objects have no cell).
    pub object: Option<u32>,
}

/// Ground-truth frame handed to the perception model each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pose: Pose,
    pub cells: Vec<VisibleCell>,
}

impl Observation {
    pub fn sees(&self, c: Cell) -> bool {
        self.cells.iter().any(|v| v.cell == c)
    }
}

/// True when no occluder lies strictly between `from` and `target`.
/// `target_instance` is the receptacle instance the ray is allowed to pass
/// over (the target's own footprint).
fn ray_clear(scene: &Scene, from: Cell, target: Cell, target_instance: Option<u32>) -> bool {
    for c in cells_strictly_between(from, target) {
        match scene.kind(c) {
            CellKind::Wall => return false,
            CellKind::Receptacle(id) => {
                if Some(id) != target_instance {
                    return false;
                }
            }
            CellKind::Free => {}
        }
    }
    true
}

/// Full visibility predicate for a single cell: cone, range, occlusion.
pub fn cell_visible(scene: &Scene, pose: Pose, target: Cell) -> bool {
    if !scene.cells.in_bounds(target) {
        return false;
    }
    if !in_cone(
        pose.cell,
        pose.heading_deg as f64,
        scene.view_cone_deg,
        scene.view_range as i64,
        target,
    ) {
        return false;
    }
    let target_instance = match scene.kind(target) {
        CellKind::Receptacle(id) => Some(id),
        _ => None,
    };
    ray_clear(scene, pose.cell, target, target_instance)
}

/// All cells visible from `pose`, in row-major order. The robot's own cell
/// is always included.
pub fn observe(scene: &Scene, pose: Pose) -> Observation {
    let r = scene.view_range;
    let mut cells = Vec::new();
    let x0 = (pose.cell.x - r).max(0);
    let x1 = (pose.cell.x + r).min(scene.width - 1);
    let y0 = (pose.cell.y - r).max(0);
    let y1 = (pose.cell.y + r).min(scene.height - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let c = Cell::new(x, y);
            if !cell_visible(scene, pose, c) {
                continue;
            }
            let kind = scene.kind(c);
            let (class, surface_height) = match kind {
                CellKind::Receptacle(id) => {
                    let rec = scene.receptacle(id).expect("footprint owner exists");
                    (Some(rec.class), rec.surface_height)
                }
                _ => (None, 0.0),
            };
            cells.push(VisibleCell {
                cell: c,
                kind,
                distance: pose.cell.euclid(c),
                class,
                surface_height,
                object: scene.object_at(c).map(|o| o.id),
            });
        }
    }
    Observation { pose, cells }
}
