//! Noisy object detection on top of ground-truth visibility.
//!
//! Each frame draws exactly three uniforms per candidate in a fixed order
//! (receptacle cells grouped by instance id, then objects by id, then free
//! cells in scan order), so the random stream position depends only on what
//! is visible, never on draw outcomes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassId, ClassKind, ClassRegistry};
use crate::grid::Cell;
use crate::world::scene::{CellKind, GoalSpec, ObjectState, Scene};
use crate::world::visibility::Observation;

pub const DEFAULT_P_MISS: f64 = 0.15;
pub const DEFAULT_P_CONFUSE: f64 = 0.05;
pub const DEFAULT_P_FLOOR_FP: f64 = 0.05;

pub const THRESHOLD_OBJECT: f64 = 0.25;
pub const THRESHOLD_START: f64 = 0.35;
pub const THRESHOLD_END: f64 = 0.50;
pub const THRESHOLD_OTHER: f64 = 0.40;
pub const THRESHOLD_LEGACY: f64 = 0.40;
/// Detections estimated at or below this height (meters) are floor clutter.
pub const HEIGHT_FLOOR_M: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub cell: Cell,
    pub class: ClassId,
    pub confidence: f64,
    /// Estimated height of the detected surface above the floor, meters.
    pub est_height: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p_miss: f64,
    pub p_confuse: f64,
    pub p_floor_fp: f64,
    /// Confidence range for correctly labeled detections.
    pub conf_true: (f64, f64),
    /// Confidence range for detections labeled as the look-alike class.
    pub conf_confused: (f64, f64),
    /// Confidence range for floor false positives.
    pub conf_fp: (f64, f64),
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p_miss: DEFAULT_P_MISS,
            p_confuse: DEFAULT_P_CONFUSE,
            p_floor_fp: DEFAULT_P_FLOOR_FP,
            conf_true: (0.30, 0.95),
            conf_confused: (0.20, 0.60),
            conf_fp: (0.05, 0.45),
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        NoiseConfig {
            p_miss: 0.0,
            p_confuse: 0.0,
            p_floor_fp: 0.0,
            conf_true: (1.0, 1.0),
            conf_confused: (1.0, 1.0),
            conf_fp: (1.0, 1.0),
        }
    }
}

/// The six tunable cutoff numbers, independent of any particular goal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdValues {
    pub object: f64,
    pub start_receptacle: f64,
    pub end_receptacle: f64,
    pub other: f64,
    pub legacy: f64,
    pub height_floor: f64,
}

impl Default for ThresholdValues {
    fn default() -> Self {
        ThresholdValues {
            object: THRESHOLD_OBJECT,
            start_receptacle: THRESHOLD_START,
            end_receptacle: THRESHOLD_END,
            other: THRESHOLD_OTHER,
            legacy: THRESHOLD_LEGACY,
            height_floor: HEIGHT_FLOOR_M,
        }
    }
}

/// Confidence cutoffs keyed to the episode goal, plus the flat legacy cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub object: f64,
    pub start_receptacle: f64,
    pub end_receptacle: f64,
    pub other: f64,
    pub legacy: f64,
    pub height_floor: f64,
    goal: GoalSpec,
}

impl ThresholdTable {
    pub fn for_goal(goal: GoalSpec) -> Self {
        ThresholdTable::from_values(ThresholdValues::default(), goal)
    }

    pub fn from_values(v: ThresholdValues, goal: GoalSpec) -> Self {
        ThresholdTable {
            object: v.object,
            start_receptacle: v.start_receptacle,
            end_receptacle: v.end_receptacle,
            other: v.other,
            legacy: v.legacy,
            height_floor: v.height_floor,
            goal,
        }
    }

    pub fn class_threshold(&self, class: ClassId) -> f64 {
        if class == self.goal.object_class {
            self.object
        } else if class == self.goal.end_receptacle_class {
            self.end_receptacle
        } else if class == self.goal.start_receptacle_class {
            self.start_receptacle
        } else {
            self.other
        }
    }
}

fn scale(range: (f64, f64), u: f64) -> f64 {
    range.0 + u * (range.1 - range.0)
}

/// Simulate one detector frame over an observation.
///
/// Candidates, in order: visible cells of each receptacle instance (instances
/// ascending by id, cells in scan order), then visible objects ascending by
/// id, then visible free cells in scan order. Every candidate consumes three
/// uniform draws whether or not it yields a detection.
pub fn simulate_detections(
    scene: &Scene,
    obs: &Observation,
    noise: &NoiseConfig,
    registry: &ClassRegistry,
    rng: &mut impl Rng,
) -> Vec<Detection> {
    let mut out = Vec::new();

    let mut per_instance: Vec<(u32, Vec<Cell>)> =
        scene.receptacles.iter().map(|r| (r.id, Vec::new())).collect();
    per_instance.sort_by_key(|(id, _)| *id);
    let mut free_cells = Vec::new();
    for vc in &obs.cells {
        match vc.kind {
            CellKind::Receptacle(id) => {
                if let Some(entry) = per_instance.iter_mut().find(|(i, _)| *i == id) {
                    entry.1.push(vc.cell);
                }
            }
            CellKind::Free => free_cells.push(vc.cell),
            CellKind::Wall => {}
        }
    }

    for (id, cells) in &per_instance {
        let inst = scene.receptacle(*id).expect("observed instance exists");
        for &cell in cells {
            let u_miss: f64 = rng.gen();
            let u_confuse: f64 = rng.gen();
            let u_conf: f64 = rng.gen();
            if u_miss < noise.p_miss {
                continue;
            }
            let confused = u_confuse < noise.p_confuse;
            let partner = registry.confusion_partner(inst.class);
            let (class, confidence) = match (confused, partner) {
                (true, Some(p)) => (p, scale(noise.conf_confused, u_conf)),
                _ => (inst.class, scale(noise.conf_true, u_conf)),
            };
            out.push(Detection { cell, class, confidence, est_height: inst.surface_height });
        }
    }

    for obj in &scene.objects {
        if obj.state == ObjectState::Held || !obs.sees(obj.cell) {
            continue;
        }
        let u_miss: f64 = rng.gen();
        let _u_confuse: f64 = rng.gen();
        let u_conf: f64 = rng.gen();
        if u_miss < noise.p_miss {
            continue;
        }
        let est_height = match obj.state {
            ObjectState::OnReceptacle(rid) => {
                scene.receptacle(rid).map_or(0.0, |r| r.surface_height)
            }
            _ => 0.0,
        };
        out.push(Detection {
            cell: obj.cell,
            class: obj.class,
            confidence: scale(noise.conf_true, u_conf),
            est_height,
        });
    }

    let fp_classes = registry.receptacle_ids();
    for &cell in &free_cells {
        let u_fp: f64 = rng.gen();
        let u_class: f64 = rng.gen();
        let u_conf: f64 = rng.gen();
        if u_fp >= noise.p_floor_fp {
            continue;
        }
        let idx = ((u_class * fp_classes.len() as f64) as usize).min(fp_classes.len() - 1);
        out.push(Detection {
            cell,
            class: fp_classes[idx],
            confidence: scale(noise.conf_fp, u_conf),
            est_height: 0.0,
        });
    }

    out
}

/// Keep detections that clear the confidence cutoff and, when the height
/// gate is on, sit above floor level (object classes are exempt: they can
/// legitimately lie on the floor).
pub fn filter_detections(
    detections: &[Detection],
    table: &ThresholdTable,
    registry: &ClassRegistry,
    dynamic_thresholds: bool,
    height_filter: bool,
) -> Vec<Detection> {
    detections
        .iter()
        .filter(|d| {
            let threshold = if dynamic_thresholds {
                table.class_threshold(d.class)
            } else {
                table.legacy
            };
            if d.confidence < threshold {
                return false;
            }
            if height_filter
                && registry.spec(d.class).kind == ClassKind::Receptacle
                && d.est_height <= table.height_floor
            {
                return false;
            }
            true
        })
        .copied()
        .collect()
}
