//! Scene state: grid cells, receptacle instances, objects, robot pose, and
//! the episode goal triple.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{ClassId, ClassKind, ClassRegistry, SizeClass};
use crate::grid::{neighbors4, Cell, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Free,
    Wall,
    /// Part of the receptacle instance with this id.
    Receptacle(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    /// Degrees counterclockwise from east; always a multiple of 30.
    pub heading_deg: u16,
}

impl Pose {
    pub fn new(cell: Cell, heading_deg: u16) -> Self {
        debug_assert!(heading_deg < 360 && heading_deg % 30 == 0);
        Pose { cell, heading_deg }
    }

    pub fn turned_left(self) -> Self {
        Pose::new(self.cell, (self.heading_deg + 30) % 360)
    }

    pub fn turned_right(self) -> Self {
        Pose::new(self.cell, (self.heading_deg + 330) % 360)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceptacleInstance {
    pub id: u32,
    pub class: ClassId,
    /// Top surface height in meters.
    pub surface_height: f64,
    /// 4-connected footprint cells.
    pub cells: Vec<Cell>,
}

/// Chebyshev distance from `cell` to the nearest cell outside `cells`.
/// Boundary cells score 1; a deeper interior scores higher. Scanning one
/// ring past the bounding box suffices: cells farther out can never be
/// closer than the ring.
pub fn footprint_edge_distance(cells: &[Cell], cell: Cell) -> i32 {
    let x0 = cells.iter().map(|c| c.x).min().unwrap() - 1;
    let x1 = cells.iter().map(|c| c.x).max().unwrap() + 1;
    let y0 = cells.iter().map(|c| c.y).min().unwrap() - 1;
    let y1 = cells.iter().map(|c| c.y).max().unwrap() + 1;
    let mut best = i32::MAX;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let c = Cell::new(x, y);
            if !cells.contains(&c) {
                best = best.min(cell.chebyshev(c));
            }
        }
    }
    best
}

impl ReceptacleInstance {
    /// Chebyshev distance from `cell` to the nearest cell outside this
    /// footprint.
    pub fn edge_distance(&self, cell: Cell) -> i32 {
        footprint_edge_distance(&self.cells, cell)
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.cells.len() as f64;
        let sx: f64 = self.cells.iter().map(|c| c.x as f64).sum();
        let sy: f64 = self.cells.iter().map(|c| c.y as f64).sum();
        (sx / n, sy / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectState {
    /// Resting on the receptacle instance with this id.
    OnReceptacle(u32),
    Held,
    OnFloor,
    /// Slid off a surface; unrecoverable for the episode.
    Fallen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: u32,
    pub class: ClassId,
    pub size: SizeClass,
    pub state: ObjectState,
    /// Current cell; meaningless while `Held`.
    pub cell: Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub object_class: ClassId,
    pub start_receptacle_class: ClassId,
    pub end_receptacle_class: ClassId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub width: i32,
    pub height: i32,
    pub cells: Grid<CellKind>,
    pub receptacles: Vec<ReceptacleInstance>,
    pub objects: Vec<ObjectInstance>,
    pub start_pose: Pose,
    pub goal: GoalSpec,
    /// Sensor and manipulation geometry (cells / degrees).
    pub view_range: i32,
    pub view_cone_deg: f64,
    pub reach: i32,
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("receptacle {id} footprint is not 4-connected")]
    DisconnectedReceptacle { id: u32 },
    #[error("cell {x},{y} disagrees with receptacle {id} footprint")]
    FootprintMismatch { id: u32, x: i32, y: i32 },
    #[error("object {id} does not sit on a start-class receptacle")]
    ObjectOffStartReceptacle { id: u32 },
    #[error("scene has no goal object of the goal class")]
    MissingGoalObject,
    #[error("start pose is not on a free cell")]
    BadStartPose,
}

impl Scene {
    pub fn kind(&self, c: Cell) -> CellKind {
        if self.cells.in_bounds(c) {
            *self.cells.get(c)
        } else {
            CellKind::Wall
        }
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.kind(c) == CellKind::Free
    }

    pub fn receptacle(&self, id: u32) -> Option<&ReceptacleInstance> {
        self.receptacles.iter().find(|r| r.id == id)
    }

    pub fn receptacle_at(&self, c: Cell) -> Option<&ReceptacleInstance> {
        match self.kind(c) {
            CellKind::Receptacle(id) => self.receptacle(id),
            _ => None,
        }
    }

    /// Object currently resting at `c` (held objects have no cell).
    pub fn object_at(&self, c: Cell) -> Option<&ObjectInstance> {
        self.objects
            .iter()
            .find(|o| o.state != ObjectState::Held && o.cell == c)
    }

    /// The unique object matching the goal object class.
    pub fn goal_object(&self) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.class == self.goal.object_class)
    }

    pub fn goal_object_mut(&mut self) -> Option<&mut ObjectInstance> {
        let class = self.goal.object_class;
        self.objects.iter_mut().find(|o| o.class == class)
    }

    /// Instances of the episode's end receptacle class.
    pub fn end_receptacles(&self) -> impl Iterator<Item = &ReceptacleInstance> {
        self.receptacles
            .iter()
            .filter(|r| r.class == self.goal.end_receptacle_class)
    }

    /// Structural consistency: footprints match the grid, clusters are
    /// 4-connected, the goal object exists and (at episode start) sits on a
    /// start-class receptacle, and the robot stands on a free cell.
    pub fn validate(&self, registry: &ClassRegistry) -> Result<(), SceneError> {
        for r in &self.receptacles {
            debug_assert_eq!(registry.spec(r.class).kind, ClassKind::Receptacle);
            if !connected4(&r.cells) {
                return Err(SceneError::DisconnectedReceptacle { id: r.id });
            }
            for &c in &r.cells {
                if self.kind(c) != CellKind::Receptacle(r.id) {
                    return Err(SceneError::FootprintMismatch { id: r.id, x: c.x, y: c.y });
                }
            }
        }
        for c in self.cells.cells() {
            if let CellKind::Receptacle(id) = self.kind(c) {
                let owner = self.receptacle(id);
                if owner.map_or(true, |r| !r.cells.contains(&c)) {
                    return Err(SceneError::FootprintMismatch { id, x: c.x, y: c.y });
                }
            }
        }
        if self.goal_object().is_none() {
            return Err(SceneError::MissingGoalObject);
        }
        for o in &self.objects {
            if let ObjectState::OnReceptacle(rid) = o.state {
                let r = self
                    .receptacle(rid)
                    .ok_or(SceneError::ObjectOffStartReceptacle { id: o.id })?;
                if !r.cells.contains(&o.cell) {
                    return Err(SceneError::ObjectOffStartReceptacle { id: o.id });
                }
                if o.class == self.goal.object_class
                    && r.class != self.goal.start_receptacle_class
                {
                    return Err(SceneError::ObjectOffStartReceptacle { id: o.id });
                }
            }
        }
        if !self.is_free(self.start_pose.cell) {
            return Err(SceneError::BadStartPose);
        }
        Ok(())
    }
}

pub fn connected4(cells: &[Cell]) -> bool {
    if cells.is_empty() {
        return false;
    }
    let mut seen = vec![false; cells.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for n in neighbors4(cells[i]) {
            if let Some(j) = cells.iter().position(|&c| c == n) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
    }
    count == cells.len()
}

/// Scene generation parameters. One cell is 0.25 m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: i32,
    pub height: i32,
    pub rooms_min: u32,
    pub rooms_max: u32,
    /// Doorway widths drawn per split; narrow doors are deliberate terrain.
    pub doorway_min: i32,
    pub doorway_max: i32,
    /// Minimum count of end-receptacle-class instances.
    pub end_instances_min: u32,
    /// Extra receptacle instances of non-goal classes.
    pub distractor_receptacles: u32,
    /// Large objects scattered on the floor; they block the robot base.
    pub floor_clutter: u32,
    /// Goal triple by class name; `None` picks per-seed at random.
    pub goal_object: Option<String>,
    pub start_receptacle: Option<String>,
    pub end_receptacle: Option<String>,
    pub view_range: i32,
    pub view_cone_deg: f64,
    pub reach: i32,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            width: 48,
            height: 48,
            rooms_min: 2,
            rooms_max: 4,
            doorway_min: 1,
            doorway_max: 2,
            end_instances_min: 2,
            distractor_receptacles: 3,
            floor_clutter: 2,
            goal_object: None,
            start_receptacle: None,
            end_receptacle: None,
            view_range: 20,
            view_cone_deg: 90.0,
            reach: 6,
        }
    }
}

/// Assembles a scene cell by cell for scripted scenarios and tests.
/// `build` runs the same validation the generator output gets.
pub struct SceneBuilder {
    width: i32,
    height: i32,
    cells: Grid<CellKind>,
    receptacles: Vec<ReceptacleInstance>,
    objects: Vec<ObjectInstance>,
    start_pose: Pose,
    goal: Option<GoalSpec>,
    view_range: i32,
    view_cone_deg: f64,
    reach: i32,
}

impl SceneBuilder {
    pub fn new(width: i32, height: i32) -> Self {
        SceneBuilder {
            width,
            height,
            cells: Grid::new(width, height, CellKind::Free),
            receptacles: Vec::new(),
            objects: Vec::new(),
            start_pose: Pose::new(Cell::new(1, 1), 0),
            goal: None,
            view_range: 20,
            view_cone_deg: 90.0,
            reach: 6,
        }
    }

    pub fn wall(&mut self, cell: Cell) -> &mut Self {
        self.cells.set(cell, CellKind::Wall);
        self
    }

    pub fn wall_border(&mut self) -> &mut Self {
        for x in 0..self.width {
            self.cells.set(Cell::new(x, 0), CellKind::Wall);
            self.cells.set(Cell::new(x, self.height - 1), CellKind::Wall);
        }
        for y in 0..self.height {
            self.cells.set(Cell::new(0, y), CellKind::Wall);
            self.cells.set(Cell::new(self.width - 1, y), CellKind::Wall);
        }
        self
    }

    /// Stamps a receptacle footprint; surface height comes from the class
    /// spec. Returns the new instance id.
    pub fn add_receptacle(
        &mut self,
        registry: &ClassRegistry,
        class: ClassId,
        cells: Vec<Cell>,
    ) -> u32 {
        let id = self.receptacles.len() as u32;
        for &c in &cells {
            self.cells.set(c, CellKind::Receptacle(id));
        }
        self.receptacles.push(ReceptacleInstance {
            id,
            class,
            surface_height: registry.spec(class).surface_height,
            cells,
        });
        id
    }

    pub fn add_object(
        &mut self,
        registry: &ClassRegistry,
        class: ClassId,
        state: ObjectState,
        cell: Cell,
    ) -> u32 {
        let id = self.objects.len() as u32;
        self.objects.push(ObjectInstance {
            id,
            class,
            size: registry.spec(class).size,
            state,
            cell,
        });
        id
    }

    pub fn start(&mut self, pose: Pose) -> &mut Self {
        self.start_pose = pose;
        self
    }

    pub fn goal(&mut self, goal: GoalSpec) -> &mut Self {
        self.goal = Some(goal);
        self
    }

    pub fn sensors(&mut self, view_range: i32, view_cone_deg: f64, reach: i32) -> &mut Self {
        self.view_range = view_range;
        self.view_cone_deg = view_cone_deg;
        self.reach = reach;
        self
    }

    pub fn build(self, registry: &ClassRegistry) -> Result<Scene, SceneError> {
        let scene = Scene {
            width: self.width,
            height: self.height,
            cells: self.cells,
            receptacles: self.receptacles,
            objects: self.objects,
            start_pose: self.start_pose,
            goal: self.goal.ok_or(SceneError::MissingGoalObject)?,
            view_range: self.view_range,
            view_cone_deg: self.view_cone_deg,
            reach: self.reach,
        };
        scene.validate(registry)?;
        Ok(scene)
    }
}
