//! Procedural scenes: walled rooms split by interior walls with narrow
//! doorways, receptacle clusters against the open floor, and one goal object
//! resting on a start-class receptacle.
//!
//! Every generated scene passes a breadth-first solvability check: the robot
//! can walk (4-connected over free cells) to a cell adjacent to the goal
//! object's receptacle and to at least one end-class instance.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classes::{ClassId, ClassKind, ClassRegistry, SizeClass};
use crate::grid::{neighbors4, neighbors8, Cell, Grid};
use crate::rng::{substream, STREAM_SCENE};
use crate::world::scene::{
    CellKind, GoalSpec, ObjectInstance, ObjectState, Pose, ReceptacleInstance, Scene, SceneConfig,
};

const MAX_ATTEMPTS: u32 = 64;
const MIN_ROOM_SIDE: i32 = 8;
/// Receptacles keep one free cell between themselves and any wall or other
/// instance so footprints never merge and rooms stay connected.
const PLACEMENT_MARGIN: i32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum GenerateError {
    #[error("scene generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: u32, reason: String },
    #[error("unknown class name `{0}`")]
    UnknownClass(String),
}

#[derive(Debug, Clone, Copy)]
struct Room {
    x0: i32,
    y0: i32,
    x1: i32, // inclusive
    y1: i32, // inclusive
}

impl Room {
    fn width(&self) -> i32 {
        self.x1 - self.x0 + 1
    }
    fn height(&self) -> i32 {
        self.y1 - self.y0 + 1
    }
}

/// Split rooms recursively until `target` rooms exist or nothing can split.
fn split_rooms(rng: &mut ChaCha8Rng, cells: &mut Grid<CellKind>, cfg: &SceneConfig, target: u32) -> Vec<Room> {
    let mut rooms = vec![Room {
        x0: 1,
        y0: 1,
        x1: cells.width() - 2,
        y1: cells.height() - 2,
    }];
    while (rooms.len() as u32) < target {
        // Split the largest splittable room for balanced layouts.
        let idx = rooms
            .iter()
            .enumerate()
            .filter(|(_, r)| r.width() >= 2 * MIN_ROOM_SIDE + 1 || r.height() >= 2 * MIN_ROOM_SIDE + 1)
            .max_by_key(|(_, r)| r.width() * r.height())
            .map(|(i, _)| i);
        let Some(idx) = idx else { break };
        let room = rooms[idx];
        let vertical = if room.width() >= 2 * MIN_ROOM_SIDE + 1 && room.height() >= 2 * MIN_ROOM_SIDE + 1 {
            rng.gen_bool(0.5)
        } else {
            room.width() >= 2 * MIN_ROOM_SIDE + 1
        };
        if vertical {
            let wall_x = rng.gen_range(room.x0 + MIN_ROOM_SIDE..=room.x1 - MIN_ROOM_SIDE);
            let door_w = rng.gen_range(cfg.doorway_min..=cfg.doorway_max).max(1);
            let door_y0 = rng.gen_range(room.y0..=room.y1 - door_w + 1);
            for y in room.y0..=room.y1 {
                if y < door_y0 || y >= door_y0 + door_w {
                    cells.set(Cell::new(wall_x, y), CellKind::Wall);
                }
            }
            rooms[idx] = Room { x1: wall_x - 1, ..room };
            rooms.push(Room { x0: wall_x + 1, ..room });
        } else {
            let wall_y = rng.gen_range(room.y0 + MIN_ROOM_SIDE..=room.y1 - MIN_ROOM_SIDE);
            let door_w = rng.gen_range(cfg.doorway_min..=cfg.doorway_max).max(1);
            let door_x0 = rng.gen_range(room.x0..=room.x1 - door_w + 1);
            for x in room.x0..=room.x1 {
                if x < door_x0 || x >= door_x0 + door_w {
                    cells.set(Cell::new(x, wall_y), CellKind::Wall);
                }
            }
            rooms[idx] = Room { y1: wall_y - 1, ..room };
            rooms.push(Room { x0: room.x0, y0: wall_y + 1, x1: room.x1, y1: room.y1 });
        }
    }
    rooms
}

/// True when a `w x h` rectangle at `origin` plus its margin ring contains
/// only free cells (so the footprint touches nothing).
fn rect_clear(cells: &Grid<CellKind>, origin: Cell, w: i32, h: i32) -> bool {
    for y in (origin.y - PLACEMENT_MARGIN)..(origin.y + h + PLACEMENT_MARGIN) {
        for x in (origin.x - PLACEMENT_MARGIN)..(origin.x + w + PLACEMENT_MARGIN) {
            let c = Cell::new(x, y);
            if !cells.in_bounds(c) || *cells.get(c) != CellKind::Free {
                return false;
            }
        }
    }
    true
}

fn place_instance(
    rng: &mut ChaCha8Rng,
    cells: &mut Grid<CellKind>,
    rooms: &[Room],
    registry: &ClassRegistry,
    class: ClassId,
    id: u32,
) -> Option<ReceptacleInstance> {
    let spec = registry.spec(class);
    for _ in 0..64 {
        let room = rooms[rng.gen_range(0..rooms.len())];
        let w = rng.gen_range(spec.footprint_min..=spec.footprint_max);
        let h = rng.gen_range(spec.footprint_min..=spec.footprint_max);
        if room.width() < w + 2 * PLACEMENT_MARGIN || room.height() < h + 2 * PLACEMENT_MARGIN {
            continue;
        }
        let x = rng.gen_range(room.x0 + PLACEMENT_MARGIN..=room.x1 - w - PLACEMENT_MARGIN + 1);
        let y = rng.gen_range(room.y0 + PLACEMENT_MARGIN..=room.y1 - h - PLACEMENT_MARGIN + 1);
        let origin = Cell::new(x, y);
        if !rect_clear(cells, origin, w, h) {
            continue;
        }
        let mut footprint = Vec::with_capacity((w * h) as usize);
        for dy in 0..h {
            for dx in 0..w {
                let c = origin.offset(dx, dy);
                cells.set(c, CellKind::Receptacle(id));
                footprint.push(c);
            }
        }
        return Some(ReceptacleInstance {
            id,
            class,
            surface_height: spec.surface_height,
            cells: footprint,
        });
    }
    None
}

/// Free cells reachable from `start` by 4-connected walking. `blocked` lists
/// extra impassable cells (large floor objects).
pub fn reachable_free(cells: &Grid<CellKind>, start: Cell, blocked: &[Cell]) -> Grid<bool> {
    let mut seen = Grid::new(cells.width(), cells.height(), false);
    if !cells.in_bounds(start) || *cells.get(start) != CellKind::Free || blocked.contains(&start) {
        return seen;
    }
    let mut queue = std::collections::VecDeque::new();
    seen.set(start, true);
    queue.push_back(start);
    while let Some(c) = queue.pop_front() {
        for n in neighbors4(c) {
            if cells.in_bounds(n)
                && !*seen.get(n)
                && *cells.get(n) == CellKind::Free
                && !blocked.contains(&n)
            {
                seen.set(n, true);
                queue.push_back(n);
            }
        }
    }
    seen
}

fn adjacent_reachable(reach: &Grid<bool>, footprint: &[Cell]) -> bool {
    footprint
        .iter()
        .flat_map(|&c| neighbors4(c))
        .any(|n| reach.in_bounds(n) && *reach.get(n))
}

/// Free cells reachable from `start` the way the navigation stack moves:
/// 8-connected steps over cells clear of the one-cell obstacle inflation,
/// with large floor objects treated as solid.
fn nav_reachable(cells: &Grid<CellKind>, start: Cell, blocked: &[Cell]) -> Grid<bool> {
    let (w, h) = (cells.width(), cells.height());
    let mut nav_blocked = Grid::new(w, h, false);
    for c in cells.cells() {
        let solid = *cells.get(c) != CellKind::Free || blocked.contains(&c);
        if solid {
            for n in neighbors8(c).into_iter().chain([c]) {
                if nav_blocked.in_bounds(n) {
                    nav_blocked.set(n, true);
                }
            }
        }
    }
    let mut seen = Grid::new(w, h, false);
    if !seen.in_bounds(start) || *nav_blocked.get(start) {
        return seen;
    }
    let mut queue = std::collections::VecDeque::new();
    seen.set(start, true);
    queue.push_back(start);
    while let Some(c) = queue.pop_front() {
        for n in neighbors8(c) {
            if seen.in_bounds(n) && !*seen.get(n) && !*nav_blocked.get(n) {
                seen.set(n, true);
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Whether a footprint has an approach cell the planner can deliver the
/// robot to. Approach cells sit inside the receptacle's inflation ring, so
/// they count as reached when the wave arrives at any of their neighbors.
fn nav_approachable(cells: &Grid<CellKind>, nav: &Grid<bool>, footprint: &[Cell]) -> bool {
    footprint.iter().flat_map(|&c| neighbors8(c)).any(|n| {
        cells.in_bounds(n)
            && *cells.get(n) == CellKind::Free
            && ((nav.in_bounds(n) && *nav.get(n))
                || neighbors8(n).iter().any(|&m| nav.in_bounds(m) && *nav.get(m)))
    })
}

fn resolve_class(
    registry: &ClassRegistry,
    name: &Option<String>,
    kind: ClassKind,
    rng: &mut ChaCha8Rng,
) -> Result<ClassId, GenerateError> {
    match name {
        Some(n) => {
            let id = registry
                .lookup(n)
                .ok_or_else(|| GenerateError::UnknownClass(n.clone()))?;
            if registry.spec(id).kind != kind {
                return Err(GenerateError::UnknownClass(n.clone()));
            }
            Ok(id)
        }
        None => {
            let pool = match kind {
                ClassKind::Receptacle => registry.receptacle_ids(),
                ClassKind::Object => registry.object_ids(),
            };
            Ok(*pool.choose(rng).expect("registry has classes of each kind"))
        }
    }
}

pub fn generate_scene(
    seed: u64,
    cfg: &SceneConfig,
    registry: &ClassRegistry,
) -> Result<Scene, GenerateError> {
    let mut rng = substream(seed, STREAM_SCENE);
    let mut last_reason = String::from("no attempt ran");

    for _ in 0..MAX_ATTEMPTS {
        match try_generate(&mut rng, cfg, registry) {
            Ok(scene) => {
                debug_assert!(scene.validate(registry).is_ok());
                return Ok(scene);
            }
            Err(GenerateError::UnknownClass(n)) => return Err(GenerateError::UnknownClass(n)),
            Err(GenerateError::GenerationFailed { reason, .. }) => last_reason = reason,
        }
    }
    Err(GenerateError::GenerationFailed {
        attempts: MAX_ATTEMPTS,
        reason: last_reason,
    })
}

fn fail(reason: &str) -> GenerateError {
    GenerateError::GenerationFailed { attempts: 1, reason: reason.to_string() }
}

fn try_generate(
    rng: &mut ChaCha8Rng,
    cfg: &SceneConfig,
    registry: &ClassRegistry,
) -> Result<Scene, GenerateError> {
    let (w, h) = (cfg.width, cfg.height);
    if w < 12 || h < 12 {
        return Err(fail("grid too small"));
    }
    let mut cells = Grid::new(w, h, CellKind::Free);
    for x in 0..w {
        cells.set(Cell::new(x, 0), CellKind::Wall);
        cells.set(Cell::new(x, h - 1), CellKind::Wall);
    }
    for y in 0..h {
        cells.set(Cell::new(0, y), CellKind::Wall);
        cells.set(Cell::new(w - 1, y), CellKind::Wall);
    }

    let object_class = resolve_class(registry, &cfg.goal_object, ClassKind::Object, rng)?;
    let start_class = resolve_class(registry, &cfg.start_receptacle, ClassKind::Receptacle, rng)?;
    // Unpinned end classes come from footprints at least 3 wide: anything
    // narrower is all edge, with no cell clear of the fall margin.
    let mut end_class = match &cfg.end_receptacle {
        Some(_) => resolve_class(registry, &cfg.end_receptacle, ClassKind::Receptacle, rng)?,
        None => *deep_receptacles(registry)
            .choose(rng)
            .expect("registry has a deep receptacle class"),
    };
    // Avoid degenerate start == end episodes unless the config pinned both.
    if cfg.end_receptacle.is_none() && end_class == start_class {
        end_class = deep_receptacles(registry)
            .into_iter()
            .find(|&c| c != start_class)
            .expect("registry has two deep receptacle classes");
    }
    let goal = GoalSpec {
        object_class,
        start_receptacle_class: start_class,
        end_receptacle_class: end_class,
    };

    let target_rooms = rng.gen_range(cfg.rooms_min..=cfg.rooms_max.max(cfg.rooms_min));
    let rooms = split_rooms(rng, &mut cells, cfg, target_rooms);

    // Instance plan: one start-class, `end_instances_min` end-class, then
    // distractors from the remaining receptacle classes.
    let mut plan: Vec<ClassId> = vec![goal.start_receptacle_class];
    for _ in 0..cfg.end_instances_min.max(1) {
        plan.push(goal.end_receptacle_class);
    }
    let others: Vec<ClassId> = registry
        .receptacle_ids()
        .into_iter()
        .filter(|&c| c != goal.start_receptacle_class && c != goal.end_receptacle_class)
        .collect();
    for i in 0..cfg.distractor_receptacles {
        if !others.is_empty() {
            plan.push(others[(i as usize) % others.len()]);
        }
    }

    let mut receptacles = Vec::new();
    for (i, &class) in plan.iter().enumerate() {
        match place_instance(rng, &mut cells, &rooms, registry, class, i as u32) {
            Some(inst) => receptacles.push(inst),
            None => return Err(fail("no room for receptacle footprint")),
        }
    }

    // Goal object on a random cell of the start-class instance.
    let start_rec = receptacles[0].clone();
    let obj_cell = start_rec.cells[rng.gen_range(0..start_rec.cells.len())];
    let obj_spec = registry.spec(goal.object_class);
    let mut objects = vec![ObjectInstance {
        id: 0,
        class: goal.object_class,
        size: obj_spec.size,
        state: ObjectState::OnReceptacle(start_rec.id),
        cell: obj_cell,
    }];

    let free: Vec<Cell> = cells
        .cells()
        .filter(|&c| *cells.get(c) == CellKind::Free)
        .collect();

    // Floor clutter: large objects dropped on open floor. Requiring a free
    // 4-neighborhood keeps them out of doorways; the solvability walk below
    // treats them as blocked anyway.
    let clutter_pool: Vec<ClassId> = registry
        .object_ids()
        .into_iter()
        .filter(|&c| registry.spec(c).size == SizeClass::Large && c != goal.object_class)
        .collect();
    let mut clutter_cells: Vec<Cell> = Vec::new();
    for i in 0..cfg.floor_clutter {
        if clutter_pool.is_empty() {
            break;
        }
        let class = clutter_pool[(i as usize) % clutter_pool.len()];
        for _ in 0..64 {
            let c = free[rng.gen_range(0..free.len())];
            let open = neighbors4(c)
                .into_iter()
                .all(|n| cells.in_bounds(n) && *cells.get(n) == CellKind::Free);
            if open && !clutter_cells.contains(&c) {
                objects.push(ObjectInstance {
                    id: objects.len() as u32,
                    class,
                    size: SizeClass::Large,
                    state: ObjectState::OnFloor,
                    cell: c,
                });
                clutter_cells.push(c);
                break;
            }
        }
    }

    // Start pose on a free cell from which the object receptacle and at
    // least one end instance are walkable. Prefer starts the inflated
    // planner can also serve, so the task is not doomed by a doorway the
    // navigation stack refuses; plain walkability is the fallback, matching
    // the narrow-passage failures the room layout is meant to produce.
    let mut pose = None;
    for attempt in 0..128 {
        let start = free[rng.gen_range(0..free.len())];
        if clutter_cells.contains(&start) {
            continue;
        }
        let reach = reachable_free(&cells, start, &clutter_cells);
        if !adjacent_reachable(&reach, &start_rec.cells) {
            continue;
        }
        let end_ok = receptacles
            .iter()
            .filter(|r| r.class == goal.end_receptacle_class)
            .any(|r| adjacent_reachable(&reach, &r.cells));
        if !end_ok {
            continue;
        }
        if attempt < 96 {
            let nav = nav_reachable(&cells, start, &clutter_cells);
            if !nav_approachable(&cells, &nav, &start_rec.cells) {
                continue;
            }
            let nav_end_ok = receptacles
                .iter()
                .filter(|r| r.class == goal.end_receptacle_class)
                .any(|r| nav_approachable(&cells, &nav, &r.cells));
            if !nav_end_ok {
                continue;
            }
        }
        let heading = 30 * rng.gen_range(0..12u16);
        pose = Some(Pose::new(start, heading));
        break;
    }
    let Some(start_pose) = pose else {
        return Err(fail("no solvable start pose"));
    };
    Ok(Scene {
        width: w,
        height: h,
        cells,
        receptacles,
        objects,
        start_pose,
        goal,
        view_range: cfg.view_range,
        view_cone_deg: cfg.view_cone_deg,
        reach: cfg.reach,
    })
}

/// Receptacle classes whose smallest footprint still has a cell clear of the
/// placement fall margin.
fn deep_receptacles(registry: &ClassRegistry) -> Vec<ClassId> {
    registry
        .receptacle_ids()
        .into_iter()
        .filter(|&c| registry.spec(c).footprint_min >= 3)
        .collect()
}
