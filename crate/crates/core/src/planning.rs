//! Wavefront planning over the belief map.
//!
//! Distance fields are 8-connected Dijkstra wavefronts (orthogonal step 1,
//! diagonal sqrt 2). Obstacles are inflated by a Chebyshev radius before
//! planning, so corridors narrower than 2*radius+1 are treated as
//! impassable even when they are physically open.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use crate::grid::{Cell, Dir8, Grid, DIRS8, SQRT_2};
use crate::mapping::SemanticMap;
use crate::world::physics::Action;
use crate::world::scene::Pose;

pub const INFLATION_RADIUS: i32 = 1;
/// Cells of greedy descent bundled into one short-term goal.
pub const LOOKAHEAD: usize = 8;
/// Repeats of one (pose, goal) pair inside the window that count as stuck.
pub const OSC_REPEAT: u32 = 3;
/// Length of the sliding (pose, goal) window.
pub const OSC_WINDOW: usize = 20;
/// Steps a goal cell stays off-limits after a stuck verdict.
pub const OSC_BLACKLIST_STEPS: u64 = 50;

pub const UNREACHED: f64 = f64::INFINITY;

/// Passability after inflation. Out of bounds counts as blocked.
#[derive(Clone, Debug)]
pub struct PlanGrid {
    width: i32,
    height: i32,
    blocked: Grid<bool>,
}

impl PlanGrid {
    pub fn from_map(map: &SemanticMap, inflation: i32) -> Self {
        let (w, h) = (map.width(), map.height());
        let mut blocked = Grid::new(w, h, false);
        for y in 0..h {
            for x in 0..w {
                let c = Cell::new(x, y);
                if !map.passable(c) {
                    blocked.set(c, true);
                    continue;
                }
                'scan: for dy in -inflation..=inflation {
                    for dx in -inflation..=inflation {
                        if map.obstacle(c.offset(dx, dy)) {
                            blocked.set(c, true);
                            break 'scan;
                        }
                    }
                }
            }
        }
        PlanGrid { width: w, height: h, blocked }
    }

    pub fn blocked(&self, c: Cell) -> bool {
        !self.blocked.in_bounds(c) || *self.blocked.get(c)
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }
}

#[derive(PartialEq)]
struct Node {
    dist: f64,
    cell: Cell,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reverse distance order to make BinaryHeap pop the nearest first;
        // cell order keeps pops deterministic on ties.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap()
            .then_with(|| (other.cell.y, other.cell.x).cmp(&(self.cell.y, self.cell.x)))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn run_dijkstra(
    plan: &PlanGrid,
    seeds: &[Cell],
    enterable_only: Option<&HashSet<Cell>>,
) -> Grid<f64> {
    let mut dist = Grid::new(plan.width, plan.height, UNREACHED);
    let mut heap = BinaryHeap::new();
    let mut seed_set = HashSet::new();
    for &s in seeds {
        if !dist.in_bounds(s) {
            continue;
        }
        seed_set.insert(s);
        if *dist.get(s) > 0.0 {
            dist.set(s, 0.0);
            heap.push(Node { dist: 0.0, cell: s });
        }
    }
    while let Some(Node { dist: d, cell: c }) = heap.pop() {
        if d > *dist.get(c) {
            continue;
        }
        // Terminal cells can be entered but never transited.
        if let Some(terminals) = enterable_only {
            if terminals.contains(&c) && !seed_set.contains(&c) {
                continue;
            }
        }
        for dir in DIRS8 {
            let (dx, dy) = dir.delta();
            let n = c.offset(dx, dy);
            if !dist.in_bounds(n) {
                continue;
            }
            let passes = !plan.blocked(n)
                || enterable_only.is_some_and(|t| t.contains(&n));
            if !passes {
                continue;
            }
            let nd = d + if dir.is_diagonal() { SQRT_2 } else { 1.0 };
            if nd < *dist.get(n) {
                dist.set(n, nd);
                heap.push(Node { dist: nd, cell: n });
            }
        }
    }
    dist
}

/// Cost-to-reach from any of `sources`, which are seeded at zero and expand
/// even when they sit on blocked cells (the wave must escape the robot's own
/// inflated footprint).
pub fn distance_field(plan: &PlanGrid, sources: &[Cell]) -> Grid<f64> {
    run_dijkstra(plan, sources, None)
}

/// Cost from `root` to every cell, where `terminals` may be entered as a
/// final step even when blocked, but are never expanded through.
pub fn reach_field(plan: &PlanGrid, root: Cell, terminals: &HashSet<Cell>) -> Grid<f64> {
    run_dijkstra(plan, &[root], Some(terminals))
}

/// Best next cell by greedy descent: lowest field value among the 8
/// neighbors, ties broken toward the current heading, then by direction
/// index. None when no neighbor has a finite value or none improves.
pub fn descend(field: &Grid<f64>, pose: Pose) -> Option<Cell> {
    let here = if field.in_bounds(pose.cell) { *field.get(pose.cell) } else { UNREACHED };
    let mut best: Option<(f64, f64, usize, Cell)> = None;
    for (i, dir) in DIRS8.iter().enumerate() {
        let (dx, dy) = dir.delta();
        let n = pose.cell.offset(dx, dy);
        if !field.in_bounds(n) {
            continue;
        }
        let v = *field.get(n);
        if v == UNREACHED {
            continue;
        }
        let ang = crate::grid::angle_diff_deg(dir.angle_deg(), pose.heading_deg as f64);
        let key = (v, ang, i, n);
        let better = match &best {
            None => true,
            Some((bv, bang, bi, _)) => {
                (v, ang, i) < (*bv, *bang, *bi)
            }
        };
        if better {
            best = Some(key);
        }
    }
    match best {
        Some((v, _, _, n)) if v < here => Some(n),
        _ => None,
    }
}

/// Walk greedy descent up to `lookahead` cells and return where it lands.
pub fn short_term_goal(field: &Grid<f64>, pose: Pose, lookahead: usize) -> Option<Cell> {
    let mut cur = pose;
    let mut last = None;
    for _ in 0..lookahead {
        match descend(field, cur) {
            Some(n) => {
                last = Some(n);
                cur = Pose::new(n, cur.heading_deg);
                if *field.get(n) == 0.0 {
                    break;
                }
            }
            None => break,
        }
    }
    last
}

/// One motion command toward an adjacent waypoint: move when the quantized
/// heading already points at it, otherwise the single 30 degree turn that
/// shrinks the bearing error most (ties turn left).
pub fn next_nav_action(pose: Pose, waypoint: Cell) -> Action {
    let want = Dir8::from_bearing(pose.cell.bearing_to(waypoint));
    let have = Dir8::from_bearing(pose.heading_deg as f64);
    if want == have {
        return Action::MoveForward;
    }
    let mut delta = (want.angle_deg() - pose.heading_deg as f64).rem_euclid(360.0);
    if delta > 180.0 {
        delta -= 360.0;
    }
    // delta is in (-180, 180] and nonzero here; 180 exactly counts as left.
    if delta > 0.0 {
        Action::TurnLeft30
    } else {
        Action::TurnRight30
    }
}

/// One candidate goal region: the cells of one belief cluster's goal ring,
/// or an anonymous group (frontiers).
#[derive(Clone, Debug)]
pub struct GoalGroup {
    pub cluster: Option<u32>,
    pub prob: f64,
    pub centroid: (f64, f64),
    pub cells: Vec<Cell>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectedGoal {
    pub cluster: Option<u32>,
    pub cell: Cell,
    pub cost: f64,
}

/// Pick a navigation goal from candidate groups.
///
/// `prob_mode` ranks groups by cluster confidence (ties by distance, then
/// id); off, it takes whichever reachable cell is globally nearest.
/// `center_mode` aims at the reachable cell closest to the group centroid
/// instead of the one closest to the robot.
pub fn select_goal(
    plan: &PlanGrid,
    pose: Pose,
    groups: &[GoalGroup],
    prob_mode: bool,
    center_mode: bool,
) -> Option<SelectedGoal> {
    let mut terminals = HashSet::new();
    for g in groups {
        terminals.extend(g.cells.iter().copied());
    }
    if terminals.is_empty() {
        return None;
    }
    let field = reach_field(plan, pose.cell, &terminals);
    let cost = |c: Cell| -> f64 { *field.get(c) };

    let group_rank = |g: &GoalGroup| -> Option<f64> {
        g.cells
            .iter()
            .map(|&c| cost(c))
            .filter(|v| v.is_finite())
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v))))
    };

    let chosen: &GoalGroup = if prob_mode {
        let mut best: Option<(&GoalGroup, f64)> = None;
        for g in groups {
            let Some(near) = group_rank(g) else { continue };
            let better = match &best {
                None => true,
                Some((bg, bnear)) => {
                    let key = (-g.prob, near, g.cluster.map_or(u32::MAX, |i| i));
                    let bkey = (-bg.prob, *bnear, bg.cluster.map_or(u32::MAX, |i| i));
                    key < bkey
                }
            };
            if better {
                best = Some((g, near));
            }
        }
        best?.0
    } else {
        let mut best: Option<(&GoalGroup, f64)> = None;
        for g in groups {
            let Some(near) = group_rank(g) else { continue };
            if best.as_ref().map_or(true, |(_, b)| near < *b) {
                best = Some((g, near));
            }
        }
        best?.0
    };

    let mut cells: Vec<Cell> = chosen
        .cells
        .iter()
        .copied()
        .filter(|&c| cost(c).is_finite())
        .collect();
    cells.sort_by_key(|c| (c.y, c.x));
    let cell = if center_mode {
        let (cx, cy) = chosen.centroid;
        cells
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = (a.x as f64 - cx).powi(2) + (a.y as f64 - cy).powi(2);
                let db = (b.x as f64 - cx).powi(2) + (b.y as f64 - cy).powi(2);
                da.partial_cmp(&db)
                    .unwrap()
                    .then_with(|| cost(a).partial_cmp(&cost(b)).unwrap())
                    .then_with(|| (a.y, a.x).cmp(&(b.y, b.x)))
            })?
    } else {
        cells
            .iter()
            .copied()
            .min_by(|&a, &b| {
                cost(a)
                    .partial_cmp(&cost(b))
                    .unwrap()
                    .then_with(|| (a.y, a.x).cmp(&(b.y, b.x)))
            })?
    };
    Some(SelectedGoal { cluster: chosen.cluster, cell, cost: cost(cell) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscillationVerdict {
    Ok,
    Stuck,
}

/// Detects (pose, goal) repetition and embargoes the goal cell: for a
/// while on the first verdict, permanently once the pair has repeated past
/// the lifetime cap. With the guard driving goal selection, no (pose, goal)
/// pair can occur more than OSC_REPEAT + 1 times in an episode.
#[derive(Clone, Debug, Default)]
pub struct OscillationGuard {
    window: VecDeque<(Pose, Cell)>,
    lifetime: HashMap<(Pose, Cell), u32>,
    expires: HashMap<Cell, u64>,
    permanent: HashSet<Cell>,
}

impl OscillationGuard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, pose: Pose, goal: Cell, step: u64) -> OscillationVerdict {
        self.window.push_back((pose, goal));
        if self.window.len() > OSC_WINDOW {
            self.window.pop_front();
        }
        let life = self.lifetime.entry((pose, goal)).or_insert(0);
        *life += 1;
        if *life >= OSC_REPEAT + 1 {
            self.permanent.insert(goal);
            return OscillationVerdict::Stuck;
        }
        let windowed =
            self.window.iter().filter(|&&(p, g)| p == pose && g == goal).count() as u32;
        if windowed >= OSC_REPEAT {
            self.expires.insert(goal, step + OSC_BLACKLIST_STEPS);
            return OscillationVerdict::Stuck;
        }
        OscillationVerdict::Ok
    }

    pub fn blacklisted(&self, goal: Cell, step: u64) -> bool {
        if self.permanent.contains(&goal) {
            return true;
        }
        self.expires.get(&goal).is_some_and(|&until| step < until)
    }

    pub fn max_lifetime_repeat(&self) -> u32 {
        self.lifetime.values().copied().max().unwrap_or(0)
    }
}
