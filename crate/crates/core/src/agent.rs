//! The task agent: a phase machine that explores, finds the goal object,
//! carries it to an end-class receptacle, and places it. Every behavioral
//! improvement over the plain baseline sits behind its own flag so the two
//! extremes (and anything between) run from one code path.
//!
//! The agent owns no randomness: given the same observations and detections
//! it always emits the same action.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::ClassRegistry;
use crate::grid::{neighbors4, Cell, Dir8, Grid};
use crate::mapping::{Cluster, Fusion, SemanticMap};
use crate::perception::{filter_detections, Detection, ThresholdTable, ThresholdValues};
use crate::planning::{
    descend, distance_field, next_nav_action, select_goal, short_term_goal, GoalGroup,
    OscillationGuard, OscillationVerdict, PlanGrid, SelectedGoal, INFLATION_RADIUS, LOOKAHEAD,
};
use crate::world::{
    footprint_edge_distance, Action, Event, GoalSpec, Observation, Pose, Scene,
};

/// Turns in the spin-in-place sweep run once at episode start.
pub const SCAN_TURNS: u32 = 12;
/// Close-approach radius (cells) used when incremental approach is on.
pub const TIGHT_APPROACH: i32 = 2;
/// Belief edge clearance a placement cell needs under edge-safe placement.
/// One more than the physical fall margin: belief footprints only ever
/// undershoot the real ones, so the extra cell absorbs unseen rim.
pub const SAFE_EDGE_DISTANCE: i32 = 2;

/// Gripper sweep tried between grasp retries: two steps left, then swing
/// right across the whole arc. With the entry attempt this probes headings
/// out to 60 degrees on both sides (cone edge reaches 105).
const PICK_SCAN: [Action; 6] = [
    Action::TurnLeft30,
    Action::TurnLeft30,
    Action::TurnRight30,
    Action::TurnRight30,
    Action::TurnRight30,
    Action::TurnRight30,
];

/// Loop bound for intra-step phase transitions; generous, never reached.
const MAX_TRANSITIONS: u32 = 64;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown ablation flag `{0}`")]
pub struct UnknownFlag(pub String);

/// One switch per behavioral improvement. All off reproduces the plain
/// baseline; all on is the full agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    /// Per-role detection confidence cutoffs instead of one legacy cutoff.
    pub dynamic_thresholds: bool,
    /// Drop receptacle detections whose estimated height hugs the floor.
    pub height_filter: bool,
    /// Rank candidate clusters by belief confidence, not plain distance.
    pub prob_goal_selection: bool,
    /// Blacklist goals that keep producing the same (pose, goal) pair, fall
    /// back to frontier exploration, and give up instead of looping.
    pub oscillation_guard: bool,
    /// Mark the cell ahead and the short-term goal as obstacles on impact.
    pub collision_marking: bool,
    /// Approach surfaces near their center and aim before manipulating.
    pub center_alignment: bool,
    /// Sweep the camera across the arc after a failed grasp and retry.
    pub pick_retry: bool,
    /// Trust the grasp sensor: on failure re-approach from a fresh cell
    /// instead of assuming the object is in hand.
    pub pick_verify: bool,
    /// Park within two cells of the target before manipulating.
    pub incremental_approach: bool,
    /// Only place on cells safely inside the believed footprint.
    pub edge_safe_placement: bool,
    /// When a surface has no safe cell, retarget another instance.
    pub surface_fallback: bool,
    /// Release from above: lets large objects settle instead of jamming.
    pub drop_from_height: bool,
}

impl AblationFlags {
    pub const NAMES: [&'static str; 12] = [
        "dynamic_thresholds",
        "height_filter",
        "prob_goal_selection",
        "oscillation_guard",
        "collision_marking",
        "center_alignment",
        "pick_retry",
        "pick_verify",
        "incremental_approach",
        "edge_safe_placement",
        "surface_fallback",
        "drop_from_height",
    ];

    pub fn baseline() -> Self {
        AblationFlags {
            dynamic_thresholds: false,
            height_filter: false,
            prob_goal_selection: false,
            oscillation_guard: false,
            collision_marking: false,
            center_alignment: false,
            pick_retry: false,
            pick_verify: false,
            incremental_approach: false,
            edge_safe_placement: false,
            surface_fallback: false,
            drop_from_height: false,
        }
    }

    pub fn uniteam() -> Self {
        AblationFlags {
            dynamic_thresholds: true,
            height_filter: true,
            prob_goal_selection: true,
            oscillation_guard: true,
            collision_marking: true,
            center_alignment: true,
            pick_retry: true,
            pick_verify: true,
            incremental_approach: true,
            edge_safe_placement: true,
            surface_fallback: true,
            drop_from_height: true,
        }
    }

    pub fn set(&mut self, name: &str, on: bool) -> Result<(), UnknownFlag> {
        match name {
            "dynamic_thresholds" => self.dynamic_thresholds = on,
            "height_filter" => self.height_filter = on,
            "prob_goal_selection" => self.prob_goal_selection = on,
            "oscillation_guard" => self.oscillation_guard = on,
            "collision_marking" => self.collision_marking = on,
            "center_alignment" => self.center_alignment = on,
            "pick_retry" => self.pick_retry = on,
            "pick_verify" => self.pick_verify = on,
            "incremental_approach" => self.incremental_approach = on,
            "edge_safe_placement" => self.edge_safe_placement = on,
            "surface_fallback" => self.surface_fallback = on,
            "drop_from_height" => self.drop_from_height = on,
            _ => return Err(UnknownFlag(name.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<bool, UnknownFlag> {
        Ok(match name {
            "dynamic_thresholds" => self.dynamic_thresholds,
            "height_filter" => self.height_filter,
            "prob_goal_selection" => self.prob_goal_selection,
            "oscillation_guard" => self.oscillation_guard,
            "collision_marking" => self.collision_marking,
            "center_alignment" => self.center_alignment,
            "pick_retry" => self.pick_retry,
            "pick_verify" => self.pick_verify,
            "incremental_approach" => self.incremental_approach,
            "edge_safe_placement" => self.edge_safe_placement,
            "surface_fallback" => self.surface_fallback,
            "drop_from_height" => self.drop_from_height,
            _ => return Err(UnknownFlag(name.to_string())),
        })
    }
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags::baseline()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub flags: AblationFlags,
    pub fusion: Fusion,
    pub inflation_radius: i32,
    pub thresholds: ThresholdValues,
}

impl AgentConfig {
    pub fn baseline() -> Self {
        AgentConfig {
            flags: AblationFlags::baseline(),
            fusion: Fusion::Max,
            inflation_radius: INFLATION_RADIUS,
            thresholds: ThresholdValues::default(),
        }
    }

    pub fn uniteam() -> Self {
        AgentConfig {
            flags: AblationFlags::uniteam(),
            ..AgentConfig::baseline()
        }
    }
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig::baseline()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    FindObject,
    NavigateToObject,
    PickObject,
    FindEndReceptacle,
    NavigateToEndReceptacle,
    PlaceObject,
    Done,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::FindObject => "find_object",
            Phase::NavigateToObject => "navigate_to_object",
            Phase::PickObject => "pick_object",
            Phase::FindEndReceptacle => "find_end_receptacle",
            Phase::NavigateToEndReceptacle => "navigate_to_end_receptacle",
            Phase::PlaceObject => "place_object",
            Phase::Done => "done",
        }
    }
}

/// Per-step self-report consumed by the evaluation harness.
#[derive(Clone, Copy, Debug)]
pub struct AgentStatus {
    pub phase: Phase,
    /// Navigation goal currently driven toward, if any.
    pub selected: Option<SelectedGoal>,
    /// Belief cluster the current phase is working on.
    pub target_cluster: Option<u32>,
    /// True during the initial spin sweep.
    pub scanning: bool,
    /// Whether the agent believes it holds the object.
    pub holding: bool,
}

struct NavPlan {
    goal: SelectedGoal,
    field: Grid<f64>,
    version: u64,
    /// Last short-term goal emitted; collision feedback marks it.
    stg: Option<Cell>,
}

struct PickState {
    cluster: u32,
    target: Cell,
    /// Cell the grasp is attempted from; blacklisted if the spot is bad.
    approach: Cell,
    scan: VecDeque<Action>,
    pending_turn: bool,
    aimed: bool,
}

#[derive(Clone, Copy)]
struct PlaceState {
    cluster: u32,
    target: Cell,
    aimed: bool,
}

enum Nav {
    Arrived(SelectedGoal),
    Step(Action),
    /// A goal was just embargoed; rebuild groups and reselect.
    Replan,
    NoGoal,
}

pub struct Agent {
    cfg: AgentConfig,
    registry: ClassRegistry,
    goal: GoalSpec,
    reach: i32,
    thresholds: ThresholdTable,
    map: SemanticMap,
    pose: Pose,
    phase: Phase,
    step_no: u64,
    scan_left: u32,
    nav: Option<NavPlan>,
    pick: Option<PickState>,
    place: Option<PlaceState>,
    guard: OscillationGuard,
    /// Object clusters given up on for good.
    written_off: HashSet<u32>,
    /// (cluster, approach cell) pairs where grasping already failed.
    approach_blacklist: HashSet<(u32, Cell)>,
    /// Goal cells that turned out to be useless to stand on (target not
    /// visible from there). Cleared on every phase change.
    spent: HashSet<Cell>,
    holding: bool,
}

impl Agent {
    /// Reads only the task-facing facts from the scene: dimensions, the goal
    /// triple, and the reach radius. World state stays behind the sensors.
    pub fn new(scene: &Scene, registry: &ClassRegistry, cfg: AgentConfig) -> Self {
        Agent {
            thresholds: ThresholdTable::from_values(cfg.thresholds, scene.goal),
            map: SemanticMap::for_scene(scene, registry, cfg.fusion),
            registry: registry.clone(),
            goal: scene.goal,
            reach: scene.reach,
            pose: scene.start_pose,
            cfg,
            phase: Phase::FindObject,
            step_no: 0,
            scan_left: SCAN_TURNS,
            nav: None,
            pick: None,
            place: None,
            guard: OscillationGuard::new(),
            written_off: HashSet::new(),
            approach_blacklist: HashSet::new(),
            spent: HashSet::new(),
            holding: false,
        }
    }

    pub fn map(&self) -> &SemanticMap {
        &self.map
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    /// Decide one action from the current observation and raw detections.
    pub fn act(&mut self, obs: &Observation, raw: &[Detection]) -> (Action, AgentStatus) {
        self.step_no += 1;
        self.pose = obs.pose;
        let filtered = filter_detections(
            raw,
            &self.thresholds,
            &self.registry,
            self.cfg.flags.dynamic_thresholds,
            self.cfg.flags.height_filter,
        );
        self.map.integrate(obs, &filtered);

        if self.scan_left > 0 {
            self.scan_left -= 1;
            return (Action::TurnLeft30, self.status(true));
        }
        let action = self.drive();
        (action, self.status(false))
    }

    /// Digest the event the last action produced.
    pub fn feedback(&mut self, event: Event) {
        match event {
            Event::Collision => {
                if self.cfg.flags.collision_marking {
                    let dir = Dir8::from_bearing(self.pose.heading_deg as f64);
                    let (dx, dy) = dir.delta();
                    self.map.mark_collision(self.pose.cell.offset(dx, dy));
                    if let Some(stg) = self.nav.as_ref().and_then(|p| p.stg) {
                        self.map.mark_collision(stg);
                    }
                }
            }
            Event::PickSuccess => {
                self.holding = true;
                self.pick = None;
                let next = self.after_pick();
                self.enter(next);
            }
            Event::PickFailure(_) => self.on_pick_failure(),
            Event::PlaceSuccess | Event::PlaceFallen => {
                self.holding = false;
                self.enter(Phase::Done);
            }
            Event::PlaceCollision => {
                // Object stays in the gripper, but one placement attempt is
                // all an episode gets.
                self.enter(Phase::Done);
            }
            Event::None => {}
        }
    }

    fn status(&self, scanning: bool) -> AgentStatus {
        let target_cluster = match self.phase {
            Phase::PickObject => self.pick.as_ref().map(|s| s.cluster),
            Phase::PlaceObject | Phase::Done => self.place.as_ref().map(|s| s.cluster),
            _ => self.nav.as_ref().and_then(|p| p.goal.cluster),
        };
        AgentStatus {
            phase: self.phase,
            selected: self.nav.as_ref().map(|p| p.goal),
            target_cluster,
            scanning,
            holding: self.holding,
        }
    }

    fn enter(&mut self, phase: Phase) {
        self.phase = phase;
        self.nav = None;
        self.spent.clear();
    }

    fn after_pick(&self) -> Phase {
        if self.end_clusters_exist() {
            Phase::NavigateToEndReceptacle
        } else {
            Phase::FindEndReceptacle
        }
    }

    fn end_clusters_exist(&self) -> bool {
        self.map
            .clusters_of(self.goal.end_receptacle_class)
            .next()
            .is_some()
    }

    fn on_pick_failure(&mut self) {
        let Some(st) = self.pick.as_mut() else { return };
        if self.cfg.flags.pick_retry && !st.scan.is_empty() {
            st.pending_turn = true;
            return;
        }
        let (cluster, approach) = (st.cluster, st.approach);
        self.pick = None;
        if self.cfg.flags.pick_verify {
            // This spot is no good; approach the cluster from another cell.
            self.approach_blacklist.insert((cluster, approach));
            self.enter(Phase::NavigateToObject);
        } else {
            // No grasp sensing: carry on as if the object were in hand.
            self.holding = true;
            let next = self.after_pick();
            self.enter(next);
        }
    }

    fn drive(&mut self) -> Action {
        for _ in 0..MAX_TRANSITIONS {
            match self.phase {
                Phase::FindObject => {
                    if !self.object_cluster_ids().is_empty() {
                        self.enter(Phase::NavigateToObject);
                        continue;
                    }
                    let chain = vec![self.inspect_groups(), self.frontier_groups()];
                    match self.navigate_chain(&chain) {
                        Nav::Arrived(g) => match self.arrival_aim(g) {
                            Some(a) => return a,
                            None => continue,
                        },
                        Nav::Step(a) => return a,
                        Nav::Replan => continue,
                        Nav::NoGoal => return self.stall(),
                    }
                }
                Phase::NavigateToObject => {
                    if !self.write_off_exhausted_clusters() {
                        self.enter(Phase::FindObject);
                        continue;
                    }
                    let reach2 = (self.reach as i64).pow(2);
                    let tight2 = (TIGHT_APPROACH as i64).pow(2);
                    let mut chain = Vec::new();
                    if self.cfg.flags.incremental_approach {
                        chain.push(self.object_groups(tight2));
                    }
                    chain.push(self.object_groups(reach2));
                    if self.cfg.flags.oscillation_guard {
                        chain.push(self.frontier_groups());
                    }
                    match self.navigate_chain(&chain) {
                        Nav::Arrived(g) => match g.cluster {
                            Some(id) => {
                                let target = self.nearest_cluster_cell(id);
                                self.pick = Some(PickState {
                                    cluster: id,
                                    target,
                                    approach: self.pose.cell,
                                    scan: VecDeque::from(PICK_SCAN),
                                    pending_turn: false,
                                    aimed: false,
                                });
                                self.enter(Phase::PickObject);
                                continue;
                            }
                            None => match self.arrival_aim(g) {
                                Some(a) => return a,
                                None => continue,
                            },
                        },
                        Nav::Step(a) => return a,
                        Nav::Replan => continue,
                        Nav::NoGoal => return self.stall(),
                    }
                }
                Phase::PickObject => {
                    let (target, needs_aim, pending) = {
                        let st = self.pick.as_ref().expect("pick state in pick phase");
                        (
                            st.target,
                            self.cfg.flags.center_alignment && !st.aimed && !st.pending_turn,
                            st.pending_turn,
                        )
                    };
                    if needs_aim {
                        match next_nav_action(self.pose, target) {
                            Action::MoveForward => {
                                self.pick.as_mut().unwrap().aimed = true;
                            }
                            turn => return turn,
                        }
                    }
                    if pending {
                        let st = self.pick.as_mut().unwrap();
                        st.pending_turn = false;
                        if let Some(turn) = st.scan.pop_front() {
                            return turn;
                        }
                    }
                    return Action::Pick { target };
                }
                Phase::FindEndReceptacle => {
                    if self.end_clusters_exist() {
                        self.enter(Phase::NavigateToEndReceptacle);
                        continue;
                    }
                    let chain = vec![self.frontier_groups()];
                    match self.navigate_chain(&chain) {
                        Nav::Arrived(g) => match self.arrival_aim(g) {
                            Some(a) => return a,
                            None => continue,
                        },
                        Nav::Step(a) => return a,
                        Nav::Replan => continue,
                        Nav::NoGoal => return self.stall(),
                    }
                }
                Phase::NavigateToEndReceptacle => {
                    if !self.end_clusters_exist() {
                        self.enter(Phase::FindEndReceptacle);
                        continue;
                    }
                    let reach2 = (self.reach as i64).pow(2);
                    let tight2 = (TIGHT_APPROACH as i64).pow(2);
                    let mut chain = Vec::new();
                    if self.cfg.flags.incremental_approach {
                        chain.push(self.end_groups(tight2));
                    }
                    chain.push(self.end_groups(reach2));
                    if self.cfg.flags.oscillation_guard {
                        chain.push(self.frontier_groups());
                    }
                    match self.navigate_chain(&chain) {
                        Nav::Arrived(g) => match g.cluster {
                            Some(id) => {
                                if self.enter_place(id) {
                                    continue;
                                }
                                // No placeable cell in reach from here.
                                self.spent.insert(g.cell);
                                continue;
                            }
                            None => match self.arrival_aim(g) {
                                Some(a) => return a,
                                None => continue,
                            },
                        },
                        Nav::Step(a) => return a,
                        Nav::Replan => continue,
                        Nav::NoGoal => return self.stall(),
                    }
                }
                Phase::PlaceObject => {
                    let st = self.place.expect("place state in place phase");
                    if self.cfg.flags.center_alignment && !st.aimed {
                        match next_nav_action(self.pose, st.target) {
                            Action::MoveForward => {
                                self.place.as_mut().unwrap().aimed = true;
                            }
                            turn => return turn,
                        }
                    }
                    return Action::Place {
                        target: st.target,
                        drop: self.cfg.flags.drop_from_height,
                    };
                }
                Phase::Done => return Action::Stop,
            }
        }
        // The machine failed to settle; halt rather than thrash.
        debug_assert!(false, "phase machine exceeded transition budget");
        self.enter(Phase::Done);
        Action::Stop
    }

    /// With the guard on, exhausting every goal ends the episode. Without
    /// it the agent has nothing better to do than turn in place.
    fn stall(&mut self) -> Action {
        if self.cfg.flags.oscillation_guard {
            self.enter(Phase::Done);
            Action::Stop
        } else {
            Action::TurnLeft30
        }
    }

    fn navigate_chain(&mut self, chain: &[Vec<GoalGroup>]) -> Nav {
        for groups in chain {
            match self.navigate(groups) {
                Nav::NoGoal => continue,
                out => return out,
            }
        }
        Nav::NoGoal
    }

    fn navigate(&mut self, groups: &[GoalGroup]) -> Nav {
        let guard_on = self.cfg.flags.oscillation_guard;
        let stale = match &self.nav {
            None => true,
            Some(p) => {
                p.version != self.map.version()
                    || (guard_on && self.guard.blacklisted(p.goal.cell, self.step_no))
            }
        };
        if stale {
            self.nav = None;
            let plan = PlanGrid::from_map(&self.map, self.cfg.inflation_radius);
            let goal = match select_goal(
                &plan,
                self.pose,
                groups,
                self.cfg.flags.prob_goal_selection,
                self.cfg.flags.center_alignment,
            ) {
                Some(g) => g,
                None => return Nav::NoGoal,
            };
            let field = distance_field(&plan, &[goal.cell]);
            self.nav = Some(NavPlan {
                goal,
                field,
                version: self.map.version(),
                stg: None,
            });
        }
        let goal = self.nav.as_ref().unwrap().goal;
        if self.pose.cell == goal.cell {
            self.nav = None;
            return Nav::Arrived(goal);
        }
        if guard_on
            && self.guard.record(self.pose, goal.cell, self.step_no) == OscillationVerdict::Stuck
        {
            self.nav = None;
            return Nav::Replan;
        }
        let (wp, stg) = {
            let p = self.nav.as_ref().unwrap();
            (
                descend(&p.field, self.pose),
                short_term_goal(&p.field, self.pose, LOOKAHEAD),
            )
        };
        let Some(wp) = wp else {
            // Separated from the goal by the plan grid; treat as unreachable.
            self.nav = None;
            return Nav::NoGoal;
        };
        self.nav.as_mut().unwrap().stg = stg;
        Nav::Step(next_nav_action(self.pose, wp))
    }

    /// At a goal cell the target still has to come into the camera cone:
    /// turn toward it, or mark the cell spent if it is already faced (then
    /// whatever was hoped for here is simply not visible).
    fn arrival_aim(&mut self, goal: SelectedGoal) -> Option<Action> {
        let target = match goal.cluster {
            Some(id) => self
                .map
                .cluster(id)
                .map(|k| Self::nearest_cell_of(&k.cells, self.pose.cell)),
            None => neighbors4(goal.cell)
                .into_iter()
                .find(|&n| self.in_bounds(n) && !self.map.explored(n)),
        };
        let Some(target) = target else {
            self.spent.insert(goal.cell);
            return None;
        };
        match next_nav_action(self.pose, target) {
            Action::MoveForward => {
                self.spent.insert(goal.cell);
                None
            }
            turn => Some(turn),
        }
    }

    fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.x < self.map.width() && c.y >= 0 && c.y < self.map.height()
    }

    fn guard_ok(&self, c: Cell) -> bool {
        if self.spent.contains(&c) {
            return false;
        }
        !(self.cfg.flags.oscillation_guard && self.guard.blacklisted(c, self.step_no))
    }

    fn object_cluster_ids(&self) -> Vec<u32> {
        self.map
            .clusters_of(self.goal.object_class)
            .filter(|k| !self.written_off.contains(&k.id))
            .map(|k| k.id)
            .collect()
    }

    fn nearest_cluster_cell(&self, id: u32) -> Cell {
        let k = self.map.cluster(id).expect("cluster exists at arrival");
        Self::nearest_cell_of(&k.cells, self.pose.cell)
    }

    fn nearest_cell_of(cells: &[Cell], from: Cell) -> Cell {
        *cells
            .iter()
            .min_by_key(|&&c| (from.dist2(c), c.y, c.x))
            .expect("cluster cells are never empty")
    }

    /// Passable cells within `r2` (squared Euclidean) of any target cell.
    fn ring_cells(&self, targets: &[Cell], r2: i64) -> Vec<Cell> {
        if targets.is_empty() {
            return Vec::new();
        }
        let r = (r2 as f64).sqrt().floor() as i32;
        let x0 = targets.iter().map(|c| c.x).min().unwrap() - r;
        let x1 = targets.iter().map(|c| c.x).max().unwrap() + r;
        let y0 = targets.iter().map(|c| c.y).min().unwrap() - r;
        let y1 = targets.iter().map(|c| c.y).max().unwrap() + r;
        let mut out = Vec::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = Cell::new(x, y);
                if !self.in_bounds(c) || !self.map.passable(c) {
                    continue;
                }
                if targets.iter().any(|&t| c.dist2(t) <= r2) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Uninspected start-class clusters with their remaining viewing spots.
    fn inspect_groups(&self) -> Vec<GoalGroup> {
        let mut out = Vec::new();
        for k in self.map.clusters_of(self.goal.start_receptacle_class) {
            if k.inspected {
                continue;
            }
            let cells: Vec<Cell> = self
                .map
                .inspection_cells(k.id)
                .into_iter()
                .filter(|&c| self.guard_ok(c))
                .collect();
            if cells.is_empty() {
                continue;
            }
            out.push(GoalGroup {
                cluster: Some(k.id),
                prob: k.prob,
                centroid: k.centroid(),
                cells,
            });
        }
        out
    }

    fn frontier_groups(&self) -> Vec<GoalGroup> {
        let cells: Vec<Cell> = self
            .map
            .frontier_cells()
            .into_iter()
            .filter(|&c| self.guard_ok(c))
            .collect();
        if cells.is_empty() {
            return Vec::new();
        }
        let n = cells.len() as f64;
        let cx = cells.iter().map(|c| c.x as f64).sum::<f64>() / n;
        let cy = cells.iter().map(|c| c.y as f64).sum::<f64>() / n;
        vec![GoalGroup {
            cluster: None,
            prob: 0.0,
            centroid: (cx, cy),
            cells,
        }]
    }

    /// Approach rings around object clusters, minus burnt approach cells.
    fn object_groups(&self, r2: i64) -> Vec<GoalGroup> {
        let mut out = Vec::new();
        for id in self.object_cluster_ids() {
            let k = self.map.cluster(id).expect("listed cluster exists");
            let prob = k.prob;
            let centroid = k.centroid();
            let cells: Vec<Cell> = self
                .ring_cells(&k.cells, r2)
                .into_iter()
                .filter(|&c| !self.approach_blacklist.contains(&(id, c)) && self.guard_ok(c))
                .collect();
            if cells.is_empty() {
                continue;
            }
            out.push(GoalGroup {
                cluster: Some(id),
                prob,
                centroid,
                cells,
            });
        }
        out
    }

    /// Permanently write off clusters whose entire approach ring is
    /// blacklisted. Returns false when no workable cluster remains.
    fn write_off_exhausted_clusters(&mut self) -> bool {
        let reach2 = (self.reach as i64).pow(2);
        let mut survivors = false;
        for id in self.object_cluster_ids() {
            let ring = {
                let k = self.map.cluster(id).expect("listed cluster exists");
                self.ring_cells(&k.cells, reach2)
            };
            let open = ring
                .iter()
                .any(|&c| !self.approach_blacklist.contains(&(id, c)));
            if open {
                survivors = true;
            } else {
                self.written_off.insert(id);
            }
        }
        survivors
    }

    /// Cells of an end cluster worth releasing over.
    fn placeable_cells(&self, k: &Cluster) -> Vec<Cell> {
        if !self.cfg.flags.edge_safe_placement {
            return k.cells.clone();
        }
        let safe: Vec<Cell> = k
            .cells
            .iter()
            .copied()
            .filter(|&c| footprint_edge_distance(&k.cells, c) >= SAFE_EDGE_DISTANCE)
            .collect();
        if safe.is_empty() {
            // Nothing safely interior; the surface fallback may skip this
            // cluster entirely, otherwise place on the rim and hope.
            k.cells.clone()
        } else {
            safe
        }
    }

    fn cluster_has_safe_interior(&self, k: &Cluster) -> bool {
        k.cells
            .iter()
            .any(|&c| footprint_edge_distance(&k.cells, c) >= SAFE_EDGE_DISTANCE)
    }

    /// Approach rings around the placeable parts of end clusters.
    fn end_groups(&self, r2: i64) -> Vec<GoalGroup> {
        let flags = &self.cfg.flags;
        let clusters: Vec<&Cluster> = self
            .map
            .clusters_of(self.goal.end_receptacle_class)
            .collect();
        let any_safe = flags.edge_safe_placement
            && clusters.iter().any(|k| self.cluster_has_safe_interior(k));
        let mut out = Vec::new();
        for k in &clusters {
            if flags.edge_safe_placement
                && flags.surface_fallback
                && any_safe
                && !self.cluster_has_safe_interior(k)
            {
                continue;
            }
            let placeable = self.placeable_cells(k);
            let cells: Vec<Cell> = self
                .ring_cells(&placeable, r2)
                .into_iter()
                .filter(|&c| self.guard_ok(c))
                .collect();
            if cells.is_empty() {
                continue;
            }
            let n = placeable.len() as f64;
            let cx = placeable.iter().map(|c| c.x as f64).sum::<f64>() / n;
            let cy = placeable.iter().map(|c| c.y as f64).sum::<f64>() / n;
            out.push(GoalGroup {
                cluster: Some(k.id),
                prob: k.prob,
                centroid: (cx, cy),
                cells,
            });
        }
        out
    }

    /// Commit to a placement cell on the given cluster. False when nothing
    /// placeable is in reach from the current pose.
    fn enter_place(&mut self, cluster_id: u32) -> bool {
        let reach2 = (self.reach as i64).pow(2);
        let (mut cands, centroid) = {
            let k = self.map.cluster(cluster_id).expect("cluster exists");
            let placeable = self.placeable_cells(k);
            let n = placeable.len() as f64;
            let cx = placeable.iter().map(|c| c.x as f64).sum::<f64>() / n;
            let cy = placeable.iter().map(|c| c.y as f64).sum::<f64>() / n;
            (placeable, (cx, cy))
        };
        cands.retain(|&c| self.pose.cell.dist2(c) <= reach2);
        if cands.is_empty() {
            return false;
        }
        let target = if self.cfg.flags.center_alignment {
            *cands
                .iter()
                .min_by(|&&a, &&b| {
                    let da = (a.x as f64 - centroid.0).powi(2) + (a.y as f64 - centroid.1).powi(2);
                    let db = (b.x as f64 - centroid.0).powi(2) + (b.y as f64 - centroid.1).powi(2);
                    da.partial_cmp(&db)
                        .unwrap()
                        .then_with(|| (a.y, a.x).cmp(&(b.y, b.x)))
                })
                .unwrap()
        } else {
            *cands
                .iter()
                .min_by_key(|&&c| (self.pose.cell.dist2(c), c.y, c.x))
                .unwrap()
        };
        self.place = Some(PlaceState {
            cluster: cluster_id,
            target,
            aimed: false,
        });
        self.enter(Phase::PlaceObject);
        true
    }
}
