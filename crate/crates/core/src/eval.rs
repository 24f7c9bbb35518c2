//! Episode runner and suite harness: executes the agent against the
//! simulator, scores stage completion, aggregates per-variant tables, and
//! fingerprints the configuration so reports are traceable to their inputs.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{Agent, AgentConfig, AgentStatus, Phase};
use crate::classes::ClassRegistry;
use crate::config::RunConfig;
use crate::grid::Cell;
use crate::perception::{simulate_detections, NoiseConfig};
use crate::rng::{substream, STREAM_PERCEPTION};
use crate::world::{
    generate_scene, observe, step, Action, Event, GenerateError, ObjectState, Pose, RobotState,
    Scene,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// The agent stopped on its own.
    Stop,
    /// The step budget ran out.
    Budget,
    /// The world rejected an action as invalid.
    Error,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Stop => "stop",
            Termination::Budget => "budget",
            Termination::Error => "error",
        })
    }
}

/// The four equal-weight milestones an episode is scored on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stages {
    /// A believed goal-object cluster covered the object's true cell.
    pub found_object: bool,
    /// The goal object was in the gripper.
    pub picked: bool,
    /// A believed end-receptacle cluster overlapped a true end instance.
    pub found_end_receptacle: bool,
    /// The episode ended with the object resting on an end-class instance.
    pub placed_correctly: bool,
}

impl Stages {
    pub fn count(self) -> u32 {
        [
            self.found_object,
            self.picked,
            self.found_end_receptacle,
            self.placed_correctly,
        ]
        .iter()
        .filter(|&&b| b)
        .count() as u32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub overall_success: bool,
    pub stages: Stages,
    /// Fraction of the four stages reached, 0.0 to 1.0.
    pub partial_success: f64,
    pub steps: u32,
    pub termination: Termination,
}

/// Counters the acceptance checks read; they do not affect scoring.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub collisions: u32,
    pub pick_failures: u32,
    pub place_fallen: u32,
    pub place_collisions: u32,
    /// Times the end-receptacle search committed to a cluster that overlaps
    /// no true end-class instance (a hallucinated target, usually on the
    /// floor).
    pub floor_goal_selections: u32,
    /// Steps spent past the pick stage while the gripper was actually empty.
    pub unheld_navigate_steps: u32,
    /// Highest count of any exact (pose, navigation goal) pair.
    pub max_pose_goal_repeat: u32,
    /// Phase changes outside the machine's documented edges.
    pub invalid_transitions: u32,
    /// Times the explored-cell count decreased between steps.
    pub explored_regressions: u32,
    pub final_phase: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub result: EpisodeResult,
    pub diagnostics: Diagnostics,
}

/// Everything left standing when an episode ends, for map dumps and
/// post-hoc inspection.
pub struct EpisodeRun {
    pub outcome: EpisodeOutcome,
    pub agent: Agent,
    pub scene: Scene,
    pub robot: RobotState,
}

/// One resolved step, handed to the observer callback after the world
/// applied the action.
pub struct StepView<'a> {
    pub step: u32,
    pub status: &'a AgentStatus,
    pub action: Action,
    /// `None` when the world rejected the action.
    pub event: Option<Event>,
    pub robot: &'a RobotState,
    pub agent: &'a Agent,
}

/// Phase edges the machine is allowed to take, self-loops aside. Everything
/// else is counted as an invalid transition.
fn edge_allowed(from: Phase, to: Phase) -> bool {
    use Phase::*;
    if from == to || to == Done {
        return true;
    }
    matches!(
        (from, to),
        (FindObject, NavigateToObject)
            | (FindObject, PickObject)
            | (NavigateToObject, PickObject)
            | (NavigateToObject, FindObject)
            | (PickObject, NavigateToObject)
            | (PickObject, FindEndReceptacle)
            | (PickObject, NavigateToEndReceptacle)
            | (PickObject, PlaceObject)
            | (FindEndReceptacle, NavigateToEndReceptacle)
            | (FindEndReceptacle, PlaceObject)
            | (NavigateToEndReceptacle, PlaceObject)
            | (NavigateToEndReceptacle, FindEndReceptacle)
    )
}

/// Success judged from final world geometry alone, independent of the
/// stage bookkeeping: the goal object rests on a surface and its cell lies
/// inside an end-class footprint.
pub fn post_hoc_success(scene: &Scene) -> bool {
    let Some(obj) = scene.goal_object() else {
        return false;
    };
    if !matches!(obj.state, ObjectState::OnReceptacle(_)) {
        return false;
    }
    scene.end_receptacles().any(|r| r.cells.contains(&obj.cell))
}

/// Drive one agent through one episode on an already built scene.
/// `perception_seed` feeds only the detector noise stream.
pub fn run_episode_on(
    mut scene: Scene,
    registry: &ClassRegistry,
    cfg: AgentConfig,
    noise: &NoiseConfig,
    budget: u32,
    perception_seed: u64,
    mut on_step: impl FnMut(StepView<'_>),
) -> EpisodeRun {
    let mut rng = substream(perception_seed, STREAM_PERCEPTION);
    let mut robot = RobotState::at_start(&scene);
    let mut agent = Agent::new(&scene, registry, cfg);

    let goal = scene.goal;
    let goal_object_id = scene.goal_object().map(|o| o.id);
    let truth_end_cells: Vec<Cell> = scene
        .end_receptacles()
        .flat_map(|r| r.cells.iter().copied())
        .collect();

    let mut stages = Stages::default();
    let mut diag = Diagnostics::default();
    let mut steps: u32 = 0;
    let mut termination = Termination::Budget;
    let mut prev_phase = Phase::FindObject;
    let mut prev_explored: usize = 0;
    let mut end_target: Option<u32> = None;
    let mut repeats: HashMap<(Pose, Cell), u32> = HashMap::new();

    while steps < budget {
        let obs = observe(&scene, robot.pose);
        let detections = simulate_detections(&scene, &obs, noise, registry, &mut rng);
        let (action, status) = agent.act(&obs, &detections);

        // Post-decision bookkeeping, before the world moves.
        if !edge_allowed(prev_phase, status.phase) {
            diag.invalid_transitions += 1;
        }
        prev_phase = status.phase;

        if let Some(obj) = scene.goal_object() {
            if obj.state != ObjectState::Held
                && agent
                    .map()
                    .clusters_of(goal.object_class)
                    .any(|k| k.cells.contains(&obj.cell))
            {
                stages.found_object = true;
            }
        }
        if agent
            .map()
            .clusters_of(goal.end_receptacle_class)
            .any(|k| k.cells.iter().any(|c| truth_end_cells.contains(c)))
        {
            stages.found_end_receptacle = true;
        }

        if matches!(
            status.phase,
            Phase::FindEndReceptacle | Phase::NavigateToEndReceptacle | Phase::PlaceObject
        ) {
            if robot.held.is_none() {
                diag.unheld_navigate_steps += 1;
            }
            if let Some(k) = status.target_cluster {
                if end_target != Some(k) {
                    end_target = Some(k);
                    let grounded = agent
                        .map()
                        .cluster(k)
                        .is_some_and(|c| c.cells.iter().any(|c| truth_end_cells.contains(c)));
                    if !grounded {
                        diag.floor_goal_selections += 1;
                    }
                }
            }
        }

        if let Some(sel) = status.selected {
            let n = repeats.entry((robot.pose, sel.cell)).or_insert(0);
            *n += 1;
            diag.max_pose_goal_repeat = diag.max_pose_goal_repeat.max(*n);
        }

        let explored = agent.map().explored_count();
        if explored < prev_explored {
            diag.explored_regressions += 1;
        }
        prev_explored = explored;

        match step(&mut scene, &mut robot, action) {
            Ok(event) => {
                steps += 1;
                agent.feedback(event);
                match event {
                    Event::Collision => diag.collisions += 1,
                    Event::PickFailure(_) => diag.pick_failures += 1,
                    Event::PlaceFallen => diag.place_fallen += 1,
                    Event::PlaceCollision => diag.place_collisions += 1,
                    _ => {}
                }
                if goal_object_id.is_some() && robot.held == goal_object_id {
                    stages.picked = true;
                }
                on_step(StepView {
                    step: steps - 1,
                    status: &status,
                    action,
                    event: Some(event),
                    robot: &robot,
                    agent: &agent,
                });
                if action == Action::Stop {
                    termination = Termination::Stop;
                    break;
                }
            }
            Err(_) => {
                steps += 1;
                termination = Termination::Error;
                on_step(StepView {
                    step: steps - 1,
                    status: &status,
                    action,
                    event: None,
                    robot: &robot,
                    agent: &agent,
                });
                break;
            }
        }
    }

    // Final-state scoring and stage latching.
    let placed = scene.goal_object().is_some_and(|obj| match obj.state {
        ObjectState::OnReceptacle(rid) => scene
            .receptacles
            .iter()
            .any(|r| r.id == rid && r.class == goal.end_receptacle_class),
        _ => false,
    });
    stages.placed_correctly = placed;
    if placed {
        stages.picked = true;
        stages.found_end_receptacle = true;
    }
    if stages.picked {
        stages.found_object = true;
    }
    let overall = stages.placed_correctly;
    debug_assert_eq!(
        overall,
        post_hoc_success(&scene),
        "state-based and geometric success disagree"
    );

    diag.final_phase = agent.phase().name().to_string();
    let result = EpisodeResult {
        overall_success: overall,
        partial_success: stages.count() as f64 / 4.0,
        stages,
        steps,
        termination,
    };
    EpisodeRun {
        outcome: EpisodeOutcome {
            result,
            diagnostics: diag,
        },
        agent,
        scene,
        robot,
    }
}

/// Generate the scene for `seed` and run one episode on it. The same seed
/// with the same configuration always returns the same outcome.
pub fn run_episode(
    seed: u64,
    run: &RunConfig,
    registry: &ClassRegistry,
    cfg: AgentConfig,
) -> Result<EpisodeOutcome, GenerateError> {
    let scene = generate_scene(seed, &run.scene, registry)?;
    Ok(run_episode_on(scene, registry, cfg, &run.noise, run.budget, seed, |_| {}).outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub name: String,
    pub episodes: u32,
    pub overall_success_pct: f64,
    pub partial_success_pct: f64,
    pub mean_steps: f64,
}

impl VariantReport {
    pub fn from_outcomes(name: String, outcomes: &[EpisodeOutcome]) -> Self {
        let n = outcomes.len().max(1) as f64;
        let overall = outcomes.iter().filter(|o| o.result.overall_success).count() as f64;
        let partial: f64 = outcomes.iter().map(|o| o.result.partial_success).sum();
        let steps: f64 = outcomes.iter().map(|o| o.result.steps as f64).sum();
        VariantReport {
            name,
            episodes: outcomes.len() as u32,
            overall_success_pct: 100.0 * overall / n,
            partial_success_pct: 100.0 * partial / n,
            mean_steps: steps / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub variant: String,
    pub seed: u64,
    pub outcome: EpisodeOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    /// Hash of the canonical run configuration plus the variant list.
    pub fingerprint: String,
    pub variants: Vec<VariantReport>,
    pub episodes: Vec<EpisodeRow>,
}

/// Hash of the canonicalized configuration text and every variant's agent
/// configuration; printed in report headers so results are traceable.
pub fn fingerprint(run: &RunConfig, variants: &[(String, AgentConfig)]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(run.canonical_text().as_bytes());
    for (name, cfg) in variants {
        hasher.update(name.as_bytes());
        hasher.update(b"\n");
        hasher.update(serde_json::to_string(cfg).expect("config serializes").as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(12);
    for b in digest.iter().take(6) {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Run every (variant, seed) pair. Episodes run in parallel; results are
/// merged in seed order so the report does not depend on scheduling.
pub fn run_suite(
    seeds: &[u64],
    run: &RunConfig,
    registry: &ClassRegistry,
    variants: &[(String, AgentConfig)],
) -> Result<SuiteReport, GenerateError> {
    let fingerprint = fingerprint(run, variants);
    let mut reports = Vec::with_capacity(variants.len());
    let mut episodes = Vec::with_capacity(variants.len() * seeds.len());
    for (name, cfg) in variants {
        let outcomes: Result<Vec<EpisodeOutcome>, GenerateError> = seeds
            .par_iter()
            .map(|&seed| run_episode(seed, run, registry, *cfg))
            .collect();
        let outcomes = outcomes?;
        reports.push(VariantReport::from_outcomes(name.clone(), &outcomes));
        episodes.extend(
            seeds
                .iter()
                .zip(outcomes)
                .map(|(&seed, outcome)| EpisodeRow { variant: name.clone(), seed, outcome }),
        );
    }
    Ok(SuiteReport { fingerprint, variants: reports, episodes })
}

impl SuiteReport {
    /// Per-variant summary as CSV. The fingerprint rides in a comment line.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# config {}\n", self.fingerprint);
        out.push_str("variant,episodes,overall_success_pct,partial_success_pct,mean_steps\n");
        for v in &self.variants {
            out.push_str(&format!(
                "{},{},{:.2},{:.2},{:.2}\n",
                v.name, v.episodes, v.overall_success_pct, v.partial_success_pct, v.mean_steps
            ));
        }
        out
    }

    /// Per-variant summary as an aligned text table.
    pub fn to_text(&self) -> String {
        let name_w = self
            .variants
            .iter()
            .map(|v| v.name.len())
            .chain(["variant".len()])
            .max()
            .unwrap();
        let mut out = format!("# config {}\n", self.fingerprint);
        out.push_str("# partial success = mean fraction of the four stages reached\n");
        out.push_str(&format!(
            "{:<name_w$}  {:>8}  {:>8}  {:>8}  {:>10}\n",
            "variant", "episodes", "overall%", "partial%", "mean steps"
        ));
        for v in &self.variants {
            out.push_str(&format!(
                "{:<name_w$}  {:>8}  {:>8.2}  {:>8.2}  {:>10.2}\n",
                v.name, v.episodes, v.overall_success_pct, v.partial_success_pct, v.mean_steps
            ));
        }
        out
    }

    /// One line per episode, for downstream analysis.
    pub fn episodes_csv(&self) -> String {
        let mut out = format!("# config {}\n", self.fingerprint);
        out.push_str(
            "variant,seed,overall,partial,steps,termination,found_object,picked,found_end,placed\n",
        );
        for row in &self.episodes {
            let r = &row.outcome.result;
            out.push_str(&format!(
                "{},{},{},{:.2},{},{},{},{},{},{}\n",
                row.variant,
                row.seed,
                r.overall_success,
                r.partial_success,
                r.steps,
                r.termination,
                r.stages.found_object,
                r.stages.picked,
                r.stages.found_end_receptacle,
                r.stages.placed_correctly,
            ));
        }
        out
    }
}
