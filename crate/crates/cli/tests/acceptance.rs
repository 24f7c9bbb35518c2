//! Release gate for the whole workspace. Every test prints one
//! `ACCEPTANCE <n> <name>: PASS` (or `: FAIL`) line so the test output reads
//! as a checklist. The checks are end-to-end: they drive the real binary, the
//! public library API, and hand-built scenes whose outcomes were derived on
//! paper before the assertions were written.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ovmm_core::mapping::{Fusion, SemanticMap};
use ovmm_core::perception::{
    filter_detections, simulate_detections, ThresholdTable, ThresholdValues,
};
use ovmm_core::planning::{distance_field, PlanGrid, UNREACHED};
use ovmm_core::world::VisibleCell;
use ovmm_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Run `body`, print the checklist line, and re-raise any failure so the
/// test still fails loudly.
fn gate(tag: &str, body: impl FnOnce()) {
    match panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("ACCEPTANCE {tag}: PASS"),
        Err(cause) => {
            println!("ACCEPTANCE {tag}: FAIL");
            panic::resume_unwind(cause);
        }
    }
}

fn flags_with(base: AblationFlags, tweak: impl FnOnce(&mut AblationFlags)) -> AgentConfig {
    let mut flags = base;
    tweak(&mut flags);
    let mut cfg = AgentConfig::baseline();
    cfg.flags = flags;
    cfg
}

fn without(flag: &str) -> AgentConfig {
    let mut cfg = AgentConfig::uniteam();
    cfg.flags.set(flag, false).expect("known flag name");
    cfg
}

// ---------------------------------------------------------------------------
// 1. Re-running the CLI with identical inputs reproduces every output byte.

fn dir_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("read out dir") {
        let entry = entry.expect("dir entry");
        let name = entry.file_name().into_string().expect("utf8 file name");
        out.insert(name, fs::read(entry.path()).expect("read output file"));
    }
    out
}

#[test]
fn repeat_cli_runs_are_byte_identical() {
    gate("1 repeat-run determinism", || {
        let bin = env!("CARGO_BIN_EXE_ovmm");
        let base = std::env::temp_dir().join(format!("ovmm-accept-{}", std::process::id()));
        let _ = fs::remove_dir_all(&base);
        let mut legs = Vec::new();
        for leg in ["a", "b"] {
            let out = base.join(leg);
            fs::create_dir_all(&out).expect("create out dir");
            let started = Instant::now();
            let cmd = Command::new(bin)
                .args(["run", "--seeds", "0..49", "--trace", "--out"])
                .arg(&out)
                .output()
                .expect("spawn ovmm");
            let elapsed = started.elapsed();
            assert!(
                cmd.status.success(),
                "run failed: {}",
                String::from_utf8_lossy(&cmd.stderr)
            );
            assert!(elapsed < Duration::from_secs(60), "run took {elapsed:?}");
            legs.push((dir_tree(&out), cmd.stdout));
        }
        let (first, second) = (&legs[0], &legs[1]);
        assert_eq!(first.1, second.1, "stdout differs between identical runs");
        assert_eq!(
            first.0.keys().collect::<Vec<_>>(),
            second.0.keys().collect::<Vec<_>>(),
            "output file sets differ"
        );
        for (name, bytes) in &first.0 {
            assert_eq!(bytes, &second.0[name], "{name} differs between runs");
        }
        assert!(
            first.0.keys().any(|k| k.starts_with("trace-")),
            "expected trace files in the output"
        );
        let _ = fs::remove_dir_all(&base);
    });
}

// ---------------------------------------------------------------------------
// 2. Planner fields and frontier extraction match from-scratch references on
//    randomized partially-explored maps.

/// Reference field: dilate believed obstacles by hand, then relax every edge
/// until nothing improves. Shares no code with the planner.
fn bellman_field(map: &SemanticMap, inflation: i32, sources: &[Cell]) -> Grid<f64> {
    let (w, h) = (map.width(), map.height());
    let mut blocked = Grid::new(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let c = Cell::new(x, y);
            let mut b = !map.passable(c);
            for dy in -inflation..=inflation {
                for dx in -inflation..=inflation {
                    if map.obstacle(c.offset(dx, dy)) {
                        b = true;
                    }
                }
            }
            blocked.set(c, b);
        }
    }
    let mut dist = Grid::new(w, h, UNREACHED);
    for &s in sources {
        if dist.in_bounds(s) {
            dist.set(s, 0.0);
        }
    }
    let edges: [(i32, i32, f64); 8] = [
        (1, 0, 1.0),
        (-1, 0, 1.0),
        (0, 1, 1.0),
        (0, -1, 1.0),
        (1, 1, SQRT_2),
        (1, -1, SQRT_2),
        (-1, 1, SQRT_2),
        (-1, -1, SQRT_2),
    ];
    loop {
        let mut improved = false;
        for y in 0..h {
            for x in 0..w {
                let c = Cell::new(x, y);
                let d = *dist.get(c);
                if d == UNREACHED {
                    continue;
                }
                for (dx, dy, step_cost) in edges {
                    let n = c.offset(dx, dy);
                    if !dist.in_bounds(n) || *blocked.get(n) {
                        continue;
                    }
                    if d + step_cost < *dist.get(n) - 1e-15 {
                        dist.set(n, d + step_cost);
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            return dist;
        }
    }
}

#[test]
fn planner_field_and_frontier_match_reference_implementations() {
    gate("2 field and frontier oracles", || {
        let registry = ClassRegistry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0xF1E1D);
        for round in 0..100 {
            let mut map = SemanticMap::new(32, 32, registry.len(), Fusion::Max);
            let mut cells = Vec::new();
            for y in 0..32 {
                for x in 0..32 {
                    if rng.gen::<f64>() < 0.85 {
                        let kind = if rng.gen::<f64>() < 0.22 {
                            CellKind::Wall
                        } else {
                            CellKind::Free
                        };
                        cells.push(VisibleCell {
                            cell: Cell::new(x, y),
                            kind,
                            distance: 0.0,
                            class: None,
                            surface_height: 0.0,
                            object: None,
                        });
                    }
                }
            }
            map.integrate(&Observation { pose: Pose::new(Cell::new(0, 0), 0), cells }, &[]);

            // Frontier cells, brute-forced from the public predicates: a
            // known-free cell with at least one in-bounds unexplored
            // 4-neighbor.
            let mut want: Vec<Cell> = Vec::new();
            for y in 0..32 {
                for x in 0..32 {
                    let c = Cell::new(x, y);
                    let touches_unknown = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(
                        |&(dx, dy)| {
                            let n = c.offset(dx, dy);
                            n.x >= 0 && n.x < 32 && n.y >= 0 && n.y < 32 && !map.explored(n)
                        },
                    );
                    if map.known_free(c) && touches_unknown {
                        want.push(c);
                    }
                }
            }
            let mut got = map.frontier_cells();
            got.sort_by_key(|c| (c.y, c.x));
            want.sort_by_key(|c| (c.y, c.x));
            assert_eq!(got, want, "frontier mismatch on round {round}");

            for inflation in 0..=1 {
                let plan = PlanGrid::from_map(&map, inflation);
                let sources: Vec<Cell> = (0..3)
                    .map(|_| Cell::new(rng.gen_range(0..32), rng.gen_range(0..32)))
                    .collect();
                let got = distance_field(&plan, &sources);
                let want = bellman_field(&map, inflation, &sources);
                for y in 0..32 {
                    for x in 0..32 {
                        let c = Cell::new(x, y);
                        let (g, w) = (*got.get(c), *want.get(c));
                        if g == UNREACHED || w == UNREACHED {
                            assert_eq!(
                                g, w,
                                "reachability mismatch at {c:?}, round {round}, inflation {inflation}"
                            );
                        } else {
                            assert!(
                                (g - w).abs() <= 1e-9,
                                "cost mismatch at {c:?}: {g} vs {w}, round {round}"
                            );
                        }
                    }
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 3 and 5 share one 200-seed suite under the default generated-scene config.

fn shared_default_suite() -> &'static SuiteReport {
    static SUITE: OnceLock<SuiteReport> = OnceLock::new();
    SUITE.get_or_init(|| {
        let registry = ClassRegistry::default();
        let seeds: Vec<u64> = (0..200).collect();
        let variants = vec![
            ("uniteam".to_string(), AgentConfig::uniteam()),
            ("baseline".to_string(), AgentConfig::baseline()),
        ];
        run_suite(&seeds, &RunConfig::default(), &registry, &variants)
            .expect("default config generates every seed")
    })
}

#[test]
fn stacked_improvements_beat_the_baseline() {
    gate("3 improvements beat baseline", || {
        let suite = shared_default_suite();
        let by = |name: &str| {
            suite
                .variants
                .iter()
                .find(|v| v.name == name)
                .unwrap_or_else(|| panic!("variant {name} missing"))
        };
        let (full, base) = (by("uniteam"), by("baseline"));
        assert!(
            full.partial_success_pct >= base.partial_success_pct + 10.0,
            "partial success {:.2}% vs baseline {:.2}%: need at least a 10-point lead",
            full.partial_success_pct,
            base.partial_success_pct
        );
        assert!(
            full.overall_success_pct >= base.overall_success_pct + 5.0,
            "overall success {:.2}% vs baseline {:.2}%: need at least a 5-point lead",
            full.overall_success_pct,
            base.overall_success_pct
        );
    });
}

#[test]
fn structural_invariants_hold_on_every_episode() {
    gate("5 structural invariants", || {
        let suite = shared_default_suite();
        assert_eq!(suite.episodes.len(), 400);
        for row in &suite.episodes {
            let d = &row.outcome.diagnostics;
            assert_eq!(
                d.invalid_transitions, 0,
                "variant {} seed {} left the phase graph",
                row.variant, row.seed
            );
            assert_eq!(
                d.explored_regressions, 0,
                "variant {} seed {} lost explored cells",
                row.variant, row.seed
            );
            if row.variant == "uniteam" {
                // With pick verification on, the agent may never navigate
                // toward the destination while the gripper is empty.
                assert_eq!(
                    d.unheld_navigate_steps, 0,
                    "seed {} navigated unheld despite verification",
                    row.seed
                );
            }
        }

        // The hand-built walkthrough scene obeys the same invariants.
        let registry = ClassRegistry::default();
        let run = run_episode_on(
            golden_scene(&registry),
            &registry,
            AgentConfig::uniteam(),
            &NoiseConfig::noiseless(),
            200,
            7,
            |_| {},
        );
        let d = &run.outcome.diagnostics;
        assert_eq!(d.invalid_transitions, 0);
        assert_eq!(d.explored_regressions, 0);
        assert_eq!(d.unheld_navigate_steps, 0);
    });
}

// ---------------------------------------------------------------------------
// 4. Five ablation suites, each isolating one flag on scenes built to expose
//    exactly the failure that flag prevents.

#[test]
fn height_gate_stops_floor_phantom_goals() {
    gate("4 height-filter suite", || {
        // Hot floor false positives; the end class has no confusion partner
        // in play because distractor receptacles are disabled.
        let scene_cfg = SceneConfig {
            width: 32,
            height: 32,
            rooms_min: 2,
            rooms_max: 3,
            doorway_min: 3,
            doorway_max: 3,
            end_instances_min: 2,
            distractor_receptacles: 0,
            floor_clutter: 2,
            goal_object: Some("cup".into()),
            start_receptacle: Some("chair".into()),
            end_receptacle: Some("counter".into()),
            ..SceneConfig::default()
        };
        let noise = NoiseConfig {
            p_floor_fp: 0.25,
            conf_fp: (0.05, 0.80),
            ..NoiseConfig::default()
        };
        let registry = ClassRegistry::default();
        let (mut off_selections, mut on_selections) = (0, 0);
        for seed in 1000..1030u64 {
            let scene = generate_scene(seed, &scene_cfg, &registry).expect("scene");
            let off = run_episode_on(
                scene.clone(),
                &registry,
                without("height_filter"),
                &noise,
                600,
                seed,
                |_| {},
            );
            let on = run_episode_on(
                scene,
                &registry,
                AgentConfig::uniteam(),
                &noise,
                600,
                seed,
                |_| {},
            );
            off_selections += off.outcome.diagnostics.floor_goal_selections;
            on_selections += on.outcome.diagnostics.floor_goal_selections;
        }
        assert!(
            off_selections >= 1,
            "height filter off never chased a floor phantom"
        );
        assert_eq!(
            on_selections, 0,
            "height filter on still chased a floor phantom"
        );
    });
}

#[test]
fn pick_verification_stops_empty_handed_navigation() {
    gate("4 pick-verify suite", || {
        // Cluttered rooms with a fixed goal triple; some approach cells end
        // up occluded, so a blind pick plus sweep can exhaust without the
        // object. Both arms keep the retry sweep so the only difference is
        // whether failure is noticed.
        let scene_cfg = SceneConfig {
            width: 32,
            height: 32,
            rooms_min: 2,
            rooms_max: 3,
            doorway_min: 3,
            doorway_max: 3,
            end_instances_min: 2,
            distractor_receptacles: 4,
            floor_clutter: 3,
            goal_object: Some("cup".into()),
            start_receptacle: Some("chair".into()),
            end_receptacle: Some("counter".into()),
            ..SceneConfig::default()
        };
        let noise = NoiseConfig::noiseless();
        let registry = ClassRegistry::default();
        let retry = flags_with(AblationFlags::baseline(), |f| f.pick_retry = true);
        let retry_verify = flags_with(AblationFlags::baseline(), |f| {
            f.pick_retry = true;
            f.pick_verify = true;
        });
        let (mut off_episodes, mut on_steps) = (0, 0u32);
        for seed in 2000..2030u64 {
            let scene = generate_scene(seed, &scene_cfg, &registry).expect("scene");
            let mut off_unheld = false;
            run_episode_on(scene.clone(), &registry, retry, &noise, 600, seed, |v: StepView| {
                if v.status.phase == Phase::NavigateToEndReceptacle && v.robot.held.is_none() {
                    off_unheld = true;
                }
            });
            if off_unheld {
                off_episodes += 1;
            }
            let on = run_episode_on(scene, &registry, retry_verify, &noise, 600, seed, |_| {});
            on_steps += on.outcome.diagnostics.unheld_navigate_steps;
        }
        assert!(
            off_episodes >= 1,
            "no episode ever navigated to the destination empty-handed"
        );
        assert_eq!(on_steps, 0, "verification arm navigated unheld");
    });
}

/// Straight corridor: chair with the cup on the west, a 3x3 counter against
/// the east wall. The approach ring around the full counter footprint touches
/// it first at a rim-adjacent cell, so placing on the nearest in-reach cell
/// drops the object on the rim and it falls; the safe-interior rule instead
/// routes one cell further and targets the counter center.
fn edge_scene(registry: &ClassRegistry, width: i32, height: i32) -> Scene {
    let cup = registry.lookup("cup").unwrap();
    let chair = registry.lookup("chair").unwrap();
    let counter = registry.lookup("counter").unwrap();
    let mut b = SceneBuilder::new(width, height);
    b.wall_border();
    let chair_id = b.add_receptacle(
        registry,
        chair,
        vec![Cell::new(4, 2), Cell::new(5, 2), Cell::new(4, 3), Cell::new(5, 3)],
    );
    let cx = width - 4;
    let mut counter_cells = Vec::new();
    for y in 2..=4 {
        for x in cx..cx + 3 {
            counter_cells.push(Cell::new(x, y));
        }
    }
    b.add_receptacle(registry, counter, counter_cells);
    b.add_object(registry, cup, ObjectState::OnReceptacle(chair_id), Cell::new(4, 2));
    b.start(Pose::new(Cell::new(1, 2), 0));
    b.goal(GoalSpec {
        object_class: cup,
        start_receptacle_class: chair,
        end_receptacle_class: counter,
    });
    b.sensors(20, 90.0, 2);
    b.build(registry).expect("edge scene is valid")
}

#[test]
fn edge_margin_stops_rim_drops() {
    gate("4 edge-safety suite", || {
        let registry = ClassRegistry::default();
        let noise = NoiseConfig::noiseless();
        let safe = flags_with(AblationFlags::baseline(), |f| f.edge_safe_placement = true);
        let naive = AgentConfig::baseline();
        let (mut off_fallen, mut on_fallen, mut scenes) = (0, 0, 0);
        for width in 13..=18 {
            for height in 9..=13 {
                let off = run_episode_on(
                    edge_scene(&registry, width, height),
                    &registry,
                    naive,
                    &noise,
                    400,
                    7,
                    |_| {},
                );
                let on = run_episode_on(
                    edge_scene(&registry, width, height),
                    &registry,
                    safe,
                    &noise,
                    400,
                    7,
                    |_| {},
                );
                off_fallen += off.outcome.diagnostics.place_fallen;
                on_fallen += on.outcome.diagnostics.place_fallen;
                scenes += 1;
            }
        }
        assert_eq!(scenes, 30);
        assert!(off_fallen >= 1, "rim placement never dropped the object");
        assert_eq!(on_fallen, 0, "safe-interior placement still dropped the object");
    });
}

/// Two rooms split by a wall with a two-cell gap. The robot can see the
/// counter through the gap, but a two-cell doorway is too narrow once
/// obstacles are inflated, so every approach cell on the far side is
/// unreachable and the destination-navigation phase has no goal to commit to.
fn corridor_scene(registry: &ClassRegistry, width: i32, height: i32) -> Scene {
    let cup = registry.lookup("cup").unwrap();
    let chair = registry.lookup("chair").unwrap();
    let counter = registry.lookup("counter").unwrap();
    let mut b = SceneBuilder::new(width, height);
    b.wall_border();
    for y in 1..height - 1 {
        if y != 4 && y != 5 {
            b.wall(Cell::new(6, y));
        }
    }
    let chair_id = b.add_receptacle(
        registry,
        chair,
        vec![Cell::new(2, 5), Cell::new(3, 5), Cell::new(2, 6), Cell::new(3, 6)],
    );
    let mut counter_cells = Vec::new();
    for y in 3..=5 {
        for x in 8..=10 {
            counter_cells.push(Cell::new(x, y));
        }
    }
    b.add_receptacle(registry, counter, counter_cells);
    b.add_object(registry, cup, ObjectState::OnReceptacle(chair_id), Cell::new(3, 5));
    b.start(Pose::new(Cell::new(2, 3), 270));
    b.goal(GoalSpec {
        object_class: cup,
        start_receptacle_class: chair,
        end_receptacle_class: counter,
    });
    b.sensors(20, 90.0, 2);
    b.build(registry).expect("corridor scene is valid")
}

#[test]
fn oscillation_guard_converts_spinning_into_giving_up() {
    gate("4 oscillation-guard suite", || {
        let registry = ClassRegistry::default();
        let noise = NoiseConfig::noiseless();
        let guarded = AgentConfig::uniteam();
        let unguarded = without("oscillation_guard");
        let (mut off_nav_budget, mut off_budget, mut on_budget, mut scenes) = (0, 0, 0, 0);
        let mut on_repeat_max = 0;
        for width in 13..=15 {
            for height in 9..=18 {
                let off = run_episode_on(
                    corridor_scene(&registry, width, height),
                    &registry,
                    unguarded,
                    &noise,
                    300,
                    7,
                    |_| {},
                );
                let on = run_episode_on(
                    corridor_scene(&registry, width, height),
                    &registry,
                    guarded,
                    &noise,
                    300,
                    7,
                    |_| {},
                );
                if off.outcome.result.termination == Termination::Budget {
                    off_budget += 1;
                    if off.outcome.diagnostics.final_phase == "navigate_to_end_receptacle" {
                        off_nav_budget += 1;
                    }
                }
                if on.outcome.result.termination == Termination::Budget {
                    on_budget += 1;
                }
                on_repeat_max =
                    on_repeat_max.max(on.outcome.diagnostics.max_pose_goal_repeat);
                scenes += 1;
            }
        }
        assert_eq!(scenes, 30);
        assert!(
            off_nav_budget >= 1,
            "unguarded arm never burned its budget in destination navigation"
        );
        assert!(
            on_budget < off_budget,
            "guarded arm hit budget as often as the unguarded one ({on_budget} vs {off_budget})"
        );
        assert!(
            on_repeat_max <= 4,
            "guarded arm repeated a pose-goal pair {on_repeat_max} times"
        );
    });
}

#[test]
fn releasing_from_height_stops_large_object_jams() {
    gate("4 drop-mode suite", || {
        // Large goal object; lowering it onto the surface jams, releasing
        // from above does not.
        let scene_cfg = SceneConfig {
            width: 32,
            height: 32,
            rooms_min: 2,
            rooms_max: 3,
            doorway_min: 3,
            doorway_max: 3,
            end_instances_min: 2,
            distractor_receptacles: 3,
            floor_clutter: 2,
            goal_object: Some("backpack".into()),
            start_receptacle: Some("chair".into()),
            end_receptacle: Some("counter".into()),
            ..SceneConfig::default()
        };
        let noise = NoiseConfig::noiseless();
        let registry = ClassRegistry::default();
        let (mut off_collisions, mut on_collisions) = (0, 0);
        for seed in 4000..4030u64 {
            let scene = generate_scene(seed, &scene_cfg, &registry).expect("scene");
            let off = run_episode_on(
                scene.clone(),
                &registry,
                without("drop_from_height"),
                &noise,
                600,
                seed,
                |_| {},
            );
            let on = run_episode_on(
                scene,
                &registry,
                AgentConfig::uniteam(),
                &noise,
                600,
                seed,
                |_| {},
            );
            off_collisions += off.outcome.diagnostics.place_collisions;
            on_collisions += on.outcome.diagnostics.place_collisions;
        }
        assert!(off_collisions >= 1, "lowering a large object never jammed");
        assert_eq!(on_collisions, 0, "release from height still jammed");
    });
}

// ---------------------------------------------------------------------------
// 6. A hand-built 12x12 scene whose every step was derived on paper.
//
// Layout (x east, y south, border walls all around):
//
//   - wall column x=6 from y=1 to y=6 and a stub at (6,10), leaving a
//     three-cell doorway at (6,7)..(6,9); only the middle lane (6,8) stays
//     passable once obstacles are inflated by one cell,
//   - chair (start receptacle) at (1,6) (2,6) (1,7) (2,7), cup on (2,6),
//   - counter (destination) filling x=7..10, y=1..4 in the east room,
//   - robot starts at (2,3) facing south (270), sensors: range 20, 90-degree
//     cone, reach 2.
//
// Derived walkthrough, frozen below:
//
//   steps 0-11   initial sweep: twelve 30-degree left turns back to 270.
//                The cup at (2,6) is three cells south and is mapped during
//                the sweep; the counter is walled off and stays unknown.
//   steps 12-13  two forward moves, (2,3) -> (2,4) -> (2,5). The approach
//                ring candidates at distance-squared <= 4 tie on centroid
//                distance ((2,5) and (3,6) both 1.0 from the chair centroid
//                after weighting) and the field cost 2.0 of (2,5) beats the
//                2*sqrt(2) of (3,6).
//   step 14      pick. The aim check passes without turning: the cup sits
//                dead south and the heading is already 270, so the pick is
//                issued the same step and succeeds.
//   steps 15-30  destination search. No counter is known yet, so the agent
//                chases frontier cells through the doorway: four more left
//                turns to face the door line, then moves with turn
//                corrections (3,4) (4,5) (4,6) (4,7) (5,8), eleven turns in
//                total. Standing at (5,8) facing east, the ray to counter
//                cell (9,4) runs exactly along the 45-degree diagonal through
//                the free cell centers (6,7) (7,6) (8,5): corner contacts do
//                not occlude, the bearing sits on the inclusive cone edge,
//                and the first counter cell lands in the map.
//   steps 31-38  destination approach through the doorway lane (6,8), then
//                (7,8) (8,7) (9,6) and arrival at (9,5) facing north. The
//                selected approach cell is (9,5): ring cells east of it,
//                such as (10,5), are only adjacent to other ring cells and
//                blocked cells, so the cost wave can never enter them.
//   step 39      place. At arrival the belief holds 15 of 16 counter cells,
//                (7,4) being out of the cone on the final observation. The
//                cells whose whole believed neighborhood stays on the
//                counter are (8,2) (9,2) (9,3); within reach-squared 9 of
//                (9,5) that leaves (9,3) at cost 4 and (9,2) at cost 9, and
//                the centroid rule picks (9,2) (0.22 vs 0.56 squared
//                centroid distance). The bearing is due north, equal to the
//                arrival heading, so the release happens the same step; the
//                true footprint margin of (9,2) is 2, clear of the rim.
//   step 40      stop, episode complete.
//
// Total: 41 steps, all six phases in order, no phase revisited.

fn golden_scene(registry: &ClassRegistry) -> Scene {
    let cup = registry.lookup("cup").unwrap();
    let chair = registry.lookup("chair").unwrap();
    let counter = registry.lookup("counter").unwrap();
    let mut b = SceneBuilder::new(12, 12);
    b.wall_border();
    for y in 1..=6 {
        b.wall(Cell::new(6, y));
    }
    b.wall(Cell::new(6, 10));
    let chair_id = b.add_receptacle(
        registry,
        chair,
        vec![Cell::new(1, 6), Cell::new(2, 6), Cell::new(1, 7), Cell::new(2, 7)],
    );
    let mut counter_cells = Vec::new();
    for y in 1..=4 {
        for x in 7..=10 {
            counter_cells.push(Cell::new(x, y));
        }
    }
    b.add_receptacle(registry, counter, counter_cells);
    b.add_object(registry, cup, ObjectState::OnReceptacle(chair_id), Cell::new(2, 6));
    b.start(Pose::new(Cell::new(2, 3), 270));
    b.goal(GoalSpec {
        object_class: cup,
        start_receptacle_class: chair,
        end_receptacle_class: counter,
    });
    b.sensors(20, 90.0, 3);
    b.build(registry).expect("walkthrough scene is valid")
}

#[test]
fn hand_derived_walkthrough_runs_step_for_step() {
    gate("6 golden walkthrough", || {
        let registry = ClassRegistry::default();
        let mut log: Vec<(Phase, Action, Option<Event>)> = Vec::new();
        let run = run_episode_on(
            golden_scene(&registry),
            &registry,
            AgentConfig::uniteam(),
            &NoiseConfig::noiseless(),
            200,
            7,
            |v: StepView| log.push((v.status.phase, v.action, v.event)),
        );
        let res = &run.outcome.result;
        assert_eq!(res.steps, 41, "walkthrough step count drifted");
        assert_eq!(res.termination, Termination::Stop);
        assert!(res.overall_success);
        assert_eq!(res.partial_success, 1.0);
        assert!(res.stages.found_object);
        assert!(res.stages.picked);
        assert!(res.stages.found_end_receptacle);
        assert!(res.stages.placed_correctly);

        assert_eq!(log.len(), 41);
        for (i, entry) in log.iter().enumerate().take(12) {
            assert_eq!(entry.0, Phase::FindObject, "step {i}");
            assert_eq!(entry.1, Action::TurnLeft30, "step {i}");
        }
        for i in 12..=13 {
            assert_eq!(log[i].0, Phase::NavigateToObject, "step {i}");
            assert_eq!(log[i].1, Action::MoveForward, "step {i}");
        }
        assert_eq!(log[14].0, Phase::PickObject);
        assert_eq!(log[14].1, Action::Pick { target: Cell::new(2, 6) });
        assert_eq!(log[14].2, Some(Event::PickSuccess));
        for i in 15..=30 {
            assert_eq!(log[i].0, Phase::FindEndReceptacle, "step {i}");
        }
        for i in 31..=38 {
            assert_eq!(log[i].0, Phase::NavigateToEndReceptacle, "step {i}");
        }
        assert_eq!(log[39].0, Phase::PlaceObject);
        assert_eq!(log[39].1, Action::Place { target: Cell::new(9, 2), drop: true });
        assert_eq!(log[39].2, Some(Event::PlaceSuccess));
        assert_eq!(log[40].0, Phase::Done);
        assert_eq!(log[40].1, Action::Stop);

        // Leg shapes: the search leg is five moves and eleven turns, the
        // approach leg five moves and three turns.
        let count = |range: std::ops::RangeInclusive<usize>, action: Action| {
            log[*range.start()..=*range.end()].iter().filter(|e| e.1 == action).count()
        };
        assert_eq!(count(15..=30, Action::MoveForward), 5);
        assert_eq!(count(15..=30, Action::TurnLeft30) + count(15..=30, Action::TurnRight30), 11);
        assert_eq!(count(31..=38, Action::MoveForward), 5);
        assert_eq!(count(31..=38, Action::TurnLeft30), 3);
    });
}

// ---------------------------------------------------------------------------
// 7. Detector noise rates and the detection filter, checked against the
//    configured probabilities and a from-scratch restatement of the rule.

#[test]
fn detector_rates_and_filter_rule_hold() {
    gate("7 detector rates and filter rule", || {
        let registry = ClassRegistry::default();
        let scene = golden_scene(&registry);
        let obs = observe(&scene, scene.start_pose);
        let chair = registry.lookup("chair").unwrap();

        let receptacle_cells: Vec<Cell> = obs
            .cells
            .iter()
            .filter(|c| matches!(c.kind, CellKind::Receptacle(_)))
            .map(|c| c.cell)
            .collect();
        let free_count = obs.cells.iter().filter(|c| c.kind == CellKind::Free).count();
        assert!(!receptacle_cells.is_empty() && free_count > 0);

        let noise = NoiseConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE55);
        let frames = 10_000usize;
        let (mut hits, mut confusions, mut fps) = (0usize, 0usize, 0usize);
        for _ in 0..frames {
            for d in simulate_detections(&scene, &obs, &noise, &registry, &mut rng) {
                if registry.spec(d.class).kind != ClassKind::Receptacle {
                    continue; // the cup's own detections are not under test
                }
                if receptacle_cells.contains(&d.cell) {
                    hits += 1;
                    if d.class != chair {
                        confusions += 1;
                    }
                } else {
                    fps += 1;
                }
            }
        }
        let candidates = (receptacle_cells.len() * frames) as f64;
        let miss_rate = 1.0 - hits as f64 / candidates;
        let confusion_rate = confusions as f64 / hits as f64;
        let fp_rate = fps as f64 / (free_count * frames) as f64;
        assert!(
            (miss_rate - noise.p_miss).abs() < 0.02,
            "miss rate {miss_rate:.4} vs configured {}",
            noise.p_miss
        );
        assert!(
            (confusion_rate - noise.p_confuse).abs() < 0.02,
            "confusion rate {confusion_rate:.4} vs configured {}",
            noise.p_confuse
        );
        assert!(
            (fp_rate - noise.p_floor_fp).abs() < 0.02,
            "false positive rate {fp_rate:.4} vs configured {}",
            noise.p_floor_fp
        );

        // Filter rule, restated one detection at a time from the published
        // cutoff values.
        let vals = ThresholdValues::default();
        let goal = scene.goal;
        let table = ThresholdTable::from_values(vals, goal);
        let ids: Vec<ClassId> = registry.ids().collect();
        let mut mismatches = 0;
        for _ in 0..1000 {
            let batch: Vec<Detection> = (0..8)
                .map(|i| Detection {
                    cell: Cell::new(i, 0),
                    class: ids[rng.gen_range(0..ids.len())],
                    confidence: rng.gen(),
                    est_height: rng.gen::<f64>() * 1.2,
                })
                .collect();
            for dynamic in [false, true] {
                for height in [false, true] {
                    let got = filter_detections(&batch, &table, &registry, dynamic, height);
                    let want: Vec<Detection> = batch
                        .iter()
                        .filter(|d| {
                            let cutoff = if dynamic {
                                if d.class == goal.object_class {
                                    vals.object
                                } else if d.class == goal.end_receptacle_class {
                                    vals.end_receptacle
                                } else if d.class == goal.start_receptacle_class {
                                    vals.start_receptacle
                                } else {
                                    vals.other
                                }
                            } else {
                                vals.legacy
                            };
                            let tall_enough = !height
                                || registry.spec(d.class).kind == ClassKind::Object
                                || d.est_height > vals.height_floor;
                            d.confidence >= cutoff && tall_enough
                        })
                        .copied()
                        .collect();
                    if got != want {
                        mismatches += 1;
                    }
                }
            }
        }
        assert_eq!(mismatches, 0, "filter disagreed with the restated rule");
    });
}
