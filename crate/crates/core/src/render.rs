//! Belief-map snapshots as text or PGM images. Output is deterministic byte
//! for byte so snapshots can be frozen and diffed.

use crate::classes::ClassId;
use crate::grid::Cell;
use crate::mapping::SemanticMap;
use crate::world::GoalSpec;

/// Glyphs from highest to lowest precedence when a cell qualifies for more
/// than one.
pub const LEGEND: &[(char, &str)] = &[
    ('@', "robot"),
    ('X', "chosen goal point"),
    ('+', "target cluster cell"),
    ('!', "collision-marked cell"),
    ('o', "believed goal-object cell"),
    ('s', "believed start-receptacle cell"),
    ('e', "believed end-receptacle cell"),
    ('r', "believed receptacle cell, other class"),
    ('#', "believed obstacle"),
    ('.', "explored free cell"),
    (' ', "unexplored cell"),
];

/// Overlay state for a render: the robot, the cluster the agent is committed
/// to, and the exact cell it is steering for. The goal triple classifies
/// cluster cells; without it every cluster renders as `r`.
#[derive(Clone, Debug, Default)]
pub struct RenderMarks {
    pub robot: Option<Cell>,
    pub chosen: Option<Cell>,
    pub goal_cells: Vec<Cell>,
    pub goal: Option<GoalSpec>,
}

fn cluster_glyph(class: ClassId, goal: Option<GoalSpec>) -> char {
    match goal {
        Some(g) if class == g.object_class => 'o',
        Some(g) if class == g.start_receptacle_class => 's',
        Some(g) if class == g.end_receptacle_class => 'e',
        _ => 'r',
    }
}

fn glyph_rank(g: char) -> usize {
    LEGEND.iter().position(|&(c, _)| c == g).unwrap()
}

pub fn render_ascii(map: &SemanticMap, marks: &RenderMarks) -> String {
    let (w, h) = (map.width(), map.height());
    let mut glyphs = vec![' '; (w * h) as usize];
    let idx = |c: Cell| (c.y * w + c.x) as usize;
    // lower rank wins; start from the base layer and paint upward
    let mut paint = |c: Cell, g: char| {
        if c.x >= 0 && c.x < w && c.y >= 0 && c.y < h {
            let slot = &mut glyphs[idx(c)];
            if glyph_rank(g) < glyph_rank(*slot) {
                *slot = g;
            }
        }
    };
    for y in 0..h {
        for x in 0..w {
            let c = Cell::new(x, y);
            if map.explored(c) {
                paint(c, '.');
            }
            if map.obstacle(c) {
                paint(c, '#');
            }
            if map.collision_marked(c) {
                paint(c, '!');
            }
        }
    }
    for cluster in map.clusters() {
        let g = cluster_glyph(cluster.class, marks.goal);
        for &c in &cluster.cells {
            paint(c, g);
        }
    }
    for &c in &marks.goal_cells {
        paint(c, '+');
    }
    if let Some(c) = marks.chosen {
        paint(c, 'X');
    }
    if let Some(c) = marks.robot {
        paint(c, '@');
    }
    let mut out = String::with_capacity(((w + 1) * h) as usize);
    for y in 0..h {
        for x in 0..w {
            out.push(glyphs[(y * w + x) as usize]);
        }
        out.push('\n');
    }
    out
}

/// One scalar layer of the belief map, exportable as a grayscale image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapChannel {
    Explored,
    Obstacle,
    /// Per-cell probability for one class, scaled to 0..=255.
    ClassProb(ClassId),
}

/// Binary PGM (P5), row 0 at the top to match the text render.
pub fn render_pgm(map: &SemanticMap, channel: MapChannel) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.reserve((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let c = Cell::new(x, y);
            let v = match channel {
                MapChannel::Explored => {
                    if map.explored(c) {
                        255
                    } else {
                        0
                    }
                }
                MapChannel::Obstacle => {
                    if map.obstacle(c) {
                        255
                    } else {
                        0
                    }
                }
                MapChannel::ClassProb(class) => {
                    (map.class_prob(class, c) * 255.0).round().clamp(0.0, 255.0) as u8
                }
            };
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassRegistry;
    use crate::mapping::{Fusion, SemanticMap};
    use crate::perception::Detection;
    use crate::world::{CellKind, Observation, Pose, VisibleCell};

    fn empty_map(w: i32, h: i32) -> SemanticMap {
        SemanticMap::new(w, h, ClassRegistry::default().len(), Fusion::Max)
    }

    fn seen(cell: Cell, kind: CellKind) -> VisibleCell {
        VisibleCell {
            cell,
            kind,
            distance: 1.0,
            class: None,
            surface_height: 0.0,
            object: None,
        }
    }

    fn frame(cells: Vec<VisibleCell>) -> Observation {
        Observation { pose: Pose::new(Cell::new(0, 0), 0), cells }
    }

    #[test]
    fn unexplored_map_renders_blank() {
        let map = empty_map(4, 4);
        let text = render_ascii(&map, &RenderMarks::default());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|l| *l == "    "));
    }

    #[test]
    fn one_obstacle_lands_on_its_coordinate() {
        let mut map = empty_map(5, 3);
        map.integrate(&frame(vec![seen(Cell::new(2, 1), CellKind::Wall)]), &[]);
        let text = render_ascii(&map, &RenderMarks::default());
        assert_eq!(text.matches('#').count(), 1);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1].chars().nth(2), Some('#'));
    }

    #[test]
    fn overlays_outrank_terrain() {
        let mut map = empty_map(3, 1);
        map.integrate(
            &frame(vec![
                seen(Cell::new(0, 0), CellKind::Free),
                seen(Cell::new(1, 0), CellKind::Wall),
                seen(Cell::new(2, 0), CellKind::Free),
            ]),
            &[],
        );
        let marks = RenderMarks {
            robot: Some(Cell::new(0, 0)),
            chosen: Some(Cell::new(1, 0)),
            goal_cells: vec![Cell::new(2, 0)],
            goal: None,
        };
        assert_eq!(render_ascii(&map, &marks), "@X+\n");
    }

    #[test]
    fn cluster_cells_take_goal_role_glyphs() {
        let registry = ClassRegistry::default();
        let goal = GoalSpec {
            object_class: registry.lookup("cup").unwrap(),
            start_receptacle_class: registry.lookup("chair").unwrap(),
            end_receptacle_class: registry.lookup("counter").unwrap(),
        };
        let mut map = empty_map(7, 1);
        let cells: Vec<Cell> = (0..7).step_by(2).map(|x| Cell::new(x, 0)).collect();
        let obs = frame(cells.iter().map(|&c| seen(c, CellKind::Free)).collect());
        let det = |class, cell| Detection { class, cell, confidence: 0.9, est_height: 0.5 };
        map.integrate(
            &obs,
            &[
                det(goal.object_class, cells[0]),
                det(goal.start_receptacle_class, cells[1]),
                det(goal.end_receptacle_class, cells[2]),
                det(registry.lookup("sofa").unwrap(), cells[3]),
            ],
        );
        let marks = RenderMarks { goal: Some(goal), ..RenderMarks::default() };
        assert_eq!(render_ascii(&map, &marks), "o s e r\n");
    }

    #[test]
    fn pgm_header_and_payload_sizes_match() {
        let mut map = empty_map(4, 2);
        map.integrate(&frame(vec![seen(Cell::new(0, 0), CellKind::Wall)]), &[]);
        let bytes = render_pgm(&map, MapChannel::Obstacle);
        assert!(bytes.starts_with(b"P5\n4 2\n255\n"));
        assert_eq!(bytes.len(), b"P5\n4 2\n255\n".len() + 8);
        assert_eq!(bytes[b"P5\n4 2\n255\n".len()], 255);
        assert_eq!(*bytes.last().unwrap(), 0);
    }
}
