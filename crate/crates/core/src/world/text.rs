//! Plain-text scene serialization. See docs/scene-format.md for the grammar.
//!
//! Layout: a `W H` header, H glyph rows (`.` free, `#` wall, letters for
//! receptacle instances), then one `receptacle` line per instance, one
//! `object` line per object, a `pose` line, and a `goal` line.

use thiserror::Error;

use crate::classes::{ClassRegistry, SizeClass};
use crate::grid::{Cell, Grid};
use crate::world::scene::{
    CellKind, GoalSpec, ObjectInstance, ObjectState, Pose, ReceptacleInstance, Scene,
};

const INSTANCE_GLYPHS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scene has {0} receptacle instances; the glyph alphabet holds {1}")]
    TooManyInstances(usize, usize),
    #[error("unknown class name `{0}`")]
    UnknownClass(String),
}

fn glyph_for(id: u32) -> Option<char> {
    INSTANCE_GLYPHS.get(id as usize).map(|&b| b as char)
}

fn id_for(glyph: char) -> Option<u32> {
    INSTANCE_GLYPHS
        .iter()
        .position(|&b| b as char == glyph)
        .map(|i| i as u32)
}

pub fn scene_to_text(scene: &Scene, registry: &ClassRegistry) -> Result<String, TextError> {
    if scene.receptacles.len() > INSTANCE_GLYPHS.len() {
        return Err(TextError::TooManyInstances(
            scene.receptacles.len(),
            INSTANCE_GLYPHS.len(),
        ));
    }
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", scene.width, scene.height));
    for y in 0..scene.height {
        for x in 0..scene.width {
            let ch = match scene.kind(Cell::new(x, y)) {
                CellKind::Free => '.',
                CellKind::Wall => '#',
                CellKind::Receptacle(id) => glyph_for(id).expect("instance count checked"),
            };
            out.push(ch);
        }
        out.push('\n');
    }
    for r in &scene.receptacles {
        let cells: Vec<String> = r.cells.iter().map(|c| format!("{},{}", c.x, c.y)).collect();
        out.push_str(&format!(
            "receptacle {} {} {} {}\n",
            r.id,
            registry.name(r.class),
            r.surface_height,
            cells.join(" ")
        ));
    }
    for o in &scene.objects {
        let size = match o.size {
            SizeClass::Small => "small",
            SizeClass::Large => "large",
        };
        let state = match o.state {
            ObjectState::OnReceptacle(id) => format!("on:{id}"),
            ObjectState::Held => "held".to_string(),
            ObjectState::OnFloor => "floor".to_string(),
            ObjectState::Fallen => "fallen".to_string(),
        };
        out.push_str(&format!(
            "object {} {} {} {} {},{}\n",
            o.id,
            registry.name(o.class),
            size,
            state,
            o.cell.x,
            o.cell.y
        ));
    }
    out.push_str(&format!(
        "pose {} {} {}\n",
        scene.start_pose.cell.x, scene.start_pose.cell.y, scene.start_pose.heading_deg
    ));
    out.push_str(&format!(
        "goal {} {} {}\n",
        registry.name(scene.goal.object_class),
        registry.name(scene.goal.start_receptacle_class),
        registry.name(scene.goal.end_receptacle_class)
    ));
    out.push_str(&format!(
        "sensor {} {} {}\n",
        scene.view_range, scene.view_cone_deg, scene.reach
    ));
    Ok(out)
}

fn err(line: usize, msg: impl Into<String>) -> TextError {
    TextError::Parse { line, msg: msg.into() }
}

fn parse_cell(tok: &str, line: usize) -> Result<Cell, TextError> {
    let (x, y) = tok
        .split_once(',')
        .ok_or_else(|| err(line, format!("expected x,y, got `{tok}`")))?;
    Ok(Cell::new(
        x.parse().map_err(|_| err(line, "bad x coordinate"))?,
        y.parse().map_err(|_| err(line, "bad y coordinate"))?,
    ))
}

pub fn scene_from_text(text: &str, registry: &ClassRegistry) -> Result<Scene, TextError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
    let mut parts = header.split_whitespace();
    let width: i32 = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| err(1, "bad width"))?;
    let height: i32 = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| err(1, "bad height"))?;
    if width < 1 || height < 1 {
        return Err(err(1, "dimensions must be positive"));
    }

    let mut cells = Grid::new(width, height, CellKind::Free);
    for y in 0..height {
        let (ln, row) = lines
            .next()
            .ok_or_else(|| err((y + 2) as usize, "missing glyph row"))?;
        let chars: Vec<char> = row.chars().collect();
        if chars.len() != width as usize {
            return Err(err(ln + 1, format!("row has {} glyphs, expected {width}", chars.len())));
        }
        for (x, &ch) in chars.iter().enumerate() {
            let kind = match ch {
                '.' => CellKind::Free,
                '#' => CellKind::Wall,
                g => CellKind::Receptacle(
                    id_for(g).ok_or_else(|| err(ln + 1, format!("unknown glyph `{g}`")))?,
                ),
            };
            cells.set(Cell::new(x as i32, y), kind);
        }
    }

    let mut receptacles = Vec::new();
    let mut objects = Vec::new();
    let mut pose = None;
    let mut goal = None;
    let mut sensor = (20, 90.0, 6);

    for (ln, raw) in lines {
        let line = ln + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let mut toks = raw.split_whitespace();
        match toks.next().unwrap() {
            "receptacle" => {
                let id: u32 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line, "bad receptacle id"))?;
                let class_name = toks.next().ok_or_else(|| err(line, "missing class"))?;
                let class = registry
                    .lookup(class_name)
                    .ok_or_else(|| TextError::UnknownClass(class_name.to_string()))?;
                let surface_height: f64 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line, "bad surface height"))?;
                let mut fk = Vec::new();
                for tok in toks {
                    fk.push(parse_cell(tok, line)?);
                }
                if fk.is_empty() {
                    return Err(err(line, "receptacle has no cells"));
                }
                receptacles.push(ReceptacleInstance { id, class, surface_height, cells: fk });
            }
            "object" => {
                let id: u32 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line, "bad object id"))?;
                let class_name = toks.next().ok_or_else(|| err(line, "missing class"))?;
                let class = registry
                    .lookup(class_name)
                    .ok_or_else(|| TextError::UnknownClass(class_name.to_string()))?;
                let size = match toks.next() {
                    Some("small") => SizeClass::Small,
                    Some("large") => SizeClass::Large,
                    _ => return Err(err(line, "bad size class")),
                };
                let state_tok = toks.next().ok_or_else(|| err(line, "missing state"))?;
                let state = if let Some(rid) = state_tok.strip_prefix("on:") {
                    ObjectState::OnReceptacle(
                        rid.parse().map_err(|_| err(line, "bad receptacle id in state"))?,
                    )
                } else {
                    match state_tok {
                        "held" => ObjectState::Held,
                        "floor" => ObjectState::OnFloor,
                        "fallen" => ObjectState::Fallen,
                        s => return Err(err(line, format!("unknown state `{s}`"))),
                    }
                };
                let cell = parse_cell(toks.next().ok_or_else(|| err(line, "missing cell"))?, line)?;
                objects.push(ObjectInstance { id, class, size, state, cell });
            }
            "pose" => {
                let x: i32 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line, "bad pose x"))?;
                let y: i32 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line, "bad pose y"))?;
                let h: u16 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line, "bad heading"))?;
                if h >= 360 || h % 30 != 0 {
                    return Err(err(line, "heading must be a multiple of 30 in [0,330]"));
                }
                pose = Some(Pose::new(Cell::new(x, y), h));
            }
            "goal" => {
                let mut next_class = |what: &str| -> Result<_, TextError> {
                    let name = toks.next().ok_or_else(|| err(line, format!("missing {what}")))?;
                    registry
                        .lookup(name)
                        .ok_or_else(|| TextError::UnknownClass(name.to_string()))
                };
                goal = Some(GoalSpec {
                    object_class: next_class("object class")?,
                    start_receptacle_class: next_class("start receptacle class")?,
                    end_receptacle_class: next_class("end receptacle class")?,
                });
            }
            "sensor" => {
                let range: i32 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line, "bad view range"))?;
                let cone: f64 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line, "bad cone width"))?;
                let reach: i32 = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(line, "bad reach"))?;
                sensor = (range, cone, reach);
            }
            other => return Err(err(line, format!("unknown record `{other}`"))),
        }
    }

    let pose = pose.ok_or_else(|| err(0, "missing pose line"))?;
    let goal = goal.ok_or_else(|| err(0, "missing goal line"))?;

    // Cross-check: glyph grid and footprint lists must agree exactly.
    for r in &receptacles {
        for &c in &r.cells {
            if !cells.in_bounds(c) || *cells.get(c) != CellKind::Receptacle(r.id) {
                return Err(err(
                    0,
                    format!("receptacle {} footprint disagrees with glyph grid at {},{}", r.id, c.x, c.y),
                ));
            }
        }
    }
    for c in cells.cells() {
        if let CellKind::Receptacle(id) = *cells.get(c) {
            let owned = receptacles
                .iter()
                .any(|r| r.id == id && r.cells.contains(&c));
            if !owned {
                return Err(err(
                    0,
                    format!("glyph grid marks instance {id} at {},{} with no matching record", c.x, c.y),
                ));
            }
        }
    }

    Ok(Scene {
        width,
        height,
        cells,
        receptacles,
        objects,
        start_pose: pose,
        goal,
        view_range: sensor.0,
        view_cone_deg: sensor.1,
        reach: sensor.2,
    })
}
