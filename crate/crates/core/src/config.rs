//! Run configuration: a flat `key = value` text format covering the scene
//! generator, the detector noise model, the confidence cutoffs, and the step
//! budget. Unknown keys are hard errors so typos never silently revert a
//! setting to its default.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perception::{NoiseConfig, ThresholdValues};
use crate::world::SceneConfig;

pub const DEFAULT_BUDGET: u32 = 1250;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub noise: NoiseConfig,
    pub thresholds: ThresholdValues,
    pub budget: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: SceneConfig::default(),
            noise: NoiseConfig::default(),
            thresholds: ThresholdValues::default(),
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
}

fn parse_num<T: std::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

/// Empty string means "not pinned, pick per seed".
fn parse_name(value: &str) -> Option<String> {
    if value.is_empty() {
        None
    } else {
        Some(value.to_string())
    }
}

impl RunConfig {
    /// Parse the flat text format, starting from defaults. Lines are
    /// `key = value`; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line,
                    text: stripped.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            cfg.apply(line, key, value)?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "scene.width" => self.scene.width = parse_num(line, key, value)?,
            "scene.height" => self.scene.height = parse_num(line, key, value)?,
            "scene.rooms_min" => self.scene.rooms_min = parse_num(line, key, value)?,
            "scene.rooms_max" => self.scene.rooms_max = parse_num(line, key, value)?,
            "scene.doorway_min" => self.scene.doorway_min = parse_num(line, key, value)?,
            "scene.doorway_max" => self.scene.doorway_max = parse_num(line, key, value)?,
            "scene.end_instances_min" => {
                self.scene.end_instances_min = parse_num(line, key, value)?
            }
            "scene.distractor_receptacles" => {
                self.scene.distractor_receptacles = parse_num(line, key, value)?
            }
            "scene.floor_clutter" => self.scene.floor_clutter = parse_num(line, key, value)?,
            "scene.goal_object" => self.scene.goal_object = parse_name(value),
            "scene.start_receptacle" => self.scene.start_receptacle = parse_name(value),
            "scene.end_receptacle" => self.scene.end_receptacle = parse_name(value),
            "scene.view_range" => self.scene.view_range = parse_num(line, key, value)?,
            "scene.view_cone_deg" => self.scene.view_cone_deg = parse_num(line, key, value)?,
            "scene.reach" => self.scene.reach = parse_num(line, key, value)?,
            "noise.p_miss" => self.noise.p_miss = parse_num(line, key, value)?,
            "noise.p_confuse" => self.noise.p_confuse = parse_num(line, key, value)?,
            "noise.p_floor_fp" => self.noise.p_floor_fp = parse_num(line, key, value)?,
            "noise.conf_true_lo" => self.noise.conf_true.0 = parse_num(line, key, value)?,
            "noise.conf_true_hi" => self.noise.conf_true.1 = parse_num(line, key, value)?,
            "noise.conf_confused_lo" => {
                self.noise.conf_confused.0 = parse_num(line, key, value)?
            }
            "noise.conf_confused_hi" => {
                self.noise.conf_confused.1 = parse_num(line, key, value)?
            }
            "noise.conf_fp_lo" => self.noise.conf_fp.0 = parse_num(line, key, value)?,
            "noise.conf_fp_hi" => self.noise.conf_fp.1 = parse_num(line, key, value)?,
            "thresholds.object" => self.thresholds.object = parse_num(line, key, value)?,
            "thresholds.start_receptacle" => {
                self.thresholds.start_receptacle = parse_num(line, key, value)?
            }
            "thresholds.end_receptacle" => {
                self.thresholds.end_receptacle = parse_num(line, key, value)?
            }
            "thresholds.other" => self.thresholds.other = parse_num(line, key, value)?,
            "thresholds.legacy" => self.thresholds.legacy = parse_num(line, key, value)?,
            "thresholds.height_floor" => {
                self.thresholds.height_floor = parse_num(line, key, value)?
            }
            "budget" => self.budget = parse_num(line, key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Every key in a fixed order with its current value: the canonical text
    /// whose hash fingerprints a run. Parsing the output reproduces `self`.
    pub fn canonical_text(&self) -> String {
        let s = &self.scene;
        let n = &self.noise;
        let t = &self.thresholds;
        let name = |v: &Option<String>| v.clone().unwrap_or_default();
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("budget", self.budget.to_string());
        push("noise.conf_confused_hi", n.conf_confused.1.to_string());
        push("noise.conf_confused_lo", n.conf_confused.0.to_string());
        push("noise.conf_fp_hi", n.conf_fp.1.to_string());
        push("noise.conf_fp_lo", n.conf_fp.0.to_string());
        push("noise.conf_true_hi", n.conf_true.1.to_string());
        push("noise.conf_true_lo", n.conf_true.0.to_string());
        push("noise.p_confuse", n.p_confuse.to_string());
        push("noise.p_floor_fp", n.p_floor_fp.to_string());
        push("noise.p_miss", n.p_miss.to_string());
        push("scene.distractor_receptacles", s.distractor_receptacles.to_string());
        push("scene.doorway_max", s.doorway_max.to_string());
        push("scene.doorway_min", s.doorway_min.to_string());
        push("scene.end_instances_min", s.end_instances_min.to_string());
        push("scene.end_receptacle", name(&s.end_receptacle));
        push("scene.floor_clutter", s.floor_clutter.to_string());
        push("scene.goal_object", name(&s.goal_object));
        push("scene.height", s.height.to_string());
        push("scene.reach", s.reach.to_string());
        push("scene.rooms_max", s.rooms_max.to_string());
        push("scene.rooms_min", s.rooms_min.to_string());
        push("scene.start_receptacle", name(&s.start_receptacle));
        push("scene.view_cone_deg", s.view_cone_deg.to_string());
        push("scene.view_range", s.view_range.to_string());
        push("scene.width", s.width.to_string());
        push("thresholds.end_receptacle", t.end_receptacle.to_string());
        push("thresholds.height_floor", t.height_floor.to_string());
        push("thresholds.legacy", t.legacy.to_string());
        push("thresholds.object", t.object.to_string());
        push("thresholds.other", t.other.to_string());
        push("thresholds.start_receptacle", t.start_receptacle.to_string());
        out
    }
}
