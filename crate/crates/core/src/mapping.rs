//! Belief state built from observations: explored/obstacle occupancy,
//! per-class confidence grids, and a cluster index over them.
//!
//! Clusters are 4-connected components of cells with nonzero class
//! confidence. Ids are stable: a rebuilt component inherits the smallest id
//! among the old clusters it overlaps, so goal bookkeeping keyed by id
//! survives growth and merges. Confidence never drains a cell back to zero,
//! so components only grow or merge.

use serde::{Deserialize, Serialize};

use crate::classes::{ClassId, ClassRegistry};
use crate::grid::{Cell, Dir8, Grid};
use crate::perception::Detection;
use crate::world::scene::{CellKind, Scene};
use crate::world::visibility::Observation;

/// Chebyshev radius around a cluster that counts as close enough to inspect.
pub const INSPECT_RADIUS: i32 = 2;
/// Distinct viewing sectors required before a cluster counts as inspected.
pub const INSPECT_SECTORS: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fusion {
    /// Keep the highest confidence seen per cell.
    Max,
    /// Running mean of all confidences seen per cell.
    Average,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: u32,
    pub class: ClassId,
    /// Member cells in row-major order.
    pub cells: Vec<Cell>,
    /// Highest cell confidence in the cluster.
    pub prob: f64,
    pub inspected: bool,
    /// Bitmask over the 8 compass sectors this cluster has been seen from.
    pub viewed_sides: u8,
}

impl Cluster {
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.cells.len() as f64;
        let sx: i64 = self.cells.iter().map(|c| c.x as i64).sum();
        let sy: i64 = self.cells.iter().map(|c| c.y as i64).sum();
        (sx as f64 / n, sy as f64 / n)
    }

    pub fn sides_viewed(&self) -> u32 {
        self.viewed_sides.count_ones()
    }

    /// Compass sector (0..8) of `cell` as seen from the cluster centroid.
    pub fn sector_of(&self, cell: Cell) -> u8 {
        let (cx, cy) = self.centroid();
        let dx = cell.x as f64 - cx;
        let dy = cell.y as f64 - cy;
        if dx == 0.0 && dy == 0.0 {
            return 0;
        }
        let mut deg = (-dy).atan2(dx).to_degrees();
        if deg < 0.0 {
            deg += 360.0;
        }
        Dir8::from_bearing(deg).index() as u8
    }
}

#[derive(Clone, Debug)]
pub struct SemanticMap {
    width: i32,
    height: i32,
    explored: Grid<bool>,
    obstacle: Grid<bool>,
    collision: Grid<bool>,
    prob: Vec<Grid<f64>>,
    count: Vec<Grid<u32>>,
    clusters: Vec<Cluster>,
    next_cluster_id: u32,
    version: u64,
    fusion: Fusion,
}

impl SemanticMap {
    pub fn new(width: i32, height: i32, n_classes: usize, fusion: Fusion) -> Self {
        SemanticMap {
            width,
            height,
            explored: Grid::new(width, height, false),
            obstacle: Grid::new(width, height, false),
            collision: Grid::new(width, height, false),
            prob: (0..n_classes).map(|_| Grid::new(width, height, 0.0)).collect(),
            count: (0..n_classes).map(|_| Grid::new(width, height, 0)).collect(),
            clusters: Vec::new(),
            next_cluster_id: 0,
            version: 0,
            fusion,
        }
    }

    pub fn for_scene(scene: &Scene, registry: &ClassRegistry, fusion: Fusion) -> Self {
        SemanticMap::new(scene.width, scene.height, registry.len(), fusion)
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    /// Bumped whenever any belief content changes; plan caches key on it.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn explored(&self, c: Cell) -> bool {
        self.explored.in_bounds(c) && *self.explored.get(c)
    }

    pub fn explored_count(&self) -> usize {
        self.explored.cells().filter(|&c| *self.explored.get(c)).count()
    }

    pub fn obstacle(&self, c: Cell) -> bool {
        self.obstacle.in_bounds(c) && *self.obstacle.get(c)
    }

    pub fn collision_marked(&self, c: Cell) -> bool {
        self.collision.in_bounds(c) && *self.collision.get(c)
    }

    /// A cell the robot is willing to plan through. Unexplored cells count:
    /// planning is optimistic about unknown space, and anything solid there
    /// becomes visible (and an obstacle here) before the robot can hit it.
    pub fn passable(&self, c: Cell) -> bool {
        !self.obstacle(c) && !self.collision_marked(c)
    }

    /// A cell the robot has actually seen and believes walkable.
    pub fn known_free(&self, c: Cell) -> bool {
        self.explored(c) && self.passable(c)
    }

    pub fn class_prob(&self, class: ClassId, c: Cell) -> f64 {
        *self.prob[class.0 as usize].get(c)
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, id: u32) -> Option<&Cluster> {
        self.clusters.iter().find(|k| k.id == id)
    }

    pub fn clusters_of(&self, class: ClassId) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(move |k| k.class == class)
    }

    pub fn force_inspected(&mut self, id: u32) {
        if let Some(k) = self.clusters.iter_mut().find(|k| k.id == id) {
            if !k.inspected {
                k.inspected = true;
                self.version += 1;
            }
        }
    }

    pub fn mark_collision(&mut self, c: Cell) {
        if self.collision.in_bounds(c) && !*self.collision.get(c) {
            self.collision.set(c, true);
            self.version += 1;
        }
    }

    /// Fold one frame into the belief: occupancy from what is visible,
    /// confidence from the filtered detections, then cluster upkeep.
    pub fn integrate(&mut self, obs: &Observation, detections: &[Detection]) {
        let mut changed = false;
        let mut visible = Grid::new(self.width, self.height, false);
        for vc in &obs.cells {
            visible.set(vc.cell, true);
            if !*self.explored.get(vc.cell) {
                self.explored.set(vc.cell, true);
                changed = true;
            }
            let solid = vc.kind != CellKind::Free;
            if *self.obstacle.get(vc.cell) != solid {
                self.obstacle.set(vc.cell, solid);
                changed = true;
            }
        }

        let mut touched: Vec<ClassId> = Vec::new();
        let mut structural: Vec<ClassId> = Vec::new();
        for d in detections {
            let idx = d.class.0 as usize;
            let old = *self.prob[idx].get(d.cell);
            let new = match self.fusion {
                Fusion::Max => old.max(d.confidence),
                Fusion::Average => {
                    let n = *self.count[idx].get(d.cell) + 1;
                    self.count[idx].set(d.cell, n);
                    old + (d.confidence - old) / n as f64
                }
            };
            if new != old {
                self.prob[idx].set(d.cell, new);
                changed = true;
                if !touched.contains(&d.class) {
                    touched.push(d.class);
                }
                if old == 0.0 && !structural.contains(&d.class) {
                    structural.push(d.class);
                }
            } else if self.fusion == Fusion::Average && !touched.contains(&d.class) {
                touched.push(d.class);
            }
        }

        for &class in &structural {
            self.rebuild_class(class);
        }
        for &class in &touched {
            for k in self.clusters.iter_mut().filter(|k| k.class == class) {
                let grid = &self.prob[class.0 as usize];
                k.prob = k.cells.iter().map(|&c| *grid.get(c)).fold(0.0, f64::max);
            }
        }

        // Record the sector this frame saw each visible cluster from.
        let pose_cell = obs.pose.cell;
        for k in self.clusters.iter_mut() {
            if !k.cells.iter().any(|&c| *visible.get(c)) {
                continue;
            }
            let (cx, cy) = {
                let n = k.cells.len() as f64;
                let sx: i64 = k.cells.iter().map(|c| c.x as i64).sum();
                let sy: i64 = k.cells.iter().map(|c| c.y as i64).sum();
                (sx as f64 / n, sy as f64 / n)
            };
            let dx = pose_cell.x as f64 - cx;
            let dy = pose_cell.y as f64 - cy;
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            let mut deg = (-dy).atan2(dx).to_degrees();
            if deg < 0.0 {
                deg += 360.0;
            }
            let bit = 1u8 << Dir8::from_bearing(deg).index();
            if k.viewed_sides & bit == 0 {
                k.viewed_sides |= bit;
                changed = true;
            }
            if !k.inspected && k.sides_viewed() >= INSPECT_SECTORS {
                k.inspected = true;
                changed = true;
            }
        }

        if changed {
            self.version += 1;
        }
    }

    fn rebuild_class(&mut self, class: ClassId) {
        let grid = &self.prob[class.0 as usize];
        let mut assigned = Grid::new(self.width, self.height, false);
        let mut components: Vec<Vec<Cell>> = Vec::new();
        for start in grid.cells() {
            if *grid.get(start) == 0.0 || *assigned.get(start) {
                continue;
            }
            let mut comp = vec![start];
            assigned.set(start, true);
            let mut head = 0;
            while head < comp.len() {
                let c = comp[head];
                head += 1;
                for n in crate::grid::neighbors4(c) {
                    if grid.in_bounds(n) && *grid.get(n) > 0.0 && !*assigned.get(n) {
                        assigned.set(n, true);
                        comp.push(n);
                    }
                }
            }
            comp.sort_by_key(|c| (c.y, c.x));
            components.push(comp);
        }

        let old: Vec<Cluster> =
            self.clusters.iter().filter(|k| k.class == class).cloned().collect();
        self.clusters.retain(|k| k.class != class);
        for cells in components {
            let overlapping: Vec<&Cluster> = old
                .iter()
                .filter(|k| k.cells.iter().any(|c| cells.binary_search_by_key(&(c.y, c.x), |m| (m.y, m.x)).is_ok()))
                .collect();
            let (id, inspected, viewed_sides) = if overlapping.is_empty() {
                let id = self.next_cluster_id;
                self.next_cluster_id += 1;
                (id, false, 0)
            } else {
                (
                    overlapping.iter().map(|k| k.id).min().unwrap(),
                    overlapping.iter().any(|k| k.inspected),
                    overlapping.iter().fold(0u8, |m, k| m | k.viewed_sides),
                )
            };
            let prob = cells.iter().map(|&c| *grid.get(c)).fold(0.0, f64::max);
            self.clusters.push(Cluster { id, class, cells, prob, inspected, viewed_sides });
        }
        self.clusters.sort_by_key(|k| k.id);
    }

    /// Explored free cells bordering unexplored space.
    pub fn frontier_cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for c in self.explored.cells() {
            if !self.known_free(c) {
                continue;
            }
            let open = crate::grid::neighbors4(c)
                .into_iter()
                .any(|n| self.explored.in_bounds(n) && !*self.explored.get(n));
            if open {
                out.push(c);
            }
        }
        out
    }

    /// Passable cells near a cluster from compass sectors it has not been
    /// seen from yet. Empty once every close-by sector is spent.
    pub fn inspection_cells(&self, cluster_id: u32) -> Vec<Cell> {
        let Some(k) = self.cluster(cluster_id) else {
            return Vec::new();
        };
        let min_x = k.cells.iter().map(|c| c.x).min().unwrap() - INSPECT_RADIUS;
        let max_x = k.cells.iter().map(|c| c.x).max().unwrap() + INSPECT_RADIUS;
        let min_y = k.cells.iter().map(|c| c.y).min().unwrap() - INSPECT_RADIUS;
        let max_y = k.cells.iter().map(|c| c.y).max().unwrap() + INSPECT_RADIUS;
        let mut out = Vec::new();
        for y in min_y..=max_y {
            for x in min_x..=max_x {
                let c = Cell::new(x, y);
                if !self.known_free(c) {
                    continue;
                }
                let near = k.cells.iter().any(|&m| c.chebyshev(m) <= INSPECT_RADIUS);
                if !near {
                    continue;
                }
                if k.viewed_sides & (1u8 << k.sector_of(c)) != 0 {
                    continue;
                }
                out.push(c);
            }
        }
        out
    }
}
