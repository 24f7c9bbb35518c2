//! Grid geometry: cells, headings, 8-connected directions, and exact
//! line-of-sight segment traversal.
//!
//! Conventions used everywhere in this crate:
//! - `x` grows eastward (rightward), `y` grows southward (row index, row 0 on top).
//! - Headings are degrees counterclockwise from east: 0 = east, 90 = north,
//!   180 = west, 270 = south. The robot turns in 30 degree increments.
//! - One cell is 0.25 m of real-world scale.

use serde::{Deserialize, Serialize};

pub const CELL_SIZE_M: f64 = 0.25;
pub const TURN_STEP_DEG: u16 = 30;
pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Tolerance for the view-cone boundary so cells exactly on the 45 degree
/// edge are included regardless of float rounding.
const CONE_EPS_DEG: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Cell::new(self.x + dx, self.y + dy)
    }

    pub fn dist2(self, other: Cell) -> i64 {
        let dx = (self.x - other.x) as i64;
        let dy = (self.y - other.y) as i64;
        dx * dx + dy * dy
    }

    pub fn euclid(self, other: Cell) -> f64 {
        (self.dist2(other) as f64).sqrt()
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    /// Shortest 8-connected path length with straight steps costing 1 and
    /// diagonal steps costing sqrt(2).
    pub fn octile(self, other: Cell) -> f64 {
        let dx = (self.x - other.x).abs() as f64;
        let dy = (self.y - other.y).abs() as f64;
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        (hi - lo) + lo * SQRT_2
    }

    /// Bearing from `self` toward `other` in degrees, [0, 360).
    /// Screen-space y is flipped so 90 means "up" (north).
    pub fn bearing_to(self, other: Cell) -> f64 {
        let dx = (other.x - self.x) as f64;
        let dy = (other.y - self.y) as f64;
        let deg = (-dy).atan2(dx).to_degrees();
        if deg < 0.0 {
            deg + 360.0
        } else {
            deg
        }
    }
}

/// The eight grid directions, ordered counterclockwise from east.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir8 {
    E,
    NE,
    N,
    NW,
    W,
    SW,
    S,
    SE,
}

pub const DIRS8: [Dir8; 8] = [
    Dir8::E,
    Dir8::NE,
    Dir8::N,
    Dir8::NW,
    Dir8::W,
    Dir8::SW,
    Dir8::S,
    Dir8::SE,
];

impl Dir8 {
    pub fn index(self) -> usize {
        match self {
            Dir8::E => 0,
            Dir8::NE => 1,
            Dir8::N => 2,
            Dir8::NW => 3,
            Dir8::W => 4,
            Dir8::SW => 5,
            Dir8::S => 6,
            Dir8::SE => 7,
        }
    }

    pub fn from_index(i: usize) -> Self {
        DIRS8[i % 8]
    }

    pub fn delta(self) -> (i32, i32) {
        // y grows downward, so "north" is -y.
        match self {
            Dir8::E => (1, 0),
            Dir8::NE => (1, -1),
            Dir8::N => (0, -1),
            Dir8::NW => (-1, -1),
            Dir8::W => (-1, 0),
            Dir8::SW => (-1, 1),
            Dir8::S => (0, 1),
            Dir8::SE => (1, 1),
        }
    }

    pub fn angle_deg(self) -> f64 {
        self.index() as f64 * 45.0
    }

    pub fn is_diagonal(self) -> bool {
        self.index() % 2 == 1
    }

    pub fn step_cost(self) -> f64 {
        if self.is_diagonal() {
            SQRT_2
        } else {
            1.0
        }
    }

    /// Quantize a bearing to the nearest of the eight directions.
    /// Exact midpoints round counterclockwise (toward the larger angle).
    pub fn from_bearing(deg: f64) -> Self {
        let norm = deg.rem_euclid(360.0);
        let k = ((norm + 22.5) / 45.0).floor() as usize;
        DIRS8[k % 8]
    }

    /// Sector containing the direction from `from` toward `to`.
    pub fn sector(from: Cell, to: Cell) -> Option<Self> {
        if from == to {
            return None;
        }
        Some(Self::from_bearing(from.bearing_to(to)))
    }
}

/// Absolute angular difference between two headings, in [0, 180].
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// True when `target` lies inside a view cone anchored at `origin`, facing
/// `heading_deg`, with total width `cone_deg` and range `range_cells`.
/// The origin cell itself always counts as inside.
pub fn in_cone(origin: Cell, heading_deg: f64, cone_deg: f64, range_cells: i64, target: Cell) -> bool {
    if origin == target {
        return true;
    }
    if origin.dist2(target) > range_cells * range_cells {
        return false;
    }
    angle_diff_deg(origin.bearing_to(target), heading_deg) <= cone_deg / 2.0 + CONE_EPS_DEG
}

/// Cells whose interior the open segment between the centers of `a` and `b`
/// crosses, excluding `a` and `b` themselves. Exact integer arithmetic: a
/// segment that only touches a cell corner does not enter that cell, so a
/// ray may slip between two diagonally adjacent blockers.
pub fn cells_strictly_between(a: Cell, b: Cell) -> Vec<Cell> {
    let mut out = Vec::new();
    if a == b {
        return out;
    }
    // Work in doubled coordinates so cell centers are odd integers.
    let (x0, y0) = (2 * a.x as i64 + 1, 2 * a.y as i64 + 1);
    let (x1, y1) = (2 * b.x as i64 + 1, 2 * b.y as i64 + 1);
    let dx = x1 - x0;
    let dy = y1 - y0;

    let mut cur = a;
    let step_x: i32 = dx.signum() as i32;
    let step_y: i32 = dy.signum() as i32;

    // Parameter t along the segment is tracked as the exact rational num/den
    // of the next vertical / horizontal grid-line crossing.
    // Crossing of vertical line x = 2*(cur.x + (step_x>0)) happens at
    // t = (line - x0) / dx; comparisons use cross multiplication.
    loop {
        if cur == b {
            break;
        }
        let next_vx = if step_x > 0 { 2 * (cur.x as i64 + 1) } else { 2 * cur.x as i64 };
        let next_hy = if step_y > 0 { 2 * (cur.y as i64 + 1) } else { 2 * cur.y as i64 };

        // t_v = (next_vx - x0)/dx, t_h = (next_hy - y0)/dy, both in [0,1].
        // Compare t_v ? t_h as (next_vx-x0)*|dy| ? (next_hy-y0)*|dx| with signs folded in.
        let tv_num = if dx != 0 { (next_vx - x0) * dx.signum() } else { i64::MAX };
        let tv_den = dx.abs();
        let th_num = if dy != 0 { (next_hy - y0) * dy.signum() } else { i64::MAX };
        let th_den = dy.abs();

        let cmp = if dx == 0 {
            std::cmp::Ordering::Greater
        } else if dy == 0 {
            std::cmp::Ordering::Less
        } else {
            (tv_num * th_den).cmp(&(th_num * tv_den))
        };

        match cmp {
            std::cmp::Ordering::Less => cur = cur.offset(step_x, 0),
            std::cmp::Ordering::Greater => cur = cur.offset(0, step_y),
            // Exact corner crossing: hop diagonally without entering the two
            // cells that share only that corner.
            std::cmp::Ordering::Equal => cur = cur.offset(step_x, step_y),
        }
        if cur != b {
            out.push(cur);
        }
    }
    out
}

/// Dense row-major grid sized to a scene or map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    width: i32,
    height: i32,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn new(width: i32, height: i32, fill: T) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        Grid {
            width,
            height,
            data: vec![fill; (width * height) as usize],
        }
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    fn idx(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c), "cell {c:?} out of bounds");
        (c.y * self.width + c.x) as usize
    }

    pub fn get(&self, c: Cell) -> &T {
        &self.data[self.idx(c)]
    }

    pub fn get_mut(&mut self, c: Cell) -> &mut T {
        let i = self.idx(c);
        &mut self.data[i]
    }

    pub fn set(&mut self, c: Cell, v: T) {
        let i = self.idx(c);
        self.data[i] = v;
    }

    pub fn fill(&mut self, v: T) {
        self.data.fill(v);
    }

    /// All cells in row-major order (stable iteration order for determinism).
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let w = self.width;
        (0..self.data.len() as i32).map(move |i| Cell::new(i % w, i / w))
    }

    pub fn raw(&self) -> &[T] {
        &self.data
    }
}

impl<T: Clone> std::ops::Index<Cell> for Grid<T> {
    type Output = T;
    fn index(&self, c: Cell) -> &T {
        self.get(c)
    }
}

impl<T: Clone> std::ops::IndexMut<Cell> for Grid<T> {
    fn index_mut(&mut self, c: Cell) -> &mut T {
        self.get_mut(c)
    }
}

pub fn neighbors4(c: Cell) -> [Cell; 4] {
    [
        c.offset(1, 0),
        c.offset(0, -1),
        c.offset(-1, 0),
        c.offset(0, 1),
    ]
}

pub fn neighbors8(c: Cell) -> [Cell; 8] {
    let mut out = [c; 8];
    for (i, d) in DIRS8.iter().enumerate() {
        let (dx, dy) = d.delta();
        out[i] = c.offset(dx, dy);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bearing_cardinals() {
        let o = Cell::new(5, 5);
        assert_eq!(o.bearing_to(Cell::new(9, 5)), 0.0);
        assert_eq!(o.bearing_to(Cell::new(5, 1)), 90.0);
        assert_eq!(o.bearing_to(Cell::new(1, 5)), 180.0);
        assert_eq!(o.bearing_to(Cell::new(5, 9)), 270.0);
    }

    #[test]
    fn quantize_rounds_to_nearest_direction() {
        assert_eq!(Dir8::from_bearing(0.0), Dir8::E);
        assert_eq!(Dir8::from_bearing(30.0), Dir8::NE);
        assert_eq!(Dir8::from_bearing(60.0), Dir8::NE);
        assert_eq!(Dir8::from_bearing(90.0), Dir8::N);
        assert_eq!(Dir8::from_bearing(120.0), Dir8::NW);
        assert_eq!(Dir8::from_bearing(150.0), Dir8::NW);
        assert_eq!(Dir8::from_bearing(180.0), Dir8::W);
        assert_eq!(Dir8::from_bearing(210.0), Dir8::SW);
        assert_eq!(Dir8::from_bearing(240.0), Dir8::SW);
        assert_eq!(Dir8::from_bearing(270.0), Dir8::S);
        assert_eq!(Dir8::from_bearing(300.0), Dir8::SE);
        assert_eq!(Dir8::from_bearing(330.0), Dir8::SE);
        assert_eq!(Dir8::from_bearing(359.9), Dir8::E);
    }

    #[test]
    fn quantize_midpoints_round_counterclockwise() {
        assert_eq!(Dir8::from_bearing(22.5), Dir8::NE);
        assert_eq!(Dir8::from_bearing(67.5), Dir8::N);
        assert_eq!(Dir8::from_bearing(337.5), Dir8::E);
    }

    #[test]
    fn cone_boundary_inclusive() {
        let o = Cell::new(0, 0);
        // 45 degrees off a 0-heading with a 90 degree cone: exactly on edge.
        assert!(in_cone(o, 0.0, 90.0, 20, Cell::new(3, -3)));
        assert!(in_cone(o, 0.0, 90.0, 20, Cell::new(3, 3)));
        assert!(!in_cone(o, 0.0, 90.0, 20, Cell::new(3, 4)));
        // Range cut.
        assert!(in_cone(o, 0.0, 90.0, 20, Cell::new(20, 0)));
        assert!(!in_cone(o, 0.0, 90.0, 20, Cell::new(21, 0)));
        // Behind is never visible.
        assert!(!in_cone(o, 0.0, 90.0, 20, Cell::new(-1, 0)));
    }

    #[test]
    fn segment_straight_line() {
        let cells = cells_strictly_between(Cell::new(0, 0), Cell::new(4, 0));
        assert_eq!(
            cells,
            vec![Cell::new(1, 0), Cell::new(2, 0), Cell::new(3, 0)]
        );
    }

    #[test]
    fn segment_diagonal_skips_corner_cells() {
        // Pure diagonal passes exactly through lattice corners, so only the
        // diagonal run itself is crossed.
        let cells = cells_strictly_between(Cell::new(0, 0), Cell::new(3, 3));
        assert_eq!(cells, vec![Cell::new(1, 1), Cell::new(2, 2)]);
    }

    #[test]
    fn segment_adjacent_cells_have_nothing_between() {
        assert!(cells_strictly_between(Cell::new(2, 2), Cell::new(3, 2)).is_empty());
        assert!(cells_strictly_between(Cell::new(2, 2), Cell::new(3, 3)).is_empty());
        assert!(cells_strictly_between(Cell::new(2, 2), Cell::new(2, 2)).is_empty());
    }

    #[test]
    fn segment_matches_interval_oracle() {
        // Independent check: a cell is crossed iff the open (0,1) parameter
        // interval of the segment inside the cell's open square is nonempty.
        fn crosses(a: Cell, b: Cell, c: Cell) -> bool {
            if c == a || c == b {
                return false;
            }
            let (x0, y0) = (2 * a.x as i64 + 1, 2 * a.y as i64 + 1);
            let (x1, y1) = (2 * b.x as i64 + 1, 2 * b.y as i64 + 1);
            let dx = x1 - x0;
            let dy = y1 - y0;
            // Clip t*den against each slab, keeping exact rationals.
            let mut lo_num = 0i64;
            let mut lo_den = 1i64;
            let mut hi_num = 1i64;
            let mut hi_den = 1i64;
            let slabs = [
                (dx, 2 * c.x as i64 - x0, 2 * (c.x as i64 + 1) - x0),
                (dy, 2 * c.y as i64 - y0, 2 * (c.y as i64 + 1) - y0),
            ];
            for (d, lo, hi) in slabs {
                if d == 0 {
                    if lo >= 0 || hi <= 0 {
                        return false;
                    }
                    continue;
                }
                let (mut a_num, mut b_num) = (lo, hi);
                if d < 0 {
                    std::mem::swap(&mut a_num, &mut b_num);
                }
                // enter = a_num/d, exit = b_num/d with positive denom |d|.
                let den = d.abs();
                let a_num = if d < 0 { -a_num } else { a_num };
                let b_num = if d < 0 { -b_num } else { b_num };
                if a_num * lo_den > lo_num * den {
                    lo_num = a_num;
                    lo_den = den;
                }
                if b_num * hi_den < hi_num * den {
                    hi_num = b_num;
                    hi_den = den;
                }
            }
            // Open interval: strict inequality.
            lo_num * hi_den < hi_num * lo_den
        }

        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            rng_state
        };
        for _ in 0..500 {
            let a = Cell::new((next() % 12) as i32, (next() % 12) as i32);
            let b = Cell::new((next() % 12) as i32, (next() % 12) as i32);
            let got = cells_strictly_between(a, b);
            for y in 0..12 {
                for x in 0..12 {
                    let c = Cell::new(x, y);
                    assert_eq!(
                        got.contains(&c),
                        crosses(a, b, c),
                        "mismatch at {c:?} for segment {a:?}->{b:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn octile_known_values() {
        assert_eq!(Cell::new(0, 0).octile(Cell::new(5, 0)), 5.0);
        assert!((Cell::new(0, 0).octile(Cell::new(3, 3)) - 3.0 * SQRT_2).abs() < 1e-12);
        assert!((Cell::new(0, 0).octile(Cell::new(5, 2)) - (3.0 + 2.0 * SQRT_2)).abs() < 1e-12);
    }
}
