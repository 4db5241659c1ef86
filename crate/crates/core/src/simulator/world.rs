use serde::{Deserialize, Serialize};
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::path::Path;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

    pub fn right(self) -> Heading {
        Heading::ALL[(self as usize + 1) % 4]
    }

    pub fn left(self) -> Heading {
        Heading::ALL[(self as usize + 3) % 4]
    }

    /// (dcol, drow) of one step forward.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Heading::N => (0, -1),
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub floor: usize,
    pub col: i64,
    pub row: i64,
}

impl CellRef {
    pub fn new(floor: usize, col: i64, row: i64) -> Self {
        Self { floor, col, row }
    }

    pub fn step(self, h: Heading) -> CellRef {
        let (dc, dr) = h.delta();
        CellRef { col: self.col + dc, row: self.row + dr, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RobotPose {
    pub cell: CellRef,
    pub heading: Heading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Wall,
    /// Index into `GridWorld::landmarks`. Landmark cells block movement.
    Landmark(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Floor {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
}

impl Floor {
    pub fn get(&self, col: i64, row: i64) -> Cell {
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            return Cell::Wall;
        }
        self.cells[row as usize * self.width + col as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldLandmark {
    pub label: String,
    pub cell: CellRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    pub name: String,
    pub cell_size: f64,
    pub floors: Vec<Floor>,
    pub landmarks: Vec<WorldLandmark>,
    /// Paired stair cells; forward into a wall from one moves to the other.
    pub stairs: Vec<(CellRef, CellRef)>,
    pub start: RobotPose,
    pub goal: CellRef,
}

/// On-disk world schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldFile {
    pub name: String,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
    pub start_heading: Heading,
    /// One list of row strings per floor: `#` wall, `.` free, `S` start,
    /// `G` goal, other letters are landmark cells named in `legend`.
    pub floors: Vec<Vec<String>>,
    #[serde(default)]
    pub legend: BTreeMap<String, String>,
    /// Pairs of `[col, row, floor]` stair cells.
    #[serde(default)]
    pub stairs: Vec<[[i64; 3]; 2]>,
    /// Overrides the `S` marker, as `[col, row, floor]`.
    #[serde(default)]
    pub start: Option<[i64; 3]>,
    #[serde(default)]
    pub goal: Option<[i64; 3]>,
}

fn default_cell_size() -> f64 {
    1.0
}

fn schema(msg: impl Into<String>) -> SimError {
    SimError::Schema(msg.into())
}

impl GridWorld {
    pub fn from_file(file: WorldFile) -> Result<GridWorld, SimError> {
        if !(file.cell_size > 0.0 && file.cell_size.is_finite()) {
            return Err(schema("cell_size must be positive"));
        }
        if file.floors.is_empty() {
            return Err(schema("world has no floors"));
        }
        let mut legend = BTreeMap::new();
        for (k, v) in &file.legend {
            let mut chars = k.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(schema(format!("legend key {k:?} is not a single character")));
            };
            if !c.is_ascii_lowercase() {
                return Err(schema(format!("legend key {k:?} must be a lowercase letter")));
            }
            if v.trim().is_empty() {
                return Err(schema(format!("legend label for {k:?} is empty")));
            }
            legend.insert(c, v.trim().to_string());
        }

        let mut floors = Vec::new();
        let mut landmarks = Vec::new();
        let (mut start, mut goal) = (None, None);
        for (f, rows) in file.floors.iter().enumerate() {
            let height = rows.len();
            let width = rows.first().map_or(0, |r| r.chars().count());
            if height == 0 || width == 0 {
                return Err(schema(format!("floor {f} is empty")));
            }
            let mut cells = Vec::with_capacity(width * height);
            for (r, row) in rows.iter().enumerate() {
                if row.chars().count() != width {
                    return Err(schema(format!("floor {f} row {r} has a different width")));
                }
                for (c, ch) in row.chars().enumerate() {
                    let here = CellRef::new(f, c as i64, r as i64);
                    let cell = match ch {
                        '#' => Cell::Wall,
                        '.' => Cell::Free,
                        'S' => {
                            if start.replace(here).is_some() {
                                return Err(schema("more than one start cell"));
                            }
                            Cell::Free
                        }
                        'G' => {
                            if goal.replace(here).is_some() {
                                return Err(schema("more than one goal cell"));
                            }
                            Cell::Free
                        }
                        c if legend.contains_key(&c) => {
                            landmarks.push(WorldLandmark { label: legend[&c].clone(), cell: here });
                            Cell::Landmark(landmarks.len() - 1)
                        }
                        other => return Err(schema(format!("unknown cell character {other:?}"))),
                    };
                    cells.push(cell);
                }
            }
            floors.push(Floor { width, height, cells });
        }

        let to_ref = |v: [i64; 3]| -> Result<CellRef, SimError> {
            if v[2] < 0 || v[2] as usize >= floors.len() {
                return Err(schema(format!("floor index {} out of range", v[2])));
            }
            Ok(CellRef::new(v[2] as usize, v[0], v[1]))
        };
        if let Some(s) = file.start {
            start = Some(to_ref(s)?);
        }
        if let Some(g) = file.goal {
            goal = Some(to_ref(g)?);
        }
        let start = start.ok_or_else(|| schema("no start cell"))?;
        let goal = goal.ok_or_else(|| schema("no goal cell"))?;
        let stairs =
            file.stairs.iter().map(|[a, b]| Ok((to_ref(*a)?, to_ref(*b)?))).collect::<Result<Vec<_>, SimError>>()?;

        let world = GridWorld {
            name: file.name,
            cell_size: file.cell_size,
            floors,
            landmarks,
            stairs,
            start: RobotPose { cell: start, heading: file.start_heading },
            goal,
        };
        if !world.is_free(start) {
            return Err(schema("start cell is not free"));
        }
        if !world.is_free(goal) {
            return Err(schema("goal cell is not free"));
        }
        for (a, b) in &world.stairs {
            if !world.is_free(*a) || !world.is_free(*b) {
                return Err(schema("stair cells must be free"));
            }
        }
        for l in &world.landmarks {
            if !Heading::ALL.iter().any(|h| world.is_free(l.cell.step(*h))) {
                return Err(schema(format!("landmark {:?} has no free neighbour", l.label)));
            }
        }
        if world.shortest_path_cells(start, goal).is_none() {
            return Err(SimError::DisconnectedStartGoal);
        }
        Ok(world)
    }

    pub fn from_json(text: &str) -> Result<GridWorld, SimError> {
        let file: WorldFile = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn cell(&self, c: CellRef) -> Cell {
        self.floors.get(c.floor).map_or(Cell::Wall, |f| f.get(c.col, c.row))
    }

    pub fn is_free(&self, c: CellRef) -> bool {
        self.cell(c) == Cell::Free
    }

    pub fn stair_partner(&self, c: CellRef) -> Option<CellRef> {
        self.stairs.iter().find_map(|&(a, b)| {
            if a == c {
                Some(b)
            } else if b == c {
                Some(a)
            } else {
                None
            }
        })
    }

    fn neighbours(&self, c: CellRef) -> impl Iterator<Item = CellRef> + '_ {
        Heading::ALL.into_iter().map(move |h| c.step(h)).filter(|n| self.is_free(*n)).chain(self.stair_partner(c))
    }

    /// BFS move count between two free cells, stair links counting as one move.
    pub fn shortest_path_cells(&self, from: CellRef, to: CellRef) -> Option<usize> {
        let mut dist = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        dist.insert(from, 0usize);
        while let Some(c) = queue.pop_front() {
            if c == to {
                return Some(dist[&c]);
            }
            let d = dist[&c];
            for n in self.neighbours(c) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(n) {
                    e.insert(d + 1);
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// Shortest start-to-goal length in meters.
    pub fn shortest_path_length_m(&self) -> f64 {
        self.shortest_path_cells(self.start.cell, self.goal).unwrap_or(0) as f64 * self.cell_size
    }

    /// Cells of a shortest route from the start pose to the goal that, among
    /// shortest routes, has the fewest turns. Consecutive cells are either
    /// 4-neighbours or stair partners.
    pub fn route(&self) -> Vec<CellRef> {
        const MOVE: u64 = 1000;
        const TURN: u64 = 1;
        let start = self.start;
        let mut best: BTreeMap<RobotPose, u64> = BTreeMap::new();
        let mut parent: BTreeMap<RobotPose, RobotPose> = BTreeMap::new();
        let mut heap = BinaryHeap::from([Reverse((0u64, start))]);
        best.insert(start, 0);
        let mut end = None;
        while let Some(Reverse((cost, pose))) = heap.pop() {
            if best.get(&pose).is_some_and(|&b| b < cost) {
                continue;
            }
            if pose.cell == self.goal {
                end = Some(pose);
                break;
            }
            let ahead = pose.cell.step(pose.heading);
            let forward = if self.is_free(ahead) { Some(ahead) } else { self.stair_partner(pose.cell) };
            let mut next = vec![
                (RobotPose { heading: pose.heading.left(), ..pose }, TURN),
                (RobotPose { heading: pose.heading.right(), ..pose }, TURN),
            ];
            if let Some(cell) = forward {
                next.push((RobotPose { cell, ..pose }, MOVE));
            }
            for (n, c) in next {
                let nc = cost + c;
                if best.get(&n).is_none_or(|&b| nc < b) {
                    best.insert(n, nc);
                    parent.insert(n, pose);
                    heap.push(Reverse((nc, n)));
                }
            }
        }
        let Some(mut pose) = end else { return vec![self.start.cell] };
        let mut cells = vec![pose.cell];
        while let Some(&p) = parent.get(&pose) {
            if p.cell != *cells.last().expect("non-empty") {
                cells.push(p.cell);
            }
            pose = p;
        }
        cells.reverse();
        cells
    }
}

pub fn load_world(path: &Path) -> Result<GridWorld, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| schema(format!("{}: {e}", path.display())))?;
    GridWorld::from_json(&text)
}
