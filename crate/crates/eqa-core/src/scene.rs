//! Immutable grid-world environment: floorplan, rooms, objects, annotated
//! questions, agent kinematics, and deterministic first-person rendering.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    Wall,
    Free,
}

/// Grid coordinate as (row, col).
pub type Cell = (usize, usize);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    pub cells: BTreeSet<Cell>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneObject {
    pub label: String,
    pub room: String,
    pub cells: BTreeSet<Cell>,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuestionKind {
    MultipleChoice,
    OpenEnded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub kind: QuestionKind,
    #[serde(default)]
    pub options: BTreeMap<String, String>,
    pub ground_truth: String,
    pub annotated_regions: Vec<String>,
    /// (object label, room name) pairs.
    pub annotated_targets: Vec<(String, String)>,
    pub gt_trajectory_length_m: f64,
    #[serde(default)]
    pub requires_exhaustive: bool,
}

/// On-disk scene document (RON). `grid` rows use `#` for wall, `.` for free.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneDoc {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub generator_version: Option<String>,
    pub cell_size: f64,
    pub grid: Vec<String>,
    pub start: Cell,
    #[serde(default)]
    pub start_heading: f64,
    pub rooms: Vec<Room>,
    pub objects: Vec<SceneObject>,
    pub questions: Vec<Question>,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub cells: Vec<CellKind>,
    pub rooms: Vec<Room>,
    pub objects: Vec<SceneObject>,
    pub questions: Vec<Question>,
    pub room_size_m2: f64,
    pub start: Cell,
    pub start_heading: f64,
    pub seed: Option<u64>,
    room_of: Vec<Option<usize>>,
}

impl Scene {
    #[inline]
    pub fn kind(&self, cell: Cell) -> CellKind {
        self.cells[cell.0 * self.cols + cell.1]
    }

    #[inline]
    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    #[inline]
    pub fn is_free(&self, cell: Cell) -> bool {
        self.kind(cell) == CellKind::Free
    }

    pub fn free_cell_count(&self) -> usize {
        self.cells.iter().filter(|k| **k == CellKind::Free).count()
    }

    /// Index of the room covering `cell`, if the cell is free.
    pub fn room_index_of(&self, cell: Cell) -> Option<usize> {
        self.room_of[cell.0 * self.cols + cell.1]
    }

    pub fn room_name_of(&self, cell: Cell) -> Option<&str> {
        self.room_index_of(cell).map(|i| self.rooms[i].name.as_str())
    }

    pub fn room_by_name(&self, name: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.name == name)
    }

    pub fn question(&self, id: &str) -> Result<&Question> {
        self.questions
            .iter()
            .find(|q| q.id == id)
            .ok_or_else(|| Error::QuestionNotFound(id.to_string()))
    }

    /// Continuous center of a cell in meters.
    pub fn center(&self, cell: Cell) -> (f64, f64) {
        (
            (cell.1 as f64 + 0.5) * self.cell_size,
            (cell.0 as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing a continuous point. Clamped to the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Cell {
        let col = ((x / self.cell_size).floor().max(0.0) as usize).min(self.cols - 1);
        let row = ((y / self.cell_size).floor().max(0.0) as usize).min(self.rows - 1);
        (row, col)
    }

    pub fn to_doc(&self) -> SceneDoc {
        let grid = (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .map(|c| if self.is_free((r, c)) { '.' } else { '#' })
                    .collect()
            })
            .collect();
        SceneDoc {
            seed: self.seed,
            generator_version: None,
            cell_size: self.cell_size,
            grid,
            start: self.start,
            start_heading: self.start_heading,
            rooms: self.rooms.clone(),
            objects: self.objects.clone(),
            questions: self.questions.clone(),
        }
    }
}

fn invariant(name: &str, detail: String) -> Error {
    Error::Invariant {
        invariant: name.to_string(),
        detail,
    }
}

/// Parse and validate a scene document. Pure: same bytes, identical Scene.
pub fn load_scene(document: &str) -> Result<Scene> {
    let doc: SceneDoc = ron::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
    scene_from_doc(doc)
}

pub fn scene_from_doc(doc: SceneDoc) -> Result<Scene> {
    if doc.grid.is_empty() {
        return Err(Error::Parse("grid has no rows".into()));
    }
    let rows = doc.grid.len();
    let cols = doc.grid[0].chars().count();
    if cols == 0 {
        return Err(Error::Parse("grid rows are empty".into()));
    }
    if doc.cell_size <= 0.0 {
        return Err(invariant("cell_size_positive", format!("{}", doc.cell_size)));
    }
    let mut cells = Vec::with_capacity(rows * cols);
    for (r, line) in doc.grid.iter().enumerate() {
        if line.chars().count() != cols {
            return Err(Error::Parse(format!(
                "grid row {r} has {} cells, expected {cols}",
                line.chars().count()
            )));
        }
        for (c, ch) in line.chars().enumerate() {
            cells.push(match ch {
                '#' => CellKind::Wall,
                '.' => CellKind::Free,
                other => {
                    return Err(Error::Parse(format!(
                        "grid row {r} col {c}: unknown cell '{other}'"
                    )))
                }
            });
        }
    }

    let is_free = |cell: Cell| cells[cell.0 * cols + cell.1] == CellKind::Free;
    let mut room_of: Vec<Option<usize>> = vec![None; rows * cols];
    for (i, room) in doc.rooms.iter().enumerate() {
        if room.name.is_empty() {
            return Err(invariant("room_name_nonempty", format!("room {i}")));
        }
        if room.cells.is_empty() {
            return Err(invariant("room_cells_nonempty", room.name.clone()));
        }
        for &cell in &room.cells {
            if cell.0 >= rows || cell.1 >= cols {
                return Err(invariant(
                    "room_cells_in_bounds",
                    format!("{} has out-of-bounds cell {:?}", room.name, cell),
                ));
            }
            if !is_free(cell) {
                return Err(invariant(
                    "room_cells_free",
                    format!("{} includes wall cell {:?}", room.name, cell),
                ));
            }
            let slot = &mut room_of[cell.0 * cols + cell.1];
            if slot.is_some() {
                return Err(invariant(
                    "rooms_disjoint",
                    format!("cell {:?} appears in two rooms", cell),
                ));
            }
            *slot = Some(i);
        }
        if !connected_4(&room.cells) {
            return Err(invariant("room_connected", room.name.clone()));
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            if is_free((r, c)) && room_of[r * cols + c].is_none() {
                return Err(invariant(
                    "rooms_cover_free_cells",
                    format!("free cell {:?} belongs to no room", (r, c)),
                ));
            }
        }
    }

    for obj in &doc.objects {
        if obj.label.is_empty() {
            return Err(invariant("object_label_nonempty", format!("{:?}", obj.cells)));
        }
        if obj.cells.is_empty() {
            return Err(invariant("object_cells_nonempty", obj.label.clone()));
        }
        for (key, value) in &obj.attributes {
            if value.is_empty() {
                return Err(invariant(
                    "object_attribute_value_nonempty",
                    format!("{}.{key}", obj.label),
                ));
            }
        }
        let room_idx = doc
            .rooms
            .iter()
            .position(|r| r.name == obj.room)
            .ok_or_else(|| {
                invariant(
                    "object_room_exists",
                    format!("{} references room {}", obj.label, obj.room),
                )
            })?;
        for &cell in &obj.cells {
            if cell.0 >= rows || cell.1 >= cols || !is_free(cell) {
                return Err(invariant(
                    "object_cells_free",
                    format!("{} at {:?}", obj.label, cell),
                ));
            }
            if room_of[cell.0 * cols + cell.1] != Some(room_idx) {
                return Err(invariant(
                    "object_inside_room",
                    format!("{} cell {:?} outside room {}", obj.label, cell, obj.room),
                ));
            }
        }
    }

    for q in &doc.questions {
        if q.kind == QuestionKind::MultipleChoice {
            if q.options.is_empty() {
                return Err(invariant("mc_options_nonempty", q.id.clone()));
            }
            if !q.options.contains_key(&q.ground_truth) {
                return Err(invariant(
                    "mc_ground_truth_in_options",
                    format!("{}: {}", q.id, q.ground_truth),
                ));
            }
        }
        if q.annotated_targets.is_empty() {
            return Err(invariant("targets_nonempty", q.id.clone()));
        }
        for region in &q.annotated_regions {
            if !doc.rooms.iter().any(|r| &r.name == region) {
                return Err(invariant(
                    "annotated_region_exists",
                    format!("{}: {region}", q.id),
                ));
            }
        }
        for (label, room) in &q.annotated_targets {
            if !doc
                .objects
                .iter()
                .any(|o| &o.label == label && &o.room == room)
            {
                return Err(invariant(
                    "annotated_target_resolvable",
                    format!("{}: ({label}, {room})", q.id),
                ));
            }
        }
        if q.gt_trajectory_length_m < 0.0 {
            return Err(invariant("gt_trajectory_nonnegative", q.id.clone()));
        }
    }

    if doc.start.0 >= rows || doc.start.1 >= cols || !is_free(doc.start) {
        return Err(invariant("start_in_free_cell", format!("{:?}", doc.start)));
    }

    let free_count = cells.iter().filter(|k| **k == CellKind::Free).count();
    Ok(Scene {
        rows,
        cols,
        cell_size: doc.cell_size,
        room_size_m2: free_count as f64 * doc.cell_size * doc.cell_size,
        cells,
        rooms: doc.rooms,
        objects: doc.objects,
        questions: doc.questions,
        start: doc.start,
        start_heading: doc.start_heading,
        seed: doc.seed,
        room_of,
    })
}

fn connected_4(cells: &BTreeSet<Cell>) -> bool {
    let first = match cells.iter().next() {
        Some(c) => *c,
        None => return false,
    };
    let mut seen = BTreeSet::new();
    seen.insert(first);
    let mut queue = VecDeque::from([first]);
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let nr = r as i64 + dr;
            let nc = c as i64 + dc;
            if nr < 0 || nc < 0 {
                continue;
            }
            let next = (nr as usize, nc as usize);
            if cells.contains(&next) && seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    seen.len() == cells.len()
}

// ---------------------------------------------------------------------------
// Agent state and actions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AgentState {
    /// Continuous (x, y) position in meters.
    pub position: (f64, f64),
    /// Heading in radians, normalized to [0, 2π).
    pub heading: f64,
    pub step_count: u32,
    pub distance_traveled_m: f64,
}

impl AgentState {
    pub fn at_start(scene: &Scene) -> Self {
        let (x, y) = scene.center(scene.start);
        AgentState {
            position: (x, y),
            heading: normalize_angle(scene.start_heading),
            step_count: 0,
            distance_traveled_m: 0.0,
        }
    }

    pub fn cell(&self, scene: &Scene) -> Cell {
        scene.cell_of(self.position.0, self.position.1)
    }
}

pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a % TAU;
    if a < 0.0 {
        a += TAU;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Rotate(f64),
    TranslateToward { x: f64, y: f64 },
}

/// Advance the agent by one action. Translation follows the collision-checked
/// straight segment when clear, otherwise the grid shortest path, and is
/// clipped to `translation_cap_m` of traversed length.
pub fn apply_action(
    scene: &Scene,
    state: &AgentState,
    action: Action,
    translation_cap_m: f64,
) -> Result<AgentState> {
    let mut next = state.clone();
    next.step_count += 1;
    match action {
        Action::Rotate(delta) => {
            next.heading = normalize_angle(state.heading + delta);
        }
        Action::TranslateToward { x, y } => {
            let moved = translate(scene, &mut next, (x, y), translation_cap_m)?;
            next.distance_traveled_m += moved;
        }
    }
    Ok(next)
}

fn translate(
    scene: &Scene,
    state: &mut AgentState,
    waypoint: (f64, f64),
    cap: f64,
) -> Result<f64> {
    let from = state.position;
    let dist = hypot2(from, waypoint);
    if dist < 1e-12 {
        return Ok(0.0);
    }
    if segment_clear(scene, from, waypoint) {
        let step = dist.min(cap);
        let t = step / dist;
        state.position = (
            from.0 + (waypoint.0 - from.0) * t,
            from.1 + (waypoint.1 - from.1) * t,
        );
        return Ok(step);
    }

    let start_cell = scene.cell_of(from.0, from.1);
    let goal_cell = nearest_free_cell(scene, scene.cell_of(waypoint.0, waypoint.1))
        .ok_or(Error::BlockedPath {
            x: waypoint.0,
            y: waypoint.1,
        })?;
    let path = shortest_path_cells(scene, start_cell, goal_cell).ok_or(Error::BlockedPath {
        x: waypoint.0,
        y: waypoint.1,
    })?;

    // Polyline through cell centers; final leg to the waypoint itself when it
    // shares the goal cell.
    let mut points: Vec<(f64, f64)> = vec![from];
    for cell in path.iter().skip(1) {
        points.push(scene.center(*cell));
    }
    if scene.cell_of(waypoint.0, waypoint.1) == goal_cell && scene.is_free(goal_cell) {
        points.push(waypoint);
    }
    if points.len() == 1 {
        return Ok(0.0);
    }

    let mut remaining = cap;
    let mut moved = 0.0;
    let mut pos = from;
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let seg = hypot2(a, b);
        if seg < 1e-12 {
            continue;
        }
        if seg <= remaining {
            pos = b;
            moved += seg;
            remaining -= seg;
        } else {
            let t = remaining / seg;
            pos = (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
            moved += remaining;
            break;
        }
    }
    state.position = pos;
    Ok(moved)
}

fn hypot2(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Straight segment stays in free cells, sampled at 1/8 cell granularity.
pub fn segment_clear(scene: &Scene, a: (f64, f64), b: (f64, f64)) -> bool {
    let dist = hypot2(a, b);
    let steps = ((dist / (scene.cell_size / 8.0)).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        let p = (a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t);
        if p.0 < 0.0 || p.1 < 0.0 {
            return false;
        }
        let (row, col) = (
            (p.1 / scene.cell_size).floor() as usize,
            (p.0 / scene.cell_size).floor() as usize,
        );
        if row >= scene.rows || col >= scene.cols || !scene.is_free((row, col)) {
            return false;
        }
    }
    true
}

/// Nearest free cell to `cell` by BFS over the whole grid (walls passable for
/// the search itself). Deterministic tie-break by visit order.
pub fn nearest_free_cell(scene: &Scene, cell: Cell) -> Option<Cell> {
    if scene.is_free(cell) {
        return Some(cell);
    }
    let mut seen = vec![false; scene.rows * scene.cols];
    seen[cell.0 * scene.cols + cell.1] = true;
    let mut queue = VecDeque::from([cell]);
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if !scene.in_bounds(nr, nc) {
                continue;
            }
            let next = (nr as usize, nc as usize);
            if seen[next.0 * scene.cols + next.1] {
                continue;
            }
            seen[next.0 * scene.cols + next.1] = true;
            if scene.is_free(next) {
                return Some(next);
            }
            queue.push_back(next);
        }
    }
    None
}

#[derive(Copy, Clone, PartialEq)]
struct QueueEntry {
    cost: f64,
    cell: Cell,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap by cost, tie-broken by cell for determinism.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Uniform-cost shortest path over free cells, 8-connected. Diagonal moves
/// cost √2·cell_size and require both flanking orthogonal cells free.
pub fn shortest_path_cells(scene: &Scene, from: Cell, to: Cell) -> Option<Vec<Cell>> {
    if !scene.is_free(from) || !scene.is_free(to) {
        return None;
    }
    let idx = |c: Cell| c.0 * scene.cols + c.1;
    let mut dist = vec![f64::INFINITY; scene.rows * scene.cols];
    let mut prev: Vec<Option<Cell>> = vec![None; scene.rows * scene.cols];
    dist[idx(from)] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(QueueEntry {
        cost: 0.0,
        cell: from,
    });
    while let Some(QueueEntry { cost, cell }) = heap.pop() {
        if cost > dist[idx(cell)] {
            continue;
        }
        if cell == to {
            break;
        }
        for (dr, dc, diag) in NEIGHBORS_8 {
            let (nr, nc) = (cell.0 as i64 + dr, cell.1 as i64 + dc);
            if !scene.in_bounds(nr, nc) {
                continue;
            }
            let next = (nr as usize, nc as usize);
            if !scene.is_free(next) {
                continue;
            }
            if diag {
                let side_a = (cell.0, next.1);
                let side_b = (next.0, cell.1);
                if !scene.is_free(side_a) || !scene.is_free(side_b) {
                    continue;
                }
            }
            let step = if diag {
                std::f64::consts::SQRT_2 * scene.cell_size
            } else {
                scene.cell_size
            };
            let nd = cost + step;
            if nd < dist[idx(next)] - 1e-12 {
                dist[idx(next)] = nd;
                prev[idx(next)] = Some(cell);
                heap.push(QueueEntry {
                    cost: nd,
                    cell: next,
                });
            }
        }
    }
    if dist[idx(to)].is_infinite() {
        return None;
    }
    let mut path = vec![to];
    let mut cur = to;
    while let Some(p) = prev[idx(cur)] {
        path.push(p);
        cur = p;
    }
    path.reverse();
    Some(path)
}

const NEIGHBORS_8: [(i64, i64, bool); 8] = [
    (-1, 0, false),
    (1, 0, false),
    (0, -1, false),
    (0, 1, false),
    (-1, -1, true),
    (-1, 1, true),
    (1, -1, true),
    (1, 1, true),
];

// ---------------------------------------------------------------------------
// Raycasting and observations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitKind {
    Wall,
    /// Ray reached max range without hitting anything.
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthRay {
    pub angle_offset: f64,
    pub distance: f64,
    pub hit: HitKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VisibleObject {
    pub label: String,
    pub room: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VisibleRoom {
    pub name: String,
    /// Share of the visible free cells that belong to this room.
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub id: u64,
    pub pose: AgentState,
    pub depth_rays: Vec<DepthRay>,
    pub visible_cells: BTreeSet<Cell>,
    pub visible_objects: Vec<VisibleObject>,
    pub visible_rooms: Vec<VisibleRoom>,
}

/// One free cell traversed by a ray, with entry/exit parameters in meters.
#[derive(Debug, Clone, Copy)]
pub struct CellSpan {
    pub cell: Cell,
    pub t_enter: f64,
    pub t_exit: f64,
}

#[derive(Debug, Clone)]
pub struct RayTrace {
    pub spans: Vec<CellSpan>,
    pub distance: f64,
    pub hit: HitKind,
    pub hit_cell: Option<Cell>,
}

/// Grid traversal (DDA) from `origin` along `angle`, stopping at the first
/// wall or at max_range.
pub fn cast_ray(scene: &Scene, origin: (f64, f64), angle: f64, max_range: f64) -> RayTrace {
    let dir = (angle.cos(), angle.sin());
    let cs = scene.cell_size;
    let mut cell = scene.cell_of(origin.0, origin.1);
    let mut spans = Vec::new();

    let (step_c, mut t_max_x, t_delta_x) = axis_setup(origin.0, dir.0, cs);
    let (step_r, mut t_max_y, t_delta_y) = axis_setup(origin.1, dir.1, cs);

    let mut t = 0.0f64;
    loop {
        let t_next = t_max_x.min(t_max_y);
        if t_next >= max_range {
            if max_range > t {
                spans.push(CellSpan {
                    cell,
                    t_enter: t,
                    t_exit: max_range,
                });
            }
            return RayTrace {
                spans,
                distance: max_range,
                hit: HitKind::None,
                hit_cell: None,
            };
        }
        spans.push(CellSpan {
            cell,
            t_enter: t,
            t_exit: t_next,
        });
        let (nr, nc) = if t_max_x < t_max_y {
            t_max_x += t_delta_x;
            (cell.0 as i64, cell.1 as i64 + step_c)
        } else {
            t_max_y += t_delta_y;
            (cell.0 as i64 + step_r, cell.1 as i64)
        };
        t = t_next;
        if !scene.in_bounds(nr, nc) {
            return RayTrace {
                spans,
                distance: t.max(1e-9),
                hit: HitKind::Wall,
                hit_cell: None,
            };
        }
        let next = (nr as usize, nc as usize);
        if !scene.is_free(next) {
            return RayTrace {
                spans,
                distance: t.max(1e-9),
                hit: HitKind::Wall,
                hit_cell: Some(next),
            };
        }
        cell = next;
    }
}

fn axis_setup(origin: f64, dir: f64, cs: f64) -> (i64, f64, f64) {
    if dir.abs() < 1e-12 {
        (0, f64::INFINITY, f64::INFINITY)
    } else if dir > 0.0 {
        let boundary = (origin / cs).floor() * cs + cs;
        (1, (boundary - origin) / dir, cs / dir)
    } else {
        let boundary = (origin / cs).floor() * cs;
        (-1, (boundary - origin) / dir, cs / -dir)
    }
}

/// Render a first-person observation: depth rays across the field of view and
/// semantic visibility derived from traversed free cells.
pub fn render_observation(
    scene: &Scene,
    state: &AgentState,
    id: u64,
    fov: f64,
    max_range: f64,
    rays: usize,
) -> Observation {
    assert!(rays >= 2, "rays must be >= 2");
    assert!(fov > 0.0 && fov <= TAU, "fov must be in (0, 2*pi]");

    let mut depth_rays = Vec::with_capacity(rays);
    let mut visible_cells: BTreeSet<Cell> = BTreeSet::new();
    visible_cells.insert(state.cell(scene));

    for i in 0..rays {
        let offset = -fov / 2.0 + fov * (i as f64) / ((rays - 1) as f64);
        let trace = cast_ray(scene, state.position, state.heading + offset, max_range);
        for span in &trace.spans {
            visible_cells.insert(span.cell);
        }
        depth_rays.push(DepthRay {
            angle_offset: offset,
            distance: trace.distance,
            hit: trace.hit,
        });
    }

    let mut visible_objects = Vec::new();
    for obj in &scene.objects {
        let seen = obj.cells.iter().filter(|c| visible_cells.contains(c)).count();
        if seen > 0 {
            visible_objects.push(VisibleObject {
                label: obj.label.clone(),
                room: obj.room.clone(),
                fraction: seen as f64 / obj.cells.len() as f64,
            });
        }
    }
    visible_objects.sort_by(|a, b| (&a.label, &a.room).cmp(&(&b.label, &b.room)));

    let total_visible = visible_cells.len() as f64;
    let mut visible_rooms = Vec::new();
    for room in &scene.rooms {
        let seen = room.cells.iter().filter(|c| visible_cells.contains(c)).count();
        if seen > 0 {
            visible_rooms.push(VisibleRoom {
                name: room.name.clone(),
                fraction: seen as f64 / total_visible,
            });
        }
    }
    visible_rooms.sort_by(|a, b| {
        b.fraction
            .total_cmp(&a.fraction)
            .then_with(|| a.name.cmp(&b.name))
    });

    Observation {
        id,
        pose: state.clone(),
        depth_rays,
        visible_cells,
        visible_objects,
        visible_rooms,
    }
}


#[cfg(test)]
pub(crate) use tests::{mini_scene as test_scene, three_room_fixture};
