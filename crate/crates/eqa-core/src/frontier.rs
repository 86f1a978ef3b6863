//! Doorway-frontier detection: narrow-opening candidate cells over the
//! occupancy slice, DBSCAN clustering, and the ranked frontier queue.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::occupancy::{CellState, OccupancySlice};
use crate::scene::Cell;

pub const DEFAULT_EPS: f64 = 1.5;
pub const DEFAULT_MIN_PTS: usize = 1;
pub const DEFAULT_DELTA: usize = 1;
pub const DEFAULT_W_SIZE: f64 = 1.0;
pub const DEFAULT_W_DIST: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidateCell {
    pub coordinate: Cell,
    /// Axis along which both flanking cells are occupied.
    pub axis: Axis,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrontierCluster {
    pub id: usize,
    pub member_cells: BTreeSet<Cell>,
    /// Arithmetic mean of member coordinates, in slice cells (row, col).
    pub centroid: (f64, f64),
    pub size: usize,
    pub unexplored_distance: f64,
    pub priority: f64,
    pub visited: bool,
}

fn state_at(slice: &OccupancySlice, row: i64, col: i64) -> CellState {
    // Out-of-bounds counts as occupied for the opening predicate.
    if row < 0 || col < 0 || row as usize >= slice.rows || col as usize >= slice.cols {
        CellState::Occupied
    } else {
        slice.state(row as usize, col as usize)
    }
}

/// Narrow-opening candidates: free cells with occupied flanks on BOTH sides
/// along one axis (some offset within `delta`) and nothing occupied within
/// `delta` along the perpendicular axis.
pub fn detect_candidates(slice: &OccupancySlice, delta: usize) -> Vec<CandidateCell> {
    assert!(delta >= 1);
    let mut out = Vec::new();
    for r in 0..slice.rows as i64 {
        for c in 0..slice.cols as i64 {
            if slice.state(r as usize, c as usize) != CellState::Free {
                continue;
            }
            for (axis, (fr, fc)) in [(Axis::X, (0i64, 1i64)), (Axis::Y, (1i64, 0i64))] {
                let flanked = (1..=delta as i64).any(|d| {
                    state_at(slice, r + fr * d, c + fc * d) == CellState::Occupied
                        && state_at(slice, r - fr * d, c - fc * d) == CellState::Occupied
                });
                let open = (1..=delta as i64).all(|d| {
                    state_at(slice, r + fc * d, c + fr * d) != CellState::Occupied
                        && state_at(slice, r - fc * d, c - fr * d) != CellState::Occupied
                });
                if flanked && open {
                    out.push(CandidateCell {
                        coordinate: (r as usize, c as usize),
                        axis,
                    });
                    break;
                }
            }
        }
    }
    out
}

/// Literal disjunctive reading: any free cell with an occupied neighbor at
/// some offset within `delta` along either axis. Kept for comparison runs.
pub fn detect_candidates_literal(slice: &OccupancySlice, delta: usize) -> Vec<CandidateCell> {
    assert!(delta >= 1);
    let mut out = Vec::new();
    for r in 0..slice.rows as i64 {
        for c in 0..slice.cols as i64 {
            if slice.state(r as usize, c as usize) != CellState::Free {
                continue;
            }
            let axis = (1..=delta as i64).find_map(|d| {
                if state_at(slice, r, c + d) == CellState::Occupied
                    || state_at(slice, r, c - d) == CellState::Occupied
                {
                    Some(Axis::X)
                } else if state_at(slice, r + d, c) == CellState::Occupied
                    || state_at(slice, r - d, c) == CellState::Occupied
                {
                    Some(Axis::Y)
                } else {
                    None
                }
            });
            if let Some(axis) = axis {
                out.push(CandidateCell {
                    coordinate: (r as usize, c as usize),
                    axis,
                });
            }
        }
    }
    out
}

/// Classic frontier-based exploration candidates: free cells bordering
/// unexplored space. Used as the ablation fallback.
pub fn detect_boundary_candidates(slice: &OccupancySlice) -> Vec<CandidateCell> {
    let mut out = Vec::new();
    for r in 0..slice.rows as i64 {
        for c in 0..slice.cols as i64 {
            if slice.state(r as usize, c as usize) != CellState::Free {
                continue;
            }
            let borders_unexplored = [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)]
                .iter()
                .any(|(dr, dc)| state_at(slice, r + dr, c + dc) == CellState::Unexplored);
            if borders_unexplored {
                out.push(CandidateCell {
                    coordinate: (r as usize, c as usize),
                    axis: Axis::X,
                });
            }
        }
    }
    out
}

/// DBSCAN over candidate coordinates with the Euclidean metric. Noise points
/// are discarded; output order is seeded by lexicographic coordinate order.
pub fn cluster_candidates(
    candidates: &[CandidateCell],
    eps: f64,
    min_pts: usize,
) -> Vec<FrontierCluster> {
    assert!(eps > 0.0 && min_pts >= 1);
    let mut points: Vec<Cell> = candidates.iter().map(|c| c.coordinate).collect();
    points.sort_unstable();
    points.dedup();
    let n = points.len();
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        let (r, c) = points[i];
        (0..n)
            .filter(|&j| {
                let (jr, jc) = points[j];
                let dr = r as f64 - jr as f64;
                let dc = c as f64 - jc as f64;
                dr * dr + dc * dc <= eps2
            })
            .collect()
    };

    const UNVISITED: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNVISITED; n];
    let mut clusters: Vec<BTreeSet<Cell>> = Vec::new();

    for i in 0..n {
        if label[i] != UNVISITED {
            continue;
        }
        let nb = neighbors(i);
        if nb.len() < min_pts {
            label[i] = NOISE;
            continue;
        }
        let cluster_id = clusters.len();
        clusters.push(BTreeSet::new());
        label[i] = cluster_id;
        clusters[cluster_id].insert(points[i]);
        let mut queue: VecDeque<usize> = nb.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            if label[j] == NOISE {
                label[j] = cluster_id;
                clusters[cluster_id].insert(points[j]);
                continue;
            }
            if label[j] != UNVISITED {
                continue;
            }
            label[j] = cluster_id;
            clusters[cluster_id].insert(points[j]);
            let nbj = neighbors(j);
            if nbj.len() >= min_pts {
                queue.extend(nbj);
            }
        }
    }

    clusters
        .into_iter()
        .enumerate()
        .map(|(id, member_cells)| {
            let size = member_cells.len();
            let (sr, sc) = member_cells
                .iter()
                .fold((0.0, 0.0), |acc, (r, c)| (acc.0 + *r as f64, acc.1 + *c as f64));
            FrontierCluster {
                id,
                centroid: (sr / size as f64, sc / size as f64),
                size,
                member_cells,
                unexplored_distance: f64::INFINITY,
                priority: 0.0,
                visited: false,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct FrontierQueue {
    items: Vec<FrontierCluster>,
}

impl FrontierQueue {
    pub fn pop(&mut self) -> Option<FrontierCluster> {
        if self.items.is_empty() {
            None
        } else {
            Some(self.items.remove(0))
        }
    }

    pub fn peek(&self) -> Option<&FrontierCluster> {
        self.items.first()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FrontierCluster> {
        self.items.iter()
    }
}

/// Rank clusters into a queue: priority = w_size·size − w_dist·unexplored
/// distance (meters, breadth-first over non-occupied cells). Clusters that
/// cannot reach unexplored space are dropped.
pub fn rank_frontiers(
    clusters: Vec<FrontierCluster>,
    slice: &OccupancySlice,
    w_size: f64,
    w_dist: f64,
) -> FrontierQueue {
    assert!(w_size > 0.0 && w_dist > 0.0);
    let mut items: Vec<FrontierCluster> = clusters
        .into_iter()
        .filter_map(|mut cl| {
            let start = centroid_cell(&cl, slice);
            cl.unexplored_distance = unexplored_distance(slice, start);
            if cl.unexplored_distance.is_infinite() {
                return None;
            }
            cl.priority = w_size * cl.size as f64 - w_dist * cl.unexplored_distance;
            Some(cl)
        })
        .collect();
    items.sort_by(|a, b| {
        b.priority
            .total_cmp(&a.priority)
            .then_with(|| b.size.cmp(&a.size))
            .then_with(|| {
                (a.centroid.0, a.centroid.1)
                    .partial_cmp(&(b.centroid.0, b.centroid.1))
                    .unwrap()
            })
    });
    FrontierQueue { items }
}

fn centroid_cell(cluster: &FrontierCluster, slice: &OccupancySlice) -> Cell {
    let r = (cluster.centroid.0.round().max(0.0) as usize).min(slice.rows - 1);
    let c = (cluster.centroid.1.round().max(0.0) as usize).min(slice.cols - 1);
    if slice.state(r, c) != CellState::Occupied {
        (r, c)
    } else {
        *cluster.member_cells.iter().next().expect("nonempty cluster")
    }
}

/// BFS (4-connected, through non-occupied cells) distance in meters from
/// `start` to the nearest unexplored cell.
pub fn unexplored_distance(slice: &OccupancySlice, start: Cell) -> f64 {
    if slice.state(start.0, start.1) == CellState::Unexplored {
        return 0.0;
    }
    let mut seen = vec![false; slice.rows * slice.cols];
    seen[start.0 * slice.cols + start.1] = true;
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some(((r, c), d)) = queue.pop_front() {
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if nr < 0 || nc < 0 || nr as usize >= slice.rows || nc as usize >= slice.cols {
                continue;
            }
            let next = (nr as usize, nc as usize);
            let i = next.0 * slice.cols + next.1;
            if seen[i] {
                continue;
            }
            seen[i] = true;
            match slice.state(next.0, next.1) {
                CellState::Unexplored => return (d + 1) as f64 * slice.resolution,
                CellState::Free => queue.push_back((next, d + 1)),
                CellState::Occupied => {}
            }
        }
    }
    f64::INFINITY
}

/// Debug overlay: candidates as `D`, cluster members as their id digit.
pub fn overlay(
    slice: &OccupancySlice,
    candidates: &[CandidateCell],
    clusters: &[FrontierCluster],
) -> String {
    let mut chars: Vec<Vec<char>> = slice
        .graymap()
        .lines()
        .map(|l| l.chars().collect())
        .collect();
    for cand in candidates {
        let (r, c) = cand.coordinate;
        chars[r][c] = 'D';
    }
    for cluster in clusters {
        for &(r, c) in &cluster.member_cells {
            chars[r][c] = char::from_digit((cluster.id % 10) as u32, 10).unwrap();
        }
    }
    chars
        .into_iter()
        .map(|row| row.into_iter().collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}
