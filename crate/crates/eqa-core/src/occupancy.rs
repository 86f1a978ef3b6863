//! Occupancy belief built by truncated-signed-distance fusion of depth scans.
//!
//! The world is a single fixed-height layer, so the "volume" has one logical
//! z-slice; `slice()` is kept as an explicit step so frontier detection stays
//! independent of fusion details.

use serde::{Deserialize, Serialize};

use crate::scene::{HitKind, Observation, Scene};

pub const DEFAULT_TRUNCATION_M: f64 = 0.3;
pub const DEFAULT_MAX_WEIGHT: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct OccupancyVolume {
    pub rows: usize,
    pub cols: usize,
    /// Meters per voxel.
    pub resolution: f64,
    /// Truncation distance in meters; stored values are scaled by it.
    pub truncation_m: f64,
    pub max_weight: f64,
    /// Normalized truncated signed distance in [-1, 1].
    tsdf: Vec<f64>,
    weight: Vec<f64>,
    explored: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Occupied,
    Free,
    Unexplored,
}

#[derive(Debug, Clone)]
pub struct OccupancySlice {
    pub rows: usize,
    pub cols: usize,
    pub resolution: f64,
    pub grid: Vec<CellState>,
}

impl OccupancyVolume {
    /// Volume covering `scene` at `subdivision` voxels per scene cell.
    pub fn for_scene(scene: &Scene, subdivision: usize) -> Self {
        let sub = subdivision.max(1);
        OccupancyVolume::new(
            scene.rows * sub,
            scene.cols * sub,
            scene.cell_size / sub as f64,
        )
    }

    pub fn new(rows: usize, cols: usize, resolution: f64) -> Self {
        OccupancyVolume {
            rows,
            cols,
            resolution,
            truncation_m: DEFAULT_TRUNCATION_M,
            max_weight: DEFAULT_MAX_WEIGHT,
            tsdf: vec![0.0; rows * cols],
            weight: vec![0.0; rows * cols],
            explored: vec![false; rows * cols],
        }
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn weight_at(&self, row: usize, col: usize) -> f64 {
        self.weight[self.idx(row, col)]
    }

    pub fn tsdf_at(&self, row: usize, col: usize) -> f64 {
        self.tsdf[self.idx(row, col)]
    }

    fn update(&mut self, row: usize, col: usize, sample: f64) {
        let i = self.idx(row, col);
        let w = self.weight[i].min(self.max_weight);
        self.tsdf[i] = ((self.tsdf[i] * w + sample) / (w + 1.0)).clamp(-1.0, 1.0);
        self.weight[i] = (self.weight[i] + 1.0).min(self.max_weight);
        self.explored[i] = true;
    }

    /// Fuse one depth scan. Voxels traversed by the free segment of each ray
    /// receive positive-distance samples; voxels within the truncation band
    /// behind a hit receive signed samples; everything beyond is untouched.
    pub fn fuse_scan(&mut self, observation: &Observation) {
        let origin = observation.pose.position;
        for ray in &observation.depth_rays {
            let angle = observation.pose.heading + ray.angle_offset;
            let hit = ray.distance;
            let reach = match ray.hit {
                HitKind::Wall => hit + self.truncation_m,
                HitKind::None => hit,
            };
            for (row, col, t_enter, t_exit) in traverse(
                origin,
                angle,
                reach,
                self.resolution,
                self.rows,
                self.cols,
            ) {
                let t_mid = 0.5 * (t_enter + t_exit);
                if ray.hit == HitKind::None && t_mid >= hit {
                    continue;
                }
                let sdf = ((hit - t_mid) / self.truncation_m).clamp(-1.0, 1.0);
                // Free-segment samples never dip negative from grazing hits;
                // the voxel straddling the surface always samples negative.
                let eps = 1e-9;
                let sample = if ray.hit == HitKind::Wall
                    && t_enter < hit - eps
                    && t_exit > hit + eps
                {
                    sdf.min(-1e-6)
                } else if t_exit <= hit + eps {
                    sdf.max(0.0)
                } else {
                    sdf
                };
                self.update(row, col, sample);
            }
        }
    }

    /// Classification grid: occupied iff tsdf < 0 with weight > 0, free iff
    /// tsdf >= 0 with weight > 0, unexplored iff weight = 0.
    pub fn slice(&self) -> OccupancySlice {
        let grid = self
            .tsdf
            .iter()
            .zip(&self.weight)
            .map(|(v, w)| {
                if *w == 0.0 {
                    CellState::Unexplored
                } else if *v < 0.0 {
                    CellState::Occupied
                } else {
                    CellState::Free
                }
            })
            .collect();
        OccupancySlice {
            rows: self.rows,
            cols: self.cols,
            resolution: self.resolution,
            grid,
        }
    }
}

/// DDA over the volume grid; yields (row, col, t_enter, t_exit) up to `reach`.
fn traverse(
    origin: (f64, f64),
    angle: f64,
    reach: f64,
    resolution: f64,
    rows: usize,
    cols: usize,
) -> Vec<(usize, usize, f64, f64)> {
    let dir = (angle.cos(), angle.sin());
    let mut col = ((origin.0 / resolution).floor().max(0.0) as usize).min(cols - 1) as i64;
    let mut row = ((origin.1 / resolution).floor().max(0.0) as usize).min(rows - 1) as i64;

    let (step_c, mut t_max_x, t_delta_x) = axis(origin.0, dir.0, resolution);
    let (step_r, mut t_max_y, t_delta_y) = axis(origin.1, dir.1, resolution);

    let mut out = Vec::new();
    let mut t = 0.0f64;
    loop {
        let t_next = t_max_x.min(t_max_y);
        let t_exit = t_next.min(reach);
        if t_exit > t && row >= 0 && col >= 0 && (row as usize) < rows && (col as usize) < cols {
            out.push((row as usize, col as usize, t, t_exit));
        }
        if t_next >= reach {
            return out;
        }
        if t_max_x < t_max_y {
            t_max_x += t_delta_x;
            col += step_c;
        } else {
            t_max_y += t_delta_y;
            row += step_r;
        }
        t = t_next;
        if row < 0 || col < 0 || row as usize >= rows || col as usize >= cols {
            return out;
        }
    }
}

fn axis(origin: f64, dir: f64, res: f64) -> (i64, f64, f64) {
    if dir.abs() < 1e-12 {
        (0, f64::INFINITY, f64::INFINITY)
    } else if dir > 0.0 {
        let boundary = (origin / res).floor() * res + res;
        (1, (boundary - origin) / dir, res / dir)
    } else {
        let boundary = (origin / res).floor() * res;
        (-1, (boundary - origin) / dir, res / -dir)
    }
}

impl OccupancySlice {
    #[inline]
    pub fn state(&self, row: usize, col: usize) -> CellState {
        self.grid[row * self.cols + col]
    }

    /// Portable graymap: `#` occupied, `.` free, `?` unexplored.
    pub fn graymap(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(match self.state(r, c) {
                    CellState::Occupied => '#',
                    CellState::Free => '.',
                    CellState::Unexplored => '?',
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Fraction of the scene's free cells that have been explored.
pub fn explored_fraction(slice: &OccupancySlice, scene: &Scene) -> f64 {
    let sub = slice.rows / scene.rows;
    let total = scene.free_cell_count();
    if total == 0 {
        return 0.0;
    }
    let mut explored = 0usize;
    for r in 0..scene.rows {
        for c in 0..scene.cols {
            if !scene.is_free((r, c)) {
                continue;
            }
            let any = (r * sub..(r + 1) * sub).any(|sr| {
                (c * sub..(c + 1) * sub).any(|sc| slice.state(sr, sc) != CellState::Unexplored)
            });
            if any {
                explored += 1;
            }
        }
    }
    explored as f64 / total as f64
}
