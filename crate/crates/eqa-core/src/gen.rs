//! Procedural scene/question corpus generator. Byte-identical output for a
//! given (seed, config) pair.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{
    scene_from_doc, Cell, Question, QuestionKind, Room, Scene, SceneDoc, SceneObject, TAU,
};

pub const GENERATOR_VERSION: &str = "eqa-gen/1";

fn gen_err(detail: impl Into<String>) -> Error {
    Error::Generation {
        attempts: 1,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    /// Minimum interior width/height of a leaf room.
    pub min_room_dim: usize,
    /// Maximum binary-split depth (caps the room count at 2^depth).
    pub max_depth: usize,
    pub colors: Vec<String>,
    pub labels: Vec<String>,
    pub room_names: Vec<String>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            rows: 13,
            cols: 17,
            cell_size: 1.0,
            min_room_dim: 3,
            max_depth: 3,
            colors: ["red", "blue", "green", "yellow"]
                .map(String::from)
                .to_vec(),
            labels: ["vase", "sofa", "lamp", "plant", "clock", "mirror"]
                .map(String::from)
                .to_vec(),
            room_names: [
                "kitchen", "bedroom", "bathroom", "office", "hall", "den", "study", "pantry",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

/// Inclusive interior rectangle of free cells.
#[derive(Debug, Clone, Copy)]
struct Rect {
    r0: usize,
    c0: usize,
    r1: usize,
    c1: usize,
}

#[derive(Debug, Clone, Copy)]
struct WallSegment {
    /// True: vertical wall (fixed column), spans rows. False: horizontal.
    vertical: bool,
    line: usize,
    span0: usize,
    span1: usize,
}

struct Layout {
    walls: Vec<Vec<bool>>,
    leaves: Vec<Rect>,
    segments: Vec<WallSegment>,
}

fn split(layout: &mut Layout, rect: Rect, depth: usize, cfg: &GenConfig, rng: &mut ChaCha8Rng) {
    let height = rect.r1 - rect.r0 + 1;
    let width = rect.c1 - rect.c0 + 1;
    let min = cfg.min_room_dim;
    let can_h = height >= 2 * min + 1; // horizontal wall (splits rows)
    let can_v = width >= 2 * min + 1;
    if depth >= cfg.max_depth || (!can_h && !can_v) {
        layout.leaves.push(rect);
        return;
    }
    let vertical = if can_h && can_v {
        if width != height {
            width > height
        } else {
            rng.random_bool(0.5)
        }
    } else {
        can_v
    };
    if vertical {
        let line = rng.random_range(rect.c0 + min..=rect.c1 - min);
        for r in rect.r0..=rect.r1 {
            layout.walls[r][line] = true;
        }
        layout.segments.push(WallSegment {
            vertical: true,
            line,
            span0: rect.r0,
            span1: rect.r1,
        });
        split(layout, Rect { c1: line - 1, ..rect }, depth + 1, cfg, rng);
        split(layout, Rect { c0: line + 1, ..rect }, depth + 1, cfg, rng);
    } else {
        let line = rng.random_range(rect.r0 + min..=rect.r1 - min);
        for c in rect.c0..=rect.c1 {
            layout.walls[line][c] = true;
        }
        layout.segments.push(WallSegment {
            vertical: false,
            line,
            span0: rect.c0,
            span1: rect.c1,
        });
        split(layout, Rect { r1: line - 1, ..rect }, depth + 1, cfg, rng);
        split(layout, Rect { r0: line + 1, ..rect }, depth + 1, cfg, rng);
    }
}

/// Generate the scene document for (seed, config).
pub fn generate_doc(seed: u64, cfg: &GenConfig) -> Result<SceneDoc> {
    if cfg.rows < cfg.min_room_dim + 2 || cfg.cols < cfg.min_room_dim + 2 {
        return Err(gen_err(format!(
            "grid {}x{} too small for rooms of {}",
            cfg.rows, cfg.cols, cfg.min_room_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Border walls, BSP splits inside.
    let mut layout = Layout {
        walls: vec![vec![false; cfg.cols]; cfg.rows],
        leaves: Vec::new(),
        segments: Vec::new(),
    };
    for c in 0..cfg.cols {
        layout.walls[0][c] = true;
        layout.walls[cfg.rows - 1][c] = true;
    }
    for r in 0..cfg.rows {
        layout.walls[r][0] = true;
        layout.walls[r][cfg.cols - 1] = true;
    }
    let interior = Rect {
        r0: 1,
        c0: 1,
        r1: cfg.rows - 2,
        c1: cfg.cols - 2,
    };
    split(&mut layout, interior, 0, cfg, &mut rng);

    // One door per split wall, where both across-neighbors are open. Doors
    // only add free cells, so every split stays traversable and the whole
    // free region is connected.
    let mut doors: Vec<(Cell, Cell)> = Vec::new(); // (door, owning-side neighbor)
    for seg in &layout.segments {
        let candidates: Vec<Cell> = (seg.span0..=seg.span1)
            .filter_map(|t| {
                let (cell, a, b) = if seg.vertical {
                    ((t, seg.line), (t, seg.line - 1), (t, seg.line + 1))
                } else {
                    ((seg.line, t), (seg.line - 1, t), (seg.line + 1, t))
                };
                (!layout.walls[a.0][a.1] && !layout.walls[b.0][b.1]).then_some(cell)
            })
            .collect();
        let door = *candidates
            .choose(&mut rng)
            .ok_or_else(|| gen_err("wall segment with no door site"))?;
        let owner = if seg.vertical {
            (door.0, door.1 - 1)
        } else {
            (door.0 - 1, door.1)
        };
        doors.push((door, owner));
    }

    // Rooms: leaf rectangles, named from a shuffled pool, door cells attached
    // to the room on their lexicographically earlier side.
    let mut names = cfg.room_names.clone();
    names.shuffle(&mut rng);
    let mut rooms: Vec<Room> = layout
        .leaves
        .iter()
        .enumerate()
        .map(|(i, rect)| Room {
            name: names
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("room{i}")),
            cells: (rect.r0..=rect.r1)
                .flat_map(|r| (rect.c0..=rect.c1).map(move |c| (r, c)))
                .collect(),
        })
        .collect();
    for (door, owner) in &doors {
        let idx = rooms
            .iter()
            .position(|room| room.cells.contains(owner))
            .ok_or_else(|| gen_err("door neighbor outside all rooms"))?;
        rooms[idx].cells.insert(*door);
        layout.walls[door.0][door.1] = false;
    }

    let grid: Vec<String> = layout
        .walls
        .iter()
        .map(|row| row.iter().map(|&w| if w { '#' } else { '.' }).collect())
        .collect();

    // Start pose inside a random leaf interior.
    let start_leaf = rng.random_range(0..layout.leaves.len());
    let rect = layout.leaves[start_leaf];
    let start = (
        rng.random_range(rect.r0..=rect.r1),
        rng.random_range(rect.c0..=rect.c1),
    );
    let start_heading = rng.random_range(0..8) as f64 * TAU / 8.0;
    let start_room = rooms[start_leaf].name.clone();

    // Objects: one or two per room with room-unique labels, plus one shared
    // label planted in two distinct rooms for comparison/counting questions.
    let mut labels = cfg.labels.clone();
    labels.shuffle(&mut rng);
    let dup_label = labels.pop().ok_or_else(|| gen_err("empty label pool"))?;
    let mut used_cells: BTreeSet<Cell> = BTreeSet::from([start]);
    let mut objects: Vec<SceneObject> = Vec::new();
    let place = |room: &Room,
                     label: &str,
                     used: &mut BTreeSet<Cell>,
                     objects: &mut Vec<SceneObject>,
                     rng: &mut ChaCha8Rng|
     -> Result<()> {
        let free: Vec<Cell> = room.cells.iter().filter(|c| !used.contains(c)).copied().collect();
        let cell = *free
            .choose(rng)
            .ok_or_else(|| gen_err(format!("room {} is full", room.name)))?;
        used.insert(cell);
        let color = cfg
            .colors
            .choose(rng)
            .ok_or_else(|| gen_err("empty color pool"))?
            .clone();
        objects.push(SceneObject {
            label: label.to_string(),
            room: room.name.clone(),
            cells: BTreeSet::from([cell]),
            attributes: BTreeMap::from([("color".to_string(), color)]),
        });
        Ok(())
    };
    for room in &rooms {
        let count = rng.random_range(1..=2.min(labels.len()));
        let mut pool = labels.clone();
        pool.shuffle(&mut rng);
        for label in pool.iter().take(count) {
            place(room, label, &mut used_cells, &mut objects, &mut rng)?;
        }
    }
    let dup_room_a = rng.random_range(0..rooms.len());
    let dup_room_b = if rooms.len() > 1 {
        let mut b = rng.random_range(0..rooms.len() - 1);
        if b >= dup_room_a {
            b += 1;
        }
        b
    } else {
        dup_room_a
    };
    place(&rooms[dup_room_a], &dup_label, &mut used_cells, &mut objects, &mut rng)?;
    if dup_room_b != dup_room_a {
        place(&rooms[dup_room_b], &dup_label, &mut used_cells, &mut objects, &mut rng)?;
    }

    // Validate the geometry before measuring ground-truth trajectories.
    let base = SceneDoc {
        seed: Some(seed),
        generator_version: Some(GENERATOR_VERSION.to_string()),
        cell_size: cfg.cell_size,
        grid: grid.clone(),
        start,
        start_heading,
        rooms: rooms.clone(),
        objects: objects.clone(),
        questions: Vec::new(),
    };
    let scene = scene_from_doc(base.clone())?;
    let questions = make_questions(&scene, &objects, &dup_label, &start_room, cfg, &mut rng)?;

    Ok(SceneDoc {
        questions,
        ..base
    })
}

pub fn generate_scene(seed: u64, cfg: &GenConfig) -> Result<Scene> {
    scene_from_doc(generate_doc(seed, cfg)?)
}

/// Stable textual serialization of a scene document.
pub fn doc_to_ron(doc: &SceneDoc) -> Result<String> {
    let pretty = ron::ser::PrettyConfig::new().indentor("  ");
    ron::ser::to_string_pretty(doc, pretty)
        .map(|s| s + "\n")
        .map_err(|e| gen_err(format!("serialize: {e}")))
}

fn object_color(obj: &SceneObject) -> String {
    obj.attributes.get("color").cloned().unwrap_or_default()
}

/// Longest start-to-target geodesic over the question's targets.
fn trajectory_length(scene: &Scene, targets: &[(String, String)], objects: &[SceneObject]) -> Result<f64> {
    let start = scene.center(scene.start);
    let mut longest = 0.0f64;
    for (label, room) in targets {
        let obj = objects
            .iter()
            .find(|o| &o.label == label && &o.room == room)
            .ok_or_else(|| gen_err(format!("target ({label}, {room}) unplaced")))?;
        let mut nearest = f64::INFINITY;
        for &cell in &obj.cells {
            let d = crate::metrics::geodesic_distance(scene, start, scene.center(cell))?;
            nearest = nearest.min(d);
        }
        longest = longest.max(nearest);
    }
    Ok(longest)
}

fn make_questions(
    scene: &Scene,
    objects: &[SceneObject],
    dup_label: &str,
    start_room: &str,
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Question>> {
    let color_options: BTreeMap<String, String> = cfg
        .colors
        .iter()
        .enumerate()
        .map(|(i, c)| (((b'A' + i as u8) as char).to_string(), c.clone()))
        .collect();
    let letter_of = |color: &str| -> Result<String> {
        color_options
            .iter()
            .find(|(_, v)| v.as_str() == color)
            .map(|(k, _)| k.clone())
            .ok_or_else(|| gen_err(format!("color {color} not in option pool")))
    };

    // Single-target questions avoid the start room when another room exists.
    let singles: Vec<&SceneObject> = {
        let away: Vec<&SceneObject> = objects
            .iter()
            .filter(|o| o.label != dup_label && o.room != start_room)
            .collect();
        if away.is_empty() {
            objects.iter().filter(|o| o.label != dup_label).collect()
        } else {
            away
        }
    };
    if singles.is_empty() {
        return Err(gen_err("no single-target objects"));
    }

    let mut questions = Vec::new();

    let mc_obj = singles[rng.random_range(0..singles.len())];
    let targets = vec![(mc_obj.label.clone(), mc_obj.room.clone())];
    questions.push(Question {
        id: "q0".into(),
        text: format!("What color is the {} in the {}?", mc_obj.label, mc_obj.room),
        kind: QuestionKind::MultipleChoice,
        options: color_options.clone(),
        ground_truth: letter_of(&object_color(mc_obj))?,
        annotated_regions: vec![mc_obj.room.clone()],
        gt_trajectory_length_m: trajectory_length(scene, &targets, objects)?,
        annotated_targets: targets,
        requires_exhaustive: false,
    });

    let dups: Vec<&SceneObject> = objects.iter().filter(|o| o.label == dup_label).collect();
    if dups.len() >= 2 {
        let (a, b) = (dups[0], dups[1]);
        let targets = vec![
            (a.label.clone(), a.room.clone()),
            (b.label.clone(), b.room.clone()),
        ];
        questions.push(Question {
            id: "q1".into(),
            text: format!(
                "Do the {} in the {} and the {} in the {} have the same color?",
                a.label, a.room, b.label, b.room
            ),
            kind: QuestionKind::MultipleChoice,
            options: BTreeMap::from([
                ("A".to_string(), "yes".to_string()),
                ("B".to_string(), "no".to_string()),
            ]),
            ground_truth: if object_color(a) == object_color(b) { "A" } else { "B" }.into(),
            annotated_regions: vec![a.room.clone(), b.room.clone()],
            gt_trajectory_length_m: trajectory_length(scene, &targets, objects)?,
            annotated_targets: targets,
            requires_exhaustive: false,
        });
    }

    let open_obj = singles[rng.random_range(0..singles.len())];
    let targets = vec![(open_obj.label.clone(), open_obj.room.clone())];
    questions.push(Question {
        id: "q2".into(),
        text: format!(
            "What color is the {} in the {}?",
            open_obj.label, open_obj.room
        ),
        kind: QuestionKind::OpenEnded,
        options: BTreeMap::new(),
        ground_truth: object_color(open_obj),
        annotated_regions: vec![open_obj.room.clone()],
        gt_trajectory_length_m: trajectory_length(scene, &targets, objects)?,
        annotated_targets: targets,
        requires_exhaustive: false,
    });

    if dups.len() >= 2 {
        let targets: Vec<(String, String)> = dups
            .iter()
            .map(|o| (o.label.clone(), o.room.clone()))
            .collect();
        let regions: Vec<String> = dups.iter().map(|o| o.room.clone()).collect();
        questions.push(Question {
            id: "q3".into(),
            text: format!("How many {}s are there in total?", dup_label),
            kind: QuestionKind::OpenEnded,
            options: BTreeMap::new(),
            ground_truth: dups.len().to_string(),
            annotated_regions: regions,
            gt_trajectory_length_m: trajectory_length(scene, &targets, objects)?,
            annotated_targets: targets,
            requires_exhaustive: true,
        });
    }

    Ok(questions)
}
