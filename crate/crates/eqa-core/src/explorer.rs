//! Episode state machine: question parsing, initial panoramic spin,
//! interleaved global/local relevance exploration, stopping, and answering.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::client::{ChatClient, PromptConfig};
use crate::error::{Error, Result};
use crate::frontier::{
    cluster_candidates, detect_boundary_candidates, detect_candidates, detect_candidates_literal,
    rank_frontiers, FrontierCluster, FrontierQueue,
};
use crate::memory::{EpisodeMemory, MemoryEntry};
use crate::occupancy::{explored_fraction, OccupancyVolume};
use crate::relevance::{
    combined_relevance, oracle_generative_relevance, oracle_target_relevance, ScorerBinding,
    ScorerMode,
};
use crate::scene::{
    apply_action, normalize_angle, render_observation, Action, AgentState, Cell, Observation,
    Question, QuestionKind, Scene, TAU,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplorerConfig {
    pub fov: f64,
    pub rays: usize,
    pub max_range_m: f64,
    pub translation_cap_m: f64,
    pub spin_views: usize,
    pub k: usize,
    pub lambda: f64,
    pub eps: f64,
    pub min_pts: usize,
    pub delta: usize,
    pub w_size: f64,
    pub w_dist: f64,
    pub stop_threshold: f64,
    pub evidence_threshold: f64,
    pub exhaustive_fraction: f64,
    pub arrival_radius_m: f64,
    /// Steps allowed per square meter of free area.
    pub gamma_n: f64,
    pub subdivision: usize,
    /// Ablation: classic frontier-based exploration instead of doorway
    /// frontiers.
    pub fbe_only: bool,
    /// Ablation: literal disjunctive candidate predicate.
    pub eq1_literal: bool,
    pub raw_cosine: bool,
    /// Chain-of-thought instruction in the answer prompt.
    pub cot: bool,
    pub oracle_damping: f64,
}

impl Default for ExplorerConfig {
    fn default() -> Self {
        ExplorerConfig {
            fov: std::f64::consts::FRAC_PI_2,
            rays: 64,
            max_range_m: 10.0,
            translation_cap_m: 3.0,
            spin_views: 8,
            k: crate::memory::DEFAULT_K,
            lambda: crate::relevance::DEFAULT_LAMBDA,
            eps: crate::frontier::DEFAULT_EPS,
            min_pts: crate::frontier::DEFAULT_MIN_PTS,
            delta: crate::frontier::DEFAULT_DELTA,
            w_size: crate::frontier::DEFAULT_W_SIZE,
            w_dist: crate::frontier::DEFAULT_W_DIST,
            stop_threshold: 0.75,
            evidence_threshold: 0.75,
            exhaustive_fraction: 0.9,
            arrival_radius_m: 0.5,
            gamma_n: 4.0,
            subdivision: 1,
            fbe_only: false,
            eq1_literal: false,
            raw_cosine: false,
            cot: true,
            oracle_damping: crate::relevance::DEFAULT_ORACLE_DAMPING,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodePlan {
    pub regions: Vec<String>,
    pub targets: Vec<(String, String)>,
    pub max_steps: u32,
    pub question: Question,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum ExplorerPhase {
    InitialSpin,
    GlobalRelevance,
    EnteringRoom(String),
    LocalRelevance(String),
    Stopped(StopReason),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum StopReason {
    Answered,
    BudgetExhausted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StopDecision {
    pub stop: bool,
    pub rationale: String,
    pub forced_continue: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StepTiming {
    pub total_us: u64,
    pub fusion_us: u64,
    pub detection_us: u64,
    pub scoring_us: u64,
    pub client_us: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub phase: String,
    pub action: Action,
    pub position: (f64, f64),
    pub heading: f64,
    pub observation_id: u64,
    pub region_detected: String,
    /// Combined relevance per target for this step's observation.
    pub scores: Vec<f64>,
    pub timing: StepTiming,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub scene_id: String,
    pub question_id: String,
    pub question_kind: QuestionKind,
    pub requires_exhaustive: bool,
    pub plan: EpisodePlan,
    pub config: ExplorerConfig,
    pub steps: Vec<StepRecord>,
    pub memory: EpisodeMemory,
    pub stop_reason: StopReason,
    pub stop_rationale: String,
    pub answer: String,
    pub answer_rationale: String,
    pub ground_truth: String,
    pub correct: bool,
    pub steps_taken: u32,
    pub traveled_m: f64,
    pub scene_free_area_m2: f64,
    pub gt_geodesic_m: f64,
    pub first_relevant_entry_step: Option<u32>,
    pub explored_fraction_final: f64,
    pub degradations: Vec<String>,
}

impl EpisodeLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("episode log serializes")
    }

    /// Serialization with timing fields zeroed, for determinism comparisons.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        for step in &mut copy.steps {
            step.timing = StepTiming::default();
        }
        copy.to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("episode log: {e}")))
    }

    pub fn to_metrics_result(&self) -> crate::metrics::EpisodeResult {
        let labels: Vec<String> = self.plan.targets.iter().map(|t| t.0.clone()).collect();
        let sigma = match self.question_kind {
            QuestionKind::OpenEnded => {
                Some(crate::metrics::oracle_grade(&self.answer, &self.ground_truth, &labels))
            }
            QuestionKind::MultipleChoice => None,
        };
        crate::metrics::EpisodeResult {
            question_id: self.question_id.clone(),
            correct: self.correct,
            steps_taken: self.steps_taken,
            scene_free_area_m2: self.scene_free_area_m2,
            llm_raw_score: sigma,
            gt_geodesic_m: self.gt_geodesic_m,
            traveled_m: self.traveled_m,
        }
    }
}

// ---------------------------------------------------------------------------
// Scorer session: oracle logic with optional live dispatch + fallback
// ---------------------------------------------------------------------------

pub struct Scorer {
    binding: ScorerBinding,
    prompts: PromptConfig,
    client: Option<ChatClient>,
    pub degradations: Vec<String>,
    pub client_time: Duration,
}

impl Scorer {
    pub fn new(binding: ScorerBinding, prompts: PromptConfig) -> Self {
        let client = binding.client();
        Scorer {
            binding,
            prompts,
            client,
            degradations: Vec::new(),
            client_time: Duration::ZERO,
        }
    }

    pub fn oracle(config: &ExplorerConfig) -> Self {
        let mut binding = ScorerBinding::oracle();
        if let ScorerMode::Oracle { damping, .. } = &mut binding.mode {
            *damping = config.oracle_damping;
        }
        binding.raw_cosine = config.raw_cosine;
        Scorer::new(binding, PromptConfig::default())
    }

    fn call_live<T>(
        &mut self,
        what: &str,
        f: impl FnOnce(&ChatClient) -> Result<T>,
    ) -> Option<T> {
        let client = self.client.as_ref()?;
        let started = Instant::now();
        let outcome = f(client);
        self.client_time += started.elapsed();
        match outcome {
            Ok(v) => Some(v),
            Err(e) => {
                self.degradations
                    .push(format!("{what}: live call failed, oracle fallback ({e})"));
                None
            }
        }
    }

    /// Extract (R, T) and the step budget from the question.
    pub fn parse_question(
        &mut self,
        scene: &Scene,
        question: &Question,
        config: &ExplorerConfig,
    ) -> EpisodePlan {
        let max_steps = (config.gamma_n * scene.room_size_m2).ceil() as u32;
        if self.binding.is_live() {
            let prompt = self
                .prompts
                .extract_regions_targets
                .replace("{question}", &question.text);
            if let Some(parsed) = self
                .call_live("parse_question", |c| c.chat(&prompt, false))
                .and_then(|reply| parse_plan_reply(&reply.content))
            {
                let (regions, targets) = parsed;
                if !targets.is_empty() {
                    return EpisodePlan {
                        regions,
                        targets,
                        max_steps,
                        question: question.clone(),
                    };
                }
                self.degradations
                    .push("parse_question: unparseable reply, using annotations".into());
            }
        }
        EpisodePlan {
            regions: question.annotated_regions.clone(),
            targets: question.annotated_targets.clone(),
            max_steps,
            question: question.clone(),
        }
    }

    /// Room seen from the current perspective (R_t).
    pub fn detect_region(&mut self, scene: &Scene, observation: &Observation) -> String {
        if self.binding.is_live() {
            let prompt = self
                .prompts
                .detect_region
                .replace("{observation}", &summarize_observation(observation));
            if let Some(reply) = self.call_live("detect_region", |c| c.chat(&prompt, false)) {
                let lowered = reply.content.trim().to_lowercase();
                if let Some(room) = scene
                    .rooms
                    .iter()
                    .find(|r| lowered.contains(&r.name.to_lowercase()))
                {
                    return room.name.clone();
                }
                self.degradations
                    .push("detect_region: reply outside room vocabulary".into());
            }
        }
        oracle_detect_region(scene, observation)
    }

    /// Question-conditioned generative relevance of one observation.
    pub fn generative_relevance(&mut self, observation: &Observation, question: &Question) -> f64 {
        if self.binding.is_live() {
            let prompt = self
                .prompts
                .relevance_yes_no
                .replace("{question}", &question.text)
                .replace("{observation}", &summarize_observation(observation));
            if let Some(p) = self.call_live("generative_relevance", |c| c.yes_probability(&prompt))
            {
                return p.clamp(0.0, 1.0);
            }
        }
        let damping = match &self.binding.mode {
            ScorerMode::Oracle { damping, .. } => *damping,
            ScorerMode::Live(_) => crate::relevance::DEFAULT_ORACLE_DAMPING,
        };
        oracle_generative_relevance(observation, question, damping)
    }

    /// Stop decision over the current memory.
    pub fn should_stop(
        &mut self,
        memory: &EpisodeMemory,
        question: &Question,
        explored: f64,
        config: &ExplorerConfig,
    ) -> StopDecision {
        if question.requires_exhaustive && explored < config.exhaustive_fraction {
            return StopDecision {
                stop: false,
                rationale: format!(
                    "exhaustive question: explored {:.2} < {:.2}",
                    explored, config.exhaustive_fraction
                ),
                forced_continue: true,
            };
        }
        if self.binding.is_live() {
            let prompt = self
                .prompts
                .stop_condition
                .replace("{question}", &question.text)
                .replace("{snapshots}", &snapshot_block(memory));
            if let Some(p) = self.call_live("should_stop", |c| c.yes_probability(&prompt)) {
                return StopDecision {
                    stop: p >= 0.5,
                    rationale: format!("live stop probability {p:.3}"),
                    forced_continue: false,
                };
            }
        }
        let targets = memory.targets();
        let mut worst: Option<(&(String, String), f64)> = None;
        for target in &targets {
            let best = memory
                .retrieve(target)
                .ok()
                .and_then(|e| e.first())
                .map(|e| e.score.combined)
                .unwrap_or(0.0);
            if worst.map(|(_, w)| best < w).unwrap_or(true) {
                worst = Some((target, best));
            }
        }
        match worst {
            Some((target, best)) if best < config.stop_threshold => StopDecision {
                stop: false,
                rationale: format!(
                    "target ({}, {}) best score {:.3} < {:.2}",
                    target.0, target.1, best, config.stop_threshold
                ),
                forced_continue: false,
            },
            Some(_) => StopDecision {
                stop: true,
                rationale: format!(
                    "all targets at combined score >= {:.2}",
                    config.stop_threshold
                ),
                forced_continue: false,
            },
            None => StopDecision {
                stop: false,
                rationale: "no targets in memory".into(),
                forced_continue: false,
            },
        }
    }

    /// Final answer over the retained snapshots. Returns (answer, rationale).
    pub fn answer(
        &mut self,
        question: &Question,
        memory: &EpisodeMemory,
        config: &ExplorerConfig,
    ) -> (String, String) {
        if self.binding.is_live() {
            let template = match question.kind {
                QuestionKind::MultipleChoice => &self.prompts.answer_mc,
                QuestionKind::OpenEnded => &self.prompts.answer_open,
            };
            let options = question
                .options
                .iter()
                .map(|(letter, text)| format!("{letter}: {text}"))
                .collect::<Vec<_>>()
                .join("\n");
            let mut prompt = template
                .replace("{question}", &question.text)
                .replace("{options}", &options)
                .replace("{snapshots}", &snapshot_block(memory));
            if config.cot {
                prompt = format!("{}\n{}", self.prompts.cot_instruction, prompt);
            }
            if let Some(reply) = self.call_live("answer", |c| c.chat(&prompt, false)) {
                let text = reply.content.trim();
                if !text.is_empty() {
                    let answer = match question.kind {
                        QuestionKind::MultipleChoice => extract_letter(text, &question.options)
                            .unwrap_or_else(|| text.to_string()),
                        QuestionKind::OpenEnded => text.to_string(),
                    };
                    return (answer, format!("live reply: {text}"));
                }
                self.degradations.push("answer: empty live reply".into());
            }
        }
        oracle_answer(question, memory, config.evidence_threshold)
    }
}

/// Oracle region detector: dominant visible room, ties already resolved
/// lexicographically by the renderer; degenerate views fall back to the room
/// containing the agent.
pub fn oracle_detect_region(scene: &Scene, observation: &Observation) -> String {
    if let Some(room) = observation.visible_rooms.first() {
        return room.name.clone();
    }
    let cell = observation.pose.cell(scene);
    scene.room_name_of(cell).unwrap_or("").to_string()
}

/// Oracle answerer: ground truth iff every target's best snapshot shows the
/// target above threshold; otherwise a deterministic wrong/default answer.
pub fn oracle_answer(
    question: &Question,
    memory: &EpisodeMemory,
    evidence_threshold: f64,
) -> (String, String) {
    let mut missing = Vec::new();
    for target in &memory.targets() {
        let visible = memory
            .retrieve(target)
            .ok()
            .and_then(|entries| {
                entries
                    .iter()
                    .map(|e| e.target_visibility)
                    .fold(None, |acc: Option<f64>, v| {
                        Some(acc.map_or(v, |a| a.max(v)))
                    })
            })
            .unwrap_or(0.0);
        if visible < evidence_threshold {
            missing.push(format!("({}, {})", target.0, target.1));
        }
    }
    if missing.is_empty() {
        (
            question.ground_truth.clone(),
            "all targets evidenced above threshold".into(),
        )
    } else {
        let answer = match question.kind {
            QuestionKind::OpenEnded => "unknown".to_string(),
            QuestionKind::MultipleChoice => question
                .options
                .keys()
                .find(|letter| **letter != question.ground_truth)
                .cloned()
                .unwrap_or_else(|| question.ground_truth.clone()),
        };
        (answer, format!("insufficient evidence for {}", missing.join(", ")))
    }
}

fn parse_plan_reply(content: &str) -> Option<(Vec<String>, Vec<(String, String)>)> {
    let start = content.find('{')?;
    let end = content.rfind('}')?;
    let value: serde_json::Value = serde_json::from_str(&content[start..=end]).ok()?;
    let regions = value["regions"]
        .as_array()?
        .iter()
        .filter_map(|v| v.as_str().map(String::from))
        .collect();
    let targets = value["targets"]
        .as_array()?
        .iter()
        .filter_map(|pair| {
            let arr = pair.as_array()?;
            Some((arr.first()?.as_str()?.to_string(), arr.get(1)?.as_str()?.to_string()))
        })
        .collect();
    Some((regions, targets))
}

fn extract_letter(text: &str, options: &std::collections::BTreeMap<String, String>) -> Option<String> {
    for line in text.lines().rev() {
        for token in line.split(|c: char| !c.is_ascii_alphanumeric()) {
            let upper = token.to_uppercase();
            if options.contains_key(&upper) {
                return Some(upper);
            }
        }
    }
    None
}

/// Deterministic textual serialization of an observation for prompts/logs.
pub fn summarize_observation(obs: &Observation) -> String {
    let rooms = obs
        .visible_rooms
        .iter()
        .map(|r| format!("{}:{:.3}", r.name, r.fraction))
        .collect::<Vec<_>>()
        .join(", ");
    let objects = obs
        .visible_objects
        .iter()
        .map(|o| format!("{}@{}:{:.3}", o.label, o.room, o.fraction))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "pose=({:.2}, {:.2}, {:.2}); rooms=[{rooms}]; objects=[{objects}]",
        obs.pose.position.0, obs.pose.position.1, obs.pose.heading
    )
}

fn snapshot_block(memory: &EpisodeMemory) -> String {
    let mut seen = BTreeSet::new();
    let mut lines = Vec::new();
    for entry in memory.all_snapshots() {
        if seen.insert(entry.observation_id) {
            lines.push(format!("- [{}] {}", entry.observation_id, entry.summary));
        }
    }
    lines.join("\n")
}

/// Direction toward the centroid of the largest visible connected component
/// of `room`, plus the centroid itself in meters.
pub fn room_entry_direction(
    scene: &Scene,
    observation: &Observation,
    room: &str,
) -> Result<((f64, f64), (f64, f64))> {
    let room_cells = &scene
        .room_by_name(room)
        .ok_or_else(|| Error::RoomNotVisible(room.to_string()))?
        .cells;
    let visible: BTreeSet<Cell> = observation
        .visible_cells
        .intersection(room_cells)
        .copied()
        .collect();
    if visible.is_empty() {
        return Err(Error::RoomNotVisible(room.to_string()));
    }
    let component = largest_component(&visible);
    let n = component.len() as f64;
    let (sum_x, sum_y) = component.iter().fold((0.0, 0.0), |acc, &cell| {
        let (x, y) = scene.center(cell);
        (acc.0 + x, acc.1 + y)
    });
    let centroid = (sum_x / n, sum_y / n);
    let (px, py) = observation.pose.position;
    let (dx, dy) = (centroid.0 - px, centroid.1 - py);
    let norm = (dx * dx + dy * dy).sqrt();
    let direction = if norm < 1e-9 {
        (observation.pose.heading.cos(), observation.pose.heading.sin())
    } else {
        (dx / norm, dy / norm)
    };
    Ok((direction, centroid))
}

fn largest_component(cells: &BTreeSet<Cell>) -> BTreeSet<Cell> {
    let mut remaining: BTreeSet<Cell> = cells.clone();
    let mut best: BTreeSet<Cell> = BTreeSet::new();
    while let Some(&seed) = remaining.iter().next() {
        let mut component = BTreeSet::new();
        component.insert(seed);
        remaining.remove(&seed);
        let mut queue = std::collections::VecDeque::from([seed]);
        while let Some((r, c)) = queue.pop_front() {
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 {
                    continue;
                }
                let next = (nr as usize, nc as usize);
                if remaining.remove(&next) {
                    component.insert(next);
                    queue.push_back(next);
                }
            }
        }
        if component.len() > best.len() {
            best = component;
        }
    }
    best
}

/// Standalone initial spin: rotate a full turn in `spin_views` increments,
/// rendering and fusing one observation per view.
pub fn initial_spin(
    scene: &Scene,
    state: &AgentState,
    config: &ExplorerConfig,
) -> Result<(Vec<Observation>, OccupancyVolume, AgentState)> {
    let mut volume = OccupancyVolume::for_scene(scene, config.subdivision);
    let mut observations = Vec::with_capacity(config.spin_views);
    let mut current = state.clone();
    let step = TAU / config.spin_views as f64;
    for i in 0..config.spin_views {
        current = apply_action(scene, &current, Action::Rotate(step), config.translation_cap_m)?;
        let obs = render_observation(
            scene,
            &current,
            i as u64,
            config.fov,
            config.max_range_m,
            config.rays,
        );
        volume.fuse_scan(&obs);
        observations.push(obs);
    }
    Ok((observations, volume, current))
}

// ---------------------------------------------------------------------------
// Episode loop
// ---------------------------------------------------------------------------

struct Episode<'a> {
    scene: &'a Scene,
    config: &'a ExplorerConfig,
    plan: EpisodePlan,
    scorer: Scorer,
    memory: EpisodeMemory,
    volume: OccupancyVolume,
    state: AgentState,
    phase: ExplorerPhase,
    queue: FrontierQueue,
    current_frontier: Option<FrontierCluster>,
    visited_centroids: Vec<(f64, f64)>,
    visited_rooms: BTreeSet<String>,
    entry_attempts: std::collections::BTreeMap<String, u32>,
    entry_waypoint: (f64, f64),
    spin_progress: usize,
    spin_saw_relevant: bool,
    last_obs: Option<Observation>,
    next_obs_id: u64,
    steps: Vec<StepRecord>,
    first_relevant_entry_step: Option<u32>,
    stop_rationale: String,
    degradations: Vec<String>,
}

impl<'a> Episode<'a> {
    /// Take one action, render + fuse + score + insert, and log the step.
    fn act(&mut self, action: Action, phase_label: &str) -> Result<()> {
        let step_started = Instant::now();
        let client_before = self.scorer.client_time;
        self.state = apply_action(self.scene, &self.state, action, self.config.translation_cap_m)?;

        let obs_id = self.next_obs_id;
        self.next_obs_id += 1;
        let obs = render_observation(
            self.scene,
            &self.state,
            obs_id,
            self.config.fov,
            self.config.max_range_m,
            self.config.rays,
        );

        let fusion_started = Instant::now();
        self.volume.fuse_scan(&obs);
        let fusion_us = fusion_started.elapsed().as_micros() as u64;

        let scoring_started = Instant::now();
        let region = self.scorer.detect_region(self.scene, &obs);
        let vlm = self.scorer.generative_relevance(&obs, &self.plan.question);
        let summary = summarize_observation(&obs);
        let mut scores = Vec::with_capacity(self.plan.targets.len());
        for target in self.plan.targets.clone() {
            // Oracle visibility already lives in [0, 1]; the raw-cosine
            // switch only matters for embedding-backed scorers.
            let clip = oracle_target_relevance(&obs, (&target.0, &target.1));
            let breakdown = combined_relevance(clip, vlm, self.config.lambda)
                .expect("scores in range");
            scores.push(breakdown.combined);
            let entry = MemoryEntry {
                observation_id: obs_id,
                score: breakdown,
                pose: self.state.clone(),
                summary: summary.clone(),
                target_visibility: clip,
            };
            self.memory.insert(&target, entry)?;
        }
        let scoring_us = scoring_started.elapsed().as_micros() as u64;
        let client_us = (self.scorer.client_time - client_before).as_micros() as u64;

        if self.first_relevant_entry_step.is_none() {
            let here = self.scene.room_name_of(self.state.cell(self.scene));
            if let Some(room) = here {
                if self.plan.regions.iter().any(|r| r == room) {
                    self.first_relevant_entry_step = Some(self.state.step_count);
                }
            }
        }

        self.steps.push(StepRecord {
            step: self.state.step_count,
            phase: phase_label.to_string(),
            action,
            position: self.state.position,
            heading: self.state.heading,
            observation_id: obs_id,
            region_detected: region,
            scores,
            timing: StepTiming {
                total_us: step_started.elapsed().as_micros() as u64,
                fusion_us,
                detection_us: 0,
                scoring_us,
                client_us,
            },
        });
        self.last_obs = Some(obs);
        Ok(())
    }

    fn last_region(&self) -> Option<&str> {
        self.steps.last().map(|s| s.region_detected.as_str())
    }

    fn explored(&self) -> f64 {
        explored_fraction(&self.volume.slice(), self.scene)
    }

    fn current_room(&self) -> Option<&str> {
        self.scene.room_name_of(self.state.cell(self.scene))
    }

    /// Rebuild the frontier queue from the current slice, excluding visited
    /// centroids. Records detection time on the last logged step.
    fn rebuild_queue(&mut self) {
        let started = Instant::now();
        let slice = self.volume.slice();
        let candidates = if self.config.fbe_only {
            detect_boundary_candidates(&slice)
        } else if self.config.eq1_literal {
            detect_candidates_literal(&slice, self.config.delta)
        } else {
            detect_candidates(&slice, self.config.delta)
        };
        let mut clusters = cluster_candidates(&candidates, self.config.eps, self.config.min_pts);
        clusters.retain(|cl| {
            !self.visited_centroids.iter().any(|(r, c)| {
                let dr = cl.centroid.0 - r;
                let dc = cl.centroid.1 - c;
                (dr * dr + dc * dc).sqrt() < self.config.eps
            })
        });
        self.queue = rank_frontiers(clusters, &slice, self.config.w_size, self.config.w_dist);
        // Doorway mode falls back to classic boundary frontiers when no
        // doorway clusters remain.
        if self.queue.is_empty() && !self.config.fbe_only {
            let boundary = detect_boundary_candidates(&slice);
            let mut clusters =
                cluster_candidates(&boundary, self.config.eps, self.config.min_pts);
            clusters.retain(|cl| {
                !self.visited_centroids.iter().any(|(r, c)| {
                    let dr = cl.centroid.0 - r;
                    let dc = cl.centroid.1 - c;
                    (dr * dr + dc * dc).sqrt() < self.config.eps
                })
            });
            self.queue = rank_frontiers(clusters, &slice, self.config.w_size, self.config.w_dist);
        }
        if let Some(last) = self.steps.last_mut() {
            last.timing.detection_us += started.elapsed().as_micros() as u64;
        }
    }

    fn frontier_waypoint(&self, frontier: &FrontierCluster) -> (f64, f64) {
        let res = self.volume.resolution;
        (
            (frontier.centroid.1 + 0.5) * res,
            (frontier.centroid.0 + 0.5) * res,
        )
    }

    /// Rotate toward the waypoint if badly misaligned, else translate.
    fn face_or_move(&mut self, waypoint: (f64, f64), phase_label: &str) -> Result<bool> {
        let (dx, dy) = (
            waypoint.0 - self.state.position.0,
            waypoint.1 - self.state.position.1,
        );
        if dx.abs() < 1e-9 && dy.abs() < 1e-9 {
            return Ok(false);
        }
        let desired = normalize_angle(dy.atan2(dx));
        let mut diff = desired - self.state.heading;
        while diff > std::f64::consts::PI {
            diff -= TAU;
        }
        while diff < -std::f64::consts::PI {
            diff += TAU;
        }
        if diff.abs() > TAU / self.config.spin_views as f64 / 2.0 {
            self.act(Action::Rotate(diff), phase_label)?;
        } else {
            let before = self.state.distance_traveled_m;
            self.act(
                Action::TranslateToward {
                    x: waypoint.0,
                    y: waypoint.1,
                },
                phase_label,
            )?;
            if self.state.distance_traveled_m - before < 1e-6 {
                return Ok(false); // no progress
            }
        }
        Ok(true)
    }
}

/// Run one full episode to its stop condition or budget.
pub fn run_episode(
    scene: &Scene,
    scene_id: &str,
    question_id: &str,
    config: &ExplorerConfig,
    binding: &ScorerBinding,
) -> Result<EpisodeLog> {
    let question = scene.question(question_id)?.clone();
    let mut scorer = Scorer::new(binding.clone(), PromptConfig::default());
    let plan = scorer.parse_question(scene, &question, config);

    let memory = EpisodeMemory::new(&plan.targets, config.k);
    let volume = OccupancyVolume::for_scene(scene, config.subdivision);
    let state = AgentState::at_start(scene);

    let mut ep = Episode {
        scene,
        config,
        plan,
        scorer,
        memory,
        volume,
        state,
        phase: ExplorerPhase::InitialSpin,
        queue: FrontierQueue::default(),
        current_frontier: None,
        visited_centroids: Vec::new(),
        visited_rooms: BTreeSet::new(),
        entry_attempts: std::collections::BTreeMap::new(),
        entry_waypoint: (0.0, 0.0),
        spin_progress: 0,
        spin_saw_relevant: false,
        last_obs: None,
        next_obs_id: 0,
        steps: Vec::new(),
        first_relevant_entry_step: None,
        stop_rationale: String::new(),
        degradations: Vec::new(),
    };

    // Starting inside a relevant room counts as step 0 entry.
    if let Some(room) = ep.current_room() {
        if ep.plan.regions.iter().any(|r| r == room) {
            ep.first_relevant_entry_step = Some(0);
        }
    }

    let spin_step = TAU / config.spin_views as f64;
    let mut idle_transitions = 0u32;

    while ep.state.step_count < ep.plan.max_steps {
        match ep.phase.clone() {
            ExplorerPhase::InitialSpin => {
                ep.act(Action::Rotate(spin_step), "initial_spin")?;
                if let Some(region) = ep.last_region() {
                    if ep.plan.regions.iter().any(|r| r == region) {
                        ep.spin_saw_relevant = true;
                    }
                }
                ep.spin_progress += 1;
                if ep.spin_progress == config.spin_views {
                    if ep.spin_saw_relevant {
                        let decision = ep.scorer.should_stop(
                            &ep.memory,
                            &ep.plan.question,
                            ep.explored(),
                            config,
                        );
                        if decision.stop {
                            ep.stop_rationale = decision.rationale;
                            ep.phase = ExplorerPhase::Stopped(StopReason::Answered);
                            continue;
                        }
                    }
                    ep.spin_progress = 0;
                    ep.spin_saw_relevant = false;
                    ep.phase = ExplorerPhase::GlobalRelevance;
                }
            }

            ExplorerPhase::GlobalRelevance => {
                // Relevant-room sighting takes precedence over frontier travel.
                let sighted = ep.last_region().map(str::to_string).and_then(|region| {
                    let relevant = ep.plan.regions.iter().any(|r| r == &region);
                    let unvisited = !ep.visited_rooms.contains(&region);
                    let attempts = *ep.entry_attempts.get(&region).unwrap_or(&0);
                    (relevant && unvisited && attempts < 3).then_some(region)
                });
                if let Some(room) = sighted {
                    if ep.current_room() == Some(room.as_str()) {
                        ep.phase = ExplorerPhase::LocalRelevance(room);
                        idle_transitions += 1;
                    } else if let Some(obs) = &ep.last_obs {
                        match room_entry_direction(scene, obs, &room) {
                            Ok((_direction, centroid)) => {
                                *ep.entry_attempts.entry(room.clone()).or_insert(0) += 1;
                                ep.entry_waypoint = centroid;
                                ep.phase = ExplorerPhase::EnteringRoom(room);
                                idle_transitions += 1;
                            }
                            Err(_) => {
                                // Detected but not visible: keep exploring.
                                global_travel(&mut ep)?;
                            }
                        }
                    } else {
                        global_travel(&mut ep)?;
                    }
                } else {
                    global_travel(&mut ep)?;
                }
                if matches!(ep.phase, ExplorerPhase::Stopped(_)) {
                    continue;
                }
            }

            ExplorerPhase::EnteringRoom(room) => {
                if ep.current_room() == Some(room.as_str()) {
                    ep.phase = ExplorerPhase::LocalRelevance(room);
                    idle_transitions += 1;
                    continue;
                }
                if let Some(obs) = &ep.last_obs {
                    if let Ok((_dir, centroid)) = room_entry_direction(scene, obs, &room) {
                        ep.entry_waypoint = centroid;
                    }
                }
                let waypoint = ep.entry_waypoint;
                match ep.face_or_move(waypoint, "entering_room") {
                    Ok(true) => {}
                    Ok(false) | Err(Error::BlockedPath { .. }) => {
                        // Stuck: give up on this entry and return to global.
                        ep.phase = ExplorerPhase::GlobalRelevance;
                        idle_transitions += 1;
                    }
                    Err(e) => return Err(e),
                }
            }

            ExplorerPhase::LocalRelevance(room) => {
                ep.act(Action::Rotate(spin_step), "local_relevance")?;
                ep.spin_progress += 1;
                let relevant_view = ep
                    .last_region()
                    .map(|r| ep.plan.regions.iter().any(|reg| reg == r))
                    .unwrap_or(false);
                if relevant_view {
                    let decision = ep.scorer.should_stop(
                        &ep.memory,
                        &ep.plan.question,
                        ep.explored(),
                        config,
                    );
                    if decision.stop {
                        ep.stop_rationale = decision.rationale;
                        ep.phase = ExplorerPhase::Stopped(StopReason::Answered);
                        ep.spin_progress = 0;
                        continue;
                    }
                }
                if ep.spin_progress == config.spin_views {
                    ep.spin_progress = 0;
                    ep.visited_rooms.insert(room);
                    ep.phase = ExplorerPhase::GlobalRelevance;
                }
            }

            ExplorerPhase::Stopped(_) => break,
        }

        if idle_transitions > 4 * config.spin_views as u32 {
            // Safety valve against transition livelock.
            ep.stop_rationale = "no further productive transitions".into();
            ep.phase = ExplorerPhase::Stopped(StopReason::BudgetExhausted);
            break;
        }
        if ep.steps.last().map(|s| s.step) == Some(ep.state.step_count) {
            idle_transitions = 0;
        }
    }

    let stop_reason = match &ep.phase {
        ExplorerPhase::Stopped(reason) => *reason,
        _ => {
            if ep.stop_rationale.is_empty() {
                ep.stop_rationale = format!("budget of {} steps exhausted", ep.plan.max_steps);
            }
            StopReason::BudgetExhausted
        }
    };

    let (answer, answer_rationale) = ep.scorer.answer(&ep.plan.question, &ep.memory, config);
    let correct = answers_match(&question, &answer);
    let explored_final = ep.explored();

    let mut degradations = ep.degradations;
    degradations.extend(ep.scorer.degradations.clone());

    Ok(EpisodeLog {
        scene_id: scene_id.to_string(),
        question_id: question_id.to_string(),
        question_kind: question.kind,
        requires_exhaustive: question.requires_exhaustive,
        plan: ep.plan,
        config: config.clone(),
        steps: ep.steps,
        memory: ep.memory,
        stop_reason,
        stop_rationale: if ep.stop_rationale.is_empty() {
            "stopped".into()
        } else {
            ep.stop_rationale
        },
        answer,
        answer_rationale,
        ground_truth: question.ground_truth.clone(),
        correct,
        steps_taken: ep.state.step_count,
        traveled_m: ep.state.distance_traveled_m,
        scene_free_area_m2: scene.room_size_m2,
        gt_geodesic_m: question.gt_trajectory_length_m,
        first_relevant_entry_step: ep.first_relevant_entry_step,
        explored_fraction_final: explored_final,
        degradations,
    })
}

fn answers_match(question: &Question, answer: &str) -> bool {
    match question.kind {
        QuestionKind::MultipleChoice => answer.trim().eq_ignore_ascii_case(&question.ground_truth),
        QuestionKind::OpenEnded => answer
            .trim()
            .eq_ignore_ascii_case(question.ground_truth.trim()),
    }
}

/// One global-relevance travel step toward the current frontier.
fn global_travel(ep: &mut Episode) -> Result<()> {
    if ep.current_frontier.is_none() {
        if ep.queue.is_empty() {
            ep.rebuild_queue();
        }
        ep.current_frontier = ep.queue.pop();
        if ep.current_frontier.is_none() {
            ep.stop_rationale = "no frontiers or unexplored boundaries remain".into();
            ep.phase = ExplorerPhase::Stopped(StopReason::BudgetExhausted);
            return Ok(());
        }
    }
    let frontier = ep.current_frontier.clone().expect("frontier present");
    let waypoint = ep.frontier_waypoint(&frontier);
    let (dx, dy) = (
        waypoint.0 - ep.state.position.0,
        waypoint.1 - ep.state.position.1,
    );
    if (dx * dx + dy * dy).sqrt() <= ep.config.arrival_radius_m {
        ep.visited_centroids.push(frontier.centroid);
        ep.current_frontier = None;
        ep.rebuild_queue();
        return Ok(());
    }
    match ep.face_or_move(waypoint, "global_relevance") {
        Ok(true) => Ok(()),
        Ok(false) | Err(Error::BlockedPath { .. }) => {
            ep.visited_centroids.push(frontier.centroid);
            ep.current_frontier = None;
            Ok(())
        }
        Err(e) => Err(e),
    }
}
