//! Evaluation metrics over completed episode logs: success rate, normalized
//! steps, rubric-based answer scores, geodesic path efficiency, and the grid
//! geodesic distance they depend on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{shortest_path_cells, Scene};

pub const DEFAULT_GAMMA_S: f64 = 4.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub question_id: String,
    pub correct: bool,
    /// q_i: steps taken.
    pub steps_taken: u32,
    /// S_i: scene free area in square meters.
    pub scene_free_area_m2: f64,
    /// σ_i: grader score 1..5, open-ended questions only.
    pub llm_raw_score: Option<u8>,
    /// l_i: ground-truth geodesic length in meters.
    pub gt_geodesic_m: f64,
    /// p_i: distance traveled by the agent in meters.
    pub traveled_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaConvention {
    /// δ_i = (σ_i − 1) / 4
    OpenEqa,
    /// δ_i = σ_i / 5
    FineEqa,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_total: usize,
    pub sr_percent: Option<f64>,
    pub normalized_steps: f64,
    pub llm_score_percent: Option<f64>,
    pub llm_match_percent: Option<f64>,
    pub e_path_openeqa_percent: Option<f64>,
    pub e_path_fineeqa_percent: Option<f64>,
    pub per_question: Vec<EpisodeResult>,
}

/// 100 · correct / N_total, multiple-choice questions.
pub fn success_rate(results: &[EpisodeResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyInput("success_rate".into()));
    }
    let correct = results.iter().filter(|r| r.correct).count();
    Ok(100.0 * correct as f64 / results.len() as f64)
}

/// Mean over i of q_i / sqrt(S_i · γ_s).
pub fn normalized_steps(results: &[EpisodeResult], gamma_s: f64) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyInput("normalized_steps".into()));
    }
    if gamma_s <= 0.0 {
        return Err(Error::OutOfRange(format!("gamma_s = {gamma_s}")));
    }
    let mut sum = 0.0;
    for r in results {
        if r.scene_free_area_m2 <= 0.0 {
            return Err(Error::OutOfRange(format!(
                "scene_free_area_m2 = {} for {}",
                r.scene_free_area_m2, r.question_id
            )));
        }
        sum += r.steps_taken as f64 / (r.scene_free_area_m2 * gamma_s).sqrt();
    }
    Ok(sum / results.len() as f64)
}

fn raw_scores(results: &[EpisodeResult]) -> Result<Vec<f64>> {
    results
        .iter()
        .map(|r| {
            r.llm_raw_score
                .map(|s| s as f64)
                .ok_or_else(|| Error::MissingField(format!("llm_raw_score for {}", r.question_id)))
        })
        .collect()
}

/// Mean over i of (σ_i / 5) · 100.
pub fn llm_score(results: &[EpisodeResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyInput("llm_score".into()));
    }
    let scores = raw_scores(results)?;
    Ok(scores.iter().map(|s| s / 5.0 * 100.0).sum::<f64>() / scores.len() as f64)
}

/// Mean over i of ((σ_i − 1) / 4) · 100.
pub fn llm_match(results: &[EpisodeResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyInput("llm_match".into()));
    }
    let scores = raw_scores(results)?;
    Ok(scores.iter().map(|s| (s - 1.0) / 4.0 * 100.0).sum::<f64>() / scores.len() as f64)
}

/// Mean over i of δ_i · l_i / max(p_i, l_i) · 100.
pub fn path_efficiency(results: &[EpisodeResult], convention: DeltaConvention) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyInput("path_efficiency".into()));
    }
    let scores = raw_scores(results)?;
    let mut sum = 0.0;
    for (r, sigma) in results.iter().zip(&scores) {
        let delta = match convention {
            DeltaConvention::OpenEqa => (sigma - 1.0) / 4.0,
            DeltaConvention::FineEqa => sigma / 5.0,
        };
        let denom = r.traveled_m.max(r.gt_geodesic_m);
        let ratio = if denom > 0.0 {
            r.gt_geodesic_m / denom
        } else {
            1.0
        };
        sum += delta * ratio * 100.0;
    }
    Ok(sum / results.len() as f64)
}

/// Shortest free-space path length between two continuous positions, via
/// uniform-cost search over free cells with 8-connectivity; endpoints are
/// snapped to cell centers.
pub fn geodesic_distance(scene: &Scene, a: (f64, f64), b: (f64, f64)) -> Result<f64> {
    let ca = scene.cell_of(a.0, a.1);
    let cb = scene.cell_of(b.0, b.1);
    if ca == cb {
        return Ok(0.0);
    }
    let path = shortest_path_cells(scene, ca, cb)
        .ok_or(Error::Unreachable(a.0, a.1, b.0, b.1))?;
    Ok(path
        .windows(2)
        .map(|w| {
            if w[0].0 != w[1].0 && w[0].1 != w[1].1 {
                std::f64::consts::SQRT_2 * scene.cell_size
            } else {
                scene.cell_size
            }
        })
        .sum())
}

/// Aggregate every metric that the available fields support.
pub fn report(results: Vec<EpisodeResult>) -> Result<MetricsReport> {
    if results.is_empty() {
        return Err(Error::EmptyInput("report".into()));
    }
    let have_sigma = results.iter().all(|r| r.llm_raw_score.is_some());
    Ok(MetricsReport {
        n_total: results.len(),
        sr_percent: Some(success_rate(&results)?),
        normalized_steps: normalized_steps(&results, DEFAULT_GAMMA_S)?,
        llm_score_percent: have_sigma.then(|| llm_score(&results)).transpose()?,
        llm_match_percent: have_sigma.then(|| llm_match(&results)).transpose()?,
        e_path_openeqa_percent: have_sigma
            .then(|| path_efficiency(&results, DeltaConvention::OpenEqa))
            .transpose()?,
        e_path_fineeqa_percent: have_sigma
            .then(|| path_efficiency(&results, DeltaConvention::FineEqa))
            .transpose()?,
        per_question: results,
    })
}

/// Deterministic grader standing in for the external rubric: exact match 5,
/// substring containment 4, mentions a target object 2, otherwise 1.
pub fn oracle_grade(answer: &str, ground_truth: &str, target_labels: &[String]) -> u8 {
    let a = answer.trim().to_lowercase();
    let g = ground_truth.trim().to_lowercase();
    if a == g {
        return 5;
    }
    if !a.is_empty() && (a.contains(&g) || g.contains(&a)) {
        return 4;
    }
    if target_labels
        .iter()
        .any(|t| a.contains(&t.trim().to_lowercase()))
    {
        return 2;
    }
    1
}
