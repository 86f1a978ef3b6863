//! Observation relevance scoring: embedding-cosine target relevance,
//! generative yes-probability relevance, and their λ-weighted combination,
//! behind a scorer binding with a deterministic oracle and a live client.

use serde::{Deserialize, Serialize};

use crate::client::{ChatClient, EndpointConfig};
use crate::error::{Error, Result};
use crate::scene::{Observation, Question};

pub const DEFAULT_LAMBDA: f64 = 0.7;
pub const DEFAULT_ORACLE_DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceBreakdown {
    pub clip_score: f64,
    pub vlm_score: f64,
    pub lambda: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ScorerMode {
    Oracle {
        embedding_dim: usize,
        /// Multiplier applied when the observation's dominant room is not
        /// among the question's annotated regions.
        damping: f64,
    },
    Live(EndpointConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorerBinding {
    pub mode: ScorerMode,
    /// Keep the raw cosine range [-1, 1] instead of rescaling to [0, 1].
    pub raw_cosine: bool,
}

impl Default for ScorerBinding {
    fn default() -> Self {
        ScorerBinding::oracle()
    }
}

impl ScorerBinding {
    pub fn oracle() -> Self {
        ScorerBinding {
            mode: ScorerMode::Oracle {
                embedding_dim: 16,
                damping: DEFAULT_ORACLE_DAMPING,
            },
            raw_cosine: false,
        }
    }

    pub fn live(config: EndpointConfig) -> Self {
        ScorerBinding {
            mode: ScorerMode::Live(config),
            raw_cosine: false,
        }
    }

    pub fn is_live(&self) -> bool {
        matches!(self.mode, ScorerMode::Live(_))
    }

    pub fn client(&self) -> Option<ChatClient> {
        match &self.mode {
            ScorerMode::Live(cfg) => Some(ChatClient::new(cfg.clone())),
            ScorerMode::Oracle { .. } => None,
        }
    }
}

/// Cosine similarity between two embeddings, affinely rescaled from [-1, 1]
/// to [0, 1] via (c + 1) / 2 unless `raw` is set.
pub fn cosine_relevance(obs: &[f64], target: &[f64], raw: bool) -> Result<f64> {
    if obs.len() != target.len() {
        return Err(Error::DimensionMismatch {
            left: obs.len(),
            right: target.len(),
        });
    }
    let dot: f64 = obs.iter().zip(target).map(|(a, b)| a * b).sum();
    let na: f64 = obs.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = target.iter().map(|b| b * b).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let cosine = (dot / (na * nb)).clamp(-1.0, 1.0);
    Ok(if raw { cosine } else { (cosine + 1.0) / 2.0 })
}

/// Deterministic stand-in for embedding relevance: the visible fraction of
/// the target object when its room matches (or no room is specified), else 0.
pub fn oracle_target_relevance(observation: &Observation, target: (&str, &str)) -> f64 {
    let (label, room) = target;
    observation
        .visible_objects
        .iter()
        .filter(|v| v.label == label && (room.is_empty() || v.room == room))
        .map(|v| v.fraction)
        .fold(0.0, f64::max)
}

/// Oracle-mode generative relevance: max target visibility, damped when the
/// observation's dominant room is outside the annotated regions.
pub fn oracle_generative_relevance(
    observation: &Observation,
    question: &Question,
    damping: f64,
) -> f64 {
    let best = question
        .annotated_targets
        .iter()
        .map(|(label, room)| oracle_target_relevance(observation, (label, room)))
        .fold(0.0, f64::max);
    let dominant_room = observation.visible_rooms.first().map(|r| r.name.as_str());
    let in_region = dominant_room
        .map(|room| question.annotated_regions.iter().any(|r| r == room))
        .unwrap_or(false);
    if in_region {
        best
    } else {
        best * damping
    }
}

/// λ-weighted combination of the two component scores.
pub fn combined_relevance(
    clip_score: f64,
    vlm_score: f64,
    lambda: f64,
) -> Result<RelevanceBreakdown> {
    for (name, v) in [
        ("clip_score", clip_score),
        ("vlm_score", vlm_score),
        ("lambda", lambda),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange(format!("{name} = {v}")));
        }
    }
    Ok(RelevanceBreakdown {
        clip_score,
        vlm_score,
        lambda,
        combined: lambda * clip_score + (1.0 - lambda) * vlm_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{render_observation, AgentState, SceneObject};
    use std::collections::BTreeMap;

    #[test]
    fn identical_vectors_score_one() {
        let v = vec![0.3, -0.2, 0.9];
        assert!((cosine_relevance(&v, &v, false).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_vectors_score_half() {
        let a = vec![1.0, 0.0];
        let b = vec![0.0, 1.0];
        assert!((cosine_relevance(&a, &b, false).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn forty_five_degree_rescale() {
        let a = vec![1.0, 0.0];
        let b = vec![1.0, 1.0];
        let expected = (1.0 / 2f64.sqrt() + 1.0) / 2.0;
        assert!((cosine_relevance(&a, &b, false).unwrap() - expected).abs() < 1e-12);
        assert!((cosine_relevance(&a, &b, true).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_vector_and_dimension_errors() {
        assert!(matches!(
            cosine_relevance(&[0.0, 0.0], &[1.0, 0.0], false),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            cosine_relevance(&[1.0], &[1.0, 0.0], false),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn combined_boundaries_and_arithmetic() {
        let b = combined_relevance(0.8, 0.5, 1.0).unwrap();
        assert_eq!(b.combined, 0.8);
        let b = combined_relevance(0.8, 0.5, 0.0).unwrap();
        assert_eq!(b.combined, 0.5);
        let b = combined_relevance(0.8, 0.5, 0.7).unwrap();
        assert!((b.combined - 0.71).abs() < 1e-12);
        assert!(combined_relevance(1.2, 0.5, 0.7).is_err());
    }

    #[test]
    fn combined_is_monotone_in_each_score() {
        let lambda = 0.7;
        let mut last = -1.0;
        for i in 0..=10 {
            let c = combined_relevance(i as f64 / 10.0, 0.4, lambda)
                .unwrap()
                .combined;
            assert!(c >= last);
            last = c;
        }
        let mut last = -1.0;
        for i in 0..=10 {
            let c = combined_relevance(0.4, i as f64 / 10.0, lambda)
                .unwrap()
                .combined;
            assert!(c >= last);
            last = c;
        }
    }

    fn observed_fixture() -> (crate::scene::Scene, Observation) {
        let grid = ["#####", "#...#", "#...#", "#####"];
        let mut scene = crate::scene::test_scene(
            &grid,
            vec![("den", vec![(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)])],
        );
        scene.objects.push(SceneObject {
            label: "vase".into(),
            room: "den".into(),
            cells: [(1, 3), (2, 3)].into_iter().collect(),
            attributes: BTreeMap::new(),
        });
        let state = AgentState {
            position: (1.5, 1.5),
            heading: 0.0,
            step_count: 0,
            distance_traveled_m: 0.0,
        };
        let obs = render_observation(&scene, &state, 0, crate::scene::TAU, 10.0, 64);
        (scene, obs)
    }

    #[test]
    fn oracle_relevance_tracks_visibility() {
        let (_scene, obs) = observed_fixture();
        assert_eq!(oracle_target_relevance(&obs, ("vase", "den")), 1.0);
        assert_eq!(oracle_target_relevance(&obs, ("vase", "attic")), 0.0);
        assert_eq!(oracle_target_relevance(&obs, ("sofa", "den")), 0.0);
        // Unspecified room matches anywhere.
        assert_eq!(oracle_target_relevance(&obs, ("vase", "")), 1.0);
    }

    #[test]
    fn generative_oracle_damps_out_of_region() {
        let (_scene, obs) = observed_fixture();
        let q = Question {
            id: "q".into(),
            text: "is there a vase".into(),
            kind: crate::scene::QuestionKind::OpenEnded,
            options: BTreeMap::new(),
            ground_truth: "yes".into(),
            annotated_regions: vec!["den".into()],
            annotated_targets: vec![("vase".into(), "den".into())],
            gt_trajectory_length_m: 0.0,
            requires_exhaustive: false,
        };
        assert_eq!(oracle_generative_relevance(&obs, &q, 0.5), 1.0);
        let mut elsewhere = q.clone();
        elsewhere.annotated_regions = vec![];
        // Dominant room no longer annotated: damped by 0.5.
        assert_eq!(oracle_generative_relevance(&obs, &elsewhere, 0.5), 0.5);
    }
}
