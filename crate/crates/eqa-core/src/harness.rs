//! Batch orchestration: corpus loading, episode runs, benchmark aggregation
//! with repeat trials, and parameter sweeps.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explorer::{run_episode, EpisodeLog, ExplorerConfig};
use crate::gen::GenConfig;
use crate::metrics::{report, EpisodeResult, MetricsReport};
use crate::relevance::ScorerBinding;
use crate::scene::{load_scene, Scene};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub explorer: ExplorerConfig,
    #[serde(default)]
    pub scorer: ScorerBinding,
    #[serde(default)]
    pub gen: GenConfig,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))
    }
}

/// All `*.ron` scene files in a directory, sorted by file stem.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, Scene)>> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|e| e.path().extension().is_some_and(|x| x == "ron"))
        .collect();
    entries.sort_by_key(|e| e.path());
    if entries.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no .ron scenes in {}",
            dir.display()
        )));
    }
    entries
        .into_iter()
        .map(|e| {
            let path = e.path();
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let scene = load_scene(&std::fs::read_to_string(&path)?)
                .map_err(|err| Error::Parse(format!("{}: {err}", path.display())))?;
            Ok((name, scene))
        })
        .collect()
}

/// Every (scene, question) episode in the corpus, in deterministic order.
/// Episodes are independent and run in parallel.
pub fn run_all(
    corpus: &[(String, Scene)],
    explorer: &ExplorerConfig,
    scorer: &ScorerBinding,
) -> Result<Vec<EpisodeLog>> {
    let jobs: Vec<(&str, &Scene, &str)> = corpus
        .iter()
        .flat_map(|(name, scene)| {
            scene
                .questions
                .iter()
                .map(move |q| (name.as_str(), scene, q.id.as_str()))
        })
        .collect();
    jobs.par_iter()
        .map(|(name, scene, qid)| run_episode(scene, name, qid, explorer, scorer))
        .collect()
}

pub fn aggregate(logs: &[EpisodeLog]) -> Result<MetricsReport> {
    report(logs.iter().map(EpisodeLog::to_metrics_result).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricStat {
    pub name: String,
    pub mean: f64,
    /// Standard error over trials; zero for deterministic metrics.
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSummary {
    pub episodes: usize,
    pub trials: usize,
    pub metrics: Vec<MetricStat>,
    pub episode_wall_ms_mean: f64,
    pub episode_wall_ms_stddev: f64,
    /// Per-step wall time (fusion + detection + scoring + scorer latency).
    pub step_ms_mean: f64,
    pub step_ms_stddev: f64,
    /// Per-question rows from the final trial.
    pub per_question: Vec<EpisodeResult>,
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Repeat the full corpus `trials` times; metrics are reported as mean plus
/// standard error over trials, wall time as mean plus standard deviation over
/// episodes.
pub fn run_bench(
    corpus: &[(String, Scene)],
    explorer: &ExplorerConfig,
    scorer: &ScorerBinding,
    trials: usize,
) -> Result<BenchSummary> {
    if trials == 0 {
        return Err(Error::EmptyInput("trials must be >= 1".into()));
    }
    let mut wall_ms = Vec::new();
    let mut step_ms = Vec::new();
    let mut per_metric: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
    let mut last_logs = Vec::new();
    for _ in 0..trials {
        let started = Instant::now();
        let logs = run_all(corpus, explorer, scorer)?;
        let elapsed = started.elapsed().as_secs_f64() * 1e3;
        wall_ms.push(elapsed / logs.len().max(1) as f64);
        step_ms.extend(
            logs.iter()
                .flat_map(|log| log.steps.iter().map(|s| s.timing.total_us as f64 / 1e3)),
        );
        let rep = aggregate(&logs)?;
        for (name, value) in [
            ("sr_percent", rep.sr_percent),
            ("normalized_steps", Some(rep.normalized_steps)),
            ("llm_score_percent", rep.llm_score_percent),
            ("llm_match_percent", rep.llm_match_percent),
            ("e_path_openeqa_percent", rep.e_path_openeqa_percent),
            ("e_path_fineeqa_percent", rep.e_path_fineeqa_percent),
        ] {
            if let Some(v) = value {
                per_metric.entry(name).or_default().push(v);
            }
        }
        last_logs = logs;
    }
    let metrics = per_metric
        .into_iter()
        .map(|(name, samples)| {
            let (mean, std) = mean_std(&samples);
            MetricStat {
                name: name.to_string(),
                mean,
                stderr: std / (samples.len() as f64).sqrt(),
            }
        })
        .collect();
    let (wall_mean, wall_std) = mean_std(&wall_ms);
    let (step_mean, step_std) = mean_std(&step_ms);
    Ok(BenchSummary {
        episodes: last_logs.len(),
        trials,
        metrics,
        episode_wall_ms_mean: wall_mean,
        episode_wall_ms_stddev: wall_std,
        step_ms_mean: step_mean,
        step_ms_stddev: step_std,
        per_question: last_logs.iter().map(EpisodeLog::to_metrics_result).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub report: MetricsReport,
}

/// Apply one named parameter to a config copy. Boolean switches take 0/1.
pub fn apply_parameter(config: &ExplorerConfig, name: &str, value: f64) -> Result<ExplorerConfig> {
    let mut c = config.clone();
    match name {
        "lambda" => c.lambda = value,
        "k" => c.k = value as usize,
        "w_size" => c.w_size = value,
        "w_dist" => c.w_dist = value,
        "stop_threshold" => c.stop_threshold = value,
        "eps" => c.eps = value,
        "min_pts" => c.min_pts = value as usize,
        "delta" => c.delta = value as usize,
        "gamma_n" => c.gamma_n = value,
        "fbe_only" => c.fbe_only = value != 0.0,
        "eq1_literal" => c.eq1_literal = value != 0.0,
        "raw_cosine" => c.raw_cosine = value != 0.0,
        "cot" => c.cot = value != 0.0,
        _ => {
            return Err(Error::EmptyInput(format!(
                "unknown sweep parameter: {name}"
            )))
        }
    }
    Ok(c)
}

pub fn run_sweep(
    corpus: &[(String, Scene)],
    base: &ExplorerConfig,
    scorer: &ScorerBinding,
    parameter: &str,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep needs at least one value".into()));
    }
    values
        .iter()
        .map(|&value| {
            let config = apply_parameter(base, parameter, value)?;
            let logs = run_all(corpus, &config, scorer)?;
            Ok(SweepRow {
                parameter: parameter.to_string(),
                value,
                report: aggregate(&logs)?,
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.1}"))
}

pub fn format_report(rep: &MetricsReport) -> String {
    format!(
        "n={}  SR%={}  Steps={:.2}  LLMScore%={}  LLMMatch%={}  Epath(open)%={}  Epath(fine)%={}",
        rep.n_total,
        fmt_opt(rep.sr_percent),
        rep.normalized_steps,
        fmt_opt(rep.llm_score_percent),
        fmt_opt(rep.llm_match_percent),
        fmt_opt(rep.e_path_openeqa_percent),
        fmt_opt(rep.e_path_fineeqa_percent),
    )
}

pub fn format_sweep(rows: &[SweepRow]) -> String {
    let mut out = String::from("parameter  value  metrics\n");
    for row in rows {
        out.push_str(&format!(
            "{:<9}  {:<5}  {}\n",
            row.parameter,
            row.value,
            format_report(&row.report)
        ));
    }
    out
}

pub fn format_bench(summary: &BenchSummary) -> String {
    let mut out = format!(
        "episodes={} trials={}  wall/episode = {:.1} ms ± {:.1} ms (stddev)  \
         step = {:.3} ms ± {:.3} ms (stddev)\n",
        summary.episodes,
        summary.trials,
        summary.episode_wall_ms_mean,
        summary.episode_wall_ms_stddev,
        summary.step_ms_mean,
        summary.step_ms_stddev
    );
    for m in &summary.metrics {
        out.push_str(&format!(
            "  {:<24} {:>8.2} ± {:.3} (stderr)\n",
            m.name, m.mean, m.stderr
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::generate_scene;

    fn small_corpus() -> Vec<(String, Scene)> {
        (0..2)
            .map(|seed| {
                (
                    format!("scene{seed}"),
                    generate_scene(seed, &GenConfig::default()).unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn run_all_is_deterministic_and_ordered() {
        let corpus = small_corpus();
        let cfg = ExplorerConfig::default();
        let a = run_all(&corpus, &cfg, &ScorerBinding::oracle()).unwrap();
        let b = run_all(&corpus, &cfg, &ScorerBinding::oracle()).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.canonical_json(), y.canonical_json());
        }
        // Order: scene0 questions first, in id order.
        assert!(a[0].scene_id <= a[a.len() - 1].scene_id);
    }

    #[test]
    fn bench_metrics_have_zero_spread_for_deterministic_engine() {
        let corpus = small_corpus();
        let cfg = ExplorerConfig::default();
        let summary = run_bench(&corpus, &cfg, &ScorerBinding::oracle(), 2).unwrap();
        assert_eq!(summary.trials, 2);
        assert!(summary.episodes > 0);
        for m in &summary.metrics {
            assert!(m.stderr.abs() < 1e-9, "{} spread {}", m.name, m.stderr);
        }
    }

    #[test]
    fn sweep_rejects_unknown_parameter() {
        let cfg = ExplorerConfig::default();
        assert!(apply_parameter(&cfg, "nonsense", 1.0).is_err());
        let swept = apply_parameter(&cfg, "lambda", 0.3).unwrap();
        assert_eq!(swept.lambda, 0.3);
        let swept = apply_parameter(&cfg, "fbe_only", 1.0).unwrap();
        assert!(swept.fbe_only);
    }

    #[test]
    fn corpus_loader_requires_scenes() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_corpus(dir.path()),
            Err(Error::EmptyInput(_))
        ));
        let doc = crate::gen::generate_doc(1, &GenConfig::default()).unwrap();
        std::fs::write(
            dir.path().join("a.ron"),
            crate::gen::doc_to_ron(&doc).unwrap(),
        )
        .unwrap();
        let corpus = load_corpus(dir.path()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus[0].0, "a");
    }
}
