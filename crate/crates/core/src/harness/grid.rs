use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GridCell};
use crate::sim::{run_episode, EpisodeMetrics, OverloadClass, TrackEnv, Trajectory, Variant};

pub const REPORT_FILE: &str = "report.json";
pub const TRAJECTORY_DIR: &str = "trajectories";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("output directory {path} is not writable: {source}")]
    Unwritable { path: PathBuf, source: io::Error },

    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("csv error on {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },

    #[error(transparent)]
    Config(#[from] super::config::ConfigError),

    #[error("episode failed: {0}")]
    Episode(#[from] crate::Error),

    #[error("thread pool: {0}")]
    Pool(String),
}

/// Mean and sample standard deviation of one variant's results in a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub mean_rms_drift: f64,
    pub std_rms_drift: f64,
    pub total_off_track_steps: usize,
    pub mean_effective_s_r: f64,
    pub mean_relevant_recall: f64,
    pub mean_distractor_retention: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub s_r: usize,
    pub s_c: usize,
    pub gamma: f64,
    pub classification: OverloadClass,
    pub seeds: usize,
    pub baseline: VariantSummary,
    pub co4: VariantSummary,
    /// Seeds where Co4 drifted strictly less than the baseline.
    pub co4_wins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub cells: Vec<CellSummary>,
    /// Keyed `variant/s_r/s_c/seed`.
    pub episodes: BTreeMap<String, EpisodeMetrics>,
    /// Unix seconds at which the report was produced. Excluded from
    /// determinism comparisons.
    pub generated_at: u64,
}

impl RunReport {
    pub fn cell(&self, s_r: usize, s_c: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.s_r == s_r && c.s_c == s_c)
    }

    /// The report as JSON with the timestamp zeroed.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.generated_at = 0;
        serde_json::to_string_pretty(&r).expect("report serialises")
    }
}

pub fn episode_key(variant: Variant, s_r: usize, s_c: usize, seed: u64) -> String {
    format!("{}/{s_r}/{s_c}/{seed}", variant.as_str())
}

pub fn trajectory_file(variant: Variant, s_r: usize, s_c: usize, seed: u64) -> String {
    format!("{}_sr{s_r}_sc{s_c}_seed{seed}.csv", variant.as_str())
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summarize_variant(runs: &[&EpisodeMetrics]) -> VariantSummary {
    let drift: Vec<f64> = runs.iter().map(|m| m.rms_drift).collect();
    let (mean_rms_drift, std_rms_drift) = mean_std(&drift);
    let avg =
        |f: fn(&EpisodeMetrics) -> f64| mean_std(&runs.iter().map(|m| f(m)).collect::<Vec<_>>()).0;
    VariantSummary {
        mean_rms_drift,
        std_rms_drift,
        total_off_track_steps: runs.iter().map(|m| m.off_track_steps).sum(),
        mean_effective_s_r: avg(|m| m.effective_s_r),
        mean_relevant_recall: avg(|m| m.relevant_recall),
        mean_distractor_retention: avg(|m| m.distractor_retention),
    }
}

/// Reduces per-episode metrics to per-cell summaries. Pure: the same
/// episodes always give the same cells.
pub fn summarize(
    cfg: &ExperimentConfig,
    episodes: &BTreeMap<String, EpisodeMetrics>,
) -> Vec<CellSummary> {
    cfg.grid
        .iter()
        .map(|&GridCell { s_r, s_c }| {
            let pick = |v: Variant| -> Vec<&EpisodeMetrics> {
                cfg.seeds
                    .iter()
                    .filter_map(|&seed| episodes.get(&episode_key(v, s_r, s_c, seed)))
                    .collect()
            };
            let (base, co4) = (pick(Variant::Baseline), pick(Variant::Co4));
            let co4_wins = base
                .iter()
                .zip(&co4)
                .filter(|(b, c)| c.rms_drift < b.rms_drift)
                .count();
            let reference = base.first().or(co4.first());
            CellSummary {
                s_r,
                s_c,
                gamma: reference.map_or(s_c as f64 / s_r as f64, |m| m.gamma),
                classification: reference.map_or(OverloadClass::Synchrony, |m| m.classification),
                seeds: base.len().min(co4.len()),
                baseline: summarize_variant(&base),
                co4: summarize_variant(&co4),
                co4_wins,
            }
        })
        .collect()
}

fn check_writable(dir: &Path) -> Result<(), RunError> {
    let unwritable = |source| RunError::Unwritable {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir.join(TRAJECTORY_DIR)).map_err(unwritable)?;
    let probe = dir.join(".co4-write-probe");
    fs::write(&probe, b"").map_err(unwritable)?;
    fs::remove_file(&probe).map_err(unwritable)
}

struct Job {
    cell: GridCell,
    seed: u64,
    variant: Variant,
}

/// Runs every grid cell and seed as a Baseline/Co4 pair on identical
/// streams, then writes one CSV per episode and `report.json` into `out_dir`.
///
/// Episodes run on `threads` workers (0 picks rayon's default); the output
/// does not depend on the thread count.
pub fn run_grid(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
) -> Result<RunReport, RunError> {
    cfg.validate()?;
    check_writable(out_dir)?;

    let mut jobs = Vec::new();
    for &cell in &cfg.grid {
        for &seed in &cfg.seeds {
            for variant in [Variant::Baseline, Variant::Co4] {
                jobs.push(Job {
                    cell,
                    seed,
                    variant,
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let results: Vec<(EpisodeMetrics, Trajectory)> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let env = TrackEnv::from_spec(&cfg.track, job.seed)?;
                let agent = cfg.agent.agent(job.variant, job.cell.s_c);
                let stream = cfg.stream.stream(job.cell.s_r);
                run_episode(&env, &agent, &stream, &cfg.features, job.seed)
            })
            .collect::<crate::Result<_>>()
    })?;

    let traj_dir = out_dir.join(TRAJECTORY_DIR);
    let mut episodes = BTreeMap::new();
    for (job, (metrics, traj)) in jobs.iter().zip(results) {
        let name = trajectory_file(job.variant, job.cell.s_r, job.cell.s_c, job.seed);
        let path = traj_dir.join(name);
        let file = fs::File::create(&path).map_err(|source| RunError::Io {
            path: path.clone(),
            source,
        })?;
        traj.write_csv(io::BufWriter::new(file))
            .map_err(|source| RunError::Csv { path, source })?;
        episodes.insert(
            episode_key(job.variant, job.cell.s_r, job.cell.s_c, job.seed),
            metrics,
        );
    }

    let report = RunReport {
        provenance: Provenance {
            config_hash: cfg.hash(),
            seeds: cfg.seeds.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        cells: summarize(cfg, &episodes),
        episodes,
        generated_at: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    let path = out_dir.join(REPORT_FILE);
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    fs::write(&path, json + "\n").map_err(|source| RunError::Io { path, source })?;
    Ok(report)
}

/// Rebuilds the report's episode metrics and cell summaries from the CSV
/// dumps alone.
pub fn recompute_from_dumps(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(BTreeMap<String, EpisodeMetrics>, Vec<CellSummary>), RunError> {
    let mut episodes = BTreeMap::new();
    for &GridCell { s_r, s_c } in &cfg.grid {
        for &seed in &cfg.seeds {
            for variant in [Variant::Baseline, Variant::Co4] {
                let path = out_dir
                    .join(TRAJECTORY_DIR)
                    .join(trajectory_file(variant, s_r, s_c, seed));
                let file = fs::File::open(&path).map_err(|source| RunError::Io {
                    path: path.clone(),
                    source,
                })?;
                let traj =
                    Trajectory::read_csv(file).map_err(|source| RunError::Csv { path, source })?;
                let agent = cfg.agent.agent(variant, s_c);
                let stream = cfg.stream.stream(s_r);
                let m = EpisodeMetrics::from_trajectory(
                    &traj,
                    cfg.track.half_width,
                    &agent,
                    &stream,
                    seed,
                )?;
                episodes.insert(episode_key(variant, s_r, s_c, seed), m);
            }
        }
    }
    let cells = summarize(cfg, &episodes);
    Ok((episodes, cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[]), (0.0, 0.0));
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn keys_are_stable() {
        assert_eq!(episode_key(Variant::Co4, 200, 50, 7), "co4/200/50/7");
        assert_eq!(
            trajectory_file(Variant::Baseline, 25, 50, 0),
            "baseline_sr25_sc50_seed0.csv"
        );
    }
}
