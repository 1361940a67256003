use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::{Action, StepOutcome, WorldState};
use crate::error::{Error, Result};
use crate::reward::RewardBranch;

/// Column order of the metrics CSV.
pub const METRICS_HEADER: &str =
    "episode,steps,visible_steps,mean_distance,mean_distance_3d,mean_step_reward,cumulative_reward,collided,epsilon,lr";

/// One row of the per-episode metrics log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u64,
    pub steps: usize,
    pub visible_steps: usize,
    /// Mean ground-plane UAV to target distance over the episode's steps.
    pub mean_distance: f64,
    pub mean_distance_3d: f64,
    pub mean_step_reward: f64,
    pub cumulative_reward: f64,
    pub collided: bool,
    /// Exploration probability in force during the episode.
    pub epsilon: f64,
    pub lr: f64,
}

/// Running sums for one episode.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeAccumulator {
    steps: usize,
    visible: usize,
    distance: f64,
    distance_3d: f64,
    reward: f64,
    collided: bool,
}

impl EpisodeAccumulator {
    pub(crate) fn record(&mut self, outcome: &StepOutcome) {
        self.steps += 1;
        self.visible += outcome.info.visible as usize;
        self.distance += outcome.info.distance;
        self.distance_3d += outcome.info.distance_3d;
        self.reward += outcome.reward;
        self.collided |= outcome.info.collided;
    }

    pub(crate) fn distance_sum(&self) -> f64 {
        self.distance
    }

    pub(crate) fn finish(&self, episode: u64, epsilon: f64, lr: f64) -> EpisodeMetrics {
        let n = self.steps.max(1) as f64;
        EpisodeMetrics {
            episode,
            steps: self.steps,
            visible_steps: self.visible,
            mean_distance: self.distance / n,
            mean_distance_3d: self.distance_3d / n,
            mean_step_reward: self.reward / n,
            cumulative_reward: self.reward,
            collided: self.collided,
            epsilon,
            lr,
        }
    }
}

/// Streams metrics rows to a CSV file.
pub struct MetricsWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let inner = csv::WriterBuilder::new()
            .has_headers(true)
            .from_writer(BufWriter::new(file));
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &EpisodeMetrics) -> Result<()> {
        self.inner
            .serialize(row)
            .map_err(|e| Error::Schema(format!("metrics row: {e}")))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|source| Error::Io {
            path: "metrics".into(),
            source,
        })
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[EpisodeMetrics]) -> Result<()> {
    let mut w = MetricsWriter::create(path)?;
    for row in rows {
        w.write(row)?;
    }
    w.flush()
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| Error::Schema(format!("{}: {e}", path.display()))))
        .collect()
}

/// One evaluation step, as written to the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub uav_x: f64,
    pub uav_y: f64,
    pub uav_z: f64,
    pub target_x: f64,
    pub target_y: f64,
    pub action: Action,
    pub reward: f64,
    pub branch: RewardBranch,
    pub visible: bool,
    pub occluded_by: Option<usize>,
    pub done: bool,
}

impl TrajectoryRecord {
    pub fn from_step(
        outcome: &StepOutcome,
        action: Action,
        target: crate::geometry::Point2,
    ) -> Self {
        let WorldState { uav, t, .. } = outcome.state;
        Self {
            t,
            uav_x: uav.position.x,
            uav_y: uav.position.y,
            uav_z: uav.position.z,
            target_x: target.x,
            target_y: target.y,
            action,
            reward: outcome.reward,
            branch: outcome.info.branch,
            visible: outcome.info.visible,
            occluded_by: outcome.info.occluded_by,
            done: outcome.done,
        }
    }
}

/// Writes one JSON object per line.
pub fn write_trajectory(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        let line = serde_json::to_string(r).expect("trajectory record serialises");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Parses a trajectory log; errors name the 1-based line that failed.
pub fn parse_trajectory(text: &str) -> std::result::Result<Vec<TrajectoryRecord>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| serde_json::from_str(line).map_err(|e| (i + 1, e.to_string())))
        .collect()
}

/// Mean of `field` over the first and the last quarter of `rows`.
pub fn quartile_means(
    rows: &[EpisodeMetrics],
    field: impl Fn(&EpisodeMetrics) -> f64,
) -> (f64, f64) {
    let q = (rows.len() / 4).max(1).min(rows.len());
    let mean = |slice: &[EpisodeMetrics]| {
        slice.iter().map(&field).sum::<f64>() / slice.len().max(1) as f64
    };
    (mean(&rows[..q]), mean(&rows[rows.len() - q..]))
}
