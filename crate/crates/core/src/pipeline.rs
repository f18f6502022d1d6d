//! End-to-end selection: block matching, local games, iterative clustering
//! and inlier recovery.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::blocks::{assign_blocks, match_blocks, BlockPair, GridConfig};
use crate::cluster::{iterative_clustering, recompute_payoff_matrix, recover_inliers, refine_clusters, ClusterConfig};
use crate::error::Result;
use crate::games::{play_all_games, GameConfig};
use crate::model::{Assignment, CorrespondenceSet, Diagnostics, Label, MatchResult};
use crate::payoff::PayoffParams;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig<T> {
    pub grid: GridConfig,
    pub payoff: PayoffParams<T>,
    pub games: GameConfig,
    pub cluster: ClusterConfig,
    /// Replace `payoff.beta` with half the median matched-descriptor
    /// distance of the input.
    pub auto_beta: bool,
    /// Stop after the local games: survivors are labeled inliers without a
    /// consistency and nothing is recovered.
    pub skip_clustering: bool,
}

impl<T: Real> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            payoff: PayoffParams::default(),
            games: GameConfig::default(),
            cluster: ClusterConfig::default(),
            auto_beta: true,
            skip_clustering: false,
        }
    }
}

impl<T: Real> PipelineConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.payoff.validate()?;
        self.games.validate()?;
        self.cluster.validate()
    }

    /// Payoff parameters as used on `set`.
    pub fn resolved_payoff(&self, set: &CorrespondenceSet<T>) -> PayoffParams<T> {
        let mut p = self.payoff;
        if self.auto_beta {
            p.beta = PayoffParams::auto_beta(set);
        }
        p
    }
}

/// Intermediate products, exposed for inspection and ablations.
#[derive(Clone, Debug)]
pub struct StageOutput {
    pub pairs: Vec<BlockPair>,
    /// Positions of the local-game survivors.
    pub candidates: Vec<usize>,
}

/// Runs block matching and local games. Missing ratios are filled in
/// first when the payoff mode needs them.
pub fn select_candidates<T: Real>(
    set: &CorrespondenceSet<T>,
    cfg: &PipelineConfig<T>,
) -> Result<(CorrespondenceSet<T>, StageOutput)> {
    let mut set = set.clone();
    if cfg.payoff.mode.needs_ratios() && !set.ratios_populated() && set.len() >= 2 {
        set = set.with_ratios()?;
    }
    let params = cfg.resolved_payoff(&set);
    let assignments = assign_blocks(&set, &cfg.grid);
    let pairs = match_blocks(&assignments, &cfg.grid);
    let candidates = play_all_games(&pairs, &set, &params, &cfg.games)?;
    Ok((set, StageOutput { pairs, candidates }))
}

/// Wall time spent in each stage of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StageTimings {
    /// Ratios, block matching and local games.
    pub candidates: Duration,
    pub matrix: Duration,
    pub clustering: Duration,
    pub recovery: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.candidates + self.matrix + self.clustering + self.recovery
    }
}

pub fn run_pipeline<T: Real>(set: &CorrespondenceSet<T>, cfg: &PipelineConfig<T>) -> Result<MatchResult<T>> {
    run_pipeline_timed(set, cfg).map(|(r, _)| r)
}

/// [`run_pipeline`] that also reports stage timings.
pub fn run_pipeline_timed<T: Real>(
    set: &CorrespondenceSet<T>,
    cfg: &PipelineConfig<T>,
) -> Result<(MatchResult<T>, StageTimings)> {
    cfg.validate()?;
    let mut timings = StageTimings::default();
    if set.is_empty() {
        return Ok((MatchResult::empty(), timings));
    }
    let start = Instant::now();
    let (set, stage) = select_candidates(set, cfg)?;
    timings.candidates = start.elapsed();
    let mut diagnostics = Diagnostics {
        blocks_kept: stage.pairs.len(),
        game_survivors: stage.candidates.len(),
        ..Diagnostics::default()
    };

    if cfg.skip_clustering {
        let mut labels = vec![Label::Outlier; set.len()];
        for &p in &stage.candidates {
            labels[p] = Label::Inlier;
        }
        diagnostics.recovered_inliers = stage.candidates.len();
        let result = MatchResult {
            assignments: set
                .items()
                .iter()
                .zip(labels)
                .map(|(c, label)| Assignment { index: c.index, label })
                .collect(),
            homographies: Vec::new(),
            diagnostics,
        };
        return Ok((result, timings));
    }

    if stage.candidates.is_empty() {
        let mut r = MatchResult::all_outliers(&set);
        r.diagnostics = diagnostics;
        return Ok((r, timings));
    }

    let params = cfg.resolved_payoff(&set);
    let start = Instant::now();
    let m = recompute_payoff_matrix(&set, &stage.candidates, &params)?;
    timings.matrix = start.elapsed();
    let start = Instant::now();
    let mut clusters = iterative_clustering(&set, &m, &cfg.cluster);
    timings.clustering = start.elapsed();
    let start = Instant::now();
    let mut result = refine_clusters(&set, &mut clusters, &cfg.cluster);
    // a cluster emptied by the last relabeling is dropped
    while clusters.iter().any(|c| c.inlier_count() < cfg.cluster.min_cluster_size) {
        clusters.retain(|c| c.inlier_count() >= cfg.cluster.min_cluster_size);
        result = recover_inliers(&set, &mut clusters, &cfg.cluster);
    }
    result.diagnostics = Diagnostics {
        clusters_found: result.diagnostics.clusters_found,
        recovered_inliers: result.diagnostics.recovered_inliers,
        ..diagnostics
    };
    timings.recovery = start.elapsed();
    Ok((result, timings))
}
