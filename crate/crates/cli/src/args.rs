use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use mcmatch::blocks::GridConfig;
use mcmatch::cluster::{ClusterConfig, Membership};
use mcmatch::games::GameConfig;
use mcmatch::payoff::{PayoffMode, PayoffParams, ProjectionForm};
use mcmatch::synth::SynthConfig;
use mcmatch::{ImageSize, PipelineConfig};

/// Multi-consistency correspondence selection between two images.
#[derive(Debug, Parser)]
#[command(name = "mcmatch", version, args_override_self = true)]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "MCMATCH_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// File of `key = value` lines read as flags; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select and cluster correspondences, writing a result file.
    Match(MatchArgs),
    /// Score a result against the ground truth of a correspondence file.
    Eval(EvalArgs),
    /// Generate a synthetic scene with planted homographies.
    Synth(SynthArgs),
    /// Draw correspondences colored by label as SVG.
    Render(RenderArgs),
}

pub const SUBCOMMANDS: [&str; 4] = ["match", "eval", "synth", "render"];

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Correspondence file (text, or JSON by `.json` extension).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Result file to write.
    #[arg(long, short)]
    pub output: PathBuf,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Result file.
    #[arg(long, short)]
    pub result: PathBuf,
    /// Correspondence file carrying ground truth.
    #[arg(long, short)]
    pub truth: PathBuf,
    /// Report F as P*R/(P+R) instead of the harmonic mean.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set, default_value_t = false)]
    pub paper_literal_f: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene file to write; the planted result goes next to it.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Number of consistencies.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub inliers_per: usize,
    /// Fraction of the set that is outliers.
    #[arg(long, default_value_t = 0.4)]
    pub outlier_ratio: f64,
    /// Gaussian noise on right inlier keypoints, pixels.
    #[arg(long, default_value_t = 1.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    #[arg(long, default_value_t = 480)]
    pub height: u32,
    #[arg(long, default_value_t = 32)]
    pub descriptor_dim: usize,
    /// Side of each consistency region as a fraction of the image.
    #[arg(long, default_value_t = 0.25)]
    pub region_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SynthArgs {
    pub fn to_config(&self) -> SynthConfig {
        SynthConfig {
            k: self.k,
            inliers_per: self.inliers_per,
            outlier_ratio: self.outlier_ratio,
            noise_sigma: self.noise_sigma,
            image_size: ImageSize::new(self.width, self.height),
            descriptor_dim: self.descriptor_dim,
            region_frac: self.region_frac,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Correspondence file.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Result file labeling every correspondence.
    #[arg(long, short)]
    pub result: PathBuf,
    /// SVG file to write.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Geo,
    Rt,
    Des,
    RtGeo,
}

impl From<ModeArg> for PayoffMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Geo => PayoffMode::Geo,
            ModeArg::Rt => PayoffMode::Rt,
            ModeArg::Des => PayoffMode::Des,
            ModeArg::RtGeo => PayoffMode::RtPlusGeo,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProjectionArg {
    Offset,
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MembershipArg {
    Both,
    Either,
}

/// Pipeline settings, one flag per field.
#[derive(Clone, Debug, Args)]
pub struct RunConfig {
    /// Grid rows per image.
    #[arg(long, default_value_t = 5)]
    pub grid_rows: usize,
    /// Grid columns per image.
    #[arg(long, default_value_t = 5)]
    pub grid_cols: usize,
    /// Smallest correspondence count for a block pair to be kept.
    #[arg(long, default_value_t = 4)]
    pub min_block_count: usize,
    /// Keep only mutually best block pairs.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set, default_value_t = false)]
    pub mutual_best: bool,

    /// Payoff terms.
    #[arg(long, value_enum, default_value_t = ModeArg::RtGeo)]
    pub mode: ModeArg,
    /// Geometric distance scale, pixels.
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    /// Ratio-test scale.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Descriptor distance scale; ignored while --auto-beta is on.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Derive beta from the median matched-descriptor distance.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set, default_value_t = true)]
    pub auto_beta: bool,
    /// How affine frames project keypoints.
    #[arg(long, value_enum, default_value_t = ProjectionArg::Offset)]
    pub projection: ProjectionArg,

    /// Replicator iterations per game.
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Replicator convergence tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Histogram bins for the survivor threshold.
    #[arg(long, default_value_t = 256)]
    pub otsu_bins: usize,

    #[arg(long, default_value_t = 4)]
    pub min_cluster_size: usize,
    /// Recovery reprojection threshold, pixels.
    #[arg(long, default_value_t = 5.0)]
    pub reproj_threshold: f64,
    #[arg(long, default_value_t = 1000)]
    pub ransac_iters: usize,
    /// RANSAC consensus tolerance, pixels.
    #[arg(long, default_value_t = 3.0)]
    pub ransac_tol: f64,
    #[arg(long, default_value_t = 20)]
    pub max_outer_rounds: usize,
    /// Anchor endpoints a cluster member must agree with.
    #[arg(long, value_enum, default_value_t = MembershipArg::Both)]
    pub membership: MembershipArg,
    /// Fold clusters already explained by an earlier homography.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set, default_value_t = true)]
    pub merge_redundant: bool,
    /// Refit-and-relabel rounds after recovery.
    #[arg(long, default_value_t = 5)]
    pub refine_rounds: usize,
    /// RANSAC seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop after the local games (no clustering or recovery).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set, default_value_t = false)]
    pub skip_clustering: bool,
}

impl RunConfig {
    pub fn to_pipeline(&self) -> PipelineConfig<f64> {
        PipelineConfig {
            grid: GridConfig {
                rows: self.grid_rows,
                cols: self.grid_cols,
                min_count: self.min_block_count,
                mutual_best: self.mutual_best,
            },
            payoff: PayoffParams {
                sigma: self.sigma,
                alpha: self.alpha,
                beta: self.beta,
                mode: self.mode.into(),
                projection: match self.projection {
                    ProjectionArg::Offset => ProjectionForm::Offset,
                    ProjectionArg::Literal => ProjectionForm::Literal,
                },
            },
            games: GameConfig {
                max_iters: self.max_iters,
                tol: self.tol,
                otsu_bins: self.otsu_bins,
            },
            cluster: ClusterConfig {
                min_cluster_size: self.min_cluster_size,
                reproj_threshold: self.reproj_threshold,
                ransac_iters: self.ransac_iters,
                ransac_tol: self.ransac_tol,
                max_outer_rounds: self.max_outer_rounds,
                membership: match self.membership {
                    MembershipArg::Both => Membership::BothEndpoints,
                    MembershipArg::Either => Membership::EitherEndpoint,
                },
                merge_redundant: self.merge_redundant,
                refine_rounds: self.refine_rounds,
                seed: self.seed,
            },
            auto_beta: self.auto_beta,
            skip_clustering: self.skip_clustering,
        }
    }
}

/// Turns config-file text into `--key=value` arguments.
pub fn config_file_args(text: &str) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", n + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: bad key", n + 1));
        }
        out.push(format!("--{key}={}", value.trim()).into());
    }
    Ok(out)
}

/// Pulls `--config` out of `argv` and splices the file's flags in right
/// after the subcommand, so anything given on the command line overrides
/// them.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(it.next().ok_or("--config needs a value")?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.to_string_lossy()))?;
    let extra = config_file_args(&text)?;
    let Some(at) = rest
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(rest);
    };
    rest.splice(at + 1..at + 1, extra);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(args.iter().map(OsString::from)).unwrap()
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn defaults_match_library() {
        let cli = parse(&["mcmatch", "match", "-i", "a", "-o", "b"]);
        let Command::Match(m) = cli.command else { panic!() };
        assert_eq!(m.run.to_pipeline(), PipelineConfig::<f64>::default());
        let cli = parse(&["mcmatch", "synth", "-o", "s"]);
        let Command::Synth(s) = cli.command else { panic!() };
        assert_eq!(s.to_config(), SynthConfig::default());
    }

    #[test]
    fn later_flags_win_and_bools_take_values() {
        let cli = parse(&[
            "mcmatch",
            "match",
            "-i",
            "a",
            "-o",
            "b",
            "--sigma=3",
            "--skip-clustering=true",
            "--sigma",
            "7",
            "--skip-clustering",
            "false",
            "--mutual-best",
        ]);
        let Command::Match(m) = cli.command else { panic!() };
        assert_eq!(m.run.sigma, 7.0);
        assert!(!m.run.skip_clustering);
        assert!(m.run.mutual_best);
    }

    #[test]
    fn config_file_goes_before_command_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# settings\nsigma = 4\nskip_clustering = true\nseed=9 # trailing\n",
        )
        .unwrap();
        let argv: Vec<OsString> = [
            "mcmatch",
            "match",
            "--config",
            path.to_str().unwrap(),
            "-i",
            "a",
            "-o",
            "b",
            "--seed",
            "2",
        ]
        .iter()
        .map(OsString::from)
        .collect();
        let cli = Cli::try_parse_from(expand_config(argv).unwrap()).unwrap();
        let Command::Match(m) = cli.command else { panic!() };
        assert_eq!(m.run.sigma, 4.0);
        assert!(m.run.skip_clustering);
        assert_eq!(m.run.seed, 2);
    }

    #[test]
    fn config_file_rejects_malformed_lines() {
        assert!(config_file_args("sigma 4").is_err());
        assert!(config_file_args(" = 4").is_err());
        assert_eq!(config_file_args("\n# only comments\n").unwrap().len(), 0);
    }
}
