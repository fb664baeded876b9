use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use milrp::config::{RunConfig, DEFAULT_RANGE};
use milrp::dsp::{BandSpec, Window, DEFAULT_BANDS};
use milrp::lrp::{LrpRule, DEFAULT_EPSILON};
use milrp::SubjectId;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  input error (bad flags, missing or malformed files, config digest mismatch)
  3  runtime failure (training or evaluation failed, partial report)

Set MI_LRP_LOG (error, warn, info, debug, trace) to control log verbosity.";

#[derive(Debug, Parser)]
#[command(name = "milrp", version, about = "Interpretable motor-imagery EEG decoding", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic lateralized two-class dataset as MITS containers.
    Synth(SynthArgs),
    /// Import sessions, filter, segment and cache feature tensors.
    Preprocess(DataArgs),
    /// Train one CNN on both sessions of the selected subjects.
    Train(DataArgs),
    /// Leave-one-subject-out evaluation of the CNN and the CSP+LDA baseline.
    Eval(DataArgs),
    /// Leave-one-subject-out evaluation of the CSP+LDA baseline alone.
    Baseline(DataArgs),
    /// Relevance table for the evaluation sessions of the selected subjects.
    Explain(ExplainArgs),
    /// Render class-mean relevance topographies from a relevance table.
    Topoplot(TopoArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of pseudo-subjects.
    #[arg(long = "n-subjects", default_value_t = 9)]
    pub n_subjects: usize,
    /// Trials per session.
    #[arg(long, default_value_t = 144)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory of `*.mits` containers and/or text-import session directories.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated subject ids to evaluate (default: all).
    #[arg(long, value_delimiter = ',')]
    pub subjects: Vec<String>,
    /// Parallel folds (default: machine parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub protocol: Protocol,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// A model file, or a directory holding `<subject>.micn` per subject.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub subjects: Vec<String>,
    #[command(flatten)]
    pub protocol: Protocol,
}

#[derive(Debug, Args)]
pub struct TopoArgs {
    /// Relevance table written by `explain`.
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Subjects to plot; the grand average is always plotted.
    #[arg(long, value_delimiter = ',')]
    pub subjects: Vec<String>,
    #[command(flatten)]
    pub protocol: Protocol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Epsilon,
    /// alpha = 1, beta = 0
    AlphaBeta,
}

/// Flags that define the experiment protocol. Defaults follow the published
/// pipeline.
#[derive(Debug, Args)]
pub struct Protocol {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated `low-high` bands in Hz [default: 4-8,8-13,13-30,4-13,8-30,4-30]
    #[arg(long, value_delimiter = ',', value_parser = parse_band)]
    pub bands: Vec<BandSpec>,
    /// Analysis window `start-end` in seconds after the cue [default: 0.5-2.5]
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Window>,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 300)]
    pub iterations: usize,
    #[arg(long = "batch-size", default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long = "lrp-rule", value_enum, default_value_t = RuleArg::Epsilon)]
    pub lrp_rule: RuleArg,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long = "csp-pairs", default_value_t = 3)]
    pub csp_pairs: usize,
    /// Topography color range [default: -0.1 0.1]
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub range: Vec<f64>,
    /// Keep trials marked as artifacts.
    #[arg(long = "include-rejected")]
    pub include_rejected: bool,
}

impl Protocol {
    pub fn to_config(&self) -> RunConfig {
        let lrp_rule = match self.lrp_rule {
            RuleArg::Epsilon => LrpRule::Epsilon { epsilon: self.epsilon },
            RuleArg::AlphaBeta => LrpRule::AlphaBeta { alpha: 1.0, beta: 0.0 },
        };
        RunConfig {
            seed: self.seed,
            bands: if self.bands.is_empty() {
                DEFAULT_BANDS.to_vec()
            } else {
                self.bands.clone()
            },
            window: self.window.unwrap_or_default(),
            lr: self.lr,
            iterations: self.iterations,
            batch_size: self.batch_size,
            lrp_rule,
            csp_pairs: self.csp_pairs,
            range: match self.range[..] {
                [lo, hi] => (lo, hi),
                _ => DEFAULT_RANGE,
            },
            include_rejected: self.include_rejected,
            ..RunConfig::default()
        }
    }
}

pub fn subject_ids(raw: &[String]) -> Vec<SubjectId> {
    raw.iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(SubjectId::from)
        .collect()
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| format!("{what} {s:?} must look like LOW-HIGH"))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|e| format!("{what} {s:?}: {e}"))
    };
    Ok((num(a)?, num(b)?))
}

fn parse_band(s: &str) -> Result<BandSpec, String> {
    let (lo, hi) = parse_pair(s, "band")?;
    Ok(BandSpec::new(lo, hi))
}

fn parse_window(s: &str) -> Result<Window, String> {
    let (start_s, end_s) = parse_pair(s, "window")?;
    let w = Window { start_s, end_s };
    w.validate().map_err(|e| e.to_string())?;
    Ok(w)
}
