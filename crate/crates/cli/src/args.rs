use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ropelab::pe::DEFAULT_BASE;
use ropelab::selfinstruct::{LossPolicy, QaStyle, DEFAULT_PACK_LENGTH};
use ropelab::PeVariant;

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(
    name = "ropelab",
    version,
    about = "Rotary position encoding analyses with CSV/JSON output"
)]
pub(crate) struct Cli {
    #[command(subcommand)]
    pub action: Action,
    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PeName {
    Rope,
    Pi,
    Abf,
    XposAbf,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct PeArgs {
    #[arg(long, value_enum, default_value = "rope")]
    pub pe: PeName,
    #[arg(long, default_value_t = DEFAULT_BASE)]
    pub base: f64,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    /// Position interpolation factor (pi only).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Base multiplier (abf and xpos-abf only).
    #[arg(long)]
    pub beta: Option<f64>,
}

impl PeArgs {
    pub(crate) fn check(&self) -> Result<(), UsageError> {
        match self.pe {
            PeName::Pi if self.alpha.is_none() => {
                return Err(UsageError::invalid("--pe pi requires --alpha"))
            }
            PeName::Abf | PeName::XposAbf if self.beta.is_none() => {
                return Err(UsageError::invalid("--pe abf and xpos-abf require --beta"))
            }
            _ => {}
        }
        if self.alpha.is_some() && self.pe != PeName::Pi {
            return Err(UsageError::invalid("--alpha only applies to --pe pi"));
        }
        if self.beta.is_some() && !matches!(self.pe, PeName::Abf | PeName::XposAbf) {
            return Err(UsageError::invalid(
                "--beta only applies to --pe abf and xpos-abf",
            ));
        }
        Ok(())
    }

    pub fn variant(&self) -> Result<PeVariant, ropelab::PeError> {
        match self.pe {
            PeName::Rope => PeVariant::rope(self.base, self.dim),
            PeName::Pi => PeVariant::pi(self.base, self.dim, self.alpha.unwrap_or(1.0)),
            PeName::Abf => PeVariant::abf(self.base, self.dim, self.beta.unwrap_or(1.0)),
            PeName::XposAbf => PeVariant::xpos_abf(self.base, self.dim, self.beta.unwrap_or(1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StyleArg {
    Normal,
    Short,
}

impl From<StyleArg> for QaStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::Normal => QaStyle::Normal,
            StyleArg::Short => QaStyle::Short,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    OutputOnly,
    IncludeInputLmLoss,
}

impl From<PolicyArg> for LossPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::OutputOnly => LossPolicy::OutputOnly,
            PolicyArg::IncludeInputLmLoss => LossPolicy::IncludeInputLmLoss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PackMode {
    Pack,
    Pad,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Action {
    /// All-ones attention score against relative distance.
    Decay {
        #[command(flatten)]
        pe: PeArgs,
        #[arg(long, default_value_t = 8192)]
        max_dist: u32,
        #[arg(long, default_value_t = 1)]
        step: u32,
        /// Divide scores by the head dimension.
        #[arg(long)]
        normalized: bool,
    },
    /// Trajectory of one rotary pair as a helix `(t, cos at, sin at)`.
    Helix {
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        t_start: f64,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Large-dimension bounds on the consecutive-image sine similarity.
    Bounds {
        #[command(flatten)]
        pe: PeArgs,
    },
    /// Sandwich bounds for one seeded random vector at one position.
    TheoremCheck {
        #[command(flatten)]
        pe: PeArgs,
        #[arg(long, default_value_t = 0)]
        position: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Interpolated vs adjusted-base granularity; with --positions also the
    /// brute-force minimum distances and drift from plain RoPE.
    Granularity {
        #[arg(long, default_value_t = DEFAULT_BASE)]
        base: f64,
        #[arg(long, default_value_t = 128)]
        dim: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        positions: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random vectors used for the drift.
        #[arg(long, default_value_t = 4)]
        vectors: usize,
    },
    /// Relative change of the second rotation angle between two bases.
    Theta1 {
        #[arg(long, default_value_t = 128)]
        dim: usize,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
    },
    /// Fit `L(c) = (alpha/c)^beta + gamma` to a `context_length,loss` CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Loss predictions from fit parameters or a fit JSON file.
    Predict {
        #[arg(long, conflicts_with_all = ["alpha", "beta", "gamma"])]
        fit: Option<PathBuf>,
        #[arg(long, requires_all = ["beta", "gamma"], required_unless_present = "fit")]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Comma-separated context lengths.
        #[arg(long, value_delimiter = ',', required = true)]
        contexts: Vec<u64>,
    },
    /// Relative cost of a short-then-long curriculum; with --table, calibrate
    /// the cost ratio from `p,total_flops` rows first.
    Flops {
        #[arg(long)]
        p: f64,
        #[arg(long, required_unless_present = "table", conflicts_with = "table")]
        cost_ratio: Option<f64>,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        total_tokens: f64,
        /// Per-token cost at the long length; enables absolute FLOPs.
        #[arg(long)]
        long_token_cost: Option<f64>,
    },
    /// Attention mass the last position puts on --target under all-ones inputs.
    ProbeMass {
        #[command(flatten)]
        pe: PeArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        seq_len: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        target: usize,
    },
    /// Analytic vs finite-difference attention gradients.
    GradCheck {
        #[command(flatten)]
        pe: PeArgs,
        #[arg(long, default_value_t = 4)]
        seq_len: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        seed: Vec<u64>,
        #[arg(long)]
        causal: bool,
    },
    /// Synthetic first-sentence retrieval task; with --response, score it.
    FsrTask {
        #[arg(long)]
        sentences: usize,
        #[arg(long)]
        tokens_per_sentence: usize,
        #[arg(long)]
        seed: u64,
        /// File of whitespace-separated token ids.
        #[arg(long)]
        response: Option<PathBuf>,
    },
    /// Mean per-position loss in fixed-width buckets.
    BucketLoss {
        /// CSV whose last column is the loss, one row per position.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = ropelab::attention::DEFAULT_BUCKET_WIDTH)]
        width: usize,
    },
    /// Chunk NDJSON documents into token windows.
    DatagenChunk {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        chunk_tokens: usize,
        #[arg(long, default_value_t = 0)]
        overlap: usize,
    },
    /// Render QA-generation prompts for NDJSON chunks.
    DatagenRender {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "normal")]
        style: StyleArg,
    },
    /// Extract tagged QA pairs from NDJSON responses; with --docs and
    /// --chunks, build training instances.
    DatagenExtract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "normal")]
        style: StyleArg,
        #[arg(long, requires_all = ["chunks", "max_context"])]
        docs: Option<PathBuf>,
        #[arg(long, requires = "docs")]
        chunks: Option<PathBuf>,
        #[arg(long, requires = "docs")]
        max_context: Option<usize>,
        #[arg(long, value_enum, default_value = "output-only")]
        loss_policy: PolicyArg,
    },
    /// Pack short NDJSON instances into fixed-length sequences, or pad long ones.
    DatagenPack {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PACK_LENGTH)]
        seq_len: usize,
        #[arg(long, value_enum, default_value = "pack")]
        mode: PackMode,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Decay { .. } => "decay",
            Action::Helix { .. } => "helix",
            Action::Bounds { .. } => "bounds",
            Action::TheoremCheck { .. } => "theorem-check",
            Action::Granularity { .. } => "granularity",
            Action::Theta1 { .. } => "theta1",
            Action::Fit { .. } => "fit",
            Action::Predict { .. } => "predict",
            Action::Flops { .. } => "flops",
            Action::ProbeMass { .. } => "probe-mass",
            Action::GradCheck { .. } => "grad-check",
            Action::FsrTask { .. } => "fsr-task",
            Action::BucketLoss { .. } => "bucket-loss",
            Action::DatagenChunk { .. } => "datagen-chunk",
            Action::DatagenRender { .. } => "datagen-render",
            Action::DatagenExtract { .. } => "datagen-extract",
            Action::DatagenPack { .. } => "datagen-pack",
        }
    }

    pub(crate) fn pe_args(&self) -> Option<&PeArgs> {
        match self {
            Action::Decay { pe, .. }
            | Action::Bounds { pe }
            | Action::TheoremCheck { pe, .. }
            | Action::ProbeMass { pe, .. }
            | Action::GradCheck { pe, .. } => Some(pe),
            _ => None,
        }
    }

    /// Formats the command can emit; the first is the default.
    pub fn formats(&self) -> &'static [Format] {
        match self {
            Action::Decay { .. }
            | Action::Helix { .. }
            | Action::Predict { .. }
            | Action::ProbeMass { .. }
            | Action::BucketLoss { .. } => &[Format::Csv, Format::Json],
            Action::Bounds { .. }
            | Action::TheoremCheck { .. }
            | Action::Granularity { .. }
            | Action::Theta1 { .. }
            | Action::Fit { .. }
            | Action::Flops { .. }
            | Action::GradCheck { .. } => &[Format::Json, Format::Csv],
            Action::FsrTask { .. }
            | Action::DatagenChunk { .. }
            | Action::DatagenRender { .. }
            | Action::DatagenExtract { .. }
            | Action::DatagenPack { .. } => &[Format::Json],
        }
    }
}
