use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tssn_core::eval::{FeatureOp, LogRegConfig, Protocol, SplitSpec};
use tssn_core::sampler::{RoleMode, TokenMode};
use tssn_core::stats::SyntheticSpec;
use tssn_core::tssn::{Bucketing, TssnBuildConfig};
use tssn_core::{TrainConfig, WalkConfig};

#[derive(Debug, Parser)]
#[command(
    name = "tssn",
    version,
    about = "Snapshot-network embeddings and partner recommendation for role-labelled interaction logs"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Clean and index an event log; writes events.tsv and roles.tsv
    Ingest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
    },
    /// Role t-test and mixing tendency; writes ttest.tsv and tendency.tsv
    Stats {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
    },
    /// Build the snapshot network; writes tssn.tsv and snapshots.tsv
    Build {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        snapshots: Snapshots,
    },
    /// Generate the walk corpus; writes corpus.txt and tokens.tsv
    Walk {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        snapshots: Snapshots,
        #[command(flatten)]
        walk: WalkArgs,
    },
    /// Train skip-gram embeddings on a corpus; writes embeddings.txt
    Embed {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainArgs,
        /// Defaults to <out>/corpus.txt
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Defaults to <out>/tokens.tsv
        #[arg(long)]
        tokens: Option<PathBuf>,
    },
    /// Link-prediction experiment over several seeds; writes report.tsv and report.json
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        snapshots: Snapshots,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Score these embeddings instead of training per seed
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Grid over walk parameters; writes sweep.tsv and sweep.json
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        snapshots: Snapshots,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, value_delimiter = ',')]
        grid_r: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        grid_q: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        grid_alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        grid_beta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        grid_role_mode: Vec<RoleMode>,
    },
    /// Fit the link classifier on all observed pairs; writes classifier.json
    FitClassifier {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        eval: EvalArgs,
        /// Defaults to <out>/embeddings.txt
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Rank partner candidates for one individual
    Recommend {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: Input,
        /// Defaults to <out>/embeddings.txt
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Defaults to <out>/classifier.json
        #[arg(long)]
        classifier: Option<PathBuf>,
        /// Key of the individual to recommend partners for
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Only recommend individuals of the other role
        #[arg(long)]
        cross_role_only: bool,
    },
    /// Write a synthetic role-labelled log; writes events.tsv and roles.tsv
    Synth {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Repeat the run recorded in a manifest
    Rerun {
        manifest: PathBuf,
        /// Write into this directory instead of the recorded one
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Stats { .. } => "stats",
            Command::Build { .. } => "build",
            Command::Walk { .. } => "walk",
            Command::Embed { .. } => "embed",
            Command::Evaluate { .. } => "evaluate",
            Command::Sweep { .. } => "sweep",
            Command::FitClassifier { .. } => "fit-classifier",
            Command::Recommend { .. } => "recommend",
            Command::Synth { .. } => "synth",
            Command::Rerun { .. } => "rerun",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// File of `key=value` lines, one per flag; flags on the command line win
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores); 1 implies --deterministic
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Train as a single ordered stream so results are bit-identical
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl Common {
    pub fn deterministic(&self) -> bool {
        self.deterministic || self.threads == 1
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn or_artifact(&self, given: &Option<PathBuf>, name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.artifact(name))
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Input {
    /// Tab-separated `sender recipient timestamp` lines
    #[arg(long)]
    pub events: PathBuf,
    /// Tab-separated `key role` lines
    #[arg(long)]
    pub roles: PathBuf,
    /// Tab-separated `alias canonical` lines
    #[arg(long)]
    pub aliases: Option<PathBuf>,
}

impl Input {
    pub fn paths(&self) -> Vec<&Path> {
        let mut out = vec![self.events.as_path(), self.roles.as_path()];
        if let Some(a) = &self.aliases {
            out.push(a);
        }
        out
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(id = "bucketing", multiple = false)]
pub struct BucketingArgs {
    /// Snapshot span in days (default 30)
    #[arg(long)]
    pub epsilon_days: Option<f64>,
    /// Fixed number of events per snapshot
    #[arg(long)]
    pub events_per_snapshot: Option<usize>,
    /// One snapshot per calendar month (UTC)
    #[arg(long)]
    pub calendar_months: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Snapshots {
    #[command(flatten)]
    pub bucketing: BucketingArgs,
    /// Weight of the edge joining a vertex to itself in the next snapshot
    #[arg(long, default_value_t = 1.0)]
    pub self_weight: f64,
}

impl Snapshots {
    pub fn config(&self) -> TssnBuildConfig {
        let b = &self.bucketing;
        let bucketing = if let Some(n) = b.events_per_snapshot {
            Bucketing::FixedCount { events_per_snapshot: n }
        } else if b.calendar_months {
            Bucketing::CalendarMonth
        } else {
            let days = b.epsilon_days.unwrap_or(30.0);
            Bucketing::FixedSpan {
                epsilon: (days * 86_400.0).round().max(0.0) as u64,
                origin: None,
            }
        };
        TssnBuildConfig {
            bucketing,
            self_weight: self.self_weight,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WalkArgs {
    /// Return parameter
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// In-out parameter
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Temporal bias, in [0.1, 0.9]
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Role bias, in [0.1, 0.9]
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// unbiased | biased
    #[arg(long, default_value = "unbiased")]
    pub role_mode: RoleMode,
    /// Walks started from every vertex
    #[arg(long, default_value_t = 10)]
    pub walks: usize,
    #[arg(long, default_value_t = 80)]
    pub walk_length: usize,
    /// base_id | snapshot_id
    #[arg(long, default_value = "base_id")]
    pub token_mode: TokenMode,
    /// Cached transition tables (0 disables the cache)
    #[arg(long, default_value_t = 100_000)]
    pub cache: usize,
}

impl WalkArgs {
    pub fn config(&self, seed: u64) -> WalkConfig {
        WalkConfig {
            r: self.r,
            q: self.q,
            alpha: self.alpha,
            beta: self.beta,
            role_mode: self.role_mode,
            walks_per_vertex: self.walks,
            walk_length: self.walk_length,
            seed,
            token_mode: self.token_mode,
            cache_capacity: self.cache,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    /// Negative samples per positive pair
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0001)]
    pub min_lr: f64,
    /// Pull consecutive snapshot tokens of a vertex together (snapshot_id tokens)
    #[arg(long, default_value_t = 0.0)]
    pub snapshot_tie: f64,
}

impl TrainArgs {
    pub fn config(&self, common: &Common) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            initial_lr: self.lr,
            min_lr: self.min_lr,
            seed: common.seed,
            deterministic: common.deterministic(),
            threads: common.threads,
            snapshot_tie: self.snapshot_tie,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// traditional | time_preserving
    #[arg(long, default_value = "traditional")]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
    /// Number of seeds, counting up from --seed
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Sample negatives among user-developer pairs only
    #[arg(long)]
    pub cross_role: bool,
    /// average | hadamard
    #[arg(long, default_value = "average")]
    pub feature: FeatureOp,
    /// L2 penalty of the link classifier
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    /// Share of labelled pairs held out for AUC
    #[arg(long, default_value_t = 0.25)]
    pub holdout: f64,
}

impl EvalArgs {
    pub fn split(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            protocol: self.protocol,
            test_fraction: self.test_fraction,
            restrict_cross_role: self.cross_role,
            seed,
            ..SplitSpec::default()
        }
    }

    pub fn logreg(&self) -> LogRegConfig {
        LogRegConfig {
            l2: self.l2,
            ..LogRegConfig::default()
        }
    }

    pub fn seed_list(&self, base: u64) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| base + i).collect()
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub n_users: usize,
    #[arg(long, default_value_t = 100)]
    pub n_developers: usize,
    #[arg(long, default_value_t = 3)]
    pub snapshots: usize,
    #[arg(long, default_value_t = 1000)]
    pub events_per_snapshot: usize,
    #[arg(long, default_value_t = 0.5)]
    pub cross_role_affinity: f64,
    #[arg(long, default_value_t = 0.0)]
    pub activity_skew: f64,
    #[arg(long, default_value_t = 1.0)]
    pub developer_activity: f64,
    #[arg(long, default_value_t = 2)]
    pub communities: usize,
    #[arg(long, default_value_t = 0.9)]
    pub community_affinity: f64,
    #[arg(long, default_value_t = 0.0)]
    pub community_drift: f64,
}

impl SynthArgs {
    pub fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_users: self.n_users,
            n_developers: self.n_developers,
            snapshots: self.snapshots,
            events_per_snapshot: self.events_per_snapshot,
            cross_role_affinity: self.cross_role_affinity,
            activity_skew: self.activity_skew,
            developer_activity: self.developer_activity,
            communities: self.communities,
            community_affinity: self.community_affinity,
            community_drift: self.community_drift,
            seed,
            ..SyntheticSpec::default()
        }
    }
}

/// Splices the `key=value` lines of a `--config` file into `argv` right
/// after the subcommand, so that flags given on the command line (which
/// come later) override them.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let mut injected = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{path}:{}: expected key=value", n + 1))?;
        let key = key.trim().replace('_', "-");
        match value.trim() {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            v => {
                injected.push(format!("--{key}"));
                injected.push(v.to_string());
            }
        }
    }
    let at = argv.len().min(2);
    let mut out = argv[..at].to_vec();
    out.extend(injected);
    out.extend(argv[at..].iter().cloned());
    Ok(out)
}
