//! `haptic-lfd`: run one pipeline stage per invocation.
//!
//! Failures print exactly one line on stderr,
//! `error kind=<kind> exit=<code> message=<json string>`, and exit with the
//! code of the error kind: 2 config, 3 data/provenance/dimension, 4 numeric,
//! 5 I/O.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use haptic_lfd::experiment::SplitName;
use haptic_lfd::trajectory::ExplorationSubset;
use haptic_lfd::Error;

#[derive(Debug, Parser)]
#[command(name = "haptic-lfd", version, about = "Few-shot learning from demonstration with a pre-trained haptic encoder")]
pub struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed, overriding `seed` in the configuration.
    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,

    /// Output artifact; each command has its own default file name.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explore M randomly sampled objects and store the unlabelled force data.
    Collect {
        #[arg(long, short = 'm', value_name = "M")]
        count: usize,
    },
    /// Explore and demonstrate on all 12 grid objects, tagged with a split.
    Demo {
        #[arg(long, value_parser = parse_split)]
        split: SplitName,
    },
    /// Pre-train the β-VAE encoder on an exploration dataset.
    Pretrain {
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long, default_value = "both", value_parser = parse_subset)]
        subset: ExplorationSubset,
    },
    /// Train the motion decoder on the training objects of a demonstration set.
    Train {
        #[arg(long, value_name = "PATH")]
        demos: PathBuf,
        /// Frozen pre-trained encoder; without it the demo-only baseline is trained.
        #[arg(long, value_name = "PATH")]
        encoder: Option<PathBuf>,
        #[command(flatten)]
        split: SplitOverride,
    },
    /// Generate a wiping motion for one grid object from its exploration.
    Generate {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        demos: PathBuf,
        #[arg(long, value_name = "ID")]
        object: u32,
    },
    /// Score trained models on the held-out objects of a split.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        demos: PathBuf,
        /// Repeatable; each model becomes one summary row.
        #[arg(long = "model", value_name = "PATH", required = true)]
        models: Vec<PathBuf>,
        #[command(flatten)]
        split: SplitOverride,
    },
    /// Project the latents of the grid objects to 2-D with t-SNE.
    Embed {
        #[arg(long, value_name = "PATH")]
        encoder: PathBuf,
    },
    /// Run the full protocol over every split, method and seed.
    Experiment,
    /// Pre-train encoders on single exploratory actions and score their latents.
    Ablation,
}

#[derive(Debug, Args)]
pub struct SplitOverride {
    /// Defaults to the split tag stored in the demonstration dataset.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<SplitName>,
}

fn parse_split(s: &str) -> Result<SplitName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_subset(s: &str) -> Result<ExplorationSubset, String> {
    ExplorationSubset::ALL
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| {
            let names: Vec<&str> = ExplorationSubset::ALL.iter().map(|a| a.name()).collect();
            format!("unknown subset `{s}`; valid: {}", names.join(", "))
        })
}

fn error_line(kind: &str, exit: i32, message: &str) -> String {
    let quoted = serde_json::to_string(message).expect("strings always serialize");
    format!("error kind={kind} exit={exit} message={quoted}")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", error_line("config", 2, first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", error_line(e.kind(), code, &e.to_string()));
            ExitCode::from(code as u8)
        }
    }
}
