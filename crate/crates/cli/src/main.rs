//! `cogload`: command-line front end for the ingest, feature, training,
//! evaluation, statistics, simulation and live-session stages.

mod commands;
mod labels;
mod stats_cmd;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use cogload::cleaning::{FilterScope, DEFAULT_C, DEFAULT_K};
use cogload::features::{DEFAULT_RR_WINDOW, DEFAULT_TRUNCATE_SECONDS};
use cogload::Task;

#[derive(Parser)]
#[command(name = "cogload", version, about = "Cognitive-load classification from wearable EEG and R-R intervals")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decode framed device bytes (a device node or capture file) into a session log.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "P01")]
        participant: String,
        #[arg(long, default_value_t = 1)]
        round: u8,
        #[arg(long, default_value = "Unlabeled")]
        task: Task,
    },
    /// Turn a session log into feature rows.
    Featurize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seconds dropped from the start of each task segment.
        #[arg(long, default_value_t = DEFAULT_TRUNCATE_SECONDS)]
        truncate: usize,
        #[arg(long = "rr-window", default_value_t = DEFAULT_RR_WINDOW)]
        rr_window: usize,
    },
    /// Drop outlying feature rows with the k-nearest-neighbour distance filter.
    Clean {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_C)]
        c: f64,
        /// Grouping within which distances are compared: class, participant or global.
        #[arg(long, default_value = "class")]
        scope: FilterScope,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train a random forest on labeled feature rows.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 24)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trees: usize,
    },
    /// Leave-one-participant-out cross-validation.
    Cv {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 24)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trees: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified 80/20 holdout evaluation.
    Holdout {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 24)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trees: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Per-class metrics for a truth and a prediction label list.
    Report {
        /// Labels one per line, or a CSV with a `label` column.
        #[arg(long)]
        truth: PathBuf,
        /// Labels one per line, or a CSV with a `predicted` column.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistical batteries.
    Stats {
        #[command(subcommand)]
        test: stats_cmd::StatsCmd,
    },
    /// Generate a synthetic cohort session log.
    Simulate {
        #[arg(long, default_value_t = 30)]
        participants: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Class profiles as JSON; defaults to the built-in separable profiles.
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Use identical profiles for every class.
        #[arg(long, conflicts_with = "profiles")]
        chance: bool,
        /// Per-tick probability of an outlier tick.
        #[arg(long = "inject-outliers", default_value_t = 0.0)]
        inject_outliers: f64,
        /// Session plan JSON; defaults to the standard protocol.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Generate exam sessions (a low then a high difficulty block) instead.
        #[arg(long)]
        exam: bool,
        /// Ticks per exam block.
        #[arg(long = "block-seconds", default_value_t = 480)]
        block_seconds: u32,
        /// Write the built-in profiles to this path and exit.
        #[arg(long = "dump-profiles")]
        dump_profiles: Option<PathBuf>,
    },
    /// Run live sessions behind a WebSocket endpoint.
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8765")]
        listen: String,
        /// `synthetic`, `replay:<session.csv>` or `device:<path>`.
        #[arg(long, default_value = "synthetic")]
        source: String,
        /// Milliseconds between synthetic or replayed ticks.
        #[arg(long = "pace-ms", default_value_t = 1000)]
        pace_ms: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long = "log-dir")]
        log_dir: Option<PathBuf>,
    },
    /// Classify a session log or feature file with a trained model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Metrics and difficulty analysis as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Cmd::Ingest {
            input,
            out,
            participant,
            round,
            task,
        } => commands::ingest(&input, &out, &participant, round, task),
        Cmd::Featurize {
            input,
            out,
            truncate,
            rr_window,
        } => commands::featurize(&input, &out, truncate, rr_window),
        Cmd::Clean {
            input,
            out,
            k,
            c,
            scope,
            report,
        } => commands::clean(&input, &out, k, c, scope, report.as_deref()),
        Cmd::Train { input, model, seed, trees } => commands::train(&input, &model, seed, trees),
        Cmd::Cv { input, seed, trees, out } => commands::cv(&input, seed, trees, out.as_deref()),
        Cmd::Holdout {
            input,
            seed,
            trees,
            out,
            format,
        } => commands::holdout(&input, seed, trees, out.as_deref(), format),
        Cmd::Report { truth, pred, format, out } => commands::report(&truth, &pred, format, out.as_deref()),
        Cmd::Stats { test } => stats_cmd::run(test),
        Cmd::Simulate {
            participants,
            seed,
            out,
            profiles,
            chance,
            inject_outliers,
            plan,
            exam,
            block_seconds,
            dump_profiles,
        } => commands::simulate(commands::SimulateArgs {
            participants,
            seed,
            out,
            profiles,
            chance,
            inject_outliers,
            plan,
            exam,
            block_seconds,
            dump_profiles,
        }),
        Cmd::Serve {
            model,
            plan,
            listen,
            source,
            pace_ms,
            seed,
            log_dir,
        } => commands::serve(model.as_deref(), plan.as_deref(), &listen, &source, pace_ms, seed, log_dir),
        Cmd::Classify {
            model,
            input,
            out,
            report,
        } => commands::classify(&model, &input, &out, report.as_deref()),
    }
}
