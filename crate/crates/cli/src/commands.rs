use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use serde::Serialize;

use cogload::cleaning::{filter_rows, FilterScope};
use cogload::evaluation::{holdout as run_holdout, logo_cv, score};
use cogload::features::{extract_features, labeled_columns, read_features_csv, write_features_csv};
use cogload::forest::{self, io as model_io};
use cogload::ingest::{decode_stream, read_csv, write_csv};
use cogload::synth::{generate_cohort, generate_exam_session, ClassProfiles, ExamMix, SyntheticCohort};
use cogload::{FeatureRow, ForestConfig, SessionPlan, Task, FEATURE_DIM};
use cogload_service::{classify_file, Server, ServerConfig, SourceKind};

use crate::labels::read_labels;
use crate::ReportFormat;

/// Write `text` to `out`, or to stdout when absent. A closed stdout pipe
/// is not an error.
pub fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"), out)
}

fn read_features(path: &Path) -> anyhow::Result<Vec<FeatureRow>> {
    read_features_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn labeled_matrix(rows: &[FeatureRow]) -> anyhow::Result<(Vec<[f64; FEATURE_DIM]>, Vec<cogload::LoadLabel>, Vec<String>)> {
    let (x, y, g) = labeled_columns(rows);
    if x.is_empty() {
        bail!("no labeled rows");
    }
    Ok((x.iter().map(|v| v.to_array()).collect(), y, g))
}

fn plan_from(path: Option<&Path>) -> anyhow::Result<SessionPlan> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(SessionPlan::from_json(&text)?)
        }
        None => Ok(SessionPlan::default()),
    }
}

pub fn ingest(input: &Path, out: &Path, participant: &str, round: u8, task: Task) -> anyhow::Result<()> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let (records, stats) = decode_stream(BufReader::new(file), participant, round, task)?;
    write_csv(&records, out)?;
    eprintln!(
        "{} ticks from {} frames ({} checksum errors, {} malformed payloads, {} implausible R-R dropped, {} bytes skipped)",
        records.len(),
        stats.frames,
        stats.checksum_errors,
        stats.malformed_payloads,
        stats.dropped_rr,
        stats.discarded_bytes
    );
    Ok(())
}

pub fn featurize(input: &Path, out: &Path, truncate: usize, rr_window: usize) -> anyhow::Result<()> {
    if !(1..=cogload::features::MAX_TRUNCATE_SECONDS).contains(&truncate) {
        bail!("--truncate must be 1..={}", cogload::features::MAX_TRUNCATE_SECONDS);
    }
    if rr_window < 2 {
        bail!("--rr-window must be at least 2");
    }
    let records = read_csv(input).with_context(|| format!("reading {}", input.display()))?;
    let rows = extract_features(&records, rr_window, truncate)?;
    write_features_csv(&rows, out)?;
    eprintln!("{} feature rows from {} ticks", rows.len(), records.len());
    Ok(())
}

pub fn clean(input: &Path, out: &Path, k: usize, c: f64, scope: FilterScope, report: Option<&Path>) -> anyhow::Result<()> {
    let rows = read_features(input)?;
    let r = filter_rows(&rows, scope, k, c)?;
    let kept: Vec<FeatureRow> = r.kept_indices.iter().map(|&i| rows[i].clone()).collect();
    write_features_csv(&kept, out)?;
    if let Some(p) = report {
        write_json(&r, Some(p))?;
    }
    eprintln!(
        "removed {} of {} rows ({:.2}%)",
        r.removed_indices.len(),
        rows.len(),
        100.0 * r.removal_fraction()
    );
    Ok(())
}

pub fn train(input: &Path, model: &Path, seed: u64, trees: usize) -> anyhow::Result<()> {
    let rows = read_features(input)?;
    let (x, y, _) = labeled_matrix(&rows)?;
    let config = ForestConfig::default().with_seed(seed).with_trees(trees);
    let m = forest::fit(&x, &y, &config)?;
    model_io::save(&m, model)?;
    match m.oob_accuracy() {
        Some(a) => eprintln!("{} trees on {} rows, out-of-bag accuracy {:.4}", trees, x.len(), a),
        None => eprintln!("{} trees on {} rows", trees, x.len()),
    }
    Ok(())
}

pub fn cv(input: &Path, seed: u64, trees: usize, out: Option<&Path>) -> anyhow::Result<()> {
    let rows = read_features(input)?;
    let (x, y, g) = labeled_matrix(&rows)?;
    let config = ForestConfig::default().with_seed(seed).with_trees(trees);
    let summary = logo_cv(&x, &y, &g, &config)?;
    for f in &summary.folds {
        eprintln!("{:>8} {:.4} ({} test rows)", f.held_out_group, f.accuracy, f.n_test);
    }
    eprintln!(
        "mean accuracy {:.4}, std {:.4} over {} folds",
        summary.mean_accuracy,
        summary.std_accuracy,
        summary.folds.len()
    );
    write_json(&summary, out)
}

pub fn holdout(input: &Path, seed: u64, trees: usize, out: Option<&Path>, format: ReportFormat) -> anyhow::Result<()> {
    let rows = read_features(input)?;
    let (x, y, _) = labeled_matrix(&rows)?;
    let config = ForestConfig::default().with_seed(seed).with_trees(trees);
    let result = run_holdout(&x, &y, seed, &config)?;
    match format {
        ReportFormat::Text => emit(&result.report.to_text(), out),
        ReportFormat::Json => write_json(&result, out),
    }
}

pub fn report(truth: &Path, pred: &Path, format: ReportFormat, out: Option<&Path>) -> anyhow::Result<()> {
    let t = read_labels(truth, "label")?;
    let p = read_labels(pred, "predicted")?;
    let r = score(&t, &p)?;
    match format {
        ReportFormat::Text => emit(&r.to_text(), out),
        ReportFormat::Json => write_json(&r, out),
    }
}

pub struct SimulateArgs {
    pub participants: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub profiles: Option<PathBuf>,
    pub chance: bool,
    pub inject_outliers: f64,
    pub plan: Option<PathBuf>,
    pub exam: bool,
    pub block_seconds: u32,
    pub dump_profiles: Option<PathBuf>,
}

pub fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    if let Some(p) = &a.dump_profiles {
        std::fs::write(p, ClassProfiles::default().to_json() + "\n")?;
        return Ok(());
    }
    let profiles = match (&a.profiles, a.chance) {
        (Some(p), _) => ClassProfiles::from_json(&std::fs::read_to_string(p)?)?,
        (None, true) => ClassProfiles::identical(),
        (None, false) => ClassProfiles::default(),
    };
    if !(0.0..=1.0).contains(&a.inject_outliers) {
        bail!("--inject-outliers must be a probability");
    }
    let records = if a.exam {
        let cohort = SyntheticCohort::new(a.participants, a.seed);
        generate_exam_session(
            a.participants,
            a.block_seconds,
            &ExamMix::default(),
            &profiles,
            cohort.offset_scale,
            a.seed,
        )
        .records
    } else {
        let cohort = SyntheticCohort {
            plan: plan_from(a.plan.as_deref())?,
            inject_outliers: a.inject_outliers,
            ..SyntheticCohort::new(a.participants, a.seed)
        };
        generate_cohort(&cohort, &profiles)
    };
    write_csv(&records, &a.out)?;
    eprintln!("{} ticks for {} participants", records.len(), a.participants);
    Ok(())
}

pub fn serve(
    model: Option<&Path>,
    plan: Option<&Path>,
    listen: &str,
    source: &str,
    pace_ms: u64,
    seed: u64,
    log_dir: Option<PathBuf>,
) -> anyhow::Result<()> {
    let model = match model {
        Some(p) => Some(Arc::new(model_io::load(p).with_context(|| format!("loading {}", p.display()))?)),
        None => None,
    };
    let pace = Some(Duration::from_millis(pace_ms));
    let source = match source.split_once(':') {
        None if source == "synthetic" => SourceKind::Synthetic {
            profiles: ClassProfiles::default(),
            seed,
            pace,
        },
        Some(("replay", path)) => SourceKind::Replay {
            records: read_csv(path).with_context(|| format!("reading {path}"))?,
            pace,
        },
        Some(("device", path)) => SourceKind::Device { path: path.into() },
        _ => bail!("--source must be synthetic, replay:<file> or device:<path>"),
    };
    if let Some(d) = &log_dir {
        std::fs::create_dir_all(d)?;
    }
    let mut config = ServerConfig::new(plan_from(plan)?, model, source);
    config.log_dir = log_dir;
    let server = Server::bind(listen, config).with_context(|| format!("binding {listen}"))?;
    eprintln!("listening on ws://{}", server.local_addr()?);
    server.run()?;
    Ok(())
}

pub fn classify(model: &Path, input: &Path, out: &Path, report: Option<&Path>) -> anyhow::Result<()> {
    let m = model_io::load(model).with_context(|| format!("loading {}", model.display()))?;
    let inp = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let mut w = BufWriter::new(File::create(out)?);
    let r = classify_file(&m, BufReader::new(inp), &mut w)?;
    w.flush()?;
    if let Some(metrics) = &r.metrics {
        eprint!("{}", metrics.to_text());
    }
    if let Some(d) = &r.difficulty {
        for ratio in &d.ratios {
            eprintln!(
                "{} difficulty: Baseline {:.2}% Low {:.2}% High {:.2}%, mean load {:.2}",
                ratio.difficulty, ratio.percent[0], ratio.percent[1], ratio.percent[2], ratio.mean_load()
            );
        }
        if let Some(c) = &d.chi_square {
            eprintln!("chi2 {:.1}, df {}, p {:.3e}, V {:.4}", c.chi2, c.df, c.p_value, c.cramers_v);
        }
    }
    if let Some(p) = report {
        write_json(&r, Some(p))?;
    }
    Ok(())
}
