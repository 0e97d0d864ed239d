//! The `zla` command-line driver: synth, train, eval, sweep and report.

mod args;
mod config;
mod pipeline;
mod report;
mod sweep;

pub use args::{CellSeeds, Cli, Command, ModelArgs, PriorSource};
pub use pipeline::{fit_generator, run_pipeline, RunOutcome, RunSettings};
pub use report::{read_rows, render_markdown};
pub use sweep::{plan_cells, run_sweep, spearman, trend_summary, Cell, SweepOutcome, SweepSpec};

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};

use crate::datagen::{load_class_table, load_dataset, save_dataset, synthesize, SyntheticSpec, CLASSES_FILE};
use crate::metrics::{evaluate, ReportRow, CSV_HEADER};
use crate::zla::{Classifier, LossKind};
use args::{EvalArgs, ReportArgs, SweepArgs, SynthArgs, TrainArgs};

pub const CLASSIFIER_FILE: &str = "classifier.zla";
pub const GENERATOR_FILE: &str = "generator.zla";
pub const RUN_RECORD_FILE: &str = "run.cfg";
pub const TRACE_FILE: &str = "trace.csv";
pub const RUN_LOG_FILE: &str = "runs.log";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let args = match config::expand_config(args.into_iter().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::command().args_override_self(true);
    let parsed = cli.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn dir_is_nonempty(p: &Path) -> bool {
    fs::read_dir(p).map(|mut d| d.next().is_some()).unwrap_or(false)
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        seen: a.seen,
        unseen: a.unseen,
        train_per_class: a.per_class,
        test_per_class: a.test_per_class,
        semantic_dim: a.da,
        feature_dim: a.dx,
        hidden: a.hidden,
        weight_scale: a.weight_scale,
        noise: a.noise,
        bias: 0.0,
        seed: a.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    if dir_is_nonempty(&a.out) && !a.force {
        return Err(anyhow!("{} is not empty; pass --force to overwrite", a.out.display()).into());
    }
    let (ds, _) = synthesize(&spec).context("synthesizing")?;
    save_dataset(&ds, &a.out).context("writing dataset")?;
    println!(
        "{}: {} classes ({} seen, {} unseen), d_a={}, d_x={}, rows train={} test_seen={} test_unseen={}",
        a.out.display(),
        ds.classes().len(),
        a.seen,
        a.unseen,
        a.da,
        a.dx,
        ds.train().len(),
        ds.test_seen().len(),
        ds.test_unseen().len()
    );
    Ok(())
}

fn check_run_id(id: &str) -> Result<(), CliError> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(usage(format!("run id `{id}` may only use letters, digits, `.`, `_` and `-`")))
    }
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let settings = RunSettings {
        generator: a.generator,
        ng: a.ng,
        sigma: a.sigma,
        model: a.model,
    };
    if settings.skips_generation() && settings.model.loss == LossKind::Zla {
        return Err(usage("--ng 0 with --loss zla: the zla priors need a pseudo-unseen set (use --ng ≥ 1)"));
    }
    let run_id = a.run_id.unwrap_or_else(|| settings.default_run_id());
    check_run_id(&run_id)?;
    let final_dir = a.out.join(&run_id);
    if final_dir.exists() && !a.force {
        return Err(anyhow!("run {} already exists; pass --force to replace it", final_dir.display()).into());
    }

    let ds = load_dataset(&a.data).context("stage `load`")?;
    let out = run_pipeline(&ds, &settings, None)?;

    let partial = a.out.join(format!(".{run_id}.partial"));
    let write = || -> Result<()> {
        if partial.exists() {
            fs::remove_dir_all(&partial)?;
        }
        fs::create_dir_all(&partial)?;
        out.trained.classifier.save(&partial.join(CLASSIFIER_FILE))?;
        if let Some(g) = &out.generator {
            g.save(&partial.join(GENERATOR_FILE))?;
        }
        fs::copy(a.data.join(CLASSES_FILE), partial.join(CLASSES_FILE))?;
        let record = settings.record(&run_id, &a.data.display().to_string());
        fs::write(partial.join(RUN_RECORD_FILE), &record)?;
        let trace: String = std::iter::once("batch,loss".to_string())
            .chain(out.trained.trace.iter().enumerate().map(|(i, l)| format!("{i},{l:?}")))
            .collect::<Vec<_>>()
            .join("\n");
        fs::write(partial.join(TRACE_FILE), trace + "\n")?;
        if final_dir.exists() {
            fs::remove_dir_all(&final_dir)?;
        }
        fs::rename(&partial, &final_dir)?;
        let mut log = fs::OpenOptions::new().create(true).append(true).open(a.out.join(RUN_LOG_FILE))?;
        writeln!(log, "{}", record.trim_end().replace('\n', " "))?;
        Ok(())
    };
    if let Err(e) = write() {
        let _ = fs::remove_dir_all(&partial);
        return Err(e.context("stage `write`").into());
    }
    let last = out.trained.trace.last().map_or("n/a".to_string(), |l| format!("{l:.4}"));
    println!("run {run_id}: wrote {} (final batch loss {last})", final_dir.display());
    Ok(())
}

/// `run.cfg` entries of a run directory.
fn read_record(run: &Path) -> Result<Vec<(String, String)>> {
    let p = run.join(RUN_RECORD_FILE);
    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    config::parse_flat(&text, &p.display().to_string())
}

fn record_field<'a>(rec: &'a [(String, String)], key: &str) -> Result<&'a str> {
    config::lookup(rec, key).ok_or_else(|| anyhow!("run record has no `{key}` entry"))
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let rec = read_record(&a.run)?;
    let classifier = Classifier::load(&a.run.join(CLASSIFIER_FILE)).context("loading classifier")?;
    let trained_table = load_class_table(&a.run).context("loading the run's class table")?;
    let ds = load_dataset(&a.data).context("loading dataset")?;
    if &trained_table != ds.classes() {
        return Err(anyhow!(
            "class table mismatch: run {} was trained on a different classes.csv than {}",
            a.run.display(),
            a.data.display()
        )
        .into());
    }
    if classifier.feature_dim() != ds.feature_dim() || classifier.classes() != ds.classes().len() {
        return Err(anyhow!(
            "model/dataset mismatch: model expects d_x={} and {} classes, dataset has d_x={} and {}",
            classifier.feature_dim(),
            classifier.classes(),
            ds.feature_dim(),
            ds.classes().len()
        )
        .into());
    }
    let report = evaluate(&classifier, &ds).context("evaluating")?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let row = ReportRow {
        run_id: record_field(&rec, "run-id")?.to_string(),
        sigma: record_field(&rec, "sigma")?.parse().context("run record sigma")?,
        ng: record_field(&rec, "ng")?.parse().context("run record ng")?,
        generator: record_field(&rec, "generator")?.to_string(),
        classifier: record_field(&rec, "classifier")?.to_string(),
        loss: record_field(&rec, "loss")?.to_string(),
        acc_unseen: report.acc_unseen,
        acc_seen: report.acc_seen,
        acc_h: report.acc_h,
    };
    let path = a.report.unwrap_or_else(|| {
        a.run.parent().map_or_else(|| PathBuf::from("report.csv"), |p| p.join("report.csv"))
    });
    append_rows(&path, std::slice::from_ref(&row))?;
    println!("{}", row.to_csv_line());
    Ok(())
}

fn append_rows(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if fresh {
        writeln!(f, "{CSV_HEADER}")?;
    }
    for r in rows {
        writeln!(f, "{}", r.to_csv_line())?;
    }
    Ok(())
}

/// Worker count: requested (or available cores), capped by `ZLA_THREADS`.
fn thread_count(requested: Option<usize>) -> Result<usize, CliError> {
    let base = requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match std::env::var("ZLA_THREADS") {
        Ok(v) => {
            let cap: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| usage(format!("ZLA_THREADS must be an integer ≥ 1, got `{v}`")))?;
            Ok(base.min(cap))
        }
        Err(_) => Ok(base),
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    if a.sigmas.is_empty() || a.ngs.is_empty() || a.generators.is_empty() {
        return Err(usage("sweep grids must be nonempty"));
    }
    let spec = SweepSpec {
        sigmas: a.sigmas,
        ngs: a.ngs,
        generators: a.generators,
        model: a.model,
        cell_seeds: a.cell_seeds,
        threads: thread_count(a.threads)?,
    };
    let ds = load_dataset(&a.data).context("stage `load`")?;
    let out = run_sweep(&ds, &spec)?;
    if a.report.exists() {
        fs::remove_file(&a.report).with_context(|| format!("replacing {}", a.report.display()))?;
    }
    append_rows(&a.report, &out.rows)?;
    for r in &out.rows {
        println!("{}", r.to_csv_line());
    }
    for (cell, err) in &out.failed {
        println!(
            "failed cell generator={} ng={} sigma={} seed={}: {err}",
            cell.generator, cell.ng, cell.sigma, cell.seed
        );
    }
    for line in trend_summary(&out.rows) {
        println!("{line}");
    }
    println!(
        "{} of {} cells succeeded; rows written to {}",
        out.rows.len(),
        out.rows.len() + out.failed.len(),
        a.report.display()
    );
    if out.rows.is_empty() {
        return Err(anyhow!("every sweep cell failed").into());
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<(), CliError> {
    let rows = read_rows(&a.input)?;
    let md = render_markdown(&rows);
    match a.output {
        Some(p) => fs::write(&p, md).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{md}"),
    }
    Ok(())
}
