use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::genmodels::GeneratorKind;
use crate::zla::{ClassifierKind, LossKind};

#[derive(Debug, Parser)]
#[command(name = "zla", version, about = "Zero-shot logit adjustment laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic GZSL dataset.
    Synth(SynthArgs),
    /// Fit a generator, synthesize pseudo-unseen rows and train a classifier.
    Train(TrainArgs),
    /// Evaluate a trained run and append one CSV report row.
    Eval(EvalArgs),
    /// Run a grid of training runs and write one report row per cell.
    Sweep(SweepArgs),
    /// Render report CSV rows as a markdown table.
    Report(ReportArgs),
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive finite number")),
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a nonnegative finite number")),
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("`{s}` must be an integer ≥ 1")),
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10, value_parser = at_least_one)]
    pub seen: usize,
    #[arg(long, default_value_t = 5, value_parser = at_least_one)]
    pub unseen: usize,
    /// Semantic dimension.
    #[arg(long, default_value_t = 16, value_parser = at_least_one)]
    pub da: usize,
    /// Feature dimension.
    #[arg(long, default_value_t = 32, value_parser = at_least_one)]
    pub dx: usize,
    /// Hidden width of the hidden semantic→feature map.
    #[arg(long, default_value_t = 64, value_parser = at_least_one)]
    pub hidden: usize,
    /// Train rows per seen class.
    #[arg(long, default_value_t = 200, value_parser = at_least_one)]
    pub per_class: usize,
    /// Test rows per class.
    #[arg(long, default_value_t = 100, value_parser = at_least_one)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 0.5, value_parser = positive)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub weight_scale: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PriorSource {
    Empirical,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CellSeeds {
    /// Every cell uses the base seed.
    Common,
    /// Base seed mixed with a hash of the cell coordinates.
    Derived,
}

/// Settings shared by `train` and `sweep`.
#[derive(Clone, Debug, PartialEq, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0.04, value_parser = positive)]
    pub tau: f64,
    #[arg(long, default_value = "proto")]
    pub classifier: ClassifierKind,
    #[arg(long, default_value = "zla")]
    pub loss: LossKind,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 512, value_parser = at_least_one)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub lr: f64,
    /// Hidden width of the prototype learner.
    #[arg(long, default_value_t = 1024, value_parser = at_least_one)]
    pub hidden: usize,
    /// Apply relu to the prototype output.
    #[arg(long)]
    pub output_relu: bool,
    #[arg(long, value_enum, default_value_t = PriorSource::Empirical)]
    pub priors: PriorSource,
    /// Relative generator bias shift for unseen classes.
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative)]
    pub bias: f64,
    /// Generator training epochs (default depends on the generator).
    #[arg(long)]
    pub gen_epochs: Option<usize>,
    /// CVAE latent size (default: semantic dimension).
    #[arg(long, value_parser = at_least_one)]
    pub latent: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Default for ModelArgs {
    fn default() -> Self {
        Self {
            tau: 0.04,
            classifier: ClassifierKind::Proto,
            loss: LossKind::Zla,
            epochs: 30,
            batch: 512,
            lr: 1e-3,
            hidden: 1024,
            output_relu: false,
            priors: PriorSource::Empirical,
            bias: 0.0,
            gen_epochs: None,
            latent: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Directory holding run directories.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long, default_value = "cvae")]
    pub generator: GeneratorKind,
    /// Pseudo rows per unseen class.
    #[arg(long, default_value_t = 10)]
    pub ng: usize,
    #[arg(long, default_value_t = 1000.0, value_parser = positive)]
    pub sigma: f64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Replace an existing run directory with the same id.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// CSV file to append to (default: report.csv next to the run directory).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true, value_parser = positive)]
    pub sigmas: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "10")]
    pub ngs: Vec<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "cvae")]
    pub generators: Vec<GeneratorKind>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = CellSeeds::Common)]
    pub cell_seeds: CellSeeds,
    /// Worker threads (capped by ZLA_THREADS).
    #[arg(long, value_parser = at_least_one)]
    pub threads: Option<usize>,
    /// Report CSV to write.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_defaults_match_model_defaults() {
        let cli = Cli::try_parse_from(["zla", "train", "--data", "d"]).unwrap();
        let Command::Train(t) = cli.command else {
            panic!("parsed the wrong subcommand");
        };
        assert_eq!(t.model, ModelArgs::default());
        assert_eq!((t.ng, t.sigma, t.generator), (10, 1000.0, GeneratorKind::Cvae));
    }
}
