use anyhow::{Context, Result};

use super::args::{ModelArgs, PriorSource};
use crate::datagen::{bias_field, GzslDataset};
use crate::genmodels::{
    fit_cvae, fit_gaussian, fit_mse_mapper, generate, CvaeConfig, Generator, GeneratorKind, MapperConfig, PseudoSet,
};
use crate::nn::derive_seed;
use crate::zla::{build_priors, train_classifier, LossKind, PriorConfig, TrainConfig, TrainedClassifier};

const GENERATOR_STREAM: u64 = 11;
const SAMPLE_STREAM: u64 = 12;
const BIAS_STREAM: u64 = 13;
const CLASSIFIER_STREAM: u64 = 14;

/// Everything that determines one training run.
#[derive(Clone, Debug)]
pub struct RunSettings {
    pub generator: GeneratorKind,
    pub ng: usize,
    pub sigma: f64,
    pub model: ModelArgs,
}

impl RunSettings {
    pub fn default_run_id(&self) -> String {
        format!(
            "{}-{}-sigma{}-ng{}-seed{}",
            self.generator, self.model.loss, self.sigma, self.ng, self.model.seed
        )
    }

    /// Whether this run trains without pseudo rows (the non-generative baseline).
    pub fn skips_generation(&self) -> bool {
        self.ng == 0
    }

    /// Flat `key=value` record, readable back as a `--config` file for `train`.
    pub fn record(&self, run_id: &str, data: &str) -> String {
        let m = &self.model;
        let mut lines = vec![
            format!("run-id={run_id}"),
            format!("data={data}"),
            format!("generator={}", self.generator),
            format!("ng={}", self.ng),
            format!("sigma={}", self.sigma),
            format!("tau={}", m.tau),
            format!("classifier={}", m.classifier),
            format!("loss={}", m.loss),
            format!("epochs={}", m.epochs),
            format!("batch={}", m.batch),
            format!("lr={}", m.lr),
            format!("hidden={}", m.hidden),
            format!("output-relu={}", m.output_relu),
            format!("priors={}", match m.priors {
                PriorSource::Empirical => "empirical",
                PriorSource::Uniform => "uniform",
            }),
            format!("bias={}", m.bias),
            format!("seed={}", m.seed),
        ];
        if let Some(e) = m.gen_epochs {
            lines.push(format!("gen-epochs={e}"));
        }
        if let Some(l) = m.latent {
            lines.push(format!("latent={l}"));
        }
        lines.join("\n") + "\n"
    }
}

pub fn generator_seed(seed: u64) -> u64 {
    derive_seed(seed, GENERATOR_STREAM)
}

pub fn fit_generator(ds: &GzslDataset, kind: GeneratorKind, model: &ModelArgs) -> Result<Generator> {
    let seed = generator_seed(model.seed);
    let mapper = |seed| MapperConfig {
        epochs: model.gen_epochs.unwrap_or(MapperConfig::default().epochs),
        seed,
        ..MapperConfig::default()
    };
    let g = match kind {
        GeneratorKind::Mse => Generator::Mse(fit_mse_mapper(ds, &mapper(seed))?),
        GeneratorKind::Gaussian => Generator::Gaussian(fit_gaussian(ds, &mapper(seed))?),
        GeneratorKind::Cvae => {
            let cfg = CvaeConfig {
                latent: model.latent,
                epochs: model.gen_epochs.unwrap_or(CvaeConfig::default().epochs),
                seed,
                ..CvaeConfig::default()
            };
            Generator::Cvae(fit_cvae(ds, &cfg)?)
        }
    };
    Ok(g)
}

pub struct RunOutcome {
    pub generator: Option<Generator>,
    pub trained: TrainedClassifier,
}

/// Generator → pseudo rows → priors → classifier. A pre-fitted generator for
/// the same settings may be passed in to skip the first stage.
pub fn run_pipeline(ds: &GzslDataset, s: &RunSettings, fitted: Option<&Generator>) -> Result<RunOutcome> {
    let m = &s.model;
    if s.skips_generation() && m.loss == LossKind::Zla {
        anyhow::bail!("stage `generate`: --ng 0 leaves no pseudo-unseen rows, which the zla priors require");
    }
    let (generator, pseudo) = if s.skips_generation() {
        (None, PseudoSet::empty(ds.feature_dim()))
    } else {
        let g = match fitted {
            Some(g) => g.clone(),
            None => fit_generator(ds, s.generator, m).context("stage `generator`")?,
        };
        let bias = (m.bias > 0.0).then(|| bias_field(ds, m.bias, derive_seed(m.seed, BIAS_STREAM)));
        let unseen = ds.classes().unseen_ids();
        let pseudo = generate(&g, ds.classes(), &unseen, s.ng, derive_seed(m.seed, SAMPLE_STREAM), bias.as_ref())
            .context("stage `generate`")?;
        (Some(g), pseudo)
    };
    let priors = match (m.priors, pseudo.is_empty()) {
        (PriorSource::Empirical, false) => build_priors(ds, &pseudo, s.sigma),
        _ => PriorConfig::uniform(s.sigma, ds.classes().seen_flags()),
    }
    .context("stage `priors`")?;
    let cfg = TrainConfig {
        epochs: m.epochs,
        batch_size: m.batch,
        lr: m.lr,
        seed: derive_seed(m.seed, CLASSIFIER_STREAM),
        ng: s.ng,
        classifier: m.classifier,
        loss: m.loss,
        tau: m.tau,
        hidden: m.hidden,
        output_relu: m.output_relu,
    };
    let trained = train_classifier(ds, &pseudo, &priors, &cfg).context("stage `classifier`")?;
    Ok(RunOutcome { generator, trained })
}
