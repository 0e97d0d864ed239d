use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::classifier::{unit_rows, DEFAULT_PROTO_HIDDEN, DEFAULT_TAU};
use super::{batch_zla_loss, offsets, Classifier, ClassifierKind, LinearClassifier, LogitOffsets, PriorConfig, PrototypeLearner, ZlaError};
use crate::datagen::GzslDataset;
use crate::genmodels::PseudoSet;
use crate::nn::{derive_seed, minibatch_fit, FitConfig};
use crate::numgrad::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Zla,
    Ce,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Zla => "zla",
            LossKind::Ce => "ce",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zla" => Ok(LossKind::Zla),
            "ce" => Ok(LossKind::Ce),
            other => Err(format!("unknown loss `{other}` (zla | ce)")),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Generation number the pseudo set was drawn with; recorded only.
    pub ng: usize,
    pub classifier: ClassifierKind,
    pub loss: LossKind,
    pub tau: f64,
    pub hidden: usize,
    pub output_relu: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 512,
            lr: 1e-3,
            seed: 0,
            ng: 10,
            classifier: ClassifierKind::Proto,
            loss: LossKind::Zla,
            tau: DEFAULT_TAU,
            hidden: DEFAULT_PROTO_HIDDEN,
            output_relu: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedClassifier {
    pub classifier: Classifier,
    /// Loss per minibatch, in order.
    pub trace: Vec<f64>,
}

/// Pools train-seen rows with the pseudo-unseen rows and fits the classifier
/// with the adjusted (or plain) cross-entropy.
pub fn train_classifier(
    dataset: &GzslDataset,
    pseudo: &PseudoSet,
    priors: &PriorConfig,
    cfg: &TrainConfig,
) -> Result<TrainedClassifier, ZlaError> {
    let table = dataset.classes();
    if dataset.train().is_empty() {
        return Err(ZlaError::EmptyTrain);
    }
    if pseudo.is_empty() && !(cfg.loss == LossKind::Ce && cfg.classifier == ClassifierKind::Proto) {
        return Err(ZlaError::MissingPseudo);
    }
    if priors.classes() != table.len() {
        return Err(ZlaError::Length {
            what: "priors",
            expected: table.len(),
            found: priors.classes(),
        });
    }
    if let Some(&l) = pseudo.labels.iter().find(|&&l| l >= table.len() || table.is_seen(l)) {
        return Err(ZlaError::PseudoLabel(l));
    }
    let offs = match cfg.loss {
        LossKind::Zla => offsets(priors),
        LossKind::Ce => LogitOffsets::zeros(table.len()),
    };

    let features = if pseudo.is_empty() {
        dataset.train().features.clone()
    } else {
        dataset.train().features.vstack(&pseudo.features)?
    };
    let labels: Vec<usize> = dataset.train().labels.iter().chain(&pseudo.labels).copied().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fit = FitConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        adam: AdamConfig { lr: cfg.lr, ..AdamConfig::default() },
        seed: derive_seed(cfg.seed, 1),
    };
    match cfg.classifier {
        ClassifierKind::Proto => {
            let mut learner = PrototypeLearner::new(
                &mut rng,
                table.semantic_dim(),
                cfg.hidden,
                dataset.feature_dim(),
                cfg.tau,
                cfg.output_relu,
            )?;
            let semantics = table.semantics();
            let unit = unit_rows(&features)?;
            let shape = learner.clone();
            let mut params = std::mem::take(&mut learner.net.params);
            let trace = minibatch_fit(&mut params, labels.len(), &fit, |tape, p, idx, _| {
                let s = tape.constant(semantics.clone());
                let x = tape.constant(unit.select_rows(idx));
                let logits = shape.record_logits(tape, p, s, x)?;
                let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                batch_zla_loss(tape, logits, &y, &offs)
            })?;
            learner.net.params = params;
            Ok(TrainedClassifier {
                classifier: Classifier::Prototype { learner, semantics },
                trace,
            })
        }
        ClassifierKind::Linear => {
            let init = LinearClassifier::new(&mut rng, dataset.feature_dim(), table.len());
            let mut params = vec![init.weight, init.bias];
            let trace = minibatch_fit(&mut params, labels.len(), &fit, |tape, p, idx, _| {
                let x = tape.constant(features.select_rows(idx));
                let logits = LinearClassifier::record_logits(tape, p, x)?;
                let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                batch_zla_loss(tape, logits, &y, &offs)
            })?;
            let bias = params.pop().expect("two params");
            let weight = params.pop().expect("two params");
            Ok(TrainedClassifier {
                classifier: Classifier::Linear(LinearClassifier { weight, bias }),
                trace,
            })
        }
    }
}
