use std::path::Path;

use rand::Rng;

use super::ZlaError;
use crate::modelfile::{ModelFile, ModelFileError};
use crate::nn::{init_uniform, TwoLayer, DEFAULT_LEAKY_SLOPE, PARAM_NAMES};
use crate::numgrad::{NumgradError, Tape, Tensor, Var};

pub const DEFAULT_TAU: f64 = 0.04;
pub const DEFAULT_PROTO_HIDDEN: usize = 1024;

/// Semantic → visual prototype network scored by cosine / τ.
#[derive(Clone, Debug, PartialEq)]
pub struct PrototypeLearner {
    pub net: TwoLayer,
    pub output_relu: bool,
    pub tau: f64,
}

impl PrototypeLearner {
    pub fn new<R: Rng>(
        rng: &mut R,
        semantic_dim: usize,
        hidden: usize,
        feature_dim: usize,
        tau: f64,
        output_relu: bool,
    ) -> Result<Self, ZlaError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ZlaError::InvalidTau(tau));
        }
        Ok(Self {
            net: TwoLayer::new(rng, semantic_dim, hidden, feature_dim, DEFAULT_LEAKY_SLOPE),
            output_relu,
            tau,
        })
    }

    /// Records unit-norm prototypes (`K × d_x`) for the given semantics.
    pub fn record_prototypes(&self, tape: &mut Tape, p: &[Var], semantics: Var) -> Result<Var, NumgradError> {
        let mut proto = TwoLayer::forward(tape, p, semantics, self.net.slope)?;
        if self.output_relu {
            proto = tape.relu(proto)?;
        }
        tape.row_normalize(proto)
    }

    /// Records `cos(x, P(a_y)) / τ` for unit-norm rows `x_unit`.
    pub fn record_logits(&self, tape: &mut Tape, p: &[Var], semantics: Var, x_unit: Var) -> Result<Var, NumgradError> {
        let proto = self.record_prototypes(tape, p, semantics)?;
        let pt = tape.transpose(proto)?;
        let cos = tape.matmul(x_unit, pt)?;
        tape.scale(cos, 1.0 / self.tau)
    }

    /// Raw cosine similarities `n × K`.
    pub fn cosines(&self, x: &Tensor, semantics: &Tensor) -> Result<Tensor, ZlaError> {
        let mut tape = Tape::new();
        let p: Vec<Var> = self.net.params.iter().map(|t| tape.constant(t.clone())).collect();
        let s = tape.constant(semantics.clone());
        let proto = self
            .record_prototypes(&mut tape, &p, s)
            .map_err(|e| zero_norm_as(e, "prototype"))?;
        let xu = tape.constant(unit_rows(x)?);
        let pt = tape.transpose(proto)?;
        let cos = tape.matmul(xu, pt)?;
        Ok(tape.value(cos).clone())
    }
}

fn zero_norm_as(e: NumgradError, what: &'static str) -> ZlaError {
    match e {
        NumgradError::ZeroNorm { row, .. } => ZlaError::ZeroNorm { what, row },
        other => other.into(),
    }
}

/// Rows scaled to unit length; a zero row is an error.
pub fn unit_rows(x: &Tensor) -> Result<Tensor, ZlaError> {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_slice_mut(r);
        let norm = crate::numgrad::l2(row);
        if norm == 0.0 {
            return Err(ZlaError::ZeroNorm { what: "feature", row: r });
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(out)
}

/// `logit_y = cos(x, P(a_y)) / τ` for one feature vector.
pub fn prototype_logits(x: &[f64], learner: &PrototypeLearner, semantics: &Tensor) -> Result<Vec<f64>, ZlaError> {
    let cos = learner.cosines(&Tensor::row(x)?, semantics)?;
    Ok(cos.data().iter().map(|c| c / learner.tau).collect())
}

/// Affine scores `x·W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearClassifier {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearClassifier {
    pub fn new<R: Rng>(rng: &mut R, feature_dim: usize, classes: usize) -> Self {
        Self {
            weight: init_uniform(rng, feature_dim, feature_dim, classes),
            bias: init_uniform(rng, feature_dim, 1, classes),
        }
    }

    pub fn record_logits(tape: &mut Tape, p: &[Var], x: Var) -> Result<Var, NumgradError> {
        let s = tape.matmul(x, p[0])?;
        tape.add(s, p[1])
    }

    pub fn scores(&self, x: &Tensor) -> Result<Tensor, ZlaError> {
        let mut tape = Tape::new();
        let p = [tape.constant(self.weight.clone()), tape.constant(self.bias.clone())];
        let xv = tape.constant(x.clone());
        let s = Self::record_logits(&mut tape, &p, xv)?;
        Ok(tape.value(s).clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassifierKind {
    Proto,
    Linear,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Proto => "proto",
            ClassifierKind::Linear => "linear",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proto" | "prototype" => Ok(ClassifierKind::Proto),
            "linear" => Ok(ClassifierKind::Linear),
            other => Err(format!("unknown classifier `{other}` (proto | linear)")),
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Anything that maps feature rows to class ids.
pub trait Predict {
    fn predict_rows(&self, x: &Tensor) -> Result<Vec<usize>, ZlaError>;
}

impl<F: Fn(&[f64]) -> usize> Predict for F {
    fn predict_rows(&self, x: &Tensor) -> Result<Vec<usize>, ZlaError> {
        Ok(x.iter_rows().map(self).collect())
    }
}

/// A trained classifier. The prototype variant keeps the semantic table it
/// was trained against.
#[derive(Clone, Debug, PartialEq)]
pub enum Classifier {
    Prototype {
        learner: PrototypeLearner,
        semantics: Tensor,
    },
    Linear(LinearClassifier),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Prototype { .. } => ClassifierKind::Proto,
            Classifier::Linear(_) => ClassifierKind::Linear,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Classifier::Prototype { semantics, .. } => semantics.rows(),
            Classifier::Linear(l) => l.weight.cols(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Classifier::Prototype { learner, .. } => learner.net.output_dim(),
            Classifier::Linear(l) => l.weight.rows(),
        }
    }

    /// Raw inference scores: cosines for prototypes, affine scores for linear.
    pub fn scores(&self, x: &Tensor) -> Result<Tensor, ZlaError> {
        if x.cols() != self.feature_dim() {
            return Err(ZlaError::Length {
                what: "feature row",
                expected: self.feature_dim(),
                found: x.cols(),
            });
        }
        match self {
            Classifier::Prototype { learner, semantics } => learner.cosines(x, semantics),
            Classifier::Linear(l) => l.scores(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize, ZlaError> {
        Ok(self.predict_rows(&Tensor::row(x)?)?[0])
    }

    pub fn to_model_file(&self) -> ModelFile {
        match self {
            Classifier::Prototype { learner, semantics } => {
                let mut f = ModelFile::new("prototype")
                    .attr("tau", learner.tau)
                    .attr("output_relu", learner.output_relu)
                    .attr("slope", learner.net.slope);
                for (name, t) in PARAM_NAMES.iter().zip(&learner.net.params) {
                    f = f.tensor(name, t);
                }
                f.tensor("semantics", semantics)
            }
            Classifier::Linear(l) => ModelFile::new("linear")
                .tensor("weight", &l.weight)
                .tensor("bias", &l.bias),
        }
    }

    pub fn from_model_file(file: &ModelFile) -> Result<Self, ModelFileError> {
        if file.kind == "linear" {
            return Ok(Classifier::Linear(LinearClassifier {
                weight: file.get_tensor("weight")?.clone(),
                bias: file.get_tensor("bias")?.clone(),
            }));
        }
        file.expect_kind("prototype")?;
        let params = PARAM_NAMES
            .iter()
            .map(|n| file.get_tensor(n).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Classifier::Prototype {
            learner: PrototypeLearner {
                net: TwoLayer::from_params(params, file.parse_attr("slope")?),
                output_relu: file.parse_attr("output_relu")?,
                tau: file.parse_attr("tau")?,
            },
            semantics: file.get_tensor("semantics")?.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ZlaError> {
        Ok(self.to_model_file().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, ZlaError> {
        Ok(Self::from_model_file(&ModelFile::load(path)?)?)
    }
}

/// Row-wise argmax, ties to the lowest class id.
pub fn argmax_rows(scores: &Tensor) -> Vec<usize> {
    scores
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

impl Predict for Classifier {
    fn predict_rows(&self, x: &Tensor) -> Result<Vec<usize>, ZlaError> {
        Ok(argmax_rows(&self.scores(x)?))
    }
}
