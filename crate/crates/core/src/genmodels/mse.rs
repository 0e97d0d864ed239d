use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::GenError;
use crate::datagen::GzslDataset;
use crate::modelfile::{ModelFile, ModelFileError};
use crate::nn::{minibatch_fit, FitConfig, TwoLayer, DEFAULT_LEAKY_SLOPE, PARAM_NAMES};
use crate::numgrad::{AdamConfig, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapperConfig {
    pub hidden: usize,
    /// Full-batch Adam steps.
    pub epochs: usize,
    pub lr: f64,
    pub slope: f64,
    pub seed: u64,
}

impl Default for MapperConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            epochs: 2000,
            lr: 1e-3,
            slope: DEFAULT_LEAKY_SLOPE,
            seed: 0,
        }
    }
}

/// Regresses a class's visual center from its semantic vector.
#[derive(Clone, Debug, PartialEq)]
pub struct MseMapper {
    pub net: TwoLayer,
}

impl MseMapper {
    pub fn feature_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn center(&self, semantic: &[f64]) -> Result<Vec<f64>, GenError> {
        if semantic.len() != self.net.input_dim() {
            return Err(GenError::Dimension {
                expected: format!("semantic {}", self.net.input_dim()),
                found: semantic.len(),
            });
        }
        Ok(self.net.eval(&Tensor::row(semantic)?)?.into_data())
    }

    pub fn to_model_file(&self) -> ModelFile {
        write_net(ModelFile::new("mse_mapper"), "", &self.net)
    }

    pub fn from_model_file(file: &ModelFile) -> Result<Self, ModelFileError> {
        file.expect_kind("mse_mapper")?;
        Ok(Self { net: read_net(file, "")? })
    }
}

pub(super) fn write_net(mut file: ModelFile, prefix: &str, net: &TwoLayer) -> ModelFile {
    file = file.attr(&format!("{prefix}slope"), net.slope);
    for (name, t) in PARAM_NAMES.iter().zip(&net.params) {
        file = file.tensor(&format!("{prefix}{name}"), t);
    }
    file
}

pub(super) fn read_net(file: &ModelFile, prefix: &str) -> Result<TwoLayer, ModelFileError> {
    let slope = file.parse_attr(&format!("{prefix}slope"))?;
    let params = PARAM_NAMES
        .iter()
        .map(|n| file.get_tensor(&format!("{prefix}{n}")).cloned())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TwoLayer::from_params(params, slope))
}

/// Seen semantic matrix and matching train-mean targets, in seen-id order.
pub(super) fn seen_targets(train: &GzslDataset) -> Result<(Tensor, Tensor), GenError> {
    let means = train.train_class_means();
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for id in train.classes().seen_ids() {
        let m = means[id].clone().ok_or(GenError::EmptyClass(id))?;
        inputs.push(train.classes().classes()[id].semantic.clone());
        targets.push(m);
    }
    Ok((Tensor::from_rows(&inputs)?, Tensor::from_rows(&targets)?))
}

/// Full-batch MSE regression from seen semantics to seen train means.
pub fn fit_mse_mapper(train: &GzslDataset, cfg: &MapperConfig) -> Result<MseMapper, GenError> {
    let (inputs, targets) = seen_targets(train)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = TwoLayer::new(
        &mut rng,
        inputs.cols(),
        cfg.hidden,
        targets.cols(),
        cfg.slope,
    );
    let fit = FitConfig {
        epochs: cfg.epochs,
        batch_size: inputs.rows(),
        adam: AdamConfig { lr: cfg.lr, ..AdamConfig::default() },
        seed: cfg.seed,
    };
    let slope = cfg.slope;
    minibatch_fit(&mut net.params, inputs.rows(), &fit, |tape, p, idx, _| {
        let x = tape.constant(inputs.select_rows(idx));
        let t = tape.constant(targets.select_rows(idx));
        let y = TwoLayer::forward(tape, p, x, slope)?;
        let d = tape.sub(y, t)?;
        let sq = tape.mul(d, d)?;
        tape.mean(sq)
    })?;
    Ok(MseMapper { net })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{ClassInfo, ClassTable, Split};
    use rand_distr::{Distribution, StandardNormal};

    /// d_a = d_x and every feature row equals relu(a_y) exactly.
    fn identity_world() -> GzslDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 8;
        let classes: Vec<ClassInfo> = (0..8)
            .map(|id| ClassInfo {
                id,
                name: format!("c{id}"),
                is_seen: id < 6,
                semantic: (0..d).map(|_| StandardNormal.sample(&mut rng)).collect(),
            })
            .collect();
        let table = ClassTable::new(classes.clone()).unwrap();
        let split = |ids: &[usize], n: usize| {
            let mut labels = Vec::new();
            let mut rows = Vec::new();
            for &c in ids {
                for _ in 0..n {
                    labels.push(c);
                    rows.push(classes[c].semantic.iter().map(|v| v.max(0.0)).collect::<Vec<_>>());
                }
            }
            Split::new(labels, Tensor::from_rows(&rows).unwrap())
        };
        let train = split(&[0, 1, 2, 3, 4, 5], 5);
        let ts = split(&[0], 1);
        let tu = split(&[6, 7], 1);
        GzslDataset::new(table, train, ts, tu).unwrap()
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        dot / (crate::numgrad::l2(a) * crate::numgrad::l2(b))
    }

    #[test]
    fn fits_identity_like_world() {
        let ds = identity_world();
        let m = fit_mse_mapper(&ds, &MapperConfig::default()).unwrap();
        for c in ds.classes().seen_ids() {
            let info = &ds.classes().classes()[c];
            let target: Vec<f64> = info.semantic.iter().map(|v| v.max(0.0)).collect();
            let cos = cosine(&m.center(&info.semantic).unwrap(), &target);
            assert!(cos >= 0.99, "class {c}: cos {cos}");
        }
    }

    #[test]
    fn zero_epochs_returns_initialization_and_is_deterministic() {
        let ds = identity_world();
        let cfg = MapperConfig { epochs: 0, ..MapperConfig::default() };
        let m = fit_mse_mapper(&ds, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = TwoLayer::new(&mut rng, 8, cfg.hidden, 8, cfg.slope);
        assert_eq!(m.net, init);

        let cfg = MapperConfig { epochs: 20, ..MapperConfig::default() };
        assert_eq!(fit_mse_mapper(&ds, &cfg).unwrap(), fit_mse_mapper(&ds, &cfg).unwrap());
    }

    #[test]
    fn model_file_round_trip() {
        let ds = identity_world();
        let m = fit_mse_mapper(&ds, &MapperConfig { epochs: 3, ..MapperConfig::default() }).unwrap();
        let back = MseMapper::from_model_file(&ModelFile::parse(&m.to_model_file().to_text()).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
