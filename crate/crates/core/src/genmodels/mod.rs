//! Pseudo-unseen feature generators.
//!
//! Three first-order families with increasing sample diversity: an MSE
//! semantic→center mapper that replicates one point per class, a Gaussian
//! generator around the regressed center, and a conditional VAE.

mod cvae;
mod gaussian;
mod mse;

pub use cvae::{fit_cvae, kl_standard_normal, CvaeConfig, CvaeModel};
pub use gaussian::{fit_gaussian, GaussianGenerator};
pub use mse::{fit_mse_mapper, MapperConfig, MseMapper};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::datagen::{BiasField, ClassTable, DatagenError};
use crate::modelfile::{ModelFile, ModelFileError};
use crate::nn::{derive_seed, FitError};
use crate::numgrad::{NumgradError, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("seen class {0} has no training rows")]
    EmptyClass(usize),
    #[error("class {0} is not an unseen class of this table")]
    NotUnseen(usize),
    #[error("generation number must be at least 1")]
    ZeroGeneration,
    #[error("latent dimension must be at least 1")]
    ZeroLatent,
    #[error("model expects {expected} dimension {found}")]
    Dimension { expected: String, found: usize },
    #[error("training diverged: {0}")]
    Fit(#[from] FitError),
    #[error(transparent)]
    Numgrad(#[from] NumgradError),
    #[error(transparent)]
    Model(#[from] ModelFileError),
    #[error(transparent)]
    Data(#[from] DatagenError),
}

/// Generated rows for the unseen classes, `per_class` rows each, grouped by
/// class in the requested order.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoSet {
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub per_class: usize,
}

impl PseudoSet {
    pub fn empty(dim: usize) -> Self {
        Self {
            features: Tensor::zeros(0, dim),
            labels: Vec::new(),
            per_class: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows_of(&self, class: usize) -> Tensor {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == class).collect();
        self.features.select_rows(&idx)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    Mse,
    Gaussian,
    Cvae,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Mse => "mse",
            GeneratorKind::Gaussian => "gaussian",
            GeneratorKind::Cvae => "cvae",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mse" => Ok(GeneratorKind::Mse),
            "gaussian" => Ok(GeneratorKind::Gaussian),
            "cvae" | "vae" => Ok(GeneratorKind::Cvae),
            other => Err(format!("unknown generator `{other}` (mse | gaussian | cvae)")),
        }
    }
}

impl std::fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Mse(MseMapper),
    Gaussian(GaussianGenerator),
    Cvae(CvaeModel),
}

impl Generator {
    pub fn kind(&self) -> GeneratorKind {
        match self {
            Generator::Mse(_) => GeneratorKind::Mse,
            Generator::Gaussian(_) => GeneratorKind::Gaussian,
            Generator::Cvae(_) => GeneratorKind::Cvae,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Generator::Mse(m) => m.feature_dim(),
            Generator::Gaussian(g) => g.mapper.feature_dim(),
            Generator::Cvae(c) => c.feature_dim(),
        }
    }

    /// Pre-relu outputs for `n` samples of one class.
    fn raw_samples(&self, semantic: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Result<Tensor, GenError> {
        match self {
            Generator::Mse(m) => {
                let center = m.center(semantic)?;
                let mut out = Tensor::zeros(n, center.len());
                for r in 0..n {
                    out.row_slice_mut(r).copy_from_slice(&center);
                }
                Ok(out)
            }
            Generator::Gaussian(g) => {
                let center = g.mapper.center(semantic)?;
                let std: Vec<f64> = g.variance.iter().map(|v| v.sqrt()).collect();
                let mut out = Tensor::zeros(n, center.len());
                for r in 0..n {
                    for ((o, c), s) in out.row_slice_mut(r).iter_mut().zip(&center).zip(&std) {
                        let e: f64 = StandardNormal.sample(rng);
                        *o = c + s * e;
                    }
                }
                Ok(out)
            }
            Generator::Cvae(c) => c.decode_samples(semantic, n, rng),
        }
    }

    pub fn to_model_file(&self) -> ModelFile {
        match self {
            Generator::Mse(m) => m.to_model_file(),
            Generator::Gaussian(g) => g.to_model_file(),
            Generator::Cvae(c) => c.to_model_file(),
        }
    }

    pub fn from_model_file(file: &ModelFile) -> Result<Self, GenError> {
        Ok(match file.kind.as_str() {
            "gaussian" => Generator::Gaussian(GaussianGenerator::from_model_file(file)?),
            "cvae" => Generator::Cvae(CvaeModel::from_model_file(file)?),
            _ => Generator::Mse(MseMapper::from_model_file(file)?),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), GenError> {
        Ok(self.to_model_file().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, GenError> {
        Self::from_model_file(&ModelFile::load(path)?)
    }
}

/// Draws `per_class` rows for each class in `targets`, which must all be
/// unseen. Each class uses its own seed derived from `(seed, class)`, and
/// every row passes through relu after the optional bias shift.
pub fn generate(
    model: &Generator,
    table: &ClassTable,
    targets: &[usize],
    per_class: usize,
    seed: u64,
    bias: Option<&BiasField>,
) -> Result<PseudoSet, GenError> {
    if per_class == 0 {
        return Err(GenError::ZeroGeneration);
    }
    let dim = model.feature_dim();
    let mut features = Tensor::zeros(0, dim);
    let mut labels = Vec::with_capacity(targets.len() * per_class);
    for &class in targets {
        let info = table.get(class).ok_or(GenError::NotUnseen(class))?;
        if info.is_seen {
            return Err(GenError::NotUnseen(class));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, class as u64));
        let mut rows = model.raw_samples(&info.semantic, per_class, &mut rng)?;
        let shift = bias.map(|b| b.shift(class));
        for r in 0..per_class {
            let row = rows.row_slice_mut(r);
            if let Some(shift) = shift {
                row.iter_mut().zip(shift).for_each(|(v, s)| *v += s);
            }
            row.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        features = features.vstack(&rows)?;
        labels.extend(std::iter::repeat_n(class, per_class));
    }
    Ok(PseudoSet {
        features,
        labels,
        per_class,
    })
}

/// Mean Euclidean distance over all unordered row pairs (0 for < 2 rows).
pub fn mean_pairwise_distance(rows: &Tensor) -> f64 {
    let n = rows.rows();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = rows
                .row_slice(i)
                .iter()
                .zip(rows.row_slice(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += d.sqrt();
        }
    }
    total / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{synthesize, SyntheticSpec};

    fn world() -> crate::datagen::GzslDataset {
        synthesize(&SyntheticSpec {
            train_per_class: 30,
            test_per_class: 10,
            ..SyntheticSpec::default()
        })
        .unwrap()
        .0
    }

    fn quick_mapper(ds: &crate::datagen::GzslDataset) -> MseMapper {
        fit_mse_mapper(ds, &MapperConfig { epochs: 50, hidden: 16, ..MapperConfig::default() }).unwrap()
    }

    #[test]
    fn mse_generator_replicates_centers() {
        let ds = world();
        let g = Generator::Mse(quick_mapper(&ds));
        let unseen = ds.classes().unseen_ids();
        let p = generate(&g, ds.classes(), &unseen, 10, 3, None).unwrap();
        assert_eq!(p.len(), 10 * unseen.len());
        for &c in &unseen {
            let rows = p.rows_of(c);
            assert_eq!(rows.rows(), 10);
            assert!(rows.iter_rows().all(|r| r == rows.row_slice(0)));
            assert_eq!(mean_pairwise_distance(&rows), 0.0);
        }
        assert!(p.features.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_generation_and_seen_targets_rejected() {
        let ds = world();
        let g = Generator::Mse(quick_mapper(&ds));
        let unseen = ds.classes().unseen_ids();
        assert!(matches!(
            generate(&g, ds.classes(), &unseen, 0, 1, None),
            Err(GenError::ZeroGeneration)
        ));
        assert!(matches!(
            generate(&g, ds.classes(), &[0], 5, 1, None),
            Err(GenError::NotUnseen(0))
        ));
        assert!(matches!(
            generate(&g, ds.classes(), &[99], 5, 1, None),
            Err(GenError::NotUnseen(99))
        ));
    }

    #[test]
    fn bias_shift_moves_generated_centers() {
        let (ds, truth) = synthesize(&SyntheticSpec {
            train_per_class: 30,
            test_per_class: 10,
            bias: 1.0,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let g = Generator::Mse(quick_mapper(&ds));
        let unseen = ds.classes().unseen_ids();
        let plain = generate(&g, ds.classes(), &unseen, 1, 3, None).unwrap();
        let shifted = generate(&g, ds.classes(), &unseen, 1, 3, Some(&truth.bias)).unwrap();
        assert_ne!(plain.features, shifted.features);
        assert!(shifted.features.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn pairwise_distance_of_known_points() {
        let t = Tensor::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        // pairs: 5, 0, 5
        assert!((mean_pairwise_distance(&t) - 10.0 / 3.0).abs() < 1e-15);
    }
}
