use super::mse::{read_net, write_net};
use super::{fit_mse_mapper, GenError, MapperConfig, MseMapper};
use crate::datagen::GzslDataset;
use crate::modelfile::{ModelFile, ModelFileError};
use crate::numgrad::Tensor;

/// Diagonal Gaussian around the regressed class center, with one variance
/// vector pooled over all seen-class residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianGenerator {
    pub mapper: MseMapper,
    pub variance: Vec<f64>,
}

impl GaussianGenerator {
    pub fn to_model_file(&self) -> ModelFile {
        let var = Tensor::row(&self.variance).expect("finite variance");
        write_net(ModelFile::new("gaussian"), "", &self.mapper.net).tensor("variance", &var)
    }

    pub fn from_model_file(file: &ModelFile) -> Result<Self, ModelFileError> {
        file.expect_kind("gaussian")?;
        Ok(Self {
            mapper: MseMapper { net: read_net(file, "")? },
            variance: file.get_tensor("variance")?.data().to_vec(),
        })
    }
}

/// Per-dimension mean squared deviation of train rows from their class mean.
pub fn pooled_variance(train: &GzslDataset) -> Result<Vec<f64>, GenError> {
    let means = train.train_class_means();
    let split = train.train();
    let mut var = vec![0.0; train.feature_dim()];
    for (row, &l) in split.features.iter_rows().zip(&split.labels) {
        let m = means[l].as_ref().ok_or(GenError::EmptyClass(l))?;
        for ((v, x), mu) in var.iter_mut().zip(row).zip(m) {
            *v += (x - mu) * (x - mu);
        }
    }
    let n = split.len().max(1) as f64;
    var.iter_mut().for_each(|v| *v /= n);
    Ok(var)
}

pub fn fit_gaussian(train: &GzslDataset, cfg: &MapperConfig) -> Result<GaussianGenerator, GenError> {
    Ok(GaussianGenerator {
        mapper: fit_mse_mapper(train, cfg)?,
        variance: pooled_variance(train)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{synthesize, SyntheticSpec};

    #[test]
    fn pooled_variance_tracks_noise_level() {
        let (ds, _) = synthesize(&SyntheticSpec {
            train_per_class: 400,
            noise: 0.3,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let var = pooled_variance(&ds).unwrap();
        assert!(var.iter().all(|&v| v >= 0.0));
        // relu clipping can only shrink the per-dimension variance
        assert!(var.iter().all(|&v| v <= 0.09 * 1.15), "{var:?}");
    }

    #[test]
    fn model_file_round_trip() {
        let (ds, _) = synthesize(&SyntheticSpec {
            train_per_class: 10,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let g = fit_gaussian(&ds, &MapperConfig { epochs: 2, ..MapperConfig::default() }).unwrap();
        let text = g.to_model_file().to_text();
        assert_eq!(GaussianGenerator::from_model_file(&ModelFile::parse(&text).unwrap()).unwrap(), g);
    }
}
