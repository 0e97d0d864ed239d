use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ClassInfo, ClassTable, DatagenError, GzslDataset, Split};
use crate::numgrad::{l2, Tensor};

/// Parameters of a seeded synthetic GZSL world.
///
/// Class means come from a fixed random two-layer map of the semantic
/// vectors, `μ_y = relu(W2 · leaky_relu(W1 · a_y))`, and features are
/// `relu(μ_y + noise · ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub seen: usize,
    pub unseen: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub semantic_dim: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    pub weight_scale: f64,
    pub noise: f64,
    /// Relative magnitude of the shift applied to generated unseen features.
    pub bias: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seen: 10,
            unseen: 5,
            train_per_class: 200,
            test_per_class: 100,
            semantic_dim: 16,
            feature_dim: 32,
            hidden: 64,
            weight_scale: 1.0,
            noise: 0.5,
            bias: 0.0,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let bad = |m: &str| Err(DatagenError::InvalidSpec(m.to_string()));
        if self.seen == 0 || self.unseen == 0 {
            return bad("seen and unseen class counts must be at least 1");
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return bad("per-class sample counts must be at least 1");
        }
        if self.semantic_dim == 0 || self.hidden == 0 {
            return bad("semantic and hidden dimensions must be at least 1");
        }
        if self.feature_dim < 2 {
            return bad("feature dimension must be at least 2");
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return bad("noise scale must be positive and finite");
        }
        if !(self.weight_scale > 0.0 && self.weight_scale.is_finite()) {
            return bad("weight scale must be positive and finite");
        }
        if !(self.bias >= 0.0 && self.bias.is_finite()) {
            return bad("bias must be nonnegative and finite");
        }
        Ok(())
    }
}

/// Per-class additive shift applied to generated features before the
/// output relu. Seen classes carry zero shift.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasField {
    shifts: Tensor,
}

impl BiasField {
    pub fn zero(classes: usize, dim: usize) -> Self {
        Self {
            shifts: Tensor::zeros(classes, dim),
        }
    }

    pub fn shift(&self, class: usize) -> &[f64] {
        self.shifts.row_slice(class)
    }

    pub fn is_zero(&self) -> bool {
        self.shifts.data().iter().all(|&v| v == 0.0)
    }
}

/// Builds the generator bias for `dataset`: each unseen class gets a random
/// unit direction scaled by `beta` times the mean norm of the seen-class
/// train centers.
pub fn bias_field(dataset: &GzslDataset, beta: f64, seed: u64) -> BiasField {
    let k = dataset.classes().len();
    let dim = dataset.feature_dim();
    if beta == 0.0 {
        return BiasField::zero(k, dim);
    }
    let means: Vec<f64> = dataset.train_class_means().iter().flatten().map(|m| l2(m)).collect();
    let scale = means.iter().sum::<f64>() / means.len().max(1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB1A5_F1E1_D000_0001);
    let mut shifts = Tensor::zeros(k, dim);
    for class in 0..k {
        let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        if dataset.classes().is_seen(class) {
            continue;
        }
        let norm = l2(&dir).max(f64::MIN_POSITIVE);
        for (s, d) in shifts.row_slice_mut(class).iter_mut().zip(&dir) {
            *s = beta * scale * d / norm;
        }
    }
    BiasField { shifts }
}

/// Hidden structure behind a synthesized dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// `K × d_x` true class means (already relu-clipped).
    pub class_means: Tensor,
    pub bias: BiasField,
}

pub fn synthesize(spec: &SyntheticSpec) -> Result<(GzslDataset, GroundTruth), DatagenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.seen + spec.unseen;
    let (da, dx, dh) = (spec.semantic_dim, spec.feature_dim, spec.hidden);
    let mut normal = |n: usize, std: f64| -> Vec<f64> {
        (0..n)
            .map(|_| std * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect()
    };

    let semantics = normal(k * da, 1.0);
    let w1 = normal(dh * da, spec.weight_scale / (da as f64).sqrt());
    let w2 = normal(dx * dh, spec.weight_scale / (dh as f64).sqrt());

    let mut means = Tensor::zeros(k, dx);
    for y in 0..k {
        let a = &semantics[y * da..(y + 1) * da];
        let hidden: Vec<f64> = (0..dh)
            .map(|j| {
                let z: f64 = w1[j * da..(j + 1) * da].iter().zip(a).map(|(w, v)| w * v).sum();
                if z > 0.0 { z } else { crate::nn::DEFAULT_LEAKY_SLOPE * z }
            })
            .collect();
        for (i, m) in means.row_slice_mut(y).iter_mut().enumerate() {
            let z: f64 = w2[i * dh..(i + 1) * dh].iter().zip(&hidden).map(|(w, h)| w * h).sum();
            *m = z.max(0.0);
        }
    }

    let classes = (0..k)
        .map(|id| ClassInfo {
            id,
            name: format!("class_{id:03}"),
            is_seen: id < spec.seen,
            semantic: semantics[id * da..(id + 1) * da].to_vec(),
        })
        .collect();
    let table = ClassTable::new(classes)?;

    let mut sample = |class: usize, n: usize, labels: &mut Vec<usize>, rows: &mut Vec<f64>| {
        let mu = means.row_slice(class);
        for _ in 0..n {
            labels.push(class);
            for &m in mu {
                let e: f64 = StandardNormal.sample(&mut rng);
                rows.push((m + spec.noise * e).max(0.0));
            }
        }
    };
    let (mut tr_l, mut tr_x) = (Vec::new(), Vec::new());
    let (mut ts_l, mut ts_x) = (Vec::new(), Vec::new());
    let (mut tu_l, mut tu_x) = (Vec::new(), Vec::new());
    for y in 0..k {
        if y < spec.seen {
            sample(y, spec.train_per_class, &mut tr_l, &mut tr_x);
            sample(y, spec.test_per_class, &mut ts_l, &mut ts_x);
        } else {
            sample(y, spec.test_per_class, &mut tu_l, &mut tu_x);
        }
    }
    let split = |labels: Vec<usize>, data: Vec<f64>| {
        let n = labels.len();
        Split::new(labels, Tensor::new(n, dx, data).expect("finite samples"))
    };
    let dataset = GzslDataset::new(
        table,
        split(tr_l, tr_x),
        split(ts_l, ts_x),
        split(tu_l, tu_x),
    )?;
    let bias = bias_field(&dataset, spec.bias, spec.seed);
    Ok((
        dataset,
        GroundTruth {
            class_means: means,
            bias,
        },
    ))
}
