use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::GenError;
use crate::datagen::GzslDataset;
use crate::modelfile::{ModelFile, ModelFileError};
use crate::nn::{init_uniform, minibatch_fit, FitConfig, DEFAULT_LEAKY_SLOPE};
use crate::numgrad::{AdamConfig, NumgradError, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvaeConfig {
    /// Latent size; `None` uses the semantic dimension.
    pub latent: Option<usize>,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub slope: f64,
    pub seed: u64,
}

impl Default for CvaeConfig {
    fn default() -> Self {
        Self {
            latent: None,
            hidden: 128,
            epochs: 60,
            batch_size: 128,
            lr: 1e-3,
            slope: DEFAULT_LEAKY_SLOPE,
            seed: 0,
        }
    }
}

const PARAM_NAMES: [&str; 11] = [
    "enc_w", "enc_b", "mu_w", "mu_b", "lv_w", "lv_b", "dec_wz", "dec_wa", "dec_b", "out_w", "out_b",
];

/// Conditional VAE: encoder `(x, a) → (μ, log σ²)` and decoder `(z, a) → x`.
#[derive(Clone, Debug, PartialEq)]
pub struct CvaeModel {
    pub params: Vec<Tensor>,
    pub slope: f64,
}

impl CvaeModel {
    fn init(rng: &mut ChaCha8Rng, dx: usize, da: usize, latent: usize, hidden: usize, slope: f64) -> Self {
        let params = vec![
            init_uniform(rng, dx + da, dx + da, hidden),
            init_uniform(rng, dx + da, 1, hidden),
            init_uniform(rng, hidden, hidden, latent),
            init_uniform(rng, hidden, 1, latent),
            init_uniform(rng, hidden, hidden, latent),
            init_uniform(rng, hidden, 1, latent),
            init_uniform(rng, latent + da, latent, hidden),
            init_uniform(rng, latent + da, da, hidden),
            init_uniform(rng, latent + da, 1, hidden),
            init_uniform(rng, hidden, hidden, dx),
            init_uniform(rng, hidden, 1, dx),
        ];
        Self { params, slope }
    }

    pub fn latent_dim(&self) -> usize {
        self.params[2].cols()
    }

    pub fn semantic_dim(&self) -> usize {
        self.params[7].rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.params[9].cols()
    }

    /// Pre-relu decoder outputs for `n` standard-normal latents.
    pub fn decode_samples(&self, semantic: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Result<Tensor, GenError> {
        if semantic.len() != self.semantic_dim() {
            return Err(GenError::Dimension {
                expected: format!("semantic {}", self.semantic_dim()),
                found: semantic.len(),
            });
        }
        let l = self.latent_dim();
        let z: Vec<f64> = (0..n * l).map(|_| StandardNormal.sample(rng)).collect();
        let a: Vec<f64> = (0..n).flat_map(|_| semantic.iter().copied()).collect();
        let mut tape = Tape::new();
        let p: Vec<Var> = self.params.iter().map(|t| tape.constant(t.clone())).collect();
        let z = tape.constant(Tensor::new(n, l, z)?);
        let a = tape.constant(Tensor::new(n, semantic.len(), a)?);
        let out = decode(&mut tape, &p, z, a, self.slope)?;
        Ok(tape.value(out).clone())
    }

    pub fn to_model_file(&self) -> ModelFile {
        let mut f = ModelFile::new("cvae").attr("slope", self.slope);
        for (name, t) in PARAM_NAMES.iter().zip(&self.params) {
            f = f.tensor(name, t);
        }
        f
    }

    pub fn from_model_file(file: &ModelFile) -> Result<Self, ModelFileError> {
        file.expect_kind("cvae")?;
        let params = PARAM_NAMES
            .iter()
            .map(|n| file.get_tensor(n).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            params,
            slope: file.parse_attr("slope")?,
        })
    }
}

fn decode(tape: &mut Tape, p: &[Var], z: Var, a: Var, slope: f64) -> Result<Var, NumgradError> {
    let hz = tape.matmul(z, p[6])?;
    let ha = tape.matmul(a, p[7])?;
    let h = tape.add(hz, ha)?;
    let h = tape.add(h, p[8])?;
    let h = tape.leaky_relu(h, slope)?;
    let y = tape.matmul(h, p[9])?;
    tape.add(y, p[10])
}

/// `KL(N(μ, diag exp(logvar)) ‖ N(0, I))` for one posterior.
pub fn kl_standard_normal(mean: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mean
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - lv - 1.0)
        .sum::<f64>()
}

/// Batch-mean KL recorded on the tape.
fn kl_term(tape: &mut Tape, mu: Var, logvar: Var) -> Result<Var, NumgradError> {
    let rows = tape.shape(mu).rows as f64;
    let mu2 = tape.mul(mu, mu)?;
    let var = tape.exp(logvar)?;
    let t = tape.add(mu2, var)?;
    let t = tape.sub(t, logvar)?;
    let s = tape.sum(t)?;
    let s = tape.scale(s, 0.5 / rows)?;
    // the −1 per latent coordinate is a constant offset
    let c = tape.constant(Tensor::scalar(-0.5 * tape.shape(mu).cols as f64));
    tape.add(s, c)
}

/// Negative ELBO: per-row squared reconstruction error plus KL, batch mean.
fn negative_elbo(
    tape: &mut Tape,
    p: &[Var],
    x: Tensor,
    a: Tensor,
    eps: Tensor,
    slope: f64,
) -> Result<Var, NumgradError> {
    let rows = x.rows() as f64;
    let xa = concat_cols(&x, &a);
    let xa = tape.constant(xa);
    let x = tape.constant(x);
    let a = tape.constant(a);
    let eps = tape.constant(eps);

    let h = tape.matmul(xa, p[0])?;
    let h = tape.add(h, p[1])?;
    let h = tape.leaky_relu(h, slope)?;
    let mu = tape.matmul(h, p[2])?;
    let mu = tape.add(mu, p[3])?;
    let lv = tape.matmul(h, p[4])?;
    let lv = tape.add(lv, p[5])?;

    let half = tape.scale(lv, 0.5)?;
    let std = tape.exp(half)?;
    let noise = tape.mul(std, eps)?;
    let z = tape.add(mu, noise)?;
    let recon = decode(tape, p, z, a, slope)?;
    let d = tape.sub(recon, x)?;
    let sq = tape.mul(d, d)?;
    let rec = tape.sum(sq)?;
    let rec = tape.scale(rec, 1.0 / rows)?;
    let kl = kl_term(tape, mu, lv)?;
    tape.add(rec, kl)
}

fn concat_cols(a: &Tensor, b: &Tensor) -> Tensor {
    let rows: Vec<Vec<f64>> = a
        .iter_rows()
        .zip(b.iter_rows())
        .map(|(x, y)| x.iter().chain(y).copied().collect())
        .collect();
    Tensor::from_rows(&rows).expect("finite rows")
}

pub fn fit_cvae(train: &GzslDataset, cfg: &CvaeConfig) -> Result<CvaeModel, GenError> {
    let da = train.classes().semantic_dim();
    let dx = train.feature_dim();
    let latent = cfg.latent.unwrap_or(da);
    if latent == 0 {
        return Err(GenError::ZeroLatent);
    }
    let split = train.train();
    let semantics = train.classes().semantics();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = CvaeModel::init(&mut rng, dx, da, latent, cfg.hidden, cfg.slope);
    let fit = FitConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        adam: AdamConfig { lr: cfg.lr, ..AdamConfig::default() },
        seed: cfg.seed,
    };
    let slope = cfg.slope;
    minibatch_fit(&mut model.params, split.len(), &fit, |tape, p, idx, rng| {
        let x = split.features.select_rows(idx);
        let labels: Vec<usize> = idx.iter().map(|&i| split.labels[i]).collect();
        let a = semantics.select_rows(&labels);
        let eps: Vec<f64> = (0..idx.len() * latent).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let eps = Tensor::new(idx.len(), latent, eps)?;
        negative_elbo(tape, p, x, a, eps, slope)
    })?;
    Ok(model)
}
