use super::ZlaError;
use crate::datagen::GzslDataset;
use crate::genmodels::PseudoSet;

const SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    EmpiricalCount,
    Uniform,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::EmpiricalCount => "empirical-count",
            Provenance::Uniform => "uniform",
        }
    }
}

/// Seen-unseen prior ratio `σ = p0(Y^s)/p0(Y^u)` plus the two conditional
/// class priors, stored per class id (seen entries sum to 1, unseen entries
/// sum to 1).
#[derive(Clone, Debug, PartialEq)]
pub struct PriorConfig {
    sigma: f64,
    is_seen: Vec<bool>,
    conditional: Vec<f64>,
    seen_provenance: Provenance,
    unseen_provenance: Provenance,
}

fn check_sigma(sigma: f64) -> Result<(), ZlaError> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(ZlaError::InvalidSigma(sigma))
    }
}

impl PriorConfig {
    pub fn new(
        sigma: f64,
        is_seen: Vec<bool>,
        conditional: Vec<f64>,
        seen_provenance: Provenance,
        unseen_provenance: Provenance,
    ) -> Result<Self, ZlaError> {
        check_sigma(sigma)?;
        if conditional.len() != is_seen.len() {
            return Err(ZlaError::Length {
                what: "conditional prior",
                expected: is_seen.len(),
                found: conditional.len(),
            });
        }
        if let Some(class) = conditional.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(ZlaError::NonPositivePrior { class });
        }
        for seen in [true, false] {
            let sum: f64 = conditional
                .iter()
                .zip(&is_seen)
                .filter(|(_, &s)| s == seen)
                .map(|(p, _)| p)
                .sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(ZlaError::PriorNotNormalized {
                    domain: domain_name(seen),
                    sum,
                });
            }
        }
        Ok(Self {
            sigma,
            is_seen,
            conditional,
            seen_provenance,
            unseen_provenance,
        })
    }

    pub fn uniform(sigma: f64, is_seen: Vec<bool>) -> Result<Self, ZlaError> {
        let ks = is_seen.iter().filter(|&&s| s).count() as f64;
        let ku = is_seen.len() as f64 - ks;
        let conditional = is_seen.iter().map(|&s| if s { 1.0 / ks } else { 1.0 / ku }).collect();
        Self::new(sigma, is_seen, conditional, Provenance::Uniform, Provenance::Uniform)
    }

    /// Conditional priors proportional to `counts` within each domain.
    pub fn from_counts(sigma: f64, is_seen: Vec<bool>, counts: &[usize]) -> Result<Self, ZlaError> {
        if counts.len() != is_seen.len() {
            return Err(ZlaError::Length {
                what: "class counts",
                expected: is_seen.len(),
                found: counts.len(),
            });
        }
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(ZlaError::ZeroCount {
                class,
                domain: domain_name(is_seen[class]),
            });
        }
        let total = |seen: bool| -> f64 {
            counts.iter().zip(&is_seen).filter(|(_, &s)| s == seen).map(|(&c, _)| c as f64).sum()
        };
        let (ts, tu) = (total(true), total(false));
        let conditional = counts
            .iter()
            .zip(&is_seen)
            .map(|(&c, &s)| c as f64 / if s { ts } else { tu })
            .collect();
        Self::new(
            sigma,
            is_seen,
            conditional,
            Provenance::EmpiricalCount,
            Provenance::EmpiricalCount,
        )
    }

    /// Priors from unnormalized domain weights `p0(Y^s) ∝ seen_weight`,
    /// `p0(Y^u) ∝ unseen_weight`; only their ratio survives.
    pub fn from_domain_weights(
        seen_weight: f64,
        unseen_weight: f64,
        is_seen: Vec<bool>,
        conditional: Vec<f64>,
    ) -> Result<Self, ZlaError> {
        Self::new(
            seen_weight / unseen_weight,
            is_seen,
            conditional,
            Provenance::EmpiricalCount,
            Provenance::EmpiricalCount,
        )
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self, ZlaError> {
        check_sigma(sigma)?;
        Ok(Self { sigma, ..self.clone() })
    }

    pub fn classes(&self) -> usize {
        self.is_seen.len()
    }

    pub fn is_seen(&self) -> &[bool] {
        &self.is_seen
    }

    /// `p(y | y ∈ Y_y)` per class.
    pub fn conditional(&self) -> &[f64] {
        &self.conditional
    }

    pub fn provenance(&self, seen: bool) -> Provenance {
        if seen { self.seen_provenance } else { self.unseen_provenance }
    }

    /// `p0(Y^s) = σ/(1+σ)` or `p0(Y^u) = 1/(1+σ)`.
    pub fn domain_prior(&self, seen: bool) -> f64 {
        if seen {
            self.sigma / (1.0 + self.sigma)
        } else {
            1.0 / (1.0 + self.sigma)
        }
    }

    /// Joint prior `p0(Y_y)·p(y|y∈Y_y)`.
    pub fn class_prior(&self, class: usize) -> f64 {
        self.domain_prior(self.is_seen[class]) * self.conditional[class]
    }
}

fn domain_name(seen: bool) -> &'static str {
    if seen { "seen" } else { "unseen" }
}

/// Seen conditional prior from train counts, unseen from pseudo-set counts.
pub fn build_priors(dataset: &GzslDataset, pseudo: &PseudoSet, sigma: f64) -> Result<PriorConfig, ZlaError> {
    let table = dataset.classes();
    let mut counts = vec![0usize; table.len()];
    for &l in &dataset.train().labels {
        counts[l] += 1;
    }
    for &l in &pseudo.labels {
        if l >= counts.len() || table.is_seen(l) {
            return Err(ZlaError::PseudoLabel(l));
        }
        counts[l] += 1;
    }
    PriorConfig::from_counts(sigma, table.seen_flags(), &counts)
}

/// Per-class additive logit offsets `o(y) = log σ_y + log p(y|y∈Y_y)` with
/// `σ_y = σ` for seen classes and 1 for unseen ones. Stored shifted so the
/// largest offset is exactly 0.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitOffsets {
    values: Vec<f64>,
}

impl LogitOffsets {
    /// Arbitrary offsets, normalized by their maximum.
    pub fn new(raw: Vec<f64>) -> Result<Self, ZlaError> {
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(ZlaError::NonFinite("offsets"));
        }
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            values: raw.iter().map(|v| v - max).collect(),
        })
    }

    pub fn zeros(classes: usize) -> Self {
        Self {
            values: vec![0.0; classes],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `δ(y, y′) = exp(o(y′) − o(y))`.
    pub fn delta(&self, y: usize, y_prime: usize) -> f64 {
        (self.values[y_prime] - self.values[y]).exp()
    }

    /// Row `δ(y, ·)`.
    pub fn delta_row(&self, y: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.delta(y, j)).collect()
    }
}

pub fn offsets(priors: &PriorConfig) -> LogitOffsets {
    let raw = priors
        .is_seen
        .iter()
        .zip(&priors.conditional)
        .map(|(&s, p)| if s { priors.sigma.ln() } else { 0.0 } + p.ln())
        .collect();
    LogitOffsets::new(raw).expect("validated priors give finite offsets")
}

/// Adjusted Bayes decision `argmax_i p(i|x) / (p0(Y_i)·p(i|i∈Y_i))`, ties to
/// the lowest id.
pub fn adjusted_argmax(posterior: &[f64], priors: &PriorConfig) -> usize {
    let weights: Vec<f64> = (0..posterior.len()).map(|i| priors.class_prior(i)).collect();
    weighted_argmax(posterior, &weights)
}

/// `argmax_i posterior[i] / weights[i]`, ties to the lowest id.
pub fn weighted_argmax(posterior: &[f64], weights: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (p, w)) in posterior.iter().zip(weights).enumerate() {
        let s = p / w;
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}
