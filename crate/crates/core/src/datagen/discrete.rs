use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::DatagenError;

const SUM_TOL: f64 = 1e-12;

/// Finite world with uniform `p(x)` over `M` points and an explicit
/// posterior table `p(y|x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteWorld {
    posterior: Vec<Vec<f64>>,
    class_freq: Vec<f64>,
    is_seen: Vec<bool>,
}

impl DiscreteWorld {
    /// Builds a world from posterior rows; `p(y)` is their column mean.
    pub fn from_posterior(posterior: Vec<Vec<f64>>, is_seen: Vec<bool>) -> Result<Self, DatagenError> {
        let bad = |m: String| Err(DatagenError::World(m));
        let k = is_seen.len();
        if posterior.is_empty() || k == 0 {
            return bad("world needs at least one point and one class".into());
        }
        if !is_seen.iter().any(|&s| s) || is_seen.iter().all(|&s| s) {
            return bad("world needs both seen and unseen classes".into());
        }
        for (i, row) in posterior.iter().enumerate() {
            if row.len() != k {
                return bad(format!("row {i} has {} entries, expected {k}", row.len()));
            }
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return bad(format!("row {i} has an entry outside [0, inf)"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SUM_TOL {
                return bad(format!("row {i} sums to {s}"));
            }
        }
        let m = posterior.len() as f64;
        let class_freq = (0..k)
            .map(|y| posterior.iter().map(|r| r[y]).sum::<f64>() / m)
            .collect();
        Ok(Self {
            posterior,
            class_freq,
            is_seen,
        })
    }

    pub fn points(&self) -> usize {
        self.posterior.len()
    }

    pub fn classes(&self) -> usize {
        self.is_seen.len()
    }

    pub fn posterior(&self) -> &[Vec<f64>] {
        &self.posterior
    }

    pub fn posterior_row(&self, x: usize) -> &[f64] {
        &self.posterior[x]
    }

    /// `p(y)` under uniform `p(x)`.
    pub fn class_freq(&self) -> &[f64] {
        &self.class_freq
    }

    pub fn is_seen(&self) -> &[bool] {
        &self.is_seen
    }

    /// Total mass `p(Y^s)` (or `p(Y^u)` when `seen` is false).
    pub fn domain_mass(&self, seen: bool) -> f64 {
        self.class_freq
            .iter()
            .zip(&self.is_seen)
            .filter(|(_, &s)| s == seen)
            .map(|(p, _)| p)
            .sum()
    }
}

/// Random world with Dirichlet(1) posterior rows. Unseen columns are
/// multiplied by `skew` before renormalization, so `skew = 1` leaves them
/// distributed like seen columns and `skew = 0` removes all unseen mass.
pub fn make_discrete_world(
    points: usize,
    seen: usize,
    unseen: usize,
    skew: f64,
    seed: u64,
) -> Result<DiscreteWorld, DatagenError> {
    if !(skew >= 0.0 && skew.is_finite()) {
        return Err(DatagenError::World(format!("skew must be nonnegative, got {skew}")));
    }
    if seen == 0 || unseen == 0 {
        return Err(DatagenError::World("need at least one seen and one unseen class".into()));
    }
    let k = seen + unseen;
    if points < k {
        return Err(DatagenError::World(format!("{points} points cannot cover {k} classes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let posterior = (0..points)
        .map(|_| {
            let mut row: Vec<f64> = (0..k)
                .map(|y| {
                    let g: f64 = Exp1.sample(&mut rng);
                    if y < seen { g } else { skew * g }
                })
                .collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
            row
        })
        .collect();
    let is_seen = (0..k).map(|y| y < seen).collect();
    DiscreteWorld::from_posterior(posterior, is_seen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_normalized_and_freq_consistent() {
        let w = make_discrete_world(6, 2, 1, 1.0, 3).unwrap();
        assert_eq!(w.points(), 6);
        for row in w.posterior() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        assert!((w.class_freq().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for y in 0..3 {
            let mean: f64 = w.posterior().iter().map(|r| r[y]).sum::<f64>() / 6.0;
            assert!((mean - w.class_freq()[y]).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_skew_removes_unseen_mass() {
        let w = make_discrete_world(10, 3, 2, 0.0, 9).unwrap();
        for row in w.posterior() {
            assert_eq!(row[3], 0.0);
            assert_eq!(row[4], 0.0);
        }
    }

    #[test]
    fn unit_skew_draws_unseen_like_seen() {
        // same gamma draws, only the seen/unseen split moves
        let a = make_discrete_world(8, 2, 2, 1.0, 4).unwrap();
        let b = make_discrete_world(8, 3, 1, 1.0, 4).unwrap();
        assert_eq!(a.posterior(), b.posterior());
    }

    #[test]
    fn bad_arguments() {
        assert!(make_discrete_world(10, 2, 2, -0.1, 1).is_err());
        assert!(make_discrete_world(3, 2, 2, 1.0, 1).is_err());
        assert!(DiscreteWorld::from_posterior(vec![vec![0.5, 0.6]], vec![true, false]).is_err());
    }
}
