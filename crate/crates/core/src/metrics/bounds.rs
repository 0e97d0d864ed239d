use super::{harmonic_mean, mean, MetricsError};
use crate::datagen::DiscreteWorld;
use crate::zla::{weighted_argmax, PriorConfig};

const ROW_TOL: f64 = 1e-9;
const PRIOR_TOL: f64 = 1e-9;

/// Exact accuracies of a soft classifier in a discrete world.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactAccuracy {
    pub per_class: Vec<f64>,
    pub acc_seen: f64,
    pub acc_unseen: f64,
    pub acc_h: f64,
}

fn check_q(world: &DiscreteWorld, q: &[Vec<f64>]) -> Result<(), MetricsError> {
    if q.len() != world.points() {
        return Err(MetricsError::RowCount {
            what: "q",
            expected: world.points(),
            found: q.len(),
        });
    }
    for (row, r) in q.iter().enumerate() {
        if r.len() != world.classes() || r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(MetricsError::InvalidEntry { row });
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > ROW_TOL {
            return Err(MetricsError::NotNormalized { row, sum });
        }
    }
    Ok(())
}

/// `A(y) = E_x[q(y|x)·p(y|x)] / p(y)` under uniform `p(x)`.
pub fn exact_accuracy(world: &DiscreteWorld, q: &[Vec<f64>]) -> Result<ExactAccuracy, MetricsError> {
    check_q(world, q)?;
    if let Some(y) = world.class_freq().iter().position(|&p| p <= 0.0) {
        return Err(MetricsError::EmptyClass(y));
    }
    let m = world.points() as f64;
    let per_class: Vec<f64> = (0..world.classes())
        .map(|y| {
            let hit: f64 = (0..world.points()).map(|x| q[x][y] * world.posterior_row(x)[y]).sum();
            hit / m / world.class_freq()[y]
        })
        .collect();
    let domain = |seen: bool| {
        mean(per_class.iter().zip(world.is_seen()).filter(|(_, &s)| s == seen).map(|(a, _)| *a))
    };
    let (acc_seen, acc_unseen) = (domain(true), domain(false));
    Ok(ExactAccuracy {
        acc_h: harmonic_mean(acc_seen, acc_unseen),
        per_class,
        acc_seen,
        acc_unseen,
    })
}

/// Exact accuracies next to the Jensen bounds, with
/// `slack_* = bound − exact` for the reciprocal upper bounds and
/// `slack_h = exact − bound` for the harmonic lower bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub exact: ExactAccuracy,
    pub inv_seen_bound: f64,
    pub inv_unseen_bound: f64,
    pub h_lower_bound: f64,
    pub slack_seen: f64,
    pub slack_unseen: f64,
    pub slack_h: f64,
}

impl BoundReport {
    pub fn min_slack(&self) -> f64 {
        self.slack_seen.min(self.slack_unseen).min(self.slack_h)
    }
}

/// Upper bounds `E_{y∈Y}E_x[p0(Y)p(y|y∈Y) / (q(y|x)p(y|x))]` on `1/A^S` and
/// `1/A^U`, and the implied lower bound on `A^H`. The priors must describe
/// the world: `p0(Y_y)·p(y|y∈Y_y) = p(y)`.
pub fn jensen_bounds(world: &DiscreteWorld, q: &[Vec<f64>], priors: &PriorConfig) -> Result<BoundReport, MetricsError> {
    check_q(world, q)?;
    for (row, r) in q.iter().enumerate() {
        if let Some(class) = r.iter().position(|&v| v <= 0.0) {
            return Err(MetricsError::ZeroQ { row, class });
        }
    }
    if priors.classes() != world.classes() {
        return Err(MetricsError::RowCount {
            what: "priors",
            expected: world.classes(),
            found: priors.classes(),
        });
    }
    for (class, &world_p) in world.class_freq().iter().enumerate() {
        let prior = priors.class_prior(class);
        if (prior - world_p).abs() > PRIOR_TOL {
            return Err(MetricsError::PriorMismatch { class, prior, world: world_p });
        }
    }
    let exact = exact_accuracy(world, q)?;
    let m = world.points() as f64;
    let ratio_mean = |y: usize| -> f64 {
        let prior = priors.class_prior(y);
        (0..world.points())
            .map(|x| prior / (q[x][y] * world.posterior_row(x)[y]))
            .sum::<f64>()
            / m
    };
    let bound = |seen: bool| {
        mean((0..world.classes()).filter(|&y| world.is_seen()[y] == seen).map(ratio_mean))
    };
    let (inv_seen_bound, inv_unseen_bound) = (bound(true), bound(false));
    let h_lower_bound = 2.0 / (inv_seen_bound + inv_unseen_bound);
    Ok(BoundReport {
        slack_seen: inv_seen_bound - 1.0 / exact.acc_seen,
        slack_unseen: inv_unseen_bound - 1.0 / exact.acc_unseen,
        slack_h: exact.acc_h - h_lower_bound,
        exact,
        inv_seen_bound,
        inv_unseen_bound,
        h_lower_bound,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleRow {
    pub sigma: f64,
    pub acc_seen: f64,
    pub acc_unseen: f64,
    pub acc_h: f64,
}

/// Exact accuracies of the deterministic rule `argmax_i p(i|x)/w_i` with
/// `w_i = σ` for seen and 1 for unseen classes, for each σ in the grid
/// (σ = 1, plain Bayes, is always included). Rows are sorted by σ.
pub fn rule_comparison(world: &DiscreteWorld, sigmas: &[f64]) -> Result<Vec<RuleRow>, MetricsError> {
    let mut grid: Vec<f64> = sigmas.to_vec();
    if !grid.contains(&1.0) {
        grid.push(1.0);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.iter()
        .map(|&sigma| {
            let weights: Vec<f64> = world.is_seen().iter().map(|&s| if s { sigma } else { 1.0 }).collect();
            let q = one_hot_rule(world, |row| weighted_argmax(row, &weights));
            let e = exact_accuracy(world, &q)?;
            Ok(RuleRow {
                sigma,
                acc_seen: e.acc_seen,
                acc_unseen: e.acc_unseen,
                acc_h: e.acc_h,
            })
        })
        .collect()
}

/// Deterministic `q` table putting all mass on `rule(p(·|x))`.
pub fn one_hot_rule(world: &DiscreteWorld, rule: impl Fn(&[f64]) -> usize) -> Vec<Vec<f64>> {
    world
        .posterior()
        .iter()
        .map(|row| {
            let mut q = vec![0.0; world.classes()];
            q[rule(row)] = 1.0;
            q
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::make_discrete_world;

    #[test]
    fn uniform_q_gives_one_over_k() {
        let w = make_discrete_world(12, 3, 2, 0.7, 1).unwrap();
        let q = vec![vec![0.2; 5]; 12];
        let e = exact_accuracy(&w, &q).unwrap();
        assert!(e.per_class.iter().all(|a| (a - 0.2).abs() < 1e-12));
    }

    #[test]
    fn always_right_rule_scores_one() {
        // each point belongs to exactly one class
        let post = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ];
        let w = DiscreteWorld::from_posterior(post, vec![true, true, false]).unwrap();
        let q = one_hot_rule(&w, |r| weighted_argmax(r, &[1.0; 3]));
        let e = exact_accuracy(&w, &q).unwrap();
        assert_eq!(e.per_class, vec![1.0; 3]);
        assert_eq!(e.acc_h, 1.0);
    }

    #[test]
    fn empty_class_and_bad_q_rejected() {
        let w = make_discrete_world(6, 2, 1, 0.0, 2).unwrap();
        let q = vec![vec![1.0 / 3.0; 3]; 6];
        assert!(matches!(exact_accuracy(&w, &q), Err(MetricsError::EmptyClass(2))));
        let w = make_discrete_world(6, 2, 1, 1.0, 2).unwrap();
        let mut q = vec![vec![1.0 / 3.0; 3]; 6];
        q[4] = vec![0.5, 0.5, 0.5];
        assert!(matches!(exact_accuracy(&w, &q), Err(MetricsError::NotNormalized { row: 4, .. })));
    }

    fn world_priors(w: &DiscreteWorld) -> PriorConfig {
        let (ms, mu) = (w.domain_mass(true), w.domain_mass(false));
        let cond = w
            .class_freq()
            .iter()
            .zip(w.is_seen())
            .map(|(p, &s)| p / if s { ms } else { mu })
            .collect();
        PriorConfig::from_domain_weights(ms, mu, w.is_seen().to_vec(), cond).unwrap()
    }

    #[test]
    fn zero_q_is_refused_for_bounds() {
        let w = make_discrete_world(5, 1, 1, 1.0, 3).unwrap();
        let mut q = vec![vec![0.5, 0.5]; 5];
        q[2] = vec![1.0, 0.0];
        let err = jensen_bounds(&w, &q, &world_priors(&w)).unwrap_err();
        assert!(err.to_string().contains("strictly positive"));
    }

    #[test]
    fn inconsistent_priors_refused() {
        let w = make_discrete_world(5, 2, 1, 0.5, 3).unwrap();
        let q = vec![vec![1.0 / 3.0; 3]; 5];
        let p = PriorConfig::uniform(1.0, w.is_seen().to_vec()).unwrap();
        assert!(matches!(jensen_bounds(&w, &q, &p), Err(MetricsError::PriorMismatch { .. })));
    }

    #[test]
    fn plain_bayes_is_the_unit_sigma_row() {
        let w = make_discrete_world(50, 4, 2, 0.2, 8).unwrap();
        let rows = rule_comparison(&w, &[10.0, 0.5]).unwrap();
        assert_eq!(rows.iter().map(|r| r.sigma).collect::<Vec<_>>(), vec![0.5, 1.0, 10.0]);
        let bayes = one_hot_rule(&w, |r| {
            let mut best = 0;
            for (i, &p) in r.iter().enumerate() {
                if p > r[best] {
                    best = i;
                }
            }
            best
        });
        let e = exact_accuracy(&w, &bayes).unwrap();
        assert_eq!(rows[1].acc_h, e.acc_h);
        assert_eq!(rows[1].acc_seen, e.acc_seen);
    }
}
