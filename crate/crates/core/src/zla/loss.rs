use super::{LogitOffsets, ZlaError};
use crate::numgrad::{NumgradError, Tape, Tensor, Var};

fn check(logits: &[f64], label: usize) -> Result<(), ZlaError> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(ZlaError::NonFinite("logits"));
    }
    if label >= logits.len() {
        return Err(ZlaError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    Ok(())
}

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Softmax cross-entropy `−log softmax(l)_y`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64, ZlaError> {
    check(logits, label)?;
    Ok(logsumexp(logits.iter().copied()) - logits[label])
}

/// `log[1 + Σ_{y′≠y} δ(y,y′)·exp(l_{y′} − l_y)]`. `weights[label]` is ignored.
pub fn generic_la_loss(logits: &[f64], label: usize, weights: &[f64]) -> Result<f64, ZlaError> {
    check(logits, label)?;
    if weights.len() != logits.len() {
        return Err(ZlaError::Length {
            what: "weights",
            expected: logits.len(),
            found: weights.len(),
        });
    }
    if let Some(index) = (0..weights.len()).find(|&j| j != label && !(weights[j] > 0.0 && weights[j].is_finite())) {
        return Err(ZlaError::NonPositiveWeight { index });
    }
    let ly = logits[label];
    let terms = (0..logits.len())
        .map(|j| if j == label { 0.0 } else { weights[j].ln() + logits[j] - ly });
    Ok(logsumexp(terms))
}

/// Cross-entropy on the shifted logits `l + o`.
pub fn zla_loss(logits: &[f64], label: usize, offsets: &LogitOffsets) -> Result<f64, ZlaError> {
    check(logits, label)?;
    if offsets.len() != logits.len() {
        return Err(ZlaError::Length {
            what: "offsets",
            expected: logits.len(),
            found: offsets.len(),
        });
    }
    let o = offsets.values();
    let shifted = logits.iter().zip(o).map(|(l, o)| l + o);
    Ok(logsumexp(shifted) - (logits[label] + o[label]))
}

/// Mean adjusted cross-entropy of an `n × K` logit batch, on the tape.
pub fn batch_zla_loss(
    tape: &mut Tape,
    logits: Var,
    labels: &[usize],
    offsets: &LogitOffsets,
) -> Result<Var, NumgradError> {
    let o = tape.constant(Tensor::row(offsets.values())?);
    let shifted = tape.add(logits, o)?;
    let logp = tape.log_softmax(shifted)?;
    let picked = tape.gather(logp, labels.to_vec())?;
    let m = tape.mean(picked)?;
    tape.scale(m, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        let three = 3f64.ln();
        assert!((generic_la_loss(&[0.0, 0.0], 0, &[1.0, 2.0]).unwrap() - three).abs() < 1e-15);
        let o = LogitOffsets::new(vec![0.0, 2f64.ln()]).unwrap();
        assert!((zla_loss(&[0.0, 0.0], 0, &o).unwrap() - three).abs() < 1e-15);
        assert!((cross_entropy(&[0.0, 0.0, 0.0], 1).unwrap() - three).abs() < 1e-15);
    }

    #[test]
    fn unit_weights_and_zero_offsets_give_cross_entropy() {
        let l = [1.5, -0.2, 3.0, 0.7];
        for y in 0..4 {
            let ce = cross_entropy(&l, y).unwrap();
            assert!((generic_la_loss(&l, y, &[1.0; 4]).unwrap() - ce).abs() < 1e-12);
            assert_eq!(zla_loss(&l, y, &LogitOffsets::zeros(4)).unwrap(), ce);
        }
    }

    #[test]
    fn vanishing_competitor_weight() {
        let loss = generic_la_loss(&[0.0, 50.0], 0, &[1.0, 1e-300]).unwrap();
        assert!(loss < 1e-250);
    }

    #[test]
    fn shift_invariance_is_exact_after_normalization() {
        let raw = vec![0.3, -1.0, 2.0];
        let a = LogitOffsets::new(raw.clone()).unwrap();
        let b = LogitOffsets::new(raw.iter().map(|v| v + 5.0).collect()).unwrap();
        let l = [0.1, 0.2, -0.4];
        let (la, lb) = (zla_loss(&l, 2, &a).unwrap(), zla_loss(&l, 2, &b).unwrap());
        assert!((la - lb).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(cross_entropy(&[f64::NAN, 0.0], 0), Err(ZlaError::NonFinite(_))));
        assert!(matches!(cross_entropy(&[0.0], 1), Err(ZlaError::LabelOutOfRange { .. })));
        assert!(matches!(
            generic_la_loss(&[0.0, 0.0], 0, &[1.0, 0.0]),
            Err(ZlaError::NonPositiveWeight { index: 1 })
        ));
        assert!(zla_loss(&[0.0, 0.0], 0, &LogitOffsets::zeros(3)).is_err());
    }

    #[test]
    fn tape_batch_loss_matches_scalar_mean() {
        let rows = vec![vec![0.5, -1.0, 2.0], vec![0.0, 0.3, -0.3]];
        let labels = [2, 0];
        let o = LogitOffsets::new(vec![0.0, -1.5, 0.7]).unwrap();
        let mut tape = Tape::new();
        let l = tape.constant(Tensor::from_rows(&rows).unwrap());
        let v = batch_zla_loss(&mut tape, l, &labels, &o).unwrap();
        let want = (zla_loss(&rows[0], 2, &o).unwrap() + zla_loss(&rows[1], 0, &o).unwrap()) / 2.0;
        assert!((tape.value(v).data()[0] - want).abs() < 1e-14);
    }
}
