use super::{NumgradError, Tape, Tensor, Var};

/// Builds a scalar loss on a fresh tape from parameter handles.
pub trait LossFn: Fn(&mut Tape, &[Var]) -> Result<Var, NumgradError> {}
impl<F> LossFn for F where F: Fn(&mut Tape, &[Var]) -> Result<Var, NumgradError> {}

/// Runs `f` once and returns the loss value plus the gradient of each param.
pub fn value_and_grad<F: LossFn>(f: &F, params: &[Tensor]) -> Result<(f64, Vec<Tensor>), NumgradError> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let value = scalar(&tape, loss)?;
    let grads = tape.backward(loss)?;
    Ok((value, vars.iter().map(|&v| grads.wrt(v)).collect()))
}

fn forward_only<F: LossFn>(f: &F, params: &[Tensor]) -> Result<f64, NumgradError> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    scalar(&tape, loss)
}

fn scalar(tape: &Tape, loss: Var) -> Result<f64, NumgradError> {
    tape.value(loss)
        .item()
        .ok_or(NumgradError::NonScalarLoss(tape.shape(loss)))
}

/// Max relative error between the tape gradient and central differences
/// with step `h`, measured as `|a − n| / max(1e-12, |a| + |n|)`.
pub fn grad_check<F: LossFn>(f: F, params: &[Tensor], h: f64) -> Result<f64, NumgradError> {
    let (base, analytic) = value_and_grad(&f, params)?;
    let again = forward_only(&f, params)?;
    if base.to_bits() != again.to_bits() {
        return Err(NumgradError::NonDeterministic { first: base, second: again });
    }

    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for (pi, grad) in analytic.iter().enumerate() {
        for k in 0..grad.data().len() {
            let orig = work[pi].data()[k];
            work[pi].data_mut()[k] = orig + h;
            let up = forward_only(&f, &work)?;
            work[pi].data_mut()[k] = orig - h;
            let down = forward_only(&f, &work)?;
            work[pi].data_mut()[k] = orig;

            let numeric = (up - down) / (2.0 * h);
            let a = grad.data()[k];
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn quadratic_norm() {
        let p = Tensor::row(&[1.0, -2.0]).unwrap();
        let err = grad_check(
            |t: &mut Tape, v: &[Var]| {
                let sq = t.mul(v[0], v[0])?;
                t.sum(sq)
            },
            &[p],
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn constant_loss_has_zero_error() {
        let p = Tensor::row(&[3.0]).unwrap();
        let err = grad_check(
            |t: &mut Tape, _: &[Var]| Ok(t.constant(Tensor::scalar(4.0))),
            &[p],
            1e-5,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn detects_non_deterministic_closure() {
        let calls = Cell::new(0.0);
        let p = Tensor::row(&[1.0]).unwrap();
        let res = grad_check(
            |t: &mut Tape, v: &[Var]| {
                calls.set(calls.get() + 1.0);
                let c = t.constant(Tensor::scalar(calls.get()));
                let s = t.sum(v[0])?;
                t.add(s, c)
            },
            &[p],
            1e-5,
        );
        assert!(matches!(res, Err(NumgradError::NonDeterministic { .. })));
    }
}
