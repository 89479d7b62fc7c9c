use super::{Gradients, Mlp, NnError, Result};

/// The two scalar objectives the learners differentiate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    /// `(target - V(x))^2` on a scalar head.
    Critic { target: f64 },
    /// `delta * log pi(action | x)` on a softmax head.
    Actor { action: usize, delta: f64 },
}

impl LossSpec {
    pub fn value(&self, net: &Mlp, input: &[f64]) -> Result<f64> {
        let out = net.forward(input)?;
        match *self {
            LossSpec::Critic { target } => {
                if net.output_dim() != 1 {
                    return Err(NnError::NotScalar(net.output_dim()));
                }
                let d = target - out.output()[0];
                Ok(d * d)
            }
            LossSpec::Actor { action, delta } => {
                let p = out.output().get(action).copied().ok_or(NnError::BadAction {
                    index: action,
                    width: net.output_dim(),
                })?;
                Ok(delta * p.ln())
            }
        }
    }

    /// Analytic gradient of the loss w.r.t. every parameter, in the flat order
    /// of [`Mlp::param`].
    pub fn gradient(&self, net: &Mlp, input: &[f64]) -> Result<Gradients> {
        let trace = net.forward(input)?;
        let d_head = match *self {
            LossSpec::Critic { target } => {
                if net.output_dim() != 1 {
                    return Err(NnError::NotScalar(net.output_dim()));
                }
                let d = target - trace.output()[0];
                net.head_pre_grad(&trace, &[-2.0 * d])?
            }
            LossSpec::Actor { action, delta } => net.log_prob_grad(&trace, action, delta)?,
        };
        let mut grads = Gradients::zeros_like(net);
        net.accumulate(&trace, &d_head, &mut grads)?;
        Ok(grads)
    }
}

/// Central-difference check over every parameter. Returns
/// `max |analytic - numeric| / max(1, |numeric|)`.
pub fn grad_check(net: &Mlp, input: &[f64], loss: LossSpec, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(NnError::BadEps(eps));
    }
    let analytic = loss.gradient(net, input)?;
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for idx in 0..net.num_params() {
        let orig = probe.param(idx);
        *probe.param_mut(idx) = orig + eps;
        let up = loss.value(&probe, input)?;
        *probe.param_mut(idx) = orig - eps;
        let down = loss.value(&probe, input)?;
        *probe.param_mut(idx) = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic.flat(idx) - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
