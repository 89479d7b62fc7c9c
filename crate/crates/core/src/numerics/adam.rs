use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use super::{NnError, Result};

/// Which update rule a learner applies to its gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moment estimates for one network.
///
/// Weight rows whose input was zero for the whole step have a zero gradient
/// and are skipped, moments included; biases are always updated. With dense
/// inputs this is ordinary Adam.
#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    t: u64,
    m: Vec<(Vec<f64>, Vec<f64>)>,
    v: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(net: &Mlp, params: AdamParams) -> Self {
        let zeros = || {
            net.layers()
                .iter()
                .map(|l| (vec![0.0; l.in_dim() * l.out_dim()], vec![0.0; l.out_dim()]))
                .collect::<Vec<_>>()
        };
        Self {
            params,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Moves `net` by `scale * m_hat / (sqrt(v_hat) + eps)` built from
    /// `grads`, then clears `grads`. A negative scale descends.
    pub fn apply(&mut self, net: &mut Mlp, grads: &mut Gradients, scale: f64) -> Result<()> {
        if !scale.is_finite() {
            return Err(NnError::NonFinite("step size"));
        }
        if self.m.len() != net.layers().len() || grads.layers.len() != net.layers().len() {
            return Err(NnError::BadDims("optimizer state does not match the network".into()));
        }
        self.t += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powf(self.t as f64);
        let c2 = 1.0 - beta2.powf(self.t as f64);
        let step = scale * c2.sqrt() / c1;
        let eps = eps * c2.sqrt();
        let update = |w: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *w += step * *m / (v.sqrt() + eps);
        };
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[l];
            let od = g.out_dim;
            let (mw, mb) = &mut self.m[l];
            let (vw, vb) = &mut self.v[l];
            for &r in &g.rows {
                for idx in r * od..(r + 1) * od {
                    update(&mut layer.weights[idx], g.dw[idx], &mut mw[idx], &mut vw[idx]);
                }
                if !layer.weights[r * od..(r + 1) * od].iter().all(|w| w.is_finite()) {
                    return Err(NnError::NonFinite("weights"));
                }
            }
            for (i, b) in layer.bias.iter_mut().enumerate() {
                update(b, g.db[i], &mut mb[i], &mut vb[i]);
            }
        }
        grads.clear();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Activation;

    fn net() -> Mlp {
        Mlp::init(&[4, 3, 2], &[Activation::Relu, Activation::Identity], 7).unwrap()
    }

    #[test]
    fn first_step_moves_each_touched_param_by_lr() {
        let mut a = net();
        let before = a.clone();
        let mut opt = Adam::new(&a, AdamParams::default());
        let mut g = Gradients::zeros_like(&a);
        let trace = a.forward(&[1.0, 0.0, -2.0, 0.5]).unwrap();
        a.accumulate(&trace, &[0.3, -0.7], &mut g).unwrap();
        let grad: Vec<f64> = (0..a.num_params()).map(|i| g.flat(i)).collect();
        opt.apply(&mut a, &mut g, -0.01).unwrap();
        for (i, gi) in grad.iter().enumerate() {
            let moved = a.param(i) - before.param(i);
            if gi.abs() > 1e-12 {
                assert!((moved + 0.01 * gi.signum()).abs() < 1e-6, "param {i} moved {moved}");
            } else {
                assert!(moved.abs() < 1e-6);
            }
        }
        // the zero input row is untouched
        for o in 0..3 {
            assert_eq!(a.layers()[0].weight(o, 1), before.layers()[0].weight(o, 1));
        }
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn fits_a_linear_target() {
        let mut a = Mlp::init(&[2, 1], &[Activation::Identity], 3).unwrap();
        let mut opt = Adam::new(&a, AdamParams::default());
        let mut g = Gradients::zeros_like(&a);
        let data = [([1.0, 0.0], 2.0), ([0.0, 1.0], -1.0), ([1.0, 1.0], 1.0)];
        for step in 0..3000 {
            let (x, y) = data[step % 3];
            let t = a.forward(&x).unwrap();
            a.accumulate(&t, &[2.0 * (t.output()[0] - y)], &mut g).unwrap();
            opt.apply(&mut a, &mut g, -0.01).unwrap();
        }
        for (x, y) in data {
            assert!((a.forward(&x).unwrap().output()[0] - y).abs() < 0.05);
        }
    }

    #[test]
    fn rejects_mismatched_state() {
        let mut a = net();
        let other = Mlp::init(&[4, 2], &[Activation::Identity], 1).unwrap();
        let mut opt = Adam::new(&other, AdamParams::default());
        let mut g = Gradients::zeros_like(&a);
        assert!(opt.apply(&mut a, &mut g, 0.1).is_err());
        let mut opt = Adam::new(&a, AdamParams::default());
        assert!(opt.apply(&mut a, &mut g, f64::NAN).is_err());
    }
}
