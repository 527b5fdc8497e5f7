use serde::{Deserialize, Serialize};

use crate::model::ParamList;
use crate::numerics::Tensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamList) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|p| Tensor::zeros(p.shape())).collect();
        AdamState { m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients before
/// touching any parameter.
pub fn adam_step(params: &mut ParamList, grads: &[Tensor], state: &mut AdamState, lr: f64, cfg: &AdamConfig) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::shape(format!("{} gradients for {} parameters", grads.len(), params.len())));
    }
    for ((name, p), g) in params.names().iter().zip(params.tensors()).zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::shape(format!("gradient for {name}: {:?} vs {:?}", g.shape(), p.shape())));
        }
        if let Some(i) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient for {name} at entry {i}: {}", g.data()[i])));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (i, p) in params.tensors_mut().iter_mut().enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, (x, &g)) in p.data_mut().iter_mut().zip(grads[i].data()).enumerate() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            *x -= lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> ParamList {
        let mut p = ParamList::new();
        p.push("x", Tensor::filled(&[1], x));
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar(3.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &[Tensor::zeros(&[1])], &mut s, 0.1, &AdamConfig::default()).unwrap();
        assert_eq!(p.tensors()[0].data(), &[3.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &[Tensor::filled(&[1], 1.0)], &mut s, 1e-4, &AdamConfig::default()).unwrap();
        assert!((p.tensors()[0].data()[0] + 1e-4 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn three_step_trace() {
        let cfg = AdamConfig::default();
        let lr = 0.01;
        let mut p = scalar(1.0);
        let mut s = AdamState::new(&p);
        let gs = [0.5, -1.5, 2.0];
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for (t, &g) in gs.iter().enumerate() {
            adam_step(&mut p, &[Tensor::filled(&[1], g)], &mut s, lr, &cfg).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let k = (t + 1) as i32;
            x -= lr * (m / (1.0 - 0.9f64.powi(k))) / ((v / (1.0 - 0.999f64.powi(k))).sqrt() + 1e-8);
            assert!((p.tensors()[0].data()[0] - x).abs() < 1e-12);
            assert!((s.m[0].data()[0] - m).abs() < 1e-12 && (s.v[0].data()[0] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = scalar(1.0);
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &[Tensor::filled(&[1], f64::NAN)], &mut s, 0.1, &AdamConfig::default());
        assert!(matches!(err, Err(Error::Numeric(_))));
        assert_eq!(p.tensors()[0].data(), &[1.0]);
        assert_eq!(s.t, 0);
    }
}
