use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub t: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub config: AdamConfig,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState {
            t: 0,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            config,
        }
    }
}

/// Bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState<T>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let c1 = T::of(1.0 - beta1.powi(t));
    let c2 = T::of(1.0 - beta2.powi(t));
    let (b1, b2) = (T::of(beta1), T::of(beta2));
    let (one_b1, one_b2) = (T::of(1.0 - beta1), T::of(1.0 - beta2));
    let (lr, eps) = (T::of(lr), T::of(eps));
    for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        *m = b1 * *m + one_b1 * g;
        *v = b2 * *v + one_b2 * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0f64, -2.0, 3.5];
        let mut state = AdamState::new(3, AdamConfig::default());
        adam_step(&mut p, &[0.0; 3], &mut state).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![0.0f64, 0.0];
        let mut state = AdamState::new(2, AdamConfig::default());
        adam_step(&mut p, &[0.3, -7.0], &mut state).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-10);
        assert!((p[1] - 1e-3).abs() < 1e-10);
    }

    #[test]
    fn scripted_trace() {
        // Hand-executed update equations for a scalar with lr=0.1, beta1=0.5,
        // beta2=0.75, eps=0 and gradients 1, -2, 4 starting from theta=1.
        //   t=1: m=0.5,  v=0.25,    m^=1,        v^=1,          theta=0.9
        //   t=2: m=-0.75, v=1.1875, m^=-1,       v^=1.1875/0.4375
        //   t=3: m=1.625, v=4.890625, m^=1.625/0.875, v^=4.890625/0.578125
        let config = AdamConfig {
            lr: 0.1,
            beta1: 0.5,
            beta2: 0.75,
            eps: 0.0,
        };
        let mut state = AdamState::new(1, config);
        let mut p = vec![1.0f64];
        let mut expected = 1.0f64;
        adam_step(&mut p, &[1.0], &mut state).unwrap();
        expected -= 0.1 * 1.0 / 1.0;
        assert!((p[0] - expected).abs() < 1e-12);
        adam_step(&mut p, &[-2.0], &mut state).unwrap();
        expected -= -0.1 / (1.1875f64 / 0.4375).sqrt();
        assert!((p[0] - expected).abs() < 1e-12);
        adam_step(&mut p, &[4.0], &mut state).unwrap();
        expected -= 0.1 * (1.625 / 0.875) / (4.890625f64 / 0.578125).sqrt();
        assert!((p[0] - expected).abs() < 1e-12);
        assert_eq!(state.m, vec![1.625]);
        assert_eq!(state.v, vec![4.890625]);
    }

    #[test]
    fn shape_mismatch() {
        let mut state = AdamState::<f32>::new(2, AdamConfig::default());
        assert!(adam_step(&mut [0.0f32; 3], &[0.0; 3], &mut state).is_err());
    }
}
