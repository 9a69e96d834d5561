use super::{Mlp, NetError};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// A network together with its Adam moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    pub net: Mlp,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl ParamSet {
    pub fn new(net: Mlp) -> Self {
        let n = net.len();
        Self {
            net,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &[f64], lr: f64, cfg: AdamConfig) -> Result<(), NetError> {
        let n = self.net.len();
        if grads.len() != n {
            return Err(NetError::LengthMismatch {
                expected: n,
                got: grads.len(),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let params = self.net.params_mut();
        for i in 0..n {
            let g = grads[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        Ok(())
    }
}

/// Cosine decay from `eta_max` at epoch 0 to `eta_min` at `total`.
pub fn cosine_lr(epoch: usize, total: usize, eta_max: f64, eta_min: f64) -> f64 {
    if total == 0 {
        return eta_max;
    }
    let frac = epoch.min(total) as f64 / total as f64;
    eta_min + 0.5 * (eta_max - eta_min) * (1.0 + (PI * frac).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(theta: f64) -> ParamSet {
        let mut params = vec![0.0; 12];
        params[0] = theta;
        ParamSet::new(Mlp::from_params(&[3, 3], params).unwrap())
    }

    #[test]
    fn first_step_size() {
        let mut ps = single(0.0);
        let mut g = vec![0.0; 12];
        g[0] = 0.5;
        ps.adam_step(&g, 1e-3, AdamConfig::default()).unwrap();
        // m_hat = 0.5, v_hat = 0.25
        let expect = -1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((ps.net.params()[0] - expect).abs() < 1e-15);
        assert!((ps.net.params()[0] + 9.9999998e-4).abs() < 1e-15);
        assert_eq!(ps.step, 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut ps = single(0.25);
        ps.adam_step(&[0.0; 12], 1e-3, AdamConfig::default()).unwrap();
        assert_eq!(ps.net.params()[0], 0.25);
        assert!(ps.m.iter().chain(&ps.v).all(|&x| x == 0.0));
    }

    #[test]
    fn sign_symmetry_on_first_step() {
        let mut a = single(0.0);
        let mut b = single(0.0);
        let g: Vec<f64> = (0..12).map(|i| (i as f64 - 5.5) * 0.3).collect();
        let ng: Vec<f64> = g.iter().map(|x| -x).collect();
        a.adam_step(&g, 1e-3, AdamConfig::default()).unwrap();
        b.adam_step(&ng, 1e-3, AdamConfig::default()).unwrap();
        for (x, y) in a.net.params().iter().zip(b.net.params()) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn length_mismatch() {
        let mut ps = single(0.0);
        assert_eq!(
            ps.adam_step(&[0.0; 3], 1e-3, AdamConfig::default()),
            Err(NetError::LengthMismatch {
                expected: 12,
                got: 3
            })
        );
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(0, 100, 1e-3, 1e-6), 1e-3);
        assert!((cosine_lr(100, 100, 1e-3, 1e-6) - 1e-6).abs() < 1e-18);
        assert!((cosine_lr(50, 100, 1e-3, 1e-6) - 5.005e-4).abs() < 1e-15);
    }
}
