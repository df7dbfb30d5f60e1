use super::{Result, Tensor, TensorError};

/// Moment constants for Adam.
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

/// A trainable tensor with its optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    m: Tensor,
    v: Tensor,
    step: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let [r, c] = value.shape();
        Self {
            name: name.into(),
            value,
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn reset_state(&mut self) {
        let [r, c] = self.value.shape();
        self.m = Tensor::zeros(r, c);
        self.v = Tensor::zeros(r, c);
        self.step = 0;
    }
}

/// One bias-corrected Adam update. The L2 penalty enters as `l2 * w` added to
/// the gradient before the moment updates. No parameter is touched when any
/// gradient is non-finite.
pub fn adam_step(
    params: &mut [Parameter],
    grads: &[Tensor],
    lr: f64,
    l2: f64,
    cfg: AdamConfig,
) -> Result<()> {
    for (p, g) in params.iter().zip(grads) {
        if g.shape() != p.value.shape() {
            return Err(TensorError::Shape {
                op: "adam_step",
                left: p.value.shape(),
                right: g.shape(),
            });
        }
        if !g.all_finite() {
            return Err(TensorError::NonFinite {
                name: p.name.clone(),
            });
        }
    }
    for (p, g) in params.iter_mut().zip(grads) {
        p.step += 1;
        let t = p.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let w = p.value.data_mut();
        let (m, v) = (p.m.data_mut(), p.v.data_mut());
        for i in 0..w.len() {
            let gi = g.data()[i] + l2 * w[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            w[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_no_penalty_is_noop() {
        let mut p = vec![Parameter::new("w", Tensor::filled(2, 2, 0.7))];
        adam_step(&mut p, &[Tensor::zeros(2, 2)], 0.1, 0.0, AdamConfig::default()).unwrap();
        assert_eq!(p[0].value, Tensor::filled(2, 2, 0.7));
    }

    #[test]
    fn one_step_descends_square() {
        let mut p = vec![Parameter::new("w", Tensor::scalar(1.0))];
        let g = Tensor::scalar(2.0);
        adam_step(&mut p, &[g], 0.1, 0.0, AdamConfig::default()).unwrap();
        assert!(p[0].value.data()[0] < 1.0);
    }

    #[test]
    fn converges_on_quadratic() {
        // f(w) = (w0 - 3)^2 + 2 (w1 + 1)^2, optimum (3, -1)
        let mut p = vec![Parameter::new("w", Tensor::from_vec(1, 2, vec![0.0, 0.0]).unwrap())];
        for _ in 0..500 {
            let w = p[0].value.data().to_vec();
            let g = Tensor::from_vec(1, 2, vec![2.0 * (w[0] - 3.0), 4.0 * (w[1] + 1.0)]).unwrap();
            adam_step(&mut p, &[g], 0.1, 0.0, AdamConfig::default()).unwrap();
        }
        let w = p[0].value.data();
        let dist = ((w[0] - 3.0).powi(2) + (w[1] + 1.0).powi(2)).sqrt();
        assert!(dist < 1e-3, "distance {dist}");
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = vec![Parameter::new("w", Tensor::scalar(1.0))];
        let err = adam_step(&mut p, &[Tensor::scalar(f64::NAN)], 0.1, 0.0, AdamConfig::default())
            .unwrap_err();
        assert_eq!(err, TensorError::NonFinite { name: "w".into() });
        assert_eq!(p[0].value.data()[0], 1.0);
        assert_eq!(p[0].step(), 0);
    }

    #[test]
    fn l2_penalty_shrinks_with_zero_gradient() {
        let mut p = vec![Parameter::new("w", Tensor::scalar(1.0))];
        adam_step(&mut p, &[Tensor::scalar(0.0)], 0.01, 1e-3, AdamConfig::default()).unwrap();
        assert!(p[0].value.data()[0] < 1.0);
    }
}
