use crate::nn::{Gradients, ModelParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first: ModelParams,
    pub second: ModelParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        OptimizerState {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, `θ ← θ − η·m̂/(√v̂ + ε)`, followed by
/// re-zeroing the PAD embedding row. Gradients are checked for non-finite
/// entries before anything is modified.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut OptimizerState,
    learning_rate: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.shape != params.shape || state.first.shape != params.shape {
        return Err(Error::Shape(
            "optimizer state, gradients and parameters disagree".into(),
        ));
    }
    for (name, g) in grads.arrays() {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient(name));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);

    let grads = grads.arrays();
    let mut firsts = state.first.arrays_mut();
    let mut seconds = state.second.arrays_mut();
    for (i, (_, theta)) in params.arrays_mut().into_iter().enumerate() {
        let g = grads[i].1;
        let m = &mut *firsts[i].1;
        let v = &mut *seconds[i].1;
        for j in 0..theta.len() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            theta[j] -= learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    params.zero_pad_row();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Arch, ModelShape};

    fn scalar_model() -> ModelParams {
        // V=2 so the single non-PAD embedding row acts as a scalar parameter.
        ModelParams::zeros(ModelShape {
            arch: Arch::Cnn,
            vocab_size: 2,
            embed_dim: 1,
            filters: 1,
            kernel: 1,
            labels: 1,
        })
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = scalar_model();
        p.embedding[1] = 0.3;
        p.conv_weight[0] = -1.2;
        let before = p.clone();
        let mut st = OptimizerState::new(&p);
        let g = p.zeros_like();
        adam_step(&mut p, &g, &mut st, 0.01, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar_model();
        let mut st = OptimizerState::new(&p);
        let mut g = p.zeros_like();
        g.embedding[1] = 1.0;
        adam_step(&mut p, &g, &mut st, 0.001, &AdamConfig::default()).unwrap();
        let expect = -0.001 / (1.0 + 1e-8);
        assert!((p.embedding[1] - expect).abs() < 1e-18, "{}", p.embedding[1]);
        assert!((p.embedding[1] + 0.000999999990).abs() < 1e-15);
    }

    #[test]
    fn bias_correction_depends_on_step() {
        // constant gradient: m̂ = g and v̂ = g² at every t, so steps agree
        let mut p = scalar_model();
        let mut st = OptimizerState::new(&p);
        let mut g = p.zeros_like();
        g.embedding[1] = 1.0;
        let cfg = AdamConfig::default();
        adam_step(&mut p, &g, &mut st, 0.001, &cfg).unwrap();
        let first = p.embedding[1];
        adam_step(&mut p, &g, &mut st, 0.001, &cfg).unwrap();
        assert!(((p.embedding[1] - first) - first).abs() < 1e-15);

        // gradient 1 then 0: second update is 0.001 * (0.09/0.19) / sqrt(0.000999/0.001999)
        let mut p = scalar_model();
        let mut st = OptimizerState::new(&p);
        adam_step(&mut p, &g, &mut st, 0.001, &cfg).unwrap();
        let after_one = p.embedding[1];
        let zero = p.zeros_like();
        adam_step(&mut p, &zero, &mut st, 0.001, &cfg).unwrap();
        let step2 = after_one - p.embedding[1];
        let m_hat = 0.09 / 0.19;
        let v_hat = 0.000999 / 0.001999;
        let expect = 0.001 * m_hat / (f64::sqrt(v_hat) + 1e-8);
        assert!((step2 - expect).abs() < 1e-15, "{step2} vs {expect}");
        // without bias correction the same state would give a different step
        let uncorrected = 0.001 * 0.09 / (f64::sqrt(0.000999) + 1e-8);
        assert!((step2 - uncorrected).abs() > 1e-4);
    }

    #[test]
    fn pad_row_stays_zero() {
        let mut p = scalar_model();
        let mut st = OptimizerState::new(&p);
        let mut g = p.zeros_like();
        g.embedding[0] = 5.0;
        adam_step(&mut p, &g, &mut st, 0.1, &AdamConfig::default()).unwrap();
        assert_eq!(p.embedding[0], 0.0);
    }

    #[test]
    fn non_finite_gradient_names_array() {
        let mut p = scalar_model();
        let before = p.clone();
        let mut st = OptimizerState::new(&p);
        let mut g = p.zeros_like();
        g.output_bias[0] = f64::NAN;
        let err = adam_step(&mut p, &g, &mut st, 0.1, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient("output_bias")));
        assert_eq!(p, before);
        assert_eq!(st.step, 0);
    }
}
