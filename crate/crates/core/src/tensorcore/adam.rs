use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Moment accumulators for the Adam optimizer.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f32>>,
    pub second_moment: Vec<Vec<f32>>,
    pub step: u64,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        Self::with_constants(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_constants(params: &[Tensor], beta1: f32, beta2: f32, eps: f32) -> Self {
        AdamState {
            first_moment: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second_moment: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, lr: f32) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::shape(
            "adam",
            format!(
                "{} params, {} grads, {} accumulators",
                params.len(),
                grads.len(),
                state.first_moment.len()
            ),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.first_moment[i].len() != p.len() {
            return Err(Error::shape(
                "adam",
                format!("param {i}: {:?} vs gradient {:?}", p.shape(), g.shape()),
            ));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut().zip(state.second_moment.iter_mut()))
    {
        for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mv = b1 * *mv + (1.0 - b1) * gv;
            *vv = b2 * *vv + (1.0 - b2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
