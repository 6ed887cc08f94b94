use ndarray::Zip;

use crate::error::{invalid, Result};
use crate::model::ModelParams;

/// First and second moment estimates for every parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

fn same_shapes(a: &ModelParams, b: &ModelParams) -> bool {
    let (ta, tb) = (a.tensors(), b.tensors());
    ta.len() == tb.len() && ta.iter().zip(&tb).all(|(x, y)| x.shape() == y.shape())
}

/// One bias-corrected update `θ ← θ − η m̂ / (√v̂ + ε)`, in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut ModelParams,
    grads: &ModelParams,
    learning_rate: f64,
) -> Result<()> {
    if !same_shapes(params, grads) || !same_shapes(params, &state.m) {
        return Err(invalid("Adam state, parameters and gradients differ in shape"));
    }
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut())
        .zip(grads.tensors());
    for (((p, m), v), g) in tensors {
        Zip::from(p).and(m).and(v).and(&g).for_each(|p, m, v, &g| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        });
    }
    Ok(())
}
