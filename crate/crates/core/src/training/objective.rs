use ndarray::{Array2, Axis, Zip};

use super::sampling::Triple;
use crate::error::{invalid, Error, Result};
use crate::linalg::SpectralBasis;
use crate::model::{lcfn_forward, ForwardCache, LayerCache, ModelParams};
use crate::spectral::TruncatedBases;

/// `ln(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn check_triples(params: &ModelParams, triples: &[Triple]) -> Result<()> {
    let (m, n) = (params.num_users(), params.num_items());
    match triples.iter().find(|t| t.u >= m || t.i >= n || t.j >= n) {
        Some(t) => Err(invalid(format!("triple {t:?} out of range for {m}x{n}"))),
        None => Ok(()),
    }
}

fn data_loss(cache: &ForwardCache, triples: &[Triple]) -> f64 {
    triples.iter().map(|t| softplus(cache.score(t.u, t.j) - cache.score(t.u, t.i))).sum()
}

/// `Σ −ln σ(R̂_ui − R̂_uj) + λ/2 ‖θ‖²` over the triples and every parameter.
pub fn bpr_loss(
    params: &ModelParams,
    bases: Option<&TruncatedBases>,
    triples: &[Triple],
    lambda: f64,
) -> Result<f64> {
    check_triples(params, triples)?;
    let cache = lcfn_forward(params, bases)?;
    let loss = data_loss(&cache, triples) + 0.5 * lambda * params.squared_norm();
    if !loss.is_finite() {
        return Err(Error::NumericOverflow("loss".into()));
    }
    Ok(loss)
}

/// Exact partial derivatives of [`bpr_loss`], shaped like the parameters.
pub fn gradients(
    params: &ModelParams,
    bases: Option<&TruncatedBases>,
    triples: &[Triple],
    lambda: f64,
) -> Result<ModelParams> {
    Ok(loss_and_gradients(params, bases, triples, lambda)?.1)
}

/// Reverse pass through one side of one layer. Accumulates the kernel and
/// transform partials and returns the partial for the layer input.
#[allow(clippy::too_many_arguments)]
fn layer_backward(
    d_out: &Array2<f64>,
    out: &Array2<f64>,
    inner: &LayerCache,
    basis: &SpectralBasis,
    kernel: &ndarray::Array1<f64>,
    transform: &Array2<f64>,
    d_kernel: &mut ndarray::Array1<f64>,
    d_transform: &mut Array2<f64>,
) -> Array2<f64> {
    let mut d_pre = d_out.clone();
    Zip::from(&mut d_pre).and(out).for_each(|d, &s| *d *= s * (1.0 - s));
    ndarray::linalg::general_mat_mul(1.0, &inner.filtered.t(), &d_pre, 1.0, d_transform);
    let d_filtered = d_pre.dot(&transform.t());
    let d_scaled = basis.vectors().t().dot(&d_filtered);
    Zip::from(d_kernel)
        .and(d_scaled.rows())
        .and(inner.coeffs.rows())
        .for_each(|dk, ds, c| *dk += ds.dot(&c));
    let d_coeffs = &d_scaled * &kernel.view().insert_axis(Axis(1));
    basis.vectors().dot(&d_coeffs)
}

pub(crate) fn loss_and_gradients(
    params: &ModelParams,
    bases: Option<&TruncatedBases>,
    triples: &[Triple],
    lambda: f64,
) -> Result<(f64, ModelParams)> {
    check_triples(params, triples)?;
    let cache = lcfn_forward(params, bases)?;
    let levels = params.num_layers() + 1;
    let mut d_user: Vec<Array2<f64>> =
        cache.user_layers.iter().map(|a| Array2::zeros(a.raw_dim())).collect();
    let mut d_item: Vec<Array2<f64>> =
        cache.item_layers.iter().map(|a| Array2::zeros(a.raw_dim())).collect();

    let mut loss = 0.0;
    for t in triples {
        let x = cache.score(t.u, t.i) - cache.score(t.u, t.j);
        loss += softplus(-x);
        // d softplus(−x) / dx
        let g = -crate::model::sigmoid(-x);
        for l in 0..levels {
            let (uu, vv) = (&cache.user_layers[l], &cache.item_layers[l]);
            let diff = &vv.row(t.i) - &vv.row(t.j);
            d_user[l].row_mut(t.u).scaled_add(g, &diff);
            d_item[l].row_mut(t.i).scaled_add(g, &uu.row(t.u));
            d_item[l].row_mut(t.j).scaled_add(-g, &uu.row(t.u));
        }
    }

    let mut grads = params.zeros_like();
    for l in (1..levels).rev() {
        let bases = bases.expect("forward checked bases");
        let layer = &params.layers[l - 1];
        let gl = &mut grads.layers[l - 1];
        let d_prev_u = layer_backward(
            &d_user[l],
            &cache.user_layers[l],
            &cache.user_inner[l - 1],
            bases.user(),
            &layer.k_user,
            &layer.transform,
            &mut gl.k_user,
            &mut gl.transform,
        );
        let d_prev_v = layer_backward(
            &d_item[l],
            &cache.item_layers[l],
            &cache.item_inner[l - 1],
            bases.item(),
            &layer.k_item,
            &layer.transform,
            &mut gl.k_item,
            &mut gl.transform,
        );
        d_user[l - 1] += &d_prev_u;
        d_item[l - 1] += &d_prev_v;
    }
    grads.u0 = d_user.swap_remove(0);
    grads.v0 = d_item.swap_remove(0);

    if lambda != 0.0 {
        for (g, p) in grads.tensors_mut().into_iter().zip(params.tensors()) {
            Zip::from(g).and(&p).for_each(|g, &p| *g += lambda * p);
        }
    }
    let loss = loss + 0.5 * lambda * params.squared_norm();
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::NumericOverflow("loss or gradient".into()));
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, Init};

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }

    #[test]
    fn equal_scores_cost_ln2() {
        let mut p = init_params(1, 2, 2, 0, (0, 0), 0, Init::Random).unwrap();
        p.v0.fill(0.5);
        let loss = bpr_loss(&p, None, &[Triple { u: 0, i: 0, j: 1 }], 0.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn empty_triples_give_regularizer_gradient() {
        let p = init_params(3, 2, 2, 0, (0, 0), 4, Init::Random).unwrap();
        let g = gradients(&p, None, &[], 0.3).unwrap();
        assert_eq!(g.u0, &p.u0 * 0.3);
        assert_eq!(g.v0, &p.v0 * 0.3);
    }

    #[test]
    fn out_of_range_triple_rejected() {
        let p = init_params(1, 2, 2, 0, (0, 0), 0, Init::Random).unwrap();
        assert!(bpr_loss(&p, None, &[Triple { u: 0, i: 0, j: 2 }], 0.0).is_err());
    }
}
