//! Central finite-difference gradient checking.
//!
//! Only forward evaluations are used to form the numeric gradient, so the
//! check is independent of every backward rule it validates.

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::Result;
use crate::model::JsccModel;
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-4;

/// Denominator floor for the relative error, so that gradients that are
/// zero on both routes compare on an absolute scale.
const REL_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Maximum relative error between backward gradients and central differences
/// of the scalar produced by `build` with respect to every element of every
/// input.
pub fn check<F>(inputs: &[Tensor], eps: f64, build: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |ts: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.input(t.clone())).collect();
        let out = build(&mut g, &vars)?;
        Ok(g.value(out).get(0, 0))
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let out = build(&mut g, &vars)?;
    let grads = g.backward(out)?;

    let mut worst = 0.0f64;
    let mut work = inputs.to_vec();
    for (k, v) in vars.iter().enumerate() {
        let (r, c) = inputs[k].shape();
        let zero = Tensor::zeros(r, c);
        let analytic = grads.get(*v).unwrap_or(&zero).clone();
        for i in 0..inputs[k].len() {
            let orig = work[k].data()[i];
            work[k].data_mut()[i] = orig + eps;
            let plus = eval(&work)?;
            work[k].data_mut()[i] = orig - eps;
            let minus = eval(&work)?;
            work[k].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(analytic.data()[i], numeric));
        }
    }
    Ok(worst)
}

/// Maximum relative error between backward parameter gradients and central
/// differences of the scalar built by `build` over every model parameter.
pub fn check_model<F>(model: &JsccModel, eps: f64, build: F) -> Result<f64>
where
    F: Fn(&JsccModel, &mut Graph) -> Result<Var>,
{
    let eval = |m: &JsccModel| -> Result<f64> {
        let mut g = Graph::new();
        let out = build(m, &mut g)?;
        Ok(g.value(out).get(0, 0))
    };
    let mut g = Graph::new();
    let out = build(model, &mut g)?;
    let grads = g.backward(out)?.into_param_grads(&g);

    let mut work = model.clone();
    let mut worst = 0.0f64;
    for id in model.params().ids() {
        let (r, c) = model.params().get(id).shape();
        let zero = Tensor::zeros(r, c);
        let analytic = grads.iter().find(|(g, _)| *g == id).map_or(&zero, |(_, t)| t);
        for i in 0..r * c {
            let orig = work.params().get(id).data()[i];
            work.params_mut().get_mut(id).data_mut()[i] = orig + eps;
            let plus = eval(&work)?;
            work.params_mut().get_mut(id).data_mut()[i] = orig - eps;
            let minus = eval(&work)?;
            work.params_mut().get_mut(id).data_mut()[i] = orig;
            worst = worst.max(relative_error(analytic.data()[i], (plus - minus) / (2.0 * eps)));
        }
    }
    Ok(worst)
}

/// Reduces a tensor to a scalar through a fixed random weighting, so every
/// output element contributes a distinct coefficient.
pub fn project(g: &mut Graph, y: Var, weights: &Tensor) -> Result<Var> {
    let w = g.input(weights.clone());
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

pub fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::new(rows, cols, data).expect("sized")
}
