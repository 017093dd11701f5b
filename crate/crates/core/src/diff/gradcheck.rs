//! Central finite-difference verification of recorded gradients.

use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;
use crate::scalar::Scalar;

/// Gradient magnitudes below this are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

fn eval_loss<S, F>(store: &ParamStore<S>, loss_fn: &F) -> Result<f64>
where
    S: Scalar,
    F: Fn(&ParamStore<S>, &mut Tape<S>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = loss_fn(store, &mut tape)?;
    Ok(tape.scalar_value(loss).as_f64())
}

/// Runs the recorded backward pass, then compares every parameter entry
/// against a central difference with the given `step`.
pub fn grad_check<S, F>(
    store: &mut ParamStore<S>,
    loss_fn: F,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    S: Scalar,
    F: Fn(&ParamStore<S>, &mut Tape<S>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = loss_fn(store, &mut tape)?;
    tape.backward(loss, store, false)?;
    let analytic: Vec<Tensor<S>> = store.ids().map(|id| store.grad(id).clone()).collect();
    check_against(store, loss_fn, &analytic, step, tolerance)
}

/// Compares externally supplied gradients (one tensor per parameter, in
/// store order) against central differences.
pub fn check_against<S, F>(
    store: &mut ParamStore<S>,
    loss_fn: F,
    analytic: &[Tensor<S>],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    S: Scalar,
    F: Fn(&ParamStore<S>, &mut Tape<S>) -> Result<Var>,
{
    let h = S::lit(step);
    let ids: Vec<_> = store.ids().collect();
    let mut params = Vec::with_capacity(ids.len());
    for (id, grad) in ids.into_iter().zip(analytic) {
        let mut max_rel = 0.0f64;
        let mut max_abs = 0.0f64;
        for j in 0..store.value(id).len() {
            let orig = store.value(id).data()[j];
            store.value_mut(id).data_mut()[j] = orig + h;
            let up = eval_loss(store, &loss_fn);
            store.value_mut(id).data_mut()[j] = orig - h;
            let down = eval_loss(store, &loss_fn);
            store.value_mut(id).data_mut()[j] = orig;
            let numeric = (up? - down?) / (2.0 * step);
            let a = grad.data()[j].as_f64();
            max_rel = max_rel.max(relative_error(a, numeric));
            max_abs = max_abs.max((a - numeric).abs());
        }
        params.push(ParamCheck {
            name: store.name(id).to_string(),
            max_rel_error: max_rel,
            max_abs_error: max_abs,
        });
    }
    let max_rel_error = params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        params,
        max_rel_error,
        tolerance,
    })
}
