use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// LSTM cell with stacked gate weights in `i, f, g, o` order.
///
/// `hidden_in_dim` is the width of the recurrent input; it equals
/// `hidden_dim` for a standard cell and is wider in the matcher, which feeds
/// a concatenated state back in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmCellParams {
    pub input_dim: usize,
    pub hidden_in_dim: usize,
    pub hidden_dim: usize,
    /// `[4h, input_dim]`
    pub w_input: ParamId,
    /// `[4h, hidden_in_dim]`
    pub w_hidden: ParamId,
    /// `[4h]`
    pub bias: ParamId,
}

impl LstmCellParams {
    /// Glorot weights, zero biases except the forget gate at 1.0.
    pub fn init<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        prefix: &str,
        input_dim: usize,
        hidden_in_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let gates = 4 * hidden_dim;
        let w_input = store.glorot(format!("{prefix}.w_input"), gates, input_dim, rng)?;
        let w_hidden = store.glorot(format!("{prefix}.w_hidden"), gates, hidden_in_dim, rng)?;
        let bias = store.zeros(format!("{prefix}.bias"), &[gates])?;
        for b in &mut store.value_mut(bias).data_mut()[hidden_dim..2 * hidden_dim] {
            *b = S::one();
        }
        Ok(Self {
            input_dim,
            hidden_in_dim,
            hidden_dim,
            w_input,
            w_hidden,
            bias,
        })
    }

    pub fn ids(&self) -> [ParamId; 3] {
        [self.w_input, self.w_hidden, self.bias]
    }
}

/// One recurrence step, returning `(h, c)`.
pub fn lstm_step<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    cell: &LstmCellParams,
    input: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var)> {
    let h = cell.hidden_dim;
    let check = |what: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(Error::shape("lstm_step", format!("{what} has length {got}, expected {want}")))
        }
    };
    check("input", tape.value(input).len(), cell.input_dim)?;
    check("h_prev", tape.value(h_prev).len(), cell.hidden_in_dim)?;
    check("c_prev", tape.value(c_prev).len(), h)?;

    let wx = tape.param(store, cell.w_input);
    let wh = tape.param(store, cell.w_hidden);
    let b = tape.param(store, cell.bias);
    let zx = tape.matvec(wx, input)?;
    let zh = tape.matvec(wh, h_prev)?;
    let z = tape.add(zx, zh)?;
    let z = tape.add(z, b)?;

    let i_pre = tape.slice(z, 0, h)?;
    let f_pre = tape.slice(z, h, h)?;
    let g_pre = tape.slice(z, 2 * h, h)?;
    let o_pre = tape.slice(z, 3 * h, h)?;
    let i = tape.sigmoid(i_pre);
    let f = tape.sigmoid(f_pre);
    let g = tape.tanh(g_pre);
    let o = tape.sigmoid(o_pre);

    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let c_act = tape.tanh(c);
    let h_new = tape.mul(o, c_act)?;
    Ok((h_new, c))
}
