use rand::Rng;

use crate::diff::{lstm_step, LstmCellParams, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Matching processor: an LSTM with `2d` input, `4d` recurrent input
/// (`g_{t-1} ⊕ f_ε`) and `2d` state, unrolled `steps` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatcherParams {
    pub cell: LstmCellParams,
    pub steps: usize,
}

impl MatcherParams {
    pub fn init<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        dim: usize,
        steps: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let cell = LstmCellParams::init(store, "matcher", 2 * dim, 4 * dim, 2 * dim, rng)?;
        Ok(Self { cell, steps })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Matched {
    pub score: Var,
    /// Refined query embedding `g_T`.
    pub refined: Var,
}

/// `g_t = RNN_match(E, g_{t-1} ⊕ f_ε, c_{t-1}) + E`, score `⟨g_T, f_ε⟩`.
pub fn match_score<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    params: &MatcherParams,
    query: Var,
    reference: Var,
) -> Result<Matched> {
    let width = params.cell.hidden_dim;
    let (q, r) = (tape.value(query).len(), tape.value(reference).len());
    if q != width || r != width {
        return Err(Error::shape(
            "match_score",
            format!("query {q} and reference {r}, expected {width}"),
        ));
    }
    let zeros = tape.constant(Tensor::zeros(&[width]));
    let (mut g, mut c) = (query, zeros);
    if params.steps > 0 {
        g = zeros;
        for _ in 0..params.steps {
            let hidden = tape.concat(&[g, reference])?;
            let (out, cell) = lstm_step(tape, store, &params.cell, query, hidden, c)?;
            c = cell;
            g = tape.add(out, query)?;
        }
    }
    let score = tape.dot(g, reference)?;
    Ok(Matched { score, refined: g })
}
