use rand::Rng;

use super::variant::AggregateMode;
use crate::diff::{lstm_step, LstmCellParams, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reference-set aggregator: recurrent encoder/decoder over the pair
/// embeddings (width `2d`), a linear decoder readout and the readout
/// attention `u_R: [d]`, `W_R: [d, 2d]`, `b_R: [d]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregatorParams {
    pub dim: usize,
    pub encoder: LstmCellParams,
    pub decoder: LstmCellParams,
    pub readout_w: ParamId,
    pub readout_b: ParamId,
    pub att_u: ParamId,
    pub att_w: ParamId,
    pub att_b: ParamId,
}

impl AggregatorParams {
    pub fn init<S: Scalar, R: Rng>(store: &mut ParamStore<S>, dim: usize, rng: &mut R) -> Result<Self> {
        let w = 2 * dim;
        let encoder = LstmCellParams::init(store, "aggregator.encoder", w, w, w, rng)?;
        let decoder = LstmCellParams::init(store, "aggregator.decoder", w, w, w, rng)?;
        let readout_w = store.glorot("aggregator.readout.w", w, w, rng)?;
        let readout_b = store.zeros("aggregator.readout.b", &[w])?;
        let att_w = store.glorot("aggregator.attention.w", dim, w, rng)?;
        let att_u = store.uniform("aggregator.attention.u", dim, (6.0 / (dim + 1) as f64).sqrt(), rng)?;
        let att_b = store.zeros("aggregator.attention.b", &[dim])?;
        Ok(Self {
            dim,
            encoder,
            decoder,
            readout_w,
            readout_b,
            att_u,
            att_w,
            att_b,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Aggregate {
    /// `f_ε(R_r)`, width `2d`.
    pub embedding: Var,
    /// `d_1..d_K`, aligned with the input order; empty without a decoder.
    pub decoder_outputs: Vec<Var>,
    /// Readout weights `β` when attention is used.
    pub weights: Option<Var>,
}

/// Aggregates `K ≥ 1` pair embeddings into the reference embedding.
pub fn aggregate_reference_set<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    params: &AggregatorParams,
    pairs: &[Var],
    mode: AggregateMode,
) -> Result<Aggregate> {
    if pairs.is_empty() {
        return Err(Error::Empty("aggregate_reference_set"));
    }
    let width = 2 * params.dim;
    for &p in pairs {
        if tape.value(p).len() != width {
            return Err(Error::shape(
                "aggregate_reference_set",
                format!("pair embedding of length {}, expected {width}", tape.value(p).len()),
            ));
        }
    }
    match mode {
        AggregateMode::MeanPool | AggregateMode::MeanPoolPairs => Ok(Aggregate {
            embedding: tape.mean(pairs)?,
            decoder_outputs: Vec::new(),
            weights: None,
        }),
        AggregateMode::MaxPool => Ok(Aggregate {
            embedding: tape.max(pairs)?,
            decoder_outputs: Vec::new(),
            weights: None,
        }),
        AggregateMode::RecurrentAutoencoder | AggregateMode::NoAttention | AggregateMode::EncoderOnly => {
            let zeros = tape.constant(Tensor::zeros(&[width]));
            let (mut h, mut c) = (zeros, zeros);
            let mut states = Vec::with_capacity(pairs.len());
            for &e in pairs {
                (h, c) = lstm_step(tape, store, &params.encoder, e, h, c)?;
                states.push(h);
            }

            let mut decoder_outputs = Vec::new();
            if mode.has_decoder() {
                let rw = tape.param(store, params.readout_w);
                let rb = tape.param(store, params.readout_b);
                let mut outs = Vec::with_capacity(pairs.len());
                for _ in 0..pairs.len() {
                    (h, c) = lstm_step(tape, store, &params.decoder, zeros, h, c)?;
                    let lin = tape.matvec(rw, h)?;
                    outs.push(tape.add(lin, rb)?);
                }
                // produced as d_K, ..., d_1
                outs.reverse();
                decoder_outputs = outs;
            }

            let residual = states
                .iter()
                .zip(pairs)
                .map(|(&m, &e)| tape.add(m, e))
                .collect::<Result<Vec<_>>>()?;
            let (embedding, weights) = if mode == AggregateMode::NoAttention {
                (tape.mean(&residual)?, None)
            } else {
                let rows = tape.rows(&residual)?;
                let w = tape.param(store, params.att_w);
                let b = tape.param(store, params.att_b);
                let u = tape.param(store, params.att_u);
                let proj = tape.matmul_nt(rows, w)?;
                let proj = tape.add_rows(proj, b)?;
                let logits = tape.matvec(proj, u)?;
                let beta = tape.softmax(logits)?;
                (tape.matvec_t(rows, beta)?, Some(beta))
            };
            Ok(Aggregate {
                embedding,
                decoder_outputs,
                weights,
            })
        }
    }
}
