use rand::Rng;

use super::variant::NeighborMode;
use crate::diff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::kg::{EmbeddingTable, Neighbor};
use crate::scalar::Scalar;

/// Neighbor-attention parameters `u_rt: [d]`, `W_rt: [d, 2d]`, `b_rt: [d]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderParams {
    pub dim: usize,
    pub u: ParamId,
    pub w: ParamId,
    pub b: ParamId,
}

impl EncoderParams {
    pub fn init<S: Scalar, R: Rng>(store: &mut ParamStore<S>, dim: usize, rng: &mut R) -> Result<Self> {
        let w = store.glorot("encoder.w", dim, 2 * dim, rng)?;
        let u = store.uniform("encoder.u", dim, (6.0 / (dim + 1) as f64).sqrt(), rng)?;
        let b = store.zeros("encoder.b", &[dim])?;
        Ok(Self { dim, u, w, b })
    }

    pub fn ids(&self) -> [ParamId; 3] {
        [self.u, self.w, self.b]
    }
}

/// Result of encoding one entity.
#[derive(Debug, Clone, Copy)]
pub struct Encoded {
    pub embedding: Var,
    /// Attention weights over the neighbors (absent in mean-pool mode).
    pub weights: Option<Var>,
}

/// `f_θ(h) = tanh(Σ_i α_i e_{t_i})` with
/// `α = softmax_i(u_rtᵀ (W_rt (e_{r_i} ⊕ e_{t_i}) + b_rt))`.
///
/// The self-loop pseudo-relation embeds as the zero vector; it only ever
/// appears as the sole neighbor, where its weight is 1 regardless.
pub fn encode_entity<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    params: &EncoderParams,
    neighbors: &[Neighbor],
    table: &EmbeddingTable<S>,
    mode: NeighborMode,
) -> Result<Encoded> {
    if neighbors.is_empty() {
        return Err(Error::Empty("encode_entity"));
    }
    let d = params.dim;
    if table.dim() != d {
        return Err(Error::shape(
            "encode_entity",
            format!("embedding dim {} vs encoder dim {d}", table.dim()),
        ));
    }
    let n = neighbors.len();
    let mut tails = Vec::with_capacity(n * d);
    for &(_, t) in neighbors {
        tails.extend_from_slice(table.entity(t)?);
    }
    let tails = tape.constant(Tensor::matrix(n, d, tails)?);

    let (weights, alpha) = match mode {
        NeighborMode::MeanPool => {
            let uniform = S::one() / S::from_usize(n).expect("count fits scalar");
            (tape.constant_vec(vec![uniform; n]), None)
        }
        NeighborMode::Attention => {
            let mut pairs = Vec::with_capacity(n * 2 * d);
            for &(r, t) in neighbors {
                if r.is_self() {
                    pairs.extend(std::iter::repeat(S::zero()).take(d));
                } else {
                    pairs.extend_from_slice(table.relation(r)?);
                }
                pairs.extend_from_slice(table.entity(t)?);
            }
            let pairs = tape.constant(Tensor::matrix(n, 2 * d, pairs)?);
            let w = tape.param(store, params.w);
            let b = tape.param(store, params.b);
            let u = tape.param(store, params.u);
            let proj = tape.matmul_nt(pairs, w)?;
            let proj = tape.add_rows(proj, b)?;
            let logits = tape.matvec(proj, u)?;
            let alpha = tape.softmax(logits)?;
            (alpha, Some(alpha))
        }
    };
    let pooled = tape.matvec_t(tails, weights)?;
    Ok(Encoded {
        embedding: tape.tanh(pooled),
        weights: alpha,
    })
}
