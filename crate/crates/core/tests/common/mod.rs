//! Straight-loop reference implementations shared by the integration tests.
//! They read parameters by name and recompute every quantity with explicit
//! index arithmetic, independent of the recording machinery.
#![allow(dead_code)]

use fsrl_core::diff::ParamStore;
use fsrl_core::kg::{EmbeddingTable, EntityId, KnowledgeGraph, RelationId, Triple, Vocab};
use fsrl_core::model::{AggregateMode, Fsrl, NeighborMode, ScoreMode};
use rand::Rng;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn param(store: &ParamStore<f64>, name: &str) -> Vec<f64> {
    let id = store.id(name).unwrap_or_else(|| panic!("no parameter {name}"));
    store.value(id).data().to_vec()
}

/// `y = W x` for row-major `W` with `rows` rows.
pub fn matvec(w: &[f64], rows: usize, x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    assert_eq!(w.len(), rows * cols);
    (0..rows)
        .map(|i| {
            let mut s = 0.0;
            for j in 0..cols {
                s += w[i * cols + j] * x[j];
            }
            s
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|&v| v / s).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub struct Cell {
    pub wx: Vec<f64>,
    pub wh: Vec<f64>,
    pub b: Vec<f64>,
    pub hidden: usize,
}

impl Cell {
    pub fn read(store: &ParamStore<f64>, prefix: &str, hidden: usize) -> Self {
        Cell {
            wx: param(store, &format!("{prefix}.w_input")),
            wh: param(store, &format!("{prefix}.w_hidden")),
            b: param(store, &format!("{prefix}.bias")),
            hidden,
        }
    }

    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.hidden;
        let zx = matvec(&self.wx, 4 * n, x);
        let zh = matvec(&self.wh, 4 * n, h);
        let mut h_new = vec![0.0; n];
        let mut c_new = vec![0.0; n];
        for k in 0..n {
            let z = |g: usize| zx[g * n + k] + zh[g * n + k] + self.b[g * n + k];
            let i = sigmoid(z(0));
            let f = sigmoid(z(1));
            let g = z(2).tanh();
            let o = sigmoid(z(3));
            c_new[k] = f * c[k] + i * g;
            h_new[k] = o * c_new[k].tanh();
        }
        (h_new, c_new)
    }
}

/// Attention-pooled neighbor encoding; `neighbors` holds `(e_r, e_t)`.
pub fn encode(
    store: &ParamStore<f64>,
    d: usize,
    neighbors: &[(Vec<f64>, Vec<f64>)],
    mode: NeighborMode,
) -> (Vec<f64>, Vec<f64>) {
    let u = param(store, "encoder.u");
    let w = param(store, "encoder.w");
    let b = param(store, "encoder.b");
    let alpha = match mode {
        NeighborMode::MeanPool => vec![1.0 / neighbors.len() as f64; neighbors.len()],
        NeighborMode::Attention => {
            let logits: Vec<f64> = neighbors
                .iter()
                .map(|(er, et)| {
                    let mut x = er.clone();
                    x.extend_from_slice(et);
                    let mut s = 0.0;
                    for i in 0..d {
                        let mut p = b[i];
                        for j in 0..2 * d {
                            p += w[i * 2 * d + j] * x[j];
                        }
                        s += u[i] * p;
                    }
                    s
                })
                .collect();
            softmax(&logits)
        }
    };
    let mut out = vec![0.0; d];
    for (a, (_, et)) in alpha.iter().zip(neighbors) {
        for k in 0..d {
            out[k] += a * et[k];
        }
    }
    (out.iter().map(|v| v.tanh()).collect(), alpha)
}

pub struct AggregateOut {
    pub embedding: Vec<f64>,
    pub decoder: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
}

pub fn aggregate(store: &ParamStore<f64>, d: usize, pairs: &[Vec<f64>], mode: AggregateMode) -> AggregateOut {
    let w2 = 2 * d;
    let k = pairs.len();
    let mean = |xs: &[Vec<f64>]| -> Vec<f64> {
        let mut m = vec![0.0; w2];
        for x in xs {
            for j in 0..w2 {
                m[j] += x[j];
            }
        }
        m.iter().map(|v| v / xs.len() as f64).collect()
    };
    match mode {
        AggregateMode::MeanPool | AggregateMode::MeanPoolPairs => AggregateOut {
            embedding: mean(pairs),
            decoder: vec![],
            beta: vec![],
        },
        AggregateMode::MaxPool => {
            let mut m = pairs[0].clone();
            for x in &pairs[1..] {
                for j in 0..w2 {
                    if x[j] > m[j] {
                        m[j] = x[j];
                    }
                }
            }
            AggregateOut {
                embedding: m,
                decoder: vec![],
                beta: vec![],
            }
        }
        _ => {
            let enc = Cell::read(store, "aggregator.encoder", w2);
            let dec = Cell::read(store, "aggregator.decoder", w2);
            let (mut h, mut c) = (vec![0.0; w2], vec![0.0; w2]);
            let mut states = vec![];
            for e in pairs {
                (h, c) = enc.step(e, &h, &c);
                states.push(h.clone());
            }
            let mut decoder = vec![];
            if mode.has_decoder() {
                let rw = param(store, "aggregator.readout.w");
                let rb = param(store, "aggregator.readout.b");
                let zero = vec![0.0; w2];
                let mut rev = vec![];
                for _ in 0..k {
                    (h, c) = dec.step(&zero, &h, &c);
                    rev.push(add(&matvec(&rw, w2, &h), &rb));
                }
                rev.reverse();
                decoder = rev;
            }
            let resid: Vec<Vec<f64>> = states.iter().zip(pairs).map(|(m, e)| add(m, e)).collect();
            let beta = if mode == AggregateMode::NoAttention {
                vec![1.0 / k as f64; k]
            } else {
                let u = param(store, "aggregator.attention.u");
                let w = param(store, "aggregator.attention.w");
                let b = param(store, "aggregator.attention.b");
                let logits: Vec<f64> = resid
                    .iter()
                    .map(|m| dot(&u, &add(&matvec(&w, d, m), &b)))
                    .collect();
                softmax(&logits)
            };
            let mut f = vec![0.0; w2];
            for (bk, m) in beta.iter().zip(&resid) {
                for j in 0..w2 {
                    f[j] += bk * m[j];
                }
            }
            AggregateOut {
                embedding: f,
                decoder,
                beta,
            }
        }
    }
}

pub fn match_oracle(store: &ParamStore<f64>, d: usize, steps: usize, q: &[f64], r: &[f64]) -> (f64, Vec<f64>) {
    let cell = Cell::read(store, "matcher", 2 * d);
    let mut g = q.to_vec();
    let mut c = vec![0.0; 2 * d];
    if steps > 0 {
        g = vec![0.0; 2 * d];
        for _ in 0..steps {
            let mut hidden = g.clone();
            hidden.extend_from_slice(r);
            let (out, cn) = cell.step(q, &hidden, &c);
            c = cn;
            g = add(&out, q);
        }
    }
    (dot(&g, r), g)
}

/// Canonical neighbor list recomputed from the raw triples.
pub fn canonical_neighbors(graph: &KnowledgeGraph, e: EntityId, max: usize) -> Vec<(RelationId, EntityId)> {
    let mut ns: Vec<_> = graph
        .triples()
        .iter()
        .filter(|t| t.head == e)
        .map(|t| (t.relation, t.tail))
        .collect();
    ns.sort();
    ns.dedup();
    ns.truncate(max);
    if ns.is_empty() {
        ns.push((fsrl_core::kg::SELF_RELATION, e));
    }
    ns
}

pub fn encode_entity_oracle(model: &Fsrl<f64>, graph: &KnowledgeGraph, table: &EmbeddingTable<f64>, e: EntityId) -> Vec<f64> {
    let d = model.config.dim;
    let ns: Vec<_> = canonical_neighbors(graph, e, model.config.max_neighbors)
        .into_iter()
        .map(|(r, t)| {
            let er = if r.is_self() {
                vec![0.0; d]
            } else {
                table.relation(r).unwrap().to_vec()
            };
            (er, table.entity(t).unwrap().to_vec())
        })
        .collect();
    encode(&model.store, d, &ns, model.config.variant.neighbor_mode).0
}

pub fn pair_oracle(model: &Fsrl<f64>, graph: &KnowledgeGraph, table: &EmbeddingTable<f64>, h: EntityId, t: EntityId) -> Vec<f64> {
    let mut v = encode_entity_oracle(model, graph, table, h);
    v.extend(encode_entity_oracle(model, graph, table, t));
    v
}

pub fn score_oracle(
    model: &Fsrl<f64>,
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<f64>,
    query: (EntityId, EntityId),
    refs: &[(EntityId, EntityId)],
) -> f64 {
    let d = model.config.dim;
    let v = model.config.variant;
    let pairs: Vec<_> = refs.iter().map(|&(h, t)| pair_oracle(model, graph, table, h, t)).collect();
    let q = pair_oracle(model, graph, table, query.0, query.1);
    let agg = aggregate(&model.store, d, &pairs, v.aggregate_mode);
    match v.score_mode {
        ScoreMode::LstmMatch => match_oracle(&model.store, d, model.config.match_steps, &q, &agg.embedding).0,
        ScoreMode::InnerProduct => dot(&q, &agg.embedding),
        ScoreMode::MaxOverReferences => pairs
            .iter()
            .map(|p| match_oracle(&model.store, d, model.config.match_steps, &q, p).0)
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Overwrites every parameter with uniform noise in `[-scale, scale]`.
pub fn randomize<R: Rng>(store: &mut ParamStore<f64>, rng: &mut R, scale: f64) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        for v in store.value_mut(id).data_mut() {
            *v = rng.gen_range(-scale..scale);
        }
    }
}

/// Random graph over `n` entities and `m` relations with the given triple
/// count, plus a random embedding table.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, m: usize, triples: usize, d: usize) -> (KnowledgeGraph, EmbeddingTable<f64>) {
    let mut ents = Vocab::default();
    let mut rels = Vocab::default();
    for i in 0..n {
        ents.intern(&format!("e{i}"));
    }
    for j in 0..m {
        rels.intern(&format!("r{j}"));
    }
    let ts: Vec<Triple> = (0..triples)
        .map(|_| Triple {
            head: EntityId(rng.gen_range(0..n as u32)),
            relation: RelationId(rng.gen_range(0..m as u32)),
            tail: EntityId(rng.gen_range(0..n as u32)),
        })
        .collect();
    let graph = KnowledgeGraph::new(ents, rels, ts);
    let table = random_table(rng, n, m, d);
    (graph, table)
}

pub fn random_table<R: Rng>(rng: &mut R, n: usize, m: usize, d: usize) -> EmbeddingTable<f64> {
    let mut vecs = |k: usize| -> Vec<Vec<f64>> {
        (0..k).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    };
    let entities = vecs(n);
    let relations = vecs(m);
    EmbeddingTable::new(d, entities, relations).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `Σ max(0, ξ + s⁻ − s⁺)` written as a plain loop.
pub fn ranking_loss_oracle(pos: &[f64], neg: &[f64], margin: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..pos.len() {
        let v = margin + neg[i] - pos[i];
        if v > 0.0 {
            total += v;
        }
    }
    total
}

/// `Σ_k ‖d_k − E_k‖²`.
pub fn reconstruction_oracle(decoded: &[Vec<f64>], pairs: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for k in 0..pairs.len() {
        for j in 0..pairs[k].len() {
            let diff = decoded[k][j] - pairs[k][j];
            total += diff * diff;
        }
    }
    total
}

/// Rank by sorting: candidates ordered by descending score, the truth
/// placed after every candidate it ties with.
pub fn sort_rank(scores: &[f64], truth: usize) -> usize {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then_with(|| (a == truth).cmp(&(b == truth)))
    });
    order.iter().position(|&i| i == truth).unwrap() + 1
}

/// `(hits@1, hits@5, hits@10, mrr)` of a list of ranks.
pub fn metrics_oracle(ranks: &[usize]) -> (f64, f64, f64, f64) {
    let n = ranks.len() as f64;
    let (mut h1, mut h5, mut h10, mut rr) = (0.0, 0.0, 0.0, 0.0);
    for &r in ranks {
        if r <= 1 {
            h1 += 1.0;
        }
        if r <= 5 {
            h5 += 1.0;
        }
        if r <= 10 {
            h10 += 1.0;
        }
        rr += 1.0 / r as f64;
    }
    (h1 / n, h5 / n, h10 / n, rr / n)
}
