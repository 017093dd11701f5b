//! Reverse-mode recording over dense tensors.
//!
//! A [`Tape`] is rebuilt for every forward pass. Each primitive records its
//! output value and the inputs it needs; [`Tape::backward`] walks the record
//! in reverse and accumulates gradients into the [`ParamStore`] the
//! parameter leaves were read from.

use std::collections::HashMap;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Node handle on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    Param(ParamId),
    /// `W x` with `W: [m, n]`, `x: [n]`.
    MatVec(Var, Var),
    /// `Aᵀ x` with `A: [n, m]`, `x: [n]`.
    MatVecT(Var, Var),
    /// `A Bᵀ` with `A: [n, k]`, `B: [m, k]`.
    MatMulNt(Var, Var),
    /// Adds vector `b: [m]` to every row of `[n, m]`.
    AddRows(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    AddConst(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    /// Stacks equal-length vectors as rows.
    Rows(Vec<Var>),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Softmax(Var),
    Dot(Var, Var),
    Sum(Var),
    SquaredL2(Var),
    /// `Σ_i w_i v_i` with `w: [n]` and `n` vectors.
    WeightedSum(Var, Vec<Var>),
    Mean(Vec<Var>),
    /// Coordinatewise max; records the winning input per coordinate.
    Max(Vec<Var>, Vec<usize>),
}

/// Computation record for one forward pass.
#[derive(Debug, Clone)]
pub struct Tape<S> {
    values: Vec<Tensor<S>>,
    ops: Vec<Op<S>>,
    params: HashMap<ParamId, Var>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn same_shape<S: Scalar>(op: &'static str, a: &Tensor<S>, b: &Tensor<S>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            ops: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.values[v.0]
    }

    pub fn scalar_value(&self, v: Var) -> S {
        self.values[v.0].item()
    }

    /// Records a constant (no gradient flows into it).
    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn constant_vec(&mut self, data: Vec<S>) -> Var {
        self.constant(Tensor::vector(data))
    }

    /// Reads a parameter; repeated reads of the same id share one node.
    pub fn param(&mut self, store: &ParamStore<S>, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (wt, xt) = (&self.values[w.0], &self.values[x.0]);
        let (m, n) = wt
            .dims2()
            .ok_or_else(|| Error::shape("matvec", "left operand is not a matrix"))?;
        if !xt.is_vector() || xt.len() != n {
            return Err(Error::shape(
                "matvec",
                format!("[{m}, {n}] times {:?}", xt.shape()),
            ));
        }
        let (wd, xd) = (wt.data(), xt.data());
        let out = (0..m)
            .map(|i| {
                wd[i * n..(i + 1) * n]
                    .iter()
                    .zip(xd)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec(w, x)))
    }

    pub fn matvec_t(&mut self, a: Var, x: Var) -> Result<Var> {
        let (at, xt) = (&self.values[a.0], &self.values[x.0]);
        let (n, m) = at
            .dims2()
            .ok_or_else(|| Error::shape("matvec_t", "left operand is not a matrix"))?;
        if !xt.is_vector() || xt.len() != n {
            return Err(Error::shape(
                "matvec_t",
                format!("[{n}, {m}]ᵀ times {:?}", xt.shape()),
            ));
        }
        let mut out = vec![S::zero(); m];
        for (row, &xi) in at.data().chunks(m).zip(xt.data()) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o = *o + a * xi;
            }
        }
        Ok(self.push(Tensor::vector(out), Op::MatVecT(a, x)))
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (at, bt) = (&self.values[a.0], &self.values[b.0]);
        let (Some((n, k)), Some((m, k2))) = (at.dims2(), bt.dims2()) else {
            return Err(Error::shape("matmul", "operands must be matrices"));
        };
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{n}, {k}] x [{m}, {k2}]ᵀ")));
        }
        let (ad, bd) = (at.data(), bt.data());
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let ar = &ad[i * k..(i + 1) * k];
            for j in 0..m {
                let br = &bd[j * k..(j + 1) * k];
                out.push(ar.iter().zip(br).map(|(&x, &y)| x * y).sum());
            }
        }
        let t = Tensor::matrix(n, m, out)?;
        Ok(self.push(t, Op::MatMulNt(a, b)))
    }

    pub fn add_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (at, bt) = (&self.values[a.0], &self.values[b.0]);
        let (n, m) = at
            .dims2()
            .ok_or_else(|| Error::shape("add_rows", "left operand is not a matrix"))?;
        if !bt.is_vector() || bt.len() != m {
            return Err(Error::shape("add_rows", format!("[{n}, {m}] + {:?}", bt.shape())));
        }
        let out = at
            .data()
            .chunks(m)
            .flat_map(|row| row.iter().zip(bt.data()).map(|(&x, &y)| x + y))
            .collect();
        let t = Tensor::matrix(n, m, out)?;
        Ok(self.push(t, Op::AddRows(a, b)))
    }

    fn zip_with(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(S, S) -> S,
        rec: Op<S>,
    ) -> Result<Var> {
        let (at, bt) = (&self.values[a.0], &self.values[b.0]);
        same_shape(op, at, bt)?;
        let data = at.data().iter().zip(bt.data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(at.shape().to_vec(), data)?;
        Ok(self.push(t, rec))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn map(&mut self, a: Var, f: impl Fn(S) -> S, rec: Op<S>) -> Var {
        let at = &self.values[a.0];
        let data = at.data().iter().map(|&x| f(x)).collect();
        let t = Tensor::new(at.shape().to_vec(), data).expect("shape preserved");
        self.push(t, rec)
    }

    pub fn scale(&mut self, a: Var, c: S) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn add_const(&mut self, a: Var, c: S) -> Var {
        self.map(a, |x| x + c, Op::AddConst(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, S::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(S::zero()), Op::Relu(a))
    }

    /// Concatenates vectors (`⊕`).
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Empty("concat"));
        }
        let mut data = Vec::new();
        for &p in parts {
            let t = &self.values[p.0];
            if !t.is_vector() {
                return Err(Error::shape("concat", format!("non-vector {:?}", t.shape())));
            }
            data.extend_from_slice(t.data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.to_vec())))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = &self.values[a.0];
        if !t.is_vector() || len == 0 || start + len > t.len() {
            return Err(Error::shape(
                "slice",
                format!("[{start}, {}) of {:?}", start + len, t.shape()),
            ));
        }
        let data = t.data()[start..start + len].to_vec();
        Ok(self.push(Tensor::vector(data), Op::Slice(a, start)))
    }

    /// Stacks equal-length vectors into a `[n, len]` matrix.
    pub fn rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(Error::Empty("rows"))?;
        let width = self.values[first.0].len();
        let mut data = Vec::with_capacity(width * parts.len());
        for &p in parts {
            let t = &self.values[p.0];
            if !t.is_vector() || t.len() != width {
                return Err(Error::shape("rows", format!("row {:?}, expected [{width}]", t.shape())));
            }
            data.extend_from_slice(t.data());
        }
        let t = Tensor::matrix(parts.len(), width, data)?;
        Ok(self.push(t, Op::Rows(parts.to_vec())))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = &self.values[a.0];
        if !t.is_vector() {
            return Err(Error::shape("softmax", format!("non-vector {:?}", t.shape())));
        }
        let max = t.data().iter().copied().fold(S::neg_infinity(), S::max);
        let exps: Vec<S> = t.data().iter().map(|&x| (x - max).exp()).collect();
        let total: S = exps.iter().copied().sum();
        let data = exps.into_iter().map(|e| e / total).collect();
        Ok(self.push(Tensor::vector(data), Op::Softmax(a)))
    }

    /// Inner product `⟨a, b⟩` as a scalar node.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (at, bt) = (&self.values[a.0], &self.values[b.0]);
        if !at.is_vector() || at.shape() != bt.shape() {
            return Err(Error::shape("inner_product", format!("{:?} vs {:?}", at.shape(), bt.shape())));
        }
        let s = at.data().iter().zip(bt.data()).map(|(&x, &y)| x * y).sum();
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.values[a.0].data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn squared_l2(&mut self, a: Var) -> Var {
        let s = self.values[a.0].data().iter().map(|&x| x * x).sum();
        self.push(Tensor::scalar(s), Op::SquaredL2(a))
    }

    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Result<Var> {
        let wt = &self.values[weights.0];
        if !wt.is_vector() || wt.len() != items.len() {
            return Err(Error::LengthMismatch {
                op: "weighted_sum",
                left: wt.len(),
                right: items.len(),
            });
        }
        let width = self.values[items[0].0].len();
        let mut out = vec![S::zero(); width];
        for (&w, &it) in wt.data().iter().zip(items) {
            let t = &self.values[it.0];
            if !t.is_vector() || t.len() != width {
                return Err(Error::shape("weighted_sum", format!("item {:?}", t.shape())));
            }
            for (o, &x) in out.iter_mut().zip(t.data()) {
                *o = *o + w * x;
            }
        }
        Ok(self.push(Tensor::vector(out), Op::WeightedSum(weights, items.to_vec())))
    }

    /// Coordinatewise mean of equal-shape tensors.
    pub fn mean(&mut self, items: &[Var]) -> Result<Var> {
        let first = items.first().ok_or(Error::Empty("mean"))?;
        let shape = self.values[first.0].shape().to_vec();
        let mut out = vec![S::zero(); self.values[first.0].len()];
        for &it in items {
            let t = &self.values[it.0];
            if t.shape() != shape.as_slice() {
                return Err(Error::shape("mean", format!("{:?} vs {shape:?}", t.shape())));
            }
            for (o, &x) in out.iter_mut().zip(t.data()) {
                *o = *o + x;
            }
        }
        let n = S::from_usize(items.len()).expect("count fits scalar");
        out.iter_mut().for_each(|o| *o = *o / n);
        let t = Tensor::new(shape, out)?;
        Ok(self.push(t, Op::Mean(items.to_vec())))
    }

    /// Coordinatewise max of equal-shape tensors; first index wins ties.
    pub fn max(&mut self, items: &[Var]) -> Result<Var> {
        let first = items.first().ok_or(Error::Empty("max"))?;
        let shape = self.values[first.0].shape().to_vec();
        let mut out = self.values[first.0].data().to_vec();
        let mut arg = vec![0usize; out.len()];
        for (k, &it) in items.iter().enumerate().skip(1) {
            let t = &self.values[it.0];
            if t.shape() != shape.as_slice() {
                return Err(Error::shape("max", format!("{:?} vs {shape:?}", t.shape())));
            }
            for (j, &x) in t.data().iter().enumerate() {
                if x > out[j] {
                    out[j] = x;
                    arg[j] = k;
                }
            }
        }
        let t = Tensor::new(shape, out)?;
        Ok(self.push(t, Op::Max(items.to_vec(), arg)))
    }

    /// Propagates `∂loss/∂·` back through the record and writes parameter
    /// gradients into `store`. Gradients are zeroed first unless
    /// `accumulate` is set.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<S>, accumulate: bool) -> Result<()> {
        let lt = &self.values[loss.0];
        if lt.len() != 1 {
            return Err(Error::NonScalar(lt.shape().to_vec()));
        }
        if !accumulate {
            store.zero_grads();
        }
        let mut grads: Vec<Option<Vec<S>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![S::one()]);

        fn acc<S: Scalar>(grads: &mut [Option<Vec<S>>], v: Var, len: usize) -> &mut Vec<S> {
            grads[v.0].get_or_insert_with(|| vec![S::zero(); len])
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let out = &self.values[i];
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Param(id) => {
                    let dst = store.grad_mut(*id).data_mut();
                    for (d, &x) in dst.iter_mut().zip(&g) {
                        *d = *d + x;
                    }
                }
                Op::MatVec(w, x) => {
                    let (wt, xt) = (&self.values[w.0], &self.values[x.0]);
                    let (m, n) = wt.dims2().expect("checked in forward");
                    {
                        let gw = acc(&mut grads, *w, m * n);
                        for r in 0..m {
                            let gr = g[r];
                            for (c, &xv) in xt.data().iter().enumerate() {
                                gw[r * n + c] = gw[r * n + c] + gr * xv;
                            }
                        }
                    }
                    let gx = acc(&mut grads, *x, n);
                    for r in 0..m {
                        let gr = g[r];
                        for (c, &wv) in wt.data()[r * n..(r + 1) * n].iter().enumerate() {
                            gx[c] = gx[c] + gr * wv;
                        }
                    }
                }
                Op::MatVecT(a, x) => {
                    let (at, xt) = (&self.values[a.0], &self.values[x.0]);
                    let (n, m) = at.dims2().expect("checked in forward");
                    {
                        let ga = acc(&mut grads, *a, n * m);
                        for (r, &xv) in xt.data().iter().enumerate() {
                            for c in 0..m {
                                ga[r * m + c] = ga[r * m + c] + xv * g[c];
                            }
                        }
                    }
                    let gx = acc(&mut grads, *x, n);
                    for (r, row) in at.data().chunks(m).enumerate() {
                        gx[r] = gx[r] + row.iter().zip(&g).map(|(&a, &b)| a * b).sum::<S>();
                    }
                }
                Op::MatMulNt(a, b) => {
                    let (at, bt) = (&self.values[a.0], &self.values[b.0]);
                    let (n, k) = at.dims2().expect("checked");
                    let (m, _) = bt.dims2().expect("checked");
                    {
                        let ga = acc(&mut grads, *a, n * k);
                        for i2 in 0..n {
                            for j in 0..m {
                                let gij = g[i2 * m + j];
                                for l in 0..k {
                                    ga[i2 * k + l] = ga[i2 * k + l] + gij * bt.data()[j * k + l];
                                }
                            }
                        }
                    }
                    let gb = acc(&mut grads, *b, m * k);
                    for i2 in 0..n {
                        for j in 0..m {
                            let gij = g[i2 * m + j];
                            for l in 0..k {
                                gb[j * k + l] = gb[j * k + l] + gij * at.data()[i2 * k + l];
                            }
                        }
                    }
                }
                Op::AddRows(a, b) => {
                    let m = self.values[b.0].len();
                    {
                        let ga = acc(&mut grads, *a, g.len());
                        for (d, &x) in ga.iter_mut().zip(&g) {
                            *d = *d + x;
                        }
                    }
                    let gb = acc(&mut grads, *b, m);
                    for row in g.chunks(m) {
                        for (d, &x) in gb.iter_mut().zip(row) {
                            *d = *d + x;
                        }
                    }
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(self.ops[i], Op::Sub(..)) {
                        -S::one()
                    } else {
                        S::one()
                    };
                    let n = g.len();
                    {
                        let ga = acc(&mut grads, *a, n);
                        for (d, &x) in ga.iter_mut().zip(&g) {
                            *d = *d + x;
                        }
                    }
                    let gb = acc(&mut grads, *b, n);
                    for (d, &x) in gb.iter_mut().zip(&g) {
                        *d = *d + sign * x;
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.values[a.0], &self.values[b.0]);
                    let n = g.len();
                    {
                        let ga = acc(&mut grads, *a, n);
                        for ((d, &x), &y) in ga.iter_mut().zip(&g).zip(bv.data()) {
                            *d = *d + x * y;
                        }
                    }
                    let gb = acc(&mut grads, *b, n);
                    for ((d, &x), &y) in gb.iter_mut().zip(&g).zip(av.data()) {
                        *d = *d + x * y;
                    }
                }
                Op::Scale(a, c) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for (d, &x) in ga.iter_mut().zip(&g) {
                        *d = *d + x * *c;
                    }
                }
                Op::AddConst(a) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for (d, &x) in ga.iter_mut().zip(&g) {
                        *d = *d + x;
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.values[p.0].len();
                        let gp = acc(&mut grads, *p, n);
                        for (d, &x) in gp.iter_mut().zip(&g[off..off + n]) {
                            *d = *d + x;
                        }
                        off += n;
                    }
                }
                Op::Slice(a, start) => {
                    let n = self.values[a.0].len();
                    let ga = acc(&mut grads, *a, n);
                    for (d, &x) in ga[*start..*start + g.len()].iter_mut().zip(&g) {
                        *d = *d + x;
                    }
                }
                Op::Rows(parts) => {
                    let width = g.len() / parts.len();
                    for (p, chunk) in parts.iter().zip(g.chunks(width)) {
                        let gp = acc(&mut grads, *p, width);
                        for (d, &x) in gp.iter_mut().zip(chunk) {
                            *d = *d + x;
                        }
                    }
                }
                Op::Tanh(a) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for ((d, &x), &y) in ga.iter_mut().zip(&g).zip(out.data()) {
                        *d = *d + x * (S::one() - y * y);
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = acc(&mut grads, *a, g.len());
                    for ((d, &x), &y) in ga.iter_mut().zip(&g).zip(out.data()) {
                        *d = *d + x * y * (S::one() - y);
                    }
                }
                Op::Relu(a) => {
                    let av = &self.values[a.0];
                    let ga = acc(&mut grads, *a, g.len());
                    for ((d, &x), &inp) in ga.iter_mut().zip(&g).zip(av.data()) {
                        if inp > S::zero() {
                            *d = *d + x;
                        }
                    }
                }
                Op::Softmax(a) => {
                    let y = out.data();
                    let inner: S = g.iter().zip(y).map(|(&x, &yy)| x * yy).sum();
                    let ga = acc(&mut grads, *a, g.len());
                    for ((d, &x), &yy) in ga.iter_mut().zip(&g).zip(y) {
                        *d = *d + yy * (x - inner);
                    }
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (&self.values[a.0], &self.values[b.0]);
                    let s = g[0];
                    let n = av.len();
                    {
                        let ga = acc(&mut grads, *a, n);
                        for (d, &y) in ga.iter_mut().zip(bv.data()) {
                            *d = *d + s * y;
                        }
                    }
                    let gb = acc(&mut grads, *b, n);
                    for (d, &x) in gb.iter_mut().zip(av.data()) {
                        *d = *d + s * x;
                    }
                }
                Op::Sum(a) => {
                    let n = self.values[a.0].len();
                    let ga = acc(&mut grads, *a, n);
                    for d in ga.iter_mut() {
                        *d = *d + g[0];
                    }
                }
                Op::SquaredL2(a) => {
                    let av = &self.values[a.0];
                    let two = S::lit(2.0);
                    let ga = acc(&mut grads, *a, av.len());
                    for (d, &x) in ga.iter_mut().zip(av.data()) {
                        *d = *d + two * g[0] * x;
                    }
                }
                Op::WeightedSum(w, items) => {
                    let wv = self.values[w.0].data().to_vec();
                    let mut gw = vec![S::zero(); items.len()];
                    for (k, it) in items.iter().enumerate() {
                        let iv = &self.values[it.0];
                        gw[k] = iv.data().iter().zip(&g).map(|(&x, &y)| x * y).sum();
                        let gi = acc(&mut grads, *it, g.len());
                        for (d, &x) in gi.iter_mut().zip(&g) {
                            *d = *d + wv[k] * x;
                        }
                    }
                    let gwa = acc(&mut grads, *w, items.len());
                    for (d, x) in gwa.iter_mut().zip(gw) {
                        *d = *d + x;
                    }
                }
                Op::Mean(items) => {
                    let inv = S::one() / S::from_usize(items.len()).expect("count fits scalar");
                    for it in items {
                        let gi = acc(&mut grads, *it, g.len());
                        for (d, &x) in gi.iter_mut().zip(&g) {
                            *d = *d + x * inv;
                        }
                    }
                }
                Op::Max(items, arg) => {
                    for (j, &k) in arg.iter().enumerate() {
                        let gi = acc(&mut grads, items[k], g.len());
                        gi[j] = gi[j] + g[j];
                    }
                }
            }
        }
        Ok(())
    }
}
