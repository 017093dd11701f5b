use indexmap::IndexMap;
use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a named parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors with gradient accumulators and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<S> {
    index: IndexMap<String, usize>,
    pub(crate) values: Vec<Tensor<S>>,
    pub(crate) grads: Vec<Tensor<S>>,
    pub(crate) first_moment: Vec<Tensor<S>>,
    pub(crate) second_moment: Vec<Tensor<S>>,
    pub(crate) step: u64,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            index: IndexMap::new(),
            values: Vec::new(),
            grads: Vec::new(),
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step: 0,
        }
    }

    /// Registers a parameter. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<S>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter `{name}`")));
        }
        if !value.all_finite() {
            return Err(Error::NonFiniteGradient(name));
        }
        let id = self.values.len();
        let zeros = Tensor::zeros(value.shape());
        self.grads.push(zeros.clone());
        self.first_moment.push(zeros.clone());
        self.second_moment.push(zeros);
        self.values.push(value);
        self.index.insert(name, id);
        Ok(ParamId(id))
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<ParamId> {
        self.insert(name, Tensor::zeros(shape))
    }

    /// Glorot-uniform matrix `[rows, cols]`.
    pub fn glorot<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| S::lit(rng.gen_range(-limit..limit)))
            .collect();
        self.insert(name, Tensor::matrix(rows, cols, data)?)
    }

    /// Uniform vector in `[-scale, scale)`.
    pub fn uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        len: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<ParamId> {
        let data = (0..len).map(|_| S::lit(rng.gen_range(-scale..scale))).collect();
        self.insert(name, Tensor::vector(data))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.index
            .get_index(id.0)
            .map(|(k, _)| k.as_str())
            .expect("param id from this store")
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.values.len()).map(ParamId)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor<S> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<S> {
        &self.grads[id.0]
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.grads[id.0]
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.fill(S::zero());
        }
    }

    /// Sets every parameter value to zero.
    pub fn zero_values(&mut self) {
        for v in &mut self.values {
            v.fill(S::zero());
        }
    }

    /// Euclidean norm of all gradients taken together.
    pub fn grad_norm(&self) -> S {
        self.grads
            .iter()
            .flat_map(|g| g.data().iter())
            .map(|&x| x * x)
            .sum::<S>()
            .sqrt()
    }

    pub fn total_size(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Values-only equality, ignoring gradients and optimizer state.
    pub fn same_values(&self, other: &Self) -> bool {
        self.index.keys().eq(other.index.keys()) && self.values == other.values
    }

    pub(crate) fn restore_state(
        &mut self,
        id: ParamId,
        value: Tensor<S>,
        m: Tensor<S>,
        v: Tensor<S>,
    ) {
        self.values[id.0] = value;
        self.first_moment[id.0] = m;
        self.second_moment[id.0] = v;
    }

    pub(crate) fn set_step(&mut self, step: u64) {
        self.step = step;
    }
}
