//! Named trainable tensors and the per-forward-pass binding of them onto a tape.

use indexmap::IndexMap;
use rand::Rng;

use crate::numerics::{Gradients, NumError, Shape, Tape, Tensor, Var};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered collection of uniquely named parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    tensors: IndexMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, NumError> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(NumError::Contract(format!("duplicate parameter name {name:?}")));
        }
        let (idx, _) = self.tensors.insert_full(name, value);
        Ok(ParamId(idx))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.tensors.values().map(|t| t.data().len()).sum()
    }

    pub fn zero_grads(&mut self) {
        self.tensors.values_mut().for_each(Tensor::zero_grad);
    }

    /// Adds tape gradients of bound parameters into each tensor's gradient buffer.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (slot, g) in grads.slots() {
            self.tensors[slot].accumulate_grad(&g);
        }
    }
}

/// Glorot-uniform matrix: `U(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(Shape::new(rows, cols), data).expect("positive extents")
}

/// A tape under construction plus the parameters it reads.
///
/// Each parameter is placed on the tape at most once per graph, the first time it is
/// requested.
pub struct Graph<'p> {
    pub tape: Tape,
    params: &'p ParamSet,
    bound: Vec<Option<Var>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph { tape: Tape::new(), params, bound: vec![None; params.len()] }
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let v = self.tape.param_leaf(id.0, self.params.get(id).clone());
        self.bound[id.0] = Some(v);
        v
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.tape.value(v)
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients, NumError> {
        self.tape.backward(loss)
    }
}
