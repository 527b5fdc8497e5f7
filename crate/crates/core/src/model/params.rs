use rand::Rng;

use crate::model::glorot_bound;
use crate::numerics::Tensor;
use crate::{Error, Result};

/// Named trainable tensors in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamList {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamList {
    pub fn new() -> Self {
        ParamList::default()
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        self.names.push(name.into());
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    /// Pushes a Glorot-uniform `fan_in × fan_out` matrix.
    pub fn push_glorot<R: Rng>(&mut self, name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut R) -> usize {
        let t = Tensor::uniform(&[fan_in, fan_out], glorot_bound(fan_in, fan_out), rng);
        self.push(name, t)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Replaces every tensor, checking shapes.
    pub fn assign(&mut self, tensors: Vec<Tensor>) -> Result<()> {
        if tensors.len() != self.tensors.len() {
            return Err(Error::shape(format!("{} tensors for {} parameters", tensors.len(), self.tensors.len())));
        }
        for ((name, old), new) in self.names.iter().zip(&self.tensors).zip(&tensors) {
            if old.shape() != new.shape() {
                return Err(Error::shape(format!("parameter {name}: {:?} vs {:?}", old.shape(), new.shape())));
            }
        }
        self.tensors = tensors;
        Ok(())
    }
}
