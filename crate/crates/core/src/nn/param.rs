use serde::{Deserialize, Serialize};

use crate::numerics::{normal, RngStream};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
}

/// Named parameter tensors plus Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub params: Vec<Param>,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    /// Tensor updates skipped because of non-finite gradients.
    pub skipped: u64,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
            skipped: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, value: Vec<f64>) -> ParamId {
        assert_eq!(shape.iter().product::<usize>(), value.len());
        let n = value.len();
        self.params.push(Param {
            name: name.into(),
            shape,
            value,
        });
        self.m.push(vec![0.0; n]);
        self.v.push(vec![0.0; n]);
        ParamId(self.params.len() - 1)
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: Vec<usize>) -> ParamId {
        let n = shape.iter().product();
        self.add(name, shape, vec![0.0; n])
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`.
    pub fn glorot(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        fan_in: usize,
        fan_out: usize,
        stream: &RngStream,
    ) -> ParamId {
        let name = name.into();
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut rng = stream.child(&name).rng();
        let n = shape.iter().product();
        let value = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
        self.add(name, shape, value)
    }

    /// Small Gaussian entries, used for learned tokens.
    pub fn gaussian(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        std: f64,
        stream: &RngStream,
    ) -> ParamId {
        let name = name.into();
        let mut rng = stream.child(&name).rng();
        let n = shape.iter().product();
        let value = (0..n).map(|_| normal(&mut rng) * std).collect();
        self.add(name, shape, value)
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(self.params.iter().map(|p| vec![0.0; p.value.len()]).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.iter().all(|x| x.is_finite()))
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Vec<f64>>);

impl Grads {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.0[id.0]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|g| g.iter().all(|&x| x == 0.0))
    }
}
