//! One relational graph-convolution layer with basis-decomposed relation weights.
//!
//! Row-vector convention: for input `H` (n × d_in)
//!
//! ```text
//! out = Σ_r (A_r H) W_r + H W_0,    W_r = Σ_b a_rb V_b
//!     = Σ_b C_b V_b + H W_0,         C_b = Σ_r a_rb (A_r H)
//! ```
//!
//! where `A_r` is the mean-normalized adjacency of relation `r`.

use super::encoder_graph::RelationAdjacency;
use crate::par::Exec;
use ndarray::{Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgcnLayer {
    /// `B` basis matrices, each d_in × d_out.
    pub bases: Vec<Array2<f64>>,
    /// Relation × basis coefficients.
    pub coefficients: Array2<f64>,
    /// Self-loop weight, d_in × d_out.
    pub self_loop: Array2<f64>,
}

/// Activations kept from the forward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    input: Array2<f64>,
    aggregated: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub bases: Vec<Array2<f64>>,
    pub coefficients: Array2<f64>,
    pub self_loop: Array2<f64>,
}

fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..=limit))
}

impl RgcnLayer {
    pub fn init<R: Rng>(d_in: usize, d_out: usize, num_relations: usize, num_bases: usize, rng: &mut R) -> Self {
        let bases = (0..num_bases).map(|_| glorot(d_in, d_out, rng)).collect();
        let coefficients = glorot(num_relations, num_bases, rng);
        let self_loop = glorot(d_in, d_out, rng);
        Self { bases, coefficients, self_loop }
    }

    pub fn d_in(&self) -> usize {
        self.self_loop.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.self_loop.ncols()
    }

    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn num_relations(&self) -> usize {
        self.coefficients.nrows()
    }

    /// Parameters of the relation weights: `B·d_in·d_out + R·B`.
    pub fn relation_param_count(&self) -> usize {
        self.num_bases() * self.d_in() * self.d_out() + self.num_relations() * self.num_bases()
    }

    pub fn param_count(&self) -> usize {
        self.relation_param_count() + self.d_in() * self.d_out()
    }

    /// Dense relation weight `W_r`.
    pub fn relation_weight(&self, r: usize) -> Array2<f64> {
        let mut w = Array2::zeros(self.self_loop.raw_dim());
        for (b, v) in self.bases.iter().enumerate() {
            w.scaled_add(self.coefficients[[r, b]], v);
        }
        w
    }

    fn combine(&self, aggregated: &[Array2<f64>], b: usize) -> Array2<f64> {
        let mut c = Array2::zeros(aggregated[0].raw_dim());
        for (r, agg) in aggregated.iter().enumerate() {
            c.scaled_add(self.coefficients[[r, b]], agg);
        }
        c
    }

    /// Pre-activation output.
    pub fn forward(&self, input: &Array2<f64>, relations: &[RelationAdjacency], exec: Exec) -> (Array2<f64>, LayerCache) {
        assert_eq!(relations.len(), self.num_relations(), "relation count mismatch");
        let aggregated: Vec<Array2<f64>> = relations.iter().map(|rel| rel.aggregate(input, exec)).collect();
        let mut out = input.dot(&self.self_loop);
        for (b, v) in self.bases.iter().enumerate() {
            out += &self.combine(&aggregated, b).dot(v);
        }
        (out, LayerCache { input: input.clone(), aggregated })
    }

    /// Gradients of the parameters and of the input, given `grad_out = ∂L/∂out`.
    pub fn backward(
        &self,
        cache: &LayerCache,
        grad_out: &Array2<f64>,
        relations: &[RelationAdjacency],
        exec: Exec,
    ) -> (LayerGrads, Array2<f64>) {
        let self_loop = cache.input.t().dot(grad_out);
        let mut grad_input = grad_out.dot(&self.self_loop.t());
        let mut coefficients = Array2::zeros(self.coefficients.raw_dim());
        let mut bases = Vec::with_capacity(self.num_bases());
        // per relation: Σ_b a_rb (G V_bᵀ), pulled back through A_rᵀ
        let mut relation_back: Vec<Array2<f64>> = vec![Array2::zeros(cache.input.raw_dim()); self.num_relations()];
        for (b, v) in self.bases.iter().enumerate() {
            bases.push(self.combine(&cache.aggregated, b).t().dot(grad_out));
            let projected = grad_out.dot(&v.t());
            for (r, agg) in cache.aggregated.iter().enumerate() {
                coefficients[[r, b]] = Zip::from(agg).and(&projected).fold(0.0, |acc, a, p| acc + a * p);
                relation_back[r].scaled_add(self.coefficients[[r, b]], &projected);
            }
        }
        for (rel, back) in relations.iter().zip(&relation_back) {
            grad_input += &rel.aggregate_transpose(back, exec);
        }
        (LayerGrads { bases, coefficients, self_loop }, grad_input)
    }

    pub(crate) fn params(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.bases.iter().chain([&self.coefficients, &self.self_loop])
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut Array2<f64>> {
        self.bases.iter_mut().chain([&mut self.coefficients, &mut self.self_loop])
    }
}

impl LayerGrads {
    pub(crate) fn params(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.bases.iter().chain([&self.coefficients, &self.self_loop])
    }
}
