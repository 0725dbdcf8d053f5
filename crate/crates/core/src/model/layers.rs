use rand::Rng;
use serde::{Deserialize, Serialize};

/// Affine map `y = W x + b` with `W` stored row-major, `out_dim x in_dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut l = Self::zeros(dim, dim);
        for i in 0..dim {
            l.weight[i * dim + i] = 1.0;
        }
        l
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Self {
            in_dim,
            out_dim,
            weight: (0..in_dim * out_dim).map(|_| rng.random_range(-bound..bound)).collect(),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        self.weight
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut grad.weight[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                dx[i] += g * row[i];
            }
        }
        dx
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self::zeros(self.in_dim, self.out_dim)
    }
}

/// Multi-head attention from one query token onto a sequence of key/value
/// tokens, followed by an output projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossAttention {
    pub dim: usize,
    pub heads: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

/// Intermediate values of one attention call, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct AttentionTape {
    query_in: Vec<f64>,
    kv_in: Vec<Vec<f64>>,
    q: Vec<f64>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    /// `weights[h][j]`
    weights: Vec<Vec<f64>>,
    concat: Vec<f64>,
}

impl CrossAttention {
    pub fn glorot(dim: usize, heads: usize, rng: &mut impl Rng) -> Self {
        Self {
            dim,
            heads,
            query: Linear::glorot(dim, dim, rng),
            key: Linear::glorot(dim, dim, rng),
            value: Linear::glorot(dim, dim, rng),
            output: Linear::glorot(dim, dim, rng),
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            dim: self.dim,
            heads: self.heads,
            query: self.query.zeros_like(),
            key: self.key.zeros_like(),
            value: self.value.zeros_like(),
            output: self.output.zeros_like(),
        }
    }

    fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn forward(&self, query: &[f64], kv: &[&[f64]]) -> (Vec<f64>, AttentionTape) {
        let hd = self.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let v: Vec<Vec<f64>> = kv.iter().map(|t| self.value.forward(t)).collect();
        // With a single key/value token every head's softmax weight is exactly
        // 1, so queries and keys cannot affect the output; skip them.
        let single = kv.len() == 1;
        let q = if single { Vec::new() } else { self.query.forward(query) };
        let k: Vec<Vec<f64>> = if single { Vec::new() } else { kv.iter().map(|t| self.key.forward(t)).collect() };
        let mut concat = vec![0.0; self.dim];
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let span = h * hd..(h + 1) * hd;
            let a = if single {
                vec![1.0]
            } else {
                let scores: Vec<f64> = k
                    .iter()
                    .map(|kj| q[span.clone()].iter().zip(&kj[span.clone()]).map(|(a, b)| a * b).sum::<f64>() * scale)
                    .collect();
                crate::encoders::softmax(&scores)
            };
            for (aj, vj) in a.iter().zip(&v) {
                for (c, x) in concat[span.clone()].iter_mut().zip(&vj[span.clone()]) {
                    *c += aj * x;
                }
            }
            weights.push(a);
        }
        let out = self.output.forward(&concat);
        let tape = AttentionTape {
            query_in: query.to_vec(),
            kv_in: kv.iter().map(|t| t.to_vec()).collect(),
            q,
            k,
            v,
            weights,
            concat,
        };
        (out, tape)
    }

    /// Returns `(dL/dquery, dL/dkv_j)`.
    pub fn backward(&self, tape: &AttentionTape, d_out: &[f64], grad: &mut CrossAttention) -> (Vec<f64>, Vec<Vec<f64>>) {
        let hd = self.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();
        let d_concat = self.output.backward(&tape.concat, d_out, &mut grad.output);
        let tokens = tape.v.len();
        if tokens == 1 {
            // Softmax over one token has zero Jacobian: only the value path carries gradient.
            let d_kv = self.value.backward(&tape.kv_in[0], &d_concat, &mut grad.value);
            return (vec![0.0; self.dim], vec![d_kv]);
        }
        let mut dq = vec![0.0; self.dim];
        let mut dk = vec![vec![0.0; self.dim]; tokens];
        let mut dv = vec![vec![0.0; self.dim]; tokens];
        for h in 0..self.heads {
            let span = h * hd..(h + 1) * hd;
            let a = &tape.weights[h];
            let dc = &d_concat[span.clone()];
            let da: Vec<f64> = tape
                .v
                .iter()
                .map(|vj| dc.iter().zip(&vj[span.clone()]).map(|(x, y)| x * y).sum())
                .collect();
            let weighted: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
            for j in 0..tokens {
                for (d, g) in dv[j][span.clone()].iter_mut().zip(dc) {
                    *d += a[j] * g;
                }
                let ds = a[j] * (da[j] - weighted) * scale;
                if ds == 0.0 {
                    continue;
                }
                for i in span.clone() {
                    dq[i] += ds * tape.k[j][i];
                    dk[j][i] += ds * tape.q[i];
                }
            }
        }
        let d_query = self.query.backward(&tape.query_in, &dq, &mut grad.query);
        let d_kv = (0..tokens)
            .map(|j| {
                let mut d = self.key.backward(&tape.kv_in[j], &dk[j], &mut grad.key);
                let dvx = self.value.backward(&tape.kv_in[j], &dv[j], &mut grad.value);
                d.iter_mut().zip(dvx).for_each(|(a, b)| *a += b);
                d
            })
            .collect();
        (d_query, d_kv)
    }
}
