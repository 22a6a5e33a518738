use rand::Rng;
use serde::{Deserialize, Serialize};

/// Dense row-major matrix of latent factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factors {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Factors {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Factors::filled(rows, dim, 0.0)
    }

    pub fn filled(rows: usize, dim: usize, value: f64) -> Self {
        Factors {
            rows,
            dim,
            data: vec![value; rows * dim],
        }
    }

    pub fn uniform<R: Rng>(rows: usize, dim: usize, half_width: f64, rng: &mut R) -> Self {
        let data = (0..rows * dim)
            .map(|_| rng.gen_range(-half_width..half_width))
            .collect();
        Factors { rows, dim, data }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * dim);
        Factors { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `selfᵀ self`, a `dim × dim` row-major Gram matrix, summed in row order.
    pub fn gram(&self) -> Vec<f64> {
        let d = self.dim;
        let mut g = vec![0.0; d * d];
        for r in 0..self.rows {
            let x = self.row(r);
            for a in 0..d {
                for b in 0..d {
                    g[a * d + b] += x[a] * x[b];
                }
            }
        }
        g
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
