//! Gauss rules from the Golub–Welsch eigenvalue problem.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Result, WignerError};

fn golub_welsch(n: usize, offdiag: impl Fn(usize) -> f64, mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = offdiag(k);
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > 256 {
        return Err(WignerError::config(
            "oracle.nodes",
            "quadrature order must be in 1..=256",
        ));
    }
    Ok(())
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        check_order(n)?;
        let (nodes, weights) = golub_welsch(n, |k| k as f64 / ((4 * k * k - 1) as f64).sqrt(), 2.0);
        Ok(GaussLegendre { nodes, weights })
    }

    /// `(node, weight)` pairs mapped onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| (mid + half * x, half * w))
            .collect()
    }
}

/// Gauss–Hermite rule for the standard normal weight: `Σ w_i f(x_i) ≈ E[f(Z)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        check_order(n)?;
        let (nodes, weights) = golub_welsch(n, |k| (k as f64).sqrt(), 1.0);
        Ok(GaussHermite { nodes, weights })
    }
}
