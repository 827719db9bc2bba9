use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Gauss-Hermite rule for weight `exp(-t^2)` by the Golub-Welsch method.
/// Returns ascending nodes and their (unnormalized) weights.
pub fn gauss_hermite(l: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(l, l);
    for k in 1..l {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..l)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // the rule is symmetric; enforce it exactly
    for i in 0..l / 2 {
        let j = l - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if l % 2 == 1 {
        pairs[l / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Tensor Gauss-Hermite grid over the `2 n_r` real noise axes of an
/// `n_r`-dimensional circular complex Gaussian.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    per_axis: usize,
    dims: usize,
    nodes: Vec<f64>,
    /// Normalized to sum to one per axis.
    weights: Vec<f64>,
    raw_weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(per_axis: usize, complex_dims: usize) -> Result<Self> {
        if per_axis == 0 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one node per axis".into(),
            ));
        }
        let (nodes, raw_weights) = gauss_hermite(per_axis);
        let norm = std::f64::consts::PI.sqrt();
        Ok(Self {
            per_axis,
            dims: complex_dims,
            weights: raw_weights.iter().map(|w| w / norm).collect(),
            nodes,
            raw_weights,
        })
    }

    /// Same rule over a different number of complex dimensions.
    pub fn with_dims(&self, complex_dims: usize) -> Self {
        Self {
            dims: complex_dims,
            ..self.clone()
        }
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn complex_dims(&self) -> usize {
        self.dims
    }

    /// `L^(2 n_r)`.
    pub fn len(&self) -> usize {
        self.per_axis.pow(2 * self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis_nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn axis_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sum of the unnormalized tensor weights, `pi^n_r`.
    pub fn raw_weight_sum(&self) -> f64 {
        self.raw_weights
            .iter()
            .sum::<f64>()
            .powi(2 * self.dims as i32)
    }

    /// Complex noise samples for noise variance `noise_var` (each real part has
    /// variance `noise_var / 2`), flattened as `[re_0, im_0, re_1, im_1, ...]`
    /// per node, with normalized weights.
    pub fn noise_points(&self, noise_var: f64) -> (Vec<f64>, Vec<f64>) {
        let axes = 2 * self.dims;
        let n = self.len();
        let sigma = noise_var.sqrt();
        let mut coords = Vec::with_capacity(n * axes);
        let mut weights = Vec::with_capacity(n);
        for idx in 0..n {
            let mut rest = idx;
            let mut w = 1.0;
            for _ in 0..axes {
                let i = rest % self.per_axis;
                rest /= self.per_axis;
                coords.push(sigma * self.nodes[i]);
                w *= self.weights[i];
            }
            weights.push(w);
        }
        (coords, weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_rule() {
        let (x, w) = gauss_hermite(3);
        let pi_sqrt = std::f64::consts::PI.sqrt();
        assert!((x[2] - 1.5f64.sqrt()).abs() < 1e-14 && x[1] == 0.0);
        assert!((w[1] - 2.0 * pi_sqrt / 3.0).abs() < 1e-14);
        assert!((w[0] - pi_sqrt / 6.0).abs() < 1e-14);
    }

    #[test]
    fn integrates_polynomials_exactly() {
        // E[t^2] under exp(-t^2)/sqrt(pi) is 1/2, E[t^4] = 3/4
        let g = QuadratureGrid::new(5, 1).unwrap();
        let m2: f64 = g
            .axis_nodes()
            .iter()
            .zip(g.axis_weights())
            .map(|(x, w)| w * x * x)
            .sum();
        let m4: f64 = g
            .axis_nodes()
            .iter()
            .zip(g.axis_weights())
            .map(|(x, w)| w * x.powi(4))
            .sum();
        assert!((m2 - 0.5).abs() < 1e-13 && (m4 - 0.75).abs() < 1e-13);
    }

    #[test]
    fn grid_size_and_weight_sum() {
        let g = QuadratureGrid::new(3, 2).unwrap();
        assert_eq!(g.len(), 81);
        assert!((g.raw_weight_sum() - std::f64::consts::PI.powi(2)).abs() < 1e-12);
        let (coords, w) = g.noise_points(0.5);
        assert_eq!(coords.len(), 81 * 4);
        assert!(w.iter().all(|&v| v > 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // noise power E||n||^2 = n_r * sigma^2
        let power: f64 = coords
            .chunks(4)
            .zip(&w)
            .map(|(c, wi)| wi * c.iter().map(|v| v * v).sum::<f64>())
            .sum();
        assert!((power - 1.0).abs() < 1e-13);
    }
}
