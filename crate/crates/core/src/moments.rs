use serde::Serialize;

/// Posterior moments of a probability vector.
///
/// `second_origin[i][j]` is E[p_i p_j]; `cov` and `std` are derived from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorMoments {
    pub mean: Vec<f64>,
    pub second_origin: Vec<Vec<f64>>,
    pub cov: Vec<Vec<f64>>,
    pub std: Vec<f64>,
}

impl PosteriorMoments {
    pub fn from_raw(mean: Vec<f64>, second_origin: Vec<Vec<f64>>) -> Self {
        let k = mean.len();
        let cov: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| second_origin[i][j] - mean[i] * mean[j]).collect())
            .collect();
        let std = (0..k).map(|i| cov[i][i].max(0.0).sqrt()).collect();
        Self {
            mean,
            second_origin,
            cov,
            std,
        }
    }

    /// Two-outcome result `(p, 1-p)` from the first two moments of `p`.
    pub fn binary(m1: f64, m2: f64) -> Self {
        let q2 = 1.0 - 2.0 * m1 + m2;
        let cross = m1 - m2;
        Self::from_raw(vec![m1, 1.0 - m1], vec![vec![m2, cross], vec![cross, q2]])
    }

    /// Posterior mean of the first component.
    pub fn mu(&self) -> f64 {
        self.mean[0]
    }

    /// Posterior standard deviation of the first component.
    pub fn sigma(&self) -> f64 {
        self.std[0]
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}
