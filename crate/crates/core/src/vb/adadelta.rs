//! ADADELTA step sizes for stochastic gradient ascent.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adadelta {
    pub rho: f64,
    pub eps: f64,
    /// Running average of squared gradients.
    pub eg2: Vec<f64>,
    /// Running average of squared steps.
    pub edx2: Vec<f64>,
}

impl Adadelta {
    pub fn new(len: usize, rho: f64, eps: f64) -> Self {
        Self { rho, eps, eg2: vec![0.0; len], edx2: vec![0.0; len] }
    }

    /// Ascent step `λ ← λ + Δ`, `Δ_j = sqrt(E[Δ²]_j + ε) / sqrt(E[g²]_j + ε) · g_j`.
    pub fn update(&mut self, lambda: &mut [f64], grad: &[f64]) {
        let (rho, eps) = (self.rho, self.eps);
        for j in 0..lambda.len() {
            let g = grad[j];
            self.eg2[j] = rho * self.eg2[j] + (1.0 - rho) * g * g;
            let step = ((self.edx2[j] + eps).sqrt() / (self.eg2[j] + eps).sqrt()) * g;
            self.edx2[j] = rho * self.edx2[j] + (1.0 - rho) * step * step;
            lambda[j] += step;
        }
    }
}
