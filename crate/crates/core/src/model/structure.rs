use serde::{Deserialize, Serialize};

use crate::error::{MvmnpError, Result};

/// Dimensions of a multivariate multinomial probit model.
///
/// Choice `k` has `J_k + 1` alternatives, alternative 0 being the base. The
/// regressors for choice `k` are `J_k` intercepts, `J_k · n_d` individual
/// effects and `n_a` alternative-specific slopes, so `r_k = J_k + J_k n_d + n_a`.
/// The factor covariance has `p` factors and each choice carries
/// `n_k = J_k (p + 1)` loading/idiosyncratic entries on a sphere of radius
/// `√J_k`, parameterised by `n_k − 1` angles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceStructure {
    /// `J_k` for each choice (alternatives excluding the base).
    pub alternatives: Vec<usize>,
    /// Number of individual-specific covariates `n_d`.
    pub n_individual: usize,
    /// Number of alternative-specific covariates `n_a`.
    pub n_alternative: usize,
    /// Factor count `p`.
    pub factors: usize,
}

impl ChoiceStructure {
    /// Builds a structure with `p = K` factors.
    pub fn new(alternatives: Vec<usize>, n_individual: usize, n_alternative: usize) -> Result<Self> {
        let factors = alternatives.len();
        Self::with_factors(alternatives, n_individual, n_alternative, factors)
    }

    pub fn with_factors(
        alternatives: Vec<usize>,
        n_individual: usize,
        n_alternative: usize,
        factors: usize,
    ) -> Result<Self> {
        let s = Self {
            alternatives,
            n_individual,
            n_alternative,
            factors,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alternatives.is_empty() {
            return Err(MvmnpError::InvalidStructure("at least one choice is required".into()));
        }
        if let Some(k) = self.alternatives.iter().position(|&j| j == 0) {
            return Err(MvmnpError::InvalidStructure(format!(
                "choice {k} has no non-base alternatives (J_k must be >= 1)"
            )));
        }
        Ok(())
    }

    /// `K`.
    pub fn num_choices(&self) -> usize {
        self.alternatives.len()
    }

    /// `J_k`.
    pub fn alternatives(&self, k: usize) -> usize {
        self.alternatives[k]
    }

    /// `J = Σ J_k`.
    pub fn total_alternatives(&self) -> usize {
        self.alternatives.iter().sum()
    }

    /// `L_{k-1}`: index of the first utility of choice `k` in the stacked vector.
    pub fn utility_offset(&self, k: usize) -> usize {
        self.alternatives[..k].iter().sum()
    }

    /// `r_k`.
    pub fn coef_len(&self, k: usize) -> usize {
        let j = self.alternatives[k];
        j + j * self.n_individual + self.n_alternative
    }

    /// `r = Σ r_k`.
    pub fn coef_total(&self) -> usize {
        (0..self.num_choices()).map(|k| self.coef_len(k)).sum()
    }

    pub fn coef_offset(&self, k: usize) -> usize {
        (0..k).map(|l| self.coef_len(l)).sum()
    }

    /// `n_k = J_k (p + 1)`.
    pub fn psi_len(&self, k: usize) -> usize {
        self.alternatives[k] * (self.factors + 1)
    }

    /// `n = Σ n_k`.
    pub fn psi_total(&self) -> usize {
        (0..self.num_choices()).map(|k| self.psi_len(k)).sum()
    }

    /// Number of angles for choice `k`, `n_k − 1`.
    pub fn angle_len(&self, k: usize) -> usize {
        self.psi_len(k) - 1
    }

    /// Number of angles whose range is `[0, π)`; the remaining `J_k − 1`
    /// angles (those feeding the `d_k` block) live in `[0, π/2)`.
    pub fn wide_angle_len(&self, k: usize) -> usize {
        self.psi_len(k) - self.alternatives[k]
    }

    /// `n − K`.
    pub fn angle_total(&self) -> usize {
        self.psi_total() - self.num_choices()
    }

    pub fn angle_offset(&self, k: usize) -> usize {
        (0..k).map(|l| self.angle_len(l)).sum()
    }

    /// Length of the unconstrained parameter vector `θ = (β, ξ)`.
    pub fn param_dim(&self) -> usize {
        self.coef_total() + self.angle_total()
    }

    /// Number of joint outcomes `Π (J_k + 1)`.
    pub fn joint_outcomes(&self) -> usize {
        self.alternatives.iter().map(|j| j + 1).product()
    }

    /// Upper bound of angle `l` (0-based) of choice `k`.
    pub fn angle_upper(&self, k: usize, l: usize) -> f64 {
        if l < self.wide_angle_len(k) {
            std::f64::consts::PI
        } else {
            std::f64::consts::FRAC_PI_2
        }
    }

    /// Same structure with `p` replaced.
    pub fn with_factor_count(&self, factors: usize) -> Self {
        Self {
            factors,
            ..self.clone()
        }
    }

    /// Checks that another structure describes the same data layout.
    pub fn same_data_layout(&self, other: &ChoiceStructure) -> bool {
        self.alternatives == other.alternatives
            && self.n_individual == other.n_individual
            && self.n_alternative == other.n_alternative
    }
}
