use nalgebra::DMatrix;

use super::structure::ChoiceStructure;
use crate::error::{MvmnpError, Result};

/// Observed choices and covariates.
///
/// Storage is flat: `choices` is `N × K` row-major, `individual` is
/// `N × n_d` row-major, and `alternative` holds, for each observation and
/// choice in order, the `(J_k + 1) × n_a` covariate matrix row-major with row
/// 0 belonging to the base alternative.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    alternatives: Vec<usize>,
    n_individual: usize,
    n_alternative: usize,
    n_obs: usize,
    choices: Vec<usize>,
    individual: Vec<f64>,
    alternative: Vec<f64>,
    alt_offsets: Vec<usize>,
    alt_stride: usize,
}

impl Dataset {
    /// Builds a dataset from per-observation rows, validating every entry
    /// against `structure`.
    pub fn new(
        structure: &ChoiceStructure,
        choices: Vec<Vec<usize>>,
        individual: Vec<Vec<f64>>,
        alternative: Vec<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        let n_obs = choices.len();
        if individual.len() != n_obs || alternative.len() != n_obs {
            return Err(MvmnpError::Shape(format!(
                "{} choice rows, {} individual rows, {} alternative rows",
                n_obs,
                individual.len(),
                alternative.len()
            )));
        }
        let k_count = structure.num_choices();
        let mut flat_choices = Vec::with_capacity(n_obs * k_count);
        let mut flat_ind = Vec::with_capacity(n_obs * structure.n_individual);
        let mut flat_alt = Vec::new();
        for i in 0..n_obs {
            if choices[i].len() != k_count {
                return Err(MvmnpError::DimensionMismatch {
                    obs: i,
                    choice: choices[i].len().min(k_count),
                    detail: format!("expected {k_count} choices, got {}", choices[i].len()),
                });
            }
            if individual[i].len() != structure.n_individual {
                return Err(MvmnpError::DimensionMismatch {
                    obs: i,
                    choice: 0,
                    detail: format!(
                        "expected {} individual covariates, got {}",
                        structure.n_individual,
                        individual[i].len()
                    ),
                });
            }
            if alternative[i].len() != k_count {
                return Err(MvmnpError::DimensionMismatch {
                    obs: i,
                    choice: alternative[i].len().min(k_count),
                    detail: format!("expected {k_count} alternative-covariate blocks"),
                });
            }
            for k in 0..k_count {
                let jk = structure.alternatives(k);
                if choices[i][k] > jk {
                    return Err(MvmnpError::DimensionMismatch {
                        obs: i,
                        choice: k,
                        detail: format!("category {} outside 0..={jk}", choices[i][k]),
                    });
                }
                let block = &alternative[i][k];
                if block.nrows() != jk + 1 || block.ncols() != structure.n_alternative {
                    return Err(MvmnpError::DimensionMismatch {
                        obs: i,
                        choice: k,
                        detail: format!(
                            "alternative covariates are {}x{}, expected {}x{}",
                            block.nrows(),
                            block.ncols(),
                            jk + 1,
                            structure.n_alternative
                        ),
                    });
                }
                for r in 0..=jk {
                    for c in 0..structure.n_alternative {
                        flat_alt.push(block[(r, c)]);
                    }
                }
            }
            flat_choices.extend_from_slice(&choices[i]);
            flat_ind.extend_from_slice(&individual[i]);
        }
        Self::from_flat(structure, n_obs, flat_choices, flat_ind, flat_alt)
    }

    /// Builds a dataset from flat storage (layout documented on the type).
    pub fn from_flat(
        structure: &ChoiceStructure,
        n_obs: usize,
        choices: Vec<usize>,
        individual: Vec<f64>,
        alternative: Vec<f64>,
    ) -> Result<Self> {
        structure.validate()?;
        let k_count = structure.num_choices();
        let mut alt_offsets = Vec::with_capacity(k_count);
        let mut stride = 0;
        for k in 0..k_count {
            alt_offsets.push(stride);
            stride += (structure.alternatives(k) + 1) * structure.n_alternative;
        }
        if choices.len() != n_obs * k_count
            || individual.len() != n_obs * structure.n_individual
            || alternative.len() != n_obs * stride
        {
            return Err(MvmnpError::Shape(format!(
                "flat storage lengths ({}, {}, {}) do not match N = {n_obs}",
                choices.len(),
                individual.len(),
                alternative.len()
            )));
        }
        for i in 0..n_obs {
            for k in 0..k_count {
                let y = choices[i * k_count + k];
                if y > structure.alternatives(k) {
                    return Err(MvmnpError::DimensionMismatch {
                        obs: i,
                        choice: k,
                        detail: format!("category {y} outside 0..={}", structure.alternatives(k)),
                    });
                }
            }
        }
        if let Some(pos) = individual.iter().chain(alternative.iter()).position(|v| !v.is_finite()) {
            return Err(MvmnpError::Domain(format!("non-finite covariate at flat position {pos}")));
        }
        Ok(Self {
            alternatives: structure.alternatives.clone(),
            n_individual: structure.n_individual,
            n_alternative: structure.n_alternative,
            n_obs,
            choices,
            individual,
            alternative,
            alt_offsets,
            alt_stride: stride,
        })
    }

    pub fn len(&self) -> usize {
        self.n_obs
    }

    pub fn is_empty(&self) -> bool {
        self.n_obs == 0
    }

    pub fn num_choices(&self) -> usize {
        self.alternatives.len()
    }

    pub fn alternatives(&self) -> &[usize] {
        &self.alternatives
    }

    pub fn n_individual(&self) -> usize {
        self.n_individual
    }

    pub fn n_alternative(&self) -> usize {
        self.n_alternative
    }

    /// Observed category `y_ik`.
    pub fn choice(&self, i: usize, k: usize) -> usize {
        self.choices[i * self.alternatives.len() + k]
    }

    /// All observed categories of observation `i`.
    pub fn choices(&self, i: usize) -> &[usize] {
        let k = self.alternatives.len();
        &self.choices[i * k..(i + 1) * k]
    }

    /// `x_i^d`.
    pub fn individual(&self, i: usize) -> &[f64] {
        &self.individual[i * self.n_individual..(i + 1) * self.n_individual]
    }

    /// `X_ik^a` as a row-major `(J_k + 1) × n_a` slice.
    pub fn alternative_slice(&self, i: usize, k: usize) -> &[f64] {
        let start = i * self.alt_stride + self.alt_offsets[k];
        &self.alternative[start..start + (self.alternatives[k] + 1) * self.n_alternative]
    }

    pub fn alternative_matrix(&self, i: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.alternatives[k] + 1, self.n_alternative, self.alternative_slice(i, k))
    }

    pub(crate) fn alternative_slice_mut(&mut self, i: usize, k: usize) -> &mut [f64] {
        let start = i * self.alt_stride + self.alt_offsets[k];
        let len = (self.alternatives[k] + 1) * self.n_alternative;
        &mut self.alternative[start..start + len]
    }

    pub(crate) fn set_choice(&mut self, i: usize, k: usize, y: usize) {
        let kc = self.alternatives.len();
        self.choices[i * kc + k] = y;
    }

    /// Dataset restricted to the given observation indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let kc = self.alternatives.len();
        let mut choices = Vec::with_capacity(indices.len() * kc);
        let mut individual = Vec::with_capacity(indices.len() * self.n_individual);
        let mut alternative = Vec::with_capacity(indices.len() * self.alt_stride);
        for &i in indices {
            choices.extend_from_slice(self.choices(i));
            individual.extend_from_slice(self.individual(i));
            alternative.extend_from_slice(&self.alternative[i * self.alt_stride..(i + 1) * self.alt_stride]);
        }
        Dataset {
            n_obs: indices.len(),
            choices,
            individual,
            alternative,
            ..self.clone_shape()
        }
    }

    fn clone_shape(&self) -> Dataset {
        Dataset {
            alternatives: self.alternatives.clone(),
            n_individual: self.n_individual,
            n_alternative: self.n_alternative,
            n_obs: 0,
            choices: Vec::new(),
            individual: Vec::new(),
            alternative: Vec::new(),
            alt_offsets: self.alt_offsets.clone(),
            alt_stride: self.alt_stride,
        }
    }

    /// Checks that this dataset matches the data layout of `structure`.
    pub fn check_structure(&self, structure: &ChoiceStructure) -> Result<()> {
        if self.alternatives != structure.alternatives {
            return Err(MvmnpError::Shape(format!(
                "dataset alternatives {:?} differ from structure {:?}",
                self.alternatives, structure.alternatives
            )));
        }
        if self.n_individual != structure.n_individual || self.n_alternative != structure.n_alternative {
            return Err(MvmnpError::Shape(format!(
                "dataset covariate counts (n_d={}, n_a={}) differ from structure (n_d={}, n_a={})",
                self.n_individual, self.n_alternative, structure.n_individual, structure.n_alternative
            )));
        }
        Ok(())
    }

    /// Empirical category frequencies per choice.
    pub fn category_frequencies(&self) -> Vec<Vec<f64>> {
        let mut counts: Vec<Vec<f64>> = self.alternatives.iter().map(|&j| vec![0.0; j + 1]).collect();
        for i in 0..self.n_obs {
            for (k, c) in counts.iter_mut().enumerate() {
                c[self.choice(i, k)] += 1.0;
            }
        }
        let n = self.n_obs.max(1) as f64;
        for c in &mut counts {
            for v in c.iter_mut() {
                *v /= n;
            }
        }
        counts
    }
}
