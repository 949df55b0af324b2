use nalgebra::{DMatrix, DMatrixView};

use super::dataset::Dataset;
use super::structure::ChoiceStructure;
use crate::error::{MvmnpError, Result};

/// Design matrices `X_ik` for every observation and choice.
///
/// Each `J_k × r_k` block is stored column-major in one flat buffer; the
/// stacked `X_i` is block diagonal and is only materialized on request.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    alternatives: Vec<usize>,
    coef_lens: Vec<usize>,
    block_offsets: Vec<usize>,
    obs_stride: usize,
    n_obs: usize,
    data: Vec<f64>,
}

/// Writes `X_ik` column-major into `out` (length `J_k · r_k`).
///
/// Columns are `[I_{J_k} | x_dᵀ ⊗ I_{J_k} | T_k X_a]`, where row `j` of the
/// last block is row `j + 1` of `X_a` minus its row 0.
pub fn fill_block(j_k: usize, x_d: &[f64], x_a: &[f64], n_a: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), j_k * (j_k + j_k * x_d.len() + n_a));
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..j_k {
        out[j * j_k + j] = 1.0;
    }
    let mut col = j_k;
    for &xd in x_d {
        for j in 0..j_k {
            out[(col + j) * j_k + j] = xd;
        }
        col += j_k;
    }
    for c in 0..n_a {
        let base = x_a[c];
        for j in 0..j_k {
            out[(col + c) * j_k + j] = x_a[(j + 1) * n_a + c] - base;
        }
    }
}

/// Builds the design blocks of every observation.
pub fn build_design(dataset: &Dataset, structure: &ChoiceStructure) -> Result<DesignMatrix> {
    structure.validate()?;
    if dataset.num_choices() != structure.num_choices() {
        return Err(MvmnpError::DimensionMismatch {
            obs: 0,
            choice: dataset.num_choices().min(structure.num_choices()),
            detail: format!(
                "dataset has {} choices, structure {}",
                dataset.num_choices(),
                structure.num_choices()
            ),
        });
    }
    for k in 0..structure.num_choices() {
        if dataset.alternatives()[k] != structure.alternatives(k) {
            return Err(MvmnpError::DimensionMismatch {
                obs: 0,
                choice: k,
                detail: format!(
                    "dataset has J_k = {}, structure {}",
                    dataset.alternatives()[k],
                    structure.alternatives(k)
                ),
            });
        }
    }
    if dataset.n_individual() != structure.n_individual || dataset.n_alternative() != structure.n_alternative {
        return Err(MvmnpError::DimensionMismatch {
            obs: 0,
            choice: 0,
            detail: format!(
                "dataset covariates (n_d={}, n_a={}) do not match structure (n_d={}, n_a={})",
                dataset.n_individual(),
                dataset.n_alternative(),
                structure.n_individual,
                structure.n_alternative
            ),
        });
    }
    let mut design = DesignMatrix::empty(structure, dataset.len());
    let n_a = structure.n_alternative;
    for i in 0..dataset.len() {
        for k in 0..structure.num_choices() {
            let j_k = structure.alternatives(k);
            let start = i * design.obs_stride + design.block_offsets[k];
            let len = j_k * design.coef_lens[k];
            fill_block(
                j_k,
                dataset.individual(i),
                dataset.alternative_slice(i, k),
                n_a,
                &mut design.data[start..start + len],
            );
        }
    }
    Ok(design)
}

impl DesignMatrix {
    fn empty(structure: &ChoiceStructure, n_obs: usize) -> Self {
        let k_count = structure.num_choices();
        let coef_lens: Vec<usize> = (0..k_count).map(|k| structure.coef_len(k)).collect();
        let mut block_offsets = Vec::with_capacity(k_count);
        let mut stride = 0;
        for k in 0..k_count {
            block_offsets.push(stride);
            stride += structure.alternatives(k) * coef_lens[k];
        }
        Self {
            alternatives: structure.alternatives.clone(),
            coef_lens,
            block_offsets,
            obs_stride: stride,
            n_obs,
            data: vec![0.0; stride * n_obs],
        }
    }

    /// Design of a single observation built from raw covariates, with
    /// `x_a[k]` the row-major `(J_k + 1) × n_a` block of choice `k`.
    pub fn single(structure: &ChoiceStructure, x_d: &[f64], x_a: &[&[f64]]) -> Result<Self> {
        if x_d.len() != structure.n_individual || x_a.len() != structure.num_choices() {
            return Err(MvmnpError::Shape("covariates do not match the choice structure".into()));
        }
        let mut design = Self::empty(structure, 1);
        for k in 0..structure.num_choices() {
            let j_k = structure.alternatives(k);
            if x_a[k].len() != (j_k + 1) * structure.n_alternative {
                return Err(MvmnpError::DimensionMismatch {
                    obs: 0,
                    choice: k,
                    detail: "alternative covariate block has the wrong size".into(),
                });
            }
            let start = design.block_offsets[k];
            let len = j_k * design.coef_lens[k];
            fill_block(j_k, x_d, x_a[k], structure.n_alternative, &mut design.data[start..start + len]);
        }
        Ok(design)
    }

    pub fn len(&self) -> usize {
        self.n_obs
    }

    pub fn is_empty(&self) -> bool {
        self.n_obs == 0
    }

    /// `J`.
    pub fn rows(&self) -> usize {
        self.alternatives.iter().sum()
    }

    /// `r`.
    pub fn cols(&self) -> usize {
        self.coef_lens.iter().sum()
    }

    /// `X_ik` as a `J_k × r_k` view.
    pub fn block(&self, i: usize, k: usize) -> DMatrixView<'_, f64> {
        let j_k = self.alternatives[k];
        let r_k = self.coef_lens[k];
        let start = i * self.obs_stride + self.block_offsets[k];
        DMatrixView::from_slice(&self.data[start..start + j_k * r_k], j_k, r_k)
    }

    /// Stacked block-diagonal `X_i` (`J × r`).
    pub fn stacked(&self, i: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows(), self.cols());
        let (mut row, mut col) = (0, 0);
        for k in 0..self.alternatives.len() {
            let b = self.block(i, k);
            out.view_mut((row, col), (b.nrows(), b.ncols())).copy_from(&b);
            row += b.nrows();
            col += b.ncols();
        }
        out
    }

    /// Writes `X_i β` into `out` (length `J`).
    pub fn mul_beta(&self, i: usize, beta: &[f64], out: &mut [f64]) {
        let (mut row, mut col) = (0, 0);
        let base = i * self.obs_stride;
        for k in 0..self.alternatives.len() {
            let j_k = self.alternatives[k];
            let r_k = self.coef_lens[k];
            let blk = &self.data[base + self.block_offsets[k]..base + self.block_offsets[k] + j_k * r_k];
            for j in 0..j_k {
                let mut acc = 0.0;
                for c in 0..r_k {
                    acc += blk[c * j_k + j] * beta[col + c];
                }
                out[row + j] = acc;
            }
            row += j_k;
            col += r_k;
        }
    }

    /// Adds `X_iᵀ v` to `out` (length `r`).
    pub fn add_transpose_mul(&self, i: usize, v: &[f64], out: &mut [f64]) {
        let (mut row, mut col) = (0, 0);
        let base = i * self.obs_stride;
        for k in 0..self.alternatives.len() {
            let j_k = self.alternatives[k];
            let r_k = self.coef_lens[k];
            let blk = &self.data[base + self.block_offsets[k]..base + self.block_offsets[k] + j_k * r_k];
            for c in 0..r_k {
                let mut acc = 0.0;
                for j in 0..j_k {
                    acc += blk[c * j_k + j] * v[row + j];
                }
                out[col + c] += acc;
            }
            row += j_k;
            col += r_k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_alternative_covariate_block() {
        let mut out = vec![0.0; 2 * 3];
        fill_block(2, &[], &[1.0, 2.0, 3.0], 1, &mut out);
        let m = DMatrix::from_column_slice(2, 3, &out);
        assert_eq!(m, DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 2.0]));
    }

    #[test]
    fn zero_individual_covariate_gives_zero_block() {
        let mut out = vec![0.0; 2 * 5];
        fill_block(2, &[0.0], &[1.0, 2.0, 3.0], 1, &mut out);
        let m = DMatrix::from_column_slice(2, 5, &out);
        assert!(m.columns(2, 2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_alternative_covariates_vanish() {
        let mut out = vec![0.0; 3 * 5];
        fill_block(3, &[], &[0.7, 1.5, 0.7, 1.5, 0.7, 1.5, 0.7, 1.5], 2, &mut out);
        let m = DMatrix::from_column_slice(3, 5, &out);
        assert!(m.columns(3, 2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn products_match_stacked_matrix() {
        let s = ChoiceStructure::new(vec![2, 1], 1, 2).unwrap();
        let x_a0 = [0.1, 0.2, -0.3, 0.4, 0.5, -0.6];
        let x_a1 = [1.0, 2.0, -1.0, 0.5];
        let d = DesignMatrix::single(&s, &[0.8], &[&x_a0, &x_a1]).unwrap();
        let x = d.stacked(0);
        assert_eq!((x.nrows(), x.ncols()), (3, s.coef_total()));
        let beta: Vec<f64> = (0..s.coef_total()).map(|c| 0.3 * c as f64 - 1.0).collect();
        let mut xb = vec![0.0; 3];
        d.mul_beta(0, &beta, &mut xb);
        let expected = &x * nalgebra::DVector::from_column_slice(&beta);
        for j in 0..3 {
            assert!((xb[j] - expected[j]).abs() < 1e-14);
        }
        let v = [0.5, -1.5, 2.0];
        let mut xtv = vec![0.0; s.coef_total()];
        d.add_transpose_mul(0, &v, &mut xtv);
        let expected = x.transpose() * nalgebra::DVector::from_column_slice(&v);
        for c in 0..s.coef_total() {
            assert!((xtv[c] - expected[c]).abs() < 1e-14);
        }
        // first choice: intercepts, x_d ⊗ I, differenced covariates
        assert_eq!(x[(0, 2)], 0.8);
        assert!((x[(1, 5)] - (-0.6 - 0.2)).abs() < 1e-15);
        assert_eq!(x[(2, 6)], 1.0);
    }
}
