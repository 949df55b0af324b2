use nalgebra::{DMatrix, DVector};

use super::spherical::{
    angles_to_real, forward_into, real_to_angles, spherical_forward, spherical_inverse,
};
use super::structure::ChoiceStructure;
use crate::error::{MvmnpError, Result};

/// `Σ = B Bᵀ + D²` with its factors.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorCovariance {
    /// `J × p` loadings.
    pub b: DMatrix<f64>,
    /// Idiosyncratic scales, `D = diag(d)`.
    pub d: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl FactorCovariance {
    pub fn new(b: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        if b.nrows() != d.len() {
            return Err(MvmnpError::Shape(format!("B has {} rows, d has {}", b.nrows(), d.len())));
        }
        let mut sigma = &b * b.transpose();
        for j in 0..d.len() {
            sigma[(j, j)] += d[j] * d[j];
        }
        Ok(Self { b, d, sigma })
    }

    /// Unpacks the concatenated `ψ = (ψ_1, …, ψ_K)`, each
    /// `ψ_k = (vec(B_k), d_k)` with column-major `vec`.
    pub fn from_psi(structure: &ChoiceStructure, psi: &[f64]) -> Result<Self> {
        if psi.len() != structure.psi_total() {
            return Err(MvmnpError::Shape(format!(
                "ψ has {} entries, expected {}",
                psi.len(),
                structure.psi_total()
            )));
        }
        let j_total = structure.total_alternatives();
        let p = structure.factors;
        let mut b = DMatrix::zeros(j_total, p);
        let mut d = DVector::zeros(j_total);
        let mut offset = 0;
        for k in 0..structure.num_choices() {
            let j_k = structure.alternatives(k);
            let row = structure.utility_offset(k);
            let psi_k = &psi[offset..offset + structure.psi_len(k)];
            for c in 0..p {
                for r in 0..j_k {
                    b[(row + r, c)] = psi_k[c * j_k + r];
                }
            }
            for r in 0..j_k {
                d[row + r] = psi_k[p * j_k + r];
            }
            offset += structure.psi_len(k);
        }
        Self::new(b, d)
    }

    /// Assembles `Σ` from the concatenated angles, rejecting out-of-bound values.
    pub fn from_kappa(structure: &ChoiceStructure, kappa: &[f64]) -> Result<Self> {
        check_angle_len(structure, kappa.len())?;
        let mut psi = Vec::with_capacity(structure.psi_total());
        for k in 0..structure.num_choices() {
            let off = structure.angle_offset(k);
            psi.extend(spherical_forward(&kappa[off..off + structure.angle_len(k)], structure.alternatives(k))?);
        }
        Self::from_psi(structure, &psi)
    }

    /// Assembles `Σ` from the real-line angle images `ξ`.
    pub fn from_xi(structure: &ChoiceStructure, xi: &[f64]) -> Result<Self> {
        check_angle_len(structure, xi.len())?;
        if let Some(pos) = xi.iter().position(|v| !v.is_finite()) {
            return Err(MvmnpError::Domain(format!("ξ entry {pos} is not finite")));
        }
        Self::from_psi(structure, &psi_from_xi(structure, xi))
    }

    /// Concatenated `ψ`.
    pub fn psi(&self, structure: &ChoiceStructure) -> Vec<f64> {
        let p = structure.factors;
        let mut psi = Vec::with_capacity(structure.psi_total());
        for k in 0..structure.num_choices() {
            let j_k = structure.alternatives(k);
            let row = structure.utility_offset(k);
            for c in 0..p {
                for r in 0..j_k {
                    psi.push(self.b[(row + r, c)]);
                }
            }
            for r in 0..j_k {
                psi.push(self.d[row + r]);
            }
        }
        psi
    }

    /// Concatenated angles; requires trace-normalized blocks and `d > 0`.
    pub fn kappa(&self, structure: &ChoiceStructure) -> Result<Vec<f64>> {
        let psi = self.psi(structure);
        let mut kappa = Vec::with_capacity(structure.angle_total());
        let mut offset = 0;
        for k in 0..structure.num_choices() {
            let n_k = structure.psi_len(k);
            kappa.extend(spherical_inverse(&psi[offset..offset + n_k], structure.alternatives(k))?);
            offset += n_k;
        }
        Ok(kappa)
    }

    /// Concatenated `ξ`.
    pub fn xi(&self, structure: &ChoiceStructure) -> Result<Vec<f64>> {
        xi_from_kappa(structure, &self.kappa(structure)?)
    }

    /// `Σ_kk`.
    pub fn block(&self, structure: &ChoiceStructure, k: usize) -> DMatrix<f64> {
        let off = structure.utility_offset(k);
        let j_k = structure.alternatives(k);
        self.sigma.view((off, off), (j_k, j_k)).into_owned()
    }

    /// Correlation matrix implied by `Σ`.
    pub fn correlation(&self) -> DMatrix<f64> {
        correlation(&self.sigma)
    }
}

/// Correlation matrix of a covariance matrix.
pub fn correlation(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let sd: Vec<f64> = sigma.diagonal().iter().map(|v| v.sqrt()).collect();
    DMatrix::from_fn(sigma.nrows(), sigma.ncols(), |r, c| sigma[(r, c)] / (sd[r] * sd[c]))
}

fn check_angle_len(structure: &ChoiceStructure, len: usize) -> Result<()> {
    if len != structure.angle_total() {
        return Err(MvmnpError::Shape(format!(
            "{len} angles given, structure needs {}",
            structure.angle_total()
        )));
    }
    Ok(())
}

/// Concatenated `ψ(κ(ξ))` without validation.
pub fn psi_from_xi(structure: &ChoiceStructure, xi: &[f64]) -> Vec<f64> {
    let kappa = kappa_from_xi(structure, xi);
    let mut psi = vec![0.0; structure.psi_total()];
    let mut offset = 0;
    for k in 0..structure.num_choices() {
        let a = structure.angle_offset(k);
        let n_k = structure.psi_len(k);
        forward_into(&kappa[a..a + n_k - 1], structure.alternatives(k), &mut psi[offset..offset + n_k]);
        offset += n_k;
    }
    psi
}

/// `κ(ξ)` over all choices.
pub fn kappa_from_xi(structure: &ChoiceStructure, xi: &[f64]) -> Vec<f64> {
    let mut kappa = Vec::with_capacity(xi.len());
    for k in 0..structure.num_choices() {
        let off = structure.angle_offset(k);
        kappa.extend(real_to_angles(&xi[off..off + structure.angle_len(k)], structure.alternatives(k)));
    }
    kappa
}

/// `ξ(κ)` over all choices.
pub fn xi_from_kappa(structure: &ChoiceStructure, kappa: &[f64]) -> Result<Vec<f64>> {
    check_angle_len(structure, kappa.len())?;
    let mut xi = Vec::with_capacity(kappa.len());
    for k in 0..structure.num_choices() {
        let off = structure.angle_offset(k);
        xi.extend(angles_to_real(&kappa[off..off + structure.angle_len(k)], structure.alternatives(k))?);
    }
    Ok(xi)
}

/// Rescales each within-choice block of `(B, d)` so that `trace(Σ_kk) = J_k`.
pub fn trace_normalize(structure: &ChoiceStructure, cov: &FactorCovariance) -> Result<FactorCovariance> {
    let mut b = cov.b.clone();
    let mut d = cov.d.clone();
    for k in 0..structure.num_choices() {
        let off = structure.utility_offset(k);
        let j_k = structure.alternatives(k);
        let tr: f64 = (off..off + j_k).map(|j| cov.sigma[(j, j)]).sum();
        let scale = (j_k as f64 / tr).sqrt();
        b.rows_mut(off, j_k).scale_mut(scale);
        d.rows_mut(off, j_k).scale_mut(scale);
    }
    FactorCovariance::new(b, d)
}

/// Scales each within-choice block of a full covariance matrix to trace
/// `J_k`; between-choice blocks are scaled by the product of the two factors.
pub fn trace_normalize_sigma(structure: &ChoiceStructure, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scale = vec![0.0; sigma.nrows()];
    for k in 0..structure.num_choices() {
        let off = structure.utility_offset(k);
        let j_k = structure.alternatives(k);
        let tr: f64 = (off..off + j_k).map(|j| sigma[(j, j)]).sum();
        let s = (j_k as f64 / tr).sqrt();
        scale[off..off + j_k].iter_mut().for_each(|v| *v = s);
    }
    DMatrix::from_fn(sigma.nrows(), sigma.ncols(), |r, c| sigma[(r, c)] * scale[r] * scale[c])
}
