//! Spherical coordinates on the radius-`√J_k` sphere and the map from
//! bounded angles to the real line.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use crate::error::{MvmnpError, Result};
use crate::linalg::{norm_cdf, norm_pdf, norm_quantile};

/// Number of angles with range `[0, π)` among `len` angles of a choice with
/// `j_k` alternatives; the last `j_k − 1` angles have range `[0, π/2)`.
#[inline]
pub fn wide_count(len: usize, j_k: usize) -> usize {
    (len + 1).saturating_sub(j_k)
}

/// Upper bound of angle `l` (0-based).
#[inline]
pub fn angle_bound(l: usize, len: usize, j_k: usize) -> f64 {
    if l < wide_count(len, j_k) {
        PI
    } else {
        FRAC_PI_2
    }
}

fn check_bounds(kappa: &[f64], j_k: usize) -> Result<()> {
    for (l, &a) in kappa.iter().enumerate() {
        let upper = angle_bound(l, kappa.len(), j_k);
        if !(0.0..upper).contains(&a) {
            return Err(MvmnpError::Domain(format!(
                "angle {l} = {a} outside [0, {upper})"
            )));
        }
    }
    Ok(())
}

/// `ψ_k(κ_k)`, rejecting out-of-bound angles.
pub fn spherical_forward(kappa: &[f64], j_k: usize) -> Result<Vec<f64>> {
    check_bounds(kappa, j_k)?;
    let mut psi = vec![0.0; kappa.len() + 1];
    forward_into(kappa, j_k, &mut psi);
    Ok(psi)
}

/// `ψ_k(κ_k)` without bound checks.
pub fn forward_into(kappa: &[f64], j_k: usize, psi: &mut [f64]) {
    let n = kappa.len() + 1;
    debug_assert_eq!(psi.len(), n);
    let mut prod = (j_k as f64).sqrt();
    for l in 0..n - 1 {
        let (s, c) = kappa[l].sin_cos();
        psi[l] = prod * c;
        prod *= s;
    }
    psi[n - 1] = prod;
}

/// Inverse transform with every branch and zero-tail convention, checking
/// only that `‖ψ_k‖² = J_k`.
///
/// Uses `atan2(‖ψ_{l+1:}‖, ψ_l)`, which equals `arccos(ψ_l / ‖ψ_{l:}‖)`
/// (0 or π on a zero tail) but stays accurate near the poles. The last angle
/// is `atan2(ψ_n, ψ_{n−1})` taken in `[0, 2π)`, which is the `2π − arccos`
/// branch when `ψ_n < 0`.
pub fn spherical_inverse_raw(psi: &[f64], j_k: usize) -> Result<Vec<f64>> {
    check_norm(psi, j_k)?;
    let n = psi.len();
    if n <= 1 {
        return Ok(Vec::new());
    }
    let mut tail = vec![0.0; n + 1];
    for l in (0..n).rev() {
        tail[l] = psi[l].hypot(tail[l + 1]);
    }
    let mut kappa = vec![0.0; n - 1];
    for l in 0..n - 2 {
        kappa[l] = tail[l + 1].atan2(psi[l]);
    }
    let last = psi[n - 1].atan2(psi[n - 2]);
    kappa[n - 2] = if last < 0.0 { last + 2.0 * PI } else { last };
    Ok(kappa)
}

/// Inverse transform for a valid `ψ_k`: norm `√J_k` and a strictly positive
/// `d_k` block (its last `J_k` entries).
pub fn spherical_inverse(psi: &[f64], j_k: usize) -> Result<Vec<f64>> {
    if psi.len() < j_k {
        return Err(MvmnpError::Shape(format!("ψ has {} entries but J_k = {j_k}", psi.len())));
    }
    if let Some(pos) = psi[psi.len() - j_k..].iter().position(|&v| !(v > 0.0)) {
        return Err(MvmnpError::Domain(format!(
            "d entry {pos} = {} is not strictly positive",
            psi[psi.len() - j_k + pos]
        )));
    }
    spherical_inverse_raw(psi, j_k)
}

fn check_norm(psi: &[f64], j_k: usize) -> Result<()> {
    let sq: f64 = psi.iter().map(|v| v * v).sum();
    let target = j_k as f64;
    if !sq.is_finite() || (sq - target).abs() > 1e-8 * target {
        return Err(MvmnpError::Domain(format!("‖ψ‖² = {sq}, expected {target}")));
    }
    Ok(())
}

/// `∂ψ_k/∂κ_k` as an `n_k × (n_k − 1)` matrix; entry `(l, j)` is `∂ψ_l/∂κ_j`.
pub fn spherical_jacobian(kappa: &[f64], j_k: usize) -> DMatrix<f64> {
    let m = kappa.len();
    let n = m + 1;
    let root = (j_k as f64).sqrt();
    let (sin, cos): (Vec<f64>, Vec<f64>) = kappa.iter().map(|a| a.sin_cos()).unzip();
    // prefix[l] = Π_{s<l} sin κ_s
    let mut prefix = vec![1.0; n];
    for l in 1..n {
        prefix[l] = prefix[l - 1] * sin[l - 1];
    }
    let mut jac = DMatrix::zeros(n, m);
    for j in 0..m {
        jac[(j, j)] = -root * prefix[j + 1];
        // running = Π_{s<l, s≠j} sin κ_s for l > j
        let mut running = prefix[j];
        for l in j + 1..n {
            let tail = if l < n - 1 { cos[l] } else { 1.0 };
            jac[(l, j)] = root * cos[j] * tail * running;
            if l < m {
                running *= sin[l];
            }
        }
    }
    jac
}

/// Maps angle `κ` with upper bound `c` to `ξ = Φ⁻¹(κ / c)`.
pub fn angle_to_real(kappa: f64, upper: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < upper) {
        return Err(MvmnpError::Domain(format!(
            "angle {kappa} must lie strictly inside (0, {upper}) to map to the real line"
        )));
    }
    let u = kappa / upper;
    Ok(if u > 0.5 { -norm_quantile(1.0 - u) } else { norm_quantile(u) })
}

/// `κ = c Φ(ξ)`.
#[inline]
pub fn real_to_angle(xi: f64, upper: f64) -> f64 {
    upper * norm_cdf(xi)
}

/// `dκ/dξ = c φ(ξ)`.
#[inline]
pub fn real_to_angle_derivative(xi: f64, upper: f64) -> f64 {
    upper * norm_pdf(xi)
}

/// `ξ_k` for all angles of one choice.
pub fn angles_to_real(kappa: &[f64], j_k: usize) -> Result<Vec<f64>> {
    kappa
        .iter()
        .enumerate()
        .map(|(l, &a)| angle_to_real(a, angle_bound(l, kappa.len(), j_k)))
        .collect()
}

/// `κ_k` for all angles of one choice.
pub fn real_to_angles(xi: &[f64], j_k: usize) -> Vec<f64> {
    xi.iter()
        .enumerate()
        .map(|(l, &x)| real_to_angle(x, angle_bound(l, xi.len(), j_k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_angles_point_at_first_axis() {
        let psi = spherical_forward(&[0.0; 5], 2).unwrap();
        assert!((psi[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(psi[1..].iter().all(|&v| v == 0.0));
        let back = spherical_inverse_raw(&psi, 2).unwrap();
        assert_eq!(back, vec![0.0; 5]);
    }

    #[test]
    fn right_angles_point_at_last_axis() {
        // J_k = 1 has no π/2-bounded angles, so every angle may equal π/2
        let psi = spherical_forward(&[FRAC_PI_2; 3], 1).unwrap();
        assert!(psi[..3].iter().all(|&v| v.abs() < 1e-15));
        assert!((psi[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_head_with_zero_tail_is_pi() {
        let psi = [-3f64.sqrt(), 0.0, 0.0, 0.0];
        let kappa = spherical_inverse_raw(&psi, 3).unwrap();
        assert_eq!(kappa[0], PI);
    }

    #[test]
    fn last_angle_branch_for_negative_last_entry() {
        let psi = [0.0, 0.6, -0.8];
        let kappa = spherical_inverse_raw(&psi, 1).unwrap();
        let expected = 2.0 * PI - (0.6f64 / 1.0).acos();
        assert!((kappa[1] - expected).abs() < 1e-14);
        let mut again = vec![0.0; 3];
        forward_into(&kappa, 1, &mut again);
        for (a, b) in again.iter().zip(psi.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_rejects_bad_norm_and_nonpositive_d() {
        assert!(spherical_inverse(&[1.0, 1.0, 1.0], 2).is_err());
        let s = 2f64.sqrt();
        assert!(spherical_inverse(&[s, 0.0, 0.0], 2).is_err());
        assert!(spherical_inverse(&[0.0, 1.0, 1.0], 2).is_ok());
    }

    #[test]
    fn forward_rejects_out_of_bounds() {
        assert!(spherical_forward(&[PI, 0.1], 1).is_err());
        // J_k = 2: the last angle is bounded by π/2
        assert!(spherical_forward(&[0.1, 0.1, 1.6], 2).is_err());
        assert!(spherical_forward(&[-0.1, 0.1, 0.1], 2).is_err());
    }

    #[test]
    fn real_line_examples() {
        assert_eq!(angle_to_real(FRAC_PI_2, PI).unwrap(), 0.0);
        assert!(angle_to_real(PI / 4.0, FRAC_PI_2).unwrap().abs() < 1e-15);
        assert!(angle_to_real(0.0, PI).is_err());
        assert!(angle_to_real(FRAC_PI_2, FRAC_PI_2).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let kappa = [0.3, 2.1, 1.2, 0.7, 0.4];
        let jac = spherical_jacobian(&kappa, 3);
        let h = 1e-6;
        for j in 0..kappa.len() {
            let mut up = kappa;
            let mut dn = kappa;
            up[j] += h;
            dn[j] -= h;
            let mut pu = vec![0.0; 6];
            let mut pd = vec![0.0; 6];
            forward_into(&up, 3, &mut pu);
            forward_into(&dn, 3, &mut pd);
            for l in 0..6 {
                let fd = (pu[l] - pd[l]) / (2.0 * h);
                assert!((jac[(l, j)] - fd).abs() < 1e-8, "({l},{j}): {} vs {fd}", jac[(l, j)]);
            }
        }
    }

    fn in_bounds(len: usize, j_k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, len).prop_map(move |xi| real_to_angles(&xi, j_k))
    }

    proptest! {
        #[test]
        fn forward_has_radius_sqrt_j((j_k, kappa) in (1usize..4).prop_flat_map(|j| (Just(j), in_bounds(j * 3 - 1, j)))) {
            let psi = spherical_forward(&kappa, j_k).unwrap();
            let sq: f64 = psi.iter().map(|v| v * v).sum();
            prop_assert!((sq - j_k as f64).abs() < 1e-12);
            prop_assert!(psi[psi.len() - j_k..].iter().all(|&v| v > 0.0));
        }

        #[test]
        fn inverse_undoes_forward((j_k, kappa) in (1usize..4).prop_flat_map(|j| (Just(j), in_bounds(j * 3 - 1, j)))) {
            let psi = spherical_forward(&kappa, j_k).unwrap();
            let back = spherical_inverse(&psi, j_k).unwrap();
            for (a, b) in kappa.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            let mut again = vec![0.0; psi.len()];
            forward_into(&back, j_k, &mut again);
            for (a, b) in psi.iter().zip(again.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn real_line_round_trip(xi in prop::collection::vec(-3.0f64..3.0, 1..12), j_k in 1usize..4) {
            let kappa = real_to_angles(&xi, j_k);
            let back = angles_to_real(&kappa, j_k).unwrap();
            for (a, b) in xi.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
