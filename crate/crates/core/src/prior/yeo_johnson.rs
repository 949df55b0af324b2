//! Yeo-Johnson transformation with its first two derivatives.

/// Value, first and second derivative of the Yeo-Johnson map `t_η(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YjEval {
    pub t: f64,
    pub dt: f64,
    pub d2t: f64,
}

const LIMIT: f64 = 1e-12;

/// Evaluates `t_η(x)`, `t′_η(x)` and `t″_η(x)`.
///
/// For `x ≥ 0`, `t = ((1 + x)^η − 1)/η` (`log1p x` at `η = 0`); for `x < 0`,
/// `t = −((1 − x)^{2−η} − 1)/(2 − η)` (`−log1p(−x)` at `η = 2`).
pub fn yeo_johnson(x: f64, eta: f64) -> YjEval {
    if x >= 0.0 {
        let l = x.ln_1p();
        let t = if eta.abs() < LIMIT { l } else { (eta * l).exp_m1() / eta };
        let dt = ((eta - 1.0) * l).exp();
        let d2t = (eta - 1.0) * ((eta - 2.0) * l).exp();
        YjEval { t, dt, d2t }
    } else {
        let l = (-x).ln_1p();
        let a = 2.0 - eta;
        let t = if a.abs() < LIMIT { -l } else { -(a * l).exp_m1() / a };
        let dt = ((1.0 - eta) * l).exp();
        let d2t = (eta - 1.0) * (-eta * l).exp();
        YjEval { t, dt, d2t }
    }
}

/// `t_η(x)` only.
#[inline]
pub fn yj_value(x: f64, eta: f64) -> f64 {
    yeo_johnson(x, eta).t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_at_eta_one() {
        for &x in &[-4.0, -0.5, 0.0, 0.3, 7.0] {
            let e = yeo_johnson(x, 1.0);
            assert!((e.t - x).abs() < 1e-14);
            assert!((e.dt - 1.0).abs() < 1e-15);
            assert_eq!(e.d2t, 0.0);
        }
    }

    #[test]
    fn origin_is_fixed_with_unit_slope() {
        for &eta in &[0.0, 0.1, 0.5, 1.0, 1.5, 1.9, 2.0] {
            let e = yeo_johnson(0.0, eta);
            assert_eq!(e.t, 0.0);
            assert!((e.dt - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn limits_match_log_forms() {
        let e0 = yeo_johnson(1.7, 0.0);
        assert!((e0.t - 1.7f64.ln_1p()).abs() < 1e-15);
        let e2 = yeo_johnson(-1.7, 2.0);
        assert!((e2.t + 1.7f64.ln_1p()).abs() < 1e-15);
        // continuity across the analytic limit
        assert!((yeo_johnson(1.7, 1e-9).t - e0.t).abs() < 1e-8);
        assert!((yeo_johnson(-1.7, 2.0 - 1e-9).t - e2.t).abs() < 1e-8);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for &eta in &[0.5, 1.5] {
            let mut x = -3.0;
            while x <= 3.0 {
                // the second derivative of t is continuous at 0 but the third is
                // not, so keep the stencil on one side of the origin
                if (x as f64).abs() > 2.0 * h {
                    let e = yeo_johnson(x, eta);
                    let fd1 = (yj_value(x + h, eta) - yj_value(x - h, eta)) / (2.0 * h);
                    let fd2 = (yeo_johnson(x + h, eta).dt - yeo_johnson(x - h, eta).dt) / (2.0 * h);
                    assert!((e.dt - fd1).abs() <= 1e-6 * e.dt.abs().max(1.0), "t' at {x}, {eta}");
                    assert!((e.d2t - fd2).abs() <= 1e-6 * e.d2t.abs().max(1.0), "t'' at {x}, {eta}");
                }
                x += 0.25;
            }
        }
    }

    #[test]
    fn second_derivative_continuous_at_zero() {
        for &eta in &[0.3, 1.0, 1.7] {
            let left = yeo_johnson(-1e-12, eta).d2t;
            let right = yeo_johnson(1e-12, eta).d2t;
            assert!((left - right).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn strictly_increasing(x in -20.0f64..20.0, dx in 1e-6f64..5.0, eta in 0.1f64..1.9) {
            prop_assert!(yj_value(x + dx, eta) > yj_value(x, eta));
            prop_assert!(yeo_johnson(x, eta).dt > 0.0);
        }
    }
}
