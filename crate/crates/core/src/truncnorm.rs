//! Truncated normal sampling.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::linalg::{norm_cdf, norm_quantile, norm_quantile_fast};

/// Standardized truncation point beyond which the exponential-proposal
/// rejection sampler replaces inversion.
pub const TAIL_SWITCH: f64 = 5.0;

/// Draws `X ~ N(0, 1)` conditioned on `X > a`.
pub fn std_lower<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a > TAIL_SWITCH {
        // exponential proposal with the optimal rate
        let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
        let exp = Exp::new(alpha).expect("positive rate");
        loop {
            let z = a + exp.sample(rng);
            let u: f64 = rng.random();
            if u.ln() <= -0.5 * (z - alpha) * (z - alpha) {
                return z;
            }
        }
    }
    let u: f64 = rng.random();
    let x = if a >= 0.0 {
        // work with the upper-tail mass to keep precision; 1 − u ∈ (0, 1]
        let tail = norm_cdf(-a);
        -norm_quantile_fast((1.0 - u) * tail)
    } else {
        let pa = norm_cdf(a);
        norm_quantile_fast(pa + u * (1.0 - pa))
    };
    if x > a {
        x
    } else {
        a.next_up()
    }
}

/// Draws `N(mean, sd²)` truncated to `(bound, ∞)`; the result is strictly
/// greater than `bound`.
pub fn sample_above<R: Rng + ?Sized>(mean: f64, sd: f64, bound: f64, rng: &mut R) -> f64 {
    let x = mean + sd * std_lower((bound - mean) / sd, rng);
    if x > bound {
        x
    } else {
        bound.next_up()
    }
}

/// Draws `N(mean, sd²)` truncated to `(−∞, bound)`; strictly below `bound`.
pub fn sample_below<R: Rng + ?Sized>(mean: f64, sd: f64, bound: f64, rng: &mut R) -> f64 {
    let x = mean - sd * std_lower((mean - bound) / sd, rng);
    if x < bound {
        x
    } else {
        bound.next_down()
    }
}

/// `log(Φ((up − mean)/sd) − Φ((low − mean)/sd))`.
pub fn log_interval_mass(mean: f64, sd: f64, low: f64, up: f64) -> f64 {
    let a = (low - mean) / sd;
    let b = (up - mean) / sd;
    let mass = if a > 0.0 { norm_cdf(-a) - norm_cdf(-b) } else { norm_cdf(b) - norm_cdf(a) };
    mass.ln()
}

/// Draws `N(mean, sd²)` truncated to `(low, up)` by inversion.
pub fn sample_interval<R: Rng + ?Sized>(mean: f64, sd: f64, low: f64, up: f64, rng: &mut R) -> f64 {
    let a = (low - mean) / sd;
    let b = (up - mean) / sd;
    let u: f64 = rng.random();
    let x = if a > 0.0 {
        let (pa, pb) = (norm_cdf(-a), norm_cdf(-b));
        mean - sd * norm_quantile(pb + u * (pa - pb))
    } else {
        let (pa, pb) = (norm_cdf(a), norm_cdf(b));
        mean + sd * norm_quantile(pa + u * (pb - pa))
    };
    if x.is_nan() {
        0.5 * (low + up)
    } else {
        x.clamp(low, up)
    }
}
