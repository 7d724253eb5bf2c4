//! Special functions: digamma, trigamma, `log - digamma` and its inverse,
//! the standard normal density/cdf and the inverse Mills ratio.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Arguments below this are shifted upward by the recurrence before the
/// asymptotic series is applied.
const ASYMPTOTIC_FROM: f64 = 10.0;

/// `sum_k B_2k / (2k x^2k)` for k = 1..6.
fn bernoulli_tail<T: Real>(x: T) -> T {
    let z = (x * x).recip();
    let c = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
    ];
    let mut acc = T::zero();
    for &ck in c.iter().rev() {
        acc = (acc + T::lit(ck)) * z;
    }
    acc
}

/// Digamma function ψ(x).
pub fn digamma<T: Real>(x: T) -> T {
    if x.is_nan() || x == T::neg_infinity() {
        return T::nan();
    }
    if x <= T::zero() {
        if x == x.floor() {
            return T::nan();
        }
        // Reflection: ψ(x) = ψ(1 - x) - π cot(πx).
        let pi = T::PI();
        return digamma(T::one() - x) - pi / (pi * x).tan();
    }
    let mut x = x;
    let mut acc = T::zero();
    let lim = T::lit(ASYMPTOTIC_FROM);
    while x < lim {
        acc -= x.recip();
        x += T::one();
    }
    acc + x.ln() - T::lit(0.5) / x - bernoulli_tail(x)
}

/// Trigamma function ψ'(x) for x > 0.
pub fn trigamma<T: Real>(x: T) -> T {
    if !(x > T::zero()) {
        return T::nan();
    }
    let mut x = x;
    let mut acc = T::zero();
    let lim = T::lit(ASYMPTOTIC_FROM);
    while x < lim {
        acc += (x * x).recip();
        x += T::one();
    }
    acc + x.recip() + tri_tail(x)
}

/// `ψ'(x) - 1/x` for large x, without the leading term.
fn tri_tail<T: Real>(x: T) -> T {
    let r = x.recip();
    let z = r * r;
    let c = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
    ];
    let mut acc = T::zero();
    for &ck in c.iter().rev() {
        acc = acc * z + T::lit(ck);
    }
    T::lit(0.5) * z + acc * z * r
}

/// `log(x) - ψ(x)`, evaluated without cancellation for large x.
pub fn logmdigamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!("logmdigamma needs x > 0, got {x}")));
    }
    Ok(logmdigamma_unchecked(x))
}

fn logmdigamma_unchecked<T: Real>(x0: T) -> T {
    let lim = T::lit(ASYMPTOTIC_FROM);
    if x0 >= lim {
        return T::lit(0.5) / x0 + bernoulli_tail(x0);
    }
    let mut x = x0;
    let mut sum = T::zero();
    let mut n = T::zero();
    while x < lim {
        sum += x.recip();
        x += T::one();
        n += T::one();
    }
    // log x0 - ψ(x0) = -log1p(n/x0) + Σ 1/(x0+k) + [log x - ψ(x)] at x = x0 + n.
    sum - (n / x0).ln_1p() + T::lit(0.5) / x + bernoulli_tail(x)
}

/// Derivative of `log(x) - ψ(x)`, i.e. `1/x - ψ'(x)` (always negative).
fn logmdigamma_deriv<T: Real>(x0: T) -> T {
    let lim = T::lit(ASYMPTOTIC_FROM);
    let mut x = x0;
    let mut sq = T::zero();
    while x < lim {
        sq += (x * x).recip();
        x += T::one();
    }
    x0.recip() - x.recip() - sq - tri_tail(x)
}

/// Inverse of `log(x) - ψ(x)` on y > 0.
///
/// Newton's method started at `1/(y√2)`, kept inside the bracket
/// `(1/(2y), 1/y)` with bisection as the fallback.
pub fn inv_logmdigamma<T: Real>(y: T) -> Result<T> {
    if !(y > T::zero()) || !y.is_finite() {
        return Err(Error::Domain(format!(
            "inverse of log - digamma needs y > 0, got {y}"
        )));
    }
    let mut lo = T::lit(0.5) / y;
    let mut hi = y.recip();
    let mut x = (y * T::SQRT_2()).recip();
    let tiny = T::epsilon() * T::lit(2.0);
    for _ in 0..200 {
        let f = logmdigamma_unchecked(x) - y;
        if f == T::zero() {
            return Ok(x);
        }
        // logmdigamma is decreasing: a positive residual means x is too small.
        if f > T::zero() {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let mut next = x - f / logmdigamma_deriv(x);
        if !(next > lo && next < hi) {
            next = (lo * hi).sqrt();
            if !(next > lo && next < hi) {
                next = T::lit(0.5) * (lo + hi);
            }
        }
        if (next - x).abs() <= tiny * x || (hi - lo) <= tiny * x {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numeric(format!(
        "inverse of log - digamma did not converge for y = {y}"
    )))
}

/// Natural log of the gamma function.
pub fn ln_gamma<T: Real>(x: T) -> T {
    T::lit(libm::lgamma(x.as_f64()))
}

/// Complementary error function.
pub fn erfc<T: Real>(x: T) -> T {
    T::lit(libm::erfc(x.as_f64()))
}

/// Standard normal density φ(x) = (2π)^{-1/2} exp(-x²/2).
pub fn norm_pdf<T: Real>(x: T) -> T {
    (-T::lit(0.5) * x * x).exp() * T::lit(0.398_942_280_401_432_7)
}

/// Standard normal distribution function Φ(x).
pub fn norm_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * erfc(-x * T::FRAC_1_SQRT_2())
}

/// Below this point ζ′ switches to the continued fraction.
pub const ZETA_SWITCH: f64 = -6.0;

/// ζ′(x) = φ(x)/Φ(x), the derivative of log Φ.
///
/// For x < -6 it is evaluated as the reciprocal Mills ratio through Laplace's
/// continued fraction `t + 1/(t + 2/(t + 3/(t + ...)))` with t = -x.
pub fn zeta_prime<T: Real>(x: T) -> T {
    if x < T::lit(ZETA_SWITCH) {
        let t = -x;
        let mut tail = t;
        for k in (1..=120).rev() {
            tail = t + T::lit(k as f64) / tail;
        }
        tail
    } else {
        norm_pdf(x) / norm_cdf(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    // Reference: ψ(x) = -γ + Σ_{k<n} [1/(k+1) - 1/(k+x)] plus the tail
    // Σ_{k≥n} (x-1)/((k+1)(k+x)) ≈ ln((n+x-1/2)/(n+1/2)), which is O(n^-3) accurate.
    fn digamma_series(x: f64) -> f64 {
        let n = 2_000_000usize;
        let mut s = 0.0;
        for k in (0..n).rev() {
            let k = k as f64;
            s += 1.0 / (k + 1.0) - 1.0 / (k + x);
        }
        let m = n as f64;
        -EULER_GAMMA + s + ((m + x - 0.5) / (m + 0.5)).ln()
    }

    #[test]
    fn digamma_matches_series() {
        for &x in &[0.1, 0.5, 1.0, 2.5, 7.3, 15.0] {
            let want = digamma_series(x);
            let got = digamma(x);
            assert!((got - want).abs() < 1e-11 * (1.0 + want.abs()), "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn digamma_known_values() {
        assert!((digamma(1.0f64) + EULER_GAMMA).abs() < 1e-14);
        assert!((digamma(2.0f64) - (1.0 - EULER_GAMMA)).abs() < 1e-14);
        assert!((digamma(0.5f64) + EULER_GAMMA + 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn logmdigamma_values() {
        assert!((logmdigamma(1.0f64).unwrap() - EULER_GAMMA).abs() < 1e-14);
        let big = logmdigamma(1e8f64).unwrap();
        assert!(big > 0.5e-8 && big < 1e-8);
        assert!(matches!(logmdigamma(0.0f64), Err(Error::Domain(_))));
    }

    #[test]
    fn logmdigamma_decreasing_and_positive() {
        let mut prev = f64::INFINITY;
        for i in 0..2000 {
            let x = 10f64.powf(-6.0 + 12.0 * i as f64 / 1999.0);
            let v = logmdigamma(x).unwrap();
            assert!(v > 0.0 && v < prev, "x={x}");
            prev = v;
        }
    }

    #[test]
    fn inverse_round_trip() {
        assert!((inv_logmdigamma(EULER_GAMMA).unwrap() - 1.0).abs() < 1e-12);
        let x = inv_logmdigamma(10.0f64).unwrap();
        assert!(x > 0.05 && x < 0.1);
        assert!((logmdigamma(x).unwrap() - 10.0).abs() < 1e-12 * 10.0);
        assert!(matches!(inv_logmdigamma(-1.0f64), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse_in_single_precision() {
        let x = inv_logmdigamma(0.3f32).unwrap();
        assert!((logmdigamma(x).unwrap() - 0.3).abs() < 1e-5);
    }

    #[test]
    fn zeta_prime_values() {
        assert!((zeta_prime(0.0f64) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        let z = zeta_prime(-40.0f64);
        assert!(z > 40.0 && z < 40.0 + 1.0 / 40.0);
        // Reference value from a 30-digit evaluation of φ(x)/Φ(x).
        assert!((z - 40.024_968_847_207_26).abs() < 1e-12);
        assert!(zeta_prime(-1.0f64) > zeta_prime(0.0) && zeta_prime(0.0) > zeta_prime(1.0f64));
    }

    #[test]
    fn zeta_prime_branches_agree_at_switch() {
        let x = ZETA_SWITCH;
        let direct = norm_pdf(x) / norm_cdf(x);
        let cf = zeta_prime(x - 1e-300);
        let t = -x;
        let mut tail = t;
        for k in (1..=120).rev() {
            tail = t + k as f64 / tail;
        }
        assert!((direct - tail).abs() < 1e-12 * tail, "{direct} vs {tail}");
        assert!((cf - direct).abs() < 1e-12 * direct);
    }
}
