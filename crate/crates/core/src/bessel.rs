//! Modified Bessel functions of the first kind for integer order, evaluated
//! in log scale.
//!
//! Two regimes are used. For `x <= SERIES_MAX_ARG` the ascending power
//! series is summed relative to its leading term, so no intermediate value
//! over- or underflows. For larger arguments `ln I_0` comes from the Hankel
//! asymptotic expansion and higher orders are reached through the ratios
//! `I_k / I_{k-1}`, obtained from Gauss' continued fraction at the top order
//! and the (stable) downward three-term recurrence below it.
//!
//! `I_{-n}(x) = I_n(x)` for integer `n`, so only `|order|` matters.

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Largest argument handled by the power series.
pub const SERIES_MAX_ARG: f64 = 30.0;

/// `ln I_n(x)` together with the neighbouring ratios `I_{n+1}/I_n` and
/// `I_{n-1}/I_n`, which is everything the Skellam scores need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselTriple {
    pub log_i: f64,
    pub ratio_up: f64,
    pub ratio_down: f64,
}

/// `ln I_|order|(x)`. Returns `-inf` for `x = 0` and nonzero order.
pub fn log_bessel_i(order: i64, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "Bessel argument must be finite and nonnegative, got {x}"
        )));
    }
    let nu = order.unsigned_abs();
    if x == 0.0 {
        return Ok(if nu == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(bessel_triple(nu, x).log_i)
}

/// Evaluates [`BesselTriple`] for `x > 0`.
///
/// The caller guarantees `x` is positive and finite.
pub fn bessel_triple(nu: u64, x: f64) -> BesselTriple {
    debug_assert!(x > 0.0 && x.is_finite());
    let (log_i, ratio_up) = if x <= SERIES_MAX_ARG {
        series(nu, x)
    } else {
        asymptotic(nu, x)
    };
    // I_{n-1} = I_{n+1} + (2n/x) I_n, and I_{-1} = I_1.
    let ratio_down = if nu == 0 {
        ratio_up
    } else {
        ratio_up + 2.0 * nu as f64 / x
    };
    BesselTriple {
        log_i,
        ratio_up,
        ratio_down,
    }
}

fn series(nu: u64, x: f64) -> (f64, f64) {
    let half = 0.5 * x;
    let q = half * half;
    let nuf = nu as f64;
    // Terms are relative to a_0 = (x/2)^nu / nu!.
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut sum_up = 1.0 / (nuf + 1.0);
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + nuf));
        sum += term;
        sum_up += term / (k + nuf + 1.0);
        if term <= sum * 1e-17 {
            break;
        }
    }
    let log_a0 = nuf * half.ln() - ln_factorial(nu);
    (log_a0 + sum.ln(), half * sum_up / sum)
}

fn asymptotic(nu: u64, x: f64) -> (f64, f64) {
    let log_i0 = log_i0_hankel(x);
    if nu == 0 {
        return (log_i0, ratio_cf(1, x));
    }
    let top = ratio_cf(nu + 1, x);
    let mut r = top;
    let mut log_sum = 0.0;
    for k in (1..=nu).rev() {
        r = 1.0 / (2.0 * k as f64 / x + r);
        log_sum += r.ln();
    }
    (log_i0 + log_sum, top)
}

fn log_i0_hankel(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let factor = odd * odd / (8.0 * k * x);
        if factor >= 1.0 {
            break;
        }
        term *= factor;
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
}

/// `I_n(x) / I_{n-1}(x)` via the continued fraction
/// `1 / (2n/x + 1 / (2(n+1)/x + ...))`, modified Lentz evaluation.
fn ratio_cf(n: u64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let b = |j: u64| 2.0 * (n + j) as f64 / x;
    let mut f = b(0).max(TINY);
    let mut c = f;
    let mut d = 0.0;
    let max_iter = 10_000 + 4 * x as u64;
    for j in 1..max_iter {
        let bj = b(j);
        d += bj;
        if d == 0.0 {
            d = TINY;
        }
        c = bj + 1.0 / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain power series, no log scaling. Valid for moderate x and order.
    fn series_oracle(nu: u64, x: f64) -> f64 {
        let half = x / 2.0;
        let mut fact_nu = 1.0;
        for j in 1..=nu {
            fact_nu *= j as f64;
        }
        let mut term = half.powi(nu as i32) / fact_nu;
        let mut sum = term;
        for k in 1..400u64 {
            term *= half * half / (k as f64 * (k + nu) as f64);
            sum += term;
        }
        sum
    }

    /// `I_n(x) = (1/pi) int_0^pi exp(x cos t) cos(n t) dt`, trapezoid rule on
    /// a periodic integrand, scaled by `exp(-x)`. Returns `ln I_n(x)`.
    fn integral_oracle(nu: u64, x: f64) -> f64 {
        let m = 20_000;
        let h = std::f64::consts::PI / m as f64;
        let f = |t: f64| (x * (t.cos() - 1.0)).exp() * (nu as f64 * t).cos();
        let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
        for j in 1..m {
            s += f(j as f64 * h);
        }
        x + (s * h / std::f64::consts::PI).ln()
    }

    #[test]
    fn zero_argument() {
        assert_eq!(log_bessel_i(0, 0.0).unwrap(), 0.0);
        assert_eq!(log_bessel_i(3, 0.0).unwrap(), f64::NEG_INFINITY);
        assert!(log_bessel_i(0, -1.0).is_err());
    }

    #[test]
    fn known_values() {
        let i0 = log_bessel_i(0, 2.0).unwrap().exp();
        let i1 = log_bessel_i(1, 2.0).unwrap().exp();
        assert!((i0 - 2.279_585_302_336_067).abs() < 1e-12);
        assert!((i1 - 1.590_636_854_637_329).abs() < 1e-12);
        assert_eq!(
            log_bessel_i(-4, 1.5).unwrap(),
            log_bessel_i(4, 1.5).unwrap()
        );
    }

    #[test]
    fn series_regime_against_oracle() {
        for &x in &[1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 29.9, 30.0] {
            for nu in [0u64, 1, 2, 3, 5, 10, 25, 50] {
                let got = log_bessel_i(nu as i64, x).unwrap();
                let want = series_oracle(nu, x).ln();
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                    "nu={nu} x={x}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn asymptotic_regime_against_integral() {
        for &x in &[30.0001, 31.0, 45.0, 80.0, 200.0, 600.0] {
            for nu in [0u64, 1, 2, 5, 10, 20] {
                let got = log_bessel_i(nu as i64, x).unwrap();
                let want = integral_oracle(nu, x);
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                    "nu={nu} x={x}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn regimes_agree_at_threshold() {
        for nu in [0u64, 1, 7, 40, 150, 300] {
            let below = bessel_triple(nu, SERIES_MAX_ARG);
            let above = asymptotic(nu, SERIES_MAX_ARG);
            assert!(
                (below.log_i - above.0).abs() < 1e-10 * below.log_i.abs().max(1.0),
                "nu={nu}: {} vs {}",
                below.log_i,
                above.0
            );
            assert!((below.ratio_up - above.1).abs() < 1e-10);
        }
    }

    #[test]
    fn ratios_match_neighbouring_orders() {
        for &x in &[0.3, 2.0, 12.0, 35.0, 90.0] {
            for nu in [0u64, 1, 4, 17] {
                let t = bessel_triple(nu, x);
                let up = (log_bessel_i(nu as i64 + 1, x).unwrap() - t.log_i).exp();
                let down = (log_bessel_i(nu as i64 - 1, x).unwrap() - t.log_i).exp();
                assert!((t.ratio_up - up).abs() < 1e-9 * up.max(1.0));
                assert!((t.ratio_down - down).abs() < 1e-9 * down.max(1.0));
            }
        }
    }

    #[test]
    fn high_order_small_argument() {
        // ln I_300(0.5) ~ 300 ln(0.25) - ln 300! to leading order.
        let got = log_bessel_i(300, 0.5).unwrap();
        let lead = 300.0 * 0.25f64.ln() - ln_factorial(300);
        assert!((got - lead).abs() < 1e-3);
        assert!(got.is_finite());
    }
}
