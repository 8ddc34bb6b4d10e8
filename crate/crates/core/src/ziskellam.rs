//! Zero-inflated Skellam distribution in the mean-overdispersion
//! parametrization.
//!
//! `Y = 0` with probability `pi`, otherwise `Y = P1 - P2` with independent
//! Poisson variables of rates `lambda1 = (|mu| + mu + delta) / 2` and
//! `lambda2 = (|mu| - mu + delta) / 2`. The overdispersion `delta` is the
//! variance in excess of `|mu|`, so any real `mu` is admissible for any
//! `delta > 0`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_triple;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZiSkellamParams {
    pub mu: f64,
    pub delta: f64,
    pub pi: f64,
}

impl ZiSkellamParams {
    pub fn new(mu: f64, delta: f64, pi: f64) -> Result<Self> {
        let p = ZiSkellamParams { mu, delta, pi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::Domain(format!("mu must be finite, got {}", self.mu)));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Domain(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(0.0..1.0).contains(&self.pi) {
            return Err(Error::Domain(format!(
                "pi must lie in [0, 1), got {}",
                self.pi
            )));
        }
        Ok(())
    }

    /// Poisson rates `(lambda1, lambda2)`.
    pub fn rates(&self) -> (f64, f64) {
        let a = self.mu.abs();
        (
            0.5 * (a + self.mu + self.delta),
            0.5 * (a - self.mu + self.delta),
        )
    }

    /// Argument of the Bessel function, `2 sqrt(lambda1 lambda2)`.
    pub fn bessel_arg(&self) -> f64 {
        (self.delta * self.delta + 2.0 * self.mu.abs() * self.delta).sqrt()
    }
}

/// Log-probability and all three scores at one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub log_prob: f64,
    /// d ln P / d ln(delta)
    pub score_logdelta: f64,
    /// d ln P / d mu (symmetric limit at mu = 0)
    pub score_mu: f64,
    /// d ln P / d logit(pi)
    pub score_logit_pi: f64,
}

/// Evaluates the log-PMF and the scores, sharing the Bessel work.
pub fn evaluate(y: i64, p: &ZiSkellamParams) -> Evaluation {
    let ZiSkellamParams { mu, delta, pi } = *p;
    let abs_mu = mu.abs();
    let x = p.bessel_arg();
    // ln(lambda1 / lambda2), computed without cancellation.
    let log_ratio = (2.0 * abs_mu / delta).ln_1p().copysign(mu);
    let yf = y as f64;
    let b = bessel_triple(y.unsigned_abs(), x);

    let log_skellam = -abs_mu - delta + 0.5 * yf * log_ratio + b.log_i;
    let log_keep = (-pi).ln_1p();
    let log_prob = if y != 0 || pi == 0.0 {
        log_keep + log_skellam
    } else {
        log_add_exp(pi.ln(), log_keep + log_skellam)
    };
    // Share of the mass at y coming from the Skellam component.
    let weight = if y == 0 && pi > 0.0 {
        (log_keep + log_skellam - log_prob).exp()
    } else {
        1.0
    };

    // I_{y+1}/I_y and I_{y-1}/I_y for signed y.
    let (bessel_next, bessel_prev) = if y >= 0 {
        (b.ratio_up, b.ratio_down)
    } else {
        (b.ratio_down, b.ratio_up)
    };

    let score_logdelta = weight
        * ((delta * delta + abs_mu * delta) / (2.0 * x) * (b.ratio_up + b.ratio_down)
            - mu * yf / (delta + 2.0 * abs_mu)
            - delta);

    // dS(y)/d lambda1 = S(y-1) - S(y), dS(y)/d lambda2 = S(y+1) - S(y).
    let half_log_ratio = 0.5 * log_ratio;
    let prev_ratio = (-half_log_ratio).exp() * bessel_prev;
    let next_ratio = half_log_ratio.exp() * bessel_next;
    let dmu = if mu > 0.0 {
        prev_ratio - 1.0
    } else if mu < 0.0 {
        1.0 - next_ratio
    } else {
        0.5 * (prev_ratio - next_ratio)
    };
    let score_mu = weight * dmu;

    let score_logit_pi = if y != 0 {
        -pi
    } else if pi == 0.0 {
        0.0
    } else {
        let s = log_skellam.exp();
        pi * (1.0 - pi) * (1.0 - s) / log_prob.exp()
    };

    Evaluation {
        log_prob,
        score_logdelta,
        score_mu,
        score_logit_pi,
    }
}

pub fn log_pmf(y: i64, p: &ZiSkellamParams) -> f64 {
    evaluate(y, p).log_prob
}

/// `(mean, variance)`.
pub fn moments(p: &ZiSkellamParams) -> (f64, f64) {
    let keep = 1.0 - p.pi;
    (
        keep * p.mu,
        keep * (p.mu.abs() + p.delta + p.pi * p.mu * p.mu),
    )
}

pub fn score_logdelta(y: i64, p: &ZiSkellamParams) -> f64 {
    evaluate(y, p).score_logdelta
}

pub fn score_mu(y: i64, p: &ZiSkellamParams) -> f64 {
    evaluate(y, p).score_mu
}

pub fn score_logit_pi(y: i64, p: &ZiSkellamParams) -> Result<f64> {
    if !(p.pi > 0.0 && p.pi < 1.0) {
        return Err(Error::Domain(format!(
            "logit score needs 0 < pi < 1, got {}",
            p.pi
        )));
    }
    Ok(evaluate(y, p).score_logit_pi)
}

/// Draws one value.
pub fn sample<R: Rng + ?Sized>(p: &ZiSkellamParams, rng: &mut R) -> i64 {
    if p.pi > 0.0 && rng.random::<f64>() < p.pi {
        return 0;
    }
    let (l1, l2) = p.rates();
    poisson(l1, rng) - poisson(l2, rng)
}

fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> i64 {
    // Rates are positive by construction of `rates`.
    let dist = Poisson::new(lambda).expect("positive Poisson rate");
    dist.sample(rng) as i64
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
