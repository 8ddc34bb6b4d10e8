//! Daily volatility measures: realized variance, a flat-top realized kernel
//! with a modified Tukey–Hanning weight function, and the model-implied
//! totals.

use std::f64::consts::PI;
use std::io::Write;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gasfilter::{Family, FilterOutput};

/// Subsample size, in observations per day, of the sparse realized variance
/// used to estimate integrated variance in the bandwidth rule (about five
/// minutes of a 6.5 hour session).
pub const SPARSE_SAMPLES_PER_DAY: usize = 78;

/// `k(x) = sin^2(pi/2 (1 - x)^2)` on `[0, 1]`, zero beyond.
pub fn kernel_weight(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    let s = (0.5 * PI * (1.0 - x).powi(2)).sin();
    s * s
}

/// `int_0^1 k(x)^2 dx`, Simpson's rule.
fn kernel_k00() -> f64 {
    let m = 2000;
    let h = 1.0 / m as f64;
    let mut acc = kernel_weight(0.0).powi(2) + kernel_weight(1.0).powi(2);
    for j in 1..m {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * kernel_weight(j as f64 * h).powi(2);
    }
    acc * h / 3.0
}

/// `c = (k''(0)^2 / k00)^(1/5)` with `k''(0) = -2 pi^2`.
pub fn bandwidth_constant() -> f64 {
    let k2 = -2.0 * PI * PI;
    (k2 * k2 / kernel_k00()).powf(0.2)
}

pub fn realized_variance<T: Copy + Into<f64>>(y: &[T]) -> f64 {
    y.iter()
        .map(|&v| {
            let v: f64 = v.into();
            v * v
        })
        .sum()
}

/// Realized autocovariance `sum_{j > h} y_j y_{j-h}`.
fn autocov(y: &[f64], h: usize) -> f64 {
    y[h..].iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Average of the `q` offset sparse realized variances built from sums of
/// `q` consecutive returns.
fn subsampled_rv(y: &[f64], q: usize) -> f64 {
    if q <= 1 {
        return realized_variance(y);
    }
    let mut total = 0.0;
    for offset in 0..q {
        let mut rv = 0.0;
        let mut start = offset;
        while start + q <= y.len() {
            let s: f64 = y[start..start + q].iter().sum();
            rv += s * s;
            start += q;
        }
        total += rv;
    }
    total / q as f64
}

/// Plug-in bandwidth `H = c xi^(4/5) n^(3/5)` with
/// `xi^2 = omega^2 / IV`, `omega^2 = RV / (2n)` from all returns and `IV`
/// from a subsampled sparse realized variance. At least 1.
pub fn bandwidth(y: &[f64]) -> usize {
    let n = y.len();
    if n < 2 {
        return 1;
    }
    let rv = realized_variance(y);
    let noise = rv / (2.0 * n as f64);
    let q = (n / SPARSE_SAMPLES_PER_DAY).max(1);
    let iv = subsampled_rv(y, q);
    if !(noise > 0.0) || !(iv > 0.0) {
        return 1;
    }
    let xi = (noise / iv).sqrt();
    let h = bandwidth_constant() * xi.powf(0.8) * (n as f64).powf(0.6);
    (h.ceil() as usize).max(1)
}

/// `gamma_0 + sum_{h=1}^{H} k((h-1)/H) (gamma_h + gamma_{-h})` with the
/// plug-in bandwidth.
pub fn realized_kernel<T: Copy + Into<f64>>(y: &[T]) -> Result<f64> {
    let y: Vec<f64> = y.iter().map(|&v| v.into()).collect();
    let h = bandwidth(&y);
    realized_kernel_with_bandwidth(&y, h)
}

/// As [`realized_kernel`] with a given bandwidth. A bandwidth the series is
/// too short for is cut to `(n - 1) / 2`.
pub fn realized_kernel_with_bandwidth(y: &[f64], bandwidth: usize) -> Result<f64> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty series".into()));
    }
    if bandwidth == 0 {
        return Err(Error::ZeroLag);
    }
    let mut h_max = bandwidth;
    if n <= 2 * h_max + 1 {
        h_max = (n - 1) / 2;
        warn!("realized kernel bandwidth {bandwidth} too large for {n} returns; using {h_max}");
    }
    let mut rk = autocov(y, 0);
    for h in 1..=h_max {
        rk += 2.0 * kernel_weight((h - 1) as f64 / h_max as f64) * autocov(y, h);
    }
    Ok(rk)
}

/// `sum_i (1 - pi_i)(|mu_i| + delta_i + pi_i mu_i^2)` for the Skellam
/// families, the summed conditional variance otherwise. `None` when the
/// variance does not exist.
pub fn total_model_variance(output: &FilterOutput) -> Option<f64> {
    match output.family {
        Family::ZiskellamMeandisp | Family::ZiskellamMeanvar => Some(
            (0..output.len())
                .map(|i| {
                    let mu = output.mu_path[i];
                    let pi = output.pi_path[i];
                    let delta = output.overdispersion(i).unwrap();
                    (1.0 - pi) * (mu.abs() + delta + pi * mu * mu)
                })
                .sum(),
        ),
        _ => (0..output.len())
            .map(|i| output.conditional_moments(i).map(|m| m.1))
            .sum(),
    }
}

/// `sum_i exp(omega + eps_i)`
pub fn adjusted_model_volatility(output: &FilterOutput) -> f64 {
    output.adjusted_path().iter().sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyMeasures {
    pub day: NaiveDate,
    pub rv: f64,
    pub rk: f64,
    pub tmv: Option<f64>,
    pub amv: f64,
}

impl DailyMeasures {
    pub fn compute(day: NaiveDate, y: &[i64], output: &FilterOutput) -> Result<Self> {
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        Ok(DailyMeasures {
            day,
            rv: realized_variance(&yf),
            rk: realized_kernel(&yf)?,
            tmv: total_model_variance(output),
            amv: adjusted_model_volatility(output),
        })
    }
}

/// CSV `day,rv,rk,tmv,amv`.
pub fn write_measures_csv<W: Write>(w: W, rows: &[DailyMeasures]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["day", "rv", "rk", "tmv", "amv"])?;
    for r in rows {
        wtr.write_record([
            r.day.to_string(),
            r.rv.to_string(),
            r.rk.to_string(),
            r.tmv.map_or_else(|| "NA".into(), |v| v.to_string()),
            r.amv.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<measures writer>", e))?;
    Ok(())
}

/// Sample Pearson correlation. `None` for fewer than two points or zero
/// variance.
pub fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n < 2 || b.len() != n {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gasfilter::{filter, ModelInput, ModelParams, Variant};
    use crate::simulator::simulate_noisy_random_walk;

    #[test]
    fn rv_examples() {
        assert_eq!(realized_variance(&[1i32, -1, 2]), 6.0);
        assert_eq!(realized_variance(&[0i32; 10]), 0.0);
    }

    #[test]
    fn kernel_shape() {
        assert_eq!(kernel_weight(0.0), 1.0);
        assert!(kernel_weight(1.0).abs() < 1e-30);
        assert_eq!(kernel_weight(1.5), 0.0);
        // Numerical second derivative at zero.
        let h = 1e-4;
        let d2 = (kernel_weight(2.0 * h) - 2.0 * kernel_weight(h) + kernel_weight(0.0)) / (h * h);
        assert!((d2 + 2.0 * PI * PI).abs() < 1e-2, "{d2}");
    }

    #[test]
    fn unit_bandwidth_is_rv_plus_first_autocovariance() {
        let y = [1.0, -2.0, 0.5, 3.0, -1.0];
        let rk = realized_kernel_with_bandwidth(&y, 1).unwrap();
        let want = realized_variance(&y) + 2.0 * autocov(&y, 1);
        assert!((rk - want).abs() < 1e-12);
    }

    #[test]
    fn constant_zero_series() {
        assert_eq!(realized_kernel(&[0i32; 100]).unwrap(), 0.0);
    }

    #[test]
    fn short_series_cuts_bandwidth() {
        let y = [1.0, -1.0, 2.0, 0.0, 1.0];
        let a = realized_kernel_with_bandwidth(&y, 10).unwrap();
        let b = realized_kernel_with_bandwidth(&y, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_free_ratio_near_one() {
        let rw = simulate_noisy_random_walk(100_000, 1e-4, 0.0, 4).unwrap();
        let r = rw.returns();
        let ratio = realized_kernel(&r).unwrap() / realized_variance(&r);
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn tmv_examples() {
        let out = FilterOutput {
            family: Family::ZiskellamMeandisp,
            omega: 0.0,
            nu: 5.0,
            mu_path: vec![1.0],
            delta_path: vec![1.0],
            epsilon_path: vec![0.0],
            pi_path: vec![0.2],
            log_adjust_path: vec![0.0],
            loglik_terms: vec![-1.0],
            loglik_mean: -1.0,
        };
        assert!((total_model_variance(&out).unwrap() - 1.76).abs() < 1e-15);
    }

    #[test]
    fn amv_static_and_identity() {
        let params = ModelParams {
            omega: 0.4,
            ..Default::default()
        };
        let y = vec![0, 1, -1, 2, 0];
        let out = filter(
            &Variant::Naive.spec(),
            &params,
            &ModelInput::unadjusted(y.clone()),
        )
        .unwrap();
        assert!((adjusted_model_volatility(&out) - 5.0 * 0.4f64.exp()).abs() < 1e-12);
        let tmv = total_model_variance(&out).unwrap();
        assert!((tmv - out.delta_path.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn measures_csv() {
        let rows = [DailyMeasures {
            day: NaiveDate::from_ymd_opt(2022, 3, 1).unwrap(),
            rv: 6.0,
            rk: 5.5,
            tmv: Some(6.2),
            amv: 4.0,
        }];
        let mut buf = Vec::new();
        write_measures_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "day,rv,rk,tmv,amv\n2022-03-01,6,5.5,6.2,4\n"
        );
    }

    #[test]
    fn correlation_basics() {
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(correlation(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
