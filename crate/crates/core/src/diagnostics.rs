//! Residual diagnostics and out-of-sample evaluation.
//!
//! Residuals are Pearson residuals `(y - E) / sqrt(V)` with the conditional
//! mean and variance implied by the filtered parameters.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::gasfilter::{filter, Family, FilterOutput, ModelInput, Variant};

/// Lags reported in [`DiagnosticsReport`].
pub const REPORT_LAGS: [usize; 3] = [1, 10, 100];

/// Pearson residuals. `Ok(None)` when the family has no finite variance
/// (Student's t with `nu <= 1`); for `1 < nu <= 2` the scale replaces the
/// standard deviation.
pub fn residuals(output: &FilterOutput, y: &[i64]) -> Result<Option<Vec<f64>>> {
    if y.len() != output.len() {
        return Err(Error::InvalidInput("series lengths differ".into()));
    }
    if output.family == Family::StudentT && output.nu <= 1.0 {
        return Ok(None);
    }
    let mut r = Vec::with_capacity(y.len());
    for (i, &v) in y.iter().enumerate() {
        let (mean, var) = match output.conditional_moments(i) {
            Some(m) => m,
            None => (output.mu_path[i], output.delta_path[i]),
        };
        if !(var > 0.0) {
            return Err(Error::Domain(format!("zero conditional variance at {i}")));
        }
        r.push((v as f64 - mean) / var.sqrt());
    }
    Ok(Some(r))
}

/// R² of the least-squares regression of `series` on its first `max_lag`
/// lags and an intercept. A constant series gives 0.
pub fn r2_regression(series: &[f64], max_lag: usize) -> Result<f64> {
    let (r2, _) = lag_regression(series, max_lag)?;
    Ok(r2)
}

/// R² and number of regression rows.
fn lag_regression(x: &[f64], l: usize) -> Result<(f64, usize)> {
    if l == 0 {
        return Err(Error::ZeroLag);
    }
    let n = x.len();
    if n <= l + 1 {
        return Err(Error::TooShort {
            needed: l + 2,
            got: n,
        });
    }
    let rows = n - l;
    // Rows t = l..n, regressor k is x[t - k].
    let col = |k: usize| &x[l - k..n - k];
    let target = &x[l..];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let sum = |a: &[f64]| a.iter().sum::<f64>();

    let mut sums = vec![0.0; l + 1];
    sums[1] = sum(col(1));
    for k in 1..l {
        // col(k+1) drops x[n-1-k] at the end and gains x[l-1-k] in front.
        sums[k + 1] = sums[k] + x[l - 1 - k] - x[n - 1 - k];
    }
    let mut s = DMatrix::<f64>::zeros(l, l);
    for j in 1..=l {
        s[(0, j - 1)] = dot(col(1), col(j));
    }
    for i in 1..l {
        for j in i..l {
            // Entry (i, j) holds sum_t x[t-1-i] x[t-1-j]; each diagonal step
            // shifts the window by one row.
            s[(i, j)] =
                s[(i - 1, j - 1)] + x[l - 1 - i] * x[l - 1 - j] - x[n - 1 - i] * x[n - 1 - j];
        }
    }
    let m: Vec<f64> = (1..=l).map(|k| sums[k] / rows as f64).collect();
    let ty = sum(target);
    let my = ty / rows as f64;
    let syy = dot(target, target) - rows as f64 * my * my;
    if !(syy > 1e-300) || syy <= 1e-14 * dot(target, target) {
        return Ok((0.0, rows));
    }
    let mut a = DMatrix::<f64>::zeros(l, l);
    for i in 0..l {
        for j in i..l {
            let v = s[(i, j)] - rows as f64 * m[i] * m[j];
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let b = DVector::from_iterator(
        l,
        (1..=l).map(|k| dot(col(k), target) - rows as f64 * m[k - 1] * my),
    );
    let beta = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::Linalg(e.to_string()))?,
    };
    let r2 = (beta.dot(&b) / syy).clamp(0.0, 1.0);
    Ok((if r2.is_finite() { r2 } else { 0.0 }, rows))
}

/// `P(chi2_df > q)`
fn chi2_sf(df: usize, q: f64) -> f64 {
    if q <= 0.0 {
        return 1.0;
    }
    gamma_ur(0.5 * df as f64, 0.5 * q).clamp(0.0, 1.0)
}

/// Ljung–Box p-value for autocorrelations up to `lag`.
pub fn ljung_box(series: &[f64], lag: usize) -> Result<f64> {
    if lag == 0 {
        return Err(Error::ZeroLag);
    }
    let n = series.len();
    if n <= lag + 1 {
        return Err(Error::TooShort {
            needed: lag + 2,
            got: n,
        });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) {
        return Ok(1.0);
    }
    let nf = n as f64;
    let mut q = 0.0;
    for k in 1..=lag {
        let ck: f64 = c[k..].iter().zip(&c).map(|(a, b)| a * b).sum();
        let rho = ck / c0;
        q += rho * rho / (nf - k as f64);
    }
    Ok(chi2_sf(lag, nf * (nf + 2.0) * q))
}

/// Engle's ARCH-LM p-value: `T R²` of the regression of the squared series
/// on `lag` of its lags.
pub fn arch_lm(series: &[f64], lag: usize) -> Result<f64> {
    let sq: Vec<f64> = series.iter().map(|v| v * v).collect();
    let (r2, rows) = lag_regression(&sq, lag)?;
    Ok(chi2_sf(lag, rows as f64 * r2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DiagnosticsReport {
    pub ar_r2: BTreeMap<usize, f64>,
    pub arch_r2: BTreeMap<usize, f64>,
    pub ljung_box_p: BTreeMap<usize, f64>,
    pub arch_lm_p: BTreeMap<usize, f64>,
    pub loglik_mean: f64,
}

/// Residual statistics at [`REPORT_LAGS`]. Lags the series is too short for
/// are left out. `None` when residuals are undefined.
pub fn diagnose(output: &FilterOutput, y: &[i64]) -> Result<Option<DiagnosticsReport>> {
    let Some(r) = residuals(output, y)? else {
        return Ok(None);
    };
    let sq: Vec<f64> = r.iter().map(|v| v * v).collect();
    let mut rep = DiagnosticsReport {
        loglik_mean: output.loglik_mean,
        ..Default::default()
    };
    for lag in REPORT_LAGS {
        if r.len() <= lag + 1 {
            warn!("series of {} residuals too short for lag {lag}", r.len());
            continue;
        }
        rep.ar_r2.insert(lag, r2_regression(&r, lag)?);
        rep.arch_r2.insert(lag, r2_regression(&sq, lag)?);
        rep.ljung_box_p.insert(lag, ljung_box(&r, lag)?);
        rep.arch_lm_p.insert(lag, arch_lm(&r, lag)?);
    }
    Ok(Some(rep))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    pub loglik_mean: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// Filters `input` with fixed fitted coefficients and scores the point
/// forecasts `(1 - pi_i) mu_i`.
pub fn evaluate_forecast(fitted: &FitResult, input: &ModelInput) -> Result<ForecastMetrics> {
    let out = filter(&fitted.spec, &fitted.params, input)?;
    Ok(forecast_metrics(&out, &input.y))
}

pub fn forecast_metrics(out: &FilterOutput, y: &[i64]) -> ForecastMetrics {
    let n = y.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let e = v as f64 - (1.0 - out.pi_path[i]) * out.mu_path[i];
        abs += e.abs();
        sq += e * e;
    }
    ForecastMetrics {
        loglik_mean: out.loglik_mean,
        mae: abs / n,
        rmse: (sq / n).sqrt(),
    }
}

/// `Phi(b) - Phi(a)` for `a < b`, evaluated on the side of zero where the
/// subtraction does not cancel.
fn normal_interval(a: f64, b: f64) -> f64 {
    let upper = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    if a >= 0.0 {
        upper(a) - upper(b)
    } else if b <= 0.0 {
        upper(-b) - upper(-a)
    } else {
        1.0 - upper(b) - upper(-a)
    }
}

/// `ln(Phi((y + 0.5 - mu)/sigma) - Phi((y - 0.5 - mu)/sigma))`.
pub fn discretized_normal_loglik(y: i64, mu: f64, sigma2: f64) -> f64 {
    let s = sigma2.sqrt();
    let a = (y as f64 - 0.5 - mu) / s;
    let b = (y as f64 + 0.5 - mu) / s;
    let p = normal_interval(a, b);
    if p > 0.0 {
        p.ln()
    } else {
        // Far tail: the density at the midpoint times the unit width.
        let z = (y as f64 - mu) / s;
        -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI * sigma2).ln()
    }
}

/// The same interval probability for a Student's t with scale `sqrt(sigma2)`.
pub fn discretized_student_t_loglik(y: i64, mu: f64, sigma2: f64, nu: f64) -> Result<f64> {
    let t = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::Domain(e.to_string()))?;
    let s = sigma2.sqrt();
    let a = (y as f64 - 0.5 - mu) / s;
    let b = (y as f64 + 0.5 - mu) / s;
    let p = if a >= 0.0 {
        t.sf(a) - t.sf(b)
    } else if b <= 0.0 {
        t.cdf(b) - t.cdf(a)
    } else {
        1.0 - t.sf(b) - t.cdf(a)
    };
    if p > 0.0 {
        Ok(p.ln())
    } else {
        Err(Error::NonFinite { index: 0 })
    }
}

/// Per-observation discretized log-likelihood of a continuous-family
/// filter run.
pub fn discretized_loglik_terms(output: &FilterOutput, y: &[i64]) -> Result<Vec<f64>> {
    let mut terms = Vec::with_capacity(y.len());
    for (i, &v) in y.iter().enumerate() {
        let mu = output.mu_path[i];
        let s2 = output.delta_path[i];
        let term = match output.family {
            Family::Normal => discretized_normal_loglik(v, mu, s2),
            Family::StudentT => discretized_student_t_loglik(v, mu, s2, output.nu)
                .map_err(|_| Error::NonFinite { index: i })?,
            _ => {
                return Err(Error::InvalidInput(
                    "discretization applies to continuous families only".into(),
                ))
            }
        };
        terms.push(term);
    }
    Ok(terms)
}

/// One row of a model-comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: Variant,
    pub loglik_mean: f64,
    /// Discretized log-likelihood for continuous families.
    pub discretized_loglik_mean: Option<f64>,
    pub report: Option<DiagnosticsReport>,
}

/// CSV with columns `variant,loglik,disc_loglik`, then
/// `ar_r2_<lag>`, `arch_r2_<lag>`, `lb_p_<lag>`, `archlm_p_<lag>` for each
/// reported lag. Missing values are written as `NA`.
pub fn write_comparison_csv<W: Write>(w: W, rows: &[ComparisonRow]) -> Result<()> {
    write_rows(w, None, rows.iter().map(|r| (None, r)))
}

/// As [`write_comparison_csv`] with a leading `day` column.
pub fn write_daily_comparison_csv<W: Write>(
    w: W,
    rows: &[(NaiveDate, ComparisonRow)],
) -> Result<()> {
    write_rows(
        w,
        Some("day"),
        rows.iter().map(|(d, r)| (Some(d.to_string()), r)),
    )
}

fn write_rows<'a, W: Write>(
    w: W,
    lead: Option<&str>,
    rows: impl Iterator<Item = (Option<String>, &'a ComparisonRow)>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = lead.into_iter().map(String::from).collect();
    header.extend(["variant".to_string(), "loglik".into(), "disc_loglik".into()]);
    for prefix in ["ar_r2", "arch_r2", "lb_p", "archlm_p"] {
        for lag in REPORT_LAGS {
            header.push(format!("{prefix}_{lag}"));
        }
    }
    wtr.write_record(&header)?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for (key, row) in rows {
        let mut rec: Vec<String> = key.into_iter().collect();
        rec.extend([
            row.variant.name().to_string(),
            row.loglik_mean.to_string(),
            fmt(row.discretized_loglik_mean),
        ]);
        for m in report_maps(row.report.as_ref()) {
            for lag in REPORT_LAGS {
                rec.push(fmt(m.and_then(|m| m.get(&lag).copied())));
            }
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()
        .map_err(|e| Error::io("<comparison writer>", e))?;
    Ok(())
}

fn report_maps(r: Option<&DiagnosticsReport>) -> [Option<&BTreeMap<usize, f64>>; 4] {
    match r {
        Some(r) => [
            Some(&r.ar_r2),
            Some(&r.arch_r2),
            Some(&r.ljung_box_p),
            Some(&r.arch_lm_p),
        ],
        None => [None; 4],
    }
}

/// Per-variant averages of comparison rows, e.g. across days. Each entry
/// averages the rows where it is present; variants keep their first-seen
/// order.
pub fn mean_comparison(rows: &[ComparisonRow]) -> Vec<ComparisonRow> {
    let mut order: Vec<Variant> = Vec::new();
    for r in rows {
        if !order.contains(&r.variant) {
            order.push(r.variant);
        }
    }
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    order
        .into_iter()
        .map(|variant| {
            let group: Vec<&ComparisonRow> = rows.iter().filter(|r| r.variant == variant).collect();
            let reports: Vec<&DiagnosticsReport> =
                group.iter().filter_map(|r| r.report.as_ref()).collect();
            let report = (!reports.is_empty()).then(|| {
                let avg = |pick: usize| -> BTreeMap<usize, f64> {
                    REPORT_LAGS
                        .iter()
                        .filter_map(|&lag| {
                            let vals = reports
                                .iter()
                                .filter_map(|r| {
                                    report_maps(Some(r))[pick].and_then(|m| m.get(&lag).copied())
                                })
                                .collect();
                            mean(vals).map(|m| (lag, m))
                        })
                        .collect()
                };
                DiagnosticsReport {
                    ar_r2: avg(0),
                    arch_r2: avg(1),
                    ljung_box_p: avg(2),
                    arch_lm_p: avg(3),
                    loglik_mean: mean(reports.iter().map(|r| r.loglik_mean).collect()).unwrap(),
                }
            });
            ComparisonRow {
                variant,
                loglik_mean: mean(group.iter().map(|r| r.loglik_mean).collect()).unwrap(),
                discretized_loglik_mean: mean(
                    group
                        .iter()
                        .filter_map(|r| r.discretized_loglik_mean)
                        .collect(),
                ),
                report,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gasfilter::{ModelParams, Variant};
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    /// Plain OLS through the normal equations, built row by row.
    fn r2_oracle(x: &[f64], l: usize) -> f64 {
        let rows = x.len() - l;
        let mut design = DMatrix::<f64>::zeros(rows, l + 1);
        let mut target = DVector::<f64>::zeros(rows);
        for t in l..x.len() {
            design[(t - l, 0)] = 1.0;
            for k in 1..=l {
                design[(t - l, k)] = x[t - k];
            }
            target[t - l] = x[t];
        }
        let xtx = design.transpose() * &design;
        let xty = design.transpose() * &target;
        let beta = xtx.lu().solve(&xty).unwrap();
        let fitted = &design * beta;
        let my = target.mean();
        let ss_res: f64 = (&target - &fitted).iter().map(|e| e * e).sum();
        let ss_tot: f64 = target.iter().map(|v| (v - my).powi(2)).sum();
        1.0 - ss_res / ss_tot
    }

    #[test]
    fn r2_matches_direct_ols() {
        let x = normals(500, 1);
        let mut ar = vec![0.0; 500];
        for i in 1..500 {
            ar[i] = 0.6 * ar[i - 1] + x[i];
        }
        for l in [1, 2, 5, 17] {
            for s in [&x, &ar] {
                let a = r2_regression(s, l).unwrap();
                let b = r2_oracle(s, l);
                assert!((a - b).abs() < 1e-10, "lag {l}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn white_noise_r2() {
        let x = normals(100_000, 2);
        assert!(r2_regression(&x, 1).unwrap() < 0.001);
    }

    #[test]
    fn ar1_r2() {
        let e = normals(100_000, 3);
        let mut x = vec![0.0; e.len()];
        for i in 1..x.len() {
            x[i] = 0.9 * x[i - 1] + e[i];
        }
        let r2 = r2_regression(&x, 1).unwrap();
        assert!((r2 - 0.81).abs() < 0.02, "{r2}");
    }

    #[test]
    fn constant_series_r2_zero() {
        assert_eq!(r2_regression(&[3.0; 50], 1).unwrap(), 0.0);
        assert_eq!(r2_regression(&[3.0; 50], 10).unwrap(), 0.0);
    }

    #[test]
    fn zero_lag_rejected() {
        assert!(matches!(
            r2_regression(&[1.0, 2.0, 3.0], 0),
            Err(Error::ZeroLag)
        ));
        assert!(matches!(
            ljung_box(&[1.0, 2.0, 3.0], 0),
            Err(Error::ZeroLag)
        ));
        assert!(matches!(arch_lm(&[1.0, 2.0, 3.0], 0), Err(Error::ZeroLag)));
        assert!(r2_regression(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn ljung_box_size() {
        let mut rejections = 0;
        for seed in 0..200 {
            let x = normals(100_000, 1000 + seed);
            if ljung_box(&x, 10).unwrap() < 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / 200.0;
        assert!((0.02..=0.09).contains(&rate), "{rate}");
    }

    #[test]
    fn tests_detect_dependence() {
        let e = normals(20_000, 4);
        let mut x = vec![0.0; e.len()];
        for i in 1..x.len() {
            x[i] = 0.5 * x[i - 1] + e[i];
        }
        assert!(ljung_box(&x, 10).unwrap() < 1e-6);
        let mut g = vec![0.0; e.len()];
        for i in 1..g.len() {
            let h: f64 = 0.2 + 0.7 * g[i - 1] * g[i - 1];
            g[i] = h.sqrt() * e[i];
        }
        assert!(arch_lm(&g, 5).unwrap() < 1e-6);
    }

    #[test]
    fn pearson_residual_values() {
        let params = ModelParams {
            theta: 0.0,
            omega: 0.0,
            ..Default::default()
        };
        let spec = Variant::Naive.spec().without_adjustments();
        let out = filter(&spec, &params, &ModelInput::unadjusted(vec![0])).unwrap();
        assert_eq!(residuals(&out, &[0]).unwrap().unwrap(), vec![0.0]);

        // mu = 1 after y_1 = -1 with theta = -0.5: (2 - 1) / sqrt(1 + 1).
        let params = ModelParams {
            theta: -0.5,
            omega: 0.0,
            ..Default::default()
        };
        let spec = Variant::NoInflation.spec().without_adjustments();
        let y = vec![-2, 2];
        let out = filter(&spec, &params, &ModelInput::unadjusted(y.clone())).unwrap();
        assert_eq!(out.mu_path[1], 1.0);
        let r = residuals(&out, &y).unwrap().unwrap();
        let want = (2.0 - 1.0) / (1.0 + out.delta_path[1]).sqrt();
        assert!((r[1] - want).abs() < 1e-15);
    }

    #[test]
    fn residual_mean_near_zero_on_true_model() {
        use crate::simulator::{simulate_day, SimConfig};
        let params = ModelParams {
            theta: -0.35,
            omega: 0.0,
            phi: 0.97,
            alpha: 0.19,
            pi: 0.13,
            ..Default::default()
        };
        let spec = Variant::Proposed.spec().without_adjustments();
        let day = simulate_day(&SimConfig::new(spec, params, 50_001, 13)).unwrap();
        let out = filter(
            &spec,
            &params,
            &ModelInput::unadjusted(day.price_changes.clone()),
        )
        .unwrap();
        let r = residuals(&out, &day.price_changes).unwrap().unwrap();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        assert!(mean.abs() < 4.0 / (r.len() as f64).sqrt(), "{mean}");
    }

    #[test]
    fn student_t_residuals_undefined_for_small_nu() {
        let params = ModelParams {
            nu: 0.8,
            ..Default::default()
        };
        let spec = Variant::StudentT.spec().without_adjustments();
        let out = filter(&spec, &params, &ModelInput::unadjusted(vec![1, 0, -1])).unwrap();
        assert!(residuals(&out, &[1, 0, -1]).unwrap().is_none());
    }

    #[test]
    fn naive_forecast_metrics() {
        let y = vec![0, 3, -1, 0, 2, -5];
        let spec = Variant::Naive.spec().without_adjustments();
        let out = filter(
            &spec,
            &ModelParams::default(),
            &ModelInput::unadjusted(y.clone()),
        )
        .unwrap();
        let m = forecast_metrics(&out, &y);
        assert_eq!(m.mae, 11.0 / 6.0);
        assert_eq!(m.rmse, (39.0f64 / 6.0).sqrt());
    }

    fn interval_oracle(y: i64, mu: f64, s2: f64) -> f64 {
        // Composite Simpson on the density over [y - 0.5, y + 0.5].
        let s = s2.sqrt();
        let f = |x: f64| {
            (-(x - mu).powi(2) / (2.0 * s2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
        };
        let m = 2000;
        let (a, b) = (y as f64 - 0.5, y as f64 + 0.5);
        let h = (b - a) / m as f64;
        let mut acc = f(a) + f(b);
        for j in 1..m {
            acc += f(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        (acc * h / 3.0).ln()
    }

    #[test]
    fn discretized_normal_matches_integral() {
        for &(y, mu, s2) in &[
            (0, 0.0, 1.0),
            (3, -0.4, 2.5),
            (-7, 0.3, 4.0),
            (1, 0.9, 0.3),
            (12, 0.0, 9.0),
        ] {
            let got = discretized_normal_loglik(y, mu, s2);
            let want = interval_oracle(y, mu, s2);
            assert!((got - want).abs() < 1e-8, "{y} {mu} {s2}: {got} vs {want}");
        }
    }

    #[test]
    fn comparison_csv_header() {
        let mut buf = Vec::new();
        write_comparison_csv(
            &mut buf,
            &[ComparisonRow {
                variant: Variant::Naive,
                loglik_mean: -1.2,
                discretized_loglik_mean: None,
                report: None,
            }],
        )
        .unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert!(lines
            .next()
            .unwrap()
            .starts_with("variant,loglik,disc_loglik,ar_r2_1,ar_r2_10"));
        assert!(lines.next().unwrap().starts_with("naive,-1.2,NA,NA"));
    }

    #[test]
    fn mean_comparison_averages_present_entries() {
        let rep = |v: f64| DiagnosticsReport {
            ar_r2: [(1, v)].into_iter().collect(),
            loglik_mean: v,
            ..Default::default()
        };
        let row = |variant, ll, disc, report| ComparisonRow {
            variant,
            loglik_mean: ll,
            discretized_loglik_mean: disc,
            report,
        };
        let rows = [
            row(Variant::Normal, -1.0, Some(-2.0), Some(rep(0.2))),
            row(Variant::Naive, -3.0, None, None),
            row(Variant::Normal, -2.0, None, Some(rep(0.4))),
        ];
        let m = mean_comparison(&rows);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].variant, Variant::Normal);
        assert_eq!(m[0].loglik_mean, -1.5);
        assert_eq!(m[0].discretized_loglik_mean, Some(-2.0));
        let r = m[0].report.as_ref().unwrap();
        assert!((r.ar_r2[&1] - 0.3).abs() < 1e-15);
        assert!(!r.ar_r2.contains_key(&10));
        assert!(m[1].report.is_none());

        let mut buf = Vec::new();
        let day = NaiveDate::from_ymd_opt(2022, 3, 1).unwrap();
        write_daily_comparison_csv(&mut buf, &[(day, rows[1].clone())]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("day,variant,loglik,"));
        assert!(s
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("2022-03-01,naive,-3,NA"));
    }
}
