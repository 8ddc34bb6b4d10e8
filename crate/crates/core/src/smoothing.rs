//! Cubic smoothing splines and the intraday adjustment curves.
//!
//! The spline minimizes `sum w_i (y_i - g(x_i))^2 + lambda * int g''(x)^2 dx`
//! over a cubic B-spline basis with knots at (a subset of) the distinct
//! abscissae, with `lambda` chosen by generalized cross-validation. The knot
//! count and the search range for `lambda` follow the conventions of the
//! classic `smooth.spline` routine: at most ~200 knots, and
//! `lambda = r * 256^(3 s - 1)` for `s` in `[-1.5, 1.5]`, where `r` balances
//! the traces of the data and penalty matrices.
//!
//! Fitted curves are stored as piecewise cubic polynomials and extrapolate
//! as constants outside the fitted domain.

use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tickstore::TickDay;

/// Above this many points the data are pre-binned.
pub const BINNING_THRESHOLD: usize = 10_000;
pub const MAX_BINS: usize = 1_000;
pub const DEFAULT_FLOOR_EPS: f64 = 1e-4;
/// Quantile of adjusted durations beyond which points are left out of the
/// duration-relation fit.
pub const REL_TRUNCATION_QUANTILE: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineCurve {
    pub knots: Vec<f64>,
    /// `[a, b, c, d]` per interval: `a + b h + c h^2 + d h^3`, `h = x - knot`.
    pub coefficients: Vec<[f64; 4]>,
    pub smoothing_penalty: f64,
    pub domain: (f64, f64),
}

impl SplineCurve {
    pub fn constant(value: f64) -> Self {
        SplineCurve {
            knots: vec![0.0, 1.0],
            coefficients: vec![[value, 0.0, 0.0, 0.0]],
            smoothing_penalty: 0.0,
            domain: (0.0, 1.0),
        }
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let x = x.clamp(self.domain.0, self.domain.1);
        let j = match self.knots.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(j) => j,
            Err(j) => j.saturating_sub(1),
        };
        let j = j.min(self.coefficients.len() - 1);
        (j, x - self.knots[j])
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        if self.coefficients.len() == 1 && self.coefficients[0][1..] == [0.0; 3] {
            return self.coefficients[0][0];
        }
        let (j, h) = self.locate(x);
        let [a, b, c, d] = self.coefficients[j];
        a + h * (b + h * (c + h * d))
    }

    /// Derivative of order 1..=3 inside the domain, zero outside.
    pub fn derivative(&self, x: f64, order: u8) -> f64 {
        if x < self.domain.0 || x > self.domain.1 {
            return 0.0;
        }
        let (j, h) = self.locate(x);
        let [_, b, c, d] = self.coefficients[j];
        match order {
            1 => b + h * (2.0 * c + 3.0 * d * h),
            2 => 2.0 * c + 6.0 * d * h,
            3 => 6.0 * d,
            _ => 0.0,
        }
    }
}

/// Fits a smoothing spline with the penalty chosen by GCV.
pub fn fit_spline(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<SplineCurve> {
    let problem = SplineProblem::new(x, y, weights)?;
    problem.fit_gcv()
}

/// Fits a smoothing spline with a fixed penalty (in units of `x`).
pub fn fit_spline_with_penalty(
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    lambda: f64,
) -> Result<SplineCurve> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput("penalty must be nonnegative".into()));
    }
    let problem = SplineProblem::new(x, y, weights)?;
    let lambda_unit = lambda / problem.range.powi(3);
    let sol = problem.solve(lambda_unit)?;
    Ok(problem.to_curve(&sol.coef, lambda))
}

struct Solution {
    coef: DVector<f64>,
    gcv: f64,
}

struct SplineProblem {
    /// Collapsed, sorted, unit-scaled abscissae and their data.
    u: Vec<f64>,
    ybar: Vec<f64>,
    w: Vec<f64>,
    x_min: f64,
    range: f64,
    /// Interior + boundary knots on the unit scale.
    knots: Vec<f64>,
    /// Clamped knot vector.
    t: Vec<f64>,
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    penalty: DMatrix<f64>,
}

impl SplineProblem {
    fn new(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput("x and y lengths differ".into()));
        }
        if x.len() < 4 {
            return Err(Error::InvalidInput("need at least 4 points".into()));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite data".into()));
        }
        let ones;
        let w = match weights {
            Some(w) => {
                if w.len() != x.len() || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidInput("bad weights".into()));
                }
                w
            }
            None => {
                ones = vec![1.0; x.len()];
                &ones
            }
        };

        let (bx, by, bw) = if x.len() > BINNING_THRESHOLD {
            quantile_bins(x, y, w, MAX_BINS)
        } else {
            (x.to_vec(), y.to_vec(), w.to_vec())
        };
        let (xs, ybar, mut wbar) = collapse_ties(&bx, &by, &bw);
        if xs.len() < 2 {
            return Err(Error::DegenerateAbscissae);
        }
        // Normalize weights to mean one over the collapsed points.
        let wsum: f64 = wbar.iter().sum();
        if !(wsum > 0.0) {
            return Err(Error::InvalidInput("weights sum to zero".into()));
        }
        let scale = wbar.len() as f64 / wsum;
        wbar.iter_mut().for_each(|v| *v *= scale);

        let x_min = xs[0];
        let range = xs[xs.len() - 1] - x_min;
        let u: Vec<f64> = xs.iter().map(|v| (v - x_min) / range).collect();

        let nk = knot_count(u.len());
        let knots: Vec<f64> = (0..nk)
            .map(|k| {
                let idx = ((k as f64) * (u.len() - 1) as f64 / (nk - 1) as f64).round() as usize;
                u[idx]
            })
            .collect();
        let mut t = vec![knots[0]; 3];
        t.extend_from_slice(&knots);
        t.extend(std::iter::repeat_n(knots[nk - 1], 3));
        let nb = nk + 2;

        let mut gram = DMatrix::zeros(nb, nb);
        let mut rhs = DVector::zeros(nb);
        for ((&ui, &yi), &wi) in u.iter().zip(&ybar).zip(&wbar) {
            let span = find_span(&knots, ui);
            let vals = basis_ders(&t, span + 3, ui)[0];
            for a in 0..4 {
                let ia = span + a;
                rhs[ia] += wi * vals[a] * yi;
                for b in 0..4 {
                    gram[(ia, span + b)] += wi * vals[a] * vals[b];
                }
            }
        }

        let mut penalty = DMatrix::zeros(nb, nb);
        for j in 0..nk - 1 {
            let (l, r) = (knots[j], knots[j + 1]);
            let h = r - l;
            if h <= 0.0 {
                continue;
            }
            let pts = [l, 0.5 * (l + r), r];
            let wts = [h / 6.0, 4.0 * h / 6.0, h / 6.0];
            for (p, wq) in pts.iter().zip(wts) {
                let d2 = basis_ders(&t, j + 3, *p)[2];
                for a in 0..4 {
                    for b in 0..4 {
                        penalty[(j + a, j + b)] += wq * d2[a] * d2[b];
                    }
                }
            }
        }

        Ok(SplineProblem {
            u,
            ybar,
            w: wbar,
            x_min,
            range,
            knots,
            t,
            gram,
            rhs,
            penalty,
        })
    }

    fn solve(&self, lambda: f64) -> Result<Solution> {
        let m = &self.gram + &self.penalty * lambda;
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::Linalg("spline system not positive definite".into()))?;
        let coef = chol.solve(&self.rhs);
        let hat = chol.solve(&self.gram);
        let df = hat.trace();
        let n = self.u.len() as f64;
        let rss: f64 = self
            .u
            .iter()
            .zip(&self.ybar)
            .zip(&self.w)
            .map(|((&ui, &yi), &wi)| {
                let r = yi - self.eval_unit(&coef, ui);
                wi * r * r
            })
            .sum();
        let denom = 1.0 - df / n;
        let gcv = if denom > 0.0 {
            (rss / n) / (denom * denom)
        } else {
            f64::INFINITY
        };
        Ok(Solution { coef, gcv })
    }

    fn eval_unit(&self, coef: &DVector<f64>, u: f64) -> f64 {
        let span = find_span(&self.knots, u);
        let vals = basis_ders(&self.t, span + 3, u)[0];
        (0..4).map(|a| coef[span + a] * vals[a]).sum()
    }

    fn fit_gcv(&self) -> Result<SplineCurve> {
        let tr_pen = self.penalty.trace();
        let ratio = if tr_pen > 0.0 {
            self.gram.trace() / tr_pen
        } else {
            1.0
        };
        let lambda_of = |spar: f64| ratio * 256f64.powf(3.0 * spar - 1.0);
        let crit = |spar: f64| -> f64 {
            self.solve(lambda_of(spar))
                .map(|s| s.gcv)
                .unwrap_or(f64::INFINITY)
        };

        // Coarse grid, then golden-section refinement around the best cell.
        let (lo, hi) = (-1.5, 1.5);
        let steps = 24;
        let grid: Vec<f64> = (0..=steps)
            .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&s| crit(s)).collect();
        let best = (0..vals.len())
            .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
            .unwrap_or(0);
        let mut a = grid[best.saturating_sub(1)];
        let mut b = grid[(best + 1).min(steps)];
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (crit(c), crit(d));
        for _ in 0..40 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = crit(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = crit(d);
            }
        }
        let mut spar = 0.5 * (a + b);
        if vals[best] < crit(spar) {
            spar = grid[best];
        }
        let lambda = lambda_of(spar);
        let sol = self.solve(lambda)?;
        Ok(self.to_curve(&sol.coef, lambda * self.range.powi(3)))
    }

    fn to_curve(&self, coef: &DVector<f64>, lambda_x: f64) -> SplineCurve {
        let nk = self.knots.len();
        let r = self.range;
        let mut knots = Vec::with_capacity(nk);
        let mut coefficients = Vec::with_capacity(nk - 1);
        for j in 0..nk - 1 {
            let (l, rt) = (self.knots[j], self.knots[j + 1]);
            let h = rt - l;
            if h <= 0.0 {
                continue;
            }
            let at = |p: f64| {
                let ders = basis_ders(&self.t, j + 3, p);
                let mut out = [0.0; 3];
                for (k, o) in out.iter_mut().enumerate() {
                    *o = (0..4).map(|a| coef[j + a] * ders[k][a]).sum();
                }
                out
            };
            let left = at(l);
            let mid = at(0.5 * (l + rt));
            let d3 = (mid[2] - left[2]) / (3.0 * h);
            knots.push(self.x_min + l * r);
            coefficients.push([
                left[0],
                left[1] / r,
                0.5 * left[2] / (r * r),
                d3 / (r * r * r),
            ]);
        }
        knots.push(self.x_min + self.knots[nk - 1] * r);
        SplineCurve {
            knots,
            coefficients,
            smoothing_penalty: lambda_x,
            domain: (self.x_min, self.x_min + r),
        }
    }
}

/// Number of knots for `n` distinct abscissae.
fn knot_count(n: usize) -> usize {
    if n < 50 {
        return n;
    }
    let (a1, a2, a3, a4) = (50f64.log2(), 100f64.log2(), 140f64.log2(), 200f64.log2());
    let nf = n as f64;
    let k = if n < 200 {
        2f64.powf(a1 + (a2 - a1) * (nf - 50.0) / 150.0)
    } else if n < 800 {
        2f64.powf(a2 + (a3 - a2) * (nf - 200.0) / 600.0)
    } else if n < 3200 {
        2f64.powf(a3 + (a4 - a3) * (nf - 800.0) / 2400.0)
    } else {
        200.0 + (nf - 3200.0).powf(0.2)
    };
    (k.trunc() as usize).clamp(2, n)
}

/// Index `j` of the knot interval `[knots[j], knots[j+1]]` containing `u`.
fn find_span(knots: &[f64], u: f64) -> usize {
    let last = knots.len() - 2;
    if u >= knots[last] {
        return last;
    }
    let j = knots.partition_point(|&k| k <= u);
    j.saturating_sub(1).min(last)
}

/// Values, first and second derivatives of the four cubic B-splines that are
/// nonzero on the span starting at `t[span]`.
fn basis_ders(t: &[f64], span: usize, x: f64) -> [[f64; 4]; 3] {
    const P: usize = 3;
    let mut ndu = [[0.0; 4]; 4];
    let mut left = [0.0; 4];
    let mut right = [0.0; 4];
    ndu[0][0] = 1.0;
    for j in 1..=P {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = [[0.0; 4]; 3];
    for j in 0..=P {
        ders[0][j] = ndu[j][P];
    }
    let mut a = [[0.0; 4]; 2];
    for r in 0..=P {
        let (mut s1, mut s2) = (0, 1);
        a[0][0] = 1.0;
        for k in 1..=2usize {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = P - k;
            if rk >= 0 {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize {
                k - 1
            } else {
                P - r
            };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = P as f64;
    for (k, row) in ders.iter_mut().enumerate().skip(1) {
        for v in row.iter_mut() {
            *v *= fac;
        }
        fac *= (P - k) as f64;
    }
    ders
}

/// Sorts by x and averages consecutive groups of near-equal size.
fn quantile_bins(x: &[f64], y: &[f64], w: &[f64], bins: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let n = idx.len();
    let mut out = (
        Vec::with_capacity(bins),
        Vec::with_capacity(bins),
        Vec::with_capacity(bins),
    );
    for b in 0..bins {
        let (lo, hi) = (b * n / bins, (b + 1) * n / bins);
        if lo == hi {
            continue;
        }
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for &i in &idx[lo..hi] {
            sw += w[i];
            sx += w[i] * x[i];
            sy += w[i] * y[i];
        }
        if sw > 0.0 {
            out.0.push(sx / sw);
            out.1.push(sy / sw);
            out.2.push(sw);
        }
    }
    out
}

/// Merges equal abscissae into one weighted point; output sorted by x.
fn collapse_ties(x: &[f64], y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..x.len()).filter(|&i| w[i] > 0.0).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let (mut xs, mut ys, mut ws): (Vec<f64>, Vec<f64>, Vec<f64>) = (vec![], vec![], vec![]);
    for i in idx {
        if xs.last() == Some(&x[i]) {
            let k = xs.len() - 1;
            let nw = ws[k] + w[i];
            ys[k] = (ys[k] * ws[k] + y[i] * w[i]) / nw;
            ws[k] = nw;
        } else {
            xs.push(x[i]);
            ys.push(y[i]);
            ws.push(w[i]);
        }
    }
    (xs, ys, ws)
}

/// `d_i / mean(d)` for one day.
pub fn standardize_durations(day: &TickDay) -> Result<Vec<f64>> {
    standardize(&day.durations).ok_or(Error::CannotStandardize)
}

/// `y_i^2 / mean(y^2)` for one day.
pub fn standardize_squares(y: &[i64]) -> Result<Vec<f64>> {
    let sq: Vec<f64> = y.iter().map(|&v| (v * v) as f64).collect();
    standardize(&sq).ok_or(Error::CannotStandardize)
}

fn standardize(v: &[f64]) -> Option<Vec<f64>> {
    if v.is_empty() {
        return None;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (mean > 0.0).then(|| v.iter().map(|d| d / mean).collect())
}

/// The three fitted intraday curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentCurves {
    /// Standardized duration against time of day (seconds).
    pub f_dur: SplineCurve,
    /// Standardized squared price change against time of day (seconds).
    pub f_var: SplineCurve,
    /// Diurnally adjusted squared price change against adjusted duration.
    pub f_rel: SplineCurve,
    pub floor_eps: f64,
}

impl AdjustmentCurves {
    /// Curves that are identically one.
    pub fn unit() -> Self {
        AdjustmentCurves {
            f_dur: SplineCurve::constant(1.0),
            f_var: SplineCurve::constant(1.0),
            f_rel: SplineCurve::constant(1.0),
            floor_eps: DEFAULT_FLOOR_EPS,
        }
    }

    pub fn dur(&self, time_s: f64) -> f64 {
        self.f_dur.evaluate(time_s).max(self.floor_eps)
    }

    pub fn var(&self, time_s: f64) -> f64 {
        self.f_var.evaluate(time_s).max(self.floor_eps)
    }

    pub fn rel(&self, adjusted_duration: f64) -> f64 {
        self.f_rel.evaluate(adjusted_duration).max(self.floor_eps)
    }

    /// Diurnally adjusted durations of a day, standardized by the day's own
    /// mean duration.
    pub fn adjusted_durations(&self, day: &TickDay) -> Result<Vec<f64>> {
        let dbar = standardize_durations(day)?;
        Ok(day
            .obs_times()
            .iter()
            .zip(dbar)
            .map(|(&t, d)| d / self.dur(t))
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Fits the duration, variance, and duration-relation curves on the pooled
/// days, with per-day standardization.
pub fn build_adjustment_curves(days: &[TickDay]) -> Result<AdjustmentCurves> {
    let mut t_dur = Vec::new();
    let mut dbar_all = Vec::new();
    let mut t_var = Vec::new();
    let mut ybar_all = Vec::new();
    let mut dbar_var = Vec::new();
    for day in days {
        if day.is_empty() {
            continue;
        }
        let times = day.obs_times();
        let Some(dbar) = standardize(&day.durations) else {
            warn!(
                "{}: all durations zero; day left out of the curves",
                day.day
            );
            continue;
        };
        t_dur.extend_from_slice(&times);
        dbar_all.extend_from_slice(&dbar);
        let Ok(ybar) = standardize_squares(&day.price_changes) else {
            warn!(
                "{}: no price changes; day left out of the variance curves",
                day.day
            );
            continue;
        };
        t_var.extend_from_slice(&times);
        ybar_all.extend(ybar);
        dbar_var.extend(dbar);
    }
    if t_dur.is_empty() || t_var.is_empty() {
        return Err(Error::InvalidInput(
            "no usable days for adjustment curves".into(),
        ));
    }

    let f_dur = fit_spline(&t_dur, &dbar_all, None)?;
    let f_var = fit_spline(&t_var, &ybar_all, None)?;
    let floor = DEFAULT_FLOOR_EPS;
    let dtilde: Vec<f64> = t_var
        .iter()
        .zip(&dbar_var)
        .map(|(&t, &d)| d / f_dur.evaluate(t).max(floor))
        .collect();
    let ytilde: Vec<f64> = t_var
        .iter()
        .zip(&ybar_all)
        .map(|(&t, &y)| y / f_var.evaluate(t).max(floor))
        .collect();

    let cut = quantile(&dtilde, REL_TRUNCATION_QUANTILE);
    let (xr, yr): (Vec<f64>, Vec<f64>) = dtilde
        .iter()
        .zip(&ytilde)
        .filter(|(d, _)| **d <= cut)
        .map(|(d, y)| (*d, *y))
        .unzip();
    let f_rel = fit_spline(&xr, &yr, None)?;

    Ok(AdjustmentCurves {
        f_dur,
        f_var,
        f_rel,
        floor_eps: floor,
    })
}

/// Linear-interpolation sample quantile.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn reproduces_line() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64).powf(1.3)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.75 * v).collect();
        let c = fit_spline(&x, &y, None).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((c.evaluate(*xi) - yi).abs() < 1e-8);
        }
        for lambda in [1e-3, 1.0, 1e6] {
            let c = fit_spline_with_penalty(&x, &y, None, lambda).unwrap();
            for (xi, yi) in x.iter().zip(&y) {
                assert!((c.evaluate(*xi) - yi).abs() < 1e-8, "lambda {lambda}");
            }
        }
    }

    #[test]
    fn constant_data() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let y = vec![3.5; 30];
        let c = fit_spline(&x, &y, None).unwrap();
        for k in 0..100 {
            assert!((c.evaluate(k as f64 * 0.03) - 3.5).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_and_invalid() {
        assert!(matches!(
            fit_spline(&[1.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0], None),
            Err(Error::DegenerateAbscissae)
        ));
        assert!(fit_spline(&[0.0, 1.0, 2.0, 3.0], &[0.0, f64::NAN, 1.0, 2.0], None).is_err());
        assert!(fit_spline(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], None).is_err());
    }

    #[test]
    fn noisy_sine() {
        let mut rng = StdRng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let n = 5_000;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let truth = |v: f64| (2.0 * std::f64::consts::PI * v).sin();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| truth(v) + noise.sample(&mut rng))
            .collect();
        let c = fit_spline(&x, &y, None).unwrap();
        let rmse = (x
            .iter()
            .map(|&v| (c.evaluate(v) - truth(v)).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(rmse < 0.05, "rmse {rmse}");
    }

    #[test]
    fn binned_fit_of_large_sample() {
        let mut rng = StdRng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let n = 60_000;
        let x: Vec<f64> = (0..n).map(|i| (i % 7919) as f64 / 7919.0).collect();
        let truth = |v: f64| 1.0 + v * v;
        let y: Vec<f64> = x
            .iter()
            .map(|&v| truth(v) + noise.sample(&mut rng))
            .collect();
        let c = fit_spline(&x, &y, None).unwrap();
        for k in 0..=20 {
            let v = k as f64 / 20.0;
            assert!((c.evaluate(v) - truth(v)).abs() < 0.05);
        }
    }

    #[test]
    fn second_derivative_continuity() {
        let mut rng = StdRng::seed_from_u64(9);
        let noise = Normal::new(0.0, 0.2).unwrap();
        let x: Vec<f64> = (0..300).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v.cos() + noise.sample(&mut rng)).collect();
        let c = fit_spline(&x, &y, None).unwrap();
        for j in 1..c.coefficients.len() {
            let k = c.knots[j];
            let h = k - c.knots[j - 1];
            let [a, b, cc, d] = c.coefficients[j - 1];
            let v_left = a + h * (b + h * (cc + h * d));
            let d1_left = b + h * (2.0 * cc + 3.0 * d * h);
            let d2_left = 2.0 * cc + 6.0 * d * h;
            let [a2, b2, c2, _] = c.coefficients[j];
            assert!((v_left - a2).abs() < 1e-8);
            assert!((d1_left - b2).abs() < 1e-7);
            assert!((d2_left - 2.0 * c2).abs() < 1e-6);
        }
    }

    #[test]
    fn large_penalty_tends_to_least_squares_line() {
        let mut rng = StdRng::seed_from_u64(10);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 20.0).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| (v * 0.7).sin() * 3.0 + noise.sample(&mut rng))
            .collect();
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let c = fit_spline_with_penalty(&x, &y, None, 1e9).unwrap();
        for &v in &x {
            assert!((c.evaluate(v) - (my + slope * (v - mx))).abs() < 1e-3);
            assert!(c.derivative(v, 2).abs() < 1e-4);
        }
    }

    #[test]
    fn constant_extrapolation() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let c = fit_spline(&x, &y, None).unwrap();
        assert_eq!(c.evaluate(-5.0), c.evaluate(0.0));
        assert_eq!(c.evaluate(100.0), c.evaluate(19.0));
    }

    #[test]
    fn standardization() {
        let d = chrono::NaiveDate::from_ymd_opt(2022, 3, 1).unwrap();
        let mk = |times: &[u32]| {
            let ticks = times
                .iter()
                .map(|&t| crate::tickstore::Tick::new(d, t, 10.0, 1))
                .collect();
            TickDay::from_ticks(d, ticks).unwrap()
        };
        let day = mk(&[0, 1000, 3000, 6000]);
        assert_eq!(standardize_durations(&day).unwrap(), vec![0.5, 1.0, 1.5]);
        assert_eq!(standardize_durations(&mk(&[0, 5000])).unwrap(), vec![1.0]);
        assert!(matches!(
            standardize_durations(&mk(&[7, 7, 7])),
            Err(Error::CannotStandardize)
        ));
    }

    #[test]
    fn curves_json_round_trip() {
        let c = AdjustmentCurves::unit();
        let s = serde_json::to_string(&c).unwrap();
        let back: AdjustmentCurves = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.var(12345.0), 1.0);
    }
}
