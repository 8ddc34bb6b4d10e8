//! Maximum-likelihood fitting with Nelder–Mead on transformed coefficients.

use std::collections::BTreeMap;
use std::io::Write;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::bessel::log_bessel_i;
use crate::error::{Error, Result};
use crate::gasfilter::{
    loglik_mean, Family, InflationDynamics, MeanDynamics, ModelInput, ModelParams, ModelSpec,
    Variant,
};
use crate::smoothing::quantile;

/// Log-likelihood assigned to infeasible parameter points.
pub const PENALTY_LOGLIK: f64 = -1e6;

/// Stand-in for "no inflation" when a restricted optimum seeds a model
/// with a static inflation probability.
const EMBED_PI: f64 = 1e-12;

/// Transformed-space coordinates, in the order [`ModelParams::active`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    Theta,
    Omega,
    Phi,
    Alpha,
    Pi,
    Kappa,
    Rho,
    Gamma,
    Psi,
    Eta,
    Nu,
}

fn coords(spec: &ModelSpec) -> Vec<Coord> {
    let mut c = Vec::new();
    match spec.mean_dynamics {
        MeanDynamics::Zero => {}
        MeanDynamics::Ma1 => c.push(Coord::Theta),
        MeanDynamics::Gas => c.extend([Coord::Kappa, Coord::Rho, Coord::Theta]),
    }
    c.push(Coord::Omega);
    if spec.dispersion_dynamics == crate::gasfilter::DispersionDynamics::Gas {
        c.extend([Coord::Phi, Coord::Alpha]);
    }
    match spec.inflation_dynamics {
        InflationDynamics::None => {}
        InflationDynamics::Static => c.push(Coord::Pi),
        InflationDynamics::Gas => c.extend([Coord::Gamma, Coord::Psi, Coord::Eta]),
    }
    if spec.family == Family::StudentT {
        c.push(Coord::Nu);
    }
    c
}

/// Number of free coefficients of `spec`.
pub fn dimension(spec: &ModelSpec) -> usize {
    coords(spec).len()
}

/// Maps the coefficients `spec` uses to an unconstrained vector.
pub fn transform(spec: &ModelSpec, params: &ModelParams) -> Result<Vec<f64>> {
    let check = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("{what} outside its domain")))
        }
    };
    coords(spec)
        .into_iter()
        .map(|c| {
            Ok(match c {
                Coord::Theta => params.theta,
                Coord::Omega => params.omega,
                Coord::Phi => {
                    check(params.phi.abs() < 1.0, "phi")?;
                    params.phi.atanh()
                }
                Coord::Alpha => params.alpha,
                Coord::Pi => {
                    check(params.pi > 0.0 && params.pi < 1.0, "pi")?;
                    (params.pi / (1.0 - params.pi)).ln()
                }
                Coord::Kappa => params.kappa,
                Coord::Rho => params.rho,
                Coord::Gamma => params.gamma,
                Coord::Psi => {
                    check(params.psi.abs() < 1.0, "psi")?;
                    params.psi.atanh()
                }
                Coord::Eta => params.eta,
                Coord::Nu => {
                    check(params.nu > 0.0, "nu")?;
                    params.nu.ln()
                }
            })
        })
        .collect()
}

/// Inverse of [`transform`]. Coefficients `spec` does not use are taken
/// from `template`.
pub fn untransform(spec: &ModelSpec, x: &[f64], template: &ModelParams) -> Result<ModelParams> {
    let cs = coords(spec);
    if cs.len() != x.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} coordinates, got {}",
            cs.len(),
            x.len()
        )));
    }
    let mut p = *template;
    for (c, &v) in cs.into_iter().zip(x) {
        match c {
            Coord::Theta => p.theta = v,
            Coord::Omega => p.omega = v,
            Coord::Phi => p.phi = v.tanh(),
            Coord::Alpha => p.alpha = v,
            Coord::Pi => p.pi = crate::gasfilter::logistic(v),
            Coord::Kappa => p.kappa = v,
            Coord::Rho => p.rho = v,
            Coord::Gamma => p.gamma = v,
            Coord::Psi => p.psi = v.tanh(),
            Coord::Eta => p.eta = v,
            Coord::Nu => p.nu = v.exp(),
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Simplex diameter (max-norm, transformed space) at convergence.
    pub tolerance: f64,
    pub initial_step: f64,
    /// Extra Nelder–Mead runs restarted from the best point.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 5000,
            tolerance: 1e-6,
            initial_step: 0.2,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub loglik_mean: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start_params: ModelParams,
    pub n_obs: usize,
}

impl FitResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with an axis-aligned initial simplex of edge
/// `step`. Stops once every vertex lies within `tol` (max-norm) of the best
/// one, or after `max_iter` iterations. Non-finite values count as `+inf`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> NelderMeadResult {
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        return NelderMeadResult {
            x: vec![],
            fx: eval(&[]),
            iterations: 0,
            converged: true,
        };
    }
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let trial = |c: &[f64], worst: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(worst).map(|(a, b)| a + t * (b - a)).collect()
    };

    while iterations < max_iter {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = order[0];
        let diameter = pts
            .iter()
            .flat_map(|p| p.iter().zip(&pts[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < tol {
            converged = true;
            break;
        }
        iterations += 1;
        let worst = order[n];
        let second = order[n - 1];
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &j in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&pts[j]) {
                *c += v / n as f64;
            }
        }
        let xr = trial(&centroid, &pts[worst], -1.0);
        let fr = eval(&xr);
        if fr < vals[best] {
            let xe = trial(&centroid, &pts[worst], -2.0);
            let fe = eval(&xe);
            if fe < fr {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[worst] {
            let xc = trial(&centroid, &pts[worst], -0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = trial(&centroid, &pts[worst], 0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < vals[worst].min(fr) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        let xb = pts[best].clone();
        for &j in &order[1..] {
            for (p, b) in pts[j].iter_mut().zip(&xb) {
                *p = b + 0.5 * (*p - b);
            }
            vals[j] = eval(&pts[j]);
        }
    }
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    NelderMeadResult {
        x: pts[order[0]].clone(),
        fx: vals[order[0]],
        iterations,
        converged,
    }
}

/// Log-likelihood used during the search: infeasible points map to
/// [`PENALTY_LOGLIK`].
pub fn penalized_loglik(spec: &ModelSpec, params: &ModelParams, input: &ModelInput) -> f64 {
    match loglik_mean(spec, params, input) {
        Ok(v) => v,
        Err(_) => PENALTY_LOGLIK,
    }
}

/// Observed variance proxy `mean(y^2 / adjustment)` on the log scale.
fn log_mean_adjusted_square(spec: &ModelSpec, input: &ModelInput) -> f64 {
    let adj = input.log_adjust_path(spec);
    let m = input
        .y
        .iter()
        .zip(&adj)
        .map(|(&y, a)| (y * y) as f64 * (-a).exp())
        .sum::<f64>()
        / input.len() as f64;
    // A day without a single price change still needs a finite start.
    m.max(1e-3).ln()
}

/// Default start values.
pub fn start_params(spec: &ModelSpec, input: &ModelInput) -> ModelParams {
    let omega = log_mean_adjusted_square(spec, input);
    let mut p = ModelParams {
        theta: if spec.mean_dynamics == MeanDynamics::Ma1 {
            -0.3
        } else {
            0.0
        },
        omega,
        phi: 0.9,
        alpha: 0.05,
        ..Default::default()
    };
    if spec.inflation_dynamics != InflationDynamics::None {
        let zero_share = input.y.iter().filter(|&&v| v == 0).count() as f64 / input.len() as f64;
        // Skellam(delta/2, delta/2) puts exp(-delta) I_0(delta) on zero.
        let delta = omega.exp();
        let implied = (log_bessel_i(0, delta).unwrap_or(0.0) - delta).exp();
        p.pi = (zero_share - implied).clamp(0.05, 0.95);
        if spec.inflation_dynamics == InflationDynamics::Gas {
            p.gamma = (p.pi / (1.0 - p.pi)).ln();
        }
    }
    p
}

/// Start used when the default one is infeasible: every dynamic
/// coefficient at zero.
pub fn fallback_start(spec: &ModelSpec, input: &ModelInput) -> ModelParams {
    ModelParams {
        theta: 0.0,
        phi: 0.0,
        alpha: 0.0,
        kappa: 0.0,
        rho: 0.0,
        psi: 0.0,
        eta: 0.0,
        ..start_params(spec, input)
    }
}

pub fn fit(spec: &ModelSpec, input: &ModelInput) -> Result<FitResult> {
    fit_with(spec, input, &FitOptions::default(), &[])
}

/// Fits `spec`, starting from the default start and, if one of them ends
/// up better, from the best of `extra_starts` as well.
pub fn fit_with(
    spec: &ModelSpec,
    input: &ModelInput,
    opts: &FitOptions,
    extra_starts: &[ModelParams],
) -> Result<FitResult> {
    spec.validate()?;
    if input.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    let mut start = start_params(spec, input);
    if loglik_mean(spec, &start, input).is_err() {
        debug!("default start infeasible; using fallback");
        start = fallback_start(spec, input);
        if let Err(e) = loglik_mean(spec, &start, input) {
            return Err(Error::Estimation(format!("no feasible start value: {e}")));
        }
    }
    let mut best = run(spec, input, opts, start)?;

    let seeded = extra_starts
        .iter()
        .filter_map(|s| {
            let v = loglik_mean(spec, s, input).ok()?;
            transform(spec, s).ok()?;
            Some((v, *s))
        })
        .max_by(|a, b| a.0.total_cmp(&b.0));
    if let Some((v, s)) = seeded {
        if v > best.loglik_mean {
            debug!(
                "seeded start beats the default optimum ({v} > {})",
                best.loglik_mean
            );
            let alt = run(spec, input, opts, s)?;
            if alt.loglik_mean > best.loglik_mean {
                best = alt;
            }
        }
    }
    Ok(best)
}

fn run(
    spec: &ModelSpec,
    input: &ModelInput,
    opts: &FitOptions,
    start: ModelParams,
) -> Result<FitResult> {
    let x0 = transform(spec, &start)?;
    let objective = |x: &[f64]| match untransform(spec, x, &start) {
        Ok(p) => -penalized_loglik(spec, &p, input),
        Err(_) => f64::INFINITY,
    };
    let mut nm = nelder_mead(
        objective,
        &x0,
        opts.initial_step,
        opts.tolerance,
        opts.max_iter,
    );
    let mut iterations = nm.iterations;
    for _ in 0..opts.restarts {
        if iterations >= opts.max_iter {
            break;
        }
        let again = nelder_mead(
            objective,
            &nm.x,
            opts.initial_step,
            opts.tolerance,
            opts.max_iter - iterations,
        );
        iterations += again.iterations;
        let moved = again.fx < nm.fx;
        let converged = again.converged;
        if moved {
            nm = again;
        }
        nm.converged = converged;
        if !moved {
            break;
        }
    }
    let params = untransform(spec, &nm.x, &start)?;
    let ll = loglik_mean(spec, &params, input)
        .map_err(|e| Error::Estimation(format!("optimum is infeasible: {e}")))?;
    if !nm.converged {
        warn!("Nelder-Mead stopped after {iterations} iterations without converging");
    }
    Ok(FitResult {
        spec: *spec,
        params,
        loglik_mean: ll,
        iterations,
        converged: nm.converged,
        start_params: start,
        n_obs: input.len(),
    })
}

/// Outcome of one variant in [`fit_all_variants`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantFit {
    pub variant: Variant,
    pub result: std::result::Result<FitResult, String>,
}

/// Restricted optima of `from` written as points of `to`'s parameter
/// space, where `from` is nested in `to`.
fn embed(from: &FitResult, to: &ModelSpec) -> ModelParams {
    let mut p = from.params;
    let f = &from.spec;
    if f.mean_dynamics == MeanDynamics::Zero {
        p.theta = 0.0;
    }
    if f.dispersion_dynamics == crate::gasfilter::DispersionDynamics::Static {
        p.phi = 0.0;
        p.alpha = 0.0;
    }
    let pi = match f.inflation_dynamics {
        InflationDynamics::None => EMBED_PI,
        _ => p.pi,
    };
    match to.inflation_dynamics {
        InflationDynamics::Static => p.pi = pi,
        InflationDynamics::Gas => {
            p.gamma = (pi / (1.0 - pi)).ln();
            p.psi = 0.0;
            p.eta = 0.0;
        }
        InflationDynamics::None => {}
    }
    p
}

/// Which already-fitted variants are restrictions of `v`.
fn nested_in(v: Variant) -> &'static [Variant] {
    use Variant::*;
    match v {
        Naive | VarParam | GasMean | Normal | StudentT => &[],
        NoInflation => &[Naive],
        StaticDispersion => &[Naive],
        StaticMean => &[Naive],
        Proposed => &[Naive, NoInflation, StaticDispersion, StaticMean],
        GasInflation => &[Naive, NoInflation, StaticDispersion, StaticMean, Proposed],
    }
}

/// Fits every variant in `variants` (all ten when empty). Nested variants
/// also start from the embedded optima of their restrictions, so the
/// reported log-likelihoods respect the nesting order.
pub fn fit_all_variants(
    input: &ModelInput,
    variants: &[Variant],
    adjust: bool,
    opts: &FitOptions,
) -> Vec<VariantFit> {
    let mut list: Vec<Variant> = if variants.is_empty() {
        Variant::all().collect()
    } else {
        variants.to_vec()
    };
    // Restrictions first.
    list.sort_by_key(|v| nested_in(*v).len());
    let mut done: BTreeMap<Variant, FitResult> = BTreeMap::new();
    let mut out = Vec::with_capacity(list.len());
    for v in list {
        let mut spec = v.spec();
        if !adjust {
            spec = spec.without_adjustments();
        }
        let seeds: Vec<ModelParams> = nested_in(v)
            .iter()
            .filter_map(|r| done.get(r))
            .map(|r| embed(r, &spec))
            .collect();
        let result = fit_with(&spec, input, opts, &seeds);
        match &result {
            Ok(r) => {
                done.insert(v, r.clone());
            }
            Err(e) => warn!("fitting {v} failed: {e}"),
        }
        out.push(VariantFit {
            variant: v,
            result: result.map_err(|e| e.to_string()),
        });
    }
    let position = |v: &Variant| Variant::all().position(|w| w == *v).unwrap();
    out.sort_by_key(|f| position(&f.variant));
    out
}

/// Batch summary across days: min, median and max of each coefficient,
/// CSV `variant,coefficient,min,median,max,n_days`.
pub fn write_summary_csv<W: Write>(w: W, fits: &[(Variant, FitResult)]) -> Result<()> {
    // (variant rank, variant) -> coefficient position -> (name, values)
    type Coefs = BTreeMap<usize, (&'static str, Vec<f64>)>;
    let mut groups: BTreeMap<(usize, Variant), Coefs> = BTreeMap::new();
    for (v, fit) in fits {
        let key = (Variant::all().position(|w| w == *v).unwrap(), *v);
        let g = groups.entry(key).or_default();
        for (k, (name, value)) in fit.params.active(&fit.spec).into_iter().enumerate() {
            g.entry(k)
                .or_insert_with(|| (name, Vec::new()))
                .1
                .push(value);
        }
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["variant", "coefficient", "min", "median", "max", "n_days"])?;
    for ((_, v), g) in groups {
        for (_, (name, values)) in g {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            wtr.write_record([
                v.name().to_string(),
                name.to_string(),
                min.to_string(),
                quantile(&values, 0.5).to_string(),
                max.to_string(),
                values.len().to_string(),
            ])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<summary writer>", e))?;
    Ok(())
}
