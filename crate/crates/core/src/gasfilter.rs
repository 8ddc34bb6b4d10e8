//! Observation-driven recursions for the model family.
//!
//! For observation `i` the filter forms
//!
//! ```text
//! mu_i        = theta (y_{i-1} - mu_{i-1})                     (MA(1) mean)
//! ln scale_i  = omega + ln f_var(t_i) + ln f_rel(d~_i) + eps_i
//! eps_i       = phi eps_{i-1} + alpha * score(y_{i-1}; state_{i-1})
//! ```
//!
//! where `scale` is the overdispersion `delta` (mean-overdispersion Skellam)
//! or the variance `sigma^2` (mean-variance Skellam, normal, Student's t).
//! The first observation uses the initial state `mu = eps = 0`.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::smoothing::AdjustmentCurves;
use crate::tickstore::TickDay;
use crate::ziskellam::{self, ZiSkellamParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ZiskellamMeandisp,
    ZiskellamMeanvar,
    Normal,
    StudentT,
}

impl Family {
    pub fn is_discrete(self) -> bool {
        matches!(self, Family::ZiskellamMeandisp | Family::ZiskellamMeanvar)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanDynamics {
    Zero,
    Ma1,
    Gas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionDynamics {
    Static,
    Gas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflationDynamics {
    None,
    Static,
    Gas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub mean_dynamics: MeanDynamics,
    pub dispersion_dynamics: DispersionDynamics,
    pub inflation_dynamics: InflationDynamics,
    pub use_diurnal_adjustment: bool,
    pub use_duration_adjustment: bool,
}

impl ModelSpec {
    pub const fn new(
        family: Family,
        mean_dynamics: MeanDynamics,
        dispersion_dynamics: DispersionDynamics,
        inflation_dynamics: InflationDynamics,
    ) -> Self {
        ModelSpec {
            family,
            mean_dynamics,
            dispersion_dynamics,
            inflation_dynamics,
            use_diurnal_adjustment: true,
            use_duration_adjustment: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.family.is_discrete() && self.inflation_dynamics != InflationDynamics::None {
            return Err(Error::InvalidInput(
                "continuous families admit no zero inflation".into(),
            ));
        }
        Ok(())
    }

    pub fn without_adjustments(mut self) -> Self {
        self.use_diurnal_adjustment = false;
        self.use_duration_adjustment = false;
        self
    }
}

/// The named model variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Naive,
    NoInflation,
    StaticDispersion,
    StaticMean,
    Proposed,
    VarParam,
    GasMean,
    GasInflation,
    Normal,
    StudentT,
}

impl Variant {
    /// The proposed model and its four restrictions.
    pub const BASE: [Variant; 5] = [
        Variant::Naive,
        Variant::NoInflation,
        Variant::StaticDispersion,
        Variant::StaticMean,
        Variant::Proposed,
    ];

    pub const ALTERNATIVES: [Variant; 5] = [
        Variant::VarParam,
        Variant::GasMean,
        Variant::GasInflation,
        Variant::Normal,
        Variant::StudentT,
    ];

    pub fn all() -> impl Iterator<Item = Variant> {
        Self::BASE.into_iter().chain(Self::ALTERNATIVES)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Naive => "naive",
            Variant::NoInflation => "no-inflation",
            Variant::StaticDispersion => "static-dispersion",
            Variant::StaticMean => "static-mean",
            Variant::Proposed => "proposed",
            Variant::VarParam => "var-param",
            Variant::GasMean => "gas-mean",
            Variant::GasInflation => "gas-inflation",
            Variant::Normal => "normal",
            Variant::StudentT => "student-t",
        }
    }

    pub fn spec(self) -> ModelSpec {
        use DispersionDynamics as D;
        use Family as F;
        use InflationDynamics as I;
        use MeanDynamics as M;
        match self {
            Variant::Naive => ModelSpec::new(F::ZiskellamMeandisp, M::Zero, D::Static, I::None),
            Variant::NoInflation => ModelSpec::new(F::ZiskellamMeandisp, M::Ma1, D::Gas, I::None),
            Variant::StaticDispersion => {
                ModelSpec::new(F::ZiskellamMeandisp, M::Ma1, D::Static, I::Static)
            }
            Variant::StaticMean => ModelSpec::new(F::ZiskellamMeandisp, M::Zero, D::Gas, I::Static),
            Variant::Proposed => ModelSpec::new(F::ZiskellamMeandisp, M::Ma1, D::Gas, I::Static),
            Variant::VarParam => ModelSpec::new(F::ZiskellamMeanvar, M::Ma1, D::Gas, I::Static),
            Variant::GasMean => ModelSpec::new(F::ZiskellamMeandisp, M::Gas, D::Gas, I::Static),
            Variant::GasInflation => ModelSpec::new(F::ZiskellamMeandisp, M::Ma1, D::Gas, I::Gas),
            Variant::Normal => ModelSpec::new(F::Normal, M::Ma1, D::Gas, I::None),
            Variant::StudentT => ModelSpec::new(F::StudentT, M::Ma1, D::Gas, I::None),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::all()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant {s:?}")))
    }
}

/// Static coefficients. Entries a [`ModelSpec`] does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// MA coefficient, or score coefficient of the score-driven mean.
    pub theta: f64,
    pub omega: f64,
    pub phi: f64,
    pub alpha: f64,
    pub pi: f64,
    pub kappa: f64,
    pub rho: f64,
    pub gamma: f64,
    pub psi: f64,
    pub eta: f64,
    pub nu: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            theta: 0.0,
            omega: 0.0,
            phi: 0.0,
            alpha: 0.0,
            pi: 0.0,
            kappa: 0.0,
            rho: 0.0,
            gamma: 0.0,
            psi: 0.0,
            eta: 0.0,
            nu: 5.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let bad = |what: &str| Err(Error::Domain(what.to_string()));
        if !self.omega.is_finite() {
            return bad("omega must be finite");
        }
        if spec.dispersion_dynamics == DispersionDynamics::Gas && !(self.phi.abs() < 1.0) {
            return bad("|phi| must be below 1");
        }
        if spec.inflation_dynamics == InflationDynamics::Static && !(0.0..1.0).contains(&self.pi) {
            return bad("pi must lie in [0, 1)");
        }
        if spec.inflation_dynamics == InflationDynamics::Gas && !(self.psi.abs() < 1.0) {
            return bad("|psi| must be below 1");
        }
        if spec.family == Family::StudentT && !(self.nu > 0.0) {
            return bad("nu must be positive");
        }
        Ok(())
    }

    /// Names and values of the coefficients that `spec` uses, in a fixed
    /// order.
    pub fn active(&self, spec: &ModelSpec) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        match spec.mean_dynamics {
            MeanDynamics::Zero => {}
            MeanDynamics::Ma1 => out.push(("theta", self.theta)),
            MeanDynamics::Gas => {
                out.push(("kappa", self.kappa));
                out.push(("rho", self.rho));
                out.push(("theta", self.theta));
            }
        }
        out.push(("omega", self.omega));
        if spec.dispersion_dynamics == DispersionDynamics::Gas {
            out.push(("phi", self.phi));
            out.push(("alpha", self.alpha));
        }
        match spec.inflation_dynamics {
            InflationDynamics::None => {}
            InflationDynamics::Static => out.push(("pi", self.pi)),
            InflationDynamics::Gas => {
                out.push(("gamma", self.gamma));
                out.push(("psi", self.psi));
                out.push(("eta", self.eta));
            }
        }
        if spec.family == Family::StudentT {
            out.push(("nu", self.nu));
        }
        out
    }
}

/// Observations of one day with their precomputed log adjustments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub y: Vec<i64>,
    /// `ln f_var(t_i)`
    pub log_diurnal: Vec<f64>,
    /// `ln f_rel(d~_i)`
    pub log_duration: Vec<f64>,
}

impl ModelInput {
    /// No adjustments: both log terms are zero.
    pub fn unadjusted(y: Vec<i64>) -> Self {
        let n = y.len();
        ModelInput {
            y,
            log_diurnal: vec![0.0; n],
            log_duration: vec![0.0; n],
        }
    }

    /// From raw series: observation times (seconds of day) and diurnally
    /// adjusted durations.
    pub fn from_parts(
        y: Vec<i64>,
        times: &[f64],
        adjusted_durations: &[f64],
        curves: &AdjustmentCurves,
    ) -> Result<Self> {
        if times.len() != y.len() || adjusted_durations.len() != y.len() {
            return Err(Error::InvalidInput("series lengths differ".into()));
        }
        Ok(ModelInput {
            log_diurnal: times.iter().map(|&t| curves.var(t).ln()).collect(),
            log_duration: adjusted_durations
                .iter()
                .map(|&d| curves.rel(d).ln())
                .collect(),
            y,
        })
    }

    pub fn from_day(day: &TickDay, curves: &AdjustmentCurves) -> Result<Self> {
        let dtilde = curves.adjusted_durations(day)?;
        Self::from_parts(day.price_changes.clone(), &day.obs_times(), &dtilde, curves)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    fn log_adjust(&self, spec: &ModelSpec, i: usize) -> f64 {
        let mut a = 0.0;
        if spec.use_diurnal_adjustment {
            a += self.log_diurnal[i];
        }
        if spec.use_duration_adjustment {
            a += self.log_duration[i];
        }
        a
    }

    /// Total applied log adjustment per observation under `spec`.
    pub fn log_adjust_path(&self, spec: &ModelSpec) -> Vec<f64> {
        (0..self.len()).map(|i| self.log_adjust(spec, i)).collect()
    }
}

/// Initial values of the recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterInit {
    pub mu: f64,
    pub eps: f64,
}

impl Default for FilterInit {
    fn default() -> Self {
        FilterInit { mu: 0.0, eps: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutput {
    pub family: Family,
    pub omega: f64,
    pub nu: f64,
    pub mu_path: Vec<f64>,
    /// Overdispersion for the mean-overdispersion family, variance (or
    /// squared scale) otherwise.
    pub delta_path: Vec<f64>,
    pub epsilon_path: Vec<f64>,
    pub pi_path: Vec<f64>,
    pub log_adjust_path: Vec<f64>,
    pub loglik_terms: Vec<f64>,
    pub loglik_mean: f64,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.mu_path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_path.is_empty()
    }

    /// `exp(omega + eps_i)`: the scale path with the intraday and duration
    /// adjustments removed. Uses information up to `i - 1` only.
    pub fn adjusted_path(&self) -> Vec<f64> {
        self.epsilon_path
            .iter()
            .map(|e| (self.omega + e).exp())
            .collect()
    }

    /// Overdispersion `delta_i` for the Skellam families.
    pub fn overdispersion(&self, i: usize) -> Option<f64> {
        match self.family {
            Family::ZiskellamMeandisp => Some(self.delta_path[i]),
            Family::ZiskellamMeanvar => Some(self.delta_path[i] - self.mu_path[i].abs()),
            _ => None,
        }
    }

    /// Conditional mean and variance of observation `i`, when they exist.
    pub fn conditional_moments(&self, i: usize) -> Option<(f64, f64)> {
        let mu = self.mu_path[i];
        match self.family {
            Family::ZiskellamMeandisp | Family::ZiskellamMeanvar => {
                let delta = self.overdispersion(i)?;
                Some(ziskellam::moments(&ZiSkellamParams {
                    mu,
                    delta,
                    pi: self.pi_path[i],
                }))
            }
            Family::Normal => Some((mu, self.delta_path[i])),
            Family::StudentT => {
                (self.nu > 2.0).then(|| (mu, self.delta_path[i] * self.nu / (self.nu - 2.0)))
            }
        }
    }

    /// Per-tick CSV `i,y,mu,delta,epsilon,loglik`, `i` starting at 1.
    pub fn write_csv<W: Write>(&self, w: W, y: &[i64]) -> Result<()> {
        if y.len() != self.len() {
            return Err(Error::InvalidInput("series lengths differ".into()));
        }
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["i", "y", "mu", "delta", "epsilon", "loglik"])?;
        for (i, v) in y.iter().enumerate() {
            wtr.write_record([
                (i + 1).to_string(),
                v.to_string(),
                self.mu_path[i].to_string(),
                self.delta_path[i].to_string(),
                self.epsilon_path[i].to_string(),
                self.loglik_terms[i].to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<filter writer>", e))?;
        Ok(())
    }
}

/// State at one observation, before the observation is seen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepState {
    pub mu: f64,
    pub eps: f64,
    pub scale: f64,
    pub pi: f64,
}

struct ObsEval {
    loglik: f64,
    score_scale: f64,
    score_mu: f64,
    score_logit_pi: f64,
}

/// The recursion as a step machine, shared by the filter and the simulator.
pub(crate) struct Recursion<'a> {
    spec: &'a ModelSpec,
    params: &'a ModelParams,
    mu: f64,
    eps: f64,
    logit_pi: f64,
    t_const: f64,
}

impl<'a> Recursion<'a> {
    pub(crate) fn new(
        spec: &'a ModelSpec,
        params: &'a ModelParams,
        init: FilterInit,
    ) -> Result<Self> {
        spec.validate()?;
        params.validate(spec)?;
        let logit_pi = match spec.inflation_dynamics {
            InflationDynamics::Gas => params.gamma / (1.0 - params.psi),
            _ => 0.0,
        };
        let t_const = if spec.family == Family::StudentT {
            let nu = params.nu;
            ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()
        } else {
            0.0
        };
        let eps = match spec.dispersion_dynamics {
            DispersionDynamics::Gas => init.eps,
            DispersionDynamics::Static => 0.0,
        };
        let mu = match spec.mean_dynamics {
            MeanDynamics::Zero => 0.0,
            _ => init.mu,
        };
        Ok(Recursion {
            spec,
            params,
            mu,
            eps,
            logit_pi,
            t_const,
        })
    }

    #[inline]
    pub(crate) fn state(&self, log_adjust: f64) -> StepState {
        let scale = (self.params.omega + log_adjust + self.eps).exp();
        let pi = match self.spec.inflation_dynamics {
            InflationDynamics::None => 0.0,
            InflationDynamics::Static => self.params.pi,
            InflationDynamics::Gas => logistic(self.logit_pi),
        };
        StepState {
            mu: self.mu,
            eps: self.eps,
            scale,
            pi,
        }
    }

    /// Scores the observation at `state` and moves to the next state.
    /// Returns the log-likelihood term.
    #[inline]
    pub(crate) fn observe(&mut self, index: usize, state: &StepState, y: i64) -> Result<f64> {
        let ev = self.evaluate(index, state, y)?;
        if !ev.loglik.is_finite() {
            return Err(Error::NonFinite { index });
        }
        let p = self.params;
        self.mu = match self.spec.mean_dynamics {
            MeanDynamics::Zero => 0.0,
            MeanDynamics::Ma1 => p.theta * (y as f64 - state.mu),
            MeanDynamics::Gas => p.kappa + p.rho * state.mu + p.theta * ev.score_mu,
        };
        if self.spec.dispersion_dynamics == DispersionDynamics::Gas {
            self.eps = p.phi * state.eps + p.alpha * ev.score_scale;
        }
        if self.spec.inflation_dynamics == InflationDynamics::Gas {
            self.logit_pi = p.gamma + p.psi * self.logit_pi + p.eta * ev.score_logit_pi;
        }
        Ok(ev.loglik)
    }

    #[inline]
    fn evaluate(&self, index: usize, s: &StepState, y: i64) -> Result<ObsEval> {
        match self.spec.family {
            Family::ZiskellamMeandisp => {
                let e = ziskellam::evaluate(
                    y,
                    &ZiSkellamParams {
                        mu: s.mu,
                        delta: s.scale,
                        pi: s.pi,
                    },
                );
                Ok(ObsEval {
                    loglik: e.log_prob,
                    score_scale: e.score_logdelta,
                    score_mu: e.score_mu,
                    score_logit_pi: e.score_logit_pi,
                })
            }
            Family::ZiskellamMeanvar => {
                let delta = s.scale - s.mu.abs();
                if !(delta > 0.0) {
                    return Err(Error::VarianceBound { index });
                }
                let e = ziskellam::evaluate(
                    y,
                    &ZiSkellamParams {
                        mu: s.mu,
                        delta,
                        pi: s.pi,
                    },
                );
                let ratio = s.scale / delta;
                Ok(ObsEval {
                    loglik: e.log_prob,
                    score_scale: ratio * e.score_logdelta,
                    // mu moves delta = sigma^2 - |mu| when sigma^2 is held fixed.
                    score_mu: e.score_mu - s.mu.signum() * e.score_logdelta / delta,
                    score_logit_pi: e.score_logit_pi,
                })
            }
            Family::Normal => {
                let r = y as f64 - s.mu;
                let z2 = r * r / s.scale;
                Ok(ObsEval {
                    loglik: -0.5 * ((2.0 * std::f64::consts::PI * s.scale).ln() + z2),
                    score_scale: 0.5 * (z2 - 1.0),
                    score_mu: r / s.scale,
                    score_logit_pi: 0.0,
                })
            }
            Family::StudentT => {
                let nu = self.params.nu;
                let r = y as f64 - s.mu;
                let z2 = r * r / s.scale;
                Ok(ObsEval {
                    loglik: self.t_const
                        - 0.5 * s.scale.ln()
                        - 0.5 * (nu + 1.0) * (z2 / nu).ln_1p(),
                    score_scale: 0.5 * ((nu + 1.0) * z2 / (nu + z2) - 1.0),
                    score_mu: (nu + 1.0) * r / (nu * s.scale + r * r),
                    score_logit_pi: 0.0,
                })
            }
        }
    }
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Runs the filter and keeps every path.
pub fn filter(spec: &ModelSpec, params: &ModelParams, input: &ModelInput) -> Result<FilterOutput> {
    filter_with_init(spec, params, input, FilterInit::default())
}

pub fn filter_with_init(
    spec: &ModelSpec,
    params: &ModelParams,
    input: &ModelInput,
    init: FilterInit,
) -> Result<FilterOutput> {
    if input.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    let n = input.len();
    let mut rec = Recursion::new(spec, params, init)?;
    let mut out = FilterOutput {
        family: spec.family,
        omega: params.omega,
        nu: params.nu,
        mu_path: Vec::with_capacity(n),
        delta_path: Vec::with_capacity(n),
        epsilon_path: Vec::with_capacity(n),
        pi_path: Vec::with_capacity(n),
        log_adjust_path: Vec::with_capacity(n),
        loglik_terms: Vec::with_capacity(n),
        loglik_mean: 0.0,
    };
    let mut total = 0.0;
    for i in 0..n {
        let adj = input.log_adjust(spec, i);
        let st = rec.state(adj);
        let ll = rec.observe(i, &st, input.y[i])?;
        total += ll;
        out.mu_path.push(st.mu);
        out.delta_path.push(st.scale);
        out.epsilon_path.push(st.eps);
        out.pi_path.push(st.pi);
        out.log_adjust_path.push(adj);
        out.loglik_terms.push(ll);
    }
    out.loglik_mean = total / n as f64;
    Ok(out)
}

/// Average log-likelihood without storing paths.
pub fn loglik_mean(spec: &ModelSpec, params: &ModelParams, input: &ModelInput) -> Result<f64> {
    if input.is_empty() {
        return Err(Error::InvalidInput("empty series".into()));
    }
    let mut rec = Recursion::new(spec, params, FilterInit::default())?;
    let mut total = 0.0;
    for (i, &y) in input.y.iter().enumerate() {
        let st = rec.state(input.log_adjust(spec, i));
        total += rec.observe(i, &st, y)?;
    }
    Ok(total / input.len() as f64)
}

/// `exp(omega + eps_i)`, i.e. `delta_i / (f_var(t_i) f_rel(d~_i))`.
pub fn forecast_adjusted_path(
    spec: &ModelSpec,
    params: &ModelParams,
    input: &ModelInput,
) -> Result<Vec<f64>> {
    Ok(filter(spec, params, input)?.adjusted_path())
}
