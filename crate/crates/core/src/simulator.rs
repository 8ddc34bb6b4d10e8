//! Synthetic tick days drawn from the model family.

use chrono::NaiveDate;
use log::warn;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gasfilter::{Family, FilterInit, ModelParams, ModelSpec, Recursion};
use crate::tickstore::{Tick, TickDay};
use crate::ziskellam::{self, ZiSkellamParams};

/// How nonzero durations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DurationProcess {
    /// Exponential with the given mean in seconds.
    IidExponential { mean: f64 },
    /// Exponential with mean `mean * (1 - amplitude cos(2 pi u))`, `u` the
    /// elapsed fraction of the trading window: short durations near the open
    /// and close, long around midday.
    DiurnalExponential { mean: f64, amplitude: f64 },
}

impl DurationProcess {
    /// Multiplier of the mean duration at window fraction `u`.
    pub fn shape(&self, u: f64) -> f64 {
        match *self {
            DurationProcess::IidExponential { .. } => 1.0,
            DurationProcess::DiurnalExponential { amplitude, .. } => {
                1.0 - amplitude * (2.0 * std::f64::consts::PI * u).cos()
            }
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            DurationProcess::IidExponential { mean }
            | DurationProcess::DiurnalExponential { mean, .. } => mean,
        }
    }
}

/// Multiplicative effect `g(d~)` of the diurnally adjusted duration on the
/// scale parameter, used to exercise duration-adjustment recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DurationEffect {
    /// `g(d) = ((d + offset) / (1 + offset))^exponent`
    SaturatingPower { offset: f64, exponent: f64 },
}

impl DurationEffect {
    pub fn value(&self, d: f64) -> f64 {
        match *self {
            DurationEffect::SaturatingPower { offset, exponent } => {
                ((d + offset) / (1.0 + offset)).powf(exponent)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub n_ticks: usize,
    pub duration_process: DurationProcess,
    pub zero_duration_share: f64,
    pub base_price: f64,
    pub seed: u64,
    #[serde(default)]
    pub duration_effect: Option<DurationEffect>,
    /// Amplitude of a U-shaped intraday variance multiplier
    /// `1 + a cos(2 pi u)`; zero disables it.
    #[serde(default)]
    pub variance_amplitude: f64,
    #[serde(default = "default_day")]
    pub day: NaiveDate,
    /// First tick time, milliseconds after midnight.
    #[serde(default = "default_start_ms")]
    pub start_ms: u32,
    /// Last admissible tick time, milliseconds after midnight.
    #[serde(default = "default_end_ms")]
    pub end_ms: u32,
}

fn default_day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 3, 1).unwrap()
}

fn default_start_ms() -> u32 {
    (9 * 3600 + 35 * 60) * 1000
}

fn default_end_ms() -> u32 {
    16 * 3600 * 1000
}

impl SimConfig {
    pub fn new(spec: ModelSpec, params: ModelParams, n_ticks: usize, seed: u64) -> Self {
        SimConfig {
            spec,
            params,
            n_ticks,
            duration_process: DurationProcess::IidExponential { mean: 0.8 },
            zero_duration_share: 0.0,
            base_price: 100.0,
            seed,
            duration_effect: None,
            variance_amplitude: 0.0,
            day: default_day(),
            start_ms: default_start_ms(),
            end_ms: default_end_ms(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n_ticks < 2 {
            return bad("n_ticks must be at least 2");
        }
        if !(0.0..1.0).contains(&self.zero_duration_share) {
            return bad("zero_duration_share must lie in [0, 1)");
        }
        if !(self.base_price > 0.0) {
            return bad("base_price must be positive");
        }
        if !(self.duration_process.mean() > 0.0) {
            return bad("mean duration must be positive");
        }
        if let DurationProcess::DiurnalExponential { amplitude, .. } = self.duration_process {
            if !(0.0..1.0).contains(&amplitude) {
                return bad("duration amplitude must lie in [0, 1)");
            }
        }
        if !(0.0..1.0).contains(&self.variance_amplitude) {
            return bad("variance_amplitude must lie in [0, 1)");
        }
        if self.start_ms >= self.end_ms || self.end_ms >= 86_400_000 {
            return bad("invalid trading window");
        }
        self.spec.validate()?;
        self.params.validate(&self.spec)
    }
}

/// Everything a simulation produced, including the latent paths.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDay {
    pub day: TickDay,
    pub mu_path: Vec<f64>,
    /// Scale parameter per observation (`delta` or `sigma^2`).
    pub scale_path: Vec<f64>,
    pub epsilon_path: Vec<f64>,
    pub pi_path: Vec<f64>,
    /// Diurnally adjusted durations fed to the duration effect.
    pub adjusted_durations: Vec<f64>,
}

pub fn simulate_day(config: &SimConfig) -> Result<TickDay> {
    Ok(simulate_day_full(config)?.day)
}

pub fn simulate_day_full(config: &SimConfig) -> Result<SimulatedDay> {
    config.validate()?;
    let mut rng = StdRng::seed_from_u64(config.seed);
    let n_obs = config.n_ticks - 1;

    let times_ms = simulate_times(config, &mut rng);
    let window = (config.end_ms - config.start_ms) as f64;
    let frac = |t: u32| (t - config.start_ms) as f64 / window;

    let mean = config.duration_process.mean();
    let mut adjusted_durations = Vec::with_capacity(n_obs);
    for i in 1..config.n_ticks {
        let d = (times_ms[i] - times_ms[i - 1]) as f64 / 1000.0;
        let u = frac(times_ms[i]);
        let expected = mean * config.duration_process.shape(u) * (1.0 - config.zero_duration_share);
        adjusted_durations.push(d / expected);
    }

    let mut rec = Recursion::new(&config.spec, &config.params, FilterInit::default())?;
    let mut y = Vec::with_capacity(n_obs);
    let mut out = Paths {
        mu_path: Vec::with_capacity(n_obs),
        scale_path: Vec::with_capacity(n_obs),
        epsilon_path: Vec::with_capacity(n_obs),
        pi_path: Vec::with_capacity(n_obs),
        adjusted_durations,
    };
    for i in 0..n_obs {
        let mut log_adjust = 0.0;
        if config.variance_amplitude > 0.0 {
            let u = frac(times_ms[i + 1]);
            log_adjust +=
                (1.0 + config.variance_amplitude * (2.0 * std::f64::consts::PI * u).cos()).ln();
        }
        if let Some(g) = config.duration_effect {
            log_adjust += g.value(out.adjusted_durations[i]).ln();
        }
        let st = rec.state(log_adjust);
        let draw = sample_obs(config, st.mu, st.scale, st.pi, i, &mut rng)?;
        rec.observe(i, &st, draw)?;
        y.push(draw);
        out.mu_path.push(st.mu);
        out.scale_path.push(st.scale);
        out.epsilon_path.push(st.eps);
        out.pi_path.push(st.pi);
    }

    let base_cents = crate::tickstore::round_to_cents(config.base_price);
    let mut cum = 0i64;
    let mut min_cum = 0i64;
    for &v in &y {
        cum += v;
        min_cum = min_cum.min(cum);
    }
    let mut start = base_cents;
    if start + min_cum <= 0 {
        let needed = -min_cum + 1;
        while start < needed {
            start *= 2;
        }
        warn!(
            "simulated price path reached zero from base {:.2}; restarting from {:.2}",
            config.base_price,
            start as f64 / 100.0
        );
    }

    let mut ticks = Vec::with_capacity(config.n_ticks);
    let mut price = start;
    for (i, &t) in times_ms.iter().enumerate() {
        if i > 0 {
            price += y[i - 1];
        }
        let volume = rng.random_range(1..=500u64);
        ticks.push(Tick::new(config.day, t, price as f64 / 100.0, volume));
    }
    let day = TickDay::from_ticks(config.day, ticks)?;
    debug_assert_eq!(day.price_changes, y);
    Ok(SimulatedDay {
        day,
        mu_path: out.mu_path,
        scale_path: out.scale_path,
        epsilon_path: out.epsilon_path,
        pi_path: out.pi_path,
        adjusted_durations: out.adjusted_durations,
    })
}

struct Paths {
    mu_path: Vec<f64>,
    scale_path: Vec<f64>,
    epsilon_path: Vec<f64>,
    pi_path: Vec<f64>,
    adjusted_durations: Vec<f64>,
}

fn simulate_times(config: &SimConfig, rng: &mut StdRng) -> Vec<u32> {
    let n = config.n_ticks;
    let window_s = (config.end_ms - config.start_ms) as f64 / 1000.0;
    let unit = Exp::new(1.0).unwrap();
    // Draw on a unit-mean clock first, then map onto the window, so the
    // diurnal shape is evaluated at the final position of each tick.
    let zero: Vec<bool> = (1..n)
        .map(|_| rng.random::<f64>() < config.zero_duration_share)
        .collect();
    let draws: Vec<f64> = (1..n).map(|_| unit.sample(rng)).collect();
    let mean = config.duration_process.mean();
    let mut durations = vec![0.0; n - 1];
    let mut u_est = 0.0;
    let expected_total = mean * (n - 1) as f64 * (1.0 - config.zero_duration_share);
    let span_guess = expected_total.min(window_s).max(1e-9);
    for i in 0..n - 1 {
        if zero[i] {
            continue;
        }
        let shape = config.duration_process.shape((u_est / span_guess).min(1.0));
        durations[i] = mean * shape * draws[i];
        u_est += durations[i];
    }
    let total: f64 = durations.iter().sum();
    let max_total = window_s - 0.001 * (n as f64);
    let scale = if total > max_total {
        warn!(
            "simulated durations span {total:.0}s; compressing into the {window_s:.0}s trading window"
        );
        (max_total / total).max(0.0)
    } else {
        1.0
    };
    let mut times = Vec::with_capacity(n);
    let mut t = config.start_ms;
    times.push(t);
    for (i, &d) in durations.iter().enumerate() {
        if !zero[i] {
            let ms = ((d * scale * 1000.0).round() as u32).max(1);
            t = (t + ms).min(config.end_ms);
        }
        times.push(t);
    }
    times
}

fn sample_obs(
    config: &SimConfig,
    mu: f64,
    scale: f64,
    pi: f64,
    index: usize,
    rng: &mut StdRng,
) -> Result<i64> {
    match config.spec.family {
        Family::ZiskellamMeandisp => Ok(ziskellam::sample(
            &ZiSkellamParams {
                mu,
                delta: scale,
                pi,
            },
            rng,
        )),
        Family::ZiskellamMeanvar => {
            let delta = scale - mu.abs();
            if !(delta > 0.0) {
                return Err(Error::VarianceBound { index });
            }
            Ok(ziskellam::sample(&ZiSkellamParams { mu, delta, pi }, rng))
        }
        // Continuous families are rounded to whole cents.
        Family::Normal => {
            let d = Normal::new(mu, scale.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
            Ok(d.sample(rng).round() as i64)
        }
        Family::StudentT => {
            let d = StudentT::new(config.params.nu).map_err(|e| Error::Domain(e.to_string()))?;
            let z: f64 = d.sample(rng);
            Ok((mu + scale.sqrt() * z).round() as i64)
        }
    }
}

/// A Brownian efficient log-price observed with i.i.d. Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyRandomWalk {
    /// Observed log prices, `n + 1` values.
    pub observed: Vec<f64>,
    /// Integrated variance of the efficient price over the path.
    pub integrated_variance: f64,
    pub noise_variance: f64,
}

impl NoisyRandomWalk {
    /// Observed returns, `n` values.
    pub fn returns(&self) -> Vec<f64> {
        self.observed.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Simulates `n` returns with constant spot variance `iv / n` per step and
/// noise standard deviation `noise_var.sqrt()` on each observed level.
pub fn simulate_noisy_random_walk(
    n: usize,
    integrated_variance: f64,
    noise_variance: f64,
    seed: u64,
) -> Result<NoisyRandomWalk> {
    if n < 2 || !(integrated_variance > 0.0) || !(noise_variance >= 0.0) {
        return Err(Error::InvalidInput("invalid random walk settings".into()));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let step = Normal::new(0.0, (integrated_variance / n as f64).sqrt()).unwrap();
    let noise = Normal::new(0.0, noise_variance.sqrt()).unwrap();
    let mut x = 0.0;
    let mut observed = Vec::with_capacity(n + 1);
    observed.push(x + noise.sample(&mut rng));
    for _ in 0..n {
        let dx = step.sample(&mut rng);
        x += dx;
        observed.push(x + noise.sample(&mut rng));
    }
    Ok(NoisyRandomWalk {
        observed,
        integrated_variance,
        noise_variance,
    })
}
