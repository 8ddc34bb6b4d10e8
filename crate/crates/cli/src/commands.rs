use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use chrono::{Datelike, NaiveDate, Weekday};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::{Map, Value};

use tickvol::diagnostics::{
    diagnose as diagnose_output, discretized_loglik_terms, evaluate_forecast, mean_comparison,
    write_comparison_csv, write_daily_comparison_csv, ComparisonRow, ForecastMetrics,
};
use tickvol::estimator::{fit_all_variants, fit_with, write_summary_csv};
use tickvol::gasfilter::filter;
use tickvol::realized::{correlation, write_measures_csv, DailyMeasures};
use tickvol::simulator::simulate_day;
use tickvol::tickstore::{
    aggregate_simultaneous, clean_day, load_ticks_path, read_day_path, split_days, write_day_csv,
    write_ticks_csv,
};
use tickvol::{
    AdjustmentCurves, CleaningConfig, Error, FitOptions, FitResult, ModelInput, ModelParams,
    ModelSpec, SimConfig, TickDay, Variant,
};

use crate::args::{
    need, AdjustArgs, CleanArgs, DiagnoseArgs, FitArgs, ForecastArgs, RealizedArgs, SimulateArgs,
};
use crate::files::{
    day_path, fit_file_name, list_days, list_fits, parse_variants, sibling, write_atomic,
    StoredFit, CURVES_FILE,
};
use crate::UsageError;

type Res<T> = anyhow::Result<T>;

/// Cleaning statistics, ticks merged by aggregation, ticks written.
type CleanOutcome = (tickvol::tickstore::CleanStats, usize, usize);

/// `HH:MM` or `HH:MM:SS` to milliseconds after midnight.
fn clock_ms(s: &str) -> Result<u32, UsageError> {
    let bad = || UsageError(format!("bad time of day {s:?}, expected HH:MM"));
    let parts: Vec<u32> = s
        .split(':')
        .map(|p| p.parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let (h, m, sec) = match parts[..] {
        [h, m] => (h, m, 0),
        [h, m, sec] => (h, m, sec),
        _ => return Err(bad()),
    };
    if h > 23 || m > 59 || sec > 59 {
        return Err(bad());
    }
    Ok(((h * 60 + m) * 60 + sec) * 1000)
}

/// `250ms`, `90s`, `5m` or `1h` to milliseconds.
fn span_ms(s: &str) -> Result<u32, UsageError> {
    let bad = || UsageError(format!("bad interval {s:?}, expected e.g. 5m or 90s"));
    let split = s.find(|c: char| !c.is_ascii_digit()).ok_or_else(bad)?;
    let (num, unit) = s.split_at(split);
    let n: u32 = num.parse().map_err(|_| bad())?;
    let scale = match unit {
        "ms" => 1,
        "s" => 1000,
        "m" => 60_000,
        "h" => 3_600_000,
        _ => return Err(bad()),
    };
    n.checked_mul(scale).ok_or_else(bad)
}

fn fit_options(
    max_iter: Option<usize>,
    tolerance: Option<f64>,
    restarts: Option<usize>,
) -> Res<FitOptions> {
    let mut o = FitOptions::default();
    if let Some(v) = max_iter {
        o.max_iter = v;
    }
    if let Some(v) = tolerance {
        if !(v > 0.0) {
            bail!(UsageError("--tolerance must be positive".into()));
        }
        o.tolerance = v;
    }
    if let Some(v) = restarts {
        o.restarts = v;
    }
    Ok(o)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Res<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn uses_adjustments(spec: &ModelSpec) -> bool {
    spec.use_diurnal_adjustment || spec.use_duration_adjustment
}

fn model_input(
    day: &TickDay,
    spec: &ModelSpec,
    curves: Option<&AdjustmentCurves>,
) -> tickvol::Result<ModelInput> {
    if uses_adjustments(spec) {
        let c = curves.ok_or_else(|| {
            Error::InvalidInput(format!(
                "fits use adjustments but there is no {CURVES_FILE}"
            ))
        })?;
        ModelInput::from_day(day, c)
    } else {
        Ok(ModelInput::unadjusted(day.price_changes.clone()))
    }
}

/// Curves stored next to the fits, if any.
fn fit_curves(fits_dir: &Path, fits: &[StoredFit]) -> Res<Option<AdjustmentCurves>> {
    let path = fits_dir.join(CURVES_FILE);
    if !fits.iter().any(|f| uses_adjustments(&f.fit.spec)) {
        return Ok(None);
    }
    Ok(Some(AdjustmentCurves::load(&path)?))
}

pub fn clean(a: CleanArgs) -> Res<()> {
    let input = need(&a.input, "in")?;
    let out = need(&a.out, "out")?;
    let mut cfg = CleaningConfig::default();
    if let Some(s) = &a.open {
        cfg.open_ms = clock_ms(s)?;
    }
    if let Some(s) = &a.close {
        cfg.close_ms = clock_ms(s)?;
    }
    if let Some(s) = &a.skip_open {
        cfg.skip_after_open_ms = span_ms(s)?;
    }
    if let Some(v) = a.outlier_window {
        cfg.outlier_half_window = v;
    }
    if let Some(v) = a.outlier_threshold {
        cfg.outlier_threshold = v;
    }
    if cfg.open_ms >= cfg.close_ms {
        bail!(UsageError("--open must precede --close".into()));
    }
    let aggregate = a.aggregate.unwrap_or(false);

    let report = load_ticks_path(&input)?;
    for e in report.errors.iter().take(10) {
        warn!("{}:{}: {}", input.display(), e.line, e.message);
    }
    if report.errors.len() > 10 {
        warn!(
            "{} unparseable rows in {}",
            report.errors.len(),
            input.display()
        );
    }
    let days: Vec<(NaiveDate, Vec<tickvol::Tick>)> = split_days(report.ticks).into_iter().collect();
    if days.is_empty() {
        bail!(Error::InvalidInput(format!(
            "no ticks in {}",
            input.display()
        )));
    }
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let results: Vec<(NaiveDate, Res<CleanOutcome>)> = days
        .par_iter()
        .map(|(day, ticks)| {
            let r = (|| {
                let (cleaned, stats) = clean_day(ticks, &cfg)?;
                let before = cleaned.ticks.len();
                let kept = if aggregate {
                    aggregate_simultaneous(&cleaned)?
                } else {
                    cleaned
                };
                let path = day_path(&out, *day);
                write_atomic(&path, |w| Ok(write_day_csv(w, &kept)?))?;
                Ok((stats, before - kept.ticks.len(), kept.ticks.len()))
            })();
            (*day, r)
        })
        .collect();

    let mut written = 0;
    write_atomic(&out.join("clean_stats.csv"), |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "day",
            "input",
            "out_of_hours",
            "opening",
            "missing_price",
            "outliers",
            "outlier_filter_skipped",
            "merged",
            "output",
            "error",
        ])?;
        for (day, r) in &results {
            let rec = match r {
                Ok((s, merged, n)) => {
                    written += 1;
                    vec![
                        day.to_string(),
                        s.input.to_string(),
                        s.out_of_hours.to_string(),
                        s.opening.to_string(),
                        s.missing_price.to_string(),
                        s.outliers.to_string(),
                        s.outlier_filter_skipped.to_string(),
                        merged.to_string(),
                        n.to_string(),
                        String::new(),
                    ]
                }
                Err(e) => {
                    warn!("{day}: {e:#}");
                    let mut v = vec![day.to_string()];
                    v.extend(std::iter::repeat_n(String::new(), 8));
                    v.push(format!("{e:#}"));
                    v
                }
            };
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    info!(
        "cleaned {written} of {} days into {}",
        results.len(),
        out.display()
    );
    if written == 0 {
        bail!(Error::DayUnusable("no day survived cleaning".into()));
    }
    Ok(())
}

/// Reads every day file in parallel; unreadable days are logged and left out.
fn read_days(dir: &Path) -> Res<Vec<TickDay>> {
    let paths: Vec<_> = list_days(dir)?.into_values().collect();
    let days: Vec<TickDay> = paths
        .par_iter()
        .filter_map(|p| match read_day_path(p) {
            Ok(d) => Some(d),
            Err(e) => {
                warn!("{}: {e}", p.display());
                None
            }
        })
        .collect();
    if days.is_empty() {
        bail!(Error::DayUnusable(format!(
            "no readable day in {}",
            dir.display()
        )));
    }
    Ok(days)
}

pub fn adjust(a: AdjustArgs) -> Res<()> {
    let dir = need(&a.days, "days")?;
    let out = need(&a.out, "out")?;
    let days = read_days(&dir)?;
    let curves = tickvol::smoothing::build_adjustment_curves(&days)?;
    write_json(&out, &curves)?;
    info!(
        "curves from {} days written to {}",
        days.len(),
        out.display()
    );
    Ok(())
}

type VariantOutcome = (Variant, Result<FitResult, String>);

pub fn fit(a: FitArgs) -> Res<()> {
    let dir = need(&a.days, "days")?;
    let out = need(&a.out, "out")?;
    let variants = parse_variants(a.variants.as_deref().unwrap_or("all"))?;
    let opts = fit_options(a.max_iter, a.tolerance, a.restarts)?;
    let curves = a
        .curves
        .as_deref()
        .map(AdjustmentCurves::load)
        .transpose()?;
    let days: Vec<_> = list_days(&dir)?.into_iter().collect();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    if let Some(c) = &curves {
        write_json(&out.join(CURVES_FILE), c)?;
    }

    let per_day: Vec<(NaiveDate, Result<Vec<VariantOutcome>, String>)> = days
        .par_iter()
        .map(|(day, path)| {
            let r = (|| -> Res<Vec<VariantOutcome>> {
                let td = read_day_path(path)?;
                let input = match &curves {
                    Some(c) => ModelInput::from_day(&td, c)?,
                    None => ModelInput::unadjusted(td.price_changes.clone()),
                };
                let fits = fit_all_variants(&input, &variants, curves.is_some(), &opts);
                let mut done = Vec::with_capacity(fits.len());
                for f in fits {
                    let file = out.join(fit_file_name(*day, f.variant));
                    match &f.result {
                        Ok(r) => {
                            let json = r.to_json()?;
                            write_atomic(&file, |w| Ok(w.write_all(json.as_bytes())?))?;
                        }
                        Err(e) => {
                            warn!("{day} {}: {e}", f.variant);
                            // A stale file from an earlier run must not survive.
                            if file.exists() {
                                fs::remove_file(&file)?;
                            }
                        }
                    }
                    done.push((f.variant, f.result));
                }
                Ok(done)
            })();
            if let Err(e) = &r {
                warn!("{day}: {e:#}");
            }
            (*day, r.map_err(|e| format!("{e:#}")))
        })
        .collect();

    let mut ok: Vec<(Variant, FitResult)> = Vec::new();
    let mut failures: Vec<[String; 3]> = Vec::new();
    let mut days_read = 0;
    for (day, r) in &per_day {
        match r {
            Ok(list) => {
                days_read += 1;
                for (v, res) in list {
                    match res {
                        Ok(f) => ok.push((*v, f.clone())),
                        Err(e) => failures.push([day.to_string(), v.to_string(), e.clone()]),
                    }
                }
            }
            Err(e) => failures.push([day.to_string(), String::new(), e.clone()]),
        }
    }
    write_atomic(&out.join("summary.csv"), |w| Ok(write_summary_csv(w, &ok)?))?;
    write_atomic(&out.join("failures.csv"), |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["day", "variant", "error"])?;
        for f in &failures {
            wtr.write_record(f)?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    info!(
        "{} fits over {days_read} days, {} failures",
        ok.len(),
        failures.len()
    );
    if ok.is_empty() {
        if days_read == 0 {
            bail!(Error::DayUnusable("no day file could be read".into()));
        }
        bail!(Error::Estimation("no model could be fit".into()));
    }
    Ok(())
}

/// Fits grouped by day, keeping only days with a readable day file.
fn by_day(
    fits: Vec<StoredFit>,
    days: &BTreeMap<NaiveDate, std::path::PathBuf>,
) -> Vec<(NaiveDate, Vec<StoredFit>)> {
    let mut grouped: BTreeMap<NaiveDate, Vec<StoredFit>> = BTreeMap::new();
    for f in fits {
        if days.contains_key(&f.day) {
            grouped.entry(f.day).or_default().push(f);
        } else {
            warn!("no day file for fit {} {}", f.day, f.variant);
        }
    }
    grouped.into_iter().collect()
}

pub fn diagnose(a: DiagnoseArgs) -> Res<()> {
    let fits_dir = need(&a.fits, "fits")?;
    let dir = need(&a.days, "days")?;
    let out = need(&a.out, "out")?;
    let fits = list_fits(&fits_dir)?;
    let curves = fit_curves(&fits_dir, &fits)?;
    let days = list_days(&dir)?;
    let groups = by_day(fits, &days);

    let rows: Vec<(NaiveDate, ComparisonRow)> = groups
        .par_iter()
        .flat_map_iter(|(day, fits)| {
            let td = match read_day_path(&days[day]) {
                Ok(t) => Some(t),
                Err(e) => {
                    warn!("{day}: {e}");
                    None
                }
            };
            fits.iter()
                .filter_map(|f| {
                    let td = td.as_ref()?;
                    let row = (|| -> tickvol::Result<ComparisonRow> {
                        let input = model_input(td, &f.fit.spec, curves.as_ref())?;
                        let output = filter(&f.fit.spec, &f.fit.params, &input)?;
                        let disc = if f.fit.spec.family.is_discrete() {
                            None
                        } else {
                            let t = discretized_loglik_terms(&output, &input.y)?;
                            Some(t.iter().sum::<f64>() / t.len() as f64)
                        };
                        Ok(ComparisonRow {
                            variant: f.variant,
                            loglik_mean: output.loglik_mean,
                            discretized_loglik_mean: disc,
                            report: diagnose_output(&output, &input.y)?,
                        })
                    })();
                    match row {
                        Ok(r) => Some((*day, r)),
                        Err(e) => {
                            warn!("{day} {}: {e}", f.variant);
                            None
                        }
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    if rows.is_empty() {
        bail!(Error::InvalidInput(
            "no fit could be matched with its day".into()
        ));
    }
    let plain: Vec<ComparisonRow> = rows.iter().map(|(_, r)| r.clone()).collect();
    write_atomic(&out, |w| {
        Ok(write_comparison_csv(w, &mean_comparison(&plain))?)
    })?;
    write_atomic(&sibling(&out, "_by_day"), |w| {
        Ok(write_daily_comparison_csv(w, &rows)?)
    })?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Sample {
    Full,
    Aggregated,
}

impl Sample {
    fn name(self) -> &'static str {
        match self {
            Sample::Full => "full",
            Sample::Aggregated => "aggregated",
        }
    }

    fn apply(self, day: &TickDay) -> tickvol::Result<TickDay> {
        match self {
            Sample::Full => Ok(day.clone()),
            Sample::Aggregated => aggregate_simultaneous(day),
        }
    }
}

struct ForecastRow {
    train: Sample,
    test: Sample,
    variant: Variant,
    train_day: NaiveDate,
    test_day: NaiveDate,
    n_test: usize,
    metrics: ForecastMetrics,
}

pub fn forecast(a: ForecastArgs) -> Res<()> {
    let fits_dir = need(&a.fits, "fits")?;
    let dir = need(&a.days, "days")?;
    let out = need(&a.out, "out")?;
    let opts = fit_options(a.max_iter, a.tolerance, a.restarts)?;
    let mut train_samples = vec![Sample::Full];
    if a.aggregate_train.unwrap_or(false) {
        train_samples.push(Sample::Aggregated);
    }
    let mut test_samples = vec![Sample::Full];
    if a.aggregate_test.unwrap_or(false) {
        test_samples.push(Sample::Aggregated);
    }
    let fits = list_fits(&fits_dir)?;
    let curves = fit_curves(&fits_dir, &fits)?;
    let days = list_days(&dir)?;

    // Each fit is scored on the next available day.
    let jobs: Vec<(StoredFit, NaiveDate)> = fits
        .into_iter()
        .filter_map(|f| {
            let next = days.range(f.day.succ_opt()?..).next().map(|(d, _)| *d);
            if next.is_none() {
                info!("no day after {} to score {}", f.day, f.variant);
            }
            Some((f.clone(), next?))
        })
        .collect();
    if jobs.is_empty() {
        bail!(Error::InvalidInput(
            "no fit has a following day to forecast".into()
        ));
    }

    let rows: Vec<ForecastRow> = jobs
        .par_iter()
        .flat_map_iter(|(f, test_day)| {
            let r = (|| -> Res<Vec<ForecastRow>> {
                let spec = &f.fit.spec;
                let train_raw = read_day_path(&days[&f.day])?;
                let test_raw = read_day_path(&days[test_day])?;
                let mut rows = Vec::new();
                for &train in &train_samples {
                    let fitted = match train {
                        Sample::Full => f.fit.clone(),
                        Sample::Aggregated => {
                            let td = train.apply(&train_raw)?;
                            let input = model_input(&td, spec, curves.as_ref())?;
                            fit_with(spec, &input, &opts, &[f.fit.params])?
                        }
                    };
                    for &test in &test_samples {
                        let td = test.apply(&test_raw)?;
                        let input = model_input(&td, spec, curves.as_ref())?;
                        rows.push(ForecastRow {
                            train,
                            test,
                            variant: f.variant,
                            train_day: f.day,
                            test_day: *test_day,
                            n_test: input.len(),
                            metrics: evaluate_forecast(&fitted, &input)?,
                        });
                    }
                }
                Ok(rows)
            })();
            r.unwrap_or_else(|e| {
                warn!("{} {}: {e:#}", f.day, f.variant);
                Vec::new()
            })
        })
        .collect();
    if rows.is_empty() {
        bail!(Error::Estimation("no forecast could be evaluated".into()));
    }

    write_atomic(&sibling(&out, "_by_day"), |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "train_sample",
            "test_sample",
            "variant",
            "train_day",
            "test_day",
            "n_test",
            "loglik",
            "mae",
            "rmse",
        ])?;
        for r in &rows {
            wtr.write_record([
                r.train.name().to_string(),
                r.test.name().to_string(),
                r.variant.to_string(),
                r.train_day.to_string(),
                r.test_day.to_string(),
                r.n_test.to_string(),
                r.metrics.loglik_mean.to_string(),
                r.metrics.mae.to_string(),
                r.metrics.rmse.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;

    let rank = |v: Variant| Variant::all().position(|w| w == v).unwrap();
    let mut cells: BTreeMap<(Sample, Sample, usize), Vec<&ForecastRow>> = BTreeMap::new();
    for r in &rows {
        cells
            .entry((r.train, r.test, rank(r.variant)))
            .or_default()
            .push(r);
    }
    write_atomic(&out, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "train_sample",
            "test_sample",
            "variant",
            "n_days",
            "loglik",
            "mae",
            "rmse",
        ])?;
        for ((train, test, _), group) in &cells {
            let n = group.len() as f64;
            let mean = |g: fn(&ForecastMetrics) -> f64| {
                group.iter().map(|r| g(&r.metrics)).sum::<f64>() / n
            };
            wtr.write_record([
                train.name().to_string(),
                test.name().to_string(),
                group[0].variant.to_string(),
                group.len().to_string(),
                mean(|m| m.loglik_mean).to_string(),
                mean(|m| m.mae).to_string(),
                mean(|m| m.rmse).to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    Ok(())
}

pub fn realized(a: RealizedArgs) -> Res<()> {
    let fits_dir = need(&a.fits, "fits")?;
    let dir = need(&a.days, "days")?;
    let out = need(&a.out, "out")?;
    let variant: Variant = a
        .variant
        .as_deref()
        .unwrap_or("proposed")
        .parse()
        .map_err(|e: Error| UsageError(e.to_string()))?;
    let fits: Vec<StoredFit> = list_fits(&fits_dir)?
        .into_iter()
        .filter(|f| f.variant == variant)
        .collect();
    if fits.is_empty() {
        bail!(Error::InvalidInput(format!(
            "no {variant} fits in {}",
            fits_dir.display()
        )));
    }
    let curves = fit_curves(&fits_dir, &fits)?;
    let days = list_days(&dir)?;
    let rows: Vec<DailyMeasures> = fits
        .par_iter()
        .filter_map(|f| {
            let path = days.get(&f.day).or_else(|| {
                warn!("no day file for {}", f.day);
                None
            })?;
            let r = (|| -> tickvol::Result<DailyMeasures> {
                let td = read_day_path(path)?;
                let input = model_input(&td, &f.fit.spec, curves.as_ref())?;
                let output = filter(&f.fit.spec, &f.fit.params, &input)?;
                DailyMeasures::compute(f.day, &input.y, &output)
            })();
            r.map_err(|e| warn!("{}: {e}", f.day)).ok()
        })
        .collect();
    if rows.is_empty() {
        bail!(Error::InvalidInput("no day could be measured".into()));
    }
    write_atomic(&out, |w| Ok(write_measures_csv(w, &rows)?))?;

    // Correlations over the days where every measure exists.
    let complete: Vec<&DailyMeasures> = rows.iter().filter(|r| r.tmv.is_some()).collect();
    let names = ["rv", "rk", "tmv", "amv"];
    let series: Vec<Vec<f64>> = vec![
        complete.iter().map(|r| r.rv).collect(),
        complete.iter().map(|r| r.rk).collect(),
        complete.iter().map(|r| r.tmv.unwrap()).collect(),
        complete.iter().map(|r| r.amv).collect(),
    ];
    write_atomic(&sibling(&out, "_corr"), |w| {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["measure"];
        header.extend(names);
        wtr.write_record(&header)?;
        for (i, name) in names.iter().enumerate() {
            let mut rec = vec![name.to_string()];
            for s in &series {
                rec.push(correlation(&series[i], s).map_or_else(|| "NA".into(), |c| c.to_string()));
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    Ok(())
}

/// Coefficients of the default simulation: an MA(1) mean, persistent
/// dispersion and about one in eight zeros inflated.
fn default_truth(variant: Variant) -> ModelParams {
    let mut p = ModelParams {
        theta: -0.35,
        omega: 0.0,
        phi: 0.97,
        alpha: 0.19,
        pi: 0.13,
        ..Default::default()
    };
    if variant == Variant::GasInflation {
        p.gamma = (p.pi / (1.0 - p.pi)).ln();
    }
    p
}

/// Replaces the fields of `base` named in `overrides`; unknown names are
/// usage errors.
fn overlay<T: serde::Serialize + serde::de::DeserializeOwned>(
    base: &T,
    overrides: Option<&Map<String, Value>>,
    what: &str,
) -> Res<T> {
    let Some(o) = overrides else {
        return Ok(serde_json::from_value(serde_json::to_value(base)?)?);
    };
    let Value::Object(mut m) = serde_json::to_value(base)? else {
        unreachable!("structs serialize to objects")
    };
    for (k, v) in o {
        if !m.contains_key(k) {
            bail!(UsageError(format!("unknown {what} setting {k:?}")));
        }
        m.insert(k.clone(), v.clone());
    }
    serde_json::from_value(Value::Object(m)).map_err(|e| UsageError(format!("{what}: {e}")).into())
}

fn next_weekday(d: NaiveDate) -> NaiveDate {
    let mut n = d.succ_opt().expect("date in range");
    while matches!(n.weekday(), Weekday::Sat | Weekday::Sun) {
        n = n.succ_opt().expect("date in range");
    }
    n
}

pub fn simulate(a: SimulateArgs) -> Res<()> {
    let out = need(&a.out, "out")?;
    let variant: Variant = a
        .variant
        .as_deref()
        .unwrap_or("proposed")
        .parse()
        .map_err(|e: Error| UsageError(e.to_string()))?;
    let n_days = a.days.unwrap_or(1);
    if n_days == 0 {
        bail!(UsageError("--days must be positive".into()));
    }
    let params = overlay(&default_truth(variant), a.params.as_ref(), "params")?;
    let mut base = SimConfig::new(
        variant.spec(),
        params,
        a.n_ticks.unwrap_or(20_000),
        a.seed.unwrap_or(0),
    );
    if let Some(s) = &a.start_day {
        base.day = NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|_| UsageError(format!("bad --start-day {s:?}, expected YYYY-MM-DD")))?;
    }
    let base = overlay(&base, a.sim.as_ref(), "sim")?;
    base.validate()?;

    let mut configs = Vec::with_capacity(n_days);
    let mut day = base.day;
    for k in 0..n_days {
        let mut c = base.clone();
        c.day = day;
        c.seed = base.seed.wrapping_add(k as u64);
        configs.push(c);
        day = next_weekday(day);
    }
    let simulated: Vec<TickDay> = configs
        .par_iter()
        .map(simulate_day)
        .collect::<tickvol::Result<_>>()?;
    let ticks: Vec<tickvol::Tick> = simulated.into_iter().flat_map(|d| d.ticks).collect();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(&out.join("ticks.csv"), |w| Ok(write_ticks_csv(w, &ticks)?))?;
    write_json(&out.join("sim_config.json"), &base)?;
    info!(
        "{} ticks over {n_days} days written to {}",
        ticks.len(),
        out.display()
    );
    Ok(())
}
