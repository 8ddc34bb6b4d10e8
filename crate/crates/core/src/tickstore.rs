//! Raw transaction records: loading, cleaning, and aggregation of
//! simultaneous trades.
//!
//! Within a day, ticks keep their file order for equal timestamps; the
//! sequence of same-millisecond trades is information, not noise.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MS_PER_DAY: u32 = 86_400_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    pub day: NaiveDate,
    /// Milliseconds since local midnight.
    pub time_ms: u32,
    /// `None` when the record carries no usable price.
    pub price: Option<f64>,
    pub volume: u64,
}

impl Tick {
    pub fn new(day: NaiveDate, time_ms: u32, price: f64, volume: u64) -> Self {
        Tick {
            day,
            time_ms,
            price: Some(price),
            volume,
        }
    }

    pub fn cents(&self) -> Option<i64> {
        self.price.map(round_to_cents)
    }
}

/// Rounds a price to whole cents, half away from zero.
///
/// The product is first snapped to a millionth of a cent so that decimal
/// inputs such as `1.005` round the way they read.
pub fn round_to_cents(price: f64) -> i64 {
    let c = price * 100.0;
    ((c * 1e6).round() / 1e6).round() as i64
}

/// One cleaned trading day with derived durations and price changes.
#[derive(Debug, Clone, PartialEq)]
pub struct TickDay {
    pub day: NaiveDate,
    pub ticks: Vec<Tick>,
    /// `d_i = t_i - t_{i-1}` in seconds, `i = 1..n`.
    pub durations: Vec<f64>,
    /// `y_i = 100 (p_i - p_{i-1})` in cents, `i = 1..n`.
    pub price_changes: Vec<i64>,
}

impl TickDay {
    /// Builds a day from ticks that all carry a price. Prices are rounded
    /// to cents.
    pub fn from_ticks(day: NaiveDate, mut ticks: Vec<Tick>) -> Result<Self> {
        let mut cents = Vec::with_capacity(ticks.len());
        for (i, t) in ticks.iter_mut().enumerate() {
            let c = t
                .cents()
                .ok_or_else(|| Error::InvalidInput(format!("tick {i} of {day} has no price")))?;
            if c <= 0 {
                return Err(Error::InvalidInput(format!(
                    "tick {i} of {day} has non-positive price"
                )));
            }
            t.price = Some(c as f64 / 100.0);
            cents.push(c);
        }
        if ticks.windows(2).any(|w| w[1].time_ms < w[0].time_ms) {
            return Err(Error::InvalidInput(format!(
                "ticks of {day} are not time-ordered"
            )));
        }
        let durations = ticks
            .windows(2)
            .map(|w| (w[1].time_ms - w[0].time_ms) as f64 / 1000.0)
            .collect();
        let price_changes = cents.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(TickDay {
            day,
            ticks,
            durations,
            price_changes,
        })
    }

    /// Number of observations `n` (ticks minus one).
    pub fn len(&self) -> usize {
        self.price_changes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.price_changes.is_empty()
    }

    /// Time of day in seconds of each observation (the later tick of each
    /// pair).
    pub fn obs_times(&self) -> Vec<f64> {
        self.ticks[1..]
            .iter()
            .map(|t| t.time_ms as f64 / 1000.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub ticks: Vec<Tick>,
    pub errors: Vec<RowError>,
}

/// Parses `timestamp,price,volume` records. Rows that fail to parse are
/// collected in [`LoadReport::errors`] rather than aborting the load.
pub fn load_ticks<R: Read>(reader: R) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut report = LoadReport::default();
    for (idx, rec) in rdr.records().enumerate() {
        let line = rec
            .as_ref()
            .ok()
            .and_then(|r| r.position().map(|p| p.line()))
            .unwrap_or(idx as u64 + 2);
        match rec.map_err(|e| e.to_string()).and_then(|r| parse_row(&r)) {
            Ok(t) => report.ticks.push(t),
            Err(message) => report.errors.push(RowError { line, message }),
        }
    }
    Ok(report)
}

pub fn load_ticks_path(path: &Path) -> Result<LoadReport> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    load_ticks(f)
}

fn parse_row(r: &csv::StringRecord) -> std::result::Result<Tick, String> {
    if r.len() < 3 {
        return Err(format!("expected 3 fields, found {}", r.len()));
    }
    let ts = NaiveDateTime::parse_from_str(&r[0], "%Y-%m-%dT%H:%M:%S%.f")
        .or_else(|_| NaiveDateTime::parse_from_str(&r[0], "%Y-%m-%d %H:%M:%S%.f"))
        .map_err(|e| format!("bad timestamp {:?}: {e}", &r[0]))?;
    let t = ts.time();
    let time_ms = t.num_seconds_from_midnight() * 1000 + t.nanosecond() / 1_000_000;
    let price = if r[1].is_empty() {
        None
    } else {
        let p: f64 = r[1].parse().map_err(|_| format!("bad price {:?}", &r[1]))?;
        if !p.is_finite() || p < 0.0 {
            return Err(format!("bad price {:?}", &r[1]));
        }
        // A zero price means no recorded price.
        (p > 0.0).then_some(p)
    };
    let volume: i64 = r[2]
        .parse()
        .map_err(|_| format!("bad volume {:?}", &r[2]))?;
    if volume < 0 {
        return Err(format!("negative volume {volume}"));
    }
    Ok(Tick {
        day: ts.date(),
        time_ms,
        price,
        volume: volume as u64,
    })
}

/// Writes ticks in the raw `timestamp,price,volume` format.
pub fn write_ticks_csv<W: Write>(w: W, ticks: &[Tick]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["timestamp", "price", "volume"])?;
    for t in ticks {
        let s = t.time_ms / 1000;
        let ts = format!(
            "{}T{:02}:{:02}:{:02}.{:03}",
            t.day.format("%Y-%m-%d"),
            s / 3600,
            (s / 60) % 60,
            s % 60,
            t.time_ms % 1000
        );
        let price = t.price.map(|p| format!("{p:.2}")).unwrap_or_default();
        wtr.write_record([ts, price, t.volume.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<tick writer>", e))?;
    Ok(())
}

/// Groups ticks by calendar day, keeping file order within each day.
pub fn split_days(ticks: Vec<Tick>) -> BTreeMap<NaiveDate, Vec<Tick>> {
    let mut out: BTreeMap<NaiveDate, Vec<Tick>> = BTreeMap::new();
    for t in ticks {
        out.entry(t.day).or_default().push(t);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleaningConfig {
    pub open_ms: u32,
    pub close_ms: u32,
    pub skip_after_open_ms: u32,
    /// Neighbours on each side of the focal tick in the outlier filter.
    pub outlier_half_window: usize,
    /// Threshold in mean absolute deviations.
    pub outlier_threshold: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            open_ms: 9 * 3_600_000 + 30 * 60_000,
            close_ms: 16 * 3_600_000,
            skip_after_open_ms: 5 * 60_000,
            outlier_half_window: 25,
            outlier_threshold: 10.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CleanStats {
    pub input: usize,
    pub out_of_hours: usize,
    pub opening: usize,
    pub missing_price: usize,
    pub outliers: usize,
    pub outlier_filter_skipped: bool,
}

/// Applies, in order: trading-hours window, opening skip, missing-price
/// removal, rolling-median outlier filter, rounding to cents.
pub fn clean_day(ticks: &[Tick], cfg: &CleaningConfig) -> Result<(TickDay, CleanStats)> {
    let mut stats = CleanStats {
        input: ticks.len(),
        ..Default::default()
    };
    let Some(day) = ticks.first().map(|t| t.day) else {
        return Err(Error::DayUnusable("no ticks".into()));
    };
    if ticks.iter().any(|t| t.day != day) {
        return Err(Error::InvalidInput("ticks span several days".into()));
    }
    let mut kept: Vec<Tick> = ticks.to_vec();
    kept.sort_by_key(|t| t.time_ms);

    let before = kept.len();
    kept.retain(|t| t.time_ms >= cfg.open_ms && t.time_ms <= cfg.close_ms);
    stats.out_of_hours = before - kept.len();

    let before = kept.len();
    let skip_end = cfg.open_ms + cfg.skip_after_open_ms;
    kept.retain(|t| t.time_ms >= skip_end);
    stats.opening = before - kept.len();

    let before = kept.len();
    kept.retain(|t| t.price.is_some_and(|p| p > 0.0));
    stats.missing_price = before - kept.len();

    let window = 2 * cfg.outlier_half_window + 1;
    if kept.len() < window {
        warn!(
            "{day}: {} ticks left, fewer than {window}; outlier filter skipped",
            kept.len()
        );
        stats.outlier_filter_skipped = true;
    } else {
        let prices: Vec<f64> = kept.iter().map(|t| t.price.unwrap_or(0.0)).collect();
        let flags = outlier_flags(&prices, cfg.outlier_half_window, cfg.outlier_threshold);
        let before = kept.len();
        let mut it = flags.iter();
        kept.retain(|_| !*it.next().unwrap_or(&false));
        stats.outliers = before - kept.len();
    }

    if kept.len() < 2 {
        return Err(Error::DayUnusable(format!(
            "{day}: {} ticks remain after cleaning",
            kept.len()
        )));
    }
    Ok((TickDay::from_ticks(day, kept)?, stats))
}

/// Flags prices farther than `threshold` mean absolute deviations from the
/// median of up to `half` neighbours on each side (focal tick excluded).
pub fn outlier_flags(prices: &[f64], half: usize, threshold: f64) -> Vec<bool> {
    let n = prices.len();
    let mut buf = Vec::with_capacity(2 * half);
    (0..n)
        .map(|i| {
            buf.clear();
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            buf.extend_from_slice(&prices[lo..i]);
            buf.extend_from_slice(&prices[i + 1..=hi]);
            if buf.is_empty() {
                return false;
            }
            let med = median(&mut buf);
            let mad = buf.iter().map(|p| (p - med).abs()).sum::<f64>() / buf.len() as f64;
            (prices[i] - med).abs() > threshold * mad
        })
        .collect()
}

fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    v.sort_by(|a, b| a.total_cmp(b));
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Merges ticks sharing a millisecond into one tick with the
/// volume-weighted mean price (rounded to cents) and the summed volume.
pub fn aggregate_simultaneous(day: &TickDay) -> Result<TickDay> {
    let mut out: Vec<Tick> = Vec::with_capacity(day.ticks.len());
    let mut i = 0;
    let ticks = &day.ticks;
    while i < ticks.len() {
        let mut j = i + 1;
        while j < ticks.len() && ticks[j].time_ms == ticks[i].time_ms {
            j += 1;
        }
        if j - i == 1 {
            out.push(ticks[i].clone());
        } else {
            let group = &ticks[i..j];
            let volume: u64 = group.iter().map(|t| t.volume).sum();
            let cents: Vec<i64> = group.iter().map(|t| t.cents().unwrap_or(0)).collect();
            let mean = if volume > 0 {
                group
                    .iter()
                    .zip(&cents)
                    .map(|(t, &c)| t.volume as f64 * c as f64)
                    .sum::<f64>()
                    / volume as f64
            } else {
                warn!(
                    "{}: zero total volume at {} ms; unweighted mean used",
                    day.day, group[0].time_ms
                );
                cents.iter().sum::<i64>() as f64 / cents.len() as f64
            };
            out.push(Tick {
                day: day.day,
                time_ms: group[0].time_ms,
                price: Some(mean.round() / 100.0),
                volume,
            });
        }
        i = j;
    }
    TickDay::from_ticks(day.day, out)
}

/// Writes `time_ms,price,volume,duration_s,price_change_cents`; the first
/// row leaves the derived columns empty.
pub fn write_day_csv<W: Write>(w: W, day: &TickDay) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "time_ms",
        "price",
        "volume",
        "duration_s",
        "price_change_cents",
    ])?;
    for (i, t) in day.ticks.iter().enumerate() {
        let (d, y) = if i == 0 {
            (String::new(), String::new())
        } else {
            (
                format!("{:.3}", day.durations[i - 1]),
                day.price_changes[i - 1].to_string(),
            )
        };
        wtr.write_record([
            t.time_ms.to_string(),
            format!("{:.2}", t.price.unwrap_or(0.0)),
            t.volume.to_string(),
            d,
            y,
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<day writer>", e))?;
    Ok(())
}

/// Reads a cleaned day file written by [`write_day_csv`].
pub fn read_day_csv<R: Read>(r: R, day: NaiveDate) -> Result<TickDay> {
    #[derive(Deserialize)]
    struct Row {
        time_ms: u32,
        price: f64,
        volume: u64,
    }
    let mut rdr = csv::Reader::from_reader(r);
    let mut ticks = Vec::new();
    for row in rdr.deserialize() {
        let row: Row = row?;
        if row.time_ms >= MS_PER_DAY {
            return Err(Error::InvalidInput(format!(
                "time_ms {} out of range",
                row.time_ms
            )));
        }
        ticks.push(Tick::new(day, row.time_ms, row.price, row.volume));
    }
    if ticks.len() < 2 {
        return Err(Error::DayUnusable(format!("{day}: fewer than 2 ticks")));
    }
    TickDay::from_ticks(day, ticks)
}

pub fn read_day_path(path: &Path) -> Result<TickDay> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidInput(format!("bad day file name {}", path.display())))?;
    let day = NaiveDate::parse_from_str(stem, "%Y-%m-%d").map_err(|_| {
        Error::InvalidInput(format!(
            "day file name must be YYYY-MM-DD.csv: {}",
            path.display()
        ))
    })?;
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_day_csv(f, day)
}
