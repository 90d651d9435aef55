//! Event-time returns and the long-run performance statistics built on them.
//!
//! Each security has its own clock. The listing day is event day 1 and forms
//! the initial period; aftermarket month `t` covers event days
//! `L(t-1)+2 ..= Lt+1` for a month length of `L` trading days (21 by default).
//! A month's return runs from the close before the window opens to the close
//! on its last day, so consecutive months chain and compounding the monthly
//! returns reproduces the holding-period price ratio.
//!
//! Event days count the security's own trading days. After alignment these
//! are a subset of the benchmark calendar, and the benchmark return for a
//! month is taken over exactly the same dates.

use chrono::NaiveDate;

use crate::data::{Grade, PriceSeries, RosterEntry};
use crate::error::{Error, Result};
use crate::stats;

pub const DEFAULT_MONTHS: usize = 36;
pub const DEFAULT_MONTH_DAYS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventClock {
    pub months: usize,
    pub month_days: usize,
}

impl Default for EventClock {
    fn default() -> Self {
        Self {
            months: DEFAULT_MONTHS,
            month_days: DEFAULT_MONTH_DAYS,
        }
    }
}

impl EventClock {
    pub fn new(months: usize, month_days: usize) -> Result<Self> {
        if months == 0 || month_days == 0 {
            return Err(Error::Invalid(format!(
                "event clock needs months >= 1 and month length >= 1 (got {months}, {month_days})"
            )));
        }
        Ok(Self { months, month_days })
    }

    /// First and last event day of month `t` (1-based).
    pub fn window(&self, t: usize) -> (usize, usize) {
        (self.month_days * (t - 1) + 2, self.month_days * t + 1)
    }

    /// Trading days from the listing day through the end of the horizon.
    pub fn horizon_days(&self) -> usize {
        self.months * self.month_days + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventDay {
    Initial,
    Month(usize),
}

/// Maps a trading-day index counted from the listing day (day 1) to its
/// event month.
pub fn event_month_of(day_index: usize, month_days: usize) -> Result<EventDay> {
    if day_index < 1 {
        return Err(Error::Invalid("event day index starts at 1".into()));
    }
    if month_days < 1 {
        return Err(Error::Invalid("month length must be at least 1".into()));
    }
    if day_index == 1 {
        Ok(EventDay::Initial)
    } else {
        Ok(EventDay::Month((day_index - 1).div_ceil(month_days)))
    }
}

/// One security's aftermarket returns in event time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    pub symbol: String,
    pub grade: Grade,
    /// Date of event day 1.
    pub listing_day: NaiveDate,
    /// Close on event day 1, the base of the month-1 return.
    pub listing_close: f64,
    /// `monthly_returns[t - 1]` is the return of event month `t`.
    pub monthly_returns: Vec<f64>,
    /// Last trading date of each populated month.
    pub window_ends: Vec<NaiveDate>,
    /// Close on the last day of each populated month.
    pub window_closes: Vec<f64>,
    pub complete: bool,
}

impl EventSeries {
    pub fn months(&self) -> usize {
        self.monthly_returns.len()
    }

    /// Event month whose calendar span contains `date`: month `t` owns the
    /// dates after the end of month `t - 1` (or after the listing day) up to
    /// and including its own last trading day.
    pub fn month_containing(&self, date: NaiveDate) -> Option<usize> {
        if date <= self.listing_day {
            return None;
        }
        let i = self.window_ends.partition_point(|end| *end < date);
        (i < self.window_ends.len()).then_some(i + 1)
    }
}

/// Benchmark returns over the same windows as a security's event months.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkEventSeries {
    pub symbol: String,
    pub monthly_returns: Vec<f64>,
}

/// Re-indexes a security and the benchmark onto the security's event clock.
///
/// Trailing months without a full window are omitted; `complete` is set
/// when all `clock.months` months are present.
pub fn monthly_returns(
    security: &PriceSeries,
    benchmark: &PriceSeries,
    entry: &RosterEntry,
    clock: &EventClock,
) -> Result<(EventSeries, BenchmarkEventSeries)> {
    let obs = security.observations();
    let start = security
        .first_index_on_or_after(entry.listing_date)
        .ok_or_else(|| {
            Error::Insufficient(format!("{}: no prices on or after listing", entry.symbol))
        })?;
    let close_at = |day: usize| &obs[start + day - 1];
    let available = obs.len() - start;

    let bench_close = |date: NaiveDate| {
        benchmark.close_on(date).ok_or_else(|| {
            Error::Invalid(format!(
                "{}: {date} missing from benchmark; align the panel first",
                entry.symbol
            ))
        })
    };

    let mut returns = Vec::new();
    let mut bench_returns = Vec::new();
    let mut window_ends = Vec::new();
    let mut window_closes = Vec::new();
    for t in 1..=clock.months {
        let (first, last) = clock.window(t);
        if last > available {
            break;
        }
        let base = close_at(first - 1);
        let end = close_at(last);
        returns.push(end.close / base.close - 1.0);
        bench_returns.push(bench_close(end.date)? / bench_close(base.date)? - 1.0);
        window_ends.push(end.date);
        window_closes.push(end.close);
    }
    if returns.is_empty() {
        return Err(Error::Insufficient(format!(
            "{}: fewer than {} trading days after listing, no complete event month",
            entry.symbol,
            clock.month_days + 1
        )));
    }
    let listing = close_at(1);
    let complete = returns.len() == clock.months;
    Ok((
        EventSeries {
            symbol: entry.symbol.clone(),
            grade: entry.grade,
            listing_day: listing.date,
            listing_close: listing.close,
            monthly_returns: returns,
            window_ends,
            window_closes,
            complete,
        },
        BenchmarkEventSeries {
            symbol: entry.symbol.clone(),
            monthly_returns: bench_returns,
        },
    ))
}

/// Benchmark-adjusted return `r_it - r_mt`.
pub fn adjusted_return(security_return: f64, benchmark_return: f64) -> f64 {
    security_return - benchmark_return
}

/// Equally weighted cross-sectional mean of the adjusted returns populated
/// in one event month.
pub fn average_adjusted_return(adjusted: &[f64]) -> Result<f64> {
    stats::mean(adjusted)
        .ok_or_else(|| Error::Insufficient("no security populated in month".into()))
}

/// Running sum of an average-return path.
pub fn cumulative_returns(ar_path: &[f64]) -> Vec<f64> {
    ar_path
        .iter()
        .scan(0.0, |acc, ar| {
            *acc += ar;
            Some(*acc)
        })
        .collect()
}

/// Compounded return over the full horizon, `prod(1 + r_t) - 1`.
pub fn buy_and_hold_return(series: &EventSeries) -> Result<f64> {
    if !series.complete {
        return Err(Error::Insufficient(format!(
            "{}: partial window ({} months), excluded from holding-period statistics",
            series.symbol,
            series.months()
        )));
    }
    Ok(compound(&series.monthly_returns))
}

pub fn compound(returns: &[f64]) -> f64 {
    returns.iter().fold(1.0, |acc, r| acc * (1.0 + r)) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Performance {
    Outperform,
    Underperform,
    Par,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WealthRelative {
    pub ratio: f64,
    pub ipo_mean_bhr: f64,
    pub benchmark_mean_bhr: f64,
    pub performance: Performance,
}

pub fn wealth_relative(avg_ipo_bhr: f64, avg_benchmark_bhr: f64) -> Result<WealthRelative> {
    let denom = 1.0 + avg_benchmark_bhr;
    if !(denom > 0.0) {
        return Err(Error::Degenerate(format!(
            "benchmark holding-period return {avg_benchmark_bhr} leaves no wealth"
        )));
    }
    let ratio = (1.0 + avg_ipo_bhr) / denom;
    let performance = if ratio > 1.0 {
        Performance::Outperform
    } else if ratio < 1.0 {
        Performance::Underperform
    } else {
        Performance::Par
    };
    Ok(WealthRelative {
        ratio,
        ipo_mean_bhr: avg_ipo_bhr,
        benchmark_mean_bhr: avg_benchmark_bhr,
        performance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pricing {
    Underpriced,
    Overpriced,
    Flat,
}

impl Pricing {
    pub fn label(self) -> &'static str {
        match self {
            Pricing::Underpriced => "underpriced",
            Pricing::Overpriced => "overpriced",
            Pricing::Flat => "flat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstDayReturn {
    pub value: f64,
    pub pricing: Pricing,
}

/// Listing-day return against the offer price.
pub fn first_day_return(offer_price: f64, first_close: f64) -> Result<FirstDayReturn> {
    if !(offer_price > 0.0 && first_close > 0.0) {
        return Err(Error::Invalid(format!(
            "first-day return needs positive prices (offer {offer_price}, close {first_close})"
        )));
    }
    let value = first_close / offer_price - 1.0;
    let pricing = if value > 0.0 {
        Pricing::Underpriced
    } else if value < 0.0 {
        Pricing::Overpriced
    } else {
        Pricing::Flat
    };
    Ok(FirstDayReturn { value, pricing })
}

/// Average-return path for one return variant of a cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPaths {
    pub ar: Vec<f64>,
    pub car: Vec<f64>,
    /// Securities averaged in each month.
    pub populated: Vec<usize>,
    pub negative_months: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldingPeriodStats {
    pub n: usize,
    pub high: f64,
    pub low: f64,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSummary {
    pub grade: Grade,
    pub n: usize,
    /// Securities with a full horizon, the ones entering HPR and WR.
    pub n_complete: usize,
    pub raw: ReturnPaths,
    pub adjusted: ReturnPaths,
    pub hpr: Option<HoldingPeriodStats>,
    pub wealth_relative: Option<WealthRelative>,
}

/// A security's event series paired with its benchmark returns.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortMember {
    pub series: EventSeries,
    pub benchmark: BenchmarkEventSeries,
}

/// Averages a per-security return matrix month by month over the members
/// still populated. The path stops at the first month nobody reaches.
fn average_path(per_security: &[Vec<f64>], months: usize) -> Result<ReturnPaths> {
    let mut ar = Vec::new();
    let mut populated = Vec::new();
    for t in 0..months {
        let column: Vec<f64> = per_security
            .iter()
            .filter_map(|r| r.get(t).copied())
            .collect();
        if column.is_empty() {
            break;
        }
        populated.push(column.len());
        ar.push(average_adjusted_return(&column)?);
    }
    let car = cumulative_returns(&ar);
    let negative_months = ar.iter().filter(|v| **v < 0.0).count();
    Ok(ReturnPaths {
        ar,
        car,
        populated,
        negative_months,
    })
}

/// Long-run statistics for one grade cohort.
pub fn cohort_summary(
    grade: Grade,
    members: &[CohortMember],
    clock: &EventClock,
) -> Result<CohortSummary> {
    if members.is_empty() {
        return Err(Error::Insufficient(format!(
            "grade {grade} cohort is empty"
        )));
    }
    let raw: Vec<Vec<f64>> = members
        .iter()
        .map(|m| m.series.monthly_returns.clone())
        .collect();
    let adjusted: Vec<Vec<f64>> = members
        .iter()
        .map(|m| {
            m.series
                .monthly_returns
                .iter()
                .zip(&m.benchmark.monthly_returns)
                .map(|(r, b)| adjusted_return(*r, *b))
                .collect()
        })
        .collect();

    let mut ipo_bhr = Vec::new();
    let mut bench_bhr = Vec::new();
    for m in members.iter().filter(|m| m.series.complete) {
        ipo_bhr.push(buy_and_hold_return(&m.series)?);
        bench_bhr.push(compound(&m.benchmark.monthly_returns));
    }
    let hpr = stats::mean(&ipo_bhr).map(|mean| HoldingPeriodStats {
        n: ipo_bhr.len(),
        high: ipo_bhr.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        low: ipo_bhr.iter().copied().fold(f64::INFINITY, f64::min),
        mean,
        median: stats::median(&ipo_bhr).unwrap_or(mean),
    });
    let wealth_relative = match (stats::mean(&ipo_bhr), stats::mean(&bench_bhr)) {
        (Some(ipo), Some(bench)) => Some(wealth_relative(ipo, bench)?),
        _ => None,
    };

    Ok(CohortSummary {
        grade,
        n: members.len(),
        n_complete: ipo_bhr.len(),
        raw: average_path(&raw, clock.months)?,
        adjusted: average_path(&adjusted, clock.months)?,
        hpr,
        wealth_relative,
    })
}
