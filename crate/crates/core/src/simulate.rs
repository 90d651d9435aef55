//! Synthetic data from a known GARCH(1,1)-with-dummy process, used to
//! validate the estimator and to build end-to-end fixture panels.
//!
//! Paths are generated from a ChaCha8 stream seeded with the configured
//! seed. Replication `r` of an experiment uses seed `seed + r`. Each path
//! discards [`BURN_IN`] presample steps so the first emitted variance is
//! near its stationary level.

use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::data::{self, DividendEvent, Grade, Observation, PriceSeries, RosterEntry};
use crate::error::{Error, Result};
use crate::event::EventClock;
use crate::garch::{self, DummySeries, GarchData, GarchFit, GarchParams, GarchSpec, COEFFICIENTS};
use crate::stats;

pub const BURN_IN: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum DummyPattern {
    Explicit(DummySeries),
    Bernoulli(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketProcess {
    pub mean: f64,
    pub volatility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub true_params: GarchParams,
    pub length: usize,
    pub dummy: DummyPattern,
    pub market: MarketProcess,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::Invalid(
                "simulated series needs at least 2 periods".into(),
            ));
        }
        if !(self.market.volatility > 0.0 && self.market.volatility.is_finite())
            || !self.market.mean.is_finite()
        {
            return Err(Error::Invalid("market volatility must be positive".into()));
        }
        match &self.dummy {
            DummyPattern::Bernoulli(p) if !(0.0..=1.0).contains(p) => Err(Error::Invalid(format!(
                "dummy probability {p} outside [0, 1]"
            ))),
            DummyPattern::Explicit(d) if d.len() != self.length => Err(Error::Invalid(format!(
                "explicit dummy has {} values for {} periods",
                d.len(),
                self.length
            ))),
            _ => Ok(()),
        }
    }

    /// Config for replication `r`.
    pub fn replication(&self, r: usize) -> SimConfig {
        SimConfig {
            seed: self.seed.wrapping_add(r as u64),
            ..self.clone()
        }
    }
}

/// A simulated path with its latent variances and innovations.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub dummy: DummySeries,
    pub variances: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl SimPath {
    pub fn to_data(&self) -> Result<GarchData> {
        GarchData::new(self.y.clone(), self.x.clone(), self.dummy.clone())
    }
}

enum Market<'a> {
    Process(MarketProcess),
    Given(&'a [f64]),
}

/// Stationary level used to start the presample, or the intercept alone
/// for non-stationary truths.
fn presample_variance(p: &GarchParams, dummy_rate: f64) -> Result<f64> {
    let persistence = p.c4 + p.c5;
    let level = if persistence < 1.0 {
        (p.c3 + p.c6 * dummy_rate) / (1.0 - persistence)
    } else {
        p.c3
    };
    if level > 0.0 && level.is_finite() {
        Ok(level)
    } else {
        Err(Error::Infeasible(format!(
            "true parameters give non-positive variance level {level}"
        )))
    }
}

fn generate(
    params: &GarchParams,
    length: usize,
    dummy: &DummyPattern,
    market: Market<'_>,
    seed: u64,
) -> Result<SimPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (bernoulli, rate) = match dummy {
        DummyPattern::Bernoulli(p) => (
            Some(Bernoulli::new(*p).map_err(|e| Error::Invalid(e.to_string()))?),
            *p,
        ),
        DummyPattern::Explicit(_) => (None, 0.0),
    };
    let market_dist = match market {
        Market::Process(m) => {
            Some(Normal::new(m.mean, m.volatility).map_err(|e| Error::Invalid(e.to_string()))?)
        }
        Market::Given(_) => None,
    };

    let mut h = presample_variance(params, rate)?;
    let mut e_prev = 0.0f64;
    let mut out = SimPath {
        y: Vec::with_capacity(length),
        x: Vec::with_capacity(length),
        dummy: DummySeries::zeros(0),
        variances: Vec::with_capacity(length),
        residuals: Vec::with_capacity(length),
    };
    let mut marks = Vec::with_capacity(length);
    for step in 0..BURN_IN + length {
        let emitted = step >= BURN_IN;
        let t = step.wrapping_sub(BURN_IN);
        let x = match (&market, &market_dist) {
            (_, Some(dist)) if emitted => dist.sample(&mut rng),
            (Market::Given(xs), _) if emitted => xs[t],
            _ => 0.0,
        };
        let d: u8 = match (dummy, &bernoulli) {
            (_, Some(b)) => u8::from(b.sample(&mut rng)),
            (DummyPattern::Explicit(ds), _) if emitted => ds.values()[t],
            _ => 0,
        };
        let z: f64 = rng.sample(StandardNormal);
        if step > 0 {
            h = params.c3 + params.c4 * e_prev * e_prev + params.c5 * h + params.c6 * f64::from(d);
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Infeasible(format!(
                "conditional variance {h} at simulation step {step}"
            )));
        }
        let e = z * h.sqrt();
        e_prev = e;
        if emitted {
            out.x.push(x);
            out.y.push(params.c1 + params.c2 * x + e);
            out.variances.push(h);
            out.residuals.push(e);
            marks.push(d);
        }
    }
    out.dummy = DummySeries::new(marks)?;
    Ok(out)
}

/// Draws one path. The same config, seed included, always yields the same
/// path bit for bit.
pub fn simulate_path(config: &SimConfig) -> Result<SimPath> {
    config.validate()?;
    generate(
        &config.true_params,
        config.length,
        &config.dummy,
        Market::Process(config.market),
        config.seed,
    )
}

/// Draws a path around a given market return series.
pub fn simulate_with_market(
    params: &GarchParams,
    market: &[f64],
    dummy: &DummySeries,
    seed: u64,
) -> Result<SimPath> {
    if dummy.len() != market.len() {
        return Err(Error::Invalid("dummy and market lengths differ".into()));
    }
    generate(
        params,
        market.len(),
        &DummyPattern::Explicit(dummy.clone()),
        Market::Given(market),
        seed,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRecovery {
    pub name: &'static str,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Share of fits whose `estimate +/- 1.96 se` interval holds the truth,
    /// among fits with a standard error.
    pub coverage: Option<f64>,
    pub mean_std_error: Option<f64>,
    pub sd_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub coefficients: Vec<CoefficientRecovery>,
    pub replications: usize,
    pub used: usize,
    /// Fits dropped for not converging or failing outright.
    pub excluded: usize,
    pub fits: Vec<Option<GarchFit>>,
}

impl RecoveryReport {
    pub fn coefficient(&self, name: &str) -> Option<&CoefficientRecovery> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Converged fits in replication order.
    pub fn used_fits(&self) -> impl Iterator<Item = &GarchFit> {
        self.fits.iter().flatten().filter(|f| f.converged)
    }
}

/// Simulates and re-estimates `replications` paths, then summarises how
/// well each coefficient is recovered.
pub fn recovery_experiment(
    config: &SimConfig,
    replications: usize,
    spec: &GarchSpec,
) -> Result<RecoveryReport> {
    if replications < 2 {
        return Err(Error::Invalid(
            "recovery experiment needs at least 2 replications".into(),
        ));
    }
    config.validate()?;
    spec.validate()?;
    let outcomes: Vec<Result<Option<GarchFit>>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let path = simulate_path(&config.replication(r))?;
            let data = path.to_data()?;
            Ok(garch::estimate(&data, spec).ok())
        })
        .collect();
    let fits = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(summarise(config, fits, replications))
}

fn summarise(
    config: &SimConfig,
    fits: Vec<Option<GarchFit>>,
    replications: usize,
) -> RecoveryReport {
    let z = garch::critical_value(0.05);
    let truth = config.true_params.to_array();
    let used: Vec<&GarchFit> = fits.iter().flatten().filter(|f| f.converged).collect();
    let coefficients = (0..6)
        .map(|i| {
            let est: Vec<f64> = used.iter().map(|f| f.params.to_array()[i]).collect();
            let n = est.len().max(1) as f64;
            let mean_estimate = stats::sum(est.iter().copied()) / n;
            let mse = stats::sum(est.iter().map(|v| (v - truth[i]).powi(2))) / n;
            let ses: Vec<(f64, f64)> = used
                .iter()
                .filter_map(|f| f.std_errors[i].map(|se| (f.params.to_array()[i], se)))
                .collect();
            let coverage = (!ses.is_empty()).then(|| {
                ses.iter()
                    .filter(|(v, se)| (v - truth[i]).abs() <= z * se)
                    .count() as f64
                    / ses.len() as f64
            });
            let mean_std_error = (!ses.is_empty())
                .then(|| stats::sum(ses.iter().map(|(_, se)| *se)) / ses.len() as f64);
            CoefficientRecovery {
                name: COEFFICIENTS[i],
                truth: truth[i],
                mean_estimate,
                bias: mean_estimate - truth[i],
                rmse: mse.sqrt(),
                coverage,
                mean_std_error,
                sd_estimate: stats::sample_variance(&est).sqrt(),
            }
        })
        .collect();
    RecoveryReport {
        coefficients,
        replications,
        used: used.len(),
        excluded: replications - used.len(),
        fits,
    }
}

/// One security in a synthetic panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSecurity {
    pub symbol: String,
    pub grade: Grade,
    /// Benchmark trading-day index of the listing day.
    pub listing_offset: usize,
    /// Event months simulated; fewer than the clock's horizon makes a
    /// partial series.
    pub months: usize,
    pub params: GarchParams,
    /// Chance that a given event month carries a dividend.
    pub dividend_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelConfig {
    pub securities: Vec<PanelSecurity>,
    pub start: NaiveDate,
    pub benchmark_symbol: String,
    /// Daily log-return process of the benchmark index.
    pub benchmark_daily: MarketProcess,
    pub clock: EventClock,
    pub seed: u64,
}

impl PanelConfig {
    /// `n` securities with grades cycling 1..5; the first `planted` carry a
    /// dividend effect in the variance equation.
    pub fn standard(n: usize, planted: usize, clock: EventClock, seed: u64) -> Self {
        let securities = (0..n)
            .map(|i| {
                let grade = Grade::new((i % 5) as u8 + 1).expect("cycled grade");
                let tilt = f64::from(grade.get()) - 3.0;
                PanelSecurity {
                    symbol: format!("SYN{:02}", i + 1),
                    grade,
                    listing_offset: 5 + 17 * i,
                    months: clock.months,
                    params: GarchParams {
                        c1: 0.004 * tilt,
                        c2: 0.8 + 0.1 * tilt,
                        c3: 0.002,
                        c4: 0.05,
                        c5: 0.3,
                        c6: if i < planted { 0.05 } else { 0.0 },
                    },
                    dividend_probability: 0.4,
                }
            })
            .collect();
        Self {
            securities,
            start: NaiveDate::from_ymd_opt(2011, 1, 3).expect("valid date"),
            benchmark_symbol: "BENCH".into(),
            benchmark_daily: MarketProcess {
                mean: 0.0003,
                volatility: 0.01,
            },
            clock,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel {
    pub benchmark: PriceSeries,
    pub securities: Vec<PriceSeries>,
    pub roster: Vec<RosterEntry>,
    pub dividends: Vec<DividendEvent>,
}

fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

fn round_to(v: f64, places: i32) -> f64 {
    let k = 10f64.powi(places);
    (v * k).round() / k
}

/// Builds a daily-price panel whose event-month returns follow each
/// security's GARCH process against the benchmark's monthly returns.
///
/// Each security closes at 100 on its listing day. Within an event month
/// the price moves geometrically so that the month's end-to-end return is
/// the simulated one. Offer prices are drawn around the listing close to
/// give both under- and overpriced issues.
pub fn synthesize_panel(config: &PanelConfig) -> Result<SyntheticPanel> {
    let clock = config.clock;
    let horizon = config
        .securities
        .iter()
        .map(|s| s.listing_offset + s.months * clock.month_days + 1)
        .max()
        .unwrap_or(1);
    let calendar = business_days(config.start, horizon);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let daily = Normal::new(
        config.benchmark_daily.mean,
        config.benchmark_daily.volatility,
    )
    .map_err(|e| Error::Invalid(e.to_string()))?;
    let mut level = 5000.0f64;
    let mut bench_closes = Vec::with_capacity(horizon);
    for k in 0..horizon {
        if k > 0 {
            level *= daily.sample(&mut rng).exp();
        }
        bench_closes.push(round_to(level, 2));
    }
    let benchmark = PriceSeries::new(
        config.benchmark_symbol.clone(),
        calendar
            .iter()
            .zip(&bench_closes)
            .map(|(d, c)| Observation {
                date: *d,
                close: *c,
            })
            .collect(),
    )?;

    let mut securities = Vec::new();
    let mut roster = Vec::new();
    let mut dividends = Vec::new();
    for (i, sec) in config.securities.iter().enumerate() {
        if sec.months == 0 {
            return Err(Error::Invalid(format!(
                "{}: needs at least one month",
                sec.symbol
            )));
        }
        let mut srng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1 + i as u64));
        let base = sec.listing_offset;
        let market: Vec<f64> = (1..=sec.months)
            .map(|t| {
                let (first, last) = clock.window(t);
                bench_closes[base + last - 1] / bench_closes[base + first - 2] - 1.0
            })
            .collect();
        let marks: Vec<u8> = (0..sec.months)
            .map(|_| u8::from(srng.random_bool(sec.dividend_probability)))
            .collect();
        let dummy = DummySeries::new(marks)?;
        let path = simulate_with_market(&sec.params, &market, &dummy, srng.random())?;

        let mut closes = vec![100.0f64];
        let mut price = 100.0f64;
        for (t, y) in path.y.iter().enumerate() {
            let gross = 1.0 + y;
            if !(gross > 0.0) {
                return Err(Error::Infeasible(format!(
                    "{}: simulated month {} return {y} wipes out the price",
                    sec.symbol,
                    t + 1
                )));
            }
            for k in 1..=clock.month_days {
                closes.push(round_to(
                    price * gross.powf(k as f64 / clock.month_days as f64),
                    4,
                ));
            }
            price *= gross;
        }
        let obs = closes
            .iter()
            .enumerate()
            .map(|(k, c)| Observation {
                date: calendar[base + k],
                close: *c,
            })
            .collect();
        securities.push(PriceSeries::new(sec.symbol.clone(), obs)?);

        for (t, mark) in dummy.values().iter().enumerate() {
            if *mark == 1 {
                let (first, last) = clock.window(t + 1);
                let day = srng.random_range(first..=last);
                dividends.push(DividendEvent {
                    symbol: sec.symbol.clone(),
                    event_date: calendar[base + day - 1],
                    amount: round_to(srng.random_range(0.5..5.0), 2),
                });
            }
        }
        let premium: f64 = srng.sample::<f64, _>(StandardNormal) * 0.25 + 0.08;
        roster.push(RosterEntry {
            symbol: sec.symbol.clone(),
            grade: sec.grade,
            listing_date: calendar[base],
            offer_price: Some(round_to(100.0 / (1.0 + premium.max(-0.8)), 2)),
        });
    }
    Ok(SyntheticPanel {
        benchmark,
        securities,
        roster,
        dividends,
    })
}

impl SyntheticPanel {
    /// Writes `prices.csv`, `benchmark.csv`, `roster.csv` and
    /// `dividends.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut buf = Vec::new();
        data::write_prices(&self.securities, &mut buf)?;
        fs::write(dir.join("prices.csv"), &buf).map_err(io(&dir.join("prices.csv")))?;
        buf.clear();
        data::write_prices(std::slice::from_ref(&self.benchmark), &mut buf)?;
        fs::write(dir.join("benchmark.csv"), &buf).map_err(io(&dir.join("benchmark.csv")))?;

        let mut roster = String::from("symbol,grade,listing_date,offer_price\n");
        for r in &self.roster {
            let offer = r.offer_price.map(|p| p.to_string()).unwrap_or_default();
            roster.push_str(&format!(
                "{},{},{},{offer}\n",
                r.symbol, r.grade, r.listing_date
            ));
        }
        fs::write(dir.join("roster.csv"), roster).map_err(io(&dir.join("roster.csv")))?;

        let mut divs = String::from("symbol,event_date,amount\n");
        for d in &self.dividends {
            divs.push_str(&format!("{},{},{}\n", d.symbol, d.event_date, d.amount));
        }
        fs::write(dir.join("dividends.csv"), divs).map_err(io(&dir.join("dividends.csv")))?;
        Ok(())
    }
}
