//! Random small panels and a brute-force event-study recomputation that
//! works straight from closing prices.

#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use ipoperf::data::{Grade, Observation, PriceSeries, RosterEntry};
use ipoperf::event::{cohort_summary, monthly_returns, CohortMember, CohortSummary, EventClock};
use rand::Rng;

pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.checked_add_days(Days::new(1)).unwrap();
    }
    out
}

pub struct RandomPanel {
    pub clock: EventClock,
    pub benchmark: PriceSeries,
    pub securities: Vec<PriceSeries>,
    pub roster: Vec<RosterEntry>,
}

fn random_walk<R: Rng>(rng: &mut R, dates: &[NaiveDate], start: f64) -> Vec<Observation> {
    let mut p = start;
    dates
        .iter()
        .map(|d| {
            p *= 1.0 + rng.random_range(-0.05..0.05);
            Observation { date: *d, close: p }
        })
        .collect()
}

/// A handful of securities with random listing offsets, lengths (some cut
/// short) and grades on a shared business-day calendar.
pub fn random_panel<R: Rng>(rng: &mut R) -> RandomPanel {
    let clock = EventClock::new(rng.random_range(1..=12), rng.random_range(1..=8)).unwrap();
    let horizon = clock.horizon_days();
    let n = rng.random_range(1..=8);
    let span = horizon + 40;
    let calendar = business_days(NaiveDate::from_ymd_opt(2011, 1, 3).unwrap(), span);
    let benchmark = PriceSeries::new("IDX", random_walk(rng, &calendar, 1000.0)).unwrap();
    let mut securities = Vec::new();
    let mut roster = Vec::new();
    for i in 0..n {
        let listing = rng.random_range(0..40);
        let len = if rng.random_bool(0.3) {
            rng.random_range(clock.month_days + 1..=horizon)
        } else {
            horizon
        };
        let dates = &calendar[listing..(listing + len).min(span)];
        let symbol = format!("S{i}");
        let start = rng.random_range(10.0..200.0);
        securities.push(PriceSeries::new(symbol.clone(), random_walk(rng, dates, start)).unwrap());
        roster.push(RosterEntry {
            symbol,
            grade: Grade::ALL[rng.random_range(0..5)],
            listing_date: calendar[listing],
            offer_price: None,
        });
    }
    RandomPanel {
        clock,
        benchmark,
        securities,
        roster,
    }
}

/// Library summaries for every populated grade.
pub fn library_summaries(p: &RandomPanel) -> BTreeMap<Grade, CohortSummary> {
    let mut by_grade: BTreeMap<Grade, Vec<CohortMember>> = BTreeMap::new();
    for (s, entry) in p.securities.iter().zip(&p.roster) {
        let (series, benchmark) = monthly_returns(s, &p.benchmark, entry, &p.clock).unwrap();
        by_grade
            .entry(entry.grade)
            .or_default()
            .push(CohortMember { series, benchmark });
    }
    by_grade
        .into_iter()
        .map(|(g, m)| (g, cohort_summary(g, &m, &p.clock).unwrap()))
        .collect()
}

#[derive(Debug, Default)]
pub struct BruteCohort {
    pub ar_raw: Vec<f64>,
    pub car_raw: Vec<f64>,
    pub ar_adj: Vec<f64>,
    pub car_adj: Vec<f64>,
    pub bhr: Vec<f64>,
    pub bench_bhr: Vec<f64>,
    pub wr: Option<f64>,
}

/// Recomputes everything with explicit loops over closes. Month `t` runs
/// from the close of event day `md*(t-1)+1` to that of day `md*t+1`.
pub fn brute_force(p: &RandomPanel) -> BTreeMap<Grade, BruteCohort> {
    let md = p.clock.month_days;
    let months = p.clock.months;
    let bench_close = |d: NaiveDate| {
        p.benchmark
            .observations()
            .iter()
            .find(|o| o.date == d)
            .unwrap()
            .close
    };
    let mut per_grade: BTreeMap<Grade, Vec<(Vec<f64>, Vec<f64>)>> = BTreeMap::new();
    for (s, entry) in p.securities.iter().zip(&p.roster) {
        let days: Vec<&Observation> = s
            .observations()
            .iter()
            .filter(|o| o.date >= entry.listing_date)
            .collect();
        let mut r = Vec::new();
        let mut b = Vec::new();
        let mut t = 1;
        while t <= months && md * t < days.len() {
            let start = days[md * (t - 1)];
            let end = days[md * t];
            r.push(end.close / start.close - 1.0);
            b.push(bench_close(end.date) / bench_close(start.date) - 1.0);
            t += 1;
        }
        per_grade.entry(entry.grade).or_default().push((r, b));
    }

    let mut out = BTreeMap::new();
    for (g, members) in per_grade {
        let mut c = BruteCohort::default();
        let mut car_r = 0.0;
        let mut car_a = 0.0;
        for t in 0..months {
            let mut sum_r = 0.0;
            let mut sum_a = 0.0;
            let mut k = 0usize;
            for (r, b) in &members {
                if t < r.len() {
                    sum_r += r[t];
                    sum_a += r[t] - b[t];
                    k += 1;
                }
            }
            if k == 0 {
                break;
            }
            c.ar_raw.push(sum_r / k as f64);
            c.ar_adj.push(sum_a / k as f64);
            car_r += sum_r / k as f64;
            car_a += sum_a / k as f64;
            c.car_raw.push(car_r);
            c.car_adj.push(car_a);
        }
        for (r, b) in &members {
            if r.len() == months {
                let mut w = 1.0;
                let mut wb = 1.0;
                for t in 0..months {
                    w *= 1.0 + r[t];
                    wb *= 1.0 + b[t];
                }
                c.bhr.push(w - 1.0);
                c.bench_bhr.push(wb - 1.0);
            }
        }
        if !c.bhr.is_empty() {
            let n = c.bhr.len() as f64;
            let mi: f64 = c.bhr.iter().sum::<f64>() / n;
            let mb: f64 = c.bench_bhr.iter().sum::<f64>() / n;
            c.wr = Some((1.0 + mi) / (1.0 + mb));
        }
        out.insert(g, c);
    }
    out
}

/// Relative closeness with an absolute fallback near zero.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn all_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y, tol))
}

/// Compares library output against the brute force; returns a description
/// of the first mismatch.
pub fn compare(p: &RandomPanel, tol: f64) -> Result<(), String> {
    let lib = library_summaries(p);
    let brute = brute_force(p);
    if lib.keys().ne(brute.keys()) {
        return Err("different populated grades".into());
    }
    for (g, s) in &lib {
        let b = &brute[g];
        let checks = [
            ("AR raw", all_close(&s.raw.ar, &b.ar_raw, tol)),
            ("CAR raw", all_close(&s.raw.car, &b.car_raw, tol)),
            ("AR adjusted", all_close(&s.adjusted.ar, &b.ar_adj, tol)),
            ("CAR adjusted", all_close(&s.adjusted.car, &b.car_adj, tol)),
        ];
        if let Some((name, _)) = checks.iter().find(|(_, ok)| !ok) {
            return Err(format!("grade {g}: {name} differs"));
        }
        match (&s.hpr, b.bhr.is_empty()) {
            (None, true) => {}
            (Some(h), false) => {
                let mean = b.bhr.iter().sum::<f64>() / b.bhr.len() as f64;
                let high = b.bhr.iter().copied().fold(f64::MIN, f64::max);
                let low = b.bhr.iter().copied().fold(f64::MAX, f64::min);
                if !(close(h.mean, mean, tol) && close(h.high, high, tol) && close(h.low, low, tol))
                {
                    return Err(format!("grade {g}: BHR statistics differ"));
                }
            }
            _ => return Err(format!("grade {g}: BHR availability differs")),
        }
        match (s.wealth_relative.map(|w| w.ratio), b.wr) {
            (None, None) => {}
            (Some(x), Some(y)) if close(x, y, tol) => {}
            _ => return Err(format!("grade {g}: WR differs")),
        }
    }
    Ok(())
}
