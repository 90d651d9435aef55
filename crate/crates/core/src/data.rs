//! Loading and validation of the delimited input files, and alignment of
//! security price series against the benchmark trading calendar.
//!
//! Three file layouts are accepted, all UTF-8 with a comma delimiter and
//! ISO-8601 dates:
//!
//! | file            | header                                   |
//! |-----------------|------------------------------------------|
//! | prices          | `symbol,date,close`                      |
//! | roster          | `symbol,grade,listing_date[,offer_price]` |
//! | dividends       | `symbol,event_date,amount`               |
//!
//! Prices are taken as given. Whether the closes are dividend-adjusted is up
//! to the supplier, and adjusted and unadjusted inputs give different returns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const PRICES_HEADER: [&str; 3] = ["symbol", "date", "close"];
pub const ROSTER_HEADER: [&str; 3] = ["symbol", "grade", "listing_date"];
pub const DIVIDENDS_HEADER: [&str; 3] = ["symbol", "event_date", "amount"];

/// Share of benchmark days inside the event window a security may miss
/// before it is flagged.
pub const MAX_MISSING_SHARE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub date: NaiveDate,
    pub close: f64,
}

/// Dated closing prices for one security or index. Dates are strictly
/// increasing and every close is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    symbol: String,
    observations: Vec<Observation>,
}

impl PriceSeries {
    pub fn new(symbol: impl Into<String>, observations: Vec<Observation>) -> Result<Self> {
        let symbol = symbol.into();
        for pair in observations.windows(2) {
            if pair[1].date <= pair[0].date {
                return Err(Error::Invalid(format!(
                    "{symbol}: dates not strictly increasing at {}",
                    pair[1].date
                )));
            }
        }
        if let Some(bad) = observations
            .iter()
            .find(|o| !(o.close.is_finite() && o.close > 0.0))
        {
            return Err(Error::Invalid(format!(
                "{symbol}: non-positive close {} on {}",
                bad.close, bad.date
            )));
        }
        Ok(Self {
            symbol,
            observations,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.observations.iter().map(|o| o.date)
    }

    pub fn close_on(&self, date: NaiveDate) -> Option<f64> {
        self.observations
            .binary_search_by_key(&date, |o| o.date)
            .ok()
            .map(|i| self.observations[i].close)
    }

    /// Index of the first observation dated on or after `date`.
    pub fn first_index_on_or_after(&self, date: NaiveDate) -> Option<usize> {
        let i = self.observations.partition_point(|o| o.date < date);
        (i < self.observations.len()).then_some(i)
    }
}

/// Five-point IPO grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Grade(u8);

impl Grade {
    pub const ALL: [Grade; 5] = [Grade(1), Grade(2), Grade(3), Grade(4), Grade(5)];

    pub fn new(value: u8) -> Result<Self> {
        if (1..=5).contains(&value) {
            Ok(Grade(value))
        } else {
            Err(Error::Invalid(format!("grade {value} outside 1-5")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RosterEntry {
    pub symbol: String,
    pub grade: Grade,
    pub listing_date: NaiveDate,
    /// Issue price, when known. Only used for the first-day return.
    pub offer_price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DividendEvent {
    pub symbol: String,
    pub event_date: NaiveDate,
    pub amount: f64,
}

/// Counts roster entries per grade.
pub fn grade_counts(roster: &[RosterEntry]) -> BTreeMap<Grade, usize> {
    let mut counts = BTreeMap::new();
    for entry in roster {
        *counts.entry(entry.grade).or_insert(0) += 1;
    }
    counts
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads all records after checking the header. A zero-byte input is
/// accepted as an empty table.
fn read_table<R: Read>(
    reader: R,
    file: &str,
    required: &[&str],
    optional: &[&str],
) -> Result<(usize, Vec<(u64, csv::StringRecord)>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Ok((required.len(), Vec::new())),
        Some(r) => r.map_err(|e| Error::parse(file, 1, e.to_string()))?,
    };
    let names: Vec<&str> = header.iter().collect();
    let width = names.len();
    let expected_ok = width >= required.len()
        && width <= required.len() + optional.len()
        && names[..required.len()] == *required
        && names[required.len()..] == optional[..width - required.len()];
    if !expected_ok {
        let mut wanted = required.join(",");
        for o in optional {
            wanted.push_str(&format!("[,{o}]"));
        }
        return Err(Error::parse(
            file,
            1,
            format!("expected header `{wanted}`, found `{}`", names.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(file, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(Error::parse(
                file,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        rows.push((line, record));
    }
    Ok((width, rows))
}

fn parse_date(file: &str, line: u64, field: &str) -> Result<NaiveDate> {
    if field.len() != 10 {
        return Err(Error::parse(file, line, format!("bad date `{field}`")));
    }
    NaiveDate::parse_from_str(field, "%Y-%m-%d")
        .map_err(|_| Error::parse(file, line, format!("bad date `{field}`")))
}

fn parse_number(file: &str, line: u64, what: &str, field: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(file, line, format!("bad {what} `{field}`"))),
    }
}

fn parse_symbol(file: &str, line: u64, field: &str) -> Result<String> {
    if field.is_empty() {
        return Err(Error::parse(file, line, "empty symbol"));
    }
    Ok(field.to_string())
}

pub fn load_prices(path: &Path) -> Result<Vec<PriceSeries>> {
    read_prices(open(path)?, &file_label(path))
}

/// Parses a prices table. Returns one series per symbol, ordered by symbol,
/// each sorted by date.
pub fn read_prices<R: Read>(reader: R, file: &str) -> Result<Vec<PriceSeries>> {
    let (_, rows) = read_table(reader, file, &PRICES_HEADER, &[])?;
    let mut by_symbol: BTreeMap<String, BTreeMap<NaiveDate, (u64, f64)>> = BTreeMap::new();
    for (line, rec) in rows {
        let symbol = parse_symbol(file, line, &rec[0])?;
        let date = parse_date(file, line, &rec[1])?;
        let close = parse_number(file, line, "close", &rec[2])?;
        if close <= 0.0 {
            return Err(Error::parse(
                file,
                line,
                format!("non-positive close {close}"),
            ));
        }
        let series = by_symbol.entry(symbol.clone()).or_default();
        if let Some((first, _)) = series.insert(date, (line, close)) {
            return Err(Error::parse(
                file,
                line,
                format!("duplicate ({symbol},{date}), first seen on line {first}"),
            ));
        }
    }
    by_symbol
        .into_iter()
        .map(|(symbol, obs)| {
            let observations = obs
                .into_iter()
                .map(|(date, (_, close))| Observation { date, close })
                .collect();
            PriceSeries::new(symbol, observations)
        })
        .collect()
}

/// Writes series in the prices layout. Closes use the shortest decimal form
/// that round-trips, so reading the output back yields identical series.
pub fn write_prices<W: Write>(series: &[PriceSeries], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Internal(e.to_string());
    w.write_record(PRICES_HEADER).map_err(io)?;
    for s in series {
        for o in &s.observations {
            w.write_record([
                s.symbol.as_str(),
                &o.date.format("%Y-%m-%d").to_string(),
                &o.close.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))
}

pub fn load_roster(path: &Path) -> Result<Vec<RosterEntry>> {
    read_roster(open(path)?, &file_label(path))
}

pub fn read_roster<R: Read>(reader: R, file: &str) -> Result<Vec<RosterEntry>> {
    let (width, rows) = read_table(reader, file, &ROSTER_HEADER, &["offer_price"])?;
    let mut seen: BTreeMap<String, u64> = BTreeMap::new();
    let mut entries = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let symbol = parse_symbol(file, line, &rec[0])?;
        let grade = rec[1]
            .parse::<u8>()
            .ok()
            .and_then(|g| Grade::new(g).ok())
            .ok_or_else(|| {
                Error::parse(
                    file,
                    line,
                    format!("grade `{}` outside the five-point scale 1-5", &rec[1]),
                )
            })?;
        let listing_date = parse_date(file, line, &rec[2])?;
        let offer_price = if width > 3 && !rec[3].is_empty() {
            let p = parse_number(file, line, "offer_price", &rec[3])?;
            if p <= 0.0 {
                return Err(Error::parse(
                    file,
                    line,
                    format!("non-positive offer price {p}"),
                ));
            }
            Some(p)
        } else {
            None
        };
        if let Some(first) = seen.insert(symbol.clone(), line) {
            return Err(Error::parse(
                file,
                line,
                format!("duplicate roster symbol {symbol}, first seen on line {first}"),
            ));
        }
        entries.push(RosterEntry {
            symbol,
            grade,
            listing_date,
            offer_price,
        });
    }
    Ok(entries)
}

pub fn load_dividends(path: &Path) -> Result<Vec<DividendEvent>> {
    read_dividends(open(path)?, &file_label(path))
}

/// Parses a dividends table. Events come back sorted by (symbol, date).
pub fn read_dividends<R: Read>(reader: R, file: &str) -> Result<Vec<DividendEvent>> {
    let (_, rows) = read_table(reader, file, &DIVIDENDS_HEADER, &[])?;
    let mut events = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let symbol = parse_symbol(file, line, &rec[0])?;
        let event_date = parse_date(file, line, &rec[1])?;
        let amount = parse_number(file, line, "amount", &rec[2])?;
        if amount < 0.0 {
            return Err(Error::parse(
                file,
                line,
                format!("negative amount {amount}"),
            ));
        }
        events.push(DividendEvent {
            symbol,
            event_date,
            amount,
        });
    }
    events.sort_by(|a, b| (&a.symbol, a.event_date).cmp(&(&b.symbol, b.event_date)));
    Ok(events)
}

/// Raw material for [`align`].
#[derive(Debug, Clone, PartialEq)]
pub struct PanelInputs {
    pub benchmark: PriceSeries,
    pub securities: Vec<PriceSeries>,
    pub roster: Vec<RosterEntry>,
    pub dividends: Vec<DividendEvent>,
}

/// Securities restricted to benchmark trading days, with the roster and
/// dividend calendar they belong to. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPanel {
    pub benchmark: PriceSeries,
    pub securities: BTreeMap<String, PriceSeries>,
    pub roster: Vec<RosterEntry>,
    pub dividends: Vec<DividendEvent>,
    pub warnings: Vec<String>,
}

impl AlignedPanel {
    pub fn security(&self, symbol: &str) -> Option<&PriceSeries> {
        self.securities.get(symbol)
    }

    pub fn dividends_for<'a>(&'a self, symbol: &'a str) -> impl Iterator<Item = &'a DividendEvent> {
        self.dividends.iter().filter(move |d| d.symbol == symbol)
    }

    pub fn into_inputs(self) -> PanelInputs {
        PanelInputs {
            benchmark: self.benchmark,
            securities: self.securities.into_values().collect(),
            roster: self.roster,
            dividends: self.dividends,
        }
    }
}

/// Restricts every roster security to the benchmark calendar.
///
/// `window_days` is the number of trading days from the listing day through
/// the end of the event horizon; a security missing more than
/// [`MAX_MISSING_SHARE`] of the benchmark days in that span is flagged.
/// Price series with no roster entry are dropped with a warning.
pub fn align(inputs: PanelInputs, window_days: usize) -> Result<AlignedPanel> {
    let PanelInputs {
        benchmark,
        securities,
        roster,
        dividends,
    } = inputs;
    if benchmark.is_empty() {
        return Err(Error::Invalid("benchmark series is empty".into()));
    }
    let calendar: BTreeSet<NaiveDate> = benchmark.dates().collect();
    let mut warnings = Vec::new();

    let mut by_symbol: BTreeMap<String, PriceSeries> = BTreeMap::new();
    for s in securities {
        if by_symbol.contains_key(&s.symbol) {
            return Err(Error::Invalid(format!(
                "duplicate price series {}",
                s.symbol
            )));
        }
        by_symbol.insert(s.symbol.clone(), s);
    }

    let mut aligned = BTreeMap::new();
    for entry in &roster {
        let series = by_symbol.remove(&entry.symbol).ok_or_else(|| {
            Error::Invalid(format!(
                "roster symbol {} has no price series",
                entry.symbol
            ))
        })?;
        let total = series.len();
        let kept: Vec<Observation> = series
            .observations
            .into_iter()
            .filter(|o| calendar.contains(&o.date))
            .collect();
        if kept.is_empty() {
            return Err(Error::Insufficient(format!(
                "{}: no observations on benchmark trading days",
                entry.symbol
            )));
        }
        if kept.len() < total {
            warnings.push(format!(
                "{}: dropped {} observation(s) dated off the benchmark calendar",
                entry.symbol,
                total - kept.len()
            ));
        }
        let series = PriceSeries::new(entry.symbol.clone(), kept)?;

        let own: BTreeSet<NaiveDate> = series.dates().collect();
        let window: Vec<NaiveDate> = calendar
            .range(entry.listing_date..)
            .take(window_days)
            .copied()
            .collect();
        let missing = window.iter().filter(|d| !own.contains(d)).count();
        if !window.is_empty() && missing as f64 > MAX_MISSING_SHARE * window.len() as f64 {
            warnings.push(format!(
                "{}: missing {missing} of {} benchmark days in the event window",
                entry.symbol,
                window.len()
            ));
        }
        aligned.insert(entry.symbol.clone(), series);
    }
    for orphan in by_symbol.keys() {
        warnings.push(format!(
            "{orphan}: price series has no roster entry, ignored"
        ));
    }

    let roster_symbols: BTreeSet<&str> = roster.iter().map(|r| r.symbol.as_str()).collect();
    let (dividends, unknown): (Vec<_>, Vec<_>) = dividends
        .into_iter()
        .partition(|d| roster_symbols.contains(d.symbol.as_str()));
    for d in unknown {
        warnings.push(format!(
            "{}: dividend on {} has no roster entry, ignored",
            d.symbol, d.event_date
        ));
    }

    Ok(AlignedPanel {
        benchmark,
        securities: aligned,
        roster,
        dividends,
        warnings,
    })
}
