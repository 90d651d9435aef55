//! Renders results into table and plot-data files.
//!
//! Everything is rendered in memory as [`Artifact`]s and written by a single
//! call to [`write_artifacts`]. Human-readable tables round half-to-even
//! (percentages to 2 places, coefficients to 4); plot-data and fit files
//! carry full-precision values. The only time-dependent output is the
//! metadata sidecar, which the manifest does not list.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{Grade, RosterEntry};
use crate::error::{Error, Result};
use crate::event::{CohortSummary, FirstDayReturn, Performance, ReturnPaths};
use crate::garch::{CohortVerdict, GarchFit};

/// Manifest file name for a run of `command`.
pub fn manifest_name(command: &str) -> String {
    format!("manifest-{command}.json")
}

/// Metadata sidecar name for a run of `command`.
pub fn metadata_name(command: &str) -> String {
    format!("metadata-{command}.json")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, text: String) -> Self {
        Self {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }

    pub fn sha256(&self) -> String {
        digest(&self.bytes)
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Outcome of estimating one security.
#[derive(Debug, Clone, PartialEq)]
pub struct SecurityFit {
    pub symbol: String,
    pub grade: Grade,
    pub outcome: std::result::Result<GarchFit, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstDayRow {
    pub symbol: String,
    pub grade: Grade,
    pub offer_price: f64,
    pub first_close: f64,
    pub first_day: FirstDayReturn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub cohorts: Vec<CohortSummary>,
    pub fits: Vec<SecurityFit>,
    pub verdict: Option<CohortVerdict>,
    pub first_day: Vec<FirstDayRow>,
    pub significance_level: f64,
}

impl ReportBundle {
    /// Checks that each grade appears once and every fit names a roster
    /// security.
    pub fn validate(&self, roster: &[RosterEntry]) -> Result<()> {
        let mut grades = BTreeSet::new();
        for c in &self.cohorts {
            if !grades.insert(c.grade) {
                return Err(Error::Internal(format!(
                    "grade {} summarised twice",
                    c.grade
                )));
            }
        }
        let known: BTreeSet<&str> = roster.iter().map(|r| r.symbol.as_str()).collect();
        if let Some(f) = self
            .fits
            .iter()
            .find(|f| !known.contains(f.symbol.as_str()))
        {
            return Err(Error::Internal(format!(
                "fit for unknown symbol {}",
                f.symbol
            )));
        }
        Ok(())
    }

    pub fn cohort(&self, grade: Grade) -> Option<&CohortSummary> {
        self.cohorts.iter().find(|c| c.grade == grade)
    }
}

/// Fixed-point rendering with round-half-to-even on the shortest decimal
/// form of `value`. Non-finite values render as `na`.
pub fn round_half_even(value: f64, places: usize) -> String {
    if !value.is_finite() {
        return "na".into();
    }
    let text = value.abs().to_string();
    let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
    let mut digits: Vec<u8> = int_part
        .bytes()
        .chain(
            frac_part
                .bytes()
                .chain(std::iter::repeat(b'0'))
                .take(places),
        )
        .map(|b| b - b'0')
        .collect();
    let rest: Vec<u8> = frac_part.bytes().skip(places).map(|b| b - b'0').collect();
    let round_up = match rest.first() {
        None => false,
        Some(&d) if d > 5 => true,
        Some(&d) if d < 5 => false,
        Some(_) => rest[1..].iter().any(|d| *d != 0) || digits.last().is_some_and(|d| d % 2 == 1),
    };
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - places;
    let mut out = String::new();
    if value < 0.0 && digits.iter().any(|d| *d != 0) {
        out.push('-');
    }
    out.extend(digits[..split].iter().map(|d| char::from(b'0' + d)));
    if places > 0 {
        out.push('.');
        out.extend(digits[split..].iter().map(|d| char::from(b'0' + d)));
    }
    out
}

/// Fraction rendered as a percentage with two decimals.
pub fn percent(fraction: f64) -> String {
    round_half_even(fraction * 100.0, 2)
}

pub fn coefficient(value: f64) -> String {
    round_half_even(value, 4)
}

fn opt_percent(v: Option<f64>) -> String {
    v.map(percent).unwrap_or_else(|| "na".into())
}

fn full(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "na".into()
    }
}

fn opt_full(v: Option<f64>) -> String {
    v.map(full).unwrap_or_else(|| "na".into())
}

fn csv_text(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

fn path_table(bundle: &ReportBundle, pick: fn(&CohortSummary) -> &ReturnPaths) -> Result<String> {
    let mut rows = vec![[
        "grade",
        "securities",
        "negative_months",
        "months",
        "car_pct",
    ]
    .map(String::from)
    .to_vec()];
    for c in &bundle.cohorts {
        let p = pick(c);
        rows.push(vec![
            c.grade.to_string(),
            c.n.to_string(),
            p.negative_months.to_string(),
            p.ar.len().to_string(),
            opt_percent(p.car.last().copied()),
        ]);
    }
    csv_text(rows)
}

/// `table_raw.csv`, `table_adjusted.csv`, `table_hpr.csv`, `table_wr.csv`.
///
/// The wealth-relative table carries both the ratio and the ratio times
/// 100, since published tables label wealth relatives with a percent sign.
pub fn render_cohort_tables(bundle: &ReportBundle) -> Result<Vec<Artifact>> {
    let raw = path_table(bundle, |c| &c.raw)?;
    let adjusted = path_table(bundle, |c| &c.adjusted)?;

    let mut hpr = vec![[
        "grade",
        "complete",
        "high_pct",
        "low_pct",
        "mean_pct",
        "median_pct",
    ]
    .map(String::from)
    .to_vec()];
    for c in &bundle.cohorts {
        let h = c.hpr;
        hpr.push(vec![
            c.grade.to_string(),
            c.n_complete.to_string(),
            opt_percent(h.map(|h| h.high)),
            opt_percent(h.map(|h| h.low)),
            opt_percent(h.map(|h| h.mean)),
            opt_percent(h.map(|h| h.median)),
        ]);
    }

    let mut wr = vec![[
        "grade",
        "complete",
        "wealth_relative_pct",
        "wealth_relative_ratio",
        "performance",
    ]
    .map(String::from)
    .to_vec()];
    for c in &bundle.cohorts {
        let w = c.wealth_relative;
        wr.push(vec![
            c.grade.to_string(),
            c.n_complete.to_string(),
            opt_percent(w.map(|w| w.ratio)),
            w.map(|w| coefficient(w.ratio))
                .unwrap_or_else(|| "na".into()),
            match w.map(|w| w.performance) {
                Some(Performance::Outperform) => "outperform",
                Some(Performance::Underperform) => "underperform",
                Some(Performance::Par) => "par",
                None => "na",
            }
            .into(),
        ]);
    }

    Ok(vec![
        Artifact::new("table_raw.csv", raw),
        Artifact::new("table_adjusted.csv", adjusted),
        Artifact::new("table_hpr.csv", csv_text(hpr)?),
        Artifact::new("table_wr.csv", csv_text(wr)?),
    ])
}

/// `table_first_day.csv`: listing-day return against the offer price.
pub fn render_first_day_table(bundle: &ReportBundle) -> Result<Artifact> {
    let mut rows = vec![[
        "symbol",
        "grade",
        "offer_price",
        "first_close",
        "first_day_return_pct",
        "pricing",
    ]
    .map(String::from)
    .to_vec()];
    for r in &bundle.first_day {
        rows.push(vec![
            r.symbol.clone(),
            r.grade.to_string(),
            full(r.offer_price),
            full(r.first_close),
            percent(r.first_day.value),
            r.first_day.pricing.label().into(),
        ]);
    }
    Ok(Artifact::new("table_first_day.csv", csv_text(rows)?))
}

/// One `plot_grade_<g>.csv` per grade with full-precision CAR paths; grades
/// without securities get a header-only file.
pub fn render_plot_data(bundle: &ReportBundle) -> Result<Vec<Artifact>> {
    Grade::ALL
        .iter()
        .map(|g| {
            let mut rows = vec![["event_month", "car_raw", "car_adjusted"]
                .map(String::from)
                .to_vec()];
            if let Some(c) = bundle.cohort(*g) {
                for (t, (raw, adj)) in c.raw.car.iter().zip(&c.adjusted.car).enumerate() {
                    rows.push(vec![(t + 1).to_string(), full(*raw), full(*adj)]);
                }
            }
            Ok(Artifact::new(
                format!("plot_grade_{g}.csv"),
                csv_text(rows)?,
            ))
        })
        .collect()
}

fn level_label(level: f64) -> String {
    let s = round_half_even(level * 100.0, 4);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s}%")
}

/// `coef*(se)` with the star only when the coefficient is flagged.
pub fn coefficient_cell(value: f64, std_error: Option<f64>, significant: Option<bool>) -> String {
    let star = if significant == Some(true) { "*" } else { "" };
    let se = std_error.map(coefficient).unwrap_or_else(|| "na".into());
    format!("{}{star}({se})", coefficient(value))
}

fn fit_notes(fit: &GarchFit) -> Vec<&'static str> {
    let mut notes = Vec::new();
    if !fit.converged {
        notes.push("not converged");
    }
    if !fit.is_stationary() {
        notes.push("non-stationary");
    }
    if fit.floor_reached {
        notes.push("variance floor reached: inference withheld");
    }
    if fit.dummy_inert {
        notes.push("dummy inert: indeterminate or zero-effect");
    }
    notes
}

/// `table_garch.csv` (coefficient cells with stars and a footnote),
/// `garch_fits.csv` (full-precision numbers) and, when a verdict exists,
/// `garch_verdict.txt`.
pub fn render_garch_table(
    fits: &[SecurityFit],
    verdict: Option<&CohortVerdict>,
    level: f64,
) -> Result<Vec<Artifact>> {
    let mut human = vec![[
        "company",
        "c1",
        "index",
        "c3",
        "resid_sq_lag",
        "garch_lag",
        "dummy",
        "note",
    ]
    .map(String::from)
    .to_vec()];
    let mut machine_header: Vec<String> = vec!["symbol".into(), "grade".into()];
    for i in 1..=6 {
        machine_header.push(format!("c{i}"));
        machine_header.push(format!("se{i}"));
    }
    for h in ["loglik", "converged", "stationary", "dummy_verdict", "note"] {
        machine_header.push(h.into());
    }
    let mut machine = vec![machine_header];

    for f in fits {
        match &f.outcome {
            Ok(fit) => {
                let theta = fit.params.to_array();
                let mut row = vec![f.symbol.clone()];
                for i in 0..6 {
                    row.push(coefficient_cell(
                        theta[i],
                        fit.std_errors[i],
                        fit.significant[i],
                    ));
                }
                row.push(fit_notes(fit).join("; "));
                human.push(row);

                let mut row = vec![f.symbol.clone(), f.grade.to_string()];
                for i in 0..6 {
                    row.push(full(theta[i]));
                    row.push(opt_full(fit.std_errors[i]));
                }
                row.push(full(fit.log_likelihood));
                row.push(fit.converged.to_string());
                row.push(fit.is_stationary().to_string());
                row.push(fit.dividend_verdict().label().into());
                row.push(fit_notes(fit).join("; "));
                machine.push(row);
            }
            Err(msg) => {
                let mut row = vec![f.symbol.clone()];
                row.extend(std::iter::repeat_n("na".to_string(), 6));
                row.push(format!("not estimated: {msg}"));
                human.push(row);

                let mut row = vec![f.symbol.clone(), f.grade.to_string()];
                row.extend(std::iter::repeat_n("na".to_string(), 13));
                row.extend(["false".into(), "na".into(), "na".into()]);
                row.push(format!("not estimated: {msg}"));
                machine.push(row);
            }
        }
    }
    let mut table = csv_text(human)?;
    table.push_str(&format!(
        "*Indicates statistical significance at {} level\n",
        level_label(level)
    ));
    let mut out = vec![
        Artifact::new("table_garch.csv", table),
        Artifact::new("garch_fits.csv", csv_text(machine)?),
    ];
    if let Some(v) = verdict {
        out.push(Artifact::new(
            "garch_verdict.txt",
            format!("{}\n", verdict_line(v, level)),
        ));
    }
    Ok(out)
}

pub fn verdict_line(v: &CohortVerdict, level: f64) -> String {
    format!(
        "{} out of {} dummy coefficients significant at {} level: dividend has {} on stock price",
        v.significant,
        v.total,
        level_label(level),
        v.conclusion()
    )
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    name: &'a str,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    artifacts: Vec<ManifestEntry<'a>>,
}

/// Index of every artifact with its size and SHA-256, ordered by name.
pub fn render_manifest(name: &str, artifacts: &[Artifact]) -> Result<Artifact> {
    let mut entries: Vec<ManifestEntry> = artifacts
        .iter()
        .map(|a| ManifestEntry {
            name: &a.name,
            bytes: a.bytes.len(),
            sha256: a.sha256(),
        })
        .collect();
    entries.sort_by(|a, b| a.name.cmp(b.name));
    let mut text = serde_json::to_string_pretty(&Manifest { artifacts: entries })
        .map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    Ok(Artifact::new(name, text))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub generated_at: String,
    pub command: String,
    pub inputs: Vec<InputDigest>,
}

pub fn render_metadata(name: &str, meta: &Metadata) -> Result<Artifact> {
    let mut text =
        serde_json::to_string_pretty(meta).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    Ok(Artifact::new(name, text))
}

/// Writes artifacts into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(io(&path))?;
    }
    Ok(())
}
