//! End-to-end runs over an aligned panel: the event study and the
//! per-security GARCH fits that feed the report.

use rayon::prelude::*;

use crate::data::{AlignedPanel, Grade};
use crate::error::{Error, Result};
use crate::event::{
    cohort_summary, first_day_return, monthly_returns, CohortMember, CohortSummary, EventClock,
};
use crate::garch::{estimate, garch_data_for, verdict_from, CohortVerdict, GarchSpec};
use crate::report::{FirstDayRow, SecurityFit};

#[derive(Debug, Clone, PartialEq)]
pub struct EventStudy {
    /// Roster order.
    pub members: Vec<CohortMember>,
    /// Ascending grade, populated grades only.
    pub cohorts: Vec<CohortSummary>,
    pub first_day: Vec<FirstDayRow>,
    pub warnings: Vec<String>,
}

/// Builds every security's event series and the per-grade summaries.
/// Securities too short for a single event month are left out with a
/// warning.
pub fn event_study(panel: &AlignedPanel, clock: &EventClock) -> Result<EventStudy> {
    let mut members = Vec::new();
    let mut first_day = Vec::new();
    let mut warnings = Vec::new();
    for entry in &panel.roster {
        let security = panel
            .security(&entry.symbol)
            .ok_or_else(|| Error::Internal(format!("{} missing after alignment", entry.symbol)))?;
        let (series, benchmark) = match monthly_returns(security, &panel.benchmark, entry, clock) {
            Ok(pair) => pair,
            Err(Error::Insufficient(msg)) => {
                warnings.push(format!("{msg}; excluded"));
                continue;
            }
            Err(e) => return Err(e),
        };
        if !series.complete {
            warnings.push(format!(
                "{}: {} of {} event months available; left out of holding-period statistics",
                entry.symbol,
                series.months(),
                clock.months
            ));
        }
        if let Some(offer) = entry.offer_price {
            first_day.push(FirstDayRow {
                symbol: entry.symbol.clone(),
                grade: entry.grade,
                offer_price: offer,
                first_close: series.listing_close,
                first_day: first_day_return(offer, series.listing_close)?,
            });
        }
        members.push(CohortMember { series, benchmark });
    }

    let mut cohorts = Vec::new();
    for g in Grade::ALL {
        let cohort: Vec<CohortMember> = members
            .iter()
            .filter(|m| m.series.grade == g)
            .cloned()
            .collect();
        if !cohort.is_empty() {
            cohorts.push(cohort_summary(g, &cohort, clock)?);
        }
    }
    if cohorts.is_empty() {
        return Err(Error::Insufficient(
            "no security has a complete event month".into(),
        ));
    }
    Ok(EventStudy {
        members,
        cohorts,
        first_day,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchStudy {
    /// Same order as the members passed in.
    pub fits: Vec<SecurityFit>,
    /// `None` when no security could be estimated.
    pub verdict: Option<CohortVerdict>,
    pub warnings: Vec<String>,
}

/// Fits every member in parallel. Securities that cannot be estimated
/// (too few months, degenerate data) are reported rather than fatal.
pub fn garch_study(
    panel: &AlignedPanel,
    members: &[CohortMember],
    spec: &GarchSpec,
) -> Result<GarchStudy> {
    spec.validate()?;
    let results: Vec<Result<(SecurityFit, Vec<String>)>> = members
        .par_iter()
        .map(|m| {
            let symbol = &m.series.symbol;
            let estimated = garch_data_for(m, panel.dividends_for(symbol))
                .and_then(|(data, w)| Ok((estimate(&data, spec)?, w)));
            let (outcome, warnings) = match estimated {
                Ok((fit, w)) => (Ok(fit), w),
                Err(e @ (Error::Insufficient(_) | Error::Degenerate(_) | Error::Infeasible(_))) => {
                    (
                        Err(e.to_string()),
                        vec![format!("{symbol}: not estimated: {e}")],
                    )
                }
                Err(e) => return Err(e),
            };
            Ok((
                SecurityFit {
                    symbol: symbol.clone(),
                    grade: m.series.grade,
                    outcome,
                },
                warnings,
            ))
        })
        .collect();

    let mut fits = Vec::with_capacity(results.len());
    let mut warnings = Vec::new();
    for r in results {
        let (fit, w) = r?;
        fits.push(fit);
        warnings.extend(w);
    }
    let verdicts: Vec<_> = fits
        .iter()
        .filter_map(|f| f.outcome.as_ref().ok().map(|fit| fit.dividend_verdict()))
        .collect();
    let verdict = if verdicts.is_empty() {
        None
    } else {
        Some(verdict_from(verdicts)?)
    };
    Ok(GarchStudy {
        fits,
        verdict,
        warnings,
    })
}
