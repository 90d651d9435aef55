use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use ipoperf::data::{
    align, read_dividends, read_prices, read_roster, write_prices, Grade, Observation, PanelInputs,
    PriceSeries, RosterEntry,
};
use ipoperf::Error;
use proptest::prelude::*;

fn base() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 1, 2).unwrap()
}

fn day(offset: u64) -> NaiveDate {
    base().checked_add_days(Days::new(offset)).unwrap()
}

/// A price series on a random subset of `0..span` day offsets.
fn series_strategy(symbol: &'static str, span: u64) -> impl Strategy<Value = PriceSeries> {
    prop::collection::btree_map(0..span, 0.01f64..1.0e4, 1..60).prop_map(move |m| {
        PriceSeries::new(
            symbol,
            m.into_iter()
                .map(|(o, close)| Observation {
                    date: day(o),
                    close,
                })
                .collect(),
        )
        .unwrap()
    })
}

fn panel_strategy() -> impl Strategy<Value = PanelInputs> {
    (
        series_strategy("IDX", 120),
        prop::collection::vec(series_strategy("S", 120), 1..5),
        0u64..40,
    )
        .prop_map(|(benchmark, raw, listing)| {
            let securities: Vec<PriceSeries> = raw
                .into_iter()
                .enumerate()
                .map(|(i, s)| PriceSeries::new(format!("S{i}"), s.observations().to_vec()).unwrap())
                .collect();
            let roster = securities
                .iter()
                .enumerate()
                .map(|(i, s)| RosterEntry {
                    symbol: s.symbol().to_string(),
                    grade: Grade::ALL[i % 5],
                    listing_date: day(listing),
                    offer_price: None,
                })
                .collect();
            PanelInputs {
                benchmark,
                securities,
                roster,
                dividends: Vec::new(),
            }
        })
}

proptest! {
    #[test]
    fn prices_round_trip(a in series_strategy("AAA", 2000), b in series_strategy("BBB", 2000)) {
        let mut buf = Vec::new();
        write_prices(&[a.clone(), b.clone()], &mut buf).unwrap();
        let back = read_prices(&buf[..], "round-trip").unwrap();
        prop_assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn alignment_matches_set_intersection(inputs in panel_strategy()) {
        let calendar: BTreeSet<NaiveDate> = inputs.benchmark.dates().collect();
        let expected: Vec<(String, BTreeSet<NaiveDate>)> = inputs
            .securities
            .iter()
            .map(|s| {
                let own: BTreeSet<NaiveDate> = s.dates().collect();
                (s.symbol().to_string(), own.intersection(&calendar).copied().collect())
            })
            .collect();
        match align(inputs.clone(), 757) {
            Ok(panel) => {
                for (symbol, dates) in expected {
                    let got: BTreeSet<NaiveDate> = panel.security(&symbol).unwrap().dates().collect();
                    prop_assert!(got.is_subset(&calendar));
                    prop_assert_eq!(got, dates);
                }
            }
            Err(Error::Insufficient(_)) => {
                prop_assert!(expected.iter().any(|(_, d)| d.is_empty()));
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn alignment_is_idempotent(inputs in panel_strategy()) {
        if let Ok(once) = align(inputs, 757) {
            let twice = align(once.clone().into_inputs(), 757).unwrap();
            prop_assert_eq!(&once.securities, &twice.securities);
            prop_assert_eq!(&once.benchmark, &twice.benchmark);
            prop_assert!(twice.warnings.iter().all(|w| !w.contains("dropped")));
        }
    }
}

#[test]
fn off_calendar_days_are_dropped_and_reported() {
    let bench = read_prices(
        &b"symbol,date,close\nIDX,2014-01-02,100\nIDX,2014-01-03,101\nIDX,2014-01-06,102\n"[..],
        "bench.csv",
    )
    .unwrap()
    .remove(0);
    let securities = read_prices(
        &b"symbol,date,close\nA,2014-01-02,10\nA,2014-01-04,10.5\nA,2014-01-06,11\n"[..],
        "prices.csv",
    )
    .unwrap();
    let roster = read_roster(
        &b"symbol,grade,listing_date\nA,3,2014-01-02\n"[..],
        "roster.csv",
    )
    .unwrap();
    let panel = align(
        PanelInputs {
            benchmark: bench,
            securities,
            roster,
            dividends: Vec::new(),
        },
        3,
    )
    .unwrap();
    let dates: Vec<NaiveDate> = panel.security("A").unwrap().dates().collect();
    assert_eq!(dates.len(), 2);
    assert!(panel.warnings.iter().any(|w| w.contains("dropped 1")));
    assert!(panel.warnings.iter().any(|w| w.contains("missing 1 of 3")));
}

#[test]
fn malformed_rows_name_file_and_line() {
    let cases: [(&[u8], &str); 5] = [
        (b"symbol,date,close\nA,2014-01-02,abc\n", "prices.csv:2"),
        (
            b"symbol,date,close\nA,2014-01-02,10\nA,2014-13-02,10\n",
            "prices.csv:3",
        ),
        (
            b"symbol,date,close\nA,2014-01-02,10\nA,2014-01-02,11\n",
            "prices.csv:3",
        ),
        (b"symbol,date,close\nA,2014-01-02,-1\n", "prices.csv:2"),
        (b"sym,date,close\nA,2014-01-02,1\n", "prices.csv"),
    ];
    for (text, needle) in cases {
        let err = read_prices(text, "prices.csv").unwrap_err();
        assert!(err.is_input());
        assert!(err.to_string().contains(needle), "{err}");
    }
    let err = read_roster(
        &b"symbol,grade,listing_date\nA,6,2014-01-02\n"[..],
        "roster.csv",
    )
    .unwrap_err();
    assert!(err.to_string().contains("roster.csv:2"), "{err}");
    let err = read_dividends(
        &b"symbol,event_date,amount\nA,02/01/2014,1\n"[..],
        "div.csv",
    )
    .unwrap_err();
    assert!(err.to_string().contains("div.csv:2"), "{err}");
}

#[test]
fn empty_dividend_file_is_an_empty_calendar() {
    assert!(read_dividends(&b""[..], "d.csv").unwrap().is_empty());
    assert!(read_dividends(&b"symbol,event_date,amount\n"[..], "d.csv")
        .unwrap()
        .is_empty());
}
