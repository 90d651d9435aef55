//! Acceptance suite: one PASS/FAIL line per criterion.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use chrono::NaiveDate;
use ipoperf::data::{Grade, Observation, PriceSeries, RosterEntry};
use ipoperf::event::{
    compound, cumulative_returns, event_month_of, monthly_returns, EventClock, EventDay,
};
use ipoperf::garch::{
    significance, verdict_from, DividendVerdict, GarchParams, GarchSpec, Influence, DUMMY,
};
use ipoperf::report::percent;
use ipoperf::simulate::{recovery_experiment, DummyPattern, MarketProcess, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn event_clock() -> Outcome {
    let mut mismatches = 0;
    for day in 1..=757usize {
        let expected = match day {
            1 => EventDay::Initial,
            d => EventDay::Month((d - 2) / 21 + 1),
        };
        if event_month_of(day, 21).ok() != Some(expected) {
            mismatches += 1;
        }
    }
    let anchors = event_month_of(2, 21).ok() == Some(EventDay::Month(1))
        && event_month_of(22, 21).ok() == Some(EventDay::Month(1))
        && event_month_of(23, 21).ok() == Some(EventDay::Month(2))
        && event_month_of(757, 21).ok() == Some(EventDay::Month(36));
    check(
        mismatches == 0 && anchors,
        format!("757 days, {mismatches} mismatches"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20140101);
    for i in 0..100 {
        let panel = common::random_panel(&mut rng);
        if let Err(msg) = common::compare(&panel, 1e-10) {
            return Err(format!("panel {i}: {msg}"));
        }
    }
    Ok("100 panels within 1e-10".into())
}

fn invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dates = common::business_days(NaiveDate::from_ymd_opt(2012, 1, 2).unwrap(), 200);
    for i in 0..1000 {
        let n = rng.random_range(1..=60);
        let ar: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let car = cumulative_returns(&ar);
        for t in 0..n {
            let prev = if t == 0 { 0.0 } else { car[t - 1] };
            if (car[t] - prev - ar[t]).abs() > 1e-12 {
                return Err(format!(
                    "path {i}: CAR does not telescope at month {}",
                    t + 1
                ));
            }
        }
        let wealth: f64 = ar.iter().map(|r| 1.0 + r).product();
        if (compound(&ar) - (wealth - 1.0)).abs() > 1e-12 * wealth.max(1.0) {
            return Err(format!("path {i}: BHR differs from the product"));
        }

        let md = rng.random_range(1..=5);
        let months = rng.random_range(1..=(199 / md).min(36));
        let mut p = rng.random_range(5.0..50.0);
        let obs: Vec<Observation> = dates
            .iter()
            .map(|d| {
                p *= 1.0 + rng.random_range(-0.04..0.04);
                Observation { date: *d, close: p }
            })
            .collect();
        let series = PriceSeries::new("A", obs.clone()).unwrap();
        let entry = RosterEntry {
            symbol: "A".into(),
            grade: Grade::new(1).unwrap(),
            listing_date: dates[0],
            offer_price: None,
        };
        let clock = EventClock::new(months, md).unwrap();
        let (s, _) = monthly_returns(&series, &series, &entry, &clock).unwrap();
        let ratio = obs[months * md].close / obs[0].close - 1.0;
        if (compound(&s.monthly_returns) - ratio).abs() > 1e-10 {
            return Err(format!(
                "path {i}: monthly returns do not compound to the price ratio"
            ));
        }
    }
    Ok("1000 paths".into())
}

fn sim(params: GarchParams, length: usize, seed: u64) -> SimConfig {
    SimConfig {
        true_params: params,
        length,
        dummy: DummyPattern::Bernoulli(0.3),
        market: MarketProcess {
            mean: 0.01,
            volatility: 0.05,
        },
        seed,
    }
}

fn design() -> GarchParams {
    let s: f64 = 0.1;
    GarchParams {
        c1: 0.0,
        c2: 1.0,
        c3: 0.1 * s * s,
        c4: 0.1,
        c5: 0.8,
        c6: 0.0,
    }
}

fn recovery() -> Outcome {
    let r = recovery_experiment(&sim(design(), 5000, 5000), 200, &GarchSpec::default())
        .map_err(|e| e.to_string())?;
    let a = r.coefficient("c4").unwrap().bias;
    let b = r.coefficient("c5").unwrap().bias;
    check(
        a.abs() < 0.02 && b.abs() < 0.03,
        format!(
            "bias alpha {a:+.4}, beta {b:+.4} over {} fits ({} excluded)",
            r.used, r.excluded
        ),
    )
}

fn calibration() -> Outcome {
    let r = recovery_experiment(&sim(design(), 2000, 2000), 500, &GarchSpec::default())
        .map_err(|e| e.to_string())?;
    let flags: Vec<bool> = r.used_fits().filter_map(|f| f.significant[DUMMY]).collect();
    let rejected = flags.iter().filter(|f| **f).count();
    let rate = rejected as f64 / flags.len() as f64;
    check(
        (0.02..=0.10).contains(&rate) && flags.len() >= 450,
        format!("{rejected}/{} rejections = {rate:.3}", flags.len()),
    )
}

fn published_cells() -> Outcome {
    let cells = [
        ("Wonderla", 0.0062, 0.0026, true),
        ("PTC India", -0.0007, 0.0007, false),
        ("Just Dial", -0.0257, 0.0114, true),
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, est, se, expected) in cells {
        let got = significance(est, Some(se), 0.05);
        ok &= got == Some(expected);
        detail.push(format!(
            "{name} {}",
            if got == Some(true) { "*" } else { "-" }
        ));
    }
    check(ok, detail.join(", "))
}

fn cohort_verdict() -> Outcome {
    let v = verdict_from((0..27).map(|i| {
        if i < 6 {
            DividendVerdict::Significant
        } else {
            DividendVerdict::NotSignificant
        }
    }))
    .map_err(|e| e.to_string())?;
    check(
        v.significant == 6 && v.total == 27 && v.influence == Influence::NotSignificant,
        v.to_string(),
    )
}

fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| !e.file_name().to_string_lossy().starts_with("metadata-"))
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let cfg = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/garch/run.cfg");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        for cmd in ["eventstudy", "garch"] {
            let o = Command::new(env!("CARGO_BIN_EXE_ipoperf"))
                .args([cmd, "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(dir.path())
                .output()
                .map_err(|e| e.to_string())?;
            if !o.status.success() {
                return Err(format!(
                    "{cmd} failed: {}",
                    String::from_utf8_lossy(&o.stderr)
                ));
            }
        }
    }
    let a = outputs(dirs[0].path());
    let b = outputs(dirs[1].path());
    check(
        a == b && a.len() >= 15,
        format!("{} files compared byte for byte", a.len()),
    )
}

fn rendering() -> Outcome {
    let s = percent(-0.2073);
    check(s == "-20.73", format!("-0.2073 -> {s}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("event clock, days 1..757", event_clock),
        ("AR/CAR/BHR/WR oracle equivalence", oracle_equivalence),
        ("telescoping and compounding invariants", invariants),
        ("GARCH recovery, T=5000 x 200", recovery),
        ("dummy test calibration, T=2000 x 500", calibration),
        ("significance of the published cells", published_cells),
        ("cohort verdict, 6 of 27", cohort_verdict),
        ("end-to-end determinism", determinism),
        ("percentage rendering", rendering),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {}. {name}: {detail} [{secs:.2}s]", i + 1);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
