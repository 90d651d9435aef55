//! Command-line runner: loads inputs, runs the analyses and writes report
//! files. Exit status is 0 on success, 2 for bad input or configuration and
//! 1 for internal failures.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::{Parser, Subcommand};
use ipoperf::data::{align, read_dividends, read_prices, read_roster, AlignedPanel, PanelInputs};
use ipoperf::garch::COEFFICIENTS;
use ipoperf::pipeline::{event_study, garch_study, EventStudy, GarchStudy};
use ipoperf::report::{self, digest, Artifact, InputDigest, Metadata, ReportBundle};
use ipoperf::simulate::{
    recovery_experiment, synthesize_panel, DummyPattern, PanelConfig, RecoveryReport, SimConfig,
};
use ipoperf::{Error, Result};

use config::{Flags, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "ipoperf",
    version,
    about = "IPO long-run performance and dividend-volatility analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cohort return tables, first-day returns and CAR plot data
    Eventstudy(Flags),
    /// GARCH(1,1) fits with a dividend dummy, per security
    Garch(Flags),
    /// Parameter-recovery experiment on simulated GARCH paths
    Simulate(Flags),
    /// Event study and GARCH fits in one run
    Report(Flags),
    /// Write a synthetic input panel (prices, benchmark, roster, dividends)
    Synth(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eventstudy(_) => "eventstudy",
            Command::Garch(_) => "garch",
            Command::Simulate(_) => "simulate",
            Command::Report(_) => "report",
            Command::Synth(_) => "synth",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Eventstudy(f)
            | Command::Garch(f)
            | Command::Simulate(f)
            | Command::Report(f)
            | Command::Synth(f) => f,
        }
    }
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let command_line = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    match RunConfig::resolve(cli.command.flags())
        .and_then(|cfg| execute(&cli.command, &cfg, &command_line))
    {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input() {
                2
            } else {
                1
            }
        }
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn execute(command: &Command, cfg: &RunConfig, command_line: &str) -> Result<()> {
    let name = command.name();
    let (artifacts, inputs) = match command {
        Command::Eventstudy(_) => {
            let (panel, inputs) = load_panel(cfg, false)?;
            let study = run_event_study(&panel, cfg)?;
            let bundle = bundle(&study, None, cfg);
            bundle.validate(&panel.roster)?;
            (event_artifacts(&bundle)?, inputs)
        }
        Command::Garch(_) => {
            let (panel, inputs) = load_panel(cfg, true)?;
            let study = run_event_study(&panel, cfg)?;
            let fits = run_garch(&panel, &study, cfg)?;
            let bundle = bundle(&study, Some(fits), cfg);
            bundle.validate(&panel.roster)?;
            (garch_artifacts(&bundle)?, inputs)
        }
        Command::Report(_) => {
            let (panel, inputs) = load_panel(cfg, true)?;
            let study = run_event_study(&panel, cfg)?;
            let fits = run_garch(&panel, &study, cfg)?;
            let bundle = bundle(&study, Some(fits), cfg);
            bundle.validate(&panel.roster)?;
            let mut artifacts = event_artifacts(&bundle)?;
            artifacts.extend(garch_artifacts(&bundle)?);
            (artifacts, inputs)
        }
        Command::Simulate(_) => (vec![simulate(cfg)?], Vec::new()),
        Command::Synth(_) => {
            let panel = synthesize_panel(&PanelConfig::standard(
                cfg.panel_size,
                cfg.planted,
                cfg.clock,
                cfg.seed,
            ))?;
            panel.write(&cfg.out)?;
            println!(
                "wrote {} synthetic securities to {}",
                panel.roster.len(),
                cfg.out.display()
            );
            (Vec::new(), Vec::new())
        }
    };
    finish(name, cfg, artifacts, inputs, command_line)
}

fn read_input(path: &Path, digests: &mut Vec<InputDigest>) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    digests.push(InputDigest {
        path: path.display().to_string(),
        sha256: digest(&bytes),
    });
    Ok(bytes)
}

fn required<'a>(path: &'a Option<std::path::PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Invalid(format!("--{flag} is required")))
}

fn load_panel(cfg: &RunConfig, need_dividends: bool) -> Result<(AlignedPanel, Vec<InputDigest>)> {
    let mut digests = Vec::new();
    let prices_path = required(&cfg.prices, "prices")?;
    let bench_path = required(&cfg.benchmark, "benchmark")?;
    let roster_path = required(&cfg.roster, "roster")?;
    let label = |p: &Path| p.display().to_string();

    let roster = read_roster(
        &read_input(roster_path, &mut digests)?[..],
        &label(roster_path),
    )?;
    let securities = read_prices(
        &read_input(prices_path, &mut digests)?[..],
        &label(prices_path),
    )?;
    let mut bench = read_prices(
        &read_input(bench_path, &mut digests)?[..],
        &label(bench_path),
    )?;
    if bench.len() != 1 {
        return Err(Error::Invalid(format!(
            "{}: expected one benchmark symbol, found {}",
            bench_path.display(),
            bench.len()
        )));
    }
    let dividends = match (&cfg.dividends, need_dividends) {
        (Some(p), _) => read_dividends(&read_input(p, &mut digests)?[..], &label(p))?,
        (None, false) => Vec::new(),
        (None, true) => return Err(Error::Invalid("--dividends is required".into())),
    };
    let panel = align(
        PanelInputs {
            benchmark: bench.remove(0),
            securities,
            roster,
            dividends,
        },
        cfg.clock.horizon_days(),
    )?;
    warn_all(&panel.warnings);
    Ok((panel, digests))
}

fn run_event_study(panel: &AlignedPanel, cfg: &RunConfig) -> Result<EventStudy> {
    let study = event_study(panel, &cfg.clock)?;
    warn_all(&study.warnings);
    Ok(study)
}

fn run_garch(panel: &AlignedPanel, study: &EventStudy, cfg: &RunConfig) -> Result<GarchStudy> {
    if panel.dividends.is_empty() {
        eprintln!(
            "note: no dividend events; every dummy is inert and c6 is reported as indeterminate or zero-effect"
        );
    }
    let fits = garch_study(panel, &study.members, &cfg.garch)?;
    warn_all(&fits.warnings);
    match &fits.verdict {
        Some(v) => println!("{}", report::verdict_line(v, cfg.garch.significance_level)),
        None => eprintln!("warning: no security could be estimated"),
    }
    Ok(fits)
}

fn bundle(study: &EventStudy, garch: Option<GarchStudy>, cfg: &RunConfig) -> ReportBundle {
    let (fits, verdict) = garch.map(|g| (g.fits, g.verdict)).unwrap_or_default();
    ReportBundle {
        cohorts: study.cohorts.clone(),
        fits,
        verdict,
        first_day: study.first_day.clone(),
        significance_level: cfg.garch.significance_level,
    }
}

fn event_artifacts(bundle: &ReportBundle) -> Result<Vec<Artifact>> {
    let mut out = report::render_cohort_tables(bundle)?;
    out.push(report::render_first_day_table(bundle)?);
    out.extend(report::render_plot_data(bundle)?);
    Ok(out)
}

fn garch_artifacts(bundle: &ReportBundle) -> Result<Vec<Artifact>> {
    report::render_garch_table(
        &bundle.fits,
        bundle.verdict.as_ref(),
        bundle.significance_level,
    )
}

fn simulate(cfg: &RunConfig) -> Result<Artifact> {
    let sim = SimConfig {
        true_params: cfg.true_params,
        length: cfg.length,
        dummy: DummyPattern::Bernoulli(cfg.dummy_prob),
        market: cfg.market,
        seed: cfg.seed,
    };
    let rec = recovery_experiment(&sim, cfg.reps, &cfg.garch)?;
    println!(
        "{} of {} replications used, {} excluded",
        rec.used, rec.replications, rec.excluded
    );
    Ok(Artifact::new(
        "simulation_report.csv",
        simulation_table(&rec),
    ))
}

fn simulation_table(rec: &RecoveryReport) -> String {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_else(|| "na".into());
    let mut s = String::from(
        "coefficient,truth,mean_estimate,bias,rmse,coverage,mean_std_error,sd_estimate,used,excluded\n",
    );
    for name in COEFFICIENTS {
        if let Some(c) = rec.coefficient(name) {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                c.name,
                c.truth,
                c.mean_estimate,
                c.bias,
                c.rmse,
                opt(c.coverage),
                opt(c.mean_std_error),
                c.sd_estimate,
                rec.used,
                rec.excluded
            ));
        }
    }
    s
}

/// Adds the config echo, manifest and metadata sidecar, then writes
/// everything at once.
fn finish(
    name: &str,
    cfg: &RunConfig,
    mut artifacts: Vec<Artifact>,
    inputs: Vec<InputDigest>,
    command_line: &str,
) -> Result<()> {
    artifacts.push(Artifact::new(format!("config-{name}.txt"), cfg.echo()));
    let manifest = report::render_manifest(&report::manifest_name(name), &artifacts)?;
    let metadata = report::render_metadata(
        &report::metadata_name(name),
        &Metadata {
            generated_at: chrono::Utc::now().to_rfc3339(),
            command: command_line.to_string(),
            inputs,
        },
    )?;
    artifacts.push(manifest);
    artifacts.push(metadata);
    report::write_artifacts(&cfg.out, &artifacts)?;
    println!("wrote {} files to {}", artifacts.len(), cfg.out.display());
    Ok(())
}
