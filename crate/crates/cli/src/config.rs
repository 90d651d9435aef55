//! Effective run configuration.
//!
//! Each setting comes from the command-line flag if given, else from the
//! `--config` file, else from the built-in default. The config file is flat
//! `key=value` text using the long flag names as keys; blank lines and lines
//! starting with `#` are skipped, and relative paths in it are taken
//! relative to the file's own directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use ipoperf::event::{EventClock, DEFAULT_MONTHS, DEFAULT_MONTH_DAYS};
use ipoperf::garch::{GarchParams, GarchSpec};
use ipoperf::simulate::MarketProcess;
use ipoperf::{Error, Result};

/// Flags shared by every subcommand. All are optional so that unset flags
/// fall through to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Flat key=value file with defaults for any flag below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Security closes: symbol,date,close
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// Benchmark index closes: symbol,date,close (one symbol)
    #[arg(long)]
    pub benchmark: Option<PathBuf>,
    /// Roster: symbol,grade,listing_date[,offer_price]
    #[arg(long)]
    pub roster: Option<PathBuf>,
    /// Dividend calendar: symbol,event_date,amount
    #[arg(long)]
    pub dividends: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Event months after listing
    #[arg(long)]
    pub months: Option<usize>,
    /// Trading days per event month
    #[arg(long)]
    pub month_days: Option<usize>,
    /// Two-sided significance level
    #[arg(long)]
    pub level: Option<f64>,
    /// Restrict fits to omega > 0, alpha >= 0, beta >= 0, alpha + beta < 1
    #[arg(long)]
    pub constrained: bool,
    /// Lower bound on the conditional variance
    #[arg(long)]
    pub variance_floor: Option<f64>,
    /// Optimiser iteration cap per fit
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Stop when an iteration improves the log-likelihood by less than this
    #[arg(long)]
    pub ll_tolerance: Option<f64>,
    /// Base seed for simulation
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation replications
    #[arg(long)]
    pub reps: Option<usize>,
    /// Simulated series length
    #[arg(long)]
    pub length: Option<usize>,
    /// True intercept of the simulated mean equation
    #[arg(long)]
    pub c1: Option<f64>,
    /// True market coefficient
    #[arg(long)]
    pub c2: Option<f64>,
    /// True variance intercept (omega)
    #[arg(long)]
    pub c3: Option<f64>,
    /// True ARCH coefficient (alpha)
    #[arg(long)]
    pub c4: Option<f64>,
    /// True GARCH coefficient (beta)
    #[arg(long)]
    pub c5: Option<f64>,
    /// True dividend-dummy coefficient (delta)
    #[arg(long)]
    pub c6: Option<f64>,
    /// Chance that a simulated period carries a dividend
    #[arg(long)]
    pub dummy_prob: Option<f64>,
    /// Mean of the simulated market return
    #[arg(long)]
    pub market_mean: Option<f64>,
    /// Standard deviation of the simulated market return
    #[arg(long)]
    pub market_vol: Option<f64>,
    /// Securities in a synthetic panel
    #[arg(long)]
    pub panel_size: Option<usize>,
    /// Synthetic securities given a dividend effect
    #[arg(long)]
    pub planted: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub prices: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    pub roster: Option<PathBuf>,
    pub dividends: Option<PathBuf>,
    pub out: PathBuf,
    pub clock: EventClock,
    pub garch: GarchSpec,
    pub seed: u64,
    pub reps: usize,
    pub length: usize,
    pub true_params: GarchParams,
    pub dummy_prob: f64,
    pub market: MarketProcess,
    pub panel_size: usize,
    pub planted: usize,
}

struct FileSettings {
    source: PathBuf,
    base: PathBuf,
    values: BTreeMap<String, (usize, String)>,
}

impl FileSettings {
    fn empty() -> Self {
        Self {
            source: PathBuf::new(),
            base: PathBuf::new(),
            values: BTreeMap::new(),
        }
    }

    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file = path.display().to_string();
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                file: file.clone(),
                line: i as u64 + 1,
                message: "expected key=value".into(),
            })?;
            let key = key.trim().replace('_', "-");
            if values
                .insert(key.clone(), (i + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Parse {
                    file: file.clone(),
                    line: i as u64 + 1,
                    message: format!("{key} set twice"),
                });
            }
        }
        Ok(Self {
            source: path.to_path_buf(),
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            values,
        })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        let Some((line, text)) = self.values.remove(key) else {
            return Ok(None);
        };
        text.parse().map(Some).map_err(|_| Error::Parse {
            file: self.source.display().to_string(),
            line: line as u64,
            message: format!("cannot parse {key}={text}"),
        })
    }

    fn take_path(&mut self, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.take::<PathBuf>(key)?.map(|p| self.base.join(p)))
    }
}

fn absolute(path: PathBuf) -> Result<PathBuf> {
    std::path::absolute(&path).map_err(|source| Error::Io { path, source })
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let mut file = match &flags.config {
            Some(p) => FileSettings::load(p)?,
            None => FileSettings::empty(),
        };

        macro_rules! pick {
            ($flag:expr, $key:literal, $default:expr) => {
                match $flag {
                    Some(v) => {
                        file.values.remove($key);
                        v
                    }
                    None => file.take($key)?.unwrap_or($default),
                }
            };
        }
        macro_rules! pick_path {
            ($flag:expr, $key:literal) => {
                match $flag.clone() {
                    Some(v) => {
                        file.values.remove($key);
                        Some(v)
                    }
                    None => file.take_path($key)?,
                }
                .map(absolute)
                .transpose()?
            };
        }

        let prices = pick_path!(flags.prices, "prices");
        let benchmark = pick_path!(flags.benchmark, "benchmark");
        let roster = pick_path!(flags.roster, "roster");
        let dividends = pick_path!(flags.dividends, "dividends");
        let out = pick_path!(flags.out, "out").unwrap_or(absolute(PathBuf::from("out"))?);

        let months = pick!(flags.months, "months", DEFAULT_MONTHS);
        let month_days = pick!(flags.month_days, "month-days", DEFAULT_MONTH_DAYS);
        let clock = EventClock::new(months, month_days)?;

        let defaults = GarchSpec::default();
        let constrained = if flags.constrained {
            file.values.remove("constrained");
            true
        } else {
            file.take("constrained")?
                .unwrap_or(defaults.constrain_stationarity)
        };
        let garch = GarchSpec {
            constrain_stationarity: constrained,
            variance_floor: pick!(
                flags.variance_floor,
                "variance-floor",
                defaults.variance_floor
            ),
            significance_level: pick!(flags.level, "level", defaults.significance_level),
            max_iterations: pick!(
                flags.max_iterations,
                "max-iterations",
                defaults.max_iterations
            ),
            ll_tolerance: pick!(flags.ll_tolerance, "ll-tolerance", defaults.ll_tolerance),
        };
        garch.validate()?;

        let true_params = GarchParams {
            c1: pick!(flags.c1, "c1", 0.0),
            c2: pick!(flags.c2, "c2", 1.0),
            c3: pick!(flags.c3, "c3", 0.1),
            c4: pick!(flags.c4, "c4", 0.1),
            c5: pick!(flags.c5, "c5", 0.8),
            c6: pick!(flags.c6, "c6", 0.0),
        };
        let cfg = Self {
            prices,
            benchmark,
            roster,
            dividends,
            out,
            clock,
            garch,
            seed: pick!(flags.seed, "seed", 1),
            reps: pick!(flags.reps, "reps", 50),
            length: pick!(flags.length, "length", 1000),
            true_params,
            dummy_prob: pick!(flags.dummy_prob, "dummy-prob", 0.3),
            market: MarketProcess {
                mean: pick!(flags.market_mean, "market-mean", 0.01),
                volatility: pick!(flags.market_vol, "market-vol", 0.05),
            },
            panel_size: pick!(flags.panel_size, "panel-size", 10),
            planted: pick!(flags.planted, "planted", 2),
        };
        if let Some((key, (line, _))) = file.values.into_iter().next() {
            return Err(Error::Parse {
                file: file.source.display().to_string(),
                line: line as u64,
                message: format!("unknown setting {key}"),
            });
        }
        Ok(cfg)
    }

    /// Every effective setting in config-file syntax, so the file can be
    /// passed back through `--config` to repeat the run. The output
    /// directory is left out so that reruns elsewhere match byte for byte.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (key, path) in [
            ("prices", &self.prices),
            ("benchmark", &self.benchmark),
            ("roster", &self.roster),
            ("dividends", &self.dividends),
        ] {
            if let Some(p) = path {
                let _ = writeln!(s, "{key}={}", p.display());
            }
        }
        let p = &self.true_params;
        let g = &self.garch;
        let lines: [(&str, String); 21] = [
            ("months", self.clock.months.to_string()),
            ("month-days", self.clock.month_days.to_string()),
            ("level", g.significance_level.to_string()),
            ("constrained", g.constrain_stationarity.to_string()),
            ("variance-floor", g.variance_floor.to_string()),
            ("max-iterations", g.max_iterations.to_string()),
            ("ll-tolerance", g.ll_tolerance.to_string()),
            ("seed", self.seed.to_string()),
            ("reps", self.reps.to_string()),
            ("length", self.length.to_string()),
            ("c1", p.c1.to_string()),
            ("c2", p.c2.to_string()),
            ("c3", p.c3.to_string()),
            ("c4", p.c4.to_string()),
            ("c5", p.c5.to_string()),
            ("c6", p.c6.to_string()),
            ("dummy-prob", self.dummy_prob.to_string()),
            ("market-mean", self.market.mean.to_string()),
            ("market-vol", self.market.volatility.to_string()),
            ("panel-size", self.panel_size.to_string()),
            ("planted", self.planted.to_string()),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
