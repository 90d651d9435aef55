//! GARCH(1,1) with the market return in the mean equation and a dividend
//! dummy in the variance equation:
//!
//! ```text
//! y_t = c1 + c2 * x_t + e_t
//! h_t = c3 + c4 * e_{t-1}^2 + c5 * h_{t-1} + c6 * d_t
//! ```
//!
//! Estimation maximizes the Gaussian quasi-log-likelihood. The first
//! conditional variance is the sample variance of the residuals at the
//! current `(c1, c2)`, and every `h_t` is floored at the configured
//! `variance_floor`. By default the coefficients are unconstrained, so
//! negative ARCH terms and GARCH terms above one can be fitted; the
//! stationarity-constrained mode restricts to `c3 > 0`, `c4, c5 >= 0`,
//! `c4 + c5 < 1`.

use std::fmt;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::DividendEvent;
use crate::error::{Error, Result};
use crate::event::CohortMember;
use crate::optim::{self, BfgsOptions, NelderMeadOptions};

pub const MIN_OBSERVATIONS: usize = 10;
pub const COEFFICIENTS: [&str; 6] = ["c1", "c2", "c3", "c4", "c5", "c6"];
/// Index of the dummy coefficient in [`GarchParams::to_array`].
pub const DUMMY: usize = 5;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchSpec {
    pub constrain_stationarity: bool,
    pub variance_floor: f64,
    pub significance_level: f64,
    pub max_iterations: usize,
    pub ll_tolerance: f64,
}

impl Default for GarchSpec {
    fn default() -> Self {
        Self {
            constrain_stationarity: false,
            variance_floor: 1e-12,
            significance_level: 0.05,
            max_iterations: 2000,
            ll_tolerance: 1e-9,
        }
    }
}

impl GarchSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.significance_level > 0.0 && self.significance_level < 1.0) {
            return Err(Error::Invalid(format!(
                "significance level {} outside (0, 1)",
                self.significance_level
            )));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::Invalid("variance floor must be positive".into()));
        }
        if !(self.ll_tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Invalid(
                "convergence tolerance and iteration limit must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// 0/1 dividend-period indicator aligned with a return series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DummySeries(Vec<u8>);

impl DummySeries {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| **v > 1) {
            return Err(Error::Invalid(format!("dummy value {v} is not 0 or 1")));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when no period is marked, so the dummy coefficient has no
    /// effect on the likelihood.
    pub fn is_inert(&self) -> bool {
        self.0.iter().all(|v| *v == 0)
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|v| **v == 1).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchData {
    y: Vec<f64>,
    x: Vec<f64>,
    d: DummySeries,
}

impl GarchData {
    pub fn new(y: Vec<f64>, x: Vec<f64>, d: DummySeries) -> Result<Self> {
        if y.len() != x.len() || y.len() != d.len() {
            return Err(Error::Invalid(format!(
                "series lengths differ: y {}, x {}, dummy {}",
                y.len(),
                x.len(),
                d.len()
            )));
        }
        if y.len() < MIN_OBSERVATIONS {
            return Err(Error::Insufficient(format!(
                "{} observations, at least {MIN_OBSERVATIONS} needed",
                y.len()
            )));
        }
        if y.iter().chain(&x).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite value in return series".into()));
        }
        Ok(Self { y, x, d })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn dummy(&self) -> &DummySeries {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Multiplies both return series by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            y: self.y.iter().map(|v| v * k).collect(),
            x: self.x.iter().map(|v| v * k).collect(),
            d: self.d.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchParams {
    /// Mean intercept.
    pub c1: f64,
    /// Market beta.
    pub c2: f64,
    /// Variance intercept.
    pub c3: f64,
    /// ARCH coefficient on the lagged squared residual.
    pub c4: f64,
    /// GARCH coefficient on the lagged variance.
    pub c5: f64,
    /// Dividend dummy coefficient.
    pub c6: f64,
}

impl GarchParams {
    pub fn to_array(self) -> [f64; 6] {
        [self.c1, self.c2, self.c3, self.c4, self.c5, self.c6]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            c1: a[0],
            c2: a[1],
            c3: a[2],
            c4: a[3],
            c5: a[4],
            c6: a[5],
        }
    }

    pub fn is_stationary(&self) -> bool {
        self.c4 + self.c5 < 1.0
    }

    pub fn satisfies_constraints(&self) -> bool {
        self.c3 > 0.0 && self.c4 >= 0.0 && self.c5 >= 0.0 && self.is_stationary()
    }
}

pub fn residual(y: f64, x: f64, c1: f64, c2: f64) -> f64 {
    y - c1 - c2 * x
}

/// Sample variance (n - 1) of the mean-equation residuals, the presample
/// value of the variance recursion.
fn residual_variance(y: &[f64], x: &[f64], c1: f64, c2: f64) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mean = y
        .iter()
        .zip(x)
        .map(|(yt, xt)| residual(*yt, *xt, c1, c2))
        .sum::<f64>()
        / n as f64;
    y.iter()
        .zip(x)
        .map(|(yt, xt)| {
            let e = residual(*yt, *xt, c1, c2) - mean;
            e * e
        })
        .sum::<f64>()
        / (n - 1) as f64
}

fn sample_variance_of(e: &[f64]) -> f64 {
    let zeros = vec![0.0; e.len()];
    residual_variance(e, &zeros, 0.0, 0.0)
}

/// Conditional variances for a residual series, starting from the sample
/// variance of `residuals`.
pub fn variance_recursion(
    residuals: &[f64],
    dummy: &DummySeries,
    params: &GarchParams,
    floor: f64,
) -> Result<Vec<f64>> {
    if residuals.is_empty() {
        return Err(Error::Invalid(
            "variance recursion on an empty series".into(),
        ));
    }
    variance_recursion_from(
        residuals,
        dummy,
        params,
        sample_variance_of(residuals),
        floor,
    )
}

/// Conditional variances with an explicit first value `h1` (floored).
pub fn variance_recursion_from(
    residuals: &[f64],
    dummy: &DummySeries,
    params: &GarchParams,
    h1: f64,
    floor: f64,
) -> Result<Vec<f64>> {
    if residuals.len() != dummy.len() {
        return Err(Error::Invalid("residual and dummy lengths differ".into()));
    }
    let mut h = Vec::with_capacity(residuals.len());
    if !h1.is_finite() {
        return Err(Error::Infeasible("non-finite initial variance".into()));
    }
    h.push(h1.max(floor));
    for t in 1..residuals.len() {
        let e = residuals[t - 1];
        let next = params.c3
            + params.c4 * e * e
            + params.c5 * h[t - 1]
            + params.c6 * f64::from(dummy.values()[t]);
        if !next.is_finite() {
            return Err(Error::Infeasible(format!(
                "conditional variance diverged at t = {}",
                t + 1
            )));
        }
        h.push(next.max(floor));
    }
    Ok(h)
}

/// `sum_t [ -ln(2 pi)/2 - ln(h_t)/2 - e_t^2 / (2 h_t) ]`.
pub fn gaussian_log_likelihood(residuals: &[f64], variances: &[f64]) -> f64 {
    residuals
        .iter()
        .zip(variances)
        .map(|(e, h)| -HALF_LN_2PI - 0.5 * h.ln() - e * e / (2.0 * h))
        .sum()
}

/// Quasi-log-likelihood at `params`; `-inf` where the variance recursion
/// leaves the finite range.
pub fn log_likelihood(data: &GarchData, params: &GarchParams, floor: f64) -> f64 {
    let GarchParams {
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
    } = *params;
    if !params.to_array().iter().all(|v| v.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let (y, x, d) = (&data.y, &data.x, data.d.values());
    let h1 = residual_variance(y, x, c1, c2);
    if !h1.is_finite() {
        return f64::NEG_INFINITY;
    }
    let mut h = h1.max(floor);
    let mut e_prev = 0.0;
    let mut ll = 0.0;
    for t in 0..y.len() {
        if t > 0 {
            let next = c3 + c4 * e_prev * e_prev + c5 * h + c6 * f64::from(d[t]);
            if !next.is_finite() {
                return f64::NEG_INFINITY;
            }
            h = next.max(floor);
        }
        let e = residual(y[t], x[t], c1, c2);
        ll += -HALF_LN_2PI - 0.5 * h.ln() - e * e / (2.0 * h);
        e_prev = e;
    }
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

/// Two-sided standard normal critical value at `level`.
pub fn critical_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - level / 2.0)
}

/// `Some(true)` when `|estimate / se|` exceeds the two-sided critical value;
/// `None` when no usable standard error exists.
pub fn significance(estimate: f64, std_error: Option<f64>, level: f64) -> Option<bool> {
    let se = std_error.filter(|s| s.is_finite() && *s > 0.0)?;
    Some((estimate / se).abs() > critical_value(level))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DividendVerdict {
    Significant,
    NotSignificant,
    Indeterminate,
}

impl DividendVerdict {
    pub fn from_flag(flag: Option<bool>) -> Self {
        match flag {
            Some(true) => Self::Significant,
            Some(false) => Self::NotSignificant,
            None => Self::Indeterminate,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Significant => "significant",
            Self::NotSignificant => "not significant",
            Self::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchFit {
    pub params: GarchParams,
    pub std_errors: [Option<f64>; 6],
    pub t_stats: [Option<f64>; 6],
    pub significant: [Option<bool>; 6],
    pub level: f64,
    pub log_likelihood: f64,
    /// Objective at the starting values; never above `log_likelihood`.
    pub start_log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub conditional_variances: Vec<f64>,
    /// The dummy marked no period, so `c6` was held at zero.
    pub dummy_inert: bool,
    /// Some `h_t` sits on the variance floor. The likelihood is unbounded
    /// along such paths, so curvature-based inference is meaningless and
    /// every significance flag is withheld.
    pub floor_reached: bool,
}

impl GarchFit {
    pub fn dividend_verdict(&self) -> DividendVerdict {
        DividendVerdict::from_flag(self.significant[DUMMY])
    }

    pub fn is_stationary(&self) -> bool {
        self.params.is_stationary()
    }
}

/// Starting values: least squares for the mean equation and a variance
/// target for the rest.
pub fn starting_params(data: &GarchData) -> Result<GarchParams> {
    let n = data.len() as f64;
    let mx = data.x.iter().sum::<f64>() / n;
    let my = data.y.iter().sum::<f64>() / n;
    let sxx: f64 = data.x.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = data.y.iter().map(|y| (y - my) * (y - my)).sum();
    if syy == 0.0 {
        return Err(Error::Degenerate("stock returns have zero variance".into()));
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate(
            "market returns have zero variance".into(),
        ));
    }
    let sxy: f64 = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let c2 = sxy / sxx;
    let c1 = my - c2 * mx;
    let v = residual_variance(&data.y, &data.x, c1, c2);
    if !(v > 1e-14 * syy / (n - 1.0)) {
        return Err(Error::Degenerate(
            "mean equation fits exactly, residual variance is zero".into(),
        ));
    }
    Ok(GarchParams {
        c1,
        c2,
        c3: 0.05 * v,
        c4: 0.05,
        c5: 0.90,
        c6: 0.0,
    })
}

/// Which coefficients the optimizer moves and how it scales them.
struct Parameterization {
    start: [f64; 6],
    scale: [f64; 6],
    free: Vec<usize>,
}

impl Parameterization {
    fn to_params(&self, u: &[f64]) -> GarchParams {
        let mut theta = self.start;
        for (k, &i) in self.free.iter().enumerate() {
            theta[i] = self.start[i] + u[k] * self.scale[i];
        }
        GarchParams::from_array(theta)
    }
}

pub fn estimate(data: &GarchData, spec: &GarchSpec) -> Result<GarchFit> {
    let free_dummy = !data.d.is_inert();
    estimate_with(data, spec, free_dummy)
}

/// Estimation with the dummy coefficient either free or held at zero.
pub(crate) fn estimate_with(
    data: &GarchData,
    spec: &GarchSpec,
    free_dummy: bool,
) -> Result<GarchFit> {
    spec.validate()?;
    let start = starting_params(data)?;
    let v = start.c3 / 0.05;
    let n = data.len() as f64;
    let mx = data.x.iter().sum::<f64>() / n;
    let sd_x = (data.x.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / n).sqrt();
    let sd_e = v.sqrt();
    let param = Parameterization {
        start: start.to_array(),
        scale: [sd_e, sd_e / sd_x, v, 1.0, 1.0, v],
        free: (0..6).filter(|&i| i != DUMMY || free_dummy).collect(),
    };

    let floor = spec.variance_floor;
    let constrained = spec.constrain_stationarity;
    let objective = |u: &[f64]| {
        let p = param.to_params(u);
        if constrained && !p.satisfies_constraints() {
            return f64::INFINITY;
        }
        -log_likelihood(data, &p, floor)
    };

    let u0 = vec![0.0; param.free.len()];
    let start_value = objective(&u0);
    if !start_value.is_finite() {
        return Err(Error::Degenerate(
            "likelihood is not finite at the starting values".into(),
        ));
    }
    let simplex = optim::nelder_mead(
        objective,
        &u0,
        NelderMeadOptions {
            initial_step: 0.1,
            max_iterations: spec.max_iterations,
            value_tolerance: spec.ll_tolerance,
        },
    );
    let polished = optim::bfgs(
        objective,
        &simplex.x,
        BfgsOptions {
            max_iterations: spec.max_iterations,
            value_tolerance: spec.ll_tolerance,
            gradient_step: 1e-6,
        },
    );
    let best = if polished.value <= simplex.value {
        &polished
    } else {
        &simplex
    };
    let params = param.to_params(&best.x);
    let log_lik = log_likelihood(data, &params, floor);
    let residuals: Vec<f64> = data
        .y
        .iter()
        .zip(&data.x)
        .map(|(y, x)| residual(*y, *x, params.c1, params.c2))
        .collect();
    let h1 = residual_variance(&data.y, &data.x, params.c1, params.c2);
    let conditional_variances = variance_recursion_from(&residuals, &data.d, &params, h1, floor)?;

    let floor_reached = conditional_variances.iter().any(|h| *h <= floor);

    let std_errors = std_errors_with(data, &params, floor, &param.free);
    let theta = params.to_array();
    let mut t_stats = [None; 6];
    let mut significant = [None; 6];
    for i in 0..6 {
        t_stats[i] = std_errors[i].map(|se| theta[i] / se);
        if !floor_reached {
            significant[i] = significance(theta[i], std_errors[i], spec.significance_level);
        }
    }

    Ok(GarchFit {
        params,
        std_errors,
        t_stats,
        significant,
        level: spec.significance_level,
        log_likelihood: log_lik,
        start_log_likelihood: -start_value,
        converged: polished.converged,
        iterations: simplex.iterations + polished.iterations,
        conditional_variances,
        dummy_inert: !free_dummy,
        floor_reached,
    })
}

/// Finite-difference step for coefficient value `v`.
pub fn hessian_step(v: f64) -> f64 {
    (1e-4 * v.abs()).max(1e-5)
}

/// Standard errors from the inverse negative Hessian of the log-likelihood
/// at `params`. An inert dummy coefficient gets none.
pub fn std_errors(data: &GarchData, params: &GarchParams, floor: f64) -> [Option<f64>; 6] {
    let free: Vec<usize> = (0..6)
        .filter(|&i| i != DUMMY || !data.d.is_inert())
        .collect();
    std_errors_with(data, params, floor, &free)
}

fn std_errors_with(
    data: &GarchData,
    params: &GarchParams,
    floor: f64,
    free: &[usize],
) -> [Option<f64>; 6] {
    let theta = params.to_array();
    let at: Vec<f64> = free.iter().map(|&i| theta[i]).collect();
    let steps: Vec<f64> = at.iter().map(|v| hessian_step(*v)).collect();
    let loglik = |u: &[f64]| {
        let mut t = theta;
        for (k, &i) in free.iter().enumerate() {
            t[i] = u[k];
        }
        log_likelihood(data, &GarchParams::from_array(t), floor)
    };
    let se = optim::curvature_std_errors(&loglik, &at, &steps);
    let mut out = [None; 6];
    for (k, &i) in free.iter().enumerate() {
        out[i] = se[k];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Influence {
    Significant,
    NotSignificant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CohortVerdict {
    pub significant: usize,
    pub total: usize,
    pub influence: Influence,
}

impl CohortVerdict {
    pub fn conclusion(&self) -> &'static str {
        match self.influence {
            Influence::Significant => "significant influence",
            Influence::NotSignificant => "no significant influence",
        }
    }
}

impl fmt::Display for CohortVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} out of {} dummy coefficients significant: dividend has {} on stock price",
            self.significant,
            self.total,
            self.conclusion()
        )
    }
}

/// Counts significant dummy coefficients. A cohort shows an influence only
/// when at least half of its fits do.
pub fn cohort_verdict(fits: &[GarchFit]) -> Result<CohortVerdict> {
    verdict_from(fits.iter().map(GarchFit::dividend_verdict))
}

pub fn verdict_from(verdicts: impl IntoIterator<Item = DividendVerdict>) -> Result<CohortVerdict> {
    let (mut significant, mut total) = (0, 0);
    for v in verdicts {
        total += 1;
        if v == DividendVerdict::Significant {
            significant += 1;
        }
    }
    if total == 0 {
        return Err(Error::Insufficient(
            "cohort verdict needs at least one fit".into(),
        ));
    }
    let influence = if 2 * significant < total {
        Influence::NotSignificant
    } else {
        Influence::Significant
    };
    Ok(CohortVerdict {
        significant,
        total,
        influence,
    })
}

/// Marks each event month whose window holds at least one dividend.
/// Dividends on or before the listing day, or past the last populated
/// month, are ignored with a warning.
pub fn build_dummy<'a>(
    dividends: impl IntoIterator<Item = &'a DividendEvent>,
    series: &crate::event::EventSeries,
) -> (DummySeries, Vec<String>) {
    let mut values = vec![0u8; series.months()];
    let mut warnings = Vec::new();
    for d in dividends {
        if d.symbol != series.symbol {
            continue;
        }
        match series.month_containing(d.event_date) {
            Some(t) => values[t - 1] = 1,
            None if d.event_date <= series.listing_day => warnings.push(format!(
                "{}: dividend on {} precedes the aftermarket, ignored",
                d.symbol, d.event_date
            )),
            None => warnings.push(format!(
                "{}: dividend on {} falls after the last event month, ignored",
                d.symbol, d.event_date
            )),
        }
    }
    (DummySeries(values), warnings)
}

/// Estimation inputs for one security: its monthly event returns, the
/// benchmark's over the same windows, and its dividend dummy.
pub fn garch_data_for<'a>(
    member: &CohortMember,
    dividends: impl IntoIterator<Item = &'a DividendEvent>,
) -> Result<(GarchData, Vec<String>)> {
    let (dummy, warnings) = build_dummy(dividends, &member.series);
    let data = GarchData::new(
        member.series.monthly_returns.clone(),
        member.benchmark.monthly_returns.clone(),
        dummy,
    )?;
    Ok((data, warnings))
}
