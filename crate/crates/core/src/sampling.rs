//! Monte Carlo sampling of equally weighted portfolios and their Sharpe ratios.
//!
//! Three sample spaces are supported: long-only, short-only and long-short.
//! Long-short portfolios come either from the product space (distinct assets,
//! independent signs) or from the union of the long and short position sets,
//! where the same asset may appear with both signs.
//!
//! Draw `d` always uses the random substream keyed by `(seed, d)`, so results
//! are identical for any thread count. Long-only and short-only runs with the
//! same seed and scheme select the same asset sets.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{PricePanel, SectorMap};
use crate::error::{Error, Result};
use crate::report::{composition_report, sharpe_quantiles, SamplingReport};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
pub const DEFAULT_TOP_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Long,
    Short,
    LongShort,
}

impl Style {
    pub fn as_str(&self) -> &'static str {
        match self {
            Style::Long => "long",
            Style::Short => "short",
            Style::LongShort => "longshort",
        }
    }
}

impl std::str::FromStr for Style {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(Style::Long),
            "short" => Ok(Style::Short),
            "longshort" | "long-short" => Ok(Style::LongShort),
            other => Err(Error::InvalidParameter(format!("unknown style {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Uniform,
    /// Each asset drawn with weight `1 / (n k_i)`, `k_i` its sector size.
    Stratified,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Scheme::Uniform),
            "stratified" => Ok(Scheme::Stratified),
            other => Err(Error::InvalidParameter(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LongShortSpace {
    /// Distinct assets, each with an independent random sign.
    Product,
    /// Positions drawn from the long and short copies of every asset; an
    /// asset can be held both ways.
    Union,
}

impl std::str::FromStr for LongShortSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(LongShortSpace::Product),
            "union" => Ok(LongShortSpace::Union),
            other => Err(Error::InvalidParameter(format!("unknown long-short space {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Period {
    Full,
    Range { start: NaiveDate, end: NaiveDate },
}

impl Period {
    /// 2007-09-01 to 2009-03-31.
    pub fn gfc() -> Self {
        Period::Range {
            start: NaiveDate::from_ymd_opt(2007, 9, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2009, 3, 31).expect("valid date"),
        }
    }

    pub fn apply(&self, panel: &PricePanel) -> Result<PricePanel> {
        match *self {
            Period::Full => Ok(panel.clone()),
            Period::Range { start, end } => {
                if start > end {
                    return Err(Error::InvalidParameter(format!("period {start}..{end} is reversed")));
                }
                panel.restrict(start, end)
            }
        }
    }
}

impl std::str::FromStr for Period {
    type Err = Error;

    /// `full`, `gfc`, or `YYYY-MM-DD:YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Period::Full),
            "gfc" => Ok(Period::gfc()),
            _ => {
                let (a, b) = s.split_once(':').ok_or_else(|| {
                    Error::InvalidParameter(format!("period {s:?} is not start:end, gfc or full"))
                })?;
                let parse = |x: &str| {
                    NaiveDate::parse_from_str(x, "%Y-%m-%d")
                        .map_err(|e| Error::InvalidParameter(format!("bad period date {x:?}: {e}")))
                };
                Ok(Period::Range {
                    start: parse(a)?,
                    end: parse(b)?,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpaceSpec {
    pub style: Style,
    pub size: usize,
    pub scheme: Scheme,
    pub period: Period,
    pub draws: usize,
    pub seed: u64,
    pub long_short_space: LongShortSpace,
    pub top_fraction: f64,
    /// Split long-short composition into long and short position shares.
    pub sign_split: bool,
}

impl SampleSpaceSpec {
    pub fn new(style: Style, size: usize, draws: usize, seed: u64) -> Self {
        SampleSpaceSpec {
            style,
            size,
            scheme: Scheme::Uniform,
            period: Period::Full,
            draws,
            seed,
            long_short_space: LongShortSpace::Product,
            top_fraction: DEFAULT_TOP_FRACTION,
            sign_split: false,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_period(mut self, period: Period) -> Self {
        self.period = period;
        self
    }

    pub fn with_space(mut self, space: LongShortSpace) -> Self {
        self.long_short_space = space;
        self
    }

    pub fn with_top_fraction(mut self, fraction: f64) -> Self {
        self.top_fraction = fraction;
        self
    }

    pub fn validate(&self, num_assets: usize) -> Result<()> {
        if self.size == 0 || self.size > num_assets {
            return Err(Error::InvalidParameter(format!(
                "portfolio size {} must be in 1..={num_assets}",
                self.size
            )));
        }
        if self.draws == 0 {
            return Err(Error::InvalidParameter("draws must be at least 1".into()));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "top fraction {} must lie in (0, 1]",
                self.top_fraction
            )));
        }
        Ok(())
    }
}

/// Equally weighted positions `sign_k / m` in `assets[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Portfolio {
    pub assets: Vec<usize>,
    pub signs: Vec<i8>,
}

impl Portfolio {
    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![1.0 / self.assets.len() as f64; self.assets.len()]
    }

    /// Net signed weight per asset, in ascending asset order, zeros dropped.
    pub fn exposures(&self) -> Vec<(usize, f64)> {
        let m = self.assets.len() as f64;
        let mut net: BTreeMap<usize, i64> = BTreeMap::new();
        for (&a, &s) in self.assets.iter().zip(&self.signs) {
            *net.entry(a).or_insert(0) += i64::from(s);
        }
        net.into_iter()
            .filter(|&(_, c)| c != 0)
            .map(|(a, c)| (a, c as f64 / m))
            .collect()
    }

    pub fn has_distinct_assets(&self) -> bool {
        let mut sorted = self.assets.clone();
        sorted.sort_unstable();
        sorted.windows(2).all(|w| w[0] != w[1])
    }
}

/// Random stream for draw `draw` of an experiment seeded with `seed`.
pub fn substream(seed: u64, draw: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    rng
}

/// Per-asset stratified selection weights `1 / (n k_i)`.
pub fn stratified_weights(map: &SectorMap) -> Vec<f64> {
    let n = map.num_sectors() as f64;
    let sizes = map.sizes();
    (0..map.num_assets())
        .map(|a| 1.0 / (n * sizes[map.sector_of(a)] as f64))
        .collect()
}

fn pick_without_replacement<R: Rng + ?Sized>(
    rng: &mut R,
    length: usize,
    amount: usize,
    weights: Option<&[f64]>,
) -> Result<Vec<usize>> {
    let picked = match weights {
        None => index::sample(rng, length, amount),
        Some(w) => index::sample_weighted(rng, length, |i| w[i], amount)
            .map_err(|e| Error::InvalidParameter(format!("weighted sampling failed: {e}")))?,
    };
    let mut picked = picked.into_vec();
    picked.sort_unstable();
    Ok(picked)
}

pub fn draw_portfolio<R: Rng + ?Sized>(
    spec: &SampleSpaceSpec,
    map: &SectorMap,
    rng: &mut R,
) -> Result<Portfolio> {
    let num_assets = map.num_assets();
    let m = spec.size;
    if m > num_assets {
        return Err(Error::InvalidParameter(format!(
            "portfolio size {m} exceeds universe of {num_assets}"
        )));
    }
    let weights = match spec.scheme {
        Scheme::Uniform => None,
        Scheme::Stratified => Some(stratified_weights(map)),
    };

    if spec.style == Style::LongShort && spec.long_short_space == LongShortSpace::Union {
        // positions 0..N are long copies, N..2N short copies
        let doubled = weights.map(|w| w.iter().chain(w.iter()).map(|x| x / 2.0).collect::<Vec<_>>());
        let picked = pick_without_replacement(rng, 2 * num_assets, m, doubled.as_deref())?;
        let assets = picked.iter().map(|&k| k % num_assets).collect();
        let signs = picked.iter().map(|&k| if k < num_assets { 1 } else { -1 }).collect();
        return Ok(Portfolio { assets, signs });
    }

    let assets = pick_without_replacement(rng, num_assets, m, weights.as_deref())?;
    let signs = match spec.style {
        Style::Long => vec![1; m],
        Style::Short => vec![-1; m],
        Style::LongShort => (0..m).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect(),
    };
    Ok(Portfolio { assets, signs })
}

/// Daily return moments of every asset over an evaluation period.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpeInputs {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub risk_free: f64,
    pub days_per_year: f64,
}

impl SharpeInputs {
    /// Mean and sample covariance (denominator `days - 1`) of daily log
    /// returns.
    pub fn from_panel(panel: &PricePanel) -> Result<Self> {
        let returns = panel.log_returns();
        let days = returns.nrows();
        if days < 2 {
            return Err(Error::InvalidParameter(
                "Sharpe inputs need at least two return days".into(),
            ));
        }
        let mean = returns.row_mean().transpose();
        let mut centered = returns;
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mean[j]);
        }
        let mut cov = centered.tr_mul(&centered) / (days as f64 - 1.0);
        let n = cov.nrows();
        for i in 0..n {
            for j in i + 1..n {
                cov[(j, i)] = cov[(i, j)];
            }
        }
        Ok(SharpeInputs {
            mean,
            cov,
            risk_free: 0.0,
            days_per_year: TRADING_DAYS_PER_YEAR,
        })
    }
}

/// Annualized Sharpe ratio: mean daily portfolio return times days per year,
/// less the risk-free rate, over daily volatility times the square root of
/// days per year.
pub fn portfolio_sharpe(p: &Portfolio, inputs: &SharpeInputs) -> Result<f64> {
    let num_assets = inputs.mean.len();
    if let Some(&bad) = p.assets.iter().find(|&&a| a >= num_assets) {
        return Err(Error::InvalidParameter(format!(
            "asset {bad} outside the {num_assets}-asset universe"
        )));
    }
    let exposure = p.exposures();
    if exposure.is_empty() {
        return Err(Error::DegeneratePortfolio);
    }
    let mean: f64 = exposure.iter().map(|&(a, x)| x * inputs.mean[a]).sum();
    let mut var = 0.0;
    for &(a, xa) in &exposure {
        for &(b, xb) in &exposure {
            var += xa * xb * inputs.cov[(a, b)];
        }
    }
    if var.is_nan() || var <= 0.0 {
        return Err(Error::DegeneratePortfolio);
    }
    let annual_mean = mean * inputs.days_per_year - inputs.risk_free;
    Ok(annual_mean / (var.sqrt() * inputs.days_per_year.sqrt()))
}

/// Every draw of one experiment, in draw order, plus its report.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub spec: SampleSpaceSpec,
    pub portfolios: Vec<Portfolio>,
    pub sharpes: Vec<f64>,
    pub report: SamplingReport,
}

pub fn run_experiment(
    spec: &SampleSpaceSpec,
    panel: &PricePanel,
    map: &SectorMap,
) -> Result<Experiment> {
    spec.validate(panel.num_assets())?;
    if map.num_assets() != panel.num_assets() {
        return Err(Error::InvalidParameter(
            "sector map and price panel disagree on the asset count".into(),
        ));
    }
    let inputs = SharpeInputs::from_panel(&spec.period.apply(panel)?)?;
    run_with_inputs(spec, &inputs, map)
}

/// Same as [`run_experiment`] with precomputed return moments.
pub fn run_with_inputs(
    spec: &SampleSpaceSpec,
    inputs: &SharpeInputs,
    map: &SectorMap,
) -> Result<Experiment> {
    spec.validate(map.num_assets())?;
    let scored: Vec<(Portfolio, f64)> = (0..spec.draws as u64)
        .into_par_iter()
        .map(|d| {
            let mut rng = substream(spec.seed, d);
            let p = draw_portfolio(spec, map, &mut rng)?;
            let s = portfolio_sharpe(&p, inputs)?;
            Ok((p, s))
        })
        .collect::<Result<_>>()?;
    let (portfolios, sharpes): (Vec<Portfolio>, Vec<f64>) = scored.into_iter().unzip();

    let quantiles = sharpe_quantiles(&sharpes)?;
    let composition = composition_report(
        &portfolios,
        &sharpes,
        spec.top_fraction,
        map,
        spec.sign_split,
    )?;
    let report = SamplingReport {
        spec: spec.clone(),
        quantiles,
        composition,
        comparisons: BTreeMap::new(),
    };
    Ok(Experiment {
        spec: spec.clone(),
        portfolios,
        sharpes,
        report,
    })
}
