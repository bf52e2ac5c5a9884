//! Sharpe quantile tables, cross-space comparisons and the sector composition
//! of top-ranked portfolios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::SectorMap;
use crate::error::{Error, Result};
use crate::sampling::{Portfolio, SampleSpaceSpec};
use crate::stats::quantile_sorted;

pub const QUANTILE_LEVELS: [f64; 9] = [0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub spec: SampleSpaceSpec,
    /// Keyed by level as written in [`QUANTILE_LEVELS`] (`"0.01"`, ...).
    pub quantiles: BTreeMap<String, f64>,
    pub composition: CompositionTable,
    /// `P(X > Y)` with `X` this experiment and `Y` the named one.
    pub comparisons: BTreeMap<String, f64>,
}

impl SamplingReport {
    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.quantiles.get(&level_key(level)).copied()
    }
}

pub fn level_key(level: f64) -> String {
    format!("{level}")
}

/// Sharpe quantiles at [`QUANTILE_LEVELS`] by linear interpolation.
pub fn sharpe_quantiles(sharpes: &[f64]) -> Result<BTreeMap<String, f64>> {
    if sharpes.is_empty() {
        return Err(Error::InvalidParameter("no Sharpe ratios to summarize".into()));
    }
    if sharpes.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Sharpe ratio".into()));
    }
    let mut sorted = sharpes.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(QUANTILE_LEVELS
        .iter()
        .map(|&q| (level_key(q), quantile_sorted(&sorted, q)))
        .collect())
}

/// Probability that a random draw from `x` beats a random draw from `y`, ties
/// counting one half, over all `|x| * |y|` pairs.
pub fn compare_spaces(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidParameter("compare_spaces needs two nonempty arrays".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN in comparison input".into()));
    }
    let mut ys = y.to_vec();
    ys.sort_by(f64::total_cmp);
    // twice the score, so ties stay integral
    let mut doubled: u128 = 0;
    for &v in x {
        let below = ys.partition_point(|&w| w < v);
        let not_above = ys.partition_point(|&w| w <= v);
        doubled += 2 * below as u128 + (not_above - below) as u128;
    }
    Ok(doubled as f64 / (2 * x.len() as u128 * y.len() as u128) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub sector: String,
    /// Share of all positions in the selected portfolios, in percent.
    pub raw_pct: f64,
    /// `raw_pct` over the sector's share of the universe, `100 k_i / N`.
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub long_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub short_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionTable {
    pub top_fraction: f64,
    pub selected: usize,
    pub rows: Vec<CompositionRow>,
}

impl CompositionTable {
    /// `k` most and `k` least represented sectors by representation ratio.
    pub fn extremes_by_ratio(&self, k: usize) -> (Vec<&CompositionRow>, Vec<&CompositionRow>) {
        self.extremes(k, |r| r.ratio)
    }

    /// `k` most and `k` least represented sectors by raw percentage.
    pub fn extremes_by_raw(&self, k: usize) -> (Vec<&CompositionRow>, Vec<&CompositionRow>) {
        self.extremes(k, |r| r.raw_pct)
    }

    fn extremes(
        &self,
        k: usize,
        key: impl Fn(&CompositionRow) -> f64,
    ) -> (Vec<&CompositionRow>, Vec<&CompositionRow>) {
        let mut order: Vec<&CompositionRow> = self.rows.iter().collect();
        // stable: equal keys keep sector order
        order.sort_by(|a, b| key(b).total_cmp(&key(a)));
        let top = order.iter().take(k).copied().collect();
        let bottom = order.iter().rev().take(k).copied().collect();
        (top, bottom)
    }

    pub fn row(&self, sector: &str) -> Option<&CompositionRow> {
        self.rows.iter().find(|r| r.sector == sector)
    }
}

/// Number of portfolios in the top `fraction` of `draws`.
pub fn top_count(draws: usize, fraction: f64) -> usize {
    // guard against 10000 * 0.01 landing a hair above 100
    let raw = draws as f64 * fraction;
    let count = (raw - raw * 1e-12).ceil() as usize;
    count.clamp(1, draws)
}

/// Sector composition of the `ceil(draws * top_fraction)` highest-Sharpe
/// portfolios. Positions are counted regardless of sign; with `sign_split`
/// the long and short shares are reported separately as well.
pub fn composition_report(
    portfolios: &[Portfolio],
    sharpes: &[f64],
    top_fraction: f64,
    map: &SectorMap,
    sign_split: bool,
) -> Result<CompositionTable> {
    if portfolios.len() != sharpes.len() || portfolios.is_empty() {
        return Err(Error::InvalidParameter(
            "composition needs one Sharpe ratio per portfolio".into(),
        ));
    }
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "top fraction {top_fraction} must lie in (0, 1]"
        )));
    }
    let selected = top_count(portfolios.len(), top_fraction);
    let mut order: Vec<usize> = (0..portfolios.len()).collect();
    order.sort_by(|&a, &b| sharpes[b].total_cmp(&sharpes[a]).then(a.cmp(&b)));

    let n = map.num_sectors();
    let mut long = vec![0usize; n];
    let mut short = vec![0usize; n];
    let mut positions = 0usize;
    for &idx in &order[..selected] {
        let p = &portfolios[idx];
        for (&a, &s) in p.assets.iter().zip(&p.signs) {
            let sector = map.sector_of(a);
            if s > 0 {
                long[sector] += 1;
            } else {
                short[sector] += 1;
            }
            positions += 1;
        }
    }

    let universe = map.num_assets() as f64;
    let sizes = map.sizes();
    let pct = |count: usize| 100.0 * count as f64 / positions as f64;
    let rows = (0..n)
        .map(|j| {
            let raw_pct = pct(long[j] + short[j]);
            let share = 100.0 * sizes[j] as f64 / universe;
            CompositionRow {
                sector: map.sectors()[j].clone(),
                raw_pct,
                ratio: raw_pct / share,
                long_pct: sign_split.then(|| pct(long[j])),
                short_pct: sign_split.then(|| pct(short[j])),
            }
        })
        .collect();
    Ok(CompositionTable {
        top_fraction,
        selected,
        rows,
    })
}
