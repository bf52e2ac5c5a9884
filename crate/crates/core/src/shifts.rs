//! Rolling market-shift estimators over a sector returns panel.
//!
//! Every estimator compares the `tau` days ending at `t` with the `tau` days
//! starting at `t + 1`, for `t = tau..=T - tau`. Day indices are 1-based to
//! match the returns panel.
//!
//! - `S`: L1 distance between the vectors of window sums.
//! - `W`: sum over sectors of the Wasserstein distance between the two
//!   windows viewed as distributions.
//! - `C`: leading eigenvalue of the correlation matrix over the joined
//!   `2 * tau` days, divided by the number of sectors.
//! - rank family: Kendall tau, Spearman or Pearson between the two vectors of
//!   window sums.
//!
//! Each `t` is computed independently and the results are assembled in index
//! order, so the output does not depend on the rayon pool size.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SectorReturnsPanel;
use crate::error::{Error, Result};
use crate::rank::{kendall_p_value, kendall_tau, spearman};
use crate::stats::{pearson, quantile_sorted};
use crate::wasserstein::wasserstein_windows;

pub const DEFAULT_TAU: usize = 30;

const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    tau: usize,
}

impl WindowConfig {
    /// Checks `1 <= tau <= T / 2` for a panel with `num_days` return days.
    pub fn new(tau: usize, num_days: usize) -> Result<Self> {
        if tau == 0 || 2 * tau > num_days {
            return Err(Error::InvalidParameter(format!(
                "window length {tau} needs 1 <= tau <= T/2 with T = {num_days}"
            )));
        }
        Ok(WindowConfig { tau })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// The `t` values at which every estimator is defined.
    pub fn t_range(&self, num_days: usize) -> std::ops::RangeInclusive<usize> {
        self.tau..=num_days - self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    S,
    W,
    C,
    KendallTau,
    Spearman,
    Pearson,
    KendallPValue,
}

impl Measure {
    pub fn name(&self) -> &'static str {
        match self {
            Measure::S => "S",
            Measure::W => "W",
            Measure::C => "C",
            Measure::KendallTau => "KendallTau",
            Measure::Spearman => "Spearman",
            Measure::Pearson => "Pearson",
            Measure::KendallPValue => "KendallPValue",
        }
    }
}

/// Rank-family coefficient to compute between adjacent window sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankKind {
    KendallTau,
    Spearman,
    Pearson,
}

/// One estimator evaluated on `t = tau..=T - tau`. Undefined values (rank
/// coefficients of a constant vector) are stored as NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSeries {
    pub measure: Measure,
    pub tau: usize,
    pub t_index: Vec<usize>,
    pub values: Vec<f64>,
    pub threshold: Option<f64>,
    /// `t` values whose value is strictly above `threshold`.
    pub breaches: Vec<usize>,
    pub diagnostics: Vec<String>,
}

impl ShiftSeries {
    fn new(measure: Measure, cfg: WindowConfig, num_days: usize, values: Vec<f64>) -> Self {
        ShiftSeries {
            measure,
            tau: cfg.tau,
            t_index: cfg.t_range(num_days).collect(),
            values,
            threshold: None,
            breaches: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_breach(&self, t: usize) -> bool {
        self.breaches.binary_search(&t).is_ok()
    }
}

/// Rank coefficient series, with its p-value series for Kendall tau.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSeries {
    pub coefficient: ShiftSeries,
    pub p_values: Option<ShiftSeries>,
}

/// Per-sector sums of returns over days `t - tau + 1..=t`.
pub fn monthly_sums(returns: &SectorReturnsPanel, cfg: WindowConfig, t: usize) -> Result<Vec<f64>> {
    let num_days = returns.num_days();
    if t < cfg.tau || t > num_days {
        return Err(Error::IndexOutOfRange {
            index: t,
            lo: cfg.tau,
            hi: num_days,
        });
    }
    Ok(window_sums(returns, cfg.tau, t))
}

fn window_sums(returns: &SectorReturnsPanel, tau: usize, t: usize) -> Vec<f64> {
    (0..returns.num_sectors())
        .map(|j| returns.window(j, t + 1 - tau, t).iter().sum())
        .collect()
}

fn sweep<F>(returns: &SectorReturnsPanel, cfg: WindowConfig, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let range: Vec<usize> = cfg.t_range(returns.num_days()).collect();
    range.into_par_iter().map(f).collect()
}

pub fn s_series(returns: &SectorReturnsPanel, cfg: WindowConfig) -> ShiftSeries {
    let tau = cfg.tau;
    let values = sweep(returns, cfg, |t| {
        let before = window_sums(returns, tau, t);
        let after = window_sums(returns, tau, t + tau);
        before.iter().zip(&after).map(|(a, b)| (a - b).abs()).sum()
    });
    ShiftSeries::new(Measure::S, cfg, returns.num_days(), values)
}

pub fn w_series(returns: &SectorReturnsPanel, cfg: WindowConfig) -> ShiftSeries {
    let tau = cfg.tau;
    let values = sweep(returns, cfg, |t| {
        let mut scratch = (Vec::with_capacity(tau), Vec::with_capacity(tau));
        (0..returns.num_sectors())
            .map(|j| {
                wasserstein_windows(
                    returns.window(j, t + 1 - tau, t),
                    returns.window(j, t + 1, t + tau),
                    &mut scratch,
                )
            })
            .sum()
    });
    ShiftSeries::new(Measure::W, cfg, returns.num_days(), values)
}

/// Correlation matrix over the joined window `t - tau + 1..=t + tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowCorrelation {
    pub psi: DMatrix<f64>,
    /// Sectors with zero variance in the window; their off-diagonal entries
    /// are set to 0.
    pub constant_sectors: Vec<usize>,
}

pub fn rolling_correlation(
    returns: &SectorReturnsPanel,
    cfg: WindowConfig,
    t: usize,
) -> Result<WindowCorrelation> {
    let num_days = returns.num_days();
    if t < cfg.tau || t + cfg.tau > num_days {
        return Err(Error::IndexOutOfRange {
            index: t,
            lo: cfg.tau,
            hi: num_days - cfg.tau,
        });
    }
    let first = t + 1 - cfg.tau;
    let last = t + cfg.tau;
    let columns: Vec<&[f64]> = (0..returns.num_sectors())
        .map(|j| returns.window(j, first, last))
        .collect();
    Ok(correlation_matrix(&columns))
}

/// Pearson correlation matrix of equal-length columns; zero-variance columns
/// are uncorrelated with everything else.
pub(crate) fn correlation_matrix(columns: &[&[f64]]) -> WindowCorrelation {
    let n = columns.len();
    let len = columns.first().map_or(0, |c| c.len()) as f64;
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / len;
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let sum_sq: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>())
        .collect();
    let constant_sectors: Vec<usize> = (0..n).filter(|&j| sum_sq[j] == 0.0).collect();

    let mut psi = DMatrix::identity(n, n);
    for j in 0..n {
        for k in j + 1..n {
            let r = if sum_sq[j] == 0.0 || sum_sq[k] == 0.0 {
                0.0
            } else {
                let dot: f64 = centered[j].iter().zip(&centered[k]).map(|(a, b)| a * b).sum();
                (dot / (sum_sq[j] * sum_sq[k]).sqrt()).clamp(-1.0, 1.0)
            };
            psi[(j, k)] = r;
            psi[(k, j)] = r;
        }
    }
    WindowCorrelation {
        psi,
        constant_sectors,
    }
}

/// Eigenvalues of a symmetric matrix, descending. `None` if the solver does
/// not converge.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Option<Vec<f64>> {
    let eig = m.clone().try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Some(values)
}

pub fn c_series(returns: &SectorReturnsPanel, cfg: WindowConfig) -> Result<ShiftSeries> {
    let n = returns.num_sectors() as f64;
    let range: Vec<usize> = cfg.t_range(returns.num_days()).collect();
    let results: Vec<Result<(f64, bool)>> = range
        .into_par_iter()
        .map(|t| {
            let window = rolling_correlation(returns, cfg, t)?;
            let lambda = symmetric_eigenvalues(&window.psi)
                .ok_or(Error::EigenNonConvergence(t))?[0];
            // rounding can put lambda a hair outside [1, n]
            Ok(((lambda / n).clamp(1.0 / n, 1.0), !window.constant_sectors.is_empty()))
        })
        .collect();

    let mut values = Vec::with_capacity(results.len());
    let mut degenerate = 0usize;
    for r in results {
        let (v, flagged) = r?;
        values.push(v);
        degenerate += usize::from(flagged);
    }
    let mut series = ShiftSeries::new(Measure::C, cfg, returns.num_days(), values);
    if degenerate > 0 {
        log::warn!("{degenerate} windows contain a zero-variance sector; correlations set to 0");
        series.diagnostics.push(format!(
            "{degenerate} windows contain a zero-variance sector; correlations set to 0"
        ));
    }
    Ok(series)
}

pub fn rank_series(
    returns: &SectorReturnsPanel,
    cfg: WindowConfig,
    kind: RankKind,
) -> Result<RankSeries> {
    let n = returns.num_sectors();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "rank correlation needs at least two sectors".into(),
        ));
    }
    let tau = cfg.tau;
    let pairs: Vec<(f64, f64)> = {
        let range: Vec<usize> = cfg.t_range(returns.num_days()).collect();
        range
            .into_par_iter()
            .map(|t| {
                let before = window_sums(returns, tau, t);
                let after = window_sums(returns, tau, t + tau);
                let coef = match kind {
                    RankKind::KendallTau => kendall_tau(&before, &after),
                    RankKind::Spearman => spearman(&before, &after),
                    RankKind::Pearson => pearson(&before, &after),
                }
                .unwrap_or(f64::NAN);
                let p = match kind {
                    RankKind::KendallTau => kendall_p_value(coef, n),
                    _ => f64::NAN,
                };
                (coef, p)
            })
            .collect()
    };

    let measure = match kind {
        RankKind::KendallTau => Measure::KendallTau,
        RankKind::Spearman => Measure::Spearman,
        RankKind::Pearson => Measure::Pearson,
    };
    let (values, pvals): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let undefined = values.iter().filter(|v| v.is_nan()).count();
    let mut coefficient = ShiftSeries::new(measure, cfg, returns.num_days(), values);
    if undefined > 0 {
        coefficient
            .diagnostics
            .push(format!("{undefined} windows with a constant sum vector"));
    }
    let p_values = (kind == RankKind::KendallTau)
        .then(|| ShiftSeries::new(Measure::KendallPValue, cfg, returns.num_days(), pvals));
    Ok(RankSeries {
        coefficient,
        p_values,
    })
}

/// Marks the values above the empirical `1 - percentile` quantile
/// (linear interpolation, strict inequality). NaN values are ignored.
pub fn annotate_threshold(mut series: ShiftSeries, percentile: f64) -> Result<ShiftSeries> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold percentile {percentile} must lie in (0, 1)"
        )));
    }
    let mut finite: Vec<f64> = series.values.iter().copied().filter(|v| !v.is_nan()).collect();
    series.breaches.clear();
    if finite.is_empty() {
        series.threshold = None;
        return Ok(series);
    }
    finite.sort_by(f64::total_cmp);
    let cut = quantile_sorted(&finite, 1.0 - percentile);
    series.threshold = Some(cut);
    series.breaches = series
        .t_index
        .iter()
        .zip(&series.values)
        .filter(|(_, &v)| v > cut)
        .map(|(&t, _)| t)
        .collect();
    Ok(series)
}
