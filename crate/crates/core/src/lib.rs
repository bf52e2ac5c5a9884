//! Sector-level market structure analytics for daily equity prices.
//!
//! - [`data`]: price panels, sector maps and sector-averaged log returns.
//! - [`shifts`]: rolling shift estimators (window-sum L1, Wasserstein,
//!   leading correlation eigenvalue, rank correlations) with threshold
//!   annotation.
//! - [`network`]: full-period correlation, chord distance and Kruskal MSTs.
//! - [`sampling`] and [`report`]: Monte Carlo portfolio sampling with Sharpe
//!   quantiles, cross-space comparisons and top-portfolio sector composition.

pub mod data;
pub mod error;
pub mod network;
pub mod rank;
pub mod report;
pub mod sampling;
pub mod shifts;
pub mod stats;
pub mod synthetic;
pub mod wasserstein;

pub use data::{
    load_prices, load_sector_map, sector_returns, MissingPolicy, PricePanel, SectorMap,
    SectorReturnsPanel,
};
pub use error::{Error, Result};
pub use network::{full_correlation, kruskal_mst, FullPeriodCorrelation, SpanningTree, Weighting};
pub use report::{compare_spaces, composition_report, SamplingReport};
pub use sampling::{
    draw_portfolio, portfolio_sharpe, run_experiment, Portfolio, SampleSpaceSpec, SharpeInputs,
};
pub use shifts::{
    annotate_threshold, c_series, monthly_sums, rank_series, rolling_correlation, s_series,
    w_series, RankKind, ShiftSeries, WindowConfig,
};
pub use wasserstein::{wasserstein_1d, EmpiricalDistribution};
