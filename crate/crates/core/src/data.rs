//! Price panel ingestion, sector assignment and sector-averaged log returns.
//!
//! Prices arrive as a wide CSV (`date,<ticker1>,...`). Missing cells are
//! resolved by a [`MissingPolicy`]; whatever is still missing afterwards
//! removes the whole date so the panel stays dense.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sector vocabulary used for the original 268-equity universe. Shipped as a
/// reference list only; sector files may use any names.
pub const REFERENCE_SECTORS: [&str; 60] = [
    "Advertising",
    "Aerospace defence",
    "Agriculture",
    "Alcoholic beverages",
    "Asset management",
    "Auto manufacturers",
    "Banks - diversified",
    "Biotechnology",
    "Building products & equipment",
    "Capital markets",
    "Casinos",
    "Communications",
    "Computer hardware",
    "Conglomerates",
    "Consumer electronics",
    "Credit",
    "Department stores",
    "Diagnostics research",
    "Discount stores",
    "Drug manufacturers",
    "Electrical equipment",
    "Entertainment",
    "Farming heavy construction",
    "Footwear & accessories",
    "Gambling",
    "Gaming",
    "Gold",
    "Healthcare plans",
    "Home improvement retail",
    "Household",
    "Industrial metals mining",
    "Information technologies",
    "Insurance",
    "Internet",
    "Internet retail",
    "Leisure",
    "Lodging",
    "Medical devices",
    "Medical distribution",
    "Medical instruments supplies",
    "Non-alcoholic beverages",
    "Oil & Gas",
    "Packaged foods",
    "Packaging containers",
    "Publishing",
    "REIT",
    "Railroads",
    "Real estate",
    "Restaurants",
    "Retail",
    "Scientific instruments",
    "Semiconductors",
    "Software applications",
    "Software infrastructure",
    "Special industrial machinery",
    "Specialty chemicals",
    "Telecom",
    "Tobacco",
    "Utilities",
    "Waste management",
];

pub const DEFAULT_MAX_GAP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Carry the last close forward across runs of at most `max_gap` missing
    /// days. A ticker with a longer run is dropped from the panel.
    ForwardFill { max_gap: usize },
    /// Leave gaps alone; any date with a missing price is removed.
    Drop,
}

impl Default for MissingPolicy {
    fn default() -> Self {
        MissingPolicy::ForwardFill {
            max_gap: DEFAULT_MAX_GAP,
        }
    }
}

impl FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "drop" {
            return Ok(MissingPolicy::Drop);
        }
        if s == "forward-fill" {
            return Ok(MissingPolicy::default());
        }
        if let Some(gap) = s.strip_prefix("forward-fill:") {
            let max_gap = gap.parse::<usize>().map_err(|_| {
                Error::InvalidParameter(format!("bad max gap in missing policy {s:?}"))
            })?;
            return Ok(MissingPolicy::ForwardFill { max_gap });
        }
        Err(Error::InvalidParameter(format!(
            "unknown missing policy {s:?} (expected forward-fill:<maxgap> or drop)"
        )))
    }
}

impl std::fmt::Display for MissingPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MissingPolicy::ForwardFill { max_gap } => write!(f, "forward-fill:{max_gap}"),
            MissingPolicy::Drop => f.write_str("drop"),
        }
    }
}

/// What the missing-data policy did to the raw file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestAudit {
    pub raw_dates: usize,
    pub raw_tickers: usize,
    pub filled_cells: usize,
    pub dropped_tickers: Vec<String>,
    pub dropped_dates: usize,
}

/// Dense date x asset matrix of closing prices. Row `t` holds day `t` for
/// `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    prices: DMatrix<f64>,
    audit: IngestAudit,
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        if prices.nrows() != dates.len() || prices.ncols() != tickers.len() {
            return Err(Error::InvalidParameter(format!(
                "price matrix is {}x{} but there are {} dates and {} tickers",
                prices.nrows(),
                prices.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::InvalidParameter(
                "price panel needs at least two dates".into(),
            ));
        }
        if tickers.is_empty() {
            return Err(Error::InvalidParameter("price panel has no tickers".into()));
        }
        for w in dates.windows(2) {
            if w[1] == w[0] {
                return Err(Error::DuplicateDate(w[1].to_string()));
            }
            if w[1] < w[0] {
                return Err(Error::InvalidParameter(format!(
                    "dates not increasing at {}",
                    w[1]
                )));
            }
        }
        let mut seen = HashSet::new();
        for t in &tickers {
            if !seen.insert(t.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate ticker column {t}")));
            }
        }
        for (col, ticker) in tickers.iter().enumerate() {
            for (row, date) in dates.iter().enumerate() {
                let value = prices[(row, col)];
                if value <= 0.0 || !value.is_finite() {
                    return Err(Error::NonPositivePrice {
                        ticker: ticker.clone(),
                        date: date.to_string(),
                        value,
                    });
                }
            }
        }
        let audit = IngestAudit {
            raw_dates: dates.len(),
            raw_tickers: tickers.len(),
            ..IngestAudit::default()
        };
        Ok(PricePanel {
            dates,
            tickers,
            prices,
            audit,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn audit(&self) -> &IngestAudit {
        &self.audit
    }

    /// Number of return days `T` (one less than the number of price rows).
    pub fn num_days(&self) -> usize {
        self.dates.len() - 1
    }

    pub fn num_assets(&self) -> usize {
        self.tickers.len()
    }

    /// Sub-panel of the dates falling in `[start, end]`, inclusive.
    pub fn restrict(&self, start: NaiveDate, end: NaiveDate) -> Result<PricePanel> {
        let lo = self.dates.partition_point(|d| *d < start);
        let hi = self.dates.partition_point(|d| *d <= end);
        if hi < lo + 2 {
            return Err(Error::InvalidParameter(format!(
                "period {start}..{end} covers fewer than two trading days"
            )));
        }
        Ok(PricePanel {
            dates: self.dates[lo..hi].to_vec(),
            tickers: self.tickers.clone(),
            prices: self.prices.rows(lo, hi - lo).into_owned(),
            audit: self.audit.clone(),
        })
    }

    /// Per-asset daily log returns, `T x N`.
    pub fn log_returns(&self) -> DMatrix<f64> {
        let rows = self.num_days();
        DMatrix::from_fn(rows, self.num_assets(), |t, i| {
            (self.prices[(t + 1, i)] / self.prices[(t, i)]).ln()
        })
    }
}

pub fn load_prices(path: impl AsRef<Path>, policy: MissingPolicy) -> Result<PricePanel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_prices(file, policy)
}

pub fn read_prices<R: Read>(reader: R, policy: MissingPolicy) -> Result<PricePanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Malformed {
            line: 1,
            message: "header needs a date column and at least one ticker".into(),
        });
    }
    let tickers: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    {
        let mut seen = HashSet::new();
        for t in &tickers {
            if t.is_empty() || !seen.insert(t.as_str()) {
                return Err(Error::Malformed {
                    line: 1,
                    message: format!("empty or duplicate ticker column {t:?}"),
                });
            }
        }
    }

    let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| {
            Error::Malformed {
                line,
                message: format!("bad date {:?}: {e}", &record[0]),
            }
        })?;
        let mut cells = Vec::with_capacity(tickers.len());
        for (cell, ticker) in record.iter().skip(1).zip(&tickers) {
            cells.push(parse_price(cell, ticker, date, line)?);
        }
        rows.push((date, cells));
    }

    rows.sort_by_key(|(d, _)| *d);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::DuplicateDate(w[0].0.to_string()));
        }
    }

    let mut audit = IngestAudit {
        raw_dates: rows.len(),
        raw_tickers: tickers.len(),
        ..IngestAudit::default()
    };

    let mut keep_col = vec![true; tickers.len()];
    if let MissingPolicy::ForwardFill { max_gap } = policy {
        for col in 0..tickers.len() {
            match forward_fill_column(&mut rows, col, max_gap) {
                Some(filled) => audit.filled_cells += filled,
                None => {
                    log::warn!(
                        "dropping {}: more than {max_gap} consecutive missing prices",
                        tickers[col]
                    );
                    keep_col[col] = false;
                    audit.dropped_tickers.push(tickers[col].clone());
                }
            }
        }
    }

    let kept: Vec<usize> = (0..tickers.len()).filter(|&c| keep_col[c]).collect();
    let mut dates = Vec::with_capacity(rows.len());
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for (date, cells) in rows {
        let values: Option<Vec<f64>> = kept.iter().map(|&c| cells[c]).collect();
        match values {
            Some(v) => {
                dates.push(date);
                dense.push(v);
            }
            None => audit.dropped_dates += 1,
        }
    }
    if audit.dropped_dates > 0 {
        log::info!("dropped {} dates with missing prices", audit.dropped_dates);
    }

    let kept_tickers: Vec<String> = kept.iter().map(|&c| tickers[c].clone()).collect();
    let prices = DMatrix::from_fn(dense.len(), kept.len(), |r, c| dense[r][c]);
    let mut panel = PricePanel::new(dates, kept_tickers, prices)?;
    panel.audit = audit;
    Ok(panel)
}

fn parse_price(cell: &str, ticker: &str, date: NaiveDate, line: u64) -> Result<Option<f64>> {
    if cell.is_empty()
        || cell.eq_ignore_ascii_case("na")
        || cell.eq_ignore_ascii_case("nan")
        || cell.eq_ignore_ascii_case("null")
    {
        return Ok(None);
    }
    let value: f64 = cell.parse().map_err(|_| Error::Malformed {
        line,
        message: format!("bad price {cell:?} for {ticker}"),
    })?;
    if !value.is_finite() {
        return Err(Error::Malformed {
            line,
            message: format!("non-finite price {cell:?} for {ticker}"),
        });
    }
    if value <= 0.0 {
        return Err(Error::NonPositivePrice {
            ticker: ticker.to_owned(),
            date: date.to_string(),
            value,
        });
    }
    Ok(Some(value))
}

/// Fills runs of missing values no longer than `max_gap` with the previous
/// close. Leading gaps have no prior close and are left missing. Returns the
/// number of filled cells, or `None` if some run exceeds `max_gap`.
fn forward_fill_column(
    rows: &mut [(NaiveDate, Vec<Option<f64>>)],
    col: usize,
    max_gap: usize,
) -> Option<usize> {
    let mut run = 0;
    for (_, cells) in rows.iter() {
        if cells[col].is_none() {
            run += 1;
            if run > max_gap {
                return None;
            }
        } else {
            run = 0;
        }
    }

    let mut filled = 0;
    let mut last = None;
    for (_, cells) in rows.iter_mut() {
        match cells[col] {
            Some(v) => last = Some(v),
            None => {
                if let Some(v) = last {
                    cells[col] = Some(v);
                    filled += 1;
                }
            }
        }
    }
    Some(filled)
}

/// Partition of the panel's assets into sectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorMap {
    sectors: Vec<String>,
    asset_sector: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl SectorMap {
    /// Builds the map for `tickers` (panel column order) from
    /// `(ticker, sector)` pairs. Sectors are ordered by first appearance in
    /// `assignments`; pairs naming tickers outside the panel are ignored.
    pub fn from_assignments<S: AsRef<str>, T: AsRef<str>>(
        tickers: &[String],
        assignments: &[(S, T)],
    ) -> Result<Self> {
        let mut lookup: HashMap<&str, &str> = HashMap::with_capacity(assignments.len());
        let mut order: Vec<&str> = Vec::new();
        for (ticker, sector) in assignments {
            let (ticker, sector) = (ticker.as_ref(), sector.as_ref());
            if lookup.insert(ticker, sector).is_some() {
                return Err(Error::DuplicateTicker(ticker.to_owned()));
            }
            if !order.contains(&sector) {
                order.push(sector);
            }
        }

        let mut used = vec![false; order.len()];
        let mut raw_sector = Vec::with_capacity(tickers.len());
        for ticker in tickers {
            let sector = lookup
                .get(ticker.as_str())
                .ok_or_else(|| Error::UnmappedTicker(ticker.clone()))?;
            let idx = order.iter().position(|s| s == sector).expect("sector recorded");
            used[idx] = true;
            raw_sector.push(idx);
        }

        let mut remap = vec![usize::MAX; order.len()];
        let mut sectors = Vec::new();
        for (idx, name) in order.iter().enumerate() {
            if used[idx] {
                remap[idx] = sectors.len();
                sectors.push((*name).to_owned());
            }
        }
        let asset_sector: Vec<usize> = raw_sector.iter().map(|&s| remap[s]).collect();
        let mut members = vec![Vec::new(); sectors.len()];
        for (asset, &s) in asset_sector.iter().enumerate() {
            members[s].push(asset);
        }
        Ok(SectorMap {
            sectors,
            asset_sector,
            members,
        })
    }

    pub fn sectors(&self) -> &[String] {
        &self.sectors
    }

    pub fn num_sectors(&self) -> usize {
        self.sectors.len()
    }

    pub fn num_assets(&self) -> usize {
        self.asset_sector.len()
    }

    pub fn sector_of(&self, asset: usize) -> usize {
        self.asset_sector[asset]
    }

    pub fn members(&self, sector: usize) -> &[usize] {
        &self.members[sector]
    }

    /// Sector sizes `k_i`.
    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

pub fn load_sector_map(path: impl AsRef<Path>, panel: &PricePanel) -> Result<SectorMap> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sector_map(file, panel.tickers())
}

pub fn read_sector_map<R: Read>(reader: R, tickers: &[String]) -> Result<SectorMap> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?;
    if headers.len() != 2
        || !headers[0].eq_ignore_ascii_case("ticker")
        || !headers[1].eq_ignore_ascii_case("sector")
    {
        return Err(Error::Malformed {
            line: 1,
            message: "sector file header must be `ticker,sector`".into(),
        });
    }
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record[0].is_empty() || record[1].is_empty() {
            return Err(Error::Malformed {
                line: record.position().map_or(0, |p| p.line()),
                message: "empty ticker or sector".into(),
            });
        }
        pairs.push((record[0].to_owned(), record[1].to_owned()));
    }
    SectorMap::from_assignments(tickers, &pairs)
}

/// Equal-weighted daily sector log returns, one row per day `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorReturnsPanel {
    dates: Vec<NaiveDate>,
    sectors: Vec<String>,
    returns: DMatrix<f64>,
}

impl SectorReturnsPanel {
    /// Wraps an existing `T x n` return matrix. `dates[t - 1]` is the date of
    /// day `t`.
    pub fn new(dates: Vec<NaiveDate>, sectors: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        if returns.nrows() != dates.len() || returns.ncols() != sectors.len() {
            return Err(Error::InvalidParameter(format!(
                "return matrix is {}x{} but there are {} dates and {} sectors",
                returns.nrows(),
                returns.ncols(),
                dates.len(),
                sectors.len()
            )));
        }
        if let Some(bad) = returns.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sector return {bad}")));
        }
        Ok(SectorReturnsPanel {
            dates,
            sectors,
            returns,
        })
    }

    /// Panel with synthetic consecutive dates, for callers that only have a
    /// return matrix.
    pub fn from_matrix(returns: DMatrix<f64>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = start.iter_days().take(returns.nrows()).collect();
        let sectors = (0..returns.ncols()).map(|j| format!("S{}", j + 1)).collect();
        SectorReturnsPanel::new(dates, sectors, returns)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn sectors(&self) -> &[String] {
        &self.sectors
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    /// `T`, the number of return days.
    pub fn num_days(&self) -> usize {
        self.returns.nrows()
    }

    pub fn num_sectors(&self) -> usize {
        self.returns.ncols()
    }

    /// Date of return day `t` (1-based).
    pub fn date_of(&self, t: usize) -> NaiveDate {
        self.dates[t - 1]
    }

    /// Returns of `sector` on days `first..=last` (1-based, inclusive).
    pub fn window(&self, sector: usize, first: usize, last: usize) -> &[f64] {
        // column-major storage: each sector is one contiguous column
        let rows = self.returns.nrows();
        &self.returns.as_slice()[sector * rows + first - 1..sector * rows + last]
    }
}

pub fn sector_returns(panel: &PricePanel, map: &SectorMap) -> Result<SectorReturnsPanel> {
    if map.num_assets() != panel.num_assets() {
        return Err(Error::InvalidParameter(format!(
            "sector map covers {} assets, panel has {}",
            map.num_assets(),
            panel.num_assets()
        )));
    }
    let prices = panel.prices();
    let days = panel.num_days();
    let mut returns = DMatrix::zeros(days, map.num_sectors());
    for j in 0..map.num_sectors() {
        let members = map.members(j);
        let size = members.len() as f64;
        for t in 0..days {
            let total: f64 = members
                .iter()
                .map(|&i| (prices[(t + 1, i)] / prices[(t, i)]).ln())
                .sum();
            returns[(t, j)] = total / size;
        }
    }
    SectorReturnsPanel::new(
        panel.dates()[1..].to_vec(),
        map.sectors().to_vec(),
        returns,
    )
}
