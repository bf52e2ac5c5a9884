//! Seeded synthetic equity universes: a market factor, one factor per sector
//! and idiosyncratic noise, compounded into geometric price paths.

use std::io::Write;

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{PricePanel, SectorMap, REFERENCE_SECTORS};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub assets: usize,
    pub sectors: usize,
    /// Number of return days `T`; the panel has `T + 1` price rows.
    pub days: usize,
    pub seed: u64,
    pub drift: f64,
    pub market_vol: f64,
    pub sector_vol: f64,
    pub idio_vol: f64,
    /// Extra daily drift per sector, indexed by sector.
    pub sector_drift: Vec<f64>,
    pub start: NaiveDate,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            assets: 268,
            sectors: 60,
            days: 4780,
            seed: 2024,
            drift: 3e-4,
            market_vol: 0.008,
            sector_vol: 0.006,
            idio_vol: 0.015,
            sector_drift: Vec::new(),
            start: NaiveDate::from_ymd_opt(2005, 1, 3).expect("valid date"),
        }
    }
}

/// `count` consecutive weekdays from `start` (inclusive if a weekday).
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(count)
        .collect()
}

pub fn sector_name(j: usize, sectors: usize) -> String {
    if sectors <= REFERENCE_SECTORS.len() {
        REFERENCE_SECTORS[j].to_owned()
    } else {
        format!("Sector {j}")
    }
}

/// Asset `i` belongs to sector `i % sectors`.
pub fn synthetic_universe(cfg: &SyntheticConfig) -> Result<(PricePanel, SectorMap)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let rows = cfg.days + 1;
    let mut prices = DMatrix::zeros(rows, cfg.assets);
    let mut log_level = vec![100f64.ln(); cfg.assets];
    for i in 0..cfg.assets {
        prices[(0, i)] = 100.0;
    }
    let mut sector_shock = vec![0.0; cfg.sectors];
    for t in 1..rows {
        let market = cfg.market_vol * std_normal.sample(&mut rng);
        for s in sector_shock.iter_mut() {
            *s = cfg.sector_vol * std_normal.sample(&mut rng);
        }
        for (i, level) in log_level.iter_mut().enumerate() {
            let s = i % cfg.sectors;
            let extra = cfg.sector_drift.get(s).copied().unwrap_or(0.0);
            let r = cfg.drift + extra + market + sector_shock[s]
                + cfg.idio_vol * std_normal.sample(&mut rng);
            *level += r;
            prices[(t, i)] = level.exp();
        }
    }
    let tickers: Vec<String> = (0..cfg.assets).map(|i| format!("SYN{i:03}")).collect();
    let pairs: Vec<(String, String)> = tickers
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), sector_name(i % cfg.sectors, cfg.sectors)))
        .collect();
    let panel = PricePanel::new(business_days(cfg.start, rows), tickers.clone(), prices)?;
    let map = SectorMap::from_assignments(&tickers, &pairs)?;
    Ok((panel, map))
}

/// Writes the panel in the `date,<ticker>...` layout read by
/// [`crate::data::read_prices`]. Prices keep full precision.
pub fn write_prices_csv<W: Write>(panel: &PricePanel, out: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["date".to_owned()];
    header.extend(panel.tickers().iter().cloned());
    wtr.write_record(&header)?;
    for (r, date) in panel.dates().iter().enumerate() {
        let mut row = vec![date.to_string()];
        row.extend(panel.prices().row(r).iter().map(|p| format!("{p}")));
        wtr.write_record(&row)?;
    }
    wtr.flush()
}

pub fn write_sector_csv<W: Write>(panel: &PricePanel, map: &SectorMap, out: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["ticker", "sector"])?;
    for (i, t) in panel.tickers().iter().enumerate() {
        wtr.write_record([t.as_str(), map.sectors()[map.sector_of(i)].as_str()])?;
    }
    wtr.flush()
}
