use nalgebra::DMatrix;
use proptest::prelude::*;

use sectorshift_core::data::{sector_returns, PricePanel, SectorMap, SectorReturnsPanel};
use sectorshift_core::network::{read_edge_csv, to_edge_csv};
use sectorshift_core::rank::kendall_tau;
use sectorshift_core::report::{sharpe_quantiles, QUANTILE_LEVELS};
use sectorshift_core::shifts::{self, Measure, RankKind, ShiftSeries};
use sectorshift_core::synthetic::business_days;
use sectorshift_core::{
    annotate_threshold, compare_spaces, kruskal_mst, wasserstein_1d, EmpiricalDistribution,
    Weighting, WindowConfig,
};

fn samples(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 1..max)
}

/// A `rows x cols` return panel with entries in `[-0.05, 0.05]`.
fn returns_panel(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-0.05f64..0.05, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn symmetric_weights(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let mut m = DMatrix::from_vec(n, n, v);
        for i in 0..n {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        m
    })
}

fn sign(a: f64, b: f64) -> i64 {
    a.partial_cmp(&b).unwrap() as i64
}

fn dist(xs: &[f64]) -> EmpiricalDistribution {
    EmpiricalDistribution::new(xs.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn wasserstein_is_a_metric(a in samples(20), b in samples(20), c in samples(20)) {
        let (da, db, dc) = (dist(&a), dist(&b), dist(&c));
        let ab = wasserstein_1d(&da, &db);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - wasserstein_1d(&db, &da)).abs() <= 1e-12);
        prop_assert_eq!(wasserstein_1d(&da, &da), 0.0);
        prop_assert!(ab <= wasserstein_1d(&da, &dc) + wasserstein_1d(&dc, &db) + 1e-12);
    }

    #[test]
    fn wasserstein_bounds_the_mean_gap(a in samples(30), b in samples(30)) {
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let w = wasserstein_1d(&dist(&a), &dist(&b));
        prop_assert!(w + 1e-12 >= (mean(&a) - mean(&b)).abs());
    }

    #[test]
    fn wasserstein_scales_and_ignores_shifts(a in samples(20), b in samples(20), k in -3.0f64..3.0, c in -10.0f64..10.0) {
        let w = wasserstein_1d(&dist(&a), &dist(&b));
        let ta: Vec<f64> = a.iter().map(|x| k * x + c).collect();
        let tb: Vec<f64> = b.iter().map(|x| k * x + c).collect();
        let wt = wasserstein_1d(&dist(&ta), &dist(&tb));
        prop_assert!((wt - k.abs() * w).abs() <= 1e-9 * (1.0 + w));
    }

    #[test]
    fn kendall_matches_pair_counting_with_ties(pairs in prop::collection::vec((0i32..6, 0i32..6), 2..40)) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let n = x.len();
        let mut score = 0i64;
        for i in 0..n {
            for j in i + 1..n {
                score += sign(x[i], x[j]) * sign(y[i], y[j]);
            }
        }
        let constant = |v: &[f64]| v.iter().all(|&e| e == v[0]);
        match kendall_tau(&x, &y) {
            None => prop_assert!(constant(&x) || constant(&y)),
            Some(tau) => prop_assert_eq!(tau, score as f64 / (n * (n - 1) / 2) as f64),
        }
    }

    #[test]
    fn compare_spaces_is_complementary(x in samples(60), y in samples(60)) {
        let p = compare_spaces(&x, &y).unwrap();
        let q = compare_spaces(&y, &x).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + q - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn quantiles_are_nondecreasing(xs in prop::collection::vec(-4.0f64..4.0, 1..300)) {
        let q = sharpe_quantiles(&xs).unwrap();
        let values: Vec<f64> = QUANTILE_LEVELS.iter().map(|l| q[&format!("{l}")]).collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn mst_has_n_minus_one_edges_spanning_all_nodes(w in (2usize..9).prop_flat_map(symmetric_weights)) {
        let n = w.nrows();
        let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let tree = kruskal_mst(&w, &names, Weighting::Correlation).unwrap();
        prop_assert_eq!(tree.edges.len(), n - 1);
        prop_assert!(tree.degrees().iter().all(|&d| d >= 1));
    }

    #[test]
    fn mst_is_invariant_under_increasing_transforms(w in (2usize..9).prop_flat_map(symmetric_weights)) {
        let n = w.nrows();
        let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let tree = kruskal_mst(&w, &names, Weighting::Correlation).unwrap();
        let warped = kruskal_mst(&w.map(f64::exp), &names, Weighting::Correlation).unwrap();
        prop_assert_eq!(tree.edge_set(), warped.edge_set());
    }

    #[test]
    fn edge_csv_round_trip_is_stable(w in (2usize..9).prop_flat_map(symmetric_weights)) {
        let n = w.nrows();
        let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let tree = kruskal_mst(&w, &names, Weighting::Distance).unwrap();
        let text = to_edge_csv(&tree);
        let back = read_edge_csv(text.as_bytes()).unwrap();
        prop_assert_eq!(back.edge_set(), tree.edge_set());
        prop_assert_eq!(to_edge_csv(&back), text);
    }

    #[test]
    fn affine_maps_scale_s_and_w_and_keep_c_and_k(m in returns_panel(40, 4), k in 0.1f64..3.0, c in -0.01f64..0.01) {
        let base = SectorReturnsPanel::from_matrix(m.clone()).unwrap();
        let moved = SectorReturnsPanel::from_matrix(m.map(|v| k * v + c)).unwrap();
        let cfg = WindowConfig::new(8, 40).unwrap();
        let close = |a: &[f64], b: &[f64], scale: f64| {
            a.iter().zip(b).all(|(x, y)| (scale * x - y).abs() <= 1e-9 * (1.0 + y.abs()))
        };
        prop_assert!(close(&shifts::s_series(&base, cfg).values, &shifts::s_series(&moved, cfg).values, k));
        prop_assert!(close(&shifts::w_series(&base, cfg).values, &shifts::w_series(&moved, cfg).values, k));
        prop_assert!(close(&shifts::c_series(&base, cfg).unwrap().values, &shifts::c_series(&moved, cfg).unwrap().values, 1.0));
        let kb = shifts::rank_series(&base, cfg, RankKind::KendallTau).unwrap().coefficient.values;
        let km = shifts::rank_series(&moved, cfg, RankKind::KendallTau).unwrap().coefficient.values;
        prop_assert_eq!(kb, km);
    }

    #[test]
    fn threshold_flags_at_most_the_tail(values in prop::collection::vec(-1.0f64..1.0, 30..200), pct in 0.01f64..0.5) {
        let series = ShiftSeries {
            measure: Measure::S,
            tau: 1,
            t_index: (1..=values.len()).collect(),
            values,
            threshold: None,
            breaches: Vec::new(),
            diagnostics: Vec::new(),
        };
        let series = annotate_threshold(series, pct).unwrap();
        let cut = series.threshold.unwrap();
        let len = series.len();
        prop_assert!(series.breaches.len() as f64 <= (pct * len as f64).ceil() + 1.0);
        for (t, v) in series.t_index.iter().zip(&series.values) {
            prop_assert_eq!(series.is_breach(*t), *v > cut);
        }
    }

    #[test]
    fn sector_returns_ignore_price_scale_and_member_order(
        prices in prop::collection::vec(1.0f64..100.0, 6 * 4),
        scale in prop::collection::vec(0.01f64..100.0, 4),
    ) {
        let dates = business_days(chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 6);
        let tickers: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
        let raw = DMatrix::from_vec(6, 4, prices);
        let scaled = DMatrix::from_fn(6, 4, |r, c| raw[(r, c)] * scale[c]);
        // the same assets listed in the reverse column order
        let swapped = DMatrix::from_fn(6, 4, |r, c| raw[(r, 3 - c)]);
        let rev_tickers: Vec<String> = tickers.iter().rev().cloned().collect();

        let assign = [("A", "X"), ("B", "Y"), ("C", "X"), ("D", "Y")];
        let run = |m: DMatrix<f64>, names: &[String]| {
            let panel = PricePanel::new(dates.clone(), names.to_vec(), m).unwrap();
            let map = SectorMap::from_assignments(names, &assign).unwrap();
            let r = sector_returns(&panel, &map).unwrap();
            let mut cols: Vec<(String, Vec<f64>)> = r
                .sectors()
                .iter()
                .enumerate()
                .map(|(j, s)| (s.clone(), r.returns().column(j).iter().copied().collect()))
                .collect();
            cols.sort_by(|a, b| a.0.cmp(&b.0));
            cols
        };
        let base = run(raw.clone(), &tickers);
        for other in [run(scaled, &tickers), run(swapped, &rev_tickers)] {
            for ((s1, a), (s2, b)) in base.iter().zip(&other) {
                prop_assert_eq!(s1, s2);
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }
}
