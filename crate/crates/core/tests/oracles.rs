use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use sectorshift_core::data::{PricePanel, SectorMap, SectorReturnsPanel};
use sectorshift_core::network::{self, GraphFormat};
use sectorshift_core::report::compare_spaces;
use sectorshift_core::sampling::{self, LongShortSpace, Period, Scheme, Style};
use sectorshift_core::shifts::{self, symmetric_eigenvalues};
use sectorshift_core::synthetic::{synthetic_universe, SyntheticConfig};
use sectorshift_core::{
    full_correlation, kruskal_mst, rolling_correlation, run_experiment, wasserstein_1d,
    EmpiricalDistribution, SampleSpaceSpec, Weighting, WindowConfig,
};

fn gaussian_panel(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 0.01).unwrap();
    DMatrix::from_fn(rows, cols, |_, _| normal.sample(&mut rng))
}

/// Integral of `|F_a(x) - F_b(x)|` over the real line, with empirical CDFs.
fn cdf_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut points: Vec<f64> = a.iter().chain(b).copied().collect();
    points.sort_by(f64::total_cmp);
    let cdf = |xs: &[f64], x: f64| xs.iter().filter(|&&v| v <= x).count() as f64 / xs.len() as f64;
    points
        .windows(2)
        .map(|w| (cdf(a, w[0]) - cdf(b, w[0])).abs() * (w[1] - w[0]))
        .sum()
}

#[test]
fn wasserstein_matches_cdf_integral_for_unequal_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let na = rng.random_range(1..25);
        let nb = rng.random_range(1..25);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(-1.0..5.0)).collect();
        let got = wasserstein_1d(
            &EmpiricalDistribution::new(a.clone()).unwrap(),
            &EmpiricalDistribution::new(b.clone()).unwrap(),
        );
        assert_abs_diff_eq!(got, cdf_distance(&a, &b), epsilon = 1e-10);
    }
}

/// Largest eigenvalue by power iteration from the all-ones vector.
fn power_iteration(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut v = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = m * &v;
        let next = v.dot(&w);
        v = w.normalize();
        if (next - lambda).abs() < 1e-15 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

#[test]
fn leading_eigenvalue_agrees_with_power_iteration() {
    // a shared factor keeps the spectral gap wide enough for fast convergence
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let factor: Vec<f64> = (0..400).map(|_| normal.sample(&mut rng)).collect();
    let m = DMatrix::from_fn(400, 12, |r, _| factor[r] + normal.sample(&mut rng));
    let panel = SectorReturnsPanel::from_matrix(m).unwrap();
    let cfg = WindowConfig::new(30, panel.num_days()).unwrap();
    let series = shifts::c_series(&panel, cfg).unwrap();
    for (k, t) in cfg.t_range(panel.num_days()).enumerate().step_by(17) {
        let psi = rolling_correlation(&panel, cfg, t).unwrap().psi;
        let lambda = power_iteration(&psi);
        assert_abs_diff_eq!(series.values[k] * 12.0, lambda, epsilon = 1e-8);
    }
}

#[test]
fn window_sums_match_direct_loops() {
    let panel = SectorReturnsPanel::from_matrix(gaussian_panel(120, 5, 3)).unwrap();
    let cfg = WindowConfig::new(10, 120).unwrap();
    let s = shifts::s_series(&panel, cfg);
    for (k, t) in cfg.t_range(120).enumerate() {
        let mut expected = 0.0;
        for j in 0..5 {
            let col = panel.returns().column(j);
            let before: f64 = (t - 10..t).map(|r| col[r]).sum();
            let after: f64 = (t..t + 10).map(|r| col[r]).sum();
            expected += (after - before).abs();
        }
        assert_abs_diff_eq!(s.values[k], expected, epsilon = 1e-14);
    }
}

/// Four sectors: A and B strongly tied, C loosely tied to A, D nearly
/// independent. The distance tree joins similar pairs; the correlation tree
/// joins the least correlated ones.
#[test]
fn distance_and_correlation_trees_differ() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let m = DMatrix::from_fn(500, 4, |_, _| normal.sample(&mut rng));
    let mut mixed = m.clone();
    for r in 0..500 {
        mixed[(r, 1)] = m[(r, 0)] + 0.2 * m[(r, 1)];
        mixed[(r, 2)] = m[(r, 0)] + 1.5 * m[(r, 2)];
    }
    let panel = SectorReturnsPanel::from_matrix(mixed).unwrap();
    let full = full_correlation(&panel).unwrap();
    let d = kruskal_mst(&full.dist, &full.sectors, Weighting::Distance).unwrap();
    let c = kruskal_mst(&full.psi, &full.sectors, Weighting::Correlation).unwrap();
    assert!(d.edge_set().contains(&(0, 1)));
    assert!(!c.edge_set().contains(&(0, 1)));
    assert_ne!(d.edge_set(), c.edge_set());
}

#[test]
fn decorrelated_sector_becomes_correlation_star() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = 9;
    let planted = 4;
    let m = DMatrix::from_fn(800, n, |_, _| normal.sample(&mut rng));
    let mut panel = m.clone();
    for r in 0..800 {
        let common = m[(r, 0)];
        for j in 1..n {
            panel[(r, j)] = if j == planted { m[(r, j)] } else { 2.0 * common + m[(r, j)] };
        }
        panel[(r, 0)] = 2.0 * common + normal.sample(&mut rng);
    }
    let returns = SectorReturnsPanel::from_matrix(panel).unwrap();
    let full = full_correlation(&returns).unwrap();
    let tree = kruskal_mst(&full.psi, &full.sectors, Weighting::Correlation).unwrap();
    assert_eq!(tree.star_center(), Some(planted));
    let dist_tree = kruskal_mst(&full.dist, &full.sectors, Weighting::Distance).unwrap();
    assert_eq!(dist_tree.degrees()[planted], 1);
}

#[test]
fn edge_csv_survives_a_file_round_trip() {
    let panel = SectorReturnsPanel::from_matrix(gaussian_panel(200, 7, 9)).unwrap();
    let full = full_correlation(&panel).unwrap();
    let tree = kruskal_mst(&full.dist, &full.sectors, Weighting::Distance).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tree.csv");
    network::export_graph(&tree, GraphFormat::Csv, &path).unwrap();
    let back = network::read_edge_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back.edge_set(), tree.edge_set());
    assert_eq!(back.nodes, tree.nodes);
    assert_eq!(network::to_edge_csv(&back), std::fs::read_to_string(&path).unwrap());
}

fn small_universe(seed: u64) -> (PricePanel, SectorMap) {
    let cfg = SyntheticConfig {
        assets: 48,
        sectors: 8,
        days: 400,
        seed,
        ..SyntheticConfig::default()
    };
    synthetic_universe(&cfg).unwrap()
}

#[test]
fn experiments_do_not_depend_on_thread_count() {
    let (panel, map) = small_universe(1);
    let spec = SampleSpaceSpec::new(Style::LongShort, 6, 2_000, 99).with_scheme(Scheme::Stratified);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let exp = pool.install(|| run_experiment(&spec, &panel, &map).unwrap());
        serde_json::to_string(&exp.report).unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
}

#[test]
fn full_range_period_equals_no_period() {
    let (panel, map) = small_universe(2);
    let spec = SampleSpaceSpec::new(Style::Long, 5, 500, 3);
    let ranged = spec.clone().with_period(Period::Range {
        start: panel.dates()[0],
        end: *panel.dates().last().unwrap(),
    });
    let a = run_experiment(&spec, &panel, &map).unwrap();
    let b = run_experiment(&ranged, &panel, &map).unwrap();
    assert_eq!(a.sharpes, b.sharpes);
    assert_eq!(a.report.quantiles, b.report.quantiles);
}

#[test]
fn product_space_never_holds_both_signs() {
    let (panel, map) = small_universe(4);
    let product = SampleSpaceSpec::new(Style::LongShort, 12, 1_000, 8);
    let exp = run_experiment(&product, &panel, &map).unwrap();
    assert!(exp.portfolios.iter().all(|p| p.has_distinct_assets()));

    // with 12 of 96 signed positions some draws pair an asset with itself
    let union = product.clone().with_space(LongShortSpace::Union);
    let mut both = 0;
    for d in 0..1_000 {
        let mut rng = sampling::substream(8, d);
        let p = sampling::draw_portfolio(&union, &map, &mut rng).unwrap();
        if !p.has_distinct_assets() {
            both += 1;
        }
    }
    assert!(both > 0);
}

#[test]
fn planted_sector_dominates_top_long_portfolios() {
    let mut drift = vec![0.0; 10];
    drift[6] = 2e-3;
    let cfg = SyntheticConfig {
        assets: 60,
        sectors: 10,
        days: 750,
        seed: 31,
        sector_drift: drift,
        ..SyntheticConfig::default()
    };
    let (panel, map) = synthetic_universe(&cfg).unwrap();
    let spec = SampleSpaceSpec::new(Style::Long, 10, 5_000, 12);
    let exp = run_experiment(&spec, &panel, &map).unwrap();
    let (top, _) = exp.report.composition.extremes_by_ratio(1);
    assert_eq!(top[0].sector, map.sectors()[6]);
    let planted = exp.report.composition.row(&map.sectors()[6]).unwrap();
    let runner_up = exp
        .report
        .composition
        .rows
        .iter()
        .filter(|r| r.sector != planted.sector)
        .map(|r| r.ratio)
        .fold(f64::MIN, f64::max);
    assert!(planted.ratio > runner_up);
}

#[test]
fn whole_sample_composition_is_close_to_universe_shares() {
    let (panel, map) = small_universe(6);
    let spec = SampleSpaceSpec::new(Style::Long, 8, 6_000, 21).with_top_fraction(1.0);
    let exp = run_experiment(&spec, &panel, &map).unwrap();
    for row in &exp.report.composition.rows {
        assert!((row.ratio - 1.0).abs() < 0.08, "{} ratio {}", row.sector, row.ratio);
    }
}

#[test]
fn short_experiments_mirror_long_ones() {
    let (panel, map) = small_universe(7);
    let long = run_experiment(&SampleSpaceSpec::new(Style::Long, 6, 800, 5), &panel, &map).unwrap();
    let short = run_experiment(&SampleSpaceSpec::new(Style::Short, 6, 800, 5), &panel, &map).unwrap();
    for (l, s) in long.sharpes.iter().zip(&short.sharpes) {
        assert_eq!(*s, -*l);
    }
    assert_eq!(compare_spaces(&long.sharpes, &long.sharpes).unwrap(), 0.5);
}

#[test]
fn eigenvalues_of_window_correlations_sum_to_dimension() {
    let panel = SectorReturnsPanel::from_matrix(gaussian_panel(150, 8, 41)).unwrap();
    let cfg = WindowConfig::new(20, 150).unwrap();
    for t in cfg.t_range(150) {
        let psi = rolling_correlation(&panel, cfg, t).unwrap().psi;
        let values = symmetric_eigenvalues(&psi).unwrap();
        assert_abs_diff_eq!(values.iter().sum::<f64>(), 8.0, epsilon = 1e-10);
        assert!(values.windows(2).all(|w| w[0] >= w[1]));
    }
}
