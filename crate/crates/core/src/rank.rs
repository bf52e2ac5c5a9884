//! Rank correlation between two equal-length vectors.

use statrs::function::erf::erfc;

use crate::stats::{average_ranks, pearson};

/// Kendall tau-a: `(concordant - discordant) / C(n, 2)`. Pairs tied in either
/// vector count as neither. `None` if either vector is constant or `n < 2`.
///
/// Uses Knight's O(n log n) method: sort by `(x, y)`, then the number of
/// discordant pairs is the number of inversions left in `y`.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "kendall_tau: length mismatch");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let total = (n * (n - 1) / 2) as i64;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let tied_x = tied_pairs(order.iter().map(|&i| x[i]));
    let tied_xy = tied_pairs_by(&order, |a, b| x[a] == x[b] && y[a] == y[b]);

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = count_inversions(&mut ys, &mut buf) as i64;
    // ys is now sorted
    let tied_y = tied_pairs(ys.iter().copied());

    if tied_x == total || tied_y == total {
        return None;
    }
    let diff = total - tied_x - tied_y + tied_xy - 2 * discordant;
    Some(diff as f64 / total as f64)
}

/// Two-sided p-value for tau under the null of independence, from the normal
/// approximation with variance `2(2n + 5) / (9n(n - 1))`.
pub fn kendall_p_value(tau: f64, n: usize) -> f64 {
    if !tau.is_finite() || n < 2 {
        return f64::NAN;
    }
    let n = n as f64;
    let var = 2.0 * (2.0 * n + 5.0) / (9.0 * n * (n - 1.0));
    let z = tau / var.sqrt();
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "spearman: length mismatch");
    if x.len() < 2 {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

fn tied_pairs(sorted: impl Iterator<Item = f64>) -> i64 {
    let mut pairs = 0i64;
    let mut run = 0i64;
    let mut prev: Option<f64> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            pairs += run * (run - 1) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    pairs + run * (run - 1) / 2
}

fn tied_pairs_by(order: &[usize], same: impl Fn(usize, usize) -> bool) -> i64 {
    let mut pairs = 0i64;
    let mut run = 1i64;
    for w in order.windows(2) {
        if same(w[0], w[1]) {
            run += 1;
        } else {
            pairs += run * (run - 1) / 2;
            run = 1;
        }
    }
    pairs + run * (run - 1) / 2
}

/// Merge sort counting pairs `i < j` with `v[i] > v[j]`.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        count_inversions(left, bl) + count_inversions(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}
