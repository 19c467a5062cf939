//! Evaluation metrics.

use crate::error::{Error, Result};
use crate::model::ComparisonDataset;

/// One evaluation of an estimate. Fields are `None` when the reference they
/// need was not supplied.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricRow {
    pub kendall_tau: Option<f64>,
    pub l2_rel_err: Option<f64>,
    pub test_err: Option<f64>,
}

/// Kendall's tau-b, `(P − Q) / √((P + Q + T)(P + Q + U))`, where `T` and `U`
/// count pairs tied only in `alpha` and only in `beta`. Pairs tied in both
/// count nowhere.
///
/// Runs in `O(n log n)` (Knight's merge-sort formulation).
pub fn kendall_tau_b(alpha: &[f64], beta: &[f64]) -> Result<f64> {
    if alpha.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha.len(),
            found: beta.len(),
        });
    }
    let n = alpha.len();
    if n < 2 {
        return Err(Error::DegenerateInput("kendall tau needs at least 2 entries".into()));
    }
    if alpha.iter().chain(beta).any(|v| v.is_nan()) {
        return Err(Error::invalid("kendall tau inputs contain NaN"));
    }

    let mut pairs: Vec<(f64, f64)> = alpha.iter().copied().zip(beta.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let total = (n as u64) * (n as u64 - 1) / 2;
    let tie_pairs = |len: u64| len * len.saturating_sub(1) / 2;

    // ties in alpha, and joint ties
    let (mut ties_a, mut ties_ab) = (0u64, 0u64);
    let (mut run_a, mut run_ab) = (1u64, 1u64);
    for k in 1..n {
        if pairs[k].0 == pairs[k - 1].0 {
            run_a += 1;
            if pairs[k].1 == pairs[k - 1].1 {
                run_ab += 1;
            } else {
                ties_ab += tie_pairs(run_ab);
                run_ab = 1;
            }
        } else {
            ties_a += tie_pairs(run_a);
            ties_ab += tie_pairs(run_ab);
            run_a = 1;
            run_ab = 1;
        }
    }
    ties_a += tie_pairs(run_a);
    ties_ab += tie_pairs(run_ab);

    // Sorting by beta counts the discordant pairs as inversions.
    let mut b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut b, &mut buf);

    let mut ties_b = 0u64;
    let mut run_b = 1u64;
    for k in 1..n {
        if b[k] == b[k - 1] {
            run_b += 1;
        } else {
            ties_b += tie_pairs(run_b);
            run_b = 1;
        }
    }
    ties_b += tie_pairs(run_b);

    // P + Q + T = total − ties_b; P + Q + U = total − ties_a
    let not_tied_b = total - ties_b;
    let not_tied_a = total - ties_a;
    if not_tied_a == 0 || not_tied_b == 0 {
        return Err(Error::DegenerateInput("a constant vector has no defined tau-b".into()));
    }
    let concordant_minus_discordant = total as i64 - ties_a as i64 - ties_b as i64 + ties_ab as i64 - 2 * swaps as i64;
    Ok(tau_b_from_counts(concordant_minus_discordant, not_tied_b, not_tied_a))
}

/// Shared final step so that any route producing the same counts yields a
/// bit-identical value.
pub fn tau_b_from_counts(p_minus_q: i64, p_q_t: u64, p_q_u: u64) -> f64 {
    p_minus_q as f64 / ((p_q_t as f64) * (p_q_u as f64)).sqrt()
}

/// Stable merge sort returning the number of inversions (strictly greater
/// elements placed before smaller ones).
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
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
    swaps
}

fn l1_normalized(v: &[f64], what: &str) -> Result<Vec<f64>> {
    let total: f64 = v.iter().sum();
    if !(total.is_finite() && total != 0.0) {
        return Err(Error::invalid(format!("{what} vector has zero or non-finite sum")));
    }
    Ok(v.iter().map(|x| x / total).collect())
}

/// `‖ŵ − w‖₂ / ‖w‖₂` after both vectors are scaled to sum to one.
pub fn relative_l2_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    let t = l1_normalized(truth, "truth")?;
    let e = l1_normalized(estimate, "estimate")?;
    let diff = e.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm = t.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(diff / norm)
}

/// Fraction of test comparisons whose winner received the lower score. A tie
/// in scores counts as half an error.
pub fn pairwise_test_error(scores: &[f64], test: &ComparisonDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    if test.n() > scores.len() {
        return Err(Error::DimensionMismatch {
            expected: test.n(),
            found: scores.len(),
        });
    }
    let errors: f64 = test
        .records()
        .iter()
        .map(|r| {
            let (w, l) = (scores[r.winner()], scores[r.loser()]);
            if w > l {
                0.0
            } else if w < l {
                1.0
            } else {
                0.5
            }
        })
        .sum();
    Ok(errors / test.len() as f64)
}
