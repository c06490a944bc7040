//! Error metrics and top-K selection.

use crate::error::{Error, Result};
use crate::response::{center, ItemParams};

fn centered_difference(a: &ItemParams, b: &ItemParams) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "parameter vectors",
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (a, b) = (center(a.as_slice()), center(b.as_slice()));
    Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
}

/// `‖center(a) − center(b)‖₂`
pub fn l2_error(a: &ItemParams, b: &ItemParams) -> Result<f64> {
    Ok(centered_difference(a, b)?
        .iter()
        .map(|d| d * d)
        .sum::<f64>()
        .sqrt())
}

/// `‖center(a) − center(b)‖∞`
pub fn linf_error(a: &ItemParams, b: &ItemParams) -> Result<f64> {
    Ok(centered_difference(a, b)?
        .iter()
        .fold(0.0, |acc, d| acc.max(d.abs())))
}

fn check_k(beta: &ItemParams, k: usize) -> Result<()> {
    if k == 0 || k >= beta.len() {
        return Err(Error::InvalidParameter(format!(
            "K must satisfy 1 <= K < {}, got {k}",
            beta.len()
        )));
    }
    Ok(())
}

/// Item indices ordered by decreasing value, ties by ascending index.
fn ranking(beta: &ItemParams) -> Vec<usize> {
    let v = beta.as_slice();
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then(i.cmp(&j)));
    idx
}

/// Indices of the `k` largest entries, sorted ascending.
pub fn top_k_select(beta: &ItemParams, k: usize) -> Result<Vec<usize>> {
    check_k(beta, k)?;
    let mut top: Vec<usize> = ranking(beta).into_iter().take(k).collect();
    top.sort_unstable();
    Ok(top)
}

/// Gap between the `k`-th and `(k+1)`-th largest entries.
pub fn delta_k(beta: &ItemParams, k: usize) -> Result<f64> {
    check_k(beta, k)?;
    let order = ranking(beta);
    let v = beta.as_slice();
    Ok(v[order[k - 1]] - v[order[k]])
}

/// Fraction of the true top-`k` items that the estimate also places in its top `k`.
pub fn top_k_accuracy(estimate: &ItemParams, truth: &ItemParams, k: usize) -> Result<f64> {
    let est = top_k_select(estimate, k)?;
    let tru = top_k_select(truth, k)?;
    let hits = est.iter().filter(|i| tru.binary_search(i).is_ok()).count();
    Ok(hits as f64 / k as f64)
}
