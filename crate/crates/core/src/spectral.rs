//! The non-private spectral estimator.
//!
//! Pairwise differential counts `Y_ij` (users answering item `i` positively and
//! item `j` negatively) define a random walk over items. Its stationary
//! distribution `π` satisfies `π_i ∝ e^{β_i}` in expectation, so the centered
//! `log π` estimates the item difficulties.

use std::io::Write;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::response::{
    center, rasch_response_probability, AbilityParams, ItemParams, ResponseMatrix,
};

/// `m × m` pairwise differential counts with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferentialMatrix {
    counts: Array2<u64>,
}

impl DifferentialMatrix {
    pub fn from_counts(counts: Array2<u64>) -> Result<Self> {
        let (r, c) = counts.dim();
        if r != c {
            return Err(Error::DimensionMismatch {
                what: "differential matrix columns",
                expected: r,
                actual: c,
            });
        }
        if r < 2 {
            return Err(Error::TooFewItems(r));
        }
        let mut counts = counts;
        counts.diag_mut().fill(0);
        Ok(Self { counts })
    }

    pub fn n_items(&self) -> usize {
        self.counts.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[[i, j]]
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    /// Number of off-diagonal entries that are strictly positive.
    pub fn positive_entries(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// `Y_ij = Σ_l A_li A_lj X_li (1 − X_lj)`.
pub fn compute_differentials(x: &ResponseMatrix) -> DifferentialMatrix {
    let m = x.n_items();
    let n = x.n_users();
    let chunk = n.div_ceil(rayon::current_num_threads().max(1) * 4).max(64);
    let users: Vec<usize> = (0..n).collect();
    let flat = users
        .par_chunks(chunk)
        .map(|block| {
            let mut acc = vec![0u64; m * m];
            let mut ones = Vec::with_capacity(m);
            let mut zeros = Vec::with_capacity(m);
            for &l in block {
                ones.clear();
                zeros.clear();
                for (i, c) in x.row(l).iter().enumerate() {
                    match c.bit() {
                        Some(true) => ones.push(i),
                        Some(false) => zeros.push(i),
                        None => {}
                    }
                }
                for &i in &ones {
                    let row = &mut acc[i * m..(i + 1) * m];
                    for &j in &zeros {
                        row[j] += 1;
                    }
                }
            }
            acc
        })
        .reduce(
            || vec![0u64; m * m],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let counts = Array2::from_shape_vec((m, m), flat).expect("m*m buffer");
    DifferentialMatrix { counts }
}

/// Row-stochastic transition matrix with its normalization scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    transition: Array2<f64>,
    scale: f64,
    lambda: f64,
}

impl MarkovChain {
    pub fn n_states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &Array2<f64> {
        &self.transition
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `π M` for a row vector `π`.
    pub fn left_multiply(&self, pi: &[f64]) -> Vec<f64> {
        Array1::from(pi.to_vec()).dot(&self.transition).to_vec()
    }

    /// Writes the transition matrix as headerless CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for row in self.transition.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts connected components of the undirected graph with an edge wherever
/// `w_ij > 0` or `w_ji > 0`.
pub(crate) fn support_components(m: usize, edge: impl Fn(usize, usize) -> bool) -> usize {
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let mut components = m;
    for i in 0..m {
        for j in (i + 1)..m {
            if edge(i, j) || edge(j, i) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                    components -= 1;
                }
            }
        }
    }
    components
}

fn chain_from_weights(mut weights: Array2<f64>, lambda: f64) -> Result<MarkovChain> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "regularizer must be a nonnegative number, got {lambda}"
        )));
    }
    let m = weights.nrows();
    weights.diag_mut().fill(0.0);

    let components = support_components(m, |i, j| weights[[i, j]] > 0.0);
    if components > 1 {
        return Err(Error::ReducibleChain { components });
    }

    // regularize every co-observed pair, in both directions
    let support = weights.mapv(|w| w > 0.0);
    for i in 0..m {
        for j in 0..m {
            if i != j && (support[[i, j]] || support[[j, i]]) {
                weights[[i, j]] += lambda;
            }
        }
    }

    let scale = weights
        .rows()
        .into_iter()
        .map(|r| r.sum())
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;
    // One scale for every row. The per-row rescaling π/d of a varying-d
    // construction is then the identity, so it is not applied.
    let mut transition = weights / scale;
    for i in 0..m {
        let off: f64 = transition.row(i).sum() - transition[[i, i]];
        transition[[i, i]] = 1.0 - off;
    }
    Ok(MarkovChain {
        transition,
        scale,
        lambda,
    })
}

/// Builds the regularized chain from differential counts.
pub fn construct_chain(y: &DifferentialMatrix, lambda: f64) -> Result<MarkovChain> {
    chain_from_weights(y.counts.mapv(|c| c as f64), lambda)
}

/// Stopping rule for power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iters: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
    iterations: usize,
    gap: f64,
}

impl StationaryDistribution {
    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `‖π M − π‖₂` of the returned vector.
    pub fn residual(&self) -> f64 {
        self.gap
    }

    /// Centered `log π`.
    pub fn log_centered(&self) -> Result<ItemParams> {
        ItemParams::new(center(
            &self.pi.iter().map(|p| p.ln()).collect::<Vec<_>>(),
        ))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["item", "pi"])?;
        for (i, p) in self.pi.iter().enumerate() {
            w.write_record([i.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn l2_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Left power iteration from the uniform vector.
///
/// Stops at the first iterate `π` with `‖π M − π‖₂ < tol` and returns that
/// iterate. If `max_iters` is reached the last iterate is returned as long as
/// its gap is below `10 · tol`; otherwise the iteration is reported as stalled.
pub fn stationary(chain: &MarkovChain, opts: StationaryOptions) -> Result<StationaryDistribution> {
    let m = chain.n_states();
    let mut pi = vec![1.0 / m as f64; m];
    let mut gap = f64::INFINITY;
    for it in 0..opts.max_iters {
        let mut next = chain.left_multiply(&pi);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        gap = l2_gap(&next, &pi);
        if gap < opts.tol {
            return Ok(StationaryDistribution {
                pi,
                iterations: it + 1,
                gap,
            });
        }
        pi = next;
    }
    if gap >= 10.0 * opts.tol {
        return Err(Error::NonConvergence {
            iterations: opts.max_iters,
            gap,
        });
    }
    let residual = l2_gap(&chain.left_multiply(&pi), &pi);
    Ok(StationaryDistribution {
        pi,
        iterations: opts.max_iters,
        gap: residual,
    })
}

/// Chain construction, power iteration and centered log transform.
pub fn estimate_from_differentials(
    y: &DifferentialMatrix,
    lambda: f64,
    opts: StationaryOptions,
) -> Result<ItemParams> {
    let chain = construct_chain(y, lambda)?;
    stationary(&chain, opts)?.log_centered()
}

/// Non-private spectral estimate of the item parameters.
pub fn spectral_estimate(x: &ResponseMatrix, lambda: f64) -> Result<ItemParams> {
    estimate_from_differentials(&compute_differentials(x), lambda, StationaryOptions::default())
}

/// Chain built from expected differentials under known parameters, with no
/// regularization. `π ∝ e^β` is its exact stationary distribution; useful as
/// a reference when checking the estimator.
pub fn idealized_chain(
    beta: &ItemParams,
    theta: &AbilityParams,
    support: &ResponseMatrix,
) -> Result<MarkovChain> {
    let m = support.n_items();
    let n = support.n_users();
    if beta.len() != m {
        return Err(Error::DimensionMismatch {
            what: "item parameters",
            expected: m,
            actual: beta.len(),
        });
    }
    if theta.len() != n {
        return Err(Error::DimensionMismatch {
            what: "user abilities",
            expected: n,
            actual: theta.len(),
        });
    }
    let mut expected = Array2::<f64>::zeros((m, m));
    for (l, row) in support.rows().enumerate() {
        let th = theta.as_slice()[l];
        let probs: Vec<Option<f64>> = row
            .iter()
            .zip(beta.as_slice())
            .map(|(c, &b)| c.is_observed().then(|| rasch_response_probability(th, b)))
            .collect();
        for i in 0..m {
            let Some(pi) = probs[i] else { continue };
            for j in 0..m {
                if let (true, Some(pj)) = (i != j, probs[j]) {
                    expected[[i, j]] += pi * (1.0 - pj);
                }
            }
        }
    }
    chain_from_weights(expected, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::{Response, SamplingSpec};
    use ndarray::array;

    fn y(counts: Array2<u64>) -> DifferentialMatrix {
        DifferentialMatrix::from_counts(counts).unwrap()
    }

    #[test]
    fn differentials_two_users() {
        let x = ResponseMatrix::from_bits(&[vec![1, 0], vec![0, 1]]).unwrap();
        let d = compute_differentials(&x);
        assert_eq!(d.get(0, 1), 1);
        assert_eq!(d.get(1, 0), 1);
        assert_eq!(d.get(0, 0), 0);
    }

    #[test]
    fn differentials_all_correct_is_zero() {
        let x = ResponseMatrix::from_bits(&[vec![1, 1, 1], vec![1, 1, 1]]).unwrap();
        assert!(compute_differentials(&x).counts().iter().all(|&c| c == 0));
    }

    #[test]
    fn missing_cell_contributes_nothing() {
        use Response::*;
        let with = ResponseMatrix::from_rows(vec![
            vec![Correct, Incorrect, Missing],
            vec![Incorrect, Correct, Correct],
        ])
        .unwrap();
        let d = compute_differentials(&with);
        // user 0 answered neither item 2 nor contributes to pairs with it
        assert_eq!(d.get(0, 2), 0);
        assert_eq!(d.get(2, 0), 1);
        assert_eq!(d.get(0, 1), 1);
        assert_eq!(d.get(1, 0), 1);
    }

    #[test]
    fn two_item_chain_by_hand() {
        let c = construct_chain(&y(array![[0, 3], [3, 0]]), 1.0).unwrap();
        assert_eq!(c.scale(), 5.0);
        let t = c.transition();
        assert!((t[[0, 0]] - 0.2).abs() < 1e-15);
        assert!((t[[0, 1]] - 0.8).abs() < 1e-15);
        assert!((t[[1, 0]] - 0.8).abs() < 1e-15);
        assert!((t[[1, 1]] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn empty_counts_are_reducible() {
        for lambda in [0.0, 1.0, 10.0] {
            let err = construct_chain(&y(Array2::zeros((3, 3))), lambda);
            assert!(matches!(err, Err(Error::ReducibleChain { components: 3 })));
        }
    }

    #[test]
    fn regularizer_touches_only_co_observed_pairs() {
        let c = construct_chain(&y(array![[0, 2, 0], [0, 0, 1], [0, 0, 0]]), 1.0).unwrap();
        let t = c.transition();
        // pair (0, 2) never co-occurs and stays zero
        assert_eq!(t[[0, 2]], 0.0);
        assert_eq!(t[[2, 0]], 0.0);
        assert!(t[[1, 0]] > 0.0 && t[[2, 1]] > 0.0);
        for row in t.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn negative_lambda_rejected() {
        assert!(construct_chain(&y(array![[0, 1], [1, 0]]), -1.0).is_err());
    }

    fn chain(t: Array2<f64>) -> MarkovChain {
        MarkovChain {
            transition: t,
            scale: 1.0,
            lambda: 0.0,
        }
    }

    #[test]
    fn stationary_doubly_stochastic() {
        let s = stationary(
            &chain(array![[0.5, 0.5], [0.5, 0.5]]),
            StationaryOptions::default(),
        )
        .unwrap();
        assert_eq!(s.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn stationary_two_state_closed_form() {
        // π M = π with M = [[.5,.5],[.25,.75]] gives π = (1/3, 2/3)
        let opts = StationaryOptions {
            tol: 1e-12,
            max_iters: 1000,
        };
        let s = stationary(&chain(array![[0.5, 0.5], [0.25, 0.75]]), opts).unwrap();
        assert!((s.as_slice()[0] - 1.0 / 3.0).abs() < 1e-11);
        assert!((s.as_slice()[1] - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn stalled_iteration_is_reported() {
        // slowly mixing chain, far too few iterations
        let c = chain(array![[0.9995, 0.0005], [0.001, 0.999]]);
        let opts = StationaryOptions {
            tol: 1e-12,
            max_iters: 3,
        };
        assert!(matches!(
            stationary(&c, opts),
            Err(Error::NonConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn symmetric_data_gives_zero_estimate() {
        let x = ResponseMatrix::from_bits(&[vec![1, 0], vec![0, 1], vec![1, 0], vec![0, 1]])
            .unwrap();
        let b = spectral_estimate(&x, 1.0).unwrap();
        assert!(b.as_slice().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn idealized_chain_symmetric_case() {
        let spec = SamplingSpec {
            m: 4,
            n: 5,
            p: 1.0,
            seed: 0,
        };
        let beta = ItemParams::new(vec![0.0; 4]).unwrap();
        let theta = AbilityParams::zeros(5);
        let x = crate::response::generate_synthetic(&spec, &beta, &theta).unwrap();
        let c = idealized_chain(&beta, &theta, &x).unwrap();
        let t = c.transition();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!((t[[i, j]] - t[[0, 1]]).abs() < 1e-15);
                }
            }
        }
        let s = stationary(&c, StationaryOptions::default()).unwrap();
        assert!(s.as_slice().iter().all(|p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn idealized_two_item_ratio() {
        // θ = 0, β = (ln2 − c, −c): Y*_12 / Y*_21 = e^{β_2} / e^{β_1} = 1/2
        let c = 2f64.ln() / 2.0;
        let beta = ItemParams::new(vec![2f64.ln() - c, -c]).unwrap();
        let x = ResponseMatrix::from_bits(&[vec![0, 0]]).unwrap();
        let chain = idealized_chain(&beta, &AbilityParams::zeros(1), &x).unwrap();
        let p1 = 1.0 / (1.0 + 2f64.sqrt());
        let p2 = 1.0 / (1.0 + 1.0 / 2f64.sqrt());
        let y12 = p1 * (1.0 - p2);
        let y21 = p2 * (1.0 - p1);
        let t = chain.transition();
        assert!((y12 / y21 - 0.5).abs() < 1e-12);
        assert!((t[[0, 1]] / t[[1, 0]] - y12 / y21).abs() < 1e-12);
        assert!((chain.scale() - (y21.max(y12) + 1.0)).abs() < 1e-15);
    }
}
