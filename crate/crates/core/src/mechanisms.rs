//! Private item estimation.
//!
//! Two routes are provided:
//!
//! * **Output perturbation.** Integer noise (discrete Gaussian or discrete
//!   Laplace) is added to the pairwise differential counts before the Markov
//!   chain is built. Optionally only the pairs on an Erdős–Rényi sampling graph
//!   are measured, which cuts the number of noised queries and therefore the
//!   per-query noise.
//! * **Input perturbation.** Every observed response is flipped by randomized
//!   response, optionally followed by shuffling the user rows, and the ordinary
//!   estimator runs on the result.
//!
//! Noise is only added to counts that are positive; zero counts stay zero.
//! This mirrors the reference construction and means the zero pattern of the
//! counts is not protected.

use rand::seq::SliceRandom;

use crate::accounting::{
    gaussian_plan, laplace_plan, rr_per_response_epsilon, shuffle_effective_epsilon,
    MechanismKind, NoisePlan, PrivacyBudget,
};
use crate::error::{Error, Result};
use crate::response::{ItemParams, ResponseMatrix};
use crate::rng::RngStream;
use crate::spectral::{
    compute_differentials, estimate_from_differentials, support_components, DifferentialMatrix,
    StationaryOptions,
};
use ndarray::Array2;

/// Resampling budget for a connected sampling graph.
pub const MAX_GRAPH_ATTEMPTS: usize = 100;

const GRAPH_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const RESPONSE_STREAM: u64 = 3;

/// Symmetric item-pair graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsampleGraph {
    m: usize,
    adjacency: Vec<bool>,
}

impl SubsampleGraph {
    pub fn complete(m: usize) -> Self {
        let mut adjacency = vec![true; m * m];
        for i in 0..m {
            adjacency[i * m + i] = false;
        }
        Self { m, adjacency }
    }

    pub fn n_vertices(&self) -> usize {
        self.m
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.m + j]
    }

    /// Number of unordered edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&a| a).count() / 2
    }

    pub fn is_connected(&self) -> bool {
        support_components(self.m, |i, j| self.has_edge(i, j)) == 1
    }
}

/// G(m, p0): every unordered pair is an edge independently with probability `p0`.
pub fn sample_er_graph(m: usize, p0: f64, rng: &mut RngStream) -> Result<SubsampleGraph> {
    if m < 2 {
        return Err(Error::TooFewItems(m));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::InvalidParameter(format!(
            "edge probability {p0} outside [0, 1]"
        )));
    }
    let mut adjacency = vec![false; m * m];
    for i in 0..m - 1 {
        for j in i + 1..m {
            if rng.uniform() < p0 {
                adjacency[i * m + j] = true;
                adjacency[j * m + i] = true;
            }
        }
    }
    Ok(SubsampleGraph { m, adjacency })
}

/// Ordered pairs that receive noise: on the graph and with a positive count.
pub fn noised_positions(y: &DifferentialMatrix, graph: &SubsampleGraph) -> usize {
    let m = y.n_items();
    (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && graph.has_edge(i, j) && y.get(i, j) > 0)
        .count()
}

fn check_graph(y: &DifferentialMatrix, graph: &SubsampleGraph) -> Result<()> {
    if graph.n_vertices() != y.n_items() {
        return Err(Error::DimensionMismatch {
            what: "sampling graph",
            expected: y.n_items(),
            actual: graph.n_vertices(),
        });
    }
    Ok(())
}

/// Masks `y` to the graph and perturbs every remaining positive count with
/// `max(1, y + noise(i, j))`. Noise is requested in row-major order.
pub fn privatize_differentials_with<F>(
    y: &DifferentialMatrix,
    graph: &SubsampleGraph,
    mut noise: F,
) -> Result<DifferentialMatrix>
where
    F: FnMut(usize, usize) -> Result<i64>,
{
    check_graph(y, graph)?;
    let m = y.n_items();
    let mut out = Array2::<u64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            let count = y.get(i, j);
            if i == j || !graph.has_edge(i, j) || count == 0 {
                continue;
            }
            let z = noise(i, j)?;
            out[[i, j]] = (count as i64).saturating_add(z).max(1) as u64;
        }
    }
    DifferentialMatrix::from_counts(out)
}

/// [`privatize_differentials_with`] drawing noise from the plan's scale.
pub fn privatize_differentials(
    y: &DifferentialMatrix,
    plan: &NoisePlan,
    graph: &SubsampleGraph,
    rng: &mut RngStream,
) -> Result<DifferentialMatrix> {
    let scale = plan.noise_scale().ok_or_else(|| {
        Error::InvalidParameter("randomized response has no additive noise scale".into())
    })?;
    privatize_differentials_with(y, graph, |_, _| scale.sample(rng))
}

/// Uniformly permutes user rows.
pub fn shuffle_users(x: &ResponseMatrix, rng: &mut RngStream) -> ResponseMatrix {
    let mut order: Vec<usize> = (0..x.n_users()).collect();
    order.shuffle(rng);
    x.permuted_rows(&order)
}

/// Probability that randomized response flips an answer at budget `epsilon`.
pub fn flip_probability(epsilon: f64) -> f64 {
    1.0 / (1.0 + epsilon.exp())
}

/// Flips each observed response of user `l` with probability
/// `1/(1 + e^{ε_l})`, where `ε_l` is the user's budget split evenly over
/// their observed responses.
///
/// With `shuffle`, the user budget is the largest local budget that shuffling
/// amplifies to `budget`, and the randomized rows are then permuted.
pub fn randomized_response(
    x: &ResponseMatrix,
    budget: PrivacyBudget,
    shuffle: bool,
    rng: &mut RngStream,
) -> ResponseMatrix {
    let epsilon_user = if shuffle {
        shuffle_effective_epsilon(budget, x.n_users())
    } else {
        budget.epsilon()
    };
    let mut out = x.clone();
    for l in 0..x.n_users() {
        let Some(eps) = rr_per_response_epsilon(epsilon_user, x.user_response_count(l)) else {
            continue;
        };
        let flip = flip_probability(eps);
        for cell in out.row_mut(l) {
            if cell.is_observed() && rng.uniform() < flip {
                *cell = cell.flipped();
            }
        }
    }
    if shuffle {
        shuffle_users(&out, rng)
    } else {
        out
    }
}

/// Inputs to a private estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismConfig {
    pub mechanism: MechanismKind,
    pub budget: PrivacyBudget,
    /// Edge probability of the sampling graph (noise mechanisms only).
    pub p0: f64,
    pub lambda: f64,
    /// Shuffle user rows after randomized response.
    pub shuffle: bool,
    pub seed: u64,
    pub stationary: StationaryOptions,
}

impl MechanismConfig {
    pub fn new(mechanism: MechanismKind, budget: PrivacyBudget, seed: u64) -> Self {
        Self {
            mechanism,
            budget,
            p0: 1.0,
            lambda: 1.0,
            shuffle: false,
            seed,
            stationary: StationaryOptions::default(),
        }
    }

    pub fn with_p0(mut self, p0: f64) -> Self {
        self.p0 = p0;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_shuffle(mut self, shuffle: bool) -> Self {
        self.shuffle = shuffle;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivateEstimate {
    pub beta: ItemParams,
    /// Noised counts, or the largest per-user response count for randomized response.
    pub k_queries: usize,
    /// Graphs drawn before a connected one was found (1 for the complete graph).
    pub graph_attempts: usize,
}

fn connected_graph(m: usize, p0: f64, rng: &mut RngStream) -> Result<(SubsampleGraph, usize)> {
    if p0 >= 1.0 {
        return Ok((SubsampleGraph::complete(m), 1));
    }
    for attempt in 1..=MAX_GRAPH_ATTEMPTS {
        let g = sample_er_graph(m, p0, rng)?;
        if g.is_connected() {
            return Ok((g, attempt));
        }
    }
    Err(Error::DisconnectedGraph {
        attempts: MAX_GRAPH_ATTEMPTS,
    })
}

fn noised_estimate(x: &ResponseMatrix, config: &MechanismConfig) -> Result<PrivateEstimate> {
    let root = RngStream::new(config.seed);
    let (graph, graph_attempts) =
        connected_graph(x.n_items(), config.p0, &mut root.substream(GRAPH_STREAM))?;
    let y = compute_differentials(x);
    let k = noised_positions(&y, &graph);
    let plan = match config.mechanism {
        MechanismKind::Gaussian => gaussian_plan(config.budget, k.max(1))?,
        MechanismKind::Laplace => laplace_plan(config.budget, k.max(1))?,
        MechanismKind::RandomizedResponse => unreachable!("dispatched elsewhere"),
    };
    let noisy = privatize_differentials(&y, &plan, &graph, &mut root.substream(NOISE_STREAM))?;
    let beta = estimate_from_differentials(&noisy, config.lambda, config.stationary)?;
    Ok(PrivateEstimate {
        beta,
        k_queries: k,
        graph_attempts,
    })
}

fn response_estimate(x: &ResponseMatrix, config: &MechanismConfig) -> Result<PrivateEstimate> {
    let mut rng = RngStream::new(config.seed).substream(RESPONSE_STREAM);
    let noisy = randomized_response(x, config.budget, config.shuffle, &mut rng);
    let y = compute_differentials(&noisy);
    let beta = estimate_from_differentials(&y, config.lambda, config.stationary)?;
    let k_queries = (0..x.n_users())
        .map(|l| x.user_response_count(l))
        .max()
        .unwrap_or(0);
    Ok(PrivateEstimate {
        beta,
        k_queries,
        graph_attempts: 0,
    })
}

/// Runs whichever mechanism the config names.
pub fn run_mechanism(x: &ResponseMatrix, config: &MechanismConfig) -> Result<PrivateEstimate> {
    if !(0.0..=1.0).contains(&config.p0) {
        return Err(Error::InvalidParameter(format!(
            "p0 {} outside [0, 1]",
            config.p0
        )));
    }
    match config.mechanism {
        MechanismKind::Gaussian | MechanismKind::Laplace => noised_estimate(x, config),
        MechanismKind::RandomizedResponse => response_estimate(x, config),
    }
}

/// Private spectral estimate with discrete Gaussian or Laplace noise on the
/// differential counts.
pub fn private_spectral_estimate(x: &ResponseMatrix, config: &MechanismConfig) -> Result<ItemParams> {
    if config.mechanism == MechanismKind::RandomizedResponse {
        return Err(Error::InvalidParameter(
            "private_spectral_estimate takes the gaussian or laplace mechanism".into(),
        ));
    }
    run_mechanism(x, config).map(|e| e.beta)
}
