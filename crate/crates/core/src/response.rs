//! Rasch model types, synthetic response generation and CSV I/O.
//!
//! Responses live in an `n × m` matrix (users by items). Each cell is a
//! correct answer, an incorrect answer, or unobserved.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Probability that a user with ability `theta` answers an item of
/// difficulty `beta` positively: `e^θ / (e^θ + e^β)`.
pub fn rasch_response_probability(theta: f64, beta: f64) -> f64 {
    // logistic(θ − β), written to avoid overflow for large |θ − β|
    let z = theta - beta;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Item difficulties, normalized to mean zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemParams(Vec<f64>);

impl ItemParams {
    /// Builds item parameters, re-centering to mean zero. Input that is
    /// already centered to within 1e-12 is kept bit for bit.
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter(
                "item parameters must be finite".into(),
            ));
        }
        let mean = beta.iter().sum::<f64>() / beta.len().max(1) as f64;
        if mean.abs() <= 1e-12 {
            Ok(Self(beta))
        } else {
            Ok(Self(center(&beta)))
        }
    }

    /// `m` values equally spaced on `[lo, hi]`, centered.
    pub fn equispaced(m: usize, lo: f64, hi: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::TooFewItems(m));
        }
        let step = (hi - lo) / (m - 1) as f64;
        Self::new((0..m).map(|i| lo + step * i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Subtracts the mean.
pub fn center(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

/// User abilities.
#[derive(Debug, Clone, PartialEq)]
pub struct AbilityParams(Vec<f64>);

impl AbilityParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(
                "user abilities must be finite".into(),
            ));
        }
        Ok(Self(theta))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Response {
    Incorrect,
    Correct,
    Missing,
}

impl Response {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Response::Correct
        } else {
            Response::Incorrect
        }
    }

    pub fn is_observed(self) -> bool {
        self != Response::Missing
    }

    /// `Some(true)` for correct, `Some(false)` for incorrect, `None` if missing.
    pub fn bit(self) -> Option<bool> {
        match self {
            Response::Correct => Some(true),
            Response::Incorrect => Some(false),
            Response::Missing => None,
        }
    }

    /// Swaps correct and incorrect; missing stays missing.
    pub fn flipped(self) -> Self {
        match self {
            Response::Correct => Response::Incorrect,
            Response::Incorrect => Response::Correct,
            Response::Missing => Response::Missing,
        }
    }
}

/// Users × items matrix of binary responses, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    n_users: usize,
    n_items: usize,
    cells: Vec<Response>,
}

impl ResponseMatrix {
    pub fn from_rows(rows: Vec<Vec<Response>>) -> Result<Self> {
        let n_items = rows.first().map(Vec::len).ok_or(Error::Empty)?;
        if n_items < 2 {
            return Err(Error::TooFewItems(n_items));
        }
        let mut cells = Vec::with_capacity(rows.len() * n_items);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n_items {
                return Err(Error::RaggedRow {
                    row,
                    expected: n_items,
                    found: r.len(),
                });
            }
            cells.extend_from_slice(r);
        }
        Ok(Self {
            n_users: rows.len(),
            n_items,
            cells,
        })
    }

    /// Fully observed matrix from 0/1 rows.
    pub fn from_bits(rows: &[Vec<u8>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&b| Response::from_bit(b != 0)).collect())
                .collect(),
        )
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn get(&self, user: usize, item: usize) -> Response {
        self.cells[user * self.n_items + item]
    }

    pub fn set(&mut self, user: usize, item: usize, value: Response) {
        self.cells[user * self.n_items + item] = value;
    }

    pub fn row(&self, user: usize) -> &[Response] {
        &self.cells[user * self.n_items..(user + 1) * self.n_items]
    }

    pub(crate) fn row_mut(&mut self, user: usize) -> &mut [Response] {
        let m = self.n_items;
        &mut self.cells[user * m..(user + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Response]> {
        self.cells.chunks(self.n_items)
    }

    pub fn observed_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_observed()).count()
    }

    /// Number of observed responses of one user.
    pub fn user_response_count(&self, user: usize) -> usize {
        self.row(user).iter().filter(|c| c.is_observed()).count()
    }

    /// Copy with rows reordered: row `l` of the result is row `order[l]` of `self`.
    pub(crate) fn permuted_rows(&self, order: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len());
        for &l in order {
            cells.extend_from_slice(self.row(l));
        }
        Self {
            n_users: self.n_users,
            n_items: self.n_items,
            cells,
        }
    }
}

/// Parameters of the uniform sampling model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSpec {
    pub m: usize,
    pub n: usize,
    /// Probability that each cell is observed.
    pub p: f64,
    pub seed: u64,
}

/// Draws a response matrix: each cell is observed with probability `p`, and
/// observed cells are Bernoulli draws from the Rasch probability.
///
/// Each user row uses its own substream, so the result does not depend on the
/// number of worker threads.
pub fn generate_synthetic(
    spec: &SamplingSpec,
    beta: &ItemParams,
    theta: &AbilityParams,
) -> Result<ResponseMatrix> {
    if !(0.0..=1.0).contains(&spec.p) {
        return Err(Error::InvalidParameter(format!(
            "observation probability {} outside [0, 1]",
            spec.p
        )));
    }
    if spec.m < 2 {
        return Err(Error::TooFewItems(spec.m));
    }
    if spec.n == 0 {
        return Err(Error::InvalidParameter("need at least one user".into()));
    }
    if beta.len() != spec.m {
        return Err(Error::DimensionMismatch {
            what: "item parameters",
            expected: spec.m,
            actual: beta.len(),
        });
    }
    if theta.len() != spec.n {
        return Err(Error::DimensionMismatch {
            what: "user abilities",
            expected: spec.n,
            actual: theta.len(),
        });
    }

    let root = RngStream::new(spec.seed);
    let betas = beta.as_slice();
    let cells: Vec<Response> = theta
        .as_slice()
        .par_iter()
        .enumerate()
        .flat_map_iter(|(l, &th)| {
            let mut rng = root.substream(l as u64);
            betas
                .iter()
                .map(|&b| {
                    let observed = rng.uniform() < spec.p;
                    let correct = rng.uniform() < rasch_response_probability(th, b);
                    if observed {
                        Response::from_bit(correct)
                    } else {
                        Response::Missing
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    Ok(ResponseMatrix {
        n_users: spec.n,
        n_items: spec.m,
        cells,
    })
}

fn parse_cell(field: &str, row: usize, col: usize) -> Result<Response> {
    match field.trim() {
        "0" => Ok(Response::Incorrect),
        "1" => Ok(Response::Correct),
        "" | "NA" => Ok(Response::Missing),
        other => Err(Error::MalformedCell {
            row,
            col,
            value: other.to_string(),
        }),
    }
}

/// Reads responses: one row per user, one column per item, `0`/`1` with
/// `NA` or an empty field for missing. A header line starting with `item_`
/// is skipped.
pub fn read_responses<R: Read>(reader: R) -> Result<ResponseMatrix> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows: Vec<Vec<Response>> = Vec::new();
    let mut width: Option<usize> = None;
    for (line, record) in csv.records().enumerate() {
        let record = record?;
        if line == 0 && record.get(0).is_some_and(|f| f.trim().starts_with("item_")) {
            width = Some(record.len());
            continue;
        }
        let row = rows.len();
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                row,
                expected,
                found: record.len(),
            });
        }
        let cells = record
            .iter()
            .enumerate()
            .map(|(col, f)| parse_cell(f, row, col))
            .collect::<Result<Vec<_>>>()?;
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    ResponseMatrix::from_rows(rows)
}

pub fn write_responses<W: Write>(x: &ResponseMatrix, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record((0..x.n_items()).map(|i| format!("item_{i}")))?;
    for row in x.rows() {
        csv.write_record(row.iter().map(|c| match c {
            Response::Incorrect => "0",
            Response::Correct => "1",
            Response::Missing => "NA",
        }))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn load_responses(path: impl AsRef<Path>) -> Result<ResponseMatrix> {
    read_responses(BufReader::new(File::open(path)?))
}

pub fn save_responses(x: &ResponseMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_responses(x, BufWriter::new(File::create(path)?))
}

/// Writes item parameters as `item,beta` CSV.
pub fn write_item_params<W: Write>(beta: &ItemParams, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["item", "beta"])?;
    for (i, b) in beta.as_slice().iter().enumerate() {
        csv.write_record([i.to_string(), b.to_string()])?;
    }
    csv.flush()?;
    Ok(())
}

/// Reads `item,beta` CSV. Rows may come in any order but must cover
/// `0..m` exactly once.
pub fn read_item_params<R: Read>(reader: R) -> Result<ItemParams> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        let field = |col: usize| {
            record.get(col).map(str::trim).ok_or(Error::RaggedRow {
                row,
                expected: 2,
                found: record.len(),
            })
        };
        let bad = |col: usize, v: &str| Error::MalformedCell {
            row,
            col,
            value: v.to_string(),
        };
        let (i, b) = (field(0)?, field(1)?);
        let i: usize = i.parse().map_err(|_| bad(0, i))?;
        let b: f64 = b.parse().map_err(|_| bad(1, b))?;
        entries.push((i, b));
    }
    entries.sort_by_key(|e| e.0);
    if entries.iter().enumerate().any(|(k, e)| e.0 != k) {
        return Err(Error::InvalidParameter(
            "item indices must be 0..m without gaps or repeats".into(),
        ));
    }
    if entries.len() < 2 {
        return Err(Error::TooFewItems(entries.len()));
    }
    ItemParams::new(entries.into_iter().map(|e| e.1).collect())
}

pub fn load_item_params(path: impl AsRef<Path>) -> Result<ItemParams> {
    read_item_params(BufReader::new(File::open(path)?))
}

pub fn save_item_params(beta: &ItemParams, path: impl AsRef<Path>) -> Result<()> {
    write_item_params(beta, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn probability_examples() {
        assert_eq!(rasch_response_probability(0.0, 0.0), 0.5);
        assert_eq!(rasch_response_probability(1.0, 1.0), 0.5);
        assert!((rasch_response_probability(0.0, 3f64.ln()) - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn probability_antisymmetric(a in -30.0f64..30.0, b in -30.0f64..30.0) {
            let s = rasch_response_probability(a, b) + rasch_response_probability(b, a);
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn item_params_are_centered() {
        let b = ItemParams::new(vec![1.0, 2.0, 6.0]).unwrap();
        assert!(b.as_slice().iter().sum::<f64>().abs() < 1e-12);
        assert!(ItemParams::new(vec![f64::NAN, 0.0]).is_err());
    }

    fn spec(p: f64, n: usize, m: usize) -> SamplingSpec {
        SamplingSpec { m, n, p, seed: 11 }
    }

    #[test]
    fn observation_extremes() {
        let beta = ItemParams::equispaced(5, -1.0, 1.0).unwrap();
        let theta = AbilityParams::zeros(50);
        let none = generate_synthetic(&spec(0.0, 50, 5), &beta, &theta).unwrap();
        assert_eq!(none.observed_count(), 0);
        let all = generate_synthetic(&spec(1.0, 50, 5), &beta, &theta).unwrap();
        assert_eq!(all.observed_count(), 250);
    }

    #[test]
    fn balanced_items_have_half_positive_rate() {
        let m = 4;
        let n = 10_000;
        let beta = ItemParams::new(vec![0.0; m]).unwrap();
        let x = generate_synthetic(&spec(1.0, n, m), &beta, &AbilityParams::zeros(n)).unwrap();
        for i in 0..m {
            let ones = (0..n).filter(|&l| x.get(l, i) == Response::Correct).count();
            let mean = ones as f64 / n as f64;
            assert!((mean - 0.5).abs() < 0.02, "item {i}: {mean}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let beta = ItemParams::equispaced(6, -1.0, 1.0).unwrap();
        let theta = AbilityParams::zeros(300);
        let a = generate_synthetic(&spec(0.7, 300, 6), &beta, &theta).unwrap();
        let b = generate_synthetic(&spec(0.7, 300, 6), &beta, &theta).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let beta = ItemParams::equispaced(6, -1.0, 1.0).unwrap();
        let err = generate_synthetic(&spec(1.0, 10, 5), &beta, &AbilityParams::zeros(10));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        let err = generate_synthetic(&spec(1.0, 10, 6), &beta, &AbilityParams::zeros(9));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn csv_round_trip_with_missing() {
        use Response::*;
        let x = ResponseMatrix::from_rows(vec![
            vec![Correct, Incorrect, Missing, Correct],
            vec![Incorrect, Incorrect, Correct, Correct],
            vec![Correct, Missing, Incorrect, Incorrect],
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_responses(&x, &mut buf).unwrap();
        let back = read_responses(buf.as_slice()).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn item_params_round_trip_bit_exact() {
        let b = ItemParams::new(vec![0.1, -0.7, 1.0 / 3.0, 2.5e-17]).unwrap();
        let mut buf = Vec::new();
        write_item_params(&b, &mut buf).unwrap();
        assert_eq!(read_item_params(buf.as_slice()).unwrap(), b);
        assert!(read_item_params("item,beta\n0,1\n2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_accepts_empty_field_and_no_header() {
        let x = read_responses("1,,0\n0,1,NA\n".as_bytes()).unwrap();
        assert_eq!(x.n_users(), 2);
        assert_eq!(x.get(0, 1), Response::Missing);
        assert_eq!(x.get(1, 2), Response::Missing);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(matches!(
            read_responses("0,1,2\n".as_bytes()),
            Err(Error::MalformedCell { row: 0, col: 2, .. })
        ));
        assert!(matches!(
            read_responses("0,1,1\n0,1\n".as_bytes()),
            Err(Error::RaggedRow { row: 1, .. })
        ));
        assert!(matches!(
            read_responses("1\n0\n".as_bytes()),
            Err(Error::TooFewItems(1))
        ));
    }
}
