//! Emission matrices and hidden Markov model assembly.
//!
//! The emission (state-dependent probability) matrix is a 3xK table
//! pi(k|i): the probability of emitting symbol k from hidden state i. Rows
//! sum to one. Two structural properties drive the reversibility analysis:
//!
//! * **regularity** - no two rows are equal as vectors; equal rows mean two
//!   hidden states cannot be told apart by observation;
//! * **rank** - regular tables have rank 3 or 2, singular ones rank 2 or 1.
//!
//! When the rank is 2 every column is a linear combination of one
//! distinguished column and the ones vector; [`EmissionMatrix::distinguished_column`]
//! fixes that column deterministically.

use crate::algebra::{rank_with_tol, Mat3, Vec3};
use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::TOL;

/// Validated 3xK emission table with precomputed rank and regularity.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    /// Row-major entries, 3 rows of `k`.
    data: Vec<f64>,
    k: usize,
    rank: usize,
    regular: bool,
    tol: f64,
}

impl EmissionMatrix {
    /// Validate a table given as 3 rows of equal length, using the default
    /// tolerance.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        Self::with_tol(rows, TOL)
    }

    pub fn with_tol(rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        assert!(tol > 0.0, "tolerance must be positive");
        if rows.len() != 3 {
            return Err(Error::InvalidEmission(format!(
                "expected 3 rows, got {}",
                rows.len()
            )));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(Error::InvalidEmission("rows must be nonempty".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidEmission(format!(
                    "row {i} has length {}, expected {k}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidEmission(format!(
                        "entry ({i},{j}) = {v} lies outside [0, 1]"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > tol {
                return Err(Error::InvalidEmission(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let rank = rank_with_tol([&data[0..k], &data[k..2 * k], &data[2 * k..3 * k]], tol);
        let regular = rows_pairwise_distinct(rows, tol);
        Ok(EmissionMatrix {
            data,
            k,
            rank,
            regular,
            tol,
        })
    }

    /// Number of observation symbols K.
    pub fn n_symbols(&self) -> usize {
        self.k
    }

    /// Numerical rank at the build tolerance; always in {1, 2, 3}.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// True when no two rows are equal at the build tolerance.
    pub fn is_regular(&self) -> bool {
        self.regular
    }

    /// Row-distinctness at an explicit tolerance (per entry).
    pub fn is_regular_with_tol(&self, tol: f64) -> bool {
        let rows: Vec<Vec<f64>> = (0..3).map(|i| self.row(i).to_vec()).collect();
        rows_pairwise_distinct(&rows, tol)
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    /// Column phi_k of emission probabilities of symbol `k` per state.
    pub fn column(&self, k: usize) -> Result<Vec3> {
        if k >= self.k {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.k,
            });
        }
        Ok(Vec3::new(
            self.data[k],
            self.data[self.k + k],
            self.data[2 * self.k + k],
        ))
    }

    /// Diagonal embedding diag(phi_k).
    pub fn lambda_diag(&self, k: usize) -> Result<Mat3> {
        Ok(Mat3::diag(&self.column(k)?))
    }

    /// Index of the first column not parallel to the ones vector, i.e. the
    /// first column whose entries are not all equal. `None` exactly when
    /// every column is constant (rank-1 tables).
    pub fn distinguished_column(&self) -> Option<usize> {
        (0..self.k).find(|&k| {
            let c = self.column(k).expect("index in range");
            (c[0] - c[1]).abs() > self.tol || (c[1] - c[2]).abs() > self.tol
        })
    }
}

fn rows_pairwise_distinct(rows: &[Vec<f64>], tol: f64) -> bool {
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let equal = rows[i]
                .iter()
                .zip(rows[j].iter())
                .all(|(a, b)| (a - b).abs() <= tol);
            if equal {
                return false;
            }
        }
    }
    true
}

/// A three-state hidden Markov model: chain, emission table and the
/// stationary initial law (the chain always starts from mu).
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    chain: ChainModel,
    emission: EmissionMatrix,
}

impl HmmModel {
    pub fn new(chain: ChainModel, emission: EmissionMatrix) -> Self {
        HmmModel { chain, emission }
    }

    pub fn chain(&self) -> &ChainModel {
        &self.chain
    }

    pub fn emission(&self) -> &EmissionMatrix {
        &self.emission
    }

    pub fn n_symbols(&self) -> usize {
        self.emission.n_symbols()
    }
}
