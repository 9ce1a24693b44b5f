//! Model generators shared by the integration suites.
#![allow(dead_code)] // each test target compiles its own copy

use hmmrev::{ChainModel, EmissionMatrix, HmmModel, Mat3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// The irreversible rate matrix with a repeated eigenvalue 4/3 used as a
/// worked example throughout the suites.
pub fn repeated_root_ctmc() -> ChainModel {
    ChainModel::continuous(Mat3([
        [-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [2.0 / 3.0, -1.0, 1.0 / 3.0],
        [0.5, 0.5, -1.0],
    ]))
    .unwrap()
}

/// Discrete chain whose one-step matrix has determinant exactly zero (row 3
/// is the mean of rows 1 and 2) while the flux is -1/22.
pub fn zero_eigenvalue_dtmc() -> ChainModel {
    ChainModel::discrete(Mat3([
        [0.0, 0.5, 0.5],
        [0.5, 0.25, 0.25],
        [0.25, 0.375, 0.375],
    ]))
    .unwrap()
}

pub fn emission(rows: &[&[f64]]) -> EmissionMatrix {
    EmissionMatrix::new(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

/// Full-rank three-symbol emission.
pub fn emission_rank3() -> EmissionMatrix {
    emission(&[&[1.0, 0.0, 0.0], &[0.25, 0.5, 0.25], &[0.0, 0.0, 1.0]])
}

/// Regular rank-2 three-symbol emission (third row is an affine mix of the
/// first two).
pub fn emission_rank2_k3() -> EmissionMatrix {
    emission(&[
        &[1.0, 0.0, 0.0],
        &[0.25, 0.5, 0.25],
        &[0.5, 1.0 / 3.0, 1.0 / 6.0],
    ])
}

/// Regular rank-2 binary (clipped) emission.
pub fn emission_rank2_k2() -> EmissionMatrix {
    emission(&[&[1.0, 0.0], &[0.25, 0.75], &[0.0, 1.0]])
}

/// Singular binary emissions: observation merges two hidden states.
pub fn emission_merge_01() -> EmissionMatrix {
    emission(&[&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]])
}

pub fn emission_merge_12() -> EmissionMatrix {
    emission(&[&[0.0, 1.0], &[1.0, 0.0], &[1.0, 0.0]])
}

/// Random irreducible rate matrix; every off-diagonal rate is bounded away
/// from zero.
pub fn random_ctmc(rng: &mut ChaCha8Rng) -> ChainModel {
    let mut m = [[0.0f64; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        let mut sum = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = rng.random_range(0.05..2.5);
                sum += *v;
            }
        }
        row[i] = -sum;
    }
    ChainModel::continuous(Mat3(m)).unwrap()
}

/// Random irreducible stochastic matrix with entries bounded away from zero.
pub fn random_dtmc(rng: &mut ChaCha8Rng) -> ChainModel {
    let mut m = [[0.0f64; 3]; 3];
    for row in m.iter_mut() {
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = rng.random_range(0.05..1.0);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    ChainModel::discrete(Mat3(m)).unwrap()
}

/// Reversible rate matrix built from detailed balance: pick a positive law
/// mu and symmetric conductances w, set q_ij = w_ij / mu_i.
pub fn random_reversible_ctmc(rng: &mut ChaCha8Rng) -> ChainModel {
    let mut mu = [0.0f64; 3];
    let mut total = 0.0;
    for v in mu.iter_mut() {
        *v = rng.random_range(0.2..1.0);
        total += *v;
    }
    for v in mu.iter_mut() {
        *v /= total;
    }
    let w01 = rng.random_range(0.1..1.0);
    let w02 = rng.random_range(0.1..1.0);
    let w12 = rng.random_range(0.1..1.0);
    let mut m = [[0.0f64; 3]; 3];
    let w = [[0.0, w01, w02], [w01, 0.0, w12], [w02, w12, 0.0]];
    for i in 0..3 {
        let mut sum = 0.0;
        for j in 0..3 {
            if i != j {
                m[i][j] = w[i][j] / mu[i];
                sum += m[i][j];
            }
        }
        m[i][i] = -sum;
    }
    ChainModel::continuous(Mat3(m)).unwrap()
}

/// Reversible stochastic matrix: a detailed-balance generator scaled until
/// I + Q has nonnegative diagonal.
pub fn random_reversible_dtmc(rng: &mut ChaCha8Rng) -> ChainModel {
    let chain = random_reversible_ctmc(rng);
    let q = chain.generator();
    let max_exit = (0..3).map(|i| -q[(i, i)]).fold(0.0f64, f64::max);
    let scale = 1.0 / (1.05 * max_exit);
    let mut p = [[0.0f64; 3]; 3];
    for (i, row) in p.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = q[(i, j)] * scale + if i == j { 1.0 } else { 0.0 };
        }
    }
    ChainModel::discrete(Mat3(p)).unwrap()
}

/// Rate matrix with a dominant cycle, giving complex conjugate eigenvalues.
pub fn complex_spectrum_ctmc(idx: usize) -> ChainModel {
    let eps = 0.02 * (idx + 1) as f64;
    let m = Mat3([
        [-(1.0 + eps), 1.0, eps],
        [eps, -(1.0 + eps), 1.0],
        [1.0, eps, -(1.0 + eps)],
    ]);
    let chain = ChainModel::continuous(m).unwrap();
    assert!(chain.eigen().delta < 0.0, "constructed chain must be complex");
    chain
}

/// Random emission table with K symbols; entries bounded away from zero, so
/// generically regular and full rank (when K >= 3).
pub fn random_emission(rng: &mut ChaCha8Rng, k: usize) -> EmissionMatrix {
    let rows: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            let mut row: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
            row
        })
        .collect();
    EmissionMatrix::new(&rows).unwrap()
}

/// Rank-2 emission: the third row is an affine combination of the first two.
pub fn random_rank2_emission(rng: &mut ChaCha8Rng, k: usize) -> EmissionMatrix {
    loop {
        let base = random_emission(rng, k);
        let r0 = base.row(0).to_vec();
        let r1 = base.row(1).to_vec();
        let theta = rng.random_range(0.15..0.85);
        let r2: Vec<f64> = r0
            .iter()
            .zip(&r1)
            .map(|(a, b)| theta * a + (1.0 - theta) * b)
            .collect();
        let e = EmissionMatrix::new(&[r0, r1, r2]).unwrap();
        if e.rank() == 2 {
            return e;
        }
    }
}

/// Rank-1 emission: all rows equal.
pub fn random_rank1_emission(rng: &mut ChaCha8Rng, k: usize) -> EmissionMatrix {
    let base = random_emission(rng, k);
    let row = base.row(0).to_vec();
    EmissionMatrix::new(&[row.clone(), row.clone(), row]).unwrap()
}

/// Singular emission with exactly two equal rows (rank 2 when K >= 2).
pub fn random_singular_emission(rng: &mut ChaCha8Rng, k: usize) -> EmissionMatrix {
    loop {
        let base = random_emission(rng, k);
        let r0 = base.row(0).to_vec();
        let r2 = base.row(2).to_vec();
        let e = EmissionMatrix::new(&[r0.clone(), r0, r2]).unwrap();
        if e.rank() == 2 {
            return e;
        }
    }
}

/// Discrete chain whose one-step matrix has an exact zero eigenvalue by
/// construction (third row an affine mix of the first two) and nonzero flux.
pub fn random_zero_eigenvalue_dtmc(rng: &mut ChaCha8Rng) -> ChainModel {
    loop {
        let mut rows = [[0.0f64; 3]; 2];
        for row in rows.iter_mut() {
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = rng.random_range(0.05..1.0);
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let theta: f64 = rng.random_range(0.2..0.8);
        let r2 = [
            theta * rows[0][0] + (1.0 - theta) * rows[1][0],
            theta * rows[0][1] + (1.0 - theta) * rows[1][1],
            theta * rows[0][2] + (1.0 - theta) * rows[1][2],
        ];
        let p = Mat3([rows[0], rows[1], r2]);
        if let Ok(chain) = ChainModel::discrete(p) {
            if chain.flux().abs() > chain.flux_threshold() {
                return chain;
            }
        }
    }
}

pub fn model(chain: ChainModel, emission: EmissionMatrix) -> HmmModel {
    HmmModel::new(chain, emission)
}
