//! Minimal fixed-size linear algebra for 3-vectors, 3x3 matrices and 3xK
//! probability tables.
//!
//! Everything downstream works at this scale, so the kernels are written out
//! directly: cofactor determinants, full-pivot row reduction for numerical
//! rank, and a pivoted 3x3 solve. All values are plain `f64`; complex
//! arithmetic only appears in the eigenvalue pair type.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::ops::{Index, IndexMut};

/// Real 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    /// The ones vector e = (1,1,1)'.
    pub const ONES: Vec3 = Vec3([1.0, 1.0, 1.0]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    /// Componentwise product. `v.hadamard(&phi)` is the row vector v * diag(phi).
    pub fn hadamard(&self, other: &Vec3) -> Vec3 {
        Vec3([
            self.0[0] * other.0[0],
            self.0[1] * other.0[1],
            self.0[2] * other.0[2],
        ])
    }

    pub fn sum(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    pub fn scale(&self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn sub(&self, other: &Vec3) -> Vec3 {
        Vec3([
            self.0[0] - other.0[0],
            self.0[1] - other.0[1],
            self.0[2] - other.0[2],
        ])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Row-vector times matrix: returns v' M as a vector.
    pub fn mul_mat(&self, m: &Mat3) -> Vec3 {
        let mut out = [0.0; 3];
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.0[0] * m.0[0][j] + self.0[1] * m.0[1][j] + self.0[2] * m.0[2][j];
        }
        Vec3(out)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Real 3x3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn zeros() -> Mat3 {
        Mat3([[0.0; 3]; 3])
    }

    pub fn diag(v: &Vec3) -> Mat3 {
        let mut m = Mat3::zeros();
        for i in 0..3 {
            m.0[i][i] = v.0[i];
        }
        m
    }

    /// Rank-one product col * row' (e.g. L = e mu).
    pub fn outer(col: &Vec3, row: &Vec3) -> Mat3 {
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = col.0[i] * row.0[j];
            }
        }
        m
    }

    pub fn transpose(&self) -> Mat3 {
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn matmul(&self, other: &Mat3) -> Mat3 {
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[i][0] * other.0[0][j]
                    + self.0[i][1] * other.0[1][j]
                    + self.0[i][2] * other.0[2][j];
            }
        }
        m
    }

    /// Matrix times column vector.
    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        Vec3([
            self.0[0][0] * v.0[0] + self.0[0][1] * v.0[1] + self.0[0][2] * v.0[2],
            self.0[1][0] * v.0[0] + self.0[1][1] * v.0[1] + self.0[1][2] * v.0[2],
            self.0[2][0] * v.0[0] + self.0[2][1] * v.0[1] + self.0[2][2] * v.0[2],
        ])
    }

    pub fn add(&self, other: &Mat3) -> Mat3 {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] += other.0[i][j];
            }
        }
        m
    }

    pub fn sub(&self, other: &Mat3) -> Mat3 {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] -= other.0[i][j];
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] *= s;
            }
        }
        m
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3(self.0[i])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0, |m: f64, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

/// Pair of eigenvalues; either both real or complex conjugates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPair {
    pub first: Complex64,
    pub second: Complex64,
}

impl ComplexPair {
    /// True when both members are real to within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.first.im.abs() <= tol && self.second.im.abs() <= tol
    }

    /// True when the pair is closed under conjugation to within `tol`
    /// (covers both the real case and a genuine conjugate pair).
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        (self.first.re - self.second.re).abs() <= tol
            && (self.first.im + self.second.im).abs() <= tol
            || self.is_real(tol)
    }
}

/// Cofactor-expansion determinant.
pub fn det3(m: &Mat3) -> f64 {
    let a = m.0;
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Numerical rank of a 3-row table by Gaussian elimination with full
/// pivoting.
///
/// A pivot counts while its magnitude exceeds `tol * max(1, largest input
/// entry magnitude)`. The threshold is fixed from the original table, not
/// re-derived per step.
pub fn rank_with_tol(rows: [&[f64]; 3], tol: f64) -> usize {
    assert!(tol > 0.0, "tolerance must be positive");
    let k = rows[0].len();
    assert!(
        rows[1].len() == k && rows[2].len() == k,
        "rows must share a length"
    );
    if k == 0 {
        return 0;
    }
    let mut work: Vec<[f64; 3]> = (0..k).map(|j| [rows[0][j], rows[1][j], rows[2][j]]).collect();
    let scale = work
        .iter()
        .flatten()
        .fold(0.0, |m: f64, x| m.max(x.abs()))
        .max(1.0);
    let threshold = tol * scale;

    let mut active_cols: Vec<usize> = (0..k).collect();
    let mut rank = 0;
    let mut row_start = 0;
    while rank < 3 && !active_cols.is_empty() {
        // full pivot: largest entry over remaining rows and columns
        let mut best = (0usize, 0usize, 0.0f64); // (row, position in active_cols, |value|)
        for r in row_start..3 {
            for (cpos, &c) in active_cols.iter().enumerate() {
                let v = work[c][r].abs();
                if v > best.2 {
                    best = (r, cpos, v);
                }
            }
        }
        if best.2 <= threshold {
            break;
        }
        let pivot_col = active_cols.swap_remove(best.1);
        // bring pivot row into position by swapping entries in every column
        if best.0 != row_start {
            for col in work.iter_mut() {
                col.swap(best.0, row_start);
            }
        }
        let pivot = work[pivot_col][row_start];
        for r in (row_start + 1)..3 {
            let factor = work[pivot_col][r] / pivot;
            if factor != 0.0 {
                for &c in active_cols.iter() {
                    work[c][r] -= factor * work[c][row_start];
                }
                work[pivot_col][r] = 0.0;
            }
        }
        rank += 1;
        row_start += 1;
    }
    rank
}

/// Solve a 3x3 linear system a x = b by Gaussian elimination with partial
/// pivoting.
pub fn solve_linear_3(a: &Mat3, b: &Vec3) -> Result<Vec3> {
    const PIVOT_TOL: f64 = 1e-12;
    let scale = a.max_abs().max(b.max_abs()).max(1.0);
    let mut m = a.0;
    let mut rhs = b.0;
    for col in 0..3 {
        let mut pivot_row = col;
        for r in (col + 1)..3 {
            if m[r][col].abs() > m[pivot_row][col].abs() {
                pivot_row = r;
            }
        }
        let pivot = m[pivot_row][col];
        if pivot.abs() < PIVOT_TOL * scale {
            return Err(Error::SingularSystem { pivot });
        }
        if pivot_row != col {
            m.swap(pivot_row, col);
            rhs.swap(pivot_row, col);
        }
        for r in (col + 1)..3 {
            let factor = m[r][col] / m[col][col];
            if factor != 0.0 {
                for c in col..3 {
                    m[r][c] -= factor * m[col][c];
                }
                rhs[r] -= factor * rhs[col];
            }
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..3 {
            acc -= m[i][j] * x[j];
        }
        x[i] = acc / m[i][i];
    }
    Ok(Vec3(x))
}
