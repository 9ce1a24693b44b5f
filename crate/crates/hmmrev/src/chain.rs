//! Validated three-state Markov chains with spectral transition formulas.
//!
//! A continuous-time chain is given by a rate matrix Q (rows sum to zero,
//! off-diagonal entries nonnegative); a discrete-time chain by a stochastic
//! matrix P, internally reduced to Q = P - I so both kinds share one
//! representation. Writing the off-diagonal rates as
//!
//! ```text
//!       [ -a1  a2  a3 ]
//!   Q = [  b1 -b2  b3 ]        a1 = a2+a3,  b2 = b1+b3,  c3 = c1+c2
//!       [  c1  c2 -c3 ]
//! ```
//!
//! the chain is irreducible when a1*b2*c3 > 0, b1+c1 > 0, a2+c2 > 0 and
//! a3+b3 > 0. Its stationary law mu satisfies mu Q = 0 and the probability
//! flux
//!
//! ```text
//!   nu = mu1*a2 - mu2*b1 = mu2*b3 - mu3*c2 = mu3*c1 - mu1*a3
//! ```
//!
//! vanishes exactly when the chain is reversible (Kolmogorov's criterion:
//! a2*b3*c1 = a3*c2*b1).
//!
//! The characteristic equation of Q is lambda(lambda^2 + alpha lambda +
//! beta) = 0 with alpha = -trace(Q) and beta the sum of principal 2x2
//! minors; the nonzero eigenvalues are -lambda1, -lambda2. Transition
//! matrices have the closed form
//!
//! ```text
//!   P(t) = g_t L + d_t Q + f_t I,     L = e mu,
//! ```
//!
//! where the scalar coefficients (d, f, g) depend only on t and the
//! eigenvalue pair; see [`ChainModel::spectral_coefficients`].

use crate::algebra::{solve_linear_3, ComplexPair, Mat3, Vec3};
use crate::error::{Error, Result};
use crate::TOL;
use num_complex::Complex64;

/// Time convention of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    /// Rate-matrix chain evolving in continuous time.
    Continuous,
    /// Stochastic-matrix chain evolving in integer steps.
    Discrete,
}

/// Eigen data of the generator: the quadratic factor of the characteristic
/// polynomial and its roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenData {
    /// -trace(Q); lambda1 + lambda2.
    pub alpha: f64,
    /// Sum of principal 2x2 minors of Q; lambda1 * lambda2.
    pub beta: f64,
    /// Discriminant alpha^2 - 4 beta.
    pub delta: f64,
    /// The pair (lambda1, lambda2); the nonzero eigenvalues of Q are their
    /// negatives. lambda1 has the larger real part, ties broken by
    /// nonnegative imaginary part.
    pub lambda: ComplexPair,
}

/// Scalar weights expressing a transition matrix in the basis {L, Q, I}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralCoefficients {
    pub d: f64,
    pub f: f64,
    /// Always exactly 1 - f.
    pub g: f64,
}

/// A validated three-state chain with derived stationary and spectral data.
///
/// Immutable after construction; all methods are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    kind: ChainKind,
    generator: Mat3,
    stationary: Vec3,
    flux: f64,
    eigen: EigenData,
    tol: f64,
}

/// Maximum imaginary residue tolerated when a provably real quantity is
/// evaluated through complex arithmetic.
const IM_RESIDUE: f64 = 1e-10;

fn real_part_checked(z: Complex64, what: &str) -> f64 {
    assert!(
        z.im.abs() <= IM_RESIDUE,
        "imaginary residue {:.3e} in {} exceeds {:.1e}",
        z.im,
        what,
        IM_RESIDUE
    );
    z.re
}

impl ChainModel {
    /// Build a continuous-time chain from a rate matrix with the default
    /// tolerance.
    pub fn continuous(matrix: Mat3) -> Result<Self> {
        Self::with_tol(ChainKind::Continuous, matrix, TOL)
    }

    /// Build a discrete-time chain from a one-step stochastic matrix with
    /// the default tolerance.
    pub fn discrete(matrix: Mat3) -> Result<Self> {
        Self::with_tol(ChainKind::Discrete, matrix, TOL)
    }

    /// Build a chain, validating the candidate matrix.
    ///
    /// For `Continuous` the matrix is a rate matrix; for `Discrete` it is
    /// the one-step transition matrix P, stored internally as Q = P - I.
    pub fn with_tol(kind: ChainKind, matrix: Mat3, tol: f64) -> Result<Self> {
        assert!(tol > 0.0, "tolerance must be positive");
        let generator = match kind {
            ChainKind::Continuous => {
                validate_rate_matrix(&matrix, tol)?;
                matrix
            }
            ChainKind::Discrete => {
                validate_stochastic_matrix(&matrix, tol)?;
                matrix.sub(&Mat3::IDENTITY)
            }
        };
        check_irreducible(&generator)?;

        let stationary = stationary_distribution(&generator)?;
        for i in 0..3 {
            if stationary[i] <= 0.0 {
                return Err(Error::InvalidMatrix(format!(
                    "stationary distribution has nonpositive entry {:.3e} at state {i}",
                    stationary[i]
                )));
            }
        }

        let q = &generator;
        let mu = &stationary;
        let flux = mu[0] * q[(0, 1)] - mu[1] * q[(1, 0)];
        #[cfg(debug_assertions)]
        {
            let scale = generator.max_abs().max(1.0);
            let nu2 = mu[1] * q[(1, 2)] - mu[2] * q[(2, 1)];
            let nu3 = mu[2] * q[(2, 0)] - mu[0] * q[(0, 2)];
            debug_assert!((flux - nu2).abs() <= tol * scale && (flux - nu3).abs() <= tol * scale);
        }

        let eigen = eigen_from_generator(&generator);
        Ok(ChainModel {
            kind,
            generator,
            stationary,
            flux,
            eigen,
            tol,
        })
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    /// The generator Q (for discrete chains, P - I).
    pub fn generator(&self) -> &Mat3 {
        &self.generator
    }

    /// One-step transition matrix P = Q + I (the input matrix for discrete
    /// chains; for continuous chains this is just a formal object).
    pub fn one_step(&self) -> Mat3 {
        self.generator.add(&Mat3::IDENTITY)
    }

    /// Stationary distribution mu with mu Q = 0 and entries summing to 1.
    pub fn stationary(&self) -> &Vec3 {
        &self.stationary
    }

    /// Probability flux nu = mu1 a2 - mu2 b1.
    pub fn flux(&self) -> f64 {
        self.flux
    }

    /// Threshold below which the flux is treated as zero.
    pub fn flux_threshold(&self) -> f64 {
        self.tol * self.generator.max_abs().max(1.0)
    }

    pub fn eigen(&self) -> &EigenData {
        &self.eigen
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// The rank-one matrix L = e mu; every row equals the stationary law.
    pub fn stationary_projector(&self) -> Mat3 {
        Mat3::outer(&Vec3::ONES, &self.stationary)
    }

    /// Off-diagonal entries (a2, a3, b1, b3, c1, c2) of the generator.
    pub fn rates(&self) -> (f64, f64, f64, f64, f64, f64) {
        let q = &self.generator;
        (
            q[(0, 1)],
            q[(0, 2)],
            q[(1, 0)],
            q[(1, 2)],
            q[(2, 0)],
            q[(2, 1)],
        )
    }

    /// Kolmogorov's cycle criterion: a2 b3 c1 = a3 c2 b1.
    ///
    /// Equivalent to the flux being zero; both are checked at the model
    /// tolerance.
    pub fn is_kolmogorov_reversible(&self) -> bool {
        let (a2, a3, b1, b3, c1, c2) = self.rates();
        let m = self.generator.max_abs().max(1.0);
        (a2 * b3 * c1 - a3 * c2 * b1).abs() <= self.tol * m * m * m
    }

    /// True when the flux is zero at the model tolerance.
    pub fn is_reversible(&self) -> bool {
        self.flux.abs() <= self.flux_threshold()
    }

    /// Whether the repeated-eigenvalue formulas apply at this chain's
    /// discriminant.
    pub fn is_confluent(&self) -> bool {
        self.eigen.delta.abs() <= self.confluent_threshold()
    }

    fn confluent_threshold(&self) -> f64 {
        self.tol * (self.eigen.alpha * self.eigen.alpha).max(1.0)
    }

    /// Coefficients (d, f, g) of P(time) = g L + d Q + f I.
    ///
    /// Continuous kind, distinct eigenvalues:
    ///
    /// ```text
    ///   d_t = (exp(-l2 t) - exp(-l1 t)) / (l1 - l2)
    ///   f_t = (l1 exp(-l2 t) - l2 exp(-l1 t)) / (l1 - l2)
    /// ```
    ///
    /// and at a repeated root l = alpha/2 the limits d_t = t exp(-l t),
    /// f_t = (1 + l t) exp(-l t). Discrete kind replaces exp(-l t) by
    /// (1 - l)^n, with limits d_n = n (1-l)^(n-1) and
    /// f_n = (1-l)^(n-1) (1 - l + n l). Complex conjugate eigenvalues are
    /// evaluated in complex arithmetic; the imaginary residue is asserted
    /// small and discarded.
    ///
    /// The branch switch |delta| <= tol * max(1, alpha^2) matches the one
    /// used by the closed-form flux formulas, so both evaluation routes
    /// agree to near machine precision.
    pub fn spectral_coefficients(&self, time: f64) -> Result<SpectralCoefficients> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidQuery(format!(
                "time {time} must be finite and nonnegative"
            )));
        }
        if time == 0.0 {
            return Ok(SpectralCoefficients {
                d: 0.0,
                f: 1.0,
                g: 0.0,
            });
        }
        let l1 = self.eigen.lambda.first;
        let l2 = self.eigen.lambda.second;
        let confluent = self.is_confluent();
        let (d, f) = match self.kind {
            ChainKind::Continuous => {
                if confluent {
                    // repeated root at the midpoint alpha/2
                    let l = 0.5 * self.eigen.alpha;
                    let e = (-l * time).exp();
                    (time * e, (1.0 + l * time) * e)
                } else {
                    let e1 = (-l1 * time).exp();
                    let e2 = (-l2 * time).exp();
                    let denom = l1 - l2;
                    let d = (e2 - e1) / denom;
                    let f = (l1 * e2 - l2 * e1) / denom;
                    (
                        real_part_checked(d, "spectral coefficient d"),
                        real_part_checked(f, "spectral coefficient f"),
                    )
                }
            }
            ChainKind::Discrete => {
                let n = discrete_step(time)?;
                if confluent {
                    let l = 0.5 * self.eigen.alpha;
                    let v = 1.0 - l;
                    let vp = v.powi(n as i32 - 1);
                    (n as f64 * vp, vp * (v + n as f64 * l))
                } else {
                    let u = Complex64::new(1.0, 0.0) - l2;
                    let v = Complex64::new(1.0, 0.0) - l1;
                    let un = u.powu(n);
                    let vn = v.powu(n);
                    let denom = l1 - l2;
                    let d = (un - vn) / denom;
                    let f = (l1 * un - l2 * vn) / denom;
                    (
                        real_part_checked(d, "spectral coefficient d"),
                        real_part_checked(f, "spectral coefficient f"),
                    )
                }
            }
        };
        Ok(SpectralCoefficients { d, f, g: 1.0 - f })
    }

    /// Transition matrix over `time` via the spectral closed form.
    ///
    /// Rows sum to 1; tiny negative entries from rounding are not clamped.
    pub fn transition_matrix(&self, time: f64) -> Result<Mat3> {
        let c = self.spectral_coefficients(time)?;
        Ok(self
            .stationary_projector()
            .scale(c.g)
            .add(&self.generator.scale(c.d))
            .add(&Mat3::IDENTITY.scale(c.f)))
    }
}

/// Interpret a query time as a discrete step count.
pub(crate) fn discrete_step(time: f64) -> Result<u32> {
    let n = time.round();
    if (time - n).abs() > 1e-9 || n < 0.0 || n > u32::MAX as f64 {
        return Err(Error::InvalidQuery(format!(
            "discrete-time step {time} must be a nonnegative integer"
        )));
    }
    Ok(n as u32)
}

fn validate_rate_matrix(m: &Mat3, tol: f64) -> Result<()> {
    let scale = m.max_abs().max(1.0);
    for i in 0..3 {
        for j in 0..3 {
            if !m[(i, j)].is_finite() {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({i},{j}) is not finite"
                )));
            }
            if i != j && m[(i, j)] < 0.0 {
                return Err(Error::InvalidMatrix(format!(
                    "off-diagonal rate ({i},{j}) = {} is negative",
                    m[(i, j)]
                )));
            }
        }
        let row_sum = m.row(i).sum();
        if row_sum.abs() > tol * scale {
            return Err(Error::InvalidMatrix(format!(
                "row {i} sums to {row_sum:.3e}, expected 0"
            )));
        }
    }
    Ok(())
}

fn validate_stochastic_matrix(m: &Mat3, tol: f64) -> Result<()> {
    for i in 0..3 {
        for j in 0..3 {
            let v = m[(i, j)];
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({i},{j}) = {v} lies outside [0, 1]"
                )));
            }
        }
        let row_sum = m.row(i).sum();
        if (row_sum - 1.0).abs() > tol {
            return Err(Error::InvalidMatrix(format!(
                "row {i} sums to {row_sum}, expected 1"
            )));
        }
    }
    Ok(())
}

fn check_irreducible(q: &Mat3) -> Result<()> {
    let a2 = q[(0, 1)];
    let a3 = q[(0, 2)];
    let b1 = q[(1, 0)];
    let b3 = q[(1, 2)];
    let c1 = q[(2, 0)];
    let c2 = q[(2, 1)];
    let exit_product = (a2 + a3) * (b1 + b3) * (c1 + c2);
    if exit_product <= 0.0 {
        return Err(Error::NotIrreducible(
            "some state has no outgoing transitions (a1 b2 c3 = 0)".into(),
        ));
    }
    for (value, name) in [
        (b1 + c1, "state 0 unreachable (b1 + c1 = 0)"),
        (a2 + c2, "state 1 unreachable (a2 + c2 = 0)"),
        (a3 + b3, "state 2 unreachable (a3 + b3 = 0)"),
    ] {
        if value <= 0.0 {
            return Err(Error::NotIrreducible(name.into()));
        }
    }
    Ok(())
}

/// Solve mu Q = 0 with the normalization sum(mu) = 1, replacing the third
/// (redundant) balance equation by the sum constraint.
fn stationary_distribution(q: &Mat3) -> Result<Vec3> {
    let qt = q.transpose();
    let mut system = qt;
    for j in 0..3 {
        system[(2, j)] = 1.0;
    }
    let rhs = Vec3::new(0.0, 0.0, 1.0);
    let mu = solve_linear_3(&system, &rhs)?;
    Ok(mu)
}

fn eigen_from_generator(q: &Mat3) -> EigenData {
    let alpha = -q.trace();
    let minor = |i: usize, j: usize| q[(i, i)] * q[(j, j)] - q[(i, j)] * q[(j, i)];
    let beta = minor(0, 1) + minor(0, 2) + minor(1, 2);
    let delta = alpha * alpha - 4.0 * beta;
    let lambda = if delta >= 0.0 {
        let s = delta.sqrt();
        ComplexPair {
            first: Complex64::new(0.5 * (alpha + s), 0.0),
            second: Complex64::new(0.5 * (alpha - s), 0.0),
        }
    } else {
        let s = (-delta).sqrt();
        ComplexPair {
            first: Complex64::new(0.5 * alpha, 0.5 * s),
            second: Complex64::new(0.5 * alpha, -0.5 * s),
        }
    };
    EigenData {
        alpha,
        beta,
        delta,
        lambda,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Irreversible rate matrix with a repeated eigenvalue 4/3; the standin
    /// worked example used throughout the test suite.
    pub(crate) fn repeated_root_ctmc() -> ChainModel {
        let q = Mat3([
            [-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [2.0 / 3.0, -1.0, 1.0 / 3.0],
            [0.5, 0.5, -1.0],
        ]);
        ChainModel::continuous(q).unwrap()
    }

    fn symmetric_ctmc() -> ChainModel {
        let q = Mat3([[-2.0, 1.0, 1.0], [1.0, -2.0, 1.0], [1.0, 1.0, -2.0]]);
        ChainModel::continuous(q).unwrap()
    }

    #[test]
    fn repeated_root_chain_stationary_and_flux() {
        let chain = repeated_root_ctmc();
        let mu = chain.stationary();
        assert_relative_eq!(mu[0], 15.0 / 32.0, epsilon = 1e-13);
        assert_relative_eq!(mu[1], 9.0 / 32.0, epsilon = 1e-13);
        assert_relative_eq!(mu[2], 8.0 / 32.0, epsilon = 1e-13);
        assert_relative_eq!(chain.flux(), -1.0 / 32.0, epsilon = 1e-13);
    }

    #[test]
    fn repeated_root_chain_eigen_data() {
        let chain = repeated_root_ctmc();
        let e = chain.eigen();
        assert_relative_eq!(e.alpha, 8.0 / 3.0, epsilon = 1e-13);
        assert_relative_eq!(e.beta, 16.0 / 9.0, epsilon = 1e-13);
        assert!(e.delta.abs() < 1e-13);
        assert!((e.lambda.first.re - 4.0 / 3.0).abs() < 1e-6);
        assert!((e.lambda.second.re - 4.0 / 3.0).abs() < 1e-6);
        assert!(chain.is_confluent());
    }

    #[test]
    fn symmetric_chain_is_uniform_and_fluxless() {
        let chain = symmetric_ctmc();
        let mu = chain.stationary();
        for i in 0..3 {
            assert_relative_eq!(mu[i], 1.0 / 3.0, epsilon = 1e-14);
        }
        assert!(chain.flux().abs() < 1e-15);
        let e = chain.eigen();
        assert_relative_eq!(e.alpha, 6.0, epsilon = 1e-13);
        assert_relative_eq!(e.beta, 9.0, epsilon = 1e-13);
        assert_relative_eq!(e.delta, 0.0, epsilon = 1e-12);
        assert_relative_eq!(e.lambda.first.re, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn unreachable_state_is_rejected() {
        // state 1 has no incoming transitions: a2 = c2 = 0
        let q = Mat3([[-1.0, 0.0, 1.0], [1.0, -2.0, 1.0], [1.0, 0.0, -1.0]]);
        assert!(matches!(
            ChainModel::continuous(q),
            Err(Error::NotIrreducible(_))
        ));
    }

    #[test]
    fn bad_row_sum_is_rejected() {
        let q = Mat3([[-1.0, 0.5, 0.6], [1.0, -2.0, 1.0], [1.0, 1.0, -2.0]]);
        assert!(matches!(
            ChainModel::continuous(q),
            Err(Error::InvalidMatrix(_))
        ));
    }

    #[test]
    fn negative_rate_is_rejected() {
        let q = Mat3([[1.0, -2.0, 1.0], [1.0, -2.0, 1.0], [1.0, 1.0, -2.0]]);
        assert!(matches!(
            ChainModel::continuous(q),
            Err(Error::InvalidMatrix(_))
        ));
    }

    #[test]
    fn discrete_entry_out_of_range_is_rejected() {
        let p = Mat3([[1.1, -0.1, 0.0], [0.3, 0.4, 0.3], [0.2, 0.2, 0.6]]);
        assert!(matches!(
            ChainModel::discrete(p),
            Err(Error::InvalidMatrix(_))
        ));
    }

    #[test]
    fn coefficients_at_time_zero() {
        let chain = repeated_root_ctmc();
        let c = chain.spectral_coefficients(0.0).unwrap();
        assert_eq!((c.d, c.f, c.g), (0.0, 1.0, 0.0));
    }

    #[test]
    fn repeated_root_coefficients_at_t_one() {
        let chain = repeated_root_ctmc();
        let c = chain.spectral_coefficients(1.0).unwrap();
        let e = (-4.0f64 / 3.0).exp();
        assert_relative_eq!(c.d, e, epsilon = 1e-12);
        assert_relative_eq!(c.f, (7.0 / 3.0) * e, epsilon = 1e-12);
        assert_relative_eq!(c.g, 1.0 - c.f, epsilon = 0.0);
    }

    #[test]
    fn discrete_one_step_is_exact() {
        let p = Mat3([[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]]);
        let chain = ChainModel::discrete(p).unwrap();
        let c = chain.spectral_coefficients(1.0).unwrap();
        assert_relative_eq!(c.d, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.f, 1.0, epsilon = 1e-12);
        let p1 = chain.transition_matrix(1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(p1[(i, j)], p[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn transition_matrix_at_zero_is_identity() {
        let chain = repeated_root_ctmc();
        let p = chain.transition_matrix(0.0).unwrap();
        assert_eq!(p, Mat3::IDENTITY);
    }

    #[test]
    fn transition_rows_sum_to_one() {
        let chain = repeated_root_ctmc();
        for &t in &[0.1, 0.5, 1.0, 2.0, 5.0] {
            let p = chain.transition_matrix(t).unwrap();
            for i in 0..3 {
                assert_relative_eq!(p.row(i).sum(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn long_horizon_converges_to_stationary_rows() {
        let chain = repeated_root_ctmc();
        let p = chain.transition_matrix(50.0).unwrap();
        let mu = chain.stationary();
        for i in 0..3 {
            for j in 0..3 {
                assert!((p[(i, j)] - mu[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn kolmogorov_matches_flux_sign() {
        assert!(symmetric_ctmc().is_kolmogorov_reversible());
        assert!(!repeated_root_ctmc().is_kolmogorov_reversible());
        assert!(!repeated_root_ctmc().is_reversible());
        assert!(symmetric_ctmc().is_reversible());
    }

    #[test]
    fn complex_spectrum_chain_still_yields_real_transitions() {
        let q = Mat3([[-1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [1.0, 0.0, -1.0]]);
        let chain = ChainModel::continuous(q).unwrap();
        assert!(chain.eigen().delta < 0.0);
        let p = chain.transition_matrix(0.7).unwrap();
        for i in 0..3 {
            assert_relative_eq!(p.row(i).sum(), 1.0, epsilon = 1e-12);
            for j in 0..3 {
                assert!(p[(i, j)] >= -1e-12 && p[(i, j)] <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn non_integer_discrete_time_is_rejected() {
        let p = Mat3([[0.5, 0.25, 0.25], [0.25, 0.5, 0.25], [0.25, 0.25, 0.5]]);
        let chain = ChainModel::discrete(p).unwrap();
        assert!(matches!(
            chain.spectral_coefficients(1.5),
            Err(Error::InvalidQuery(_))
        ));
    }
}
