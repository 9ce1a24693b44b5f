//! Independent verification machinery: matrix exponentials, exhaustive
//! hidden-path enumeration, trajectory simulation, Monte Carlo estimation
//! and the exhaustive flux scan.
//!
//! Nothing here reuses the spectral transition formula, so agreement
//! between these oracles and the closed forms is a genuine cross-check.
//!
//! The scan and the Monte Carlo driver are data parallel (rayon) when the
//! `parallel` feature is on. Replicate r draws from an independent RNG
//! stream derived from (seed, r) and the scan reduces over a total order,
//! so results are identical for identical inputs regardless of thread
//! count; the `*_seq` variants are the single-threaded reference paths the
//! tests and benches compare against.

use crate::algebra::{Mat3, Vec3};
use crate::analysis::{fold_likelihood, LikelihoodQuery};
use crate::chain::{discrete_step, ChainKind, ChainModel};
use crate::error::{Error, Result};
use crate::hmm::HmmModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Matrix exponential exp(Q t) by scaling and squaring with a truncated
/// Taylor series.
///
/// The argument is halved until its max-norm is at most 1/2; the series is
/// truncated once a term's max-norm drops below 1e-16.
pub fn matrix_exponential(q: &Mat3, t: f64) -> Mat3 {
    assert!(t >= 0.0 && t.is_finite(), "time must be finite nonnegative");
    if t == 0.0 {
        return Mat3::IDENTITY;
    }
    let a = q.scale(t);
    let norm = a.max_abs();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings as i32));

    let mut sum = Mat3::IDENTITY;
    let mut term = Mat3::IDENTITY;
    let mut k = 1.0;
    loop {
        term = term.matmul(&scaled).scale(1.0 / k);
        sum = sum.add(&term);
        if term.max_abs() < 1e-16 {
            break;
        }
        k += 1.0;
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

/// n-th matrix power by repeated squaring.
pub fn matrix_power(p: &Mat3, n: u32) -> Mat3 {
    let mut result = Mat3::IDENTITY;
    let mut base = *p;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = result.matmul(&base);
        }
        base = base.matmul(&base);
        e >>= 1;
    }
    result
}

/// Hidden-path count guard for the enumeration oracle (3^12 paths).
const ENUM_MAX_LEN: usize = 12;

/// Brute-force likelihood of a discrete-time query: a literal sum over all
/// 3^n hidden state tuples at the observation instants.
///
/// Multi-step gaps are bridged by iterated products of the one-step matrix
/// (exact marginalization over intermediate states), so the cost stays at
/// 3^n rather than 3^(total span). Independent of the spectral transition
/// formula.
pub fn enumerate_likelihood_dtmc(model: &HmmModel, query: &LikelihoodQuery) -> Result<f64> {
    if model.chain().kind() != ChainKind::Discrete {
        return Err(Error::InvalidQuery(
            "enumeration oracle requires a discrete-time model".into(),
        ));
    }
    let n = query.len();
    if n > ENUM_MAX_LEN {
        return Err(Error::QueryTooLong {
            len: n,
            limit: ENUM_MAX_LEN,
        });
    }
    let k = model.n_symbols();
    for &s in query.symbols() {
        if s >= k {
            return Err(Error::SymbolOutOfRange { symbol: s, len: k });
        }
    }
    let one_step = model.chain().one_step();
    let bridges: Vec<Mat3> = query
        .gaps()
        .iter()
        .map(|&g| {
            let steps = discrete_step(g)?;
            let mut m = Mat3::IDENTITY;
            for _ in 0..steps {
                m = m.matmul(&one_step);
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;

    let mu = model.chain().stationary();
    let emit: Vec<Vec3> = query
        .symbols()
        .iter()
        .map(|&s| model.emission().column(s).expect("validated above"))
        .collect();

    let paths = 3usize.pow(n as u32);
    let mut states = vec![0usize; n];
    let mut total = 0.0;
    for code in 0..paths {
        let mut digits = code;
        for s in states.iter_mut() {
            *s = digits % 3;
            digits /= 3;
        }
        let mut weight = mu[states[0]] * emit[0][states[0]];
        for (k, bridge) in bridges.iter().enumerate() {
            weight *= bridge[(states[k], states[k + 1])] * emit[k + 1][states[k + 1]];
        }
        total += weight;
    }
    Ok(total)
}

/// One sampled hidden trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    /// Jump chain of a continuous-time model: `times[0] = 0` is the start,
    /// later entries are jump instants; `states[i]` holds from `times[i]`
    /// until the next jump. Consecutive states differ.
    Continuous { times: Vec<f64>, states: Vec<usize> },
    /// State sequence of a discrete-time model, one entry per step.
    Discrete { states: Vec<usize> },
}

impl Trajectory {
    /// Hidden state occupied at `time` (continuous) or step `time`
    /// (discrete, rounded).
    pub fn state_at(&self, time: f64) -> usize {
        match self {
            Trajectory::Continuous { times, states } => {
                let idx = times.partition_point(|&s| s <= time);
                states[idx.saturating_sub(1)]
            }
            Trajectory::Discrete { states } => states[time.round() as usize],
        }
    }

    pub fn states(&self) -> &[usize] {
        match self {
            Trajectory::Continuous { states, .. } => states,
            Trajectory::Discrete { states } => states,
        }
    }
}

fn sample_index(probs: impl Iterator<Item = f64>, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        cum += p;
        last = i;
        if u < cum {
            return i;
        }
    }
    last
}

fn sample_ctmc_with(chain: &ChainModel, horizon: f64, rng: &mut ChaCha8Rng) -> Trajectory {
    let q = chain.generator();
    let mu = chain.stationary();
    let mut state = sample_index((0..3).map(|i| mu[i]), rng);
    let mut times = vec![0.0];
    let mut states = vec![state];
    let mut t = 0.0;
    loop {
        let rate = -q[(state, state)];
        let u: f64 = rng.random();
        // inverse CDF of Exp(rate); 1-u is in (0, 1]
        let dt = -(1.0 - u).ln() / rate;
        t += dt;
        if t > horizon {
            break;
        }
        let s = state;
        state = sample_index(
            (0..3).map(|j| if j == s { 0.0 } else { q[(s, j)] / rate }),
            rng,
        );
        times.push(t);
        states.push(state);
    }
    Trajectory::Continuous { times, states }
}

fn sample_dtmc_with(chain: &ChainModel, steps: u32, rng: &mut ChaCha8Rng) -> Trajectory {
    let p = chain.one_step();
    let mu = chain.stationary();
    let mut state = sample_index((0..3).map(|i| mu[i]), rng);
    let mut states = vec![state];
    for _ in 0..steps {
        state = sample_index((0..3).map(|j| p[(state, j)]), rng);
        states.push(state);
    }
    Trajectory::Discrete { states }
}

/// Sample one continuous-time trajectory over `[0, horizon]`.
///
/// The initial state is drawn from the stationary law; holding times are
/// exponential with the diagonal rates. Deterministic for a given seed.
pub fn simulate_ctmc(chain: &ChainModel, horizon: f64, seed: u64) -> Trajectory {
    assert!(horizon > 0.0, "horizon must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_ctmc_with(chain, horizon, &mut rng)
}

/// Sample a discrete-time state sequence of `steps + 1` states.
pub fn simulate_dtmc(chain: &ChainModel, steps: u32, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_dtmc_with(chain, steps, &mut rng)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    /// Sample standard deviation divided by sqrt(replicates).
    pub std_error: f64,
    pub replicates: u64,
    pub seed: u64,
}

fn mc_replicate(model: &HmmModel, query: &LikelihoodQuery, seed: u64, replicate: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    let traj = match model.chain().kind() {
        ChainKind::Continuous => {
            let horizon = *query.times().last().expect("nonempty");
            if horizon > 0.0 {
                sample_ctmc_with(model.chain(), horizon, &mut rng)
            } else {
                // single instant: only the initial state matters
                let mu = model.chain().stationary();
                Trajectory::Continuous {
                    times: vec![0.0],
                    states: vec![sample_index((0..3).map(|i| mu[i]), &mut rng)],
                }
            }
        }
        ChainKind::Discrete => {
            let steps = query.times().last().expect("nonempty").round() as u32;
            sample_dtmc_with(model.chain(), steps, &mut rng)
        }
    };
    query
        .times()
        .iter()
        .zip(query.symbols())
        .all(|(&t, &want)| {
            let state = traj.state_at(t);
            let row = model.emission().row(state);
            sample_index(row.iter().copied(), &mut rng) == want
        })
}

fn mc_from_successes(successes: u64, replicates: u64, seed: u64) -> McEstimate {
    let n = replicates as f64;
    let p = successes as f64 / n;
    let std_error = if replicates > 1 {
        (p * (1.0 - p) / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    McEstimate {
        estimate: p,
        std_error,
        replicates,
        seed,
    }
}

fn mc_validate(model: &HmmModel, query: &LikelihoodQuery, replicates: u64) -> Result<()> {
    if replicates == 0 {
        return Err(Error::InvalidQuery("replicates must be at least 1".into()));
    }
    let k = model.n_symbols();
    for &s in query.symbols() {
        if s >= k {
            return Err(Error::SymbolOutOfRange { symbol: s, len: k });
        }
    }
    if model.chain().kind() == ChainKind::Discrete {
        for &t in query.times() {
            discrete_step(t)?;
        }
    }
    Ok(())
}

/// Monte Carlo estimate of the query likelihood: the fraction of sampled
/// trajectories whose emitted symbols match the query.
///
/// Replicate r draws from RNG stream r of the seed, so the estimate does
/// not depend on scheduling or thread count.
pub fn monte_carlo_joint(
    model: &HmmModel,
    query: &LikelihoodQuery,
    replicates: u64,
    seed: u64,
) -> Result<McEstimate> {
    mc_validate(model, query, replicates)?;
    #[cfg(feature = "parallel")]
    let successes = (0..replicates)
        .into_par_iter()
        .map(|r| mc_replicate(model, query, seed, r) as u64)
        .sum();
    #[cfg(not(feature = "parallel"))]
    let successes = (0..replicates)
        .map(|r| mc_replicate(model, query, seed, r) as u64)
        .sum();
    Ok(mc_from_successes(successes, replicates, seed))
}

/// Single-threaded reference path of [`monte_carlo_joint`].
pub fn monte_carlo_joint_seq(
    model: &HmmModel,
    query: &LikelihoodQuery,
    replicates: u64,
    seed: u64,
) -> Result<McEstimate> {
    mc_validate(model, query, replicates)?;
    let successes = (0..replicates)
        .map(|r| mc_replicate(model, query, seed, r) as u64)
        .sum();
    Ok(mc_from_successes(successes, replicates, seed))
}

/// Outcome of an exhaustive flux scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// Largest |flux| over every scanned query.
    pub max_abs_flux: f64,
    /// Observation times of the maximizing query.
    pub witness_times: Vec<f64>,
    /// Symbols of the maximizing query.
    pub witness_symbols: Vec<usize>,
    /// Number of queries evaluated.
    pub evaluations: u64,
}

const SCAN_MAX_LEN: usize = 6;
const SCAN_MAX_EVALS: u128 = 10_000_000;

struct ScanSpace {
    transitions: Vec<Mat3>,
    columns: Vec<Vec3>,
    grid: Vec<f64>,
    k: usize,
}

impl ScanSpace {
    fn build(model: &HmmModel, max_len: usize, grid: &[f64]) -> Result<(Self, u128)> {
        if max_len == 0 || max_len > SCAN_MAX_LEN {
            return Err(Error::ScanTooLarge(format!(
                "max_len {max_len} outside 1..={SCAN_MAX_LEN}"
            )));
        }
        if grid.is_empty() {
            return Err(Error::ScanTooLarge("empty time grid".into()));
        }
        for &g in grid {
            if !g.is_finite() || g <= 0.0 {
                return Err(Error::ScanTooLarge(format!(
                    "grid gap {g} must be positive"
                )));
            }
        }
        let k = model.n_symbols();
        let g = grid.len();
        let mut total: u128 = 0;
        for len in 1..=max_len {
            total += (k as u128).pow(len as u32) * (g as u128).pow(len as u32 - 1);
        }
        if total > SCAN_MAX_EVALS {
            return Err(Error::ScanTooLarge(format!(
                "{total} query evaluations exceed the {SCAN_MAX_EVALS} guard"
            )));
        }
        let transitions: Vec<Mat3> = grid
            .iter()
            .map(|&gap| model.chain().transition_matrix(gap))
            .collect::<Result<_>>()?;
        let columns: Vec<Vec3> = (0..k)
            .map(|s| model.emission().column(s).expect("s < k"))
            .collect();
        Ok((
            ScanSpace {
                transitions,
                columns,
                grid: grid.to_vec(),
                k,
            },
            total,
        ))
    }

    /// |flux| of the query encoded by (len, index).
    fn eval(&self, mu: &Vec3, len: usize, index: u64) -> f64 {
        let g = self.grid.len() as u64;
        let kk = self.k as u64;
        let gap_codes = g.pow(len as u32 - 1);
        let mut sym_code = index / gap_codes;
        let mut gap_code = index % gap_codes;

        let mut syms = [0usize; SCAN_MAX_LEN];
        for s in syms.iter_mut().take(len) {
            *s = (sym_code % kk) as usize;
            sym_code /= kk;
        }
        let mut gaps = [0usize; SCAN_MAX_LEN - 1];
        for gp in gaps.iter_mut().take(len - 1) {
            *gp = (gap_code % g) as usize;
            gap_code /= g;
        }

        let mut cols = [Vec3::default(); SCAN_MAX_LEN];
        let mut mats = [&self.transitions[0]; SCAN_MAX_LEN - 1];
        for i in 0..len {
            cols[i] = self.columns[syms[i]];
        }
        for i in 0..len - 1 {
            mats[i] = &self.transitions[gaps[i]];
        }
        let forward = fold_likelihood(mu, &cols[..len], &mats[..len - 1]);

        for i in 0..len {
            cols[i] = self.columns[syms[len - 1 - i]];
        }
        for i in 0..len - 1 {
            mats[i] = &self.transitions[gaps[len - 2 - i]];
        }
        let backward = fold_likelihood(mu, &cols[..len], &mats[..len - 1]);
        (forward - backward).abs()
    }

    fn decode(&self, len: usize, index: u64) -> (Vec<f64>, Vec<usize>) {
        let g = self.grid.len() as u64;
        let gap_codes = g.pow(len as u32 - 1);
        let mut sym_code = index / gap_codes;
        let mut gap_code = index % gap_codes;
        let mut symbols = Vec::with_capacity(len);
        for _ in 0..len {
            symbols.push((sym_code % self.k as u64) as usize);
            sym_code /= self.k as u64;
        }
        let mut times = vec![0.0];
        for _ in 0..len - 1 {
            let gap = self.grid[(gap_code % g) as usize];
            gap_code /= g;
            times.push(times.last().unwrap() + gap);
        }
        (times, symbols)
    }
}

// total order on (|flux|, length, index): larger flux wins, ties resolved
// toward the shorter query and then the smaller index, so the reduction is
// associative and scheduling independent
fn better(a: (f64, usize, u64), b: (f64, usize, u64)) -> (f64, usize, u64) {
    if a.0 > b.0 || (a.0 == b.0 && (a.1, a.2) <= (b.1, b.2)) {
        a
    } else {
        b
    }
}

/// Maximum |flux| over every symbol string of length <= `max_len` with
/// every gap tuple drawn from `grid`, plus the maximizing query.
///
/// Refuses scans beyond 10^7 evaluations or length 6.
pub fn exhaustive_flux_scan(model: &HmmModel, max_len: usize, grid: &[f64]) -> Result<ScanResult> {
    let (space, total) = ScanSpace::build(model, max_len, grid)?;
    let mu = *model.chain().stationary();
    let mut best = (f64::NEG_INFINITY, 0usize, 0u64);
    for len in 1..=max_len {
        let count = (space.k as u64).pow(len as u32)
            * (space.grid.len() as u64).pow(len as u32 - 1);
        #[cfg(feature = "parallel")]
        let local = (0..count)
            .into_par_iter()
            .map(|i| (space.eval(&mu, len, i), len, i))
            .reduce(|| (f64::NEG_INFINITY, 0usize, 0u64), better);
        #[cfg(not(feature = "parallel"))]
        let local = (0..count)
            .map(|i| (space.eval(&mu, len, i), len, i))
            .fold((f64::NEG_INFINITY, 0usize, 0u64), better);
        best = better(best, local);
    }
    let (times, symbols) = space.decode(best.1, best.2);
    Ok(ScanResult {
        max_abs_flux: best.0,
        witness_times: times,
        witness_symbols: symbols,
        evaluations: total as u64,
    })
}

/// Single-threaded reference path of [`exhaustive_flux_scan`].
pub fn exhaustive_flux_scan_seq(
    model: &HmmModel,
    max_len: usize,
    grid: &[f64],
) -> Result<ScanResult> {
    let (space, total) = ScanSpace::build(model, max_len, grid)?;
    let mu = *model.chain().stationary();
    let mut best = (f64::NEG_INFINITY, 0usize, 0u64);
    for len in 1..=max_len {
        let count = (space.k as u64).pow(len as u32)
            * (space.grid.len() as u64).pow(len as u32 - 1);
        let local = (0..count)
            .map(|i| (space.eval(&mu, len, i), len, i))
            .fold((f64::NEG_INFINITY, 0usize, 0u64), better);
        best = better(best, local);
    }
    let (times, symbols) = space.decode(best.1, best.2);
    Ok(ScanResult {
        max_abs_flux: best.0,
        witness_times: times,
        witness_symbols: symbols,
        evaluations: total as u64,
    })
}

/// Default scan gaps per chain kind.
pub fn default_scan_grid(kind: ChainKind) -> Vec<f64> {
    match kind {
        ChainKind::Continuous => vec![0.5, 1.0, 2.0],
        ChainKind::Discrete => vec![1.0, 2.0, 3.0],
    }
}
