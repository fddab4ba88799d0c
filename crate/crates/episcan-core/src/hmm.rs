//! Three-state Poisson hidden Markov model over the epidemic trend.
//!
//! The latent state θ_t ∈ {1, 2, 3} encodes a decreasing, stationary, or
//! increasing trend; each state has a rate multiplier γ and counts are
//! emitted as `J_t ~ Poisson(γ_θ · Ĩ_t)` given the adjusted exposure Ĩ_t.
//! Everything here is a standard forward-backward / Baum-Welch stack run in
//! log space, with three extras this application needs:
//!
//! - states are relabeled by ascending γ after fitting, so state 3 is always
//!   "increasing" regardless of where EM wandered;
//! - degenerate windows (a state losing essentially all posterior mass, or a
//!   transition row losing all support) freeze the affected parameter instead
//!   of producing garbage;
//! - each time point gets a local index of significance
//!   `LIS_t = P(θ_t ∈ {1, 2} | data)`, the posterior probability of the null
//!   "not increasing", which downstream testing consumes.

use crate::error::{Error, Result};
use crate::logprob::log_sum_exp;
use crate::poisson::{poisson_log_pmf, poisson_upper_p};
use serde::{Deserialize, Serialize};

pub const N_STATES: usize = 3;

/// Posterior mass below which a state's rate is frozen for the step.
const MIN_STATE_MASS: f64 = 1e-8;
/// Denominator below which an M-step update is considered unsupported.
const MIN_DENOM: f64 = 1e-12;
/// Smallest admissible rate multiplier; an all-zero window would otherwise
/// drive γ to exactly 0 and break the next E-step.
const MIN_GAMMA: f64 = 1e-6;

/// Transition matrix used to initialize EM (moderately sticky, ordered
/// decreasing/stationary/increasing).
pub const DEFAULT_TRANSITION: [[f64; 3]; 3] = [
    [0.60, 0.30, 0.10],
    [0.05, 0.80, 0.15],
    [0.05, 0.15, 0.80],
];

/// Full parameter set ν = (π, A, γ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    /// Initial state distribution.
    pub pi: [f64; 3],
    /// Row-stochastic transition matrix, `a[i][j] = P(θ_{t+1}=j | θ_t=i)`.
    pub a: [[f64; 3]; 3],
    /// Per-state rate multipliers.
    pub gamma: [f64; 3],
}

impl HmmParams {
    pub fn new(pi: [f64; 3], a: [[f64; 3]; 3], gamma: [f64; 3]) -> Result<Self> {
        let p = Self { pi, a, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let check_simplex = |row: &[f64; 3], what: &str| -> Result<()> {
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::InvalidParams {
                    reason: format!("{what} has a negative or non-finite entry"),
                });
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParams {
                    reason: format!("{what} sums to {s}, expected 1 within 1e-12"),
                });
            }
            Ok(())
        };
        check_simplex(&self.pi, "initial distribution")?;
        for (i, row) in self.a.iter().enumerate() {
            check_simplex(row, &format!("transition row {i}"))?;
        }
        for &g in &self.gamma {
            if !g.is_finite() || g <= 0.0 {
                return Err(Error::InvalidParams {
                    reason: format!("rate multiplier {g} must be finite and positive"),
                });
            }
        }
        Ok(())
    }

    /// Largest absolute componentwise difference across all 15 parameters;
    /// the convergence norm for EM.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..N_STATES {
            m = m.max((self.pi[i] - other.pi[i]).abs());
            m = m.max((self.gamma[i] - other.gamma[i]).abs());
            for j in 0..N_STATES {
                m = m.max((self.a[i][j] - other.a[i][j]).abs());
            }
        }
        m
    }

    /// Stable 64-bit digest of the exact parameter bits (FNV-1a), used to
    /// tie decisions back to the fit that produced them.
    pub fn hash64(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |v: f64| {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        };
        for i in 0..N_STATES {
            eat(self.pi[i]);
        }
        for row in &self.a {
            for &v in row {
                eat(v);
            }
        }
        for &g in &self.gamma {
            eat(g);
        }
        h
    }
}

/// Posterior quantities from one forward-backward pass.
#[derive(Clone, Debug)]
pub struct PosteriorTables {
    /// `marginals[t][i] = P(θ_t = i+1 | data)`; rows sum to 1 exactly.
    pub marginals: Vec<[f64; 3]>,
    /// `pairs[t][i][j] = P(θ_t = i+1, θ_{t+1} = j+1 | data)`; each slice
    /// sums to 1 exactly. Empty when T = 1.
    pub pairs: Vec<[[f64; 3]; 3]>,
    /// Log-likelihood of the data under the parameters used.
    pub log_likelihood: f64,
}

impl PosteriorTables {
    /// Posterior probability that the trend is not increasing at `t`.
    pub fn lis(&self, t: usize) -> f64 {
        // The two-term sum can land 1 ulp above 1.0 when the third marginal
        // underflows; keep the result a probability.
        (self.marginals[t][0] + self.marginals[t][1]).min(1.0)
    }
}

fn check_window(counts: &[u64], exposures: &[f64]) -> Result<()> {
    if counts.is_empty() {
        return Err(Error::EmptyInput { what: "model window" });
    }
    if counts.len() != exposures.len() {
        return Err(Error::LengthMismatch { left: counts.len(), right: exposures.len() });
    }
    Ok(())
}

/// Per-time log emission densities `log P(J_t | θ_t = i)`.
fn log_emissions(params: &HmmParams, counts: &[u64], exposures: &[f64]) -> Result<Vec<[f64; 3]>> {
    counts
        .iter()
        .zip(exposures)
        .map(|(&j, &e)| {
            if !e.is_finite() || e <= 0.0 {
                return Err(Error::InvalidRate { rate: e });
            }
            let mut row = [0.0; 3];
            for (i, r) in row.iter_mut().enumerate() {
                *r = poisson_log_pmf(j, params.gamma[i] * e)?;
            }
            Ok(row)
        })
        .collect()
}

fn forward_from(params: &HmmParams, emissions: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let ln_a = ln_matrix(&params.a);
    let mut la = Vec::with_capacity(emissions.len());
    let mut first = [0.0; 3];
    for i in 0..N_STATES {
        first[i] = params.pi[i].ln() + emissions[0][i];
    }
    la.push(first);
    for t in 1..emissions.len() {
        let prev = la[t - 1];
        let mut row = [0.0; 3];
        for (i, r) in row.iter_mut().enumerate() {
            let terms = [
                prev[0] + ln_a[0][i],
                prev[1] + ln_a[1][i],
                prev[2] + ln_a[2][i],
            ];
            *r = log_sum_exp(&terms) + emissions[t][i];
        }
        la.push(row);
    }
    la
}

fn backward_from(params: &HmmParams, emissions: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let ln_a = ln_matrix(&params.a);
    let n = emissions.len();
    let mut lb = vec![[0.0; 3]; n];
    for t in (0..n - 1).rev() {
        let next = lb[t + 1];
        for i in 0..N_STATES {
            let terms = [
                ln_a[i][0] + emissions[t + 1][0] + next[0],
                ln_a[i][1] + emissions[t + 1][1] + next[1],
                ln_a[i][2] + emissions[t + 1][2] + next[2],
            ];
            lb[t][i] = log_sum_exp(&terms);
        }
    }
    lb
}

fn ln_matrix(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..N_STATES {
        for j in 0..N_STATES {
            out[i][j] = a[i][j].ln();
        }
    }
    out
}

/// Log-space forward pass; `forward[t][i] = log P(J_1..J_t, θ_t = i+1)`.
pub fn forward(params: &HmmParams, counts: &[u64], exposures: &[f64]) -> Result<Vec<[f64; 3]>> {
    params.validate()?;
    check_window(counts, exposures)?;
    let e = log_emissions(params, counts, exposures)?;
    Ok(forward_from(params, &e))
}

/// Log-space backward pass; `backward[t][i] = log P(J_{t+1}..J_T | θ_t = i+1)`,
/// zero at the final index.
pub fn backward(params: &HmmParams, counts: &[u64], exposures: &[f64]) -> Result<Vec<[f64; 3]>> {
    params.validate()?;
    check_window(counts, exposures)?;
    let e = log_emissions(params, counts, exposures)?;
    Ok(backward_from(params, &e))
}

/// Smoothed state marginals and transition pair posteriors for a window.
pub fn posterior(params: &HmmParams, counts: &[u64], exposures: &[f64]) -> Result<PosteriorTables> {
    params.validate()?;
    check_window(counts, exposures)?;
    let e = log_emissions(params, counts, exposures)?;
    let la = forward_from(params, &e);
    let lb = backward_from(params, &e);
    let n = e.len();
    let logz = log_sum_exp(&la[n - 1]);
    if !logz.is_finite() {
        return Err(Error::NonFinite { what: "window log-likelihood" });
    }

    let mut marginals = Vec::with_capacity(n);
    for t in 0..n {
        let mut row = [0.0; 3];
        for i in 0..N_STATES {
            row[i] = (la[t][i] + lb[t][i] - logz).exp();
        }
        let s: f64 = row.iter().sum();
        for v in &mut row {
            *v /= s;
        }
        marginals.push(row);
    }

    let ln_a = ln_matrix(&params.a);
    let mut pairs = Vec::with_capacity(n.saturating_sub(1));
    for t in 0..n - 1 {
        let mut block = [[0.0; 3]; 3];
        let mut s = 0.0;
        for i in 0..N_STATES {
            for j in 0..N_STATES {
                let v = (la[t][i] + ln_a[i][j] + e[t + 1][j] + lb[t + 1][j] - logz).exp();
                block[i][j] = v;
                s += v;
            }
        }
        for row in &mut block {
            for v in row {
                *v /= s;
            }
        }
        pairs.push(block);
    }

    Ok(PosteriorTables { marginals, pairs, log_likelihood: logz })
}

/// Outcome of one EM update.
#[derive(Clone, Debug)]
pub struct EmStep {
    /// Updated parameters.
    pub params: HmmParams,
    /// Log-likelihood of the window under the *input* parameters.
    pub log_likelihood: f64,
    /// Rates left unchanged because their state had no posterior support.
    pub frozen_gamma: [bool; 3],
    /// Transition rows left unchanged for the same reason.
    pub frozen_rows: [bool; 3],
}

/// One Baum-Welch update with closed-form M-step.
pub fn em_step(params: &HmmParams, counts: &[u64], exposures: &[f64]) -> Result<EmStep> {
    let tables = posterior(params, counts, exposures)?;
    let n = counts.len();

    let pi = tables.marginals[0];

    let mut a = params.a;
    let mut frozen_rows = [false; 3];
    if tables.pairs.is_empty() {
        frozen_rows = [true; 3];
    } else {
        for i in 0..N_STATES {
            let mut row = [0.0f64; 3];
            for block in &tables.pairs {
                for j in 0..N_STATES {
                    row[j] += block[i][j];
                }
            }
            let s: f64 = row.iter().sum();
            if s < MIN_DENOM {
                frozen_rows[i] = true;
                continue;
            }
            for j in 0..N_STATES {
                a[i][j] = row[j] / s;
            }
        }
    }

    let mut gamma = params.gamma;
    let mut frozen_gamma = [false; 3];
    for i in 0..N_STATES {
        let mut mass = 0.0f64;
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for t in 0..n {
            let w = tables.marginals[t][i];
            mass += w;
            num += w * counts[t] as f64;
            den += w * exposures[t];
        }
        if mass < MIN_STATE_MASS || den < MIN_DENOM {
            frozen_gamma[i] = true;
            continue;
        }
        gamma[i] = (num / den).max(MIN_GAMMA);
    }

    let params = HmmParams::new(pi, a, gamma)?;
    Ok(EmStep { params, log_likelihood: tables.log_likelihood, frozen_gamma, frozen_rows })
}

/// A converged (or iteration-capped) EM fit.
#[derive(Clone, Debug)]
pub struct EmFit {
    /// Final parameters, relabeled so γ is ascending.
    pub params: HmmParams,
    /// EM iterations actually performed.
    pub iterations: usize,
    /// Whether the max-norm parameter change fell below tolerance.
    pub converged: bool,
    /// `permutation[new] = old` state index mapping applied at the end.
    pub permutation: [usize; 3],
    /// Number of frozen-parameter events seen across all iterations.
    pub frozen_events: usize,
}

/// Run EM to convergence in the max-norm.
///
/// The log-likelihood must be non-decreasing (up to 1e-8 round-off) at every
/// iteration; a violation aborts with [`Error::EmDiverged`] since it signals
/// numerical trouble rather than a fittable window.
pub fn fit_em(
    counts: &[u64],
    exposures: &[f64],
    init: &HmmParams,
    tol: f64,
    max_iter: usize,
) -> Result<EmFit> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::InvalidConfig {
            field: "em_tol",
            reason: format!("tolerance {tol} must be finite and positive"),
        });
    }
    if max_iter == 0 {
        return Err(Error::InvalidConfig {
            field: "em_max_iter",
            reason: "need at least one iteration".into(),
        });
    }
    init.validate()?;

    let mut current = *init;
    let mut prev_ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut frozen_events = 0;
    for it in 1..=max_iter {
        let step = em_step(&current, counts, exposures)?;
        iterations = it;
        if step.log_likelihood < prev_ll - 1e-8 {
            return Err(Error::EmDiverged { iteration: it, drop: prev_ll - step.log_likelihood });
        }
        frozen_events += step.frozen_gamma.iter().filter(|&&f| f).count();
        frozen_events += step.frozen_rows.iter().filter(|&&f| f).count();
        let delta = current.max_abs_diff(&step.params);
        prev_ll = step.log_likelihood;
        current = step.params;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let (params, permutation) = relabel_states(&current);
    Ok(EmFit { params, iterations, converged, permutation, frozen_events })
}

/// Sort states by ascending γ, permuting π and both axes of A consistently.
///
/// Returns the relabeled parameters and `permutation[new] = old`.
pub fn relabel_states(params: &HmmParams) -> (HmmParams, [usize; 3]) {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| params.gamma[x].partial_cmp(&params.gamma[y]).unwrap());
    let mut out = *params;
    for new in 0..N_STATES {
        let old = order[new];
        out.pi[new] = params.pi[old];
        out.gamma[new] = params.gamma[old];
        for new_j in 0..N_STATES {
            out.a[new][new_j] = params.a[old][order[new_j]];
        }
    }
    (out, order)
}

/// Stationary distribution of a 3×3 row-stochastic matrix, by direct solve
/// of `π(A − I) = 0` with the normalization row appended.
fn stationary(a: &[[f64; 3]; 3]) -> Result<[f64; 3]> {
    // Unknowns π_0..π_2; equations: columns 0 and 1 of (A^T − I), plus Σπ = 1.
    let mut m = [
        [a[0][0] - 1.0, a[1][0], a[2][0], 0.0],
        [a[0][1], a[1][1] - 1.0, a[2][1], 0.0],
        [1.0, 1.0, 1.0, 1.0],
    ];
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
            .unwrap();
        if m[piv][col].abs() < 1e-14 {
            return Err(Error::InvalidParams {
                reason: "transition matrix has no unique stationary distribution".into(),
            });
        }
        m.swap(col, piv);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut pi = [0.0; 3];
    for i in 0..3 {
        pi[i] = (m[i][3] / m[i][i]).max(0.0);
    }
    let s: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= s;
    }
    Ok(pi)
}

/// Data-driven EM starting point for a window.
///
/// Rate multipliers come from quartiles of the count-to-exposure ratio,
/// clamped around 1 with a minimum spread; the transition matrix is the
/// fixed [`DEFAULT_TRANSITION`] and π its stationary distribution.
pub fn init_params(counts: &[u64], exposures: &[f64]) -> Result<HmmParams> {
    check_window(counts, exposures)?;
    if counts.len() < 10 {
        return Err(Error::SeriesTooShort { needed: 10, got: counts.len() });
    }
    let mut ratios: Vec<f64> = counts
        .iter()
        .zip(exposures)
        .map(|(&j, &e)| {
            if !e.is_finite() || e <= 0.0 {
                return Err(Error::InvalidRate { rate: e });
            }
            Ok((j as f64 + 0.5) / (e + 0.5))
        })
        .collect::<Result<_>>()?;
    ratios.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let quantile = |p: f64| -> f64 {
        let pos = p * (ratios.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        ratios[lo] * (1.0 - frac) + ratios[hi] * frac
    };
    let gamma = [quantile(0.25).min(0.98), 1.0, quantile(0.75).max(1.02)];
    let pi = stationary(&DEFAULT_TRANSITION)?;
    HmmParams::new(pi, DEFAULT_TRANSITION, gamma)
}

/// Per-time significance record for a fitted window.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LisRecord {
    /// Position within the window (0-based).
    pub t: usize,
    /// Posterior probability the trend is not increasing.
    pub lis: f64,
    /// Upper-tail Poisson p-value of the count against its exposure at unit
    /// rate (strict convention).
    pub p_value: f64,
    /// Digest of the parameters that produced this record.
    pub params_hash: u64,
}

/// LIS and baseline p-value for every position of a fitted window.
pub fn compute_lis(
    params: &HmmParams,
    counts: &[u64],
    exposures: &[f64],
) -> Result<Vec<LisRecord>> {
    let tables = posterior(params, counts, exposures)?;
    let hash = params.hash64();
    counts
        .iter()
        .enumerate()
        .map(|(t, &j)| {
            Ok(LisRecord {
                t,
                lis: tables.lis(t),
                p_value: poisson_upper_p(j, exposures[t])?,
                params_hash: hash,
            })
        })
        .collect()
}
