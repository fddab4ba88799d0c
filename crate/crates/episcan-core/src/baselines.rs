//! Streaming p-value procedures with online FDR control: LORD++, SAFFRON,
//! and ADDIS.
//!
//! All three allocate a test level α_t from a spending sequence γ and the
//! history of rejections (and, for the adaptive ones, of candidate and
//! discarded p-values). They are implemented as small state machines so the
//! analysis loop can feed them one p-value per step; `run_*` wrappers process
//! whole sequences.
//!
//! Spending sequences:
//! - LORD++ uses `γ_j ∝ log(max(j,2)) / (j·exp(√log j))`. This series
//!   converges too slowly to sum naively (the tail beyond 10^6 terms still
//!   holds almost half the mass), so the normalizer is a partial sum plus the
//!   closed-form integral tail `∫ u·e^{−√u} du = 2e^{−s}(s³+3s²+6s+6)`,
//!   `s = √u`, which is stable to ~1e-11 across cutoffs.
//! - SAFFRON and ADDIS use `γ_j ∝ j^{−1.6}`, normalized by ζ(1.6) via partial
//!   sum plus midpoint tail.

use crate::error::{Error, Result};
use std::sync::OnceLock;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig {
            field: "alpha",
            reason: format!("target level {alpha} must lie strictly inside (0, 1)"),
        });
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 0.0 && p <= 1.0) {
        return Err(Error::InvalidPValue { value: p });
    }
    Ok(())
}

fn lord_gamma_raw(j: usize) -> f64 {
    let jf = j as f64;
    (jf.max(2.0)).ln() / (jf * jf.ln().sqrt().exp())
}

fn lord_gamma_normalizer() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        const N: usize = 200_000;
        let mut sum = 0.0;
        for j in 1..=N {
            sum += lord_gamma_raw(j);
        }
        let s = ((N as f64 + 0.5).ln()).sqrt();
        sum + 2.0 * (-s).exp() * (s * s * s + 3.0 * s * s + 6.0 * s + 6.0)
    })
}

/// LORD++ spending weight for lag `j ≥ 1`; the weights sum to 1 over all j.
pub fn lord_gamma(j: usize) -> f64 {
    debug_assert!(j >= 1);
    lord_gamma_raw(j) / lord_gamma_normalizer()
}

fn zeta_normalizer() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        const N: usize = 200_000;
        const S: f64 = 1.6;
        let mut sum = 0.0;
        for j in 1..=N {
            sum += (j as f64).powf(-S);
        }
        sum + (N as f64 + 0.5).powf(1.0 - S) / (S - 1.0)
    })
}

/// SAFFRON/ADDIS spending weight `∝ j^{−1.6}` for lag `j ≥ 1`.
pub fn power_gamma(j: usize) -> f64 {
    debug_assert!(j >= 1);
    (j as f64).powf(-1.6) / zeta_normalizer()
}

/// LORD++ state machine.
#[derive(Clone, Debug)]
pub struct LordPlusPlus {
    alpha: f64,
    w0: f64,
    t: usize,
    rejections: Vec<usize>,
    last_level: f64,
}

impl LordPlusPlus {
    /// Default initial wealth `W_0 = α/2`.
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_wealth(alpha, alpha / 2.0)
    }

    pub fn with_wealth(alpha: f64, w0: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(w0 > 0.0 && w0 <= alpha) {
            return Err(Error::InvalidConfig {
                field: "w0",
                reason: format!("initial wealth {w0} must lie in (0, alpha]"),
            });
        }
        Ok(Self { alpha, w0, t: 0, rejections: Vec::new(), last_level: f64::NAN })
    }

    /// Test level for the upcoming step.
    pub fn next_level(&self) -> f64 {
        let t = self.t + 1;
        let mut level = self.w0 * lord_gamma(t);
        for (j, &tau) in self.rejections.iter().enumerate() {
            let coef = if j == 0 { self.alpha - self.w0 } else { self.alpha };
            level += coef * lord_gamma(t - tau);
        }
        level
    }

    /// Level actually used on the most recent step.
    pub fn last_level(&self) -> f64 {
        self.last_level
    }

    pub fn step(&mut self, p: f64) -> Result<bool> {
        check_p(p)?;
        let level = self.next_level();
        self.t += 1;
        self.last_level = level;
        let reject = p <= level;
        if reject {
            self.rejections.push(self.t);
        }
        Ok(reject)
    }
}

/// SAFFRON state machine (candidacy threshold λ).
#[derive(Clone, Debug)]
pub struct Saffron {
    alpha: f64,
    lambda: f64,
    w0: f64,
    t: usize,
    candidates: usize,
    rejections: Vec<SaffronRejection>,
    last_level: f64,
}

#[derive(Clone, Copy, Debug)]
struct SaffronRejection {
    time: usize,
    /// Candidates among tests 1..=time.
    candidates_through: usize,
}

impl Saffron {
    /// Defaults λ = 0.5, `W_0 = α/2` (the boundary `(1−λ)α`).
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_params(alpha, 0.5, alpha / 2.0)
    }

    pub fn with_params(alpha: f64, lambda: f64, w0: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidConfig {
                field: "lambda",
                reason: format!("candidacy threshold {lambda} must lie in (0, 1)"),
            });
        }
        let cap = (1.0 - lambda) * alpha;
        if !(w0 > 0.0 && w0 <= cap) {
            return Err(Error::InvalidConfig {
                field: "w0",
                reason: format!("initial wealth {w0} must lie in (0, (1-lambda)*alpha] = (0, {cap}]"),
            });
        }
        Ok(Self { alpha, lambda, w0, t: 0, candidates: 0, rejections: Vec::new(), last_level: f64::NAN })
    }

    pub fn next_level(&self) -> f64 {
        let t = self.t + 1;
        let base = (1.0 - self.lambda) * self.alpha;
        let mut level = self.w0 * power_gamma(t - self.candidates);
        for (j, rej) in self.rejections.iter().enumerate() {
            let between = self.candidates - rej.candidates_through;
            let idx = t - rej.time - between;
            let coef = if j == 0 { base - self.w0 } else { base };
            level += coef * power_gamma(idx);
        }
        level.min(self.lambda)
    }

    pub fn last_level(&self) -> f64 {
        self.last_level
    }

    pub fn step(&mut self, p: f64) -> Result<bool> {
        check_p(p)?;
        let level = self.next_level();
        self.t += 1;
        self.last_level = level;
        let reject = p <= level;
        if p <= self.lambda {
            self.candidates += 1;
        }
        if reject {
            self.rejections.push(SaffronRejection {
                time: self.t,
                candidates_through: self.candidates,
            });
        }
        Ok(reject)
    }
}

/// ADDIS state machine (discarding threshold τ, candidacy τλ).
#[derive(Clone, Debug)]
pub struct Addis {
    alpha: f64,
    tau: f64,
    lambda: f64,
    w0: f64,
    t: usize,
    kept: usize,
    candidates: usize,
    rejections: Vec<AddisRejection>,
    last_level: f64,
}

#[derive(Clone, Copy, Debug)]
struct AddisRejection {
    /// Kept (p ≤ τ) among tests 1..=time of rejection.
    kept_through: usize,
    /// Candidates (p ≤ τλ) among tests 1..=time of rejection.
    candidates_through: usize,
}

impl Addis {
    /// Defaults τ = 0.5, λ = 0.25, `W_0 = τ(1−λ)α` (the feasibility
    /// boundary; α/2 would exceed it).
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_params(alpha, 0.5, 0.25, 0.5 * 0.75 * alpha)
    }

    pub fn with_params(alpha: f64, tau: f64, lambda: f64, w0: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::InvalidConfig {
                field: "tau",
                reason: format!("discarding threshold {tau} must lie in (0, 1]"),
            });
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidConfig {
                field: "lambda",
                reason: format!("candidacy fraction {lambda} must lie in (0, 1)"),
            });
        }
        let cap = tau * (1.0 - lambda) * alpha;
        if !(w0 > 0.0 && w0 <= cap) {
            return Err(Error::InvalidConfig {
                field: "w0",
                reason: format!(
                    "initial wealth {w0} must lie in (0, tau*(1-lambda)*alpha] = (0, {cap}]"
                ),
            });
        }
        Ok(Self {
            alpha,
            tau,
            lambda,
            w0,
            t: 0,
            kept: 0,
            candidates: 0,
            rejections: Vec::new(),
            last_level: f64::NAN,
        })
    }

    pub fn next_level(&self) -> f64 {
        let base = self.tau * (1.0 - self.lambda) * self.alpha;
        let s_plus_1 = self.kept + 1;
        let mut level = self.w0 * power_gamma(s_plus_1 - self.candidates);
        for (j, rej) in self.rejections.iter().enumerate() {
            let between = self.candidates - rej.candidates_through;
            let idx = s_plus_1 - rej.kept_through - between;
            let coef = if j == 0 { base - self.w0 } else { base };
            level += coef * power_gamma(idx);
        }
        level.min(self.tau * self.lambda)
    }

    pub fn last_level(&self) -> f64 {
        self.last_level
    }

    pub fn step(&mut self, p: f64) -> Result<bool> {
        check_p(p)?;
        let level = self.next_level();
        self.t += 1;
        self.last_level = level;
        let reject = p <= level;
        if p <= self.tau {
            self.kept += 1;
        }
        if p <= self.tau * self.lambda {
            self.candidates += 1;
        }
        if reject {
            self.rejections.push(AddisRejection {
                kept_through: self.kept,
                candidates_through: self.candidates,
            });
        }
        Ok(reject)
    }
}

/// Run LORD++ over a whole p-value sequence.
pub fn run_lord_pp(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    let mut proc = LordPlusPlus::new(alpha)?;
    p_values.iter().map(|&p| proc.step(p)).collect()
}

/// Run SAFFRON over a whole p-value sequence.
pub fn run_saffron(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    let mut proc = Saffron::new(alpha)?;
    p_values.iter().map(|&p| proc.step(p)).collect()
}

/// Run ADDIS over a whole p-value sequence.
pub fn run_addis(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    let mut proc = Addis::new(alpha)?;
    p_values.iter().map(|&p| proc.step(p)).collect()
}
