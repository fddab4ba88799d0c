//! Log-space probability arithmetic.
//!
//! All hidden-state recursions in this crate run on log probabilities so that
//! long windows and extreme rates cannot underflow. The helpers here follow
//! the usual max-shift trick: `log Σ exp(x_i) = m + log Σ exp(x_i − m)` with
//! `m = max x_i`.

/// Log of the sum of exponentials of `xs`.
///
/// Returns `-inf` for an empty slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m.is_infinite() {
        return m;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// `log(exp(a) + exp(b))` without leaving log space.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
