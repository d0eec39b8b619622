//! Monte-Carlo and enumeration checks for the closed forms in
//! [`crate::game_model`]. Nothing here calls the formulas it checks.
//!
//! Trial `i` always draws from `StreamRng::new(seed).derive(TRIAL, i)`, and
//! outcomes are tallied as integer counts, so a result does not depend on
//! how trials are split across workers.

use rayon::prelude::*;
use thiserror::Error;

use crate::rng::{domain, StreamRng};

pub const MIN_TRIALS: u64 = 1000;
pub const MAX_ENUMERATION_DEPTH: u32 = 20;
/// Agreement band, in standard errors.
pub const SIGMA_BAND: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("need at least {MIN_TRIALS} trials, got {0}")]
    TooFewTrials(u64),
    #[error("enumeration depth {0} exceeds {MAX_ENUMERATION_DEPTH}")]
    TooDeep(u32),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

impl McResult {
    /// Mean and standard error of a sample taking `value_a` `count_a` times
    /// and `value_b` on the remaining trials.
    fn from_two_point(value_a: f64, count_a: u64, value_b: f64, trials: u64) -> Self {
        let count_b = trials - count_a;
        let n = trials as f64;
        let mean = (value_a * count_a as f64 + value_b * count_b as f64) / n;
        let ss = count_a as f64 * (value_a - mean).powi(2) + count_b as f64 * (value_b - mean).powi(2);
        let sample_var = if trials > 1 { ss / (n - 1.0) } else { 0.0 };
        Self {
            mean,
            std_error: (sample_var / n).sqrt(),
            trials,
        }
    }

    /// Within `SIGMA_BAND` standard errors of `expected`. A zero-variance
    /// estimate must match exactly.
    pub fn agrees_with(&self, expected: f64) -> bool {
        let diff = (self.mean - expected).abs();
        if self.std_error == 0.0 {
            return diff <= 1e-12 * expected.abs().max(1.0);
        }
        diff <= SIGMA_BAND * self.std_error
    }

    pub fn z_score(&self, expected: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == expected {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - expected) / self.std_error
        }
    }
}

fn check_inputs(j: u32, p: f64, trials: u64) -> Result<(), OracleError> {
    if trials < MIN_TRIALS {
        return Err(OracleError::TooFewTrials(trials));
    }
    if j == 0 {
        return Err(OracleError::InvalidParameter {
            name: "j",
            reason: "at least one responder is required".into(),
        });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(OracleError::InvalidParameter {
            name: "p",
            reason: format!("{p} is not in [0, 1]"),
        });
    }
    Ok(())
}

/// Counts trials `0..trials` for which `hit` returns true, in parallel.
fn count_hits(seed: u64, trials: u64, hit: impl Fn(&mut StreamRng) -> bool + Sync) -> u64 {
    count_hits_in(seed, 0..trials, hit)
}

fn count_hits_in(seed: u64, range: std::ops::Range<u64>, hit: impl Fn(&mut StreamRng) -> bool + Sync) -> u64 {
    let root = StreamRng::new(seed);
    range
        .into_par_iter()
        .filter(|&i| hit(&mut root.derive(domain::TRIAL, i)))
        .count() as u64
}

/// One volunteering round of a liar: returns true when it is selected at
/// random (the penalty), false when it collects its credit.
fn liar_is_punished(rng: &mut StreamRng, p: f64, j: u32) -> bool {
    let by_trust = rng.next_f64() < p;
    if by_trust {
        // A low-trust liar is never the trust maximum.
        return false;
    }
    // The liar occupies slot 0 among the j volunteers.
    rng.below(u64::from(j)) == 0
}

/// Simulates `trials` independent rounds of a persistent liar and reports
/// its mean payoff (`+1` or `-K`).
pub fn mc_liar_payoff(p: f64, k: f64, j: u32, trials: u64, seed: u64) -> Result<McResult, OracleError> {
    check_inputs(j, p, trials)?;
    if !(k >= 0.0) {
        return Err(OracleError::InvalidParameter {
            name: "K",
            reason: format!("{k} must be nonnegative"),
        });
    }
    let punished = count_hits(seed, trials, |rng| liar_is_punished(rng, p, j));
    Ok(McResult::from_two_point(-k, punished, 1.0, trials))
}

/// Frequency with which a liar's first `t` volunteering rounds all pay `+1`.
pub fn mc_escape_frequency(j: u32, p: f64, t: u32, trials: u64, seed: u64) -> Result<McResult, OracleError> {
    check_inputs(j, p, trials)?;
    let escaped = count_hits(seed, trials, |rng| (0..t).all(|_| !liar_is_punished(rng, p, j)));
    Ok(McResult::from_two_point(1.0, escaped, 0.0, trials))
}

/// Exact probability that the first `t` rounds are all credits, by summing
/// over every credit/penalty sequence of length `t`.
pub fn enumerate_escape_probability(j: u32, p: f64, t: u32) -> Result<f64, OracleError> {
    if t > MAX_ENUMERATION_DEPTH {
        return Err(OracleError::TooDeep(t));
    }
    if j == 0 {
        return Err(OracleError::InvalidParameter {
            name: "j",
            reason: "at least one responder is required".into(),
        });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(OracleError::InvalidParameter {
            name: "p",
            reason: format!("{p} is not in [0, 1]"),
        });
    }
    // Credit: selected by trust (never the liar) or random pick of someone else.
    let jf = f64::from(j);
    let credit = p + (1.0 - p) * ((jf - 1.0) / jf);
    let penalty = (1.0 - p) / jf;

    let mut escaped = 0.0;
    for seq in 0u32..(1u32 << t) {
        // Bit i set means round i is a penalty.
        let mut prob = 1.0;
        for i in 0..t {
            prob *= if seq >> i & 1 == 1 { penalty } else { credit };
        }
        if seq == 0 {
            escaped += prob;
        }
    }
    Ok(escaped)
}
