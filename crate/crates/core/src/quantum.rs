//! Coincidence statistics of a pulsed SPDC pair source shared between two
//! receivers, and the error-rate / distillation lower bound derived from it.
//!
//! Probabilities are per coincidence window τ. The pair-number distribution
//! per window is the two-mode thermal law with mean μ.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("invalid quantum parameter {field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

/// Source, detector and post-processing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumParams {
    /// Mean number of pairs per window.
    pub mu: f64,
    /// Coincidence window, seconds.
    pub window_s: f64,
    /// Basis reconciliation (sifting) factor.
    pub sifting: f64,
    /// Error-correction inefficiency, ≥ 1.
    pub ec_efficiency: f64,
    /// Error probability of noise clicks.
    pub e0: f64,
    /// Error probability of a detected pair photon.
    pub ep: f64,
    /// Dark count rate of each detector, counts/s.
    pub dark_count_cps: f64,
    /// Background (stray light) rate per station, counts/s.
    pub background_cps: f64,
    pub detectors_per_station: u32,
}

impl QuantumParams {
    pub fn validate(&self) -> Result<(), QuantumError> {
        let err = |field: &'static str, reason: String| Err(QuantumError::InvalidParam { field, reason });
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return err("mu", format!("{} must be non-negative", self.mu));
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return err("window", format!("{} must be positive", self.window_s));
        }
        if !(self.sifting > 0.0 && self.sifting <= 1.0) {
            return err("sifting", format!("{} outside (0, 1]", self.sifting));
        }
        if !(self.ec_efficiency >= 1.0 && self.ec_efficiency.is_finite()) {
            return err("ec_efficiency", format!("{} must be >= 1", self.ec_efficiency));
        }
        if !(0.0..=0.5).contains(&self.e0) {
            return err("e0", format!("{} outside [0, 0.5]", self.e0));
        }
        if !(0.0 <= self.ep && self.ep <= self.e0) {
            return err("ep", format!("{} outside [0, e0]", self.ep));
        }
        if !(self.dark_count_cps >= 0.0 && self.dark_count_cps.is_finite()) {
            return err("dark_count", format!("{} must be non-negative", self.dark_count_cps));
        }
        if !(self.background_cps >= 0.0 && self.background_cps.is_finite()) {
            return err("background", format!("{} must be non-negative", self.background_cps));
        }
        if self.noise_probability() >= 1.0 {
            return err("dark_count", "noise click probability per window reaches 1".into());
        }
        Ok(())
    }

    /// Per-window noise click probability of one station.
    pub fn noise_probability(&self) -> f64 {
        detector_noise_term(
            self.dark_count_cps,
            self.background_cps,
            self.window_s,
            self.detectors_per_station,
        )
    }

    /// Pair production rate μ/τ, pairs/s.
    pub fn pair_rate(&self) -> f64 {
        self.mu / self.window_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoincidenceResult {
    /// Coincidence probability per window.
    pub q: f64,
    /// Sifted raw coincidence rate q·Q/τ, counts/s.
    pub raw_rate: f64,
    /// Unsifted coincidence rate Q/τ, counts/s.
    pub raw_rate_unsifted: f64,
    /// `None` when no coincidence is possible (Q = 0).
    pub qber: Option<f64>,
    /// Distilled fraction of unsifted coincidences, in [0, q].
    pub yield_fraction: f64,
    pub distilled_rate: f64,
}

/// Noise click probability `(n_det·D + B)·τ`.
pub fn detector_noise_term(dark_cps: f64, background_cps: f64, window_s: f64, detectors: u32) -> f64 {
    (detectors as f64 * dark_cps + background_cps) * window_s
}

/// Probability of at least one click at each station in a window.
pub fn coincidence_probability(mu: f64, eta1: f64, eta2: f64, y01: f64, y02: f64) -> f64 {
    let h = mu / 2.0;
    let s1 = (1.0 + eta1 * h).powi(2);
    let s2 = (1.0 + eta2 * h).powi(2);
    let s12 = (1.0 + (eta1 + eta2 - eta1 * eta2) * h).powi(2);
    let singles = (1.0 - y01) / s1 + (1.0 - y02) / s2;
    let q = 1.0 - singles + (1.0 - y01) * (1.0 - y02) / s12;
    // Cancellation of O(1) terms can leave tiny negative residues.
    q.clamp(0.0, 1.0)
}

pub fn raw_coincidence_rate(q: f64, window_s: f64) -> f64 {
    q / window_s
}

/// Shannon binary entropy in bits, with H2(0) = H2(1) = 0.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Estimated bit error rate of the coincidences, clamped to [0, 0.5].
/// Returns `None` when `q` is zero.
pub fn qber(mu: f64, eta1: f64, eta2: f64, q: f64, e0: f64, ep: f64) -> Option<f64> {
    if q.is_nan() || q <= 0.0 {
        return None;
    }
    let h = mu / 2.0;
    let c = (e0 - ep) * (eta1 * eta2) * mu * (1.0 + h)
        / ((1.0 + eta1 * h) * (1.0 + eta2 * h) * (1.0 + (eta1 + eta2 - eta1 * eta2) * h));
    Some((e0 - c / q).clamp(0.0, 0.5))
}

/// Lower bound on the distilled fraction `q·(1 − f·H2 − H2)`, floored at 0.
pub fn distillation_yield(qber: f64, sifting: f64, ec_efficiency: f64) -> f64 {
    let h = binary_entropy(qber);
    (sifting * (1.0 - ec_efficiency * h - h)).max(0.0)
}

/// Full per-sample chain from two channel efficiencies.
pub fn evaluate_sample(eta1: f64, eta2: f64, qp: &QuantumParams) -> CoincidenceResult {
    let y0 = qp.noise_probability();
    let q = coincidence_probability(qp.mu, eta1, eta2, y0, y0);
    let unsifted = raw_coincidence_rate(q, qp.window_s);
    let raw_rate = qp.sifting * unsifted;
    let qber = qber(qp.mu, eta1, eta2, q, qp.e0, qp.ep);
    let yield_fraction = qber
        .map(|e| distillation_yield(e, qp.sifting, qp.ec_efficiency))
        .unwrap_or(0.0);
    CoincidenceResult {
        q,
        raw_rate,
        raw_rate_unsifted: unsifted,
        qber,
        yield_fraction,
        distilled_rate: yield_fraction / qp.sifting * raw_rate,
    }
}
