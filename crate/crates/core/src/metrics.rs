//! Quantitative evaluation of a round: entropy-based privacy, circle-overlap
//! service accuracy, message-count overhead, and a per-message energy model.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use crate::geometry::{overlap_fraction, Circle, Point2D};
use crate::math;
use crate::protocol::{RoundOutcome, User, UserId};

/// Tolerance on `sum(p_i) - 1` when validating a probability vector.
const PROB_SUM_TOL: f64 = 1e-9;

/// Errors from metric computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricsError {
    /// Entries outside [0, 1] or a sum off 1 by more than 1e-9.
    NotAProbabilityVector { sum: f64 },
    /// An anonymity set must have at least one member.
    BadAnonymitySetSize,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::NotAProbabilityVector { sum } => {
                write!(f, "not a probability vector (sum = {sum})")
            }
            MetricsError::BadAnonymitySetSize => write!(f, "anonymity set size must be >= 1"),
        }
    }
}

impl core::error::Error for MetricsError {}

/// A validated discrete probability distribution: entries in [0, 1] summing
/// to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(probabilities: Vec<f64>) -> Result<Self, MetricsError> {
        let mut sum = 0.0;
        for &p in &probabilities {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(MetricsError::NotAProbabilityVector { sum: f64::NAN });
            }
            sum += p;
        }
        if math::abs(sum - 1.0) > PROB_SUM_TOL {
            return Err(MetricsError::NotAProbabilityVector { sum });
        }
        Ok(Self(probabilities))
    }

    /// Uniform distribution over `k` outcomes.
    pub fn uniform(k: usize) -> Result<Self, MetricsError> {
        if k == 0 {
            return Err(MetricsError::BadAnonymitySetSize);
        }
        Ok(Self(alloc::vec![1.0 / k as f64; k]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Shannon entropy of the distribution, in bits. Zero-probability terms
/// contribute exactly 0.
pub fn entropy(p: &ProbabilityVector) -> f64 {
    p.as_slice()
        .iter()
        .filter(|&&p_i| p_i > 0.0)
        .map(|&p_i| -p_i * math::log2(p_i))
        .sum()
}

/// Entropy of the uniform distribution over `k` outcomes: `log2(k)` bits,
/// the maximum any distribution of that length can reach.
pub fn uniform_entropy(k: usize) -> Result<f64, MetricsError> {
    if k == 0 {
        return Err(MetricsError::BadAnonymitySetSize);
    }
    Ok(math::log2(k as f64))
}

/// Privacy of one group member as seen by the provider, in bits.
///
/// The provider receives a single query point for the whole group and cannot
/// distinguish among the `group_size` users behind it, so the anonymity set
/// is the group and the entropy is `log2(group_size)`.
///
/// Panics if `group_size` is 0.
pub fn provider_view_entropy(group_size: usize) -> f64 {
    assert!(
        group_size >= 1,
        "anonymity set must have at least one member"
    );
    math::log2(group_size as f64)
}

/// Percentage of the user's interest circle covered by the serving circle
/// around the final obfuscated location.
pub fn service_accuracy(user: &User, final_location: Point2D, serving_radius: f64) -> f64 {
    let interest = Circle::new(user.true_position, user.interest_radius);
    let serving = Circle::new(final_location, serving_radius);
    100.0 * overlap_fraction(interest, serving)
}

/// Communication totals of a round trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OverheadCounts {
    /// Number of sends: the trace length.
    pub sends: u64,
    /// Sum of receiver-set sizes over all sends.
    pub receives: u64,
    /// Bytes put on the air, counted once per send.
    pub bytes: u64,
}

/// Counts sends, receives, and bytes over a round trace.
pub fn overhead(outcome: &RoundOutcome) -> OverheadCounts {
    let mut counts = OverheadCounts::default();
    for m in &outcome.messages {
        counts.sends += 1;
        counts.receives += m.receivers.len() as u64;
        counts.bytes += m.bytes;
    }
    counts
}

/// Fixed energy cost per transmitted and per received message, joules.
///
/// Defaults echo the canonical 0.660 W transmit / 0.395 W receive radio
/// power figures at a nominal 1 ms message airtime. The model is linear, so
/// any other calibration is a rescale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConfig {
    pub e_tx: f64,
    pub e_rx: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            e_tx: 0.66e-3,
            e_rx: 0.395e-3,
        }
    }
}

impl EnergyConfig {
    pub fn is_valid(&self) -> bool {
        self.e_tx.is_finite() && self.e_rx.is_finite() && self.e_tx >= 0.0 && self.e_rx >= 0.0
    }
}

/// Total radio energy for the given counts: `sends * e_tx + receives * e_rx`
/// joules.
pub fn energy(counts: &OverheadCounts, config: &EnergyConfig) -> f64 {
    counts.sends as f64 * config.e_tx + counts.receives as f64 * config.e_rx
}

/// Metrics for one round, or aggregated over many.
///
/// In an aggregate, counts and energy are summed over rounds; entropies and
/// accuracies are per-round means (per user for the accuracy map), and
/// `accuracy_min` is the minimum per-user mean.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    /// Privacy of each member from the QU and the other peers, bits.
    pub entropy_from_peers: f64,
    /// Privacy of each member from the provider, bits.
    pub entropy_from_provider: f64,
    /// Service accuracy per user, percent.
    pub per_user_accuracy: BTreeMap<UserId, f64>,
    /// Mean of the per-user accuracies, percent.
    pub accuracy_mean: f64,
    /// Minimum of the per-user accuracies, percent.
    pub accuracy_min: f64,
    pub sends: u64,
    pub receives: u64,
    pub bytes: u64,
    /// Total radio energy, joules.
    pub energy: f64,
    /// `(n, median duration)` pairs from a timing probe, when one ran.
    pub timing_samples: Vec<(usize, Duration)>,
}
