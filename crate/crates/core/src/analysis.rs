//! Closed-form rate expressions and throughput accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Relative rate gain of two-user NOMA over OMA at per-user power `p` (noise power 1):
/// `(ln(1+2p) - ln(1+p)) / ln(1+p)`.
pub fn rate_gain(p: f64) -> Result<f64> {
    positive("power", p)?;
    let oma = p.ln_1p();
    Ok(((2.0 * p).ln_1p() - oma) / oma)
}

/// SINR of the first user decoded by SIC when another user of equal power `p` is treated
/// as noise.
pub fn sic_sinr(p: f64, sigma2: f64) -> Result<f64> {
    positive("power", p)?;
    positive("noise variance", sigma2)?;
    Ok(p / (p + sigma2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserThroughput {
    /// Messages recovered.
    pub messages: u64,
    /// Normalized BPSK packets per message.
    pub packets_per_message: usize,
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRecord {
    pub users: Vec<UserThroughput>,
    pub slots: u64,
    pub system: f64,
}

/// `Th^s = L_s N_s / N_slot` for every user, plus their sum.
pub fn tally_throughput(messages: &[u64], packets_per_message: &[usize], slots: u64) -> Result<ThroughputRecord> {
    if slots == 0 {
        return Err(Error::InvalidArgument("throughput over zero slots".into()));
    }
    if messages.len() != packets_per_message.len() {
        return Err(Error::LengthMismatch { expected: packets_per_message.len(), actual: messages.len() });
    }
    let users: Vec<UserThroughput> = messages
        .iter()
        .zip(packets_per_message)
        .map(|(&n, &l)| UserThroughput {
            messages: n,
            packets_per_message: l,
            throughput: (l as u64 * n) as f64 / slots as f64,
        })
        .collect();
    let system = users.iter().map(|u| u.throughput).sum();
    Ok(ThroughputRecord { users, slots, system })
}
