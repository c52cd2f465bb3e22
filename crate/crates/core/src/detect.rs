//! The PHY-layer decoder bank.
//!
//! Every scheduled equation gets per-bit soft values from the reduced-constellation
//! (log-max) rule, then a standard Viterbi decoder and a CRC check. A label's target bit
//! for a joint constellation point is the XOR of the label's stream bits, i.e. the product
//! of the corresponding `±1` rail values; the LLR is
//!
//! ```text
//! LLR = ( min_{target=-1} D(x) - min_{target=+1} D(x) ) / sigma^2
//! D(x) = sum over antennas |y_a - sum_s h_sa x_s|^2
//! ```
//!
//! Dividing by `sigma^2` only fixes the units of the saturation bound; decisions do not
//! depend on it.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bits::BitPacket;
use crate::channel::{SlotObservation, ANTENNAS};
use crate::crc::{check_combination, CRC_BITS};
use crate::error::{Error, Result};
use crate::fec::{viterbi_core, ConvCodeSpec};
use crate::profile::{label_is_aligned, modulate_user, EquationLabel, Profile, StreamDesc};

/// A CRC-validated equation: the XOR of the label's stream payloads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedEquation {
    pub slot: u64,
    pub label: EquationLabel,
    pub packet: BitPacket,
}

/// Joint constellation point of all three users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstellationPoint(pub [Complex64; 3]);

/// Enumerates joint points in the metric's index order (user A varies fastest).
pub fn joint_points(profile: Profile) -> Vec<ConstellationPoint> {
    let alphabets = profile.schemes().map(|s| s.points());
    let mut out = Vec::new();
    for &xc in alphabets[2] {
        for &xb in alphabets[1] {
            for &xa in alphabets[0] {
                out.push(ConstellationPoint([xa, xb, xc]));
            }
        }
    }
    out
}

#[inline]
fn rail(x: Complex64, imag: bool) -> f64 {
    if imag {
        x.im
    } else {
        x.re
    }
}

/// Points whose label target is +1 (XOR bit 0), for even and odd codeword bit positions.
///
/// Parity only matters for standard QPSK streams, whose even bits ride the I rail and odd
/// bits the Q rail.
pub fn target_partition(profile: Profile, label: EquationLabel) -> [Vec<bool>; 2] {
    let streams = profile.streams();
    let points = joint_points(profile);
    std::array::from_fn(|parity| {
        points
            .iter()
            .map(|pt| {
                label
                    .streams()
                    .map(|i| {
                        let (_, imag) = streams[i].locate(parity);
                        rail(pt.0[streams[i].user], imag)
                    })
                    .product::<f64>()
                    > 0.0
            })
            .collect()
    })
}

/// Verifies that each scheduled label splits the joint constellation into two
/// non-empty halves.
pub fn check_partitions(profile: Profile) -> Result<()> {
    let total = joint_points(profile).len();
    for label in profile.scheduled_labels() {
        for half in target_partition(profile, label) {
            let plus = half.iter().filter(|&&b| b).count();
            if plus * 2 != total {
                return Err(Error::UnscheduledLabel(label.0));
            }
        }
    }
    Ok(())
}

/// Per-sample Euclidean distances to every joint constellation point.
pub struct JointMetric<'a> {
    obs: &'a SlotObservation,
    profile: Profile,
    streams: Vec<StreamDesc>,
    points: usize,
    dist: Vec<f64>,
}

impl<'a> JointMetric<'a> {
    pub fn new(obs: &'a SlotObservation, profile: Profile) -> Self {
        let pts = joint_points(profile);
        let n = pts.len();
        let samples = obs.samples();
        let mut dist = vec![0.0; samples * n];
        for k in 0..samples {
            let mut gains = [[Complex64::new(0.0, 0.0); 3]; ANTENNAS];
            for (a, row) in gains.iter_mut().enumerate() {
                for (u, g) in row.iter_mut().enumerate() {
                    if obs.active(u, k) {
                        *g = obs.effective_gain(u, a, k);
                    }
                }
            }
            let row = &mut dist[k * n..(k + 1) * n];
            for (d, pt) in row.iter_mut().zip(&pts) {
                *d = (0..ANTENNAS)
                    .map(|a| {
                        let s = gains[a][0] * pt.0[0] + gains[a][1] * pt.0[1] + gains[a][2] * pt.0[2];
                        (obs.y[a][k] - s).norm_sqr()
                    })
                    .sum();
            }
        }
        Self { obs, profile, streams: profile.streams(), points: n, dist }
    }

    /// Codeword length of a stream, read off its user's block length.
    pub fn codeword_len(&self, stream: usize) -> usize {
        let s = self.streams[stream];
        let len = self.obs.signals[s.user].len;
        if s.mac_packets() == 2 {
            2 * len
        } else {
            len
        }
    }

    fn check(&self, label: EquationLabel) -> Result<()> {
        if !self.profile.scheduled_labels().contains(&label) || !label_is_aligned(self.profile, label) {
            return Err(Error::UnscheduledLabel(label.0));
        }
        Ok(())
    }

    fn llr_with(&self, partition: &[Vec<bool>; 2], lead: StreamDesc, n: usize) -> f64 {
        let (k, _) = lead.locate(n);
        let plus = &partition[n % 2];
        let row = &self.dist[k * self.points..(k + 1) * self.points];
        let mut best_plus = f64::INFINITY;
        let mut best_minus = f64::INFINITY;
        for (&d, &is_plus) in row.iter().zip(plus) {
            if is_plus {
                best_plus = best_plus.min(d);
            } else {
                best_minus = best_minus.min(d);
            }
        }
        (best_minus - best_plus) / self.obs.sigma2
    }

    /// Soft value of codeword bit `n` of `label`.
    pub fn llr(&self, label: EquationLabel, n: usize) -> Result<f64> {
        self.check(label)?;
        let lead = self.streams[label.streams().next().expect("checked nonzero")];
        let len = self.codeword_len(label.streams().next().expect("checked nonzero"));
        if n >= len {
            return Err(Error::IndexOutOfRange { index: n, total: len });
        }
        Ok(self.llr_with(&target_partition(self.profile, label), lead, n))
    }

    /// Soft values for the whole codeword of `label`.
    pub fn label_llrs(&self, label: EquationLabel) -> Result<Vec<f64>> {
        self.check(label)?;
        let first = label.streams().next().expect("checked nonzero");
        let partition = target_partition(self.profile, label);
        let lead = self.streams[first];
        Ok((0..self.codeword_len(first)).map(|n| self.llr_with(&partition, lead, n)).collect())
    }
}

/// Log-max soft value for codeword bit `n` of `label`.
pub fn joint_llr(obs: &SlotObservation, profile: Profile, label: EquationLabel, n: usize) -> Result<f64> {
    JointMetric::new(obs, profile).llr(label, n)
}

/// Reduced-constellation MUD soft value for one stream, enumerating the joint alphabet
/// directly.
pub fn rmud_llr(obs: &SlotObservation, profile: Profile, stream: usize, n: usize) -> f64 {
    let desc = profile.streams()[stream];
    let (k, imag) = desc.locate(n);
    let alphabets = profile.schemes().map(|s| s.points());
    let zero = [Complex64::new(0.0, 0.0)];
    let choices: Vec<&[Complex64]> =
        (0..3).map(|u| if obs.active(u, k) { alphabets[u] } else { &zero[..] }).collect();
    let (mut bit0, mut bit1) = (f64::INFINITY, f64::INFINITY);
    for &xa in choices[0] {
        for &xb in choices[1] {
            for &xc in choices[2] {
                let x = [xa, xb, xc];
                let d: f64 = (0..ANTENNAS)
                    .map(|a| {
                        let s: Complex64 = (0..3)
                            .filter(|&u| obs.active(u, k))
                            .map(|u| obs.effective_gain(u, a, k) * x[u])
                            .sum();
                        (obs.y[a][k] - s).norm_sqr()
                    })
                    .sum();
                if rail(x[desc.user], imag) > 0.0 {
                    bit0 = bit0.min(d);
                } else {
                    bit1 = bit1.min(d);
                }
            }
        }
    }
    (bit1 - bit0) / obs.sigma2
}

fn decode_soft(llr: &[f64], weight: u32, signature: u32, code: &ConvCodeSpec) -> Option<BitPacket> {
    let framed_len = code.payload_len(llr.len()).ok()?;
    if framed_len <= CRC_BITS {
        return None;
    }
    let framed = viterbi_core(llr, framed_len, code);
    check_combination(&framed, weight, signature)
}

/// Attempts every scheduled equation for one slot and keeps the CRC-valid ones.
///
/// The SIC profile runs [`sic_decode`] in descending configured-SNR order instead.
pub fn run_decoder_bank(obs: &SlotObservation, profile: Profile, code: &ConvCodeSpec, slot: u64) -> Vec<DecodedEquation> {
    if profile.uses_sic() {
        return sic_decode(obs, profile, &sic_order(obs), code)
            .into_iter()
            .map(|(stream, packet)| DecodedEquation { slot, label: EquationLabel::unit(stream), packet })
            .collect();
    }
    let metric = JointMetric::new(obs, profile);
    profile
        .scheduled_labels()
        .into_par_iter()
        .filter_map(|label| {
            let llr = metric.label_llrs(label).expect("scheduled label");
            decode_soft(&llr, label.weight(), label.signature(profile), code).map(|packet| DecodedEquation { slot, label, packet })
        })
        .collect()
}

/// Users by descending configured SNR; on ties the later user goes first.
pub fn sic_order(obs: &SlotObservation) -> Vec<usize> {
    let mut order: Vec<usize> = (0..obs.realization.users()).collect();
    order.sort_by(|&a, &b| obs.realization.snr_db[b].total_cmp(&obs.realization.snr_db[a]).then(b.cmp(&a)));
    order
}

/// Successive interference cancellation.
///
/// Each user is demodulated treating the not-yet-cancelled users as Gaussian noise, then
/// Viterbi decoded and CRC checked. A decoded user is re-modulated and subtracted from both
/// antennas; the first failure stops the chain. Returns `(stream, payload)` pairs.
pub fn sic_decode(obs: &SlotObservation, profile: Profile, order: &[usize], code: &ConvCodeSpec) -> Vec<(usize, BitPacket)> {
    let streams = profile.streams();
    let schemes = profile.schemes();
    let mut residual = obs.clone();
    let mut pending: Vec<usize> = order.to_vec();
    let mut decoded = Vec::new();

    for &user in order {
        pending.retain(|&u| u != user);
        let own = profile.user_streams(user);
        let mut payloads = Vec::with_capacity(own.len());
        for &si in &own {
            let desc = streams[si];
            let len = if desc.mac_packets() == 2 { 2 * residual.signals[user].len } else { residual.signals[user].len };
            let llr: Vec<f64> = (0..len)
                .map(|n| {
                    let (k, imag) = desc.locate(n);
                    (0..ANTENNAS)
                        .map(|a| {
                            let interference: f64 = pending
                                .iter()
                                .filter(|&&v| residual.active(v, k))
                                .map(|&v| residual.effective_gain(v, a, k).norm_sqr() * schemes[v].average_power())
                                .sum();
                            let z = residual.effective_gain(user, a, k).conj() * residual.y[a][k];
                            4.0 * rail(z, imag) / (residual.sigma2 + interference)
                        })
                        .sum()
                })
                .collect();
            match decode_soft(&llr, 1, desc.signature(), code) {
                Some(p) => payloads.push(p),
                None => return decoded,
            }
        }
        let refs: Vec<&BitPacket> = payloads.iter().collect();
        let block = modulate_user(user, schemes[user], &refs, code).expect("profile-consistent streams");
        residual.cancel(user, &block);
        decoded.extend(own.into_iter().zip(payloads));
    }
    decoded
}
