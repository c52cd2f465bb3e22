//! MAC-layer erasure coding.
//!
//! A message of `L` fragments is expanded into `N` coded packets with a systematic
//! Reed-Solomon-style code over GF(2^8): packets `0..L` are the fragments themselves, the
//! rest are rows of a Cauchy matrix applied symbol-wise. Any `L` distinct packets recover
//! the message.

pub mod gf256;

use serde::{Deserialize, Serialize};

use crate::bits::BitPacket;
use crate::error::{Error, Result};

pub const MAX_TOTAL_PACKETS: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacCodeSpec {
    /// Packets needed to recover a message.
    pub data_packets: usize,
    /// Distinct coded packets the encoder can produce.
    pub total_packets: usize,
    pub packet_payload_bits: usize,
}

impl MacCodeSpec {
    /// `total_packets` defaults to twice `data_packets`.
    pub fn new(data_packets: usize, packet_payload_bits: usize) -> Result<Self> {
        Self::with_total(data_packets, 2 * data_packets, packet_payload_bits)
    }

    pub fn with_total(data_packets: usize, total_packets: usize, packet_payload_bits: usize) -> Result<Self> {
        let spec = Self { data_packets, total_packets, packet_payload_bits };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_packets == 0 || self.data_packets > self.total_packets {
            return Err(Error::MacSpec(format!(
                "need 1 <= L ({}) <= N ({})",
                self.data_packets, self.total_packets
            )));
        }
        if self.total_packets > MAX_TOTAL_PACKETS {
            return Err(Error::MacSpec(format!("N = {} exceeds {MAX_TOTAL_PACKETS}", self.total_packets)));
        }
        if self.packet_payload_bits == 0 || self.packet_payload_bits % 8 != 0 {
            return Err(Error::MacSpec(format!(
                "packet payload of {} bits is not a positive multiple of 8",
                self.packet_payload_bits
            )));
        }
        Ok(())
    }

    pub fn message_bits(&self) -> usize {
        self.data_packets * self.packet_payload_bits
    }

    /// Generator row of packet `index`.
    fn row(&self, index: usize) -> Vec<u8> {
        let l = self.data_packets;
        if index < l {
            (0..l).map(|j| u8::from(j == index)).collect()
        } else {
            // Cauchy entries 1 / (x_i + y_j) with x_i = index, y_j = j, all distinct.
            (0..l).map(|j| gf256::inv(index as u8 ^ j as u8)).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub user: usize,
    pub payload: BitPacket,
}

impl Message {
    pub fn new(user: usize, payload: BitPacket, spec: &MacCodeSpec) -> Result<Self> {
        if payload.len() != spec.message_bits() {
            return Err(Error::LengthMismatch { expected: spec.message_bits(), actual: payload.len() });
        }
        Ok(Self { user, payload })
    }

    pub fn fragments(&self, spec: &MacCodeSpec) -> Vec<BitPacket> {
        self.payload.split(spec.data_packets)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MacDecodeOutcome {
    Recovered(Message),
    Insufficient { have: usize, need: usize },
}

fn check_message(msg: &Message, spec: &MacCodeSpec) -> Result<Vec<Vec<u8>>> {
    spec.validate()?;
    if msg.payload.len() != spec.message_bits() {
        return Err(Error::LengthMismatch { expected: spec.message_bits(), actual: msg.payload.len() });
    }
    msg.fragments(spec).iter().map(BitPacket::to_bytes_lsb).collect()
}

fn combine(row: &[u8], fragments: &[Vec<u8>]) -> Vec<u8> {
    let mut out = vec![0u8; fragments[0].len()];
    for (&coef, frag) in row.iter().zip(fragments) {
        if coef == 0 {
            continue;
        }
        for (o, &s) in out.iter_mut().zip(frag) {
            *o ^= gf256::mul(coef, s);
        }
    }
    out
}

/// All `N` coded packets of a message, in index order.
pub fn mac_encode(msg: &Message, spec: &MacCodeSpec) -> Result<Vec<(usize, BitPacket)>> {
    let fragments = check_message(msg, spec)?;
    Ok((0..spec.total_packets)
        .map(|i| (i, BitPacket::from_bytes_lsb(&combine(&spec.row(i), &fragments))))
        .collect())
}

/// The single coded packet at `index`.
pub fn mac_reencode(msg: &Message, index: usize, spec: &MacCodeSpec) -> Result<BitPacket> {
    if index >= spec.total_packets {
        return Err(Error::IndexOutOfRange { index, total: spec.total_packets });
    }
    let fragments = check_message(msg, spec)?;
    Ok(BitPacket::from_bytes_lsb(&combine(&spec.row(index), &fragments)))
}

/// Recovers user `user`'s message from any `L` distinct coded packets.
///
/// Fewer than `L` packets is a normal outcome, not an error.
pub fn mac_decode(user: usize, packets: &[(usize, BitPacket)], spec: &MacCodeSpec) -> Result<MacDecodeOutcome> {
    spec.validate()?;
    let mut seen = vec![false; spec.total_packets];
    for (index, packet) in packets {
        if *index >= spec.total_packets {
            return Err(Error::IndexOutOfRange { index: *index, total: spec.total_packets });
        }
        if std::mem::replace(&mut seen[*index], true) {
            return Err(Error::DuplicateIndex(*index));
        }
        if packet.len() != spec.packet_payload_bits {
            return Err(Error::LengthMismatch { expected: spec.packet_payload_bits, actual: packet.len() });
        }
    }
    let l = spec.data_packets;
    if packets.len() < l {
        return Ok(MacDecodeOutcome::Insufficient { have: packets.len(), need: l });
    }

    let mut chosen: Vec<&(usize, BitPacket)> = packets.iter().collect();
    chosen.sort_by_key(|(i, _)| *i);
    chosen.truncate(l);

    let payload = if chosen.iter().enumerate().all(|(pos, (i, _))| pos == *i) {
        BitPacket::concat(&chosen.iter().map(|(_, p)| p.clone()).collect::<Vec<_>>())
    } else {
        let matrix: Vec<Vec<u8>> = chosen.iter().map(|(i, _)| spec.row(*i)).collect();
        let inverse = gf256::invert(matrix).expect("Cauchy-systematic submatrices are nonsingular");
        let received: Vec<Vec<u8>> = chosen.iter().map(|(_, p)| p.to_bytes_lsb()).collect::<Result<_>>()?;
        let fragments: Vec<BitPacket> =
            inverse.iter().map(|row| BitPacket::from_bytes_lsb(&combine(row, &received))).collect();
        BitPacket::concat(&fragments)
    };
    Ok(MacDecodeOutcome::Recovered(Message { user, payload }))
}
