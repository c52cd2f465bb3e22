//! Decoder profiles: which modulation each user transmits, how the slot's PHY streams map
//! onto symbols, and which equations the decoder bank attempts.
//!
//! Users are indexed 0, 1, 2 for A, B, C. A *stream* is one convolutional codeword: a
//! BPSK user carries one, a symbol-splitting QPSK user carries two (I and Q rails), and a
//! standard QPSK user carries one codeword spread over both rails.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::BitPacket;
use crate::crc::append_crc;
use crate::error::{Error, Result};
use crate::fec::{conv_encode, ConvCodeSpec};
use crate::modem::{bpsk_modulate, qpsk_split_modulate, qpsk_standard_modulate, ModulationScheme, SymbolBlock};
use crate::seed::splitmix64;

pub const USER_NAMES: [&str; 3] = ["A", "B", "C"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Three BPSK users decoded by successive interference cancellation.
    SicNoma,
    /// Three BPSK users, 3 MUD + 4 PNC decoders.
    BpskHomogeneous,
    /// Three standard-QPSK users, 3 MUD + 4 PNC decoders.
    QpskHomogeneous,
    /// A, B BPSK and C standard QPSK; only A^B is available for PNC.
    #[serde(rename = "dr-ncma")]
    DirectRateDiverse,
    /// A, B BPSK and C symbol-splitting QPSK; 4 MUD + 7 PNC decoders.
    #[serde(rename = "sr-ncma")]
    SplitRateDiverse,
}

impl Profile {
    pub const ALL: [Profile; 5] = [
        Profile::SicNoma,
        Profile::BpskHomogeneous,
        Profile::QpskHomogeneous,
        Profile::DirectRateDiverse,
        Profile::SplitRateDiverse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Profile::SicNoma => "sic-noma",
            Profile::BpskHomogeneous => "bpsk-homogeneous",
            Profile::QpskHomogeneous => "qpsk-homogeneous",
            Profile::DirectRateDiverse => "dr-ncma",
            Profile::SplitRateDiverse => "sr-ncma",
        }
    }

    pub fn schemes(self) -> [ModulationScheme; 3] {
        use ModulationScheme::*;
        match self {
            Profile::SicNoma | Profile::BpskHomogeneous => [Bpsk, Bpsk, Bpsk],
            Profile::QpskHomogeneous => [QpskStandard, QpskStandard, QpskStandard],
            Profile::DirectRateDiverse => [Bpsk, Bpsk, QpskStandard],
            Profile::SplitRateDiverse => [Bpsk, Bpsk, QpskSplit],
        }
    }

    pub fn streams(self) -> Vec<StreamDesc> {
        let s = |user, rail| StreamDesc { user, rail };
        match self {
            Profile::SicNoma | Profile::BpskHomogeneous => {
                vec![s(0, Rail::Real), s(1, Rail::Real), s(2, Rail::Real)]
            }
            Profile::QpskHomogeneous => {
                vec![s(0, Rail::Interleaved), s(1, Rail::Interleaved), s(2, Rail::Interleaved)]
            }
            Profile::DirectRateDiverse => vec![s(0, Rail::Real), s(1, Rail::Real), s(2, Rail::Interleaved)],
            Profile::SplitRateDiverse => {
                vec![s(0, Rail::Real), s(1, Rail::Real), s(2, Rail::InPhase), s(2, Rail::Quadrature)]
            }
        }
    }

    pub fn uses_sic(self) -> bool {
        self == Profile::SicNoma
    }

    /// Labels the decoder bank attempts, MUD labels first.
    pub fn scheduled_labels(self) -> Vec<EquationLabel> {
        let n = self.streams().len();
        let mut labels: Vec<EquationLabel> = match self {
            Profile::SicNoma => (0..n).map(EquationLabel::unit).collect(),
            Profile::BpskHomogeneous | Profile::QpskHomogeneous => (1..8).map(EquationLabel).collect(),
            Profile::DirectRateDiverse => [0b001, 0b010, 0b100, 0b011].into_iter().map(EquationLabel).collect(),
            // C_I ^ C_Q combinations are left out.
            Profile::SplitRateDiverse => (1..16u8).filter(|m| m & 0b1100 != 0b1100).map(EquationLabel).collect(),
        };
        labels.sort_by_key(|l| (l.weight(), l.0));
        labels
    }

    /// Decoded packets per slot counted in BPSK-sized packets (a QPSK packet counts twice).
    pub fn equivalent_bpsk_packets(self) -> usize {
        let streams = self.streams();
        self.scheduled_labels()
            .iter()
            .map(|l| streams[l.streams().next().expect("nonzero label")].mac_packets())
            .sum()
    }

    /// MAC packets of each user carried in one slot.
    pub fn mac_packets_per_slot(self) -> [usize; 3] {
        let mut out = [0; 3];
        for s in self.streams() {
            out[s.user] += s.mac_packets();
        }
        out
    }

    /// Streams belonging to `user`, in basis order.
    pub fn user_streams(self, user: usize) -> Vec<usize> {
        self.streams().iter().enumerate().filter(|(_, s)| s.user == user).map(|(i, _)| i).collect()
    }

    /// Builds each user's symbol block from per-stream MAC payloads (CRC is appended here).
    pub fn modulate(self, stream_payloads: &[BitPacket], code: &ConvCodeSpec) -> Result<Vec<SymbolBlock>> {
        let streams = self.streams();
        if stream_payloads.len() != streams.len() {
            return Err(Error::LengthMismatch { expected: streams.len(), actual: stream_payloads.len() });
        }
        (0..3)
            .map(|user| {
                let own: Vec<&BitPacket> =
                    self.user_streams(user).into_iter().map(|i| &stream_payloads[i]).collect();
                modulate_user(user, self.schemes()[user], &own, code)
            })
            .collect()
    }
}

/// CRC signature of a user's stream; `quadrature` selects the Q rail of a split QPSK user.
pub fn stream_signature(user: usize, quadrature: bool) -> u32 {
    (splitmix64(0x4E43_4D41_0000 + 2 * user as u64 + u64::from(quadrature)) >> 32) as u32
}

pub(crate) fn codeword(payload: &BitPacket, signature: u32, code: &ConvCodeSpec) -> BitPacket {
    conv_encode(&append_crc(payload, signature), code)
}

/// Modulates one user's streams (one payload, or I then Q for symbol splitting).
pub fn modulate_user(user: usize, scheme: ModulationScheme, payloads: &[&BitPacket], code: &ConvCodeSpec) -> Result<SymbolBlock> {
    let main = stream_signature(user, false);
    match (scheme, payloads) {
        (ModulationScheme::Bpsk, [p]) => Ok(bpsk_modulate(&codeword(p, main, code))),
        (ModulationScheme::QpskStandard, [p]) => qpsk_standard_modulate(&codeword(p, main, code)),
        (ModulationScheme::QpskSplit, [i, q]) => {
            qpsk_split_modulate(&codeword(i, main, code), &codeword(q, stream_signature(user, true), code))
        }
        _ => Err(Error::InvalidArgument(format!("{scheme:?} cannot carry {} streams", payloads.len()))),
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown profile `{s}`")))
    }
}

/// Where a stream's codeword bits sit in its user's symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rail {
    /// BPSK: bit n on the real part of symbol n.
    Real,
    /// Symbol splitting: bit n on the real part of symbol n.
    InPhase,
    /// Symbol splitting: bit n on the imaginary part of symbol n.
    Quadrature,
    /// Standard QPSK: bit n on symbol n / 2, real for even n, imaginary for odd n.
    Interleaved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamDesc {
    pub user: usize,
    pub rail: Rail,
}

impl StreamDesc {
    /// `(symbol index, imaginary?)` carrying codeword bit `n`.
    #[inline]
    pub fn locate(&self, n: usize) -> (usize, bool) {
        match self.rail {
            Rail::Real | Rail::InPhase => (n, false),
            Rail::Quadrature => (n, true),
            Rail::Interleaved => (n / 2, n % 2 == 1),
        }
    }

    pub fn signature(&self) -> u32 {
        stream_signature(self.user, self.rail == Rail::Quadrature)
    }

    /// BPSK-sized MAC packets carried per slot.
    pub fn mac_packets(&self) -> usize {
        match self.rail {
            Rail::Interleaved => 2,
            _ => 1,
        }
    }

    fn interleaved(&self) -> bool {
        self.rail == Rail::Interleaved
    }

    pub fn name(&self) -> String {
        match self.rail {
            Rail::InPhase => format!("{}_I", USER_NAMES[self.user]),
            Rail::Quadrature => format!("{}_Q", USER_NAMES[self.user]),
            _ => USER_NAMES[self.user].to_string(),
        }
    }
}

/// GF(2) coefficient vector over a slot's stream basis, bit i for stream i.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EquationLabel(pub u8);

impl EquationLabel {
    pub fn unit(stream: usize) -> Self {
        EquationLabel(1 << stream)
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    pub fn contains(self, stream: usize) -> bool {
        self.0 >> stream & 1 == 1
    }

    pub fn streams(self) -> impl Iterator<Item = usize> {
        (0..8).filter(move |i| self.0 >> i & 1 == 1)
    }

    pub fn is_native(self) -> bool {
        self.weight() == 1
    }

    /// XOR of the CRC signatures of the label's streams.
    pub fn signature(self, profile: Profile) -> u32 {
        let streams = profile.streams();
        self.streams().fold(0, |acc, i| acc ^ streams[i].signature())
    }

    pub fn describe(self, profile: Profile) -> String {
        let streams = profile.streams();
        self.streams().map(|i| streams[i].name()).collect::<Vec<_>>().join("^")
    }
}

/// Checks that a label can be decoded by XOR-CD: all its streams share the bit layout.
pub(crate) fn label_is_aligned(profile: Profile, label: EquationLabel) -> bool {
    let streams = profile.streams();
    let mut it = label.streams().map(|i| streams[i].interleaved());
    match it.next() {
        Some(first) => it.all(|x| x == first) && label.streams().all(|i| i < streams.len()),
        None => false,
    }
}
