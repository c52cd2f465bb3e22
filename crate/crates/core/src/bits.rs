//! Fixed-length binary packets.

use std::fmt;
use std::ops::BitXor;

use rand::Rng;

use crate::error::{Error, Result};

/// A binary payload stored one bit per byte (each byte is 0 or 1).
///
/// Used for MAC packets, convolutional codewords and decoded XOR packets alike.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitPacket {
    bits: Vec<u8>,
}

impl BitPacket {
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    /// Builds a packet from 0/1 values; any other value is rejected.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidBit { position: pos, value: bits[pos] });
        }
        Ok(Self { bits })
    }

    pub(crate) fn from_bits_unchecked(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self { bits: iter.into_iter().map(u8::from).collect() }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self { bits: (0..len).map(|_| rng.random::<bool>() as u8).collect() }
    }

    /// Unpacks bytes LSB-first.
    pub fn from_bytes_lsb(bytes: &[u8]) -> Self {
        let bits = bytes.iter().flat_map(|&b| (0..8).map(move |i| (b >> i) & 1)).collect();
        Self { bits }
    }

    /// Packs LSB-first; the length must be a multiple of 8.
    pub fn to_bytes_lsb(&self) -> Result<Vec<u8>> {
        if self.bits.len() % 8 != 0 {
            return Err(Error::NotByteAligned(self.bits.len()));
        }
        Ok(self
            .bits
            .chunks(8)
            .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << i)))
            .collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// In-place XOR. Panics on length mismatch.
    pub fn xor_assign(&mut self, other: &BitPacket) {
        assert_eq!(self.len(), other.len(), "xor of packets with different lengths");
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a ^= b;
        }
    }

    pub fn concat(parts: &[BitPacket]) -> BitPacket {
        BitPacket { bits: parts.iter().flat_map(|p| p.bits.iter().copied()).collect() }
    }

    /// Splits into `parts` equal pieces. Panics if the length does not divide.
    pub fn split(&self, parts: usize) -> Vec<BitPacket> {
        assert!(parts > 0 && self.len() % parts == 0, "uneven packet split");
        self.bits.chunks(self.len() / parts).map(|c| BitPacket { bits: c.to_vec() }).collect()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> BitPacket {
        BitPacket { bits: self.bits[range].to_vec() }
    }
}

impl BitXor for &BitPacket {
    type Output = BitPacket;

    fn bitxor(self, rhs: &BitPacket) -> BitPacket {
        let mut out = self.clone();
        out.xor_assign(rhs);
        out
    }
}

impl fmt::Debug for BitPacket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitPacket[{}](", self.bits.len())?;
        for b in self.bits.iter().take(64) {
            write!(f, "{b}")?;
        }
        if self.bits.len() > 64 {
            write!(f, "...")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_binary_values() {
        assert!(matches!(
            BitPacket::from_bits(vec![0, 1, 2]),
            Err(Error::InvalidBit { position: 2, value: 2 })
        ));
    }

    #[test]
    fn byte_packing_is_lsb_first() {
        let p = BitPacket::from_bytes_lsb(&[0b0000_0101]);
        assert_eq!(p.bits(), &[1, 0, 1, 0, 0, 0, 0, 0]);
        assert_eq!(p.to_bytes_lsb().unwrap(), vec![5]);
        assert!(BitPacket::zeros(7).to_bytes_lsb().is_err());
    }

    #[test]
    fn split_and_concat_invert() {
        let p = BitPacket::from_bits(vec![1, 0, 0, 1, 1, 1]).unwrap();
        let parts = p.split(2);
        assert_eq!(parts[1].bits(), &[1, 1, 1]);
        assert_eq!(BitPacket::concat(&parts), p);
    }
}
