//! CRC-32 (polynomial 0x04C11DB7, reflected, init and final XOR all-ones) over bit streams.
//!
//! Bits are consumed in packet order, which matches the byte-oriented CRC-32 when bytes
//! are unpacked LSB-first. Each transmitted frame XORs a sender signature into its CRC so
//! that a decoder locking onto the wrong user's codeword rejects it.

use crate::bits::BitPacket;

pub const CRC_BITS: usize = 32;
const POLY_REFLECTED: u32 = 0xEDB8_8320;

pub fn crc32_bits(bits: &[u8]) -> u32 {
    let mut crc = u32::MAX;
    for &b in bits {
        crc ^= b as u32;
        crc = if crc & 1 == 1 { (crc >> 1) ^ POLY_REFLECTED } else { crc >> 1 };
    }
    !crc
}

/// Appends the CRC of `payload` XORed with `signature`, LSB-first.
pub fn append_crc(payload: &BitPacket, signature: u32) -> BitPacket {
    let crc = crc32_bits(payload.bits()) ^ signature;
    let mut bits = payload.bits().to_vec();
    bits.extend((0..CRC_BITS).map(|i| ((crc >> i) & 1) as u8));
    BitPacket::from_bits_unchecked(bits)
}

fn read_crc(bits: &[u8]) -> u32 {
    bits.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | ((b as u32) << i))
}

/// Validates a CRC-framed packet that is the XOR of `weight` individually framed packets
/// whose signatures XOR to `signature`.
///
/// The CRC is affine rather than linear: `crc(a ^ b) = crc(a) ^ crc(b) ^ crc(0)`, so an XOR
/// of an even number of frames carries the CRC of its payload offset by the CRC of the
/// all-zero payload. Returns the payload on success.
pub fn check_combination(framed: &BitPacket, weight: u32, signature: u32) -> Option<BitPacket> {
    if framed.len() < CRC_BITS {
        return None;
    }
    let split = framed.len() - CRC_BITS;
    let (payload, tail) = framed.bits().split_at(split);
    let mut expected = crc32_bits(payload) ^ signature;
    if weight % 2 == 0 {
        expected ^= crc32_bits(&vec![0u8; split]);
    }
    (read_crc(tail) == expected).then(|| BitPacket::from_bits_unchecked(payload.to_vec()))
}
