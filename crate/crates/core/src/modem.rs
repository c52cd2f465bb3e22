//! Bit-to-symbol mappings: BPSK, standard QPSK and symbol-splitting QPSK.
//!
//! Constellations are unnormalized (`±1` and `±1 ± j`); the channel applies the power
//! normalization. Indices here are 0-based, so the 1-based symbol `k` of the usual
//! notation is element `k - 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bits::BitPacket;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModulationScheme {
    Bpsk,
    /// Odd/even codeword bits on the I/Q rails of one symbol.
    QpskStandard,
    /// Two independently encoded codewords on the I and Q rails.
    QpskSplit,
}

impl ModulationScheme {
    /// Mean `|x|^2` of the unnormalized constellation.
    pub fn average_power(self) -> f64 {
        match self {
            ModulationScheme::Bpsk => 1.0,
            ModulationScheme::QpskStandard | ModulationScheme::QpskSplit => 2.0,
        }
    }

    /// Amplitude factor that brings the constellation to unit average power.
    pub fn normalization(self) -> f64 {
        self.average_power().sqrt().recip()
    }

    /// Constellation points in a fixed enumeration order.
    pub fn points(self) -> &'static [Complex64] {
        const BPSK: [Complex64; 2] = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        const QPSK: [Complex64; 4] = [
            Complex64::new(1.0, 1.0),
            Complex64::new(1.0, -1.0),
            Complex64::new(-1.0, 1.0),
            Complex64::new(-1.0, -1.0),
        ];
        match self {
            ModulationScheme::Bpsk => &BPSK,
            _ => &QPSK,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    pub symbols: Vec<Complex64>,
    pub scheme: ModulationScheme,
}

impl SymbolBlock {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[inline]
pub fn bit_to_level(bit: u8) -> f64 {
    1.0 - 2.0 * bit as f64
}

/// `x[k] = 1 - 2 v[k]`.
pub fn bpsk_modulate(codeword: &BitPacket) -> SymbolBlock {
    SymbolBlock {
        symbols: codeword.bits().iter().map(|&b| Complex64::new(bit_to_level(b), 0.0)).collect(),
        scheme: ModulationScheme::Bpsk,
    }
}

/// `x[k] = (1 - 2 v[2k]) + j (1 - 2 v[2k+1])` with 0-based `k`.
pub fn qpsk_standard_modulate(codeword: &BitPacket) -> Result<SymbolBlock> {
    if codeword.len() % 2 != 0 {
        return Err(Error::OddLength(codeword.len()));
    }
    Ok(SymbolBlock {
        symbols: codeword
            .bits()
            .chunks(2)
            .map(|c| Complex64::new(bit_to_level(c[0]), bit_to_level(c[1])))
            .collect(),
        scheme: ModulationScheme::QpskStandard,
    })
}

/// `x[k] = (1 - 2 vI[k]) + j (1 - 2 vQ[k])`.
pub fn qpsk_split_modulate(codeword_i: &BitPacket, codeword_q: &BitPacket) -> Result<SymbolBlock> {
    if codeword_i.len() != codeword_q.len() {
        return Err(Error::LengthMismatch { expected: codeword_i.len(), actual: codeword_q.len() });
    }
    Ok(SymbolBlock {
        symbols: codeword_i
            .bits()
            .iter()
            .zip(codeword_q.bits())
            .map(|(&i, &q)| Complex64::new(bit_to_level(i), bit_to_level(q)))
            .collect(),
        scheme: ModulationScheme::QpskSplit,
    })
}

/// PNC demodulation rule: the product of two `±1` symbols maps to their XOR bit,
/// `(1 - xA xB) / 2`.
pub fn pnc_bit_map(xor_symbol_product: f64) -> u8 {
    u8::from(xor_symbol_product < 0.0)
}

/// Hard sign decisions on the real rail.
pub fn bpsk_hard_demodulate(block: &SymbolBlock) -> BitPacket {
    BitPacket::from_bools(block.symbols.iter().map(|s| s.re < 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn packet(bits: &[u8]) -> BitPacket {
        BitPacket::from_bits(bits.to_vec()).unwrap()
    }

    #[test]
    fn bpsk_levels() {
        let b = bpsk_modulate(&packet(&[0, 1]));
        assert_eq!(b.symbols, vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        assert!(bpsk_modulate(&BitPacket::zeros(5)).symbols.iter().all(|s| *s == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn bpsk_sign_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cw = BitPacket::random(300, &mut rng);
        assert_eq!(bpsk_hard_demodulate(&bpsk_modulate(&cw)), cw);
    }

    #[test]
    fn qpsk_standard_mapping() {
        let b = qpsk_standard_modulate(&packet(&[0, 0, 1, 1, 0, 1, 1, 0])).unwrap();
        assert_eq!(
            b.symbols,
            vec![
                Complex64::new(1.0, 1.0),
                Complex64::new(-1.0, -1.0),
                Complex64::new(1.0, -1.0),
                Complex64::new(-1.0, 1.0)
            ]
        );
        assert_eq!(qpsk_standard_modulate(&packet(&[0, 1, 1])), Err(Error::OddLength(3)));
    }

    #[test]
    fn qpsk_split_is_two_bpsk_rails() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ci = BitPacket::random(50, &mut rng);
        let cq = BitPacket::random(50, &mut rng);
        let block = qpsk_split_modulate(&ci, &cq).unwrap();
        let re: Vec<f64> = block.symbols.iter().map(|s| s.re).collect();
        let im: Vec<f64> = block.symbols.iter().map(|s| s.im).collect();
        let bi: Vec<f64> = bpsk_modulate(&ci).symbols.iter().map(|s| s.re).collect();
        let bq: Vec<f64> = bpsk_modulate(&cq).symbols.iter().map(|s| s.re).collect();
        assert_eq!(re, bi);
        assert_eq!(im, bq);
        assert_eq!(qpsk_split_modulate(&packet(&[0, 0]), &packet(&[0, 0])).unwrap().symbols[0], Complex64::new(1.0, 1.0));
        assert!(qpsk_split_modulate(&packet(&[0]), &packet(&[0, 1])).is_err());
    }

    #[test]
    fn pnc_rule() {
        assert_eq!(pnc_bit_map(1.0 * 1.0), 0);
        assert_eq!(pnc_bit_map(1.0 * -1.0), 1);
        assert_eq!(pnc_bit_map(-1.0 * -1.0), 0);
    }

    #[test]
    fn split_rail_product_is_xor_of_bits() {
        // Each rail's product with a BPSK symbol reduces to the two-BPSK rule.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let va = BitPacket::random(64, &mut rng);
        let vi = BitPacket::random(64, &mut rng);
        let vq = BitPacket::random(64, &mut rng);
        let xa = bpsk_modulate(&va);
        let xc = qpsk_split_modulate(&vi, &vq).unwrap();
        for k in 0..64 {
            assert_eq!(pnc_bit_map(xa.symbols[k].re * xc.symbols[k].re), va.bits()[k] ^ vi.bits()[k]);
            assert_eq!(pnc_bit_map(xa.symbols[k].re * xc.symbols[k].im), va.bits()[k] ^ vq.bits()[k]);
        }
    }

    #[test]
    fn normalization_gives_unit_power() {
        for s in [ModulationScheme::Bpsk, ModulationScheme::QpskStandard, ModulationScheme::QpskSplit] {
            let p: f64 = s.points().iter().map(|x| x.norm_sqr()).sum::<f64>() / s.points().len() as f64;
            assert!((p * s.normalization().powi(2) - 1.0).abs() < 1e-12);
        }
    }
}
