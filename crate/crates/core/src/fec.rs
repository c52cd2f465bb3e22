//! Rate-1/2 convolutional code with generators [133, 171] (octal), K = 7, and a
//! soft-decision Viterbi decoder.
//!
//! Encoding is zero-tail terminated so every packet decodes on its own. Codewords are
//! interleaved as `a0 b0 a1 b1 ...`, where `a` comes from generator 133 and `b` from 171.

use crate::bits::BitPacket;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvCodeSpec {
    /// Generator of the even-indexed output bits, MSB applies to the current input.
    pub generator_a: u8,
    pub generator_b: u8,
    pub constraint_length: usize,
    /// Number of zero flush bits appended by the encoder.
    pub termination: usize,
    /// |LLR| saturation applied before path-metric accumulation.
    pub llr_clip: f64,
}

impl Default for ConvCodeSpec {
    fn default() -> Self {
        Self::STANDARD
    }
}

impl ConvCodeSpec {
    pub const STANDARD: ConvCodeSpec = ConvCodeSpec {
        generator_a: 0o133,
        generator_b: 0o171,
        constraint_length: 7,
        termination: 6,
        llr_clip: 50.0,
    };

    pub fn with_llr_clip(mut self, clip: f64) -> Self {
        self.llr_clip = clip;
        self
    }

    pub fn codeword_len(&self, payload_len: usize) -> usize {
        2 * (payload_len + self.termination)
    }

    /// Inverse of [`codeword_len`](Self::codeword_len).
    pub fn payload_len(&self, codeword_len: usize) -> Result<usize> {
        if codeword_len % 2 != 0 || codeword_len / 2 <= self.termination {
            return Err(Error::SoftLength(codeword_len));
        }
        Ok(codeword_len / 2 - self.termination)
    }

    fn states(&self) -> usize {
        1 << (self.constraint_length - 1)
    }

    /// Output pair index (2*a + b) for every register value, register LSB = newest input.
    fn output_table(&self) -> Vec<u8> {
        let k = self.constraint_length;
        let ra = reverse_bits(self.generator_a as u32, k);
        let rb = reverse_bits(self.generator_b as u32, k);
        (0..1u32 << k)
            .map(|reg| (((reg & ra).count_ones() & 1) << 1 | ((reg & rb).count_ones() & 1)) as u8)
            .collect()
    }
}

fn reverse_bits(g: u32, width: usize) -> u32 {
    (0..width).fold(0, |acc, i| acc | (((g >> (width - 1 - i)) & 1) << i))
}

/// Soft values, one per coded bit. Positive means bit 0 is more likely.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrVector(Vec<f64>);

impl LlrVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLlr(pos));
        }
        Ok(Self(values))
    }

    /// Noiseless soft input for a codeword: `+magnitude` for 0 bits, `-magnitude` for 1 bits.
    pub fn hard(codeword: &BitPacket, magnitude: f64) -> Self {
        Self(codeword.bits().iter().map(|&b| if b == 0 { magnitude } else { -magnitude }).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }
}

/// Encodes `payload` followed by the zero tail.
pub fn conv_encode(payload: &BitPacket, spec: &ConvCodeSpec) -> BitPacket {
    let table = spec.output_table();
    let mask = (1u32 << spec.constraint_length) - 1;
    let mut reg = 0u32;
    let mut out = Vec::with_capacity(spec.codeword_len(payload.len()));
    let tail = std::iter::repeat_n(0u8, spec.termination);
    for u in payload.bits().iter().copied().chain(tail) {
        reg = ((reg << 1) | u as u32) & mask;
        let pair = table[reg as usize];
        out.push(pair >> 1);
        out.push(pair & 1);
    }
    BitPacket::from_bits_unchecked(out)
}

/// Maximum-likelihood decoding of a terminated codeword from soft input.
///
/// On equal path metrics the survivor is the predecessor whose oldest register bit is 0.
pub fn viterbi_decode(soft: &LlrVector, spec: &ConvCodeSpec) -> Result<BitPacket> {
    let payload_len = spec.payload_len(soft.len())?;
    Ok(viterbi_core(soft.values(), payload_len, spec))
}

pub(crate) fn viterbi_core(llr: &[f64], payload_len: usize, spec: &ConvCodeSpec) -> BitPacket {
    assert!(spec.constraint_length <= 7, "survivor storage supports K <= 7");
    let states = spec.states();
    let high = states >> 1;
    let table = spec.output_table();
    let steps = llr.len() / 2;
    let clip = spec.llr_clip;

    let mut metric = vec![f64::NEG_INFINITY; states];
    metric[0] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; states];
    let mut decisions = vec![0u64; steps];

    for t in 0..steps {
        let l0 = llr[2 * t].clamp(-clip, clip);
        let l1 = llr[2 * t + 1].clamp(-clip, clip);
        // Correlation metric for output pair (a, b): +llr when the bit is 0.
        let branch = [l0 + l1, l0 - l1, -l0 + l1, -l0 - l1];
        let flushing = t >= payload_len;
        let mut word = 0u64;
        for (ns, slot) in next.iter_mut().enumerate() {
            let u = ns & 1;
            if flushing && u == 1 {
                *slot = f64::NEG_INFINITY;
                continue;
            }
            let p0 = ns >> 1;
            let p1 = p0 | high;
            let m0 = metric[p0] + branch[table[(p0 << 1) | u] as usize];
            let m1 = metric[p1] + branch[table[(p1 << 1) | u] as usize];
            if m1 > m0 {
                *slot = m1;
                word |= 1 << ns;
            } else {
                *slot = m0;
            }
        }
        decisions[t] = word;
        std::mem::swap(&mut metric, &mut next);
    }

    let mut state = 0usize;
    let mut bits = vec![0u8; steps];
    for t in (0..steps).rev() {
        bits[t] = (state & 1) as u8;
        let oldest = ((decisions[t] >> state) & 1) as usize;
        state = (state >> 1) | (oldest * high);
    }
    bits.truncate(payload_len);
    BitPacket::from_bits_unchecked(bits)
}
