//! Block-fading AWGN uplink into a two-antenna receiver.
//!
//! Gains are scaled so that, with unit noise variance, `E|h|^2` equals the user's linear
//! SNR. Symbol blocks are normalized to unit average power before superposition, so the
//! configured SNR is the received per-symbol SNR for every modulation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::{ModulationScheme, SymbolBlock};

pub const ANTENNAS: usize = 2;
pub const MAX_USERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingModel {
    /// `h ~ CN(0, snr)` per user, antenna and slot.
    #[default]
    Rayleigh,
    /// `|h|^2 = snr` with a uniform random phase.
    RandomPhase,
    /// `h = sqrt(snr)`, real and deterministic.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainVariation {
    /// One gain per user and antenna for the whole slot.
    #[default]
    Block,
    /// Independent gains for every sample (stress testing).
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelModel {
    pub fading: FadingModel,
    pub variation: GainVariation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub user_ids: Vec<usize>,
    pub snr_db: Vec<f64>,
    /// `gains[user][antenna]`: one entry for block fading, one per sample otherwise.
    pub gains: Vec<[Vec<Complex64>; ANTENNAS]>,
    pub noise_var: f64,
}

impl ChannelRealization {
    #[inline]
    pub fn gain(&self, user: usize, antenna: usize, k: usize) -> Complex64 {
        let g = &self.gains[user][antenna];
        if g.len() == 1 {
            g[0]
        } else {
            g[k]
        }
    }

    pub fn users(&self) -> usize {
        self.user_ids.len()
    }

    /// Multiplies every gain by `factor` (tests of metric homogeneity use this).
    pub fn scale_gains(&mut self, factor: f64) {
        for per_user in &mut self.gains {
            for g in per_user.iter_mut().flatten() {
                *g *= factor;
            }
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

fn complex_normal<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

fn draw_gain<R: Rng>(rng: &mut R, fading: FadingModel, snr_lin: f64) -> Complex64 {
    match fading {
        FadingModel::Rayleigh => complex_normal(rng, snr_lin),
        FadingModel::RandomPhase => {
            Complex64::from_polar(snr_lin.sqrt(), rng.random_range(0.0..std::f64::consts::TAU))
        }
        FadingModel::Static => Complex64::new(snr_lin.sqrt(), 0.0),
    }
}

/// Draws gains for 1 to 3 users given `(id, snr_db)` pairs; noise variance is 1.
///
/// `samples` is only consulted for [`GainVariation::PerSample`].
pub fn draw_channel(users: &[(usize, f64)], model: ChannelModel, samples: usize, seed: u64) -> Result<ChannelRealization> {
    if users.is_empty() || users.len() > MAX_USERS {
        return Err(Error::Channel(format!("{} users, expected 1 to {MAX_USERS}", users.len())));
    }
    if let Some((id, snr)) = users.iter().find(|(_, snr)| !snr.is_finite()) {
        return Err(Error::Channel(format!("user {id} has non-finite SNR {snr}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = match model.variation {
        GainVariation::Block => 1,
        GainVariation::PerSample => samples.max(1),
    };
    let gains = users
        .iter()
        .map(|&(_, snr_db)| {
            let lin = db_to_linear(snr_db);
            std::array::from_fn(|_| (0..count).map(|_| draw_gain(&mut rng, model.fading, lin)).collect())
        })
        .collect();
    Ok(ChannelRealization {
        user_ids: users.iter().map(|u| u.0).collect(),
        snr_db: users.iter().map(|u| u.1).collect(),
        gains,
        noise_var: 1.0,
    })
}

/// What the receiver knows about one transmitted block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserSignal {
    pub scheme: ModulationScheme,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotObservation {
    pub y: [Vec<Complex64>; ANTENNAS],
    pub sigma2: f64,
    pub realization: ChannelRealization,
    pub signals: Vec<UserSignal>,
}

impl SlotObservation {
    pub fn samples(&self) -> usize {
        self.y[0].len()
    }

    /// Gain applied to the unnormalized constellation point of `user` at sample `k`.
    #[inline]
    pub fn effective_gain(&self, user: usize, antenna: usize, k: usize) -> Complex64 {
        self.realization.gain(user, antenna, k) * self.signals[user].scheme.normalization()
    }

    /// Whether `user` transmits at sample `k` (shorter blocks are padded with silence).
    #[inline]
    pub fn active(&self, user: usize, k: usize) -> bool {
        k < self.signals[user].len
    }

    /// Removes a known block's contribution from both antennas.
    pub fn cancel(&mut self, user: usize, block: &SymbolBlock) {
        for a in 0..ANTENNAS {
            for (k, x) in block.symbols.iter().enumerate().take(self.samples()) {
                let h = self.effective_gain(user, a, k);
                self.y[a][k] -= h * x;
            }
        }
    }

    /// Multiplies received samples and gains by `factor`, noise variance unchanged.
    pub fn scaled(&self, factor: f64) -> SlotObservation {
        let mut out = self.clone();
        for y in &mut out.y {
            for v in y.iter_mut() {
                *v *= factor;
            }
        }
        out.realization.scale_gains(factor);
        out
    }
}

/// Superimposes the users' blocks at both antennas and adds complex Gaussian noise of
/// variance `realization.noise_var` per antenna.
///
/// Blocks may differ in length; the slot lasts as long as the longest one and shorter
/// blocks are silent afterwards.
pub fn transmit_slot(blocks: &[SymbolBlock], realization: &ChannelRealization, seed: u64) -> Result<SlotObservation> {
    if blocks.len() != realization.users() {
        return Err(Error::LengthMismatch { expected: realization.users(), actual: blocks.len() });
    }
    let samples = blocks.iter().map(SymbolBlock::len).max().unwrap_or(0);
    for g in realization.gains.iter().flatten() {
        if g.len() != 1 && g.len() < samples {
            return Err(Error::LengthMismatch { expected: samples, actual: g.len() });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma2 = realization.noise_var;
    let y = std::array::from_fn(|a| {
        (0..samples)
            .map(|k| {
                let clean: Complex64 = blocks
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| k < b.len())
                    .map(|(u, b)| realization.gain(u, a, k) * b.scheme.normalization() * b.symbols[k])
                    .sum();
                if sigma2 > 0.0 {
                    clean + complex_normal(&mut rng, sigma2)
                } else {
                    clean
                }
            })
            .collect()
    });
    Ok(SlotObservation {
        y,
        sigma2,
        realization: realization.clone(),
        signals: blocks.iter().map(|b| UserSignal { scheme: b.scheme, len: b.len() }).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitPacket;
    use crate::modem::{bpsk_modulate, qpsk_split_modulate};

    const STATIC: ChannelModel = ChannelModel { fading: FadingModel::Static, variation: GainVariation::Block };

    fn random_block(seed: u64, len: usize) -> SymbolBlock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        bpsk_modulate(&BitPacket::random(len, &mut rng))
    }

    #[test]
    fn unit_gain_at_zero_db() {
        let r = draw_channel(&[(0, 0.0)], STATIC, 0, 1).unwrap();
        for a in 0..ANTENNAS {
            assert!((r.gain(0, a, 0).norm_sqr() - 1.0).abs() < 1e-12);
        }
        let p = draw_channel(&[(0, 0.0)], ChannelModel { fading: FadingModel::RandomPhase, ..STATIC }, 0, 1).unwrap();
        assert!((p.gain(0, 1, 0).norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn draws_are_seed_deterministic() {
        let users = [(0, 8.0), (1, 8.0), (2, 11.0)];
        let a = draw_channel(&users, ChannelModel::default(), 0, 42).unwrap();
        let b = draw_channel(&users, ChannelModel::default(), 0, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, draw_channel(&users, ChannelModel::default(), 0, 43).unwrap());
    }

    #[test]
    fn rayleigh_mean_power_calibrated() {
        for snr_db in [0.0, 8.0, 14.0] {
            let n = 100_000;
            let mean: f64 = (0..n)
                .map(|s| draw_channel(&[(0, snr_db)], ChannelModel::default(), 0, s).unwrap().gain(0, 0, 0).norm_sqr())
                .sum::<f64>()
                / n as f64;
            assert!((linear_to_db(mean) - snr_db).abs() < 0.2, "{snr_db} dB measured {}", linear_to_db(mean));
        }
    }

    #[test]
    fn user_count_validated() {
        assert!(draw_channel(&[], STATIC, 0, 0).is_err());
        assert!(draw_channel(&[(0, 1.0); 4], STATIC, 0, 0).is_err());
    }

    #[test]
    fn noiseless_single_user_passes_symbols() {
        let mut r = draw_channel(&[(0, 0.0)], STATIC, 0, 0).unwrap();
        r.noise_var = 0.0;
        let block = random_block(1, 40);
        let obs = transmit_slot(std::slice::from_ref(&block), &r, 9).unwrap();
        assert_eq!(obs.y[0], block.symbols);
        assert_eq!(obs.y[1], block.symbols);
    }

    #[test]
    fn noiseless_superposition_is_exact() {
        let mut r = draw_channel(&[(0, 8.0), (1, 8.0), (2, 12.0)], ChannelModel::default(), 0, 5).unwrap();
        r.noise_var = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let blocks = vec![
            random_block(3, 30),
            random_block(4, 30),
            qpsk_split_modulate(&BitPacket::random(30, &mut rng), &BitPacket::random(30, &mut rng)).unwrap(),
        ];
        let obs = transmit_slot(&blocks, &r, 0).unwrap();
        for a in 0..ANTENNAS {
            for k in 0..30 {
                let expected: Complex64 = (0..3)
                    .map(|u| r.gain(u, a, k) * blocks[u].symbols[k] * blocks[u].scheme.normalization())
                    .sum();
                assert!((obs.y[a][k] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_statistics() {
        let mut r = draw_channel(&[(0, 3.0)], ChannelModel::default(), 0, 8).unwrap();
        r.noise_var = 0.7;
        let block = random_block(5, 100_000);
        let obs = transmit_slot(std::slice::from_ref(&block), &r, 77).unwrap();
        let residual: Vec<Vec<Complex64>> = (0..ANTENNAS)
            .map(|a| (0..block.len()).map(|k| obs.y[a][k] - r.gain(0, a, k) * block.symbols[k]).collect())
            .collect();
        for res in &residual {
            let var = res.iter().map(|w| w.norm_sqr()).sum::<f64>() / res.len() as f64;
            assert!((var / 0.7 - 1.0).abs() < 0.01, "variance {var}");
        }
        let cross: Complex64 =
            residual[0].iter().zip(&residual[1]).map(|(a, b)| a * b.conj()).sum::<Complex64>() / block.len() as f64;
        assert!(cross.norm() < 0.01, "cross-correlation {cross}");
    }

    #[test]
    fn superposition_is_linear() {
        let mut r = draw_channel(&[(0, 5.0), (1, 9.0)], ChannelModel::default(), 0, 3).unwrap();
        r.noise_var = 0.0;
        let a = random_block(1, 20);
        let b = random_block(2, 20);
        let obs = transmit_slot(&[a.clone(), b.clone()], &r, 0).unwrap();
        let solo_a = transmit_slot(&[a, SymbolBlock { symbols: vec![Complex64::new(0.0, 0.0); 20], scheme: ModulationScheme::Bpsk }], &r, 0).unwrap();
        let solo_b = transmit_slot(&[SymbolBlock { symbols: vec![Complex64::new(0.0, 0.0); 20], scheme: ModulationScheme::Bpsk }, b], &r, 0).unwrap();
        for ant in 0..ANTENNAS {
            for k in 0..20 {
                assert!((obs.y[ant][k] - solo_a.y[ant][k] - solo_b.y[ant][k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn shorter_blocks_are_padded_with_silence() {
        let mut r = draw_channel(&[(0, 0.0), (1, 0.0)], STATIC, 0, 0).unwrap();
        r.noise_var = 0.0;
        let obs = transmit_slot(&[random_block(1, 10), random_block(2, 6)], &r, 0).unwrap();
        assert_eq!(obs.samples(), 10);
        assert!(obs.active(1, 5) && !obs.active(1, 6));
    }

    #[test]
    fn per_sample_gains_have_one_entry_per_sample() {
        let model = ChannelModel { fading: FadingModel::Rayleigh, variation: GainVariation::PerSample };
        let r = draw_channel(&[(0, 0.0)], model, 16, 1).unwrap();
        assert_eq!(r.gains[0][0].len(), 16);
        assert_ne!(r.gain(0, 0, 0), r.gain(0, 0, 1));
        assert!(transmit_slot(&[random_block(1, 20)], &r, 0).is_err());
    }
}
