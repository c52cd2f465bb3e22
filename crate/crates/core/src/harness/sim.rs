use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::analysis::tally_throughput;
use crate::bits::BitPacket;
use crate::bridge::{mac_bridge, packet_equations, MacLedger, PacketRef, StreamRefs};
use crate::channel::{draw_channel, transmit_slot};
use crate::detect::{run_decoder_bank, DecodedEquation};
use crate::error::{Error, Result};
use crate::fec::ConvCodeSpec;
use crate::macode::{mac_encode, MacCodeSpec, Message};
use crate::profile::Profile;
use crate::seed::splitmix64;

/// Which bridging steps a throughput figure credits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Natives decoded directly by MUD decoders.
    Mud,
    /// Plus natives recovered by XORing equations within a slot.
    Phy,
    /// Plus lone equations resolved across slots after message recovery.
    Mac,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Mud, Stage::Phy, Stage::Mac];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Mud => "mud",
            Stage::Phy => "phy",
            Stage::Mac => "mac",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage {s:?}")))
    }
}

/// Mean throughputs of one (profile, SNR point, stage) over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub profile: Profile,
    pub snr_c_db: f64,
    pub th: [f64; 3],
    pub th_sys: f64,
    pub stage: Stage,
    /// Slots per trial.
    pub slots: u64,
    pub seed: u64,
    /// Standard error of `th_sys` across trials; not part of the CSV.
    pub th_sys_stderr: Option<f64>,
}

/// Messages recovered by each user under each stage in one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialCounts {
    pub messages: [[u64; 3]; 3],
}

/// Seed of trial `trial` at sweep point `point`: `master ^ splitmix64(point << 32 | trial)`.
///
/// Profiles share seeds, so they see the same channel draws at each point and trial.
pub fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    master ^ splitmix64(((point as u64) << 32) | trial as u64)
}

fn slot_seed(trial_seed: u64, slot: u64, purpose: u64) -> u64 {
    splitmix64(trial_seed ^ splitmix64(slot.wrapping_mul(4).wrapping_add(purpose)))
}

struct Sender {
    message: u64,
    next_index: usize,
    packets: Vec<BitPacket>,
}

impl Sender {
    fn new(user: usize, message: u64, spec: &MacCodeSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        let msg = Message::new(user, BitPacket::random(spec.message_bits(), rng), spec)?;
        let packets = mac_encode(&msg, spec)?.into_iter().map(|(_, p)| p).collect();
        Ok(Self { message, next_index: 0, packets })
    }

    /// Next coded packet; indices wrap around if the message is still pending after all
    /// of them were sent once.
    fn take(&mut self, user: usize) -> (PacketRef, BitPacket) {
        let index = self.next_index;
        self.next_index = (index + 1) % self.packets.len();
        (PacketRef { user, message: self.message, index }, self.packets[index].clone())
    }
}

/// Simulates `cfg.slots` slots of one profile at one user-C SNR.
///
/// The PHY is decoded once per slot. The full (MAC-bridging) ledger drives the senders: a
/// user moves to its next message once the base station recovers the current one. The MUD
/// and PHY stages are tallied on the same decoded equations with the corresponding bridging
/// steps switched off.
pub fn run_trial(cfg: &ScenarioConfig, profile: Profile, snr_c_db: f64, seed: u64) -> Result<TrialCounts> {
    let specs = cfg.mac_specs();
    let code: ConvCodeSpec = cfg.code();
    let streams = profile.streams();
    let users = [(0, cfg.snr_a_db), (1, cfg.snr_b_db), (2, snr_c_db)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut senders = Vec::with_capacity(3);
    for (u, spec) in specs.iter().enumerate() {
        senders.push(Sender::new(u, 0, spec, &mut rng)?);
    }
    let mut mud = MacLedger::without_residual();
    let mut phy = MacLedger::without_residual();
    let mut mac = MacLedger::new();

    for slot in 0..cfg.slots {
        let mut refs: StreamRefs = Vec::with_capacity(streams.len());
        let mut payloads = Vec::with_capacity(streams.len());
        for s in &streams {
            let (r, p): (Vec<PacketRef>, Vec<BitPacket>) = (0..s.mac_packets()).map(|_| senders[s.user].take(s.user)).unzip();
            refs.push(r);
            payloads.push(BitPacket::concat(&p));
        }
        let blocks = profile.modulate(&payloads, &code)?;
        let samples = blocks.iter().map(|b| b.len()).max().unwrap_or(0);
        let realization = draw_channel(&users, cfg.channel(), samples, slot_seed(seed, slot, 0))?;
        let obs = transmit_slot(&blocks, &realization, slot_seed(seed, slot, 1))?;
        let equations = run_decoder_bank(&obs, profile, &code, slot);

        let natives: Vec<DecodedEquation> = equations.iter().filter(|e| e.label.is_native()).cloned().collect();
        let (vars, rows) = packet_equations(&refs, &natives);
        mud.add_slot(slot, vars, rows, &specs)?;
        let (vars, rows) = packet_equations(&refs, &equations);
        phy.add_slot(slot, vars.clone(), rows.clone(), &specs)?;
        mac.add_slot(slot, vars, rows, &specs)?;
        for ledger in [&mut mud, &mut phy, &mut mac] {
            mac_bridge(ledger, &specs)?;
        }

        for (u, sender) in senders.iter_mut().enumerate() {
            if mac.recovered(u, sender.message).is_some() {
                *sender = Sender::new(u, sender.message + 1, &specs[u], &mut rng)?;
            }
        }
    }

    let mut counts = TrialCounts::default();
    for (i, ledger) in [&mud, &phy, &mac].into_iter().enumerate() {
        for u in 0..3 {
            counts.messages[i][u] = ledger.recovered_count(u) as u64;
        }
    }
    Ok(counts)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every profile at every sweep point; trials run in parallel.
///
/// Rows are ordered by profile (config order), SNR point, then stage.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = (0..cfg.profiles.len())
        .flat_map(|p| (0..cfg.snr_c_db.len()).flat_map(move |i| (0..cfg.trials).map(move |t| (p, i, t))))
        .collect();
    let counts: Vec<TrialCounts> = jobs
        .par_iter()
        .map(|&(p, i, t)| run_trial(cfg, cfg.profiles[p], cfg.snr_c_db[i], trial_seed(cfg.seed, i, t)))
        .collect::<Result<_>>()?;

    let lengths = cfg.data_packets;
    let mut rows = Vec::new();
    for (p, &profile) in cfg.profiles.iter().enumerate() {
        for (i, &snr) in cfg.snr_c_db.iter().enumerate() {
            let base = (p * cfg.snr_c_db.len() + i) * cfg.trials;
            let trials = &counts[base..base + cfg.trials];
            for (si, stage) in Stage::ALL.into_iter().enumerate() {
                let records = trials
                    .iter()
                    .map(|c| tally_throughput(&c.messages[si], &lengths, cfg.slots))
                    .collect::<Result<Vec<_>>>()?;
                let th = std::array::from_fn(|u| {
                    records.iter().map(|r| r.users[u].throughput).sum::<f64>() / cfg.trials as f64
                });
                let sys: Vec<f64> = records.iter().map(|r| r.system).collect();
                let (th_sys, th_sys_stderr) = mean_and_stderr(&sys);
                rows.push(ResultRow {
                    profile,
                    snr_c_db: snr,
                    th,
                    th_sys,
                    stage,
                    slots: cfg.slots,
                    seed: cfg.seed,
                    th_sys_stderr: Some(th_sys_stderr),
                });
            }
        }
    }
    Ok(rows)
}
