//! PHY-layer and MAC-layer bridging.
//!
//! Within a slot, decoded XOR equations are reduced over GF(2) so that any stream whose unit
//! vector lies in their span is recovered. Across slots, the ledger keeps what could not be
//! resolved; once a message is recovered by the erasure code, its re-encoded packets are
//! substituted back into those equations, which can unlock packets of other users.

use std::collections::BTreeMap;

use crate::bits::BitPacket;
use crate::channel::SlotObservation;
use crate::detect::{run_decoder_bank, DecodedEquation};
use crate::error::{Error, Result};
use crate::fec::ConvCodeSpec;
use crate::macode::{mac_decode, mac_reencode, MacCodeSpec, MacDecodeOutcome, Message};
use crate::profile::{EquationLabel, Profile};

/// Reduced row-echelon form of a set of equations, packets XORed alongside.
///
/// Each returned row's pivot is its lowest set bit and no other row contains that bit, so
/// the result is the unique reduced basis of the span. Rows are sorted by pivot.
pub fn eliminate<I>(rows: I) -> Result<Vec<(u8, BitPacket)>>
where
    I: IntoIterator<Item = (u8, BitPacket)>,
{
    let mut basis: Vec<(u8, BitPacket)> = Vec::new();
    for (label, packet) in rows {
        let (mut mask, mut packet) = (label, packet);
        for (m, p) in &basis {
            if mask & (m & m.wrapping_neg()) != 0 {
                mask ^= m;
                packet.xor_assign(p);
            }
        }
        if mask == 0 {
            if !packet.is_zero() {
                return Err(Error::Inconsistent(label));
            }
            continue;
        }
        let pivot = mask & mask.wrapping_neg();
        for (m, p) in basis.iter_mut() {
            if *m & pivot != 0 {
                *m ^= mask;
                p.xor_assign(&packet);
            }
        }
        basis.push((mask, packet));
    }
    basis.sort_by_key(|(m, _)| m & m.wrapping_neg());
    Ok(basis)
}

/// Natives and unresolved equations of one slot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhyBridgeOutput {
    /// Recovered stream payloads keyed by stream index.
    pub natives: BTreeMap<usize, BitPacket>,
    /// Reduced rows that are not unit vectors.
    pub residual: Vec<(EquationLabel, BitPacket)>,
}

/// Per-slot GF(2) elimination of decoded equations.
pub fn phy_bridge(equations: &[DecodedEquation]) -> Result<PhyBridgeOutput> {
    let basis = eliminate(equations.iter().map(|e| (e.label.0, e.packet.clone())))?;
    let mut out = PhyBridgeOutput::default();
    for (mask, packet) in basis {
        if mask.is_power_of_two() {
            out.natives.insert(mask.trailing_zeros() as usize, packet);
        } else {
            out.residual.push((EquationLabel(mask), packet));
        }
    }
    Ok(out)
}

/// Everything decoded in one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotLedger {
    pub slot: u64,
    pub equations: Vec<DecodedEquation>,
    pub natives: BTreeMap<usize, BitPacket>,
}

impl SlotLedger {
    pub fn new(slot: u64, equations: Vec<DecodedEquation>) -> Result<Self> {
        let natives = phy_bridge(&equations)?.natives;
        Ok(Self { slot, equations, natives })
    }

    /// Re-derives every stored equation from the resolved streams where possible.
    pub fn is_consistent(&self) -> bool {
        self.equations.iter().all(|e| {
            let mut acc: Option<BitPacket> = None;
            for s in e.label.streams() {
                let Some(p) = self.natives.get(&s) else { return true };
                match acc.as_mut() {
                    Some(a) => a.xor_assign(p),
                    None => acc = Some(p.clone()),
                }
            }
            acc.as_ref() == Some(&e.packet)
        })
    }
}

/// One MAC-layer coded packet: packet `index` of message `message` of `user`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PacketRef {
    pub user: usize,
    pub message: u64,
    pub index: usize,
}

/// What each stream of a slot carried: one MAC packet, or two for interleaved QPSK streams
/// (first half of the stream payload, then second half).
pub type StreamRefs = Vec<Vec<PacketRef>>;

/// Expresses stream-level equations over the slot's individual MAC packets.
///
/// Returns the slot's packet variables and one row per (equation, half).
pub fn packet_equations(refs: &StreamRefs, equations: &[DecodedEquation]) -> (Vec<PacketRef>, Vec<(u8, BitPacket)>) {
    let mut vars = Vec::new();
    let mut var_of = Vec::with_capacity(refs.len());
    for pieces in refs {
        var_of.push((vars.len()..vars.len() + pieces.len()).collect::<Vec<_>>());
        vars.extend(pieces.iter().copied());
    }
    let mut rows = Vec::new();
    for eq in equations {
        let first = eq.label.streams().next().expect("nonzero label");
        let parts = refs[first].len();
        for (j, part) in eq.packet.split(parts).into_iter().enumerate() {
            let mask = eq.label.streams().fold(0u8, |m, s| m | 1 << var_of[s][j]);
            rows.push((mask, part));
        }
    }
    (vars, rows)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SlotResidual {
    slot: u64,
    vars: Vec<PacketRef>,
    rows: Vec<(u8, BitPacket)>,
}

/// Cross-slot store of native packets, unresolved equations and recovered messages.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MacLedger {
    retain_residual: bool,
    natives: BTreeMap<(usize, u64), BTreeMap<usize, BitPacket>>,
    recovered: BTreeMap<(usize, u64), Message>,
    residual: Vec<SlotResidual>,
}

impl MacLedger {
    /// A ledger that keeps lone equations for MAC-layer bridging.
    pub fn new() -> Self {
        Self { retain_residual: true, ..Self::default() }
    }

    /// A ledger that drops unresolved equations, so only in-slot bridging counts.
    pub fn without_residual() -> Self {
        Self::default()
    }

    pub fn natives(&self, user: usize, message: u64) -> Option<&BTreeMap<usize, BitPacket>> {
        self.natives.get(&(user, message))
    }

    pub fn native_count(&self) -> usize {
        self.natives.values().map(BTreeMap::len).sum()
    }

    pub fn recovered(&self, user: usize, message: u64) -> Option<&Message> {
        self.recovered.get(&(user, message))
    }

    pub fn recovered_messages(&self) -> impl Iterator<Item = (&(usize, u64), &Message)> {
        self.recovered.iter()
    }

    pub fn recovered_count(&self, user: usize) -> usize {
        self.recovered.keys().filter(|(u, _)| *u == user).count()
    }

    /// Number of stored unresolved equations.
    pub fn residual_len(&self) -> usize {
        self.residual.iter().map(|r| r.rows.len()).sum()
    }

    fn known(&self, r: &PacketRef, specs: &[MacCodeSpec]) -> Option<BitPacket> {
        if let Some(p) = self.natives.get(&(r.user, r.message)).and_then(|m| m.get(&r.index)) {
            return Some(p.clone());
        }
        self.recovered
            .get(&(r.user, r.message))
            .map(|msg| mac_reencode(msg, r.index, &specs[r.user]).expect("recovered message matches its spec"))
    }

    fn insert_native(&mut self, r: PacketRef, packet: BitPacket) -> bool {
        if self.recovered.contains_key(&(r.user, r.message)) {
            return false;
        }
        let slot = self.natives.entry((r.user, r.message)).or_default();
        if slot.contains_key(&r.index) {
            return false;
        }
        slot.insert(r.index, packet);
        true
    }

    /// Substitutes known packets into a slot's rows and re-reduces them. Returns the newly
    /// resolved natives and keeps the rest.
    fn reduce_slot(&self, res: &SlotResidual, specs: &[MacCodeSpec]) -> Result<(Vec<(PacketRef, BitPacket)>, Vec<(u8, BitPacket)>)> {
        let support = res.rows.iter().fold(0u8, |m, (r, _)| m | r);
        let mut rows = res.rows.clone();
        for (v, r) in res.vars.iter().enumerate() {
            if support >> v & 1 == 1 {
                if let Some(p) = self.known(r, specs) {
                    rows.push((1 << v, p));
                }
            }
        }
        let basis = eliminate(rows)?;
        let mut found = Vec::new();
        let mut rest = Vec::new();
        for (mask, packet) in basis {
            if mask.is_power_of_two() {
                found.push((res.vars[mask.trailing_zeros() as usize], packet));
            } else {
                rest.push((mask, packet));
            }
        }
        Ok((found, rest))
    }

    /// Records one slot's packet-level equations (see [`packet_equations`]).
    pub fn add_slot(&mut self, slot: u64, vars: Vec<PacketRef>, rows: Vec<(u8, BitPacket)>, specs: &[MacCodeSpec]) -> Result<()> {
        let res = SlotResidual { slot, vars, rows };
        let (found, rest) = self.reduce_slot(&res, specs)?;
        for (r, p) in found {
            self.insert_native(r, p);
        }
        if self.retain_residual && !rest.is_empty() {
            self.residual.push(SlotResidual { rows: rest, ..res });
        }
        Ok(())
    }

    fn try_recover(&mut self, key: (usize, u64), specs: &[MacCodeSpec]) -> Result<bool> {
        let spec = &specs[key.0];
        let Some(have) = self.natives.get(&key) else { return Ok(false) };
        if self.recovered.contains_key(&key) || have.len() < spec.data_packets {
            return Ok(false);
        }
        let packets: Vec<(usize, BitPacket)> = have.iter().map(|(&i, p)| (i, p.clone())).collect();
        match mac_decode(key.0, &packets, spec)? {
            MacDecodeOutcome::Recovered(msg) => {
                self.recovered.insert(key, msg);
                self.natives.remove(&key);
                Ok(true)
            }
            MacDecodeOutcome::Insufficient { .. } => Ok(false),
        }
    }

    fn substitute(&mut self, specs: &[MacCodeSpec]) -> Result<bool> {
        let mut changed = false;
        let residual = std::mem::take(&mut self.residual);
        let mut kept = Vec::with_capacity(residual.len());
        for res in residual {
            let (found, rest) = self.reduce_slot(&res, specs)?;
            for (r, p) in found {
                changed |= self.insert_native(r, p);
            }
            if !rest.is_empty() {
                kept.push(SlotResidual { rows: rest, ..res });
            }
        }
        self.residual = kept;
        Ok(changed)
    }

    fn bridge_with_order(&mut self, specs: &[MacCodeSpec], order: &[usize]) -> Result<()> {
        loop {
            let mut changed = false;
            for &user in order {
                let keys: Vec<(usize, u64)> = self.natives.keys().filter(|k| k.0 == user).copied().collect();
                for key in keys {
                    changed |= self.try_recover(key, specs)?;
                }
            }
            changed |= self.substitute(specs)?;
            if !changed {
                return Ok(());
            }
        }
    }
}

/// Runs MAC-layer bridging to its fixed point: recover every message with enough natives,
/// substitute re-encoded packets into stored equations, repeat until nothing changes.
///
/// `specs[u]` is user `u`'s erasure code.
pub fn mac_bridge(ledger: &mut MacLedger, specs: &[MacCodeSpec]) -> Result<()> {
    let order: Vec<usize> = (0..specs.len()).collect();
    ledger.bridge_with_order(specs, &order)
}

/// [`mac_bridge`] with an explicit user processing order.
pub fn mac_bridge_ordered(ledger: &mut MacLedger, specs: &[MacCodeSpec], order: &[usize]) -> Result<()> {
    ledger.bridge_with_order(specs, order)
}

/// Decodes one slot and folds its equations into `ledger`.
pub fn run_slot_pipeline(
    obs: &SlotObservation,
    profile: Profile,
    code: &ConvCodeSpec,
    slot: u64,
    refs: &StreamRefs,
    ledger: &mut MacLedger,
    specs: &[MacCodeSpec],
) -> Result<SlotLedger> {
    let equations = run_decoder_bank(obs, profile, code, slot);
    let record = SlotLedger::new(slot, equations)?;
    let (vars, rows) = packet_equations(refs, &record.equations);
    ledger.add_slot(slot, vars, rows, specs)?;
    mac_bridge(ledger, specs)?;
    Ok(record)
}
