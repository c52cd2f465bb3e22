use ncma_core::bridge::{eliminate, mac_bridge_ordered, packet_equations, phy_bridge, MacLedger, PacketRef, StreamRefs};
use ncma_core::channel::{draw_channel, transmit_slot, ChannelModel};
use ncma_core::macode::{mac_encode, MacCodeSpec, Message};
use ncma_core::{run_slot_pipeline, BitPacket, ConvCodeSpec, DecodedEquation, EquationLabel, Profile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn combo(streams: &[BitPacket], mask: u8) -> BitPacket {
    let mut acc = BitPacket::zeros(streams[0].len());
    for (i, s) in streams.iter().enumerate() {
        if mask >> i & 1 == 1 {
            acc.xor_assign(s);
        }
    }
    acc
}

fn all_orders(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in all_orders(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Random cross-slot equations among three users' coded packets. Returns the ledger and the
/// true messages.
fn random_ledger(seed: u64, slots: u64) -> (MacLedger, Vec<Message>, Vec<MacCodeSpec>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = vec![
        MacCodeSpec::new(2, 8).unwrap(),
        MacCodeSpec::new(3, 8).unwrap(),
        MacCodeSpec::new(4, 8).unwrap(),
    ];
    let msgs: Vec<Message> = specs
        .iter()
        .enumerate()
        .map(|(u, s)| Message::new(u, BitPacket::random(s.message_bits(), &mut rng), s).unwrap())
        .collect();
    let coded: Vec<Vec<BitPacket>> =
        msgs.iter().zip(&specs).map(|(m, s)| mac_encode(m, s).unwrap().into_iter().map(|(_, p)| p).collect()).collect();
    let mut ledger = MacLedger::new();
    for slot in 0..slots {
        let vars: Vec<PacketRef> = (0..3)
            .map(|u| PacketRef { user: u, message: 0, index: rng.random_range(0..specs[u].total_packets) })
            .collect();
        let values: Vec<BitPacket> = vars.iter().map(|r| coded[r.user][r.index].clone()).collect();
        let rows: Vec<(u8, BitPacket)> = (0..rng.random_range(0..3))
            .map(|_| {
                let mask = rng.random_range(1..8u8);
                (mask, combo(&values, mask))
            })
            .collect();
        ledger.add_slot(slot, vars, rows, &specs).unwrap();
    }
    (ledger, msgs, specs)
}

#[test]
fn mac_bridging_result_is_order_independent() {
    for seed in 0..40 {
        let (ledger, msgs, specs) = random_ledger(seed, 8);
        let mut results = Vec::new();
        for order in all_orders(3) {
            let mut l = ledger.clone();
            mac_bridge_ordered(&mut l, &specs, &order).unwrap();
            let recovered: Vec<_> = l.recovered_messages().map(|(k, m)| (*k, m.clone())).collect();
            for ((u, _), m) in &recovered {
                assert_eq!(m, &msgs[*u]);
            }
            results.push(recovered);
        }
        assert!(results.windows(2).all(|w| w[0] == w[1]), "seed {seed}");
    }
}

#[test]
fn packet_equations_split_interleaved_streams() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = |user, index| PacketRef { user, message: 0, index };
    let refs: StreamRefs = vec![vec![r(0, 0), r(0, 1)], vec![r(1, 0), r(1, 1)], vec![r(2, 0), r(2, 1)]];
    let halves: Vec<BitPacket> = (0..6).map(|_| BitPacket::random(8, &mut rng)).collect();
    let streams: Vec<BitPacket> = halves.chunks(2).map(BitPacket::concat).collect();
    let eq = DecodedEquation { slot: 0, label: EquationLabel(0b101), packet: combo(&streams, 0b101) };
    let (vars, rows) = packet_equations(&refs, &[eq]);
    assert_eq!(vars.len(), 6);
    assert_eq!(rows, vec![(0b010001, &halves[0] ^ &halves[4]), (0b100010, &halves[1] ^ &halves[5])]);
}

proptest! {
    #[test]
    fn elimination_preserves_span_and_is_canonical(
        labels in prop::collection::vec(1u8..16, 0..10),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let streams: Vec<BitPacket> = (0..4).map(|_| BitPacket::random(12, &mut rng)).collect();
        let rows: Vec<(u8, BitPacket)> = labels.iter().map(|&l| (l, combo(&streams, l))).collect();
        let reduced = eliminate(rows.clone()).unwrap();
        let mut shuffled = rows.clone();
        shuffled.reverse();
        prop_assert_eq!(&eliminate(shuffled).unwrap(), &reduced);
        for (mask, p) in &reduced {
            prop_assert!(*mask != 0);
            prop_assert_eq!(p, &combo(&streams, *mask));
        }
        // Same rank as the input rows: every input label is a combination of the output.
        prop_assert!(reduced.len() <= 4);
        for &l in &labels {
            let mut rest = l;
            for (mask, _) in &reduced {
                if rest & (mask & mask.wrapping_neg()) != 0 {
                    rest ^= mask;
                }
            }
            prop_assert_eq!(rest, 0);
        }
    }

    #[test]
    fn phy_bridge_natives_are_correct(labels in prop::collection::vec(1u8..16, 0..8), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let streams: Vec<BitPacket> = (0..4).map(|_| BitPacket::random(12, &mut rng)).collect();
        let eqs: Vec<DecodedEquation> = labels
            .iter()
            .map(|&l| DecodedEquation { slot: 1, label: EquationLabel(l), packet: combo(&streams, l) })
            .collect();
        let out = phy_bridge(&eqs).unwrap();
        for (i, p) in &out.natives {
            prop_assert_eq!(p, &streams[*i]);
        }
    }
}

#[test]
fn inconsistent_equations_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = BitPacket::random(8, &mut rng);
    let b = BitPacket::random(8, &mut rng);
    let mut wrong = &a ^ &b;
    wrong.xor_assign(&BitPacket::from_bits(vec![1, 0, 0, 0, 0, 0, 0, 0]).unwrap());
    let eq = |l, p| DecodedEquation { slot: 0, label: EquationLabel(l), packet: p };
    assert!(phy_bridge(&[eq(0b01, a), eq(0b10, b), eq(0b11, wrong)]).is_err());
}

fn pipeline_run(seed: u64) -> (Vec<ncma_core::SlotLedger>, MacLedger) {
    let profile = Profile::SplitRateDiverse;
    let code = ConvCodeSpec::STANDARD;
    let specs = vec![MacCodeSpec::new(4, 32).unwrap(); 3];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let msgs: Vec<Vec<BitPacket>> = specs
        .iter()
        .enumerate()
        .map(|(u, s)| {
            let m = Message::new(u, BitPacket::random(s.message_bits(), &mut rng), s).unwrap();
            mac_encode(&m, s).unwrap().into_iter().map(|(_, p)| p).collect()
        })
        .collect();
    let mut ledger = MacLedger::new();
    let mut records = Vec::new();
    let mut next = [0usize; 3];
    for slot in 0..6u64 {
        let mut refs: StreamRefs = Vec::new();
        let mut payloads = Vec::new();
        for s in profile.streams() {
            let mut parts = Vec::new();
            let mut r = Vec::new();
            for _ in 0..s.mac_packets() {
                let index = next[s.user] % specs[s.user].total_packets;
                next[s.user] += 1;
                r.push(PacketRef { user: s.user, message: 0, index });
                parts.push(msgs[s.user][index].clone());
            }
            refs.push(r);
            payloads.push(BitPacket::concat(&parts));
        }
        let blocks = profile.modulate(&payloads, &code).unwrap();
        let len = blocks.iter().map(|b| b.len()).max().unwrap();
        let users = [(0, 6.0), (1, 6.0), (2, 10.0)];
        let realization = draw_channel(&users, ChannelModel::default(), len, seed ^ slot << 1).unwrap();
        let obs = transmit_slot(&blocks, &realization, seed ^ (slot << 1 | 1)).unwrap();
        records.push(run_slot_pipeline(&obs, profile, &code, slot, &refs, &mut ledger, &specs).unwrap());
    }
    (records, ledger)
}

#[test]
fn slot_pipeline_is_deterministic_and_consistent() {
    for seed in [1, 2, 3] {
        let (records, ledger) = pipeline_run(seed);
        assert!(records.iter().all(|r| r.is_consistent()));
        let (again, ledger2) = pipeline_run(seed);
        assert_eq!(records, again);
        assert_eq!(ledger, ledger2);
    }
}
