//! Quick oracle checks that can run on any installation.

use std::collections::BTreeSet;

use anyhow::{bail, Result};
use ncma_core::analysis::rate_gain;
use ncma_core::bridge::phy_bridge;
use ncma_core::rag::{analytic_mean_rounds, circular_correlation, detect_preambles, run_rag, superpose, zc_generate, RagParams};
use ncma_core::{conv_encode, BitPacket, ConvCodeSpec, DecodedEquation, EquationLabel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rate_gain_values() -> Result<bool> {
    Ok((rate_gain(1e4)? - 0.075).abs() <= 0.005 && (rate_gain(10f64.powf(0.85))? - 0.30).abs() <= 0.01)
}

fn code_linearity() -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let code = ConvCodeSpec::STANDARD;
    Ok((0..1000).all(|_| {
        let p = BitPacket::random(96, &mut rng);
        let q = BitPacket::random(96, &mut rng);
        &conv_encode(&p, &code) ^ &conv_encode(&q, &code) == conv_encode(&(&p ^ &q), &code)
    }))
}

/// Compares elimination against brute-force span closure on every subset of the 15
/// nonzero labels over 4 streams.
fn bridge_span() -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let streams: Vec<BitPacket> = (0..4).map(|_| BitPacket::random(8, &mut rng)).collect();
    let combo = |mask: u8| {
        let mut acc = BitPacket::zeros(8);
        for (i, s) in streams.iter().enumerate() {
            if mask >> i & 1 == 1 {
                acc.xor_assign(s);
            }
        }
        acc
    };
    for subset in 0u32..1 << 15 {
        let labels: Vec<u8> = (1..16u8).filter(|l| subset >> (l - 1) & 1 == 1).collect();
        let mut span: u32 = 1;
        for &l in &labels {
            for v in 0..16 {
                if span >> v & 1 == 1 {
                    span |= 1 << (v ^ l as usize);
                }
            }
        }
        let expected: BTreeSet<usize> = (0..4).filter(|i| span >> (1 << i) & 1 == 1).collect();
        let eqs: Vec<DecodedEquation> =
            labels.iter().map(|&l| DecodedEquation { slot: 0, label: EquationLabel(l), packet: combo(l) }).collect();
        let out = phy_bridge(&eqs)?;
        if out.natives.keys().copied().collect::<BTreeSet<_>>() != expected
            || out.natives.iter().any(|(&i, p)| *p != streams[i])
        {
            return Ok(false);
        }
    }
    Ok(true)
}

fn zc_properties() -> Result<bool> {
    let root = zc_generate(1, 257, 0)?;
    let corr = circular_correlation(&root.samples, &root.samples);
    let ideal = (corr[0].norm() - 257.0).abs() < 1e-9 && corr[1..].iter().all(|c| c.norm() <= 1e-9 * 257.0);
    let shifts = [100, 100, 140, 140, 140, 200, 200, 0, 20, 60];
    let rx = superpose(1, 257, &shifts)?;
    let detected = detect_preambles(&rx, 1, 20, RagParams::default().threshold)?;
    Ok(ideal && detected == shifts.iter().copied().collect())
}

fn rag_rounds() -> Result<bool> {
    let params = RagParams::default();
    let trials = 20_000;
    let users: Vec<(usize, f64)> = (0..5).map(|i| (i, 10.0)).collect();
    let mut total = 0;
    for t in 0..trials {
        total += run_rag(&users, &params, t)?.rounds;
    }
    let mean = total as f64 / trials as f64;
    let analytic = analytic_mean_rounds(5, params.preambles());
    Ok((mean - analytic).abs() / analytic < 0.05)
}

pub fn run() -> Result<()> {
    let checks: [(&str, fn() -> Result<bool>); 5] = [
        ("rate gain closed form", rate_gain_values),
        ("convolutional code linearity", code_linearity),
        ("GF(2) bridging vs span enumeration", bridge_span),
        ("Zadoff-Chu correlation and detection", zc_properties),
        ("random-access rounds vs Markov model", rag_rounds),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let ok = check()?;
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed > 0 {
        bail!("{failed} self-test check(s) failed");
    }
    Ok(())
}
