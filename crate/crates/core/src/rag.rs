//! Random access and grouping.
//!
//! Users announce themselves with cyclic shifts of one Zadoff-Chu root sequence. The base
//! station correlates the superposition against the root, answers every detected shift,
//! and admits the users whose shift was not shared with anyone else. Admitted users are then
//! grouped by measured SNR.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::db_to_linear;
use crate::error::{Error, Result};

pub const DEFAULT_ZC_LEN: usize = 257;
pub const DEFAULT_ROOT: usize = 1;
pub const DEFAULT_CYCLIC_SHIFT: usize = 20;
/// Peak-to-median energy ratio a correlation peak must exceed.
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 16.0;
pub const DEFAULT_STRONG_THRESHOLD_DB: f64 = 15.0;

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZcSequence {
    pub root: usize,
    pub len: usize,
    pub shift: usize,
    pub samples: Vec<Complex64>,
}

/// `x_u(m) = exp(-j pi u m (m+1) / N)`, rotated right by `shift` samples.
pub fn zc_generate(root: usize, len: usize, shift: usize) -> Result<ZcSequence> {
    if !is_prime(len) {
        return Err(Error::ZadoffChu(format!("length {len} is not prime")));
    }
    if root == 0 || root >= len {
        return Err(Error::ZadoffChu(format!("root {root} outside 1..{len}")));
    }
    if shift >= len {
        return Err(Error::ZadoffChu(format!("shift {shift} outside 0..{len}")));
    }
    let base: Vec<Complex64> = (0..len)
        .map(|m| {
            // Reduce the exponent modulo 2N in integers to keep the phase accurate.
            let e = (root * m % (2 * len)) * ((m + 1) % (2 * len)) % (2 * len);
            Complex64::from_polar(1.0, -PI * e as f64 / len as f64)
        })
        .collect();
    let samples = (0..len).map(|m| base[(m + len - shift) % len]).collect();
    Ok(ZcSequence { root, len, shift, samples })
}

/// Circular cross-correlation `c[l] = sum_m a[m] conj(b[(m - l) mod N])`.
pub fn circular_correlation(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    (0..n)
        .map(|l| (0..n).map(|m| a[m] * b[(m + n - l) % n].conj()).sum())
        .collect()
}

/// Shifts (multiples of `n_cs`) whose correlation energy exceeds `threshold` times the
/// median energy over all lags.
pub fn detect_preambles(received: &[Complex64], root: usize, n_cs: usize, threshold: f64) -> Result<BTreeSet<usize>> {
    let n = received.len();
    if n_cs == 0 || n_cs > n {
        return Err(Error::ZadoffChu(format!("cyclic shift {n_cs} outside 1..={n}")));
    }
    let reference = zc_generate(root, n, 0)?;
    let energy: Vec<f64> = circular_correlation(received, &reference.samples).iter().map(|c| c.norm_sqr()).collect();
    let mut sorted = energy.clone();
    sorted.sort_by(f64::total_cmp);
    // Ideal autocorrelation makes the median exactly zero without noise, so floor it.
    let floor = sorted[n / 2].max(1e-8 * (n * n) as f64);
    Ok((0..n / n_cs).map(|i| i * n_cs).filter(|&l| energy[l] > threshold * floor).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectionMode {
    /// Every transmitted shift is detected.
    Ideal,
    /// Preambles pass through a noisy correlator.
    Correlator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupPolicy {
    /// Pair strong users with weak ones before forming weak-only groups.
    StrongWeakFirst,
    /// Form weak triples first, then pair leftovers with strong users.
    WeakTriplesFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RagParams {
    pub zc_len: usize,
    pub root: usize,
    pub cyclic_shift: usize,
    pub threshold: f64,
    pub detection: DetectionMode,
    /// Standard deviation of the SNR estimate reported in the last step, in dB.
    pub snr_error_db: f64,
    pub strong_threshold_db: f64,
    pub policy: GroupPolicy,
}

impl Default for RagParams {
    fn default() -> Self {
        Self {
            zc_len: DEFAULT_ZC_LEN,
            root: DEFAULT_ROOT,
            cyclic_shift: DEFAULT_CYCLIC_SHIFT,
            threshold: DEFAULT_DETECTION_THRESHOLD,
            detection: DetectionMode::Ideal,
            snr_error_db: 0.5,
            strong_threshold_db: DEFAULT_STRONG_THRESHOLD_DB,
            policy: GroupPolicy::StrongWeakFirst,
        }
    }
}

impl RagParams {
    pub fn preambles(&self) -> usize {
        self.zc_len / self.cyclic_shift.max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    Ncma,
    Tdma,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub kind: GroupKind,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupPlan {
    pub groups: Vec<Group>,
    pub snr_db: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RagOutcome {
    pub plan: GroupPlan,
    pub rounds: usize,
    /// Users that had to retry, summed over rounds.
    pub retries: usize,
    /// Round in which each user was admitted.
    pub admitted_round: BTreeMap<usize, usize>,
}

/// Simulates the contention rounds until every user is admitted, then groups them.
pub fn run_rag(active: &[(usize, f64)], params: &RagParams, seed: u64) -> Result<RagOutcome> {
    let preambles = params.preambles();
    if active.is_empty() {
        return Err(Error::InvalidArgument("no active users".into()));
    }
    if preambles == 0 || (preambles == 1 && active.len() > 1) {
        return Err(Error::InvalidArgument(format!("{preambles} preamble(s) cannot separate {} users", active.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snr_noise = Normal::new(0.0, params.snr_error_db.max(0.0)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut pending: Vec<(usize, f64)> = active.to_vec();
    let mut admitted = Vec::new();
    let mut admitted_round = BTreeMap::new();
    let mut retries = 0;
    let mut round = 0;
    while !pending.is_empty() {
        round += 1;
        let picks: Vec<usize> = pending.iter().map(|_| rng.random_range(0..preambles)).collect();
        let mut counts = vec![0usize; preambles];
        for &p in &picks {
            counts[p] += 1;
        }
        let detected: BTreeSet<usize> = match params.detection {
            DetectionMode::Ideal => picks.iter().copied().collect(),
            DetectionMode::Correlator => {
                let mut rx: Vec<Complex64> = (0..params.zc_len)
                    .map(|_| {
                        let (re, im): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                    })
                    .collect();
                for (&(_, snr), &p) in pending.iter().zip(&picks) {
                    let seq = zc_generate(params.root, params.zc_len, p * params.cyclic_shift)?;
                    let g = Complex64::from_polar(db_to_linear(snr).sqrt(), rng.random_range(0.0..2.0 * PI));
                    for (r, s) in rx.iter_mut().zip(&seq.samples) {
                        *r += g * s;
                    }
                }
                detect_preambles(&rx, params.root, params.cyclic_shift, params.threshold)?
                    .into_iter()
                    .map(|s| s / params.cyclic_shift)
                    .collect()
            }
        };
        let mut still = Vec::new();
        for (&(id, snr), &p) in pending.iter().zip(&picks) {
            if counts[p] == 1 && detected.contains(&p) {
                admitted.push((id, snr + snr_noise.sample(&mut rng)));
                admitted_round.insert(id, round);
            } else {
                still.push((id, snr));
            }
        }
        retries += still.len();
        pending = still;
    }
    let plan = group_users(&admitted, params.strong_threshold_db, params.policy);
    Ok(RagOutcome { plan, rounds: round, retries, admitted_round })
}

/// Probability of exactly `s` singleton preambles when `n` users pick uniformly among
/// `m`, for every `s` in `0..=n`.
pub fn singleton_distribution(n: usize, m: usize) -> Vec<f64> {
    let mut binom = vec![vec![0.0f64; n + 1]; n + 1];
    for i in 0..=n {
        binom[i][0] = 1.0;
        for j in 1..=i {
            binom[i][j] = binom[i - 1][j - 1] + if j < i { binom[i - 1][j] } else { 0.0 };
        }
    }
    // ways[u][s]: assignments of u users to the preambles seen so far with s singletons,
    // each weighted by (1/m)^u.
    let mut ways = vec![vec![0.0f64; n + 1]; n + 1];
    ways[0][0] = 1.0;
    let p = 1.0 / m as f64;
    for _ in 0..m {
        let mut next = vec![vec![0.0f64; n + 1]; n + 1];
        for u in 0..=n {
            for s in 0..=u {
                let w = ways[u][s];
                if w == 0.0 {
                    continue;
                }
                for c in 0..=n - u {
                    let s2 = s + usize::from(c == 1);
                    next[u + c][s2] += w * binom[u + c][c] * p.powi(c as i32);
                }
            }
        }
        ways = next;
    }
    ways[n].clone()
}

/// Expected number of rounds until all `k` users are admitted with `m` preambles and
/// ideal detection.
pub fn analytic_mean_rounds(k: usize, m: usize) -> f64 {
    let mut expected = vec![0.0f64; k + 1];
    for n in 1..=k {
        let dist = singleton_distribution(n, m);
        let tail: f64 = (1..=n).map(|s| dist[s] * expected[n - s]).sum();
        expected[n] = (1.0 + tail) / (1.0 - dist[0]);
    }
    expected[k]
}

fn partition_weak(weak: &[(usize, f64)], groups: &mut Vec<Group>) {
    let ids: Vec<usize> = weak.iter().map(|w| w.0).collect();
    let w = ids.len();
    let sizes: Vec<usize> = match w {
        0 => vec![],
        1 => vec![1],
        _ => {
            let mut sizes = vec![3; w / 3];
            match w % 3 {
                1 => {
                    sizes.pop();
                    sizes.extend([2, 2]);
                }
                2 => sizes.push(2),
                _ => {}
            }
            sizes
        }
    };
    let mut it = ids.into_iter();
    for size in sizes {
        let members: Vec<usize> = it.by_ref().take(size).collect();
        let kind = if size == 1 { GroupKind::Tdma } else { GroupKind::Ncma };
        groups.push(Group { kind, members });
    }
}

/// Groups admitted users by measured SNR: strong users are paired with weak ones, excess
/// strong users go TDMA, and weak users are packed into groups of three or two.
pub fn group_users(admitted: &[(usize, f64)], strong_threshold_db: f64, policy: GroupPolicy) -> GroupPlan {
    let desc = |v: &mut Vec<(usize, f64)>| v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (mut strong, mut weak): (Vec<_>, Vec<_>) = admitted.iter().copied().partition(|u| u.1 >= strong_threshold_db);
    desc(&mut strong);
    desc(&mut weak);
    let mut groups = Vec::new();
    let pair_up = |strong: &mut Vec<(usize, f64)>, weak: &mut Vec<(usize, f64)>, groups: &mut Vec<Group>| {
        // Strongest strong with weakest weak.
        while !strong.is_empty() && !weak.is_empty() {
            let s = strong.remove(0);
            let w = weak.pop().expect("nonempty");
            groups.push(Group { kind: GroupKind::Ncma, members: vec![s.0, w.0] });
        }
    };
    match policy {
        GroupPolicy::StrongWeakFirst => {
            pair_up(&mut strong, &mut weak, &mut groups);
            partition_weak(&weak, &mut groups);
        }
        GroupPolicy::WeakTriplesFirst => {
            if strong.is_empty() {
                partition_weak(&weak, &mut groups);
            } else {
                let triples = weak.len() / 3 * 3;
                let mut rest = weak.split_off(triples);
                partition_weak(&weak, &mut groups);
                pair_up(&mut strong, &mut rest, &mut groups);
                partition_weak(&rest, &mut groups);
            }
        }
    }
    for s in strong {
        groups.push(Group { kind: GroupKind::Tdma, members: vec![s.0] });
    }
    GroupPlan { groups, snr_db: admitted.iter().copied().collect() }
}

/// Noiseless sum of unit-amplitude preambles, one per entry of `shifts`.
pub fn superpose(root: usize, len: usize, shifts: &[usize]) -> Result<Vec<Complex64>> {
    let mut rx = vec![Complex64::new(0.0, 0.0); len];
    for &s in shifts {
        for (r, x) in rx.iter_mut().zip(zc_generate(root, len, s)?.samples) {
            *r += x;
        }
    }
    Ok(rx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    fn shuffled<R: Rng + ?Sized>(ids: &[(usize, f64)], rng: &mut R) -> Vec<(usize, f64)> {
        let mut v = ids.to_vec();
        v.shuffle(rng);
        v
    }

    #[test]
    fn first_sample_is_one() {
        let z = zc_generate(1, 257, 0).unwrap();
        assert!((z.samples[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(z.samples.iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn shift_rotates_right() {
        let a = zc_generate(1, 257, 0).unwrap();
        let b = zc_generate(1, 257, 20).unwrap();
        for m in 0..257 {
            assert_eq!(b.samples[(m + 20) % 257], a.samples[m]);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(zc_generate(1, 256, 0).is_err());
        assert!(zc_generate(0, 257, 0).is_err());
        assert!(zc_generate(257, 257, 0).is_err());
        assert!(zc_generate(1, 257, 257).is_err());
    }

    #[test]
    fn single_preamble_detected() {
        let rx = superpose(1, 257, &[100]).unwrap();
        assert_eq!(detect_preambles(&rx, 1, 20, DEFAULT_DETECTION_THRESHOLD).unwrap(), BTreeSet::from([100]));
    }

    #[test]
    fn two_user_singletons() {
        let d = singleton_distribution(2, 12);
        assert!((d[0] - 1.0 / 12.0).abs() < 1e-12);
        assert!((d[2] - 11.0 / 12.0).abs() < 1e-12);
        assert!((analytic_mean_rounds(2, 12) - 12.0 / 11.0).abs() < 1e-12);
        assert!((analytic_mean_rounds(1, 12) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_distribution_sums_to_one() {
        for n in 1..=10 {
            let total: f64 = singleton_distribution(n, 12).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_user_admitted_first_round() {
        let out = run_rag(&[(7, 5.0)], &RagParams::default(), 1).unwrap();
        assert_eq!(out.rounds, 1);
        assert_eq!(out.plan.groups, vec![Group { kind: GroupKind::Tdma, members: vec![7] }]);
    }

    #[test]
    fn rag_rejects_empty_and_unseparable() {
        assert!(run_rag(&[], &RagParams::default(), 0).is_err());
        let params = RagParams { cyclic_shift: 200, ..RagParams::default() };
        assert!(run_rag(&[(0, 1.0), (1, 1.0)], &params, 0).is_err());
    }

    #[test]
    fn strong_users_pair_with_weak() {
        let plan = group_users(&[(0, 20.0), (1, 22.0), (2, 25.0), (3, 8.0)], 15.0, GroupPolicy::StrongWeakFirst);
        assert_eq!(plan.groups[0], Group { kind: GroupKind::Ncma, members: vec![2, 3] });
        assert_eq!(plan.groups.len(), 3);
        assert!(plan.groups[1..].iter().all(|g| g.kind == GroupKind::Tdma));
    }

    #[test]
    fn policy_order_for_one_strong_three_weak() {
        let users = [(0, 20.0), (1, 8.0), (2, 7.0), (3, 9.0)];
        let a = group_users(&users, 15.0, GroupPolicy::StrongWeakFirst);
        assert_eq!(a.groups.len(), 2);
        assert!(a.groups.iter().all(|g| g.kind == GroupKind::Ncma && g.members.len() == 2));
        let b = group_users(&users, 15.0, GroupPolicy::WeakTriplesFirst);
        assert_eq!(b.groups[0], Group { kind: GroupKind::Ncma, members: vec![3, 1, 2] });
        assert_eq!(b.groups[1], Group { kind: GroupKind::Tdma, members: vec![0] });
    }

    #[test]
    fn weak_only_groups() {
        let six: Vec<(usize, f64)> = (0..6).map(|i| (i, 5.0 + i as f64)).collect();
        let plan = group_users(&six, 15.0, GroupPolicy::StrongWeakFirst);
        assert_eq!(plan.groups.iter().map(|g| g.members.len()).collect::<Vec<_>>(), vec![3, 3]);
        let four: Vec<(usize, f64)> = (0..4).map(|i| (i, 5.0)).collect();
        let plan = group_users(&four, 15.0, GroupPolicy::StrongWeakFirst);
        assert_eq!(plan.groups.iter().map(|g| g.members.len()).collect::<Vec<_>>(), vec![2, 2]);
    }

    #[test]
    fn every_user_in_exactly_one_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..15 {
            for policy in [GroupPolicy::StrongWeakFirst, GroupPolicy::WeakTriplesFirst] {
                let users: Vec<(usize, f64)> = (0..n).map(|i| (i, rng.random_range(0.0..30.0))).collect();
                let plan = group_users(&shuffled(&users, &mut rng), 15.0, policy);
                let mut seen: Vec<usize> = plan.groups.iter().flat_map(|g| g.members.clone()).collect();
                seen.sort();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
                for g in &plan.groups {
                    match g.kind {
                        GroupKind::Ncma => assert!((2..=3).contains(&g.members.len())),
                        GroupKind::Tdma => assert_eq!(g.members.len(), 1),
                    }
                }
            }
        }
    }
}
