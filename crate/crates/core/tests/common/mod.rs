//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use tsids::ingest::{aggregate_per_second, FeatureSeries};
use tsids::simulate::{generate, AttackKind, AttackSpec, SimConfig};

pub const TRAIN_S: usize = 370;
pub const TEST_S: usize = 190;

/// One simulated capture: 370 clean training seconds then 190 test seconds with attacks.
pub struct DetectionRun {
    pub series: FeatureSeries,
    /// Real-valued `(start, end)` of each attack in absolute seconds.
    pub attacks: Vec<(f64, f64)>,
}

/// Polling network with keepalive jitter and manual operations; 2 to 4 attacks in
/// distinct test cycles, each ending before the next poll and raising the port-pair
/// count by roughly 6 to 12 per second.
pub fn detection_run(seed: u64) -> DetectionRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a77a_c4e5);
    let k = rng.random_range(2..=4usize);
    let mut cycles: Vec<usize> = sample(&mut rng, 17, k).into_iter().map(|c| c + 2).collect();
    cycles.sort_unstable();
    let mut attacks = Vec::new();
    for c in cycles {
        let end_phase = rng.random_range(3..=9u32) as f64;
        let max_d = (end_phase - 1.0).min(3.0);
        let duration_s = 1.0 + rng.random::<f64>() * (max_d - 1.0);
        let start_s = (TRAIN_S + c * 10) as f64 + end_phase - duration_s;
        let (kind, intensity) = if rng.random::<bool>() {
            (AttackKind::ScanBurst, rng.random_range(6..=12u32) as f64)
        } else {
            (AttackKind::FakeCommand, rng.random_range(12..=24u32) as f64)
        };
        attacks.push(AttackSpec {
            start_s,
            duration_s,
            kind,
            intensity,
        });
    }
    let config = SimConfig {
        n_rtus: 6,
        n_mtus: 2,
        poll_interval_s: 10,
        duration_s: (TRAIN_S + TEST_S) as u32,
        manual_op_rate: 1.0,
        keepalive_links: 2,
        keepalive_prob: 0.5,
        attacks: attacks.clone(),
        rng_seed: seed,
    };
    let events = generate(&config).expect("valid simulation config");
    let series = pad_to(aggregate_per_second(&events), TRAIN_S + TEST_S);
    DetectionRun {
        series,
        attacks: attacks
            .iter()
            .map(|a| (a.start_s, a.start_s + a.duration_s))
            .collect(),
    }
}

/// Extends a feature series with silent seconds up to the capture length.
pub fn pad_to(mut series: FeatureSeries, n: usize) -> FeatureSeries {
    assert!(series.n_seconds() <= n);
    for v in [
        &mut series.packets,
        &mut series.ip_pairs,
        &mut series.port_pairs,
        &mut series.bytes,
        &mut series.protocols,
    ] {
        v.resize(n, 0.0);
    }
    for v in series.onehot.values_mut() {
        v.resize(n, 0.0);
    }
    series.label.resize(n, false);
    series
}

fn mean_std(w: &[f64]) -> (f64, f64) {
    let m = w.iter().sum::<f64>() / w.len() as f64;
    let var = w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / w.len() as f64;
    (m, var.sqrt())
}

/// Euclidean distance between the z-normalized windows, computed directly.
pub fn direct_distance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, sx) = mean_std(x);
    let (my, sy) = mean_std(y);
    let m = x.len() as f64;
    match (sx < 1e-12, sy < 1e-12) {
        (true, true) => 0.0,
        (true, false) | (false, true) => (2.0 * m).sqrt(),
        _ => x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let d = (a - mx) / sx - (b - my) / sy;
                d * d
            })
            .sum::<f64>()
            .sqrt(),
    }
}

/// Pearson correlation by two-pass sums.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, sx) = mean_std(x);
    let (my, sy) = mean_std(y);
    let cov = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / x.len() as f64;
    cov / (sx * sy)
}

/// Brute-force left matrix profile, end-indexed, over `prefix ++ series`.
///
/// Entry `t` of the result belongs to `series[t]`; it is `None` before `reported_from`
/// (an index into the concatenation) or when no admissible predecessor exists.
pub fn naive_left_profile(
    prefix: &[f64],
    series: &[f64],
    m: usize,
    exclusion: usize,
    reported_from: usize,
) -> Vec<Option<f64>> {
    let full: Vec<f64> = prefix.iter().chain(series).copied().collect();
    (0..series.len())
        .map(|t| {
            let end = prefix.len() + t;
            if end + 1 < m || end < reported_from {
                return None;
            }
            let i = end + 1 - m;
            if i < exclusion {
                return None;
            }
            (0..=i - exclusion)
                .map(|j| direct_distance(&full[i..i + m], &full[j..j + m]))
                .reduce(f64::min)
        })
        .collect()
}

/// Simulates `(1 - Σα_j B^j)(1 - Σφ_k B^{sk}) Y_t = ε_t` from zero initial values,
/// discarding a burn-in of `burn` points.
pub fn simulate_seasonal_ar(
    alpha: &[f64],
    phi: &[f64],
    s: usize,
    sigma2: f64,
    n: usize,
    burn: usize,
    seed: u64,
) -> Vec<f64> {
    // expand the product polynomial into plain AR coefficients on lags 1..=p+Ps
    let p = alpha.len();
    let order = p + phi.len() * s;
    let mut a = vec![0.0; order + 1];
    let mut seasonal = vec![0.0; order + 1];
    seasonal[0] = 1.0;
    for (k, f) in phi.iter().enumerate() {
        seasonal[(k + 1) * s] = -f;
    }
    let mut nonseasonal = vec![0.0; p + 1];
    nonseasonal[0] = 1.0;
    for (j, al) in alpha.iter().enumerate() {
        nonseasonal[j + 1] = -al;
    }
    for (i, x) in nonseasonal.iter().enumerate() {
        for (k, y) in seasonal.iter().enumerate() {
            if i + k <= order {
                a[i + k] += x * y;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma2.sqrt()).unwrap();
    let mut y = vec![0.0; n + burn];
    for t in 0..n + burn {
        let mut v = noise.sample(&mut rng);
        for lag in 1..=order.min(t) {
            v -= a[lag] * y[t - lag];
        }
        y[t] = v;
    }
    y.split_off(burn)
}
