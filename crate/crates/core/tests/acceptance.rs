//! Acceptance suite: one numbered criterion per check, each with a runtime budget.
//!
//! Runs without the libtest harness so that every criterion prints exactly one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::{
    detection_run, direct_distance, naive_left_profile, pearson, simulate_seasonal_ar, TRAIN_S,
};
use tsids::eval::{confusion, metrics, ConfusionCounts};
use tsids::ingest::{aggregate_per_second, attack_intervals};
use tsids::lstm::{self, LstmNetwork, Norm, ReplacementRule, TrainConfig};
use tsids::matrix_profile::{
    left_matrix_profile, perfect_threshold, znorm_distance, ProfileConfig,
};
use tsids::sarima::{
    default_lags, detect, fit_least_squares, gaussian_quantile, ljung_box, seasonal_center,
    GdConfig, SarimaOrders,
};
use tsids::simulate::{generate, AttackKind, AttackSpec, SimConfig};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Reference residual variance of the port-pair model and its published quantiles.
const REF_SIGMA2: f64 = 1.0239e-1;
const REF_QUANTILE: f64 = 1.05293;
const REF_TRIPLED: f64 = 3.15879;

fn c1_quantiles() -> Check {
    let q = gaussian_quantile(0.9995, REF_SIGMA2).map_err(|e| e.to_string())?;
    ensure((q - REF_QUANTILE).abs() <= 1e-3, || {
        format!("quantile {q} vs {REF_QUANTILE}")
    })?;
    let tripled = 3.0 * q;
    ensure((tripled - REF_TRIPLED).abs() <= 3e-3, || {
        format!("tripled {tripled} vs {REF_TRIPLED}")
    })?;
    Ok(format!("q = {q:.5}, 3q = {tripled:.5}"))
}

fn c2_distance_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let m = [4, 10, 20][k % 3];
        let (sx, ox) = (rng.random_range(0.1..50.0), rng.random_range(-100.0..100.0));
        let (sy, oy) = (rng.random_range(0.1..50.0), rng.random_range(-100.0..100.0));
        let x: Vec<f64> = (0..m).map(|_| ox + sx * normal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..m).map(|_| oy + sy * normal.sample(&mut rng)).collect();
        let working = znorm_distance(&x, &y).map_err(|e| e.to_string())?;
        let direct = direct_distance(&x, &y);
        let via_corr = (2.0 * m as f64 * (1.0 - pearson(&x, &y))).max(0.0).sqrt();
        let spread = [working, direct, via_corr];
        let hi = spread.iter().copied().fold(f64::MIN, f64::max);
        let lo = spread.iter().copied().fold(f64::MAX, f64::min);
        worst = worst.max(hi - lo);
        ensure(hi - lo < 1e-9, || format!("pair {k} (m={m}): {spread:?}"))?;
    }
    Ok(format!("1000 pairs, max disagreement {worst:.2e}"))
}

fn random_series_with_constants(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut x: Vec<f64> = (0..n)
        .map(|_| rng.random_range(0..6) as f64 + 0.3 * normal.sample(rng))
        .collect();
    for _ in 0..rng.random_range(1..=3) {
        let len = rng.random_range(m..=2 * m + 3).min(n);
        let at = rng.random_range(0..=n - len);
        let value = [0.0, 1.0, 2.5][rng.random_range(0..3)];
        x[at..at + len].iter_mut().for_each(|v| *v = value);
    }
    x
}

fn c3_oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for case in 0..100 {
        let m = rng.random_range(3..=20usize);
        let n = rng.random_range(3 * m + 10..=500usize);
        let x = random_series_with_constants(&mut rng, n, m);
        let mut cfg = ProfileConfig::new(m);
        cfg.exclusion = rng.random_range(1..=m);
        let (prefix, series, reported_from) = if case % 2 == 0 {
            let cut = rng.random_range(m + cfg.exclusion..n - m);
            (x[..cut].to_vec(), x[cut..].to_vec(), cut)
        } else {
            (Vec::new(), x.clone(), cfg.warmup)
        };
        if !prefix.is_empty() {
            cfg.prefix = Some(prefix.clone());
        }
        let fast = left_matrix_profile(&series, &cfg).map_err(|e| e.to_string())?;
        let slow = naive_left_profile(&prefix, &series, m, cfg.exclusion, reported_from);
        ensure(fast.profile.len() == slow.len(), || {
            format!("case {case}: length differs")
        })?;
        for (t, (a, b)) in fast.profile.iter().zip(&slow).enumerate() {
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    worst = worst.max((a - b).abs());
                    compared += 1;
                    ensure((a - b).abs() <= 1e-6, || {
                        format!("case {case} (m={m}) t={t}: {a} vs {b}")
                    })?;
                }
                _ => return Err(format!("case {case} t={t}: {a:?} vs {b:?}")),
            }
        }
    }
    Ok(format!(
        "100 series, {compared} values, max deviation {worst:.2e}"
    ))
}

/// Generating coefficients of the reference port-pair model.
const REF_ALPHA: [f64; 4] = [-1.0997e-2, -9.9894e-4, 6.8105e-4, 1.3458e-1];
const REF_PHI: f64 = -1.1170e-1;

fn c4_coefficient_recovery() -> Check {
    let y = simulate_seasonal_ar(&REF_ALPHA, &[REF_PHI], 10, REF_SIGMA2, 5000, 500, 4);
    let (centered, _) = seasonal_center(&y, 10).map_err(|e| e.to_string())?;
    let model = fit_least_squares(
        &centered,
        SarimaOrders::seasonal_ar(4, 1, 10),
        &GdConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    for (j, (got, want)) in model.alpha.iter().zip(REF_ALPHA).enumerate() {
        ensure((got - want).abs() <= 0.05, || {
            format!("alpha_{} = {got} vs {want}", j + 1)
        })?;
    }
    ensure((model.phi[0] - REF_PHI).abs() <= 0.05, || {
        format!("phi_1 = {} vs {REF_PHI}", model.phi[0])
    })?;
    let rel = (model.sigma2 - REF_SIGMA2).abs() / REF_SIGMA2;
    ensure(rel <= 0.2, || {
        format!("sigma2 = {} ({:.1}% off)", model.sigma2, 100.0 * rel)
    })?;
    Ok(format!(
        "alpha = {:.4?}, phi = {:.4}, sigma2 = {:.4e} after {} iterations (stop: {:?})",
        model.alpha, model.phi[0], model.sigma2, model.fit.iters, model.fit.stop
    ))
}

fn c5_ljung_box_calibration() -> Check {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rejected = 0;
    for k in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + k);
        let x: Vec<f64> = (0..370).map(|_| normal.sample(&mut rng)).collect();
        let lb = ljung_box(&x, default_lags(x.len()), 0).map_err(|e| e.to_string())?;
        rejected += usize::from(lb.reject);
    }
    let rate = rejected as f64 / 200.0;
    ensure((0.02..=0.09).contains(&rate), || {
        format!("rejection rate {rate}")
    })?;
    Ok(format!("rejection rate {rate:.3} ({rejected}/200)"))
}

fn c6_sarima_end_to_end() -> Check {
    let orders = SarimaOrders::seasonal_ar(4, 1, 10);
    let mut total_fp = 0;
    let mut total_attacks = 0;
    for seed in 0..20u64 {
        let run = detection_run(seed);
        let x = &run.series.port_pairs;
        let (centered, means) = seasonal_center(&x[..TRAIN_S], 10).map_err(|e| e.to_string())?;
        let mut model = fit_least_squares(&centered, orders, &GdConfig::default())
            .map_err(|e| e.to_string())?;
        // TRAIN_S is a multiple of the season, so the training phases carry over unchanged
        model.seasonal_means = means;
        let det = detect(&x[TRAIN_S..], &model, 1.0, 0.9995).map_err(|e| e.to_string())?;
        let flagged: Vec<usize> = det.flagged().iter().map(|t| t + TRAIN_S).collect();
        for &(start, _) in &run.attacks {
            let s = start.floor() as usize;
            ensure(flagged.iter().any(|&t| t == s || t == s + 1), || {
                format!("seed {seed}: attack at {start:.2} missed; flags {flagged:?}")
            })?;
        }
        let fp = flagged.iter().filter(|&&t| !run.series.label[t]).count();
        ensure(fp <= 1, || {
            format!("seed {seed}: {fp} false positives; flags {flagged:?}")
        })?;
        total_fp += fp;
        total_attacks += run.attacks.len();
    }
    Ok(format!(
        "{total_attacks} attacks detected within 1 s, {total_fp} false positives over 20 runs"
    ))
}

fn c7_matrix_profile_end_to_end() -> Check {
    let mut worst_fp = 0;
    for seed in 0..20u64 {
        let run = detection_run(seed);
        let x = &run.series.port_pairs;
        let mut cfg = ProfileConfig::new(10).with_prefix(x[..TRAIN_S].to_vec());
        cfg.exclusion = 5;
        let profile = left_matrix_profile(&x[TRAIN_S..], &cfg).map_err(|e| e.to_string())?;
        let local: Vec<(usize, usize)> = attack_intervals(&run.series.label[TRAIN_S..]);
        let threshold =
            perfect_threshold(&profile, &local).map_err(|e| format!("seed {seed}: {e}"))?;
        let flagged: Vec<usize> = profile
            .flag(threshold)
            .iter()
            .map(|t| t + TRAIN_S)
            .collect();
        for &(s, e) in &local {
            ensure(
                flagged
                    .iter()
                    .any(|&t| t >= s + TRAIN_S && t <= e + TRAIN_S),
                || format!("seed {seed}: attack {s}..={e} not covered"),
            )?;
        }
        let fp = flagged
            .iter()
            .filter(|&&t| {
                !run.attacks
                    .iter()
                    .any(|&(start, end)| t as f64 >= start.floor() && t as f64 <= end + 10.0)
            })
            .count();
        ensure(fp <= 2, || {
            format!("seed {seed}: {fp} false-positive seconds at threshold {threshold}")
        })?;
        worst_fp = worst_fp.max(fp);
    }
    Ok(format!(
        "every attack covered, at most {worst_fp} false-positive seconds per run"
    ))
}

fn c8_lstm_gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for layers in [1, 2] {
        let net = LstmNetwork::new(layers, 3, 4, 80 + layers as u64).map_err(|e| e.to_string())?;
        let windows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grad) = lstm::gradients(&net, &windows, &targets).map_err(|e| e.to_string())?;
        let base = net.flat_params();
        let h = 1e-5;
        for k in 0..base.len() {
            let loss_at = |delta: f64| {
                let mut p = base.clone();
                p[k] += delta;
                let mut probe = net.clone();
                probe.set_flat_params(&p).unwrap();
                lstm::gradients(&probe, &windows, &targets).unwrap().0
            };
            let fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            ensure(rel < 1e-4, || {
                format!("{layers} layer(s), parameter {k}: {} vs {fd}", grad[k])
            })?;
        }
    }
    Ok(format!("max relative error {worst:.2e}"))
}

fn periodic_config(duration_s: u32, seed: u64, attacks: Vec<AttackSpec>) -> SimConfig {
    SimConfig {
        n_rtus: 6,
        n_mtus: 1,
        poll_interval_s: 10,
        duration_s,
        manual_op_rate: 0.5,
        keepalive_links: 1,
        keepalive_prob: 0.5,
        attacks,
        rng_seed: seed,
    }
}

fn c9_lstm_properties() -> Check {
    let train_events =
        generate(&periodic_config(600, 90, Vec::new())).map_err(|e| e.to_string())?;
    let train_series = aggregate_per_second(&train_events).port_pairs;
    let mut net = LstmNetwork::new(1, 32, 10, 9).map_err(|e| e.to_string())?;
    net.norm = Norm::fit(&train_series);
    let before = lstm::window_mse(&net, &train_series).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        iterations: 3000,
        learning_rate: 1e-2,
        batch_size: 50,
        rng_seed: 91,
        ..TrainConfig::default()
    };
    lstm::train(&mut net, &train_series, &cfg).map_err(|e| e.to_string())?;
    let after = lstm::window_mse(&net, &train_series).map_err(|e| e.to_string())?;
    ensure(after < 0.2 * before, || {
        format!("MSE {after:.4} is not below 20% of {before:.4}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(92);
    let attacks: Vec<AttackSpec> = (0..5)
        .map(|k| AttackSpec {
            start_s: (40 + 50 * k + rng.random_range(1..=5)) as f64,
            duration_s: rng.random_range(1..=3) as f64,
            kind: AttackKind::ScanBurst,
            intensity: 20.0,
        })
        .collect();
    let test_events = generate(&periodic_config(300, 93, attacks)).map_err(|e| e.to_string())?;
    let test = aggregate_per_second(&test_events);
    let errs = lstm::prediction_errors(
        &net,
        &test.port_pairs,
        &ReplacementRule::Labels(test.label.clone()),
    )
    .map_err(|e| e.to_string())?;
    let (e, l): (Vec<f64>, Vec<bool>) = errs
        .rows
        .iter()
        .filter_map(|r| r.abs_error.map(|v| (v, test.label[r.second])))
        .unzip();
    let t_ma = lstm::threshold_ma(&e, &l).map_err(|e| e.to_string())?;
    let flagged = errs.flag(t_ma);
    let counts =
        confusion(&flagged, &test.label, &errs.evaluable_mask()).map_err(|e| e.to_string())?;
    let m = metrics(&counts).map_err(|e| e.to_string())?;
    ensure(m.recall == Some(1.0), || format!("recall {:?}", m.recall))?;
    let f1 = m.f1.unwrap_or(0.0);
    ensure(f1 >= 0.8, || format!("F1 {f1:.3} with {counts:?}"))?;
    Ok(format!(
        "MSE {before:.3} -> {after:.3} ({:.1}%), T_MA {t_ma:.3}, recall 1, F1 {f1:.3}",
        100.0 * after / before
    ))
}

fn c10_metric_identities() -> Check {
    let m = metrics(&ConfusionCounts {
        tp: 2,
        fp: 1,
        tn: 5,
        fn_: 2,
    })
    .map_err(|e| e.to_string())?;
    let got = [m.precision, m.recall, m.f1, m.accuracy];
    for (v, want) in got.iter().zip([0.6667, 0.5, 0.5714, 0.7]) {
        ensure(v.is_some_and(|v| (v - want).abs() <= 1e-4), || {
            format!("{got:?}")
        })?;
    }
    let skewed = metrics(&ConfusionCounts {
        tp: 0,
        fp: 0,
        tn: 670,
        fn_: 1,
    })
    .map_err(|e| e.to_string())?;
    let acc = skewed.accuracy.unwrap_or(0.0);
    ensure(acc > 0.99, || format!("accuracy {acc}"))?;
    ensure(skewed.f1.is_none_or(|f| f == 0.0), || {
        format!("f1 {:?}", skewed.f1)
    })?;
    Ok(format!("imbalanced case: accuracy {acc:.4}, f1 undefined"))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tsids"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`tsids {}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn cli_pipeline(dir: &Path) -> Result<String, String> {
    let steps: [&[&str]; 8] = [
        &[
            "simulate",
            "--output-dir",
            "sim",
            "--seed",
            "11",
            "--duration",
            "500",
            "--n-mtus",
            "2",
            "--keepalive-links",
            "2",
            "--attack",
            "scan_burst@402.4:2:9",
            "--attack",
            "fake_command@455.5:1.5:20",
        ],
        &[
            "ingest",
            "--input",
            "sim/events.csv",
            "--output-dir",
            "feat",
            "--extended",
        ],
        &[
            "fit",
            "--input",
            "feat/features.csv",
            "--detector",
            "sarima",
            "--feature",
            "packets,port_pairs",
            "--train-range",
            "0:370",
            "--output-dir",
            "models",
        ],
        &[
            "fit",
            "--input",
            "feat/features.csv",
            "--detector",
            "lstm",
            "--train-range",
            "0:370",
            "--hidden",
            "8",
            "--iterations",
            "150",
            "--seed",
            "5",
            "--output-dir",
            "models",
        ],
        &[
            "detect",
            "--input",
            "feat/features.csv",
            "--detector",
            "sarima",
            "--feature",
            "packets,port_pairs",
            "--model",
            "models/model_sarima_packets.json,models/model_sarima_port_pairs.json",
            "--test-range",
            "370:",
            "--truth",
            "sim/truth.json",
            "--plot",
            "--output-dir",
            "out",
        ],
        &[
            "detect",
            "--input",
            "feat/features.csv",
            "--detector",
            "matrix_profile",
            "--feature",
            "packets,ip_pairs,port_pairs",
            "--train-range",
            "0:370",
            "--confusion",
            "--plot",
            "--output-dir",
            "out",
        ],
        &[
            "detect",
            "--input",
            "feat/features.csv",
            "--detector",
            "lstm",
            "--model",
            "models/model_lstm_port_pairs.json",
            "--test-range",
            "370:",
            "--plot",
            "--output-dir",
            "out",
        ],
        &["report", "--input", "out", "--output-dir", "summary"],
    ];
    let mut stdout = String::new();
    for args in steps {
        stdout.push_str(&run_cli(dir, args)?);
    }
    Ok(stdout)
}

fn c11_cli_determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out_a = cli_pipeline(a.path())?;
    let out_b = cli_pipeline(b.path())?;
    ensure(out_a == out_b, || "stdout differs between runs".into())?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    ensure(sa.keys().eq(sb.keys()), || {
        "file sets differ between runs".into()
    })?;
    for (name, bytes) in &sa {
        ensure(sb[name] == *bytes, || {
            format!("{name} differs between runs")
        })?;
    }
    Ok(format!(
        "{} output files byte-identical across two runs",
        sa.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        (
            "quantile reproduction",
            Duration::from_secs(1),
            c1_quantiles,
        ),
        (
            "distance identity",
            Duration::from_secs(5),
            c2_distance_identity,
        ),
        (
            "matrix profile oracle equivalence",
            Duration::from_secs(30),
            c3_oracle_equivalence,
        ),
        (
            "seasonal AR coefficient recovery",
            Duration::from_secs(60),
            c4_coefficient_recovery,
        ),
        (
            "Ljung-Box calibration",
            Duration::from_secs(30),
            c5_ljung_box_calibration,
        ),
        (
            "end-to-end SARIMA detection",
            Duration::from_secs(120),
            c6_sarima_end_to_end,
        ),
        (
            "end-to-end matrix profile",
            Duration::from_secs(60),
            c7_matrix_profile_end_to_end,
        ),
        (
            "LSTM gradient check",
            Duration::from_secs(10),
            c8_lstm_gradient_check,
        ),
        (
            "LSTM training and thresholds",
            Duration::from_secs(300),
            c9_lstm_properties,
        ),
        (
            "metric identities",
            Duration::from_secs(1),
            c10_metric_identities,
        ),
        (
            "CLI determinism",
            Duration::from_secs(60),
            c11_cli_determinism,
        ),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let elapsed = started.elapsed();
        let result = result.and_then(|detail| {
            if elapsed > budget {
                Err(format!("took {elapsed:.2?}, budget {budget:?}; {detail}"))
            } else {
                Ok(detail)
            }
        });
        let (status, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} {status} {name} ({elapsed:.2?}): {detail}",
            i + 1
        );
    }
    if failures > 0 {
        println!("{failures} of 11 acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 11 acceptance criteria passed");
}
