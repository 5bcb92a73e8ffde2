use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::plot::{svg_line_chart, ChartSpec};
use super::{
    CliError, DetectArgs, Detector, FitArgs, IngestArgs, LstmThreshold, ModelArgs, ReportArgs,
    Result, SimulateArgs,
};
use crate::eval::DetectionReport;
use crate::ingest::{self, EventFormat, Feature, FeatureSeries};
use crate::lstm::{self, LstmError, LstmNetwork, ReplacementRule, TrainConfig};
use crate::matrix_profile::{self, ProfileConfig};
use crate::sarima::{self, GdConfig, SarimaError, SarimaModel, SarimaOrders};
use crate::simulate::{self, AttackSpec, GroundTruth, SimConfig};

fn usage(e: impl Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn sarima_error(e: SarimaError) -> CliError {
    match e {
        SarimaError::Divergence { .. }
        | SarimaError::NonFinite { .. }
        | SarimaError::Singular { .. } => CliError::Numeric(e.to_string()),
        other => usage(other),
    }
}

fn lstm_error(e: LstmError) -> CliError {
    match e {
        LstmError::NonFinite { .. } => CliError::Numeric(e.to_string()),
        other => usage(other),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        context: format!("cannot read {}", path.display()),
        source,
    })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            context: format!("cannot create {}", dir.display()),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        context: format!("cannot write {}", path.display()),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

fn read_features(path: &Path) -> Result<FeatureSeries> {
    let bytes = read_bytes(path)?;
    ingest::read_features_csv(bytes.as_slice())
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Parses `a:b` (or `a:` for "to the end") into a half-open range within `0..n`.
fn parse_range(spec: &str, n: usize, flag: &str) -> Result<Range<usize>> {
    let bad = || {
        usage(format!(
            "{flag} `{spec}` must look like a:b with a < b <= {n}"
        ))
    };
    let (a, b) = spec.split_once(':').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = if b.trim().is_empty() {
        n
    } else {
        b.trim().parse().map_err(|_| bad())?
    };
    if a >= b || b > n {
        return Err(bad());
    }
    Ok(a..b)
}

/// Deterministic sub-seed for a named component.
fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    // splitmix64 finalizer
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_attack(spec: &str) -> Result<AttackSpec> {
    let bad = |why: String| {
        usage(format!(
            "--attack `{spec}`: {why} (expected kind@start:duration:intensity)"
        ))
    };
    let (kind, rest) = spec
        .split_once('@')
        .ok_or_else(|| bad("missing `@`".into()))?;
    let kind = kind.parse().map_err(bad)?;
    let nums: Vec<f64> = rest
        .split(':')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| bad(e.to_string()))?;
    let [start_s, duration_s, intensity] = nums[..] else {
        return Err(bad("need three numbers".into()));
    };
    Ok(AttackSpec {
        start_s,
        duration_s,
        kind,
        intensity,
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_slice::<SimConfig>(&read_bytes(path)?)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => SimConfig::default(),
    };
    if let Some(v) = args.seed {
        cfg.rng_seed = v;
    }
    if let Some(v) = args.duration {
        cfg.duration_s = v;
    }
    if let Some(v) = args.n_rtus {
        cfg.n_rtus = v;
    }
    if let Some(v) = args.n_mtus {
        cfg.n_mtus = v;
    }
    if let Some(v) = args.poll_interval {
        cfg.poll_interval_s = v;
    }
    if let Some(v) = args.manual_op_rate {
        cfg.manual_op_rate = v;
    }
    if let Some(v) = args.keepalive_links {
        cfg.keepalive_links = v;
    }
    if let Some(v) = args.keepalive_prob {
        cfg.keepalive_prob = v;
    }
    for spec in &args.attacks {
        cfg.attacks.push(parse_attack(spec)?);
    }
    let events = simulate::generate(&cfg).map_err(usage)?;
    let mut csv = Vec::new();
    ingest::write_events_csv(&mut csv, &events).map_err(usage)?;
    write_file(&args.output_dir.join("events.csv"), &csv)?;
    write_file(
        &args.output_dir.join("truth.json"),
        &to_json(&GroundTruth::from_config(&cfg)),
    )?;
    eprintln!(
        "wrote {} events to {}",
        events.len(),
        args.output_dir.display()
    );
    Ok(())
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let bytes = read_bytes(&args.input)?;
    let events = ingest::parse_events(bytes.as_slice(), EventFormat::from_path(&args.input))
        .map_err(|e| usage(format!("{}: {e}", args.input.display())))?;
    let series = ingest::aggregate_per_second(&events);
    let mut out = Vec::new();
    ingest::write_features_csv(&mut out, &series, args.extended).map_err(usage)?;
    write_file(&args.output_dir.join("features.csv"), &out)?;
    eprintln!(
        "aggregated {} events into {} seconds",
        events.len(),
        series.n_seconds()
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LjungBoxSummary {
    q: f64,
    critical: f64,
    dof: usize,
    lags: usize,
    reject: bool,
}

/// SARIMA model file; seasonal means are indexed by absolute second mod s.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SarimaFile {
    detector: String,
    feature: Feature,
    train_range: [usize; 2],
    #[serde(flatten)]
    model: SarimaModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ljung_box: Option<LjungBoxSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LstmFile {
    detector: String,
    feature: Feature,
    train_range: [usize; 2],
    #[serde(flatten)]
    network: LstmNetwork,
}

fn labeled_in(series: &FeatureSeries, range: &Range<usize>) -> usize {
    series.label[range.clone()].iter().filter(|&&l| l).count()
}

fn fit_sarima(
    series: &FeatureSeries,
    feature: Feature,
    train: &Range<usize>,
    params: &ModelArgs,
) -> Result<SarimaFile> {
    let orders: SarimaOrders = params.orders.parse().map_err(sarima_error)?;
    orders.validate().map_err(sarima_error)?;
    let x = &series.feature(feature)[train.clone()];
    let s = orders.s;
    let (centered, means) = sarima::seasonal_center(x, s).map_err(sarima_error)?;
    let gd = GdConfig {
        learning_rate: params.lr.unwrap_or(1e-3),
        max_iters: params.max_iters,
        ..GdConfig::default()
    };
    let mut model = sarima::fit_least_squares(&centered, orders, &gd).map_err(sarima_error)?;
    model.seasonal_means = sarima::rotate_means(&means, (s - train.start % s) % s);
    let resid = sarima::residuals(&model, &centered).map_err(sarima_error)?;
    let lags = sarima::default_lags(resid.len());
    let ljung_box = sarima::ljung_box(&resid, lags, orders.lookback())
        .ok()
        .map(|lb| LjungBoxSummary {
            q: lb.q,
            critical: lb.critical,
            dof: lb.dof,
            lags,
            reject: lb.reject,
        });
    Ok(SarimaFile {
        detector: "sarima".into(),
        feature,
        train_range: [train.start, train.end],
        model,
        ljung_box,
    })
}

fn fit_lstm(
    series: &FeatureSeries,
    feature: Feature,
    train: &Range<usize>,
    params: &ModelArgs,
    strip_labeled: bool,
) -> Result<(LstmFile, Vec<f64>)> {
    let l = params.seq_len;
    let x = series.feature(feature);
    let starts: Vec<usize> = (train.start..train.end.saturating_sub(l))
        .filter(|&s| !strip_labeled || !series.label[s..=s + l].iter().any(|&b| b))
        .collect();
    if starts.is_empty() {
        return Err(usage(format!(
            "training range {}:{} holds no usable windows of length {}",
            train.start,
            train.end,
            l + 1
        )));
    }
    let tag = feature.name();
    let mut net = LstmNetwork::new(
        params.layers,
        params.hidden,
        l,
        derive_seed(params.seed, &format!("lstm-init-{tag}")),
    )
    .map_err(lstm_error)?;
    let cfg = TrainConfig {
        iterations: params.iterations,
        learning_rate: params.lr.unwrap_or(1e-3),
        batch_size: params.batch,
        rng_seed: derive_seed(params.seed, &format!("lstm-train-{tag}")),
        ..TrainConfig::default()
    };
    let outcome = lstm::train_on_windows(&mut net, x, &starts, &cfg).map_err(lstm_error)?;
    Ok((
        LstmFile {
            detector: "lstm".into(),
            feature,
            train_range: [train.start, train.end],
            network: net,
        },
        outcome.loss_trace,
    ))
}

fn check_training_labels(
    series: &FeatureSeries,
    train: &Range<usize>,
    detector: &str,
    strip_labeled: bool,
    allow_labeled: bool,
) -> Result<()> {
    if strip_labeled && detector != "lstm" {
        return Err(usage("--strip-labeled applies to the lstm detector only"));
    }
    let n = labeled_in(series, train);
    if n > 0 && !strip_labeled && !allow_labeled {
        return Err(usage(format!(
            "training range {}:{} contains {n} labeled seconds; pass --allow-labeled{}",
            train.start,
            train.end,
            if detector == "lstm" {
                " or --strip-labeled"
            } else {
                ""
            }
        )));
    }
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let series = read_features(&args.input)?;
    let n = series.n_seconds();
    let train = match &args.train_range {
        Some(spec) => parse_range(spec, n, "--train-range")?,
        None if n > 0 => 0..n,
        None => return Err(usage("feature file is empty")),
    };
    check_training_labels(
        &series,
        &train,
        &args.detector,
        args.strip_labeled,
        args.allow_labeled,
    )?;
    for &feature in &args.feature {
        let name = feature.name();
        if args.detector == "sarima" {
            let file = fit_sarima(&series, feature, &train, &args.model)?;
            if let Some(lb) = &file.ljung_box {
                println!(
                    "{name}: sigma2={} Ljung-Box Q={:.5} critical={:.5} (df {}) reject={}",
                    file.model.sigma2, lb.q, lb.critical, lb.dof, lb.reject
                );
            } else {
                println!(
                    "{name}: sigma2={} (too few residuals for Ljung-Box)",
                    file.model.sigma2
                );
            }
            println!(
                "{name}: gradient descent stopped after {} iterations ({:?}, gradient norm {:.3e})",
                file.model.fit.iters, file.model.fit.stop, file.model.fit.grad_norm
            );
            write_file(
                &args.output_dir.join(format!("model_sarima_{name}.json")),
                &to_json(&file),
            )?;
        } else {
            let (file, trace) =
                fit_lstm(&series, feature, &train, &args.model, args.strip_labeled)?;
            let mut csv = String::from("iteration,loss\n");
            for (i, l) in trace.iter().enumerate() {
                csv.push_str(&format!("{i},{l}\n"));
            }
            write_file(
                &args.output_dir.join(format!("loss_lstm_{name}.csv")),
                csv.as_bytes(),
            )?;
            write_file(
                &args.output_dir.join(format!("model_lstm_{name}.json")),
                &to_json(&file),
            )?;
            println!(
                "{name}: final batch loss {}",
                trace.last().copied().unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}

/// Attack intervals in real seconds restricted to `range`.
fn attack_windows(
    series: &FeatureSeries,
    truth: Option<&GroundTruth>,
    range: &Range<usize>,
) -> Vec<(f64, f64)> {
    let all: Vec<(f64, f64)> = match truth {
        Some(t) => t.intervals(),
        None => series
            .attack_intervals
            .iter()
            .map(|&(s, e)| (s as f64, e as f64))
            .collect(),
    };
    all.into_iter()
        .filter(|&(s, e)| s < range.end as f64 && e >= range.start as f64)
        .collect()
}

struct FeatureOutcome {
    values: Vec<Option<f64>>,
    threshold: f64,
    thresholds: BTreeMap<String, f64>,
    flagged: Vec<usize>,
    evaluable: Vec<bool>,
    with_confusion: bool,
}

fn load_model_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_bytes(path)?)
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn detect_matrix_profile(
    args: &DetectArgs,
    x: &[f64],
    labels: &[bool],
    train: Option<&Range<usize>>,
    test: &Range<usize>,
) -> Result<FeatureOutcome> {
    let mut cfg = ProfileConfig::new(args.m);
    if let Some(e) = args.exclusion {
        cfg.exclusion = e;
    }
    cfg.prefix = train.map(|r| x[r.clone()].to_vec());
    let result = matrix_profile::left_matrix_profile(&x[test.clone()], &cfg).map_err(usage)?;
    let threshold = match args.threshold {
        Some(t) => t,
        None => {
            let attacks = ingest::attack_intervals(&labels[test.clone()]);
            if attacks.is_empty() {
                return Err(usage(
                    "no labeled attacks in the test range; pass --threshold",
                ));
            }
            matrix_profile::perfect_threshold(&result, &attacks).map_err(usage)?
        }
    };
    let flagged = result
        .flag(threshold)
        .into_iter()
        .map(|t| t + test.start)
        .collect();
    let mut thresholds = BTreeMap::new();
    thresholds.insert(
        if args.threshold.is_some() {
            "fixed"
        } else {
            "perfect"
        }
        .to_string(),
        threshold,
    );
    Ok(FeatureOutcome {
        evaluable: result.profile.iter().map(Option::is_some).collect(),
        values: result.profile,
        threshold,
        thresholds,
        flagged,
        with_confusion: args.confusion,
    })
}

fn sarima_model_for(
    args: &DetectArgs,
    series: &FeatureSeries,
    feature: Feature,
    index: usize,
    train: Option<&Range<usize>>,
) -> Result<SarimaModel> {
    if let Some(path) = args.models.get(index) {
        let file: SarimaFile = load_model_file(path)?;
        if file.detector != "sarima" || file.feature != feature {
            return Err(usage(format!(
                "{} holds a {} model for {}, not a sarima model for {}",
                path.display(),
                file.detector,
                file.feature,
                feature
            )));
        }
        file.model.validate().map_err(sarima_error)?;
        return Ok(file.model);
    }
    let train = train.ok_or_else(|| usage("sarima needs --model or --train-range"))?;
    check_training_labels(
        series,
        train,
        "sarima",
        args.strip_labeled,
        args.allow_labeled,
    )?;
    Ok(fit_sarima(series, feature, train, &args.model)?.model)
}

fn lstm_model_for(
    args: &DetectArgs,
    series: &FeatureSeries,
    feature: Feature,
    index: usize,
    train: Option<&Range<usize>>,
) -> Result<LstmNetwork> {
    if let Some(path) = args.models.get(index) {
        let file: LstmFile = load_model_file(path)?;
        if file.detector != "lstm" || file.feature != feature {
            return Err(usage(format!(
                "{} holds a {} model for {}, not an lstm model for {}",
                path.display(),
                file.detector,
                file.feature,
                feature
            )));
        }
        file.network.validate().map_err(lstm_error)?;
        return Ok(file.network);
    }
    let train = train.ok_or_else(|| usage("lstm needs --model or --train-range"))?;
    check_training_labels(
        series,
        train,
        "lstm",
        args.strip_labeled,
        args.allow_labeled,
    )?;
    Ok(
        fit_lstm(series, feature, train, &args.model, args.strip_labeled)?
            .0
            .network,
    )
}

pub fn detect(args: &DetectArgs) -> Result<()> {
    let series = read_features(&args.input)?;
    let n = series.n_seconds();
    if n == 0 {
        return Err(usage("feature file is empty"));
    }
    if !args.models.is_empty() && args.models.len() != args.feature.len() {
        return Err(usage(format!(
            "{} model files for {} features",
            args.models.len(),
            args.feature.len()
        )));
    }
    if !args.models.is_empty() && args.detector == Detector::MatrixProfile {
        return Err(usage("--model does not apply to the matrix profile"));
    }
    let train = args
        .train_range
        .as_deref()
        .map(|s| parse_range(s, n, "--train-range"))
        .transpose()?;
    let test = match (&args.test_range, &train) {
        (Some(spec), _) => parse_range(spec, n, "--test-range")?,
        (None, Some(t)) if t.end < n => t.end..n,
        (None, Some(_)) => {
            return Err(usage(
                "training range reaches the end of the series; pass --test-range",
            ))
        }
        (None, None) => 0..n,
    };
    let truth = args
        .truth
        .as_deref()
        .map(load_model_file::<GroundTruth>)
        .transpose()?;
    let attacks = attack_windows(&series, truth.as_ref(), &test);
    let detector = args.detector.name();
    let mut profile_columns: BTreeMap<Feature, Vec<Option<f64>>> = BTreeMap::new();

    for (index, &feature) in args.feature.iter().enumerate() {
        let name = feature.name();
        let x = series.feature(feature);
        let outcome = match args.detector {
            Detector::MatrixProfile => {
                detect_matrix_profile(args, x, &series.label, train.as_ref(), &test)?
            }
            Detector::Sarima => {
                let model = sarima_model_for(args, &series, feature, index, train.as_ref())?;
                let mut local = model.clone();
                local.seasonal_means =
                    sarima::rotate_means(&model.seasonal_means, test.start % model.orders.s);
                let det = sarima::detect(&x[test.clone()], &local, args.multiplier, args.quantile)
                    .map_err(sarima_error)?;
                let mut csv =
                    String::from("second,value,prediction,abs_error,threshold,flagged,evaluable\n");
                for r in &det.rows {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        r.second + test.start,
                        r.value,
                        fmt_opt(r.prediction),
                        fmt_opt(r.abs_error),
                        det.threshold,
                        u8::from(r.flagged),
                        u8::from(r.evaluable())
                    ));
                }
                write_file(
                    &args.output_dir.join(format!("sarima_{name}.csv")),
                    csv.as_bytes(),
                )?;
                let mut thresholds = BTreeMap::new();
                thresholds.insert("abs_error".to_string(), det.threshold);
                FeatureOutcome {
                    values: det.rows.iter().map(|r| r.abs_error).collect(),
                    threshold: det.threshold,
                    thresholds,
                    flagged: det.flagged().into_iter().map(|t| t + test.start).collect(),
                    evaluable: det.evaluable_mask(),
                    with_confusion: true,
                }
            }
            Detector::Lstm => {
                let net = lstm_model_for(args, &series, feature, index, train.as_ref())?;
                let labels = series.label[test.clone()].to_vec();
                let errs = lstm::prediction_errors(
                    &net,
                    &x[test.clone()],
                    &ReplacementRule::Labels(labels.clone()),
                )
                .map_err(lstm_error)?;
                let (e, l): (Vec<f64>, Vec<bool>) = errs
                    .rows
                    .iter()
                    .filter_map(|r| r.abs_error.map(|e| (e, labels[r.second])))
                    .unzip();
                let ma = lstm::threshold_ma(&e, &l).ok();
                let nm = lstm::threshold_nm(&e, &l).ok();
                let threshold = match args.lstm_threshold {
                    LstmThreshold::Ma => ma.or(nm),
                    LstmThreshold::Nm => nm.or(ma),
                }
                .ok_or_else(|| usage("no evaluable seconds for an lstm threshold"))?;
                let mut thresholds = BTreeMap::new();
                if let Some(v) = ma {
                    thresholds.insert("ma".to_string(), v);
                }
                if let Some(v) = nm {
                    thresholds.insert("nm".to_string(), v);
                }
                thresholds.insert("used".to_string(), threshold);
                let flagged_local = errs.flag(threshold);
                let mut csv = String::from("second,actual,predicted,abs_error,flagged\n");
                for r in &errs.rows {
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        r.second + test.start,
                        r.actual,
                        fmt_opt(r.predicted),
                        fmt_opt(r.abs_error),
                        u8::from(r.abs_error.is_some_and(|v| v >= threshold))
                    ));
                }
                write_file(
                    &args.output_dir.join(format!("lstm_{name}.csv")),
                    csv.as_bytes(),
                )?;
                FeatureOutcome {
                    values: errs.errors(),
                    threshold,
                    thresholds,
                    flagged: flagged_local.into_iter().map(|t| t + test.start).collect(),
                    evaluable: errs.evaluable_mask(),
                    with_confusion: true,
                }
            }
        };

        let mut evaluable = vec![false; n];
        evaluable[test.clone()].copy_from_slice(&outcome.evaluable);
        let report = DetectionReport::build(
            detector,
            name,
            outcome.thresholds.clone(),
            &outcome.flagged,
            &series.label,
            &evaluable,
            &attacks,
            outcome.with_confusion,
        )
        .map_err(usage)?;
        write_file(
            &args
                .output_dir
                .join(format!("report_{detector}_{name}.json")),
            &to_json(&report),
        )?;

        if args.plot {
            let svg = svg_line_chart(&ChartSpec {
                title: &format!("{detector} on {name}"),
                x0: test.start,
                values: &outcome.values,
                threshold: Some(outcome.threshold),
                labels: &series.label[test.clone()],
            });
            write_file(
                &args.output_dir.join(format!("plot_{detector}_{name}.svg")),
                svg.as_bytes(),
            )?;
        }
        let detected = report
            .latency
            .iter()
            .filter(|r| r.first_detection.is_some())
            .count();
        println!(
            "{detector}/{name}: threshold {} flagged {} seconds, {detected}/{} attacks detected, {} false positives",
            outcome.threshold,
            report.flagged.len(),
            report.latency.len(),
            report.false_positives.len()
        );
        if args.detector == Detector::MatrixProfile {
            profile_columns.insert(feature, outcome.values);
        }
    }

    if args.detector == Detector::MatrixProfile {
        let mut csv =
            String::from("second,packets_profile,ip_pairs_profile,port_pairs_profile,label\n");
        for (k, t) in test.clone().enumerate() {
            let cell = |f: Feature| {
                profile_columns
                    .get(&f)
                    .map(|c| fmt_opt(c[k]))
                    .unwrap_or_default()
            };
            csv.push_str(&format!(
                "{t},{},{},{},{}\n",
                cell(Feature::Packets),
                cell(Feature::IpPairs),
                cell(Feature::PortPairs),
                u8::from(series.label[t])
            ));
        }
        write_file(&args.output_dir.join("profile.csv"), csv.as_bytes())?;
    }
    Ok(())
}

fn collect_reports(inputs: &[PathBuf]) -> Result<Vec<(PathBuf, DetectionReport)>> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = fs::read_dir(input).map_err(|source| CliError::Io {
                context: format!("cannot list {}", input.display()),
                source,
            })?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("report_") && n.ends_with(".json"))
                })
                .collect();
            found.sort();
            paths.extend(found);
        } else {
            paths.push(input.clone());
        }
    }
    if paths.is_empty() {
        return Err(usage("no report files found"));
    }
    paths
        .into_iter()
        .map(|p| {
            let r: DetectionReport = load_model_file(&p)?;
            Ok((p, r))
        })
        .collect()
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let reports = collect_reports(&args.input)?;
    let mut summary = String::from(
        "detector,feature,tp,fp,tn,fn,precision,recall,f1,accuracy,attacks,detected,false_positives\n",
    );
    let mut latency = String::from("detector,feature,attack_start,first_detection\n");
    let mut stdout = std::io::stdout().lock();
    for (_, r) in &reports {
        let c = r.counts;
        let count = |f: fn(&crate::eval::ConfusionCounts) -> usize| {
            c.as_ref().map(|c| f(c).to_string()).unwrap_or_default()
        };
        let m = r.metrics;
        let detected = r
            .latency
            .iter()
            .filter(|l| l.first_detection.is_some())
            .count();
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.detector,
            r.feature,
            count(|c| c.tp),
            count(|c| c.fp),
            count(|c| c.tn),
            count(|c| c.fn_),
            fmt_opt(m.and_then(|m| m.precision)),
            fmt_opt(m.and_then(|m| m.recall)),
            fmt_opt(m.and_then(|m| m.f1)),
            fmt_opt(m.and_then(|m| m.accuracy)),
            r.latency.len(),
            detected,
            r.false_positives.len()
        ));
        for l in &r.latency {
            latency.push_str(&format!(
                "{},{},{},{}\n",
                r.detector,
                r.feature,
                l.attack_start,
                l.first_detection.map(|t| t.to_string()).unwrap_or_default()
            ));
        }
        let _ = writeln!(
            stdout,
            "{}/{}: {detected}/{} attacks detected, {} false positives, f1 {}",
            r.detector,
            r.feature,
            r.latency.len(),
            r.false_positives.len(),
            m.and_then(|m| m.f1)
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "undefined".into())
        );
    }
    write_file(&args.output_dir.join("summary.csv"), summary.as_bytes())?;
    write_file(&args.output_dir.join("latency.csv"), latency.as_bytes())?;
    Ok(())
}
