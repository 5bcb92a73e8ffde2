//! Left-only z-normalized matrix profile and discord thresholds.
//!
//! Every length-`m` window is compared only with windows that started at
//! least `exclusion` points earlier, so the profile at a point depends on
//! past data alone. The profile is reported at the second in which a
//! window *ends*: a value at second `t` describes the window
//! `[t - m + 1, t]`, which makes a raised distance coincide with the first
//! anomalous second.
//!
//! Distances use the correlation form
//! `d = sqrt(2m (1 - (Σxy - m μx μy) / (m σx σy)))` with population
//! standard deviations. Windows with `σ < 1e-12` are degenerate: two
//! constant windows are at distance 0, a constant and a non-constant
//! window at `sqrt(2m)`. Distances below `1e-2` are recomputed from the
//! z-normalized windows directly, since the correlation form is inaccurate
//! near zero.

use thiserror::Error;

/// Standard deviations below this are treated as zero.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Running window moments are recomputed exactly this often to bound drift.
const RESYNC_EVERY: usize = 64;

/// Distances below this are recomputed from the z-normalized windows; the
/// correlation form loses about half the significant digits near zero.
const REFINE_BELOW: f64 = 1e-2;

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("series of length {len} is shorter than the required {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("windows differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid profile configuration: {0}")]
    Config(String),
    #[error("no attack intervals given")]
    NoAttacks,
    #[error("profile is undefined over the whole attack interval [{start}, {end}]")]
    UndefinedAttack { start: usize, end: usize },
}

pub type Result<T> = std::result::Result<T, ProfileError>;

#[derive(Debug, Clone, PartialEq)]
pub struct SlidingStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Mean and population standard deviation of every window `[t, t + m)`.
pub fn sliding_stats(series: &[f64], m: usize) -> Result<SlidingStats> {
    if m == 0 || series.len() < m {
        return Err(ProfileError::TooShort {
            len: series.len(),
            needed: m.max(1),
        });
    }
    let n_windows = series.len() - m + 1;
    let mf = m as f64;
    // changes[k] counts positions i < k with x[i] != x[i + 1]
    let mut changes = vec![0usize; series.len()];
    for i in 1..series.len() {
        changes[i] = changes[i - 1] + usize::from(series[i - 1] != series[i]);
    }
    let exact = |t: usize| {
        let w = &series[t..t + m];
        let mean = w.iter().sum::<f64>() / mf;
        let m2 = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (mean, m2)
    };
    let mut means = Vec::with_capacity(n_windows);
    let mut stds = Vec::with_capacity(n_windows);
    let (mut mean, mut m2) = exact(0);
    for t in 0..n_windows {
        if t > 0 {
            if t % RESYNC_EVERY == 0 {
                (mean, m2) = exact(t);
            } else {
                // sliding Welford update: drop series[t-1], add series[t+m-1]
                let (old, new) = (series[t - 1], series[t + m - 1]);
                let next_mean = mean + (new - old) / mf;
                m2 += (new - old) * (new - next_mean + old - mean);
                mean = next_mean;
            }
        }
        if changes[t + m - 1] == changes[t] {
            means.push(series[t]);
            stds.push(0.0);
        } else {
            means.push(mean);
            stds.push((m2.max(0.0) / mf).sqrt());
        }
    }
    Ok(SlidingStats { means, stds })
}

fn distance_from_moments(dot: f64, m: usize, mu_x: f64, sd_x: f64, mu_y: f64, sd_y: f64) -> f64 {
    let mf = m as f64;
    match (sd_x < DEGENERATE_STD, sd_y < DEGENERATE_STD) {
        (true, true) => 0.0,
        (true, false) | (false, true) => (2.0 * mf).sqrt(),
        (false, false) => {
            let corr = ((dot - mf * mu_x * mu_y) / (mf * sd_x * sd_y)).clamp(-1.0, 1.0);
            (2.0 * mf * (1.0 - corr)).max(0.0).sqrt()
        }
    }
}

/// Two-pass z-normalized Euclidean distance of two non-degenerate windows.
fn direct_distance(x: &[f64], y: &[f64]) -> f64 {
    let mf = x.len() as f64;
    let moments = |w: &[f64]| {
        let mean = w.iter().sum::<f64>() / mf;
        let sd = (w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / mf).sqrt();
        (mean, sd)
    };
    let ((mx, sx), (my, sy)) = (moments(x), moments(y));
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = (a - mx) / sx - (b - my) / sy;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Z-normalized Euclidean distance between two equal-length windows.
pub fn znorm_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(ProfileError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(ProfileError::TooShort { len: 0, needed: 1 });
    }
    let m = x.len();
    // center on the pooled mean; the distance is invariant to a common shift
    let shift = (x.iter().sum::<f64>() + y.iter().sum::<f64>()) / (2 * m) as f64;
    let xs: Vec<f64> = x.iter().map(|v| v - shift).collect();
    let ys: Vec<f64> = y.iter().map(|v| v - shift).collect();
    let sx = sliding_stats(&xs, m)?;
    let sy = sliding_stats(&ys, m)?;
    let dot: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let d = distance_from_moments(dot, m, sx.means[0], sx.stds[0], sy.means[0], sy.stds[0]);
    if d < REFINE_BELOW && sx.stds[0] >= DEGENERATE_STD && sy.stds[0] >= DEGENERATE_STD {
        return Ok(direct_distance(&xs, &ys));
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    /// Window length in seconds.
    pub m: usize,
    /// Minimum start offset between a window and its admissible predecessors.
    pub exclusion: usize,
    /// Clean reference data placed before the series; never reported.
    pub prefix: Option<Vec<f64>>,
    /// Without a prefix, this many leading points of the series serve as reference only.
    pub warmup: usize,
}

impl ProfileConfig {
    pub fn new(m: usize) -> Self {
        ProfileConfig {
            m,
            exclusion: (m / 2).max(1),
            prefix: None,
            warmup: 2 * m,
        }
    }

    pub fn with_prefix(mut self, prefix: Vec<f64>) -> Self {
        self.prefix = Some(prefix);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(ProfileError::Config("m must be >= 2".into()));
        }
        if self.exclusion < 1 {
            return Err(ProfileError::Config("exclusion must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig::new(10)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileResult {
    /// One entry per second of the series; `None` where undefined.
    pub profile: Vec<Option<f64>>,
    pub m: usize,
    /// Reference points (prefix or warmup) excluded from reporting.
    pub prefix_len: usize,
}

impl ProfileResult {
    pub fn len(&self) -> usize {
        self.profile.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profile.is_empty()
    }

    /// Seconds whose profile value reaches `threshold`.
    pub fn flag(&self, threshold: f64) -> Vec<usize> {
        self.profile
            .iter()
            .enumerate()
            .filter_map(|(t, v)| v.filter(|&d| d >= threshold).map(|_| t))
            .collect()
    }

    pub fn argmax(&self) -> Option<usize> {
        self.profile
            .iter()
            .enumerate()
            .filter_map(|(t, v)| v.map(|d| (t, d)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t, _)| t)
    }
}

/// Left matrix profile of `series` using running dot products along diagonals.
pub fn left_matrix_profile(series: &[f64], config: &ProfileConfig) -> Result<ProfileResult> {
    config.validate()?;
    let m = config.m;
    let excl = config.exclusion;
    let (full, reported_from, prefix_len) = match &config.prefix {
        Some(prefix) => {
            let mut full = prefix.clone();
            full.extend_from_slice(series);
            (full, prefix.len(), prefix.len())
        }
        None => (
            series.to_vec(),
            config.warmup,
            config.warmup.min(series.len()),
        ),
    };
    if full.len() < m + excl {
        return Err(ProfileError::TooShort {
            len: full.len(),
            needed: m + excl,
        });
    }

    let n_windows = full.len() - m + 1;
    let shift = full.iter().sum::<f64>() / full.len() as f64;
    let x: Vec<f64> = full.iter().map(|v| v - shift).collect();
    let stats = sliding_stats(&x, m)?;

    // best[i]: minimum over admissible j <= i - excl
    let mut best = vec![f64::INFINITY; n_windows];
    for diag in excl..n_windows {
        let mut dot: f64 = (0..m).map(|k| x[diag + k] * x[k]).sum();
        for j in 0..n_windows - diag {
            let i = j + diag;
            if j > 0 {
                dot += x[i + m - 1] * x[j + m - 1] - x[i - 1] * x[j - 1];
            }
            let mut d = distance_from_moments(
                dot,
                m,
                stats.means[i],
                stats.stds[i],
                stats.means[j],
                stats.stds[j],
            );
            if d < REFINE_BELOW
                && stats.stds[i] >= DEGENERATE_STD
                && stats.stds[j] >= DEGENERATE_STD
            {
                d = direct_distance(&x[i..i + m], &x[j..j + m]);
            }
            if d < best[i] {
                best[i] = d;
            }
        }
    }

    let profile = (0..series.len())
        .map(|t| {
            let end = prefix_offset(&config.prefix) + t;
            if end + 1 < m || end < reported_from {
                return None;
            }
            let start = end + 1 - m;
            best.get(start).copied().filter(|d| d.is_finite())
        })
        .collect();
    Ok(ProfileResult {
        profile,
        m,
        prefix_len,
    })
}

fn prefix_offset(prefix: &Option<Vec<f64>>) -> usize {
    prefix.as_ref().map_or(0, Vec::len)
}

/// Largest threshold that still flags at least one second of every attack.
///
/// `attacks` holds inclusive `(start, end)` second intervals.
pub fn perfect_threshold(profile: &ProfileResult, attacks: &[(usize, usize)]) -> Result<f64> {
    if attacks.is_empty() {
        return Err(ProfileError::NoAttacks);
    }
    let mut threshold = f64::INFINITY;
    for &(start, end) in attacks {
        let peak = profile
            .profile
            .iter()
            .enumerate()
            .skip(start)
            .take_while(|(t, _)| *t <= end)
            .filter_map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        if peak == f64::NEG_INFINITY {
            return Err(ProfileError::UndefinedAttack { start, end });
        }
        threshold = threshold.min(peak);
    }
    Ok(threshold)
}
