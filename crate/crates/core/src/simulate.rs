//! Synthetic Modbus/TCP-like traffic with labeled attacks.
//!
//! The generator emulates a small SCADA network: one or two MTUs poll a
//! set of RTUs every `poll_interval_s` seconds over persistent
//! connections (one port pair per MTU-RTU link), optional keepalive
//! exchanges give the per-second counts a small amount of background
//! jitter, operators trigger aperiodic manual queries, and attacks inject
//! malicious packets.
//!
//! Randomness comes from `ChaCha8Rng` (rand_chacha) seeded with
//! `seed_from_u64(rng_seed)`; only `random::<f64>()` and
//! `random_range` on integer ranges are drawn, in a fixed order, so event
//! lists are stable across platforms for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PacketEvent;

const MODBUS_PORT: u16 = 502;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("attacks {0} and {1} overlap")]
    OverlappingAttacks(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// New attacker IP probing many ports on the RTUs: raises every feature.
    ScanBurst,
    /// New attacker IP streaming data over one new connection.
    FileTransfer,
    /// Commands from the MTU's address, each on a fresh source port.
    FakeCommand,
}

impl std::str::FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scan_burst" => Ok(AttackKind::ScanBurst),
            "file_transfer" => Ok(AttackKind::FileTransfer),
            "fake_command" => Ok(AttackKind::FakeCommand),
            other => Err(format!("unknown attack kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub start_s: f64,
    pub duration_s: f64,
    pub kind: AttackKind,
    /// Packets per second.
    pub intensity: f64,
}

impl AttackSpec {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_rtus: usize,
    pub n_mtus: usize,
    pub poll_interval_s: u32,
    pub duration_s: u32,
    /// Expected manual operations per minute.
    pub manual_op_rate: f64,
    /// Number of MTU-RTU links that exchange keepalives between polls.
    pub keepalive_links: usize,
    /// Per-link, per-second keepalive probability.
    pub keepalive_prob: f64,
    pub attacks: Vec<AttackSpec>,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_rtus: 6,
            n_mtus: 1,
            poll_interval_s: 10,
            duration_s: 600,
            manual_op_rate: 1.0,
            keepalive_links: 0,
            keepalive_prob: 0.5,
            attacks: Vec::new(),
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: &str| Err(SimError::Config(msg.to_owned()));
        if self.duration_s == 0 {
            return bad("duration_s must be > 0");
        }
        if self.poll_interval_s == 0 {
            return bad("poll_interval_s must be >= 1");
        }
        if self.n_rtus == 0 || self.n_mtus == 0 {
            return bad("need at least one MTU and one RTU");
        }
        if self.n_rtus > 250 || self.n_mtus > 250 {
            return bad("at most 250 MTUs and 250 RTUs");
        }
        if !(self.manual_op_rate >= 0.0 && self.manual_op_rate.is_finite()) {
            return bad("manual_op_rate must be a non-negative number");
        }
        if self.keepalive_links > self.n_links() {
            return bad("keepalive_links exceeds the number of MTU-RTU links");
        }
        if !(0.0..=1.0).contains(&self.keepalive_prob) {
            return bad("keepalive_prob must lie in [0, 1]");
        }
        if self.attacks.len() > 200 {
            return bad("at most 200 attacks");
        }
        for (i, a) in self.attacks.iter().enumerate() {
            if !(a.duration_s > 0.0 && a.duration_s.is_finite()) {
                return Err(SimError::Config(format!(
                    "attack {i}: duration_s must be > 0"
                )));
            }
            if !(a.intensity > 0.0 && a.intensity.is_finite()) {
                return Err(SimError::Config(format!(
                    "attack {i}: intensity must be > 0"
                )));
            }
            if !(a.start_s >= 0.0 && a.end_s() <= self.duration_s as f64) {
                return Err(SimError::Config(format!(
                    "attack {i}: [{}, {}) lies outside [0, {})",
                    a.start_s,
                    a.end_s(),
                    self.duration_s
                )));
            }
        }
        let mut order: Vec<usize> = (0..self.attacks.len()).collect();
        order.sort_by(|&a, &b| self.attacks[a].start_s.total_cmp(&self.attacks[b].start_s));
        for w in order.windows(2) {
            let (a, b) = (&self.attacks[w[0]], &self.attacks[w[1]]);
            if b.start_s < a.end_s() {
                return Err(SimError::OverlappingAttacks(w[0].min(w[1]), w[0].max(w[1])));
            }
        }
        Ok(())
    }

    fn n_links(&self) -> usize {
        self.n_rtus * self.n_mtus
    }
}

/// Ground-truth sidecar written next to the generated events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub duration_s: u32,
    pub attacks: Vec<TruthInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: AttackKind,
    pub intensity: f64,
}

impl GroundTruth {
    pub fn from_config(config: &SimConfig) -> Self {
        let mut attacks: Vec<TruthInterval> = config
            .attacks
            .iter()
            .map(|a| TruthInterval {
                start_s: a.start_s,
                end_s: a.end_s(),
                kind: a.kind,
                intensity: a.intensity,
            })
            .collect();
        attacks.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        GroundTruth {
            duration_s: config.duration_s,
            attacks,
        }
    }

    /// `(start, end)` pairs in real seconds.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.attacks.iter().map(|a| (a.start_s, a.end_s)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Link {
    mtu: usize,
    rtu: usize,
    port: u16,
}

fn mtu_ip(i: usize) -> String {
    format!("10.0.0.{}", i + 1)
}

fn rtu_ip(j: usize) -> String {
    format!("10.0.1.{}", j + 1)
}

fn attacker_ip(a: usize) -> String {
    format!("10.0.9.{}", 10 + (a % 240))
}

fn micros(t: f64) -> u64 {
    (t * 1e6).round() as u64
}

struct Builder {
    rng: ChaCha8Rng,
    events: Vec<PacketEvent>,
}

impl Builder {
    fn payload(&mut self) -> u64 {
        self.rng.random_range(60..=120)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        t_us: u64,
        src: String,
        dst: String,
        sp: u16,
        dp: u16,
        protocol: &str,
        flags: &[&str],
        fc: Option<u16>,
        malicious: bool,
    ) {
        let length_bytes = self.payload();
        self.events.push(PacketEvent {
            timestamp_us: t_us,
            src_ip: src,
            dst_ip: dst,
            src_port: sp,
            dst_port: dp,
            protocol: protocol.to_owned(),
            length_bytes,
            flags: flags.iter().map(|f| (*f).to_owned()).collect(),
            function_code: fc,
            malicious,
        });
    }

    /// Request from the MTU side, response from the RTU side, both inside one second.
    fn exchange(
        &mut self,
        link: Link,
        t_req_us: u64,
        second_end_us: u64,
        fc: Option<u16>,
        protocol: &str,
    ) {
        let t_resp = (t_req_us + self.rng.random_range(2_000..=8_000)).min(second_end_us - 1);
        let flags: &[&str] = if fc.is_some() {
            &["PSH", "ACK"]
        } else {
            &["ACK"]
        };
        self.push(
            t_req_us,
            mtu_ip(link.mtu),
            rtu_ip(link.rtu),
            link.port,
            MODBUS_PORT,
            protocol,
            flags,
            fc,
            false,
        );
        self.push(
            t_resp,
            rtu_ip(link.rtu),
            mtu_ip(link.mtu),
            MODBUS_PORT,
            link.port,
            protocol,
            flags,
            fc,
            false,
        );
    }
}

/// Generate timestamp-sorted packet events for `config`.
pub fn generate(config: &SimConfig) -> Result<Vec<PacketEvent>, SimError> {
    config.validate()?;
    let links: Vec<Link> = (0..config.n_mtus)
        .flat_map(|mtu| {
            (0..config.n_rtus).map(move |rtu| Link {
                mtu,
                rtu,
                port: 40000 + (mtu * 256 + rtu) as u16,
            })
        })
        .collect();
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        events: Vec::new(),
    };
    let duration = config.duration_s as u64;
    let interval = config.poll_interval_s as u64;
    // active[t][l]: link l already carries traffic in second t
    let mut active = vec![vec![false; links.len()]; duration as usize];

    // Polling: every link once per cycle, request and response within the same second.
    let spacing_us = (900_000 / links.len() as u64).min(20_000);
    for cycle_start in (0..duration).step_by(interval as usize) {
        let base = cycle_start * 1_000_000;
        for (l, &link) in links.iter().enumerate() {
            let jitter = b.rng.random_range(0..=5_000u64);
            let t_req = base + 10_000 + l as u64 * spacing_us + jitter;
            b.exchange(link, t_req, base + 1_000_000, Some(3), "modbus");
            active[cycle_start as usize][l] = true;
        }
    }

    // Keepalives on the first `keepalive_links` links.
    for t in 0..duration {
        for (l, &link) in links.iter().enumerate().take(config.keepalive_links) {
            if b.rng.random::<f64>() < config.keepalive_prob {
                let base = t * 1_000_000;
                let t_req = base + b.rng.random_range(0..980_000u64);
                b.exchange(link, t_req, base + 1_000_000, None, "tcp");
                active[t as usize][l] = true;
            }
        }
    }

    // Manual operations: Poisson arrivals, carried on a link already active in that
    // second when there is one so the port topology stays unchanged.
    if config.manual_op_rate > 0.0 {
        let rate_per_s = config.manual_op_rate / 60.0;
        let mut t = 0.0f64;
        loop {
            let u: f64 = b.rng.random();
            t += -(1.0 - u).ln() / rate_per_s;
            if t >= duration as f64 {
                break;
            }
            let second = t.floor() as usize;
            let candidates: Vec<usize> = (0..links.len()).filter(|&l| active[second][l]).collect();
            let l = if candidates.is_empty() {
                b.rng.random_range(0..links.len())
            } else {
                candidates[b.rng.random_range(0..candidates.len())]
            };
            active[second][l] = true;
            let link = links[l];
            let n_packets: usize = b.rng.random_range(2..=6);
            let second_end = (second as u64 + 1) * 1_000_000;
            for k in 0..n_packets {
                let ts = (micros(t) + k as u64 * 3_000).min(second_end - 1);
                let (src, dst, sp, dp) = if k % 2 == 0 {
                    (mtu_ip(link.mtu), rtu_ip(link.rtu), link.port, MODBUS_PORT)
                } else {
                    (rtu_ip(link.rtu), mtu_ip(link.mtu), MODBUS_PORT, link.port)
                };
                b.push(
                    ts,
                    src,
                    dst,
                    sp,
                    dp,
                    "modbus",
                    &["PSH", "ACK"],
                    Some(6),
                    false,
                );
            }
        }
    }

    for (a, spec) in config.attacks.iter().enumerate() {
        inject_attack(&mut b, a, spec, config);
    }

    let mut events = b.events;
    events.sort_by_key(|e| e.timestamp_us);
    Ok(events)
}

fn inject_attack(b: &mut Builder, a: usize, spec: &AttackSpec, config: &SimConfig) {
    let total = (spec.intensity * spec.duration_s).round().max(1.0) as usize;
    let step = spec.duration_s / total as f64;
    let attacker = attacker_ip(a);
    let attacker_port = 50000 + (a % 10_000) as u16;
    let target = a % config.n_rtus;
    for k in 0..total {
        let ts = micros(spec.start_s + (k as f64 + 0.5) * step);
        match spec.kind {
            AttackKind::ScanBurst => {
                let rtu = k % config.n_rtus;
                let dport = 1 + (k % 20_000) as u16;
                b.push(
                    ts,
                    attacker.clone(),
                    rtu_ip(rtu),
                    attacker_port,
                    dport,
                    "tcp",
                    &["SYN"],
                    None,
                    true,
                );
            }
            AttackKind::FileTransfer => {
                let (src, dst, sp, dp) = if k % 2 == 0 {
                    (attacker.clone(), rtu_ip(target), attacker_port, 4444)
                } else {
                    (rtu_ip(target), attacker.clone(), 4444, attacker_port)
                };
                b.push(ts, src, dst, sp, dp, "tcp", &["PSH", "ACK"], None, true);
            }
            AttackKind::FakeCommand => {
                // one command = request + response on a fresh source port
                let port = 30000 + ((a * 1000 + k / 2) % 10_000) as u16;
                let (src, dst, sp, dp) = if k % 2 == 0 {
                    (mtu_ip(0), rtu_ip(target), port, MODBUS_PORT)
                } else {
                    (rtu_ip(target), mtu_ip(0), MODBUS_PORT, port)
                };
                b.push(
                    ts,
                    src,
                    dst,
                    sp,
                    dp,
                    "modbus",
                    &["PSH", "ACK"],
                    Some(5),
                    true,
                );
            }
        }
    }
}
