//! Packet-event parsing and per-second feature aggregation.
//!
//! Packet events arrive pre-extracted as CSV (header required) or JSONL.
//! Aggregation turns them into a gapless per-second series of packet
//! counts, distinct unordered IP pairs and distinct unordered port pairs,
//! labeled by whether any packet in the second was malicious.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column order of the packet-event CSV.
pub const EVENT_HEADER: [&str; 10] = [
    "timestamp_us",
    "src_ip",
    "dst_ip",
    "src_port",
    "dst_port",
    "protocol",
    "length_bytes",
    "flags",
    "function_code",
    "malicious",
];

/// Column order of the feature CSV.
pub const FEATURE_HEADER: [&str; 5] = ["second", "packets", "ip_pairs", "port_pairs", "label"];

const MICROS_PER_SECOND: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Validation { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// One observed packet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketEvent {
    /// Microseconds since capture start.
    pub timestamp_us: u64,
    pub src_ip: String,
    pub dst_ip: String,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: String,
    pub length_bytes: u64,
    #[serde(default)]
    pub flags: Vec<String>,
    #[serde(default)]
    pub function_code: Option<u16>,
    pub malicious: bool,
}

impl PacketEvent {
    pub fn second(&self) -> usize {
        (self.timestamp_us / MICROS_PER_SECOND) as usize
    }

    fn ip_pair(&self) -> (&str, &str) {
        if self.src_ip <= self.dst_ip {
            (&self.src_ip, &self.dst_ip)
        } else {
            (&self.dst_ip, &self.src_ip)
        }
    }

    fn port_pair(&self) -> (u16, u16) {
        (
            self.src_port.min(self.dst_port),
            self.src_port.max(self.dst_port),
        )
    }
}

/// Input record format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Jsonl,
}

impl EventFormat {
    /// Guess the format from a file name; anything other than `.jsonl`/`.ndjson` is CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => EventFormat::Jsonl,
            _ => EventFormat::Csv,
        }
    }
}

/// Parse a packet-event stream and return the events in timestamp order.
pub fn parse_events<R: Read>(reader: R, format: EventFormat) -> Result<Vec<PacketEvent>> {
    let mut events = match format {
        EventFormat::Csv => parse_csv(reader)?,
        EventFormat::Jsonl => parse_jsonl(std::io::BufReader::new(reader))?,
    };
    // stable: ties keep file order
    events.sort_by_key(|e| e.timestamp_us);
    Ok(events)
}

fn parse_csv<R: Read>(reader: R) -> Result<Vec<PacketEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Ok(Vec::new()),
        Some(rec) => rec.map_err(|e| csv_error(1, e))?,
    };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != EVENT_HEADER {
        return Err(IngestError::Parse {
            line: 1,
            msg: format!("expected header `{}`", EVENT_HEADER.join(",")),
        });
    }

    let mut events = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(0, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != EVENT_HEADER.len() {
            return Err(IngestError::Parse {
                line,
                msg: format!(
                    "expected {} fields, found {}",
                    EVENT_HEADER.len(),
                    rec.len()
                ),
            });
        }
        events.push(event_from_fields(&rec, line)?);
    }
    Ok(events)
}

fn csv_error(fallback_line: usize, e: csv::Error) -> IngestError {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    IngestError::Parse {
        line,
        msg: e.to_string(),
    }
}

fn parse_int(field: &str, name: &str, line: usize) -> Result<i64> {
    field.trim().parse::<i64>().map_err(|_| IngestError::Parse {
        line,
        msg: format!("{name}: `{field}` is not an integer"),
    })
}

fn check_port(value: i64, name: &str, line: usize) -> Result<u16> {
    u16::try_from(value).map_err(|_| IngestError::Validation {
        line,
        msg: format!("{name} {value} outside 0..=65535"),
    })
}

fn check_non_negative(value: i64, name: &str, line: usize) -> Result<u64> {
    u64::try_from(value).map_err(|_| IngestError::Validation {
        line,
        msg: format!("{name} {value} is negative"),
    })
}

fn event_from_fields(rec: &csv::StringRecord, line: usize) -> Result<PacketEvent> {
    let timestamp_us = check_non_negative(
        parse_int(&rec[0], "timestamp_us", line)?,
        "timestamp_us",
        line,
    )?;
    let src_port = check_port(parse_int(&rec[3], "src_port", line)?, "src_port", line)?;
    let dst_port = check_port(parse_int(&rec[4], "dst_port", line)?, "dst_port", line)?;
    let length_bytes = check_non_negative(
        parse_int(&rec[6], "length_bytes", line)?,
        "length_bytes",
        line,
    )?;
    let flags = rec[7]
        .split(';')
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .map(str::to_owned)
        .collect();
    let function_code = match rec[8].trim() {
        "" => None,
        s => {
            let v = parse_int(s, "function_code", line)?;
            Some(u16::try_from(v).map_err(|_| IngestError::Validation {
                line,
                msg: format!("function_code {v} out of range"),
            })?)
        }
    };
    let malicious = match rec[9].trim() {
        "0" => false,
        "1" => true,
        other => {
            return Err(IngestError::Parse {
                line,
                msg: format!("malicious: `{other}` is not 0 or 1"),
            })
        }
    };
    Ok(PacketEvent {
        timestamp_us,
        src_ip: rec[1].trim().to_owned(),
        dst_ip: rec[2].trim().to_owned(),
        src_port,
        dst_port,
        protocol: rec[5].trim().to_owned(),
        length_bytes,
        flags,
        function_code,
        malicious,
    })
}

/// Loosely-typed JSONL row so range errors can be reported as validation errors.
#[derive(Deserialize)]
struct RawJsonEvent {
    timestamp_us: i64,
    src_ip: String,
    dst_ip: String,
    src_port: i64,
    dst_port: i64,
    protocol: String,
    length_bytes: i64,
    #[serde(default)]
    flags: Option<Vec<String>>,
    #[serde(default)]
    function_code: Option<i64>,
    malicious: serde_json::Value,
}

fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<PacketEvent>> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawJsonEvent = serde_json::from_str(&line).map_err(|e| IngestError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let malicious = match &raw.malicious {
            serde_json::Value::Bool(b) => *b,
            serde_json::Value::Number(n) if n.as_i64() == Some(0) => false,
            serde_json::Value::Number(n) if n.as_i64() == Some(1) => true,
            other => {
                return Err(IngestError::Parse {
                    line: line_no,
                    msg: format!("malicious: `{other}` is not 0 or 1"),
                })
            }
        };
        let function_code = raw
            .function_code
            .map(|v| {
                u16::try_from(v).map_err(|_| IngestError::Validation {
                    line: line_no,
                    msg: format!("function_code {v} out of range"),
                })
            })
            .transpose()?;
        events.push(PacketEvent {
            timestamp_us: check_non_negative(raw.timestamp_us, "timestamp_us", line_no)?,
            src_ip: raw.src_ip,
            dst_ip: raw.dst_ip,
            src_port: check_port(raw.src_port, "src_port", line_no)?,
            dst_port: check_port(raw.dst_port, "dst_port", line_no)?,
            protocol: raw.protocol,
            length_bytes: check_non_negative(raw.length_bytes, "length_bytes", line_no)?,
            flags: raw.flags.unwrap_or_default(),
            function_code,
            malicious,
        });
    }
    Ok(events)
}

/// Write events as packet-event CSV (LF line endings).
pub fn write_events_csv<W: Write>(writer: W, events: &[PacketEvent]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(EVENT_HEADER).map_err(csv_io)?;
    for e in events {
        wtr.write_record([
            e.timestamp_us.to_string(),
            e.src_ip.clone(),
            e.dst_ip.clone(),
            e.src_port.to_string(),
            e.dst_port.to_string(),
            e.protocol.clone(),
            e.length_bytes.to_string(),
            e.flags.join(";"),
            e.function_code.map(|c| c.to_string()).unwrap_or_default(),
            if e.malicious { "1" } else { "0" }.to_owned(),
        ])
        .map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> IngestError {
    IngestError::Io(std::io::Error::other(e.to_string()))
}

/// Which per-second series a detector consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Packets,
    IpPairs,
    PortPairs,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Packets, Feature::IpPairs, Feature::PortPairs];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Packets => "packets",
            Feature::IpPairs => "ip_pairs",
            Feature::PortPairs => "port_pairs",
        }
    }
}

impl std::str::FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "packets" => Ok(Feature::Packets),
            "ip_pairs" => Ok(Feature::IpPairs),
            "port_pairs" => Ok(Feature::PortPairs),
            other => Err(format!(
                "unknown feature `{other}` (expected packets, ip_pairs or port_pairs)"
            )),
        }
    }
}

impl std::fmt::Display for Feature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Labeled per-second feature series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSeries {
    pub packets: Vec<f64>,
    pub ip_pairs: Vec<f64>,
    pub port_pairs: Vec<f64>,
    /// Optional columns: payload bytes and distinct protocols per second.
    pub bytes: Vec<f64>,
    pub protocols: Vec<f64>,
    /// Per-second counts of each flag (`flag:<name>`) and function code (`fc:<code>`).
    pub onehot: BTreeMap<String, Vec<f64>>,
    pub label: Vec<bool>,
    /// Maximal runs of labeled seconds, inclusive on both ends.
    pub attack_intervals: Vec<(usize, usize)>,
}

impl FeatureSeries {
    pub fn n_seconds(&self) -> usize {
        self.label.len()
    }

    pub fn feature(&self, feature: Feature) -> &[f64] {
        match feature {
            Feature::Packets => &self.packets,
            Feature::IpPairs => &self.ip_pairs,
            Feature::PortPairs => &self.port_pairs,
        }
    }

    /// Copy of seconds `start..end` with intervals recomputed for the slice.
    pub fn slice(&self, start: usize, end: usize) -> FeatureSeries {
        let end = end.min(self.n_seconds());
        let start = start.min(end);
        let label = self.label[start..end].to_vec();
        FeatureSeries {
            packets: self.packets[start..end].to_vec(),
            ip_pairs: self.ip_pairs[start..end].to_vec(),
            port_pairs: self.port_pairs[start..end].to_vec(),
            bytes: self
                .bytes
                .get(start..end)
                .map(<[f64]>::to_vec)
                .unwrap_or_default(),
            protocols: self
                .protocols
                .get(start..end)
                .map(<[f64]>::to_vec)
                .unwrap_or_default(),
            onehot: self
                .onehot
                .iter()
                .map(|(k, v)| (k.clone(), v[start..end].to_vec()))
                .collect(),
            attack_intervals: attack_intervals(&label),
            label,
        }
    }
}

/// Maximal runs of `true` as inclusive `(start, end)` pairs.
pub fn attack_intervals(label: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut run_start = None;
    for (t, &l) in label.iter().enumerate() {
        match (l, run_start) {
            (true, None) => run_start = Some(t),
            (false, Some(s)) => {
                out.push((s, t - 1));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        out.push((s, label.len() - 1));
    }
    out
}

/// Aggregate timestamp-sorted events into one data point per second.
pub fn aggregate_per_second(events: &[PacketEvent]) -> FeatureSeries {
    let Some(last) = events.iter().map(|e| e.timestamp_us).max() else {
        return FeatureSeries::default();
    };
    let n = (last / MICROS_PER_SECOND) as usize + 1;

    let mut series = FeatureSeries {
        packets: vec![0.0; n],
        ip_pairs: vec![0.0; n],
        port_pairs: vec![0.0; n],
        bytes: vec![0.0; n],
        protocols: vec![0.0; n],
        onehot: BTreeMap::new(),
        label: vec![false; n],
        attack_intervals: Vec::new(),
    };

    let mut ip_sets: Vec<BTreeSet<(&str, &str)>> = vec![BTreeSet::new(); n];
    let mut port_sets: Vec<BTreeSet<(u16, u16)>> = vec![BTreeSet::new(); n];
    let mut proto_sets: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); n];

    for e in events {
        let t = e.second();
        series.packets[t] += 1.0;
        series.bytes[t] += e.length_bytes as f64;
        series.label[t] |= e.malicious;
        ip_sets[t].insert(e.ip_pair());
        port_sets[t].insert(e.port_pair());
        proto_sets[t].insert(&e.protocol);
        for flag in &e.flags {
            series
                .onehot
                .entry(format!("flag:{flag}"))
                .or_insert_with(|| vec![0.0; n])[t] += 1.0;
        }
        if let Some(fc) = e.function_code {
            series
                .onehot
                .entry(format!("fc:{fc}"))
                .or_insert_with(|| vec![0.0; n])[t] += 1.0;
        }
    }
    for t in 0..n {
        series.ip_pairs[t] = ip_sets[t].len() as f64;
        series.port_pairs[t] = port_sets[t].len() as f64;
        series.protocols[t] = proto_sets[t].len() as f64;
    }
    series.attack_intervals = attack_intervals(&series.label);
    series
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Write `second,packets,ip_pairs,port_pairs,label`; `extended` appends `bytes,protocols`.
pub fn write_features_csv<W: Write>(
    mut writer: W,
    series: &FeatureSeries,
    extended: bool,
) -> Result<()> {
    let mut header = FEATURE_HEADER.join(",");
    if extended {
        header.push_str(",bytes,protocols");
    }
    writeln!(writer, "{header}")?;
    for t in 0..series.n_seconds() {
        write!(
            writer,
            "{},{},{},{},{}",
            t,
            format_value(series.packets[t]),
            format_value(series.ip_pairs[t]),
            format_value(series.port_pairs[t]),
            u8::from(series.label[t])
        )?;
        if extended {
            write!(
                writer,
                ",{},{}",
                format_value(series.bytes[t]),
                format_value(series.protocols[t])
            )?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

/// Read a feature CSV. Extra trailing columns are ignored; seconds must be consecutive from 0.
pub fn read_features_csv<R: Read>(reader: R) -> Result<FeatureSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Ok(FeatureSeries::default()),
        Some(rec) => rec.map_err(|e| csv_error(1, e))?,
    };
    let names: Vec<&str> = header
        .iter()
        .map(str::trim)
        .take(FEATURE_HEADER.len())
        .collect();
    if names != FEATURE_HEADER {
        return Err(IngestError::Parse {
            line: 1,
            msg: format!(
                "expected header starting with `{}`",
                FEATURE_HEADER.join(",")
            ),
        });
    }
    let mut series = FeatureSeries::default();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(0, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() < FEATURE_HEADER.len() {
            return Err(IngestError::Parse {
                line,
                msg: format!("expected at least {} fields", FEATURE_HEADER.len()),
            });
        }
        let second = parse_int(&rec[0], "second", line)?;
        if second != series.label.len() as i64 {
            return Err(IngestError::Validation {
                line,
                msg: format!("expected second {}, found {second}", series.label.len()),
            });
        }
        let mut values = [0.0; 3];
        for (k, v) in values.iter_mut().enumerate() {
            let name = FEATURE_HEADER[k + 1];
            *v = rec[k + 1]
                .trim()
                .parse::<f64>()
                .map_err(|_| IngestError::Parse {
                    line,
                    msg: format!("{name}: `{}` is not a number", &rec[k + 1]),
                })?;
            if !v.is_finite() || *v < 0.0 {
                return Err(IngestError::Validation {
                    line,
                    msg: format!("{name} must be a non-negative finite number"),
                });
            }
        }
        let label = match rec[4].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(IngestError::Parse {
                    line,
                    msg: format!("label: `{other}` is not 0 or 1"),
                })
            }
        };
        series.packets.push(values[0]);
        series.ip_pairs.push(values[1]);
        series.port_pairs.push(values[2]);
        series.label.push(label);
    }
    series.attack_intervals = attack_intervals(&series.label);
    Ok(series)
}
