//! Evaluation metrics over crawl traces.
//!
//! Percentages are relative to a full reference crawl of the same site
//! (its total requests, or its total non-target bytes).
//!
//! # CSV schema
//!
//! [`RunReport::csv_header`] columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `policy`, `site`, `seed` | run identity |
//! | `requests`, `targets`, `beta` | final GET+HEAD count, targets retrieved, budget spent |
//! | `requests_to_<p>` | % of reference requests needed for `p`% of the targets |
//! | `nontarget_volume_at_<p>` | % of reference non-target bytes received before `p`% of the target volume |
//! | `saved_requests`, `lost_targets` | early-stopping effect, empty unless paired |
//!
//! Percent cells hold a number, `unreached` (never attained) or `n/a`
//! (nothing to attain).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::CrawlTrace;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad report row: {0}")]
    Row(String),
}

/// A percentage, or a sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Percent {
    Value(f64),
    /// The fraction was never attained.
    Unreached,
    /// Nothing to attain (e.g. a site without targets).
    NotApplicable,
}

impl Percent {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(v),
            _ => None,
        }
    }

    /// Ordering key; unreached sorts above every value.
    pub fn rank(self) -> f64 {
        match self {
            Self::Value(v) => v,
            Self::Unreached => f64::INFINITY,
            Self::NotApplicable => f64::NAN,
        }
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Value(v) => write!(f, "{v}"),
            Self::Unreached => f.write_str("unreached"),
            Self::NotApplicable => f.write_str("n/a"),
        }
    }
}

impl FromStr for Percent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unreached" => Ok(Self::Unreached),
            "n/a" => Ok(Self::NotApplicable),
            v => v.parse().map(Self::Value).map_err(|_| format!("`{s}` is not a percentage")),
        }
    }
}

fn pct(num: f64, den: f64) -> Percent {
    if den <= 0.0 {
        Percent::NotApplicable
    } else {
        Percent::Value(100.0 * num / den)
    }
}

/// Targets needed for fraction `f` of `total`.
pub fn needed(total: u64, f: f64) -> u64 {
    (f * total as f64 - 1e-9).ceil().max(0.0) as u64
}

/// GET+HEAD requests spent until `ceil(f·total_targets)` targets were in
/// hand, as a percentage of `reference_requests`.
pub fn requests_to_fraction(trace: &CrawlTrace, total_targets: u64, reference_requests: u64, f: f64) -> Percent {
    if total_targets == 0 {
        return Percent::NotApplicable;
    }
    let need = needed(total_targets, f);
    if need == 0 {
        return pct(0.0, reference_requests as f64);
    }
    match trace.steps.iter().find(|s| s.y >= need) {
        Some(s) => pct(s.requests as f64, reference_requests as f64),
        None => Percent::Unreached,
    }
}

/// Non-target bytes received until target bytes reached `f·total_target_bytes`,
/// as a percentage of `reference_nontarget_bytes`.
pub fn nontarget_volume_at_fraction(
    trace: &CrawlTrace,
    total_target_bytes: u64,
    reference_nontarget_bytes: u64,
    f: f64,
) -> Percent {
    if total_target_bytes == 0 {
        return Percent::NotApplicable;
    }
    let need = f * total_target_bytes as f64 - 1e-9;
    if need <= 0.0 {
        return pct(0.0, reference_nontarget_bytes as f64);
    }
    match trace.steps.iter().find(|s| s.target_bytes as f64 >= need) {
        Some(s) => pct(s.nontarget_bytes as f64, reference_nontarget_bytes as f64),
        None => Percent::Unreached,
    }
}

/// Effect of early stopping on paired runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopReport {
    pub saved_requests: f64,
    pub lost_targets: f64,
}

pub fn early_stop_report(with_stop: &CrawlTrace, without_stop: &CrawlTrace) -> EarlyStopReport {
    let ratio = |a: u64, b: u64| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    EarlyStopReport {
        saved_requests: 100.0 * (1.0 - ratio(with_stop.total_requests(), without_stop.total_requests())),
        lost_targets: 100.0 * (1.0 - ratio(with_stop.summary.targets, without_stop.summary.targets)),
    }
}

/// Ground truth of a site, as seen by a full reference crawl.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub targets: u64,
    pub target_bytes: u64,
    pub requests: u64,
    pub nontarget_bytes: u64,
}

impl From<&crate::fixtures::Manifest> for Reference {
    fn from(m: &crate::fixtures::Manifest) -> Self {
        Self {
            targets: m.target_count,
            target_bytes: m.target_bytes,
            requests: m.requests,
            nontarget_bytes: m.nontarget_bytes,
        }
    }
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.5, 0.9, 1.0];

fn frac_key(f: f64) -> String {
    let p = (f * 100.0 * 1e6).round() / 1e6;
    if p.fract() == 0.0 {
        format!("{}", p as u64)
    } else {
        format!("{p}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub policy: String,
    pub site: String,
    pub seed: u64,
    pub requests: u64,
    pub targets: u64,
    pub beta: f64,
    /// Keyed by percentage label, e.g. `"90"`.
    pub requests_to_fraction: BTreeMap<String, Percent>,
    pub nontarget_volume_at_fraction: BTreeMap<String, Percent>,
    pub early_stop: Option<EarlyStopReport>,
}

impl RunReport {
    pub fn new(site: &str, trace: &CrawlTrace, reference: &Reference, fractions: &[f64]) -> Self {
        Self {
            policy: trace.summary.policy.clone(),
            site: site.to_string(),
            seed: trace.summary.seed,
            requests: trace.total_requests(),
            targets: trace.summary.targets,
            beta: trace.summary.beta,
            requests_to_fraction: fractions
                .iter()
                .map(|&f| (frac_key(f), requests_to_fraction(trace, reference.targets, reference.requests, f)))
                .collect(),
            nontarget_volume_at_fraction: fractions
                .iter()
                .map(|&f| {
                    let v = nontarget_volume_at_fraction(trace, reference.target_bytes, reference.nontarget_bytes, f);
                    (frac_key(f), v)
                })
                .collect(),
            early_stop: None,
        }
    }

    pub fn csv_header(fractions: &[f64]) -> Vec<String> {
        let mut h: Vec<String> = ["policy", "site", "seed", "requests", "targets", "beta"]
            .map(String::from)
            .to_vec();
        h.extend(fractions.iter().map(|&f| format!("requests_to_{}", frac_key(f))));
        h.extend(fractions.iter().map(|&f| format!("nontarget_volume_at_{}", frac_key(f))));
        h.push("saved_requests".into());
        h.push("lost_targets".into());
        h
    }

    fn csv_row(&self, fractions: &[f64]) -> Vec<String> {
        let cell = |m: &BTreeMap<String, Percent>, f: f64| m.get(&frac_key(f)).map(Percent::to_string).unwrap_or_default();
        let mut r = vec![
            self.policy.clone(),
            self.site.clone(),
            self.seed.to_string(),
            self.requests.to_string(),
            self.targets.to_string(),
            self.beta.to_string(),
        ];
        r.extend(fractions.iter().map(|&f| cell(&self.requests_to_fraction, f)));
        r.extend(fractions.iter().map(|&f| cell(&self.nontarget_volume_at_fraction, f)));
        match self.early_stop {
            Some(e) => {
                r.push(e.saved_requests.to_string());
                r.push(e.lost_targets.to_string());
            }
            None => r.extend([String::new(), String::new()]),
        }
        r
    }
}

/// Writes reports as CSV with the documented schema.
pub fn write_csv<W: std::io::Write>(out: W, reports: &[RunReport], fractions: &[f64]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RunReport::csv_header(fractions))?;
    for r in reports {
        w.write_record(r.csv_row(fractions))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn to_csv(reports: &[RunReport], fractions: &[f64]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, reports, fractions).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Parses CSV written by [`write_csv`]; returns the reports and fractions.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<(Vec<RunReport>, Vec<f64>), MetricsError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    let fractions: Vec<f64> = header
        .iter()
        .filter_map(|h| h.strip_prefix("requests_to_"))
        .map(|p| p.parse::<f64>().map(|v| v / 100.0).map_err(|_| MetricsError::Row(format!("column `{p}`"))))
        .collect::<Result<_, _>>()?;
    if header.len() != RunReport::csv_header(&fractions).len() {
        return Err(MetricsError::Row("unexpected column count".into()));
    }
    let k = fractions.len();
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let bad = |what: &str| MetricsError::Row(format!("{what} in {:?}", rec.iter().collect::<Vec<_>>()));
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(&header[i]));
        let int = |i: usize| rec[i].parse::<u64>().map_err(|_| bad(&header[i]));
        let perc = |i: usize| rec[i].parse::<Percent>().map_err(|_| bad(&header[i]));
        let mut req = BTreeMap::new();
        let mut vol = BTreeMap::new();
        for (j, &f) in fractions.iter().enumerate() {
            req.insert(frac_key(f), perc(6 + j)?);
            vol.insert(frac_key(f), perc(6 + k + j)?);
        }
        let early_stop = if rec[6 + 2 * k].is_empty() {
            None
        } else {
            Some(EarlyStopReport {
                saved_requests: num(6 + 2 * k)?,
                lost_targets: num(7 + 2 * k)?,
            })
        };
        out.push(RunReport {
            policy: rec[0].to_string(),
            site: rec[1].to_string(),
            seed: int(2)?,
            requests: int(3)?,
            targets: int(4)?,
            beta: num(5)?,
            requests_to_fraction: req,
            nontarget_volume_at_fraction: vol,
            early_stop,
        });
    }
    Ok((out, fractions))
}

/// Per-step curves for plotting: one row per GET.
pub fn plot_data_csv(traces: &[CrawlTrace]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["policy", "t", "requests", "beta", "targets", "target_bytes", "nontarget_bytes"]);
    for tr in traces {
        for s in &tr.steps {
            let _ = w.write_record([
                tr.summary.policy.clone(),
                s.t.to_string(),
                s.requests.to_string(),
                s.beta.to_string(),
                s.y.to_string(),
                s.target_bytes.to_string(),
                s.nontarget_bytes.to_string(),
            ]);
        }
    }
    String::from_utf8(w.into_inner().expect("memory writer")).expect("csv is utf-8")
}
