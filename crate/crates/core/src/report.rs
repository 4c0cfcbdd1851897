//! Report envelopes, significant-digit rounding, CSV rows, and atomic writes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::comb::CHAIN_TOL;
use crate::conic::FEASIBILITY_MARGIN;
use crate::games::RATIO_TOL;
use crate::incompat::ZERO_RESOURCE_TOL;
use crate::tensor::{HERMITICITY_TOL, PSD_TOL};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every float inside a JSON value in place.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_significant).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Tolerances in force for a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub hermiticity: f64,
    pub psd: f64,
    pub chain: f64,
    pub zero_resource: f64,
    pub feasibility_margin: f64,
    pub certificate_gap: f64,
    pub ratio: f64,
}

impl Tolerances {
    pub fn with_gap(certificate_gap: f64) -> Self {
        Self {
            hermiticity: HERMITICITY_TOL,
            psd: PSD_TOL,
            chain: CHAIN_TOL,
            zero_resource: ZERO_RESOURCE_TOL,
            feasibility_margin: FEASIBILITY_MARGIN,
            certificate_gap,
            ratio: RATIO_TOL,
        }
    }
}

/// Everything a report carries besides its result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub tolerances: Tolerances,
    pub result: Value,
}

impl Envelope {
    pub fn new(command: &str, seed: u64, config: Value, tolerances: Tolerances, result: Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            config,
            tolerances,
            result,
        }
    }

    /// Pretty JSON with rounded numbers and a trailing newline.
    pub fn render(&self) -> String {
        let mut v = serde_json::to_value(self).expect("envelopes serialize");
        round_value(&mut v);
        let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
        s.push('\n');
        s
    }
}

/// One summary line per certified instance.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub instance: String,
    pub resource: f64,
    pub ratio: Option<f64>,
    pub predicted: Option<f64>,
    pub gap: f64,
    pub witness_valid: Option<bool>,
    pub wall_seconds: f64,
}

pub const CSV_HEADER: &str = "instance,resource,ratio,predicted,gap,witness_valid,wall_seconds";

fn fmt_num(x: f64) -> String {
    // `{}` on f64 always uses '.' as the decimal separator.
    format!("{}", round_significant(x))
}

pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.instance,
            fmt_num(r.resource),
            opt(r.ratio),
            opt(r.predicted),
            fmt_num(r.gap),
            r.witness_valid.map(|b| b.to_string()).unwrap_or_default(),
            fmt_num(r.wall_seconds)
        );
    }
    out
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp: PathBuf = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

/// Path of the sidecar holding non-deterministic run metadata.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".timing.json");
    PathBuf::from(s)
}
