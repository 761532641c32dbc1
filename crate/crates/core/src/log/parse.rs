//! JSON-lines log format.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CallStackInfo, Des, LogRecord, LogSequence, Special};
use crate::signature::ApiSignature;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    seq: u64,
    pid: u32,
    tid: u32,
    des: DesLine,
    csi: CallStackInfo,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesLine {
    sig: ApiSignature,
    args: Vec<String>,
    special: Option<SpecialLine>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SpecialLine {
    Reflective {
        unit: String,
        method: String,
        desc: String,
    },
    Icc {
        origin: String,
        target: String,
    },
}

fn from_line(r: RecordLine, line: usize) -> Result<LogRecord, LogError> {
    let invalid = |message: String| LogError::Validation { line, message };
    let special = match r.des.special {
        None => Special::None,
        Some(SpecialLine::Reflective { unit, method, desc }) => {
            if unit.is_empty() || method.is_empty() || desc.is_empty() {
                return Err(invalid("reflective target fields must be non-empty".into()));
            }
            let target = ApiSignature::new(&unit, &method, &desc)
                .map_err(|e| invalid(e.to_string()))?;
            Special::Reflective { target }
        }
        Some(SpecialLine::Icc { origin, target }) => {
            if origin.is_empty() || target.is_empty() {
                return Err(invalid("icc component fields must be non-empty".into()));
            }
            Special::Icc {
                origin_component: origin,
                target_component: target,
            }
        }
    };
    Ok(LogRecord {
        seq: r.seq,
        pid: r.pid,
        tid: r.tid,
        des: Des {
            signature: r.des.sig,
            args: r.des.args,
            special,
        },
        csi: r.csi,
    })
}

fn to_line(r: &LogRecord) -> RecordLine {
    RecordLine {
        seq: r.seq,
        pid: r.pid,
        tid: r.tid,
        des: DesLine {
            sig: r.des.signature.clone(),
            args: r.des.args.clone(),
            special: match &r.des.special {
                Special::None => None,
                Special::Reflective { target } => Some(SpecialLine::Reflective {
                    unit: target.declaring_unit().to_string(),
                    method: target.method_name().to_string(),
                    desc: target.descriptor().to_string(),
                }),
                Special::Icc {
                    origin_component,
                    target_component,
                } => Some(SpecialLine::Icc {
                    origin: origin_component.clone(),
                    target: target_component.clone(),
                }),
            },
        },
        csi: r.csi.clone(),
    }
}

/// Parse a JSON-lines log recorded with window size `k`. Blank lines are skipped.
pub fn parse_log(bytes: &[u8], k: usize) -> Result<LogSequence, LogError> {
    let text = std::str::from_utf8(bytes).map_err(|e| LogError::Parse {
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let mut records: Vec<LogRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine = serde_json::from_str(raw).map_err(|e| LogError::Parse {
            line,
            message: e.to_string(),
        })?;
        let rec = from_line(parsed, line)?;
        if rec.csi.p.len() > k {
            return Err(LogError::Validation {
                line,
                message: format!("call stack window has {} frames, K = {k}", rec.csi.p.len()),
            });
        }
        if let Some(prev) = records.last() {
            if rec.seq <= prev.seq {
                return Err(LogError::Validation {
                    line,
                    message: format!("seq {} does not increase (previous {})", rec.seq, prev.seq),
                });
            }
        }
        records.push(rec);
    }
    Ok(LogSequence { records, k })
}

pub fn write_record(r: &LogRecord) -> String {
    serde_json::to_string(&to_line(r)).expect("record serialization cannot fail")
}

/// Write records as JSON lines.
pub fn write_log<W: Write>(seq: &LogSequence, mut w: W) -> std::io::Result<()> {
    for r in &seq.records {
        writeln!(w, "{}", write_record(r))?;
    }
    Ok(())
}
