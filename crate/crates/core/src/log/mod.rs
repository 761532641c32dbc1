//! Audit log records and the pipeline that turns a raw log into per-callback segments.

mod parse;
mod pipeline;

use serde::{Deserialize, Serialize};

use crate::signature::ApiSignature;

pub use parse::{parse_log, write_log, write_record, LogError};
pub use pipeline::{
    filter_library_records, partition_by_thread, records_without_caller, scope, segment,
    split_library_records, Segmentation,
};

/// Call-stack information attached to a record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallStackInfo {
    /// The deepest frames of the app stack, caller first, callee (the API's caller) last.
    pub p: Vec<ApiSignature>,
    /// Total number of frames on the runtime stack.
    pub d: u32,
}

impl CallStackInfo {
    /// Innermost frame: the method that invoked the logged API.
    pub fn deepest(&self) -> Option<&ApiSignature> {
        self.p.last()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Special {
    None,
    Reflective { target: ApiSignature },
    Icc {
        origin_component: String,
        target_component: String,
    },
}

/// What was invoked and with which arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Des {
    pub signature: ApiSignature,
    pub args: Vec<String>,
    pub special: Special,
}

impl Des {
    pub fn plain(signature: ApiSignature) -> Self {
        Self {
            signature,
            args: Vec::new(),
            special: Special::None,
        }
    }

    /// Signature the special mechanism resolved to, used as memo key for updates.
    pub fn target_key(&self) -> Option<ApiSignature> {
        match &self.special {
            Special::None => None,
            Special::Reflective { target } => Some(target.clone()),
            Special::Icc {
                target_component, ..
            } => ApiSignature::new(target_component, "<icc>", "()").ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LogRecord {
    pub seq: u64,
    pub pid: u32,
    pub tid: u32,
    pub des: Des,
    pub csi: CallStackInfo,
}

/// Temporally ordered records plus the window size they were recorded with.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LogSequence {
    pub records: Vec<LogRecord>,
    pub k: usize,
}

impl LogSequence {
    pub fn new(records: Vec<LogRecord>, k: usize) -> Self {
        Self { records, k }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn with_records(&self, records: Vec<LogRecord>) -> Self {
        Self { records, k: self.k }
    }
}

/// A callback record and the non-callback records that follow it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogSegment {
    pub callback: LogRecord,
    pub body: Vec<LogRecord>,
}

impl LogSegment {
    /// Callback first, then the body.
    pub fn records(&self) -> impl Iterator<Item = &LogRecord> {
        std::iter::once(&self.callback).chain(self.body.iter())
    }

    /// Record at segment position `i` (0 is the callback).
    pub fn get(&self, i: usize) -> Option<&LogRecord> {
        if i == 0 {
            Some(&self.callback)
        } else {
            self.body.get(i - 1)
        }
    }

    /// Number of records including the callback.
    pub fn len(&self) -> usize {
        self.body.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}
