//! Kernel text format: a JSON document `{"d": .., "N": .., "entries": [[i₁,…,i_d, value], …]}`
//! with one record per line in canonical order.

use super::SymmetricKernel;
use crate::error::{Error, Result};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::Path;

fn float_text(v: f64) -> String {
    // serde_json prints the shortest representation that round-trips.
    serde_json::to_string(&v).expect("finite coefficient")
}

pub fn write_kernel(f: &SymmetricKernel) -> String {
    let mut out = String::new();
    let _ = write!(out, "{{\n  \"d\": {},\n  \"N\": {},\n  \"entries\": [", f.order(), f.dim());
    for (k, (t, v)) in f.entries().enumerate() {
        out.push_str(if k == 0 { "\n    [" } else { ",\n    [" });
        for i in t {
            let _ = write!(out, "{i}, ");
        }
        out.push_str(&float_text(v));
        out.push(']');
    }
    if f.nnz() > 0 {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    out
}

pub fn read_kernel(text: &str) -> Result<SymmetricKernel> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let field = |name: &str| {
        doc.get(name)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| Error::Parse(format!("missing or non-integer field `{name}`")))
    };
    let d = field("d")?;
    let n = field("N")?;
    let records = doc
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("missing array field `entries`".into()))?;
    let mut entries = Vec::with_capacity(records.len());
    for rec in records {
        let rec = rec
            .as_array()
            .filter(|r| r.len() == d + 1)
            .ok_or_else(|| Error::Parse(format!("record {rec} does not have d+1 fields")))?;
        let tuple = rec[..d]
            .iter()
            .map(|x| x.as_u64().map(|i| i as usize))
            .collect::<Option<Vec<usize>>>()
            .ok_or_else(|| Error::Parse("indices must be non-negative integers".into()))?;
        let value = rec[d]
            .as_f64()
            .ok_or_else(|| Error::Parse("coefficient must be a number".into()))?;
        entries.push((tuple, value));
    }
    SymmetricKernel::new(d, n, entries)
}

pub fn write_kernel_file(f: &SymmetricKernel, path: &Path) -> Result<()> {
    std::fs::write(path, write_kernel(f))?;
    Ok(())
}

pub fn read_kernel_file(path: &Path) -> Result<SymmetricKernel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_kernel(&text)
}
