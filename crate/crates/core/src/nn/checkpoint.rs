//! Plain-text tensor dump.
//!
//! ```text
//! cscad-tensors v1
//! meta <one line of free text>
//! tensor <name> <rows> <cols>
//! <row-major values, one matrix row per line>
//! buffer <name> <rows> <cols>
//! ...
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so a
//! dump and reload is bit-exact for every non-NaN value.

use std::fmt::Write as _;

use ndarray::Array2;

use super::params::ParamStore;
use crate::error::{Error, Result};

const MAGIC: &str = "cscad-tensors v1";

pub fn to_text(store: &ParamStore, meta: Option<&str>) -> String {
    let mut out = String::from(MAGIC);
    out.push('\n');
    if let Some(meta) = meta {
        assert!(!meta.contains('\n'), "checkpoint metadata must be one line");
        let _ = writeln!(out, "meta {meta}");
    }
    for id in store.ids() {
        let v = store.get(id);
        let kind = if store.is_trainable(id) { "tensor" } else { "buffer" };
        let _ = writeln!(out, "{kind} {} {} {}", store.name(id), v.nrows(), v.ncols());
        for row in v.rows() {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: Option<String>,
    pub tensors: Vec<(String, bool, Array2<f64>)>,
}

pub fn parse(text: &str) -> Result<Checkpoint> {
    let bad = |msg: String| Error::Checkpoint(msg);
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad(format!("missing `{MAGIC}` header")));
    }
    let mut meta = None;
    let mut tensors = Vec::new();
    while let Some(line) = lines.next() {
        if line.is_empty() {
            continue;
        }
        if let Some(m) = line.strip_prefix("meta ") {
            meta = Some(m.to_string());
            continue;
        }
        let parts: Vec<&str> = line.split(' ').collect();
        let trainable = match parts.first() {
            Some(&"tensor") => true,
            Some(&"buffer") => false,
            _ => return Err(bad(format!("unexpected line `{line}`"))),
        };
        let [_, name, rows, cols] = parts[..] else {
            return Err(bad(format!("malformed header `{line}`")));
        };
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| bad(format!("bad dimension in `{line}`")))
        };
        let (rows, cols) = (parse_dim(rows)?, parse_dim(cols)?);
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let row = lines.next().ok_or_else(|| bad(format!("{name}: missing row {r}")))?;
            let before = data.len();
            for tok in row.split(' ').filter(|t| !t.is_empty()) {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|_| bad(format!("{name}: bad value `{tok}`")))?,
                );
            }
            if data.len() - before != cols {
                return Err(bad(format!(
                    "{name}: row {r} has {} values, expected {cols}",
                    data.len() - before
                )));
            }
        }
        let value = Array2::from_shape_vec((rows, cols), data).expect("sizes checked");
        tensors.push((name.to_string(), trainable, value));
    }
    Ok(Checkpoint { meta, tensors })
}

/// Overwrites every entry of `store` from `text`. Names, kinds and shapes
/// must match exactly.
pub fn load_into(store: &mut ParamStore, text: &str) -> Result<Option<String>> {
    let ck = parse(text)?;
    if ck.tensors.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} tensors, model has {}",
            ck.tensors.len(),
            store.len()
        )));
    }
    let mut staged = store.clone();
    for (name, trainable, value) in ck.tensors {
        let id = staged
            .find(&name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown tensor {name}")))?;
        if staged.is_trainable(id) != trainable || staged.get(id).dim() != value.dim() {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: expected {:?}, found {:?}",
                staged.get(id).dim(),
                value.dim()
            )));
        }
        *staged.get_mut(id) = value;
    }
    *store = staged;
    Ok(ck.meta)
}
