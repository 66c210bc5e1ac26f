//! Normality and isomorphism report for two saved parameter vectors.

use std::path::Path;

use hypernet::analysis::{are_isomorphic, detect_clones, is_minimal, IsoOptions, Line};
use hypernet::nets::{MlpSpec, ParamVector};
use serde_json::{json, Value};

use crate::{ExperimentError, Result};

pub fn load_params(path: &Path, spec: &MlpSpec) -> Result<ParamVector> {
    let bytes = std::fs::read(path)
        .map_err(|e| ExperimentError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let values = ParamVector::from_bytes(&bytes).map_err(|kind| hypernet::Error::Format {
        path: path.to_path_buf(),
        kind,
    })?;
    Ok(ParamVector::new(spec, values)?)
}

fn normality(spec: &MlpSpec, p: &ParamVector, tol: f64) -> Value {
    let zero_line = is_minimal(spec, p, tol).err().map(|z| {
        json!({
            "layer": z.layer,
            "line": match z.line { Line::Row => "row", Line::Column => "column" },
            "index": z.index,
        })
    });
    let clones: Vec<Value> = detect_clones(spec, p, tol)
        .iter()
        .map(|c| json!({"layer": c.layer, "first": c.first, "second": c.second}))
        .collect();
    json!({
        "minimal": zero_line.is_none(),
        "zero_line": zero_line,
        "clones": clones,
        "normal": zero_line.is_none() && clones.is_empty(),
    })
}

/// JSON with a normality report per network and the isomorphism verdict,
/// including the hidden-layer permutations when one exists.
pub fn analyze(spec: &MlpSpec, a: &ParamVector, b: &ParamVector, opts: &IsoOptions) -> Result<Value> {
    let iso = are_isomorphic(spec, a, b, opts)?;
    Ok(json!({
        "widths": spec.widths(),
        "activation": spec.activation().name(),
        "tolerance": opts.tol,
        "a": normality(spec, a, opts.tol),
        "b": normality(spec, b, opts.tol),
        "isomorphic": iso.is_some(),
        "permutations": iso.map(|i| i.perms().to_vec()),
    }))
}
