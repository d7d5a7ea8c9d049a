//! Deterministic manifest (de)serialization.
//!
//! Output is pretty-printed JSON with sorted keys and every float written with
//! exactly three decimals, so `write → parse → write` is byte-stable.

use super::{DatasetManifest, ManifestError};
use crate::raster::write_atomic;
use serde_json::Value;
use std::fmt::Write as _;
use std::path::Path;

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest_str(&text, &path.display().to_string())
}

pub fn parse_manifest_str(text: &str, label: &str) -> Result<DatasetManifest, ManifestError> {
    let mut manifest: DatasetManifest =
        serde_json::from_str(text).map_err(|e| ManifestError::Syntax {
            path: label.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    manifest.validate()?;
    manifest.canonicalize();
    Ok(manifest)
}

pub fn write_manifest(
    manifest: &DatasetManifest,
    path: impl AsRef<Path>,
) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let text = format_manifest(manifest)?;
    write_atomic(path, text.as_bytes()).map_err(|e| match e {
        crate::raster::ImageError::Io { path, source } => ManifestError::Io { path, source },
        other => ManifestError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(other.to_string()),
        },
    })
}

/// Canonical text form of a manifest.
pub fn format_manifest(manifest: &DatasetManifest) -> Result<String, ManifestError> {
    manifest.validate()?;
    let mut canonical = manifest.clone();
    canonical.canonicalize();
    let value = serde_json::to_value(&canonical).expect("manifest types serialize");
    let mut out = String::new();
    emit(&value, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn emit(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().expect("f64 number");
                let text = format!("{f:.3}");
                // no "-0.000"
                if text.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
                    out.push_str("0.000");
                } else {
                    out.push_str(&text);
                }
            } else {
                write!(out, "{n}").unwrap();
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(is_scalar) {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    emit(item, indent, out);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    pad(indent + 1, out);
                    emit(item, indent + 1, out);
                    if i + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                pad(indent, out);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
            } else if map.values().all(is_scalar) && map.len() <= 4 {
                out.push('{');
                for (i, (k, item)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&serde_json::to_string(k).expect("key"));
                    out.push_str(": ");
                    emit(item, indent, out);
                }
                out.push('}');
            } else {
                out.push_str("{\n");
                for (i, (k, item)) in map.iter().enumerate() {
                    pad(indent + 1, out);
                    out.push_str(&serde_json::to_string(k).expect("key"));
                    out.push_str(": ");
                    emit(item, indent + 1, out);
                    if i + 1 < map.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                pad(indent, out);
                out.push('}');
            }
        }
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}
