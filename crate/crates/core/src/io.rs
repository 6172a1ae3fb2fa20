//! Instance and solution file formats.
//!
//! Files are JSON with a versioned format tag. Serialization is bit-exact
//! reproducible: struct fields keep declaration order, maps are ordered, and
//! floats are written with 17 significant digits so values round-trip
//! losslessly.

use crate::model::{validate_instance, Instance, Solution, Violation};
use serde::Serialize;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    /// Malformed JSON or a schema mismatch; the message carries the path and
    /// line/column context.
    #[error("parse error at {path}: {source}")]
    Schema {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    /// Structurally valid file describing an invalid instance.
    #[error("instance is not valid:\n{}", render(.0))]
    Invalid(Vec<Violation>),
}

fn render(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn from_slice<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ParseError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| ParseError::Schema {
        path: e.path().to_string(),
        source: e.into_inner(),
    })
}

/// Parses and validates an instance file.
pub fn parse_instance(bytes: &[u8]) -> Result<Instance, ParseError> {
    let instance: Instance = from_slice(bytes)?;
    let violations = validate_instance(&instance);
    if !violations.is_empty() {
        return Err(ParseError::Invalid(violations));
    }
    Ok(instance)
}

/// Serializes an instance deterministically.
pub fn serialize_instance(instance: &Instance) -> Vec<u8> {
    to_json_bytes(instance)
}

/// Parses a solution file (no feasibility checking; see `check_solution`).
pub fn parse_solution(bytes: &[u8]) -> Result<Solution, ParseError> {
    from_slice(bytes)
}

/// Serializes a solution deterministically.
pub fn serialize_solution(solution: &Solution) -> Vec<u8> {
    to_json_bytes(solution)
}

/// Writes any serializable value as pretty JSON with 17-significant-digit
/// floats and a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits::new());
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization cannot fail");
    out.push(b'\n');
    out
}

/// Pretty-printing JSON formatter that writes every float with 17 significant
/// digits (`{:.16e}`), enough for exact f64 round-trips.
struct SigDigits {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl SigDigits {
    fn new() -> Self {
        SigDigits {
            inner: serde_json::ser::PrettyFormatter::new(),
        }
    }
}

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{value:.7e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}
