//! Deterministic report serialization.
//!
//! Reports are emitted as JSON with floating-point values written at a fixed
//! 17-significant-digit precision, so that two runs with identical inputs
//! produce byte-identical files. Keys keep insertion order; nothing here
//! depends on hash-map iteration.

use std::fmt::Write as _;

/// Format a float with 17 significant digits (scientific notation).
///
/// This is the full precision of an IEEE 754 double: parsing the string back
/// recovers the exact bit pattern.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "null".to_owned();
    }
    if x.is_infinite() {
        // JSON has no infinities; large sentinels keep reports parseable.
        return if x > 0.0 {
            "1e999".to_owned()
        } else {
            "-1e999".to_owned()
        };
    }
    format!("{:.16e}", x)
}

/// Minimal JSON document model with deterministic serialization.
#[derive(Debug, Clone)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn object() -> Json {
        Json::Object(Vec::new())
    }

    /// Append a key/value pair; only valid on `Object`.
    pub fn push(&mut self, key: &str, value: Json) -> &mut Self {
        match self {
            Json::Object(fields) => fields.push((key.to_owned(), value)),
            _ => panic!("push on non-object JSON value"),
        }
        self
    }

    /// Serialized with a trailing newline, ready to be written to disk.
    pub fn to_file_string(&self) -> String {
        let mut out = self.to_string();
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => {
                let _ = write!(out, "{}", i);
            }
            Json::UInt(u) => {
                let _ = write!(out, "{}", u);
            }
            Json::Float(x) => out.push_str(&fmt_float(*x)),
            Json::Str(s) => write_escaped(s, out),
            Json::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write(out);
                }
                out.push(']');
            }
            Json::Object(fields) => {
                out.push('{');
                for (i, (key, value)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_escaped(key, out);
                    out.push(':');
                    value.write(out);
                }
                out.push('}');
            }
        }
    }
}

impl std::fmt::Display for Json {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        self.write(&mut out);
        f.write_str(&out)
    }
}

impl From<f64> for Json {
    fn from(x: f64) -> Json {
        Json::Float(x)
    }
}

impl From<bool> for Json {
    fn from(b: bool) -> Json {
        Json::Bool(b)
    }
}

impl From<usize> for Json {
    fn from(n: usize) -> Json {
        Json::UInt(n as u64)
    }
}

impl From<u64> for Json {
    fn from(n: u64) -> Json {
        Json::UInt(n)
    }
}

impl From<&str> for Json {
    fn from(s: &str) -> Json {
        Json::Str(s.to_owned())
    }
}

fn write_escaped(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[0.8, 1.0 / 3.0, -2.5e-17, 6.02e23, 0.0] {
            let s = fmt_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{} -> {}", x, s);
        }
    }

    #[test]
    fn object_serialization_is_ordered() {
        let mut doc = Json::object();
        doc.push("b", Json::Int(2));
        doc.push("a", Json::from(true));
        doc.push("s", Json::from("x\"y"));
        assert_eq!(doc.to_string(), r#"{"b":2,"a":true,"s":"x\"y"}"#);
    }

    #[test]
    fn identical_documents_serialize_identically() {
        let build = || {
            let mut doc = Json::object();
            doc.push("value", Json::Float(0.1 + 0.2));
            doc.push("list", Json::Array(vec![Json::Float(1.5), Json::Null]));
            doc.to_file_string()
        };
        assert_eq!(build(), build());
    }
}
