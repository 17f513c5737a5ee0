//! Canonical text encoding shared by scenario documents, traces and reports.
//!
//! Documents are JSON. Keys are emitted in struct declaration order, maps are
//! ordered (`BTreeMap`), and every floating-point value is printed with exactly
//! six fractional digits. Nesting up to `pretty_depth` is indented; anything
//! deeper is written inline so that waypoint lists and actor states stay one
//! record per line.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

/// Number of fractional digits used for every float.
pub const FLOAT_DIGITS: usize = 6;

/// Format a float the canonical way. Negative zero collapses to zero.
pub fn format_f64(value: f64) -> String {
    let s = format!("{:.*}", FLOAT_DIGITS, value);
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Round a float to the canonical precision (what a print/parse pass yields).
pub fn quantize(value: f64) -> f64 {
    format_f64(value).parse().unwrap_or(value)
}

#[derive(Debug, Clone)]
pub struct CanonicalFormatter {
    depth: usize,
    pretty_depth: usize,
    has_value: bool,
}

impl CanonicalFormatter {
    pub fn new(pretty_depth: usize) -> Self {
        Self {
            depth: 0,
            pretty_depth,
            has_value: false,
        }
    }

    fn pretty(&self) -> bool {
        self.depth <= self.pretty_depth
    }

    fn indent<W: ?Sized + io::Write>(&self, w: &mut W) -> io::Result<()> {
        for _ in 0..self.depth {
            w.write_all(b"  ")?;
        }
        Ok(())
    }

    fn open<W: ?Sized + io::Write>(&mut self, w: &mut W, tok: &[u8]) -> io::Result<()> {
        self.depth += 1;
        self.has_value = false;
        w.write_all(tok)
    }

    fn close<W: ?Sized + io::Write>(&mut self, w: &mut W, tok: &[u8]) -> io::Result<()> {
        let was_pretty = self.pretty();
        self.depth -= 1;
        if was_pretty && self.has_value {
            w.write_all(b"\n")?;
            self.indent(w)?;
        }
        w.write_all(tok)
    }

    fn item<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if self.pretty() {
            w.write_all(if first { b"\n" } else { b",\n" })?;
            self.indent(w)
        } else if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }
}

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.open(w, b"[")
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.close(w, b"]")
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.item(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.open(w, b"{")
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.close(w, b"}")
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.item(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}

/// Serialize `value` canonically; objects nested deeper than `pretty_depth`
/// are written on a single line.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T, pretty_depth: usize) -> String {
    let mut buf = Vec::with_capacity(4096);
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter::new(pretty_depth));
    // Serialization into a Vec cannot fail for the plain data types used here.
    value
        .serialize(&mut ser)
        .expect("canonical serialization of plain data");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[derive(Serialize)]
    struct Pt {
        x: f64,
        y: f64,
    }

    #[test]
    fn six_digits() {
        assert_eq!(format_f64(1.0 / 3.0), "0.333333");
        assert_eq!(format_f64(2.0), "2.000000");
        assert_eq!(format_f64(-0.0), "0.000000");
        assert_eq!(format_f64(-1e-9), "0.000000");
        assert_eq!(format_f64(-1.5), "-1.500000");
    }

    #[test]
    fn depth_limited_layout() {
        let mut m = BTreeMap::new();
        m.insert("pts", vec![Pt { x: 1.0, y: 0.5 }, Pt { x: 2.0, y: 1.0 / 3.0 }]);
        let s = to_canonical_string(&m, 2);
        assert_eq!(
            s,
            "{\n  \"pts\": [\n    {\"x\": 1.000000, \"y\": 0.500000},\n    {\"x\": 2.000000, \"y\": 0.333333}\n  ]\n}\n"
        );
        let empty: Vec<Pt> = vec![];
        assert_eq!(to_canonical_string(&empty, 3), "[]\n");
    }

    #[test]
    fn quantize_is_idempotent() {
        for v in [0.1234567, -3.9999995, 1e6 + 0.0000004, 7.0] {
            let q = quantize(v);
            assert_eq!(quantize(q), q);
            assert_eq!(format_f64(q), format_f64(v));
        }
    }
}
