//! Deterministic serialization: floats are written with 17 significant digits.

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use std::io::{self, Write};

/// Pretty JSON with every `f64` as `{:.16e}`; non-finite values become `null`.
struct FixedFloats<'a>(PrettyFormatter<'a>);

impl Formatter for FixedFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        a: f64,
        b: Vec<f64>,
        c: Option<f64>,
        n: usize,
    }

    #[test]
    fn floats_have_seventeen_digits_and_round_trip() {
        let s = Sample { a: 0.1, b: vec![6.0 * std::f64::consts::PI / 5.0, -1e-300], c: None, n: 3 };
        let text = to_json(&s);
        assert!(text.contains("1.0000000000000001e-1"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64().unwrap(), 0.1);
        assert_eq!(back["b"][0].as_f64().unwrap(), 6.0 * std::f64::consts::PI / 5.0);
        assert_eq!(back["b"][1].as_f64().unwrap(), -1e-300);
        assert!(back["c"].is_null());
        assert_eq!(back["n"].as_u64().unwrap(), 3);
    }

    #[test]
    fn non_finite_is_null() {
        let text = to_json(&vec![f64::NAN, f64::INFINITY]);
        let back: Vec<Option<f64>> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![None, None]);
    }
}
