//! Report serialization. Every float is written with 17 significant digits so
//! that reports are byte-reproducible and round-trip exactly.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

/// Version tag written into every JSON report.
pub const SCHEMA_VERSION: &str = "1";

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with 17-significant-digit floats (non-finite floats become `null`).
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
    value
        .serialize(&mut ser)
        .expect("report types serialize infallibly");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Joins a header and rows into CSV text.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        a: f64,
        b: Vec<f64>,
        n: u32,
    }

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&Sample {
            a: 0.1,
            b: vec![1.0, -2.5e-300, f64::NAN],
            n: 3,
        });
        assert_eq!(
            s,
            r#"{"a":1.0000000000000001e-1,"b":[1.0000000000000000e0,-2.5000000000000000e-300,null],"n":3}"#
        );
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"].as_f64().unwrap(), 0.1);
    }

    #[test]
    fn csv_layout() {
        let t = csv_table(&["x", "y"], &[vec!["1".into(), "2".into()]]);
        assert_eq!(t, "x,y\n1,2\n");
    }
}
