//! Fixed-precision text output shared by every exporter.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

/// 17 significant digits, scientific notation; round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Compact JSON formatter that prints floats with 17 significant digits so
/// identical inputs give byte-identical documents.
#[derive(Debug, Default, Clone, Copy)]
pub struct Fixed17;

impl Formatter for Fixed17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [std::f64::consts::PI, -1.0e-300, 0.1 + 0.2, 123456789.0] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn json_uses_fixed_format_and_nulls_non_finite() {
        let v = serde_json::json!({"a": 0.5, "b": f64::NAN});
        let text = to_json_string(&v).unwrap();
        assert_eq!(text, r#"{"a":5.0000000000000000e-1,"b":null}"#);
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.5));
    }
}
