//! Unit-suffixed quantities for the config file boundary.
//!
//! Everything inside the crate is SI (bits, seconds, watts, meters, hertz).
//! Config values may be given either as bare numbers (already SI) or as
//! strings with an explicit unit suffix, e.g. `"-80 dBm"`, `"2.4 GHz"`,
//! `"8.065 Mb"`.

use serde::de::{self, Deserializer, Visitor};
use std::fmt;

/// Physical dimension a quantity string is parsed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Speed,
    Time,
    Frequency,
    Power,
    Bits,
    Dimensionless,
}

impl Dimension {
    fn scale(self, unit: &str) -> Option<Scale> {
        use Scale::*;
        let s = match (self, unit) {
            (Dimension::Length, "m") => Linear(1.0),
            (Dimension::Length, "km") => Linear(1e3),
            (Dimension::Speed, "m/s") => Linear(1.0),
            (Dimension::Speed, "km/h") => Linear(1.0 / 3.6),
            (Dimension::Time, "s") => Linear(1.0),
            (Dimension::Time, "ms") => Linear(1e-3),
            (Dimension::Frequency, "Hz") => Linear(1.0),
            (Dimension::Frequency, "kHz") => Linear(1e3),
            (Dimension::Frequency, "MHz") => Linear(1e6),
            (Dimension::Frequency, "GHz") => Linear(1e9),
            (Dimension::Power, "W") => Linear(1.0),
            (Dimension::Power, "mW") => Linear(1e-3),
            (Dimension::Power, "dBW") => Decibel(1.0),
            (Dimension::Power, "dBm") => Decibel(1e-3),
            (Dimension::Bits, "b") | (Dimension::Bits, "bit") => Linear(1.0),
            (Dimension::Bits, "kb") => Linear(1e3),
            (Dimension::Bits, "Mb") => Linear(1e6),
            (Dimension::Bits, "Gb") => Linear(1e9),
            (Dimension::Dimensionless, "dB") => Decibel(1.0),
            _ => return None,
        };
        Some(s)
    }
}

enum Scale {
    Linear(f64),
    Decibel(f64),
}

/// Parses `"<number> [unit]"` into SI.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_whitespace() || (c.is_ascii_alphabetic() && c != 'e' && c != 'E'))
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number in {text:?}"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    match dim.scale(unit) {
        Some(Scale::Linear(f)) => Ok(value * f),
        Some(Scale::Decibel(reference)) => Ok(reference * 10f64.powf(value / 10.0)),
        None => Err(format!("unit {unit:?} is not valid for a {dim:?} quantity")),
    }
}

/// Formats a power in dBm for reports.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

struct QuantityVisitor(Dimension);

impl Visitor<'_> for QuantityVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "a number or a {:?} quantity string", self.0)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        parse_quantity(v, self.0).map_err(E::custom)
    }
}

macro_rules! quantity_fn {
    ($name:ident, $dim:expr) => {
        pub fn $name<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
            d.deserialize_any(QuantityVisitor($dim))
        }
    };
}

/// `deserialize_with` adapters, one per dimension.
pub mod de_quantity {
    use super::*;
    quantity_fn!(length, Dimension::Length);
    quantity_fn!(speed, Dimension::Speed);
    quantity_fn!(time, Dimension::Time);
    quantity_fn!(frequency, Dimension::Frequency);
    quantity_fn!(power, Dimension::Power);
    quantity_fn!(bits, Dimension::Bits);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_suffixed_values() {
        assert_eq!(parse_quantity("2.4 GHz", Dimension::Frequency).unwrap(), 2.4e9);
        assert_eq!(parse_quantity("20MHz", Dimension::Frequency).unwrap(), 20e6);
        assert!((parse_quantity("8.065 Mb", Dimension::Bits).unwrap() - 8.065e6).abs() < 1e-6);
        assert_eq!(parse_quantity("150", Dimension::Length).unwrap(), 150.0);
        assert_eq!(parse_quantity("1e-11 W", Dimension::Power).unwrap(), 1e-11);
    }

    #[test]
    fn decibel_units() {
        let noise = parse_quantity("-80 dBm", Dimension::Power).unwrap();
        assert!((noise - 1e-11).abs() < 1e-24);
        let p = parse_quantity("30 dBm", Dimension::Power).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!((watts_to_dbm(p) - 30.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_wrong_dimension() {
        assert!(parse_quantity("3 GHz", Dimension::Power).is_err());
        assert!(parse_quantity("abc W", Dimension::Power).is_err());
    }
}
