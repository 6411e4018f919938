//! Quantities with explicit unit suffixes: durations ("250us", "1.5ms",
//! "2s") and byte counts ("1500B", "10kB", "4KiB", "1MB").

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::SimTime;

const DURATION_UNITS: [(&str, u128); 4] = [("us", 1), ("µs", 1), ("ms", 1_000), ("s", 1_000_000)];

const BYTE_UNITS: [(&str, u128); 8] = [
    ("B", 1),
    ("kB", 1_000),
    ("KB", 1_000),
    ("KiB", 1_024),
    ("MB", 1_000_000),
    ("MiB", 1_048_576),
    ("GB", 1_000_000_000),
    ("GiB", 1_073_741_824),
];

/// Parses `<decimal><unit>` exactly. The result must be a whole number of
/// base units.
fn parse_quantity(text: &str, units: &[(&str, u128)], what: &str) -> Result<u64, String> {
    let s = text.trim();
    let split = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .ok_or_else(|| format!("{what} {text:?} has no unit (expected one of {})", unit_list(units)))?;
    let (num, unit) = s.split_at(split);
    let unit = unit.trim();
    let mult = units
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|&(_, m)| m)
        .ok_or_else(|| format!("unknown unit {unit:?} in {what} {text:?} (expected one of {})", unit_list(units)))?;
    let (int, frac) = num.split_once('.').unwrap_or((num, ""));
    if int.is_empty() || frac.contains('.') {
        return Err(format!("malformed number in {what} {text:?}"));
    }
    let digits = |d: &str| -> Result<u128, String> {
        if d.is_empty() {
            return Ok(0);
        }
        d.parse::<u128>().map_err(|_| format!("malformed number in {what} {text:?}"))
    };
    let scale = 10u128
        .checked_pow(frac.len() as u32)
        .ok_or_else(|| format!("too many decimals in {what} {text:?}"))?;
    let (int, frac) = (digits(int)?, digits(frac)?);
    let scaled = int
        .checked_mul(scale)
        .and_then(|v| v.checked_add(frac))
        .and_then(|v| v.checked_mul(mult))
        .ok_or_else(|| format!("{what} {text:?} is too large"))?;
    if scaled % scale != 0 {
        return Err(format!("{what} {text:?} is not a whole number of {}", units[0].0));
    }
    u64::try_from(scaled / scale).map_err(|_| format!("{what} {text:?} is too large"))
}

fn unit_list(units: &[(&str, u128)]) -> String {
    units.iter().map(|(u, _)| *u).collect::<Vec<_>>().join(", ")
}

pub fn parse_duration(text: &str) -> Result<SimTime, String> {
    parse_quantity(text, &DURATION_UNITS, "duration").map(SimTime)
}

pub fn parse_bytes(text: &str) -> Result<u64, String> {
    parse_quantity(text, &BYTE_UNITS, "size")
}

/// Largest unit that divides evenly.
pub fn format_duration(t: SimTime) -> String {
    match t.0 {
        0 => "0us".into(),
        us if us % 1_000_000 == 0 => format!("{}s", us / 1_000_000),
        us if us % 1_000 == 0 => format!("{}ms", us / 1_000),
        us => format!("{us}us"),
    }
}

pub fn format_bytes(b: u64) -> String {
    match b {
        0 => "0B".into(),
        b if b % 1_000_000 == 0 => format!("{}MB", b / 1_000_000),
        b if b % 1_000 == 0 => format!("{}kB", b / 1_000),
        b => format!("{b}B"),
    }
}

/// A duration field in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Duration(pub SimTime);

/// A byte-count field in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bytes(pub u64);

impl Serialize for Duration {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_duration(self.0))
    }
}

impl Serialize for Bytes {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_bytes(self.0))
    }
}

struct UnitVisitor<T> {
    expecting: &'static str,
    parse: fn(&str) -> Result<T, String>,
}

impl<T> Visitor<'_> for UnitVisitor<T> {
    type Value = T;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.expecting)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<T, E> {
        (self.parse)(v).map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Duration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_str(UnitVisitor {
            expecting: "a duration string such as \"100us\", \"2ms\" or \"1s\"",
            parse: parse_duration,
        })
        .map(Duration)
    }
}

impl<'de> Deserialize<'de> for Bytes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_str(UnitVisitor {
            expecting: "a size string such as \"1500B\", \"10kB\" or \"1MB\"",
            parse: parse_bytes,
        })
        .map(Bytes)
    }
}
