use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Specification number in canonical `NN.NNN` form, e.g. `38.214`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpecId {
    series: String,
    number: String,
}

fn spec_id_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^(?:T[SR]\s*)?(\d{2})\.?(\d{3})$").unwrap())
}

impl SpecId {
    /// Accepts `38.214`, `38214`, `TS 38.214` and `TS38.214`.
    pub fn parse(raw: &str) -> Result<Self> {
        let caps = spec_id_re()
            .captures(raw.trim())
            .ok_or_else(|| Error::Parse(format!("not a spec id: {raw:?}")))?;
        Ok(SpecId { series: caps[1].to_string(), number: caps[2].to_string() })
    }

    pub fn series(&self) -> &str {
        &self.series
    }

    pub fn number(&self) -> &str {
        &self.number
    }

    /// Compact form used in archive file names, e.g. `38214`.
    pub fn compact(&self) -> String {
        format!("{}{}", self.series, self.number)
    }
}

impl fmt::Display for SpecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.series, self.number)
    }
}

impl FromStr for SpecId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SpecId::parse(s)
    }
}

/// One dot-separated component of a clause number.
///
/// The derived ordering puts every numeric segment before every annex letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    Num(u32),
    Letter(char),
}

/// Clause number such as `7.4.1.1.2` or annex clause `A.3`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClauseId(Vec<Segment>);

impl ClauseId {
    /// Synthetic clause holding text that precedes the first heading.
    pub fn prologue() -> Self {
        ClauseId(vec![Segment::Num(0)])
    }

    pub fn parse(raw: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("not a clause id: {raw:?}"));
        if raw.is_empty() {
            return Err(bad());
        }
        let mut segments = Vec::new();
        for part in raw.split('.') {
            let seg = if !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit()) {
                Segment::Num(part.parse().map_err(|_| bad())?)
            } else {
                let mut chars = part.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii_uppercase() => Segment::Letter(c),
                    _ => return Err(bad()),
                }
            };
            segments.push(seg);
        }
        Ok(ClauseId(segments))
    }

    pub fn segments(&self) -> &[Segment] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_annex(&self) -> bool {
        matches!(self.0.first(), Some(Segment::Letter(_)))
    }
}

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            match seg {
                Segment::Num(n) => write!(f, "{n}")?,
                Segment::Letter(c) => write!(f, "{c}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for ClauseId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ClauseId::parse(s)
    }
}

/// Release, minor and patch components of a version, without a date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VersionNumber {
    pub major: u32,
    pub minor: u32,
    pub patch: u32,
}

impl VersionNumber {
    pub fn new(major: u32, minor: u32, patch: u32) -> Self {
        VersionNumber { major, minor, patch }
    }

    /// Parses `MAJ.MIN.PATCH`.
    pub fn parse(raw: &str) -> Result<Self> {
        let parts: Vec<&str> = raw.trim().split('.').collect();
        let bad = || Error::Parse(format!("not a version number: {raw:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n = |s: &str| s.parse::<u32>().map_err(|_| bad());
        Ok(VersionNumber::new(n(parts[0])?, n(parts[1])?, n(parts[2])?))
    }
}

impl fmt::Display for VersionNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

const BASE36: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// Decodes a three-character archive version tag (`h40` is 17.4.0).
pub fn decode_version(tag: &str) -> Result<VersionNumber> {
    if tag.chars().count() != 3 {
        return Err(Error::Parse(format!("version tag {tag:?} must be 3 characters")));
    }
    let mut digits = [0u32; 3];
    for (slot, c) in digits.iter_mut().zip(tag.chars()) {
        *slot = c
            .to_digit(36)
            .filter(|_| !c.is_ascii_uppercase())
            .ok_or_else(|| Error::Parse(format!("invalid character {c:?} in version tag {tag:?}")))?;
    }
    Ok(VersionNumber::new(digits[0], digits[1], digits[2]))
}

/// Inverse of [`decode_version`]; `None` if a component does not fit one base-36 digit.
pub fn encode_version(v: VersionNumber) -> Option<String> {
    [v.major, v.minor, v.patch]
        .iter()
        .map(|&d| BASE36.get(d as usize).map(|&b| b as char))
        .collect()
}

/// A dated version of one specification.
///
/// Ordered by date, with ties broken by version number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpecVersion {
    pub number: VersionNumber,
    pub date: NaiveDate,
}

impl SpecVersion {
    pub fn new(number: VersionNumber, date: NaiveDate) -> Self {
        SpecVersion { number, date }
    }
}

impl Ord for SpecVersion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.date.cmp(&other.date).then(self.number.cmp(&other.number))
    }
}

impl PartialOrd for SpecVersion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SpecVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.number, self.date)
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                <$ty>::parse(&raw).map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(SpecId);
string_serde!(ClauseId);
string_serde!(VersionNumber);
