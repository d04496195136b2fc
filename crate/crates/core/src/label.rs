use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Health state part of a class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FaultCode {
    /// Rolling element (ball) fault.
    B,
    /// Inner race fault.
    IR,
    /// Outer race fault.
    OR,
    Normal,
}

impl FaultCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultCode::B => "B",
            FaultCode::IR => "IR",
            FaultCode::OR => "OR",
            FaultCode::Normal => "Normal",
        }
    }
}

/// Alphanumeric class label such as `IR3`, `B007` or `Normal`.
///
/// The severity part is the amplitude level for simulated data and the
/// fault diameter (in mils) for experimental records.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassLabel {
    pub fault: FaultCode,
    pub severity: String,
}

impl ClassLabel {
    pub fn new(fault: FaultCode, severity: impl Into<String>) -> Result<Self> {
        let severity = severity.into();
        if !severity.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(Error::InvalidArgument(format!(
                "severity code {severity:?} must be alphanumeric"
            )));
        }
        if fault != FaultCode::Normal && severity.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} label needs a severity code",
                fault.as_str()
            )));
        }
        Ok(ClassLabel { fault, severity })
    }

    pub fn normal() -> Self {
        ClassLabel {
            fault: FaultCode::Normal,
            severity: String::new(),
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.fault.as_str(), self.severity)
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        // "Normal" must be checked before the single-letter prefixes.
        let (fault, rest) = if let Some(rest) = s.strip_prefix("Normal") {
            (FaultCode::Normal, rest)
        } else if let Some(rest) = s.strip_prefix("IR") {
            (FaultCode::IR, rest)
        } else if let Some(rest) = s.strip_prefix("OR") {
            (FaultCode::OR, rest)
        } else if let Some(rest) = s.strip_prefix('B') {
            (FaultCode::B, rest)
        } else {
            return Err(Error::InvalidArgument(format!(
                "unrecognised class label {s:?} (expected B.., IR.., OR.. or Normal)"
            )));
        };
        ClassLabel::new(fault, rest)
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
