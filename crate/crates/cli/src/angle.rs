//! Angles given as radians or as exact multiples of pi.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An angle in radians; parses `1.5708`, `pi`, `-pi/2`, `7pi/8`, `7*pi/8`, `0.25pi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Angle(pub f64);

#[derive(Debug, thiserror::Error)]
#[error("cannot read {0:?} as an angle (use radians or forms like pi/2, 7pi/8)")]
pub struct AngleError(String);

impl FromStr for Angle {
    type Err = AngleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AngleError(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        if t.is_empty() {
            return Err(err());
        }
        let Some(at) = t.find("pi") else {
            let v: f64 = t.parse().map_err(|_| err())?;
            return if v.is_finite() { Ok(Angle(v)) } else { Err(err()) };
        };
        let (head, tail) = (&t[..at], &t[at + 2..]);
        let head = head.strip_suffix('*').unwrap_or(head);
        let factor = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|_| err())?,
        };
        let divisor = match tail {
            "" => 1.0,
            d => {
                let d = d.strip_prefix('/').ok_or_else(err)?;
                let v: f64 = d.parse().map_err(|_| err())?;
                if v == 0.0 {
                    return Err(err());
                }
                v
            }
        };
        let v = factor * PI / divisor;
        if v.is_finite() {
            Ok(Angle(v))
        } else {
            Err(err())
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Angle(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}
