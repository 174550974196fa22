//! JSON has no infinity, so extended reals travel as numbers or the string
//! `"inf"`.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::Deserialize;

/// Parses `"inf"`, `"infinity"` (any case, optional `+`) or a decimal number.
pub fn parse_extended_real(s: &str) -> Option<f64> {
    let t = s.trim();
    let lower = t.trim_start_matches('+').to_ascii_lowercase();
    if lower == "inf" || lower == "infinity" {
        return Some(f64::INFINITY);
    }
    t.parse::<f64>().ok().filter(|x| !x.is_nan())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Raw {
    Num(f64),
    Str(String),
}

impl Raw {
    fn into_f64<E: de::Error>(self) -> Result<f64, E> {
        match self {
            Raw::Num(x) => Ok(x),
            Raw::Str(s) => parse_extended_real(&s)
                .ok_or_else(|| E::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

fn write_one<S: Serializer>(x: f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_infinite() && x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(x)
    }
}

pub mod extended_real {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        write_one(*x, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Raw::deserialize(d)?.into_f64()
    }
}

pub mod extended_real_vec {
    use super::*;

    struct Inf(f64);

    impl serde::Serialize for Inf {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            write_one(self.0, s)
        }
    }

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for &x in xs {
            seq.serialize_element(&Inf(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vec<f64>;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number, \"inf\", or a list of them")
            }
            fn visit_f64<E: de::Error>(self, x: f64) -> Result<Vec<f64>, E> {
                Ok(vec![x])
            }
            fn visit_u64<E: de::Error>(self, x: u64) -> Result<Vec<f64>, E> {
                Ok(vec![x as f64])
            }
            fn visit_i64<E: de::Error>(self, x: i64) -> Result<Vec<f64>, E> {
                Ok(vec![x as f64])
            }
            fn visit_str<E: de::Error>(self, s: &str) -> Result<Vec<f64>, E> {
                Raw::Str(s.to_owned()).into_f64().map(|x| vec![x])
            }
            fn visit_seq<A: de::SeqAccess<'de>>(self, mut seq: A) -> Result<Vec<f64>, A::Error> {
                let mut out = Vec::new();
                while let Some(raw) = seq.next_element::<Raw>()? {
                    out.push(raw.into_f64()?);
                }
                Ok(out)
            }
        }
        d.deserialize_any(V)
    }
}

/// An extended real as a standalone value, for optional config fields.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ExtReal(#[serde(with = "extended_real")] pub f64);

/// A scalar or list of extended reals.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ExtRealVec(#[serde(with = "extended_real_vec")] pub Vec<f64>);
