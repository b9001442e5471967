//! Serde adapters writing non-finite floats as the strings `"inf"`, `"-inf"`
//! and `"nan"`, since JSON numbers cannot hold them.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Num {
    F(f64),
    S(String),
}

fn to_num(x: f64) -> Num {
    if x.is_finite() {
        Num::F(x)
    } else if x.is_nan() {
        Num::S("nan".into())
    } else if x > 0.0 {
        Num::S("inf".into())
    } else {
        Num::S("-inf".into())
    }
}

fn from_num<E: serde::de::Error>(n: Num) -> Result<f64, E> {
    match n {
        Num::F(x) => Ok(x),
        Num::S(s) => match s.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            other => Err(E::custom(format!("expected a number, got {other:?}"))),
        },
    }
}

pub mod one {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, ser: S) -> Result<S::Ok, S::Error> {
        to_num(*x).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        from_num(Num::deserialize(de)?)
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[f64], ser: S) -> Result<S::Ok, S::Error> {
        xs.iter().map(|&x| to_num(x)).collect::<Vec<_>>().serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Num>::deserialize(de)?.into_iter().map(from_num).collect()
    }
}

pub mod opt {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<f64>, ser: S) -> Result<S::Ok, S::Error> {
        x.map(to_num).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<f64>, D::Error> {
        Option::<Num>::deserialize(de)?.map(from_num).transpose()
    }
}

#[cfg(test)]
mod tests {
    #[derive(serde::Serialize, serde::Deserialize, Debug)]
    struct Probe {
        #[serde(with = "super::vec")]
        xs: Vec<f64>,
        #[serde(with = "super::opt")]
        r: Option<f64>,
        #[serde(with = "super::one")]
        y: f64,
    }

    #[test]
    fn round_trips_non_finite() {
        let p = Probe { xs: vec![1.5, f64::INFINITY, f64::NEG_INFINITY, f64::NAN], r: Some(f64::INFINITY), y: 2.0 };
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, r#"{"xs":[1.5,"inf","-inf","nan"],"r":"inf","y":2.0}"#);
        let back: Probe = serde_json::from_str(&text).unwrap();
        assert_eq!(back.xs[..3], p.xs[..3]);
        assert!(back.xs[3].is_nan());
        assert_eq!(back.r, Some(f64::INFINITY));
    }
}
