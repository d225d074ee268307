//! Real shift parameters that remember when they are exact rationals.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

/// A translation or holonomy parameter (`alpha`, `beta`).
///
/// Values built from rationals stay exact under the integer arithmetic used by
/// the normal forms (sums, differences, integer scaling and division), which
/// lets bundle equality mod the lattice be decided exactly.
#[derive(Clone, Copy, Debug)]
pub enum Shift {
    Exact(Rational64),
    Real(f64),
}

impl Shift {
    pub const ZERO: Shift = Shift::Exact(Rational64::new_raw(0, 1));

    pub fn ratio(num: i64, den: i64) -> Self {
        Shift::Exact(Rational64::new(num, den))
    }

    pub fn int(v: i64) -> Self {
        Shift::Exact(Rational64::from_integer(v))
    }

    pub fn value(&self) -> f64 {
        match self {
            Shift::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Shift::Real(x) => *x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Shift::Exact(_))
    }

    pub fn mul_int(&self, k: i64) -> Self {
        match self {
            Shift::Exact(r) => Shift::Exact(r * k),
            Shift::Real(x) => Shift::Real(x * k as f64),
        }
    }

    pub fn div_int(&self, k: i64) -> Self {
        assert!(k != 0, "division of a shift by zero");
        match self {
            Shift::Exact(r) => Shift::Exact(r / k),
            Shift::Real(x) => Shift::Real(x / k as f64),
        }
    }

    /// Representative in `[0, 1)`.
    pub fn frac(&self) -> Self {
        match self {
            Shift::Exact(r) => Shift::Exact(r - r.floor()),
            Shift::Real(x) => Shift::Real(x.rem_euclid(1.0)),
        }
    }

    /// Equality modulo the integers: exact when both sides are rational,
    /// exact float comparison of the reduced values otherwise.
    pub fn eq_mod_one(&self, other: &Self) -> bool {
        match (self, other) {
            (Shift::Exact(a), Shift::Exact(b)) => (a - b).is_integer(),
            _ => self.frac().value() == other.frac().value(),
        }
    }
}

impl Default for Shift {
    fn default() -> Self {
        Shift::ZERO
    }
}

impl From<f64> for Shift {
    fn from(x: f64) -> Self {
        if x.fract() == 0.0 && x.abs() < 1e15 {
            Shift::int(x as i64)
        } else {
            Shift::Real(x)
        }
    }
}

impl From<i64> for Shift {
    fn from(v: i64) -> Self {
        Shift::int(v)
    }
}

impl PartialEq for Shift {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Shift::Exact(a), Shift::Exact(b)) => a == b,
            _ => self.value() == other.value(),
        }
    }
}

impl Add for Shift {
    type Output = Shift;
    fn add(self, rhs: Shift) -> Shift {
        match (self, rhs) {
            (Shift::Exact(a), Shift::Exact(b)) => Shift::Exact(a + b),
            _ => Shift::Real(self.value() + rhs.value()),
        }
    }
}

impl Sub for Shift {
    type Output = Shift;
    fn sub(self, rhs: Shift) -> Shift {
        self + (-rhs)
    }
}

impl Neg for Shift {
    type Output = Shift;
    fn neg(self) -> Shift {
        match self {
            Shift::Exact(a) => Shift::Exact(-a),
            Shift::Real(x) => Shift::Real(-x),
        }
    }
}

impl fmt::Display for Shift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shift::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Shift::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Shift::Real(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ShiftRepr {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Serialize for Shift {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Shift::Exact(r) if r.is_integer() => ShiftRepr::Int(*r.numer()).serialize(s),
            Shift::Exact(_) => ShiftRepr::Text(self.to_string()).serialize(s),
            Shift::Real(x) => ShiftRepr::Num(*x).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Shift {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match ShiftRepr::deserialize(d)? {
            ShiftRepr::Int(v) => Ok(Shift::int(v)),
            ShiftRepr::Num(x) => Ok(Shift::Real(x)),
            ShiftRepr::Text(t) => parse_shift(&t).map_err(serde::de::Error::custom),
        }
    }
}

/// Parses `"p/q"`, an integer, or a decimal.
pub fn parse_shift(text: &str) -> Result<Shift, String> {
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| format!("bad numerator in {t:?}"))?;
        let q: i64 = q.trim().parse().map_err(|_| format!("bad denominator in {t:?}"))?;
        if q == 0 {
            return Err(format!("zero denominator in {t:?}"));
        }
        return Ok(Shift::ratio(p, q));
    }
    if let Ok(v) = t.parse::<i64>() {
        return Ok(Shift::int(v));
    }
    t.parse::<f64>().map(Shift::Real).map_err(|_| format!("cannot parse shift {t:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_arithmetic_stays_exact() {
        let a = Shift::ratio(1, 3);
        let b = Shift::ratio(1, 4);
        let d = (a - b).div_int(5);
        assert_eq!(d, Shift::ratio(1, 60));
        assert!(d.is_exact());
        assert!(Shift::ratio(7, 3).eq_mod_one(&Shift::ratio(1, 3)));
        assert!(!Shift::ratio(1, 3).eq_mod_one(&Shift::ratio(2, 3)));
    }

    #[test]
    fn real_mixing() {
        let a = Shift::Real(0.25) + Shift::ratio(1, 4);
        assert!(!a.is_exact());
        assert_eq!(a.value(), 0.5);
        assert!(Shift::Real(1.25).eq_mod_one(&Shift::ratio(1, 4)));
    }

    #[test]
    fn json_forms() {
        let v: Vec<Shift> = serde_json::from_str(r#"[0, "1/3", 0.125, "-2/4"]"#).unwrap();
        assert_eq!(v[0], Shift::ZERO);
        assert_eq!(v[1], Shift::ratio(1, 3));
        assert_eq!(v[2], Shift::Real(0.125));
        assert_eq!(v[3], Shift::ratio(-1, 2));
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[0,"1/3",0.125,"-1/2"]"#);
    }
}
