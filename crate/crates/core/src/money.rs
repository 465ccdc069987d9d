//! Currency held as integer paise, rendered as decimal INR.
//!
//! Budget constraints compare sums of selected prices, so prices never live
//! in floating point outside of the LP itself.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An amount of INR stored as paise (1/100 INR).
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_paise(paise: i64) -> Self {
        Money(paise)
    }

    pub const fn from_rupees(rupees: i64) -> Self {
        Money(rupees * 100)
    }

    /// Rounds a floating INR amount to the nearest paisa, half away from zero.
    pub fn from_rupees_f64(rupees: f64) -> Self {
        Money(round_half_up(rupees * 100.0))
    }

    pub const fn paise(self) -> i64 {
        self.0
    }

    pub fn as_rupees(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn abs_diff(self, other: Money) -> Money {
        Money((self.0 - other.0).abs())
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

/// Rounds half away from zero after snapping away binary noise below 1e-6 units.
fn round_half_up(x: f64) -> i64 {
    let snapped = (x * 1e6).round() / 1e6;
    if snapped >= 0.0 {
        (snapped + 0.5).floor() as i64
    } else {
        -((-snapped + 0.5).floor() as i64)
    }
}

/// Price after taking `discount_pct` percent off `mrp`, rounded to the paisa (half up).
pub fn discount_to_price(mrp: Money, discount_pct: f64) -> Result<Money> {
    if !mrp.is_positive() {
        return Err(Error::domain(format!("MRP must be positive, got {mrp}")));
    }
    if !(0.0..100.0).contains(&discount_pct) {
        return Err(Error::domain(format!(
            "discount {discount_pct}% outside [0, 100)"
        )));
    }
    let paise = mrp.0 as f64 * (100.0 - discount_pct) / 100.0;
    Ok(Money(round_half_up(paise)))
}

/// Discount percentage that turns `mrp` into `price`.
pub fn price_to_discount(mrp: Money, price: Money) -> Result<f64> {
    if !price.is_positive() || price > mrp {
        return Err(Error::domain(format!("price {price} must lie in (0, MRP {mrp}]")));
    }
    Ok(100.0 * (mrp.0 - price.0) as f64 / mrp.0 as f64)
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl FromStr for Money {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::domain(format!("invalid currency amount {s:?}"));
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: i64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let paise = if frac.len() <= 2 {
            let padded = format!("{frac:0<2}");
            padded.parse::<i64>().map_err(|_| bad())?
        } else {
            // more than two decimals: round half up on the third digit
            let head: i64 = frac[..2].parse().map_err(|_| bad())?;
            let next = frac.as_bytes()[2] - b'0';
            head + i64::from(next >= 5)
        };
        let total = whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(paise))
            .ok_or_else(bad)?;
        Ok(Money(if neg { -total } else { total }))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct MoneyVisitor;

        impl Visitor<'_> for MoneyVisitor {
            type Value = Money;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal INR amount")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Money, E> {
                v.parse().map_err(|e: Error| E::custom(e))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Money, E> {
                Ok(Money::from_rupees(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Money, E> {
                i64::try_from(v)
                    .map(Money::from_rupees)
                    .map_err(|_| E::custom("amount too large"))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Money, E> {
                if v.is_finite() {
                    Ok(Money::from_rupees_f64(v))
                } else {
                    Err(E::custom("non-finite amount"))
                }
            }
        }

        deserializer.deserialize_any(MoneyVisitor)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Mul<i64> for Money {
    type Output = Money;
    fn mul(self, rhs: i64) -> Money {
        Money(self.0 * rhs)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn discount_examples() {
        assert_eq!(
            discount_to_price(Money::from_rupees(2000), 30.0).unwrap(),
            Money::from_rupees(1400)
        );
        assert_eq!(
            discount_to_price(Money::from_rupees(2000), 0.0).unwrap(),
            Money::from_rupees(2000)
        );
        // 999 * 0.67 = 669.33
        assert_eq!(
            discount_to_price(Money::from_rupees(999), 33.0).unwrap(),
            Money::from_paise(66933)
        );
    }

    #[test]
    fn rounds_half_up() {
        // 0.99 * 0.5 = 0.495 -> 0.50
        assert_eq!(
            discount_to_price(Money::from_paise(99), 50.0).unwrap(),
            Money::from_paise(50)
        );
        // 10.01 * 0.875 = 8.75875 -> 8.76
        assert_eq!(
            discount_to_price(Money::from_paise(1001), 12.5).unwrap(),
            Money::from_paise(876)
        );
    }

    #[test]
    fn discount_out_of_range() {
        let mrp = Money::from_rupees(100);
        assert!(discount_to_price(mrp, 100.0).is_err());
        assert!(discount_to_price(mrp, -0.1).is_err());
        assert!(discount_to_price(Money::ZERO, 10.0).is_err());
    }

    #[test]
    fn price_to_discount_examples() {
        let d = price_to_discount(Money::from_rupees(2000), Money::from_rupees(1400)).unwrap();
        assert_eq!(d, 30.0);
        let d = price_to_discount(Money::from_rupees(2000), Money::from_rupees(2000)).unwrap();
        assert_eq!(d, 0.0);
        let d = price_to_discount(Money::from_rupees(1400), Money::from_rupees(1200)).unwrap();
        assert!((d - 100.0 * (1.0 - 1200.0 / 1400.0)).abs() < 1e-12);
        assert!((d - 14.285_714_285_714).abs() < 1e-9);
    }

    #[test]
    fn price_to_discount_rejects() {
        let mrp = Money::from_rupees(100);
        assert!(price_to_discount(mrp, Money::from_rupees(101)).is_err());
        assert!(price_to_discount(mrp, Money::ZERO).is_err());
        assert!(price_to_discount(mrp, Money::from_rupees(-5)).is_err());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("1400".parse::<Money>().unwrap(), Money::from_rupees(1400));
        assert_eq!("669.33".parse::<Money>().unwrap(), Money::from_paise(66933));
        assert_eq!("0.5".parse::<Money>().unwrap(), Money::from_paise(50));
        assert_eq!("1.005".parse::<Money>().unwrap(), Money::from_paise(101));
        assert_eq!("-2.10".parse::<Money>().unwrap(), Money::from_paise(-210));
        assert!("abc".parse::<Money>().is_err());
        assert!("".parse::<Money>().is_err());
        assert_eq!(Money::from_paise(66933).to_string(), "669.33");
        assert_eq!(Money::from_paise(-5).to_string(), "-0.05");
    }

    #[test]
    fn serde_json_uses_decimal_strings() {
        let s = serde_json::to_string(&Money::from_paise(140050)).unwrap();
        assert_eq!(s, "\"1400.50\"");
        let back: Money = serde_json::from_str(&s).unwrap();
        assert_eq!(back, Money::from_paise(140050));
        let from_num: Money = serde_json::from_str("12.5").unwrap();
        assert_eq!(from_num, Money::from_paise(1250));
    }

    proptest! {
        // Rounding to the paisa moves the discount by at most 0.5/mrp_paise*100
        // percentage points, which is within 0.005 once mrp >= 100 INR.
        #[test]
        fn discount_round_trip(mrp_paise in 10_000i64..10_000_000, d in 0.0f64..99.0) {
            let mrp = Money::from_paise(mrp_paise);
            let price = discount_to_price(mrp, d).unwrap();
            let back = price_to_discount(mrp, price).unwrap();
            prop_assert!((back - d).abs() <= 0.005, "d={d} back={back}");
        }

        #[test]
        fn price_strictly_decreasing(mrp_paise in 10_000i64..10_000_000, d in 0.0f64..98.0, step in 0.01f64..1.0) {
            let mrp = Money::from_paise(mrp_paise);
            let lo = discount_to_price(mrp, d).unwrap();
            let hi = discount_to_price(mrp, d + step).unwrap();
            prop_assert!(hi < lo);
        }

        #[test]
        fn display_parse_round_trip(p in -1_000_000_000i64..1_000_000_000) {
            let m = Money::from_paise(p);
            prop_assert_eq!(m.to_string().parse::<Money>().unwrap(), m);
        }
    }
}
