//! Exact rational arithmetic helpers.
//!
//! `Rat` is a thin alias over `num_rational::BigRational`; the helpers here
//! cover the parsing and combinatorial plumbing the rest of the crate needs
//! (decimal-literal parsing, factorials, binomials, integer powers).

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{HornError, Result};

pub type Rat = BigRational;

/// Parse an exact rational from a string: integers (`-3`), fractions
/// (`22/7`), and finite decimals (`-3.25`) are accepted.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    if s.is_empty() {
        return Err(HornError::InvalidInput("empty rational literal".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| HornError::InvalidInput(format!("bad numerator {num:?}")))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| HornError::InvalidInput(format!("bad denominator {den:?}")))?;
        if d.is_zero() {
            return Err(HornError::InvalidInput(format!("zero denominator in {s:?}")));
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let digits = frac_part.trim();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(HornError::InvalidInput(format!("bad decimal {s:?}")));
        }
        let neg = int_part.trim_start().starts_with('-');
        let int_digits = if int_part.is_empty() || int_part == "-" || int_part == "+" {
            "0".to_string()
        } else {
            int_part.trim_start_matches(['-', '+']).to_string()
        };
        let whole: BigInt = format!("{int_digits}{digits}")
            .parse()
            .map_err(|_| HornError::InvalidInput(format!("bad decimal {s:?}")))?;
        let scale = BigInt::from(10u32).pow(digits.len() as u32);
        let val = Rat::new(whole, scale);
        return Ok(if neg { -val } else { val });
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| HornError::InvalidInput(format!("bad integer {s:?}")))?;
    Ok(Rat::from_integer(n))
}

pub fn rat_i64(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    // `to_f64` on BigRational can return None for huge operands; fall back to
    // a scaled division that stays in range.
    r.to_f64().unwrap_or_else(|| {
        let digits_n = r.numer().abs().to_string().len() as i32;
        let digits_d = r.denom().to_string().len() as i32;
        let shift = digits_n.min(digits_d) - 1;
        if shift <= 0 {
            return f64::NAN;
        }
        let scale = BigInt::from(10u32).pow(shift as u32);
        let n = (r.numer() / &scale).to_f64().unwrap_or(f64::NAN);
        let d = (r.denom() / &scale).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for k in 2..=n {
        acc *= k;
    }
    acc
}

/// Double factorial n!! with the usual conventions 0!! = (-1)!! = 1.
pub fn double_factorial(n: i64) -> BigInt {
    if n <= 0 {
        return BigInt::one();
    }
    let mut acc = BigInt::one();
    let mut k = n;
    while k > 1 {
        acc *= k;
        k -= 2;
    }
    acc
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Exact sign of a rational: -1, 0, or 1.
pub fn rat_sign(r: &Rat) -> i32 {
    match r.numer().sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_literal_forms() {
        assert_eq!(parse_rat("7").unwrap(), rat_i64(7));
        assert_eq!(parse_rat("-3").unwrap(), rat_i64(-3));
        assert_eq!(parse_rat("22/7").unwrap(), rat_frac(22, 7));
        assert_eq!(parse_rat("-3.5").unwrap(), rat_frac(-7, 2));
        assert_eq!(parse_rat("0.04496").unwrap(), rat_frac(4496, 100_000));
        assert_eq!(parse_rat(" -0.25 ").unwrap(), rat_frac(-1, 4));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("abc").is_err());
    }

    #[test]
    fn combinatorial_helpers() {
        assert_eq!(factorial(6), BigInt::from(720));
        assert_eq!(factorial(0), BigInt::from(1));
        assert_eq!(double_factorial(7), BigInt::from(105));
        assert_eq!(double_factorial(8), BigInt::from(384));
        assert_eq!(double_factorial(0), BigInt::from(1));
        assert_eq!(double_factorial(-1), BigInt::from(1));
        assert_eq!(binomial(10, 3), BigInt::from(120));
        assert_eq!(binomial(5, 9), BigInt::from(0));
    }

    #[test]
    fn f64_conversion_stays_finite() {
        let big = Rat::new(BigInt::from(10u8).pow(400), BigInt::from(3) * BigInt::from(10u8).pow(399));
        let v = rat_to_f64(&big);
        assert!((v - 10.0 / 3.0).abs() < 1e-12);
    }
}
