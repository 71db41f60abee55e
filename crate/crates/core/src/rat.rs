//! Exact rational scalars, points and small dense kernels.
//!
//! Mesh geometry, Bernstein coefficient identities and the local constraint
//! eliminations are all decided in exact arithmetic; values cross over to
//! intervals only when they enter assembled matrices.

use crate::error::{Error, Result};
use crate::interval::Interval;
use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

pub type Rat = BigRational;

pub fn rat_i64(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Exact conversion of a finite f64 (every finite double is rational).
pub fn rat_from_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("finite float")
}

/// Parse a decimal literal ("-12", "0.25", "3.5e-2") exactly.
pub fn rat_from_decimal(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (mant, exp10) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = s[i + 1..]
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent in {s:?}")))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (mant, frac_digits) = match mant.find('.') {
        Some(i) => {
            let digits = mant.len() - i - 1;
            (format!("{}{}", &mant[..i], &mant[i + 1..]), digits as i64)
        }
        None => (mant.to_string(), 0),
    };
    let int: BigInt = mant
        .parse()
        .map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?;
    let shift = exp10 - frac_digits;
    let ten = BigInt::from(10);
    Ok(if shift >= 0 {
        Rat::from_integer(int * ten.pow(shift as u32))
    } else {
        Rat::new(int, ten.pow((-shift) as u32))
    })
}

/// Render as "p/q" (or "p" when integral), the mesh-file format.
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_parse(s: &str) -> Result<Rat> {
    let s = s.trim();
    if let Some(i) = s.find('/') {
        let n: BigInt = s[..i]
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        let d: BigInt = s[i + 1..]
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse("zero denominator".into()));
        }
        Ok(Rat::new(n, d))
    } else if s.contains('.') || s.contains('e') || s.contains('E') {
        rat_from_decimal(s)
    } else {
        let n: BigInt = s
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
        Ok(Rat::from_integer(n))
    }
}

/// Compare a rational against a finite f64 exactly.
pub fn cmp_rat_f64(r: &Rat, x: f64) -> Ordering {
    if x == f64::INFINITY {
        return Ordering::Less;
    }
    if x == f64::NEG_INFINITY {
        return Ordering::Greater;
    }
    r.cmp(&rat_from_f64(x))
}

/// Nearest f64 below-or-equal / above-or-equal pair enclosing `r`.
pub fn rat_to_interval(r: &Rat) -> Interval {
    let approx = rat_to_f64_nearest(r);
    let mut lo = approx;
    let mut hi = approx;
    match cmp_rat_f64(r, approx) {
        Ordering::Equal => {}
        Ordering::Less => lo = approx.next_down(),
        Ordering::Greater => hi = approx.next_up(),
    }
    debug_assert!(cmp_rat_f64(r, lo) != Ordering::Less);
    debug_assert!(cmp_rat_f64(r, hi) != Ordering::Greater);
    Interval::new(lo, hi)
}

/// Round-to-nearest-ish conversion; the caller re-checks direction exactly.
fn rat_to_f64_nearest(r: &Rat) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            let q = n / d;
            if q.is_finite() {
                return q;
            }
        }
    }
    // Big operands: scale by powers of two (exact) until representable.
    let mut num = r.numer().clone();
    let mut den = r.denom().clone();
    let mut exp: i64 = 0;
    let bits = |x: &BigInt| x.bits() as i64;
    while bits(&num) > 1000 || bits(&den) > 1000 {
        if bits(&num) > bits(&den) {
            num >>= 64;
            exp += 64;
        } else {
            den >>= 64;
            exp -= 64;
        }
        if den.is_zero() {
            den = BigInt::one();
        }
    }
    let n = num.to_f64().unwrap_or(0.0);
    let d = den.to_f64().unwrap_or(1.0);
    (n / d) * 2f64.powi(exp.clamp(-2000, 2000) as i32)
}

pub fn rat_dot(a: &[Rat], b: &[Rat]) -> Rat {
    let mut s = Rat::zero();
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// 3-component exact point.
pub type RPoint = [Rat; 3];

pub fn rpoint_sub(a: &RPoint, b: &RPoint) -> RPoint {
    [&a[0] - &b[0], &a[1] - &b[1], &a[2] - &b[2]]
}

pub fn rdet3(c0: &RPoint, c1: &RPoint, c2: &RPoint) -> Rat {
    &c0[0] * (&c1[1] * &c2[2] - &c1[2] * &c2[1])
        - &c1[0] * (&c0[1] * &c2[2] - &c0[2] * &c2[1])
        + &c2[0] * (&c0[1] * &c1[2] - &c0[2] * &c1[1])
}

pub fn rcross(a: &RPoint, b: &RPoint) -> RPoint {
    [
        &a[1] * &b[2] - &a[2] * &b[1],
        &a[2] * &b[0] - &a[0] * &b[2],
        &a[0] * &b[1] - &a[1] * &b[0],
    ]
}

/// Dense Gaussian elimination with exact pivoting. Returns None if singular.
pub fn rsolve(mut a: Vec<Vec<Rat>>, mut b: Vec<Vec<Rat>>) -> Option<Vec<Vec<Rat>>> {
    let n = a.len();
    let m = if b.is_empty() { 0 } else { b[0].len() };
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].recip();
        for j in col..n {
            a[col][j] = &a[col][j] * &inv;
        }
        for j in 0..m {
            b[col][j] = &b[col][j] * &inv;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in col..n {
                    let t = &a[col][j] * &f;
                    a[r][j] = &a[r][j] - t;
                }
                for j in 0..m {
                    let t = &b[col][j] * &f;
                    b[r][j] = &b[r][j] - t;
                }
            }
        }
    }
    Some(b)
}

/// Rank of an exact matrix (destructive row reduction).
pub fn rrank(mut a: Vec<Vec<Rat>>) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let piv = match (rank..rows).find(|&r| !a[r][col].is_zero()) {
            Some(p) => p,
            None => continue,
        };
        a.swap(rank, piv);
        let inv = a[rank][col].recip();
        for j in col..cols {
            a[rank][j] = &a[rank][j] * &inv;
        }
        for r in 0..rows {
            if r != rank && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in col..cols {
                    let t = &a[rank][j] * &f;
                    a[r][j] = &a[r][j] - t;
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn rat_sign(r: &Rat) -> i32 {
    match r.numer().sign() {
        Sign::Plus => 1,
        Sign::Minus => -1,
        Sign::NoSign => 0,
    }
}

pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parse_exact() {
        assert_eq!(rat_from_decimal("0.25").unwrap(), rat_i64(1, 4));
        assert_eq!(rat_from_decimal("-12").unwrap(), rat_int(-12));
        assert_eq!(rat_from_decimal("3.5e-2").unwrap(), rat_i64(35, 1000));
        assert_eq!(rat_parse("7/3").unwrap(), rat_i64(7, 3));
    }

    #[test]
    fn rational_interval_containment() {
        let third = rat_i64(1, 3);
        let iv = rat_to_interval(&third);
        assert!(cmp_rat_f64(&third, iv.lo) != Ordering::Less);
        assert!(cmp_rat_f64(&third, iv.hi) != Ordering::Greater);
        assert!(iv.hi - iv.lo <= 2.0 * f64::EPSILON);
        // exactly representable values stay points
        let q = rat_i64(3, 4);
        let iv = rat_to_interval(&q);
        assert_eq!(iv.lo, iv.hi);
        assert_eq!(iv.lo, 0.75);
    }

    #[test]
    fn solve_and_rank() {
        let a = vec![
            vec![rat_int(2), rat_int(1)],
            vec![rat_int(1), rat_int(3)],
        ];
        let b = vec![vec![rat_int(5)], vec![rat_int(10)]];
        let x = rsolve(a, b).unwrap();
        assert_eq!(x[0][0], rat_int(1));
        assert_eq!(x[1][0], rat_int(3));
        let m = vec![
            vec![rat_int(1), rat_int(2), rat_int(3)],
            vec![rat_int(2), rat_int(4), rat_int(6)],
            vec![rat_int(0), rat_int(1), rat_int(1)],
        ];
        assert_eq!(rrank(m), 2);
    }
}
