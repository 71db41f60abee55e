//! Interval arithmetic with guaranteed containment.
//!
//! Outward rounding is realized by one-ulp widening of round-to-nearest
//! results: for every IEEE binary64 operation `fl(x op y)` the exact real
//! result lies in `[next_down(fl), next_up(fl)]`, so widening each computed
//! endpoint by one ulp in the outward direction preserves containment. The
//! choice is confined to this module; nothing else in the crate touches
//! rounding modes, which keeps every worker thread safe by construction.
//!
//! Fast interval matrix kernels (midpoint-radius products with an explicit
//! accumulated-error term) live in [`crate::linalg`] and are re-exported
//! here together with the verified solvers.

mod matrix;

pub use crate::linalg::verified::{solve_enclosure, solve_enclosure_mat, sym_pencil_bounds, PencilSide};
pub use matrix::{EigEnclosure, IvMat, IvSparse, IvVec};

use crate::error::{Error, Result};
use crate::rat::{rat_from_decimal, rat_to_interval, Rat};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// A closed real interval `[lo, hi]` with `lo <= hi`.
///
/// Every arithmetic result encloses the exact real result: if `x ∈ X` and
/// `y ∈ Y` then `x ∘ y ∈ X ∘ Y`.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Interval {
    fn default() -> Self {
        Interval::ZERO
    }
}

#[inline]
fn down(x: f64) -> f64 {
    x.next_down()
}

#[inline]
fn up(x: f64) -> f64 {
    x.next_up()
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    #[inline]
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    #[inline]
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Enclose the real sum of a point pair computed in floating point.
    #[inline]
    pub fn from_fl(x: f64) -> Self {
        Interval { lo: down(x), hi: up(x) }
    }

    /// Exact enclosure of a decimal literal such as "0.25" or "-3.5e-2".
    pub fn from_decimal(s: &str) -> Result<Self> {
        Ok(rat_to_interval(&rat_from_decimal(s)?))
    }

    pub fn from_rat(r: &Rat) -> Self {
        rat_to_interval(r)
    }

    #[inline]
    pub fn width(&self) -> f64 {
        up(self.hi - self.lo)
    }

    #[inline]
    pub fn mid(&self) -> f64 {
        let m = 0.5 * (self.lo + self.hi);
        if m.is_finite() {
            m
        } else {
            0.5 * self.lo + 0.5 * self.hi
        }
    }

    /// Radius measured from `mid()`, rounded up so that
    /// `[mid - rad, mid + rad]` always contains the interval.
    #[inline]
    pub fn rad(&self) -> f64 {
        let m = self.mid();
        up(up(m - self.lo).max(up(self.hi - m)))
    }

    /// Magnitude `max |x|` over the interval.
    #[inline]
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Mignitude `min |x|` over the interval (0 if it contains 0).
    #[inline]
    pub fn mig(&self) -> f64 {
        if self.lo <= 0.0 && self.hi >= 0.0 {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn contains_iv(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    #[inline]
    pub fn strictly_contains(&self, other: &Interval) -> bool {
        self.lo < other.lo && other.hi < self.hi
    }

    #[inline]
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Interval of absolute values.
    #[inline]
    pub fn abs(&self) -> Interval {
        Interval::new(self.mig(), self.mag())
    }

    /// Enclosure of the square, never dipping below 0.
    #[inline]
    pub fn square(&self) -> Interval {
        if self.lo == 0.0 && self.hi == 0.0 {
            return Interval::ZERO;
        }
        let a = self.abs();
        Interval::new((down(a.lo * a.lo)).max(0.0), up(a.hi * a.hi))
    }

    /// Enclosure of the square root; requires a nonnegative interval.
    pub fn sqrt(&self) -> Result<Interval> {
        if self.lo < 0.0 {
            return Err(Error::Domain(format!("sqrt of {self}")));
        }
        // f64::sqrt is correctly rounded; sqrt of an exact 0 endpoint is exact.
        let hi = if self.hi == 0.0 { 0.0 } else { up(self.hi.sqrt()) };
        Ok(Interval::new(down(self.lo.sqrt()).max(0.0), hi))
    }

    /// x^(1/4) through two correctly-rounded square roots.
    pub fn quarter_root(&self) -> Result<Interval> {
        self.sqrt()?.sqrt()
    }

    /// x^(1/8) through three correctly-rounded square roots.
    pub fn eighth_root(&self) -> Result<Interval> {
        self.sqrt()?.sqrt()?.sqrt()
    }

    pub fn recip(&self) -> Result<Interval> {
        Interval::ONE.div_checked(self)
    }

    pub fn div_checked(&self, rhs: &Interval) -> Result<Interval> {
        if rhs.lo <= 0.0 && rhs.hi >= 0.0 {
            return Err(Error::Domain(format!("division by {rhs} containing zero")));
        }
        if self.lo == 0.0 && self.hi == 0.0 {
            return Ok(Interval::ZERO);
        }
        let candidates = [
            self.lo / rhs.lo,
            self.lo / rhs.hi,
            self.hi / rhs.lo,
            self.hi / rhs.hi,
        ];
        let lo = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = candidates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Interval::new(down(lo), up(hi)))
    }

    /// Is this interval certainly positive / negative?
    #[inline]
    pub fn is_pos(&self) -> bool {
        self.lo > 0.0
    }

    #[inline]
    pub fn is_neg(&self) -> bool {
        self.hi < 0.0
    }

    /// Widen both endpoints outward by `eps` (used for epsilon inflation).
    pub fn inflate(&self, eps: f64) -> Interval {
        let r = eps * self.mag().max(1.0e-300);
        Interval::new(down(self.lo - r), up(self.hi + r))
    }

    /// Enclosure of pi.
    pub fn pi() -> Interval {
        Interval::from_fl(std::f64::consts::PI)
    }
}

// An IEEE sum that rounds to zero is exact (subnormal results of addition
// are exact), so a zero endpoint needs no outward bump.
#[inline]
fn down_add(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.next_down()
    }
}

#[inline]
fn up_add(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.next_up()
    }
}

impl Add for Interval {
    type Output = Interval;
    #[inline]
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(down_add(self.lo + rhs.lo), up_add(self.hi + rhs.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    #[inline]
    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(down_add(self.lo - rhs.hi), up_add(self.hi - rhs.lo))
    }
}

impl Neg for Interval {
    type Output = Interval;
    #[inline]
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    #[inline]
    fn mul(self, rhs: Interval) -> Interval {
        if (self.lo == 0.0 && self.hi == 0.0) || (rhs.lo == 0.0 && rhs.hi == 0.0) {
            return Interval::ZERO;
        }
        let p = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let mut lo = p[0];
        let mut hi = p[0];
        for &v in &p[1..] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Interval::new(down(lo), up(hi))
    }
}

impl Div for Interval {
    type Output = Interval;
    /// Panics on division by an interval containing zero; use
    /// [`Interval::div_checked`] for the fallible form.
    fn div(self, rhs: Interval) -> Interval {
        self.div_checked(&rhs).expect("interval division by zero")
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    #[inline]
    fn mul(self, rhs: f64) -> Interval {
        self * Interval::point(rhs)
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    #[inline]
    fn add(self, rhs: f64) -> Interval {
        self + Interval::point(rhs)
    }
}

impl AddAssign for Interval {
    #[inline]
    fn add_assign(&mut self, rhs: Interval) {
        *self = *self + rhs;
    }
}

impl SubAssign for Interval {
    #[inline]
    fn sub_assign(&mut self, rhs: Interval) {
        *self = *self - rhs;
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Sum with every partial rounded outward; any summation order is sound,
/// this one is the deterministic left fold.
pub fn iv_sum(vals: &[Interval]) -> Interval {
    let mut s = Interval::ZERO;
    for v in vals {
        s += *v;
    }
    s
}

/// Dot product of interval slices.
pub fn iv_dot(a: &[Interval], b: &[Interval]) -> Interval {
    debug_assert_eq!(a.len(), b.len());
    let mut s = Interval::ZERO;
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{cmp_rat_f64, rat_i64};
    use std::cmp::Ordering;

    #[test]
    fn exact_endpoint_cases() {
        let a = Interval::new(1.0, 2.0) + Interval::new(3.0, 4.0);
        // outward rounding may widen by one ulp at most
        assert!(a.lo <= 4.0 && a.hi >= 6.0 && a.width() < 6.0 + 1e-14);
        assert!(a.contains(4.0) && a.contains(6.0));

        let m = Interval::new(-1.0, 2.0) * Interval::new(3.0, 3.0);
        assert!(m.contains(-3.0) && m.contains(6.0));
        assert!(m.lo >= -3.0 - 1e-13 && m.hi <= 6.0 + 1e-13);
    }

    #[test]
    fn one_third_division() {
        let q = Interval::point(1.0) / Interval::point(3.0);
        let third = rat_i64(1, 3);
        assert!(cmp_rat_f64(&third, q.lo) != Ordering::Less);
        assert!(cmp_rat_f64(&third, q.hi) != Ordering::Greater);
        assert!(q.lo < q.hi);
        assert!(q.width() <= 2.0 * (1.0 / 3.0) * f64::EPSILON);
    }

    #[test]
    fn division_by_zero_interval() {
        let e = Interval::new(1.0, 1.0).div_checked(&Interval::new(-1.0, 2.0));
        assert!(e.is_err());
    }

    #[test]
    fn chained_width_stays_small() {
        // 1e3 chained ops on O(1) values keep width below 1e-10.
        let mut x = Interval::point(1.0);
        for i in 0..1000 {
            let c = Interval::point(1.0 + (i % 7) as f64 * 0.125);
            x = (x * c + Interval::point(0.5)) / c - Interval::point(0.5) * c;
            if x.mag() > 4.0 {
                x = x * Interval::point(0.25);
            }
        }
        assert!(x.width() < 1e-10, "width {}", x.width());
    }

    #[test]
    fn containment_monotonicity() {
        let a = Interval::new(1.0, 2.0);
        let b = Interval::new(-3.0, 0.5);
        let wide_a = Interval::new(0.5, 2.5);
        for (f, g) in [
            ((a * b), (wide_a * b)),
            ((a + b), (wide_a + b)),
            ((a - b), (wide_a - b)),
        ] {
            assert!(g.contains_iv(&f));
        }
    }

    #[test]
    fn sqrt_roots() {
        let two = Interval::point(2.0);
        let r = two.sqrt().unwrap();
        assert!(r.contains(std::f64::consts::SQRT_2));
        let q = two.quarter_root().unwrap();
        assert!(q.contains(2f64.powf(0.25)));
        assert!(Interval::new(-1.0, 1.0).sqrt().is_err());
    }
}
