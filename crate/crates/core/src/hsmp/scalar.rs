//! Scalar types the forward pass is generic over: plain `f64`, and a
//! forward-mode dual number carrying one directional derivative.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn relu(self) -> Self {
        if self.value() > 0.0 {
            self
        } else {
            Self::zero()
        }
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
}

/// `value + tangent·ε` with ε² = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub tangent: f64,
}

impl Dual {
    pub fn new(value: f64, tangent: f64) -> Self {
        Self { value, tangent }
    }
}

impl Add for Dual {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.value + o.value, self.tangent + o.tangent)
    }
}

impl Sub for Dual {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.value - o.value, self.tangent - o.tangent)
    }
}

impl Mul for Dual {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.value * o.value, self.tangent * o.value + self.value * o.tangent)
    }
}

impl Div for Dual {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.value / o.value;
        Self::new(q, (self.tangent - q * o.tangent) / o.value)
    }
}

impl Real for Dual {
    fn from_f64(x: f64) -> Self {
        Self::new(x, 0.0)
    }
    fn value(self) -> f64 {
        self.value
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        Self::new(e, e * self.tangent)
    }
}

/// Order-independent sum: terms are sorted by value and reduced pairwise, so
/// any permutation of the same multiset gives a bitwise-identical result.
pub fn sorted_sum<T: Real>(terms: &mut [T]) -> T {
    terms.sort_unstable_by(|a, b| a.value().total_cmp(&b.value()));
    pairwise(terms)
}

fn pairwise<T: Real>(terms: &[T]) -> T {
    match terms.len() {
        0 => T::zero(),
        1 => terms[0],
        2 => terms[0] + terms[1],
        n => {
            let (a, b) = terms.split_at(n / 2);
            pairwise(a) + pairwise(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_rules() {
        let x = Dual::new(2.0, 1.0);
        let y = Dual::new(3.0, 0.0);
        assert_eq!(x * y, Dual::new(6.0, 3.0));
        assert_eq!((x / y).tangent, 1.0 / 3.0);
        assert_eq!(Real::exp(x).tangent, 2f64.exp());
        assert_eq!(Dual::new(-1.0, 5.0).relu(), Dual::new(0.0, 0.0));
    }

    #[test]
    fn sorted_sum_is_permutation_invariant() {
        let base = [1e16, 1.0, -1e16, 3.5, 1e-3, 7.25, -2.0];
        let mut a = base;
        let mut b = base;
        b.reverse();
        b.swap(1, 4);
        assert_eq!(sorted_sum(&mut a).to_bits(), sorted_sum(&mut b).to_bits());
        assert_eq!(sorted_sum::<f64>(&mut []), 0.0);
    }
}
