//! Forward-mode dual numbers `v + ε d` with `ε² = 0`.

use core::ops::{Add, Div, Mul, Neg, Sub};

use crate::num;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn new(v: f64, d: f64) -> Self {
        Dual { v, d }
    }

    pub fn constant(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }

    /// `f(self)` given `f(v)` and `f′(v)`.
    pub fn chain(self, f: f64, fp: f64) -> Self {
        Dual { v: f, d: fp * self.d }
    }

    pub fn powf(self, e: f64) -> Self {
        if e == 0.0 {
            return Dual::constant(1.0);
        }
        let p = num::powf(self.v, e);
        let dp = if e == 1.0 { 1.0 } else { e * num::powf(self.v, e - 1.0) };
        self.chain(p, dp)
    }

    pub fn sqrt(self) -> Self {
        let s = num::sqrt(self.v);
        self.chain(s, 0.5 / s)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.d * o.v + self.v * o.d)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual::new(self.v / o.v, (self.d * o.v - self.v * o.d) / (o.v * o.v))
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, s: f64) -> Dual {
        Dual::new(self.v * s, self.d * s)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}

impl core::iter::Sum for Dual {
    fn sum<I: Iterator<Item = Dual>>(iter: I) -> Dual {
        iter.fold(Dual::default(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_calculus() {
        let x = Dual::new(1.7, 1.0);
        let f = (x * x + x.powf(2.5)) / x.sqrt() - x * 3.0;
        let fd = |y: f64| (y * y + y.powf(2.5)) / y.sqrt() - 3.0 * y;
        let e = 1e-6;
        let num = (fd(1.7 + e) - fd(1.7 - e)) / (2.0 * e);
        assert!((f.d - num).abs() < 1e-8);
        assert_eq!(f.v, fd(1.7));
    }
}
