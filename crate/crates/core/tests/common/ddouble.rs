//! Double-double arithmetic (about 32 significant digits), used as an
//! extended-precision reference that shares no code with the library.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DD {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DD {
    pub const fn new(hi: f64, lo: f64) -> Self {
        DD { hi, lo }
    }

    pub fn from_f64(v: f64) -> Self {
        DD { hi: v, lo: 0.0 }
    }

    /// `n / d` for integers, e.g. decimal constants such as 24.7 = 247/10.
    pub fn ratio(n: i64, d: i64) -> Self {
        DD::from_f64(n as f64) / DD::from_f64(d as f64)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn powi(self, n: u32) -> Self {
        (0..n).fold(DD::from_f64(1.0), |acc, _| acc * self)
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        DD { hi, lo }
    }

    pub fn exp(self) -> Self {
        // x = k ln2 + r, then exp(r / 2^10) by Taylor series and ten squarings.
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2.mul_f64(k);
        let s = r.mul_f64(1.0 / 1024.0);
        let mut term = DD::from_f64(1.0);
        let mut sum = DD::from_f64(1.0);
        for i in 1..=24 {
            term = (term * s) / DD::from_f64(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        DD {
            hi: sum.hi * 2f64.powi(k as i32),
            lo: sum.lo * 2f64.powi(k as i32),
        }
    }

    pub fn cos(self) -> Self {
        let k = (self / TWO_PI).hi.round();
        let r = self - TWO_PI.mul_f64(k);
        let r2 = r * r;
        let mut term = DD::from_f64(1.0);
        let mut sum = DD::from_f64(1.0);
        for i in 1..=40 {
            term = -(term * r2) / DD::from_f64(((2 * i - 1) * (2 * i)) as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        sum
    }
}

pub const TWO_PI: DD = DD::new(std::f64::consts::TAU, 2.4492935982947064e-16);
pub const LN2: DD = DD::new(std::f64::consts::LN_2, 2.3190468138462996e-17);

impl Add for DD {
    type Output = DD;
    fn add(self, b: DD) -> DD {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DD { hi, lo }
    }
}

impl Neg for DD {
    type Output = DD;
    fn neg(self) -> DD {
        DD {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DD {
    type Output = DD;
    fn sub(self, b: DD) -> DD {
        self + (-b)
    }
}

impl Mul for DD {
    type Output = DD;
    fn mul(self, b: DD) -> DD {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DD { hi, lo }
    }
}

impl Div for DD {
    type Output = DD;
    fn div(self, b: DD) -> DD {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DD { hi, lo } + DD::from_f64(q3)
    }
}
