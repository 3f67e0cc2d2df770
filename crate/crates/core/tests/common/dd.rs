//! Double-double arithmetic (about 32 significant digits) for oracles that
//! must sit well below f64 rounding noise.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: 6.931471805599452862e-01,
    lo: 2.319046813846299558e-17,
};

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

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn from_pair((hi, lo): (f64, f64)) -> Dd {
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }

    fn scale_pow2(self, k: i32) -> Dd {
        let f = 2f64.powi(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn max0(self) -> Dd {
        if self.hi > 0.0 {
            self
        } else {
            Dd::ZERO
        }
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let mut y = Dd::new(self.hi.sqrt());
        for _ in 0..2 {
            y = y + (self - y * y) / (y * Dd::new(2.0));
        }
        y
    }

    pub fn exp(self) -> Dd {
        assert!(self.hi.abs() < 700.0, "exp argument {} out of range", self.hi);
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Dd::new(k)).scale_pow2(-10);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for i in 1..30 {
            term = term * r / Dd::new(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.scale_pow2(k as i32)
    }

    pub fn ln(self) -> Dd {
        assert!(self.hi > 0.0, "ln of non-positive value");
        let mut y = Dd::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    pub fn tanh(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ZERO;
        }
        let e = (self.abs() * Dd::new(-2.0)).exp();
        let t = (Dd::ONE - e) / (Dd::ONE + e);
        if self.hi < 0.0 {
            -t
        } else {
            t
        }
    }

    pub fn sigmoid(self) -> Dd {
        Dd::ONE / (Dd::ONE + (-self).exp())
    }

    /// `ln(1 + e^x)`.
    pub fn softplus(self) -> Dd {
        (Dd::ONE + self.exp()).ln()
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Dd {
        Dd::new(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Dd::from_pair((s, e + f))
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        Dd::from_pair((p, e + (self.hi * o.lo + self.lo * o.hi)))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        Dd::from_pair(quick_two_sum(q1, q2)) + Dd::new(q3)
    }
}

/// Sanity checks on the arithmetic itself; called from a test.
pub fn self_check() {
    let third = Dd::ONE / Dd::new(3.0);
    let back = third * Dd::new(3.0) - Dd::ONE;
    assert!(back.to_f64().abs() < 1e-31);
    let e = Dd::ONE.exp();
    // e = 2.718281828459045235360287471352662...
    let e_ref = Dd {
        hi: 2.718281828459045091e+00,
        lo: 1.445646891729250158e-16,
    };
    assert!((e - e_ref).to_f64().abs() < 1e-28, "{:?}", e - e_ref);
    let x = Dd::new(0.37);
    assert!((x.exp().ln() - x).to_f64().abs() < 1e-28);
    assert!((Dd::new(2.0).sqrt() * Dd::new(2.0).sqrt() - Dd::new(2.0)).to_f64().abs() < 1e-28);
    let t = Dd::new(0.8).tanh();
    assert!((t.to_f64() - 0.8f64.tanh()).abs() < 1e-15);
}
