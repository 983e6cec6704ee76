//! Conservative interval evaluation of smooth expressions.
//!
//! Used to certify that the image of a box stays inside another box. All
//! operations round outward in the sense of ordinary f64 arithmetic; no
//! directed rounding is attempted, so certificates carry float accuracy,
//! which is adequate for the tolerance regime of the rest of the crate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::symexpr::{Generator, SmoothExpr};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }

    pub fn mul(self, o: Interval) -> Interval {
        let products = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        Interval::new(
            products.iter().cloned().fold(f64::INFINITY, f64::min),
            products.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    pub fn pow(self, e: u32) -> Interval {
        let mut acc = Interval::point(1.0);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn scale(self, c: f64) -> Interval {
        self.mul(Interval::point(c))
    }

    pub fn exp(self) -> Interval {
        Interval::new(self.lo.exp(), self.hi.exp())
    }

    /// Range of sin over the interval: endpoint values plus any interior
    /// critical points pi/2 + k pi.
    pub fn sin(self) -> Interval {
        trig_range(self, |x| x.sin(), std::f64::consts::FRAC_PI_2)
    }

    pub fn cos(self) -> Interval {
        trig_range(self, |x| x.cos(), 0.0)
    }

    pub fn contains(self, other: Interval, slack: f64) -> bool {
        self.lo - slack <= other.lo && other.hi <= self.hi + slack
    }
}

fn trig_range(iv: Interval, f: impl Fn(f64) -> f64, first_critical: f64) -> Interval {
    use std::f64::consts::PI;
    if iv.hi - iv.lo >= 2.0 * PI {
        return Interval::new(-1.0, 1.0);
    }
    let mut lo = f(iv.lo).min(f(iv.hi));
    let mut hi = f(iv.lo).max(f(iv.hi));
    // critical points are first_critical + k pi
    let k_min = ((iv.lo - first_critical) / PI).ceil() as i64;
    let k_max = ((iv.hi - first_critical) / PI).floor() as i64;
    for k in k_min..=k_max {
        let x = first_critical + k as f64 * PI;
        if x >= iv.lo && x <= iv.hi {
            let v = f(x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Interval::new(lo.max(-1.0), hi.min(1.0))
}

/// Interval enclosure of an expression's range over a box of even values.
pub fn eval_interval(f: &SmoothExpr, env: &BTreeMap<String, Interval>) -> Result<Interval> {
    let mut acc = Interval::point(0.0);
    for (m, c) in f.terms() {
        let mut term = Interval::point(c.to_f64());
        for (g, p) in m.factors() {
            let base = match g {
                Generator::Var(v) => *env
                    .get(v)
                    .ok_or_else(|| Error::MissingBinding(v.clone()))?,
                Generator::Sin(a) => eval_interval(a, env)?.sin(),
                Generator::Cos(a) => eval_interval(a, env)?.cos(),
                Generator::Exp(a) => eval_interval(a, env)?.exp(),
            };
            term = term.mul(base.pow(*p));
        }
        acc = acc.add(term);
    }
    Ok(acc)
}
