//! Truncated formal series in `q^(1/D)` with exact rational coefficients.
//!
//! Exponents are stored as integer numerators over a fixed denominator `D`
//! (the lattice). Every series carries the largest exponent up to which its
//! coefficients are known; arithmetic propagates the tightest sound bound.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rat = BigRational;
/// Exponent value as a plain rational (`3/2` means `q^(3/2)`).
pub type QExp = Ratio<i64>;

pub const DEFAULT_D: i64 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("lattice mismatch: D={0} vs D={1}")]
    LatticeMismatch(i64, i64),
    #[error("exponent {0} is not on the 1/{1} lattice")]
    OffLattice(QExp, i64),
    #[error("cannot invert the empty series")]
    EmptyInverse,
    #[error("requested exponent {requested}/{d} exceeds validity order {order}/{d}")]
    BeyondOrder { requested: i64, order: i64, d: i64 },
    #[error("malformed series dump: {0}")]
    Parse(String),
}

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Convert an exponent value to lattice units for denominator `d`.
pub fn to_units(e: QExp, d: i64) -> Result<i64, SeriesError> {
    let scaled = e * Ratio::from_integer(d);
    if scaled.is_integer() {
        Ok(scaled.to_integer())
    } else {
        Err(SeriesError::OffLattice(e, d))
    }
}

/// `coeff * q^exp`; the zero monomial is not representable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub coeff: Rat,
    pub exp: QExp,
}

impl Monomial {
    pub fn new(coeff: Rat, exp: QExp) -> Self {
        assert!(!coeff.is_zero(), "zero monomial");
        Monomial { coeff, exp }
    }

    /// `q^e`
    pub fn q(e: QExp) -> Self {
        Monomial::new(Rat::one(), e)
    }

    pub fn qi(e: i64) -> Self {
        Monomial::q(QExp::from_integer(e))
    }

    pub fn one() -> Self {
        Monomial::qi(0)
    }

    pub fn neg(&self) -> Self {
        Monomial::new(-self.coeff.clone(), self.exp)
    }

    pub fn mul(&self, other: &Monomial) -> Self {
        Monomial::new(&self.coeff * &other.coeff, self.exp + other.exp)
    }

    pub fn div(&self, other: &Monomial) -> Self {
        Monomial::new(&self.coeff / &other.coeff, self.exp - other.exp)
    }

    pub fn pow(&self, n: i64) -> Self {
        let c = if n >= 0 {
            num_traits::pow(self.coeff.clone(), n as usize)
        } else {
            num_traits::pow(self.coeff.recip(), (-n) as usize)
        };
        Monomial::new(c, self.exp * n)
    }

    pub fn shift(&self, e: QExp) -> Self {
        Monomial::new(self.coeff.clone(), self.exp + e)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp.is_zero() {
            return write!(f, "{}", self.coeff);
        }
        let q = if self.exp.is_one() {
            "q".to_string()
        } else if self.exp.is_integer() && self.exp.is_positive() {
            format!("q^{}", self.exp)
        } else {
            format!("q^({})", self.exp)
        };
        if self.coeff.is_one() {
            write!(f, "{}", q)
        } else if (-self.coeff.clone()).is_one() {
            write!(f, "-{}", q)
        } else {
            write!(f, "{}*{}", self.coeff, q)
        }
    }
}

/// Outcome of [`QSeries::equal_up_to`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Comparison {
    Equal,
    Mismatch { exp: i64, left: Rat, right: Rat },
}

impl Comparison {
    pub fn is_equal(&self) -> bool {
        matches!(self, Comparison::Equal)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QSeries {
    d: i64,
    order: i64,
    terms: BTreeMap<i64, Rat>,
}

impl QSeries {
    pub fn zero(d: i64, order: i64) -> Self {
        assert!(d > 0, "lattice denominator must be positive");
        QSeries { d, order, terms: BTreeMap::new() }
    }

    pub fn one(d: i64, order: i64) -> Self {
        Self::constant(d, order, Rat::one())
    }

    pub fn constant(d: i64, order: i64, c: Rat) -> Self {
        Self::from_terms(d, order, [(0, c)])
    }

    /// Build from `(units, coeff)` pairs; duplicates are summed, zeros and
    /// terms past `order` are dropped.
    pub fn from_terms<I: IntoIterator<Item = (i64, Rat)>>(d: i64, order: i64, it: I) -> Self {
        let mut s = Self::zero(d, order);
        for (e, c) in it {
            s.add_term(e, c);
        }
        s
    }

    pub fn from_int_terms(d: i64, order: i64, it: &[(i64, i64)]) -> Self {
        Self::from_terms(d, order, it.iter().map(|&(e, c)| (e, rat(c))))
    }

    pub fn monomial(m: &Monomial, d: i64, order: i64) -> Result<Self, SeriesError> {
        let e = to_units(m.exp, d)?;
        Ok(Self::from_terms(d, order, [(e, m.coeff.clone())]))
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn order(&self) -> i64 {
        self.order
    }

    pub fn terms(&self) -> &BTreeMap<i64, Rat> {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn min_exp(&self) -> Option<i64> {
        self.terms.keys().next().copied()
    }

    pub fn max_exp(&self) -> Option<i64> {
        self.terms.keys().next_back().copied()
    }

    /// Lower bound on the valuation; an empty series is `O(q^(order+1))`.
    pub fn valuation(&self) -> i64 {
        self.min_exp().unwrap_or(self.order + 1)
    }

    pub fn add_term(&mut self, e: i64, c: Rat) {
        if e > self.order || c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn truncate(&self, order: i64) -> Self {
        let order = order.min(self.order);
        let terms = self.terms.range(..=order).map(|(e, c)| (*e, c.clone())).collect();
        QSeries { d: self.d, order, terms }
    }

    fn check_d(&self, other: &QSeries) -> Result<(), SeriesError> {
        if self.d == other.d {
            Ok(())
        } else {
            Err(SeriesError::LatticeMismatch(self.d, other.d))
        }
    }

    pub fn try_add(&self, other: &QSeries) -> Result<Self, SeriesError> {
        self.check_d(other)?;
        let mut out = self.truncate(self.order.min(other.order));
        for (e, c) in other.terms.range(..=out.order) {
            out.add_term(*e, c.clone());
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &QSeries) -> Result<Self, SeriesError> {
        self.try_add(&other.neg_ref())
    }

    fn neg_ref(&self) -> Self {
        QSeries {
            d: self.d,
            order: self.order,
            terms: self.terms.iter().map(|(e, c)| (*e, -c.clone())).collect(),
        }
    }

    pub fn try_mul(&self, other: &QSeries) -> Result<Self, SeriesError> {
        self.check_d(other)?;
        let order = (self.order + other.valuation()).min(other.order + self.valuation());
        Ok(self.mul_to(other, order))
    }

    /// Product truncated at `min(order, sound order)`.
    pub fn mul_trunc(&self, other: &QSeries, order: i64) -> Self {
        self.check_d(other).expect("lattice mismatch");
        let sound = (self.order + other.valuation()).min(other.order + self.valuation());
        self.mul_to(other, order.min(sound))
    }

    fn mul_to(&self, other: &QSeries, order: i64) -> Self {
        let (lo_a, lo_b) = match (self.min_exp(), other.min_exp()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Self::zero(self.d, order),
        };
        let base = lo_a + lo_b;
        if base > order {
            return Self::zero(self.d, order);
        }
        let width = (order - base + 1) as usize;
        let mut acc: Vec<Rat> = vec![Rat::zero(); width];
        let b_terms: Vec<(i64, &Rat)> = other.terms.iter().map(|(e, c)| (*e, c)).collect();
        for (ea, ca) in &self.terms {
            if ea + lo_b > order {
                break;
            }
            for (eb, cb) in &b_terms {
                let e = ea + eb;
                if e > order {
                    break;
                }
                acc[(e - base) as usize] += ca * *cb;
            }
        }
        let terms = acc
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (base + i as i64, c))
            .collect();
        QSeries { d: self.d, order, terms }
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Self::zero(self.d, self.order);
        }
        QSeries {
            d: self.d,
            order: self.order,
            terms: self.terms.iter().map(|(e, x)| (*e, x * c)).collect(),
        }
    }

    /// Multiply by `q^(units/D)`; the validity order moves with the terms.
    pub fn shift(&self, units: i64) -> Self {
        QSeries {
            d: self.d,
            order: self.order + units,
            terms: self.terms.iter().map(|(e, c)| (e + units, c.clone())).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Result<Self, SeriesError> {
        Ok(self.shift(to_units(m.exp, self.d)?).scale(&m.coeff))
    }

    /// Multiplicative inverse valid up to `min(order, sound order)`.
    ///
    /// For `a = c q^e (1 + ...)` the result starts at `q^(-e)`.
    pub fn invert_unit(&self, order: i64) -> Result<Self, SeriesError> {
        let (e0, c0) = match self.terms.iter().next() {
            Some((e, c)) => (*e, c.clone()),
            None => return Err(SeriesError::EmptyInverse),
        };
        let out_order = order.min(self.order - 2 * e0);
        let len = out_order + e0;
        if len < 0 {
            return Ok(Self::zero(self.d, out_order));
        }
        let inv0 = c0.recip();
        let rest: Vec<(i64, Rat)> = self
            .terms
            .iter()
            .skip(1)
            .map(|(e, c)| (e - e0, c * &inv0))
            .filter(|(k, _)| *k <= len)
            .collect();
        // b_n for the normalised unit 1 + rest
        let mut b: Vec<Rat> = Vec::with_capacity(len as usize + 1);
        b.push(Rat::one());
        for n in 1..=len {
            let mut s = Rat::zero();
            for (k, c) in &rest {
                if *k > n {
                    break;
                }
                let prev = &b[(n - k) as usize];
                if !prev.is_zero() {
                    s -= c * prev;
                }
            }
            b.push(s);
        }
        let terms = b
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (i as i64 - e0, c * &inv0))
            .collect();
        Ok(QSeries { d: self.d, order: out_order, terms })
    }

    pub fn try_div(&self, den: &QSeries) -> Result<Self, SeriesError> {
        self.check_d(den)?;
        let inv = den.invert_unit(i64::MAX / 4)?;
        self.try_mul(&inv)
    }

    /// Replace `q` by `q^k`.
    pub fn substitute_power(&self, k: QExp) -> Result<Self, SeriesError> {
        assert!(k > QExp::zero(), "substitution power must be positive");
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            let ne = QExp::from_integer(*e) * k;
            if !ne.is_integer() {
                return Err(SeriesError::OffLattice(ne / self.d, self.d));
            }
            terms.insert(ne.to_integer(), c.clone());
        }
        let order = (QExp::from_integer(self.order) * k).floor().to_integer();
        Ok(QSeries { d: self.d, order, terms })
    }

    /// Move to a different lattice denominator (exponent values unchanged).
    pub fn relattice(&self, d: i64) -> Result<Self, SeriesError> {
        let k = QExp::new(d, self.d);
        let mut s = self.substitute_power(k)?;
        s.d = d;
        Ok(s)
    }

    pub fn coefficient(&self, e: i64) -> Result<Rat, SeriesError> {
        if e > self.order {
            return Err(SeriesError::BeyondOrder { requested: e, order: self.order, d: self.d });
        }
        Ok(self.terms.get(&e).cloned().unwrap_or_else(Rat::zero))
    }

    pub fn coeff_at(&self, e: QExp) -> Result<Rat, SeriesError> {
        self.coefficient(to_units(e, self.d)?)
    }

    pub fn equal_up_to(&self, other: &QSeries, order: i64) -> Result<Comparison, SeriesError> {
        self.check_d(other)?;
        for s in [self, other] {
            if order > s.order {
                return Err(SeriesError::BeyondOrder { requested: order, order: s.order, d: s.d });
            }
        }
        let mut a = self.terms.range(..=order).peekable();
        let mut b = other.terms.range(..=order).peekable();
        loop {
            let mismatch = match (a.peek(), b.peek()) {
                (None, None) => return Ok(Comparison::Equal),
                (Some((ea, ca)), None) => Some((**ea, (*ca).clone(), Rat::zero())),
                (None, Some((eb, cb))) => Some((**eb, Rat::zero(), (*cb).clone())),
                (Some((ea, ca)), Some((eb, cb))) => {
                    if ea < eb {
                        Some((**ea, (*ca).clone(), Rat::zero()))
                    } else if eb < ea {
                        Some((**eb, Rat::zero(), (*cb).clone()))
                    } else if ca != cb {
                        Some((**ea, (*ca).clone(), (*cb).clone()))
                    } else {
                        None
                    }
                }
            };
            if let Some((exp, left, right)) = mismatch {
                return Ok(Comparison::Mismatch { exp, left, right });
            }
            a.next();
            b.next();
        }
    }

    pub fn is_integral(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    pub fn nonnegative(&self) -> bool {
        self.terms.values().all(|c| !c.is_negative())
    }

    /// Dump in the line format `order <num>/<D>` then `<num>/<D> <coeff>`.
    pub fn dump(&self) -> String {
        let mut s = format!("order {}/{}\n", self.order, self.d);
        for (e, c) in &self.terms {
            s.push_str(&format!("{}/{} {}\n", e, self.d, c));
        }
        s
    }

    pub fn parse_dump(text: &str) -> Result<Self, SeriesError> {
        let bad = |l: &str| SeriesError::Parse(l.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| bad("empty"))?;
        let rest = head.strip_prefix("order ").ok_or_else(|| bad(head))?;
        let (o, d) = split_frac(rest).ok_or_else(|| bad(head))?;
        let mut s = QSeries::zero(d, o);
        for l in lines {
            let (e, c) = l.trim().split_once(' ').ok_or_else(|| bad(l))?;
            let (num, dd) = split_frac(e).ok_or_else(|| bad(l))?;
            if dd != d {
                return Err(bad(l));
            }
            let c: Rat = c.trim().parse().map_err(|_| bad(l))?;
            s.add_term(num, c);
        }
        Ok(s)
    }

    /// Exponent value of a lattice position.
    pub fn exp_value(&self, units: i64) -> QExp {
        QExp::new(units, self.d)
    }

    /// Human-readable rendering, mainly for diagnostics.
    pub fn pretty(&self) -> String {
        let mut parts = Vec::new();
        for (e, c) in &self.terms {
            let ev = self.exp_value(*e);
            parts.push(if ev.is_zero() { format!("{}", c) } else { format!("{}*q^({})", c, ev) });
        }
        if parts.is_empty() {
            parts.push("0".into());
        }
        format!("{} + O(q^({}))", parts.join(" + "), self.exp_value(self.order + 1))
    }

    /// Sum of the terms as a float at `q = x`; only used for diagnostics.
    pub fn approx_at(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c.to_f64().unwrap_or(f64::NAN) * x.powf(*e as f64 / self.d as f64))
            .sum()
    }
}

/// Dense working buffer over a contiguous exponent window `[lo, order]`.
///
/// Used by product and summation kernels where in-place recurrences are
/// cheaper than map updates.
#[derive(Clone, Debug)]
pub struct Dense {
    pub d: i64,
    pub lo: i64,
    pub order: i64,
    pub c: Vec<Rat>,
}

impl Dense {
    pub fn zero(d: i64, lo: i64, order: i64) -> Self {
        let n = if order >= lo { (order - lo + 1) as usize } else { 0 };
        Dense { d, lo, order, c: vec![Rat::zero(); n] }
    }

    pub fn from_series(s: &QSeries) -> Self {
        let lo = s.min_exp().unwrap_or(0).min(s.order.max(0));
        let mut out = Dense::zero(s.d, lo, s.order);
        for (e, c) in &s.terms {
            out.c[(e - lo) as usize] = c.clone();
        }
        out
    }

    pub fn to_series(&self) -> QSeries {
        let terms = self
            .c
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (self.lo + i as i64, c.clone()))
            .collect();
        QSeries { d: self.d, order: self.order, terms }
    }

    /// In place: multiply by `(1 - a q^e)` with `e > 0`.
    pub fn mul_binomial(&mut self, a: &Rat, e: i64) {
        assert!(e > 0);
        let e = e as usize;
        for i in (e..self.c.len()).rev() {
            if !self.c[i - e].is_zero() {
                let t = a * &self.c[i - e];
                self.c[i] -= t;
            }
        }
    }

    /// In place: divide by `(1 - a q^e)` with `e > 0`.
    pub fn div_binomial(&mut self, a: &Rat, e: i64) {
        assert!(e > 0);
        let e = e as usize;
        for i in e..self.c.len() {
            if !self.c[i - e].is_zero() {
                let t = a * &self.c[i - e];
                self.c[i] += t;
            }
        }
    }

    /// Accumulate `coeff * q^shift * s` (restricted to the window).
    pub fn add_shifted(&mut self, s: &QSeries, shift: i64, coeff: &Rat) {
        for (e, c) in &s.terms {
            let x = e + shift;
            if x > self.order {
                break;
            }
            assert!(x >= self.lo, "term below dense window");
            self.c[(x - self.lo) as usize] += c * coeff;
        }
    }
}

fn split_frac(s: &str) -> Option<(i64, i64)> {
    let (a, b) = s.trim().split_once('/')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

impl Add for &QSeries {
    type Output = QSeries;
    fn add(self, rhs: &QSeries) -> QSeries {
        self.try_add(rhs).expect("lattice mismatch")
    }
}

impl Sub for &QSeries {
    type Output = QSeries;
    fn sub(self, rhs: &QSeries) -> QSeries {
        self.try_sub(rhs).expect("lattice mismatch")
    }
}

impl Mul for &QSeries {
    type Output = QSeries;
    fn mul(self, rhs: &QSeries) -> QSeries {
        self.try_mul(rhs).expect("lattice mismatch")
    }
}

impl Neg for &QSeries {
    type Output = QSeries;
    fn neg(self) -> QSeries {
        self.neg_ref()
    }
}

impl fmt::Display for QSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}
