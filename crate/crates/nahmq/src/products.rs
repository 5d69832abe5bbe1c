//! q-Pochhammer symbols, theta triples and product expressions.

use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::series::{rat, to_units, Dense, Monomial, QExp, QSeries, Rat, SeriesError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProductError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("factor (1 - {0}) vanishes identically")]
    Vanishing(String),
    #[error("base must be positive, got {0}")]
    BadBase(QExp),
    #[error("theta triple needs 0 < a < m, got a={0}, m={1}")]
    ThetaRange(QExp, QExp),
    #[error("non-terminating product: argument exponent {0} cannot be pushed past the order")]
    NonTerminating(QExp),
}

/// Multiply `s` by `(1 - c q^e)` for any lattice exponent `e`.
fn mul_factor(s: &QSeries, c: &Rat, e: i64) -> QSeries {
    if e > 0 {
        let mut w = Dense::from_series(s);
        w.mul_binomial(c, e);
        w.to_series()
    } else {
        let f = QSeries::from_terms(s.d(), i64::MAX / 4, [(0, Rat::one()), (e, -c.clone())]);
        s.mul_trunc(&f, s.order())
    }
}

/// Divide `s` by `(1 - c q^e)`.
fn div_factor(s: &QSeries, c: &Rat, e: i64) -> Result<QSeries, ProductError> {
    if e > 0 {
        let mut w = Dense::from_series(s);
        w.div_binomial(c, e);
        return Ok(w.to_series());
    }
    if e == 0 && c.is_one() {
        return Err(ProductError::Vanishing(format!("{}", c)));
    }
    let f = QSeries::from_terms(s.d(), i64::MAX / 4, [(0, Rat::one()), (e, -c.clone())]);
    let inv = f.invert_unit(s.order() + 2 * e.min(0).abs())?;
    Ok(s.mul_trunc(&inv, s.order()))
}

/// `(a; q^base)_n` for any integer `n`; negative `n` uses
/// `(a;q)_{-m} = 1/(a q^{-m};q)_m`.
pub fn poch_finite(
    a: &Monomial,
    base: QExp,
    n: i64,
    d: i64,
    order: i64,
) -> Result<QSeries, ProductError> {
    if base <= QExp::zero() {
        return Err(ProductError::BadBase(base));
    }
    let e0 = to_units(a.exp, d)?;
    let step = to_units(base, d)?;
    if n >= 0 {
        let exps: Vec<i64> = (0..n).map(|k| e0 + step * k).collect();
        let headroom: i64 = exps.iter().map(|e| (*e).min(0)).sum();
        let mut s = QSeries::one(d, order - headroom);
        for e in exps {
            s = mul_factor(&s, &a.coeff, e);
        }
        Ok(s.truncate(order))
    } else {
        let m = -n;
        let shifted = Monomial::new(a.coeff.clone(), a.exp + base * n);
        let e_start = e0 + step * n;
        let exps: Vec<i64> = (0..m).map(|k| e_start + step * k).collect();
        let mut v = 0;
        for e in &exps {
            if *e == 0 && a.coeff.is_one() {
                return Err(ProductError::Vanishing(format!("{}", shifted)));
            }
            v += (*e).min(0);
        }
        // the inverse has valuation -v; give the polynomial enough room
        let mut s = QSeries::one(d, order + 2 * v.abs());
        for e in exps {
            s = div_factor(&s, &a.coeff, e)?;
        }
        Ok(s.truncate(order))
    }
}

/// Exponents (lattice units) of the factors of `(a; q^base)_inf` that can
/// influence coefficients up to `order`.
fn infinite_exps(a_units: i64, step: i64, order: i64) -> Vec<i64> {
    let mut neg = 0;
    let mut k = 0;
    while a_units + step * k < 0 {
        neg += a_units + step * k;
        k += 1;
    }
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let e = a_units + step * k;
        if e + neg > order && e > 0 {
            break;
        }
        out.push(e);
        k += 1;
    }
    out
}

/// `(a; q^base)_inf` truncated at `order`.
pub fn poch_infinite(a: &Monomial, base: QExp, d: i64, order: i64) -> Result<QSeries, ProductError> {
    poch_infinite_pow(a, base, 1, &QSeries::one(d, order))
}

/// `s * (a; q^base)_inf^power`.
pub fn poch_infinite_pow(
    a: &Monomial,
    base: QExp,
    power: i64,
    s: &QSeries,
) -> Result<QSeries, ProductError> {
    if base <= QExp::zero() {
        return Err(ProductError::BadBase(base));
    }
    let d = s.d();
    let e0 = to_units(a.exp, d)?;
    let step = to_units(base, d)?;
    let exps = infinite_exps(e0, step, s.order());
    let mut out = s.clone();
    for e in exps {
        for _ in 0..power.abs() {
            out = if power > 0 { mul_factor(&out, &a.coeff, e) } else { div_factor(&out, &a.coeff, e)? };
        }
    }
    Ok(out)
}

/// Bilateral sum `sum_n (-1)^n q^(base*C(n,2)) z^n`, an independent
/// evaluation of `(q^base, z, q^base/z; q^base)_inf`.
pub fn triple_product_oracle(
    z: &Monomial,
    base: QExp,
    d: i64,
    order: i64,
) -> Result<QSeries, ProductError> {
    if base <= QExp::zero() {
        return Err(ProductError::BadBase(base));
    }
    let b = to_units(base, d)?;
    let ez = to_units(z.exp, d)?;
    let f = |n: i64| b * n * (n - 1) / 2 + ez * n;
    // vertex of the convex quadratic f, rounded outward
    let vertex = (QExp::new(1, 2) - z.exp / base).to_integer();
    let mut s = QSeries::zero(d, order);
    let mut push = |n: i64| {
        let c = if n >= 0 {
            num_traits::pow(z.coeff.clone(), n as usize)
        } else {
            num_traits::pow(z.coeff.recip(), (-n) as usize)
        };
        let c = if n.rem_euclid(2) == 1 { -c } else { c };
        s.add_term(f(n), c);
    };
    let mut n = vertex;
    while n <= vertex + 1 || f(n) <= order {
        push(n);
        n += 1;
    }
    let mut n = vertex - 1;
    while n >= vertex - 2 || f(n) <= order {
        push(n);
        n -= 1;
    }
    Ok(s)
}

/// `(q^a, q^(m-a), q^m; q^m)_inf`.
pub fn theta_triple(a: QExp, m: QExp, d: i64, order: i64) -> Result<QSeries, ProductError> {
    if a <= QExp::zero() || a >= m {
        return Err(ProductError::ThetaRange(a, m));
    }
    eval_product(&ProductExpr::one().theta(a, m, 1), d, order)
}

/// One factor `(arg; q^base)_inf^power`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub arg: Monomial,
    pub base: QExp,
    pub power: i64,
}

/// `prefactor * prod factors`, the prefactor a finite sum of monomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductExpr {
    pub prefactor: Vec<Monomial>,
    pub factors: Vec<Factor>,
}

impl ProductExpr {
    pub fn one() -> Self {
        ProductExpr { prefactor: vec![Monomial::one()], factors: Vec::new() }
    }

    pub fn scaled(c: i64) -> Self {
        ProductExpr { prefactor: vec![Monomial::new(rat(c), QExp::zero())], factors: Vec::new() }
    }

    /// `(c q^e; q^base)_inf^power`
    pub fn poch(mut self, arg: Monomial, base: QExp, power: i64) -> Self {
        self.factors.push(Factor { arg, base, power });
        self
    }

    /// `(q^a; q^m)_inf^power`
    pub fn p(self, a: QExp, m: QExp, power: i64) -> Self {
        self.poch(Monomial::q(a), m, power)
    }

    pub fn pi(self, a: i64, m: i64, power: i64) -> Self {
        self.p(QExp::from_integer(a), QExp::from_integer(m), power)
    }

    /// `(q^a, q^(m-a), q^m; q^m)_inf^power`
    pub fn theta(self, a: QExp, m: QExp, power: i64) -> Self {
        self.p(a, m, power).p(m - a, m, power).p(m, m, power)
    }

    /// `J_m^power`
    pub fn jm(self, m: i64, power: i64) -> Self {
        self.pi(m, m, power)
    }

    /// `J_{a,m}^power`
    pub fn jam(self, a: i64, m: i64, power: i64) -> Self {
        self.theta(QExp::from_integer(a), QExp::from_integer(m), power)
    }

    pub fn times(mut self, other: &ProductExpr) -> Self {
        let mut pre = Vec::new();
        for x in &self.prefactor {
            for y in &other.prefactor {
                pre.push(x.mul(y));
            }
        }
        self.prefactor = pre;
        self.factors.extend(other.factors.iter().cloned());
        self
    }

    pub fn inverse_factors(&self) -> Self {
        ProductExpr {
            prefactor: self.prefactor.clone(),
            factors: self
                .factors
                .iter()
                .map(|f| Factor { arg: f.arg.clone(), base: f.base, power: -f.power })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ProductError> {
        for f in &self.factors {
            if f.base <= QExp::zero() {
                return Err(ProductError::BadBase(f.base));
            }
            if f.power < 0 && f.arg.exp.is_zero() && f.arg.coeff.is_one() {
                return Err(ProductError::Vanishing(format!("{}", f.arg)));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ProductExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pre: Vec<String> = self.prefactor.iter().map(|m| m.to_string()).collect();
        write!(f, "({})", pre.join(" + "))?;
        for x in &self.factors {
            write!(f, " * ({}; q^({}))^{}", x.arg, x.base, x.power)?;
        }
        Ok(())
    }
}

/// `prefactor * prod factors` truncated at `order`.
pub fn eval_product(expr: &ProductExpr, d: i64, order: i64) -> Result<QSeries, ProductError> {
    expr.validate()?;
    // negative-exponent factors lower the valuation; widen the working order
    let mut slack = 0;
    for f in &expr.factors {
        let e0 = to_units(f.arg.exp, d)?;
        let step = to_units(f.base, d)?;
        let mut k = 0;
        while e0 + step * k < 0 {
            slack += (e0 + step * k).abs() * f.power.abs();
            k += 1;
        }
    }
    let work = order + 2 * slack;
    let mut s = QSeries::zero(d, work);
    for m in &expr.prefactor {
        s.add_term(to_units(m.exp, d)?, m.coeff.clone());
    }
    for f in &expr.factors {
        s = poch_infinite_pow(&f.arg, f.base, f.power, &s)?;
    }
    Ok(s.truncate(order))
}

/// Sum of several product expressions.
pub fn eval_product_sum(exprs: &[ProductExpr], d: i64, order: i64) -> Result<QSeries, ProductError> {
    let mut acc = QSeries::zero(d, order);
    for e in exprs {
        acc = &acc + &eval_product(e, d, order)?;
    }
    Ok(acc)
}
