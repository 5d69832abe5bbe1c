//! Bailey pairs: verification, the standard transforms and chains.
//!
//! A pair is materialised as two vectors `alpha[0..=n_max]`,
//! `beta[0..=n_max]` of truncated series relative to a monomial `a`.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::expr::{parse_monomial, ParseError};
use crate::products::{poch_finite, poch_infinite, ProductError};
use crate::series::{to_units, Comparison, Monomial, QExp, QSeries, Rat, SeriesError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaileyError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unknown Bailey pair {0}")]
    UnknownPair(String),
    #[error("unknown transform {0}")]
    UnknownStep(String),
    #[error("transform {step} not applicable: {why}")]
    Incompatible { step: String, why: String },
    #[error("alpha_{0} does not have the shape required by DJKLIM")]
    Shape(usize),
    #[error("terms of the limit sum at n={n} still reach exponent {exp}/{d}, need more than {order}/{d}")]
    Valuation { n: usize, exp: i64, order: i64, d: i64 },
}

fn qe(n: i64) -> QExp {
    QExp::from_integer(n)
}

/// One step of a Bailey chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransformStep {
    S1,
    S3,
    S5,
    /// Bailey's lemma with finite `rho1, rho2`.
    General(Monomial, Monomial),
    /// `rho2 -> infinity` with finite `rho1`.
    Rho1(Monomial),
    /// Relative parameter `a -> a/q` with free `b`.
    Djk(Monomial),
    /// `b -> infinity` in the DJK step, for alphas of the `u` shape.
    DjkLimit(Monomial),
}

impl fmt::Display for TransformStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformStep::S1 => write!(f, "S1"),
            TransformStep::S3 => write!(f, "S3"),
            TransformStep::S5 => write!(f, "S5"),
            TransformStep::General(a, b) => write!(f, "GEN({}, {})", a, b),
            TransformStep::Rho1(a) => write!(f, "RHO1({})", a),
            TransformStep::Djk(b) => write!(f, "DJK({})", b),
            TransformStep::DjkLimit(u) => write!(f, "DJKLIM({})", u),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaileyPair {
    pub name: String,
    pub a: Monomial,
    pub d: i64,
    pub order: i64,
    pub alpha: Vec<QSeries>,
    pub beta: Vec<QSeries>,
}

impl BaileyPair {
    pub fn n_max(&self) -> usize {
        self.alpha.len().saturating_sub(1)
    }

    /// `alpha = delta_{n,0}`.
    pub fn unit(a: Monomial, n_max: usize, d: i64, order: i64) -> Result<Self, BaileyError> {
        let mut cache = Denoms::new(&a, d, order)?;
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        for n in 0..=n_max {
            alpha.push(if n == 0 { QSeries::one(d, order) } else { QSeries::zero(d, order) });
            let b = cache.inv_q(n)?.mul_trunc(&cache.inv_aq(n)?, order);
            beta.push(b);
        }
        Ok(BaileyPair { name: "unit".into(), a, d, order, alpha, beta })
    }
}

/// Memoised `1/(q;q)_m` and `1/(aq;q)_m`.
struct Denoms {
    a: Monomial,
    d: i64,
    order: i64,
    q: HashMap<usize, QSeries>,
    aq: HashMap<usize, QSeries>,
}

impl Denoms {
    fn new(a: &Monomial, d: i64, order: i64) -> Result<Self, BaileyError> {
        let aq = a.shift(qe(1));
        if aq.exp <= QExp::zero() {
            return Err(BaileyError::Incompatible {
                step: "pair".into(),
                why: format!("(aq;q)_n is not a unit series for a = {}", a),
            });
        }
        Ok(Denoms { a: a.clone(), d, order, q: HashMap::new(), aq: HashMap::new() })
    }

    fn inv_q(&mut self, m: usize) -> Result<QSeries, BaileyError> {
        if let Some(s) = self.q.get(&m) {
            return Ok(s.clone());
        }
        let s = poch_finite(&Monomial::qi(1), qe(1), m as i64, self.d, self.order)?.invert_unit(self.order)?;
        self.q.insert(m, s.clone());
        Ok(s)
    }

    fn inv_aq(&mut self, m: usize) -> Result<QSeries, BaileyError> {
        if let Some(s) = self.aq.get(&m) {
            return Ok(s.clone());
        }
        let arg = self.a.shift(qe(1));
        let s = poch_finite(&arg, qe(1), m as i64, self.d, self.order)?.invert_unit(self.order)?;
        self.aq.insert(m, s.clone());
        Ok(s)
    }
}

fn mono(m: &Monomial, d: i64, order: i64) -> Result<QSeries, BaileyError> {
    Ok(QSeries::monomial(m, d, order)?)
}

fn sign(n: usize) -> Rat {
    if n % 2 == 0 {
        Rat::one()
    } else {
        -Rat::one()
    }
}

/// `sum_{j=0}^{len-1} q^{j*step}` starting at `q^start`, all in lattice units.
fn geometric(d: i64, order: i64, start: i64, step: i64, len: i64) -> QSeries {
    QSeries::from_terms(d, order, (0..len).map(|j| (start + j * step, Rat::one())))
}

fn poch(arg: &Monomial, n: usize, d: i64, order: i64) -> Result<QSeries, BaileyError> {
    Ok(poch_finite(arg, qe(1), n as i64, d, order)?)
}

fn inv_poch(arg: &Monomial, n: usize, d: i64, order: i64) -> Result<QSeries, BaileyError> {
    Ok(poch(arg, n, d, order)?.invert_unit(order)?)
}

fn q2_inv(n: usize, d: i64, order: i64) -> Result<QSeries, BaileyError> {
    Ok(poch_finite(&Monomial::qi(2), qe(2), n as i64, d, order)?.invert_unit(order)?)
}

/// Built-in pairs by name: `G1`, `G2`, `G3`, `G1star`, `unit` (with a=1).
pub fn builtin_pair(name: &str, n_max: usize, d: i64, order: i64) -> Result<BaileyPair, BaileyError> {
    let half = QExp::new(1, 2);
    let mut alpha = vec![QSeries::one(d, order)];
    let mut beta = vec![QSeries::one(d, order)];
    let a = match name {
        "G1" | "G3" | "unit" => Monomial::one(),
        "G2" | "G1star" => Monomial::qi(1),
        _ => return Err(BaileyError::UnknownPair(name.to_string())),
    };
    if name == "unit" {
        return BaileyPair::unit(a, n_max, d, order);
    }
    for n in 1..=n_max {
        let ni = n as i64;
        let nq = qe(ni);
        let (al, be) = match name {
            "G1" => {
                // (-1)^n q^{n^2/2 + C(n,2)/2} (1 + q^{n/2})
                let e = nq * nq / 2 + qe(ni * (ni - 1) / 2) / 2;
                let base = to_units(e, d)?;
                let s = QSeries::from_terms(d, order, [(base, sign(n)), (base + to_units(nq / 2, d)?, sign(n))]);
                let b = q2_inv(n, d, order)?.mul_trunc(&inv_poch(&Monomial::new(-Rat::one(), half), n, d, order)?, order);
                (s, b)
            }
            "G2" => {
                // (-1)^n q^{(3/2)C(n+1,2)} q^{-n/2} sum_{j=0}^{2n} q^{j/2}
                let e = qe(ni * (ni + 1) / 2) * QExp::new(3, 2) - nq / 2;
                let s = geometric(d, order, to_units(e, d)?, to_units(half, d)?, 2 * ni + 1).scale(&sign(n));
                let b = q2_inv(n, d, order)?
                    .mul_trunc(&inv_poch(&Monomial::new(-Rat::one(), QExp::new(3, 2)), n, d, order)?, order);
                (s, b)
            }
            "G3" => {
                // (-1)^n q^{(3/2)C(n,2)} (1 + q^{3n/2})
                let e = qe(ni * (ni - 1) / 2) * QExp::new(3, 2);
                let base = to_units(e, d)?;
                let s = QSeries::from_terms(
                    d,
                    order,
                    [(base, sign(n)), (base + to_units(nq * QExp::new(3, 2), d)?, sign(n))],
                );
                let b = q2_inv(n, d, order)?
                    .mul_trunc(&inv_poch(&Monomial::new(-Rat::one(), half), n, d, order)?, order)
                    .shift(to_units(nq, d)?)
                    .truncate(order);
                (s, b)
            }
            "G1star" => {
                // (-1)^n q^{(3/2)C(n+1,2)} q^{-n} sum_{j=0}^{2n} q^j
                let e = qe(ni * (ni + 1) / 2) * QExp::new(3, 2) - nq;
                let s = geometric(d, order, to_units(e, d)?, d, 2 * ni + 1).scale(&sign(n));
                let b = q2_inv(n, d, order)?.mul_trunc(&inv_poch(&Monomial::new(-Rat::one(), half), n, d, order)?, order);
                (s, b)
            }
            _ => unreachable!(),
        };
        alpha.push(al.truncate(order));
        beta.push(be);
    }
    Ok(BaileyPair { name: name.to_string(), a, d, order, alpha, beta })
}

/// Per-index outcome of [`verify_pair`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairReport {
    pub results: Vec<(usize, Comparison)>,
}

impl PairReport {
    pub fn pass(&self) -> bool {
        self.results.iter().all(|(_, c)| c.is_equal())
    }

    pub fn first_failure(&self) -> Option<&(usize, Comparison)> {
        self.results.iter().find(|(_, c)| !c.is_equal())
    }
}

/// `beta_n = sum_k alpha_k / ((q;q)_{n-k} (aq;q)_{n+k})` for `n <= n_max`.
pub fn verify_pair(p: &BaileyPair, n_max: usize, order: i64) -> Result<PairReport, BaileyError> {
    let n_max = n_max.min(p.n_max());
    let order = order.min(p.order);
    let mut dn = Denoms::new(&p.a, p.d, order)?;
    let mut results = Vec::new();
    for n in 0..=n_max {
        let mut acc = QSeries::zero(p.d, order);
        for k in 0..=n {
            if p.alpha[k].is_empty() {
                continue;
            }
            let t = p.alpha[k].mul_trunc(&dn.inv_q(n - k)?, order).mul_trunc(&dn.inv_aq(n + k)?, order);
            acc = &acc + &t;
        }
        let cmp = p.beta[n].truncate(order).equal_up_to(&acc, order.min(acc.order()).min(p.beta[n].order()))?;
        results.push((n, cmp));
    }
    Ok(PairReport { results })
}

fn incompatible(step: &TransformStep, why: impl Into<String>) -> BaileyError {
    BaileyError::Incompatible { step: step.to_string(), why: why.into() }
}

/// `c^n` as a series, with `c` a monomial.
fn mpow(c: &Monomial, n: usize, d: i64, order: i64) -> Result<QSeries, BaileyError> {
    mono(&c.pow(n as i64), d, order)
}

/// Apply one transform. Orders are kept at the pair's order.
pub fn apply_transform(p: &BaileyPair, t: &TransformStep) -> Result<BaileyPair, BaileyError> {
    let (d, order) = (p.d, p.order);
    let n_max = p.n_max();
    let a = &p.a;
    let mut inv_q: Vec<QSeries> = Vec::new();
    for m in 0..=n_max {
        inv_q.push(inv_poch(&Monomial::qi(1), m, d, order)?);
    }
    let mut alpha = Vec::with_capacity(n_max + 1);
    let mut beta = Vec::with_capacity(n_max + 1);
    let mut new_a = a.clone();

    // Generic shape: alpha'_n = A(n) alpha_n, beta'_n = D(n) sum_r W(n-r) C(r) beta_r
    type Weights = (Vec<QSeries>, Vec<QSeries>, Vec<QSeries>, Vec<QSeries>);
    let lemma = |fa: &dyn Fn(usize) -> Result<QSeries, BaileyError>,
                 fd: &dyn Fn(usize) -> Result<QSeries, BaileyError>,
                 fw: &dyn Fn(usize) -> Result<QSeries, BaileyError>,
                 fc: &dyn Fn(usize) -> Result<QSeries, BaileyError>|
     -> Result<Weights, BaileyError> {
        let mut va = Vec::new();
        let mut vd = Vec::new();
        let mut vw = Vec::new();
        let mut vc = Vec::new();
        for n in 0..=n_max {
            va.push(fa(n)?);
            vd.push(fd(n)?);
            vw.push(fw(n)?);
            vc.push(fc(n)?);
        }
        Ok((va, vd, vw, vc))
    };

    let weights: Option<Weights> = match t {
        TransformStep::S1 => Some(lemma(
            &|n| Ok(mpow(a, n, d, order)?.shift(to_units(qe((n * n) as i64), d)?).truncate(order)),
            &|_| Ok(QSeries::one(d, order)),
            &|m| Ok(inv_q[m].clone()),
            &|r| Ok(mpow(a, r, d, order)?.shift(to_units(qe((r * r) as i64), d)?).truncate(order)),
        )?),
        TransformStep::S3 => {
            let mh = Monomial::new(-Rat::one(), QExp::new(1, 2));
            let mah = a.mul(&mh);
            Some(lemma(
                &|n| {
                    let x = poch(&mh, n, d, order)?.mul_trunc(&inv_poch(&mah, n, d, order)?, order);
                    let e = to_units(qe((n * n) as i64) / 2, d)?;
                    Ok(x.mul_trunc(&mpow(a, n, d, order)?, order).shift(e).truncate(order))
                },
                &|n| inv_poch(&mah, n, d, order),
                &|m| Ok(inv_q[m].clone()),
                &|r| {
                    let e = to_units(qe((r * r) as i64) / 2, d)?;
                    Ok(poch(&mh, r, d, order)?.mul_trunc(&mpow(a, r, d, order)?, order).shift(e).truncate(order))
                },
            )?)
        }
        TransformStep::S5 => {
            if !a.coeff.is_one() || !to_units(a.exp / 2, d).is_ok() {
                return Err(incompatible(t, format!("a = {} has no square root on the lattice", a)));
            }
            let s = Monomial::q(a.exp / 2);
            let ms = s.neg();
            let msq = ms.shift(qe(1));
            Some(lemma(
                &|n| {
                    let x = poch(&msq, n, d, order)?.mul_trunc(&inv_poch(&ms, n, d, order)?, order);
                    let e = to_units(qe((n * n) as i64 - n as i64) / 2, d)?;
                    Ok(x.mul_trunc(&mpow(&s, n, d, order)?, order).shift(e).truncate(order))
                },
                &|n| inv_poch(&ms, n, d, order),
                &|m| Ok(inv_q[m].clone()),
                &|r| {
                    let e = to_units(qe((r * r) as i64 - r as i64) / 2, d)?;
                    Ok(poch(&msq, r, d, order)?.mul_trunc(&mpow(&s, r, d, order)?, order).shift(e).truncate(order))
                },
            )?)
        }
        TransformStep::General(r1, r2) => {
            let aq = a.shift(qe(1));
            let c = aq.div(&r1.mul(r2));
            let b1 = aq.div(r1);
            let b2 = aq.div(r2);
            for b in [&b1, &b2] {
                if b.exp.is_zero() && b.coeff.is_one() {
                    return Err(incompatible(t, "aq/rho equals 1"));
                }
            }
            if c.exp.is_negative() || (c.exp.is_zero() && c.coeff.is_one()) {
                return Err(incompatible(t, "aq/(rho1 rho2) must have positive exponent"));
            }
            let num = |n: usize| -> Result<QSeries, BaileyError> {
                Ok(poch(r1, n, d, order)?.mul_trunc(&poch(r2, n, d, order)?, order))
            };
            let den = |n: usize| -> Result<QSeries, BaileyError> {
                Ok(inv_poch(&b1, n, d, order)?.mul_trunc(&inv_poch(&b2, n, d, order)?, order))
            };
            Some(lemma(
                &|n| Ok(num(n)?.mul_trunc(&den(n)?, order).mul_trunc(&mpow(&c, n, d, order)?, order)),
                &den,
                &|m| Ok(poch(&c, m, d, order)?.mul_trunc(&inv_q[m], order)),
                &|r| Ok(num(r)?.mul_trunc(&mpow(&c, r, d, order)?, order)),
            )?)
        }
        TransformStep::Rho1(r1) => {
            let aq = a.shift(qe(1));
            let b1 = aq.div(r1);
            if b1.exp.is_zero() && b1.coeff.is_one() {
                return Err(incompatible(t, "aq/rho1 equals 1"));
            }
            let c = b1.neg();
            let num = |n: usize| -> Result<QSeries, BaileyError> {
                let e = to_units(qe((n * n.saturating_sub(1) / 2) as i64), d)?;
                Ok(poch(r1, n, d, order)?.mul_trunc(&mpow(&c, n, d, order)?, order).shift(e).truncate(order))
            };
            Some(lemma(
                &|n| Ok(num(n)?.mul_trunc(&inv_poch(&b1, n, d, order)?, order)),
                &|n| inv_poch(&b1, n, d, order),
                &|m| Ok(inv_q[m].clone()),
                &num,
            )?)
        }
        TransformStep::Djk(_) | TransformStep::DjkLimit(_) => None,
    };

    if let Some((wa, wd, ww, wc)) = weights {
        for n in 0..=n_max {
            alpha.push(wa[n].mul_trunc(&p.alpha[n], order));
            let mut acc = QSeries::zero(d, order);
            for r in 0..=n {
                let t = ww[n - r].mul_trunc(&wc[r], order).mul_trunc(&p.beta[r], order);
                acc = &acc + &t;
            }
            beta.push(wd[n].mul_trunc(&acc, order));
        }
    } else {
        if !a.coeff.is_one() || !a.exp.is_positive() {
            return Err(incompatible(t, format!("needs a = q^e with e > 0, got {}", a)));
        }
        new_a = a.shift(qe(-1));
        match t {
            TransformStep::Djk(b) => {
                if b.exp.is_zero() && b.coeff.is_one() {
                    return Err(incompatible(t, "b = 1"));
                }
                let one_minus_b = QSeries::from_terms(d, order, [(0, Rat::one()), (to_units(b.exp, d)?, -b.coeff.clone())]);
                let inv_1b = one_minus_b.invert_unit(order)?;
                let ratios = djk_ratios(a, d, order)?;
                for n in 0..=n_max {
                    // (1 - b q^n)/(1-b) * R_n alpha_n - q^{n-1}(a q^{n-1} - b)/(1-b) * R_{n-1} alpha_{n-1}
                    let bqn = b.shift(qe(n as i64));
                    let f1 = QSeries::from_terms(d, order, [(0, Rat::one()), (to_units(bqn.exp, d)?, -bqn.coeff.clone())]);
                    let mut x = f1.mul_trunc(&inv_1b, order).mul_trunc(&ratios[n], order).mul_trunc(&p.alpha[n], order);
                    if n > 0 {
                        let m = n - 1;
                        let aq = a.shift(qe(m as i64));
                        let f2 = QSeries::from_terms(
                            d,
                            order,
                            [(to_units(aq.exp, d)?, aq.coeff.clone()), (to_units(b.exp, d)?, -b.coeff.clone())],
                        )
                        .shift(to_units(qe(m as i64), d)?)
                        .truncate(order);
                        let y = f2.mul_trunc(&inv_1b, order).mul_trunc(&ratios[m], order).mul_trunc(&p.alpha[m], order);
                        x = &x - &y;
                    }
                    alpha.push(x);
                    let r = poch(&b.shift(qe(1)), n, d, order)?.mul_trunc(&inv_poch(b, n, d, order)?, order);
                    beta.push(r.mul_trunc(&p.beta[n], order));
                }
            }
            TransformStep::DjkLimit(u) => {
                if a.exp != qe(1) {
                    return Err(incompatible(t, "needs a = q"));
                }
                for n in 0..=n_max {
                    let want = djk_shape_alpha(u, n, d, order)?;
                    if !p.alpha[n].equal_up_to(&want, order.min(p.alpha[n].order()))?.is_equal() {
                        return Err(BaileyError::Shape(n));
                    }
                }
                for n in 0..=n_max {
                    alpha.push(djk_limit_closed(u, n, d, order)?);
                    beta.push(p.beta[n].shift(to_units(qe(n as i64), d)?).truncate(order));
                }
            }
            _ => unreachable!(),
        }
    }
    Ok(BaileyPair { name: format!("{} |> {}", p.name, t), a: new_a, d, order, alpha, beta })
}

/// `(1 - a)/(1 - a q^{2m})` for `m = 0..`, with the `m = 0` value 1.
fn djk_ratios(a: &Monomial, d: i64, order: i64) -> Result<Vec<QSeries>, BaileyError> {
    let ea = to_units(a.exp, d)?;
    let one_minus_a = QSeries::from_terms(d, order, [(0, Rat::one()), (ea, -a.coeff.clone())]);
    let mut v = vec![QSeries::one(d, order)];
    for m in 1..=order.max(0) as usize / d as usize + 2 {
        let den = QSeries::from_terms(d, order, [(0, Rat::one()), (ea + 2 * m as i64 * d, -a.coeff.clone())]);
        v.push(one_minus_a.mul_trunc(&den.invert_unit(order)?, order));
    }
    Ok(v)
}

/// `(-1)^n u^{C(n+1,2)} (q^{-n} - q^{n+1})/(1-q)`.
pub fn djk_shape_alpha(u: &Monomial, n: usize, d: i64, order: i64) -> Result<QSeries, BaileyError> {
    let ni = n as i64;
    let un = u.pow(ni * (ni + 1) / 2);
    let g = geometric(d, order + 2 * ni * d, -ni * d, d, 2 * ni + 1);
    let s = g.mul_monomial(&un)?.scale(&sign(n));
    Ok(s.truncate(order))
}

/// `(-1)^n u^{C(n,2)} (1 + u^n)` with the `n = 0` value 1.
pub fn djk_limit_closed(u: &Monomial, n: usize, d: i64, order: i64) -> Result<QSeries, BaileyError> {
    if n == 0 {
        return Ok(QSeries::one(d, order));
    }
    let ni = n as i64;
    let base = u.pow(ni * (ni - 1) / 2);
    let s = &mono(&base, d, order)? + &mono(&base.mul(&u.pow(ni)), d, order)?;
    Ok(s.scale(&sign(n)))
}

/// The `b -> infinity` DJK alpha computed from the general formula.
pub fn djk_limit_alpha(p: &BaileyPair, n: usize) -> Result<QSeries, BaileyError> {
    let (d, order) = (p.d, p.order);
    let ratios = djk_ratios(&p.a, d, order)?;
    let mut x = p.alpha[n].mul_trunc(&ratios[n], order).shift(to_units(qe(n as i64), d)?).truncate(order);
    if n > 0 {
        let m = n - 1;
        let y = p.alpha[m].mul_trunc(&ratios[m], order).shift(to_units(qe(m as i64), d)?).truncate(order);
        x = &x - &y;
    }
    Ok(x)
}

pub fn chain(p0: &BaileyPair, steps: &[TransformStep]) -> Result<BaileyPair, BaileyError> {
    let mut p = p0.clone();
    for s in steps {
        p = apply_transform(&p, s)?;
    }
    Ok(p)
}

/// Parse `NAME (|> STEP[(params)])*`.
pub fn parse_chain(s: &str) -> Result<(String, Vec<TransformStep>), BaileyError> {
    let mut parts = s.split("|>").map(|x| x.trim());
    let name = parts.next().filter(|x| !x.is_empty()).ok_or_else(|| BaileyError::UnknownPair(s.to_string()))?;
    let mut steps = Vec::new();
    for part in parts {
        let (head, args) = match part.find('(') {
            Some(i) if part.ends_with(')') => (part[..i].trim(), split_args(&part[i + 1..part.len() - 1])),
            Some(_) => return Err(BaileyError::UnknownStep(part.to_string())),
            None => (part, Vec::new()),
        };
        let mons = args.iter().map(|a| parse_monomial(a)).collect::<Result<Vec<_>, _>>()?;
        let step = match (head.to_ascii_uppercase().as_str(), mons.len()) {
            ("S1", 0) => TransformStep::S1,
            ("S3", 0) => TransformStep::S3,
            ("S5", 0) => TransformStep::S5,
            ("GEN", 2) => TransformStep::General(mons[0].clone(), mons[1].clone()),
            ("RHO1", 1) => TransformStep::Rho1(mons[0].clone()),
            ("DJK", 1) => TransformStep::Djk(mons[0].clone()),
            ("DJKLIM" | "DJK_LIMIT", 1) => TransformStep::DjkLimit(mons[0].clone()),
            _ => return Err(BaileyError::UnknownStep(part.to_string())),
        };
        steps.push(step);
    }
    Ok((name.to_string(), steps))
}

/// Split on top-level commas.
fn split_args(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Build the pair described by a chain expression.
pub fn build_chain(expr: &str, n_max: usize, d: i64, order: i64) -> Result<BaileyPair, BaileyError> {
    let (name, steps) = parse_chain(expr)?;
    let p0 = builtin_pair(&name, n_max, d, order)?;
    chain(&p0, &steps)
}

/// Both sides of the finite Bailey lemma identity at index `n`, multiplied
/// through by `(aq/rho1, aq/rho2; q)_n` so that vanishing factors stay finite.
pub fn general_bailey_check(
    p: &BaileyPair,
    rho1: &Monomial,
    rho2: &Monomial,
    n: usize,
    order: i64,
) -> Result<(QSeries, QSeries, Comparison), BaileyError> {
    let d = p.d;
    let order = order.min(p.order);
    let aq = p.a.shift(qe(1));
    let c = aq.div(&rho1.mul(rho2));
    let b1 = aq.div(rho1);
    let b2 = aq.div(rho2);
    let neg = |m: &Monomial| -> i64 { to_units(-m.exp, d).unwrap_or(0).max(0) };
    let pad = 2 * (n as i64 + 1) * (neg(&c) + neg(&b1) + neg(&b2) + neg(rho1) + neg(rho2));
    let w = order + pad;
    let mut dn = Denoms::new(&p.a, d, w)?;
    let pr = |m: usize| -> Result<QSeries, BaileyError> {
        Ok(poch(rho1, m, d, w)?.mul_trunc(&poch(rho2, m, d, w)?, w))
    };
    let mut lhs = QSeries::zero(d, w);
    for j in 0..=n {
        let t = pr(j)?
            .mul_trunc(&poch(&c, n - j, d, w)?, w)
            .mul_trunc(&dn.inv_q(n - j)?, w)
            .mul_trunc(&mpow(&c, j, d, w)?, w)
            .mul_trunc(&p.beta[j], w);
        lhs = &lhs + &t;
    }
    let mut rhs = QSeries::zero(d, w);
    for r in 0..=n {
        let k = n - r;
        let t = pr(r)?
            .mul_trunc(&poch(&b1.shift(qe(r as i64)), k, d, w)?, w)
            .mul_trunc(&poch(&b2.shift(qe(r as i64)), k, d, w)?, w)
            .mul_trunc(&dn.inv_q(k)?, w)
            .mul_trunc(&dn.inv_aq(n + r)?, w)
            .mul_trunc(&mpow(&c, r, d, w)?, w)
            .mul_trunc(&p.alpha[r], w);
        rhs = &rhs + &t;
    }
    let (lhs, rhs) = (lhs.truncate(order), rhs.truncate(order));
    let cmp = lhs.equal_up_to(&rhs, order)?;
    Ok((lhs, rhs, cmp))
}

/// `sum a^n q^{n^2} beta_n` and `(1/(aq;q)_inf) sum a^n q^{n^2} alpha_n`.
pub fn limit_identity(p: &BaileyPair, order: i64) -> Result<(QSeries, QSeries), BaileyError> {
    let d = p.d;
    let order = order.min(p.order);
    let cut = ((order as f64 / d as f64).max(0.0).sqrt().ceil() as usize) + 4;
    if p.n_max() < cut {
        return Err(BaileyError::Incompatible {
            step: "limit".into(),
            why: format!("pair materialised to n = {} but the cut is {}", p.n_max(), cut),
        });
    }
    let mut lhs = QSeries::zero(d, order);
    let mut rhs = QSeries::zero(d, order);
    for n in 0..=p.n_max() {
        let w = mpow(&p.a, n, d, order)?.shift(to_units(qe((n * n) as i64), d)?).truncate(order);
        let tb = w.mul_trunc(&p.beta[n], order);
        let ta = w.mul_trunc(&p.alpha[n], order);
        if n > cut {
            for t in [&tb, &ta] {
                if let Some(e) = t.min_exp() {
                    return Err(BaileyError::Valuation { n, exp: e, order, d });
                }
            }
            continue;
        }
        lhs = &lhs + &tb;
        rhs = &rhs + &ta;
    }
    let inv = poch_infinite(&p.a.shift(qe(1)), qe(1), d, order)?.invert_unit(order)?;
    Ok((lhs, rhs.mul_trunc(&inv, order)))
}

/// Both sides of the finite identity behind `G1star` at index `k`:
/// `sum_i (-1)^i q^{(3i^2-i)/4} (1-q^{2i+1}) / ((1-q)(q^2;q)_{k+i}(q;q)_{k-i})`
/// against `1/((-q^{1/2};q)_k (q^2;q^2)_k)`.
pub fn g1star_lemma(k: usize, d: i64, order: i64) -> Result<(QSeries, QSeries), BaileyError> {
    let mut lhs = QSeries::zero(d, order);
    for i in 0..=k {
        let ii = i as i64;
        let e = to_units(QExp::new(3 * ii * ii - ii, 4), d)?;
        let g = geometric(d, order, e, d, 2 * ii + 1).scale(&sign(i));
        let t = g
            .mul_trunc(&inv_poch(&Monomial::qi(2), k + i, d, order)?, order)
            .mul_trunc(&inv_poch(&Monomial::qi(1), k - i, d, order)?, order);
        lhs = &lhs + &t;
    }
    let rhs = inv_poch(&Monomial::new(-Rat::one(), QExp::new(1, 2)), k, d, order)?.mul_trunc(&q2_inv(k, d, order)?, order);
    Ok((lhs, rhs))
}

/// Smallest `n_max` accepted by [`limit_identity`] at `order` lattice units.
pub fn limit_n_max(order: i64, d: i64) -> usize {
    ((order as f64 / d as f64).max(0.0).sqrt().ceil() as usize) + 6
}

/// Chain producing the pair behind the `thm1.1(k, i)` family, `1 <= i <= k`.
pub fn thm11_chain(k: usize, i: usize) -> String {
    let mut s = String::from("G1star");
    for _ in 0..k - i {
        s.push_str(" |> S1");
    }
    s.push_str(&format!(" |> DJKLIM(q^({}/2))", 3 + 4 * (k - i)));
    for _ in 1..i {
        s.push_str(" |> S1");
    }
    s
}
