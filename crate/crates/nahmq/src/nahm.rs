//! Nahm sums and generic multi-sums evaluated by exact lattice enumeration.

use std::collections::HashMap;

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::products::{poch_finite, ProductError, ProductExpr};
use crate::series::{to_units, Dense, Monomial, QExp, QSeries, Rat, SeriesError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NahmError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix A*diag(d) is not symmetric positive definite")]
    NotSymmetrizable,
    #[error("exponent is unbounded in variable {0}")]
    Unbounded(String),
    #[error("unsupported factor: {0}")]
    Unsupported(String),
}

fn qe(n: i64) -> QExp {
    QExp::from_integer(n)
}

/// `c0 + sum lin_i n_i`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Affine {
    pub c0: QExp,
    pub lin: Vec<QExp>,
}

impl Affine {
    pub fn constant(r: usize, c0: QExp) -> Self {
        Affine { c0, lin: vec![QExp::zero(); r] }
    }

    pub fn var(r: usize, i: usize) -> Self {
        let mut a = Affine::constant(r, QExp::zero());
        a.lin[i] = QExp::one();
        a
    }

    pub fn eval(&self, n: &[i64]) -> QExp {
        let mut v = self.c0;
        for (c, x) in self.lin.iter().zip(n) {
            v += *c * *x;
        }
        v
    }

    /// Largest variable index with a nonzero coefficient.
    pub fn depth(&self) -> Option<usize> {
        self.lin.iter().rposition(|c| !c.is_zero())
    }

    pub fn is_integral(&self) -> bool {
        self.c0.is_integer() && self.lin.iter().all(|c| c.is_integer())
    }
}

/// `c0 + lin . n + n^T M n` with `M` symmetric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quadratic {
    pub c0: QExp,
    pub lin: Vec<QExp>,
    pub quad: Vec<Vec<QExp>>,
}

impl Quadratic {
    pub fn zero(r: usize) -> Self {
        Quadratic { c0: QExp::zero(), lin: vec![QExp::zero(); r], quad: vec![vec![QExp::zero(); r]; r] }
    }

    pub fn rank(&self) -> usize {
        self.lin.len()
    }

    pub fn eval(&self, n: &[i64]) -> QExp {
        let r = self.rank();
        let mut v = self.c0;
        for i in 0..r {
            if n[i] == 0 {
                continue;
            }
            v += self.lin[i] * n[i];
            for j in 0..r {
                v += self.quad[i][j] * (n[i] * n[j]);
            }
        }
        v
    }

    /// Coefficient of the monomial `n_i n_j` as written in a polynomial.
    pub fn mono(&self, i: usize, j: usize) -> QExp {
        if i == j {
            self.quad[i][i]
        } else {
            self.quad[i][j] * 2
        }
    }

    pub fn add_mono(&mut self, i: usize, j: usize, c: QExp) {
        if i == j {
            self.quad[i][i] += c;
        } else {
            let h = c / 2;
            self.quad[i][j] += h;
            self.quad[j][i] += h;
        }
    }

    /// Substitute `n = T m + t0` given as one affine form per old variable.
    pub fn substitute(&self, forms: &[Affine]) -> Quadratic {
        let r2 = forms[0].lin.len();
        let mut out = Quadratic::zero(r2);
        out.c0 = self.c0;
        let r = self.rank();
        for i in 0..r {
            let fi = &forms[i];
            out.c0 += self.lin[i] * fi.c0;
            for a in 0..r2 {
                out.lin[a] += self.lin[i] * fi.lin[a];
            }
            for j in 0..r {
                let q = self.quad[i][j];
                if q.is_zero() {
                    continue;
                }
                let fj = &forms[j];
                out.c0 += q * fi.c0 * fj.c0;
                for a in 0..r2 {
                    out.lin[a] += q * (fi.lin[a] * fj.c0 + fj.lin[a] * fi.c0);
                    for b in 0..r2 {
                        out.quad[a][b] += q * fi.lin[a] * fj.lin[b];
                    }
                }
            }
        }
        out
    }

    fn offdiag_nonneg(&self) -> bool {
        let r = self.rank();
        (0..r).all(|i| (0..r).all(|j| i == j || !self.quad[i][j].is_negative()))
    }
}

fn big(x: QExp) -> Rat {
    Rat::new((*x.numer()).into(), (*x.denom()).into())
}

/// Exact positive-definiteness test by leading principal minors.
pub fn positive_definite(m: &[Vec<Rat>]) -> bool {
    let n = m.len();
    // Gaussian elimination without pivoting: every pivot must be positive
    let mut a: Vec<Vec<Rat>> = m.to_vec();
    for k in 0..n {
        if !a[k][k].is_positive() {
            return false;
        }
        for i in k + 1..n {
            let f = &a[i][k] / &a[k][k];
            for j in k..n {
                let t = &f * &a[k][j];
                a[i][j] -= t;
            }
        }
    }
    true
}

fn quad_matrix(q: &Quadratic) -> Vec<Vec<Rat>> {
    q.quad.iter().map(|row| row.iter().map(|x| big(*x)).collect()).collect()
}

/// True iff `A diag(d)` is symmetric and positive definite.
pub fn check_symmetrizable(a: &[Vec<Rat>], d: &[i64]) -> Result<bool, NahmError> {
    let r = d.len();
    if a.len() != r || a.iter().any(|row| row.len() != r) {
        return Err(NahmError::Dimension(format!("A is not {}x{}", r, r)));
    }
    if d.iter().any(|x| *x <= 0) {
        return Ok(false);
    }
    let ad: Vec<Vec<Rat>> =
        (0..r).map(|i| (0..r).map(|j| &a[i][j] * Rat::from_integer(d[j].into())).collect()).collect();
    for i in 0..r {
        for j in 0..i {
            if ad[i][j] != ad[j][i] {
                return Ok(false);
            }
        }
    }
    Ok(positive_definite(&ad))
}

/// A rank-`r` Nahm quadruple `(A, b, c, d)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NahmQuadruple {
    pub a: Vec<Vec<QExp>>,
    pub b: Vec<QExp>,
    pub c: QExp,
    pub d: Vec<i64>,
}

impl NahmQuadruple {
    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn a_big(&self) -> Vec<Vec<Rat>> {
        self.a.iter().map(|row| row.iter().map(|x| big(*x)).collect()).collect()
    }

    pub fn symmetrizable(&self) -> Result<bool, NahmError> {
        if self.b.len() != self.rank() {
            return Err(NahmError::Dimension("b has wrong length".into()));
        }
        check_symmetrizable(&self.a_big(), &self.d)
    }

    /// The exponent `(1/2) n^T A D n + n^T b (+ c)`.
    pub fn quadratic(&self, include_c: bool) -> Quadratic {
        let r = self.rank();
        let mut q = Quadratic::zero(r);
        for i in 0..r {
            for j in 0..r {
                q.quad[i][j] = self.a[i][j] * self.d[j] / 2;
            }
        }
        q.lin = self.b.clone();
        if include_c {
            q.c0 = self.c;
        }
        q
    }

    pub fn to_multisum(&self, include_c: bool) -> MultiSumSpec {
        let r = self.rank();
        let vars = (0..r).map(|i| format!("n{}", i + 1)).collect();
        let denoms = self.d.iter().map(|x| qe(*x)).collect::<Vec<_>>();
        MultiSumSpec::new(vars, self.quadratic(include_c), &denoms)
    }
}

/// Pochhammer factor `(arg; q^base)_{len(n)}^power` inside a multi-sum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PochFactor {
    pub arg: Monomial,
    pub base: QExp,
    pub len: Affine,
    pub power: i64,
}

/// Generic multi-sum
/// `coeff * sum_n q^{Q(n)} * prefactor(n) * prod factors(n)`
/// over `n` in the nonnegative orthant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSumSpec {
    pub vars: Vec<String>,
    pub exponent: Quadratic,
    pub factors: Vec<PochFactor>,
    /// Terms `c * q^{aff(n)}`; empty means the constant 1.
    pub prefactor: Vec<(Rat, Affine)>,
    pub coeff: Rat,
}

impl MultiSumSpec {
    /// Sum with denominators `(q^b_i; q^b_i)_{n_i}`.
    pub fn new(vars: Vec<String>, exponent: Quadratic, denom_bases: &[QExp]) -> Self {
        let r = vars.len();
        let factors = denom_bases
            .iter()
            .enumerate()
            .map(|(i, b)| PochFactor { arg: Monomial::q(*b), base: *b, len: Affine::var(r, i), power: -1 })
            .collect();
        MultiSumSpec { vars, exponent, factors, prefactor: Vec::new(), coeff: Rat::one() }
    }

    pub fn rank(&self) -> usize {
        self.vars.len()
    }

    /// Base of the standard denominator `(q^b;q^b)_{n_i}`, if present.
    pub fn standard_denom(&self, i: usize) -> Option<QExp> {
        self.factors.iter().find_map(|f| {
            let single = f.len == Affine::var(self.rank(), i);
            (single && f.power == -1 && f.arg == Monomial::q(f.base)).then_some(f.base)
        })
    }

    /// View as a Nahm quadruple when the shape allows it.
    pub fn as_nahm(&self) -> Option<NahmQuadruple> {
        let r = self.rank();
        if !self.prefactor.is_empty() || !self.coeff.is_one() || self.factors.len() != r {
            return None;
        }
        let mut d = Vec::new();
        for i in 0..r {
            let b = self.standard_denom(i)?;
            if !b.is_integer() {
                return None;
            }
            d.push(b.to_integer());
        }
        let a = (0..r)
            .map(|i| (0..r).map(|j| self.exponent.quad[i][j] * 2 / d[j]).collect())
            .collect();
        Some(NahmQuadruple { a, b: self.exponent.lin.clone(), c: self.exponent.c0, d })
    }

    pub fn is_positive_definite(&self) -> bool {
        positive_definite(&quad_matrix(&self.exponent))
    }
}

/// Smallest value of `a n^2 + b n` over integers `0 <= n <= cap`.
fn min_1d(a: QExp, b: QExp, cap: i64) -> QExp {
    let mut best = QExp::zero();
    if a.is_positive() {
        let v = (-b / (a * 2)).floor().to_integer();
        for n in [v, v + 1] {
            if n >= 0 && n <= cap {
                let x = a * n * n + b * n;
                if x < best {
                    best = x;
                }
            }
        }
    } else if b.is_negative() {
        best = (a * cap + b) * cap;
    }
    best
}

/// Largest integer `n >= 0` with `a n^2 + b n <= limit` (given convexity).
fn max_1d(a: QExp, b: QExp, limit: QExp) -> Option<i64> {
    if a.is_zero() && !b.is_positive() {
        return None;
    }
    let f = |n: i64| a * n * n + b * n;
    let vertex = if a.is_positive() { (-b / (a * 2)).ceil().to_integer().max(0) } else { 0 };
    let mut lo = vertex;
    if f(lo) > limit {
        // the minimum exceeds the limit; only smaller n might qualify
        let mut best = -1;
        for n in 0..vertex {
            if f(n) <= limit {
                best = n;
            }
        }
        return Some(best);
    }
    let mut step = 1;
    while f(lo + step) <= limit {
        lo += step;
        step *= 2;
    }
    // f(lo) <= limit < f(lo + step)
    let mut hi = lo + step;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if f(mid) <= limit {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Per-variable bounds `M_i` such that every lattice point with
/// exponent `<= order` (exponent value, not lattice units) lies in the box.
///
/// `extra_lin` lowers the linear form (used for prefactor terms whose
/// exponents may decrease with the indices).
pub fn lattice_bound(q: &Quadratic, order: QExp, extra_lin: &[QExp]) -> Result<Vec<i64>, NahmError> {
    let r = q.rank();
    let lin: Vec<QExp> = (0..r).map(|i| q.lin[i] + extra_lin.get(i).copied().unwrap_or_default()).collect();
    if q.offdiag_nonneg() {
        // each variable alone, others at their individual minima
        let mut bounds = vec![0i64; r];
        // caps for the 1-d minima start generous and tighten once
        let mut caps = vec![i64::MAX / 4; r];
        for i in 0..r {
            if q.quad[i][i].is_zero() && lin[i].is_negative() {
                return Err(NahmError::Unbounded(format!("#{}", i)));
            }
        }
        for _round in 0..2 {
            let mins: Vec<QExp> = (0..r).map(|j| min_1d(q.quad[j][j], lin[j], caps[j])).collect();
            for i in 0..r {
                let rest: QExp = q.c0 + (0..r).filter(|j| *j != i).map(|j| mins[j]).sum::<QExp>();
                let m = max_1d(q.quad[i][i], lin[i], order - rest)
                    .ok_or_else(|| NahmError::Unbounded(format!("#{}", i)))?;
                bounds[i] = m.max(0);
            }
            caps = bounds.clone();
        }
        return Ok(bounds);
    }
    let m = quad_matrix(q);
    if !positive_definite(&m) {
        return Err(NahmError::NotSymmetrizable);
    }
    // rational lambda with M - lambda I positive definite
    let mut lambda = q.quad.iter().enumerate().map(|(i, row)| row[i]).min().unwrap();
    loop {
        let shifted: Vec<Vec<Rat>> = (0..r)
            .map(|i| (0..r).map(|j| if i == j { &m[i][j] - big(lambda) } else { m[i][j].clone() }).collect())
            .collect();
        if positive_definite(&shifted) {
            break;
        }
        lambda /= 2;
    }
    let l1: QExp = lin.iter().map(|x| x.abs()).sum();
    // lambda R^2 - l1 R + c0 > order for all R beyond the bound
    let mut rad = (l1 / (lambda * 2)).ceil().to_integer().max(0);
    while lambda * rad * rad - l1 * rad + q.c0 <= order {
        rad += 1;
    }
    Ok(vec![rad; r])
}

/// Lower bound on the exponent over the whole orthant.
fn global_min(q: &Quadratic, bounds: &[i64]) -> QExp {
    let r = q.rank();
    if q.offdiag_nonneg() {
        return q.c0 + (0..r).map(|j| min_1d(q.quad[j][j], q.lin[j], bounds[j])).sum::<QExp>();
    }
    // crude: every coordinate pair at its worst sign within the box
    let mut v = q.c0;
    for i in 0..r {
        v += min_1d(q.quad[i][i], q.lin[i], bounds[i]);
        for j in 0..r {
            if i != j && q.quad[i][j].is_negative() {
                v += q.quad[i][j] * bounds[i] * bounds[j];
            }
        }
    }
    v
}

/// `sum_n q^{(1/2) n^T A D n + n^T b (+c)} / prod (q^{d_i};q^{d_i})_{n_i}`.
///
/// Plain box enumeration; [`multi_sum`] is the pruned evaluator.
pub fn nahm_sum(spec: &NahmQuadruple, d_lat: i64, order: i64, include_c: bool) -> Result<QSeries, NahmError> {
    if !spec.symmetrizable()? {
        return Err(NahmError::NotSymmetrizable);
    }
    let q = spec.quadratic(include_c);
    let r = spec.rank();
    let bounds = lattice_bound(&q, QExp::new(order, d_lat), &[])?;
    let lo = (global_min(&q, &bounds) * d_lat).floor().to_integer().min(0);
    let work = order - lo;
    let mut inv: HashMap<(i64, i64), QSeries> = HashMap::new();
    let mut inv_poch = |b: i64, n: i64| -> Result<QSeries, NahmError> {
        if let Some(s) = inv.get(&(b, n)) {
            return Ok(s.clone());
        }
        let m = Monomial::qi(b);
        let p = poch_finite(&m, qe(b), n, d_lat, work)?;
        let s = p.invert_unit(work)?;
        inv.insert((b, n), s.clone());
        Ok(s)
    };
    let mut acc = QSeries::zero(d_lat, order);
    let mut n = vec![0i64; r];
    loop {
        let e = to_units(q.eval(&n), d_lat)?;
        if e <= order {
            let mut t = QSeries::one(d_lat, order - e);
            for i in 0..r {
                t = t.mul_trunc(&inv_poch(spec.d[i], n[i])?, order - e);
            }
            acc = &acc + &t.shift(e);
        }
        // odometer
        let mut k = 0;
        loop {
            if k == r {
                return Ok(acc.truncate(order));
            }
            n[k] += 1;
            if n[k] <= bounds[k] {
                break;
            }
            n[k] = 0;
            k += 1;
        }
    }
}

struct FactorCache<'a> {
    spec: &'a MultiSumSpec,
    d: i64,
    order: i64,
    memo: HashMap<(usize, i64), QSeries>,
}

impl<'a> FactorCache<'a> {
    fn get(&mut self, idx: usize, len: i64) -> Result<QSeries, NahmError> {
        if let Some(s) = self.memo.get(&(idx, len)) {
            return Ok(s.clone());
        }
        let f = &self.spec.factors[idx];
        let s = if len > 0 && f.power == -1 && self.memo.contains_key(&(idx, len - 1)) {
            // one more factor divided out
            let prev = &self.memo[&(idx, len - 1)];
            let e = to_units(f.arg.exp + f.base * (len - 1), self.d)?;
            let mut w = Dense::from_series(prev);
            if e > 0 {
                w.div_binomial(&f.arg.coeff, e);
                w.to_series()
            } else {
                self.direct(idx, len)?
            }
        } else if len > 0 && f.power == -1 {
            for l in 0..len {
                self.get(idx, l)?;
            }
            return self.get(idx, len);
        } else {
            self.direct(idx, len)?
        };
        self.memo.insert((idx, len), s.clone());
        Ok(s)
    }

    fn direct(&self, idx: usize, len: i64) -> Result<QSeries, NahmError> {
        let f = &self.spec.factors[idx];
        let p = poch_finite(&f.arg, f.base, len, self.d, self.order)?;
        let mut s = QSeries::one(self.d, self.order);
        for _ in 0..f.power.abs() {
            s = if f.power > 0 {
                s.mul_trunc(&p, self.order)
            } else {
                s.mul_trunc(&p.invert_unit(self.order)?, self.order)
            };
        }
        Ok(s)
    }
}

/// Evaluate a [`MultiSumSpec`] exactly up to `order` (lattice units).
pub fn multi_sum(spec: &MultiSumSpec, d: i64, order: i64) -> Result<QSeries, NahmError> {
    let r = spec.rank();
    let q = &spec.exponent;
    for f in &spec.factors {
        if f.arg.exp.is_negative() {
            return Err(NahmError::Unsupported(format!("factor argument {} has negative exponent", f.arg)));
        }
        if f.base <= QExp::zero() {
            return Err(ProductError::BadBase(f.base).into());
        }
        if !f.len.is_integral() || f.len.lin.len() != r {
            return Err(NahmError::Unsupported("factor length must be an integral affine form".into()));
        }
    }
    // prefactor terms may lower the exponent; fold their worst case into bounds
    let mut extra_lin = vec![QExp::zero(); r];
    let mut pre_c0_min = QExp::zero();
    let prefactor: Vec<(Rat, Affine)> = if spec.prefactor.is_empty() {
        vec![(Rat::one(), Affine::constant(r, QExp::zero()))]
    } else {
        spec.prefactor.clone()
    };
    for (i, (_, aff)) in prefactor.iter().enumerate() {
        if i == 0 || aff.c0 < pre_c0_min {
            pre_c0_min = if i == 0 { aff.c0 } else { pre_c0_min.min(aff.c0) };
        }
        for v in 0..r {
            if aff.lin[v] < extra_lin[v] {
                extra_lin[v] = aff.lin[v];
            }
        }
    }
    let order_val = QExp::new(order, d);
    let bounds = lattice_bound(q, order_val - pre_c0_min, &extra_lin)?;
    let mut lowered = q.clone();
    for v in 0..r {
        lowered.lin[v] += extra_lin[v];
    }
    lowered.c0 += pre_c0_min;
    let floor_val = global_min(&lowered, &bounds).min(QExp::zero());
    let floor_units = (floor_val * d).floor().to_integer();
    let work = order - floor_units;
    let pruned = lowered.offdiag_nonneg();

    let mut by_depth: Vec<Vec<usize>> = vec![Vec::new(); r + 1];
    for (i, f) in spec.factors.iter().enumerate() {
        let slot = f.len.depth().map(|x| x + 1).unwrap_or(0);
        by_depth[slot].push(i);
    }
    let mut cache = FactorCache { spec, d, order: work, memo: HashMap::new() };
    let mut acc: HashMap<i64, Rat> = HashMap::new();
    let mut n = vec![0i64; r];
    let mut root = QSeries::one(d, work);
    for &fi in &by_depth[0] {
        let s = cache.get(fi, spec.factors[fi].len.c0.to_integer())?;
        root = root.mul_trunc(&s, work);
    }
    let mut ctx = Walk {
        spec,
        q: &lowered,
        d,
        order,
        bounds: &bounds,
        by_depth: &by_depth,
        pruned,
        prefactor: &prefactor,
    };
    ctx.walk(0, &mut n, &root, &mut cache, &mut acc)?;
    let mut out = QSeries::zero(d, order);
    let mut keys: Vec<i64> = acc.keys().copied().collect();
    keys.sort_unstable();
    for k in keys {
        let c = acc.remove(&k).unwrap();
        out.add_term(k, &c * &spec.coeff);
    }
    Ok(out)
}

struct Walk<'a> {
    spec: &'a MultiSumSpec,
    q: &'a Quadratic,
    d: i64,
    order: i64,
    bounds: &'a [i64],
    by_depth: &'a [Vec<usize>],
    pruned: bool,
    prefactor: &'a [(Rat, Affine)],
}

impl<'a> Walk<'a> {
    /// Lower bound (value) of the lowered exponent over completions of `n[..t]`.
    fn lower(&self, t: usize, n: &[i64]) -> QExp {
        let r = self.q.rank();
        let mut v = self.q.c0;
        for i in 0..t {
            v += self.q.lin[i] * n[i];
            for j in 0..t {
                v += self.q.quad[i][j] * (n[i] * n[j]);
            }
        }
        for j in t..r {
            let mut l = self.q.lin[j];
            for i in 0..t {
                l += self.q.quad[i][j] * (2 * n[i]);
            }
            v += min_1d(self.q.quad[j][j], l, self.bounds[j]);
        }
        v
    }

    fn walk(
        &mut self,
        t: usize,
        n: &mut Vec<i64>,
        acc_series: &QSeries,
        cache: &mut FactorCache,
        acc: &mut HashMap<i64, Rat>,
    ) -> Result<(), NahmError> {
        let r = self.q.rank();
        let order_val = QExp::new(self.order, self.d);
        if t == r {
            let e = to_units(self.spec.exponent.eval(n), self.d)?;
            for (c, aff) in self.prefactor {
                let shift = e + to_units(aff.eval(n), self.d)?;
                if shift > self.order {
                    continue;
                }
                for (x, y) in acc_series.terms() {
                    let k = x + shift;
                    if k > self.order {
                        break;
                    }
                    *acc.entry(k).or_insert_with(Rat::zero) += y * c;
                }
            }
            return Ok(());
        }
        for v in 0..=self.bounds[t] {
            n[t] = v;
            if self.pruned {
                let lb = self.lower(t + 1, n);
                if lb > order_val {
                    // the tail minima only grow with n[t]; stop once the
                    // fixed part is increasing too
                    let mut slope = self.q.lin[t] + self.q.quad[t][t] * (2 * v + 1);
                    for i in 0..t {
                        slope += self.q.quad[i][t] * (2 * n[i]);
                    }
                    if !slope.is_negative() {
                        break;
                    }
                    continue;
                }
            }
            let budget = if self.pruned {
                self.order - (self.lower(t + 1, n) * self.d).floor().to_integer()
            } else {
                acc_series.order()
            };
            let mut next = acc_series.truncate(budget);
            for &fi in &self.by_depth[t + 1] {
                let len = self.spec.factors[fi].len.eval(n).to_integer();
                let s = cache.get(fi, len)?;
                next = next.mul_trunc(&s, budget);
            }
            self.walk(t + 1, n, &next, cache, acc)?;
        }
        n[t] = 0;
        Ok(())
    }
}

/// A multi-sum times an outer product, the shape produced by rank reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledSum {
    pub outer: ProductExpr,
    pub sum: MultiSumSpec,
}

impl ScaledSum {
    pub fn plain(sum: MultiSumSpec) -> Self {
        ScaledSum { outer: ProductExpr::one(), sum }
    }

    pub fn eval(&self, d: i64, order: i64) -> Result<QSeries, NahmError> {
        let s = multi_sum(&self.sum, d, order)?;
        if self.outer == ProductExpr::one() {
            return Ok(s);
        }
        let p = crate::products::eval_product(&self.outer, d, order)?;
        Ok(s.mul_trunc(&p, order))
    }
}

/// Try the two rank-reduction patterns on a Nahm quadruple.
pub fn reduce_rank(spec: &NahmQuadruple) -> Option<ScaledSum> {
    reduce_multisum(&spec.to_multisum(false))
}

/// Rank reduction on a sum with standard denominators only.
pub fn reduce_multisum(spec: &MultiSumSpec) -> Option<ScaledSum> {
    let r = spec.rank();
    if r < 2 || !spec.prefactor.is_empty() {
        return None;
    }
    let bases: Vec<Option<QExp>> = (0..r).map(|i| spec.standard_denom(i)).collect();
    if spec.factors.len() != r || bases.iter().any(|b| b.is_none()) {
        return None;
    }
    let bases: Vec<QExp> = bases.into_iter().map(|b| b.unwrap()).collect();
    for i in 0..r {
        for k in 0..r {
            if i != k && bases[k] == bases[i] * 2 {
                if let Some(s) = pair_reduction(spec, &bases, i, k) {
                    return Some(ScaledSum::plain(s));
                }
            }
        }
    }
    for i in 0..r {
        if let Some(s) = euler_reduction(spec, &bases, i) {
            return Some(s);
        }
    }
    None
}

/// `sum_{i+2k=m} q^{b C(i,2)} / ((q^b;q^b)_i (q^2b;q^2b)_k) = 1/(q^b;q^b)_m`.
fn pair_reduction(spec: &MultiSumSpec, bases: &[QExp], i: usize, k: usize) -> Option<MultiSumSpec> {
    let q = &spec.exponent;
    let b = bases[i];
    let mut rest = q.clone();
    // remove b*C(i,2) = (b/2) i^2 - (b/2) i
    rest.quad[i][i] -= b / 2;
    rest.lin[i] += b / 2;
    let alpha = rest.mono(i, i);
    if rest.mono(k, k) != alpha * 4 || rest.mono(i, k) != alpha * 4 {
        return None;
    }
    if rest.lin[k] != rest.lin[i] * 2 {
        return None;
    }
    let r = spec.rank();
    for j in 0..r {
        if j != i && j != k && rest.mono(k, j) != rest.mono(i, j) * 2 {
            return None;
        }
    }
    // new variables: the old ones without k, with i playing m
    let keep: Vec<usize> = (0..r).filter(|x| *x != k).collect();
    let r2 = keep.len();
    let mut out = Quadratic::zero(r2);
    out.c0 = rest.c0;
    for (a, &x) in keep.iter().enumerate() {
        out.lin[a] = rest.lin[x];
        for (bb, &y) in keep.iter().enumerate() {
            out.quad[a][bb] = rest.quad[x][y];
        }
    }
    let vars = keep.iter().map(|x| if *x == i { "m".to_string() } else { spec.vars[*x].clone() }).collect();
    let denoms: Vec<QExp> = keep.iter().map(|x| bases[*x]).collect();
    let mut s = MultiSumSpec::new(vars, out, &denoms);
    s.coeff = spec.coeff.clone();
    Some(s)
}

/// `sum_i q^{b C(i,2)} z^i / (q^b;q^b)_i = (-z;q^b)_inf` with
/// `z = q^{e0 + sum c_j n_j}` and every `c_j` a nonnegative multiple of `b`.
fn euler_reduction(spec: &MultiSumSpec, bases: &[QExp], i: usize) -> Option<ScaledSum> {
    let q = &spec.exponent;
    let b = bases[i];
    if q.quad[i][i] != b / 2 {
        return None;
    }
    let r = spec.rank();
    let e0 = q.lin[i] + b / 2;
    if !e0.is_positive() {
        return None;
    }
    let keep: Vec<usize> = (0..r).filter(|x| *x != i).collect();
    let r2 = keep.len();
    let mut len = Affine::constant(r2, QExp::zero());
    for (a, &j) in keep.iter().enumerate() {
        let c = q.mono(i, j) / b;
        if c.is_negative() || !c.is_integer() {
            return None;
        }
        len.lin[a] = c;
    }
    let mut out = Quadratic::zero(r2);
    out.c0 = q.c0;
    for (a, &x) in keep.iter().enumerate() {
        out.lin[a] = q.lin[x];
        for (bb, &y) in keep.iter().enumerate() {
            out.quad[a][bb] = q.quad[x][y];
        }
    }
    let vars = keep.iter().map(|x| spec.vars[*x].clone()).collect();
    let denoms: Vec<QExp> = keep.iter().map(|x| bases[*x]).collect();
    let mut s = MultiSumSpec::new(vars, out, &denoms);
    let arg = Monomial::new(-Rat::one(), e0);
    if len.depth().is_some() {
        s.factors.push(PochFactor { arg: arg.clone(), base: b, len, power: -1 });
    }
    s.coeff = spec.coeff.clone();
    Some(ScaledSum { outer: ProductExpr::one().poch(arg, b, 1), sum: s })
}

/// Rational helper for tests and catalog code.
pub fn qr(n: i64, d: i64) -> QExp {
    Ratio::new(n, d)
}
