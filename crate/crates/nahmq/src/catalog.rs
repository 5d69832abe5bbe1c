//! Identity database: fixed identities loaded from a text catalog and
//! parameterised families built on demand.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use num_traits::{One, Zero};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bailey::{build_chain, limit_identity, limit_n_max, thm11_chain, BaileyError};
use crate::expr::{parse_monomial, parse_poch_call, parse_rhs, IndexEnv, ParseError};
use crate::nahm::{
    lattice_bound, multi_sum, reduce_multisum, MultiSumSpec, NahmError, NahmQuadruple, PochFactor, ScaledSum,
};
use crate::products::{eval_product, eval_product_sum, ProductError, ProductExpr};
use crate::series::{Comparison, QExp, QSeries, Rat, SeriesError};

pub const BUILTIN: &str = include_str!("../catalog/identities.cat");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{id}: {source}")]
    Expr { id: String, source: ParseError },
    #[error("{id}: {why}")]
    Inconsistent { id: String, why: String },
    #[error("unknown identity {0}")]
    UnknownId(String),
    #[error("unknown family {0}")]
    UnknownFamily(String),
    #[error("{name}({k},{i}) is outside the stated range: {why}")]
    Domain { name: String, k: i64, i: i64, why: String },
    #[error("{0} has no reduction route")]
    NoRoute(String),
    #[error(transparent)]
    Nahm(#[from] NahmError),
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Bailey(#[from] BaileyError),
    #[error("cannot read catalog: {0}")]
    Io(String),
}

fn qe(n: i64) -> QExp {
    QExp::from_integer(n)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Lhs {
    Nahm(NahmQuadruple),
    Multi(MultiSumSpec),
}

/// A second way to compute the sum side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Route {
    /// Lower-rank sum times a product, in the displayed base.
    Sum(ScaledSum),
    /// `outer * L(q^subst)` where `L` is the beta side of the limiting
    /// Bailey identity for the chain.
    Bailey { chain: String, outer: ProductExpr, subst: i64 },
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Route::Sum(s) => write!(f, "sum over {}", s.sum.vars.join(",")),
            Route::Bailey { chain, subst, .. } => write!(f, "bailey {} (q -> q^{})", chain, subst),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Identity {
    pub id: String,
    pub tags: Vec<String>,
    pub lhs: Lhs,
    /// The sum side in the displayed base, always available.
    pub spec: MultiSumSpec,
    pub rhs: Vec<ProductExpr>,
    pub rhs_text: String,
    /// A printed variant of the product side that does not hold.
    pub rhs_alt: Option<String>,
    /// The displayed identity is the underlying one with `q -> q^subst`.
    pub subst: i64,
    pub routes: Vec<Route>,
}

impl Identity {
    pub fn lhs_series(&self, d: i64, order: i64) -> Result<QSeries, CatalogError> {
        Ok(multi_sum(&self.spec, d, order)?)
    }

    pub fn rhs_series(&self, d: i64, order: i64) -> Result<QSeries, CatalogError> {
        Ok(eval_product_sum(&self.rhs, d, order)?)
    }

    pub fn route_series(&self, route: &Route, d: i64, order: i64) -> Result<QSeries, CatalogError> {
        route_series(route, d, order)
    }

    /// Same identity with a different product side.
    pub fn with_rhs(&self, text: &str) -> Result<Identity, CatalogError> {
        let rhs = parse_rhs(text).map_err(|e| CatalogError::Expr { id: self.id.clone(), source: e })?;
        Ok(Identity { rhs, rhs_text: text.to_string(), ..self.clone() })
    }

    /// Lattice box enumerated for the sum side at `order` lattice units.
    pub fn lattice_box(&self, d: i64, order: i64) -> Vec<i64> {
        lattice_bound(&self.spec.exponent, QExp::new(order, d), &[]).unwrap_or_default()
    }
}

pub fn route_series(route: &Route, d: i64, order: i64) -> Result<QSeries, CatalogError> {
    match route {
        Route::Sum(s) => Ok(s.eval(d, order)?),
        Route::Bailey { chain, outer, subst } => {
            let inner = (order + subst - 1) / subst;
            let p = build_chain(chain, limit_n_max(inner, d), d, inner)?;
            let (l, _) = limit_identity(&p, inner)?;
            let l = l.substitute_power(qe(*subst))?.truncate(order);
            Ok(l.mul_trunc(&eval_product(outer, d, order)?, order))
        }
    }
}

/// First disagreement between two series, exponent in q-units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub exp: QExp,
    pub lhs: Rat,
    pub rhs: Rat,
}

impl Mismatch {
    fn from_cmp(c: &Comparison, d: i64) -> Option<Mismatch> {
        match c {
            Comparison::Equal => None,
            Comparison::Mismatch { exp, left, right } => {
                Some(Mismatch { exp: QExp::new(*exp, d), lhs: left.clone(), rhs: right.clone() })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub id: String,
    /// Order in lattice units.
    pub order: i64,
    pub d: i64,
    pub equal: bool,
    pub first_mismatch: Option<Mismatch>,
    pub lattice_box: Vec<i64>,
    pub lhs_terms: usize,
    pub rhs_terms: usize,
    pub lhs_digest: String,
    pub rhs_digest: String,
    pub wall_ms: u128,
}

pub fn digest(s: &QSeries) -> String {
    let h = Sha256::digest(s.dump().as_bytes());
    h.iter().take(8).map(|b| format!("{:02x}", b)).collect()
}

pub fn verify_identity(id: &Identity, d: i64, order: i64) -> Result<VerificationReport, CatalogError> {
    let t = Instant::now();
    let l = id.lhs_series(d, order)?;
    let r = id.rhs_series(d, order)?;
    let c = l.equal_up_to(&r, order)?;
    Ok(VerificationReport {
        id: id.id.clone(),
        order,
        d,
        equal: c.is_equal(),
        first_mismatch: Mismatch::from_cmp(&c, d),
        lattice_box: id.lattice_box(d, order),
        lhs_terms: l.len(),
        rhs_terms: r.len(),
        lhs_digest: digest(&l),
        rhs_digest: digest(&r),
        wall_ms: t.elapsed().as_millis(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionReport {
    pub id: String,
    pub order: i64,
    /// Direct enumeration against the product side.
    pub direct_vs_rhs: Option<Mismatch>,
    /// Each route against direct enumeration.
    pub routes: Vec<(String, Option<Mismatch>)>,
    /// Automatic rank reduction against direct enumeration, when it applies.
    pub automatic: Option<Option<Mismatch>>,
}

impl ReductionReport {
    pub fn pass(&self) -> bool {
        self.direct_vs_rhs.is_none()
            && self.routes.iter().all(|r| r.1.is_none())
            && !matches!(self.automatic, Some(Some(_)))
    }
}

pub fn cross_check(id: &Identity, d: i64, order: i64) -> Result<ReductionReport, CatalogError> {
    if id.routes.is_empty() {
        return Err(CatalogError::NoRoute(id.id.clone()));
    }
    let direct = id.lhs_series(d, order)?;
    let rhs = id.rhs_series(d, order)?;
    let cmp = |s: &QSeries| -> Result<Option<Mismatch>, CatalogError> {
        Ok(Mismatch::from_cmp(&direct.equal_up_to(s, order)?, d))
    };
    let direct_vs_rhs = cmp(&rhs)?;
    let mut routes = Vec::new();
    for r in &id.routes {
        let s = route_series(r, d, order)?;
        routes.push((r.to_string(), cmp(&s)?));
    }
    let automatic = match reduce_multisum(&id.spec) {
        Some(s) => Some(cmp(&s.eval(d, order)?)?),
        None => None,
    };
    Ok(ReductionReport { id: id.id.clone(), order, direct_vs_rhs, routes, automatic })
}

// ----------------------------------------------------------------------
// Catalog file
// ----------------------------------------------------------------------

#[derive(Clone, Debug, Default)]
pub struct Catalog {
    pub identities: BTreeMap<String, Identity>,
}

/// Split on commas outside brackets, parentheses and quotes.
fn split_top(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut quoted = false;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '"' => quoted = !quoted,
            '[' | '(' if !quoted => depth += 1,
            ']' | ')' if !quoted => depth -= 1,
            ',' if depth == 0 && !quoted => {
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

fn unquote(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"').and_then(|x| x.strip_suffix('"')).unwrap_or(s)
}

fn bracket(s: &str) -> Option<&str> {
    s.trim().strip_prefix('[').and_then(|x| x.strip_suffix(']'))
}

fn parse_list(s: &str) -> Option<Vec<String>> {
    Some(split_top(bracket(s)?).iter().map(|x| unquote(x).to_string()).collect())
}

fn parse_qexp(s: &str) -> Option<QExp> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => Some(QExp::new(a.trim().parse().ok()?, b.trim().parse().ok()?)),
        None => Some(qe(s.parse().ok()?)),
    }
}

fn parse_qexp_list(s: &str) -> Option<Vec<QExp>> {
    parse_list(s)?.iter().map(|x| parse_qexp(x)).collect()
}

struct Record {
    id: String,
    line: usize,
    keys: BTreeMap<String, String>,
}

impl Record {
    fn get(&self, k: &str) -> Option<&str> {
        self.keys.get(k).map(|s| s.as_str())
    }

    fn need(&self, k: &str) -> Result<&str, CatalogError> {
        self.get(k).ok_or_else(|| CatalogError::Syntax { line: self.line, msg: format!("{}: missing key {}", self.id, k) })
    }

    fn bad(&self, why: impl Into<String>) -> CatalogError {
        CatalogError::Inconsistent { id: self.id.clone(), why: why.into() }
    }

    fn expr<T>(&self, r: Result<T, ParseError>) -> Result<T, CatalogError> {
        r.map_err(|e| CatalogError::Expr { id: self.id.clone(), source: e })
    }
}

fn records(text: &str) -> Result<Vec<Record>, CatalogError> {
    let mut out: Vec<Record> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(h) = l.strip_prefix('[').and_then(|x| x.strip_suffix(']')) {
            let id = h
                .strip_prefix("identity ")
                .map(|x| x.trim().to_string())
                .filter(|x| !x.is_empty())
                .ok_or_else(|| CatalogError::Syntax { line, msg: format!("bad section header {}", l) })?;
            if out.iter().any(|r| r.id == id) {
                return Err(CatalogError::Syntax { line, msg: format!("duplicate identity {}", id) });
            }
            out.push(Record { id, line, keys: BTreeMap::new() });
            continue;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| CatalogError::Syntax { line, msg: format!("expected key = value: {}", l) })?;
        let rec = out.last_mut().ok_or_else(|| CatalogError::Syntax { line, msg: "key outside a section".into() })?;
        if rec.keys.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(CatalogError::Syntax { line, msg: format!("repeated key {}", k.trim()) });
        }
    }
    Ok(out)
}

fn exps_of_denoms(rec: &Record, s: &str) -> Result<Vec<QExp>, CatalogError> {
    let items = parse_list(s).ok_or_else(|| rec.bad(format!("bad list {}", s)))?;
    items
        .iter()
        .map(|x| {
            let m = rec.expr(parse_monomial(x))?;
            if !m.coeff.is_one() {
                return Err(rec.bad(format!("denominator base {} is not a power of q", x)));
            }
            Ok(m.exp)
        })
        .collect()
}

fn build_sum(
    rec: &Record,
    prefix: &str,
    default_vars: Option<&[String]>,
) -> Result<MultiSumSpec, CatalogError> {
    let key = |k: &str| format!("{}{}", prefix, k);
    let vars: Vec<String> = match rec.get(&key("vars")) {
        Some(v) => v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect(),
        None => default_vars.ok_or_else(|| rec.bad("missing vars"))?.to_vec(),
    };
    let names: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    let env = IndexEnv::new(&names);
    let exponent = rec.expr(env.parse_quadratic(unquote(rec.need(&key("exponent"))?)))?;
    let denoms = exps_of_denoms(rec, rec.need(&key("denoms"))?)?;
    if denoms.len() != vars.len() {
        return Err(rec.bad(format!("{} denominators for {} variables", denoms.len(), vars.len())));
    }
    let mut spec = MultiSumSpec::new(vars, exponent, &denoms);
    if let Some(x) = rec.get(&key("extra")) {
        for call in parse_list(x).ok_or_else(|| rec.bad("bad extra list"))? {
            let (arg, base, len) = rec.expr(parse_poch_call(&call, &env))?;
            spec.factors.push(PochFactor { arg, base, len, power: -1 });
        }
    }
    if let Some(p) = rec.get(&key("prefactor")) {
        spec.prefactor = rec.expr(env.parse_qpoly(unquote(p)))?;
    }
    Ok(spec)
}

fn parse_matrix(s: &str) -> Option<Vec<Vec<QExp>>> {
    split_top(bracket(s)?).iter().map(|row| parse_qexp_list(row)).collect()
}

fn identity_of(rec: &Record) -> Result<Identity, CatalogError> {
    let tags = rec
        .get("tags")
        .map(|t| t.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())
        .unwrap_or_default();
    let subst: i64 = match rec.get("subst") {
        Some(s) => s.parse().map_err(|_| rec.bad("subst must be a positive integer"))?,
        None => 1,
    };
    if subst < 1 {
        return Err(rec.bad("subst must be a positive integer"));
    }
    let spec = build_sum(rec, "", None)?;
    let kind = rec.get("lhs.kind").unwrap_or("nahm");
    let lhs = match kind {
        "nahm" => {
            let a = parse_matrix(rec.need("A")?).ok_or_else(|| rec.bad("bad matrix A"))?;
            let d: Vec<i64> = parse_qexp_list(rec.need("d")?)
                .filter(|v| v.iter().all(|x| x.is_integer()))
                .ok_or_else(|| rec.bad("bad d"))?
                .iter()
                .map(|x| x.to_integer())
                .collect();
            let b = parse_qexp_list(rec.need("b")?).ok_or_else(|| rec.bad("bad b"))?;
            let nq = NahmQuadruple { a, b, c: QExp::zero(), d };
            if nq.a.len() != nq.rank() || nq.a.iter().any(|r| r.len() != nq.rank()) {
                return Err(rec.bad("A and d have different sizes"));
            }
            if !nq.symmetrizable()? {
                return Err(rec.bad("A diag(d) is not symmetric positive definite"));
            }
            check_nahm(rec, &nq, subst, &spec)?;
            Lhs::Nahm(nq)
        }
        "multisum" => Lhs::Multi(spec.clone()),
        other => return Err(rec.bad(format!("unknown lhs.kind {}", other))),
    };
    let rhs_text = unquote(rec.need("rhs")?).to_string();
    let rhs = rec.expr(parse_rhs(&rhs_text))?;
    let rhs_alt = rec.get("rhs.alt").map(|s| unquote(s).to_string());
    if let Some(a) = &rhs_alt {
        rec.expr(parse_rhs(a))?;
    }
    let mut routes = Vec::new();
    for n in 1.. {
        let p = format!("route.{}.", n);
        let Some(kind) = rec.get(&format!("{}kind", p)) else { break };
        let outer = match rec.get(&format!("{}outer", p)) {
            Some(o) => product_one(rec, unquote(o))?,
            None => ProductExpr::one(),
        };
        match kind {
            "sum" => {
                let sum = build_sum(rec, &p, None)?;
                routes.push(Route::Sum(ScaledSum { outer, sum }));
            }
            "bailey" => {
                let chain = unquote(rec.need(&format!("{}chain", p))?).to_string();
                let (seed, _) = crate::bailey::parse_chain(&chain)?;
                crate::bailey::builtin_pair(&seed, 0, 1, 0)?;
                let s: i64 = rec
                    .get(&format!("{}subst", p))
                    .map(|x| x.parse().map_err(|_| rec.bad("bad route subst")))
                    .transpose()?
                    .unwrap_or(1);
                routes.push(Route::Bailey { chain, outer, subst: s });
            }
            other => return Err(rec.bad(format!("unknown route kind {}", other))),
        }
    }
    Ok(Identity { id: rec.id.clone(), tags, lhs, spec, rhs, rhs_text, rhs_alt, subst, routes })
}

/// A sum side given as catalog keys without a section. With `A` present the
/// keys describe a Nahm quadruple (`d` and `b` default to ones and zeros,
/// `c` to zero); otherwise `vars`, `exponent`, `denoms` and optional
/// `extra`, `prefactor` describe a multi-sum.
pub fn inline_sum(keys: &[(String, String)]) -> Result<Lhs, CatalogError> {
    let mut rec = Record { id: "inline".into(), line: 0, keys: BTreeMap::new() };
    for (k, v) in keys {
        if rec.keys.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(CatalogError::Syntax { line: 0, msg: format!("repeated key {}", k.trim()) });
        }
    }
    let Some(a) = rec.get("A") else {
        return Ok(Lhs::Multi(build_sum(&rec, "", None)?));
    };
    let a = parse_matrix(a).ok_or_else(|| rec.bad("bad matrix A"))?;
    let r = a.len();
    let d: Vec<i64> = match rec.get("d") {
        Some(s) => parse_qexp_list(s)
            .filter(|v| v.iter().all(|x| x.is_integer() && *x > QExp::zero()))
            .ok_or_else(|| rec.bad("bad d"))?
            .iter()
            .map(|x| x.to_integer())
            .collect(),
        None => vec![1; r],
    };
    let b = match rec.get("b") {
        Some(s) => parse_qexp_list(s).ok_or_else(|| rec.bad("bad b"))?,
        None => vec![QExp::zero(); r],
    };
    let c = match rec.get("c") {
        Some(s) => parse_qexp(s).ok_or_else(|| rec.bad("bad c"))?,
        None => QExp::zero(),
    };
    let nq = NahmQuadruple { a, b, c, d };
    if nq.a.iter().any(|row| row.len() != r) || nq.d.len() != r || nq.b.len() != r {
        return Err(rec.bad("A, b and d have different sizes"));
    }
    if !nq.symmetrizable()? {
        return Err(rec.bad("A diag(d) is not symmetric positive definite"));
    }
    Ok(Lhs::Nahm(nq))
}

fn product_one(rec: &Record, s: &str) -> Result<ProductExpr, CatalogError> {
    let mut v = rec.expr(parse_rhs(s))?;
    if v.len() != 1 {
        return Err(rec.bad(format!("outer factor {} must be a single product", s)));
    }
    Ok(v.remove(0))
}

/// The displayed exponent and denominators must be the quadruple's with
/// `q -> q^subst`.
fn check_nahm(rec: &Record, nq: &NahmQuadruple, subst: i64, spec: &MultiSumSpec) -> Result<(), CatalogError> {
    if nq.rank() != spec.rank() {
        return Err(rec.bad("rank of A differs from the number of variables"));
    }
    let mut want = nq.quadratic(false);
    for row in want.quad.iter_mut() {
        for x in row.iter_mut() {
            *x *= subst;
        }
    }
    for x in want.lin.iter_mut() {
        *x *= subst;
    }
    if want != spec.exponent {
        return Err(rec.bad("exponent does not match (A, b, d, subst)"));
    }
    for (i, di) in nq.d.iter().enumerate() {
        if spec.standard_denom(i) != Some(qe(di * subst)) {
            return Err(rec.bad(format!("denominator {} does not match d", i + 1)));
        }
    }
    if spec.factors.len() != nq.rank() || !spec.prefactor.is_empty() {
        return Err(rec.bad("a Nahm sum has only the standard denominators"));
    }
    Ok(())
}

impl Catalog {
    pub fn parse(text: &str) -> Result<Catalog, CatalogError> {
        let mut identities = BTreeMap::new();
        for rec in records(text)? {
            let id = identity_of(&rec)?;
            identities.insert(id.id.clone(), id);
        }
        Ok(Catalog { identities })
    }

    pub fn builtin() -> Catalog {
        Catalog::parse(BUILTIN).expect("built-in catalog parses")
    }

    pub fn from_path(p: &Path) -> Result<Catalog, CatalogError> {
        let text = std::fs::read_to_string(p).map_err(|e| CatalogError::Io(format!("{}: {}", p.display(), e)))?;
        Catalog::parse(&text)
    }

    /// Fixed ids carrying `tag` (or whose id equals it), sorted; without a
    /// tag, every fixed id followed by the family names. The tag `family`
    /// lists the families.
    pub fn list(&self, tag: Option<&str>) -> Vec<String> {
        match tag {
            None => {
                let mut v: Vec<String> = self.identities.keys().cloned().collect();
                v.extend(FAMILIES.iter().map(|f| f.to_string()));
                v
            }
            Some("family") => FAMILIES.iter().map(|f| f.to_string()).collect(),
            Some(t) => self
                .identities
                .values()
                .filter(|x| x.id == t || x.tags.iter().any(|g| g == t))
                .map(|x| x.id.clone())
                .collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&Identity> {
        self.identities.get(id)
    }

    /// A fixed id or a family instance written `NAME(k,i)` / `NAME(k)`.
    pub fn resolve(&self, id: &str) -> Result<Identity, CatalogError> {
        if let Some(x) = self.identities.get(id) {
            return Ok(x.clone());
        }
        let (name, k, i) = parse_instance(id).ok_or_else(|| CatalogError::UnknownId(id.to_string()))?;
        instantiate_family(&name, k, i)
    }

    /// Verify at `order` q-units on lattice `d`.
    pub fn verify(&self, id: &str, order: i64, d: i64) -> Result<VerificationReport, CatalogError> {
        verify_identity(&self.resolve(id)?, d, order * d)
    }

    pub fn cross_check_reduction(&self, id: &str, order: i64, d: i64) -> Result<ReductionReport, CatalogError> {
        cross_check(&self.resolve(id)?, d, order * d)
    }
}

/// `NAME(k,i)` or `NAME(k)`.
pub fn parse_instance(s: &str) -> Option<(String, i64, i64)> {
    let (name, rest) = s.split_once('(')?;
    let args = rest.strip_suffix(')')?;
    let nums: Vec<i64> = args.split(',').map(|x| x.trim().parse().ok()).collect::<Option<_>>()?;
    match nums.as_slice() {
        [k] => Some((name.trim().to_string(), *k, 0)),
        [k, i] => Some((name.trim().to_string(), *k, *i)),
        _ => None,
    }
}

// ----------------------------------------------------------------------
// Families
// ----------------------------------------------------------------------

pub const FAMILIES: &[&str] = &[
    "AG",
    "And1",
    "And2",
    "Bressoud",
    "BressoudSum",
    "Warnaar",
    "corgen13",
    "corgen13last",
    "exam9gen",
    "exam9genb",
    "gen1",
    "gen10",
    "gen14",
    "gen15a",
    "gen15b",
    "gen17",
    "gen3",
    "gen3b",
    "gen5-8a",
    "gen5-8b",
    "gen6",
    "gen7",
    "thm1.1",
    "thm1.2",
];

/// Families with a single parameter `k`; their instances use `i = 0`.
fn single_parameter(name: &str) -> bool {
    matches!(name, "thm1.2" | "corgen13last")
}

/// Stated second-parameter values for `name` at `k`; empty when `k` is
/// out of range.
pub fn family_indices(name: &str, k: i64) -> Result<Vec<i64>, CatalogError> {
    if !FAMILIES.contains(&name) {
        return Err(CatalogError::UnknownFamily(name.to_string()));
    }
    let r = |lo: i64, hi: i64| (lo..=hi).collect::<Vec<_>>();
    Ok(match name {
        "AG" | "Bressoud" | "Warnaar" if k >= 2 => r(1, k),
        "BressoudSum" if k >= 2 => r(0, k - 1),
        "thm1.2" | "corgen13last" if k >= 1 => vec![0],
        "thm1.1" | "corgen13" | "gen5-8a" | "gen5-8b" | "gen1" | "gen6" | "gen7" | "gen10" | "gen14" | "gen17"
        | "gen15a" | "gen15b"
            if k >= 1 =>
        {
            r(1, k + 1)
        }
        "And1" if k >= 1 => r(1, k).into_iter().filter(|a| (k - a) % 2 == 0).collect(),
        "And2" if k >= 1 && k % 2 == 1 => r(2, k).into_iter().filter(|a| a % 2 == 0).collect(),
        "gen3" if k >= 1 => r(1, k + 1).into_iter().filter(|a| (k + 1 - a) % 2 == 0).collect(),
        "gen3b" if k >= 2 && k % 2 == 0 => r(2, k).into_iter().filter(|a| a % 2 == 0).collect(),
        "exam9gen" if k >= 2 => r(1, k).into_iter().filter(|a| (k - a) % 2 == 0).collect(),
        "exam9genb" if k >= 3 && k % 2 == 1 => r(2, k).into_iter().filter(|a| a % 2 == 0).collect(),
        _ => Vec::new(),
    })
}

pub fn instance_id(name: &str, k: i64, i: i64) -> String {
    if single_parameter(name) {
        format!("{}({})", name, k)
    } else {
        format!("{}({},{})", name, k, i)
    }
}

struct Builder {
    vars: Vec<String>,
    denoms: Vec<i64>,
    defs: Vec<(String, String)>,
    parts: Vec<String>,
    exponent: Vec<String>,
    extra: Vec<String>,
}

impl Builder {
    fn new() -> Self {
        Builder { vars: vec![], denoms: vec![], defs: vec![], parts: vec![], exponent: vec![], extra: vec![] }
    }

    fn var(&mut self, name: &str, base: i64) -> &mut Self {
        self.vars.push(name.to_string());
        self.denoms.push(base);
        self
    }

    /// `n1..nk` with the given bases, registered as partial-sum parts.
    fn chain(&mut self, k: i64, base: impl Fn(i64) -> i64) -> &mut Self {
        for j in 1..=k {
            let n = format!("n{}", j);
            self.var(&n, base(j));
            self.parts.push(n);
        }
        self
    }

    fn term(&mut self, t: impl Into<String>) -> &mut Self {
        self.exponent.push(t.into());
        self
    }

    /// `c * (N_j^2 for j in 1..=k)`.
    fn squares(&mut self, c: &str, k: i64) -> &mut Self {
        for j in 1..=k {
            self.term(format!("{}*N{}^2", c, j));
        }
        self
    }

    fn lin(&mut self, c: &str, js: impl IntoIterator<Item = i64>) -> &mut Self {
        for j in js {
            self.term(format!("{}*N{}", c, j));
        }
        self
    }

    fn build(&self, id: String, rhs: String) -> Result<Identity, CatalogError> {
        let names: Vec<&str> = self.vars.iter().map(|s| s.as_str()).collect();
        let mut env = IndexEnv::new(&names);
        let wrap = |e: ParseError| CatalogError::Expr { id: id.clone(), source: e };
        for (n, b) in &self.defs {
            env.define(n, b).map_err(wrap)?;
        }
        let parts: Vec<&str> = self.parts.iter().map(|s| s.as_str()).collect();
        env.define_partial_sums("N", &parts).map_err(wrap)?;
        let text = if self.exponent.is_empty() { "0".to_string() } else { self.exponent.join(" + ") };
        let exponent = env.parse_quadratic(&text).map_err(wrap)?;
        let bases: Vec<QExp> = self.denoms.iter().map(|b| qe(*b)).collect();
        let mut spec = MultiSumSpec::new(self.vars.clone(), exponent, &bases);
        for call in &self.extra {
            let (arg, base, len) = parse_poch_call(call, &env).map_err(wrap)?;
            spec.factors.push(PochFactor { arg, base, len, power: -1 });
        }
        let rhs_v = parse_rhs(&rhs).map_err(wrap)?;
        let lhs = match spec.as_nahm() {
            Some(n) if n.symmetrizable().unwrap_or(false) => Lhs::Nahm(n),
            _ => Lhs::Multi(spec.clone()),
        };
        Ok(Identity {
            id,
            tags: vec!["family".into()],
            lhs,
            spec,
            rhs: rhs_v,
            rhs_text: rhs,
            rhs_alt: None,
            subst: 1,
            routes: Vec::new(),
        })
    }
}

fn tp(a: QExp, m: QExp) -> String {
    let f = |x: QExp| if x.is_integer() { x.to_integer().to_string() } else { format!("{}/{}", x.numer(), x.denom()) };
    format!("TP({},{},{};{})", f(a), f(m - a), f(m), f(m))
}

fn step(from: i64, to: i64, by: usize) -> Vec<i64> {
    if from > to {
        return Vec::new();
    }
    (from..=to).step_by(by).collect()
}

/// Concrete identity for a family member; `i` is ignored (must be 0) for
/// single-parameter families.
pub fn instantiate_family(name: &str, k: i64, i: i64) -> Result<Identity, CatalogError> {
    let allowed = family_indices(name, k)?;
    if !allowed.contains(&i) {
        let why = if allowed.is_empty() {
            format!("k = {} not allowed", k)
        } else {
            format!("allowed second parameter values for k = {}: {:?}", k, allowed)
        };
        return Err(CatalogError::Domain { name: name.into(), k, i, why });
    }
    let id = instance_id(name, k, i);
    let mut b = Builder::new();
    let half = QExp::new(1, 2);
    let over_q = " / P(1;1)";
    let (rhs, routes) = match name {
        "AG" | "Bressoud" => {
            let last = if name == "AG" { 1 } else { 2 };
            b.chain(k - 1, |j| if j == k - 1 { last } else { 1 }).squares("1", k - 1).lin("1", i..k);
            let m = if name == "AG" { 2 * k + 1 } else { 2 * k };
            (tp(qe(i), qe(m)) + over_q, vec![])
        }
        "BressoudSum" => {
            b.chain(k - 1, |j| if j == k - 1 { 2 } else { 1 }).squares("1", k - 1).lin("-1", 1..=i);
            let terms: Vec<String> = (0..=i).map(|m| tp(qe(k - i + 2 * m), qe(2 * k)) + over_q).collect();
            (terms.join(" + "), vec![])
        }
        "Warnaar" => {
            b.chain(k, |j| if j == k { 2 } else { 1 }).squares("1/2", k).lin("1", step(i, k, 2));
            let m = qe(2 * k + 3) * half;
            (format!("P(-q^(1/2);1) * {}{}", tp(qe(i) * half, m), over_q), vec![])
        }
        "thm1.1" | "thm1.2" => {
            b.chain(k, |j| if j == k { 2 } else { 1 }).squares("1", k);
            let m = qe(3) * half + qe(2 * k);
            if name == "thm1.1" {
                b.lin("1", i..=k);
                b.extra.push(format!("pochf(-q^(1/2); q; n{})", k));
                let chain = if i <= k { thm11_chain(k as usize, i as usize) } else { g_chain("G1", k - 1) };
                let r = Route::Bailey { chain, outer: ProductExpr::one(), subst: 1 };
                (tp(qe(i), m) + over_q, vec![r])
            } else {
                b.lin("1", 1..=k);
                b.extra.push(format!("pochf(-q^(1/2); q; n{}+1)", k));
                (tp(half, m) + over_q, vec![])
            }
        }
        "corgen13" | "corgen13last" => {
            b.var("m", 1);
            b.chain(k, |j| if j == k { 2 } else { 1 });
            b.term(format!("1/2*m^2 + m*n{}", k)).squares("1", k);
            let m = qe(3) * half + qe(2 * k);
            let pre = "P(-q^(1/2);1) * ";
            if name == "corgen13" {
                b.lin("1", i..=k);
                let chain = if i <= k { thm11_chain(k as usize, i as usize) } else { g_chain("G1", k - 1) };
                let outer = parse_rhs("P(-q^(1/2);1)").unwrap().remove(0);
                (format!("{}{}{}", pre, tp(qe(i), m), over_q), vec![Route::Bailey { chain, outer, subst: 1 }])
            } else {
                b.term("m").lin("1", 1..=k);
                let outer = parse_rhs("P(-q^(3/2);1)").unwrap().remove(0);
                let r = Route::Bailey { chain: g_chain("G2", k - 1), outer, subst: 1 };
                (format!("{}{}{}", pre, tp(half, m), over_q), vec![r])
            }
        }
        "gen5-8a" | "gen5-8b" => {
            b.var("m", 1);
            if name == "gen5-8a" {
                b.chain(k, |j| if j == 1 { 1 } else { 2 }).term("C(m+1,2) + m*n1");
            } else {
                b.chain(k, |j| if j == k { 1 } else { 2 }).term(format!("C(m+1,2) + m*n{}", k));
            }
            b.squares("2", k).lin("2", i..=k);
            (tp(qe(2 * i), qe(4 * k + 6)) + over_q, vec![])
        }
        "gen1" => {
            b.var("m1", 1).var("m2", 1);
            b.chain(k, |j| if j == 1 { 2 } else { 4 });
            b.term("C(m1+1,2) + m1*m2 + 2*C(m2+1,2) + 2*m2*n1").squares("4", k).lin("4", i..=k);
            (tp(qe(4 * i), qe(8 * k + 12)) + over_q, vec![])
        }
        "gen7" => {
            b.var("m1", 1).var("m2", 2);
            b.chain(k, |j| if j == 1 { 1 } else { 4 });
            b.term("C(m1+1,2) + m1*n1 + 2*C(m2+1,2) + 2*m2*n1").squares("4", k).lin("4", i..=k);
            (tp(qe(4 * i), qe(8 * k + 12)) + over_q, vec![])
        }
        "gen10" => {
            b.var("m1", 1).var("m2", 2);
            b.chain(k, |j| if j == 1 { 1 } else { 2 });
            b.term("C(m1,2) + C(m1+2*m2+1,2) + (m1+2*m2)*n1").squares("2", k).lin("2", i..=k);
            (tp(qe(2 * i), qe(4 * k + 6)) + over_q, vec![])
        }
        "gen6" => {
            b.var("m", 1).var("n11", 1).var("n12", 2);
            split_first(&mut b, k, "n11+2*n12", 2);
            b.term("C(m+1,2) + m*n1 + C(n11,2)").squares("2", k).lin("2", i..=k);
            (tp(qe(2 * i), qe(4 * k + 6)) + over_q, vec![])
        }
        "gen17" => {
            b.var("n11", 1).var("n12", 2);
            split_first(&mut b, k, "n11+2*n12", 1);
            b.term("C(n11,2)").squares("1", k).lin("1", i..=k);
            (tp(qe(i), qe(2 * k + 3)) + over_q, vec![])
        }
        "gen14" => {
            for j in 1..k {
                b.var(&format!("n{}", j), 1);
                b.parts.push(format!("n{}", j));
            }
            b.var("nk1", 1).var("nk2", 2);
            b.defs.push(("nk".into(), "nk1+2*nk2".into()));
            b.parts.push("nk".into());
            b.term("C(nk1,2)").squares("1", k).lin("1", i..=k);
            (tp(qe(i), qe(2 * k + 3)) + over_q, vec![])
        }
        "gen15a" | "gen15b" => {
            b.var("m", 1).var("n11", 1).var("n12", 2);
            split_first(&mut b, k, "n11+n12", 1);
            let drop = if name == "gen15a" { "n11" } else { "n12" };
            b.term(format!("C(m+1,2) + m*n11 + n11^2 + n12^2 - {} - C(n1,2)", drop)).squares("1", k).lin("1", i..=k);
            (format!("P(-q;1) * {}{}", tp(qe(i), qe(2 * k + 3)), over_q), vec![])
        }
        "And1" | "And2" => {
            b.chain(k - 1, |_| 2).squares("1", k - 1);
            andrews_linear(&mut b, name == "And1", k - 1, i, |j| format!("n{}", j));
            (andrews_rhs(name == "And1", i, 2 * k + 2), vec![])
        }
        "gen3" | "gen3b" => {
            for j in 1..k {
                b.var(&format!("n{}", j), 2);
                b.parts.push(format!("n{}", j));
            }
            b.var("nk1", 2).var("nk2", 4);
            b.defs.push((format!("n{}", k), "nk1+2*nk2".into()));
            b.parts.push(format!("n{}", k));
            b.term("2*C(nk1,2)").squares("1", k);
            andrews_linear(&mut b, name == "gen3", k, i, |j| format!("n{}", j));
            (andrews_rhs(name == "gen3", i, 2 * k + 4), vec![])
        }
        "exam9gen" | "exam9genb" => {
            b.var("n11", 2).var("n12", 4);
            split_first(&mut b, k - 1, "n11+2*n12", 2);
            b.term("2*C(n11,2)").squares("1", k - 1);
            andrews_linear(&mut b, name == "exam9gen", k - 1, i, |j| format!("n{}", j));
            (andrews_rhs(name == "exam9gen", i, 2 * k + 2), vec![])
        }
        _ => return Err(CatalogError::UnknownFamily(name.into())),
    };
    let mut id = b.build(id, rhs)?;
    id.routes = routes;
    Ok(id)
}

fn g_chain(seed: &str, s1: i64) -> String {
    let mut c = seed.to_string();
    for _ in 0..s1 {
        c.push_str(" |> S1");
    }
    c
}

/// `n1 := body` over split variables already added; `n2..nk` get `base`.
fn split_first(b: &mut Builder, k: i64, body: &str, base: i64) {
    b.defs.push(("n1".into(), body.into()));
    b.parts.push("n1".into());
    for j in 2..=k {
        b.var(&format!("n{}", j), base);
        b.parts.push(format!("n{}", j));
    }
}

/// Linear part of the two Andrews shapes over `r` partial sums:
/// `2(N_a + N_{a+2} + ... up to N_{r-1})`, or
/// `n_1 + n_3 + ... + n_{a-3} + N_{a-1} + ... + N_r`.
fn andrews_linear(b: &mut Builder, first: bool, r: i64, a: i64, n: impl Fn(i64) -> String) {
    if first {
        b.lin("2", step(a, r - 1, 2));
    } else {
        for j in step(1, a - 3, 2) {
            b.term(n(j));
        }
        b.lin("1", (a - 1).max(1)..=r);
    }
}

fn andrews_rhs(first: bool, a: i64, m: i64) -> String {
    let pre = if first { "P(-q;2)" } else { "P(-q^2;2)" };
    format!("{} * {} / P(2;2)", pre, tp(qe(a), qe(m)))
}
