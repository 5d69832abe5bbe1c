//! Parser for the small expression language used by catalog files.
//!
//! One grammar covers exponent polynomials over index names, q-polynomial
//! prefactors, Pochhammer arguments and product right-hand sides. See
//! `GRAMMAR.md` in the crate root.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::nahm::{Affine, Quadratic};
use crate::products::ProductExpr;
use crate::series::{Monomial, QExp, Rat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected character {0:?} at {1}")]
    Char(char, usize),
    #[error("unexpected token {0} at {1}")]
    Token(String, usize),
    #[error("unexpected end of input")]
    Eof,
    #[error("unknown name {0}")]
    Name(String),
    #[error("{0}")]
    Shape(String),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(i64),
    Ident(String),
    Op(char),
}

fn lex(s: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let cs: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let st = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let t: String = cs[st..i].iter().collect();
            out.push((Tok::Num(t.parse().map_err(|_| ParseError::Token(t.clone(), st))?), st));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(cs[st..i].iter().collect()), st));
        } else if "+-*/^(),;".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(ParseError::Char(c, i));
        }
    }
    Ok(out)
}

/// Syntax tree shared by all sub-languages.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(i64),
    Name(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    /// `f(a, b; c; d)`: groups split by `;`, items by `,`.
    Call(String, Vec<Vec<Expr>>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(n) => write!(f, "{}", n),
            Expr::Name(s) => write!(f, "{}", s),
            Expr::Neg(a) => write!(f, "(-{})", a),
            Expr::Add(a, b) => write!(f, "({} + {})", a, b),
            Expr::Sub(a, b) => write!(f, "({} - {})", a, b),
            Expr::Mul(a, b) => write!(f, "({} * {})", a, b),
            Expr::Div(a, b) => write!(f, "({} / {})", a, b),
            Expr::Pow(a, b) => write!(f, "{}^{}", a, b),
            Expr::Call(n, gs) => {
                let gs: Vec<String> =
                    gs.iter().map(|g| g.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")).collect();
                write!(f, "{}[{}]", n, gs.join("; "))
            }
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn is_op(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Op(c))
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.is_op(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.toks.get(self.pos) {
            Some((t, at)) => ParseError::Token(format!("{:?}", t), *at),
            None => ParseError::Eof,
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.is_op('+') {
                self.pos += 1;
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.is_op('-') {
                self.pos += 1;
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    // term := unary (('*'|'/') unary | implicit-product)*
    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.is_op('*') {
                self.pos += 1;
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.is_op('/') {
                self.pos += 1;
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else if matches!(self.peek(), Some(Tok::Ident(_))) || self.is_op('(') {
                // juxtaposition such as `2ij` or `3(i+j)`
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.power()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_op('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.is_op('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    // power := atom ('^' (atom | '-' atom))?
    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.is_op('^') {
            self.pos += 1;
            let exp = if self.is_op('-') {
                self.pos += 1;
                Expr::Neg(Box::new(self.atom()?))
            } else {
                self.atom()?
            };
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Expr::Num(n))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.is_op('(') && is_function(&name) {
                    self.pos += 1;
                    let mut groups = vec![vec![]];
                    if !self.is_op(')') {
                        loop {
                            let e = self.expr()?;
                            groups.last_mut().unwrap().push(e);
                            if self.is_op(',') {
                                self.pos += 1;
                            } else if self.is_op(';') {
                                self.pos += 1;
                                groups.push(vec![]);
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(')')?;
                    return Ok(Expr::Call(name, groups));
                }
                Ok(Expr::Name(name))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            _ => Err(self.unexpected()),
        }
    }
}

fn is_function(name: &str) -> bool {
    matches!(name, "TP" | "P" | "J" | "C" | "pochf" | "poch")
}

pub fn parse(s: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(s)?, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

// ----------------------------------------------------------------------
// Index polynomials
// ----------------------------------------------------------------------

/// Polynomial over named indices; keys are sorted variable-id lists.
pub type Poly = BTreeMap<Vec<usize>, QExp>;

fn poly_const(c: QExp) -> Poly {
    let mut p = Poly::new();
    if !c.is_zero() {
        p.insert(vec![], c);
    }
    p
}

fn poly_add(a: &Poly, b: &Poly, sign: i64) -> Poly {
    let mut out = a.clone();
    for (k, v) in b {
        let e = out.entry(k.clone()).or_insert_with(QExp::zero);
        *e += *v * sign;
        if e.is_zero() {
            out.remove(k);
        }
    }
    out
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            let mut k = ka.clone();
            k.extend(kb);
            k.sort_unstable();
            let e = out.entry(k.clone()).or_insert_with(QExp::zero);
            *e += *va * *vb;
            if e.is_zero() {
                out.remove(&k);
            }
        }
    }
    out
}

fn poly_constant_value(p: &Poly) -> Option<QExp> {
    match p.len() {
        0 => Some(QExp::zero()),
        1 => p.get(&vec![]).copied(),
        _ => None,
    }
}

/// Variables and derived names visible to index expressions.
#[derive(Clone, Debug, Default)]
pub struct IndexEnv {
    pub vars: Vec<String>,
    defs: HashMap<String, Poly>,
}

impl IndexEnv {
    /// Summation variables in order; `N1..Nk` are the partial sums
    /// `N_i = n_i + ... + n_k` over these variables.
    pub fn new(vars: &[&str]) -> Self {
        let mut env = IndexEnv { vars: vars.iter().map(|s| s.to_string()).collect(), defs: HashMap::new() };
        let r = vars.len();
        for i in 0..r {
            let mut p = Poly::new();
            for j in i..r {
                p.insert(vec![j], QExp::one());
            }
            env.defs.insert(format!("N{}", i + 1), p);
        }
        env
    }

    /// Define `name` as an index expression over earlier names.
    pub fn define(&mut self, name: &str, body: &str) -> Result<(), ParseError> {
        let p = self.poly(&parse(body)?)?;
        self.defs.insert(name.to_string(), p);
        Ok(())
    }

    /// Partial sums over a custom ordered list of (possibly derived) names.
    pub fn define_partial_sums(&mut self, prefix: &str, names: &[&str]) -> Result<(), ParseError> {
        let parts: Vec<Poly> = names.iter().map(|n| self.lookup(n)).collect::<Result<_, _>>()?;
        for i in 0..parts.len() {
            let mut acc = Poly::new();
            for p in &parts[i..] {
                acc = poly_add(&acc, p, 1);
            }
            self.defs.insert(format!("{}{}", prefix, i + 1), acc);
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Result<Poly, ParseError> {
        if let Some(i) = self.vars.iter().position(|v| v == name) {
            let mut p = Poly::new();
            p.insert(vec![i], QExp::one());
            return Ok(p);
        }
        if let Some(p) = self.defs.get(name) {
            return Ok(p.clone());
        }
        // juxtaposed single-letter indices: `ij` = i*j
        if name.len() > 1 && name.chars().all(|c| c.is_ascii_lowercase()) {
            let mut acc = poly_const(QExp::one());
            for c in name.chars() {
                let single = c.to_string();
                if !self.vars.contains(&single) && !self.defs.contains_key(&single) {
                    return Err(ParseError::Name(name.to_string()));
                }
                acc = poly_mul(&acc, &self.lookup(&single)?);
            }
            return Ok(acc);
        }
        Err(ParseError::Name(name.to_string()))
    }

    pub fn poly(&self, e: &Expr) -> Result<Poly, ParseError> {
        Ok(match e {
            Expr::Num(n) => poly_const(QExp::from_integer(*n)),
            Expr::Name(s) => self.lookup(s)?,
            Expr::Neg(a) => poly_add(&Poly::new(), &self.poly(a)?, -1),
            Expr::Add(a, b) => poly_add(&self.poly(a)?, &self.poly(b)?, 1),
            Expr::Sub(a, b) => poly_add(&self.poly(a)?, &self.poly(b)?, -1),
            Expr::Mul(a, b) => poly_mul(&self.poly(a)?, &self.poly(b)?),
            Expr::Div(a, b) => {
                let d = poly_constant_value(&self.poly(b)?)
                    .filter(|x| !x.is_zero())
                    .ok_or_else(|| ParseError::Shape(format!("division by non-constant {}", b)))?;
                self.poly(a)?.into_iter().map(|(k, v)| (k, v / d)).collect()
            }
            Expr::Pow(a, b) => {
                let k = poly_constant_value(&self.poly(b)?)
                    .filter(|x| x.is_integer() && !x.is_negative())
                    .ok_or_else(|| ParseError::Shape(format!("bad power {}", b)))?
                    .to_integer();
                let base = self.poly(a)?;
                let mut acc = poly_const(QExp::one());
                for _ in 0..k {
                    acc = poly_mul(&acc, &base);
                }
                acc
            }
            Expr::Call(name, groups) if name == "C" => {
                // binomial C(x, k) for small constant k
                let args: Vec<&Expr> = groups.iter().flatten().collect();
                if args.len() != 2 {
                    return Err(ParseError::Shape("C takes two arguments".into()));
                }
                let x = self.poly(args[0])?;
                let k = poly_constant_value(&self.poly(args[1])?)
                    .filter(|v| v.is_integer() && !v.is_negative())
                    .ok_or_else(|| ParseError::Shape("C(x,k) needs constant k".into()))?
                    .to_integer();
                let mut acc = poly_const(QExp::one());
                for j in 0..k {
                    let t = poly_add(&x, &poly_const(QExp::from_integer(j)), -1);
                    acc = poly_mul(&acc, &t);
                }
                let mut fact = 1i64;
                for j in 1..=k {
                    fact *= j;
                }
                acc.into_iter().map(|(key, v)| (key, v / fact)).collect()
            }
            other => return Err(ParseError::Shape(format!("not an index expression: {}", other))),
        })
    }

    pub fn quadratic(&self, e: &Expr) -> Result<Quadratic, ParseError> {
        let p = self.poly(e)?;
        let r = self.vars.len();
        let mut q = Quadratic::zero(r);
        for (k, v) in p {
            match k.as_slice() {
                [] => q.c0 += v,
                [i] => q.lin[*i] += v,
                [i, j] => q.add_mono(*i, *j, v),
                _ => return Err(ParseError::Shape("exponent has degree above 2".into())),
            }
        }
        Ok(q)
    }

    pub fn affine(&self, e: &Expr) -> Result<Affine, ParseError> {
        let p = self.poly(e)?;
        let mut a = Affine::constant(self.vars.len(), QExp::zero());
        for (k, v) in p {
            match k.as_slice() {
                [] => a.c0 += v,
                [i] => a.lin[*i] += v,
                _ => return Err(ParseError::Shape("expected an affine index expression".into())),
            }
        }
        Ok(a)
    }

    pub fn parse_quadratic(&self, s: &str) -> Result<Quadratic, ParseError> {
        self.quadratic(&parse(s)?)
    }

    pub fn parse_affine(&self, s: &str) -> Result<Affine, ParseError> {
        self.affine(&parse(s)?)
    }

    /// Polynomial in q whose exponents are affine in the indices:
    /// `1 + q^(2i+2j+4k+2)`.
    pub fn parse_qpoly(&self, s: &str) -> Result<Vec<(Rat, Affine)>, ParseError> {
        let terms = self.qterms(&parse(s)?)?;
        Ok(terms)
    }

    fn qterms(&self, e: &Expr) -> Result<Vec<(Rat, Affine)>, ParseError> {
        let r = self.vars.len();
        let konst = |c: Rat| vec![(c, Affine::constant(r, QExp::zero()))];
        Ok(match e {
            Expr::Num(n) => konst(Rat::from_integer((*n).into())),
            Expr::Name(s) if s == "q" => vec![(Rat::one(), Affine::constant(r, QExp::one()))],
            Expr::Neg(a) => self.qterms(a)?.into_iter().map(|(c, x)| (-c, x)).collect(),
            Expr::Add(a, b) => {
                let mut v = self.qterms(a)?;
                v.extend(self.qterms(b)?);
                v
            }
            Expr::Sub(a, b) => {
                let mut v = self.qterms(a)?;
                v.extend(self.qterms(b)?.into_iter().map(|(c, x)| (-c, x)));
                v
            }
            Expr::Mul(a, b) => qmul(&self.qterms(a)?, &self.qterms(b)?),
            Expr::Div(a, b) => {
                let xb = self.qterms(b)?;
                if xb.len() != 1 || xb[0].1.depth().is_some() || xb[0].0.is_zero() {
                    return Err(ParseError::Shape(format!("cannot divide by {}", b)));
                }
                let (cb, eb) = &xb[0];
                self.qterms(a)?
                    .into_iter()
                    .map(|(c, mut x)| {
                        x.c0 -= eb.c0;
                        (c / cb, x)
                    })
                    .collect()
            }
            Expr::Pow(a, b) if **a == Expr::Name("q".into()) => {
                vec![(Rat::one(), self.affine(b)?)]
            }
            Expr::Pow(a, b) => {
                let k = match **b {
                    Expr::Num(k) => k,
                    _ => return Err(ParseError::Shape(format!("bad power {}", b))),
                };
                let base = self.qterms(a)?;
                let mut acc = konst(Rat::one());
                for _ in 0..k {
                    acc = qmul(&acc, &base);
                }
                acc
            }
            other => return Err(ParseError::Shape(format!("not a q-polynomial: {}", other))),
        })
    }
}

fn qmul(xa: &[(Rat, Affine)], xb: &[(Rat, Affine)]) -> Vec<(Rat, Affine)> {
    let mut v = Vec::new();
    for (ca, ea) in xa {
        for (cb, eb) in xb {
            let mut e = ea.clone();
            e.c0 += eb.c0;
            for (t, u) in e.lin.iter_mut().zip(&eb.lin) {
                *t += *u;
            }
            v.push((ca * cb, e));
        }
    }
    v
}

/// Parse a single monomial such as `-q^(1/2)`, `2*q^3`, `q`, `1`.
pub fn parse_monomial(s: &str) -> Result<Monomial, ParseError> {
    monomial_of(&parse(s)?)
}

fn monomial_of(e: &Expr) -> Result<Monomial, ParseError> {
    let env = IndexEnv::new(&[]);
    let t = env.qterms(e)?;
    if t.len() != 1 || t[0].0.is_zero() {
        return Err(ParseError::Shape(format!("not a monomial: {}", e)));
    }
    Ok(Monomial::new(t[0].0.clone(), t[0].1.c0))
}

/// Parse a constant exponent such as `3/2` or `q^(3/2)` (both mean 3/2
/// in base position); bare `q` means 1.
fn exponent_of(e: &Expr) -> Result<QExp, ParseError> {
    let env = IndexEnv::new(&[]);
    if let Ok(p) = env.poly(e) {
        return poly_constant_value(&p).ok_or_else(|| ParseError::Shape(format!("not constant: {}", e)));
    }
    let m = monomial_of(e)?;
    if !m.coeff.is_one() {
        return Err(ParseError::Shape(format!("base must be a pure power of q: {}", e)));
    }
    Ok(m.exp)
}

/// Parse an index-dependent Pochhammer `pochf(arg; base; len)`.
pub fn parse_poch_call(s: &str, env: &IndexEnv) -> Result<(Monomial, QExp, Affine), ParseError> {
    match parse(s)? {
        Expr::Call(name, groups) if name == "pochf" || name == "poch" => {
            if groups.len() != 3 || groups.iter().any(|g| g.len() != 1) {
                return Err(ParseError::Shape("pochf(arg; base; length)".into()));
            }
            Ok((monomial_of(&groups[0][0])?, exponent_of(&groups[1][0])?, env.affine(&groups[2][0])?))
        }
        other => Err(ParseError::Shape(format!("expected pochf(...), got {}", other))),
    }
}

// ----------------------------------------------------------------------
// Product right-hand sides
// ----------------------------------------------------------------------

/// Parse a product expression; sums of products are allowed and returned
/// as separate summands.
pub fn parse_rhs(s: &str) -> Result<Vec<ProductExpr>, ParseError> {
    let v = rhs_of(&parse(s)?)?;
    Ok(normalize(v))
}

fn normalize(v: Vec<ProductExpr>) -> Vec<ProductExpr> {
    let mut out: Vec<ProductExpr> = Vec::new();
    for p in v {
        if let Some(x) = out.iter_mut().find(|x| x.factors == p.factors) {
            x.prefactor.extend(p.prefactor);
        } else {
            out.push(p);
        }
    }
    for x in &mut out {
        x.prefactor = merge_monomials(&x.prefactor);
    }
    out.retain(|x| !x.prefactor.is_empty());
    out
}

fn merge_monomials(v: &[Monomial]) -> Vec<Monomial> {
    let mut m: BTreeMap<QExp, Rat> = BTreeMap::new();
    for x in v {
        *m.entry(x.exp).or_insert_with(Rat::zero) += &x.coeff;
    }
    m.into_iter().filter(|(_, c)| !c.is_zero()).map(|(e, c)| Monomial::new(c, e)).collect()
}

fn product_mul(a: &[ProductExpr], b: &[ProductExpr]) -> Vec<ProductExpr> {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            out.push(x.clone().times(y));
        }
    }
    normalize(out)
}

fn rhs_of(e: &Expr) -> Result<Vec<ProductExpr>, ParseError> {
    let konst = |m: Monomial| vec![ProductExpr { prefactor: vec![m], factors: vec![] }];
    Ok(match e {
        Expr::Num(n) => konst(Monomial::new(Rat::from_integer((*n).into()), QExp::zero())),
        Expr::Name(s) if s == "q" => konst(Monomial::qi(1)),
        Expr::Name(s) => return Err(ParseError::Name(s.clone())),
        Expr::Neg(a) => {
            rhs_of(a)?.into_iter().map(|mut p| {
                p.prefactor = p.prefactor.iter().map(|m| m.neg()).collect();
                p
            }).collect()
        }
        Expr::Add(a, b) => {
            let mut v = rhs_of(a)?;
            v.extend(rhs_of(b)?);
            normalize(v)
        }
        Expr::Sub(a, b) => {
            let mut v = rhs_of(a)?;
            v.extend(rhs_of(&Expr::Neg(b.clone()))?);
            normalize(v)
        }
        Expr::Mul(a, b) => product_mul(&rhs_of(a)?, &rhs_of(b)?),
        Expr::Div(a, b) => {
            let den = rhs_of(b)?;
            if den.len() != 1 || den[0].prefactor.len() != 1 {
                return Err(ParseError::Shape(format!("cannot divide by a sum: {}", b)));
            }
            let m = &den[0].prefactor[0];
            let inv = ProductExpr {
                prefactor: vec![Monomial::new(m.coeff.recip(), -m.exp)],
                factors: den[0].inverse_factors().factors,
            };
            product_mul(&rhs_of(a)?, &[inv])
        }
        Expr::Pow(a, b) if **a == Expr::Name("q".into()) => {
            let env = IndexEnv::new(&[]);
            let k = poly_constant_value(&env.poly(b)?).ok_or_else(|| ParseError::Shape("q^non-constant".into()))?;
            konst(Monomial::q(k))
        }
        Expr::Pow(a, b) => {
            let env = IndexEnv::new(&[]);
            let k = poly_constant_value(&env.poly(b)?)
                .filter(|x| x.is_integer())
                .ok_or_else(|| ParseError::Shape(format!("bad power {}", b)))?
                .to_integer();
            let base = rhs_of(a)?;
            let mut acc = konst(Monomial::one());
            if k >= 0 {
                for _ in 0..k {
                    acc = product_mul(&acc, &base);
                }
            } else {
                let inv = rhs_of(&Expr::Div(Box::new(Expr::Num(1)), a.clone()))?;
                for _ in 0..(-k) {
                    acc = product_mul(&acc, &inv);
                }
            }
            acc
        }
        Expr::Call(name, groups) => vec![call_product(name, groups)?],
    })
}

fn ints(groups: &[Vec<Expr>]) -> Result<Vec<Vec<QExp>>, ParseError> {
    let env = IndexEnv::new(&[]);
    groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|e| poly_constant_value(&env.poly(e)?).ok_or_else(|| ParseError::Shape(format!("{}", e))))
                .collect()
        })
        .collect()
}

fn call_product(name: &str, groups: &[Vec<Expr>]) -> Result<ProductExpr, ParseError> {
    let bad = || ParseError::Shape(format!("bad arguments for {}", name));
    match name {
        "TP" => {
            // TP(a1,...,ak; m): prod (q^ai; q^m)_inf
            let g = ints(groups)?;
            if g.len() != 2 || g[1].len() != 1 {
                return Err(bad());
            }
            let m = g[1][0];
            let mut p = ProductExpr::one();
            for a in &g[0] {
                p = p.p(*a, m, 1);
            }
            Ok(p)
        }
        "P" => {
            // P(a1,...; m) with exponents, or P(-q^(1/2); m) with a monomial
            if groups.len() != 2 || groups[1].len() != 1 {
                return Err(bad());
            }
            let m = exponent_of(&groups[1][0])?;
            let mut p = ProductExpr::one();
            for a in &groups[0] {
                let env = IndexEnv::new(&[]);
                let arg = match env.poly(a) {
                    Ok(pl) => Monomial::q(poly_constant_value(&pl).ok_or_else(bad)?),
                    Err(_) => monomial_of(a)?,
                };
                p = p.poch(arg, m, 1);
            }
            Ok(p)
        }
        "J" => {
            let g = ints(groups)?;
            if g.len() != 1 {
                return Err(bad());
            }
            let to_i = |x: QExp| x.to_integer().to_i64().filter(|_| x.is_integer()).ok_or_else(bad);
            match g[0].as_slice() {
                [m] => Ok(ProductExpr::one().jm(to_i(*m)?, 1)),
                [a, m] => Ok(ProductExpr::one().jam(to_i(*a)?, to_i(*m)?, 1)),
                _ => Err(bad()),
            }
        }
        _ => Err(ParseError::Name(name.to_string())),
    }
}

/// Canonical text for a product sum, used by golden tests and `--show`.
pub fn render_rhs(v: &[ProductExpr]) -> String {
    v.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" + ")
}
