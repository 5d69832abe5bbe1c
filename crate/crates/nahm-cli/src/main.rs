//! `nahm`: batch verification of the identity catalog.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nahmq::bailey::{build_chain, builtin_pair, limit_identity, limit_n_max, parse_chain, verify_pair};
use nahmq::catalog::{cross_check, inline_sum, instance_id, route_series, Catalog, Lhs, Route};
use nahmq::nahm::{multi_sum, nahm_sum};
use nahmq::series::{Comparison, QExp, QSeries};

mod run;

#[derive(Parser)]
#[command(name = "nahm", version, about = "Verify q-series identities by exact expansion")]
struct Cli {
    /// Truncation order in powers of q, e.g. 30 or 25/2.
    #[arg(long, global = true, default_value = "30")]
    order: String,
    /// Exponent lattice: series are kept in steps of q^(1/D).
    #[arg(long = "d-lattice", global = true, default_value_t = 4)]
    d_lattice: i64,
    /// Catalog file replacing the built-in one.
    #[arg(long, global = true, env = "NAHM_CATALOG")]
    catalog: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Human)]
    output: Output,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Stop at the first failing id.
    #[arg(long = "fail-fast", global = true)]
    fail_fast: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Output {
    Human,
    Machine,
}

#[derive(ValueEnum, Clone, Copy)]
enum Side {
    Lhs,
    Rhs,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compare both sides of identities. Accepts ids, NAME(k,i), family
    /// names, tags and `all`.
    Verify {
        #[arg(required = true)]
        ids: Vec<String>,
        /// Largest k when a family name is given.
        #[arg(long = "k-max", default_value_t = 3)]
        k_max: i64,
    },
    /// Print one side as a series dump.
    Expand {
        id: String,
        #[arg(long, value_enum)]
        side: Side,
        #[arg(long)]
        k: Option<i64>,
        #[arg(long)]
        i: Option<i64>,
    },
    /// Check the alternative evaluation routes of identities.
    Reduce {
        #[arg(required = true)]
        ids: Vec<String>,
    },
    /// List catalog ids, optionally by tag (`family` lists families).
    List { tag: Option<String> },
    #[command(subcommand)]
    Bailey(BaileyCmd),
    #[command(subcommand)]
    Nahm(NahmCmd),
}

#[derive(Subcommand)]
enum BaileyCmd {
    /// Check the defining relation of a pair or chain for n <= N.
    Verify {
        target: String,
        #[arg(long, default_value_t = 25)]
        n: usize,
    },
    /// Build a chain; compare it with a pair or a catalog identity.
    Chain {
        expr: String,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Built-in pair expected to coincide with the chain.
        #[arg(long)]
        equals: Option<String>,
        /// Comma list from alpha,beta.
        #[arg(long)]
        show: Option<String>,
        /// Catalog id with a bailey route using this chain.
        #[arg(long)]
        against: Option<String>,
    },
}

#[derive(Subcommand)]
enum NahmCmd {
    /// Expand an inline sum: either --a [--b --c --d] or --vars --exponent --denoms.
    Eval {
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        b: Option<String>,
        #[arg(long)]
        c: Option<String>,
        #[arg(long = "d")]
        dvec: Option<String>,
        #[arg(long)]
        vars: Option<String>,
        #[arg(long)]
        exponent: Option<String>,
        #[arg(long)]
        denoms: Option<String>,
        #[arg(long)]
        extra: Option<String>,
        #[arg(long)]
        prefactor: Option<String>,
    },
}

struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

fn lattice_order(text: &str, d: i64) -> Result<i64, Usage> {
    let q: QExp = text.trim().parse().map_err(|_| Usage(format!("bad order {}", text)))?;
    let units = q * d;
    if q < QExp::from_integer(0) || !units.is_integer() {
        return Err(Usage(format!("order {} is not a non-negative multiple of 1/{}", text, d)));
    }
    Ok(units.to_integer())
}

fn load(cli: &Cli) -> Result<Catalog, Usage> {
    Ok(match &cli.catalog {
        Some(p) => Catalog::from_path(p)?,
        None => Catalog::builtin(),
    })
}

fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn code(pass: bool) -> ExitCode {
    ExitCode::from(if pass { 0 } else { 1 })
}

fn mismatch(c: &Comparison, d: i64) -> String {
    match c {
        Comparison::Equal => String::new(),
        Comparison::Mismatch { exp, left, right } => {
            format!(" (first mismatch at q^{}: {} vs {})", QExp::new(*exp, d), left, right)
        }
    }
}

fn cmd_verify(cli: &Cli, ids: &[String], k_max: i64) -> Result<ExitCode, Usage> {
    let cat = load(cli)?;
    let d = cli.d_lattice;
    let order = lattice_order(&cli.order, d)?;
    let ids = run::expand_ids(&cat, ids, k_max);
    let idents = ids.iter().map(|id| cat.resolve(id)).collect::<Result<Vec<_>, _>>()?;
    let outcomes = run::verify_all(&idents, d, order, cli.threads, cli.fail_fast);
    let failed = outcomes.iter().filter(|o| !o.pass()).count();
    for o in &outcomes {
        match cli.output {
            Output::Machine => println!("{}", run::machine_line(o, &cli.order)),
            Output::Human => println!("{}", run::human_line(o)),
        }
    }
    if cli.output == Output::Human {
        println!("{} passed, {} failed, order {}", outcomes.len() - failed, failed, cli.order);
    }
    Ok(code(failed == 0))
}

fn cmd_expand(cli: &Cli, id: &str, side: Side, k: Option<i64>, i: Option<i64>) -> Result<ExitCode, Usage> {
    let cat = load(cli)?;
    let d = cli.d_lattice;
    let order = lattice_order(&cli.order, d)?;
    let id = match k {
        Some(k) => instance_id(id, k, i.unwrap_or(0)),
        None => id.to_string(),
    };
    let ident = cat.resolve(&id)?;
    let s = match side {
        Side::Lhs => ident.lhs_series(d, order)?,
        Side::Rhs => ident.rhs_series(d, order)?,
    };
    print!("{}", s.dump());
    Ok(ExitCode::SUCCESS)
}

fn cmd_reduce(cli: &Cli, ids: &[String]) -> Result<ExitCode, Usage> {
    let cat = load(cli)?;
    let d = cli.d_lattice;
    let order = lattice_order(&cli.order, d)?;
    let mut ok = true;
    for id in run::expand_ids(&cat, ids, 3) {
        let ident = cat.resolve(&id)?;
        if ident.routes.is_empty() {
            continue;
        }
        let r = cross_check(&ident, d, order)?;
        ok &= r.pass();
        match cli.output {
            Output::Machine => println!("{}\t{}\t{}\t0", id, status(r.pass()), cli.order),
            Output::Human => {
                println!("{}  {}", status(r.pass()), id);
                for (name, m) in &r.routes {
                    println!("      {}: {}", name, status(m.is_none()));
                }
                if let Some(a) = &r.automatic {
                    println!("      automatic reduction: {}", status(a.is_none()));
                }
            }
        }
    }
    Ok(code(ok))
}

fn pair_check(cli: &Cli, target: &str, n: usize) -> Result<ExitCode, Usage> {
    let d = cli.d_lattice;
    let order = lattice_order(&cli.order, d)?;
    let p = build_chain(target, n, d, order)?;
    let rep = verify_pair(&p, n, order)?;
    let detail = match rep.first_failure() {
        Some((k, c)) => format!(" at n = {}{}", k, mismatch(c, d)),
        None => String::new(),
    };
    match cli.output {
        Output::Machine => println!("{}\t{}\t{}\t0", target, status(rep.pass()), cli.order),
        Output::Human => println!("{} {} for n <= {}{}", status(rep.pass()), target, n, detail),
    }
    Ok(code(rep.pass()))
}

fn same_chain(a: &str, b: &str) -> bool {
    match (parse_chain(a), parse_chain(b)) {
        (Ok(x), Ok(y)) => x.0.eq_ignore_ascii_case(&y.0) && x.1 == y.1,
        _ => false,
    }
}

fn cmd_chain(
    cli: &Cli,
    expr: &str,
    n: usize,
    equals: Option<&str>,
    show: Option<&str>,
    against: Option<&str>,
) -> Result<ExitCode, Usage> {
    let d = cli.d_lattice;
    let order = lattice_order(&cli.order, d)?;
    let p = build_chain(expr, n.max(limit_n_max(order, d)), d, order)?;
    if let Some(list) = show {
        for part in list.split(',').map(str::trim) {
            let v = match part {
                "alpha" => &p.alpha,
                "beta" => &p.beta,
                other => return Err(Usage(format!("cannot show {}", other))),
            };
            for (k, s) in v.iter().enumerate().take(n + 1) {
                println!("{}_{} = {}", part, k, s.pretty());
            }
        }
    }
    let mut ok = true;
    let mut say = |what: String, pass: bool| {
        ok &= pass;
        match cli.output {
            Output::Machine => println!("{}\t{}\t{}\t0", what, status(pass), cli.order),
            Output::Human => println!("{} {}", status(pass), what),
        }
    };
    if let Some(name) = equals {
        let g = builtin_pair(name, n, d, order)?;
        let mut pass = g.a == p.a;
        for k in 0..=n {
            pass &= g.alpha[k].equal_up_to(&p.alpha[k], order)?.is_equal();
            pass &= g.beta[k].equal_up_to(&p.beta[k], order)?.is_equal();
        }
        say(format!("{} = {} for n <= {}", expr, name, n), pass);
    }
    if let Some(id) = against {
        let cat = load(cli)?;
        let ident = cat.resolve(id)?;
        let route = ident
            .routes
            .iter()
            .find(|r| matches!(r, Route::Bailey { chain, .. } if same_chain(chain, expr)))
            .ok_or_else(|| Usage(format!("{} has no bailey route through {}", id, expr)))?;
        let lhs = route_series(route, d, order)?;
        let rhs = ident.rhs_series(d, order)?;
        let c = lhs.equal_up_to(&rhs, order)?;
        say(format!("{} limit matches {}{}", expr, id, mismatch(&c, d)), c.is_equal());
    }
    if equals.is_none() && against.is_none() && show.is_none() {
        let rep = verify_pair(&p, n, order)?;
        say(format!("{} pair relation for n <= {}", expr, n), rep.pass());
        let (l, r) = limit_identity(&p, order)?;
        let c = l.equal_up_to(&r, order)?;
        say(format!("{} limit identity{}", expr, mismatch(&c, d)), c.is_equal());
    }
    Ok(code(ok))
}

fn cmd_eval(cli: &Cli, keys: Vec<(String, String)>) -> Result<ExitCode, Usage> {
    let d = cli.d_lattice;
    let order = lattice_order(&cli.order, d)?;
    let with_c = keys.iter().any(|(k, _)| k == "c");
    let s: QSeries = match inline_sum(&keys)? {
        Lhs::Nahm(q) => nahm_sum(&q, d, order, with_c)?,
        Lhs::Multi(m) => multi_sum(&m, d, order)?,
    };
    print!("{}", s.dump());
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: &Cli) -> Result<ExitCode, Usage> {
    match &cli.cmd {
        Cmd::Verify { ids, k_max } => cmd_verify(cli, ids, *k_max),
        Cmd::Expand { id, side, k, i } => cmd_expand(cli, id, *side, *k, *i),
        Cmd::Reduce { ids } => cmd_reduce(cli, ids),
        Cmd::List { tag } => {
            for id in load(cli)?.list(tag.as_deref()) {
                println!("{}", id);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bailey(BaileyCmd::Verify { target, n }) => pair_check(cli, target, *n),
        Cmd::Bailey(BaileyCmd::Chain { expr, n, equals, show, against }) => {
            cmd_chain(cli, expr, *n, equals.as_deref(), show.as_deref(), against.as_deref())
        }
        Cmd::Nahm(NahmCmd::Eval { a, b, c, dvec, vars, exponent, denoms, extra, prefactor }) => {
            let named = [
                ("A", a),
                ("b", b),
                ("c", c),
                ("d", dvec),
                ("vars", vars),
                ("exponent", exponent),
                ("denoms", denoms),
                ("extra", extra),
                ("prefactor", prefactor),
            ];
            let keys = named.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect();
            cmd_eval(cli, keys)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(c) => c,
        Err(Usage(msg)) => {
            eprintln!("nahm: {}", msg);
            ExitCode::from(2)
        }
    }
}
