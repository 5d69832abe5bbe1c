use std::collections::BTreeSet;
use std::fmt::Write as _;

use nahmq::catalog::{family_indices, instance_id, verify_identity, Catalog, Identity, VerificationReport, FAMILIES};
use rayon::prelude::*;

/// Expand `all`, family names and tags into sorted, distinct ids.
pub fn expand_ids(cat: &Catalog, args: &[String], k_max: i64) -> Vec<String> {
    let mut out = BTreeSet::new();
    for a in args {
        if a == "all" {
            out.extend(cat.list(None).into_iter().filter(|id| cat.get(id).is_some()));
        } else if FAMILIES.contains(&a.as_str()) {
            for k in 1..=k_max {
                for i in family_indices(a, k).unwrap_or_default() {
                    out.insert(instance_id(a, k, i));
                }
            }
        } else if cat.get(a).is_none() && !cat.list(Some(a)).is_empty() {
            out.extend(cat.list(Some(a)));
        } else {
            out.insert(a.clone());
        }
    }
    out.into_iter().collect()
}

pub enum Outcome {
    Done(VerificationReport),
    Error(String, String),
}

impl Outcome {
    pub fn id(&self) -> &str {
        match self {
            Outcome::Done(r) => &r.id,
            Outcome::Error(id, _) => id,
        }
    }

    pub fn pass(&self) -> bool {
        matches!(self, Outcome::Done(r) if r.equal)
    }
}

fn one(id: &Identity, d: i64, order: i64) -> Outcome {
    match verify_identity(id, d, order) {
        Ok(r) => Outcome::Done(r),
        Err(e) => Outcome::Error(id.id.clone(), e.to_string()),
    }
}

/// Verify in parallel. Results come back in input order; with `fail_fast`
/// the list stops at the first failure in that order.
pub fn verify_all(idents: &[Identity], d: i64, order: i64, threads: usize, fail_fast: bool) -> Vec<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
    pool.install(|| {
        if !fail_fast {
            return idents.par_iter().map(|x| one(x, d, order)).collect();
        }
        let width = pool.current_num_threads().max(1);
        let mut out = Vec::new();
        for chunk in idents.chunks(width) {
            let part: Vec<Outcome> = chunk.par_iter().map(|x| one(x, d, order)).collect();
            for o in part {
                let stop = !o.pass();
                out.push(o);
                if stop {
                    return out;
                }
            }
        }
        out
    })
}

pub fn machine_line(o: &Outcome, order_text: &str) -> String {
    let status = if o.pass() { "PASS" } else { "FAIL" };
    format!("{}\t{}\t{}\t0", o.id(), status, order_text)
}

pub fn human_line(o: &Outcome) -> String {
    let mut s = String::new();
    match o {
        Outcome::Done(r) => {
            let status = if r.equal { "PASS" } else { "FAIL" };
            let _ = write!(
                s,
                "{:4}  {:<24} box {:?}  terms {}/{}  {} ms",
                status, r.id, r.lattice_box, r.lhs_terms, r.rhs_terms, r.wall_ms
            );
            if let Some(m) = &r.first_mismatch {
                let _ = write!(s, "\n      first mismatch at q^{}: sum side {}, product side {}", m.exp, m.lhs, m.rhs);
            }
        }
        Outcome::Error(id, e) => {
            let _ = write!(s, "FAIL  {:<24} error: {}", id, e);
        }
    }
    s
}
