use std::io::Write;
use std::process::{Command, Output};

fn nahm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nahm"))
        .args(args)
        .env_remove("NAHM_CATALOG")
        .output()
        .expect("run nahm")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn dump_coefficients(text: &str) -> Vec<(String, String)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let (e, c) = l.split_once(' ').unwrap();
            (e.to_string(), c.to_string())
        })
        .collect()
}

const BAD_CATALOG: &str = "
[identity a.good]
A = [[2]]
d = [1]
b = [0]
vars = n
exponent = \"n^2\"
denoms = [q]
rhs = \"1 / TP(1,4;5)\"

[identity b.bad]
A = [[2]]
d = [1]
b = [1]
vars = n
exponent = \"n^2+n\"
denoms = [q]
rhs = \"1 / TP(1,4;5)\"

[identity c.bad]
A = [[2]]
d = [1]
b = [0]
vars = n
exponent = \"n^2\"
denoms = [q]
rhs = \"1 / TP(2,3;5)\"
";

fn catalog_file(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn expand_rr_sum_side() {
    let o = nahm(&["expand", "R.R.1", "--side", "lhs", "--order", "6"]);
    assert!(o.status.success());
    let got = dump_coefficients(&stdout(&o));
    let want = [1, 1, 1, 1, 2, 2, 3];
    assert_eq!(got.len(), want.len());
    for (n, ((e, c), w)) in got.iter().zip(want).enumerate() {
        assert_eq!(e, &format!("{}/4", 4 * n));
        assert_eq!(c, &w.to_string());
    }
}

#[test]
fn expand_product_side_starts_at_one() {
    let o = nahm(&["expand", "table2.13.1", "--side", "rhs", "--order", "12"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().nth(1), Some("0/4 1"));
    assert_eq!(text.lines().next(), Some("order 48/4"));
}

#[test]
fn expand_family_sides_agree() {
    let l = nahm(&["expand", "AG", "--k", "3", "--i", "2", "--side", "lhs", "--order", "10"]);
    let r = nahm(&["expand", "AG", "--k", "3", "--i", "2", "--side", "rhs", "--order", "10"]);
    assert!(l.status.success() && r.status.success());
    assert_eq!(stdout(&l), stdout(&r));
    let inst = nahm(&["expand", "AG(3,2)", "--side", "lhs", "--order", "10"]);
    assert_eq!(stdout(&inst), stdout(&l));
}

#[test]
fn verify_exit_codes() {
    let o = nahm(&["verify", "R.R.1", "--order", "50"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("PASS  R.R.1"));
    let o = nahm(&["verify", "nosuch"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown identity nosuch"));
    assert_eq!(nahm(&["verify", "AG(2,7)"]).status.code(), Some(2));
    assert_eq!(nahm(&["verify"]).status.code(), Some(2));
    assert_eq!(nahm(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(nahm(&["verify", "R.R.1", "--order", "1/3"]).status.code(), Some(2));
}

#[test]
fn verify_all_passes() {
    let o = nahm(&["verify", "all", "--order", "30", "--threads", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("67 passed, 0 failed"), "{}", text);
}

#[test]
fn machine_output_matches_golden() {
    let args = ["verify", "table2.13.1", "table2.13.2", "example12", "R.R.1", "R.R.2", "--order", "20", "--output", "machine"];
    let o = nahm(&args);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), include_str!("golden/verify_machine.txt"));
}

#[test]
fn thread_count_does_not_change_output() {
    let base = ["verify", "all", "--order", "20", "--output", "machine"];
    let one = nahm(&[&base[..], &["--threads", "1"]].concat());
    let many = nahm(&[&base[..], &["--threads", "8"]].concat());
    assert_eq!(one.stdout, many.stdout);
    let lines: Vec<&str> = std::str::from_utf8(&one.stdout).unwrap().lines().collect();
    let mut sorted = lines.clone();
    sorted.sort();
    assert_eq!(lines, sorted);
    assert_eq!(lines.len(), 67);
}

#[test]
fn failures_and_fail_fast() {
    let f = catalog_file(BAD_CATALOG);
    let path = f.path().to_str().unwrap();
    let o = nahm(&["verify", "all", "--catalog", path, "--output", "machine", "--order", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "a.good\tPASS\t10\t0\nb.bad\tFAIL\t10\t0\nc.bad\tFAIL\t10\t0\n");
    let o = nahm(&["verify", "all", "--catalog", path, "--output", "machine", "--order", "10", "--fail-fast"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "a.good\tPASS\t10\t0\nb.bad\tFAIL\t10\t0\n");
    let o = nahm(&["verify", "b.bad", "--catalog", path, "--order", "10"]);
    assert!(stdout(&o).contains("first mismatch at q^1: sum side 0, product side 1"), "{}", stdout(&o));
}

#[test]
fn catalog_from_environment() {
    let f = catalog_file(BAD_CATALOG);
    let o = Command::new(env!("CARGO_BIN_EXE_nahm"))
        .args(["list"])
        .env("NAHM_CATALOG", f.path())
        .output()
        .unwrap();
    assert_eq!(stdout(&o).lines().take(3).collect::<Vec<_>>(), ["a.good", "b.bad", "c.bad"]);
    assert_eq!(nahm(&["list", "--catalog", "/nonexistent/file"]).status.code(), Some(2));
    let broken = catalog_file("[identity x]\nA = [[2]]\n");
    assert_eq!(nahm(&["verify", "all", "--catalog", broken.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn bailey_commands() {
    let o = nahm(&["bailey", "verify", "G1star", "--n", "25", "--order", "60"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = nahm(&["bailey", "chain", "G1star |> DJKLIM(q^(3/2))", "--equals", "G3", "--n", "20", "--order", "40"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = nahm(&["bailey", "chain", "G1star |> DJKLIM(q^(3/2))", "--equals", "G1", "--n", "5", "--order", "20"]);
    assert_eq!(o.status.code(), Some(1));
    let o = nahm(&["bailey", "chain", "G1 |> S3", "--against", "exam12-1", "--order", "30"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = nahm(&["bailey", "chain", "G1 |> S5", "--against", "exam12-1", "--order", "30"]);
    assert_eq!(o.status.code(), Some(2));
    let o = nahm(&["bailey", "chain", "G1star |> S3 |> S5", "--show", "alpha,beta", "--n", "3", "--order", "8"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("alpha_")).count(), 4);
    assert_eq!(stdout(&o).lines().next(), Some("alpha_0 = 1 + O(q^(33/4))"));
    let o = nahm(&["bailey", "chain", "G1 |> S1", "--order", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(nahm(&["bailey", "verify", "G9"]).status.code(), Some(2));
}

#[test]
fn nahm_eval_inline() {
    let o = nahm(&["nahm", "eval", "--a", "[[2]]", "--b", "[1]", "--order", "6", "--d-lattice", "1"]);
    assert!(o.status.success());
    let c: Vec<String> = dump_coefficients(&stdout(&o)).into_iter().map(|x| x.1).collect();
    assert_eq!(c, ["1", "1", "1", "1", "1", "2"]);
    let o = nahm(&[
        "nahm", "eval", "--vars", "i", "--exponent", "i^2", "--denoms", "[q]", "--order", "6", "--d-lattice", "1",
    ]);
    let c: Vec<String> = dump_coefficients(&stdout(&o)).into_iter().map(|x| x.1).collect();
    assert_eq!(c, ["1", "1", "1", "1", "2", "2", "3"]);
    assert_eq!(nahm(&["nahm", "eval", "--a", "[[0]]"]).status.code(), Some(2));
}

#[test]
fn reduce_reports_routes() {
    let o = nahm(&["reduce", "table2.6.1", "example13", "--order", "20", "--output", "machine"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 6);
}
