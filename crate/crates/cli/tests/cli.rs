use std::path::Path;
use std::process::{Command, Output};

use paracut_core::generate::random_grid;
use paracut_core::graph::Connectivity;
use paracut_core::io::{format_dimacs, read_labeling, write_grid, DimacsInstance};

fn paracut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paracut"))
        .args(args)
        .env_remove("PARACUT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(o: &Output, name: &str) -> f64 {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{name} ")).map(|v| v.parse().unwrap()))
        .unwrap_or_else(|| panic!("no {name} in {}", stdout(o)))
}

fn grid_file(dir: &Path, name: &str, dims: &[usize], seed: u64) -> String {
    let g = random_grid(dims, Connectivity::Grid2D4, seed).unwrap();
    let path = dir.join(name);
    write_grid(&g, &path).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn maxflow_and_aar_agree() {
    let dir = tempfile::tempdir().unwrap();
    let input = grid_file(dir.path(), "g.pcut", &[4, 4], 1);
    let a = paracut(&["solve", "--input", &input, "--algo", "aar"]);
    let m = paracut(&["solve", "--input", &input, "--algo", "maxflow"]);
    assert!(a.status.success() && m.status.success());
    assert!((field(&a, "energy") - field(&m, "energy")).abs() < 1e-9);
}

#[test]
fn thread_counts_give_identical_labelings() {
    let dir = tempfile::tempdir().unwrap();
    let input = grid_file(dir.path(), "g.pcut", &[30, 30], 2);
    let out1 = dir.path().join("x1.txt");
    let out8 = dir.path().join("x8.txt");
    let r1 = paracut(&["solve", "--input", &input, "--threads", "1", "--out", out1.to_str().unwrap()]);
    let r8 = paracut(&["solve", "--input", &input, "--threads", "8", "--out", out8.to_str().unwrap()]);
    assert!(r1.status.success() && r8.status.success());
    assert_eq!(read_labeling(&out1).unwrap(), read_labeling(&out8).unwrap());
    assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out8).unwrap());
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = grid_file(dir.path(), "g.pcut", &[5, 5], 3);
    let o = Command::new(env!("CARGO_BIN_EXE_paracut"))
        .args(["solve", "--input", &input])
        .env("PARACUT_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_paracut"))
        .args(["solve", "--input", &input])
        .env("PARACUT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(paracut(&["solve", "--input", "/nonexistent/file"]).status.code(), Some(3));
    assert_eq!(paracut(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(paracut(&["solve"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let input = grid_file(dir.path(), "g.pcut", &[12, 12], 4);
    assert_eq!(paracut(&["solve", "--input", &input, "--algo", "nope"]).status.code(), Some(2));
    let o = paracut(&["solve", "--input", &input, "--algo", "ap", "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    let garbage = dir.path().join("garbage.max");
    std::fs::write(&garbage, "p max x y\n").unwrap();
    assert_eq!(paracut(&["solve", "--input", garbage.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn dimacs_input() {
    let dir = tempfile::tempdir().unwrap();
    let g = random_grid(&[3, 4], Connectivity::Grid2D4, 5).unwrap();
    let path = dir.path().join("g.max");
    std::fs::write(&path, format_dimacs(&DimacsInstance::from_cut(g.cut()))).unwrap();
    let p = path.to_str().unwrap();
    let m = paracut(&["solve", "--input", p, "--algo", "maxflow"]);
    assert!(m.status.success());
    let not_grid = paracut(&["solve", "--input", p, "--algo", "aar"]);
    assert_eq!(not_grid.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&not_grid.stderr).contains("not a grid"));
    let a = paracut(&["solve", "--input", p, "--format", "dimacs", "--grid-dims", "3x4", "--algo", "aar"]);
    assert!(a.status.success());
    assert!((field(&a, "energy") - field(&m, "energy")).abs() < 1e-9);
}

#[test]
fn warm_start_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = grid_file(dir.path(), "g.pcut", &[16, 16], 6);
    let other = grid_file(dir.path(), "h.pcut", &[16, 16], 7);
    let dual = dir.path().join("dual.bin");
    let d = dual.to_str().unwrap();
    let first = paracut(&["solve", "--input", &input, "--save-dual", d]);
    assert!(first.status.success());
    let again = paracut(&["solve", "--input", &input, "--warm-start", d]);
    assert!(again.status.success());
    assert!(field(&again, "iterations") <= 10.0);
    assert_eq!(paracut(&["solve", "--input", &other, "--warm-start", d]).status.code(), Some(3));
    assert!(paracut(&["solve", "--input", &other, "--warm-start", d, "--force"]).status.success());
}

#[test]
fn trace_and_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let input = grid_file(dir.path(), "g.pcut", &[8, 8], 8);
    let trace = dir.path().join("t.csv");
    let o = paracut(&["solve", "--input", &input, "--trace", trace.to_str().unwrap(), "--scale-pairwise", "0.1"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("iter,gap,dual_objective,jaccard_to_final,wall_ms\n"));
    let m = paracut(&["solve", "--input", &input, "--algo", "maxflow", "--scale-pairwise", "0.1"]);
    assert!((field(&o, "energy") - field(&m, "energy")).abs() < 1e-9);
    assert_eq!(paracut(&["solve", "--input", &input, "--scale-pairwise", "-1"]).status.code(), Some(2));
}

#[test]
fn bench_schema() {
    let o = paracut(&["bench", "--generate", "8x8", "--algos", "aar,ap", "--threads", "1,2", "--scales", "1,0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "algo,threads,scale,iterations,certified,energy,optimal_energy,gap,wall_ms,\
         iters_err_lt_10pct,iters_err_lt_2pct,iters_jd_lt_1pct,iters_jd_lt_0_1pct"
    );
    assert_eq!(lines.count(), 8);
}

#[test]
fn verify_runs() {
    let a = paracut(&["verify", "--instances", "6", "--seed", "3"]);
    assert!(a.status.success(), "{}", stdout(&a));
    let b = paracut(&["verify", "--instances", "6", "--seed", "3"]);
    assert_eq!(stdout(&a), stdout(&b));
    let bad = paracut(&["verify", "--instances", "2", "--corrupt-decomposition"]);
    assert!(!bad.status.success());
    assert!(stdout(&bad).contains("VIOLATION decomposition"));
}
