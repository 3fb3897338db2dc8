#[path = "../../core/tests/common/mod.rs"]
mod common;

use common::*;
use multitensor::parse_circuit;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let Output {
        status,
        stdout,
        stderr,
    } = Command::new(env!("CARGO_BIN_EXE_multitensor"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: status.code().expect("exit code"),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn amp_rows(tsv: &str) -> Vec<(String, f64, f64)> {
    tsv.lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (
                f[0].to_string(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn worked_example_amplitudes() {
    let dir = TempDir::new().unwrap();
    let c = file(&dir, "c.txt", FIG_CIRCUIT);
    let smp = file(&dir, "s.txt", "000\n100\n111\n");
    let plan = file(&dir, "p.txt", &format!("{FIG_PLAN}\nslice:\n"));
    let r = run(&["amplitudes", "-c", s(&c), "-s", s(&smp), "-p", s(&plan)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows = amp_rows(&r.stdout);
    assert_eq!(
        rows.iter().map(|r| r.0.as_str()).collect::<Vec<_>>(),
        ["000", "100", "111"]
    );
    for (_, re, im) in rows {
        assert!((re.hypot(im) - 0.3535533906).abs() < 1e-10);
    }
}

#[test]
fn batch_positions_expand_in_order() {
    let dir = TempDir::new().unwrap();
    let c = file(&dir, "c.txt", FIG_CIRCUIT);
    let smp = file(&dir, "s.txt", "111\n0*0\n");
    let r = run(&["amplitudes", "-c", s(&c), "-s", s(&smp)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let names: Vec<String> = amp_rows(&r.stdout).into_iter().map(|r| r.0).collect();
    assert_eq!(names, ["111", "000", "010"]);
}

#[test]
fn reverse_bits_flips_qubit_order() {
    let dir = TempDir::new().unwrap();
    let c = file(&dir, "c.txt", "2\n0 x 0\n");
    let smp = file(&dir, "s.txt", "01\n10\n");
    let r = run(&["amplitudes", "-c", s(&c), "-s", s(&smp), "--reverse-bits"]);
    let rows = amp_rows(&r.stdout);
    assert_eq!(rows[0].0, "01");
    assert!((rows[0].1 - 1.0).abs() < 1e-15);
    assert_eq!(rows[1].1, 0.0);
    let plain = amp_rows(&run(&["amplitudes", "-c", s(&c), "-s", s(&smp)]).stdout);
    assert!((plain[1].1 - 1.0).abs() < 1e-15);
}

#[test]
fn empty_samples_give_empty_output() {
    let dir = TempDir::new().unwrap();
    let c = file(&dir, "c.txt", FIG_CIRCUIT);
    let smp = file(&dir, "s.txt", "");
    let r = run(&["amplitudes", "-c", s(&c), "-s", s(&smp)]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.is_empty());
}

#[test]
fn optimize_zero_steps_and_determinism() {
    let dir = TempDir::new().unwrap();
    let c = file(&dir, "c.txt", FIG_CIRCUIT);
    let r = run(&["optimize", "-c", s(&c), "--steps", "0"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout, "(((((((0 1) 2) 3) 4) 5) 6) 7) 8\nslice:\n");
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    for out in [&a, &b] {
        let r = run(&[
            "optimize",
            "-c",
            s(&c),
            "--requests",
            "3",
            "--steps",
            "5000",
            "--seed",
            "4",
            "-o",
            s(out),
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        assert!(r.stdout.contains("objective:"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn optimized_plan_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let c = file(&dir, "c.txt", FIG_CIRCUIT);
    let smp = file(&dir, "s.txt", "000\n100\n111\n011\n");
    let plan = dir.path().join("p.txt");
    let r = run(&[
        "optimize",
        "-c",
        s(&c),
        "-s",
        s(&smp),
        "--multiplicity",
        "exact",
        "--steps",
        "20000",
        "--slice-interval",
        "1000",
        "-o",
        s(&plan),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = run(&[
        "amplitudes",
        "-c",
        s(&c),
        "-s",
        s(&smp),
        "-p",
        s(&plan),
        "--workers",
        "2",
    ]);
    let psi = state_vector(&parse_circuit(FIG_CIRCUIT).unwrap());
    for (b, re, im) in amp_rows(&r.stdout) {
        let want = psi[index_of(&b)];
        assert!(
            (re - want.re).abs() < 1e-12 && (im - want.im).abs() < 1e-12,
            "{b}"
        );
    }
}

#[test]
fn emulate_reports_worked_example_multiplicities() {
    let dir = TempDir::new().unwrap();
    let c = file(&dir, "c.txt", FIG_CIRCUIT);
    let smp = file(&dir, "s.txt", "000\n100\n111\n");
    let plan = file(&dir, "p.txt", &format!("{FIG_PLAN}\nslice:\n"));
    let r = run(&["emulate", "-c", s(&c), "-s", s(&smp), "-p", s(&plan)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let k_exact = |expr: &str| -> u64 {
        let line = r
            .stdout
            .lines()
            .find(|l| l.ends_with(&format!("\t{expr}")))
            .expect("node row");
        line.split('\t').nth(2).unwrap().parse().unwrap()
    };
    assert_eq!(k_exact("((0 3) (1 5))"), 1);
    assert_eq!(k_exact("((2 4) (6 8))"), 2);
    let flops = r.stdout.lines().find(|l| l.starts_with("flops:")).unwrap();
    let nums: Vec<&str> = flops
        .split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
        .collect();
    assert_eq!(nums[0], nums[1]);
}

#[test]
fn emulate_single_gate_is_trivial() {
    let dir = TempDir::new().unwrap();
    let c = file(&dir, "c.txt", "1\n0 h 0\n");
    let smp = file(&dir, "s.txt", "1\n");
    let r = run(&["emulate", "-c", s(&c), "-s", s(&smp)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let field = |name: &str| -> u64 {
        let line = r.stdout.lines().find(|l| l.starts_with(name)).unwrap();
        line.split_once(':')
            .unwrap()
            .1
            .split_whitespace()
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(field("peak:") <= field("max input:"));
    assert_eq!(
        r.stdout
            .lines()
            .filter(|l| l.starts_with(|c: char| c.is_ascii_digit()))
            .count(),
        1
    );
}

#[test]
fn xeb_reports() {
    let dir = TempDir::new().unwrap();
    let uniform = file(&dir, "u.txt", &"0.0625\n".repeat(40));
    let r = run(&["xeb", "-i", s(&uniform), "-n", "4", "--format", "tsv"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let f: f64 = r
        .stdout
        .lines()
        .nth(1)
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(f, 0.0);

    let table = "0.0062\n0.0056\n0.0063\n0.0055\n0.0068\n0.0051\n0.0058\n0.0053\n0.0062\n0.0070\n";
    let inst = file(&dir, "i.txt", table);
    let r = run(&["xeb", "--summarize", s(&inst), "--samples", "500000"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("(0.60%)"), "{}", r.stdout);

    let bad = file(&dir, "bad.txt", "0.1\nzero\n");
    let r = run(&["xeb", "-i", s(&bad), "-n", "3"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("line 2"), "{}", r.stderr);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let c = file(&dir, "c.txt", FIG_CIRCUIT);
    assert_eq!(run(&["amplitudes", "--bogus"]).code, 1);
    assert_eq!(
        run(&["amplitudes", "-c", "/nonexistent", "-s", "/nonexistent"]).code,
        1
    );
    assert_eq!(run(&["optimize", "-c", s(&c), "--temp-final", "5"]).code, 1);
    let short = file(&dir, "s.txt", "00\n");
    let r = run(&["amplitudes", "-c", s(&c), "-s", s(&short)]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let ok = file(&dir, "ok.txt", "000\n");
    assert_eq!(
        run(&[
            "amplitudes",
            "-c",
            s(&c),
            "-s",
            s(&ok),
            "--memory-cap",
            "16"
        ])
        .code,
        3
    );
    assert_eq!(run(&["--help"]).code, 0);
}

#[test]
fn pipeline_reproduces_xeb_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let circuit = grid_circuit(&mut rng, 2, 3, 8);
    let n = circuit.n_qubits();
    let probs: Vec<f64> = state_vector(&circuit)
        .iter()
        .map(|a| a.norm_sqr())
        .collect();
    let target = 2f64.powi(n as i32) * probs.iter().map(|p| p * p).sum::<f64>() - 1.0;
    let k = 4000;
    let samples: String = sample_from(&mut rng, &probs, k)
        .into_iter()
        .map(|i| bits_of(i, n) + "\n")
        .collect();

    let dir = TempDir::new().unwrap();
    let c = file(&dir, "c.txt", &circuit.to_text());
    let smp = file(&dir, "s.txt", &samples);
    let (plan, amps) = (dir.path().join("p.txt"), dir.path().join("a.tsv"));
    let r = run(&[
        "optimize",
        "-c",
        s(&c),
        "-s",
        s(&smp),
        "--steps",
        "20000",
        "-o",
        s(&plan),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = run(&[
        "amplitudes",
        "-c",
        s(&c),
        "-s",
        s(&smp),
        "-p",
        s(&plan),
        "-o",
        s(&amps),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = run(&[
        "xeb",
        "-i",
        s(&amps),
        "-n",
        &n.to_string(),
        "--format",
        "tsv",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let f: f64 = r
        .stdout
        .lines()
        .nth(1)
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (f - target).abs() <= 5.0 / (k as f64).sqrt(),
        "f {f} vs target {target}"
    );
}
