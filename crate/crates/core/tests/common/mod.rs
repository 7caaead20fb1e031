//! Helpers shared by the integration and acceptance targets.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num::{BigInt, BigRational, ToPrimitive, Zero};
use tradeshape::ingest::{country_volume_sample, TradeMatrix};
use tradeshape::ranking::{ranking_curve, RankingCurve};

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn count_le(u: &[BigRational], t: &BigRational) -> usize {
    u.iter().filter(|v| *v <= t).count()
}

/// sup |F_n − t| over [0, 1] in exact arithmetic. The supremum of a step
/// function minus the identity is reached at a jump, from one side or the
/// other, so every jump is checked with F_n counted directly.
pub fn brute_ks(cdf_values: &[f64]) -> f64 {
    let n = BigRational::from_integer(BigInt::from(cdf_values.len()));
    let u: Vec<BigRational> = cdf_values.iter().map(|&x| rational(x)).collect();
    let mut best = BigRational::zero();
    for t in &u {
        let at = BigRational::from_integer(BigInt::from(count_le(&u, t))) / &n;
        let before = BigRational::from_integer(BigInt::from(u.iter().filter(|v| *v < t).count())) / &n;
        for d in [&at - t, t - &before] {
            let d = if d < BigRational::zero() { -d } else { d };
            if d > best {
                best = d;
            }
        }
    }
    best.to_f64().expect("representable")
}

/// N ∫₀¹ (F_n(t) − t)² dt, integrated exactly piece by piece between
/// consecutive sample points.
pub fn brute_cvm(cdf_values: &[f64]) -> f64 {
    let n_int = cdf_values.len();
    let n = BigRational::from_integer(BigInt::from(n_int));
    let mut u: Vec<BigRational> = cdf_values.iter().map(|&x| rational(x)).collect();
    u.sort();
    let mut knots = vec![BigRational::zero()];
    knots.extend(u.iter().cloned());
    knots.push(BigRational::from_integer(BigInt::from(1)));
    let three = BigRational::from_integer(BigInt::from(3));
    let mut total = BigRational::zero();
    for w in knots.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a == b {
            continue;
        }
        let c = BigRational::from_integer(BigInt::from(count_le(&u, a))) / &n;
        let cube = |x: BigRational| &x * &x * &x;
        total += (cube(b - &c) - cube(a - &c)) / &three;
    }
    (total * n).to_f64().expect("representable")
}

pub fn curves(m: &TradeMatrix) -> Vec<RankingCurve> {
    m.countries()
        .iter()
        .map(|c| ranking_curve(&country_volume_sample(m, c).unwrap(), c).unwrap())
        .collect()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tradeshape")
}

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn tradeshape")
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// All regular files under `dir`, relative and sorted.
pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, rel: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(root.join(rel)).unwrap() {
            let e = e.unwrap();
            let rel = rel.join(e.file_name());
            if e.path().is_dir() {
                walk(root, &rel, out);
            } else {
                out.push(rel);
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, Path::new(""), &mut out);
    out.sort();
    out
}

/// Manifest text with the wall-time line removed; everything else in a
/// run must repeat byte for byte.
pub fn manifest_without_time(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_time_seconds\""))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Compares two output directories file by file.
pub fn same_outputs(a: &Path, b: &Path) -> Result<(), String> {
    let fa = files_under(a);
    let fb = files_under(b);
    if fa != fb {
        return Err(format!("file lists differ: {fa:?} vs {fb:?}"));
    }
    for f in &fa {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        let equal = if f.ends_with("manifest.json") {
            manifest_without_time(&String::from_utf8_lossy(&x))
                == manifest_without_time(&String::from_utf8_lossy(&y))
        } else {
            x == y
        };
        if !equal {
            return Err(format!("{} differs", f.display()));
        }
    }
    Ok(())
}
