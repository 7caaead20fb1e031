//! KS and CvM statistics with parametric-bootstrap p-values, next to the
//! naive thresholds that ignore parameter estimation.
//!
//! cargo run --release --example gof_tests

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Pareto};
use tradeshape::gof::{gof_test, naive_cvm_critical_value, GofConfig};

fn main() -> tradeshape::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lognormal: Vec<f64> = LogNormal::new(5.0, 1.0)
        .expect("valid")
        .sample_iter(&mut rng)
        .take(500)
        .collect();
    let pareto: Vec<f64> = Pareto::new(1.0, 1.2)
        .expect("valid")
        .sample_iter(&mut rng)
        .take(500)
        .collect();

    let cfg = GofConfig { replicates: 999, seed: 42, ..Default::default() };
    println!("naive CvM critical value at 1%: {:.4}", naive_cvm_critical_value(0.01));
    for (name, sample) in [("log-normal", &lognormal), ("pareto", &pareto)] {
        let r = gof_test(sample, &cfg)?;
        println!("== {name} (n = {})", r.n);
        println!(
            "   KS  D = {:.4}  bootstrap p = {:.4}  naive p = {:.4}  reject at {}: {}",
            r.ks_stat, r.ks_pvalue.unwrap_or(f64::NAN), r.naive_ks_pvalue, r.alpha_ks, r.reject_ks
        );
        println!(
            "   CvM W² = {:.4}  bootstrap p = {:.4}  naive reject: {}  reject at {}: {}",
            r.cvm_stat, r.cvm_pvalue.unwrap_or(f64::NAN), r.naive_reject_cvm, r.alpha_cvm, r.reject_cvm
        );
    }
    Ok(())
}
