//! Balassa RCA, binarization and the fitness–complexity iteration on a
//! toy matrix with a nested structure.
//!
//! cargo run --example rca_fitness

use tradeshape::fitness::{fitness_rank, solve, FitnessConfig, FitnessIter};
use tradeshape::ingest::TradeMatrix;
use tradeshape::rca::{binarize, rca_matrix, DEFAULT_RCA_THRESHOLD};

fn main() -> tradeshape::Result<()> {
    let countries: Vec<String> = ["AAA", "BBB", "CCC", "DDD"].map(String::from).to_vec();
    let products: Vec<String> = ["1001", "1002", "1003", "1004", "1005"].map(String::from).to_vec();
    #[rustfmt::skip]
    let volumes = vec![
        90.0, 40.0, 30.0, 20.0, 10.0,
        50.0, 30.0, 20.0,  1.0,  0.0,
        30.0, 10.0,  0.5,  0.0,  0.0,
        20.0,  0.2,  0.0,  0.0,  0.0,
    ];
    let trade = TradeMatrix::new(2010, countries, products, volumes)?;

    let rca = rca_matrix(&trade)?;
    let m = binarize(&rca, DEFAULT_RCA_THRESHOLD)?;
    println!("RCA and M (threshold {}):", m.threshold());
    for (c, code) in rca.countries.iter().enumerate() {
        let r: Vec<String> = (0..rca.products.len()).map(|p| format!("{:5.2}", rca.get(c, p))).collect();
        let b: String = m.row(c).iter().map(|&x| if x { '1' } else { '.' }).collect();
        println!("  {code} [{}]  {b}", r.join(" "));
    }

    println!("first iterates of the fitness vector:");
    for (i, state) in FitnessIter::new(&m, 1e-300)?.take(4).enumerate() {
        let (f, _q) = state?;
        println!("  {}: {f:.4?}", i + 1);
    }

    let result = solve(&m, &FitnessConfig::default())?;
    println!(
        "converged={} mode={:?} after {} iterations",
        result.converged, result.convergence_mode, result.iterations_run
    );
    for (code, (f, r)) in result.countries.iter().zip(result.fitness.iter().zip(fitness_rank(&result))) {
        println!("  {code}: F = {f:.6e}, rank {r}");
    }
    for (code, q) in result.products.iter().zip(&result.complexity) {
        println!("  {code}: Q = {q:.6e}");
    }
    Ok(())
}
