//! Describe a labelled corpus in TOML, generate it and write the trade and
//! labels files that `ingest` reads back.
//!
//! cargo run --example synth_corpus

use tradeshape::synth::{gen_corpus, write_labels_file, write_trade_file, SynthCorpusSpec};

const SPEC: &str = r#"
seed = 2024

[[countries]]
label = "truncated_lognormal"
code = "LOW"
n_products = 400
k_capabilities = 3
capability_log_mean = 1.2
capability_log_sd = 0.8
left_threshold = 8.0
seed = 1

[[countries]]
label = "full_lognormal"
code = "MID"
n_products = 600
k_capabilities = 6
capability_log_mean = 1.8
capability_log_sd = 0.5
seed = 2

[[countries]]
label = "pareto_lognormal"
code = "TOP"
n_products = 800
k_capabilities = 8
capability_log_mean = 1.7
capability_log_sd = 0.55
seed = 3
right_cap = { cap_quantile = 0.65, pareto_alpha = 0.5 }
"#;

fn main() -> tradeshape::Result<()> {
    let spec = SynthCorpusSpec::from_toml(SPEC)?;
    let corpus = gen_corpus(&spec)?;
    println!("{} countries x {} products", corpus.matrix.n_countries(), corpus.matrix.n_products());
    for (c, spec) in corpus.labels.iter().zip(&spec.countries) {
        let cap = spec.spec.cap_point().map(|x| format!(", graft at {x:.3e}")).unwrap_or_default();
        let kept = corpus.matrix.row(corpus.matrix.country_index(&c.0).expect("listed")).iter().filter(|&&v| v > 0.0).count();
        println!("  {} {}: {kept} of {} draws kept{cap}", c.0, c.1, spec.spec.n_products);
    }

    let mut labels = Vec::new();
    write_labels_file(&corpus, &mut labels)?;
    println!("labels file:\n{}", String::from_utf8_lossy(&labels));

    let mut trade = Vec::new();
    write_trade_file(&corpus.matrix, &mut trade)?;
    let text = String::from_utf8_lossy(&trade);
    println!("trade file, first lines:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
