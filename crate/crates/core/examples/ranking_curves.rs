//! Descending ranking curves of a capability ladder, their crossing counts,
//! a shuffled-volume null for comparison and the fitness coloring.
//!
//! cargo run --release --example ranking_curves

use tradeshape::fitness::{solve, FitnessConfig};
use tradeshape::ingest::{country_volume_sample, TradeMatrix};
use tradeshape::presets::{capability_ladder, shuffled_volumes};
use tradeshape::ranking::{dominance_matrix, fitness_values, indicator_ranks, ranking_curve, Indicator, RankingCurve};
use tradeshape::rca::{binarize, rca_matrix};
use tradeshape::synth::gen_corpus;

fn curves(m: &TradeMatrix) -> tradeshape::Result<Vec<RankingCurve>> {
    m.countries()
        .iter()
        .map(|c| ranking_curve(&country_volume_sample(m, c)?, c))
        .collect()
}

fn main() -> tradeshape::Result<()> {
    let corpus = gen_corpus(&capability_ladder(20, 5))?;
    let ladder = curves(&corpus.matrix)?;
    for c in ladder.iter().step_by(5) {
        println!("{}: {} products, top volume {:.3e}, median {:.3e}", c.country, c.len(), c.volumes[0], c.volumes[c.len() / 2]);
    }
    let d = dominance_matrix(&ladder);
    let crossing: Vec<_> = d.pairs.iter().filter(|p| p.crossings > 0).collect();
    println!("ladder: zero-crossing share {:.3}", d.zero_crossing_share.unwrap_or(f64::NAN));
    for p in crossing.iter().take(5) {
        println!("  {} vs {}: {} crossings over {} ranks", p.a, p.b, p.crossings, p.overlap);
    }

    let null = dominance_matrix(&curves(&shuffled_volumes(&corpus.matrix, 5)?)?);
    println!("shuffled null: zero-crossing share {:.3}", null.zero_crossing_share.unwrap_or(f64::NAN));

    let m = binarize(&rca_matrix(&corpus.matrix)?, 1.0)?;
    let fit = solve(&m, &FitnessConfig::default())?;
    let coloring = indicator_ranks(Indicator::Fitness, &fitness_values(&fit, corpus.matrix.countries()))?;
    for e in coloring.entries.iter().take(5) {
        println!("  {} fitness {:.4} rank {} color {:.3}", e.country, e.value, e.rank, e.color_index);
    }
    Ok(())
}
