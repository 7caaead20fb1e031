//! synth → ingest → analyze on the three-class corpus, the same sequence as
//! `tradeshape synth`, `tradeshape ingest` and `tradeshape analyze`.
//!
//! cargo run --release --example full_pipeline [OUT_DIR]

use std::path::PathBuf;

use tradeshape::pipeline::{cmd_analyze, cmd_ingest, cmd_synth, RunConfig, GofSettings, TRADE_FILE};
use tradeshape::presets::three_class_corpus;

fn main() -> tradeshape::Result<()> {
    let tmp;
    let root = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            tmp = tempfile::tempdir().expect("temp dir");
            tmp.path().to_path_buf()
        }
    };
    let synth_dir = root.join("synth");
    let corpus = cmd_synth(&three_class_corpus(3), &synth_dir)?;

    let cfg = RunConfig {
        trade_file: Some(synth_dir.join(TRADE_FILE)),
        out_dir: root.join("run"),
        gof: GofSettings { replicates: 199, ..Default::default() },
        seed: 3,
        dump_histograms: true,
        ..Default::default()
    };
    let ingest = cmd_ingest(&cfg)?;
    println!("ingested {} rows rejected", ingest.rejects.len());

    let analysis = cmd_analyze(&cfg)?;
    let mut hits = 0;
    for (c, (code, intended)) in analysis.countries.iter().zip(&corpus.labels) {
        assert_eq!(&c.country, code);
        hits += usize::from(c.shape.class == *intended);
        println!(
            "{code} intended {intended:<20} got {:<20} fitness rank {:>2}  CvM {:.3}",
            c.shape.class,
            analysis.fitness_rank_of(code).unwrap_or(0),
            c.gof.cvm_stat
        );
    }
    println!("{hits}/{} classified as intended", corpus.labels.len());
    if let Some(p) = &analysis.profile {
        println!("CvM vs fitness rank parabola: a = {:.4e}", p.cvm_parabola.a);
    }
    println!("zero-crossing share {:.3}", analysis.dominance.zero_crossing_share.unwrap_or(f64::NAN));
    println!("outputs in {}", cfg.out_dir.display());
    Ok(())
}
