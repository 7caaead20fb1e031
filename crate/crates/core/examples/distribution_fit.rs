//! Histogram, log-normal MLE, left-of-mode refit and shape classification
//! for one synthetic country of each class.
//!
//! cargo run --release --example distribution_fit

use tradeshape::distfit::{
    classify_shape, fit_lognormal, log_histogram, refit_left_of_mode, BinRule, ClassifierConfig,
};
use tradeshape::gof::{gof_test, GofConfig};
use tradeshape::presets;
use tradeshape::synth::gen_country;

fn main() -> tradeshape::Result<()> {
    let bins = BinRule::default();
    let cases = [
        ("truncated", presets::truncated_country(11)),
        ("full", presets::full_country(12)),
        ("pareto", presets::pareto_country(13)),
    ];
    for (name, spec) in cases {
        let sample = gen_country(&spec)?;
        let hist = log_histogram(&sample, &bins)?;
        let full = fit_lognormal(&sample)?;
        let (se_mu, se_sigma) = full.standard_errors();
        let left = refit_left_of_mode(&sample, &full, &bins)?;
        let gof = gof_test(&sample, &GofConfig { replicates: 199, seed: 1, ..Default::default() })?;
        let shape = classify_shape(&sample, &full, &left, &gof, &ClassifierConfig::default())?;

        println!("== {name}: n = {}", sample.len());
        if let Some(p) = hist.log_count_parabola() {
            println!("   log-count parabola a = {:.3}, R² = {:.3}", p.a, p.r_squared);
        }
        println!("   histogram mode bin centre 10^{:.3}", hist.mode_center());
        println!("   full fit  mu = {:.4} ± {se_mu:.4}, sigma = {:.4} ± {se_sigma:.4}, mode 10^{:.3}", full.mu, full.sigma, full.mode_log10);
        println!(
            "   left fit  mu = {:.4}, sigma = {:.4} on {} points below 10^{:.3}",
            left.fit.mu, left.fit.sigma, left.subsample.len(), left.cut_log10
        );
        println!(
            "   truncation score {:.4}, right excess {:.4}, left CvM p {:?}",
            shape.left_truncation_score, shape.right_excess_score, shape.left_cvm_pvalue
        );
        println!("   class: {}", shape.class);
    }
    Ok(())
}
