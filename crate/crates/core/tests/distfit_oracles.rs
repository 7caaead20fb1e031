use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use tradeshape::distfit::{
    classify_shape, fit_lognormal, refit_left_of_mode, BinRule, ClassifierConfig, ShapeClass,
};
use tradeshape::gof::{gof_test, GofConfig};
use tradeshape::synth::{gen_country, CapKind, RightCap, SynthCountrySpec};

fn lognormal(mu: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let d = LogNormal::new(mu, sigma).unwrap();
    d.sample_iter(ChaCha8Rng::seed_from_u64(seed)).take(n).collect()
}

fn classify(sample: &[f64], seed: u64) -> tradeshape::distfit::ShapeClassification {
    let full = fit_lognormal(sample).unwrap();
    let left = refit_left_of_mode(sample, &full, &BinRule::default()).unwrap();
    let gof = gof_test(sample, &GofConfig { replicates: 199, seed, ..Default::default() }).unwrap();
    let cfg = ClassifierConfig { seed, ..Default::default() };
    classify_shape(sample, &full, &left, &gof, &cfg).unwrap()
}

fn spec(n: usize, k: u32, m: f64, s: f64, seed: u64) -> SynthCountrySpec {
    SynthCountrySpec {
        code: None,
        n_products: n,
        k_capabilities: k,
        capability_log_mean: m,
        capability_log_sd: s,
        left_threshold: None,
        right_cap: None,
        seed,
    }
}

#[test]
fn mle_recovers_known_parameters() {
    let fit = fit_lognormal(&lognormal(5.0, 1.0, 10_000, 8)).unwrap();
    assert!((fit.mu - 5.0).abs() < 0.03, "{fit:?}");
    assert!((fit.sigma - 1.0).abs() < 0.022, "{fit:?}");
}

#[test]
fn left_fit_of_a_pure_lognormal_agrees_with_the_full_fit() {
    let s = lognormal(9.0, 2.0, 10_000, 21);
    let full = fit_lognormal(&s).unwrap();
    let left = refit_left_of_mode(&s, &full, &BinRule::default()).unwrap();
    let (se_mu, se_sigma) = left.standard_errors();
    assert!((left.fit.mu - full.mu).abs() < 2.0 * se_mu, "{:?} vs {full:?}", left.fit);
    assert!((left.fit.sigma - full.sigma).abs() < 2.0 * se_sigma);
    let kept = left.subsample.len() as f64 / s.len() as f64;
    assert!((0.35..0.65).contains(&kept), "kept {kept}");
}

#[test]
fn left_fit_standard_errors_are_calibrated() {
    // Coverage of the 2-SE interval around the true mean over independent
    // samples should sit near the nominal 95%.
    let mut covered = 0;
    let trials = 100;
    for seed in 0..trials {
        let s = lognormal(4.0, 1.0, 2000, 1000 + seed);
        let full = fit_lognormal(&s).unwrap();
        let left = refit_left_of_mode(&s, &full, &BinRule::default()).unwrap();
        let (se_mu, _) = left.standard_errors();
        covered += usize::from((left.fit.mu - 4.0).abs() < 2.0 * se_mu);
    }
    assert!((88..=100).contains(&covered), "2-SE coverage {covered}/{trials}");
}

#[test]
fn heavy_right_tail_shows_up_as_a_bump() {
    let mut sp = spec(3000, 8, 1.7, 0.55, 5);
    sp.right_cap = Some(RightCap { cap_quantile: 0.65, pareto_alpha: 0.5, kind: CapKind::ParetoGraft });
    let s = gen_country(&sp).unwrap();
    let full = fit_lognormal(&s).unwrap();
    let left = refit_left_of_mode(&s, &full, &BinRule::default()).unwrap();
    assert!(left.fit.sigma < full.sigma);
    assert!(classify(&s, 5).right_excess_score > 0.0);
}

#[test]
fn truncated_generator_is_classified_truncated() {
    let mut sp = spec(3000, 3, 1.2, 0.8, 6);
    sp.left_threshold = Some(sp.quantile(0.2));
    let c = classify(&gen_country(&sp).unwrap(), 6);
    assert!(c.mode_log10 < 3.0);
    assert_eq!(c.class, ShapeClass::TruncatedLogNormal, "{c:?}");
}

#[test]
fn pareto_graft_above_the_ninetieth_percentile_is_classified_pareto() {
    let mut sp = spec(3000, 8, 1.7, 0.55, 7);
    sp.right_cap = Some(RightCap { cap_quantile: 0.9, pareto_alpha: 0.5, kind: CapKind::ParetoGraft });
    let c = classify(&gen_country(&sp).unwrap(), 7);
    assert_eq!(c.class, ShapeClass::ParetoLogNormal, "{c:?}");
}

#[test]
fn pure_lognormal_of_800_is_full_in_95_percent_of_seeds() {
    let trials = 100;
    let full = (0..trials)
        .filter(|&seed| {
            let s = gen_country(&spec(800, 6, 11.0 / 6.0, 1.3 / 6f64.sqrt(), 500 + seed)).unwrap();
            classify(&s, seed).class == ShapeClass::FullLogNormal
        })
        .count();
    assert!(full * 100 >= 95 * trials as usize, "full log-normal in {full}/{trials} seeds");
}
