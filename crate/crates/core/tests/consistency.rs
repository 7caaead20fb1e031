mod common;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tradeshape::distfit::{classify_shape, fit_lognormal, refit_left_of_mode, BinRule, ClassifierConfig};
use tradeshape::gof::{gof_test, kolmogorov_pvalue, ks_from_sorted_cdf, Ecdf, GofConfig};
use tradeshape::ingest::{aggregate_to_4digit, parse_records, RecordFormat, TradeMatrix};
use tradeshape::numeric::std_normal_cdf;
use tradeshape::pipeline::{analyze, RunConfig};
use tradeshape::presets;
use tradeshape::ranking::ranking_curve;
use tradeshape::synth::{gen_corpus, gen_country, write_trade_file};

#[test]
fn ranking_curve_is_the_reflected_ecdf() {
    let s = gen_country(&presets::full_country(3)).unwrap();
    let curve = ranking_curve(&s, "AAA").unwrap();
    let e = Ecdf::new(&s).unwrap();
    for (v, h) in curve.ecdf_points() {
        assert_eq!(e.eval(v), h);
    }
    // rank r on the curve is the value with N − r + 1 points at or below it
    let n = s.len();
    for (r, v) in curve.volumes.iter().enumerate().step_by(97) {
        assert_eq!(e.eval(*v), (n - r) as f64 / n as f64);
    }
}

#[test]
fn decade_rescaling_leaves_diagnostics_and_statistics_unchanged() {
    for preset in [presets::truncated_country(4), presets::pareto_country(4)] {
        let s = gen_country(&preset).unwrap();
        let run = |sample: &[f64]| {
            let full = fit_lognormal(sample).unwrap();
            let left = refit_left_of_mode(sample, &full, &BinRule::default()).unwrap();
            let gof = gof_test(sample, &GofConfig { replicates: 0, ..Default::default() }).unwrap();
            let c = classify_shape(sample, &full, &left, &gof, &ClassifierConfig::default()).unwrap();
            (full, c, gof)
        };
        let (f0, c0, g0) = run(&s);
        for j in [-3i32, 2, 5] {
            let k = 10f64.powi(j);
            let scaled: Vec<f64> = s.iter().map(|x| x * k).collect();
            let (f1, c1, g1) = run(&scaled);
            assert!((f1.mu - f0.mu - k.ln()).abs() < 1e-10);
            assert!((f1.sigma - f0.sigma).abs() < 1e-10);
            assert!((f1.mode_log10 - f0.mode_log10 - j as f64).abs() < 1e-10);
            assert!((c1.left_truncation_score - c0.left_truncation_score).abs() < 1e-10);
            assert!((c1.right_excess_score - c0.right_excess_score).abs() < 1e-10);
            assert!((g1.ks_stat - g0.ks_stat).abs() < 1e-10);
            assert!((g1.cvm_stat - g0.cvm_stat).abs() < 1e-10);
        }
    }
}

#[test]
fn synthetic_log_volumes_are_exactly_normal() {
    let mut passes = 0;
    for seed in 0..200u64 {
        let spec = tradeshape::synth::SynthCountrySpec {
            code: None,
            n_products: 10_000,
            k_capabilities: 4,
            capability_log_mean: 1.5,
            capability_log_sd: 0.6,
            left_threshold: None,
            right_cap: None,
            seed,
        };
        let (m, sd) = spec.log_params();
        let mut u: Vec<f64> = gen_country(&spec)
            .unwrap()
            .iter()
            .map(|x| std_normal_cdf((x.ln() - m) / sd))
            .collect();
        u.sort_by(f64::total_cmp);
        passes += usize::from(kolmogorov_pvalue(ks_from_sorted_cdf(&u), u.len()) >= 0.01);
    }
    assert!(passes >= 194, "closure KS passed in {passes}/200 seeds");
}

#[test]
fn trade_file_round_trip_is_exact_and_order_free() {
    let corpus = gen_corpus(&presets::capability_ladder(6, 2)).unwrap();
    let mut buf = Vec::new();
    write_trade_file(&corpus.matrix, &mut buf).unwrap();
    let parsed = parse_records(&buf[..], &RecordFormat::default()).unwrap();
    assert!(parsed.rejects.is_empty());
    let back = aggregate_to_4digit(&parsed.records).unwrap();
    assert!(back.rejected.is_empty());
    assert_eq!(back.matrix, corpus.matrix);

    let mut shuffled = parsed.records.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(aggregate_to_4digit(&shuffled).unwrap().matrix, corpus.matrix);

    let mut wide = Vec::new();
    corpus.matrix.write_csv(&mut wide).unwrap();
    assert_eq!(TradeMatrix::read_csv(&wide[..]).unwrap(), corpus.matrix);
}

#[test]
fn single_country_analysis_has_no_pairs_or_profile() {
    let corpus = gen_corpus(&presets::capability_ladder(1, 9)).unwrap();
    let cfg = RunConfig { jobs: Some(1), gof: tradeshape::pipeline::GofSettings { replicates: 0, ..Default::default() }, ..Default::default() };
    let a = analyze(&corpus.matrix, None, &cfg).unwrap();
    assert_eq!(a.countries.len(), 1);
    assert!(a.dominance.pairs.is_empty());
    assert_eq!(a.dominance.zero_crossing_share, None);
    assert!(a.profile.is_none());
    assert_eq!(a.colorings[0].entries.len(), 1);
}

#[test]
fn analysis_does_not_depend_on_worker_count() {
    let corpus = gen_corpus(&presets::capability_ladder(8, 4)).unwrap();
    let mk = |jobs| RunConfig { jobs: Some(jobs), seed: 5, gof: tradeshape::pipeline::GofSettings { replicates: 120, ..Default::default() }, ..Default::default() };
    let a = analyze(&corpus.matrix, None, &mk(1)).unwrap();
    let b = analyze(&corpus.matrix, None, &mk(3)).unwrap();
    for (x, y) in a.countries.iter().zip(&b.countries) {
        assert_eq!(x.country, y.country);
        assert_eq!(x.gof, y.gof);
        assert_eq!(x.shape, y.shape);
    }
    assert_eq!(a.dominance.pairs, b.dominance.pairs);
}
