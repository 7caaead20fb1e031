//! Ready-made synthetic corpora.
//!
//! Sample sizes in the three-class corpus are larger than typical observed
//! country samples on purpose: the left-of-mode refit sees only about half
//! of the sample, and below a few thousand points its sampling noise alone
//! pushes the right-excess score of a clean log-normal past 0.05 too often.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distfit::ShapeClass;
use crate::error::Result;
use crate::ingest::TradeMatrix;
use crate::numeric::mix_seed;
use crate::rca::BinaryExportMatrix;
use crate::synth::{
    country_code, CapKind, LabelledCountry, RightCap, SynthCorpusSpec, SynthCountrySpec,
};

/// Products drawn per truncated-class country before a fifth is discarded.
pub const TRUNCATED_DRAWS: usize = 3000;
pub const FULL_DRAWS: usize = 6000;
pub const PARETO_DRAWS: usize = 3000;
/// Fraction of the untouched law removed by the left threshold.
pub const TRUNCATED_LEFT_MASS: f64 = 0.2;

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

/// Low-capability law with mode near 10^1.3 and the bottom fifth removed.
pub fn truncated_country(seed: u64) -> SynthCountrySpec {
    let mut s = spec(TRUNCATED_DRAWS, 3, 1.2, 0.8, seed);
    s.left_threshold = Some(s.quantile(TRUNCATED_LEFT_MASS));
    s
}

/// Plain log-normal with ln-mean 11 and ln-sd 1.3.
pub fn full_country(seed: u64) -> SynthCountrySpec {
    spec(FULL_DRAWS, 6, 11.0 / 6.0, 1.3 / 6f64.sqrt(), seed)
}

/// Log-normal body with a Pareto(α = 0.5) tail grafted at its 65th percentile.
pub fn pareto_country(seed: u64) -> SynthCountrySpec {
    let mut s = spec(PARETO_DRAWS, 8, 1.7, 0.55, seed);
    s.right_cap = Some(RightCap {
        cap_quantile: 0.65,
        pareto_alpha: 0.5,
        kind: CapKind::ParetoGraft,
    });
    s
}

/// Ten countries per class. Codes run in class order (truncated, full,
/// Pareto), so alphabetical order equals intended order.
pub fn three_class_corpus(seed: u64) -> SynthCorpusSpec {
    let makers: [(ShapeClass, fn(u64) -> SynthCountrySpec); 3] = [
        (ShapeClass::TruncatedLogNormal, truncated_country),
        (ShapeClass::FullLogNormal, full_country),
        (ShapeClass::ParetoLogNormal, pareto_country),
    ];
    let mut countries = Vec::with_capacity(30);
    for (label, make) in makers {
        for _ in 0..10 {
            let i = countries.len();
            let mut spec = make(mix_seed(seed, i as u64));
            spec.code = Some(country_code(i));
            countries.push(LabelledCountry { label, spec });
        }
    }
    SynthCorpusSpec {
        year: 2010,
        seed,
        countries,
    }
}

/// Strictly nested incidence: the i-th country exports products 0..=i.
/// Fitness on it ranks countries in the given order, last one highest.
pub fn nested_incidence(countries: &[String]) -> Result<BinaryExportMatrix> {
    let n = countries.len();
    let rows: Vec<Vec<u8>> = (0..n)
        .map(|i| (0..n).map(|j| u8::from(j <= i)).collect())
        .collect();
    let products = (0..n).map(|j| format!("{:04}", 1000 + j)).collect();
    BinaryExportMatrix::from_rows(countries.to_vec(), products, &rows)
}

/// `n` countries whose capability count and diversification both grow
/// with position: k = i + 1, n_products = 100 + 50·i.
pub fn capability_ladder(n: usize, seed: u64) -> SynthCorpusSpec {
    let countries = (0..n)
        .map(|i| {
            let mut s = spec(100 + 50 * i, i as u32 + 1, 1.0, 0.35, mix_seed(seed, i as u64));
            s.code = Some(country_code(i));
            LabelledCountry {
                label: ShapeClass::FullLogNormal,
                spec: s,
            }
        })
        .collect();
    SynthCorpusSpec {
        year: 2010,
        seed,
        countries,
    }
}

/// Null model for the hierarchy: every nonzero volume of the matrix is
/// pooled and dealt back at random to the nonzero cells, so each country
/// keeps its diversification but loses its own scale.
pub fn shuffled_volumes(matrix: &TradeMatrix, seed: u64) -> Result<TradeMatrix> {
    let mut pool: Vec<f64> = matrix.volumes().iter().copied().filter(|&v| v > 0.0).collect();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x7a11)));
    let mut it = pool.into_iter();
    let volumes = matrix
        .volumes()
        .iter()
        .map(|&v| if v > 0.0 { it.next().expect("same count") } else { 0.0 })
        .collect();
    TradeMatrix::new(
        matrix.year(),
        matrix.countries().to_vec(),
        matrix.products().to_vec(),
        volumes,
    )
}

/// 148 countries whose diversification spans the observed 100..1131
/// range, a third of each shape class, interleaved by position. The
/// widest country is untruncated so every product slot is exported.
pub fn paper_scale_corpus(seed: u64) -> SynthCorpusSpec {
    const N: usize = 148;
    let countries = (0..N)
        .map(|i| {
            let n_products = 100 + (1031 * i) / (N - 1);
            let k = 2 + (8 * i / (N - 1)) as u32;
            let cseed = mix_seed(seed, i as u64);
            let (label, mut s) = match (i + 1) % 3 {
                0 => {
                    let mut s = spec(n_products, k, 1.2, 0.8, cseed);
                    s.left_threshold = Some(s.quantile(TRUNCATED_LEFT_MASS));
                    (ShapeClass::TruncatedLogNormal, s)
                }
                1 => (ShapeClass::FullLogNormal, spec(n_products, k, 1.6, 0.6, cseed)),
                _ => {
                    let mut s = spec(n_products, k, 1.7, 0.55, cseed);
                    s.right_cap = Some(RightCap {
                        cap_quantile: 0.65,
                        pareto_alpha: 0.5,
                        kind: CapKind::ParetoGraft,
                    });
                    (ShapeClass::ParetoLogNormal, s)
                }
            };
            s.code = Some(country_code(i));
            LabelledCountry { label, spec: s }
        })
        .collect();
    SynthCorpusSpec {
        year: 2010,
        seed,
        countries,
    }
}
