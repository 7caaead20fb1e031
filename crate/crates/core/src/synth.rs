//! Multiplicative capability model for synthetic export samples.
//!
//! Each product volume is the product of `k` i.i.d. log-normal capability
//! factors, so ln(volume) is exactly normal with mean k·m and variance k·s².
//! Two optional modifications shape the law: a left threshold below which
//! draws are discarded (non-export), and a right cap at a quantile of the
//! untouched law, realised either as a Pareto tail grafted with a continuous
//! density or as a hard ceiling.
//!
//! Generators are ChaCha8 streams seeded from the recorded seeds.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distfit::ShapeClass;
use crate::error::{Error, Result};
use crate::ingest::TradeMatrix;
use crate::numeric::{fmt_sig, mix_seed, std_normal_pdf, std_normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapKind {
    #[default]
    ParetoGraft,
    HardCeiling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RightCap {
    pub cap_quantile: f64,
    pub pareto_alpha: f64,
    #[serde(default)]
    pub kind: CapKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCountrySpec {
    /// Three-letter code; generated from the position when absent.
    #[serde(default)]
    pub code: Option<String>,
    pub n_products: usize,
    pub k_capabilities: u32,
    pub capability_log_mean: f64,
    pub capability_log_sd: f64,
    #[serde(default)]
    pub left_threshold: Option<f64>,
    #[serde(default)]
    pub right_cap: Option<RightCap>,
    pub seed: u64,
}

impl SynthCountrySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{}: {what}", self.label())));
        if self.k_capabilities < 1 {
            return bad("k_capabilities must be ≥ 1");
        }
        if !self.capability_log_mean.is_finite()
            || !self.capability_log_sd.is_finite()
            || self.capability_log_sd < 0.0
        {
            return bad("capability parameters must be finite, sd ≥ 0");
        }
        if let Some(t) = self.left_threshold {
            if !(t > 0.0 && t.is_finite()) {
                return bad("left_threshold must be positive");
            }
        }
        if let Some(cap) = &self.right_cap {
            if !(cap.cap_quantile > 0.0 && cap.cap_quantile < 1.0) {
                return bad("cap_quantile must lie in (0, 1)");
            }
            if !(cap.pareto_alpha > 0.0 && cap.pareto_alpha.is_finite()) {
                return bad("pareto_alpha must be positive");
            }
            if self.capability_log_sd == 0.0 {
                return bad("a right cap needs capability_log_sd > 0");
            }
        }
        Ok(())
    }

    fn label(&self) -> String {
        self.code.clone().unwrap_or_else(|| format!("seed {}", self.seed))
    }

    /// Mean and standard deviation of ln(volume) before modifications.
    pub fn log_params(&self) -> (f64, f64) {
        let k = self.k_capabilities as f64;
        (k * self.capability_log_mean, k.sqrt() * self.capability_log_sd)
    }

    /// Quantile of the untouched law.
    pub fn quantile(&self, p: f64) -> f64 {
        let (m, s) = self.log_params();
        (m + s * std_normal_quantile(p)).exp()
    }

    /// Graft point of the right cap, if any.
    pub fn cap_point(&self) -> Option<f64> {
        self.right_cap.map(|c| self.quantile(c.cap_quantile))
    }

    /// Density of the law after the right cap and before the left
    /// threshold. The Pareto graft keeps the body density up to the graft
    /// point and continues it as f(x₀)(x₀/x)^(α+1), renormalised.
    pub fn capped_density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let (m, s) = self.log_params();
        let body = |x: f64| std_normal_pdf((x.ln() - m) / s) / (s * x);
        match self.right_cap {
            None => body(x),
            Some(cap) => {
                let x0 = self.quantile(cap.cap_quantile);
                match cap.kind {
                    CapKind::HardCeiling => {
                        if x <= x0 {
                            body(x) / cap.cap_quantile
                        } else {
                            0.0
                        }
                    }
                    CapKind::ParetoGraft => {
                        let z = graft_normaliser(cap, s);
                        if x <= x0 {
                            body(x) / z
                        } else {
                            body(x0) * (x0 / x).powf(cap.pareto_alpha + 1.0) / z
                        }
                    }
                }
            }
        }
    }
}

/// Total mass of body-up-to-graft plus the continuous Pareto tail:
/// q + f(x₀)·x₀/α, with f(x₀)·x₀ = φ(z_q)/s.
fn graft_normaliser(cap: RightCap, s: f64) -> f64 {
    let zq = std_normal_quantile(cap.cap_quantile);
    cap.cap_quantile + std_normal_pdf(zq) / (s * cap.pareto_alpha)
}

fn draw_log_volume<R: Rng>(rng: &mut R, k: u32, m: f64, s: f64) -> f64 {
    (0..k)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            m + s * z
        })
        .sum()
}

/// One draw per product slot; `None` where the left threshold discards it.
fn draw_slots(spec: &SynthCountrySpec) -> Vec<Option<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (k, m, s) = (
        spec.k_capabilities,
        spec.capability_log_mean,
        spec.capability_log_sd,
    );
    let (_, total_s) = spec.log_params();
    let cap = spec.right_cap.map(|c| (c, spec.quantile(c.cap_quantile).ln()));
    let body_below = |rng: &mut ChaCha8Rng, ln_x0: f64| loop {
        let y = draw_log_volume(rng, k, m, s);
        if y <= ln_x0 {
            break y;
        }
    };
    (0..spec.n_products)
        .map(|_| {
            let y = match cap {
                None => draw_log_volume(&mut rng, k, m, s),
                Some((c, ln_x0)) => match c.kind {
                    CapKind::HardCeiling => body_below(&mut rng, ln_x0),
                    CapKind::ParetoGraft => {
                        let p_body = c.cap_quantile / graft_normaliser(c, total_s);
                        if rng.random::<f64>() < p_body {
                            body_below(&mut rng, ln_x0)
                        } else {
                            let v: f64 = rng.random();
                            ln_x0 - (1.0 - v).ln() / c.pareto_alpha
                        }
                    }
                },
            };
            let x = y.exp();
            match spec.left_threshold {
                Some(t) if x < t => None,
                _ => Some(x),
            }
        })
        .collect()
}

/// Surviving volumes for one country.
pub fn gen_country(spec: &SynthCountrySpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let out: Vec<f64> = draw_slots(spec).into_iter().flatten().collect();
    if out.is_empty() {
        return Err(Error::EmptySyntheticSample(spec.label()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledCountry {
    pub label: ShapeClass,
    #[serde(flatten)]
    pub spec: SynthCountrySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpusSpec {
    #[serde(default = "default_year")]
    pub year: i32,
    pub seed: u64,
    pub countries: Vec<LabelledCountry>,
}

fn default_year() -> i32 {
    2010
}

impl SynthCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.countries.is_empty() {
            return Err(Error::InvalidParameter("corpus has no countries".into()));
        }
        for c in &self.countries {
            if c.label == ShapeClass::Indeterminate {
                return Err(Error::InvalidParameter(
                    "intended labels must be one of the three shape classes".into(),
                ));
            }
            c.spec.validate()?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// `AAA`, `AAB`, … for position `i`.
pub fn country_code(i: usize) -> String {
    let mut code = [b'A'; 3];
    let mut v = i;
    for slot in code.iter_mut().rev() {
        *slot = b'A' + (v % 26) as u8;
        v /= 26;
    }
    String::from_utf8(code.to_vec()).expect("ascii")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub matrix: TradeMatrix,
    /// Intended class per country, in matrix row order.
    pub labels: Vec<(String, ShapeClass)>,
    pub spec: SynthCorpusSpec,
}

/// Builds the corpus matrix. Country i fills product slots 0..n_products
/// of a common product list, so richer countries cover a superset of
/// slots; discarded draws leave zeros and products nobody exports are
/// dropped. The corpus seed shuffles which 4-digit code each slot gets.
pub fn gen_corpus(spec: &SynthCorpusSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let n_slots = spec
        .countries
        .iter()
        .map(|c| c.spec.n_products)
        .max()
        .unwrap_or(0);
    let mut codes: Vec<String> = (0..n_slots).map(|i| format!("{:04}", 1000 + i)).collect();
    codes.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0x5107)));

    let mut rows: Vec<(String, ShapeClass, Vec<Option<f64>>)> = Vec::new();
    for (i, c) in spec.countries.iter().enumerate() {
        let code = c.spec.code.clone().unwrap_or_else(|| country_code(i));
        let slots = draw_slots(&c.spec);
        if slots.iter().all(Option::is_none) {
            return Err(Error::EmptySyntheticSample(code));
        }
        rows.push((code, c.label, slots));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::InvalidParameter(format!("duplicate country code {}", w[0].0)));
        }
    }

    // Keep slots somebody exports, ordered by code.
    let mut used: Vec<usize> = (0..n_slots)
        .filter(|&j| rows.iter().any(|r| r.2.get(j).copied().flatten().is_some()))
        .collect();
    used.sort_by(|&a, &b| codes[a].cmp(&codes[b]));
    let products: Vec<String> = used.iter().map(|&j| codes[j].clone()).collect();
    let mut volumes = Vec::with_capacity(rows.len() * used.len());
    for r in &rows {
        for &j in &used {
            volumes.push(r.2.get(j).copied().flatten().unwrap_or(0.0));
        }
    }
    let countries: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
    let labels = rows.iter().map(|r| (r.0.clone(), r.1)).collect();
    Ok(SynthCorpus {
        matrix: TradeMatrix::new(spec.year, countries, products, volumes)?,
        labels,
        spec: spec.clone(),
    })
}

/// Writes nonzero cells in the trade-file layout read by
/// [`crate::ingest::parse_records`].
pub fn write_trade_file<W: Write>(matrix: &TradeMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["year", "country", "product", "volume"])?;
    for (c, code) in matrix.countries().iter().enumerate() {
        for (p, product) in matrix.products().iter().enumerate() {
            let v = matrix.get(c, p);
            if v > 0.0 {
                w.write_record([&matrix.year().to_string(), code, product, &v.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<trade file>", e))?;
    Ok(())
}

/// Labels file: intended class and generator parameters per country.
pub fn write_labels_file<W: Write>(corpus: &SynthCorpus, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "country",
        "intended_class",
        "n_products",
        "k_capabilities",
        "capability_log_mean",
        "capability_log_sd",
        "left_threshold",
        "cap_quantile",
        "pareto_alpha",
        "cap_kind",
        "seed",
        "corpus_seed",
    ])?;
    let by_code = |code: &str| {
        corpus
            .spec
            .countries
            .iter()
            .enumerate()
            .find(|(i, c)| c.spec.code.clone().unwrap_or_else(|| country_code(*i)) == code)
            .map(|(_, c)| c)
    };
    for (code, class) in &corpus.labels {
        let c = by_code(code).expect("label comes from spec");
        let s = &c.spec;
        let cap = s.right_cap;
        w.write_record([
            code.clone(),
            class.to_string(),
            s.n_products.to_string(),
            s.k_capabilities.to_string(),
            fmt_sig(s.capability_log_mean),
            fmt_sig(s.capability_log_sd),
            s.left_threshold.map(fmt_sig).unwrap_or_default(),
            cap.map(|c| fmt_sig(c.cap_quantile)).unwrap_or_default(),
            cap.map(|c| fmt_sig(c.pareto_alpha)).unwrap_or_default(),
            cap.map(|c| match c.kind {
                CapKind::ParetoGraft => "pareto_graft".to_string(),
                CapKind::HardCeiling => "hard_ceiling".to_string(),
            })
            .unwrap_or_default(),
            s.seed.to_string(),
            corpus.spec.seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<labels file>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(seed: u64) -> SynthCountrySpec {
        SynthCountrySpec {
            code: None,
            n_products: 500,
            k_capabilities: 4,
            capability_log_mean: 1.0,
            capability_log_sd: 0.5,
            left_threshold: None,
            right_cap: None,
            seed,
        }
    }

    #[test]
    fn degenerate_factor_gives_constant_volumes() {
        let spec = SynthCountrySpec {
            k_capabilities: 1,
            capability_log_sd: 0.0,
            capability_log_mean: 2.5,
            ..base(1)
        };
        let v = gen_country(&spec).unwrap();
        assert_eq!(v.len(), 500);
        assert!(v.iter().all(|&x| x == 2.5_f64.exp()));
    }

    #[test]
    fn seed_determinism() {
        assert_eq!(gen_country(&base(7)).unwrap(), gen_country(&base(7)).unwrap());
        assert_ne!(gen_country(&base(7)).unwrap(), gen_country(&base(8)).unwrap());
    }

    #[test]
    fn threshold_that_discards_everything_is_an_error() {
        let spec = SynthCountrySpec {
            code: Some("GHA".into()),
            left_threshold: Some(1e30),
            ..base(1)
        };
        match gen_country(&spec) {
            Err(Error::EmptySyntheticSample(c)) => assert_eq!(c, "GHA"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn raising_threshold_never_grows_sample() {
        let mut last = usize::MAX;
        for t in [0.1, 10.0, 30.0, 60.0, 100.0, 300.0] {
            let n = gen_country(&SynthCountrySpec {
                left_threshold: Some(t),
                ..base(3)
            })
            .map(|v| v.len())
            .unwrap_or(0);
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn graft_density_is_continuous() {
        for (q, alpha) in [(0.7, 0.5), (0.9, 2.0), (0.5, 0.1)] {
            let spec = SynthCountrySpec {
                right_cap: Some(RightCap {
                    cap_quantile: q,
                    pareto_alpha: alpha,
                    kind: CapKind::ParetoGraft,
                }),
                ..base(1)
            };
            let x0 = spec.cap_point().unwrap();
            let left = spec.capped_density(x0);
            let right = spec.capped_density(x0 * (1.0 + 1e-12));
            assert!((left - right).abs() <= 1e-9 * left, "{left} vs {right}");
        }
    }

    #[test]
    fn hard_ceiling_caps_volumes() {
        let spec = SynthCountrySpec {
            right_cap: Some(RightCap {
                cap_quantile: 0.8,
                pareto_alpha: 1.0,
                kind: CapKind::HardCeiling,
            }),
            ..base(5)
        };
        let x0 = spec.cap_point().unwrap();
        let v = gen_country(&spec).unwrap();
        assert_eq!(v.len(), 500);
        assert!(v.iter().all(|&x| x <= x0 * (1.0 + 1e-12)));
    }

    #[test]
    fn invalid_specs() {
        let bad_cap = SynthCountrySpec {
            right_cap: Some(RightCap {
                cap_quantile: 1.0,
                pareto_alpha: 1.0,
                kind: CapKind::ParetoGraft,
            }),
            ..base(1)
        };
        assert!(gen_country(&bad_cap).is_err());
        assert!(gen_country(&SynthCountrySpec { k_capabilities: 0, ..base(1) }).is_err());
    }

    #[test]
    fn country_codes() {
        assert_eq!(country_code(0), "AAA");
        assert_eq!(country_code(1), "AAB");
        assert_eq!(country_code(26), "ABA");
    }

    #[test]
    fn single_country_corpus_equals_sample() {
        let spec = SynthCorpusSpec {
            year: 2010,
            seed: 4,
            countries: vec![LabelledCountry {
                label: ShapeClass::FullLogNormal,
                spec: SynthCountrySpec {
                    n_products: 50,
                    ..base(9)
                },
            }],
        };
        let corpus = gen_corpus(&spec).unwrap();
        let m = &corpus.matrix;
        assert_eq!(m.n_countries(), 1);
        let mut row = m.row(0).to_vec();
        let mut sample = gen_country(&spec.countries[0].spec).unwrap();
        row.sort_by(f64::total_cmp);
        sample.sort_by(f64::total_cmp);
        assert_eq!(row, sample);
        assert_eq!(corpus.labels, vec![("AAA".to_string(), ShapeClass::FullLogNormal)]);
    }

    #[test]
    fn corpus_spec_toml_round_trip() {
        let spec = SynthCorpusSpec {
            year: 2010,
            seed: 4,
            countries: vec![LabelledCountry {
                label: ShapeClass::ParetoLogNormal,
                spec: SynthCountrySpec {
                    code: Some("CHN".into()),
                    right_cap: Some(RightCap {
                        cap_quantile: 0.7,
                        pareto_alpha: 0.5,
                        kind: CapKind::ParetoGraft,
                    }),
                    ..base(9)
                },
            }],
        };
        let text = spec.to_toml().unwrap();
        assert_eq!(SynthCorpusSpec::from_toml(&text).unwrap(), spec);
    }
}
