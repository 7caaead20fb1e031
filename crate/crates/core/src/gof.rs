//! Empirical CDF and Kolmogorov–Smirnov / Cramér–von Mises tests of the
//! log-normal hypothesis.
//!
//! Parameters are estimated from the sample under test, so classical
//! critical values do not apply; p-values come from a parametric bootstrap
//! that refits every replicate. The classical fixed-distribution results are
//! reported alongside as "naive".

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distfit::{fit_lognormal, LogNormalFit};
use crate::error::{Error, Result};
use crate::numeric::{fit_parabola, mix_seed, std_normal_cdf, Parabola};

/// Step function with plateaus at k/N.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of values ≤ x.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// `(x_(i), i/N)` for i = 1..=N.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(move |(i, &x)| (x, (i + 1) as f64 / n))
    }
}

/// D = max_i max(i/N − F_i, F_i − (i−1)/N) over ascending CDF values.
pub fn ks_from_sorted_cdf(cdf: &[f64]) -> f64 {
    let n = cdf.len() as f64;
    cdf.iter()
        .enumerate()
        .map(|(i, &f)| {
            let i = i as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max)
}

/// W² = 1/(12N) + Σ ((2i−1)/(2N) − F_i)² over ascending CDF values.
pub fn cvm_from_sorted_cdf(cdf: &[f64]) -> f64 {
    let n = cdf.len() as f64;
    let sum: f64 = cdf
        .iter()
        .enumerate()
        .map(|(i, &f)| ((2.0 * i as f64 + 1.0) / (2.0 * n) - f).powi(2))
        .sum();
    1.0 / (12.0 * n) + sum
}

fn sorted_fitted_cdf(sample: &[f64], fit: &LogNormalFit) -> Result<Vec<f64>> {
    if !(fit.sigma > 0.0) {
        return Err(Error::DegenerateSample);
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut cdf: Vec<f64> = sample.iter().map(|&x| fit.cdf(x)).collect();
    cdf.sort_by(f64::total_cmp);
    Ok(cdf)
}

pub fn ks_statistic(sample: &[f64], fit: &LogNormalFit) -> Result<f64> {
    Ok(ks_from_sorted_cdf(&sorted_fitted_cdf(sample, fit)?))
}

pub fn cvm_statistic(sample: &[f64], fit: &LogNormalFit) -> Result<f64> {
    Ok(cvm_from_sorted_cdf(&sorted_fitted_cdf(sample, fit)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticKind {
    Ks,
    Cvm,
}

/// (1 + #{replicates ≥ observed}) / (B + 1).
pub fn pvalue_from_replicates(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&b| b >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// Statistics of one bootstrap replicate: draw N logs from the fitted
/// normal, refit, evaluate both statistics.
fn replicate_stats(fit: &LogNormalFit, n: usize, seed: u64, b: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, b as u64));
    let normal = Normal::new(fit.mu, fit.sigma).expect("validated sigma");
    let logs: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let mu = logs.iter().sum::<f64>() / n as f64;
    let sigma = (logs.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !(sigma > 0.0) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let mut cdf: Vec<f64> = logs.iter().map(|y| std_normal_cdf((y - mu) / sigma)).collect();
    cdf.sort_by(f64::total_cmp);
    (ks_from_sorted_cdf(&cdf), cvm_from_sorted_cdf(&cdf))
}

fn bootstrap_replicates(fit: &LogNormalFit, n: usize, replicates: usize, seed: u64) -> Vec<(f64, f64)> {
    (0..replicates)
        .into_par_iter()
        .map(|b| replicate_stats(fit, n, seed, b))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapOutcome {
    pub observed: f64,
    pub p_value: f64,
    pub replicates: usize,
    pub seed: u64,
}

pub const MIN_REPLICATES: usize = 100;

/// Parametric-bootstrap p-value of one statistic. Replicate b uses a
/// generator seeded from (seed, b), so the result does not depend on
/// scheduling.
pub fn bootstrap_pvalue(
    sample: &[f64],
    kind: StatisticKind,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapOutcome> {
    if replicates < MIN_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_REPLICATES} bootstrap replicates, got {replicates}"
        )));
    }
    let fit = fit_lognormal(sample)?;
    let observed = match kind {
        StatisticKind::Ks => ks_statistic(sample, &fit)?,
        StatisticKind::Cvm => cvm_statistic(sample, &fit)?,
    };
    let boot: Vec<f64> = bootstrap_replicates(&fit, sample.len(), replicates, seed)
        .into_iter()
        .map(|(ks, cvm)| match kind {
            StatisticKind::Ks => ks,
            StatisticKind::Cvm => cvm,
        })
        .collect();
    Ok(BootstrapOutcome {
        observed,
        p_value: pvalue_from_replicates(observed, &boot),
        replicates,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GofConfig {
    /// Bootstrap replicates B; 0 disables the bootstrap and the decisions
    /// fall back to the naive thresholds.
    pub replicates: usize,
    pub seed: u64,
    pub alpha_ks: f64,
    pub alpha_cvm: f64,
}

impl Default for GofConfig {
    fn default() -> Self {
        GofConfig {
            replicates: 1000,
            seed: 0,
            alpha_ks: 0.05,
            alpha_cvm: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofResult {
    pub n: usize,
    pub ks_stat: f64,
    pub cvm_stat: f64,
    pub ks_pvalue: Option<f64>,
    pub cvm_pvalue: Option<f64>,
    pub alpha_ks: f64,
    pub alpha_cvm: f64,
    pub reject_ks: bool,
    pub reject_cvm: bool,
    /// Asymptotic Kolmogorov p-value ignoring parameter estimation.
    pub naive_ks_pvalue: f64,
    pub naive_reject_ks: bool,
    /// Comparison with the fully-specified CvM critical value at `alpha_cvm`.
    pub naive_reject_cvm: bool,
    pub bootstrap_replicates: usize,
    pub seed: u64,
}

impl GofResult {
    /// Whether the CvM test accepts log-normality at level `alpha`.
    pub fn accepts_cvm_at(&self, alpha: f64) -> bool {
        match self.cvm_pvalue {
            Some(p) => p >= alpha,
            None => self.cvm_stat <= naive_cvm_critical_value(alpha),
        }
    }
}

/// Runs both tests on one sample, sharing the bootstrap draws.
pub fn gof_test(sample: &[f64], cfg: &GofConfig) -> Result<GofResult> {
    if cfg.replicates != 0 && cfg.replicates < MIN_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "need 0 or at least {MIN_REPLICATES} bootstrap replicates, got {}",
            cfg.replicates
        )));
    }
    let fit = fit_lognormal(sample)?;
    let cdf = sorted_fitted_cdf(sample, &fit)?;
    let ks_stat = ks_from_sorted_cdf(&cdf);
    let cvm_stat = cvm_from_sorted_cdf(&cdf);
    let n = sample.len();

    let naive_ks_pvalue = kolmogorov_pvalue(ks_stat, n);
    let naive_reject_ks = naive_ks_pvalue < cfg.alpha_ks;
    let naive_reject_cvm = cvm_stat > naive_cvm_critical_value(cfg.alpha_cvm);

    let (ks_pvalue, cvm_pvalue) = if cfg.replicates > 0 {
        let boot = bootstrap_replicates(&fit, n, cfg.replicates, cfg.seed);
        let ks: Vec<f64> = boot.iter().map(|b| b.0).collect();
        let cvm: Vec<f64> = boot.iter().map(|b| b.1).collect();
        (
            Some(pvalue_from_replicates(ks_stat, &ks)),
            Some(pvalue_from_replicates(cvm_stat, &cvm)),
        )
    } else {
        (None, None)
    };
    let reject_ks = ks_pvalue.map_or(naive_reject_ks, |p| p < cfg.alpha_ks);
    let reject_cvm = cvm_pvalue.map_or(naive_reject_cvm, |p| p < cfg.alpha_cvm);
    Ok(GofResult {
        n,
        ks_stat,
        cvm_stat,
        ks_pvalue,
        cvm_pvalue,
        alpha_ks: cfg.alpha_ks,
        alpha_cvm: cfg.alpha_cvm,
        reject_ks,
        reject_cvm,
        naive_ks_pvalue,
        naive_reject_ks,
        naive_reject_cvm,
        bootstrap_replicates: cfg.replicates,
        seed: cfg.seed,
    })
}

/// Asymptotic Kolmogorov tail probability with Stephens' finite-N
/// correction, valid for a fully specified null.
pub fn kolmogorov_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Upper-tail percentage points of the asymptotic CvM law for a fully
/// specified null, (alpha, critical W²).
const CVM_CRITICAL: [(f64, f64); 8] = [
    (0.25, 0.209),
    (0.15, 0.284),
    (0.10, 0.347),
    (0.05, 0.461),
    (0.025, 0.581),
    (0.01, 0.743),
    (0.005, 0.869),
    (0.001, 1.168),
];

/// Fully-specified CvM critical value, interpolated linearly in ln(alpha)
/// between tabulated points and clamped outside the table.
pub fn naive_cvm_critical_value(alpha: f64) -> f64 {
    let first = CVM_CRITICAL[0];
    let last = CVM_CRITICAL[CVM_CRITICAL.len() - 1];
    if alpha >= first.0 {
        return first.1;
    }
    if alpha <= last.0 {
        return last.1;
    }
    for w in CVM_CRITICAL.windows(2) {
        let (a0, c0) = w[0];
        let (a1, c1) = w[1];
        if alpha <= a0 && alpha >= a1 {
            let t = (alpha.ln() - a0.ln()) / (a1.ln() - a0.ln());
            return c0 + t * (c1 - c0);
        }
    }
    last.1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub fitness_rank: usize,
    pub country: String,
    pub cvm_stat: f64,
    pub ks_pvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofProfile {
    /// Ordered by fitness rank.
    pub rows: Vec<ProfileRow>,
    /// CvM statistic against fitness rank.
    pub cvm_parabola: Parabola,
    /// KS p-value against fitness rank, when p-values exist.
    pub ks_pvalue_parabola: Option<Parabola>,
}

/// Orders per-country results by fitness rank and fits least-squares
/// parabolas of the statistics against rank.
pub fn gof_profile(countries: &[String], results: &[GofResult], ranks: &[usize]) -> Result<GofProfile> {
    if countries.len() != results.len() || ranks.len() != results.len() {
        return Err(Error::InvalidParameter("profile inputs differ in length".into()));
    }
    if results.len() < 3 {
        return Err(Error::SampleTooSmall {
            needed: 3,
            got: results.len(),
        });
    }
    let mut rows: Vec<ProfileRow> = countries
        .iter()
        .zip(results)
        .zip(ranks)
        .map(|((c, r), &rank)| ProfileRow {
            fitness_rank: rank,
            country: c.clone(),
            cvm_stat: r.cvm_stat,
            ks_pvalue: r.ks_pvalue,
        })
        .collect();
    rows.sort_by(|a, b| a.fitness_rank.cmp(&b.fitness_rank).then_with(|| a.country.cmp(&b.country)));
    let xs: Vec<f64> = rows.iter().map(|r| r.fitness_rank as f64).collect();
    let cvm: Vec<f64> = rows.iter().map(|r| r.cvm_stat).collect();
    let cvm_parabola = fit_parabola(&xs, &cvm)
        .ok_or_else(|| Error::InvalidParameter("ranks do not span three distinct values".into()))?;
    let ks_pvalue_parabola = rows
        .iter()
        .map(|r| r.ks_pvalue)
        .collect::<Option<Vec<f64>>>()
        .and_then(|ps| fit_parabola(&xs, &ps));
    Ok(GofProfile {
        rows,
        cvm_parabola,
        ks_pvalue_parabola,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_counts() {
        let e = Ecdf::new(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(e.eval(2.0), 2.0 / 3.0);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(3.0), 1.0);
        assert_eq!(e.eval(10.0), 1.0);
        let ties = Ecdf::new(&[1.0, 1.0, 1.0, 5.0]).unwrap();
        assert_eq!(ties.eval(1.0), 0.75);
        assert!(matches!(Ecdf::new(&[]), Err(Error::EmptySample)));
    }

    #[test]
    fn ks_hand_values() {
        assert_eq!(ks_from_sorted_cdf(&[0.5]), 0.5);
        assert_eq!(ks_from_sorted_cdf(&[0.25, 0.75]), 0.25);
        let n = 7;
        let exact: Vec<f64> = (1..=n).map(|i| (2 * i - 1) as f64 / (2 * n) as f64).collect();
        assert!((ks_from_sorted_cdf(&exact) - 1.0 / (2 * n) as f64).abs() < 1e-15);
    }

    #[test]
    fn cvm_hand_values() {
        assert!((cvm_from_sorted_cdf(&[0.5]) - 1.0 / 12.0).abs() < 1e-15);
        assert!((cvm_from_sorted_cdf(&[0.25, 0.75]) - 1.0 / 24.0).abs() < 1e-15);
        assert!((cvm_from_sorted_cdf(&[0.1, 0.9]) - (1.0 / 24.0 + 0.045)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_fit_is_rejected() {
        let fit = LogNormalFit::from_params(0.0, 0.0, 3, 0.0);
        assert!(ks_statistic(&[1.0, 2.0], &fit).is_err());
        assert!(cvm_statistic(&[1.0, 2.0], &fit).is_err());
    }

    #[test]
    fn pvalue_counting_definition() {
        let boot = vec![1.0; 99];
        assert_eq!(pvalue_from_replicates(0.5, &boot), 1.0);
        assert_eq!(pvalue_from_replicates(2.0, &boot), 0.01);
    }

    #[test]
    fn too_few_replicates() {
        assert!(bootstrap_pvalue(&[1.0, 2.0, 3.0], StatisticKind::Ks, 10, 0).is_err());
    }

    #[test]
    fn naive_critical_values() {
        assert_eq!(naive_cvm_critical_value(0.01), 0.743);
        assert_eq!(naive_cvm_critical_value(0.05), 0.461);
        let mid = naive_cvm_critical_value(0.02);
        assert!(mid > 0.581 && mid < 0.743);
        assert!((kolmogorov_pvalue(1.358 / 100.0, 10_000) - 0.05).abs() < 0.002);
    }

    #[test]
    fn profile_of_exact_parabola_and_constants() {
        let countries: Vec<String> = (0..5).map(|i| format!("C{i:02}")).collect();
        let mk = |cvm: f64| GofResult {
            n: 10,
            ks_stat: 0.1,
            cvm_stat: cvm,
            ks_pvalue: Some(0.5),
            cvm_pvalue: Some(0.5),
            alpha_ks: 0.05,
            alpha_cvm: 0.01,
            reject_ks: false,
            reject_cvm: false,
            naive_ks_pvalue: 0.5,
            naive_reject_ks: false,
            naive_reject_cvm: false,
            bootstrap_replicates: 100,
            seed: 0,
        };
        let ranks = vec![3, 1, 5, 2, 4];
        let results: Vec<GofResult> = ranks
            .iter()
            .map(|&r| {
                let x = r as f64;
                mk(0.5 * x * x - 3.0 * x + 5.0)
            })
            .collect();
        let p = gof_profile(&countries, &results, &ranks).unwrap();
        assert_eq!(p.rows.iter().map(|r| r.fitness_rank).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        for r in &p.rows {
            assert!((p.cvm_parabola.eval(r.fitness_rank as f64) - r.cvm_stat).abs() < 1e-12);
        }
        let flat: Vec<GofResult> = ranks.iter().map(|_| mk(0.2)).collect();
        let p = gof_profile(&countries, &flat, &ranks).unwrap();
        assert!(p.cvm_parabola.a.abs() < 1e-9);
        assert!(gof_profile(&countries[..2], &flat[..2], &ranks[..2]).is_err());
    }
}
