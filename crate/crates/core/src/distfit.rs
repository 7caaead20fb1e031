//! Log-space histograms, log-normal maximum likelihood fits, the
//! left-of-mode refit and the three-way shape classification.
//!
//! Natural logs are used internally; base-10 values appear only in
//! histogram coordinates and `mode_log10`.

use std::f64::consts::LN_10;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::{self, GofResult};
use crate::numeric::{
    fit_parabola, ln_std_normal_cdf, mix_seed, nelder_mead2, std_normal_cdf, std_normal_quantile,
    Parabola,
};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Fixed-width binning in decades of log10(volume).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinRule {
    pub width_decades: f64,
}

impl Default for BinRule {
    fn default() -> Self {
        BinRule { width_decades: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Increasing edges in log10 space.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub normalized: bool,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Empirical probability density per decade.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total() as f64;
        self.counts
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
            .collect()
    }

    /// Midpoint of the highest-count bin; ties go to the lower bin.
    pub fn mode_center(&self) -> f64 {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        0.5 * (self.bin_edges[best] + self.bin_edges[best + 1])
    }

    /// Least-squares parabola of log10(count) against bin centre over the
    /// occupied bins. A log-normal sample gives a parabola.
    pub fn log_count_parabola(&self) -> Option<Parabola> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .centers()
            .into_iter()
            .zip(&self.counts)
            .filter(|(_, &c)| c > 0)
            .map(|(x, &c)| (x, (c as f64).log10()))
            .unzip();
        fit_parabola(&xs, &ys)
    }
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(&v) = sample.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveValue(v));
    }
    Ok(())
}

/// Histogram of log10(volume). Bins start at floor(min) and run in steps of
/// `bins.width_decades` up to the first whole decade above the maximum; the
/// last bin is closed.
pub fn log_histogram(sample: &[f64], bins: &BinRule) -> Result<Histogram> {
    check_sample(sample)?;
    let w = bins.width_decades;
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidParameter(format!("bin width {w}")));
    }
    let logs: Vec<f64> = sample.iter().map(|x| x.log10()).collect();
    let min = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = min.floor();
    let hi = max.floor() + 1.0;
    let n_bins = (((hi - lo) / w) - 1e-9).ceil().max(1.0) as usize;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * w).collect();
    let mut counts = vec![0u64; n_bins];
    for &l in &logs {
        let i = (((l - lo) / w).floor() as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram {
        bin_edges,
        counts,
        normalized: false,
    })
}

/// Log-normal law of E fitted to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogNormalFit {
    /// Mean of ln(E).
    pub mu: f64,
    /// Standard deviation of ln(E).
    pub sigma: f64,
    pub n: usize,
    pub log_likelihood: f64,
    /// log10 of the mode of the density of E, (mu − sigma²)/ln 10.
    pub mode_log10: f64,
}

impl LogNormalFit {
    pub fn from_params(mu: f64, sigma: f64, n: usize, log_likelihood: f64) -> Self {
        LogNormalFit {
            mu,
            sigma,
            n,
            log_likelihood,
            mode_log10: (mu - sigma * sigma) / LN_10,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        std_normal_cdf((x.ln() - self.mu) / self.sigma)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        (self.mu + self.sigma * std_normal_quantile(p)).exp()
    }

    /// Standard errors of (mu, sigma) for an untruncated MLE.
    pub fn standard_errors(&self) -> (f64, f64) {
        let n = self.n as f64;
        (self.sigma / n.sqrt(), self.sigma / (2.0 * n).sqrt())
    }
}

/// Log-likelihood of a sample under a log-normal law.
pub fn lognormal_log_likelihood(sample: &[f64], mu: f64, sigma: f64) -> f64 {
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    sample
        .iter()
        .map(|&x| {
            let y = x.ln();
            -y - sigma.ln() - HALF_LN_2PI - (y - mu).powi(2) * inv2s2
        })
        .sum()
}

/// Closed-form MLE: mean and population standard deviation of ln(sample).
pub fn fit_lognormal(sample: &[f64]) -> Result<LogNormalFit> {
    check_sample(sample)?;
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let logs: Vec<f64> = sample.iter().map(|x| x.ln()).collect();
    let mu = logs.iter().sum::<f64>() / n as f64;
    let var = logs.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / n as f64;
    let sigma = var.sqrt();
    if sigma == 0.0 || logs.iter().all(|&y| y == logs[0]) {
        return Err(Error::DegenerateSample);
    }
    let ll = lognormal_log_likelihood(sample, mu, sigma);
    Ok(LogNormalFit::from_params(mu, sigma, n, ll))
}

/// Fit of the left wing only: a log-normal right-truncated at `cut_log10`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftOfModeFit {
    pub fit: LogNormalFit,
    /// Truncation point, log10 of the empirical histogram mode.
    pub cut_log10: f64,
    /// The subsample at or below the cut.
    pub subsample: Vec<f64>,
}

impl LeftOfModeFit {
    /// CDF of the right-truncated law (conditional on E ≤ cut).
    pub fn truncated_cdf(&self, x: f64) -> f64 {
        truncated_cdf(self.fit.mu, self.fit.sigma, self.cut_log10 * LN_10, x)
    }

    /// Standard errors of (mu, sigma) from the observed information of the
    /// truncated likelihood. Truncation near the mode makes them several
    /// times larger than [`LogNormalFit::standard_errors`] on the same
    /// subsample suggests. NaN when the curvature is not positive definite.
    pub fn standard_errors(&self) -> (f64, f64) {
        let cut_ln = self.cut_log10 * LN_10;
        let logs: Vec<f64> = self.subsample.iter().map(|x| x.ln()).collect();
        let nll = |mu: f64, sigma: f64| truncated_neg_ll(&logs, cut_ln, mu, sigma);
        let (m, s) = (self.fit.mu, self.fit.sigma);
        let h = 1e-3 * s;
        let f0 = nll(m, s);
        let h_mm = (nll(m + h, s) - 2.0 * f0 + nll(m - h, s)) / (h * h);
        let h_ss = (nll(m, s + h) - 2.0 * f0 + nll(m, s - h)) / (h * h);
        let h_ms = (nll(m + h, s + h) - nll(m + h, s - h) - nll(m - h, s + h) + nll(m - h, s - h))
            / (4.0 * h * h);
        let det = h_mm * h_ss - h_ms * h_ms;
        if !(det > 0.0 && h_mm > 0.0) {
            return (f64::NAN, f64::NAN);
        }
        ((h_ss / det).sqrt(), (h_mm / det).sqrt())
    }
}

fn truncated_cdf(mu: f64, sigma: f64, cut_ln: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = x.ln();
    if y >= cut_ln {
        return 1.0;
    }
    let zt = (cut_ln - mu) / sigma;
    ((ln_std_normal_cdf((y - mu) / sigma) - ln_std_normal_cdf(zt)).exp()).min(1.0)
}

pub const MIN_LEFT_POINTS: usize = 10;

/// Negative log-likelihood of a normal law right-truncated at `cut_ln`,
/// up to the constant n·ln√(2π).
fn truncated_neg_ll(logs: &[f64], cut_ln: f64, mu: f64, sigma: f64) -> f64 {
    let n = logs.len() as f64;
    let ss: f64 = logs.iter().map(|y| (y - mu).powi(2)).sum();
    n * sigma.ln() + ss / (2.0 * sigma * sigma) + n * ln_std_normal_cdf((cut_ln - mu) / sigma)
}

/// MLE of a normal law on `logs`, right-truncated at `cut_ln`, starting the
/// search from `(mu0, sigma0)`. Returns (mu, sigma, log-likelihood in log
/// space, i.e. without the Jacobian term).
fn fit_truncated_normal(logs: &[f64], cut_ln: f64, mu0: f64, sigma0: f64) -> (f64, f64, f64) {
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let neg_ll = |[mu, ln_sigma]: [f64; 2]| truncated_neg_ll(logs, cut_ln, mu, ln_sigma.exp());
    let start = if mu0.is_finite() && sigma0 > 0.0 {
        [mu0, sigma0.ln()]
    } else {
        [mean, 0.0]
    };
    let (best, val) = nelder_mead2(neg_ll, start, [0.2 * start[1].exp(), 0.2], 4000);
    // Polish from the result; a restart guards against early simplex collapse.
    let (best, val) = {
        let (b2, v2) = nelder_mead2(neg_ll, best, [0.05 * best[1].exp(), 0.05], 4000);
        if v2 <= val {
            (b2, v2)
        } else {
            (best, val)
        }
    };
    (best[0], best[1].exp(), -val - n * HALF_LN_2PI)
}

/// Refits the left wing: keeps points with log10 x ≤ the empirical mode
/// (midpoint of the highest histogram bin) and fits a log-normal with a
/// right-truncated likelihood.
pub fn refit_left_of_mode(
    sample: &[f64],
    full_fit: &LogNormalFit,
    bins: &BinRule,
) -> Result<LeftOfModeFit> {
    let hist = log_histogram(sample, bins)?;
    let cut_log10 = hist.mode_center();
    let subsample: Vec<f64> = sample
        .iter()
        .copied()
        .filter(|x| x.log10() <= cut_log10)
        .collect();
    if subsample.len() < MIN_LEFT_POINTS {
        return Err(Error::SampleTooSmall {
            needed: MIN_LEFT_POINTS,
            got: subsample.len(),
        });
    }
    let logs: Vec<f64> = subsample.iter().map(|x| x.ln()).collect();
    if logs.iter().all(|&y| y == logs[0]) {
        return Err(Error::DegenerateSample);
    }
    let cut_ln = cut_log10 * LN_10;
    let (mu, sigma, ll_log) = fit_truncated_normal(&logs, cut_ln, full_fit.mu, full_fit.sigma);
    let ll = ll_log - logs.iter().sum::<f64>();
    Ok(LeftOfModeFit {
        fit: LogNormalFit::from_params(mu, sigma, subsample.len(), ll),
        cut_log10,
        subsample,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    #[serde(rename = "truncated_lognormal")]
    TruncatedLogNormal,
    #[serde(rename = "full_lognormal")]
    FullLogNormal,
    #[serde(rename = "pareto_lognormal")]
    ParetoLogNormal,
    Indeterminate,
}

impl ShapeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShapeClass::TruncatedLogNormal => "truncated_lognormal",
            ShapeClass::FullLogNormal => "full_lognormal",
            ShapeClass::ParetoLogNormal => "pareto_lognormal",
            ShapeClass::Indeterminate => "indeterminate",
        }
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShapeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ShapeClass::TruncatedLogNormal,
            ShapeClass::FullLogNormal,
            ShapeClass::ParetoLogNormal,
            ShapeClass::Indeterminate,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown shape class {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Upper bound on mode_log10 for the truncated class.
    pub truncated_mode_log10: f64,
    /// Upper bound of the intermediate mode band; descriptive only.
    pub full_mode_upper_log10: f64,
    pub left_truncation_threshold: f64,
    pub right_excess_threshold: f64,
    /// Fitted percentile above which the right excess is measured.
    pub right_quantile: f64,
    /// Level of the CvM test of the left-only fit.
    pub alpha_left: f64,
    /// Level at which the full-sample CvM test must accept.
    pub alpha_full: f64,
    /// Bootstrap replicates for the left-wing CvM test.
    pub left_replicates: usize,
    pub seed: u64,
    pub bins: BinRule,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            truncated_mode_log10: 3.0,
            full_mode_upper_log10: 7.0,
            left_truncation_threshold: 0.05,
            right_excess_threshold: 0.05,
            right_quantile: 0.9,
            alpha_left: 0.01,
            alpha_full: 0.01,
            left_replicates: 199,
            seed: 0,
            bins: BinRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeClassification {
    pub class: ShapeClass,
    /// Mass of the full fit below the smallest observation.
    pub left_truncation_score: f64,
    /// Empirical minus fitted mass above the fitted `right_quantile` of the
    /// left-only fit.
    pub right_excess_score: f64,
    pub mode_log10: f64,
    /// Bootstrap p-value of the left-wing CvM test, when it was needed.
    pub left_cvm_pvalue: Option<f64>,
}

/// Bootstrap p-value of the CvM statistic of the left subsample under its
/// right-truncated fit.
pub fn left_wing_cvm_pvalue(left: &LeftOfModeFit, replicates: usize, seed: u64) -> Result<f64> {
    let mut sorted_cdf: Vec<f64> = left
        .subsample
        .iter()
        .map(|&x| left.truncated_cdf(x))
        .collect();
    sorted_cdf.sort_by(f64::total_cmp);
    let observed = gof::cvm_from_sorted_cdf(&sorted_cdf);

    let cut_ln = left.cut_log10 * LN_10;
    let n = left.subsample.len();
    let (mu, sigma) = (left.fit.mu, left.fit.sigma);
    let p_cut = std_normal_cdf((cut_ln - mu) / sigma);
    let boot: Vec<f64> = (0..replicates)
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, b as u64));
            let logs: Vec<f64> = (0..n)
                .map(|_| {
                    let u: f64 = rng.random::<f64>() * p_cut;
                    let u = u.max(f64::MIN_POSITIVE);
                    (mu + sigma * std_normal_quantile(u)).min(cut_ln)
                })
                .collect();
            if logs.iter().all(|&y| y == logs[0]) {
                return f64::INFINITY;
            }
            let (bm, bs, _) = fit_truncated_normal(&logs, cut_ln, mu, sigma);
            let mut cdf: Vec<f64> = logs
                .iter()
                .map(|&y| truncated_cdf(bm, bs, cut_ln, y.exp()))
                .collect();
            cdf.sort_by(f64::total_cmp);
            gof::cvm_from_sorted_cdf(&cdf)
        })
        .collect();
    Ok(gof::pvalue_from_replicates(observed, &boot))
}

/// Decision procedure, first matching rule wins:
/// Pareto-log-normal (right excess with a well-fitting left wing),
/// truncated (low mode with missing left mass), full log-normal (accepted
/// by the CvM test), otherwise indeterminate.
pub fn classify_shape(
    sample: &[f64],
    full_fit: &LogNormalFit,
    left_fit: &LeftOfModeFit,
    gof_result: &GofResult,
    cfg: &ClassifierConfig,
) -> Result<ShapeClassification> {
    check_sample(sample)?;
    let min = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let left_truncation_score = full_fit.cdf(min);

    let q = cfg.right_quantile;
    let threshold = left_fit.fit.quantile(q);
    let above = sample.iter().filter(|&&x| x > threshold).count();
    let right_excess_score = above as f64 / sample.len() as f64 - (1.0 - q);

    let mode_log10 = full_fit.mode_log10;
    let mut left_cvm_pvalue = None;

    let class = if right_excess_score > cfg.right_excess_threshold && {
        let p = left_wing_cvm_pvalue(left_fit, cfg.left_replicates, cfg.seed)?;
        left_cvm_pvalue = Some(p);
        p >= cfg.alpha_left
    } {
        ShapeClass::ParetoLogNormal
    } else if mode_log10 < cfg.truncated_mode_log10
        && left_truncation_score > cfg.left_truncation_threshold
    {
        ShapeClass::TruncatedLogNormal
    } else if gof_result.accepts_cvm_at(cfg.alpha_full) {
        ShapeClass::FullLogNormal
    } else {
        ShapeClass::Indeterminate
    };
    Ok(ShapeClassification {
        class,
        left_truncation_score,
        right_excess_score,
        mode_log10,
        left_cvm_pvalue,
    })
}
