//! Nonlinear fitness–complexity iteration on the binary export matrix.
//!
//! Each iteration computes
//!
//! ```text
//! F̃_c = Σ_p M_cp Q_p
//! Q̃_p = 1 / Σ_c M_cp / F_c
//! ```
//!
//! from the previous vectors and then rescales both so that their means over
//! all countries and products are one. Countries whose fitness falls to the
//! zero floor are pinned to exactly 0; any product they export then has
//! Q̃_p = 0, which is the limit of the 1/F term growing without bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rca::BinaryExportMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessConfig {
    pub max_iterations: usize,
    /// Maximum relative change of both vectors for value convergence.
    pub value_tolerance: f64,
    /// Consecutive iterations with unchanged rankings for rank convergence.
    pub rank_patience: usize,
    /// Fitness at or below this is treated as exactly zero.
    pub zero_floor: f64,
    pub keep_trace: bool,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        FitnessConfig {
            max_iterations: 1000,
            value_tolerance: 1e-9,
            rank_patience: 20,
            zero_floor: 1e-300,
            keep_trace: true,
        }
    }
}

impl FitnessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1
            || self.rank_patience < 1
            || !(self.value_tolerance > 0.0)
            || !(self.zero_floor > 0.0)
        {
            return Err(Error::InvalidParameter(format!("fitness config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergenceMode {
    Value,
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub max_rel_delta_fitness: f64,
    pub max_rel_delta_complexity: f64,
    pub country_rank_changes: usize,
    pub product_rank_changes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitnessResult {
    pub countries: Vec<String>,
    pub products: Vec<String>,
    pub fitness: Vec<f64>,
    pub complexity: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    /// `None` when the iteration budget ran out.
    pub convergence_mode: Option<ConvergenceMode>,
    pub trace: Option<Vec<IterationRecord>>,
}

/// Row/column incidence of the non-empty part of M.
struct Incidence {
    n_countries: usize,
    n_products: usize,
    /// Original indices of countries/products with at least one entry.
    active_countries: Vec<usize>,
    active_products: Vec<usize>,
    /// Per active country, the active-product positions it exports.
    by_country: Vec<Vec<usize>>,
    /// Per active product, the active-country positions exporting it.
    by_product: Vec<Vec<usize>>,
}

impl Incidence {
    fn new(m: &BinaryExportMatrix) -> Self {
        let (nc, np) = (m.n_countries(), m.n_products());
        let active_countries: Vec<usize> = (0..nc).filter(|&c| m.row(c).iter().any(|&b| b)).collect();
        let col_sums = m.col_sums();
        let active_products: Vec<usize> = (0..np).filter(|&p| col_sums[p] > 0).collect();
        let mut product_pos = vec![usize::MAX; np];
        for (i, &p) in active_products.iter().enumerate() {
            product_pos[p] = i;
        }
        let mut by_country = Vec::with_capacity(active_countries.len());
        let mut by_product = vec![Vec::new(); active_products.len()];
        for (ci, &c) in active_countries.iter().enumerate() {
            let row: Vec<usize> = m
                .row(c)
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(p, _)| product_pos[p])
                .collect();
            for &pi in &row {
                by_product[pi].push(ci);
            }
            by_country.push(row);
        }
        Incidence {
            n_countries: nc,
            n_products: np,
            active_countries,
            active_products,
            by_country,
            by_product,
        }
    }

    /// One update on the active sub-vectors. Normalization targets the
    /// full-matrix counts so that dropped (zero) entries keep the mean at 1.
    fn step(&self, f: &[f64], q: &[f64], floor: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let f_tilde: Vec<f64> = self
            .by_country
            .iter()
            .map(|ps| ps.iter().map(|&p| q[p]).sum())
            .collect();
        let q_tilde: Vec<f64> = self
            .by_product
            .iter()
            .map(|cs| {
                let mut inv = 0.0;
                for &c in cs {
                    if f[c] <= floor {
                        return 0.0;
                    }
                    inv += 1.0 / f[c];
                }
                1.0 / inv
            })
            .collect();
        let f_new = normalize(f_tilde, self.n_countries, floor)?;
        let q_new = normalize(q_tilde, self.n_products, 0.0)?;
        Ok((f_new, q_new))
    }

    fn expand(&self, f: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut full_f = vec![0.0; self.n_countries];
        for (&c, &v) in self.active_countries.iter().zip(f) {
            full_f[c] = v;
        }
        let mut full_q = vec![0.0; self.n_products];
        for (&p, &v) in self.active_products.iter().zip(q) {
            full_q[p] = v;
        }
        (full_f, full_q)
    }
}

fn normalize(mut v: Vec<f64>, count: usize, floor: f64) -> Result<Vec<f64>> {
    let sum: f64 = v.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::InvalidMatrix(
            "fitness iteration collapsed: all entries vanished".into(),
        ));
    }
    let scale = count as f64 / sum;
    for x in &mut v {
        *x *= scale;
        if *x <= floor {
            *x = 0.0;
        }
    }
    Ok(v)
}

/// One full update from `(f, q)`. Both inputs are full-length vectors and
/// `f` must be strictly positive.
pub fn iterate_once(m: &BinaryExportMatrix, f: &[f64], q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if f.len() != m.n_countries() || q.len() != m.n_products() {
        return Err(Error::InvalidParameter(format!(
            "vector lengths ({}, {}) do not match a {}×{} matrix",
            f.len(),
            q.len(),
            m.n_countries(),
            m.n_products()
        )));
    }
    if let Some((index, &value)) = f.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositiveFitness { index, value });
    }
    let inc = Incidence::new(m);
    let f_active: Vec<f64> = inc.active_countries.iter().map(|&c| f[c]).collect();
    let q_active: Vec<f64> = inc.active_products.iter().map(|&p| q[p]).collect();
    let (f_new, q_new) = inc.step(&f_active, &q_active, 0.0)?;
    Ok(inc.expand(&f_new, &q_new))
}

/// Iterator over successive full-length `(fitness, complexity)` states,
/// starting from all ones. Yields `Err` once if the iteration collapses.
pub struct FitnessIter {
    inc: Incidence,
    f: Vec<f64>,
    q: Vec<f64>,
    floor: f64,
    failed: bool,
}

impl FitnessIter {
    pub fn new(m: &BinaryExportMatrix, zero_floor: f64) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let inc = Incidence::new(m);
        if inc.active_countries.is_empty() {
            return Err(Error::InvalidMatrix("binary matrix has no entries".into()));
        }
        let f = vec![1.0; inc.active_countries.len()];
        let q = vec![1.0; inc.active_products.len()];
        Ok(FitnessIter {
            inc,
            f,
            q,
            floor: zero_floor,
            failed: false,
        })
    }
}

impl Iterator for FitnessIter {
    type Item = Result<(Vec<f64>, Vec<f64>)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.inc.step(&self.f, &self.q, self.floor) {
            Ok((f, q)) => {
                self.f = f;
                self.q = q;
                Some(Ok(self.inc.expand(&self.f, &self.q)))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

fn max_rel_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(&a, &b)| {
            if a == b {
                0.0
            } else if a == 0.0 {
                f64::INFINITY
            } else {
                ((b - a) / a).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Positions sorted by descending value, ties by index.
fn order_desc(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

fn rank_changes(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Runs the iteration from F = Q = 1 until value convergence, rank
/// convergence or the iteration budget.
pub fn solve(m: &BinaryExportMatrix, cfg: &FitnessConfig) -> Result<FitnessResult> {
    cfg.validate()?;
    let mut iter = FitnessIter::new(m, cfg.zero_floor)?;
    let mut f_prev = vec![1.0; iter.inc.active_countries.len()];
    let mut q_prev = vec![1.0; iter.inc.active_products.len()];
    let mut f_order = order_desc(&f_prev);
    let mut q_order = order_desc(&q_prev);
    let mut stable = 0usize;
    let mut trace = cfg.keep_trace.then(Vec::new);
    let mut mode = None;
    let mut n = 0;

    while n < cfg.max_iterations {
        let (f, q) = iter.inc.step(&f_prev, &q_prev, cfg.zero_floor)?;
        n += 1;
        let df = max_rel_change(&f_prev, &f);
        let dq = max_rel_change(&q_prev, &q);
        let new_f_order = order_desc(&f);
        let new_q_order = order_desc(&q);
        let cf = rank_changes(&f_order, &new_f_order);
        let cq = rank_changes(&q_order, &new_q_order);
        if let Some(t) = trace.as_mut() {
            t.push(IterationRecord {
                iteration: n,
                max_rel_delta_fitness: df,
                max_rel_delta_complexity: dq,
                country_rank_changes: cf,
                product_rank_changes: cq,
            });
        }
        f_prev = f;
        q_prev = q;
        f_order = new_f_order;
        q_order = new_q_order;

        if df < cfg.value_tolerance && dq < cfg.value_tolerance {
            mode = Some(ConvergenceMode::Value);
            break;
        }
        stable = if cf == 0 && cq == 0 { stable + 1 } else { 0 };
        if stable >= cfg.rank_patience {
            mode = Some(ConvergenceMode::Rank);
            break;
        }
    }
    iter.f = f_prev;
    iter.q = q_prev;
    let (fitness, complexity) = iter.inc.expand(&iter.f, &iter.q);
    Ok(FitnessResult {
        countries: m.countries().to_vec(),
        products: m.products().to_vec(),
        fitness,
        complexity,
        iterations_run: n,
        converged: mode.is_some(),
        convergence_mode: mode,
        trace,
    })
}

/// Ranks by descending value (1 = highest); equal values are ordered by
/// code so the ranks are always a permutation of 1..=n.
pub fn rank_descending(codes: &[String], values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then_with(|| codes[a].cmp(&codes[b])));
    let mut ranks = vec![0; values.len()];
    for (r, &i) in idx.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Country ranking by fitness, 1 = fittest.
pub fn fitness_rank(result: &FitnessResult) -> Vec<usize> {
    rank_descending(&result.countries, &result.fitness)
}
