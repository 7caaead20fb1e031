//! Balassa revealed comparative advantage and the binary export matrix.

use crate::error::{Error, Result};
use crate::ingest::TradeMatrix;

/// Default binarization threshold (inclusive).
pub const DEFAULT_RCA_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    pub countries: Vec<String>,
    pub products: Vec<String>,
    /// Row-major values.
    pub values: Vec<f64>,
}

impl RcaMatrix {
    pub fn get(&self, c: usize, p: usize) -> f64 {
        self.values[c * self.products.len() + p]
    }
}

/// RCA_cp = (E_cp / Σ_p E_cp) / (Σ_c E_cp / Σ_cp E_cp).
///
/// Cells in an all-zero row or column are 0.
pub fn rca_matrix(t: &TradeMatrix) -> Result<RcaMatrix> {
    let (nc, np) = (t.n_countries(), t.n_products());
    if nc == 0 || np == 0 {
        return Err(Error::EmptyMatrix);
    }
    let row_sums = t.row_sums();
    let mut col_sums = vec![0.0; np];
    for c in 0..nc {
        for (acc, v) in col_sums.iter_mut().zip(t.row(c)) {
            *acc += v;
        }
    }
    let total: f64 = row_sums.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidMatrix("global export total is zero".into()));
    }
    let mut values = vec![0.0; nc * np];
    for c in 0..nc {
        if row_sums[c] == 0.0 {
            continue;
        }
        for p in 0..np {
            if col_sums[p] == 0.0 {
                continue;
            }
            values[c * np + p] = (t.get(c, p) / row_sums[c]) / (col_sums[p] / total);
        }
    }
    Ok(RcaMatrix {
        countries: t.countries().to_vec(),
        products: t.products().to_vec(),
        values,
    })
}

/// Binary country×product matrix M.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryExportMatrix {
    countries: Vec<String>,
    products: Vec<String>,
    m: Vec<bool>,
    threshold: f64,
}

impl BinaryExportMatrix {
    /// Builds a matrix directly from rows of 0/1 entries. The threshold is
    /// recorded as NaN since no RCA was involved.
    pub fn from_rows(countries: Vec<String>, products: Vec<String>, rows: &[Vec<u8>]) -> Result<Self> {
        if rows.len() != countries.len() || rows.iter().any(|r| r.len() != products.len()) {
            return Err(Error::InvalidMatrix("row shape does not match code lists".into()));
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(Error::InvalidMatrix("entries must be 0 or 1".into()));
        }
        Ok(BinaryExportMatrix {
            countries,
            products,
            m: rows.iter().flatten().map(|&v| v == 1).collect(),
            threshold: f64::NAN,
        })
    }

    /// Convenience constructor with generated codes `C0, C1, …`/`P0, P1, …`.
    pub fn from_unlabelled(rows: &[Vec<u8>]) -> Result<Self> {
        let nc = rows.len();
        let np = rows.first().map_or(0, Vec::len);
        Self::from_rows(
            (0..nc).map(|i| format!("C{i}")).collect(),
            (0..np).map(|i| format!("P{i}")).collect(),
            rows,
        )
    }

    pub fn countries(&self) -> &[String] {
        &self.countries
    }

    pub fn products(&self) -> &[String] {
        &self.products
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn get(&self, c: usize, p: usize) -> bool {
        self.m[c * self.products.len() + p]
    }

    pub fn row(&self, c: usize) -> &[bool] {
        let np = self.products.len();
        &self.m[c * np..(c + 1) * np]
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.n_countries())
            .map(|c| self.row(c).iter().filter(|&&b| b).count())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_products()];
        for c in 0..self.n_countries() {
            for (acc, &b) in out.iter_mut().zip(self.row(c)) {
                *acc += b as usize;
            }
        }
        out
    }
}

/// m_cp = 1 iff rca_cp ≥ threshold.
pub fn binarize(rca: &RcaMatrix, threshold: f64) -> Result<BinaryExportMatrix> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "RCA threshold must be positive, got {threshold}"
        )));
    }
    Ok(BinaryExportMatrix {
        countries: rca.countries.clone(),
        products: rca.products.clone(),
        m: rca.values.iter().map(|&v| v >= threshold).collect(),
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: &[&[f64]]) -> TradeMatrix {
        let nc = rows.len();
        let np = rows[0].len();
        TradeMatrix::new(
            2010,
            (0..nc).map(|i| format!("C{i:02}")).collect(),
            (0..np).map(|i| format!("{i:04}")).collect(),
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_matrix_gives_unit_rca() {
        let r = rca_matrix(&matrix(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert!(r.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn diagonal_matrix() {
        let r = rca_matrix(&matrix(&[&[10.0, 0.0], &[0.0, 10.0]])).unwrap();
        assert_eq!(r.values, vec![2.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn hand_evaluated_rca_and_binarization() {
        let r = rca_matrix(&matrix(&[&[4.0, 1.0], &[1.0, 4.0]])).unwrap();
        let expected = [1.6, 0.4, 0.4, 1.6];
        for (v, e) in r.values.iter().zip(expected) {
            assert!((v - e).abs() < 1e-15);
        }
        let m = binarize(&r, 1.0).unwrap();
        assert_eq!(m.row(0), [true, false]);
        assert_eq!(m.row(1), [false, true]);
    }

    #[test]
    fn threshold_is_inclusive() {
        let r = rca_matrix(&matrix(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        let m = binarize(&r, 1.0).unwrap();
        assert!((0..2).all(|c| m.row(c).iter().all(|&b| b)));
        assert!(binarize(&r, 0.0).is_err());
    }

    #[test]
    fn degenerate_rows_and_columns_are_zero() {
        let r = rca_matrix(&matrix(&[&[3.0, 0.0], &[0.0, 0.0]])).unwrap();
        assert_eq!(r.values, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(rca_matrix(&matrix(&[&[0.0]])).is_err());
    }

    fn trade_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (1usize..6, 1usize..6).prop_flat_map(|(nc, np)| {
            (
                Just(nc),
                Just(np),
                prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1e6], nc * np),
            )
        })
    }

    fn build(nc: usize, np: usize, v: Vec<f64>) -> TradeMatrix {
        TradeMatrix::new(
            2010,
            (0..nc).map(|i| format!("C{i:02}")).collect(),
            (0..np).map(|i| format!("{i:04}")).collect(),
            v,
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn rescaling_leaves_rca_unchanged((nc, np, v) in trade_strategy(), k in 1e-3f64..1e3) {
            prop_assume!(v.iter().any(|&x| x > 0.0));
            let a = rca_matrix(&build(nc, np, v.clone())).unwrap();
            let b = rca_matrix(&build(nc, np, v.iter().map(|x| x * k).collect())).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn share_weighted_mean_is_one((nc, np, v) in trade_strategy()) {
            prop_assume!(v.iter().any(|&x| x > 0.0));
            let t = build(nc, np, v);
            let r = rca_matrix(&t).unwrap();
            let rows = t.row_sums();
            let total: f64 = rows.iter().sum();
            for p in 0..np {
                let col: f64 = (0..nc).map(|c| t.get(c, p)).sum();
                if col == 0.0 { continue; }
                let mean: f64 = (0..nc).map(|c| rows[c] / total * r.get(c, p)).sum();
                prop_assert!((mean - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn permutation_equivariance((nc, np, v) in trade_strategy(), rot in 0usize..6) {
            prop_assume!(v.iter().any(|&x| x > 0.0));
            let t = build(nc, np, v.clone());
            let r = rca_matrix(&t).unwrap();
            // Rotate rows by `rot`.
            let perm: Vec<usize> = (0..nc).map(|i| (i + rot) % nc).collect();
            let pv: Vec<f64> = perm.iter().flat_map(|&c| t.row(c).to_vec()).collect();
            let rp = rca_matrix(&build(nc, np, pv)).unwrap();
            for (i, &c) in perm.iter().enumerate() {
                for p in 0..np {
                    prop_assert!((rp.get(i, p) - r.get(c, p)).abs() <= 1e-12 * r.get(c, p).max(1.0));
                }
            }
        }
    }
}
