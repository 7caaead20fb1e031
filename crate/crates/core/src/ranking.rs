//! Descending rank-volume curves, pairwise crossing counts and macro
//! indicator rank colorings.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fitness::{rank_descending, FitnessResult};
use crate::ingest::IndicatorTable;

/// A country's export volumes sorted in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingCurve {
    pub country: String,
    pub volumes: Vec<f64>,
}

impl RankingCurve {
    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    /// Reversed curve paired with plateau heights i/N: the points of the
    /// empirical CDF of the same sample.
    pub fn ecdf_points(&self) -> Vec<(f64, f64)> {
        let n = self.volumes.len() as f64;
        self.volumes
            .iter()
            .rev()
            .enumerate()
            .map(|(i, &v)| (v, (i + 1) as f64 / n))
            .collect()
    }
}

pub fn ranking_curve(sample: &[f64], country: &str) -> Result<RankingCurve> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(&v) = sample.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveValue(v));
    }
    let mut volumes = sample.to_vec();
    volumes.sort_by(|a, b| b.total_cmp(a));
    Ok(RankingCurve {
        country: country.to_string(),
        volumes,
    })
}

/// Number of sign alternations of a_r − b_r over the shared rank range.
/// A zero difference carries the previous nonzero sign.
pub fn count_crossings(a: &RankingCurve, b: &RankingCurve) -> usize {
    let mut last = 0i8;
    let mut crossings = 0;
    for (x, y) in a.volumes.iter().zip(&b.volumes) {
        let s = match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Greater) => 1,
            Some(std::cmp::Ordering::Less) => -1,
            _ => 0,
        };
        if s == 0 {
            continue;
        }
        if last != 0 && s != last {
            crossings += 1;
        }
        last = s;
    }
    crossings
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDominance {
    pub a: String,
    pub b: String,
    /// Shared rank range, min(N_a, N_b).
    pub overlap: usize,
    /// Fraction of shared ranks with a_r > b_r.
    pub frac_a_above: f64,
    /// Fraction of shared ranks with b_r > a_r.
    pub frac_b_above: f64,
    pub crossings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceSummary {
    /// One row per unordered pair (i < j in input order).
    pub pairs: Vec<PairDominance>,
    /// Share of pairs with no crossing; `None` with fewer than two curves.
    pub zero_crossing_share: Option<f64>,
}

fn pair(a: &RankingCurve, b: &RankingCurve) -> PairDominance {
    let overlap = a.len().min(b.len());
    let (mut above, mut below) = (0usize, 0usize);
    for (x, y) in a.volumes.iter().zip(&b.volumes) {
        if x > y {
            above += 1;
        } else if y > x {
            below += 1;
        }
    }
    let denom = overlap.max(1) as f64;
    PairDominance {
        a: a.country.clone(),
        b: b.country.clone(),
        overlap,
        frac_a_above: above as f64 / denom,
        frac_b_above: below as f64 / denom,
        crossings: count_crossings(a, b),
    }
}

pub fn dominance_matrix(curves: &[RankingCurve]) -> DominanceSummary {
    let index_pairs: Vec<(usize, usize)> = (0..curves.len())
        .flat_map(|i| (i + 1..curves.len()).map(move |j| (i, j)))
        .collect();
    let pairs: Vec<PairDominance> = index_pairs
        .par_iter()
        .map(|&(i, j)| pair(&curves[i], &curves[j]))
        .collect();
    let zero_crossing_share = (!pairs.is_empty())
        .then(|| pairs.iter().filter(|p| p.crossings == 0).count() as f64 / pairs.len() as f64);
    DominanceSummary {
        pairs,
        zero_crossing_share,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Fitness,
    Gdp,
    GdpPc,
    TotalExport,
}

impl Indicator {
    pub const ALL: [Indicator; 4] = [
        Indicator::Fitness,
        Indicator::Gdp,
        Indicator::GdpPc,
        Indicator::TotalExport,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Indicator::Fitness => "fitness",
            Indicator::Gdp => "gdp",
            Indicator::GdpPc => "gdp_pc",
            Indicator::TotalExport => "total_export",
        }
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Indicator::ALL
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown indicator {s:?}")))
    }
}

/// Values of one indicator for the requested countries, `None` where the
/// table has no value. Fitness is not stored in the table.
pub fn table_values(
    table: &IndicatorTable,
    indicator: Indicator,
    countries: &[String],
) -> Vec<(String, Option<f64>)> {
    countries
        .iter()
        .map(|c| {
            let row = table.rows.iter().find(|r| &r.country == c);
            let v = row.and_then(|r| match indicator {
                Indicator::Gdp => r.gdp,
                Indicator::GdpPc => r.gdp_per_capita,
                Indicator::TotalExport => r.total_export,
                Indicator::Fitness => None,
            });
            (c.clone(), v)
        })
        .collect()
}

/// Fitness values for the requested countries.
pub fn fitness_values(result: &FitnessResult, countries: &[String]) -> Vec<(String, Option<f64>)> {
    countries
        .iter()
        .map(|c| {
            let v = result
                .countries
                .iter()
                .position(|x| x == c)
                .map(|i| result.fitness[i]);
            (c.clone(), v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColorEntry {
    pub country: String,
    pub value: f64,
    /// 1 = highest value.
    pub rank: usize,
    /// (rank − 1)/(C − 1); 0 for a single country.
    pub color_index: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorColoring {
    pub indicator: Indicator,
    /// In input order.
    pub entries: Vec<ColorEntry>,
}

/// Ranks countries by descending indicator value (ties by code) and maps
/// each rank to a color index in [0, 1].
pub fn indicator_ranks(indicator: Indicator, values: &[(String, Option<f64>)]) -> Result<IndicatorColoring> {
    let missing: Vec<String> = values
        .iter()
        .filter(|(_, v)| !v.is_some_and(f64::is_finite))
        .map(|(c, _)| c.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingIndicator {
            indicator: indicator.to_string(),
            countries: missing,
        });
    }
    let codes: Vec<String> = values.iter().map(|(c, _)| c.clone()).collect();
    let vals: Vec<f64> = values.iter().map(|(_, v)| v.unwrap_or(f64::NAN)).collect();
    let ranks = rank_descending(&codes, &vals);
    let c = values.len();
    let entries = codes
        .into_iter()
        .zip(vals)
        .zip(ranks)
        .map(|((country, value), rank)| ColorEntry {
            country,
            value,
            rank,
            color_index: if c > 1 {
                (rank - 1) as f64 / (c - 1) as f64
            } else {
                0.0
            },
        })
        .collect();
    Ok(IndicatorColoring { indicator, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(name: &str, v: &[f64]) -> RankingCurve {
        RankingCurve {
            country: name.into(),
            volumes: v.to_vec(),
        }
    }

    #[test]
    fn curves_sort_descending() {
        assert_eq!(ranking_curve(&[2.0, 9.0, 5.0], "AAA").unwrap().volumes, vec![9.0, 5.0, 2.0]);
        assert_eq!(ranking_curve(&[4.0, 4.0], "AAA").unwrap().volumes, vec![4.0, 4.0]);
        assert_eq!(ranking_curve(&[7.0], "AAA").unwrap().volumes, vec![7.0]);
        assert!(matches!(ranking_curve(&[], "AAA"), Err(Error::EmptySample)));
    }

    #[test]
    fn crossing_examples() {
        let a = curve("A", &[10.0, 5.0, 1.0]);
        assert_eq!(count_crossings(&a, &curve("B", &[8.0, 4.0, 0.5])), 0);
        assert_eq!(count_crossings(&a, &curve("B", &[8.0, 6.0, 0.5])), 2);
        assert_eq!(count_crossings(&a, &a.clone()), 0);
        // A tie inherits the previous sign.
        assert_eq!(count_crossings(&a, &curve("B", &[8.0, 5.0, 2.0])), 1);
    }

    #[test]
    fn dominance_examples() {
        let template = [100.0, 40.0, 10.0, 3.0, 1.0];
        let nested: Vec<RankingCurve> = (1..=4)
            .map(|k| curve(&format!("C{k}"), &template.map(|v| v * k as f64)))
            .collect();
        assert_eq!(dominance_matrix(&nested).zero_crossing_share, Some(1.0));

        let two = [curve("A", &[10.0, 5.0, 1.0]), curve("B", &[8.0, 6.0, 0.5])];
        let d = dominance_matrix(&two);
        assert_eq!(d.pairs.len(), 1);
        assert_eq!(d.zero_crossing_share, Some(0.0));
        assert!((d.pairs[0].frac_a_above - 2.0 / 3.0).abs() < 1e-15);

        let one = dominance_matrix(&two[..1]);
        assert!(one.pairs.is_empty());
        assert_eq!(one.zero_crossing_share, None);
    }

    #[test]
    fn shorter_curve_limits_comparison() {
        let a = curve("A", &[10.0, 5.0]);
        let b = curve("B", &[8.0, 4.0, 3.0, 2.0, 100.0]);
        assert_eq!(count_crossings(&a, &b), 0);
        assert_eq!(dominance_matrix(&[a, b]).pairs[0].overlap, 2);
    }

    #[test]
    fn indicator_rank_examples() {
        let vals: Vec<(String, Option<f64>)> = [("AAA", 3.2), ("BBB", 1.1), ("CCC", 7.8)]
            .iter()
            .map(|(c, v)| (c.to_string(), Some(*v)))
            .collect();
        let col = indicator_ranks(Indicator::Gdp, &vals).unwrap();
        assert_eq!(col.entries.iter().map(|e| e.rank).collect::<Vec<_>>(), vec![2, 3, 1]);
        assert_eq!(
            col.entries.iter().map(|e| e.color_index).collect::<Vec<_>>(),
            vec![0.5, 1.0, 0.0]
        );

        let tie = vec![("BBB".to_string(), Some(1.0)), ("AAA".to_string(), Some(1.0))];
        let col = indicator_ranks(Indicator::Gdp, &tie).unwrap();
        assert_eq!(col.entries[1].rank, 1);
        assert_eq!(col.entries[0].rank, 2);

        let single = indicator_ranks(Indicator::Fitness, &[("AAA".to_string(), Some(0.3))]).unwrap();
        assert_eq!(single.entries[0].rank, 1);
        assert_eq!(single.entries[0].color_index, 0.0);
    }

    #[test]
    fn missing_indicator_lists_countries() {
        let vals = vec![
            ("AAA".to_string(), Some(1.0)),
            ("BBB".to_string(), None),
            ("CCC".to_string(), None),
        ];
        match indicator_ranks(Indicator::GdpPc, &vals) {
            Err(Error::MissingIndicator { countries, .. }) => assert_eq!(countries, vec!["BBB", "CCC"]),
            other => panic!("{other:?}"),
        }
    }

    fn curve_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![0.5f64..1e4, Just(10.0)], 1..30)
    }

    proptest! {
        #[test]
        fn crossings_are_symmetric(a in curve_strategy(), b in curve_strategy()) {
            let a = ranking_curve(&a, "A").unwrap();
            let b = ranking_curve(&b, "B").unwrap();
            prop_assert_eq!(count_crossings(&a, &b), count_crossings(&b, &a));
        }

        #[test]
        fn dominating_scaled_curve_never_crosses(a in curve_strategy(), k in 1.0001f64..50.0) {
            let lower = ranking_curve(&a, "A").unwrap();
            let upper = ranking_curve(&a.iter().map(|v| v * k).collect::<Vec<_>>(), "B").unwrap();
            prop_assert_eq!(count_crossings(&upper, &lower), 0);
        }

        #[test]
        fn ranks_form_a_permutation(v in prop::collection::vec(prop_oneof![0.0f64..10.0, Just(1.0)], 1..40)) {
            let vals: Vec<(String, Option<f64>)> = v
                .iter()
                .enumerate()
                .map(|(i, &x)| (format!("C{i:03}"), Some(x)))
                .collect();
            let col = indicator_ranks(Indicator::TotalExport, &vals).unwrap();
            let mut ranks: Vec<usize> = col.entries.iter().map(|e| e.rank).collect();
            ranks.sort();
            prop_assert_eq!(ranks, (1..=v.len()).collect::<Vec<_>>());
            prop_assert!(col.entries.iter().all(|e| (0.0..=1.0).contains(&e.color_index)));
        }
    }
}
