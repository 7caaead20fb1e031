//! Reading export records, aggregating them to 4-digit product codes and
//! loading per-country macro indicators.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest and largest per-country product counts seen in realistic
/// 4-digit extracts. Samples outside this band are reported, not rejected.
pub const OBSERVED_SAMPLE_RANGE: (usize, usize) = (100, 1131);

#[derive(Debug, Clone, PartialEq)]
pub struct ExportRecord {
    pub year: i32,
    pub country: String,
    /// 2, 4 or 6 digit code.
    pub product: String,
    /// Thousands of USD.
    pub volume: f64,
    pub category_label: Option<String>,
}

/// Column names and delimiter of a delimiter-separated trade file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordFormat {
    pub delimiter: char,
    pub year: String,
    pub country: String,
    pub product: String,
    pub volume: String,
    pub category: Option<String>,
}

impl Default for RecordFormat {
    fn default() -> Self {
        RecordFormat {
            delimiter: ',',
            year: "year".into(),
            country: "country".into(),
            product: "product".into(),
            volume: "volume".into(),
            category: Some("category".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    NegativeVolume,
    Unparseable { column: String, value: String },
    MissingField(String),
    InvalidCountry(String),
    InvalidProduct(String),
    TwoDigitCode(String),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NegativeVolume => write!(f, "negative volume"),
            RejectReason::Unparseable { column, value } => {
                write!(f, "unparseable number in `{column}`: {value:?}")
            }
            RejectReason::MissingField(c) => write!(f, "missing field `{c}`"),
            RejectReason::InvalidCountry(c) => write!(f, "invalid country code {c:?}"),
            RejectReason::InvalidProduct(p) => write!(f, "invalid product code {p:?}"),
            RejectReason::TwoDigitCode(p) => write!(f, "2-digit code {p:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    /// 1-based line in the source file (the header is line 1).
    pub line: u64,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedRecords {
    pub records: Vec<ExportRecord>,
    /// Source line of each accepted record, parallel to `records`.
    pub lines: Vec<u64>,
    pub rejects: Vec<Reject>,
}

fn valid_country(code: &str) -> bool {
    code.len() == 3 && code.bytes().all(|b| b.is_ascii_alphabetic())
}

fn valid_product(code: &str) -> bool {
    matches!(code.len(), 2 | 4 | 6) && code.bytes().all(|b| b.is_ascii_digit())
}

/// Parses delimiter-separated export records. Malformed rows are collected
/// into the reject list; only a missing mandatory column is a hard error.
pub fn parse_records<R: Read>(reader: R, format: &RecordFormat) -> Result<ParsedRecords> {
    let delimiter = u8::try_from(format.delimiter)
        .map_err(|_| Error::Config(format!("delimiter {:?} is not ASCII", format.delimiter)))?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let column = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let year_col = column(&format.year)?;
    let country_col = column(&format.country)?;
    let product_col = column(&format.product)?;
    let volume_col = column(&format.volume)?;
    let category_col = format.category.as_deref().and_then(find);

    let mut out = ParsedRecords::default();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&row, format, [year_col, country_col, product_col, volume_col], category_col) {
            Ok(rec) => {
                out.records.push(rec);
                out.lines.push(line);
            }
            Err(reason) => out.rejects.push(Reject { line, reason }),
        }
    }
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    format: &RecordFormat,
    [year_col, country_col, product_col, volume_col]: [usize; 4],
    category_col: Option<usize>,
) -> std::result::Result<ExportRecord, RejectReason> {
    let field = |idx: usize, name: &str| {
        row.get(idx)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| RejectReason::MissingField(name.to_string()))
    };
    let year_s = field(year_col, &format.year)?;
    let country = field(country_col, &format.country)?;
    let product = field(product_col, &format.product)?;
    let volume_s = field(volume_col, &format.volume)?;

    let year: i32 = year_s.parse().map_err(|_| RejectReason::Unparseable {
        column: format.year.clone(),
        value: year_s.to_string(),
    })?;
    let volume: f64 = volume_s
        .parse()
        .ok()
        .filter(|v: &f64| v.is_finite())
        .ok_or_else(|| RejectReason::Unparseable {
            column: format.volume.clone(),
            value: volume_s.to_string(),
        })?;
    if volume < 0.0 {
        return Err(RejectReason::NegativeVolume);
    }
    if !valid_country(country) {
        return Err(RejectReason::InvalidCountry(country.to_string()));
    }
    if !valid_product(product) {
        return Err(RejectReason::InvalidProduct(product.to_string()));
    }
    let category_label = category_col
        .and_then(|i| row.get(i))
        .filter(|s| !s.is_empty())
        .map(str::to_string);
    Ok(ExportRecord {
        year,
        country: country.to_string(),
        product: product.to_string(),
        volume,
        category_label,
    })
}

/// Dense country×product matrix of export volumes (thousands of USD).
#[derive(Debug, Clone, PartialEq)]
pub struct TradeMatrix {
    year: i32,
    countries: Vec<String>,
    products: Vec<String>,
    /// Row-major, `countries.len() × products.len()`.
    volumes: Vec<f64>,
}

impl TradeMatrix {
    pub fn new(
        year: i32,
        countries: Vec<String>,
        products: Vec<String>,
        volumes: Vec<f64>,
    ) -> Result<Self> {
        if volumes.len() != countries.len() * products.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} volumes for a {}×{} matrix",
                volumes.len(),
                countries.len(),
                products.len()
            )));
        }
        for (what, codes) in [("country", &countries), ("product", &products)] {
            let unique: BTreeSet<&String> = codes.iter().collect();
            if unique.len() != codes.len() {
                return Err(Error::InvalidMatrix(format!("duplicate {what} code")));
            }
        }
        if let Some(v) = volumes.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidMatrix(format!("invalid volume {v}")));
        }
        Ok(TradeMatrix {
            year,
            countries,
            products,
            volumes,
        })
    }

    pub fn year(&self) -> i32 {
        self.year
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

    pub fn get(&self, c: usize, p: usize) -> f64 {
        self.volumes[c * self.products.len() + p]
    }

    pub fn row(&self, c: usize) -> &[f64] {
        let p = self.products.len();
        &self.volumes[c * p..(c + 1) * p]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn country_index(&self, code: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == code)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_countries())
            .map(|c| self.row(c).iter().sum())
            .collect()
    }

    /// Countries whose row is entirely zero.
    pub fn zero_rows(&self) -> Vec<&str> {
        (0..self.n_countries())
            .filter(|&c| self.row(c).iter().all(|&v| v == 0.0))
            .map(|c| self.countries[c].as_str())
            .collect()
    }

    /// Writes the canonical wide layout: `year,country,<product codes…>`,
    /// one row per country, volumes in shortest round-trip notation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["year".to_string(), "country".to_string()];
        header.extend(self.products.iter().cloned());
        w.write_record(&header)?;
        for (c, code) in self.countries.iter().enumerate() {
            let mut rec = vec![self.year.to_string(), code.clone()];
            rec.extend(self.row(c).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<matrix>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("year") || headers.get(1) != Some("country") {
            return Err(Error::InvalidMatrix(
                "matrix file must start with `year,country`".into(),
            ));
        }
        let products: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut year = None;
        let mut countries = Vec::new();
        let mut volumes = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let y: i32 = row
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidMatrix("bad year".into()))?;
            if *year.get_or_insert(y) != y {
                return Err(Error::MixedYears(vec![year.unwrap_or(y), y]));
            }
            countries.push(row.get(1).unwrap_or_default().to_string());
            if row.len() != products.len() + 2 {
                return Err(Error::InvalidMatrix(format!(
                    "row for {} has {} cells",
                    countries.last().map(String::as_str).unwrap_or(""),
                    row.len()
                )));
            }
            for cell in row.iter().skip(2) {
                volumes.push(
                    cell.parse::<f64>()
                        .map_err(|_| Error::InvalidMatrix(format!("bad volume {cell:?}")))?,
                );
            }
        }
        let year = year.ok_or(Error::EmptyMatrix)?;
        TradeMatrix::new(year, countries, products, volumes)
    }
}

/// Result of aggregating records: the matrix plus record-level rejections
/// (indices into the input slice).
#[derive(Debug, Clone)]
pub struct Aggregation {
    pub matrix: TradeMatrix,
    pub rejected: Vec<(usize, RejectReason)>,
}

/// Sums 6-digit codes into their 4-digit prefix, merges duplicate
/// (country, product) pairs and sorts rows and columns by code.
///
/// Each cell is summed in sorted order, so the result does not depend on
/// the order of the input records.
pub fn aggregate_to_4digit(records: &[ExportRecord]) -> Result<Aggregation> {
    let years: BTreeSet<i32> = records.iter().map(|r| r.year).collect();
    if years.len() > 1 {
        return Err(Error::MixedYears(years.into_iter().collect()));
    }
    let year = *years.iter().next().ok_or(Error::NoRecords)?;

    let mut rejected = Vec::new();
    let mut cells: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    let mut countries = BTreeSet::new();
    let mut products = BTreeSet::new();
    for (i, r) in records.iter().enumerate() {
        let code4 = match r.product.len() {
            4 | 6 if r.product.bytes().all(|b| b.is_ascii_digit()) => &r.product[..4],
            2 => {
                rejected.push((i, RejectReason::TwoDigitCode(r.product.clone())));
                continue;
            }
            _ => {
                rejected.push((i, RejectReason::InvalidProduct(r.product.clone())));
                continue;
            }
        };
        if r.volume < 0.0 || !r.volume.is_finite() {
            rejected.push((i, RejectReason::NegativeVolume));
            continue;
        }
        countries.insert(r.country.as_str());
        products.insert(code4);
        cells
            .entry((r.country.as_str(), code4))
            .or_default()
            .push(r.volume);
    }
    if countries.is_empty() {
        return Err(Error::NoRecords);
    }

    let countries: Vec<String> = countries.into_iter().map(str::to_string).collect();
    let products: Vec<String> = products.into_iter().map(str::to_string).collect();
    let p_index: BTreeMap<&str, usize> = products
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let c_index: BTreeMap<&str, usize> = countries
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut volumes = vec![0.0; countries.len() * products.len()];
    for ((c, p), mut vals) in cells {
        vals.sort_by(f64::total_cmp);
        volumes[c_index[c] * products.len() + p_index[p]] = vals.iter().sum();
    }
    let matrix = TradeMatrix::new(year, countries, products, volumes)?;
    Ok(Aggregation { matrix, rejected })
}

/// All strictly positive volumes of one country's row, in product order.
pub fn country_volume_sample(matrix: &TradeMatrix, country: &str) -> Result<Vec<f64>> {
    let c = matrix
        .country_index(country)
        .ok_or_else(|| Error::UnknownCountry(country.to_string()))?;
    Ok(matrix.row(c).iter().copied().filter(|&v| v > 0.0).collect())
}

/// True when a sample size falls outside [`OBSERVED_SAMPLE_RANGE`].
pub fn unusual_sample_size(n: usize) -> bool {
    n < OBSERVED_SAMPLE_RANGE.0 || n > OBSERVED_SAMPLE_RANGE.1
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorRow {
    pub country: String,
    pub gdp: Option<f64>,
    pub gdp_per_capita: Option<f64>,
    pub total_export: Option<f64>,
}

/// Per-country GDP, GDP per capita and total export.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndicatorTable {
    pub rows: Vec<IndicatorRow>,
}

impl IndicatorTable {
    /// Reads an indicator file with a `country` column and any subset of
    /// `gdp`, `gdp_pc`, `total_export`. Empty cells are missing values.
    pub fn read_csv<R: Read>(reader: R, delimiter: char) -> Result<Self> {
        let delimiter = u8::try_from(delimiter)
            .map_err(|_| Error::Config(format!("delimiter {delimiter:?} is not ASCII")))?;
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let country_col = find("country").ok_or_else(|| Error::MissingColumn("country".into()))?;
        let cols = [find("gdp"), find("gdp_pc"), find("total_export")];

        let mut rows = Vec::new();
        let mut seen = BTreeSet::new();
        for row in rdr.records() {
            let row = row?;
            let country = row.get(country_col).unwrap_or_default().to_string();
            if !seen.insert(country.clone()) {
                return Err(Error::Indicator(format!("duplicate country {country}")));
            }
            let mut vals = [None; 3];
            for (slot, col) in vals.iter_mut().zip(cols) {
                let Some(cell) = col.and_then(|i| row.get(i)).filter(|s| !s.is_empty()) else {
                    continue;
                };
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Indicator(format!("{country}: unparseable value {cell:?}"))
                })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Indicator(format!("{country}: invalid value {v}")));
                }
                *slot = Some(v);
            }
            rows.push(IndicatorRow {
                country,
                gdp: vals[0],
                gdp_per_capita: vals[1],
                total_export: vals[2],
            });
        }
        Ok(IndicatorTable { rows })
    }

    /// Checks that every country appears in the matrix and that any given
    /// total export agrees with the row sum within 1%.
    pub fn validate_against(&self, matrix: &TradeMatrix) -> Result<()> {
        let sums = matrix.row_sums();
        for row in &self.rows {
            let c = matrix.country_index(&row.country).ok_or_else(|| {
                Error::Indicator(format!("country {} not in trade matrix", row.country))
            })?;
            if let Some(total) = row.total_export {
                let derived = sums[c];
                let scale = derived.abs().max(total.abs());
                if scale > 0.0 && (total - derived).abs() > 0.01 * scale {
                    return Err(Error::Indicator(format!(
                        "{}: total_export {total} disagrees with row sum {derived}",
                        row.country
                    )));
                }
            }
        }
        Ok(())
    }
}
