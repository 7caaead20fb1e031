//! End-to-end runs over files: ingest, full analysis, synthetic corpora and
//! the single-stage commands behind the `tradeshape` binary.
//!
//! Every run stages its outputs in a hidden directory inside the output
//! directory and moves them into place only after all stages succeed, so a
//! failed run leaves no partial tables behind.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distfit::{
    classify_shape, fit_lognormal, left_wing_cvm_pvalue, log_histogram, refit_left_of_mode, BinRule, ClassifierConfig,
    Histogram, LeftOfModeFit, LogNormalFit, ShapeClassification,
};
use crate::error::{Error, Result};
use crate::fitness::{fitness_rank, solve, FitnessConfig, FitnessResult};
use crate::gof::{gof_profile, gof_test, GofConfig, GofProfile, GofResult};
use crate::ingest::{
    aggregate_to_4digit, country_volume_sample, parse_records, unusual_sample_size,
    IndicatorTable, RecordFormat, Reject, TradeMatrix,
};
use crate::numeric::{fmt_sig, mix_seed};
use crate::ranking::{
    dominance_matrix, fitness_values, indicator_ranks, ranking_curve, table_values,
    DominanceSummary, Indicator, IndicatorColoring, RankingCurve,
};
use crate::rca::{binarize, rca_matrix, BinaryExportMatrix, RcaMatrix, DEFAULT_RCA_THRESHOLD};
use crate::synth::{gen_corpus, write_labels_file, write_trade_file, SynthCorpus, SynthCorpusSpec};

pub const MATRIX_FILE: &str = "matrix.csv";
pub const REJECTS_FILE: &str = "rejects.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRADE_FILE: &str = "trade.csv";
pub const LABELS_FILE: &str = "labels.csv";

/// Exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Finished, but some input rows were rejected.
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Ok => 0,
            Outcome::Partial => 2,
        }
    }
}

/// Bootstrap replicates and levels for the per-country tests. The seed
/// comes from [`RunConfig::seed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GofSettings {
    /// 0 disables the bootstrap and falls back to the naive thresholds.
    pub replicates: usize,
    pub alpha_ks: f64,
    pub alpha_cvm: f64,
}

impl Default for GofSettings {
    fn default() -> Self {
        let g = GofConfig::default();
        GofSettings {
            replicates: g.replicates,
            alpha_ks: g.alpha_ks,
            alpha_cvm: g.alpha_cvm,
        }
    }
}

/// Everything a run depends on. Loaded from TOML; unspecified keys take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Raw export records, read by `ingest`.
    pub trade_file: Option<PathBuf>,
    /// Canonical matrix; defaults to `<out_dir>/matrix.csv`.
    pub matrix_file: Option<PathBuf>,
    pub indicator_file: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub format: RecordFormat,
    /// Delimiter of every table written by the run.
    pub output_delimiter: char,
    pub rca_threshold: f64,
    pub fitness: FitnessConfig,
    pub bins: BinRule,
    pub gof: GofSettings,
    pub classifier: ClassifierConfig,
    pub seed: u64,
    /// Worker threads; `None` uses every available processor.
    pub jobs: Option<usize>,
    pub dump_histograms: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trade_file: None,
            matrix_file: None,
            indicator_file: None,
            out_dir: PathBuf::from("out"),
            format: RecordFormat::default(),
            output_delimiter: ',',
            rca_threshold: DEFAULT_RCA_THRESHOLD,
            fitness: FitnessConfig::default(),
            bins: BinRule::default(),
            gof: GofSettings::default(),
            classifier: ClassifierConfig::default(),
            seed: 0,
            jobs: None,
            dump_histograms: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn matrix_path(&self) -> PathBuf {
        self.matrix_file
            .clone()
            .unwrap_or_else(|| self.out_dir.join(MATRIX_FILE))
    }

    pub fn validate(&self) -> Result<()> {
        let inputs = [&self.trade_file, &self.matrix_file, &self.indicator_file];
        let given: Vec<&PathBuf> = inputs.iter().filter_map(|p| p.as_ref()).collect();
        for (i, a) in given.iter().enumerate() {
            if given[i + 1..].contains(a) || **a == self.out_dir {
                return Err(Error::Config(format!("path {} is used twice", a.display())));
            }
        }
        if !(self.rca_threshold > 0.0) {
            return Err(Error::Config("rca_threshold must be positive".into()));
        }
        if !(self.bins.width_decades > 0.0) {
            return Err(Error::Config("bin width must be positive".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if !self.output_delimiter.is_ascii() {
            return Err(Error::Config("output delimiter must be ASCII".into()));
        }
        self.fitness.validate()
    }

    fn gof_config(&self, seed: u64) -> GofConfig {
        GofConfig {
            replicates: self.gof.replicates,
            seed,
            alpha_ks: self.gof.alpha_ks,
            alpha_cvm: self.gof.alpha_cvm,
        }
    }
}

/// Seed of one country's random streams. Depends on the code, not the
/// position, so adding or removing countries leaves the others unchanged.
pub fn country_seed(seed: u64, country: &str) -> u64 {
    // FNV-1a of the code
    let h = country
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    mix_seed(seed, h)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j);
    }
    let pool = b.build().map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

// ---------------------------------------------------------------- output

/// Hidden directory inside the output directory; dropped (and removed)
/// unless committed.
struct Staging {
    dir: tempfile::TempDir,
    target: PathBuf,
    delimiter: u8,
}

impl Staging {
    fn new(target: &Path, delimiter: char) -> Result<Self> {
        fs::create_dir_all(target).map_err(|e| Error::io(target, e))?;
        let dir = tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(target)
            .map_err(|e| Error::io(target, e))?;
        Ok(Staging {
            dir,
            target: target.to_path_buf(),
            delimiter: delimiter as u8,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Error::io(&path, e))
    }

    fn table<I>(&self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::WriterBuilder::new()
            .delimiter(self.delimiter)
            .from_writer(self.create(name)?);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(|e| Error::io(self.path(name), e))
    }

    /// Moves every staged file into the target, replacing older copies.
    fn commit(self) -> Result<Vec<String>> {
        let mut moved = Vec::new();
        move_tree(self.dir.path(), &self.target, Path::new(""), &mut moved)?;
        moved.sort();
        Ok(moved)
    }
}

fn move_tree(from: &Path, to: &Path, rel: &Path, moved: &mut Vec<String>) -> Result<()> {
    let src = from.join(rel);
    let mut entries: Vec<_> = fs::read_dir(&src)
        .map_err(|e| Error::io(&src, e))?
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(&src, e))?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let rel = rel.join(e.file_name());
        let dst = to.join(&rel);
        if e.path().is_dir() {
            fs::create_dir_all(&dst).map_err(|err| Error::io(&dst, err))?;
            move_tree(from, to, &rel, moved)?;
        } else {
            fs::rename(e.path(), &dst).map_err(|err| Error::io(&dst, err))?;
            moved.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

fn read_matrix(path: &Path) -> Result<TradeMatrix> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    TradeMatrix::read_csv(BufReader::new(f))
}

fn read_indicators(cfg: &RunConfig, matrix: &TradeMatrix) -> Result<Option<IndicatorTable>> {
    let Some(path) = &cfg.indicator_file else {
        return Ok(None);
    };
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let table = IndicatorTable::read_csv(BufReader::new(f), cfg.format.delimiter)?;
    table.validate_against(matrix)?;
    Ok(Some(table))
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub matrix: TradeMatrix,
    /// Parse and aggregation rejections, by source line.
    pub rejects: Vec<Reject>,
    pub outcome: Outcome,
}

/// Reads a raw trade file into the canonical matrix.
pub fn ingest_file(path: &Path, format: &RecordFormat) -> Result<IngestReport> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_records(BufReader::new(f), format)?;
    let agg = aggregate_to_4digit(&parsed.records)?;
    let mut rejects = parsed.rejects;
    rejects.extend(agg.rejected.into_iter().map(|(i, reason)| Reject {
        line: parsed.lines[i],
        reason,
    }));
    rejects.sort_by_key(|r| r.line);
    let outcome = if rejects.is_empty() {
        Outcome::Ok
    } else {
        Outcome::Partial
    };
    Ok(IngestReport {
        matrix: agg.matrix,
        rejects,
        outcome,
    })
}

/// Writes `matrix.csv` and `rejects.csv` into the output directory.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestReport> {
    cfg.validate()?;
    let path = cfg
        .trade_file
        .as_ref()
        .ok_or_else(|| Error::Config("no trade_file given".into()))?;
    let report = ingest_file(path, &cfg.format)?;
    let stage = Staging::new(&cfg.out_dir, cfg.output_delimiter)?;
    report.matrix.write_csv(stage.create(MATRIX_FILE)?)?;
    stage.table(
        REJECTS_FILE,
        &["line", "reason"],
        report
            .rejects
            .iter()
            .map(|r| vec![r.line.to_string(), r.reason.to_string()]),
    )?;
    stage.commit()?;
    Ok(report)
}

// ---------------------------------------------------------------- synth

/// Writes `trade.csv` and `labels.csv` for a corpus spec.
pub fn cmd_synth(spec: &SynthCorpusSpec, out_dir: &Path) -> Result<SynthCorpus> {
    let corpus = gen_corpus(spec)?;
    let stage = Staging::new(out_dir, ',')?;
    write_trade_file(&corpus.matrix, stage.create(TRADE_FILE)?)?;
    write_labels_file(&corpus, stage.create(LABELS_FILE)?)?;
    let mut spec_file = stage.create("corpus.toml")?;
    spec_file
        .write_all(spec.to_toml()?.as_bytes())
        .map_err(|e| Error::io(out_dir.join("corpus.toml"), e))?;
    drop(spec_file);
    stage.commit()?;
    Ok(corpus)
}

// ---------------------------------------------------------------- fitness

#[derive(Debug, Clone)]
pub struct FitnessStage {
    pub rca: RcaMatrix,
    pub binary: BinaryExportMatrix,
    pub result: FitnessResult,
    /// 1 = fittest, parallel to `result.countries`.
    pub ranks: Vec<usize>,
}

pub fn run_fitness(matrix: &TradeMatrix, cfg: &RunConfig) -> Result<FitnessStage> {
    let rca = rca_matrix(matrix)?;
    let binary = binarize(&rca, cfg.rca_threshold)?;
    let result = solve(&binary, &cfg.fitness)?;
    let ranks = fitness_rank(&result);
    Ok(FitnessStage {
        rca,
        binary,
        result,
        ranks,
    })
}

fn write_fitness(stage: &Staging, f: &FitnessStage, with_matrices: bool) -> Result<()> {
    let r = &f.result;
    if with_matrices {
        let mut header = vec!["country"];
        header.extend(f.rca.products.iter().map(String::as_str));
        stage.table(
            "rca.csv",
            &header,
            f.rca.countries.iter().enumerate().map(|(c, code)| {
                let mut row = vec![code.clone()];
                row.extend((0..f.rca.products.len()).map(|p| fmt_sig(f.rca.get(c, p))));
                row
            }),
        )?;
        stage.table(
            "binary_matrix.csv",
            &header,
            f.binary.countries().iter().enumerate().map(|(c, code)| {
                let mut row = vec![code.clone()];
                row.extend(f.binary.row(c).iter().map(|&b| u8::from(b).to_string()));
                row
            }),
        )?;
    }
    stage.table(
        "fitness.csv",
        &["country", "fitness", "rank"],
        r.countries
            .iter()
            .zip(&r.fitness)
            .zip(&f.ranks)
            .map(|((c, v), k)| vec![c.clone(), fmt_sig(*v), k.to_string()]),
    )?;
    stage.table(
        "complexity.csv",
        &["product", "complexity"],
        r.products
            .iter()
            .zip(&r.complexity)
            .map(|(p, v)| vec![p.clone(), fmt_sig(*v)]),
    )?;
    let last = r.trace.as_ref().and_then(|t| t.last());
    let mode = r
        .convergence_mode
        .map(|m| serde_json::to_value(m).expect("enum").as_str().unwrap_or("").to_string())
        .unwrap_or_else(|| "none".into());
    stage.table(
        "convergence.csv",
        &[
            "converged",
            "mode",
            "iterations",
            "max_rel_delta_fitness",
            "max_rel_delta_complexity",
        ],
        [vec![
            r.converged.to_string(),
            mode,
            r.iterations_run.to_string(),
            opt(last.map(|l| l.max_rel_delta_fitness)),
            opt(last.map(|l| l.max_rel_delta_complexity)),
        ]],
    )?;
    if let Some(trace) = &r.trace {
        stage.table(
            "fitness_trace.csv",
            &[
                "iteration",
                "max_rel_delta_fitness",
                "max_rel_delta_complexity",
                "country_rank_changes",
                "product_rank_changes",
            ],
            trace.iter().map(|t| {
                vec![
                    t.iteration.to_string(),
                    fmt_sig(t.max_rel_delta_fitness),
                    fmt_sig(t.max_rel_delta_complexity),
                    t.country_rank_changes.to_string(),
                    t.product_rank_changes.to_string(),
                ]
            }),
        )?;
    }
    Ok(())
}

pub fn cmd_fitness(cfg: &RunConfig) -> Result<FitnessStage> {
    cfg.validate()?;
    let matrix = read_matrix(&cfg.matrix_path())?;
    let f = run_fitness(&matrix, cfg)?;
    let stage = Staging::new(&cfg.out_dir, cfg.output_delimiter)?;
    write_fitness(&stage, &f, true)?;
    stage.commit()?;
    Ok(f)
}

// ---------------------------------------------------------------- per country

#[derive(Debug, Clone)]
pub struct CountryAnalysis {
    pub country: String,
    pub seed: u64,
    pub curve: RankingCurve,
    pub histogram: Histogram,
    pub full: LogNormalFit,
    pub left: LeftOfModeFit,
    pub gof: GofResult,
    pub shape: ShapeClassification,
}

/// Fits, tests and classifies one country's sample.
pub fn analyze_country(country: &str, sample: &[f64], cfg: &RunConfig) -> Result<CountryAnalysis> {
    let seed = country_seed(cfg.seed, country);
    let run = || -> Result<CountryAnalysis> {
        let curve = ranking_curve(sample, country)?;
        let histogram = log_histogram(sample, &cfg.bins)?;
        let full = fit_lognormal(sample)?;
        let left = refit_left_of_mode(sample, &full, &cfg.bins)?;
        let gof = gof_test(sample, &cfg.gof_config(mix_seed(seed, 1)))?;
        let classifier = ClassifierConfig {
            seed: mix_seed(seed, 2),
            bins: cfg.bins,
            ..cfg.classifier.clone()
        };
        let mut shape = classify_shape(sample, &full, &left, &gof, &classifier)?;
        // The classifier only tests the left wing for Pareto candidates; the
        // summary reports it for every country, from the same stream.
        if shape.left_cvm_pvalue.is_none() {
            shape.left_cvm_pvalue = Some(left_wing_cvm_pvalue(
                &left,
                classifier.left_replicates,
                classifier.seed,
            )?);
        }
        Ok(CountryAnalysis {
            country: country.to_string(),
            seed,
            curve,
            histogram,
            full,
            left,
            gof,
            shape,
        })
    };
    run().map_err(|e| e.for_country(country))
}

/// Countries with a nonzero row, in matrix order; all-zero rows are
/// returned separately.
fn active_samples(matrix: &TradeMatrix) -> Result<(Vec<(String, Vec<f64>)>, Vec<String>)> {
    let mut active = Vec::new();
    let mut skipped = Vec::new();
    for code in matrix.countries() {
        let sample = country_volume_sample(matrix, code)?;
        if sample.is_empty() {
            warn!("{code}: no exports, skipped");
            skipped.push(code.clone());
        } else {
            if unusual_sample_size(sample.len()) {
                info!("{code}: {} exported products is outside the usual range", sample.len());
            }
            active.push((code.clone(), sample));
        }
    }
    Ok((active, skipped))
}

fn analyze_all(samples: &[(String, Vec<f64>)], cfg: &RunConfig) -> Result<Vec<CountryAnalysis>> {
    let mut out = with_pool(cfg.jobs, || {
        samples
            .par_iter()
            .map(|(c, s)| analyze_country(c, s, cfg))
            .collect::<Result<Vec<_>>>()
    })??;
    out.sort_by(|a, b| a.country.cmp(&b.country));
    Ok(out)
}

fn write_gof_table(stage: &Staging, countries: &[CountryAnalysis]) -> Result<()> {
    stage.table(
        "gof.csv",
        &[
            "country",
            "n",
            "ks_stat",
            "ks_pvalue",
            "naive_ks_pvalue",
            "reject_ks",
            "naive_reject_ks",
            "cvm_stat",
            "cvm_pvalue",
            "reject_cvm",
            "naive_reject_cvm",
            "replicates",
            "seed",
        ],
        countries.iter().map(|c| {
            let g = &c.gof;
            vec![
                c.country.clone(),
                g.n.to_string(),
                fmt_sig(g.ks_stat),
                opt(g.ks_pvalue),
                fmt_sig(g.naive_ks_pvalue),
                g.reject_ks.to_string(),
                g.naive_reject_ks.to_string(),
                fmt_sig(g.cvm_stat),
                opt(g.cvm_pvalue),
                g.reject_cvm.to_string(),
                g.naive_reject_cvm.to_string(),
                g.bootstrap_replicates.to_string(),
                g.seed.to_string(),
            ]
        }),
    )
}

/// Per-country goodness-of-fit tests only.
pub fn cmd_gof(cfg: &RunConfig) -> Result<Vec<CountryAnalysis>> {
    cfg.validate()?;
    let matrix = read_matrix(&cfg.matrix_path())?;
    let (samples, _) = active_samples(&matrix)?;
    let countries = analyze_all(&samples, cfg)?;
    let stage = Staging::new(&cfg.out_dir, cfg.output_delimiter)?;
    write_gof_table(&stage, &countries)?;
    stage.commit()?;
    Ok(countries)
}

// ---------------------------------------------------------------- ranking

fn curves_of(samples: &[(String, Vec<f64>)]) -> Result<Vec<RankingCurve>> {
    samples.iter().map(|(c, s)| ranking_curve(s, c)).collect()
}

fn write_curves(stage: &Staging, curves: &[&RankingCurve]) -> Result<()> {
    for c in curves {
        stage.table(
            &format!("curves/{}.csv", c.country),
            &["rank", "volume"],
            c.volumes
                .iter()
                .enumerate()
                .map(|(r, v)| vec![(r + 1).to_string(), fmt_sig(*v)]),
        )?;
    }
    Ok(())
}

fn write_dominance(stage: &Staging, d: &DominanceSummary) -> Result<()> {
    stage.table(
        "dominance_pairs.csv",
        &["a", "b", "overlap", "frac_a_above", "frac_b_above", "crossings"],
        d.pairs.iter().map(|p| {
            vec![
                p.a.clone(),
                p.b.clone(),
                p.overlap.to_string(),
                fmt_sig(p.frac_a_above),
                fmt_sig(p.frac_b_above),
                p.crossings.to_string(),
            ]
        }),
    )?;
    let zero = d.pairs.iter().filter(|p| p.crossings == 0).count();
    stage.table(
        "dominance_global.csv",
        &["pairs", "zero_crossing_pairs", "zero_crossing_share"],
        [vec![
            d.pairs.len().to_string(),
            zero.to_string(),
            opt(d.zero_crossing_share),
        ]],
    )
}

pub struct RankStage {
    pub curves: Vec<RankingCurve>,
    pub dominance: DominanceSummary,
}

/// Ranking curves and pairwise dominance only.
pub fn cmd_rank(cfg: &RunConfig) -> Result<RankStage> {
    cfg.validate()?;
    let matrix = read_matrix(&cfg.matrix_path())?;
    let (samples, _) = active_samples(&matrix)?;
    let curves = curves_of(&samples)?;
    let dominance = with_pool(cfg.jobs, || dominance_matrix(&curves))?;
    let stage = Staging::new(&cfg.out_dir, cfg.output_delimiter)?;
    write_curves(&stage, &curves.iter().collect::<Vec<_>>())?;
    write_dominance(&stage, &dominance)?;
    stage.commit()?;
    Ok(RankStage { curves, dominance })
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone)]
pub struct Analysis {
    pub fitness: FitnessStage,
    /// Sorted by country code.
    pub countries: Vec<CountryAnalysis>,
    /// Countries with an all-zero row.
    pub skipped: Vec<String>,
    pub dominance: DominanceSummary,
    pub colorings: Vec<IndicatorColoring>,
    /// `None` with fewer than three analysed countries.
    pub profile: Option<GofProfile>,
}

impl Analysis {
    /// Fitness rank of an analysed country.
    pub fn fitness_rank_of(&self, country: &str) -> Option<usize> {
        let r = &self.fitness.result;
        r.countries
            .iter()
            .position(|c| c == country)
            .map(|i| self.fitness.ranks[i])
    }
}

/// All stages in memory, without touching the file system.
pub fn analyze(matrix: &TradeMatrix, indicators: Option<&IndicatorTable>, cfg: &RunConfig) -> Result<Analysis> {
    cfg.validate()?;
    let fitness = run_fitness(matrix, cfg)?;
    let (samples, skipped) = active_samples(matrix)?;
    let countries = analyze_all(&samples, cfg)?;
    let curves: Vec<RankingCurve> = countries.iter().map(|c| c.curve.clone()).collect();
    let dominance = with_pool(cfg.jobs, || dominance_matrix(&curves))?;
    let codes: Vec<String> = countries.iter().map(|c| c.country.clone()).collect();

    let mut colorings = vec![indicator_ranks(
        Indicator::Fitness,
        &fitness_values(&fitness.result, &codes),
    )?];
    if let Some(table) = indicators {
        for ind in [Indicator::Gdp, Indicator::GdpPc, Indicator::TotalExport] {
            let values = table_values(table, ind, &codes);
            if values.iter().any(|(_, v)| v.is_some()) {
                colorings.push(indicator_ranks(ind, &values)?);
            }
        }
    }

    let profile = if countries.len() >= 3 {
        let results: Vec<GofResult> = countries.iter().map(|c| c.gof.clone()).collect();
        let ranks: Vec<usize> = codes
            .iter()
            .map(|c| {
                let i = fitness.result.countries.iter().position(|x| x == c).expect("same matrix");
                fitness.ranks[i]
            })
            .collect();
        Some(gof_profile(&codes, &results, &ranks)?)
    } else {
        warn!("fewer than three countries, no GoF profile");
        None
    };
    Ok(Analysis {
        fitness,
        countries,
        skipped,
        dominance,
        colorings,
        profile,
    })
}

pub const SUMMARY_COLUMNS: [&str; 24] = [
    "country",
    "n",
    "mu",
    "sigma",
    "mode_log10",
    "empirical_mode_log10",
    "left_mu",
    "left_sigma",
    "left_n",
    "cut_log10",
    "class",
    "left_truncation_score",
    "right_excess_score",
    "left_cvm_pvalue",
    "ks_stat",
    "ks_pvalue",
    "cvm_stat",
    "cvm_pvalue",
    "reject_ks",
    "reject_cvm",
    "fitness",
    "fitness_rank",
    "seed",
    "unusual_size",
];

fn summary_row(a: &Analysis, c: &CountryAnalysis) -> Vec<String> {
    let r = &a.fitness.result;
    let fi = r.countries.iter().position(|x| x == &c.country);
    vec![
        c.country.clone(),
        c.full.n.to_string(),
        fmt_sig(c.full.mu),
        fmt_sig(c.full.sigma),
        fmt_sig(c.full.mode_log10),
        fmt_sig(c.histogram.mode_center()),
        fmt_sig(c.left.fit.mu),
        fmt_sig(c.left.fit.sigma),
        c.left.subsample.len().to_string(),
        fmt_sig(c.left.cut_log10),
        c.shape.class.to_string(),
        fmt_sig(c.shape.left_truncation_score),
        fmt_sig(c.shape.right_excess_score),
        opt(c.shape.left_cvm_pvalue),
        fmt_sig(c.gof.ks_stat),
        opt(c.gof.ks_pvalue),
        fmt_sig(c.gof.cvm_stat),
        opt(c.gof.cvm_pvalue),
        c.gof.reject_ks.to_string(),
        c.gof.reject_cvm.to_string(),
        opt(fi.map(|i| r.fitness[i])),
        fi.map(|i| a.fitness.ranks[i].to_string()).unwrap_or_default(),
        c.seed.to_string(),
        unusual_sample_size(c.full.n).to_string(),
    ]
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    matrix_file: String,
    countries: usize,
    products: usize,
    skipped_countries: &'a [String],
    country_seeds: Vec<(&'a str, u64)>,
    outputs: Vec<String>,
    wall_time_seconds: f64,
}

/// Stages every table of the bundle except the manifest.
fn write_analysis(stage: &Staging, a: &Analysis, cfg: &RunConfig) -> Result<()> {
    stage.table(
        SUMMARY_FILE,
        &SUMMARY_COLUMNS,
        a.countries.iter().map(|c| summary_row(a, c)),
    )?;
    write_fitness(stage, &a.fitness, true)?;
    write_gof_table(stage, &a.countries)?;
    write_curves(stage, &a.countries.iter().map(|c| &c.curve).collect::<Vec<_>>())?;
    if cfg.dump_histograms {
        for c in &a.countries {
            stage.table(
                &format!("histograms/{}.csv", c.country),
                &["bin_center_log10", "count"],
                c.histogram
                    .centers()
                    .into_iter()
                    .zip(&c.histogram.counts)
                    .map(|(x, n)| vec![fmt_sig(x), n.to_string()]),
            )?;
        }
    }
    write_dominance(stage, &a.dominance)?;
    stage.table(
        "coloring.csv",
        &["country", "indicator", "value", "rank", "color_index"],
        a.colorings.iter().flat_map(|col| {
            col.entries.iter().map(move |e| {
                vec![
                    e.country.clone(),
                    col.indicator.to_string(),
                    fmt_sig(e.value),
                    e.rank.to_string(),
                    fmt_sig(e.color_index),
                ]
            })
        }),
    )?;
    if let Some(p) = &a.profile {
        stage.table(
            "gof_profile.csv",
            &["fitness_rank", "country", "cvm_stat", "ks_pvalue"],
            p.rows.iter().map(|r| {
                vec![
                    r.fitness_rank.to_string(),
                    r.country.clone(),
                    fmt_sig(r.cvm_stat),
                    opt(r.ks_pvalue),
                ]
            }),
        )?;
        let fits = [("cvm_stat", Some(p.cvm_parabola)), ("ks_pvalue", p.ks_pvalue_parabola)];
        stage.table(
            "gof_profile_fit.csv",
            &["statistic", "a", "b", "c", "r_squared"],
            fits.iter().filter_map(|(name, f)| {
                f.map(|f| {
                    vec![
                        name.to_string(),
                        fmt_sig(f.a),
                        fmt_sig(f.b),
                        fmt_sig(f.c),
                        fmt_sig(f.r_squared),
                    ]
                })
            }),
        )?;
    }
    Ok(())
}

/// Lists staged files (relative, sorted) before they are committed.
fn staged_files(stage: &Staging) -> Result<Vec<String>> {
    fn walk(root: &Path, rel: &Path, out: &mut Vec<String>) -> Result<()> {
        let dir = root.join(rel);
        for e in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let e = e.map_err(|e| Error::io(&dir, e))?;
            let rel = rel.join(e.file_name());
            if e.path().is_dir() {
                walk(root, &rel, out)?;
            } else {
                out.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(stage.dir.path(), Path::new(""), &mut out)?;
    out.sort();
    Ok(out)
}

/// Reads the ingested matrix, runs every stage and writes the bundle.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<Analysis> {
    let started = Instant::now();
    cfg.validate()?;
    let matrix_path = cfg.matrix_path();
    let matrix = read_matrix(&matrix_path)?;
    let indicators = read_indicators(cfg, &matrix)?;
    let analysis = analyze(&matrix, indicators.as_ref(), cfg)?;

    let stage = Staging::new(&cfg.out_dir, cfg.output_delimiter)?;
    write_analysis(&stage, &analysis, cfg)?;
    let mut outputs = staged_files(&stage)?;
    outputs.push(MANIFEST_FILE.to_string());
    outputs.sort();
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "analyze",
        config: cfg,
        matrix_file: matrix_path.display().to_string(),
        countries: matrix.n_countries(),
        products: matrix.n_products(),
        skipped_countries: &analysis.skipped,
        country_seeds: analysis
            .countries
            .iter()
            .map(|c| (c.country.as_str(), c.seed))
            .collect(),
        outputs,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let mut w = stage.create(MANIFEST_FILE)?;
    serde_json::to_writer_pretty(&mut w, &manifest)
        .map_err(|e| Error::Config(format!("manifest: {e}")))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(cfg.out_dir.join(MANIFEST_FILE), e))?;
    drop(w);
    stage.commit()?;
    Ok(analysis)
}
