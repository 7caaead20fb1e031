use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tradeshape::pipeline::{self, Outcome, RunConfig};
use tradeshape::presets;
use tradeshape::synth::SynthCorpusSpec;
use tradeshape::{Error, Result};

#[derive(Parser)]
#[command(name = "tradeshape", version, about = "Export-volume distribution analysis")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    ThreeClass,
    Ladder,
    PaperScale,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and aggregate a trade file into the canonical matrix.
    Ingest { trade_file: Option<PathBuf> },
    /// Full pipeline on an ingested matrix.
    Analyze {
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        indicators: Option<PathBuf>,
        /// Bootstrap replicates (0 = naive thresholds).
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        histograms: bool,
    },
    /// Generate a synthetic trade file and its labels.
    Synth {
        /// Corpus spec in TOML.
        spec: Option<PathBuf>,
        #[arg(long, value_enum, conflicts_with = "spec")]
        preset: Option<Preset>,
    },
    /// Fitness and complexity only.
    Fitness {
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Per-country goodness-of-fit tests only.
    Gof {
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Ranking curves and crossing counts only.
    Rank {
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    if let Some(d) = cli.out_dir {
        cfg.out_dir = d;
    }
    let set_matrix = |cfg: &mut RunConfig, m: Option<PathBuf>| {
        if m.is_some() {
            cfg.matrix_file = m;
        }
    };
    match cli.command {
        Command::Ingest { trade_file } => {
            if trade_file.is_some() {
                cfg.trade_file = trade_file;
            }
            let report = pipeline::cmd_ingest(&cfg)?;
            for r in &report.rejects {
                eprintln!("line {}: {}", r.line, r.reason);
            }
            eprintln!(
                "{} countries x {} products, {} rejected rows",
                report.matrix.n_countries(),
                report.matrix.n_products(),
                report.rejects.len()
            );
            Ok(report.outcome)
        }
        Command::Analyze {
            matrix,
            indicators,
            replicates,
            histograms,
        } => {
            set_matrix(&mut cfg, matrix);
            if indicators.is_some() {
                cfg.indicator_file = indicators;
            }
            if let Some(b) = replicates {
                cfg.gof.replicates = b;
            }
            cfg.dump_histograms |= histograms;
            let a = pipeline::cmd_analyze(&cfg)?;
            eprintln!("analysed {} countries into {}", a.countries.len(), cfg.out_dir.display());
            Ok(Outcome::Ok)
        }
        Command::Synth { spec, preset } => {
            let spec = match (spec, preset) {
                (Some(p), _) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p, source: e })?;
                    let mut s = SynthCorpusSpec::from_toml(&text)?;
                    if let Some(seed) = cli.seed {
                        s.seed = seed;
                    }
                    s
                }
                (None, Some(p)) => match p {
                    Preset::ThreeClass => presets::three_class_corpus(cfg.seed),
                    Preset::Ladder => presets::capability_ladder(20, cfg.seed),
                    Preset::PaperScale => presets::paper_scale_corpus(cfg.seed),
                },
                (None, None) => return Err(Error::Config("give a spec file or --preset".into())),
            };
            let c = pipeline::cmd_synth(&spec, &cfg.out_dir)?;
            eprintln!(
                "{} countries x {} products written to {}",
                c.matrix.n_countries(),
                c.matrix.n_products(),
                cfg.out_dir.display()
            );
            Ok(Outcome::Ok)
        }
        Command::Fitness { matrix } => {
            set_matrix(&mut cfg, matrix);
            let f = pipeline::cmd_fitness(&cfg)?;
            eprintln!(
                "converged={} after {} iterations",
                f.result.converged, f.result.iterations_run
            );
            Ok(Outcome::Ok)
        }
        Command::Gof { matrix, replicates } => {
            set_matrix(&mut cfg, matrix);
            if let Some(b) = replicates {
                cfg.gof.replicates = b;
            }
            pipeline::cmd_gof(&cfg)?;
            Ok(Outcome::Ok)
        }
        Command::Rank { matrix } => {
            set_matrix(&mut cfg, matrix);
            let r = pipeline::cmd_rank(&cfg)?;
            if let Some(s) = r.dominance.zero_crossing_share {
                eprintln!("zero-crossing share {s:.3}");
            }
            Ok(Outcome::Ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                if !msg.ends_with(&s.to_string()) {
                    msg.push_str(&format!(": {s}"));
                }
                src = s.source();
            }
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
