use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use propweight::cli_io::{emit_report, error_line, run_estimation_job, write_weights, EstimationJob, ReportFormat};
use propweight::simulation::{run_monte_carlo, write_report_csv, SimulationConfig};
use propweight::{DesignKind, Error, Method, Result};

#[derive(Parser)]
#[command(
    name = "propweight",
    version,
    about = "Pseudo-weighted estimation for nonprobability cohorts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    Poisson,
    Stratified,
    Iid,
}

impl From<DesignArg> for DesignKind {
    fn from(d: DesignArg) -> Self {
        match d {
            DesignArg::Poisson => DesignKind::PoissonSampling,
            DesignArg::Stratified => DesignKind::StratifiedClusterWR,
            DesignArg::Iid => DesignKind::IidApprox,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the population mean of an outcome observed in the cohort.
    Estimate {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        survey: PathBuf,
        #[arg(long)]
        outcome: String,
        /// Comma-separated covariate columns present in both files.
        #[arg(long, value_delimiter = ',', required = true)]
        covariates: Vec<String>,
        /// Survey design weight column.
        #[arg(long)]
        weight: String,
        #[arg(long)]
        strata: Option<String>,
        #[arg(long)]
        psu: Option<String>,
        #[arg(long, value_enum, default_value = "poisson")]
        design: DesignArg,
        /// Comma-separated methods (Naive, RDW, FDW, ALP, CLW, ALP.S).
        #[arg(long, value_delimiter = ',', default_value = "Naive,RDW,FDW,ALP,CLW,ALP.S")]
        methods: Vec<String>,
        /// Clamp estimated participation rates above one.
        #[arg(long)]
        truncate_pi: bool,
        /// Report path; `.json` selects JSON. Standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write every method's pseudo-weights to this CSV file.
        #[arg(long)]
        dump_weights: Option<PathBuf>,
    },
    /// Run the Monte Carlo study.
    Simulate {
        /// TOML configuration; desk-scale defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        population_size: Option<usize>,
    },
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate {
            cohort,
            survey,
            outcome,
            covariates,
            weight,
            strata,
            psu,
            design,
            methods,
            truncate_pi,
            out,
            dump_weights,
        } => {
            let methods = methods
                .iter()
                .map(|m| m.parse::<Method>())
                .collect::<Result<Vec<_>>>()?;
            let job = EstimationJob {
                cohort_path: cohort,
                survey_path: survey,
                outcome,
                covariates,
                weight,
                strata,
                psu,
                design: design.into(),
                methods,
                truncate_pi,
            };
            let report = run_estimation_job(&job)?;
            let format = out.as_deref().map_or(ReportFormat::Csv, ReportFormat::from_path);
            let mut w = open_out(out.as_deref())?;
            emit_report(&report, format, &mut w)?;
            w.flush()?;
            if let Some(p) = dump_weights {
                let mut w = open_out(Some(&p))?;
                write_weights(&report, &mut w)?;
                w.flush()?;
            }
            Ok(())
        }
        Command::Simulate {
            config,
            out,
            seed,
            replicates,
            population_size,
        } => {
            let mut cfg = match config {
                Some(p) => SimulationConfig::load(&p)?,
                None => SimulationConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(b) = replicates {
                cfg.replicates = b;
            }
            if let Some(n) = population_size {
                cfg.population_size = n;
            }
            let target = out.or_else(|| cfg.output.clone());
            let report = run_monte_carlo(&cfg)?;
            let mut w = open_out(target.as_deref())?;
            match target.as_deref().map(ReportFormat::from_path) {
                Some(ReportFormat::Json) => {
                    serde_json::to_writer_pretty(&mut w, &report).map_err(|e| Error::Io(e.to_string()))?;
                    writeln!(w)?;
                }
                _ => write_report_csv(&report, &mut w)?,
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
