//! `featuregrid` command line.
//!
//! Exit codes: 0 on success, 1 for domain errors (bad parameters, unreadable
//! or malformed inputs), 2 for usage errors. Data goes to stdout,
//! diagnostics to stderr.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::archgen::{self, allocate, is_valid, realize, RealizedKind};
use crate::error::Error;
use crate::expio::{self, ArchRef, Dataset};
use crate::gridsearch::{self, summarize};
use crate::schedule::{self, ScheduleParams};
use crate::skewnorm::{bin_masses_with, BinConvention, SkewNormalParams, DEFAULT_SUBDIVISIONS};

pub const SUBDIVISIONS_ENV: &str = "FEATUREGRID_SUBDIVISIONS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "featuregrid",
    version,
    about = "Skew-normal feature redistribution for VGG-style networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bins {
    LeftClosed,
    Centered,
}

impl From<Bins> for BinConvention {
    fn from(b: Bins) -> Self {
        match b {
            Bins::LeftClosed => BinConvention::LeftClosed,
            Bins::Centered => BinConvention::Centered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Mnist,
    #[value(name = "fashion_mnist", alias = "fashion-mnist")]
    FashionMnist,
    Cifar10,
}

impl From<DatasetArg> for Dataset {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Mnist => Dataset::Mnist,
            DatasetArg::FashionMnist => Dataset::FashionMnist,
            DatasetArg::Cifar10 => Dataset::Cifar10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeMode {
    BestPerXi,
    Scatter,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate the (xi, omega, alpha) grid, print counts and write
    /// manifests plus summary.csv.
    Grid {
        #[arg(long, default_value_t = 16, value_parser = parse_layers)]
        layers: usize,
        /// Total feature budget (defaults to the template's VGG widths).
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = archgen::DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = DatasetArg::Cifar10)]
        dataset: DatasetArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Bins::LeftClosed)]
        bins: Bins,
    },
    /// Report one architecture: per-layer masses, widths, shapes and costs.
    Arch {
        #[arg(long, allow_hyphen_values = true)]
        xi: f64,
        #[arg(long, allow_hyphen_values = true)]
        omega: f64,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 16, value_parser = parse_layers)]
        layers: usize,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = archgen::DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[arg(long, value_enum, default_value_t = Bins::LeftClosed)]
        bins: Bins,
    },
    /// Aggregate a results CSV against a directory of manifests.
    Analyze {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        specs: PathBuf,
        #[arg(long, value_enum)]
        mode: AnalyzeMode,
    },
    /// Print the warm-restart learning rate per epoch.
    Schedule {
        #[arg(long, default_value_t = 150, value_parser = clap::value_parser!(u32).range(1..))]
        epochs: u32,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        first_cycle: u32,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
        cycle_mult: u32,
    },
}

fn parse_layers(s: &str) -> std::result::Result<usize, String> {
    match s {
        "16" => Ok(16),
        "10" => Ok(10),
        _ => Err(format!("layers must be 16 or 10, got `{s}`")),
    }
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            };
            let rendered = err.render().to_string();
            if err.use_stderr() {
                let _ = write!(stderr, "{rendered}");
            } else {
                let _ = write!(stdout, "{rendered}");
            }
            return code;
        }
    };
    let outcome = subdivisions_from_env()
        .and_then(|subdivisions| dispatch(cli.command, subdivisions, stdout, stderr));
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Domain(err)) if is_broken_pipe(&err) => EXIT_OK,
        Err(Failure::Domain(err)) => {
            let _ = writeln!(stderr, "error: {err}");
            EXIT_DOMAIN
        }
    }
}

// downstream closed the pipe, e.g. `| head`
fn is_broken_pipe(err: &Error) -> bool {
    let io = match err {
        Error::Io { source, .. } => Some(source),
        Error::Csv(e) => match e.kind() {
            csv::ErrorKind::Io(source) => Some(source),
            _ => None,
        },
        _ => None,
    };
    io.is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

fn subdivisions_from_env() -> std::result::Result<usize, Failure> {
    match std::env::var(SUBDIVISIONS_ENV) {
        Err(_) => Ok(DEFAULT_SUBDIVISIONS),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::Usage(format!(
                "{SUBDIVISIONS_ENV} must be a positive integer, got `{raw}`"
            ))),
        },
    }
}

fn check_tolerance(tolerance: f64) -> CliResult {
    if tolerance > 0.0 && tolerance < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "--tolerance must lie in (0, 1), got {tolerance}"
        )))
    }
}

fn resolve_budget(
    template: &archgen::NetworkTemplate,
    budget: Option<u64>,
) -> std::result::Result<u64, Failure> {
    match budget {
        Some(b) if b < template.slot_count() as u64 => Err(Failure::Usage(format!(
            "--budget {b} is smaller than the {} layers",
            template.slot_count()
        ))),
        Some(b) => Ok(b),
        None => Ok(archgen::vgg_budget(template)?),
    }
}

fn io_err(e: std::io::Error) -> Failure {
    Failure::Domain(Error::io("<stdout>", e))
}

fn dispatch(
    command: Command,
    subdivisions: usize,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult {
    match command {
        Command::Grid {
            layers,
            budget,
            tolerance,
            out,
            dataset,
            seed,
            bins,
        } => {
            check_tolerance(tolerance)?;
            let template = archgen::template_for_layers(layers)?;
            let budget = resolve_budget(&template, budget)?;
            let mut grid = gridsearch::grid_for_template(&template)?;
            grid.budget = budget;
            grid.tolerance = tolerance;
            grid.subdivisions = subdivisions;
            grid.bins = bins.into();
            cmd_grid(&grid, out, dataset.into(), seed, stdout, stderr)
        }
        Command::Arch {
            xi,
            omega,
            alpha,
            layers,
            budget,
            tolerance,
            bins,
        } => {
            check_tolerance(tolerance)?;
            let template = archgen::template_for_layers(layers)?;
            let budget = resolve_budget(&template, budget)?;
            let params = SkewNormalParams::new(xi, omega, alpha)?;
            cmd_arch(
                &template,
                &params,
                budget,
                tolerance,
                subdivisions,
                bins.into(),
                stdout,
            )
        }
        Command::Analyze {
            results,
            specs,
            mode,
        } => cmd_analyze(&results, &specs, mode, stdout),
        Command::Schedule {
            epochs,
            first_cycle,
            cycle_mult,
        } => {
            let params = ScheduleParams {
                first_cycle,
                cycle_mult,
                ..ScheduleParams::warm_restarts(epochs)
            };
            cmd_schedule(&params, stdout)
        }
    }
}

fn cmd_grid(
    grid: &gridsearch::GridSpec,
    out: Option<PathBuf>,
    dataset: Dataset,
    seed: u64,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult {
    let specs = gridsearch::enumerate(grid)?;
    writeln!(stdout, "candidates: {}", grid.candidate_count()).map_err(io_err)?;
    writeln!(stdout, "valid: {}", specs.len()).map_err(io_err)?;
    if specs.is_empty() {
        for class in archgen::ShapeClass::ALL {
            writeln!(stdout, "{class}: 0").map_err(io_err)?;
        }
        if out.is_some() {
            let _ = writeln!(stderr, "no valid architectures; nothing written");
        }
        return Ok(());
    }
    let summary = summarize(&specs)?;
    for (class, n) in summary.shape_tally() {
        writeln!(stdout, "{class}: {n}").map_err(io_err)?;
    }
    if let Some(dir) = out {
        let written = expio::write_manifests_seeded(&specs, dataset, seed, &dir)?;
        let mut csv = Vec::new();
        summary.write_csv(&mut csv)?;
        expio::write_atomic(&dir.join("summary.csv"), &csv)?;
        let _ = writeln!(
            stderr,
            "wrote {written} manifests and summary.csv to {}",
            dir.display()
        );
    }
    Ok(())
}

fn cmd_arch(
    template: &archgen::NetworkTemplate,
    params: &SkewNormalParams,
    budget: u64,
    tolerance: f64,
    subdivisions: usize,
    bins: BinConvention,
    stdout: &mut dyn Write,
) -> CliResult {
    let masses = bin_masses_with(params, template.slot_count(), subdivisions, bins)?;
    let allocation = allocate(&masses, budget)?;
    let spec = realize(template, params, &allocation)?;
    let valid = is_valid(&allocation, tolerance);

    let w = stdout;
    writeln!(w, "arch_id: {}", spec.arch_id).map_err(io_err)?;
    writeln!(
        w,
        "params: xi={} omega={} alpha={}",
        params.xi, params.omega, params.alpha
    )
    .map_err(io_err)?;
    writeln!(
        w,
        "template: {} budget: {budget} bins: {} subdivisions: {subdivisions}",
        template.name,
        bins.name()
    )
    .map_err(io_err)?;
    writeln!(w, "captured_mass: {:.9}", allocation.captured_mass).map_err(io_err)?;
    writeln!(w, "collapsed_layers: {}", allocation.collapsed_layers).map_err(io_err)?;
    writeln!(w, "valid: {valid} (tolerance {tolerance})").map_err(io_err)?;
    writeln!(w, "shape: {}", spec.shape_class()).map_err(io_err)?;
    writeln!(w, "total_features: {}", allocation.total()).map_err(io_err)?;
    writeln!(w, "parameters: {}", spec.parameter_count).map_err(io_err)?;
    writeln!(w, "flops: {}", spec.flop_count).map_err(io_err)?;
    writeln!(w, "layer,kind,mass,features,input,output,parameters,flops").map_err(io_err)?;
    for (i, layer) in spec.layers.iter().enumerate() {
        let kind = match layer.kind {
            RealizedKind::Conv3x3 if layer.pooled => "conv3x3+pool",
            RealizedKind::Conv3x3 => "conv3x3",
            RealizedKind::FullyConnected => "fc",
            RealizedKind::Classifier => "classifier",
        };
        let mass = masses
            .masses
            .get(i)
            .map_or_else(String::new, |m| format!("{m:.9}"));
        let features = allocation
            .counts
            .get(i)
            .copied()
            .unwrap_or(template.class_count);
        writeln!(
            w,
            "{},{kind},{mass},{features},{},{},{},{}",
            i + 1,
            layer.input,
            layer.output,
            layer.parameters,
            layer.flops
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn cmd_analyze(
    results: &std::path::Path,
    specs: &std::path::Path,
    mode: AnalyzeMode,
    stdout: &mut dyn Write,
) -> CliResult {
    let results = expio::ingest_results(results)?;
    let manifests = expio::read_manifests(specs)?;
    let archs: Vec<ArchRef> = manifests.iter().map(ArchRef::from).collect();
    match mode {
        AnalyzeMode::Scatter => {
            let rows = expio::scatter_data(&results, &archs)?;
            expio::write_scatter_csv(&rows, stdout)?;
        }
        AnalyzeMode::BestPerXi => {
            let winners = expio::best_per_xi(&results, &archs)?;
            expio::write_best_per_xi_csv(&winners, stdout)?;
        }
    }
    Ok(())
}

fn cmd_schedule(params: &ScheduleParams, stdout: &mut dyn Write) -> CliResult {
    let table = schedule::epoch_table(params)?;
    writeln!(stdout, "epoch,lr_start,lr_end,cycle_end").map_err(io_err)?;
    for row in table {
        writeln!(
            stdout,
            "{},{:e},{:e},{}",
            row.epoch, row.lr_start, row.lr_end, row.cycle_end
        )
        .map_err(io_err)?;
    }
    Ok(())
}
