//! `infoprov`: simulate information-provision experiments, estimate
//! their instrumental-variable specifications, and diagnose the weights
//! behind each estimate.
//!
//! Exit codes: 0 success; 2 config or file schema error; 3 invalid
//! input (dimensions, domains, degenerate evidence); 4 degenerate
//! estimation (rank deficiency, zero first stage, degenerate weights);
//! 5 I/O failure; 6 a `check` condition failed.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use infoprov::error::Error;
use infoprov::io::SchemaMode;

use config::{
    BinVariableSpec, ConditioningSpec, InteractionSpec, NormalizationSpec, SpecKind,
};
use pipeline::{DiagnoseArgs, EstimateArgs};

#[derive(Parser)]
#[command(
    name = "infoprov",
    about = "Simulate and estimate information-provision experiments",
    after_help = "Exit codes: 0 ok, 2 schema, 3 invalid input, 4 degenerate estimation, \
                  5 I/O, 6 check failed."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Realize a population from a config and write its data files.
    Simulate {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Directory for records.csv, panel.csv, and manifest.json.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit one specification from a records CSV.
    Estimate(EstimateCli),
    /// Weight diagnostics from a panel CSV.
    Diagnose(DiagnoseCli),
    /// Verify population regularity conditions for a config.
    Check {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Full pipeline: simulate, estimate every configured spec, write
    /// every configured diagnostics report, and a manifest.
    Run {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaArg {
    Simulated,
    External,
}

impl SchemaArg {
    fn to_mode(self) -> SchemaMode {
        match self {
            SchemaArg::Simulated => SchemaMode::Simulated,
            SchemaArg::External => SchemaMode::External,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SpecArg {
    Passive,
    Active,
    Conditional,
}

impl SpecArg {
    fn to_kind(self) -> SpecKind {
        match self {
            SpecArg::Passive => SpecKind::Passive,
            SpecArg::Active => SpecKind::Active,
            SpecArg::Conditional => SpecKind::Conditional,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditioningArg {
    PriorFeature,
    SignedGap,
    Covariate,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    Raw,
    PercentOfSignal,
}

impl NormalizationArg {
    fn to_spec(self) -> NormalizationSpec {
        match self {
            NormalizationArg::Raw => NormalizationSpec::Raw,
            NormalizationArg::PercentOfSignal => NormalizationSpec::PercentOfSignal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BinVariableArg {
    Gap,
    PriorFeature,
    Signal,
}

impl BinVariableArg {
    fn to_spec(self) -> BinVariableSpec {
        match self {
            BinVariableArg::Gap => BinVariableSpec::Gap,
            BinVariableArg::PriorFeature => BinVariableSpec::PriorFeature,
            BinVariableArg::Signal => BinVariableSpec::Signal,
        }
    }
}

#[derive(Args)]
struct EstimateCli {
    /// Records CSV to estimate from.
    #[arg(long)]
    data: PathBuf,
    /// Column contract of the data file.
    #[arg(long, value_enum, default_value = "simulated")]
    schema: SchemaArg,
    /// Which specification to fit.
    #[arg(long, value_enum)]
    spec: SpecArg,
    /// Interaction for passive specs: sign, gap, one-gap, one-prior, or
    /// one-signal-prior.
    #[arg(long)]
    interaction: Option<String>,
    /// Conditioning variable for conditional specs.
    #[arg(long, value_enum)]
    conditioning: Option<ConditioningArg>,
    /// Covariate column index when conditioning on a covariate.
    #[arg(long)]
    covariate_index: Option<usize>,
    /// Fit in logs so the coefficient is an elasticity.
    #[arg(long)]
    elasticity: bool,
    /// Gap normalization for passive specs.
    #[arg(long, value_enum, default_value = "raw")]
    normalization: NormalizationArg,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseCli {
    /// Panel CSV holding both counterfactual arms per agent.
    #[arg(long)]
    panel: PathBuf,
    /// Records CSV for sample-side binned diagnostics.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Column contract of the records file.
    #[arg(long, value_enum, default_value = "simulated")]
    schema: SchemaArg,
    /// Interaction to characterize; omit for an active-design panel.
    #[arg(long)]
    interaction: Option<String>,
    /// Number of quantile bins for the binned report.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Variable to bin on.
    #[arg(long, value_enum, default_value = "gap")]
    variable: BinVariableArg,
    /// Gap normalization.
    #[arg(long, value_enum, default_value = "raw")]
    normalization: NormalizationArg,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the binned results as a plot-ready CSV.
    #[arg(long)]
    emit_plot_data: Option<PathBuf>,
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Schema(_) => 2,
        Error::Invalid(_)
        | Error::Dimension { .. }
        | Error::Domain(_)
        | Error::DegenerateEvidence(_) => 3,
        Error::RankDeficient { .. } | Error::ZeroFirstStage(_) | Error::DegenerateWeights(_) => 4,
        Error::Io(_) | Error::Csv(_) => 5,
        Error::Agent { source, .. } => exit_code(source),
    }
}

fn conditioning_spec(
    arg: Option<ConditioningArg>,
    covariate_index: Option<usize>,
) -> Result<Option<ConditioningSpec>, Error> {
    match arg {
        None => Ok(None),
        Some(ConditioningArg::PriorFeature) => Ok(Some(ConditioningSpec::PriorFeature)),
        Some(ConditioningArg::SignedGap) => Ok(Some(ConditioningSpec::SignedGap)),
        Some(ConditioningArg::Covariate) => {
            let index = covariate_index.ok_or_else(|| {
                Error::Schema("conditioning on a covariate needs --covariate-index".into())
            })?;
            Ok(Some(ConditioningSpec::Covariate { index }))
        }
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate { config, out_dir } => {
            pipeline::cmd_simulate(&config, &out_dir)?;
            Ok(0)
        }
        Command::Estimate(args) => {
            let interaction = args
                .interaction
                .as_deref()
                .map(InteractionSpec::parse)
                .transpose()?;
            let estimate = EstimateArgs {
                data: args.data,
                schema: args.schema.to_mode(),
                spec: args.spec.to_kind(),
                interaction,
                conditioning: conditioning_spec(args.conditioning, args.covariate_index)?,
                elasticity: args.elasticity,
                normalization: args.normalization.to_spec(),
                out: args.out,
            };
            pipeline::cmd_estimate(&estimate)?;
            Ok(0)
        }
        Command::Diagnose(args) => {
            let interaction = args
                .interaction
                .as_deref()
                .map(InteractionSpec::parse)
                .transpose()?;
            let diagnose = DiagnoseArgs {
                panel: args.panel,
                records: args.records,
                schema: args.schema.to_mode(),
                interaction,
                bins: args.bins,
                variable: args.variable.to_spec(),
                normalization: args.normalization.to_spec(),
                out: args.out,
                plot_data: args.emit_plot_data,
            };
            pipeline::cmd_diagnose(&diagnose)?;
            Ok(0)
        }
        Command::Check { config } => {
            let report = pipeline::cmd_check(&config)?;
            Ok(if report.all_hold { 0 } else { 6 })
        }
        Command::Run { config, out_dir } => {
            pipeline::cmd_run(&config, out_dir.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
