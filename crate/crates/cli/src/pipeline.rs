//! Command implementations: simulate a population, estimate
//! specifications from record files, diagnose weights from panel files,
//! check population regularity, and run the full pipeline into an
//! output directory.
//!
//! Every artifact is written deterministically: records and panels go
//! through the lossless CSV writers, JSON reports are pretty-printed
//! with sorted-order struct fields and a trailing newline, and nothing
//! embeds a timestamp, so a rerun with the same config is byte
//! identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use infoprov::beliefs::{
    mlr_check, signal_monotonicity_check, Belief, Feature, MlrReport, MonotonicityReport,
};
use infoprov::diagnostics::{
    bin_characterization, panel_estimand_active, panel_estimand_passive,
    population_weights_active, population_weights_passive, verify_active_weight_characterization,
    verify_weight_characterization, BinReport, CharacterizationReport, WeightReport,
};
use infoprov::error::{Error, Result};
use infoprov::estimators::{
    active_tsls, conditional_tsls, elasticity_tsls, passive_tsls, ElasticityDesign,
    PassiveOptions,
};
use infoprov::experiment::{
    neutrality_check, simulate, stability_check, Agent, CounterfactualPanel, ExperimentRecord,
    Perception, Simulation,
};
use infoprov::io::{
    read_panel, read_records, write_panel, write_records, SchemaMode,
};
use infoprov::linalg::TslsFit;

use crate::config::{
    build, BinVariableSpec, ConditioningSpec, DiagnosticsSpec, GroupSpec,
    InteractionSpec, NormalizationSpec, PriorSpec, RunConfig, SpecEntry, SpecKind,
};

/// Disagreement tolerance for closed-form weight verification.
const CHARACTERIZATION_TOL: f64 = 1e-8;
/// Drift tolerance for stability and neutrality checks.
const DRIFT_TOL: f64 = 1e-9;
/// Offsets around the prior feature for the two-signal probe on
/// Gaussian-prior agents.
const PROBE_OFFSETS: (f64, f64) = (-1.0, 1.0);

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invalid(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invalid(format!("serializing report: {e}")))?;
    println!("{text}");
    Ok(())
}

/// One estimated specification, self-describing enough to read without
/// the config that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub spec: String,
    pub interaction: Option<String>,
    pub conditioning: Option<String>,
    pub elasticity: bool,
    pub normalization: String,
    pub fit: TslsFit,
}

/// Population-side weight diagnostics for one interaction (or for the
/// active design when `interaction` is `"active"`).
#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseReport {
    pub interaction: String,
    pub estimand: f64,
    pub weights: WeightReport,
    pub characterization: CharacterizationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<BinReport>,
}

/// Per-group regularity results from `check`.
#[derive(Debug, Clone, Serialize)]
pub struct GroupCheck {
    pub group: usize,
    /// Grid groups: full signal-grid sweep of the update rule.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monotonicity: Option<MonotonicityReport>,
    /// Gaussian groups: per-agent two-signal probe around the prior.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeReport>,
    /// Grid groups: likelihood-ratio ordering of the signal family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlr: Option<MlrReport>,
}

/// Aggregate of the two-signal monotonicity probe across one group.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub holds: bool,
    /// Largest feature decrease from the low to the high probe signal.
    pub worst_drop: f64,
    pub violating_ids: Vec<usize>,
}

/// Output of `check`: population regularity conditions, one verdict.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub stability: infoprov::experiment::StabilityReport,
    pub neutrality: infoprov::experiment::NeutralityReport,
    pub groups: Vec<GroupCheck>,
    pub all_hold: bool,
}

/// Run provenance: enough to confirm two output directories came from
/// the same config, without embedding anything time dependent.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub seed: u64,
    pub feature: String,
    pub artifacts: Vec<String>,
}

fn config_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn simulate_config(config: &RunConfig, base_dir: &Path) -> Result<Simulation> {
    let built = build(config, base_dir)?;
    simulate(&built.agents, &built.design, &built.feature)
}

fn base_dir_of(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// `simulate`: realize the population and write `records.csv`,
/// `panel.csv`, and `manifest.json` into `out_dir`.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let sim = simulate_config(&config, &base_dir_of(config_path))?;
    fs::create_dir_all(out_dir)?;
    write_records(out_dir.join("records.csv"), &sim.records)?;
    write_panel(out_dir.join("panel.csv"), &sim.panel)?;
    let manifest = Manifest {
        config_sha256: config_digest(config_path)?,
        seed: config.seed,
        feature: config.feature.label().into(),
        artifacts: vec!["panel.csv".into(), "records.csv".into()],
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    println!(
        "wrote {} records and {} panel rows to {}",
        sim.records.len(),
        sim.panel.rows.len(),
        out_dir.display()
    );
    Ok(())
}

/// Parameters of one `estimate` invocation, assembled by the CLI layer.
pub struct EstimateArgs {
    pub data: PathBuf,
    pub schema: SchemaMode,
    pub spec: SpecKind,
    pub interaction: Option<InteractionSpec>,
    pub conditioning: Option<ConditioningSpec>,
    pub elasticity: bool,
    pub normalization: NormalizationSpec,
    pub out: Option<PathBuf>,
}

fn estimate_entry(records: &[ExperimentRecord], entry: &SpecEntry) -> Result<EstimateReport> {
    let fit = match entry.spec {
        SpecKind::Passive => {
            let kind = entry
                .interaction
                .ok_or_else(|| Error::Schema("passive specs need an interaction".into()))?;
            let mut options = PassiveOptions::new(kind.to_kind());
            options.gap_normalization = entry.normalization.to_normalization();
            options.misuse_policy = entry.misuse.to_policy();
            if entry.elasticity {
                elasticity_tsls(records, &ElasticityDesign::Passive(options))?
            } else {
                passive_tsls(records, &options)?
            }
        }
        SpecKind::Active => {
            if entry.elasticity {
                elasticity_tsls(records, &ElasticityDesign::Active)?
            } else {
                active_tsls(records)?
            }
        }
        SpecKind::Conditional => {
            let conditioning = entry
                .conditioning
                .ok_or_else(|| Error::Schema("conditional specs need a conditioning variable".into()))?;
            conditional_tsls(records, conditioning.to_var())?
        }
    };
    Ok(EstimateReport {
        spec: match entry.spec {
            SpecKind::Passive => "passive".into(),
            SpecKind::Active => "active".into(),
            SpecKind::Conditional => "conditional".into(),
        },
        interaction: entry.interaction.map(|k| k.label().into()),
        conditioning: entry.conditioning.map(|c| c.label()),
        elasticity: entry.elasticity,
        normalization: match entry.normalization {
            NormalizationSpec::Raw => "raw".into(),
            NormalizationSpec::PercentOfSignal => "percent_of_signal".into(),
        },
        fit,
    })
}

/// `estimate`: fit one specification from a records CSV and emit the
/// report as JSON (to `out` or stdout).
pub fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let records = read_records(&args.data, args.schema)?;
    let entry = SpecEntry {
        spec: args.spec,
        interaction: args.interaction,
        conditioning: args.conditioning,
        elasticity: args.elasticity,
        normalization: args.normalization,
        misuse: Default::default(),
    };
    let report = estimate_entry(&records, &entry)?;
    match &args.out {
        Some(path) => {
            write_json(path, &report)?;
            println!("wrote {}", path.display());
        }
        None => print_json(&report)?,
    }
    Ok(())
}

/// Parameters of one `diagnose` invocation.
pub struct DiagnoseArgs {
    pub panel: PathBuf,
    pub records: Option<PathBuf>,
    pub schema: SchemaMode,
    pub interaction: Option<InteractionSpec>,
    pub bins: usize,
    pub variable: BinVariableSpec,
    pub normalization: NormalizationSpec,
    pub out: Option<PathBuf>,
    pub plot_data: Option<PathBuf>,
}

fn diagnose_panel(
    panel: &CounterfactualPanel,
    records: Option<&[ExperimentRecord]>,
    spec: &DiagnosticsSpec,
) -> Result<DiagnoseReport> {
    let normalization = spec.normalization.to_normalization();
    let (estimand, weights, characterization) = match spec.interaction {
        Some(kind) => (
            panel_estimand_passive(panel, kind.to_kind(), normalization)?,
            population_weights_passive(panel, kind.to_kind(), normalization)?,
            verify_weight_characterization(
                panel,
                kind.to_kind(),
                normalization,
                CHARACTERIZATION_TOL,
            )?,
        ),
        None => (
            panel_estimand_active(panel)?,
            population_weights_active(panel)?,
            verify_active_weight_characterization(panel, CHARACTERIZATION_TOL)?,
        ),
    };
    let bins = match (records, spec.interaction) {
        (Some(records), Some(kind)) => {
            let mut options = PassiveOptions::new(kind.to_kind());
            options.gap_normalization = normalization;
            Some(bin_characterization(
                records,
                &options,
                spec.variable.to_variable(),
                spec.bins,
            )?)
        }
        _ => None,
    };
    Ok(DiagnoseReport {
        interaction: spec.slug(),
        estimand,
        weights,
        characterization,
        bins,
    })
}

fn write_plot_data(path: &Path, report: &BinReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["lo", "hi", "midpoint", "count", "share", "mean_weight", "contribution"])?;
    for bin in &report.bins {
        let midpoint = 0.5 * (bin.lo + bin.hi);
        writer.write_record([
            format!("{}", bin.lo),
            format!("{}", bin.hi),
            format!("{midpoint}"),
            format!("{}", bin.count),
            format!("{}", bin.share),
            format!("{}", bin.mean_weight),
            format!("{}", bin.contribution),
        ])?;
    }
    writer.flush().map_err(|e| Error::Io(e))?;
    Ok(())
}

/// `diagnose`: weight diagnostics from a panel CSV, with optional
/// sample-side binning when a records CSV is supplied.
pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let panel = read_panel(&args.panel)?;
    let records = match &args.records {
        Some(path) => Some(read_records(path, args.schema)?),
        None => None,
    };
    let spec = DiagnosticsSpec {
        interaction: args.interaction,
        bins: args.bins,
        variable: args.variable,
        normalization: args.normalization,
    };
    let report = diagnose_panel(&panel, records.as_deref(), &spec)?;
    if let Some(path) = &args.plot_data {
        match &report.bins {
            Some(bins) => {
                write_plot_data(path, bins)?;
                println!("wrote {}", path.display());
            }
            None => {
                return Err(Error::Schema(
                    "plot data needs binned results; pass --records with a passive interaction"
                        .into(),
                ))
            }
        }
    }
    match &args.out {
        Some(path) => {
            write_json(path, &report)?;
            println!("wrote {}", path.display());
        }
        None => print_json(&report)?,
    }
    Ok(())
}

fn probe_group(agents: &[Agent], feature: &Feature) -> Result<ProbeReport> {
    let mut worst_drop = 0.0_f64;
    let mut violating_ids = Vec::new();
    for agent in agents {
        let anchor = agent.prior.feature(feature)?;
        let low = agent
            .posterior(Some(anchor + PROBE_OFFSETS.0))?
            .feature(feature)?;
        let high = agent
            .posterior(Some(anchor + PROBE_OFFSETS.1))?
            .feature(feature)?;
        let drop = low - high;
        if drop > DRIFT_TOL {
            violating_ids.push(agent.id);
            worst_drop = worst_drop.max(drop);
        }
    }
    Ok(ProbeReport {
        holds: violating_ids.is_empty(),
        worst_drop,
        violating_ids,
    })
}

fn check_group(
    index: usize,
    spec: &GroupSpec,
    agents: &[Agent],
    feature: &Feature,
) -> Result<GroupCheck> {
    match &spec.prior {
        PriorSpec::Grid { .. } => {
            let agent = agents.first().ok_or_else(|| {
                Error::Invalid(format!("group {index} produced no agents"))
            })?;
            let (prior, family) = match (&agent.prior, &agent.perception) {
                (Belief::Grid(prior), Perception::Family { family, .. }) => (prior, family),
                _ => {
                    return Err(Error::Invalid(format!(
                        "group {index} declares a grid prior but built something else"
                    )))
                }
            };
            let monotonicity =
                signal_monotonicity_check(prior, &spec.update.to_rule(), family, feature)?;
            let mlr = mlr_check(family, 8);
            Ok(GroupCheck {
                group: index,
                monotonicity: Some(monotonicity),
                probe: None,
                mlr: Some(mlr),
            })
        }
        PriorSpec::Gaussian { .. } => Ok(GroupCheck {
            group: index,
            monotonicity: None,
            probe: Some(probe_group(agents, feature)?),
            mlr: None,
        }),
    }
}

fn check_config(config: &RunConfig, base_dir: &Path) -> Result<CheckReport> {
    let built = build(config, base_dir)?;
    let stability = stability_check(&built.agents, &built.feature, DRIFT_TOL)?;
    let neutrality = neutrality_check(&built.agents, &built.feature, DRIFT_TOL)?;
    let mut groups = Vec::new();
    let mut offset = 0usize;
    for (g, spec) in config.population.groups.iter().enumerate() {
        let slice = &built.agents[offset..offset + spec.count];
        groups.push(check_group(g, spec, slice, &built.feature)?);
        offset += spec.count;
    }
    let all_hold = stability.holds
        && neutrality.holds
        && groups.iter().all(|g| {
            g.monotonicity.as_ref().is_none_or(|m| m.holds)
                && g.probe.as_ref().is_none_or(|p| p.holds)
                && g.mlr.as_ref().is_none_or(|m| m.holds)
        });
    Ok(CheckReport {
        stability,
        neutrality,
        groups,
        all_hold,
    })
}

/// `check`: realize the population and report regularity conditions.
/// Returns the report so the CLI can set a failure exit code when any
/// condition fails.
pub fn cmd_check(config_path: &Path) -> Result<CheckReport> {
    let config = RunConfig::load(config_path)?;
    let report = check_config(&config, &base_dir_of(config_path))?;
    print_json(&report)?;
    Ok(report)
}

/// `run`: the full pipeline. Simulates once, writes the data files,
/// fits every configured specification, writes every configured
/// diagnostics report, and finishes with a manifest.
pub fn cmd_run(config_path: &Path, out_dir_override: Option<&Path>) -> Result<()> {
    let config = RunConfig::load(config_path)?;
    let out_dir = out_dir_override
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| {
            Error::Schema("no output directory: set output_dir in the config or pass --out-dir".into())
        })?;
    fs::create_dir_all(&out_dir)?;

    let sim = simulate_config(&config, &base_dir_of(config_path))?;
    let mut artifacts = vec!["panel.csv".to_string(), "records.csv".to_string()];
    write_records(out_dir.join("records.csv"), &sim.records)?;
    write_panel(out_dir.join("panel.csv"), &sim.panel)?;

    for entry in &config.specs {
        let report = estimate_entry(&sim.records, entry)?;
        let name = format!("fit-{}.json", entry.slug());
        write_json(&out_dir.join(&name), &report)?;
        artifacts.push(name);
    }
    for spec in &config.diagnostics {
        let report = diagnose_panel(&sim.panel, Some(&sim.records), spec)?;
        let name = format!("report-{}.json", spec.slug());
        write_json(&out_dir.join(&name), &report)?;
        artifacts.push(name);
    }

    artifacts.sort();
    let manifest = Manifest {
        config_sha256: config_digest(config_path)?,
        seed: config.seed,
        feature: config.feature.label().into(),
        artifacts,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    println!(
        "run complete: {} records, {} specs, {} diagnostics in {}",
        sim.records.len(),
        config.specs.len(),
        config.diagnostics.len(),
        out_dir.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use infoprov::diagnostics::negative_weight_population;
    use infoprov::experiment::enumerate_both_arms;

    #[test]
    fn diagnose_reports_negative_weights_for_the_demo_population() {
        let (agents, design, feature) = negative_weight_population().unwrap();
        let sim = enumerate_both_arms(&agents, &design, &feature).unwrap();
        let spec = DiagnosticsSpec {
            interaction: Some(InteractionSpec::OnePrior),
            bins: 2,
            variable: BinVariableSpec::Gap,
            normalization: NormalizationSpec::Raw,
        };
        let report = diagnose_panel(&sim.panel, Some(&sim.records), &spec).unwrap();
        assert!(report.weights.negative_share > 0.0);
        assert!(report.estimand < 0.0);
        assert!(report.bins.is_some());
    }

    #[test]
    fn plot_data_matches_bin_count() {
        let (agents, design, feature) = negative_weight_population().unwrap();
        let sim = enumerate_both_arms(&agents, &design, &feature).unwrap();
        let spec = DiagnosticsSpec {
            interaction: Some(InteractionSpec::OnePrior),
            bins: 3,
            variable: BinVariableSpec::Gap,
            normalization: NormalizationSpec::Raw,
        };
        let report = diagnose_panel(&sim.panel, Some(&sim.records), &spec).unwrap();
        let bins = report.bins.unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        write_plot_data(&path, &bins).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), bins.bins.len() + 1);
        assert!(text.starts_with("lo,hi,midpoint,"));
    }
}
