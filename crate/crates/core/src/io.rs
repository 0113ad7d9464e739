//! CSV import and export for records, panels, and belief inputs.
//!
//! Exported files use fixed, design-specific headers so a rerun with the
//! same configuration is byte-identical. Floats are written in shortest
//! round-trip form, so export followed by import reproduces every record
//! exactly. Import validates structure and values up front and reports
//! problems with one-based data row numbers.
//!
//! Passive record files carry the treated-arm signal on every row,
//! including control rows: the interaction estimators need it for the
//! whole sample, and the experimenter always knows the signal a control
//! agent would have received.

use std::path::Path;

use ndarray::Array2;

use crate::beliefs::{GridBelief, SignalFamily};
use crate::error::{Error, Result};
use crate::experiment::{CounterfactualPanel, ExperimentRecord, Group, PanelRow};

/// How strictly a records file must match the simulator's own export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaMode {
    /// The file is a simulator export: every documented column must be
    /// present.
    Simulated,
    /// The file comes from outside: `group`, `signal`, `prior_feature`,
    /// `posterior_feature`, and `outcome` are required; `id`, arm-signal
    /// columns, and covariates are optional. Missing ids become row
    /// numbers.
    External,
}

const RECORD_PASSIVE_BASE: [&str; 6] = [
    "id",
    "group",
    "signal",
    "prior_feature",
    "posterior_feature",
    "outcome",
];

const RECORD_ACTIVE_BASE: [&str; 8] = [
    "id",
    "group",
    "signal",
    "low_signal",
    "high_signal",
    "prior_feature",
    "posterior_feature",
    "outcome",
];

const PANEL_PASSIVE_BASE: [&str; 10] = [
    "id",
    "assigned",
    "prior_feature",
    "posterior_base",
    "posterior_treated",
    "outcome_base",
    "outcome_treated",
    "within_ape",
    "perception_gap",
    "treated_signal",
];

const PANEL_ACTIVE_BASE: [&str; 11] = [
    "id",
    "assigned",
    "prior_feature",
    "posterior_base",
    "posterior_treated",
    "outcome_base",
    "outcome_treated",
    "within_ape",
    "perception_gap",
    "base_signal",
    "treated_signal",
];

fn covariate_labels(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("x{i}")).collect()
}

fn finite(value: f64, row: usize, column: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Invalid(format!(
            "data row {row}: column '{column}' holds the non-finite value {value}"
        )))
    }
}

fn fmt(value: f64) -> String {
    format!("{value}")
}

fn open_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// Writes records to CSV with the documented header for their design.
/// Passive files put the treated-arm signal in the `signal` column on
/// every row; active files carry the realized signal plus both arm
/// signals.
pub fn write_records(path: impl AsRef<Path>, records: &[ExperimentRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Invalid("no records to write".into()));
    }
    let active = matches!(records[0].group, Group::Low | Group::High);
    let k = records[0].covariates.len();
    let base: &[&str] = if active {
        &RECORD_ACTIVE_BASE
    } else {
        &RECORD_PASSIVE_BASE
    };
    let mut writer = open_writer(path.as_ref())?;
    let mut header: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    header.extend(covariate_labels(k));
    writer.write_record(&header)?;

    for (i, r) in records.iter().enumerate() {
        let row = i + 1;
        if r.covariates.len() != k {
            return Err(Error::dimension(
                &format!("covariates on data row {row}"),
                k,
                r.covariates.len(),
            ));
        }
        let mut fields: Vec<String> = vec![r.id.to_string(), r.group.label().to_string()];
        if active {
            if !matches!(r.group, Group::Low | Group::High) {
                return Err(Error::Schema(format!(
                    "data row {row}: arm {} mixed into an active-design export",
                    r.group.label()
                )));
            }
            let signal = r.signal.ok_or_else(|| {
                Error::Schema(format!("data row {row}: active record lacks its signal"))
            })?;
            let low = r.low_signal.ok_or_else(|| {
                Error::Schema(format!("data row {row}: active record lacks its low-arm signal"))
            })?;
            let high = r.high_signal.ok_or_else(|| {
                Error::Schema(format!(
                    "data row {row}: active record lacks its high-arm signal"
                ))
            })?;
            fields.push(fmt(finite(signal, row, "signal")?));
            fields.push(fmt(finite(low, row, "low_signal")?));
            fields.push(fmt(finite(high, row, "high_signal")?));
        } else {
            if !matches!(r.group, Group::Control | Group::Treated) {
                return Err(Error::Schema(format!(
                    "data row {row}: arm {} mixed into a passive-design export",
                    r.group.label()
                )));
            }
            let signal = r.treatment_signal.ok_or_else(|| {
                Error::Schema(format!(
                    "data row {row}: passive record lacks its treated-arm signal"
                ))
            })?;
            fields.push(fmt(finite(signal, row, "signal")?));
        }
        fields.push(fmt(finite(r.prior_feature, row, "prior_feature")?));
        fields.push(fmt(finite(r.posterior_feature, row, "posterior_feature")?));
        fields.push(fmt(finite(r.outcome, row, "outcome")?));
        for (j, x) in r.covariates.iter().enumerate() {
            fields.push(fmt(finite(*x, row, &format!("x{}", j + 1))?));
        }
        writer.write_record(&fields)?;
    }
    writer.flush().map_err(std::io::Error::from)?;
    Ok(())
}

struct Columns {
    by_name: Vec<(String, usize)>,
    covariates: Vec<usize>,
}

impl Columns {
    fn get(&self, name: &str) -> Option<usize> {
        self.by_name
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, i)| *i)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.get(name)
            .ok_or_else(|| Error::Schema(format!("missing required column '{name}'")))
    }
}

fn parse_header(header: &csv::StringRecord, known: &[&str]) -> Result<Columns> {
    let mut by_name = Vec::new();
    let mut covariates = Vec::new();
    for (i, name) in header.iter().enumerate() {
        if by_name.iter().any(|(n, _)| n == name) {
            return Err(Error::Schema(format!("duplicate column '{name}'")));
        }
        if known.contains(&name) {
            by_name.push((name.to_string(), i));
        } else if name
            .strip_prefix('x')
            .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
        {
            by_name.push((name.to_string(), i));
            covariates.push(i);
        } else {
            return Err(Error::Schema(format!("unknown column '{name}'")));
        }
    }
    let expected = covariate_labels(covariates.len());
    let actual: Vec<&str> = covariates
        .iter()
        .map(|i| header.get(*i).expect("index from header"))
        .collect();
    if actual != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Schema(format!(
            "covariate columns must be named x1..x{} in order, got {actual:?}",
            covariates.len()
        )));
    }
    Ok(Columns {
        by_name,
        covariates,
    })
}

fn parse_f64(record: &csv::StringRecord, col: usize, name: &str, row: usize) -> Result<f64> {
    let raw = record.get(col).unwrap_or("");
    if raw.is_empty() {
        return Err(Error::Schema(format!(
            "data row {row}: column '{name}' is empty"
        )));
    }
    let value: f64 = raw.parse().map_err(|_| {
        Error::Schema(format!(
            "data row {row}: column '{name}' holds '{raw}', expected a number"
        ))
    })?;
    finite(value, row, name)
}

fn parse_opt_f64(
    record: &csv::StringRecord,
    col: Option<usize>,
    name: &str,
    row: usize,
) -> Result<Option<f64>> {
    match col {
        None => Ok(None),
        Some(c) => parse_f64(record, c, name, row).map(Some),
    }
}

/// Reads a records CSV exported by this crate or assembled externally.
/// The header decides the design: `low_signal`/`high_signal` columns mean
/// an active file, otherwise passive.
pub fn read_records(path: impl AsRef<Path>, mode: SchemaMode) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let header = reader.headers()?.clone();
    let active = header.iter().any(|n| n == "low_signal" || n == "high_signal");
    let base: &[&str] = if active {
        &RECORD_ACTIVE_BASE
    } else {
        &RECORD_PASSIVE_BASE
    };
    let columns = parse_header(&header, base)?;
    match mode {
        SchemaMode::Simulated => {
            for name in base {
                columns.require(name)?;
            }
        }
        SchemaMode::External => {
            for name in ["group", "signal", "prior_feature", "posterior_feature", "outcome"] {
                columns.require(name)?;
            }
        }
    }

    let id_col = columns.get("id");
    let group_col = columns.require("group")?;
    let signal_col = columns.require("signal")?;
    let prior_col = columns.require("prior_feature")?;
    let posterior_col = columns.require("posterior_feature")?;
    let outcome_col = columns.require("outcome")?;
    let low_col = columns.get("low_signal");
    let high_col = columns.get("high_signal");

    let mut records = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let record = result?;
        if record.len() != header.len() {
            return Err(Error::Schema(format!(
                "data row {row}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        let label = record.get(group_col).unwrap_or("");
        let group = Group::from_label(label)
            .map_err(|e| Error::Schema(format!("data row {row}: {e}")))?;
        let expected_arms: &[Group] = if active {
            &[Group::Low, Group::High]
        } else {
            &[Group::Control, Group::Treated]
        };
        if !expected_arms.contains(&group) {
            return Err(Error::Schema(format!(
                "data row {row}: arm {} does not belong to this file's design",
                group.label()
            )));
        }
        let id = match id_col {
            Some(c) => {
                let raw = record.get(c).unwrap_or("");
                raw.parse().map_err(|_| {
                    Error::Schema(format!(
                        "data row {row}: column 'id' holds '{raw}', expected an integer"
                    ))
                })?
            }
            None => i,
        };
        let signal_value = parse_f64(&record, signal_col, "signal", row)?;
        let (signal, treatment_signal) = if active {
            (Some(signal_value), None)
        } else {
            (
                (group == Group::Treated).then_some(signal_value),
                Some(signal_value),
            )
        };
        let covariates = columns
            .covariates
            .iter()
            .enumerate()
            .map(|(j, c)| parse_f64(&record, *c, &format!("x{}", j + 1), row))
            .collect::<Result<Vec<f64>>>()?;
        records.push(ExperimentRecord {
            id,
            group,
            signal,
            treatment_signal,
            low_signal: if active {
                parse_opt_f64(&record, low_col, "low_signal", row)?
            } else {
                None
            },
            high_signal: if active {
                parse_opt_f64(&record, high_col, "high_signal", row)?
            } else {
                None
            },
            prior_feature: parse_f64(&record, prior_col, "prior_feature", row)?,
            posterior_feature: parse_f64(&record, posterior_col, "posterior_feature", row)?,
            outcome: parse_f64(&record, outcome_col, "outcome", row)?,
            covariates,
        });
    }
    if records.is_empty() {
        return Err(Error::Schema("the file has no data rows".into()));
    }
    Ok(records)
}

/// Writes the counterfactual panel with the documented header for its
/// design.
pub fn write_panel(path: impl AsRef<Path>, panel: &CounterfactualPanel) -> Result<()> {
    if panel.rows.is_empty() {
        return Err(Error::Invalid("no panel rows to write".into()));
    }
    let active = panel.rows[0].base_signal.is_some();
    let k = panel.rows[0].covariates.len();
    let base: &[&str] = if active {
        &PANEL_ACTIVE_BASE
    } else {
        &PANEL_PASSIVE_BASE
    };
    let mut writer = open_writer(path.as_ref())?;
    let mut header: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    header.extend(covariate_labels(k));
    writer.write_record(&header)?;

    for (i, r) in panel.rows.iter().enumerate() {
        let row = i + 1;
        if r.covariates.len() != k {
            return Err(Error::dimension(
                &format!("covariates on data row {row}"),
                k,
                r.covariates.len(),
            ));
        }
        if r.base_signal.is_some() != active {
            return Err(Error::Schema(format!(
                "data row {row}: base-arm signal presence is inconsistent with the header"
            )));
        }
        let mut fields = vec![
            r.id.to_string(),
            r.assigned.label().to_string(),
            fmt(finite(r.prior_feature, row, "prior_feature")?),
            fmt(finite(r.posterior_base, row, "posterior_base")?),
            fmt(finite(r.posterior_treated, row, "posterior_treated")?),
            fmt(finite(r.outcome_base, row, "outcome_base")?),
            fmt(finite(r.outcome_treated, row, "outcome_treated")?),
            fmt(finite(r.within_ape, row, "within_ape")?),
            fmt(finite(r.perception_gap, row, "perception_gap")?),
        ];
        if let Some(s) = r.base_signal {
            fields.push(fmt(finite(s, row, "base_signal")?));
        }
        fields.push(fmt(finite(r.treated_signal, row, "treated_signal")?));
        for (j, x) in r.covariates.iter().enumerate() {
            fields.push(fmt(finite(*x, row, &format!("x{}", j + 1))?));
        }
        writer.write_record(&fields)?;
    }
    writer.flush().map_err(std::io::Error::from)?;
    Ok(())
}

/// Reads a panel CSV written by [`write_panel`]. Panels are simulator
/// artifacts, so the full documented header is always required.
pub fn read_panel(path: impl AsRef<Path>) -> Result<CounterfactualPanel> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let header = reader.headers()?.clone();
    let active = header.iter().any(|n| n == "base_signal");
    let base: &[&str] = if active {
        &PANEL_ACTIVE_BASE
    } else {
        &PANEL_PASSIVE_BASE
    };
    let columns = parse_header(&header, base)?;
    for name in base {
        columns.require(name)?;
    }
    let col = |name: &str| columns.require(name).expect("checked above");

    let mut rows = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let record = result?;
        if record.len() != header.len() {
            return Err(Error::Schema(format!(
                "data row {row}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        let raw_id = record.get(col("id")).unwrap_or("");
        let id = raw_id.parse().map_err(|_| {
            Error::Schema(format!(
                "data row {row}: column 'id' holds '{raw_id}', expected an integer"
            ))
        })?;
        let assigned = Group::from_label(record.get(col("assigned")).unwrap_or(""))
            .map_err(|e| Error::Schema(format!("data row {row}: {e}")))?;
        let covariates = columns
            .covariates
            .iter()
            .enumerate()
            .map(|(j, c)| parse_f64(&record, *c, &format!("x{}", j + 1), row))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(PanelRow {
            id,
            assigned,
            prior_feature: parse_f64(&record, col("prior_feature"), "prior_feature", row)?,
            posterior_base: parse_f64(&record, col("posterior_base"), "posterior_base", row)?,
            posterior_treated: parse_f64(
                &record,
                col("posterior_treated"),
                "posterior_treated",
                row,
            )?,
            outcome_base: parse_f64(&record, col("outcome_base"), "outcome_base", row)?,
            outcome_treated: parse_f64(&record, col("outcome_treated"), "outcome_treated", row)?,
            within_ape: parse_f64(&record, col("within_ape"), "within_ape", row)?,
            perception_gap: parse_f64(&record, col("perception_gap"), "perception_gap", row)?,
            base_signal: if active {
                Some(parse_f64(&record, col("base_signal"), "base_signal", row)?)
            } else {
                None
            },
            treated_signal: parse_f64(&record, col("treated_signal"), "treated_signal", row)?,
            covariates,
        });
    }
    if rows.is_empty() {
        return Err(Error::Schema("the file has no data rows".into()));
    }
    Ok(CounterfactualPanel { rows })
}

/// Loads a grid belief from a two-column CSV with header `state,mass`.
/// Masses are validated against one, not renormalized.
pub fn load_grid_belief(path: impl AsRef<Path>) -> Result<GridBelief> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["state", "mass"] {
        return Err(Error::Schema(format!(
            "expected header 'state,mass', got '{}'",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut states = Vec::new();
    let mut masses = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let record = result?;
        states.push(parse_f64(&record, 0, "state", row)?);
        masses.push(parse_f64(&record, 1, "mass", row)?);
    }
    GridBelief::new(states, masses)
}

/// Loads a signal family from a CSV whose first column is the signal grid
/// and whose remaining column headers are the state values; each cell is
/// the density of that row's signal under that column's state. Columns
/// are validated to integrate to one on the signal grid, not
/// renormalized.
pub fn load_signal_family(path: impl AsRef<Path>) -> Result<SignalFamily> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let header = reader.headers()?.clone();
    if header.get(0) != Some("signal") {
        return Err(Error::Schema(format!(
            "expected the first column to be 'signal', got '{}'",
            header.get(0).unwrap_or("")
        )));
    }
    if header.len() < 2 {
        return Err(Error::Schema(
            "expected at least one state column after 'signal'".into(),
        ));
    }
    let states: Vec<f64> = header
        .iter()
        .skip(1)
        .map(|name| {
            name.parse().map_err(|_| {
                Error::Schema(format!(
                    "state column header '{name}' is not a number"
                ))
            })
        })
        .collect::<Result<_>>()?;
    let mut signals = Vec::new();
    let mut cells = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let record = result?;
        if record.len() != header.len() {
            return Err(Error::Schema(format!(
                "data row {row}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        signals.push(parse_f64(&record, 0, "signal", row)?);
        for (m, state) in states.iter().enumerate() {
            cells.push(parse_f64(&record, m + 1, &format!("state {state}"), row)?);
        }
    }
    if signals.is_empty() {
        return Err(Error::Schema("the file has no data rows".into()));
    }
    let densities = Array2::from_shape_vec((signals.len(), states.len()), cells)
        .expect("dimensions counted above");
    SignalFamily::new(signals, states, densities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::ActionFunction;
    use crate::beliefs::Feature;
    use crate::experiment::{constant_signal, simulate, Agent, Design};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::fs;

    fn population(n: usize) -> Vec<Agent> {
        (0..n)
            .map(|id| {
                let mut agent = Agent::gaussian(
                    id,
                    id as f64 * 0.3 - 1.0,
                    1.0 + 0.1 * id as f64,
                    1.0,
                    ActionFunction::Affine {
                        intercept: 0.5,
                        slope: 1.0 + id as f64 * 0.2,
                    },
                )
                .unwrap();
                agent.covariates = vec![id as f64, (id % 3) as f64];
                agent
            })
            .collect()
    }

    fn passive_sim() -> crate::experiment::Simulation {
        let design = Design::passive(constant_signal(2.0), 0.5, 11).unwrap();
        simulate(&population(8), &design, &Feature::Mean).unwrap()
    }

    fn active_sim() -> crate::experiment::Simulation {
        let design =
            Design::active(constant_signal(-1.0), constant_signal(2.0), 0.5, 11).unwrap();
        simulate(&population(8), &design, &Feature::Mean).unwrap()
    }

    #[test]
    fn records_round_trip_exactly_in_both_designs() {
        let dir = tempfile::tempdir().unwrap();
        for sim in [passive_sim(), active_sim()] {
            let path = dir.path().join("records.csv");
            write_records(&path, &sim.records).unwrap();
            let back = read_records(&path, SchemaMode::Simulated).unwrap();
            assert_eq!(back.len(), sim.records.len());
            for (a, b) in sim.records.iter().zip(&back) {
                assert_eq!(a.id, b.id);
                assert_eq!(a.group, b.group);
                assert_eq!(a.signal, b.signal);
                assert_eq!(a.treatment_signal, b.treatment_signal);
                assert_eq!(a.low_signal, b.low_signal);
                assert_eq!(a.high_signal, b.high_signal);
                assert_eq!(a.prior_feature.to_bits(), b.prior_feature.to_bits());
                assert_eq!(a.posterior_feature.to_bits(), b.posterior_feature.to_bits());
                assert_eq!(a.outcome.to_bits(), b.outcome.to_bits());
                assert_eq!(a.covariates, b.covariates);
            }
        }
    }

    #[test]
    fn panel_round_trips_exactly_in_both_designs() {
        let dir = tempfile::tempdir().unwrap();
        for sim in [passive_sim(), active_sim()] {
            let path = dir.path().join("panel.csv");
            write_panel(&path, &sim.panel).unwrap();
            let back = read_panel(&path).unwrap();
            assert_eq!(back.rows.len(), sim.panel.rows.len());
            for (a, b) in sim.panel.rows.iter().zip(&back.rows) {
                assert_eq!(a.id, b.id);
                assert_eq!(a.assigned, b.assigned);
                assert_eq!(a.base_signal, b.base_signal);
                assert_eq!(a.within_ape.to_bits(), b.within_ape.to_bits());
                assert_eq!(a.delta_feature().to_bits(), b.delta_feature().to_bits());
                assert_eq!(a.covariates, b.covariates);
            }
        }
    }

    #[test]
    fn rewriting_identical_records_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let sim = passive_sim();
        let first = dir.path().join("a.csv");
        let second = dir.path().join("b.csv");
        write_records(&first, &sim.records).unwrap();
        write_records(&second, &sim.records).unwrap();
        assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
    }

    #[test]
    fn external_mode_accepts_minimal_files_and_numbers_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("minimal.csv");
        fs::write(
            &path,
            "group,signal,prior_feature,posterior_feature,outcome\n\
             C,2.0,0.5,0.5,1.0\n\
             T,2.0,1.5,1.75,2.0\n\
             T,3.0,0.0,1.5,1.8\n",
        )
        .unwrap();
        let records = read_records(&path, SchemaMode::External).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].id, 0);
        assert_eq!(records[2].id, 2);
        assert_eq!(records[0].signal, None);
        assert_eq!(records[0].treatment_signal, Some(2.0));
        assert_eq!(records[1].signal, Some(2.0));
        assert!(matches!(
            read_records(&path, SchemaMode::Simulated),
            Err(Error::Schema(msg)) if msg.contains("'id'")
        ));
    }

    #[test]
    fn missing_signal_on_a_control_row_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gap.csv");
        fs::write(
            &path,
            "group,signal,prior_feature,posterior_feature,outcome\n\
             C,,0.5,0.5,1.0\n\
             T,2.0,1.5,1.75,2.0\n",
        )
        .unwrap();
        assert!(matches!(
            read_records(&path, SchemaMode::External),
            Err(Error::Schema(msg)) if msg.contains("data row 1") && msg.contains("'signal'")
        ));
    }

    #[test]
    fn unknown_columns_and_non_finite_values_are_rejected_with_rows() {
        let dir = tempfile::tempdir().unwrap();
        let extra = dir.path().join("extra.csv");
        fs::write(
            &extra,
            "group,signal,prior_feature,posterior_feature,outcome,mystery\n\
             C,2.0,0.5,0.5,1.0,9\n",
        )
        .unwrap();
        assert!(matches!(
            read_records(&extra, SchemaMode::External),
            Err(Error::Schema(msg)) if msg.contains("mystery")
        ));

        let nan = dir.path().join("nan.csv");
        fs::write(
            &nan,
            "group,signal,prior_feature,posterior_feature,outcome\n\
             C,2.0,0.5,0.5,1.0\n\
             T,2.0,NaN,1.75,2.0\n",
        )
        .unwrap();
        assert!(matches!(
            read_records(&nan, SchemaMode::External),
            Err(Error::Invalid(msg)) if msg.contains("data row 2") && msg.contains("non-finite")
        ));
    }

    #[test]
    fn mixed_arms_are_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.csv");
        fs::write(
            &path,
            "group,signal,prior_feature,posterior_feature,outcome\n\
             C,2.0,0.5,0.5,1.0\n\
             H,2.0,1.5,1.75,2.0\n",
        )
        .unwrap();
        assert!(matches!(
            read_records(&path, SchemaMode::External),
            Err(Error::Schema(msg)) if msg.contains("data row 2")
        ));
    }

    #[test]
    fn grid_belief_loads_and_rejects_unnormalized_masses() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("belief.csv");
        fs::write(&good, "state,mass\n0.0,0.25\n1.0,0.75\n").unwrap();
        let belief = load_grid_belief(&good).unwrap();
        assert_abs_diff_eq!(belief.mean(), 0.75, epsilon = 1e-12);

        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "state,mass\n0.0,0.25\n1.0,0.85\n").unwrap();
        assert!(load_grid_belief(&bad).is_err());

        let wrong_header = dir.path().join("header.csv");
        fs::write(&wrong_header, "omega,mass\n0.0,1.0\n").unwrap();
        assert!(matches!(
            load_grid_belief(&wrong_header),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn signal_family_loads_and_is_validated_not_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("family.csv");
        // Two-point signal grid with unit trapezoid weights: columns sum
        // to two halves each.
        fs::write(&good, "signal,0.0,1.0\n0.0,1.6,0.4\n1.0,0.4,1.6\n").unwrap();
        let family = load_signal_family(&good).unwrap();
        assert_eq!(family.signals().len(), 2);
        assert_abs_diff_eq!(family.density(0, 0), 1.6, epsilon = 1e-15);

        let off = dir.path().join("off.csv");
        fs::write(&off, "signal,0.0,1.0\n0.0,1.6,0.4\n1.0,0.5,1.6\n").unwrap();
        assert!(load_signal_family(&off).is_err());

        let bad_state = dir.path().join("state.csv");
        fs::write(&bad_state, "signal,low,1.0\n0.0,1.6,0.4\n1.0,0.4,1.6\n").unwrap();
        assert!(matches!(
            load_signal_family(&bad_state),
            Err(Error::Schema(msg)) if msg.contains("low")
        ));
    }

    proptest! {
        #[test]
        fn arbitrary_finite_records_round_trip(
            values in proptest::collection::vec(
                (any::<f64>(), any::<f64>(), any::<f64>(), any::<f64>()),
                1..20,
            )
        ) {
            prop_assume!(values.iter().all(|(a, b, c, d)| {
                a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()
            }));
            let records: Vec<ExperimentRecord> = values
                .iter()
                .enumerate()
                .map(|(i, (signal, prior, posterior, outcome))| ExperimentRecord {
                    id: i,
                    group: if i % 2 == 0 { Group::Control } else { Group::Treated },
                    signal: (i % 2 == 1).then_some(*signal),
                    treatment_signal: Some(*signal),
                    low_signal: None,
                    high_signal: None,
                    prior_feature: *prior,
                    posterior_feature: *posterior,
                    outcome: *outcome,
                    covariates: vec![*prior * 0.5],
                })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("records.csv");
            write_records(&path, &records).unwrap();
            let back = read_records(&path, SchemaMode::Simulated).unwrap();
            for (a, b) in records.iter().zip(&back) {
                prop_assert_eq!(a.treatment_signal.unwrap().to_bits(),
                    b.treatment_signal.unwrap().to_bits());
                prop_assert_eq!(a.prior_feature.to_bits(), b.prior_feature.to_bits());
                prop_assert_eq!(a.posterior_feature.to_bits(), b.posterior_feature.to_bits());
                prop_assert_eq!(a.outcome.to_bits(), b.outcome.to_bits());
                prop_assert_eq!(a.covariates[0].to_bits(), b.covariates[0].to_bits());
            }
        }
    }
}
