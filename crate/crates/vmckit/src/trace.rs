//! Per-step training records and their versioned CSV form. Traces are the
//! carrier between the trainers, the diagnostics, and the report command;
//! the byte layout is deterministic so identical runs diff empty.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "# vmckit-trace v1";
const SAMPLING_PREFIX: &str = "# sampling: ";
const RUN_PREFIX: &str = "# run: ";

/// Every column a trace row can carry. Each experiment kind writes a fixed
/// subset, declared in the CSV column header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Step,
    Eta,
    EnergyEst,
    EnergyExact,
    Objective,
    SiLoss,
    Angle,
    Loss,
    GradNorm,
    GradNormExact,
    RunminGradNorm,
    LipschitzEst,
    AcceptanceRate,
    ZTilde,
    NormRatio,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::Step => "step",
            Column::Eta => "eta",
            Column::EnergyEst => "energy_est",
            Column::EnergyExact => "energy_exact",
            Column::Objective => "objective",
            Column::SiLoss => "si_loss",
            Column::Angle => "angle",
            Column::Loss => "loss",
            Column::GradNorm => "grad_norm",
            Column::GradNormExact => "grad_norm_exact",
            Column::RunminGradNorm => "runmin_grad_norm",
            Column::LipschitzEst => "lipschitz_est",
            Column::AcceptanceRate => "acceptance_rate",
            Column::ZTilde => "z_tilde",
            Column::NormRatio => "norm_ratio",
        }
    }

    pub fn from_name(name: &str) -> Option<Column> {
        use Column::*;
        Some(match name {
            "step" => Step,
            "eta" => Eta,
            "energy_est" => EnergyEst,
            "energy_exact" => EnergyExact,
            "objective" => Objective,
            "si_loss" => SiLoss,
            "angle" => Angle,
            "loss" => Loss,
            "grad_norm" => GradNorm,
            "grad_norm_exact" => GradNormExact,
            "runmin_grad_norm" => RunminGradNorm,
            "lipschitz_est" => LipschitzEst,
            "acceptance_rate" => AcceptanceRate,
            "z_tilde" => ZTilde,
            "norm_ratio" => NormRatio,
            _ => return None,
        })
    }
}

/// One diagnostic record per optimizer step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub eta: f64,
    pub energy_est: Option<f64>,
    pub energy_exact: Option<f64>,
    pub objective: Option<f64>,
    pub si_loss: Option<f64>,
    pub angle: Option<f64>,
    pub loss: Option<f64>,
    pub grad_norm: f64,
    pub grad_norm_exact: Option<f64>,
    pub runmin_grad_norm: f64,
    pub lipschitz_est: Option<f64>,
    pub acceptance_rate: Option<f64>,
    pub z_tilde: Option<f64>,
    pub norm_ratio: Option<f64>,
}

impl TraceRow {
    pub fn get(&self, column: Column) -> Option<f64> {
        match column {
            Column::Step => Some(self.step as f64),
            Column::Eta => Some(self.eta),
            Column::EnergyEst => self.energy_est,
            Column::EnergyExact => self.energy_exact,
            Column::Objective => self.objective,
            Column::SiLoss => self.si_loss,
            Column::Angle => self.angle,
            Column::Loss => self.loss,
            Column::GradNorm => Some(self.grad_norm),
            Column::GradNormExact => self.grad_norm_exact,
            Column::RunminGradNorm => Some(self.runmin_grad_norm),
            Column::LipschitzEst => self.lipschitz_est,
            Column::AcceptanceRate => self.acceptance_rate,
            Column::ZTilde => self.z_tilde,
            Column::NormRatio => self.norm_ratio,
        }
    }

    fn set(&mut self, column: Column, value: Option<f64>) -> Result<()> {
        let required = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| Error::invalid(format!("column {what} must not be empty")))
        };
        match column {
            Column::Step => self.step = required(value, "step")? as usize,
            Column::Eta => self.eta = required(value, "eta")?,
            Column::EnergyEst => self.energy_est = value,
            Column::EnergyExact => self.energy_exact = value,
            Column::Objective => self.objective = value,
            Column::SiLoss => self.si_loss = value,
            Column::Angle => self.angle = value,
            Column::Loss => self.loss = value,
            Column::GradNorm => self.grad_norm = required(value, "grad_norm")?,
            Column::GradNormExact => self.grad_norm_exact = value,
            Column::RunminGradNorm => {
                self.runmin_grad_norm = required(value, "runmin_grad_norm")?
            }
            Column::LipschitzEst => self.lipschitz_est = value,
            Column::AcceptanceRate => self.acceptance_rate = value,
            Column::ZTilde => self.z_tilde = value,
            Column::NormRatio => self.norm_ratio = value,
        }
        Ok(())
    }
}

/// A full training trace: fixed column set, two descriptive header lines
/// (sampling configuration on its own line, run configuration on the
/// other), and the rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub columns: Vec<Column>,
    pub sampling: String,
    pub run: String,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new(columns: Vec<Column>, sampling: impl Into<String>, run: impl Into<String>) -> Self {
        Trace {
            columns,
            sampling: sampling.into(),
            run: run.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    /// Values of one column across all rows; errors if any row leaves it
    /// empty.
    pub fn series(&self, column: Column) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                r.get(column).ok_or_else(|| {
                    Error::invalid(format!("row {} has no {} value", r.step, column.name()))
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(TRACE_HEADER);
        out.push('\n');
        let _ = writeln!(out, "{SAMPLING_PREFIX}{}", self.sampling);
        let _ = writeln!(out, "{RUN_PREFIX}{}", self.run);
        let names: Vec<&str> = self.columns.iter().map(|c| c.name()).collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for &c in &self.columns {
                if !first {
                    out.push(',');
                }
                first = false;
                match (c, row.get(c)) {
                    (Column::Step, Some(v)) => {
                        let _ = write!(out, "{}", v as usize);
                    }
                    (_, Some(v)) => {
                        let _ = write!(out, "{v}");
                    }
                    (_, None) => {}
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace> {
        let mut lines = text.lines().enumerate();
        let (line_no, first) = lines
            .next()
            .ok_or(Error::TraceParse {
                line: 1,
                msg: "empty trace".into(),
            })?;
        if first.trim() != TRACE_HEADER {
            return Err(Error::TraceParse {
                line: line_no + 1,
                msg: format!("unrecognized trace version: {first:?}"),
            });
        }
        let mut sampling = String::new();
        let mut run = String::new();
        let mut columns: Option<Vec<Column>> = None;
        let mut rows = Vec::new();
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix(SAMPLING_PREFIX) {
                sampling = rest.to_string();
                continue;
            }
            if let Some(rest) = line.strip_prefix(RUN_PREFIX) {
                run = rest.to_string();
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            match &columns {
                None => {
                    let parsed: Result<Vec<Column>> = line
                        .split(',')
                        .map(|name| {
                            Column::from_name(name.trim()).ok_or(Error::TraceParse {
                                line: line_no,
                                msg: format!("unknown column {name:?}"),
                            })
                        })
                        .collect();
                    columns = Some(parsed?);
                }
                Some(cols) => {
                    let fields: Vec<&str> = line.split(',').collect();
                    if fields.len() != cols.len() {
                        return Err(Error::TraceParse {
                            line: line_no,
                            msg: format!(
                                "expected {} fields, found {}",
                                cols.len(),
                                fields.len()
                            ),
                        });
                    }
                    let mut row = TraceRow::default();
                    for (&c, field) in cols.iter().zip(&fields) {
                        let value = if field.is_empty() {
                            None
                        } else {
                            Some(field.parse::<f64>().map_err(|e| Error::TraceParse {
                                line: line_no,
                                msg: format!("bad value {field:?} in {}: {e}", c.name()),
                            })?)
                        };
                        row.set(c, value).map_err(|e| Error::TraceParse {
                            line: line_no,
                            msg: e.to_string(),
                        })?;
                    }
                    rows.push(row);
                }
            }
        }
        let columns = columns.ok_or(Error::TraceParse {
            line: 1,
            msg: "trace has no column header".into(),
        })?;
        Ok(Trace {
            columns,
            sampling,
            run,
            rows,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Trace> {
        let text = fs::read_to_string(path)?;
        Trace::parse(&text)
    }
}

/// Column set for energy-minimization traces.
pub fn vmc_columns(exact: bool, mcmc: bool) -> Vec<Column> {
    let mut cols = vec![
        Column::Step,
        Column::Eta,
        Column::EnergyEst,
        Column::GradNorm,
        Column::RunminGradNorm,
        Column::LipschitzEst,
    ];
    if exact {
        cols.insert(3, Column::EnergyExact);
        cols.push(Column::GradNormExact);
    }
    if mcmc {
        cols.push(Column::AcceptanceRate);
    }
    cols
}

/// Column set for supervised pre-training traces.
pub fn pretrain_columns(exact: bool, mcmc: bool) -> Vec<Column> {
    let mut cols = vec![
        Column::Step,
        Column::Eta,
        Column::Objective,
        Column::SiLoss,
        Column::Angle,
        Column::GradNorm,
        Column::RunminGradNorm,
        Column::LipschitzEst,
        Column::ZTilde,
    ];
    if exact {
        cols.push(Column::GradNormExact);
        cols.push(Column::NormRatio);
    }
    if mcmc {
        cols.push(Column::AcceptanceRate);
    }
    cols
}

/// Column set for the orbital-fitting comparison traces.
pub fn orbital_columns() -> Vec<Column> {
    vec![
        Column::Step,
        Column::Eta,
        Column::Loss,
        Column::Angle,
        Column::GradNorm,
        Column::RunminGradNorm,
        Column::LipschitzEst,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> Trace {
        let mut t = Trace::new(vmc_columns(true, false), "exact finite", "toy run");
        t.push(TraceRow {
            step: 0,
            eta: 0.05,
            energy_est: Some(1.25),
            energy_exact: Some(1.2),
            grad_norm: 0.5,
            grad_norm_exact: Some(0.53),
            runmin_grad_norm: 0.5,
            lipschitz_est: None,
            ..Default::default()
        });
        t.push(TraceRow {
            step: 1,
            eta: 0.04,
            energy_est: Some(1.1),
            energy_exact: Some(1.12),
            grad_norm: 0.4,
            grad_norm_exact: Some(0.41),
            runmin_grad_norm: 0.4,
            lipschitz_est: Some(2.0),
            ..Default::default()
        });
        t
    }

    #[test]
    fn round_trip() {
        let t = sample_trace();
        let text = t.to_csv();
        assert!(text.starts_with(TRACE_HEADER));
        let parsed = Trace::parse(&text).unwrap();
        assert_eq!(parsed, t);
        // Byte-stable: serializing the parse reproduces the text.
        assert_eq!(parsed.to_csv(), text);
    }

    #[test]
    fn rejects_unknown_version() {
        let err = Trace::parse("# vmckit-trace v9\nstep,eta\n").unwrap_err();
        match err {
            Error::TraceParse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn reports_bad_line_numbers() {
        let text = format!("{TRACE_HEADER}\nstep,eta,grad_norm,runmin_grad_norm\n0,0.1,oops,0.1\n");
        match Trace::parse(&text).unwrap_err() {
            Error::TraceParse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("oops"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejects_unknown_column() {
        let text = format!("{TRACE_HEADER}\nstep,eta,bogus\n");
        assert!(Trace::parse(&text).is_err());
    }

    #[test]
    fn field_count_mismatch_is_an_error() {
        let text = format!("{TRACE_HEADER}\nstep,eta,grad_norm,runmin_grad_norm\n0,0.1,0.2\n");
        match Trace::parse(&text).unwrap_err() {
            Error::TraceParse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }
}
