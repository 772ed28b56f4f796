use std::path::{Path, PathBuf};

use super::{BatteryReport, BoxSummary, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(HarnessError::Config(format!("unknown format {other:?}"))),
        }
    }
}

/// Path of the box-plot data file written next to a report.
pub fn boxplot_path(report_path: &Path) -> PathBuf {
    let stem = report_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report_path.with_file_name(format!("{stem}.boxplot.csv"))
}

/// Writes the report in `format` to `path`, plus the box-plot data file.
pub fn emit_report(report: &BatteryReport, path: &Path, format: Format) -> Result<(), HarnessError> {
    match format {
        Format::Json => {
            std::fs::write(path, report.to_json()? + "\n").map_err(|e| HarnessError::io(path, e))?;
        }
        Format::Csv => {
            let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
            write_csv(report, file).map_err(|e| HarnessError::io(path, e))?;
        }
    }
    let bp = boxplot_path(path);
    let file = std::fs::File::create(&bp).map_err(|e| HarnessError::io(&bp, e))?;
    write_boxplot(report, file).map_err(|e| HarnessError::io(&bp, e))
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// One row per trial. Seed-box bounds appear as `lb_i`/`ub_i` columns up
/// to the largest dimension in the report, empty where absent.
pub fn write_csv<W: std::io::Write>(report: &BatteryReport, out: W) -> std::io::Result<()> {
    let max_d = report.records.iter().map(|r| r.dims).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "trial_id", "batch", "mode", "objective", "dims", "qubits", "budget", "seed", "f_final", "correct",
        "bfgs_iterations", "quantum_evals", "wall_time",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..max_d).map(|i| format!("lb_{i}")));
    header.extend((0..max_d).map(|i| format!("ub_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in &report.records {
        let mut row = vec![
            r.trial_id.to_string(),
            r.batch.to_string(),
            r.mode.as_str().to_string(),
            r.objective.clone(),
            r.dims.to_string(),
            r.qubits.to_string(),
            r.budget.to_string(),
            r.seed.to_string(),
            r.f_final.to_string(),
            r.correct.to_string(),
            r.bfgs_iterations.to_string(),
            r.quantum_evals.to_string(),
            r.wall_time.to_string(),
        ];
        for side in 0..2 {
            for i in 0..max_d {
                let v = r.seedbox.as_ref().and_then(|sb| if side == 0 { sb.lb.get(i) } else { sb.ub.get(i) });
                row.push(v.map(|v| v.to_string()).unwrap_or_default());
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
}

/// Five-number summaries with whiskers and outliers for every cell metric.
pub fn write_boxplot<W: std::io::Write>(report: &BatteryReport, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "mode", "objective", "dims", "qubits", "budget", "metric", "n", "whisker_low", "q1", "median", "q3",
        "whisker_high", "min", "max", "outliers",
    ])
    .map_err(csv_err)?;
    for c in &report.cells {
        let metrics: [(&str, &Option<BoxSummary>); 4] = [
            ("n_correct", &c.n_correct_summary),
            ("bfgs_iterations", &c.bfgs_iterations),
            ("bfgs_iterations_correct", &c.bfgs_iterations_correct),
            ("f_final", &c.f_final),
        ];
        for (name, s) in metrics {
            let Some(s) = s else { continue };
            let outliers: Vec<String> = s.outliers.iter().map(|v| v.to_string()).collect();
            w.write_record([
                c.mode.as_str().to_string(),
                c.objective.clone(),
                c.dims.to_string(),
                c.qubits.to_string(),
                c.budget.to_string(),
                name.to_string(),
                s.n.to_string(),
                s.whisker_low.to_string(),
                s.q1.to_string(),
                s.median.to_string(),
                s.q3.to_string(),
                s.whisker_high.to_string(),
                s.min.to_string(),
                s.max.to_string(),
                outliers.join(";"),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
}
