//! Convergence logs as CSV.

use std::io::Write;

use serde::Serialize;

use crate::solver::ConvergenceRecord;

pub const CONVERGENCE_COLUMNS: [&str; 8] = [
    "iter",
    "seconds",
    "best_obj",
    "second_obj",
    "cov_eig_min",
    "cov_eig_mean",
    "cov_eig_max",
    "eig_calls",
];

#[derive(Serialize)]
struct Row {
    iter: usize,
    seconds: f64,
    best_obj: f64,
    second_obj: f64,
    cov_eig_min: f64,
    cov_eig_mean: f64,
    cov_eig_max: f64,
    eig_calls: u64,
}


impl From<&ConvergenceRecord> for Row {
    fn from(r: &ConvergenceRecord) -> Self {
        Self {
            iter: r.iter,
            seconds: r.seconds,
            best_obj: r.best_objective,
            second_obj: r.second_objective,
            cov_eig_min: r.cov_eig_min,
            cov_eig_mean: r.cov_eig_mean,
            cov_eig_max: r.cov_eig_max,
            eig_calls: r.eigensolver_calls,
        }
    }
}

pub fn write_convergence_csv<W: Write>(records: &[ConvergenceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(CONVERGENCE_COLUMNS)?;
    }
    for r in records {
        w.serialize(Row::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn convergence_csv_string(records: &[ConvergenceRecord]) -> String {
    let mut buf = Vec::new();
    write_convergence_csv(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Long format: a leading `run` label column followed by the convergence
/// columns, one block of rows per run.
pub fn write_long_csv<W: Write>(runs: &[(String, Vec<ConvergenceRecord>)], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let mut header = vec!["run"];
    header.extend(CONVERGENCE_COLUMNS);
    w.write_record(&header)?;
    for (label, records) in runs {
        for r in records {
            w.serialize((label.as_str(), Row::from(r)))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(iter: usize) -> ConvergenceRecord {
        ConvergenceRecord {
            iter,
            seconds: 0.5,
            best_objective: -1.25,
            second_objective: -1.0,
            cov_eig_min: 0.0,
            cov_eig_mean: 0.1,
            cov_eig_max: 0.2,
            eigensolver_calls: 40,
            stalled: false,
        }
    }

    #[test]
    fn header_and_rows() {
        let s = convergence_csv_string(&[rec(0), rec(1)]);
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), CONVERGENCE_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "0,0.5,-1.25,-1.0,0.0,0.1,0.2,40");
        assert_eq!(s.lines().count(), 3);
    }

    #[test]
    fn empty_log_still_has_header() {
        assert_eq!(convergence_csv_string(&[]).trim_end(), CONVERGENCE_COLUMNS.join(","));
    }

    #[test]
    fn long_format() {
        let mut buf = Vec::new();
        write_long_csv(&[("inf".into(), vec![rec(0)]), ("2".into(), vec![rec(0)])], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "run,iter,seconds,best_obj,second_obj,cov_eig_min,cov_eig_mean,cov_eig_max,eig_calls");
        assert!(lines[1].starts_with("inf,0,"));
        assert!(lines[2].starts_with("2,0,"));
    }
}
