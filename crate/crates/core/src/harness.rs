//! Experiment runner: solves a training sequence in order, optionally
//! updating and persisting memory, and reports one row per problem.

use std::io::Write;
use std::path::Path;

use log::info;

use crate::grammar::{GrammarError, Scfg};
use crate::memory::{HamState, MemoryError};
use crate::problems::TrainingSequence;
use crate::search::{levin_search, SearchConfig, SearchError, SolutionRecord};

pub const COLUMNS: [&str; 11] =
    ["problemId", "wallTime", "trials", "errors", "cycles", "maxCycles", "p_i", "t_i", "cjs", "entropy", "hamBytes"];

/// Label of the summary row.
pub const ALL: &str = "all";

#[derive(Debug, Clone, PartialEq)]
pub struct RunReportRow {
    pub problem_id: String,
    pub wall_time: f64,
    pub trials: u64,
    pub errors: u64,
    pub cycles: u64,
    pub max_cycles: u64,
    pub p: f64,
    pub t: u64,
    pub cjs: f64,
    pub entropy: f64,
    pub ham_bytes: Option<usize>,
}

impl RunReportRow {
    pub fn from_record(r: &SolutionRecord, ham_bytes: Option<usize>) -> RunReportRow {
        RunReportRow {
            problem_id: r.problem_id.clone(),
            wall_time: r.stats.wall_time,
            trials: r.stats.trials,
            errors: r.stats.errors,
            cycles: r.stats.cycles,
            max_cycles: r.stats.max_cycles,
            p: r.p,
            t: r.t,
            cjs: r.t as f64 / r.p,
            entropy: -r.p.log2(),
            ham_bytes,
        }
    }

    /// The `all` row: total wall time, nothing else.
    pub fn summary(rows: &[RunReportRow]) -> RunReportRow {
        RunReportRow {
            problem_id: ALL.to_string(),
            wall_time: rows.iter().fold(0.0, |acc, r| acc + r.wall_time),
            trials: 0,
            errors: 0,
            cycles: 0,
            max_cycles: 0,
            p: 0.0,
            t: 0,
            cjs: 0.0,
            entropy: 0.0,
            ham_bytes: None,
        }
    }

    pub fn is_summary(&self) -> bool {
        self.problem_id == ALL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
}

fn fmt_big(x: f64) -> String {
    if x.abs() < 1e5 {
        format!("{x:.1}")
    } else {
        format!("{x:.3e}")
    }
}

/// Writes a report header, then rows as they arrive.
pub struct ReportWriter<W: Write> {
    out: W,
    format: ReportFormat,
    with_ham: bool,
}

impl<W: Write> ReportWriter<W> {
    pub fn new(out: W, format: ReportFormat, with_ham: bool) -> std::io::Result<ReportWriter<W>> {
        let mut w = ReportWriter { out, format, with_ham };
        let cols = &COLUMNS[..if with_ham { 11 } else { 10 }];
        match format {
            ReportFormat::Csv => writeln!(w.out, "{}", cols.join(","))?,
            ReportFormat::Table => {
                let cells: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
                w.table_line(&cells)?;
            }
        }
        Ok(w)
    }

    fn table_line(&mut self, cells: &[String]) -> std::io::Result<()> {
        let widths = [14, 9, 9, 9, 11, 11, 11, 7, 11, 8, 9];
        let mut line = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i == 0 {
                line.push_str(&format!("{c:<w$}", w = widths[0]));
            } else {
                line.push_str(&format!(" {c:>w$}", w = widths[i]));
            }
        }
        writeln!(self.out, "{}", line.trim_end())?;
        self.out.flush()
    }

    pub fn row(&mut self, r: &RunReportRow) -> std::io::Result<()> {
        let n = if self.with_ham { 11 } else { 10 };
        let mut cells: Vec<String> = match self.format {
            ReportFormat::Csv => vec![
                r.problem_id.clone(),
                r.wall_time.to_string(),
                r.trials.to_string(),
                r.errors.to_string(),
                r.cycles.to_string(),
                r.max_cycles.to_string(),
                r.p.to_string(),
                r.t.to_string(),
                r.cjs.to_string(),
                r.entropy.to_string(),
                r.ham_bytes.map(|b| b.to_string()).unwrap_or_default(),
            ],
            ReportFormat::Table => vec![
                r.problem_id.clone(),
                format!("{:.2}", r.wall_time),
                r.trials.to_string(),
                r.errors.to_string(),
                r.cycles.to_string(),
                format!("{:.3e}", r.max_cycles as f64),
                format!("{:.3e}", r.p),
                r.t.to_string(),
                fmt_big(r.cjs),
                format!("{:.2}", r.entropy),
                r.ham_bytes.map(|b| b.to_string()).unwrap_or_default(),
            ],
        };
        cells.truncate(n);
        if r.is_summary() {
            for c in &mut cells[2..] {
                c.clear();
            }
        }
        match self.format {
            ReportFormat::Csv => {
                writeln!(self.out, "{}", cells.join(","))?;
                self.out.flush()
            }
            ReportFormat::Table => self.table_line(&cells),
        }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Renders `rows` as given; no summary row is added.
pub fn emit_report(rows: &[RunReportRow], format: ReportFormat) -> String {
    let with_ham = rows.iter().any(|r| r.ham_bytes.is_some());
    let mut w = ReportWriter::new(Vec::new(), format, with_ham).expect("writing to memory");
    for r in rows {
        w.row(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner()).expect("utf-8")
}

#[derive(Debug, thiserror::Error)]
pub enum ReportParseError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("bad value `{value}` in column {column}")]
    Value { column: &'static str, value: String },
}

/// Reads back a CSV report.
pub fn parse_csv_report(text: &str) -> Result<Vec<RunReportRow>, ReportParseError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        fn val<T: std::str::FromStr + Default>(s: &str, column: &'static str) -> Result<T, ReportParseError> {
            if s.is_empty() {
                return Ok(T::default());
            }
            s.parse().map_err(|_| ReportParseError::Value { column, value: s.to_string() })
        }
        let ham = field(10);
        rows.push(RunReportRow {
            problem_id: field(0).to_string(),
            wall_time: val(field(1), COLUMNS[1])?,
            trials: val(field(2), COLUMNS[2])?,
            errors: val(field(3), COLUMNS[3])?,
            cycles: val(field(4), COLUMNS[4])?,
            max_cycles: val(field(5), COLUMNS[5])?,
            p: val(field(6), COLUMNS[6])?,
            t: val(field(7), COLUMNS[7])?,
            cjs: val(field(8), COLUMNS[8])?,
            entropy: val(field(9), COLUMNS[9])?,
            ham_bytes: if ham.is_empty() { None } else { Some(val(ham, COLUMNS[10])?) },
        });
    }
    Ok(rows)
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("problem `{problem}`: {error}")]
    Search { problem: String, error: SearchError, rows: Vec<RunReportRow> },
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// One row per problem solved in this run, then the summary row.
    pub rows: Vec<RunReportRow>,
    pub records: Vec<SolutionRecord>,
    /// Final memory when updates are on.
    pub ham: Option<HamState>,
}

/// Solves the problems of `seq` in order. With `updates`, memory is updated
/// after each solve and, given `ham_path`, saved there; a saved state found
/// at `ham_path` is resumed and the problems it already holds are skipped.
/// Without `updates` every problem sees `scfg` unchanged.
pub fn run_sequence(
    seq: &TrainingSequence,
    scfg: Scfg,
    updates: bool,
    config: &SearchConfig,
    ham_path: Option<&Path>,
    on_row: &mut dyn FnMut(&RunReportRow),
) -> Result<RunOutput, HarnessError> {
    let io_err = |p: &Path| {
        let path = p.display().to_string();
        move |source| HarnessError::Io { path, source }
    };
    let mut ham = HamState::new(scfg);
    if let (true, Some(path)) = (updates, ham_path) {
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            ham = HamState::deserialize(&text)?;
            info!("resumed memory from {} with {} solutions", path.display(), ham.corpus.len());
        }
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for problem in &seq.problems {
        if ham.corpus.iter().any(|r| r.record.problem_id == problem.id) {
            continue;
        }
        let record = match levin_search(&ham.scfg, problem, config) {
            Ok(r) => r,
            Err(error) => {
                let mut rows = rows;
                let all = RunReportRow::summary(&rows);
                on_row(&all);
                rows.push(all);
                return Err(HarnessError::Search { problem: problem.id.clone(), error, rows });
            }
        };
        info!("solved {} with {} (p={:e}, t={})", problem.id, record.program, record.p, record.t);
        let bytes = if updates {
            ham.full_update(&record)?;
            let text = ham.serialize();
            if let Some(path) = ham_path {
                std::fs::write(path, &text).map_err(io_err(path))?;
            }
            Some(text.len())
        } else {
            None
        };
        let row = RunReportRow::from_record(&record, bytes);
        on_row(&row);
        rows.push(row);
        records.push(record);
    }
    let all = RunReportRow::summary(&rows);
    on_row(&all);
    rows.push(all);
    Ok(RunOutput { rows, records, ham: updates.then_some(ham) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, p: f64, t: u64, ham: Option<usize>) -> RunReportRow {
        RunReportRow::from_record(
            &SolutionRecord {
                problem_id: id.into(),
                arity: 1,
                program: String::new(),
                roots: Vec::new(),
                steps: Vec::new(),
                log_prob: p.log2(),
                p,
                t,
                stats: crate::search::SearchStats {
                    trials: 3,
                    errors: 1,
                    cycles: 90,
                    max_cycles: 1_000_000,
                    wall_time: 0.125,
                },
            },
            ham,
        )
    }

    #[test]
    fn header_only() {
        assert_eq!(
            emit_report(&[], ReportFormat::Csv),
            "problemId,wallTime,trials,errors,cycles,maxCycles,p_i,t_i,cjs,entropy\n"
        );
    }

    #[test]
    fn table_values() {
        let text = emit_report(&[row("inv", 0.0277, 15, None)], ReportFormat::Table);
        let line = text.lines().nth(1).unwrap();
        assert!(line.contains(" 541.5"), "{line}");
        assert!(line.contains(" 5.17"), "{line}");
        assert!(line.starts_with("inv"));
        assert!(line.contains(" 0.13 ") || line.contains(" 0.12 "), "{line}");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row("a", 0.0277, 15, Some(100)), row("b", 7.91e-6, 20, Some(120))];
        assert_eq!(parse_csv_report(&emit_report(&rows, ReportFormat::Csv)).unwrap(), rows);
        let rows = vec![row("a", 0.5, 2, None)];
        assert_eq!(parse_csv_report(&emit_report(&rows, ReportFormat::Csv)).unwrap(), rows);
    }

    #[test]
    fn summary_row_blank() {
        let rows = vec![row("a", 0.5, 2, None), row("b", 0.25, 2, None)];
        let all = RunReportRow::summary(&rows);
        assert_eq!(all.wall_time, 0.25);
        let text = emit_report(&[all], ReportFormat::Csv);
        assert_eq!(text.lines().nth(1).unwrap(), "all,0.25,,,,,,,,");
    }
}
