//! Runs one spec at several tolerances and tabulates oracle counts.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::output::float;
use crate::run::{execute, Outcome, Termination};
use crate::spec::RunSpec;
use crate::CliError;

/// Caps the number of concurrent runs.
pub const THREADS_ENV: &str = "APGCERT_THREADS";

pub const SWEEP_HEADER: [&str; 7] = [
    "epsilon",
    "termination",
    "iterations",
    "grad_evals",
    "prox_evals",
    "evals",
    "slope",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub termination: Termination,
    pub iterations: usize,
    pub grad_evals: u64,
    pub prox_evals: u64,
    /// Slope of `log(evals)` against `log(1/epsilon)` from the previous row.
    pub slope: Option<f64>,
}

impl SweepRow {
    pub fn evals(&self) -> u64 {
        self.grad_evals + self.prox_evals
    }
}

pub fn parse_eps(list: &str) -> Result<Vec<f64>, CliError> {
    let eps = list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("bad epsilon {s:?}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if eps.len() < 2 {
        return Err(CliError::Usage("sweep needs at least two epsilons".into()));
    }
    if eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(CliError::Usage("epsilons must be positive and finite".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Usage("epsilons must be strictly decreasing".into()));
    }
    Ok(eps)
}

pub fn thread_cap() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `spec` once per epsilon on up to `threads` workers. Results come
/// back in the order of `eps`.
pub fn run_all(spec: &RunSpec, eps: &[f64], threads: usize) -> Vec<Result<Outcome, CliError>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Outcome, CliError>>>> =
        Mutex::new((0..eps.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, eps.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= eps.len() {
                    break;
                }
                let mut one = spec.clone();
                one.epsilon = eps[i];
                let res = execute(&one, false);
                slots.lock().expect("no poisoned workers")[i] = Some(res);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

pub fn table(eps: &[f64], outcomes: &[Outcome]) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = eps
        .iter()
        .zip(outcomes)
        .map(|(&epsilon, o)| SweepRow {
            epsilon,
            termination: o.summary.termination,
            iterations: o.summary.iterations,
            grad_evals: o.summary.totals.grad_f_evals,
            prox_evals: o.summary.totals.prox_evals,
            slope: None,
        })
        .collect();
    fill_slopes(&mut rows);
    rows
}

/// Log-log slopes between consecutive certified rows.
pub fn fill_slopes(rows: &mut [SweepRow]) {
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        let ok = |r: &SweepRow| r.termination == Termination::Certified && r.evals() > 0;
        if ok(a) && ok(b) {
            let dy = (b.evals() as f64).ln() - (a.evals() as f64).ln();
            let dx = a.epsilon.ln() - b.epsilon.ln();
            rows[i].slope = Some(dy / dx);
        }
    }
}

pub fn write_table_to<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let term = serde_json::to_value(r.termination).expect("enum serializes");
        w.write_record([
            float(r.epsilon),
            term.as_str().unwrap_or_default().to_string(),
            r.iterations.to_string(),
            r.grad_evals.to_string(),
            r.prox_evals.to_string(),
            r.evals().to_string(),
            r.slope.map(float).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    write_table_to(std::io::BufWriter::new(file), rows).map_err(|e| CliError::Csv(path.to_path_buf(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_list_validation() {
        assert_eq!(parse_eps("1e-2, 1e-4").unwrap(), vec![1e-2, 1e-4]);
        assert!(parse_eps("1e-2").is_err());
        assert!(parse_eps("1e-4,1e-2").is_err());
        assert!(parse_eps("1e-2,1e-2").is_err());
        assert!(parse_eps("1e-2,-1").is_err());
        assert!(parse_eps("1e-2,x").is_err());
    }

    #[test]
    fn slope_is_log_log() {
        let row = |epsilon, grad_evals| SweepRow {
            epsilon,
            termination: Termination::Certified,
            iterations: 1,
            grad_evals,
            prox_evals: 0,
            slope: None,
        };
        let mut rows = vec![row(1e-2, 10), row(1e-4, 100), row(1e-6, 1000)];
        rows[2].termination = Termination::Timeout;
        fill_slopes(&mut rows);
        assert_eq!(rows[0].slope, None);
        assert!((rows[1].slope.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(rows[2].slope, None);
        let mut buf = Vec::new();
        write_table_to(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",10,"));
    }
}
