//! Trace CSV and summary JSON writers.

use std::io::Write;
use std::path::Path;

use crate::run::{Summary, Trace};
use crate::CliError;

pub const INNER_HEADER: [&str; 10] = [
    "t",
    "n_t",
    "gamma_t",
    "alpha_t",
    "beta_t",
    "F",
    "lambda_prod",
    "grad_evals",
    "prox_evals",
    "cert_residual",
];

pub const OUTER_HEADER: [&str; 9] = [
    "k",
    "rho_k",
    "eta_k",
    "inner_iters",
    "grad_evals",
    "prox_evals",
    "step_norm",
    "stat_res",
    "comp_res",
];

/// 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

pub fn write_trace_to<W: Write>(out: W, trace: &Trace) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match trace {
        Trace::Inner(rows) => {
            w.write_record(INNER_HEADER)?;
            for r in rows {
                w.write_record([
                    r.t.to_string(),
                    r.n_t.to_string(),
                    float(r.gamma),
                    float(r.alpha),
                    float(r.beta),
                    float(r.objective),
                    float(r.lambda_prod),
                    r.grad_evals.to_string(),
                    r.prox_evals.to_string(),
                    opt_float(r.cert_residual),
                ])?;
            }
        }
        Trace::Outer(rows) => {
            w.write_record(OUTER_HEADER)?;
            for r in rows {
                w.write_record([
                    r.k.to_string(),
                    float(r.rho),
                    float(r.eta),
                    r.inner_iters.to_string(),
                    r.total_grad_evals.to_string(),
                    r.total_prox_evals.to_string(),
                    float(r.step_norm),
                    float(r.stationarity),
                    opt_float(r.complementarity),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    write_trace_to(std::io::BufWriter::new(file), trace).map_err(|e| CliError::Csv(path.to_path_buf(), e))
}

pub fn summary_json(summary: &Summary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), CliError> {
    std::fs::write(path, summary_json(summary)).map_err(|e| CliError::Io(path.to_path_buf(), e))
}
