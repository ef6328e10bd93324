use std::fmt::Write as _;
use std::io;
use std::path::Path;

use kerrgate::analysis::{geometry, p_error, run_shots, Experiment};
use kerrgate::measurement::{collapse_at, outcome_density, threshold};
use kerrgate::optics::{apply_parity_coupling, build_parity_coupling_pair};
use kerrgate::oracle::{oracle_collapse, oracle_embed, oracle_homodyne_density, oracle_parity_coupling};
use kerrgate::{HybridState, ParityBasis, ProbeMode};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ExperimentConfig, Format, Mode};

pub const CSV_HEADER: &str = "experiment,alpha,theta,shots,seed,x0,xd,p_error_analytic,error_rate,error_ci,mean_fidelity";

/// Fock truncation used by `validate-oracle`.
pub const ORACLE_TRUNCATION: usize = 60;
pub const ORACLE_DENSITY_TOLERANCE: f64 = 1e-6;
pub const ORACLE_FIDELITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Simulation(#[from] kerrgate::Error),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: io::Error },
    #[error("oracle disagreement: density deviation {deviation:e}, fidelity {fidelity}")]
    OracleMismatch { deviation: f64, fidelity: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub alpha: f64,
    pub theta: f64,
    pub shots: u64,
    pub seed: u64,
    pub x0: f64,
    pub xd: f64,
    pub p_error_analytic: f64,
    pub error_rate: f64,
    pub error_ci: f64,
    pub mean_fidelity: f64,
}

fn shot_row(experiment: Experiment, config: &ExperimentConfig, alpha: f64, theta: f64) -> Result<ResultRow, RunError> {
    let g = geometry(alpha, theta)?;
    let stats = run_shots(experiment, &config.input, alpha, theta, config.shots, config.seed)?;
    Ok(ResultRow {
        experiment: experiment.name().to_string(),
        alpha,
        theta,
        shots: stats.shots,
        seed: stats.seed,
        x0: g.x0,
        xd: g.xd,
        p_error_analytic: p_error(alpha, theta)?,
        error_rate: stats.logical_error_rate,
        error_ci: stats.error_ci,
        mean_fidelity: stats.mean_fidelity,
    })
}

/// Compares the branch model with the Fock oracle on a parity-gate state:
/// returns (density sup-norm deviation, worst state fidelity).
pub fn oracle_check(config: &ExperimentConfig) -> Result<(f64, f64), RunError> {
    let probe = ProbeMode::new(config.alpha, config.theta)?;
    let mut s = HybridState::product(&config.input)?;
    let p = s.activate_probe(probe);
    let mut o = oracle_embed(&s, ORACLE_TRUNCATION)?;
    let pair = build_parity_coupling_pair(0, 1, p, ParityBasis::Computational)?;
    let s = apply_parity_coupling(&s, &pair)?;
    o = oracle_parity_coupling(&o, &pair)?;

    let mut fidelity = oracle_embed(&s, ORACLE_TRUNCATION)?.fidelity(&o)?;
    let branch = outcome_density(&s, p)?;
    let oracle = oracle_homodyne_density(&o, p)?;
    let (lo, hi) = branch.peak_range();
    let (lo, hi) = (lo - 7.0, hi + 7.0);
    let steps = ((hi - lo) / 0.005).ceil() as usize;
    let mut deviation = 0.0f64;
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        deviation = deviation.max((branch.eval(x) - oracle.eval(x)).abs());
    }
    for x in [lo + 7.0, threshold(&probe), hi - 7.0] {
        let (_, c) = collapse_at(&s, p, x)?;
        let oc = oracle_collapse(&o, p, x)?;
        fidelity = fidelity.min(oracle_embed(&c, ORACLE_TRUNCATION)?.fidelity(&oc)?);
    }
    Ok((deviation, fidelity))
}

pub fn compute_rows(config: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    match config.mode {
        Mode::Run(e) => Ok(vec![shot_row(e, config, config.alpha, config.theta)?]),
        Mode::Sweep => {
            let alphas = config.grid_alpha.as_ref().map_or(vec![config.alpha], |g| g.0.clone());
            let thetas = config.grid_theta.as_ref().map_or(vec![config.theta], |g| g.0.clone());
            let mut rows = Vec::with_capacity(alphas.len() * thetas.len());
            for &a in &alphas {
                for &t in &thetas {
                    rows.push(shot_row(config.sweep_of, config, a, t)?);
                }
            }
            Ok(rows)
        }
        Mode::ValidateOracle => {
            let (deviation, fidelity) = oracle_check(config)?;
            let g = geometry(config.alpha, config.theta)?;
            let row = ResultRow {
                experiment: Mode::ValidateOracle.name().to_string(),
                alpha: config.alpha,
                theta: config.theta,
                shots: 0,
                seed: config.seed,
                x0: g.x0,
                xd: g.xd,
                p_error_analytic: p_error(config.alpha, config.theta)?,
                error_rate: deviation,
                error_ci: 0.0,
                mean_fidelity: fidelity,
            };
            Ok(vec![row])
        }
    }
}

/// Floats with 17 significant digits.
fn f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            f(r.alpha),
            f(r.theta),
            r.shots,
            r.seed,
            f(r.x0),
            f(r.xd),
            f(r.p_error_analytic),
            f(r.error_rate),
            f(r.error_ci),
            f(r.mean_fidelity)
        );
    }
    out
}

pub fn render_json(rows: &[ResultRow]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("rows are plain data");
    s.push('\n');
    s
}

pub fn write_rows(rows: &[ResultRow], format: Format, path: &Path) -> Result<(), RunError> {
    let text = match format {
        Format::Csv => render_csv(rows),
        Format::Json => render_json(rows),
    };
    std::fs::write(path, text).map_err(|source| RunError::Output {
        path: path.display().to_string(),
        source,
    })
}

/// Computes, writes and returns the rows. An oracle disagreement is reported
/// after the row has been written.
pub fn run(config: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    let rows = compute_rows(config)?;
    write_rows(&rows, config.format, &config.output)?;
    if config.mode == Mode::ValidateOracle {
        let r = &rows[0];
        if !(r.error_rate < ORACLE_DENSITY_TOLERANCE && r.mean_fidelity >= 1.0 - ORACLE_FIDELITY_TOLERANCE) {
            return Err(RunError::OracleMismatch {
                deviation: r.error_rate,
                fidelity: r.mean_fidelity,
            });
        }
    }
    Ok(rows)
}

pub fn summary(config: &ExperimentConfig, rows: &[ResultRow], seconds: f64) -> String {
    match config.mode {
        Mode::ValidateOracle => format!(
            "validate-oracle alpha={} theta={} density_deviation={:.3e} fidelity={:.12} runtime={seconds:.3}s",
            config.alpha, config.theta, rows[0].error_rate, rows[0].mean_fidelity
        ),
        Mode::Sweep => {
            let max_p = rows.iter().map(|r| r.p_error_analytic).fold(0.0, f64::max);
            let max_e = rows.iter().map(|r| r.error_rate).fold(0.0, f64::max);
            format!(
                "sweep of {} points={} max_p_error_analytic={max_p:.3e} max_error_rate={max_e:.3e} runtime={seconds:.3}s",
                config.sweep_of,
                rows.len()
            )
        }
        Mode::Run(e) => {
            let r = &rows[0];
            format!(
                "{e} p_error_analytic={:.3e} error_rate={:.3e} (±{:.1e}) mean_fidelity={:.9} runtime={seconds:.3}s",
                r.p_error_analytic, r.error_rate, r.error_ci, r.mean_fidelity
            )
        }
    }
}
