//! Experiment configuration: a flat `key = value` file merged with command
//! line flags, flags taking precedence.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kerrgate::analysis::Experiment;
use kerrgate::oracle::MAX_ORACLE_ALPHA;
use num_complex::Complex64 as C64;
use thiserror::Error;

/// A configuration problem, attributed to one key.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("config error in `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

fn bad<T>(key: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        key: key.to_string(),
        message: message.into(),
    })
}

pub const KEYS: [&str; 11] = [
    "experiment",
    "alpha",
    "theta",
    "shots",
    "seed",
    "input",
    "grid_alpha",
    "grid_theta",
    "sweep_of",
    "output",
    "format",
];

/// Alternative spellings accepted in config files.
fn canonical_key(key: &str) -> Option<&'static str> {
    let key = match key {
        "input_state" => "input",
        "output_path" => "output",
        "output_format" => "format",
        k => k,
    };
    KEYS.iter().copied().find(|k| *k == key)
}

pub const DEFAULT_SHOTS: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_ALPHA: f64 = 100.0;
pub const DEFAULT_THETA: f64 = 0.5;
/// Control in (|H⟩ + |V⟩)/√2, target in |H⟩.
pub const DEFAULT_INPUT: &str = "1,1;1,0";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run(Experiment),
    Sweep,
    ValidateOracle,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Run(e) => e.name(),
            Mode::Sweep => "sweep",
            Mode::ValidateOracle => "validate-oracle",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sweep" => Ok(Mode::Sweep),
            "validate-oracle" => Ok(Mode::ValidateOracle),
            _ => s.parse::<Experiment>().map(Mode::Run).map_err(|_| {
                format!("unknown experiment {s:?}; expected parity, entangler, entangler45, cnot, sweep or validate-oracle")
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Either `start:end:count` (inclusive, evenly spaced) or a comma list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let values = match parts.as_slice() {
            [a, b, n] => {
                let a: f64 = a.parse().map_err(|_| format!("bad grid start {a:?}"))?;
                let b: f64 = b.parse().map_err(|_| format!("bad grid end {b:?}"))?;
                let n: usize = n.parse().map_err(|_| format!("bad grid count {n:?}"))?;
                match n {
                    0 => return Err("grid count must be at least 1".into()),
                    1 => vec![a],
                    _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
                }
            }
            [list] => list
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad grid value {v:?}")))
                .collect::<Result<_, _>>()?,
            _ => return Err(format!("expected start:end:count or a comma list, got {s:?}")),
        };
        Ok(Grid(values))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub alpha: f64,
    pub theta: f64,
    pub shots: u64,
    pub seed: u64,
    /// Normalized (c0, c1) per input qubit.
    pub input: Vec<(C64, C64)>,
    pub grid_alpha: Option<Grid>,
    pub grid_theta: Option<Grid>,
    /// Experiment run at each point of a sweep.
    pub sweep_of: Experiment,
    pub output: PathBuf,
    pub format: Format,
}

/// Raw `key → value` settings, before validation.
pub type RawConfig = BTreeMap<&'static str, String>;

pub fn parse_config_text(text: &str) -> Result<RawConfig, ConfigError> {
    let mut out = RawConfig::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return bad(line, format!("line {}: expected `key = value`", i + 1));
        };
        let key = key.trim();
        let Some(k) = canonical_key(key) else {
            return bad(key, "unknown key");
        };
        out.insert(k, value.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<RawConfig, ConfigError> {
    let text = std::fs::read_to_string(path).or_else(|e| bad("config", format!("{}: {e}", path.display())))?;
    parse_config_text(&text)
}

fn number<T: FromStr>(raw: &RawConfig, key: &str, default: T) -> Result<T, ConfigError> {
    match raw.get(key) {
        None => Ok(default),
        Some(v) => v.parse().or_else(|_| bad(key, format!("cannot parse {v:?}"))),
    }
}

fn check_alpha(key: &str, a: f64) -> Result<(), ConfigError> {
    if !(a.is_finite() && a >= 0.0) {
        return bad(key, format!("alpha must be finite and >= 0, got {a}"));
    }
    Ok(())
}

fn check_theta(key: &str, t: f64) -> Result<(), ConfigError> {
    if !(t.is_finite() && (0.0..=PI).contains(&t)) {
        return bad(key, format!("theta must lie in [0, pi], got {t}"));
    }
    Ok(())
}

/// `c0,c1;c0,c1;...`; each amplitude is any complex literal (`0.6`, `0.8i`,
/// `1-2i`). Pairs are normalized.
pub fn parse_input(s: &str) -> Result<Vec<(C64, C64)>, String> {
    s.split(';')
        .map(|pair| {
            let parts: Vec<&str> = pair.split(',').map(str::trim).collect();
            let [a, b] = parts.as_slice() else {
                return Err(format!("expected `c0,c1`, got {pair:?}"));
            };
            let parse = |v: &str| v.parse::<C64>().map_err(|_| format!("bad amplitude {v:?}"));
            let (a, b) = (parse(a)?, parse(b)?);
            let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(format!("pair {pair:?} has zero or non-finite norm"));
            }
            Ok((a / norm, b / norm))
        })
        .collect()
}

/// Validates merged settings into a config.
pub fn build_config(raw: &RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let mode = match raw.get("experiment") {
        None => return bad("experiment", "missing (parity, entangler, entangler45, cnot, sweep or validate-oracle)"),
        Some(v) => v.parse::<Mode>().or_else(|e| bad("experiment", e))?,
    };
    let alpha = number(raw, "alpha", DEFAULT_ALPHA)?;
    check_alpha("alpha", alpha)?;
    let theta = number(raw, "theta", DEFAULT_THETA)?;
    check_theta("theta", theta)?;
    let shots = number(raw, "shots", DEFAULT_SHOTS)?;
    if shots == 0 {
        return bad("shots", "must be at least 1");
    }
    let seed = number(raw, "seed", DEFAULT_SEED)?;

    let input_text = raw.get("input").map(String::as_str).unwrap_or(DEFAULT_INPUT);
    let input = parse_input(input_text).or_else(|e| bad("input", e))?;
    if input.len() != 2 {
        return bad("input", format!("experiments take two qubits, got {}", input.len()));
    }

    let grid = |key: &str, check: fn(&str, f64) -> Result<(), ConfigError>| -> Result<Option<Grid>, ConfigError> {
        let Some(v) = raw.get(key) else { return Ok(None) };
        let g: Grid = v.parse().or_else(|e| bad(key, e))?;
        for x in &g.0 {
            check(key, *x)?;
        }
        Ok(Some(g))
    };
    let grid_alpha = grid("grid_alpha", check_alpha)?;
    let grid_theta = grid("grid_theta", check_theta)?;

    let sweep_of = match raw.get("sweep_of") {
        None => Experiment::Cnot,
        Some(v) => v.parse::<Experiment>().or_else(|e| bad("sweep_of", e.to_string()))?,
    };
    match mode {
        Mode::Sweep if grid_alpha.is_none() && grid_theta.is_none() => {
            return bad("grid_alpha", "sweep needs grid_alpha and/or grid_theta");
        }
        Mode::ValidateOracle if alpha > MAX_ORACLE_ALPHA => {
            return bad("alpha", format!("validate-oracle accepts alpha <= {MAX_ORACLE_ALPHA}, got {alpha}"));
        }
        _ => {}
    }

    let format = match raw.get("format").map(String::as_str) {
        None | Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some(v) => return bad("format", format!("expected csv or json, got {v:?}")),
    };
    let output = match raw.get("output") {
        Some(v) if v.is_empty() => return bad("output", "empty path"),
        Some(v) => PathBuf::from(v),
        None => PathBuf::from(match format {
            Format::Csv => "results.csv",
            Format::Json => "results.json",
        }),
    };

    Ok(ExperimentConfig {
        mode,
        alpha,
        theta,
        shots,
        seed,
        input,
        grid_alpha,
        grid_theta,
        sweep_of,
        output,
        format,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(pairs: &[(&'static str, &str)]) -> RawConfig {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn flags_example_is_valid() {
        let c = build_config(&raw(&[
            ("experiment", "cnot"),
            ("alpha", "50"),
            ("theta", "0.5"),
            ("shots", "100000"),
            ("seed", "7"),
        ]))
        .unwrap();
        assert_eq!(c.mode, Mode::Run(Experiment::Cnot));
        assert_eq!((c.alpha, c.theta, c.shots, c.seed), (50.0, 0.5, 100_000, 7));
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.output, PathBuf::from("results.csv"));
    }

    #[test]
    fn defaults() {
        let c = build_config(&raw(&[("experiment", "parity")])).unwrap();
        assert_eq!((c.shots, c.seed), (DEFAULT_SHOTS, DEFAULT_SEED));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c.input[0].0.re - h).abs() < 1e-15 && (c.input[0].1.re - h).abs() < 1e-15);
    }

    #[test]
    fn file_syntax() {
        let r = parse_config_text("# run\nexperiment = entangler45  # trailing\n\n theta=0.25\ninput_state = 1,0.5i;1,-1\n").unwrap();
        assert_eq!(r["experiment"], "entangler45");
        assert_eq!(r["theta"], "0.25");
        let c = build_config(&r).unwrap();
        assert!((c.input[0].1 - C64::new(0.0, 0.5 / 1.25f64.sqrt())).norm() < 1e-15);
        assert_eq!(parse_config_text("colour = red").unwrap_err().key, "colour");
        assert_eq!(parse_config_text("alpha 3").unwrap_err().key, "alpha 3");
    }

    #[test]
    fn range_violations_name_the_key() {
        let err = |pairs: &[(&'static str, &str)]| build_config(&raw(pairs)).unwrap_err().key;
        assert_eq!(err(&[("experiment", "cnot"), ("theta", "4.0")]), "theta");
        assert_eq!(err(&[("experiment", "cnot"), ("alpha", "-1")]), "alpha");
        assert_eq!(err(&[("experiment", "cnot"), ("shots", "0")]), "shots");
        assert_eq!(err(&[("experiment", "cnot"), ("seed", "x")]), "seed");
        assert_eq!(err(&[("experiment", "toffoli")]), "experiment");
        assert_eq!(err(&[]), "experiment");
        assert_eq!(err(&[("experiment", "sweep")]), "grid_alpha");
        assert_eq!(err(&[("experiment", "sweep"), ("grid_theta", "0:4:3")]), "grid_theta");
        assert_eq!(err(&[("experiment", "validate-oracle"), ("alpha", "5")]), "alpha");
        assert_eq!(err(&[("experiment", "cnot"), ("input", "1,0")]), "input");
        assert_eq!(err(&[("experiment", "cnot"), ("input", "0,0;1,0")]), "input");
        assert_eq!(err(&[("experiment", "cnot"), ("format", "xml")]), "format");
    }

    #[test]
    fn grids() {
        assert_eq!("1:2:3".parse::<Grid>().unwrap(), Grid(vec![1.0, 1.5, 2.0]));
        assert_eq!("4:9:1".parse::<Grid>().unwrap(), Grid(vec![4.0]));
        assert_eq!("0.1, 0.3".parse::<Grid>().unwrap(), Grid(vec![0.1, 0.3]));
        assert!("1:2".parse::<Grid>().is_err());
        assert!("1:2:0".parse::<Grid>().is_err());
    }
}
