//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default, so an empty file is a valid configuration. Lists are comma
//! separated.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::calibrate::{ChainConfig, ParameterBox, Retention};
use crate::ensemble::{check_probability_set, EnsembleSettings, SchemeId, DEFAULT_PROBABILITIES};
use crate::error::{Error, Result};
use crate::evaluate::DEFAULT_ALPHAS;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub input_dir: PathBuf,
    /// Catchment ids (file stems); empty means every `*.csv` in `input_dir`.
    pub catchments: Vec<String>,
    pub warmup: usize,
    pub calibration: usize,
    pub training: usize,
    /// Testing months; `None` uses every month after training.
    pub testing: Option<usize>,
    pub probabilities: Vec<f64>,
    pub alphas: Vec<f64>,
    pub m: usize,
    pub schemes: Vec<SchemeId>,
    pub n_chains: usize,
    pub n_iterations: usize,
    pub retain_per_chain: usize,
    pub psrf_threshold: f64,
    pub max_restarts: usize,
    pub theta1_bounds: (f64, f64),
    pub theta2_bounds: (f64, f64),
    pub retention: Retention,
    pub basic_includes_warmup: bool,
    pub clamp_nonnegative: bool,
    pub chain_dump: bool,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let chains = ChainConfig::default();
        ExperimentConfig {
            input_dir: PathBuf::from("data"),
            catchments: Vec::new(),
            warmup: 12,
            calibration: 144,
            training: 144,
            testing: None,
            probabilities: DEFAULT_PROBABILITIES.to_vec(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            m: 600,
            schemes: SchemeId::ALL.to_vec(),
            n_chains: chains.n_chains,
            n_iterations: chains.n_iterations,
            retain_per_chain: chains.retain_per_chain,
            psrf_threshold: chains.psrf_threshold,
            max_restarts: chains.max_restarts,
            theta1_bounds: (chains.bounds.lower[0], chains.bounds.upper[0]),
            theta2_bounds: (chains.bounds.lower[1], chains.bounds.upper[1]),
            retention: Retention::BayesianTail,
            basic_includes_warmup: true,
            clamp_nonnegative: false,
            chain_dump: false,
            output_dir: PathBuf::from("out"),
            seed: 0,
            workers: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "input_dir",
    "catchments",
    "warmup",
    "calibration",
    "training",
    "testing",
    "probabilities",
    "alphas",
    "m",
    "schemes",
    "n_chains",
    "n_iterations",
    "retain_per_chain",
    "psrf_threshold",
    "max_restarts",
    "theta1_min",
    "theta1_max",
    "theta2_min",
    "theta2_max",
    "retention",
    "basic_includes_warmup",
    "clamp_nonnegative",
    "chain_dump",
    "output_dir",
    "seed",
    "workers",
];

fn parse_list<T>(
    value: &str,
    f: impl Fn(&str) -> std::result::Result<T, String>,
) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}

fn parse_num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse::<T>().map_err(|_| format!("'{s}' is not a valid number"))
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("'{s}' is not a boolean")),
    }
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key.trim() {
            "input_dir" => self.input_dir = PathBuf::from(v),
            "catchments" => self.catchments = parse_list(v, |s| Ok(s.to_string()))?,
            "warmup" => self.warmup = parse_num(v)?,
            "calibration" => self.calibration = parse_num(v)?,
            "training" => self.training = parse_num(v)?,
            "testing" => {
                self.testing = if v.is_empty() || v == "auto" {
                    None
                } else {
                    Some(parse_num(v)?)
                }
            }
            "probabilities" => self.probabilities = parse_list(v, parse_num)?,
            "alphas" => self.alphas = parse_list(v, parse_num)?,
            "m" => self.m = parse_num(v)?,
            "schemes" => self.schemes = parse_list(v, |s| s.parse::<SchemeId>().map_err(|e| e.to_string()))?,
            "n_chains" => self.n_chains = parse_num(v)?,
            "n_iterations" => self.n_iterations = parse_num(v)?,
            "retain_per_chain" => self.retain_per_chain = parse_num(v)?,
            "psrf_threshold" => self.psrf_threshold = parse_num(v)?,
            "max_restarts" => self.max_restarts = parse_num(v)?,
            "theta1_min" => self.theta1_bounds.0 = parse_num(v)?,
            "theta1_max" => self.theta1_bounds.1 = parse_num(v)?,
            "theta2_min" => self.theta2_bounds.0 = parse_num(v)?,
            "theta2_max" => self.theta2_bounds.1 = parse_num(v)?,
            "retention" => {
                self.retention = match v {
                    "bayesian" | "bayesian-tail" => Retention::BayesianTail,
                    "informal" | "informal-head" => Retention::InformalHead,
                    _ => return Err(format!("retention must be 'bayesian' or 'informal', got '{v}'")),
                }
            }
            "basic_includes_warmup" => self.basic_includes_warmup = parse_bool(v)?,
            "clamp_nonnegative" => self.clamp_nonnegative = parse_bool(v)?,
            "chain_dump" => self.chain_dump = parse_bool(v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "seed" => self.seed = parse_num(v)?,
            "workers" => self.workers = parse_num(v)?,
            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Parses configuration text on top of the defaults, then validates.
    /// Every problem found is reported.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                problems.push(format!("line {}: expected key = value", lineno + 1));
                continue;
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                problems.push(format!("line {}: duplicate key '{key}'", lineno + 1));
            }
            if let Err(e) = cfg.set(key, value) {
                problems.push(format!("line {}: {e}", lineno + 1));
            }
        }
        if let Err(Error::Config(more)) = cfg.validate() {
            problems.extend(more);
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text)
    }

    /// Writes every key, so that loading the file yields this configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("input_dir", self.input_dir.display().to_string());
        put("catchments", self.catchments.join(","));
        put("warmup", self.warmup.to_string());
        put("calibration", self.calibration.to_string());
        put("training", self.training.to_string());
        put("testing", self.testing.map_or("auto".to_string(), |n| n.to_string()));
        put("probabilities", join(&self.probabilities));
        put("alphas", join(&self.alphas));
        put("m", self.m.to_string());
        put("schemes", join(&self.schemes));
        put("n_chains", self.n_chains.to_string());
        put("n_iterations", self.n_iterations.to_string());
        put("retain_per_chain", self.retain_per_chain.to_string());
        put("psrf_threshold", self.psrf_threshold.to_string());
        put("max_restarts", self.max_restarts.to_string());
        put("theta1_min", self.theta1_bounds.0.to_string());
        put("theta1_max", self.theta1_bounds.1.to_string());
        put("theta2_min", self.theta2_bounds.0.to_string());
        put("theta2_max", self.theta2_bounds.1.to_string());
        put(
            "retention",
            match self.retention {
                Retention::BayesianTail => "bayesian",
                Retention::InformalHead => "informal",
            }
            .to_string(),
        );
        put("basic_includes_warmup", self.basic_includes_warmup.to_string());
        put("clamp_nonnegative", self.clamp_nonnegative.to_string());
        put("chain_dump", self.chain_dump.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("seed", self.seed.to_string());
        put("workers", self.workers.to_string());
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.calibration == 0 {
            problems.push("calibration must be at least 1 month".to_string());
        }
        if self.training == 0 {
            problems.push("training must be at least 1 month".to_string());
        }
        if self.testing == Some(0) {
            problems.push("testing must be at least 1 month".to_string());
        }
        if self.m == 0 {
            problems.push("m must be at least 1".to_string());
        }
        if self.schemes.is_empty() {
            problems.push("schemes must not be empty".to_string());
        }
        let mut seen = BTreeSet::new();
        for s in &self.schemes {
            if !seen.insert(*s) {
                problems.push(format!("scheme {s} listed twice"));
            }
        }
        if let Err(e) = check_probability_set(&self.probabilities) {
            problems.push(e.to_string());
        }
        if self.alphas.is_empty() {
            problems.push("alphas must not be empty".to_string());
        }
        for &a in &self.alphas {
            let has = |p: f64| self.probabilities.iter().any(|q| (q - p).abs() < 1e-12);
            if !(a > 0.0 && a < 1.0) {
                problems.push(format!("alpha {a} outside (0, 1)"));
            } else if !has(a / 2.0) || !has(1.0 - a / 2.0) {
                problems.push(format!(
                    "alpha {a} needs probabilities {} and {}",
                    a / 2.0,
                    1.0 - a / 2.0
                ));
            }
        }
        match self.chain_config(0) {
            Ok(chains) => {
                if let Err(Error::Config(more)) = chains.validate() {
                    problems.extend(more);
                }
                if self.schemes.iter().any(|s| s.is_ensemble()) && self.m > chains.n_chains * chains.retain_per_chain {
                    problems.push(format!(
                        "m = {} exceeds the {} retained parameter sets",
                        self.m,
                        chains.n_chains * chains.retain_per_chain
                    ));
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Calibration settings with the given seed.
    pub fn chain_config(&self, seed: u64) -> Result<ChainConfig> {
        let bounds = ParameterBox::new(
            vec![self.theta1_bounds.0, self.theta2_bounds.0],
            vec![self.theta1_bounds.1, self.theta2_bounds.1],
        )?;
        Ok(ChainConfig {
            n_chains: self.n_chains,
            n_iterations: self.n_iterations,
            retain_per_chain: self.retain_per_chain,
            psrf_threshold: self.psrf_threshold,
            max_restarts: self.max_restarts,
            seed,
            bounds,
            retention: self.retention,
        })
    }

    pub fn ensemble_settings(&self, seed: u64) -> EnsembleSettings {
        EnsembleSettings {
            probabilities: self.probabilities.clone(),
            m: self.m,
            seed,
            basic_includes_warmup: self.basic_includes_warmup,
            clamp_nonnegative: self.clamp_nonnegative,
        }
    }

    pub fn known_keys() -> &'static [&'static str] {
        KEYS
    }
}
