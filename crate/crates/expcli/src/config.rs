use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ExpError;

/// How the sparsity of each trial is chosen from its dictionary's `m*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MRule {
    MStar,
    /// `max(1, round(c * m*))`.
    Multiple(f64),
    /// A fixed sparsity, independent of the dictionary.
    Fixed(usize),
}

impl MRule {
    pub fn resolve(self, m_star: usize) -> usize {
        match self {
            MRule::MStar => m_star,
            MRule::Multiple(c) => ((c * m_star as f64).round() as usize).max(1),
            MRule::Fixed(m) => m,
        }
    }
}

/// Ball radius: a multiple of `||x*||_1` or an absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaRule {
    Multiplier(f64),
    Absolute(f64),
}

impl BetaRule {
    pub fn resolve(self, x_star_l1: f64) -> f64 {
        match self {
            BetaRule::Multiplier(c) => c * x_star_l1,
            BetaRule::Absolute(b) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictKind {
    /// Fresh seeded Gaussian dictionary per trial.
    Gaussian,
    /// The `d x d` identity (test hook; `n` must equal `d`).
    Orthonormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n: usize,
    pub trials: usize,
    pub m_rule: MRule,
    pub beta_rule: BetaRule,
    pub max_iters: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    /// Sparsity multipliers swept by exp2.
    pub m_multipliers: Vec<f64>,
    /// The smaller radius multiplier of exp3.
    pub beta_low_mult: f64,
    pub dictionary: DictKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 500,
            n: 1000,
            trials: 50,
            m_rule: MRule::MStar,
            beta_rule: BetaRule::Multiplier(8.0),
            max_iters: 300,
            base_seed: 0,
            out_dir: PathBuf::from("out"),
            jobs: 0,
            m_multipliers: vec![1.0, 2.0, 5.0, 20.0],
            beta_low_mult: 1.1,
            dictionary: DictKind::Gaussian,
        }
    }
}

impl ExperimentConfig {
    /// Full-size setting: d = 10000, n = 20000, 2000 trials.
    pub fn paper_scale() -> Self {
        Self {
            d: 10_000,
            n: 20_000,
            trials: 2000,
            max_iters: 1000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ExpError> {
        let bad = |msg: String| Err(ExpError::Config(msg));
        if self.d == 0 || self.n == 0 {
            return bad(format!(
                "d = {} and n = {} must be positive",
                self.d, self.n
            ));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1".into());
        }
        match self.m_rule {
            MRule::Multiple(c) if !(c > 0.0 && c.is_finite()) => {
                return bad(format!("m multiplier must be > 0, got {c}"))
            }
            MRule::Fixed(0) => return bad("fixed m must be >= 1".into()),
            MRule::Fixed(m) if m > self.n => {
                return bad(format!("fixed m = {m} exceeds n = {}", self.n))
            }
            _ => {}
        }
        match self.beta_rule {
            BetaRule::Multiplier(c) | BetaRule::Absolute(c) if !(c > 0.0 && c.is_finite()) => {
                return bad(format!("beta rule value must be > 0, got {c}"))
            }
            _ => {}
        }
        if let Some(c) = self
            .m_multipliers
            .iter()
            .find(|c| !(**c > 0.0 && c.is_finite()))
        {
            return bad(format!("m multipliers must be > 0, got {c}"));
        }
        if !(self.beta_low_mult > 0.0 && self.beta_low_mult.is_finite()) {
            return bad(format!(
                "beta_low_mult must be > 0, got {}",
                self.beta_low_mult
            ));
        }
        if self.dictionary == DictKind::Orthonormal && self.d != self.n {
            return bad(format!(
                "orthonormal dictionary needs d = n, got {}x{}",
                self.d, self.n
            ));
        }
        Ok(())
    }
}

/// `--config` file contents: flat `key = value` pairs, all optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub beta_mult: Option<f64>,
    pub beta_abs: Option<f64>,
    /// `"m_star"` or a number of atoms.
    pub m_rule: Option<toml::Value>,
    pub m_mult: Option<f64>,
    pub m_mults: Option<Vec<f64>>,
    pub beta_low_mult: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub dictionary: Option<DictKind>,
    pub paper_scale: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ExpError> {
        toml::from_str(text).map_err(|e| ExpError::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ExpError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExpError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), ExpError> {
        if self.paper_scale == Some(true) {
            let out = std::mem::take(&mut cfg.out_dir);
            *cfg = ExperimentConfig {
                out_dir: out,
                ..ExperimentConfig::paper_scale()
            };
        }
        macro_rules! set {
            ($src:ident => $dst:ident) => {
                if let Some(v) = &self.$src {
                    cfg.$dst = v.clone();
                }
            };
        }
        set!(d => d);
        set!(n => n);
        set!(trials => trials);
        set!(seed => base_seed);
        set!(max_iters => max_iters);
        set!(m_mults => m_multipliers);
        set!(beta_low_mult => beta_low_mult);
        set!(out => out_dir);
        set!(jobs => jobs);
        set!(dictionary => dictionary);
        match (self.beta_mult, self.beta_abs) {
            (Some(_), Some(_)) => {
                return Err(ExpError::Config(
                    "beta_mult and beta_abs are mutually exclusive".into(),
                ))
            }
            (Some(c), None) => cfg.beta_rule = BetaRule::Multiplier(c),
            (None, Some(b)) => cfg.beta_rule = BetaRule::Absolute(b),
            (None, None) => {}
        }
        if let Some(v) = &self.m_rule {
            cfg.m_rule = match v {
                toml::Value::String(s) if s == "m_star" => MRule::MStar,
                toml::Value::Integer(m) if *m > 0 => MRule::Fixed(*m as usize),
                other => {
                    return Err(ExpError::Config(format!(
                        "m_rule must be \"m_star\" or a positive integer, got {other}"
                    )))
                }
            };
        }
        if let Some(c) = self.m_mult {
            cfg.m_rule = MRule::Multiple(c);
        }
        Ok(())
    }
}
