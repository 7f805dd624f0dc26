//! Crawl configuration: TOML file, environment overrides, validation.
//!
//! Keys use the short symbol names of the method (`n`, `theta`, `alpha`,
//! `m`, `w`, `b`, `nu`, `gamma`, `kappa`) next to descriptive names for the
//! plumbing knobs. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{IndexBackend, NswParams};
use crate::bandit::BanditConfig;
use crate::classifier::{ClassifierConfig, SgdConfig};
use crate::defaults;
use crate::fetch::MimeBlocklist;
use crate::graph::WeightMode;
use crate::scalar::Scalar;
use crate::tagpath::{HashParams, DEFAULT_LINK_TAGS};

pub const ENV_STORE: &str = "SBCRAWL_STORE";
pub const ENV_POLITENESS_DELAY: &str = "SBCRAWL_POLITENESS_DELAY";
pub const ENV_SEED: &str = "SBCRAWL_SEED";
pub const ENV_BUDGET: &str = "SBCRAWL_BUDGET";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("invalid environment variable {var}: {reason}")]
    Env { var: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Exact,
    Nsw,
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlConfig {
    /// Budget `B`; absent means unlimited.
    pub budget: Option<f64>,
    pub weight_mode: WeightMode,
    pub seed: u64,
    /// Stop once this many targets are retrieved.
    pub target_goal: Option<u64>,

    /// Tag-path n-gram length.
    pub n: usize,
    /// Projected dimension exponent (`2^m` buckets).
    pub m: u32,
    /// Hash word size.
    pub w: u32,
    /// Odd multiplier of the hash.
    pub prime: u64,
    /// Cosine threshold for joining an action.
    pub theta: f64,
    pub index: IndexKind,
    pub index_threshold: usize,

    pub alpha: f64,
    pub epsilon: f64,

    /// Classifier batch size.
    pub b: usize,
    pub learning_rate: f64,
    pub learning_rate_decay: f64,
    pub l2: f64,

    pub early_stop: bool,
    pub nu: u64,
    pub epsilon_stop: f64,
    pub gamma: f64,
    pub kappa: u32,

    /// Seconds between two requests to the site.
    pub politeness_delay: f64,
    pub user_agent: String,
    pub respect_robots: bool,
    pub target_mimes: Vec<String>,
    pub mime_blocklist: Vec<String>,
    pub extension_blocklist: Vec<String>,
    pub link_tags: Vec<String>,

    pub focused_retrain_every: usize,
    pub tpoff_bootstrap_pages: usize,

    pub store: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        let sgd = SgdConfig::default();
        Self {
            budget: None,
            weight_mode: WeightMode::RequestCount,
            seed: 0,
            target_goal: None,
            n: 2,
            m: 12,
            w: 15,
            prime: crate::tagpath::DEFAULT_PRIME,
            theta: 0.75,
            index: IndexKind::Auto,
            index_threshold: 512,
            alpha: 2.0 * std::f64::consts::SQRT_2,
            epsilon: 1e-6,
            b: 10,
            learning_rate: sgd.learning_rate,
            learning_rate_decay: sgd.decay,
            l2: sgd.l2,
            early_stop: false,
            nu: 1000,
            epsilon_stop: 0.2,
            gamma: 0.05,
            kappa: 15,
            politeness_delay: 1.0,
            user_agent: format!("sbcrawl/{} (+https://example.org/sbcrawl)", env!("CARGO_PKG_VERSION")),
            respect_robots: true,
            target_mimes: defaults::TARGET_MIMES.iter().map(|s| s.to_string()).collect(),
            mime_blocklist: defaults::MIME_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
            extension_blocklist: defaults::EXTENSION_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
            link_tags: DEFAULT_LINK_TAGS.iter().map(|s| s.to_string()).collect(),
            focused_retrain_every: 50,
            tpoff_bootstrap_pages: 3000,
            store: None,
            trace: None,
        }
    }
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

impl CrawlConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Applies `SBCRAWL_*` overrides from the process environment.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        self.apply_env_with(|k| std::env::var(k).ok())
    }

    pub fn apply_env_with(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = lookup(ENV_STORE) {
            self.store = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup(ENV_POLITENESS_DELAY) {
            self.politeness_delay = v.trim().parse().map_err(|_| ConfigError::Env {
                var: ENV_POLITENESS_DELAY,
                reason: format!("`{v}` is not a number of seconds"),
            })?;
        }
        if let Some(v) = lookup(ENV_SEED) {
            self.seed = v.trim().parse().map_err(|_| ConfigError::Env {
                var: ENV_SEED,
                reason: format!("`{v}` is not an unsigned integer"),
            })?;
        }
        if let Some(v) = lookup(ENV_BUDGET) {
            self.budget = Some(v.trim().parse().map_err(|_| ConfigError::Env {
                var: ENV_BUDGET,
                reason: format!("`{v}` is not a number"),
            })?);
        }
        self.validate()
    }

    // Negated comparisons so that NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(b) = self.budget {
            if b.is_nan() || b < 0.0 {
                return Err(invalid("budget", "must be a non-negative number"));
            }
        }
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        HashParams::new(self.prime, self.w, self.m).map_err(|e| {
            let key = match e.to_string() {
                s if s.contains("prime") || s.contains("odd") => "prime",
                s if s.contains(" w") || s.starts_with('w') => "w",
                _ => "m",
            };
            invalid(key, e.to_string())
        })?;
        if self.m > 24 {
            return Err(invalid("m", "at most 24 (2^m dense buckets)"));
        }
        if !(-1.0..=1.0).contains(&self.theta) {
            return Err(invalid("theta", "must lie in [-1, 1]"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", "must be finite and non-negative"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        if self.b == 0 {
            return Err(invalid("b", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if !(self.learning_rate_decay >= 0.0) {
            return Err(invalid("learning_rate_decay", "must be non-negative"));
        }
        if !(self.l2 >= 0.0) {
            return Err(invalid("l2", "must be non-negative"));
        }
        if self.nu == 0 {
            return Err(invalid("nu", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("gamma", "must lie in (0, 1]"));
        }
        if self.kappa == 0 {
            return Err(invalid("kappa", "must be at least 1"));
        }
        if !(self.epsilon_stop >= 0.0) {
            return Err(invalid("epsilon_stop", "must be non-negative"));
        }
        if !(self.politeness_delay >= 0.0 && self.politeness_delay.is_finite()) {
            return Err(invalid("politeness_delay", "must be a finite number of seconds"));
        }
        if self.target_mimes.is_empty() {
            return Err(invalid("target_mimes", "must not be empty"));
        }
        if let Some(bad) = self.target_mimes.iter().find(|m| !m.contains('/')) {
            return Err(invalid("target_mimes", format!("`{bad}` is not a MIME type")));
        }
        if let Some(bad) = self.extension_blocklist.iter().find(|e| !e.starts_with('.')) {
            return Err(invalid("extension_blocklist", format!("`{bad}` must start with a dot")));
        }
        if self.link_tags.is_empty() {
            return Err(invalid("link_tags", "must not be empty"));
        }
        if self.focused_retrain_every == 0 {
            return Err(invalid("focused_retrain_every", "must be at least 1"));
        }
        Ok(())
    }

    pub fn hash_params(&self) -> HashParams {
        HashParams {
            prime: self.prime,
            w: self.w,
            m: self.m,
        }
    }

    pub fn index_backend(&self) -> IndexBackend {
        match self.index {
            IndexKind::Exact => IndexBackend::Exact,
            IndexKind::Nsw => IndexBackend::Nsw(NswParams::default()),
            IndexKind::Auto => IndexBackend::Auto {
                threshold: self.index_threshold,
                params: NswParams::default(),
            },
        }
    }

    pub fn bandit<F: Scalar>(&self) -> BanditConfig<F> {
        BanditConfig {
            alpha: F::lit(self.alpha),
            epsilon: F::lit(self.epsilon),
        }
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            decay: self.learning_rate_decay,
            l2: self.l2,
            epochs_per_batch: 1,
            seed: self.seed,
        }
    }

    pub fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig {
            batch_size: self.b,
            sgd: self.sgd(),
        }
    }

    pub fn early_stop_params(&self) -> EarlyStopParams {
        EarlyStopParams {
            nu: self.nu,
            epsilon: self.epsilon_stop,
            gamma: self.gamma,
            kappa: self.kappa,
        }
    }

    pub fn politeness(&self) -> Duration {
        Duration::from_secs_f64(self.politeness_delay)
    }

    pub fn mime_blocklist(&self) -> MimeBlocklist {
        MimeBlocklist::new(&self.mime_blocklist)
    }

    /// Setup for in-memory or replayed sites: no delay, no robots.txt.
    pub fn offline() -> Self {
        Self {
            politeness_delay: 0.0,
            respect_robots: false,
            ..Self::default()
        }
    }
}

/// Parameters of the slope-based early-stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopParams {
    pub nu: u64,
    pub epsilon: f64,
    pub gamma: f64,
    pub kappa: u32,
}

impl Default for EarlyStopParams {
    fn default() -> Self {
        CrawlConfig::default().early_stop_params()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_method_settings() {
        let c = CrawlConfig::default();
        assert_eq!((c.n, c.m, c.w, c.b), (2, 12, 15, 10));
        assert_eq!(c.theta, 0.75);
        assert!((c.alpha - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!((c.nu, c.kappa), (1000, 15));
        assert_eq!((c.epsilon_stop, c.gamma), (0.2, 0.05));
        assert_eq!(c.target_mimes.len(), 38);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let c = CrawlConfig {
            budget: Some(500.0),
            seed: 9,
            ..CrawlConfig::default()
        };
        let back = CrawlConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn errors_name_the_key() {
        let e = CrawlConfig::from_toml_str("thetaa = 0.5").unwrap_err().to_string();
        assert!(e.contains("thetaa"), "{e}");
        let e = CrawlConfig::from_toml_str("theta = 3.0").unwrap_err().to_string();
        assert!(e.contains("`theta`"), "{e}");
        let e = CrawlConfig::from_toml_str("b = 0").unwrap_err().to_string();
        assert!(e.contains("`b`"), "{e}");
        let e = CrawlConfig::from_toml_str("m = 20\nw = 15").unwrap_err().to_string();
        assert!(e.contains("`m`") || e.contains("`w`"), "{e}");
    }

    #[test]
    fn env_overrides() {
        let mut c = CrawlConfig::default();
        c.apply_env_with(|k| match k {
            ENV_STORE => Some("/tmp/s".into()),
            ENV_POLITENESS_DELAY => Some("0.25".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.store.as_deref(), Some(Path::new("/tmp/s")));
        assert_eq!(c.politeness_delay, 0.25);
        let err = c.apply_env_with(|k| (k == ENV_SEED).then(|| "x".into())).unwrap_err();
        assert!(err.to_string().contains(ENV_SEED));
    }
}
