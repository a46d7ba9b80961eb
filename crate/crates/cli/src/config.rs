//! `key = value` configuration files with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use seal_core::classify::ClassifierConfig;
use seal_core::train::ExtractorConfig;

pub const SEED_ENV: &str = "SEAL_SEED";

/// Raw entries from a config file, consumed key by key.
///
/// Precedence, lowest first: file, `SEAL_SEED`, `--set` overrides.
#[derive(Debug, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
    base: PathBuf,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got {line:?}", n + 1))?;
            let k = k.trim();
            if k.is_empty() {
                bail!("line {}: empty key", n + 1);
            }
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                bail!("line {}: duplicate key {k:?}", n + 1);
            }
        }
        Ok(KvConfig {
            entries,
            base: PathBuf::new(),
        })
    }

    /// Reads `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut c = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        c.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Applies `SEAL_SEED` then every `key=value` override.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        if let Ok(seed) = std::env::var(SEED_ENV) {
            seed.trim()
                .parse::<u64>()
                .map_err(|_| anyhow!("{SEED_ENV}={seed:?} is not an unsigned integer"))?;
            self.set("seed", seed.trim());
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| anyhow!("override {o:?} is not `key=value`"))?;
            self.set(k.trim(), v.trim());
        }
        Ok(())
    }

    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key {key:?}: cannot parse {v:?}: {e}")),
        }
    }

    pub fn take_path(&mut self, key: &str) -> Option<PathBuf> {
        self.entries.remove(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_relative() {
                self.base.join(p)
            } else {
                p
            }
        })
    }

    pub fn require_path(&mut self, key: &str) -> Result<PathBuf> {
        self.take_path(key)
            .ok_or_else(|| anyhow!("config key {key:?} is required"))
    }

    /// Fails on keys nobody consumed.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            let keys: Vec<&str> = self.entries.keys().map(String::as_str).collect();
            bail!("unknown config keys: {}", keys.join(", "))
        }
    }
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| anyhow!("layer size {p:?}: {e}")))
        .collect()
}

fn parse_clip(s: &str) -> Result<f64> {
    match s.to_ascii_lowercase().as_str() {
        "none" | "inf" | "off" => Ok(f64::INFINITY),
        v => v.parse().map_err(|e| anyhow!("grad_clip_norm {s:?}: {e}")),
    }
}

pub fn extractor_config(kv: &mut KvConfig) -> Result<ExtractorConfig> {
    let mut c = ExtractorConfig::default();
    if let Some(s) = kv.take::<String>("layer_output_sizes")? {
        c.layer_output_sizes = parse_sizes(&s)?;
    }
    if let Some(v) = kv.take("learning_rate")? {
        c.learning_rate = v;
    }
    if let Some(v) = kv.take("max_epochs")? {
        c.max_epochs = v;
    }
    if let Some(v) = kv.take("patience")? {
        c.patience = v;
    }
    if let Some(s) = kv.take::<String>("grad_clip_norm")? {
        c.grad_clip_norm = parse_clip(&s)?;
    }
    if let Some(v) = kv.take("batch_size")? {
        c.batch_size = v;
    }
    if let Some(v) = kv.take("seed")? {
        c.seed = v;
    }
    if let Some(v) = kv.take("mask_decoding")? {
        c.mask_decoding = v;
    }
    c.validate()?;
    Ok(c)
}

pub fn classifier_config(kv: &mut KvConfig) -> Result<ClassifierConfig> {
    let mut c = ClassifierConfig::default();
    if let Some(v) = kv.take("n_trees")? {
        c.n_trees = v;
    }
    if let Some(v) = kv.take("max_depth")? {
        c.max_depth = v;
    }
    if let Some(v) = kv.take("min_samples_split")? {
        c.min_samples_split = v;
    }
    if let Some(s) = kv.take::<String>("features_per_split")? {
        c.features_per_split = match s.as_str() {
            "auto" | "sqrt" => None,
            v => Some(v.parse().map_err(|e| anyhow!("features_per_split {v:?}: {e}"))?),
        };
    }
    if let Some(v) = kv.take("bootstrap")? {
        c.bootstrap = v;
    }
    if let Some(v) = kv.take("seed")? {
        c.seed = v;
    }
    Ok(c)
}

pub fn log_resolved(command: &str, pairs: &[(&str, String)]) {
    log::info!("resolved config for {command}:");
    for (k, v) in pairs {
        log::info!("  {k} = {v}");
    }
}

pub fn extractor_pairs(c: &ExtractorConfig) -> Vec<(&'static str, String)> {
    let sizes: Vec<String> = c.layer_output_sizes.iter().map(usize::to_string).collect();
    vec![
        ("layer_output_sizes", sizes.join(",")),
        ("learning_rate", c.learning_rate.to_string()),
        ("max_epochs", c.max_epochs.to_string()),
        ("patience", c.patience.to_string()),
        ("grad_clip_norm", c.grad_clip_norm.to_string()),
        ("batch_size", c.batch_size.to_string()),
        ("seed", c.seed.to_string()),
        ("mask_decoding", c.mask_decoding.to_string()),
    ]
}

pub fn classifier_pairs(c: &ClassifierConfig) -> Vec<(&'static str, String)> {
    vec![
        ("n_trees", c.n_trees.to_string()),
        ("max_depth", c.max_depth.to_string()),
        ("min_samples_split", c.min_samples_split.to_string()),
        (
            "features_per_split",
            c.features_per_split.map_or("auto".to_string(), |k| k.to_string()),
        ),
        ("bootstrap", c.bootstrap.to_string()),
        ("seed", c.seed.to_string()),
    ]
}
