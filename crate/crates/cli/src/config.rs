//! `key = value` run configuration. Every key is also a command-line flag;
//! flags override the file.

use std::path::Path;

use anyhow::{bail, Context};
use stfp::eval::FractionLadder;

macro_rules! run_config {
    ($($key:ident : $ty:ty = $default:expr, $help:literal;)*) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $(pub $key: $ty,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                RunConfig { $($key: $default,)* }
            }
        }

        /// Configuration keys, each settable as `--key value`.
        #[derive(Debug, Clone, Default, clap::Args)]
        #[command(next_help_heading = "Configuration keys (also valid in --config files)")]
        pub struct ConfigFlags {
            $(
                #[doc = $help]
                #[arg(long, global = true, value_name = "VALUE")]
                pub $key: Option<$ty>,
            )*
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($key),)*];

            pub fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
                match key.replace('-', "_").as_str() {
                    $(stringify!($key) => {
                        self.$key = value
                            .parse::<$ty>()
                            .map_err(|e| anyhow::anyhow!("{e}"))
                            .with_context(|| format!("bad value {value:?} for {key}"))?;
                    })*
                    _ => bail!("unknown configuration key {key:?}; known keys: {}", Self::KEYS.join(", ")),
                }
                Ok(())
            }

            pub fn apply(&mut self, flags: &ConfigFlags) {
                $(if let Some(v) = &flags.$key {
                    self.$key = v.clone();
                })*
            }
        }
    };
}

run_config! {
    seed: u64 = 0, "Seed for initialization, shuffling, enumeration and splits";
    jobs: usize = 1, "Worker threads for benchmark cells and fingerprint batches";
    layers: usize = 2, "Encoder and decoder blocks";
    heads: usize = 4, "Attention heads";
    d_model: usize = 64, "Model width";
    max_seq_len: usize = 256, "Longest token sequence, BOS and EOS included";
    dropout: f64 = 0.1, "Dropout probability during pre-training";
    epochs: usize = 5, "Pre-training epochs";
    batch_size: usize = 64, "Pre-training batch size";
    lr: f64 = 1e-4, "Adam learning rate";
    enumerate: bool = true, "Re-enumerate each SMILES whenever it is drawn";
    max_steps: usize = 0, "Stop pre-training after this many steps (0 = no limit)";
    corpus_limit: usize = 0, "Use only the first N corpus lines (0 = all)";
    embed_batch: usize = 64, "Molecules per encoder batch when fingerprinting";
    fingerprints: String = "st,ecfp".into(), "Fingerprint kinds to benchmark: st, ecfp, random";
    predictor: String = "linear".into(), "Downstream model: linear or mlp";
    lambda: f64 = 1.0, "L2 penalty of the linear models";
    ladder: FractionLadder = FractionLadder::default(), "Training fractions, comma separated";
    trials: usize = 20, "Random splits per fraction";
    task_type: String = "regression".into(), "regression or classification";
    metric: String = String::new(), "rmse, roc-auc or prc-auc (default by task type)";
    tasks: String = String::new(), "Task columns, comma separated (default: all but smiles)";
    smiles_column: String = "smiles".into(), "Name of the SMILES column";
    ecfp_bits: usize = 1024, "ECFP length in bits";
    ecfp_diameter: u32 = 4, "ECFP diameter";
    random_dims: usize = 0, "Random projection width (0 = match the ST width, or 1024 without a checkpoint)";
    standardize: bool = true, "Standardize continuous fingerprints on each training split";
    groups: usize = 5, "Length strata";
    strata_fraction: f64 = 0.8, "Training fraction inside each stratum";
    k: usize = 2, "Projection dimensions";
}

impl RunConfig {
    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", i + 1))?;
            cfg.set(key.trim(), value.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn list(s: &str) -> Vec<String> {
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
    }
}
