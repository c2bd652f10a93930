use std::fs;
use std::path::{Path, PathBuf};

use dgms::eval::FilterConfig;
use dgms::model::ModelConfig;
use dgms::train::TrainConfig;
use dgms::Error;
use serde::{Deserialize, Serialize};

use crate::args::Common;

/// Everything a subcommand may read, after the config file and flags are merged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub filter: FilterConfig,
    pub pool_size: usize,
    pub top_k: usize,
    pub input: Option<PathBuf>,
    pub val_input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            filter: FilterConfig::default(),
            pool_size: 100,
            top_k: 10,
            input: None,
            val_input: None,
            output: None,
            checkpoint: None,
            index: None,
            embeddings: None,
            log: None,
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Config file (paths relative to its directory), then flags on top. The
    /// top-level seed is copied into the model and training sections.
    pub fn resolve(common: &Common) -> Result<Self, Error> {
        let mut cfg = match &common.config {
            Some(path) => {
                let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
                let mut cfg: RunConfig = serde_json::from_slice(&bytes)?;
                let base = path.parent().unwrap_or(Path::new("."));
                for p in [
                    &mut cfg.input,
                    &mut cfg.val_input,
                    &mut cfg.output,
                    &mut cfg.checkpoint,
                    &mut cfg.index,
                    &mut cfg.embeddings,
                    &mut cfg.log,
                ] {
                    rebase(base, p);
                }
                cfg
            }
            None => RunConfig::default(),
        };
        let c = common;
        macro_rules! set {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        set!(c.seed => cfg.seed);
        set!(c.pool_size => cfg.pool_size);
        set!(c.top_k => cfg.top_k);
        set!(c.match_op => cfg.model.match_op);
        set!(c.agg_op => cfg.model.agg_op);
        set!(c.rgcn_dim => cfg.model.rgcn_dim);
        set!(c.agg_dim => cfg.model.agg_dim);
        set!(c.input_dim => cfg.model.input_dim);
        set!(c.layers => cfg.model.layers);
        set!(c.epochs => cfg.train.epochs);
        set!(c.margin => cfg.train.margin);
        set!(c.lr => cfg.train.learning_rate);
        set!(c.batch => cfg.train.batch_size);
        set!(c.min_lines => cfg.filter.min_lines);
        set!(c.min_words => cfg.filter.min_words);
        set!(c.max_nodes => cfg.filter.max_nodes);
        if c.ascii_ratio.is_some() {
            cfg.filter.min_ascii_letter_ratio = c.ascii_ratio;
        }
        if c.threads.is_some() {
            cfg.threads = c.threads;
        }
        for (flag, field) in [
            (&c.input, &mut cfg.input),
            (&c.val, &mut cfg.val_input),
            (&c.output, &mut cfg.output),
            (&c.checkpoint, &mut cfg.checkpoint),
            (&c.index, &mut cfg.index),
            (&c.embeddings, &mut cfg.embeddings),
            (&c.log, &mut cfg.log),
        ] {
            if flag.is_some() {
                field.clone_from(flag);
            }
        }
        if c.freeze_negatives {
            cfg.train.resample_negatives = false;
        }
        cfg.model.seed = cfg.seed;
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn require(&self, what: &'static str, p: &Option<PathBuf>) -> Result<PathBuf, Error> {
        p.clone()
            .ok_or_else(|| Error::Argument(format!("missing required path: {what}")))
    }

    /// Errors unless `p` exists. Run before any work starts.
    pub fn existing(&self, what: &'static str, p: &Option<PathBuf>) -> Result<PathBuf, Error> {
        let path = self.require(what, p)?;
        if !path.exists() {
            return Err(Error::io(
                &path,
                std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} not found")),
            ));
        }
        Ok(path)
    }
}
