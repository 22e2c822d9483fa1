//! Learning configuration and its flat `key = value` file format.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detect::DetectParams;
use crate::error::{Error, Result};
use crate::proposals::ProposalParams;
use crate::types::Hyperparams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub hyper: Hyperparams,
    pub proposals: ProposalParams,
    pub detect: DetectParams,
    pub seed: u64,
    /// Proposals ranked above this quantile become positive candidates.
    pub pos_quantile: f64,
    /// Proposals ranked below this quantile become negatives.
    pub neg_quantile: f64,
    pub hard_negatives_per_anchor: usize,
    /// Random windows drawn from each negative image.
    pub negative_windows: usize,
    /// Top-scoring false windows taken from each negative image per
    /// mining round.
    pub mined_windows: usize,
    /// Cap on low-ranked video proposals used as negatives.
    pub max_video_negatives: usize,
    /// Proposals per frame that seed a track.
    pub track_seeds: usize,
    /// Cap on candidate windows per positive frame.
    pub max_positive_candidates: usize,
    /// Cap on unlabeled proposals entering propagation.
    pub pool_size: usize,
    pub seed_median_background: bool,
    /// Renormalize proposal aspect to the positives' mean every iteration.
    pub recompute_aspect: bool,
    pub cccp_max_outer: usize,
    pub solver_passes: usize,
    /// Solver passes for the provisional models of the line search.
    pub line_search_passes: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            hyper: Hyperparams::default(),
            proposals: ProposalParams::default(),
            detect: DetectParams::default(),
            seed: 7,
            pos_quantile: 0.9,
            neg_quantile: 0.3,
            hard_negatives_per_anchor: 5,
            negative_windows: 30,
            mined_windows: 10,
            max_video_negatives: 300,
            track_seeds: 3,
            max_positive_candidates: 40,
            pool_size: 400,
            seed_median_background: true,
            recompute_aspect: true,
            cccp_max_outer: 20,
            solver_passes: 500,
            line_search_passes: 100,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl LearnConfig {
    /// Every key accepted by [`LearnConfig::set`].
    pub const KEYS: &'static [&'static str] = &[
        "c",
        "lambda",
        "gamma_max",
        "r",
        "tau",
        "k_nn",
        "bg_threshold",
        "nms_iou",
        "stop_epsilon",
        "max_iterations",
        "seed",
        "pos_quantile",
        "neg_quantile",
        "hard_negatives_per_anchor",
        "negative_windows",
        "mined_windows",
        "max_video_negatives",
        "track_seeds",
        "max_positive_candidates",
        "pool_size",
        "seed_median_background",
        "recompute_aspect",
        "cccp_max_outer",
        "solver_passes",
        "line_search_passes",
        "proposal_scales",
        "proposal_aspects",
        "stride_fraction",
        "max_proposals_per_frame",
        "border_margin_fraction",
        "detector_roots",
        "detect_scales",
        "detect_phases",
        "detect_threshold",
    ];

    /// Set one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let h = &mut self.hyper;
        match key {
            "c" => h.c = parse(key, value)?,
            "lambda" => h.lambda = parse(key, value)?,
            "gamma_max" => h.gamma_max = parse(key, value)?,
            "r" => h.r = parse(key, value)?,
            "tau" => h.tau = parse(key, value)?,
            "k_nn" => h.k_nn = parse(key, value)?,
            "bg_threshold" => h.bg_threshold = parse(key, value)?,
            "nms_iou" => {
                h.nms_iou = parse(key, value)?;
                self.detect.nms_iou = h.nms_iou;
            }
            "stop_epsilon" => h.stop_epsilon = parse(key, value)?,
            "max_iterations" => h.max_iterations = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "pos_quantile" => self.pos_quantile = parse(key, value)?,
            "neg_quantile" => self.neg_quantile = parse(key, value)?,
            "hard_negatives_per_anchor" => self.hard_negatives_per_anchor = parse(key, value)?,
            "negative_windows" => self.negative_windows = parse(key, value)?,
            "mined_windows" => self.mined_windows = parse(key, value)?,
            "max_video_negatives" => self.max_video_negatives = parse(key, value)?,
            "track_seeds" => self.track_seeds = parse(key, value)?,
            "max_positive_candidates" => self.max_positive_candidates = parse(key, value)?,
            "pool_size" => self.pool_size = parse(key, value)?,
            "seed_median_background" => self.seed_median_background = parse(key, value)?,
            "recompute_aspect" => self.recompute_aspect = parse(key, value)?,
            "cccp_max_outer" => self.cccp_max_outer = parse(key, value)?,
            "solver_passes" => self.solver_passes = parse(key, value)?,
            "line_search_passes" => self.line_search_passes = parse(key, value)?,
            "proposal_scales" => self.proposals.scales = parse_list(key, value)?,
            "proposal_aspects" => self.proposals.aspects = parse_list(key, value)?,
            "stride_fraction" => self.proposals.stride_fraction = parse(key, value)?,
            "max_proposals_per_frame" => self.proposals.max_proposals_per_frame = parse(key, value)?,
            "border_margin_fraction" => self.proposals.border_margin_fraction = parse(key, value)?,
            "detector_roots" => self.proposals.detector_roots = parse(key, value)?,
            "detect_scales" => self.detect.scales = parse_list(key, value)?,
            "detect_phases" => self.detect.phases = parse(key, value)?,
            "detect_threshold" => self.detect.threshold = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Apply a flat `key = value` document (TOML without tables).
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("config: {e}")))?;
        for (key, value) in &table {
            let text = match value {
                toml::Value::String(s) => s.clone(),
                toml::Value::Array(items) => items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                toml::Value::Table(_) => return Err(Error::Config(format!("{key}: nested tables are not supported"))),
                other => other.to_string(),
            };
            self.set(key, &text)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = LearnConfig::default();
        cfg.apply_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.proposals.validate()?;
        self.detect.validate()?;
        if !(self.neg_quantile > 0.0 && self.neg_quantile < self.pos_quantile && self.pos_quantile < 1.0) {
            return Err(Error::Config("quantiles must satisfy 0 < neg_quantile < pos_quantile < 1".into()));
        }
        if self.max_positive_candidates == 0 || self.solver_passes == 0 || self.line_search_passes == 0 {
            return Err(Error::Config("candidate and solver limits must be positive".into()));
        }
        if self.cccp_max_outer == 0 {
            return Err(Error::Config("cccp_max_outer must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_document_overrides_fields() {
        let mut cfg = LearnConfig::default();
        cfg.apply_str("c = 2.5\nlambda = 0\ntau = 4\nrecompute_aspect = false\nproposal_scales = [30, 40]\n")
            .unwrap();
        assert_eq!(cfg.hyper.c, 2.5);
        assert_eq!(cfg.hyper.lambda, 0.0);
        assert_eq!(cfg.hyper.tau, 4);
        assert!(!cfg.recompute_aspect);
        assert_eq!(cfg.proposals.scales, vec![30.0, 40.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn every_key_is_settable() {
        let mut cfg = LearnConfig::default();
        for key in LearnConfig::KEYS {
            let value = match *key {
                "seed_median_background" | "recompute_aspect" => "true",
                "proposal_scales" | "proposal_aspects" | "detect_scales" => "0.5",
                _ => "1",
            };
            cfg.set(key, value).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut cfg = LearnConfig::default();
        assert!(cfg.set("nope", "1").is_err());
        assert!(cfg.set("c", "abc").is_err());
        assert!(cfg.apply_str("[section]\nc = 1").is_err());
        cfg.set("r", "1").unwrap();
        assert!(cfg.validate().is_err());
    }
}
