//! Run configuration read from a flat TOML file.
//!
//! Every key is optional. `example` selects a preset (domain, motion law,
//! material parameters, weighting and observation defaults); the remaining
//! keys override it. Without any keys the configuration is the first example
//! on its smallest sampling row.

use crate::geometry::{Domain, Membership, MotionLaw};
use crate::physics::{ExactSolution, PhaseParams};
use crate::sampling::{parse_dims, SamplingMode, SamplingSpec};
use crate::trainer::{TrainConfig, WeightMode};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{key}: {msg}")]
    Invalid { key: &'static str, msg: String },
}

fn invalid(key: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, msg: msg.into() }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub example: u8,
    pub sampling: SamplingSpec,
    pub train: TrainConfig,
    pub observation: bool,
    pub membership: Membership,
    pub phases: [PhaseParams; 2],
    pub domain: Domain,
    pub t_end: f64,
    /// Evaluation grid `nx x ny x nt`, times including both ends.
    pub eval_grid: [usize; 3],
    pub output: PathBuf,
    pub log_every: usize,
    pub history_every: usize,
    /// Epochs between checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
    /// Markers on the reference interface of the solution-driven example.
    pub reference_vertices: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(1).unwrap()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    example: Option<u8>,
    interior: Option<String>,
    boundary: Option<String>,
    interface: Option<String>,
    initial: Option<String>,
    sampling_seed: Option<u64>,
    pretrain_epochs: Option<usize>,
    main_epochs: Option<usize>,
    pretrain_lr: Option<f64>,
    lr_max: Option<f64>,
    lr_min: Option<f64>,
    weights: Option<String>,
    fixed_weight: Option<f64>,
    observation: Option<bool>,
    observation_weight: Option<f64>,
    cadence: Option<usize>,
    zero_output: Option<bool>,
    seed: Option<u64>,
    hidden: Option<String>,
    shard: Option<usize>,
    membership: Option<String>,
    rho1: Option<f64>,
    mu1: Option<f64>,
    rho2: Option<f64>,
    mu2: Option<f64>,
    eval_grid: Option<String>,
    output: Option<PathBuf>,
    log_every: Option<usize>,
    history_every: Option<usize>,
    checkpoint_every: Option<usize>,
    reference_vertices: Option<usize>,
}

impl RunConfig {
    /// Defaults for one of the three benchmarks.
    pub fn preset(example: u8) -> Result<Self, ConfigError> {
        let contrast = PhaseParams { rho: 1000.0, mu: 1000.0 };
        let (domain, phases, weight_mode, observation) = match example {
            1 => (Domain::square(0.0, 3.0), [PhaseParams::UNIT; 2], WeightMode::Fixed(10.0), false),
            2 => (Domain::square(0.0, 3.5), [PhaseParams::UNIT, contrast], WeightMode::Fixed(10.0), true),
            3 => (Domain::square(0.0, 3.0), [PhaseParams::UNIT, contrast], WeightMode::Adaptive, true),
            other => return Err(invalid("example", format!("expected 1, 2 or 3, got {other}"))),
        };
        Ok(Self {
            example,
            sampling: SamplingSpec::default(),
            train: TrainConfig {
                weight_mode,
                zero_output: example == 3,
                ..TrainConfig::default()
            },
            observation,
            membership: Membership::default(),
            phases,
            domain,
            t_end: 1.0,
            eval_grid: [100, 100, 11],
            output: PathBuf::from("out"),
            log_every: 1000,
            history_every: 1000,
            checkpoint_every: 0,
            reference_vertices: 256,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: Raw = toml::from_str(text)?;
        let mut cfg = Self::preset(raw.example.unwrap_or(1))?;
        cfg.apply(raw)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    fn apply(&mut self, raw: Raw) -> Result<(), ConfigError> {
        let s = &self.sampling;
        let labels = s.labels();
        let pick = |v: &Option<String>, d: &String| v.clone().unwrap_or_else(|| d.clone());
        let mut spec = SamplingSpec::parse(
            &pick(&raw.interior, &labels[0]),
            &pick(&raw.boundary, &labels[1]),
            &pick(&raw.interface, &labels[2]),
            &pick(&raw.initial, &labels[3]),
        )
        .map_err(|e| invalid("sampling", e.to_string()))?;
        if let Some(seed) = raw.sampling_seed {
            spec.mode = SamplingMode::SeededRandom(seed);
        }
        self.sampling = spec;

        let t = &mut self.train;
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(t.pretrain_epochs, raw.pretrain_epochs);
        set!(t.main_epochs, raw.main_epochs);
        set!(t.pretrain_lr, raw.pretrain_lr);
        set!(t.lr_max, raw.lr_max);
        set!(t.lr_min, raw.lr_min);
        set!(t.observation_weight, raw.observation_weight);
        set!(t.seed, raw.seed);
        set!(t.zero_output, raw.zero_output);
        set!(t.shard, raw.shard);
        if let Some(c) = raw.cadence {
            t.cadence = if c == 0 { None } else { Some(c) };
        }
        let fixed = raw.fixed_weight.unwrap_or(match t.weight_mode {
            WeightMode::Fixed(w) => w,
            WeightMode::Adaptive => 10.0,
        });
        t.weight_mode = match raw.weights.as_deref() {
            None => match t.weight_mode {
                WeightMode::Fixed(_) => WeightMode::Fixed(fixed),
                WeightMode::Adaptive => WeightMode::Adaptive,
            },
            Some("fixed") => WeightMode::Fixed(fixed),
            Some("adaptive") => WeightMode::Adaptive,
            Some(other) => return Err(invalid("weights", format!("expected fixed or adaptive, got {other:?}"))),
        };
        if let Some(h) = &raw.hidden {
            let widths = parse_dims(h).map_err(|e| invalid("hidden", e.to_string()))?;
            let mut shape = vec![3];
            shape.extend(widths);
            shape.push(3);
            t.shape = shape;
        }
        t.validate().map_err(|e| invalid("train", e.to_string()))?;

        set!(self.observation, raw.observation);
        if self.observation && self.example == 1 {
            return Err(invalid("observation", "the first example has no observation points"));
        }
        self.membership = match raw.membership.as_deref() {
            None | Some("parametrization") => Membership::Parametrization,
            Some("unrotated") => Membership::Unrotated,
            Some(other) => {
                return Err(invalid(
                    "membership",
                    format!("expected parametrization or unrotated, got {other:?}"),
                ))
            }
        };
        set!(self.phases[0].rho, raw.rho1);
        set!(self.phases[0].mu, raw.mu1);
        set!(self.phases[1].rho, raw.rho2);
        set!(self.phases[1].mu, raw.mu2);
        for (k, p) in self.phases.iter().enumerate() {
            if !(p.rho > 0.0 && p.mu > 0.0 && p.rho.is_finite() && p.mu.is_finite()) {
                return Err(invalid("phases", format!("phase {} needs positive finite rho and mu", k + 1)));
            }
        }
        if let Some(g) = &raw.eval_grid {
            let d = parse_dims(g).map_err(|e| invalid("eval_grid", e.to_string()))?;
            self.eval_grid = d
                .try_into()
                .map_err(|_| invalid("eval_grid", "expected nx x ny x nt"))?;
        }
        set!(self.output, raw.output);
        set!(self.log_every, raw.log_every);
        set!(self.history_every, raw.history_every);
        set!(self.checkpoint_every, raw.checkpoint_every);
        set!(self.reference_vertices, raw.reference_vertices);
        if self.log_every == 0 || self.history_every == 0 {
            return Err(invalid("log_every", "logging intervals must be at least 1"));
        }
        if self.reference_vertices < 3 {
            return Err(invalid("reference_vertices", "need at least 3"));
        }
        Ok(())
    }

    pub fn exact(&self) -> ExactSolution {
        if self.example == 3 {
            ExactSolution::Example3
        } else {
            ExactSolution::Example1And2
        }
    }

    /// Analytic interface law; for the solution-driven example this is the
    /// initial circle.
    pub fn law(&self) -> MotionLaw {
        match self.example {
            1 => MotionLaw::example1(),
            2 => MotionLaw::example2(),
            _ => MotionLaw::example3_initial(),
        }
    }

    pub fn solution_driven(&self) -> bool {
        self.example == 3
    }

    /// True when a high-contrast run has observations switched off.
    pub fn contrast_without_observation(&self) -> bool {
        let ratio = (self.phases[1].rho / self.phases[0].rho).max(self.phases[1].mu / self.phases[0].mu);
        self.example != 1 && ratio >= 100.0 && !self.observation
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_first_example_smallest_row() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.example, 1);
        assert_eq!(c.sampling.counts(), [500, 80, 20, 16]);
        assert_eq!(c.train.pretrain_epochs, 20_000);
        assert_eq!(c.train.main_epochs, 80_000);
        assert_eq!(c.train.weight_mode, WeightMode::Fixed(10.0));
        assert_eq!(c.eval_grid, [100, 100, 11]);
        assert!(!c.observation);
    }

    #[test]
    fn presets() {
        let c = RunConfig::from_toml("example = 2").unwrap();
        assert_eq!(c.domain, Domain::square(0.0, 3.5));
        assert_eq!(c.phases[1], PhaseParams { rho: 1000.0, mu: 1000.0 });
        assert!(c.observation);
        let c = RunConfig::from_toml("example = 3").unwrap();
        assert_eq!(c.train.weight_mode, WeightMode::Adaptive);
        assert!(c.solution_driven());
        assert_eq!(c.exact(), ExactSolution::Example3);
    }

    #[test]
    fn overrides() {
        let c = RunConfig::from_toml(
            r#"
            example = 2
            interior = "20x20x10"
            boundary = "8x4x10"
            interface = "8x10"
            initial = "8x8"
            observation = false
            main_epochs = 5
            weights = "adaptive"
            cadence = 0
            hidden = "20x20"
            eval_grid = "10x10x3"
            "#,
        )
        .unwrap();
        assert_eq!(c.sampling.counts(), [4000, 320, 80, 64]);
        assert!(!c.observation);
        assert!(c.contrast_without_observation());
        assert_eq!(c.train.main_epochs, 5);
        assert_eq!(c.train.weight_mode, WeightMode::Adaptive);
        assert_eq!(c.train.cadence, None);
        assert_eq!(c.train.shape, vec![3, 20, 20, 3]);
        assert_eq!(c.eval_grid, [10, 10, 3]);
    }

    #[test]
    fn errors() {
        for bad in [
            "example = 4",
            "colour = 1",
            "interior = \"10x10\"",
            "weights = \"sometimes\"",
            "boundary = \"4x3x5\"",
            "observation = true",
            "rho2 = -1.0",
            "eval_grid = \"10x10\"",
            "pretrain_epochs = 0\nmain_epochs = 0",
        ] {
            assert!(RunConfig::from_toml(bad).is_err(), "{bad}");
        }
    }
}
