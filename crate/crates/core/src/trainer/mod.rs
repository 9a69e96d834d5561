//! Training loop: a unit-weight pretraining phase, then a main phase with
//! fixed or adaptive loss weights and cosine learning-rate decay.
//!
//! For solution-driven interfaces every update epoch re-integrates the
//! marker trajectories with the phase-2 velocity, ray-casts all points
//! against the new polygons and rebuilds the interface samples before the
//! optimizer step.

pub mod tracking;

pub use tracking::{interface_position, update_interface, FnField, Tracker, VelocityField};

use crate::geometry::polygon::ray_cast_unchecked;
use crate::geometry::{GeometryError, InterfaceState, Phase, Vertex};
use crate::loss::{evaluate, AdaptiveState, LossError, ProblemData, Weights, N_BALANCED, N_TERMS, TERM_NAMES};
use crate::net::checkpoint::{CheckpointError, Decoder, Encoder};
use crate::net::{cosine_lr, init_mlp, AdamConfig, Mlp, NetError, ParamSet, DEFAULT_SHAPE};
use crate::sampling::{interface_from_state, Sample, SampleSet, SamplingError};
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightMode {
    /// Interface and boundary weights set to the given value, others 1.
    Fixed(f64),
    Adaptive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub pretrain_epochs: usize,
    pub main_epochs: usize,
    pub pretrain_lr: f64,
    pub lr_max: f64,
    pub lr_min: f64,
    pub weight_mode: WeightMode,
    pub observation_weight: f64,
    /// Epochs between interface updates; `None` freezes the interface.
    pub cadence: Option<usize>,
    /// Start both networks as the zero function.
    pub zero_output: bool,
    pub seed: u64,
    pub shape: Vec<usize>,
    pub shard: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            pretrain_epochs: 20_000,
            main_epochs: 80_000,
            pretrain_lr: 1e-3,
            lr_max: 1e-3,
            lr_min: 1e-6,
            weight_mode: WeightMode::Fixed(10.0),
            observation_weight: 1.0,
            cadence: Some(1),
            zero_output: false,
            seed: 0,
            shape: DEFAULT_SHAPE.to_vec(),
            shard: crate::loss::DEFAULT_SHARD,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn total_epochs(&self) -> usize {
        self.pretrain_epochs + self.main_epochs
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.total_epochs() == 0 {
            return Err(TrainError::Config("no epochs".into()));
        }
        if self.cadence == Some(0) {
            return Err(TrainError::Config("interface cadence must be at least 1".into()));
        }
        if self.shard == 0 {
            return Err(TrainError::Config("shard size must be at least 1".into()));
        }
        for (name, x) in [
            ("pretrain_lr", self.pretrain_lr),
            ("lr_max", self.lr_max),
            ("lr_min", self.lr_min),
            ("observation_weight", self.observation_weight),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(TrainError::Config(format!("{name} must be finite and nonnegative")));
            }
        }
        if let WeightMode::Fixed(w) = self.weight_mode {
            if !(w.is_finite() && w >= 0.0) {
                return Err(TrainError::Config("fixed weight must be finite and nonnegative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, last_good: Box<[ParamSet; 2]> },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One line of the loss log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub values: [f64; N_TERMS],
    pub weights: [f64; N_TERMS],
    pub total: f64,
    pub lr: f64,
}

impl EpochRecord {
    pub fn header() -> Vec<String> {
        let mut h = vec!["epoch".to_string()];
        h.extend(TERM_NAMES.iter().map(|s| s.to_string()));
        h.extend(TERM_NAMES.iter().map(|s| format!("w_{}", &s[2..])));
        h.push("total".into());
        h.push("lr".into());
        h
    }

    pub fn row(&self) -> Vec<String> {
        let mut r = vec![self.epoch.to_string()];
        r.extend(self.values.iter().map(|x| format!("{x:e}")));
        r.extend(self.weights.iter().map(|x| format!("{x:e}")));
        r.push(format!("{:e}", self.total));
        r.push(format!("{:e}", self.lr));
        r
    }
}

fn net_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k)
}

pub struct Trainer {
    cfg: TrainConfig,
    data: Box<dyn ProblemData + Send>,
    samples: SampleSet,
    interface: Option<InterfaceState>,
    sets: [ParamSet; 2],
    adaptive: AdaptiveState,
    epoch: usize,
}

impl Trainer {
    /// Fresh networks from the configured seed. With an interface state the
    /// samples are classified against its polygons and the interface samples
    /// are taken from its vertices.
    pub fn new(
        cfg: TrainConfig,
        data: Box<dyn ProblemData + Send>,
        mut samples: SampleSet,
        interface: Option<InterfaceState>,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        if let Some(state) = &interface {
            samples.reclassify(state)?;
            samples.interface = interface_from_state(state)?;
        }
        let mut nets = [
            init_mlp(net_seed(cfg.seed, 1), &cfg.shape)?,
            init_mlp(net_seed(cfg.seed, 2), &cfg.shape)?,
        ];
        if cfg.zero_output {
            nets.iter_mut().for_each(Mlp::zero_output_layer);
        }
        let sets = nets.map(ParamSet::new);
        Ok(Self {
            cfg,
            data,
            samples,
            interface,
            sets,
            adaptive: AdaptiveState::new(),
            epoch: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.cfg.total_epochs()
    }

    pub fn param_sets(&self) -> &[ParamSet; 2] {
        &self.sets
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn interface(&self) -> Option<&InterfaceState> {
        self.interface.as_ref()
    }

    pub fn data(&self) -> &dyn ProblemData {
        self.data.as_ref()
    }

    pub fn adaptive(&self) -> &AdaptiveState {
        &self.adaptive
    }

    fn learning_rate(&self) -> f64 {
        if self.epoch < self.cfg.pretrain_epochs {
            self.cfg.pretrain_lr
        } else {
            let e = self.epoch - self.cfg.pretrain_epochs;
            cosine_lr(e, self.cfg.main_epochs, self.cfg.lr_max, self.cfg.lr_min)
        }
    }

    fn track(&mut self) -> Result<(), TrainError> {
        let Some(state) = &self.interface else {
            return Ok(());
        };
        let field = &self.sets[1].net;
        let tracker = Tracker::new(state, field);
        if !tracker.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch: self.epoch,
                last_good: Box::new(self.sets.clone()),
            });
        }
        let next = tracker.advance()?;
        let mut times: Vec<f64> = Vec::new();
        let mut seen = HashSet::new();
        for set in [&self.samples.interior, &self.samples.boundary, &self.samples.initial] {
            for s in set.iter().flatten() {
                if seen.insert(s.p[2].to_bits()) {
                    times.push(s.p[2]);
                }
            }
        }
        let polys = tracker.positions(&times, field)?;
        let by_time: HashMap<u64, Vec<Vertex>> = times.iter().map(|t| t.to_bits()).zip(polys).collect();
        self.samples.repartition(|p| {
            if ray_cast_unchecked(&by_time[&p[2].to_bits()], [p[0], p[1]]) {
                Phase::Two
            } else {
                Phase::One
            }
        });
        self.samples.interface = interface_from_state(&next)?;
        self.interface = Some(next);
        Ok(())
    }

    /// Runs one epoch.
    pub fn step(&mut self) -> Result<EpochRecord, TrainError> {
        if let Some(c) = self.cfg.cadence {
            if self.epoch.is_multiple_of(c) {
                self.track()?;
            }
        }
        let lr = self.learning_rate();
        let pretraining = self.epoch < self.cfg.pretrain_epochs;
        let nets = [&self.sets[0].net, &self.sets[1].net];
        let ev = evaluate(nets, &self.samples, self.data.as_ref(), self.cfg.shard)?;
        let non_finite = |epoch| TrainError::NonFiniteLoss {
            epoch,
            last_good: Box::new(self.sets.clone()),
        };
        if ev.values.iter().any(|x| !x.is_finite()) {
            return Err(non_finite(self.epoch));
        }
        let weights = if pretraining {
            Weights::ones()
        } else {
            match self.cfg.weight_mode {
                WeightMode::Fixed(w) => Weights::fixed(w),
                WeightMode::Adaptive => {
                    let mut values = [0.0; N_BALANCED];
                    let mut active = [false; N_BALANCED];
                    values.copy_from_slice(&ev.values[..N_BALANCED]);
                    active.copy_from_slice(&ev.active[..N_BALANCED]);
                    let w = self.adaptive.update(&values, &active);
                    let mut all = [1.0; N_TERMS];
                    all[..N_BALANCED].copy_from_slice(&w);
                    Weights(all)
                }
            }
        }
        .with_observation(self.cfg.observation_weight);
        let total = ev.total(&weights);
        let grads = ev.weighted_grad(&weights);
        if !total.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(non_finite(self.epoch));
        }
        for (set, g) in self.sets.iter_mut().zip(&grads) {
            set.adam_step(g, lr, self.cfg.adam)?;
        }
        let rec = EpochRecord {
            epoch: self.epoch,
            values: ev.values,
            weights: weights.0,
            total,
            lr,
        };
        self.epoch += 1;
        Ok(rec)
    }

    /// Runs to the end of the schedule, calling `on_epoch` after every step.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&Trainer, &EpochRecord)) -> Result<(), TrainError> {
        while !self.is_done() {
            let rec = self.step()?;
            on_epoch(self, &rec);
        }
        Ok(())
    }

    /// Writes networks, optimizer moments, loss-balancing state, the tracked
    /// interface and the current phase partition.
    pub fn save_checkpoint(&self, path: &Path) -> Result<(), TrainError> {
        let mut enc = Encoder::new(BufWriter::new(File::create(path)?))?;
        enc.u64(self.epoch as u64)?;
        for s in &self.sets {
            enc.param_set(s)?;
        }
        enc.f64s(&self.adaptive.ema)?;
        enc.f64s(&self.adaptive.weights)?;
        match &self.interface {
            None => enc.u32(0)?,
            Some(state) => {
                enc.u32(1)?;
                enc.f64s(state.times())?;
                enc.u64(state.vertex_count() as u64)?;
                for s in state.slices() {
                    let flat: Vec<f64> = s.iter().flatten().copied().collect();
                    enc.f64s(&flat)?;
                }
            }
        }
        for set in [&self.samples.interior, &self.samples.boundary, &self.samples.initial] {
            enc.u64(set[1].len() as u64)?;
            for s in &set[1] {
                enc.u32(s.id)?;
            }
        }
        let mut w = enc.finish()?;
        w.flush()?;
        Ok(())
    }

    /// Rebuilds a trainer from a checkpoint. `samples` must come from the same
    /// sampling configuration as the original run.
    pub fn restore(
        path: &Path,
        cfg: TrainConfig,
        data: Box<dyn ProblemData + Send>,
        mut samples: SampleSet,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        let mut dec = Decoder::new(BufReader::new(File::open(path)?))?;
        let epoch = dec.u64()? as usize;
        let sets = [dec.param_set()?, dec.param_set()?];
        let mut adaptive = AdaptiveState::new();
        let corrupt = |s: &str| TrainError::Checkpoint(CheckpointError::Corrupt(s.into()));
        let ema = dec.f64s()?;
        let w = dec.f64s()?;
        if ema.len() != N_BALANCED || w.len() != N_BALANCED {
            return Err(corrupt("loss-balancing state"));
        }
        adaptive.ema.copy_from_slice(&ema);
        adaptive.weights.copy_from_slice(&w);
        let interface = match dec.u32()? {
            0 => None,
            1 => {
                let times = dec.f64s()?;
                let n = dec.u64()? as usize;
                let mut slices = Vec::with_capacity(times.len());
                for _ in 0..times.len() {
                    let flat = dec.f64s()?;
                    if flat.len() != 2 * n {
                        return Err(corrupt("interface slice length"));
                    }
                    slices.push(flat.chunks(2).map(|c| [c[0], c[1]]).collect());
                }
                Some(InterfaceState::new(times, slices)?)
            }
            _ => return Err(corrupt("interface flag")),
        };
        let mut inner: [HashSet<u32>; 3] = Default::default();
        for ids in &mut inner {
            let n = dec.u64()? as usize;
            for _ in 0..n {
                ids.insert(dec.u32()?);
            }
        }
        dec.finish()?;
        for (set, ids) in [&mut samples.interior, &mut samples.boundary, &mut samples.initial]
            .into_iter()
            .zip(&inner)
        {
            let mut all: Vec<Sample> = set.iter().flatten().copied().collect();
            all.sort_by_key(|s| s.id);
            let (two, one): (Vec<Sample>, Vec<Sample>) = all.into_iter().partition(|s| ids.contains(&s.id));
            *set = [one, two];
        }
        if let Some(state) = &interface {
            samples.interface = interface_from_state(state)?;
        }
        if sets[0].net.shape() != cfg.shape.as_slice() || sets[1].net.shape() != cfg.shape.as_slice() {
            return Err(corrupt("network shape differs from configuration"));
        }
        Ok(Self {
            cfg,
            data,
            samples,
            interface,
            sets,
            adaptive,
            epoch,
        })
    }
}
