//! Single runs: problem setup, training with on-disk artifacts, evaluation.

use super::config::{ConfigError, RunConfig};
use super::metrics::{export_fields, gen_error, reference_interface, write_fields, Classifier, EvalGrid, MetricsReport};
use crate::geometry::{uniform_angles, GeometryError, InterfaceState, HISTORY_HEADER};
use crate::loss::{evaluate_values, loss_error, LossError};
use crate::net::checkpoint::save_params;
use crate::physics::{manufacture_data, Manufactured};
use crate::sampling::{closed_times, gen_observation, SampleSet, SamplingError};
use crate::trainer::{EpochRecord, TrainError, Trainer};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot fit a rate: {0}")]
    DegenerateFit(String),
}

impl HarnessError {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Train(TrainError::Config(_)) => 2,
            HarnessError::Train(TrainError::NonFiniteLoss { .. }) => 3,
            _ => 1,
        }
    }
}

/// Everything needed to train and evaluate one configuration.
pub struct Problem {
    pub data: Manufactured,
    pub samples: SampleSet,
    /// Initial marker polygon on every slice, for the solution-driven case.
    pub interface: Option<InterfaceState>,
    pub classifier: Classifier,
    pub grid: EvalGrid,
}

pub fn build_problem(cfg: &RunConfig) -> Result<Problem, HarnessError> {
    let exact = cfg.exact();
    let law = cfg.law();
    let data = manufacture_data(exact, cfg.phases);
    let mut samples = SampleSet::generate(&cfg.sampling, &law, cfg.domain, cfg.t_end, cfg.membership)?;
    if cfg.observation {
        samples.observation = gen_observation(cfg.example, exact, cfg.membership)?;
    }
    let [nx, ny, nt] = cfg.eval_grid;
    let grid = EvalGrid {
        nx,
        ny,
        nt,
        domain: cfg.domain,
        t_end: cfg.t_end,
    };
    let (interface, classifier) = if cfg.solution_driven() {
        let [n_gamma, nt_gamma] = cfg.sampling.interface;
        let poly = uniform_angles(n_gamma)
            .into_iter()
            .map(|th| law.interface_point(th, 0.0))
            .collect::<Result<Vec<_>, _>>()?;
        let state = InterfaceState::stationary(closed_times(nt_gamma, cfg.t_end), poly)?;
        let reference = reference_interface(exact, cfg.reference_vertices, &grid.times());
        (Some(state), Classifier::Polygons(reference))
    } else {
        (None, Classifier::Law(law, cfg.membership))
    };
    Ok(Problem {
        data,
        samples,
        interface,
        classifier,
        grid,
    })
}

pub struct RunOutput {
    pub report: MetricsReport,
    pub history: Vec<EpochRecord>,
}

pub const LOSS_LOG: &str = "loss_log.csv";
pub const INTERFACE_HISTORY: &str = "interface_history.csv";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const LAST_GOOD: &str = "last_good.bin";
pub const FIELDS: &str = "fields.csv";
pub const METRICS: &str = "metrics.json";

fn history_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(HISTORY_HEADER)?;
    Ok(w)
}

fn report(trainer: &Trainer, problem: &Problem, cfg: &RunConfig, wall: f64) -> Result<MetricsReport, HarnessError> {
    let sets = trainer.param_sets();
    let nets = [&sets[0].net, &sets[1].net];
    let ev = evaluate_values(nets, trainer.samples(), trainer.data(), cfg.train.shard)?;
    let g = gen_error(nets, cfg.exact(), &problem.classifier, &problem.grid);
    Ok(MetricsReport {
        example: cfg.example,
        epochs: trainer.epoch(),
        gen_error_velocity: g.velocity,
        gen_error_pressure: g.pressure,
        loss_error: loss_error(&ev.values),
        final_terms: ev.values,
        wall_time_s: wall,
    })
}

fn write_outputs(trainer: &Trainer, problem: &Problem, cfg: &RunConfig, rep: &MetricsReport) -> Result<(), HarnessError> {
    let sets = trainer.param_sets();
    let rows = export_fields(
        [&sets[0].net, &sets[1].net],
        cfg.exact(),
        &problem.classifier,
        &problem.grid,
        cfg.t_end,
    );
    write_fields(&cfg.output.join(FIELDS), &rows)?;
    fs::write(cfg.output.join(METRICS), serde_json::to_string_pretty(rep)?)?;
    Ok(())
}

/// Samples, trains and evaluates, writing the loss log, interface history,
/// checkpoint, terminal-time fields and metrics into the output directory.
pub fn run_example(cfg: &RunConfig) -> Result<RunOutput, HarnessError> {
    if cfg.contrast_without_observation() {
        eprintln!("warning: high-contrast run without observation points");
    }
    fs::create_dir_all(&cfg.output)?;
    let problem = build_problem(cfg)?;
    let start = Instant::now();
    let mut trainer = Trainer::new(
        cfg.train.clone(),
        Box::new(problem.data),
        problem.samples.clone(),
        problem.interface.clone(),
    )?;
    let mut log = csv::Writer::from_writer(BufWriter::new(File::create(cfg.output.join(LOSS_LOG))?));
    log.write_record(EpochRecord::header())?;
    let mut hist = match trainer.interface() {
        Some(state) => {
            let mut w = history_writer(&cfg.output.join(INTERFACE_HISTORY))?;
            state.write_history(&mut w, 0)?;
            Some(w)
        }
        None => None,
    };
    let total = cfg.train.total_epochs();
    let mut history = Vec::with_capacity(total);
    while !trainer.is_done() {
        let rec = match trainer.step() {
            Ok(r) => r,
            Err(TrainError::NonFiniteLoss { epoch, last_good }) => {
                save_params(&cfg.output.join(LAST_GOOD), last_good.as_ref())
                    .map_err(TrainError::from)?;
                log.flush()?;
                return Err(TrainError::NonFiniteLoss { epoch, last_good }.into());
            }
            Err(e) => return Err(e.into()),
        };
        log.write_record(rec.row())?;
        let done = trainer.epoch();
        if done % cfg.log_every == 0 || done == total {
            println!("epoch {done}/{total} loss {:.4e} lr {:.3e}", rec.total, rec.lr);
        }
        if let (Some(w), Some(state)) = (hist.as_mut(), trainer.interface()) {
            if done % cfg.history_every == 0 || done == total {
                state.write_history(w, done)?;
            }
        }
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
            trainer.save_checkpoint(&cfg.output.join(CHECKPOINT))?;
        }
        history.push(rec);
    }
    log.flush()?;
    if let Some(mut w) = hist {
        w.flush()?;
    }
    trainer.save_checkpoint(&cfg.output.join(CHECKPOINT))?;
    let rep = report(&trainer, &problem, cfg, start.elapsed().as_secs_f64())?;
    write_outputs(&trainer, &problem, cfg, &rep)?;
    Ok(RunOutput { report: rep, history })
}

fn restore(cfg: &RunConfig, checkpoint: &Path) -> Result<(Trainer, Problem), HarnessError> {
    let problem = build_problem(cfg)?;
    let trainer = Trainer::restore(checkpoint, cfg.train.clone(), Box::new(problem.data), problem.samples.clone())?;
    Ok((trainer, problem))
}

/// Metrics of a saved run; also rewrites its field and metrics files.
pub fn evaluate_run(cfg: &RunConfig, checkpoint: &Path) -> Result<MetricsReport, HarnessError> {
    let (trainer, problem) = restore(cfg, checkpoint)?;
    let rep = report(&trainer, &problem, cfg, 0.0)?;
    fs::create_dir_all(&cfg.output)?;
    write_outputs(&trainer, &problem, cfg, &rep)?;
    Ok(rep)
}

/// Writes the tracked interface of a saved solution-driven run.
pub fn track_only(cfg: &RunConfig, checkpoint: &Path) -> Result<PathBuf, HarnessError> {
    let (trainer, _) = restore(cfg, checkpoint)?;
    let state = trainer.interface().ok_or_else(|| ConfigError::Invalid {
        key: "example",
        msg: "only the solution-driven example tracks its interface".into(),
    })?;
    fs::create_dir_all(&cfg.output)?;
    let path = cfg.output.join(INTERFACE_HISTORY);
    let mut w = history_writer(&path)?;
    state.write_history(&mut w, trainer.epoch())?;
    w.flush()?;
    Ok(path)
}

/// Writes terminal-time fields of a saved run.
pub fn export_saved_fields(cfg: &RunConfig, checkpoint: &Path) -> Result<PathBuf, HarnessError> {
    let (trainer, problem) = restore(cfg, checkpoint)?;
    let sets = trainer.param_sets();
    let rows = export_fields(
        [&sets[0].net, &sets[1].net],
        cfg.exact(),
        &problem.classifier,
        &problem.grid,
        cfg.t_end,
    );
    fs::create_dir_all(&cfg.output)?;
    let path = cfg.output.join(FIELDS);
    write_fields(&path, &rows)?;
    Ok(path)
}
