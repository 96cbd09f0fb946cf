//! Training runs, divisor sweeps and their CSV reports.
//!
//! Minibatches are split into fixed 32-sample chunks whose gradients are
//! computed in parallel and summed in chunk order, so results depend on the
//! seed only, never on the worker count.

use std::path::Path;
use std::time::Instant;

use orpt_core::nn::{accumulate_gradient, predict, Adam, RecurrentParams, Shape};
use orpt_core::SequenceSample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::checkpoint;
use crate::config::ExperimentConfig;
use crate::dataset::{load_split, Split};
use crate::error::{OrptError, Result};
use crate::features::{build_feature_set, FeatureSet};

const GRAD_CHUNK: usize = 32;
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub epoch: usize,
    pub loss: f64,
    /// Minibatch accuracy in percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub config: ExperimentConfig,
    pub timesteps: usize,
    pub feature_dim: usize,
    pub parameter_count: usize,
    pub iterations: Vec<IterationRecord>,
    /// Training wall-clock seconds of each epoch (evaluation excluded).
    pub epoch_seconds: Vec<f64>,
    /// Mean minibatch accuracy over the last epoch, percent.
    pub train_running_accuracy: f64,
    /// Accuracy of the final parameters on the whole training split, percent.
    pub train_eval_accuracy: f64,
    pub test_accuracy: f64,
    pub params: RecurrentParams<f32>,
}

impl TrainReport {
    pub fn total_seconds(&self) -> f64 {
        self.epoch_seconds.iter().sum()
    }

    pub fn total_minutes(&self) -> f64 {
        self.total_seconds() / 60.0
    }

    /// Running total of `epoch_seconds`.
    pub fn cumulative_seconds(&self) -> Vec<f64> {
        self.epoch_seconds
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect()
    }

    pub fn seconds_per_iteration(&self) -> f64 {
        self.total_seconds() / self.iterations.len().max(1) as f64
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| OrptError::Config(format!("thread pool: {e}")))
}

/// Percentage of samples classified correctly.
pub fn evaluate(params: &RecurrentParams<f32>, samples: &[SequenceSample<f32>]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let correct = samples
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let refs: Vec<&SequenceSample<f32>> = chunk.iter().collect();
            let pred = predict(params, &refs)?;
            Ok(pred.iter().zip(chunk).filter(|(p, s)| **p == s.label as usize).count())
        })
        .collect::<orpt_core::Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(100.0 * correct as f64 / samples.len() as f64)
}

fn shape_for(cfg: &ExperimentConfig, train: &FeatureSet) -> Shape {
    Shape {
        kind: cfg.cell,
        direction: cfg.direction,
        input_dim: train.feature_dim(),
        hidden_dim: cfg.hidden_dim,
        classes: train.classes(),
    }
}

/// Trains on prepared feature sets.
pub fn run_on_features(cfg: &ExperimentConfig, train: &FeatureSet, test: &FeatureSet) -> Result<TrainReport> {
    cfg.validate()?;
    if (train.timesteps(), train.feature_dim()) != (test.timesteps(), test.feature_dim())
        || train.classes() != test.classes()
    {
        return Err(OrptError::Config(format!(
            "train features {}x{} ({} classes) differ from test features {}x{} ({} classes)",
            train.timesteps(),
            train.feature_dim(),
            train.classes(),
            test.timesteps(),
            test.feature_dim(),
            test.classes()
        )));
    }
    let (want_t, want_f) =
        orpt_core::sequence::sequence_shape(cfg.dataset.side(), cfg.divisor, cfg.dataset.planes())?;
    if (train.timesteps(), train.feature_dim()) != (want_t, want_f) {
        return Err(OrptError::Config(format!(
            "features are {}x{}, divisor {} on {} needs {want_t}x{want_f}",
            train.timesteps(),
            train.feature_dim(),
            cfg.divisor,
            cfg.dataset.name()
        )));
    }
    if train.len() < cfg.batch_size {
        return Err(OrptError::Config(format!(
            "{} training samples cannot fill one batch of {}",
            train.len(),
            cfg.batch_size
        )));
    }

    let shape = shape_for(cfg, train);
    let mut params = match &cfg.init_checkpoint {
        Some(path) => checkpoint::load_matching(path, &shape)?,
        None => RecurrentParams::<f32>::init(shape, cfg.seed)?,
    };
    let pool = thread_pool(cfg.threads)?;
    let mut adam = Adam::<f32>::new(cfg.adam(), params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batches_per_epoch = train.len() / cfg.batch_size;
    let limit = cfg.max_iterations.unwrap_or(usize::MAX);
    let scale = 1.0 / cfg.batch_size as f32;

    let mut iterations = Vec::new();
    let mut epoch_seconds = Vec::new();
    let mut running = (0usize, 0usize);
    'epochs: for epoch in 0..cfg.epochs {
        if iterations.len() >= limit {
            break;
        }
        order.shuffle(&mut rng);
        running = (0, 0);
        let start = Instant::now();
        for b in 0..batches_per_epoch {
            if iterations.len() >= limit {
                epoch_seconds.push(start.elapsed().as_secs_f64());
                break 'epochs;
            }
            let batch: Vec<&SequenceSample<f32>> = order[b * cfg.batch_size..(b + 1) * cfg.batch_size]
                .iter()
                .map(|&i| &train.samples()[i])
                .collect();
            let parts = pool.install(|| {
                batch
                    .par_chunks(GRAD_CHUNK)
                    .map(|chunk| {
                        let mut g = params.zeros_like();
                        let stats = accumulate_gradient(&params, chunk, scale, &mut g)?;
                        Ok((g, stats))
                    })
                    .collect::<orpt_core::Result<Vec<_>>>()
            })?;
            let mut parts = parts.into_iter();
            let (mut grad, first) = parts.next().expect("batch is non-empty");
            let (mut loss_sum, mut correct) = (first.loss_sum, first.correct);
            for (g, stats) in parts {
                grad.add_assign(&g);
                loss_sum += stats.loss_sum;
                correct += stats.correct;
            }
            adam.update(&mut params, &grad)?;
            running.0 += correct;
            running.1 += batch.len();
            iterations.push(IterationRecord {
                iteration: iterations.len() + 1,
                epoch: epoch + 1,
                loss: loss_sum / batch.len() as f64,
                accuracy: 100.0 * correct as f64 / batch.len() as f64,
            });
        }
        epoch_seconds.push(start.elapsed().as_secs_f64());
    }

    if let Some(path) = &cfg.save_checkpoint {
        checkpoint::save(path, &params)?;
    }
    let (train_eval_accuracy, test_accuracy) =
        pool.install(|| Ok::<_, OrptError>((evaluate(&params, train.samples())?, evaluate(&params, test.samples())?)))?;
    Ok(TrainReport {
        config: cfg.clone(),
        timesteps: train.timesteps(),
        feature_dim: train.feature_dim(),
        parameter_count: params.len(),
        iterations,
        epoch_seconds,
        train_running_accuracy: if running.1 == 0 {
            0.0
        } else {
            100.0 * running.0 as f64 / running.1 as f64
        },
        train_eval_accuracy,
        test_accuracy,
        params,
    })
}

/// Loads the dataset named by `cfg`, builds train and test features for
/// `cfg.divisor` and trains.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let (train, test) = load_features(cfg)?;
    run_on_features(cfg, &train, &test)
}

/// Train and test feature sets for `cfg` (honouring the sample limits).
pub fn load_features(cfg: &ExperimentConfig) -> Result<(FeatureSet, FeatureSet)> {
    cfg.validate()?;
    let pool = thread_pool(cfg.threads)?;
    let mut out = Vec::with_capacity(2);
    for (split, limit) in [(Split::Train, cfg.train_limit), (Split::Test, cfg.test_limit)] {
        let mut set = load_split(cfg.dataset, split, &cfg.data_dir)?;
        if let Some(n) = limit {
            set = set.take(n);
        }
        out.push(pool.install(|| build_feature_set(&set, cfg.divisor))?);
    }
    let test = out.pop().unwrap();
    Ok((out.pop().unwrap(), test))
}

/// Ratio of total training time, `b / a`.
pub fn timing_ratio(a: &TrainReport, b: &TrainReport) -> Result<f64> {
    ratio_of_minutes(a.total_minutes(), b.total_minutes())
}

pub fn ratio_of_minutes(a: f64, b: f64) -> Result<f64> {
    if a <= 0.0 || b <= 0.0 || !a.is_finite() || !b.is_finite() {
        return Err(orpt_core::Error::Numeric(format!("timing ratio of durations {a} and {b}")).into());
    }
    Ok(b / a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Failed,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Failed => "failed",
        }
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dataset: String,
    pub cell: String,
    pub direction: String,
    pub divisor: usize,
    pub timesteps: usize,
    pub features: usize,
    pub params: usize,
    pub seed: u64,
    pub iterations: usize,
    pub minutes: f64,
    pub train_running_pct: f64,
    pub train_eval_pct: f64,
    pub test_pct: f64,
    pub status: RunStatus,
}

impl SweepRow {
    pub fn from_report(r: &TrainReport) -> Self {
        SweepRow {
            dataset: r.config.dataset.name().into(),
            cell: r.config.cell.name().into(),
            direction: r.config.direction.name().into(),
            divisor: r.config.divisor,
            timesteps: r.timesteps,
            features: r.feature_dim,
            params: r.parameter_count,
            seed: r.config.seed,
            iterations: r.iterations.len(),
            minutes: r.total_minutes(),
            train_running_pct: r.train_running_accuracy,
            train_eval_pct: r.train_eval_accuracy,
            test_pct: r.test_accuracy,
            status: RunStatus::Ok,
        }
    }

    fn failed(cfg: &ExperimentConfig) -> Self {
        let (t, f) = orpt_core::sequence::sequence_shape(cfg.dataset.side(), cfg.divisor, cfg.dataset.planes())
            .unwrap_or((0, 0));
        SweepRow {
            dataset: cfg.dataset.name().into(),
            cell: cfg.cell.name().into(),
            direction: cfg.direction.name().into(),
            divisor: cfg.divisor,
            timesteps: t,
            features: f,
            params: orpt_core::nn::parameter_count(cfg.cell, cfg.direction, f, cfg.hidden_dim, 10),
            seed: cfg.seed,
            iterations: 0,
            minutes: 0.0,
            train_running_pct: 0.0,
            train_eval_pct: 0.0,
            test_pct: 0.0,
            status: RunStatus::Failed,
        }
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub reports: Vec<TrainReport>,
    /// The error that stopped the sweep, if any. The failing divisor has a
    /// `failed` row; later divisors were not run.
    pub error: Option<OrptError>,
}

/// Runs `base` once per divisor, sequentially.
pub fn divisor_sweep(base: &ExperimentConfig, divisors: &[usize]) -> Result<SweepOutcome> {
    let side = base.dataset.side();
    if let Some(&bad) = divisors.iter().find(|&&d| d == 0 || !side.is_multiple_of(d)) {
        return Err(OrptError::Config(format!(
            "divisor {bad} does not divide {} image side {side}",
            base.dataset.name()
        )));
    }
    let mut outcome = SweepOutcome {
        rows: Vec::new(),
        reports: Vec::new(),
        error: None,
    };
    for &d in divisors {
        let cfg = ExperimentConfig {
            divisor: d,
            ..base.clone()
        };
        match run_experiment(&cfg) {
            Ok(r) => {
                outcome.rows.push(SweepRow::from_report(&r));
                outcome.reports.push(r);
            }
            Err(e) => {
                outcome.rows.push(SweepRow::failed(&cfg));
                outcome.error = Some(e);
                break;
            }
        }
    }
    Ok(outcome)
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "dataset",
    "cell",
    "direction",
    "d",
    "T",
    "F",
    "params",
    "seed",
    "iterations",
    "minutes",
    "train_running_pct",
    "train_eval_pct",
    "test_pct",
    "status",
];

pub const CURVE_HEADER: [&str; 9] = [
    "dataset",
    "cell",
    "direction",
    "d",
    "seed",
    "iteration",
    "epoch",
    "loss",
    "batch_accuracy_pct",
];

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| OrptError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_summary_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.cell.clone(),
            r.direction.clone(),
            r.divisor.to_string(),
            r.timesteps.to_string(),
            r.features.to_string(),
            r.params.to_string(),
            r.seed.to_string(),
            r.iterations.to_string(),
            r.minutes.to_string(),
            r.train_running_pct.to_string(),
            r.train_eval_pct.to_string(),
            r.test_pct.to_string(),
            r.status.name().to_string(),
        ])?;
    }
    w.flush().map_err(|e| OrptError::io(path, e))
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| {
        let line = rec.position().map_or(0, |p| p.line());
        OrptError::format(path, rec.position().map_or(0, |p| p.byte()), format!("line {line}: bad value `{raw}` in column {i}"))
    })
}

fn check_header(path: &Path, r: &mut csv::Reader<std::fs::File>, want: &[&str]) -> Result<()> {
    let got = r.headers()?.clone();
    if got.iter().ne(want.iter().copied()) {
        return Err(OrptError::format(path, 0, format!("unexpected CSV header {got:?}")));
    }
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    check_header(path, &mut r, &SUMMARY_HEADER)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let status = match rec.get(13) {
            Some("ok") => RunStatus::Ok,
            Some("failed") => RunStatus::Failed,
            other => return Err(OrptError::format(path, 0, format!("bad status {other:?}"))),
        };
        rows.push(SweepRow {
            dataset: field(path, &rec, 0)?,
            cell: field(path, &rec, 1)?,
            direction: field(path, &rec, 2)?,
            divisor: field(path, &rec, 3)?,
            timesteps: field(path, &rec, 4)?,
            features: field(path, &rec, 5)?,
            params: field(path, &rec, 6)?,
            seed: field(path, &rec, 7)?,
            iterations: field(path, &rec, 8)?,
            minutes: field(path, &rec, 9)?,
            train_running_pct: field(path, &rec, 10)?,
            train_eval_pct: field(path, &rec, 11)?,
            test_pct: field(path, &rec, 12)?,
            status,
        });
    }
    Ok(rows)
}

/// Per-iteration curves of several runs in one table.
pub fn write_curves_csv(path: &Path, reports: &[TrainReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CURVE_HEADER)?;
    for r in reports {
        for it in &r.iterations {
            w.write_record([
                r.config.dataset.name().to_string(),
                r.config.cell.name().to_string(),
                r.config.direction.name().to_string(),
                r.config.divisor.to_string(),
                r.config.seed.to_string(),
                it.iteration.to_string(),
                it.epoch.to_string(),
                it.loss.to_string(),
                it.accuracy.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| OrptError::io(path, e))
}

/// Curve rows as `(d, record)` pairs.
pub fn read_curves_csv(path: &Path) -> Result<Vec<(usize, IterationRecord)>> {
    let mut r = csv::Reader::from_path(path)?;
    check_header(path, &mut r, &CURVE_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push((
            field(path, &rec, 3)?,
            IterationRecord {
                iteration: field(path, &rec, 5)?,
                epoch: field(path, &rec, 6)?,
                loss: field(path, &rec, 7)?,
                accuracy: field(path, &rec, 8)?,
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledImageSet;

    /// Two-class toy images: class 1 has a bright left half.
    fn toy(n: usize, seed: u8) -> LabeledImageSet {
        let side = 28;
        let mut pixels = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            for r in 0..side {
                for c in 0..side {
                    let noise = ((i * 7 + r * 3 + c + seed as usize) % 17) as u8;
                    let base = if label == 1 && c < side / 2 { 200 } else { 20 };
                    pixels.push(base + noise);
                }
            }
            labels.push(label);
        }
        LabeledImageSet::new(side, 1, 2, pixels, labels).unwrap()
    }

    fn cfg() -> ExperimentConfig {
        ExperimentConfig {
            divisor: 7,
            hidden_dim: 6,
            batch_size: 16,
            epochs: 2,
            learning_rate: 0.01,
            seed: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn toy_run_learns_and_is_deterministic() {
        let train = build_feature_set(&toy(64, 0), 7).unwrap();
        let test = build_feature_set(&toy(32, 5), 7).unwrap();
        let a = run_on_features(&cfg(), &train, &test).unwrap();
        assert_eq!(a.iterations.len(), 8);
        assert_eq!(a.epoch_seconds.len(), 2);
        assert!(a.cumulative_seconds().windows(2).all(|w| w[0] <= w[1]));
        assert!(a.test_accuracy > 90.0, "{}", a.test_accuracy);
        for acc in [a.train_running_accuracy, a.train_eval_accuracy, a.test_accuracy] {
            assert!((0.0..=100.0).contains(&acc));
        }
        let mut c2 = cfg();
        c2.threads = Some(1);
        let b = run_on_features(&c2, &train, &test).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn iteration_cap_and_mismatch() {
        let train = build_feature_set(&toy(64, 0), 7).unwrap();
        let test = build_feature_set(&toy(16, 1), 7).unwrap();
        let mut c = cfg();
        c.max_iterations = Some(3);
        let r = run_on_features(&c, &train, &test).unwrap();
        assert_eq!(r.iterations.len(), 3);
        c.max_iterations = Some(4);
        let r = run_on_features(&c, &train, &test).unwrap();
        assert_eq!((r.iterations.len(), r.epoch_seconds.len()), (4, 1));
        assert!(r.train_running_accuracy > 0.0);
        c.divisor = 4;
        assert!(matches!(run_on_features(&c, &train, &test), Err(OrptError::Config(_))));
        let other = build_feature_set(&toy(16, 1), 4).unwrap();
        assert!(matches!(run_on_features(&cfg(), &train, &other), Err(OrptError::Config(_))));
    }

    #[test]
    fn ratios() {
        assert!((ratio_of_minutes(158.0, 45.0).unwrap() - 0.2848).abs() < 1e-3);
        assert!((ratio_of_minutes(447.0, 68.0).unwrap() - 0.1521).abs() < 1e-3);
        assert_eq!(ratio_of_minutes(3.0, 3.0).unwrap(), 1.0);
        assert_eq!(ratio_of_minutes(0.0, 3.0).unwrap_err().exit_code(), 5);
    }

    #[test]
    fn empty_and_invalid_sweeps() {
        let out = divisor_sweep(&cfg(), &[]).unwrap();
        assert!(out.rows.is_empty() && out.error.is_none());
        assert!(matches!(divisor_sweep(&cfg(), &[2, 5]), Err(OrptError::Config(_))));
    }

    #[test]
    fn failed_sweep_is_flagged() {
        let mut c = cfg();
        c.data_dir = "/nonexistent/orpt".into();
        let out = divisor_sweep(&c, &[1, 2]).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].status, RunStatus::Failed);
        assert!(matches!(out.error, Some(OrptError::Io { .. })));
    }
}
