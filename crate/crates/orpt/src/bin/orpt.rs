use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use orpt::config::ExperimentConfig;
use orpt::dataset::{load_split, DatasetId, Split};
use orpt::error::{OrptError, Result};
use orpt::features::build_feature_set;
use orpt::harness::{self, SweepRow};
use orpt::{matrix_io, pgm, verify};
use orpt_core::nn::{lstm_step, CellKind, Direction, HiddenState, RecurrentParams, Shape};
use orpt_core::{AnalysisOperator, ImagePlane, OrptMatrix};

/// Integer Ramanujan periodic transform features and recurrent sequence
/// classifiers.
///
/// Exit codes: 0 ok, 2 usage, 3 I/O or file format, 4 state mismatch,
/// 5 numeric failure.
#[derive(Parser, Debug)]
#[command(name = "orpt", version)]
struct Cli {
    /// Random seed (shuffling, initialization, random test data) [default: 0].
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Maximum number of worker threads.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the N×N transform matrix and write it as text.
    BuildMatrix {
        /// Matrix size, 1..=4096.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=4096))]
        n: u32,
        /// Output file; the matrix goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Subband-transform a square greymap (PGM) and check reconstruction.
    Transform {
        /// Input image, P2 or P5.
        #[arg(long)]
        input: PathBuf,
        /// Divisor of the image side.
        #[arg(long)]
        d: usize,
        /// Write the coefficient matrix as text (`SUBBANDS d N` + N rows).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transform a dataset split and write an ORPTFEAT feature file.
    ExportFeatures {
        #[arg(long, value_parser = parse_dataset)]
        dataset: DatasetId,
        /// Divisor of the image side.
        #[arg(long)]
        d: usize,
        #[arg(long, value_parser = parse_split)]
        split: Split,
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Only the first N images.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Train one model and write summary.csv / curves.csv.
    Train {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Divisor of the image side.
        #[arg(long)]
        d: Option<usize>,
        /// Initialize from this checkpoint (must match the model shape).
        #[arg(long)]
        init_checkpoint: Option<PathBuf>,
        /// Save the final parameters here.
        #[arg(long)]
        save_checkpoint: Option<PathBuf>,
    },
    /// Train once per divisor and write summary.csv / curves.csv.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated divisors, e.g. 1,2,4,7. May be empty.
        #[arg(long, value_parser = parse_divisors, default_value = "", hide_default_value = true)]
        divisors: Divisors,
    },
    /// Run the invariant suites and print a pass/fail table.
    Verify {
        /// Smaller random corpora.
        #[arg(long)]
        quick: bool,
    },
    /// Measure transform and cell throughput.
    Bench {
        /// Image side for transform_2d and vector length for forward_1d.
        #[arg(long, default_value_t = 28)]
        n: usize,
        /// Divisor for transform_2d.
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// LSTM hidden size.
        #[arg(long, default_value_t = 128)]
        hidden: usize,
        /// Time budget per benchmark in seconds.
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
    },
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// key = value experiment file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Desk-scale profile: hidden 64, 10000 train / 2000 test, 2 epochs.
    #[arg(long)]
    quick: bool,
    #[arg(long, value_parser = parse_dataset)]
    dataset: Option<DatasetId>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// rnn, indrnn or lstm; a `bi` prefix (e.g. bilstm) selects both directions.
    #[arg(long)]
    cell: Option<String>,
    #[arg(long)]
    bidirectional: bool,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Stop after this many optimizer steps.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Global gradient-norm clip; 0 disables.
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    train_limit: Option<usize>,
    #[arg(long)]
    test_limit: Option<usize>,
    /// Directory for summary.csv and curves.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn parse_dataset(s: &str) -> std::result::Result<DatasetId, String> {
    s.parse().map_err(|e: OrptError| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse().map_err(|e: OrptError| e.to_string())
}

fn parse_cell(s: &str) -> Result<(CellKind, bool)> {
    let (bi, base) = match s.strip_prefix("bi") {
        Some(rest) if !rest.is_empty() => (true, rest),
        _ => (false, s),
    };
    let kind = base
        .parse()
        .map_err(|_| OrptError::Config(format!("unknown cell `{s}`")))?;
    Ok((kind, bi))
}

impl ExperimentArgs {
    fn to_config(&self, seed: Option<u64>, threads: Option<u32>) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if self.quick {
            cfg = cfg.quick();
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| OrptError::io(path, e))?;
            cfg.apply_str(&text)?;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.threads = threads.map(|t| t as usize);
        if let Some(v) = self.dataset {
            cfg.dataset = v;
            if self.data_dir.is_none() && self.config.is_none() {
                cfg.data_dir = PathBuf::from("data").join(v.name());
            }
        }
        if let Some(v) = &self.data_dir {
            cfg.data_dir = v.clone();
        }
        if let Some(c) = &self.cell {
            let (kind, bi) = parse_cell(c)?;
            cfg.cell = kind;
            if bi {
                cfg.direction = Direction::Bidirectional;
            }
        }
        if self.bidirectional {
            cfg.direction = Direction::Bidirectional;
        }
        if let Some(v) = self.hidden {
            cfg.hidden_dim = v;
        }
        if let Some(v) = self.batch {
            cfg.batch_size = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if self.iterations.is_some() {
            cfg.max_iterations = self.iterations;
        }
        if let Some(v) = self.lr {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.clip {
            cfg.clip_norm = v;
        }
        if self.train_limit.is_some() {
            cfg.train_limit = self.train_limit;
        }
        if self.test_limit.is_some() {
            cfg.test_limit = self.test_limit;
        }
        Ok(cfg)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| OrptError::io(dir, e))
}

fn print_row(r: &SweepRow) {
    println!(
        "d={} T={} F={} params={} iterations={} minutes={:.3} train_running={:.2} train_eval={:.2} test={:.2} status={}",
        r.divisor,
        r.timesteps,
        r.features,
        r.params,
        r.iterations,
        r.minutes,
        r.train_running_pct,
        r.train_eval_pct,
        r.test_pct,
        r.status.name()
    );
}

fn check_divisor(d: usize, side: usize) -> Result<()> {
    if d == 0 || !side.is_multiple_of(d) {
        return Err(OrptError::Config(format!("divisor {d} does not divide image side {side}")));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build_global()
            .map_err(|e| OrptError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::BuildMatrix { n, out } => {
            let m = OrptMatrix::build(n as usize)?;
            match out {
                Some(path) => matrix_io::write_matrix(&path, &m)?,
                None => print!("{}", matrix_io::to_text(&m)),
            }
            let norms: Vec<String> = m.column_norms().iter().map(i64::to_string).collect();
            println!("norms {}", norms.join(" "));
        }
        Command::Transform { input, d, out } => {
            let x = pgm::read_pgm(&input)?;
            check_divisor(d, x.side())?;
            let op = AnalysisOperator::for_divisor(d, x.side())?;
            let y = op.transform_2d(&x)?;
            let back = op.inverse_2d(&y)?;
            if let Some(path) = out {
                let mut text = format!("SUBBANDS {d} {}\n", x.side());
                for row in y.coefficients().chunks(x.side()) {
                    let row: Vec<String> = row.iter().map(f64::to_string).collect();
                    text.push_str(&row.join(" "));
                    text.push('\n');
                }
                std::fs::write(&path, text).map_err(|e| OrptError::io(&path, e))?;
            }
            println!(
                "side {} d {} channels {} channel_side {}",
                x.side(),
                d,
                y.channel_count(),
                y.channel_side()
            );
            println!("energy {} weighted {}", x.energy(), op.weighted_energy(&y));
            println!("reconstruction_max_error {:e}", back.max_abs_diff(&x));
        }
        Command::ExportFeatures {
            dataset,
            d,
            split,
            data_dir,
            out,
            limit,
        } => {
            check_divisor(d, dataset.side())?;
            let mut set = load_split(dataset, split, &data_dir)?;
            if let Some(n) = limit {
                set = set.take(n);
            }
            let fs = build_feature_set(&set, d)?;
            fs.write(&out)?;
            println!("{}", fs.summary());
        }
        Command::Train {
            exp,
            d,
            init_checkpoint,
            save_checkpoint,
        } => {
            let mut cfg = exp.to_config(cli.seed, cli.threads)?;
            if let Some(d) = d {
                cfg.divisor = d;
            }
            if init_checkpoint.is_some() {
                cfg.init_checkpoint = init_checkpoint;
            }
            if save_checkpoint.is_some() {
                cfg.save_checkpoint = save_checkpoint;
            }
            cfg.validate()?;
            if let Some(p) = &cfg.init_checkpoint {
                if !p.exists() {
                    return Err(OrptError::io(p, std::io::ErrorKind::NotFound.into()));
                }
            }
            create_dir(&exp.out_dir)?;
            let report = harness::run_experiment(&cfg)?;
            let row = SweepRow::from_report(&report);
            harness::write_summary_csv(&exp.out_dir.join("summary.csv"), std::slice::from_ref(&row))?;
            harness::write_curves_csv(&exp.out_dir.join("curves.csv"), std::slice::from_ref(&report))?;
            print_row(&row);
        }
        Command::Sweep { exp, divisors } => {
            let cfg = exp.to_config(cli.seed, cli.threads)?;
            ExperimentConfig { divisor: 1, ..cfg.clone() }.validate()?;
            create_dir(&exp.out_dir)?;
            let outcome = harness::divisor_sweep(&cfg, &divisors.0)?;
            harness::write_summary_csv(&exp.out_dir.join("summary.csv"), &outcome.rows)?;
            harness::write_curves_csv(&exp.out_dir.join("curves.csv"), &outcome.reports)?;
            for r in &outcome.rows {
                print_row(r);
            }
            if let Some(e) = outcome.error {
                return Err(e);
            }
        }
        Command::Verify { quick } => {
            let results = verify::run_all(cli.seed.unwrap_or(0), quick);
            let mut failed = 0;
            for r in &results {
                println!(
                    "{:<14} {} {:>8.2}s  {}",
                    r.name,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.seconds,
                    r.detail
                );
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                return Err(orpt_core::Error::Numeric(format!("{failed} suite(s) failed")).into());
            }
        }
        Command::Bench { n, d, hidden, seconds } => bench(n, d, hidden, seconds, cli.seed.unwrap_or(0))?,
    }
    Ok(())
}

/// Calls `f` repeatedly for about `seconds` and returns calls per second.
fn throughput(seconds: f64, mut f: impl FnMut()) -> f64 {
    let start = Instant::now();
    let mut calls = 0u64;
    loop {
        f();
        calls += 1;
        let el = start.elapsed().as_secs_f64();
        if el >= seconds {
            return calls as f64 / el;
        }
    }
}

fn bench(n: usize, d: usize, hidden: usize, seconds: f64, seed: u64) -> Result<()> {
    check_divisor(d, n)?;
    if hidden == 0 || seconds.is_nan() || seconds <= 0.0 {
        return Err(OrptError::Config("hidden and seconds must be positive".into()));
    }
    let m = OrptMatrix::build(n)?;
    let x: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 256) as f64 / 255.0).collect();
    let rate = throughput(seconds, || {
        black_box(m.forward(black_box(&x)).unwrap());
    });
    println!("forward_1d n={n} ops_per_sec {rate:.1}");

    let img = ImagePlane::new(n, (0..n * n).map(|i| ((i as u64 * 31 + seed) % 256) as f64 / 255.0).collect())?;
    let op = AnalysisOperator::for_divisor(d, n)?;
    let rate = throughput(seconds, || {
        black_box(op.transform_2d(black_box(&img)).unwrap());
    });
    println!("transform_2d n={n} d={d} ops_per_sec {rate:.1}");

    let shape = Shape {
        kind: CellKind::Lstm,
        direction: Direction::Forward,
        input_dim: d * d,
        hidden_dim: hidden,
        classes: 10,
    };
    let p = RecurrentParams::<f32>::init(shape, seed)?;
    let input = vec![0.5f32; d * d];
    let mut state = HiddenState::zeros(CellKind::Lstm, hidden);
    let rate = throughput(seconds, || {
        state = lstm_step(&p, &state, black_box(&input)).unwrap();
    });
    println!("lstm_step f={} m={hidden} ops_per_sec {rate:.1}", d * d);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[derive(Clone, Debug)]
struct Divisors(Vec<usize>);

fn parse_divisors(s: &str) -> std::result::Result<Divisors, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|e| format!("bad divisor {t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(Divisors)
}
