use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ahcrf::augmentation::{augment_actions, AugmentOptions, Backend, RetrievalIndex};
use ahcrf::engine::{class_posterior, class_posterior_with_decode, TrainedModel};
use ahcrf::error::{Error, Result};
use ahcrf::features::{generate_synthetic_dataset, Dataset};
use ahcrf::harness::io::{self, read_dataset, read_model, read_reports, write_augmented, write_dataset, write_model, write_reports};
use ahcrf::harness::settings::{self, KEYS};
use ahcrf::harness::{inject_corruption, run_curve, Config, CorruptionKind, ExperimentReport, Method, Task};
use ahcrf::training::{train, TrainReport};

#[derive(Parser)]
#[command(name = "ahcrf", version, about = "Action classification with alternative-augmented hidden-state CRFs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key=value configuration file
    #[arg(long, visible_alias = "spec")]
    config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inject outlier segments into a dataset
    Corrupt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kind: Option<CorruptionKind>,
        #[arg(long)]
        ratio: Option<f64>,
        /// Expose the outlier masks in the output
        #[arg(long)]
        known: bool,
        /// Write ground-truth masks here as CSV
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Attach retrieved alternatives to every segment
    Augment {
        #[command(flatten)]
        common: Common,
        /// Training set that alternatives are drawn from
        #[arg(long)]
        train: PathBuf,
        /// Actions to augment; defaults to the training set with each action held out
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        aug: AugmentFlags,
    },
    /// Fit a model
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "model.txt")]
        out: PathBuf,
        /// Train on alternative-augmented actions
        #[arg(long)]
        augment: bool,
        /// Write the optimizer trace as CSV
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        aug: AugmentFlags,
    },
    /// Classify actions
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Training set; when given, actions are augmented before prediction
        #[arg(long)]
        train: Option<PathBuf>,
        /// Print the decoded (observation, pose) per segment
        #[arg(long)]
        decode: bool,
        #[command(flatten)]
        aug: AugmentFlags,
    },
    /// Run an experiment over a range of outlier ratios
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        task: Option<Task>,
        /// Defaults to `experiment.method` from the config
        #[arg(long, conflicts_with = "compare")]
        method: Option<Method>,
        /// Run both the plain and the augmented model
        #[arg(long)]
        compare: bool,
        /// start:end:step, or a single ratio
        #[arg(long, default_value = "0")]
        ratios: String,
        /// Dataset file; a synthetic one is generated from the config otherwise
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
    /// Summarize report CSV files
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        /// Write the accuracy table here as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct AugmentFlags {
    /// Also take the alternatives of this many neighbouring segments
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    backend: Option<Backend>,
    /// Only augment segments flagged by the action's outlier mask
    #[arg(long)]
    known_mask: bool,
    /// Rule out the original at masked segments
    #[arg(long)]
    exclude_masked_original: bool,
}

impl AugmentFlags {
    fn options(&self, cfg: &Config) -> Result<AugmentOptions> {
        let mut o = settings::augment_options(cfg)?;
        if let Some(w) = self.window {
            o.duplicate_window = w;
        }
        if let Some(b) = self.backend {
            o.backend = b;
        }
        o.known_mask_mode |= self.known_mask;
        o.exclude_masked_original |= self.exclude_masked_original;
        Ok(o)
    }
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.check_keys(KEYS)?;
    if let Some(s) = common.seed {
        cfg.set("seed", s);
    }
    Ok(cfg)
}

fn load_dataset(path: &Path) -> Result<Dataset<f64>> {
    read_dataset(&io::load(path)?).map_err(|e| in_file(path, e))
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

macro_rules! say {
    ($($arg:tt)*) => {
        emit(&format!("{}\n", format_args!($($arg)*)))?
    };
}

fn parse_ratios(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad ratio range `{s}` (start:end:step)"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [r] => Ok(vec![r]),
        [a, b, step] if step > 0.0 && b >= a => {
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| ((a + k as f64 * step) * 1e9).round() / 1e9).collect())
        }
        _ => Err(bad()),
    }
}

fn write_trace(path: &Path, report: &TrainReport<f64>) -> Result<()> {
    let mut text = String::from("# ahcrf-trace v1\niteration,objective,gradient_norm\n");
    for r in &report.trace {
        text.push_str(&format!("{},{},{}\n", r.iteration, r.objective, r.gradient_norm));
    }
    io::save(path, &text)
}

fn class_name(classes: &[String], y: Option<usize>) -> &str {
    y.map_or("-", |y| classes[y].as_str())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { common, out } => {
            let cfg = load_config(&common)?;
            let data: Dataset<f64> = generate_synthetic_dataset(&settings::synthetic_spec(&cfg)?)?;
            io::save(&out, &write_dataset(&data)?)?;
            say!("wrote {} actions to {}", data.actions.len(), out.display());
        }
        Command::Corrupt {
            common,
            data,
            out,
            kind,
            ratio,
            known,
            truth,
        } => {
            let cfg = load_config(&common)?;
            let task = cfg.get_or("experiment.task", Task::Task2)?;
            let mut spec = settings::corruption_spec(&cfg, task)?;
            if let Some(k) = kind {
                spec.kind = k;
            }
            if let Some(r) = ratio {
                spec.ratio = r;
            }
            spec.known |= known;
            let dataset = load_dataset(&data)?;
            let corrupted = inject_corruption(&dataset, &spec)?;
            io::save(&out, &write_dataset(&corrupted.dataset)?)?;
            if let Some(path) = truth {
                let mut text = String::from("# ahcrf-masks v1\nid,mask\n");
                for (a, m) in corrupted.dataset.actions.iter().zip(&corrupted.masks) {
                    let bits: String = m.iter().map(|&b| if b { '1' } else { '0' }).collect();
                    text.push_str(&format!("{},{bits}\n", a.id));
                }
                io::save(&path, &text)?;
            }
            say!(
                "corrupted {} segments ({} {})",
                corrupted.corrupted_segments(),
                spec.kind,
                spec.ratio
            );
        }
        Command::Augment {
            common,
            train: train_path,
            data,
            out,
            aug,
        } => {
            let cfg = load_config(&common)?;
            let train_set = load_dataset(&train_path)?;
            let mut opts = aug.options(&cfg)?;
            let index = RetrievalIndex::build(&train_set.actions, opts.backend)?;
            let (classes, targets) = match data {
                Some(p) => {
                    let d = load_dataset(&p)?;
                    if d.classes != train_set.classes {
                        return Err(Error::InvalidInput("class tables of the two datasets differ".into()));
                    }
                    (d.classes, d.actions)
                }
                None => {
                    opts.exclude_self = true;
                    (train_set.classes.clone(), train_set.actions.clone())
                }
            };
            let augmented = augment_actions(&index, &targets, &opts)?;
            io::save(&out, &write_augmented(&classes, &augmented)?)?;
            say!("augmented {} actions with {} queries", augmented.len(), index.query_count());
        }
        Command::Train {
            common,
            data,
            out,
            augment,
            trace,
            aug,
        } => {
            let cfg = load_config(&common)?;
            let config = settings::train_config::<f64>(&cfg)?;
            let dataset = load_dataset(&data)?;
            let ny = dataset.num_classes();
            let (params, report) = if augment {
                let opts = AugmentOptions {
                    exclude_self: true,
                    ..aug.options(&cfg)?
                };
                let index = RetrievalIndex::build(&dataset.actions, opts.backend)?;
                let augmented = augment_actions(&index, &dataset.actions, &opts)?;
                train(&augmented, ny, &config)?
            } else {
                train(&dataset.actions, ny, &config)?
            };
            let model = TrainedModel {
                params,
                sigma: config.sigma,
                classes: dataset.classes,
            };
            io::save(&out, &write_model(&model)?)?;
            if let Some(p) = trace {
                write_trace(&p, &report)?;
            }
            say!(
                "objective {} after {} iterations ({:?}); model written to {}",
                report.final_objective,
                report.iterations,
                report.termination,
                out.display()
            );
        }
        Command::Predict {
            common,
            model,
            data,
            train: train_path,
            decode,
            aug,
        } => {
            let cfg = load_config(&common)?;
            let model: TrainedModel<f64> = read_model(&io::load(&model)?).map_err(|e| in_file(&model, e))?;
            let dataset = load_dataset(&data)?;
            if dataset.classes != model.classes {
                return Err(Error::InvalidInput("dataset classes differ from the model's".into()));
            }
            let augmented = match train_path {
                Some(p) => {
                    let train_set = load_dataset(&p)?;
                    let opts = aug.options(&cfg)?;
                    let index = RetrievalIndex::build(&train_set.actions, opts.backend)?;
                    augment_actions(&index, &dataset.actions, &opts)?
                }
                None => dataset.actions.iter().map(ahcrf::AugmentedAction::plain).collect(),
            };
            let mut correct = 0;
            let mut labeled = 0;
            for a in &augmented {
                let post = if decode {
                    class_posterior_with_decode(a, &model.params)?
                } else {
                    class_posterior(a, &model.params)?
                };
                let mut line = format!(
                    "{} predicted={} truth={}",
                    a.id,
                    model.classes[post.predicted],
                    class_name(&model.classes, a.label)
                );
                if let Some(cfg) = &post.decode {
                    line.push_str(" decode=");
                    let states: Vec<String> = cfg
                        .states
                        .iter()
                        .map(|s| format!("({},{})", s.observation, s.pose))
                        .collect();
                    line.push_str(&states.join(" "));
                }
                say!("{line}");
                if let Some(y) = a.label {
                    labeled += 1;
                    correct += usize::from(y == post.predicted);
                }
            }
            if labeled > 0 {
                say!("accuracy {}/{labeled}", correct);
            }
        }
        Command::Evaluate {
            common,
            task,
            method,
            compare,
            ratios,
            data,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(t) = task {
                cfg.set("experiment.task", t);
            }
            let ratios = parse_ratios(&ratios)?;
            let dataset = match data {
                Some(p) => load_dataset(&p)?,
                None => generate_synthetic_dataset(&settings::synthetic_spec(&cfg)?)?,
            };
            let methods = match (method, compare) {
                (_, true) => vec![Method::Plain, Method::Augmented],
                (Some(m), false) => vec![m],
                (None, false) => vec![cfg.get_or("experiment.method", Method::Augmented)?],
            };
            let mut reports: Vec<ExperimentReport> = Vec::new();
            for m in methods {
                cfg.set("experiment.method", m);
                let config = settings::experiment_config::<f64>(&cfg)?;
                reports.extend(run_curve(&config, &dataset, &ratios)?);
            }
            io::save(&out, &write_reports(&reports))?;
            for r in &reports {
                let m = &r.metrics;
                say!("{} {} ratio={} accuracy={:.4}", m.task, m.method, m.ratio, m.accuracy);
            }
        }
        Command::Report { common, inputs, out } => {
            load_config(&common)?;
            let mut reports = Vec::new();
            for p in &inputs {
                reports.extend(read_reports(&io::load(p)?).map_err(|e| in_file(p, e))?);
            }
            let (table, summary) = summarize(&reports);
            match out {
                Some(p) => io::save(&p, &table)?,
                None => emit(&table)?,
            }
            emit(&summary)?;
        }
    }
    Ok(())
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.4}"))
}

/// Accuracy table (CSV, one row per task and ratio, one column per method)
/// and a plain-text summary.
fn summarize(reports: &[ExperimentReport]) -> (String, String) {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in reports {
        let k = (r.metrics.task.to_string(), r.metrics.ratio);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut table = String::from("# ahcrf-accuracy v1\ntask,ratio,plain,augmented,gap\n");
    for (task, ratio) in &keys {
        let acc = |m: Method| {
            reports
                .iter()
                .find(|r| r.metrics.task.to_string() == *task && r.metrics.ratio == *ratio && r.metrics.method == m)
                .map(|r| r.metrics.accuracy)
        };
        let (p, a) = (acc(Method::Plain), acc(Method::Augmented));
        let gap = p.zip(a).map(|(p, a)| a - p);
        table.push_str(&format!("{task},{ratio},{},{},{}\n", na(p), na(a), na(gap)));
    }
    let mut summary = String::new();
    for r in reports {
        let m = &r.metrics;
        summary.push_str(&format!(
            "{} {} ratio {}: accuracy {:.4} over {} folds; alternatives accurate {} (≥1: {}); correct replacement {} ({} replaced); {:.2}s training, {:.2}s prediction\n",
            m.task,
            m.method,
            m.ratio,
            m.accuracy,
            m.folds,
            na(m.alternative_quality.mean_accurate_fraction()),
            na(m.alternative_quality.at_least_one()),
            na(m.replacement.probability()),
            m.replacement.replaced,
            r.runtime.train_seconds,
            r.runtime.predict_seconds,
        ));
    }
    (table, summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
