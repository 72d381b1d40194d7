use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use impshap::report::{check_epsilon_grid, write_sweep_csv};
use impshap::{
    explain, fit_random_forest, generate_dataset, load_csv, sweep, BoundMethod, Classifier, DivergenceKind,
    ExplanationConfig, ForestParams, Mode, RandomForestModel, SyntheticKind,
};

/// Interval-valued Shapley explanations for class-probability models.
#[derive(Parser)]
#[command(name = "impshap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write train.csv and test.csv for a synthetic dataset.
    Generate {
        #[arg(long, value_enum)]
        dataset: DatasetArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a random forest and save it as JSON.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value = "label")]
        label: String,
        #[command(flatten)]
        forest: ForestArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain one prediction and write a JSON report.
    Explain {
        #[command(flatten)]
        common: ExplainArgs,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// cautious-strategy parameter, reported next to 0, 0.5 and 1
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        /// report path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interval bounds per feature across a list of epsilons, as CSV.
    Sweep {
        #[command(flatten)]
        common: ExplainArgs,
        /// strictly increasing, comma separated
        #[arg(long, default_value = "0,0.05,0.1,0.15")]
        epsilons: String,
        /// CSV path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    Circle,
    #[value(name = "gauss_rings")]
    GaussRings,
    Clusters,
}

impl From<DatasetArg> for SyntheticKind {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Circle => SyntheticKind::Circle,
            DatasetArg::GaussRings => SyntheticKind::GaussRings,
            DatasetArg::Clusters => SyntheticKind::Clusters,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Distribution,
    Class,
    Certainty,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistanceArg {
    Ks,
    Kl,
    Chi2,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lp,
    Mc,
}

#[derive(Args)]
struct ForestArgs {
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    /// forest seed
    #[arg(long = "forest-seed", default_value_t = 0)]
    forest_seed: u64,
}

#[derive(Args)]
struct ExplainArgs {
    /// training CSV; the forest is refit on every run
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    train: Option<PathBuf>,
    /// previously saved forest
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    label: String,
    /// instance to explain, comma separated
    #[arg(long, allow_hyphen_values = true)]
    point: String,
    /// replacement values for removed features; training means by default
    #[arg(long, allow_hyphen_values = true)]
    baseline: Option<String>,
    #[arg(long, value_enum, default_value = "distribution")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "ks")]
    distance: DistanceArg,
    #[arg(long, value_enum, default_value = "lp")]
    method: MethodArg,
    /// Monte-Carlo samples per coalition term
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    forest: ForestArgs,
}

/// Exit 2 for bad input, 1 when a computation fails.
enum Failure {
    Usage(anyhow::Error),
    Compute(anyhow::Error),
}

trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn compute(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn compute(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Compute(e.into()))
    }
}

fn parse_list(text: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            let v: f64 = s.parse().with_context(|| format!("{what}: '{s}' is not a number"))?;
            if !v.is_finite() {
                bail!("{what}: '{s}' is not finite");
            }
            Ok(v)
        })
        .collect()
}

fn forest_params(f: &ForestArgs) -> ForestParams {
    ForestParams {
        tree_count: f.trees,
        max_depth: Some(f.max_depth),
        seed: f.forest_seed,
        ..Default::default()
    }
}

fn train_model(path: &Path, label: &str, forest: &ForestArgs) -> Result<RandomForestModel, Failure> {
    let data = load_csv(path, label)
        .with_context(|| format!("reading {}", path.display()))
        .usage()?;
    fit_random_forest(&data, forest_params(forest))
        .with_context(|| format!("training on {}", path.display()))
        .usage()
}

struct Prepared {
    model: RandomForestModel,
    point: Vec<f64>,
    baseline: Vec<f64>,
    config: ExplanationConfig,
}

fn prepare(a: &ExplainArgs) -> Result<Prepared, Failure> {
    let model = match (&a.train, &a.model) {
        (Some(train), _) => train_model(train, &a.label, &a.forest)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .usage()?;
            RandomForestModel::from_json(&text)
                .with_context(|| format!("loading model {}", path.display()))
                .usage()?
        }
        (None, None) => return Err(Failure::Usage(anyhow!("either --train or --model is required"))),
    };
    let m = model.n_features();
    let point = parse_list(&a.point, "--point").usage()?;
    if point.len() != m {
        return Err(Failure::Usage(anyhow!("--point has {} values, the model expects {m}", point.len())));
    }
    let baseline = match &a.baseline {
        Some(b) => parse_list(b, "--baseline").usage()?,
        None => model.feature_means().to_vec(),
    };
    if baseline.len() != m {
        return Err(Failure::Usage(anyhow!("--baseline has {} values, the model expects {m}", baseline.len())));
    }
    let config = ExplanationConfig {
        mode: match a.mode {
            ModeArg::Distribution => Mode::Distribution,
            ModeArg::Class => Mode::Class,
            ModeArg::Certainty => Mode::Certainty,
        },
        distance: match a.distance {
            DistanceArg::Ks => DivergenceKind::KolmogorovSmirnov,
            DistanceArg::Kl => DivergenceKind::KullbackLeibler,
            DistanceArg::Chi2 => DivergenceKind::ChiSquared,
        },
        epsilon: 0.0,
        bound_method: match a.method {
            MethodArg::Lp => BoundMethod::LpKs,
            MethodArg::Mc => BoundMethod::MonteCarlo,
        },
        mc_samples: a.samples,
        seed: a.seed,
    };
    config.validate().usage()?;
    Ok(Prepared {
        model,
        point,
        baseline,
        config,
    })
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())).compute(),
        None => std::io::stdout().write_all(bytes).context("writing to stdout").compute(),
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("IMPSHAP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(anyhow!("IMPSHAP_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().compute()
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Generate { dataset, seed, out } => {
            let split = generate_dataset(dataset.into(), seed).compute()?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display())).compute()?;
            for (name, data) in [("train.csv", &split.train), ("test.csv", &split.test)] {
                let path = out.join(name);
                data.save_csv(&path).with_context(|| format!("writing {}", path.display())).compute()?;
            }
            eprintln!(
                "wrote {} training and {} test rows to {}",
                split.train.len(),
                split.test.len(),
                out.display()
            );
        }
        Command::Train { train, label, forest, out } => {
            let model = train_model(&train, &label, &forest)?;
            write_output(Some(&out), model.to_json().compute()?.as_bytes())?;
            if let Some(acc) = model.oob_accuracy() {
                eprintln!("out-of-bag accuracy {acc:.4}");
            }
        }
        Command::Explain { common, epsilon, eta, out } => {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Failure::Usage(anyhow!("--eta must lie in [0, 1], got {eta}")));
            }
            let p = prepare(&common)?;
            let config = ExplanationConfig { epsilon, ..p.config };
            config.validate().usage()?;
            let report = explain(&p.model, &p.point, &p.baseline, p.model.feature_names(), &config, eta).compute()?;
            if let Some(w) = &report.warning {
                eprintln!("warning: {w}");
            }
            let mut json = report.to_json().compute()?;
            json.push('\n');
            write_output(out.as_deref(), json.as_bytes())?;
        }
        Command::Sweep { common, epsilons, out } => {
            let grid = parse_list(&epsilons, "--epsilons").usage()?;
            check_epsilon_grid(&grid).usage()?;
            let p = prepare(&common)?;
            let (rows, warnings) = sweep(&p.model, &p.point, &p.baseline, p.model.feature_names(), &p.config, &grid).compute()?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf).compute()?;
            write_output(out.as_deref(), &buf)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
