use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use eventfeat::baseline::NearestCentroid;
use eventfeat::container::{Basis, ModelContainer};
use eventfeat::dataset::{load_dataset, read_recording, Dataset};
use eventfeat::feature_file::FeatureSet;
use eventfeat::metrics::{self, MetricsRow};
use eventfeat::{benchmark, dump, pipeline, sweep};
use eventfeat::{Formulation, HarnessError, PipelineConfig, Result};
use eventfeat_core::events::SensorGeometry;

/// Event-camera feature learning: bases, encodings and classifiers.
#[derive(Parser)]
#[command(name = "eventfeat", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file (`key = value` lines); defaults apply without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config formulation (`inverse` or `direct`).
    #[arg(long, global = true)]
    formulation: Option<String>,
    /// Overrides the config dataset directory.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the seeded synthetic benchmark to `--out`.
    Synth,
    /// Summarize an event file or a model file.
    Inspect { path: PathBuf },
    /// Learn whitening and a basis; writes `model.evft`.
    LearnBasis,
    /// Encode the dataset with `model.evft`; writes `features.evff`.
    Encode,
    /// Fit the classifier on the training features; updates `model.evft`.
    TrainClassifier,
    /// Score the test features; writes `metrics.csv`, `per_class.csv` and `confusion.csv`.
    Evaluate,
    /// Learn, encode, train and evaluate in one go.
    Run,
    /// Nearest-centroid baseline on the accumulated grids; writes `baseline.csv`.
    Baseline,
    /// One-at-a-time parameter sweeps; writes `sweep.csv`.
    Sweep,
    /// Render basis vectors from `model.evft`; writes `basis.png`.
    DumpBasis,
}

impl Common {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(f) = &self.formulation {
            cfg.formulation = Formulation::parse(f)
                .ok_or_else(|| HarnessError::config("formulation", format!("expected inverse or direct, got {f:?}")))?;
        }
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        cfg.validate()
    }

    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        self.apply(&mut cfg)?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).map_err(|e| HarnessError::io(&self.out, e))?;
        Ok(&self.out)
    }

    fn model_path(&self) -> PathBuf {
        self.out.join("model.evft")
    }

    fn features_path(&self) -> PathBuf {
        self.out.join("features.evff")
    }
}

fn dataset(cfg: &PipelineConfig) -> Result<Dataset> {
    let root = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| HarnessError::config("dataset", "no dataset directory given"))?;
    let data = load_dataset(root, cfg)?;
    eprintln!(
        "dataset {}: {} classes, {} train, {} test",
        root.display(),
        data.classes.len(),
        data.train.len(),
        data.test.len()
    );
    Ok(data)
}

fn inspect(path: &Path, common: &Common) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    if bytes.starts_with(eventfeat::container::MAGIC) {
        let m = ModelContainer::from_bytes(&bytes)?;
        let kind = match m.basis {
            Basis::Inverse(_) => "inverse dictionary",
            Basis::Direct(_) => "direct transform",
        };
        println!("model: {kind}, K = {}, d = {}", m.basis.num_vectors(), m.basis.dim());
        println!("volume {}, intervals {}, delta_t {} us", m.config.volume, m.config.intervals, m.config.delta_t());
        println!("whitening epsilon {}", m.whitening.epsilon);
        match &m.svm {
            Some(s) => println!("classifier: {} classes, C = {}", s.classes.len(), s.reg_c),
            None => println!("classifier: none"),
        }
        return Ok(());
    }
    if bytes.starts_with(eventfeat::feature_file::MAGIC) {
        let f = FeatureSet::from_bytes(&bytes)?;
        let dim = f.train.first().map_or(0, |v| v.data.len());
        println!("features: {} classes, {} train, {} test, dimension {dim}", f.classes.len(), f.train.len(), f.test.len());
        return Ok(());
    }
    let geometry = match &common.config {
        Some(_) => common.config()?.raw_geometry(),
        None => SensorGeometry { width: 256, height: 256 },
    };
    let s = read_recording(path, geometry, 1)?;
    let ev = s.events();
    let on = ev.iter().filter(|e| e.polarity.sign() > 0).count();
    println!("events: {} ({on} on, {} off)", ev.len(), ev.len() - on);
    if let (Some(first), Some(last)) = (ev.first(), ev.last()) {
        let (mx, my) = ev.iter().fold((0, 0), |(a, b), e| (a.max(e.x), b.max(e.y)));
        println!("time: {} to {} us", first.t, last.t);
        println!("max coordinate: x {mx}, y {my}");
    }
    Ok(())
}

fn write_evaluation(common: &Common, cfg: &PipelineConfig, classes: &[String], eval: &pipeline::Evaluation, seconds: f64) -> Result<()> {
    let out = common.out_dir()?;
    let row = MetricsRow::new("evaluate", cfg, eval.accuracy, seconds);
    metrics::write_metrics(&out.join("metrics.csv"), &[row], cfg.timing)?;
    metrics::write_per_class(&out.join("per_class.csv"), classes, eval)?;
    metrics::write_confusion(&out.join("confusion.csv"), classes, eval)?;
    println!("accuracy {:.4}", eval.accuracy);
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Synth => {
            let seed = common.seed.unwrap_or(0);
            benchmark::make_synthetic_benchmark(seed, common.out_dir()?)?;
            println!("wrote synthetic benchmark (seed {seed}) to {}", common.out.display());
        }
        Command::Inspect { path } => inspect(path, common)?,
        Command::LearnBasis => {
            let cfg = common.config()?;
            let data = dataset(&cfg)?;
            let grids = pipeline::accumulate_all(&data.train, &cfg.accumulation());
            let learned = pipeline::learn_basis(&cfg, &grids)?;
            if let (Some(first), Some(last)) = (learned.trace.first(), learned.trace.last()) {
                eprintln!("objective {:.6e} -> {:.6e} over {} half-steps", first.before, last.after, learned.trace.len());
            }
            learned.model.save(&common.out_dir()?.join("model.evft"))?;
            println!("wrote {}", common.model_path().display());
        }
        Command::Encode => {
            let mut model = ModelContainer::load(&common.model_path())?;
            common.apply(&mut model.config)?;
            let data = dataset(&model.config)?;
            let acc = model.config.accumulation();
            let set = FeatureSet {
                classes: data.classes.clone(),
                train: pipeline::encode_grids(&model, &pipeline::accumulate_all(&data.train, &acc), &pipeline::labels(&data.train))?,
                test: pipeline::encode_grids(&model, &pipeline::accumulate_all(&data.test, &acc), &pipeline::labels(&data.test))?,
            };
            set.save(&common.features_path())?;
            println!("wrote {}", common.features_path().display());
        }
        Command::TrainClassifier => {
            let mut model = ModelContainer::load(&common.model_path())?;
            common.apply(&mut model.config)?;
            let set = FeatureSet::load(&common.features_path())?;
            let svm = pipeline::train_classifier(&model.config, &set.train)?;
            println!("selected C = {}", svm.reg_c);
            model.svm = Some(svm);
            model.save(&common.model_path())?;
        }
        Command::Evaluate => {
            let model = ModelContainer::load(&common.model_path())?;
            let set = FeatureSet::load(&common.features_path())?;
            let svm = model
                .svm
                .as_ref()
                .ok_or_else(|| HarnessError::Data("model has no classifier; run train-classifier first".into()))?;
            let start = Instant::now();
            let eval = pipeline::evaluate(svm, &set.test, set.classes.len())?;
            write_evaluation(common, &model.config, &set.classes, &eval, start.elapsed().as_secs_f64())?;
        }
        Command::Run => {
            let cfg = common.config()?;
            let data = dataset(&cfg)?;
            let out = pipeline::run(&cfg, &data)?;
            out.model.save(&common.out_dir()?.join("model.evft"))?;
            out.features.save(&common.features_path())?;
            write_evaluation(common, &cfg, &data.classes, &out.evaluation, out.seconds)?;
        }
        Command::Baseline => {
            let cfg = common.config()?;
            let data = dataset(&cfg)?;
            let start = Instant::now();
            let acc = cfg.accumulation();
            let nc = NearestCentroid::fit(
                &pipeline::accumulate_all(&data.train, &acc),
                &pipeline::labels(&data.train),
                data.classes.len(),
            )?;
            let eval = nc.evaluate(&pipeline::accumulate_all(&data.test, &acc), &pipeline::labels(&data.test));
            let mut row = MetricsRow::new("baseline", &cfg, eval.accuracy, start.elapsed().as_secs_f64());
            row.formulation = "nearest_centroid".into();
            row.basis_size = 0;
            metrics::write_metrics(&common.out_dir()?.join("baseline.csv"), &[row], cfg.timing)?;
            println!("baseline accuracy {:.4}", eval.accuracy);
        }
        Command::Sweep => {
            let cfg = common.config()?;
            let data = dataset(&cfg)?;
            let rows = sweep::run_sweep(&cfg, &data, |r| eprintln!("{}: accuracy {:.4}", r.setting, r.accuracy))?;
            metrics::write_metrics(&common.out_dir()?.join("sweep.csv"), &rows, cfg.timing)?;
            println!("wrote {} rows to {}", rows.len(), common.out.join("sweep.csv").display());
        }
        Command::DumpBasis => {
            let model = ModelContainer::load(&common.model_path())?;
            let path = common.out.join("basis.png");
            dump::write_png(&model.basis, model.config.volume, model.config.dump_count, &path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
