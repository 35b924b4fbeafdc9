use anotab::bundle;
use anotab::config::RunConfig;
use anotab::error::Error;
use anotab::eval::{self, LabeledScores};
use anotab::gan;
use anotab::inversion;
use anotab::io;
use anotab::pipeline;
use anotab::synth::{self, SynthSpec};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// GAN-based anomaly detection for tabular data.
#[derive(Parser, Debug)]
#[command(name = "anotab", version, about)]
struct Cli {
    /// Path to a run config file, or "demo" for the built-in synthetic demo
    #[arg(long, global = true)]
    config: Option<String>,

    /// Override the config's seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit per-column normalizers and report the encoded layout
    Preprocess,
    /// Train the GAN on normal rows and save the model bundle
    Train,
    /// Score the evaluation split with a saved model bundle
    Score {
        /// Model bundle path (defaults to <output.dir>/model.bin)
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compute ROC/AUC and thresholded metrics from a scores CSV
    Evaluate {
        /// Scores CSV (defaults to <output.dir>/scores.csv)
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Run the whole pipeline: preprocess, train, score, evaluate, report
    Run,
    /// Emit the bundled synthetic benchmark dataset as CSV
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        normals: usize,
        #[arg(long, default_value_t = 250)]
        anomalies: usize,
        #[arg(long, default_value_t = 4)]
        features: usize,
    },
    /// Print a text summary of a saved model bundle
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match cli.config.as_deref() {
        None | Some("demo") => demo_config()?,
        Some(path) => RunConfig::load(std::path::Path::new(path))?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Built-in demo: generates a small synthetic dataset under the output
/// directory and runs on it with desk-scale settings.
fn demo_config() -> Result<RunConfig, Error> {
    let text = "\
output.dir = anotab_out
preprocess.modes = 4
train.epochs = 60
train.batch_size = 64
train.latent_dim = 8
train.gen_hidden = 32
train.disc_hidden = 32
train.patience = 60
invert.steps = 150
invert.restarts = 2
eval.k = 5
seed = 7
";
    let mut cfg = RunConfig::parse(text)?;
    let data_path = cfg.output_dir.join("demo_data.csv");
    std::fs::create_dir_all(&cfg.output_dir)?;
    if !data_path.exists() {
        let ds = synth::generate(&SynthSpec {
            n_normal: 800,
            n_anomalous: 40,
            n_features: 3,
            seed: 7,
        })?;
        io::write_csv(&ds, &data_path)?;
    }
    cfg.schema.path = data_path;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Preprocess => {
            let cfg = load_config(&cli)?;
            let prepared = pipeline::prepare(&cfg)?;
            println!("features: {}", prepared.feature_names.join(", "));
            println!("encoded width: {}", prepared.layout.width());
            for (name, nz) in prepared.feature_names.iter().zip(&prepared.normalizers) {
                println!("  {name}: {} slots ({} modes)", nz.encoded_width(), nz.mode_count());
            }
            println!("training rows: {}", prepared.rows_trained);
            println!("evaluation rows: {}", prepared.test_encoded.len());
        }
        Command::Train => {
            let cfg = load_config(&cli)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let prepared = pipeline::prepare(&cfg)?;
            let (model, history) = gan::train_gan(
                &prepared.train_encoded,
                &prepared.layout,
                &pipeline::train_config(&cfg),
            )?;
            pipeline::write_loss_csv(&cfg.output_dir.join("loss.csv"), &history)?;
            let bundle = bundle::ModelBundle {
                config_text: cfg.source_text.clone(),
                feature_columns: prepared.feature_names.clone(),
                normalizers: prepared.normalizers.clone(),
                model,
                history: history.clone(),
            };
            let path = cfg.output_dir.join("model.bin");
            bundle::save_model(&bundle, &path)?;
            println!(
                "trained {} epochs (best {}), model saved to {}",
                history.stop_epoch,
                history.best_epoch,
                path.display()
            );
        }
        Command::Score { model } => {
            let cfg = load_config(&cli)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let model_path = model
                .clone()
                .unwrap_or_else(|| cfg.output_dir.join("model.bin"));
            let loaded = bundle::load_model(&model_path)?;
            let prepared = pipeline::prepare(&cfg)?;
            let reports = inversion::score_batch(
                &prepared.test_encoded,
                &loaded.model,
                Some(&loaded.normalizers),
                &pipeline::inversion_config(&cfg),
                None,
            )?;
            let out = cfg.output_dir.join("scores.csv");
            pipeline::write_scores_csv(
                &out,
                &reports,
                &prepared.test_labels,
                &prepared.feature_names,
            )?;
            println!("scored {} rows -> {}", reports.len(), out.display());
        }
        Command::Evaluate { scores } => {
            let cfg = load_config(&cli)?;
            let path = scores
                .clone()
                .unwrap_or_else(|| cfg.output_dir.join("scores.csv"));
            let ds = io::load_csv(&path)?;
            let si = ds.column_index("score")?;
            let li = ds.column_index("label")?;
            let labeled = LabeledScores::new(
                ds.rows().iter().map(|r| r[si]).collect(),
                ds.rows().iter().map(|r| r[li] != 0.0).collect(),
            )?;
            let curve = eval::roc_curve(&labeled)?;
            let metrics = eval::threshold_metrics(&labeled, curve.optimal_threshold);
            pipeline::write_roc_csv(&cfg.output_dir.join("roc.csv"), &curve)?;
            println!("auc = {}", curve.auc);
            println!("threshold = {}", curve.optimal_threshold);
            println!(
                "accuracy = {} precision = {} recall = {} f1 = {}",
                metrics.accuracy, metrics.precision, metrics.recall, metrics.f1
            );
        }
        Command::Run => {
            let cfg = load_config(&cli)?;
            let report = pipeline::run_pipeline(&cfg)?;
            println!("auc = {}", report.auc);
            println!("knn_auc = {}", report.knn_auc);
            println!("threshold = {}", report.threshold);
            println!("accuracy = {}", report.metrics.accuracy);
            for p in &report.artifacts {
                println!("wrote {}", p.display());
            }
        }
        Command::SynthData {
            out,
            normals,
            anomalies,
            features,
        } => {
            let cfg = load_config(&cli)?;
            let ds = synth::generate(&SynthSpec {
                n_normal: *normals,
                n_anomalous: *anomalies,
                n_features: *features,
                seed: cfg.seed,
            })?;
            io::write_csv(&ds, out)?;
            println!("wrote {} rows to {}", ds.n_rows(), out.display());
        }
        Command::Inspect { model } => {
            let b = bundle::load_model(model)?;
            println!("columns: {}", b.feature_columns.join(", "));
            println!("latent dim: {}", b.model.latent_dim);
            println!("encoded width: {}", b.model.layout.width());
            println!(
                "generator layers: {}",
                b.model
                    .generator
                    .weights
                    .iter()
                    .map(|w| format!("{}x{}", w.rows(), w.cols()))
                    .collect::<Vec<_>>()
                    .join(" -> ")
            );
            println!(
                "trained epochs: {} (best {})",
                b.history.stop_epoch, b.history.best_epoch
            );
            if !b.config_text.is_empty() {
                println!("--- config ---\n{}", b.config_text.trim_end());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
