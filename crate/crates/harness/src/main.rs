use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gigp_harness::config::{ExperimentConfig, Task};
use gigp_harness::data::{self, synth, Split};
use gigp_harness::invariance::check_invariance;
use gigp_harness::suites::{expressivity_suite, grad_suite};
use gigp_harness::train::{self, evaluate, load_checkpoint, metric_name, prepare_all};

#[derive(Parser)]
#[command(name = "gigp", version, about = "Train and check orbit-aware invariant point-cloud models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write metrics and the best checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// IDX images, synthetic JSONL or XYZ, matching the checkpoint's task.
        #[arg(long)]
        data: PathBuf,
        /// IDX labels for digit images.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Measure output changes under random rotations of the test split.
    CheckInvariance {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        n_transforms: usize,
        #[arg(long, default_value_t = 100)]
        n_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare reverse-mode gradients against central differences.
    GradCheck {
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Run the exact orbit-encoding check on every small finite domain.
    CheckExpressivity {
        #[arg(long, default_value_t = 6)]
        max_elems: usize,
        #[arg(long, default_value_t = 1)]
        random_per_domain: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic shell-regression dataset as JSON lines.
    GenSynth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        n_samples: usize,
        #[arg(long, default_value_t = 16)]
        n_points: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let metric = metric_name(cfg.task);
            println!("{:>5}  {:>12}  {:>12}", "epoch", "train_loss", format!("val {metric}"));
            let outcome = train::train(&cfg, Some(&out), |r| {
                println!("{:>5}  {:>12.6}  {:>12.6}", r.epoch, r.train_loss, r.eval_metric);
            })?;
            let s = &outcome.summary;
            println!(
                "best epoch {} (val {metric} {:.6}); test {metric} {:.6}; {} parameters; outputs in {}",
                s.best_epoch,
                s.best_eval_metric,
                s.test_metric,
                s.param_count,
                out.display()
            );
            Ok(true)
        }
        Command::Eval { checkpoint, data, labels } => {
            let model = load_checkpoint(&checkpoint)?;
            let mut cfg = model.config.clone();
            match cfg.task {
                Task::RotDigits => {
                    let labels = match labels {
                        Some(l) => l,
                        None => default_labels(&data)?,
                    };
                    cfg.test_images = Some(data);
                    cfg.test_labels = Some(labels);
                }
                _ => cfg.test_data = Some(data),
            }
            cfg.n_test = usize::MAX;
            let examples = data::load_split(&cfg, Split::Test)?;
            let metric = evaluate(&model, &prepare_all(&model, &examples)?)?;
            println!("samples={}\n{}={metric:.6}", examples.len(), metric_name(cfg.task).replace(' ', "_"));
            Ok(true)
        }
        Command::CheckInvariance { checkpoint, n_transforms, n_samples, seed } => {
            let mut model = load_checkpoint(&checkpoint)?;
            model.config.mc_fraction = 1.0;
            // rebuild layers at full sampling with the trained parameters
            let bytes = model.to_bytes();
            let model = gigp_harness::Model::load(&model.config, &mut &bytes[..])?;
            let mut cfg = model.config.clone();
            cfg.n_test = n_samples;
            let clouds: Vec<_> = data::load_split(&cfg, Split::Test)?.into_iter().map(|e| e.cloud).collect();
            let report = check_invariance(|c| model.predict(c, 0), &clouds, cfg.group, n_transforms, seed)?;
            println!(
                "samples={}\ntransforms={}\nmax_deviation={:.3e}\nfailures={}\npassed={}",
                report.samples,
                report.transforms,
                report.max_deviation,
                report.failures.len(),
                report.passed()
            );
            Ok(report.passed())
        }
        Command::GradCheck { tol } => {
            let mut ok = true;
            for (name, r) in grad_suite(tol)? {
                println!("{:<24} max_rel_err={:.3e} {}", name, r.max_rel_err(), if r.passed() { "ok" } else { "FAIL" });
                for f in r.failures() {
                    println!("    {} [{}]: analytic {:.9e} numeric {:.9e}", f.name, f.worst_index, f.analytic, f.numeric);
                }
                ok &= r.passed();
            }
            Ok(ok)
        }
        Command::CheckExpressivity { max_elems, random_per_domain, seed } => {
            if max_elems > 8 {
                bail!("max_elems above 8 enumerates more than 3^8 assignments per domain");
            }
            let s = expressivity_suite(max_elems, random_per_domain, seed)?;
            println!(
                "Checked {} domains and {} invariant functions ({} random); largest domain has {} classes.",
                s.domains, s.functions, s.random_functions, s.max_classes
            );
            for f in &s.failures {
                println!("failure: {f}");
            }
            println!(
                "passed={}\ndomains={}\nfunctions={}\nrandom_functions={}\nmax_classes={}\nmax_code_ln={:.6}\nfailures={}",
                s.passed(),
                s.domains,
                s.functions,
                s.random_functions,
                s.max_classes,
                s.max_code_ln,
                s.failures.len()
            );
            Ok(s.passed())
        }
        Command::GenSynth { out, n_samples, n_points, dim, seed } => {
            if n_samples == 0 || n_points == 0 || dim == 0 {
                bail!("counts must be at least 1");
            }
            let samples = synth::gen_synth_invariant(n_samples, n_points, dim, seed);
            if let Some(dir) = out.parent() {
                std::fs::create_dir_all(dir)?;
            }
            let mut f = std::io::BufWriter::new(std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            synth::write_jsonl(&mut f, &samples)?;
            println!("wrote {n_samples} samples to {}", out.display());
            Ok(true)
        }
    }
}

/// `...-images-idx3-ubyte[.gz]` → `...-labels-idx1-ubyte[.gz]`
fn default_labels(images: &std::path::Path) -> Result<PathBuf> {
    let name = images.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if !name.contains("images-idx3") {
        bail!("cannot infer a labels file for {}; pass --labels", images.display());
    }
    Ok(images.with_file_name(name.replace("images-idx3", "labels-idx1")))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
