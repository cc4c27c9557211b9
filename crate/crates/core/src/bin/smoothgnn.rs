use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use smoothgnn::analysis::{
    appnp_distance_curves, smoothing_distance_curves, AppnpOptions, DistanceCurves,
};
use smoothgnn::data::{
    generate_synthetic, read_dataset, read_scores, write_dataset, write_scores, DatasetBundle,
    SyntheticConfig,
};
use smoothgnn::eval::evaluate;
use smoothgnn::graph::ConvergedProjector;
use smoothgnn::model::{smoothing_coefficients, ModelConfig, SizeClass, Variant};
use smoothgnn::trainer::{load_checkpoint, save_checkpoint, score, train};
use smoothgnn::verify::{run_verify, VerifyOptions};
use smoothgnn::{Error, Result};

const OUT_ENV: &str = "SMOOTHGNN_OUT_DIR";
const DEFAULT_OUT: &str = "smoothgnn-out";

#[derive(Parser)]
#[command(
    name = "smoothgnn",
    version,
    about = "Unsupervised node anomaly detection from smoothing patterns"
)]
struct Cli {
    /// Print failures as a JSON object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic anomaly-injected dataset directory.
    Generate(GenerateArgs),
    /// Train a model; writes model.ckpt, scores.tsv and report.json.
    Train(TrainArgs),
    /// Score a dataset with a saved checkpoint.
    Score(ScoreArgs),
    /// AUC and precision@k of a score file against dataset labels.
    Eval(EvalArgs),
    /// Distance-to-convergence curves and smoothing-coefficient quotients as CSV.
    Analyze(AnalyzeArgs),
    /// Run the oracle suite on random small graphs.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    nodes: usize,
    #[arg(long, default_value_t = 6.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 16)]
    features: usize,
    #[arg(long, default_value_t = 0.05)]
    anomaly_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ModelFlags {
    /// Default hyperparameters; inferred from the dataset when absent.
    #[arg(long)]
    size_class: Option<SizeClass>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Threshold below which converged-projector entries are zeroed.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    init_std: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Disable the smoothing coefficients.
    #[arg(long)]
    no_sc: bool,
    /// Use APPNP deviations with this teleport probability.
    #[arg(long, value_name = "ALPHA")]
    appnp: Option<f64>,
    #[arg(long, requires = "appnp")]
    appnp_tol: Option<f64>,
    #[arg(long, requires = "appnp")]
    appnp_max_iter: Option<usize>,
}

impl ModelFlags {
    fn resolve(&self, bundle: &DatasetBundle) -> Result<ModelConfig> {
        let mut c = self
            .size_class
            .unwrap_or_else(|| bundle.size_class())
            .defaults();
        c.hops = self.hops.unwrap_or(c.hops);
        c.hidden = self.hidden.unwrap_or(c.hidden);
        c.lr = self.lr.unwrap_or(c.lr);
        c.eps = self.eps.unwrap_or(c.eps);
        c.init_std = self.init_std.unwrap_or(c.init_std);
        c.epochs = self.epochs.unwrap_or(c.epochs);
        c.sc_enabled = !self.no_sc;
        if let Some(alpha) = self.appnp {
            let mut opts = AppnpOptions::new(alpha);
            opts.tol = self.appnp_tol.unwrap_or(opts.tol);
            opts.max_iter = self.appnp_max_iter.unwrap_or(opts.max_iter);
            c.variant = Variant::Appnp {
                alpha,
                tol: opts.tol,
                max_iter: opts.max_iter,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Score file to write; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    /// Precision cutoff; defaults to the number of anomalies.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, env = OUT_ENV, default_value = DEFAULT_OUT)]
    out: PathBuf,
    /// Largest hop; defaults to the size-class hop count.
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Emit APPNP deviation curves with this teleport probability.
    #[arg(long, value_name = "ALPHA")]
    appnp: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = VerifyOptions::default().trials)]
    trials: usize,
    #[arg(long, default_value_t = VerifyOptions::default().max_n)]
    max_n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the full report as JSON to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let cfg = SyntheticConfig::new(
        args.nodes,
        args.avg_degree,
        args.features,
        args.anomaly_ratio,
        args.seed,
    );
    let bundle = generate_synthetic(&cfg)?;
    write_dataset(&args.out, &bundle)?;
    let anomalies = bundle
        .labels
        .as_ref()
        .map_or(0, |l| l.iter().filter(|&&v| v == 1).count());
    println!(
        "wrote {} ({} nodes, {} edges, {} features, {anomalies} anomalies)",
        args.out.display(),
        bundle.n,
        bundle.edges.len(),
        bundle.num_features()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let bundle = read_dataset(&args.data)?;
    let config = args.model.resolve(&bundle)?;
    let g = bundle.graph()?;
    let (params, report) = train(&g, &bundle, &config, args.seed)?;
    let metrics = match &bundle.labels {
        Some(labels) => Some(evaluate(labels, &report.scores, None)?),
        None => None,
    };
    create_dir(&args.out)?;
    save_checkpoint(&params, &config, args.out.join("model.ckpt"))?;
    write_scores(
        args.out.join("scores.tsv"),
        &report.scores,
        bundle.labels.as_deref(),
    )?;
    let doc = json!({ "dataset": bundle.meta.name, "training": report, "metrics": metrics });
    write_file(
        &args.out.join("report.json"),
        &serde_json::to_string_pretty(&doc)?,
    )?;

    println!(
        "trained {} epochs in {:.1}s; loss {:.4} -> {:.4}",
        config.epochs,
        report.wall_time_secs,
        report.initial_loss().total,
        report.final_loss.total
    );
    if let Some(m) = metrics {
        println!(
            "AUC {:.4} (flipped {:.4}), precision@{} {:.4}",
            m.auc, m.auc_flipped, m.k, m.precision_at_k
        );
    }
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let bundle = read_dataset(&args.data)?;
    let (params, config) = load_checkpoint(&args.checkpoint)?;
    let scores = score(&bundle.graph()?, &params, bundle.features.view(), &config)?;
    let scores = scores.to_vec();
    match &args.out {
        Some(path) => write_scores(path, &scores, bundle.labels.as_deref()),
        None => {
            let mut out = std::io::stdout().lock();
            for (i, s) in scores.iter().enumerate() {
                writeln!(out, "{i}\t{s:.16e}").map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })?;
            }
            Ok(())
        }
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let bundle = read_dataset(&args.data)?;
    let labels = bundle
        .labels
        .as_ref()
        .ok_or_else(|| Error::Dataset(format!("{} has no labels", args.data.display())))?;
    let scores = read_scores(&args.scores)?;
    let metrics = evaluate(labels, &scores, args.k)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn curves_csv(curves: &DistanceCurves) -> String {
    let mut csv = String::new();
    match &curves.class_means {
        Some(m) => {
            csv.push_str("hop,anomalous_mean,normal_mean\n");
            for t in 0..m.anomalous.len() {
                csv.push_str(&format!("{t},{:e},{:e}\n", m.anomalous[t], m.normal[t]));
            }
        }
        None => {
            csv.push_str("hop,mean\n");
            for (t, v) in curves.mean.iter().enumerate() {
                csv.push_str(&format!("{t},{v:e}\n"));
            }
        }
    }
    csv
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let bundle = read_dataset(&args.data)?;
    let g = bundle.graph()?;
    let defaults = bundle.size_class().defaults();
    let hops = args.hops.unwrap_or(defaults.hops);
    let x = bundle.features.view();
    let labels = bundle.labels.as_deref();
    let curves = match args.appnp {
        Some(alpha) => appnp_distance_curves(&g, x, &AppnpOptions::new(alpha), hops, labels)?,
        None => {
            let proj = ConvergedProjector::new(&g, args.eps.unwrap_or(defaults.eps));
            smoothing_distance_curves(&g, &proj, x, hops, labels)?
        }
    };
    let sc = smoothing_coefficients(&g, x)?;
    let mut sc_csv = String::from("column,quotient,alpha\n");
    for (j, (q, a)) in sc.quotients.iter().zip(&sc.alpha).enumerate() {
        sc_csv.push_str(&format!("{j},{q:e},{a:e}\n"));
    }

    create_dir(&args.out)?;
    let curve_path = args.out.join("distance_curves.csv");
    write_file(&curve_path, &curves_csv(&curves))?;
    write_file(&args.out.join("sc_quotients.csv"), &sc_csv)?;
    match &curves.class_means {
        Some(m) => println!("area gap (anomalous - normal) {:.4}", m.area_gap()),
        None => println!("unlabeled data: wrote the mean curve"),
    }
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let opts = VerifyOptions {
        trials: args.trials,
        max_n: args.max_n,
        seed: args.seed,
    };
    let report = run_verify(&opts)?;
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!(
            "{status}  {:<32} max error {:.3e} (tol {:.0e}, {} trials)  {}",
            c.name, c.max_error, c.tolerance, c.trials, c.detail
        );
    }
    println!("{:.2}s", report.elapsed_secs);
    if let Some(path) = &args.report {
        write_file(path, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report.all_passed())
}

fn fail(e: &Error, json_errors: bool) -> ExitCode {
    let code = e.exit_code();
    if json_errors {
        let doc = json!({ "error": e.to_string(), "exit_code": code });
        eprintln!("{doc}");
    } else {
        eprintln!("error: {e}");
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Verify(a) => match cmd_verify(a) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("error: oracle checks failed");
                return ExitCode::from(3);
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e, cli.json_errors),
    }
}
