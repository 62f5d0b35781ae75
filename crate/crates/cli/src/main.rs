//! `gograd`: run the toy posteriors, the Bernoulli VAE, the unbiasedness
//! suite or a stochastic graph from a config, writing CSV and JSON under
//! `--out-dir`.

mod config;
mod graph_run;
mod registry;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gograd::experiments::{
    run_bernoulli_vae, run_gamma_toy, run_nb_toy, run_unbiasedness_suite, write_trace_csv,
    ExperimentConfig, ExperimentKind, ToyRun, TraceRecord,
};
use gograd::statgraph::save_weights;
use serde::Serialize;
use serde_json::json;

use config::Failure;

#[derive(Parser)]
#[command(name = "gograd", version, about = "GO gradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gamma variational family fitted to a gamma posterior.
    ToyGamma(RunArgs),
    /// Negative binomial variational family fitted to an NB posterior.
    ToyNb(RunArgs),
    /// Bernoulli-latent VAE checked against exact enumeration.
    Vae(RunArgs),
    /// Estimator unbiasedness grid; writes report.json.
    Suite(RunArgs),
    /// Gradient steps on the weights of a stochastic graph.
    GraphRun(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set optimizer.learning_rate=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, env = "GO_GRAD_SEED")]
    seed: Option<u64>,
    /// Worker threads for the parallel parts of a run.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.line());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    let (kind, args) = match cmd {
        Command::ToyGamma(a) => (Some(ExperimentKind::GammaToy), a),
        Command::ToyNb(a) => (Some(ExperimentKind::NbToy), a),
        Command::Vae(a) => (Some(ExperimentKind::BernoulliVae), a),
        Command::Suite(a) => (Some(ExperimentKind::UnbiasednessSuite), a),
        Command::GraphRun(a) => (None, a),
    };
    if args.threads == 0 {
        return Err(Failure::Invalid("threads must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build_global()
        .map_err(|e| Failure::Invalid(format!("thread pool: {e}")))?;
    let Some(kind) = kind else {
        return graph_run(&args);
    };
    let defaults = serde_json::to_value(ExperimentConfig::default_for(kind)).expect("serializable");
    let tree = config::resolve(defaults, args.config.as_deref(), &args.overrides, args.seed)?;
    let mut cfg: ExperimentConfig =
        serde_json::from_value(tree).map_err(|e| Failure::Invalid(format!("config: {e}")))?;
    cfg.fill_defaults();
    cfg.validate()?;
    let out = prepare_out_dir(&args.out_dir)?;
    write_json(&out.join("config.resolved.json"), &cfg)?;
    match kind {
        ExperimentKind::GammaToy => toys(&out, &cfg, run_gamma_toy(&cfg)?),
        ExperimentKind::NbToy => toys(&out, &cfg, run_nb_toy(&cfg)?),
        ExperimentKind::BernoulliVae => {
            let run = run_bernoulli_vae(&cfg)?;
            write_trace(&out.join("trace.csv"), &run.trace)?;
            let pass = run.checkpoints.iter().all(|c| c.pass);
            let elbo = run.checkpoints.last().map(|c| c.exact_elbo);
            write_json(
                &out.join("report.json"),
                &json!({
                    "experiment": kind,
                    "checkpoints_pass": pass,
                    "last_checkpoint_exact_elbo": elbo,
                    "checkpoints": run.checkpoints,
                }),
            )?;
            println!(
                "vae: {} iterations, {} checkpoints, all within tolerance: {pass}",
                cfg.iterations,
                run.checkpoints.len()
            );
            Ok(())
        }
        ExperimentKind::UnbiasednessSuite => {
            let rows = run_unbiasedness_suite(&cfg)?;
            write_json(&out.join("report.json"), &rows)?;
            let passed = rows.iter().filter(|r| r.pass).count();
            println!("suite: {passed}/{} rows pass", rows.len());
            Ok(())
        }
    }
}

fn toys(out: &Path, cfg: &ExperimentConfig, runs: Vec<ToyRun>) -> Result<(), Failure> {
    let mut report = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        if i == 0 {
            write_trace(&out.join("trace.csv"), &r.trace)?;
        }
        write_trace(&out.join(format!("trace_{}.csv", r.estimator.tag())), &r.trace)?;
        let medians: Vec<f64> = (0..r.final_params.len()).map(|k| r.median_variance(k)).collect();
        println!(
            "{}: final params {:?}, KL {:.3e}, median gradient variance {:?}",
            r.estimator, r.final_params, r.final_kl, medians
        );
        report.push(json!({
            "estimator": r.estimator,
            "final_params": r.final_params,
            "final_kl": r.final_kl,
            "median_grad_variance": medians,
        }));
    }
    write_json(&out.join("report.json"), &json!({ "experiment": cfg.experiment, "runs": report }))
}

fn graph_run(args: &RunArgs) -> Result<(), Failure> {
    let tree = config::resolve(graph_run::defaults(), args.config.as_deref(), &args.overrides, args.seed)?;
    let cfg: graph_run::GraphRunConfig =
        serde_json::from_value(tree).map_err(|e| Failure::Invalid(format!("config: {e}")))?;
    let base = args
        .config
        .as_deref()
        .and_then(Path::parent)
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let (cfg, graph) = cfg.prepare(&base)?;
    let out = prepare_out_dir(&args.out_dir)?;
    write_json(&out.join("config.resolved.json"), &cfg)?;
    let run = graph_run::run(&cfg, graph)?;
    write_trace(&out.join("trace.csv"), &run.trace)?;
    save_weights(&run.graph, &out.join("weights.bin"), &out.join("weights.json"))?;
    write_json(
        &out.join("report.json"),
        &json!({
            "integrand": cfg.integrand,
            "objective": cfg.objective,
            "final_objective": run.final_objective,
            "final_gradient": run.final_gradient,
            "weights": run.graph.weights(),
        }),
    )?;
    println!(
        "graph-run: {} iterations, objective estimate {:.6}",
        cfg.iterations, run.final_objective
    );
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Invalid(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trace_csv(&mut w, records)?;
    w.flush()?;
    Ok(())
}

