use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mrfcox::commands::{
    cmd_evaluate, cmd_fit, cmd_perturb_graph, cmd_simulate, cmd_summarize, EvaluateArgs, FitArgs,
    PerturbArgs, PerturbMode, SimulateArgs, SummarizeArgs,
};
use mrfcox::study::{cmd_study, StudyArgs};
use mrfcox::{Error, Profile, Result, RunConfig};
use serde_json::{json, Value};

/// Bayesian Cox regression with graph-structured spike-and-slab selection.
#[derive(Debug, Parser)]
#[command(name = "mrfcox", version)]
struct Cli {
    /// TOML config file, or a run manifest (manifest.json) to rerun.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Iteration budget: desk (short) or paper (full length).
    #[arg(long, global = true)]
    profile: Option<Profile>,
    /// Root seed for simulation, graph noise and MCMC.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate training replicates, a test set, scenario graphs and the truth.
    Simulate {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        n_datasets: Option<usize>,
    },
    /// Run the sampler on one dataset and graph.
    Fit {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        mcmc: McmcFlags,
    },
    /// Recompute the MPM and diagnostics from a fit's sample files.
    Summarize {
        #[arg(long)]
        fit: Option<PathBuf>,
        /// Defaults to `<fit>/summary`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brier-score curve and integrated Brier score of a fit on test data.
    Evaluate {
        /// Fit directory or its fit.json.
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// truth.json from `simulate`, for selection metrics.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        t_star: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Remove or add edges of a graph file.
    PerturbGraph {
        #[arg(long)]
        graph: Option<PathBuf>,
        /// uniform | block | block-plus | noise
        #[arg(long)]
        mode: Option<PerturbMode>,
        /// Keep every k-th edge (uniform).
        #[arg(long)]
        k: Option<usize>,
        /// 1-based vertices, as a range `1-5` or a list `1,2,3` (block modes).
        #[arg(long)]
        block: Option<String>,
        /// False edges to add relative to the current edge count (noise).
        #[arg(long)]
        fraction: Option<f64>,
        /// Output edge-list file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit every scenario graph on every training replicate and tabulate.
    Study {
        /// Directory written by `simulate`.
        #[arg(long)]
        sim: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated scenario names.
        #[arg(long, value_delimiter = ',')]
        scenarios: Option<Vec<String>>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Keep finished cells from an earlier run.
        #[arg(long)]
        resume: bool,
        #[command(flatten)]
        mcmc: McmcFlags,
    },
}

#[derive(Debug, Args)]
struct McmcFlags {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
}

impl McmcFlags {
    fn apply(&self, config: &mut RunConfig) {
        let m = &mut config.mcmc;
        m.iterations = self.iterations.unwrap_or(m.iterations);
        m.warmup = self.warmup.unwrap_or(m.warmup);
        m.thin = self.thin.unwrap_or(m.thin);
        m.chains = self.chains.unwrap_or(m.chains);
    }
}

/// Arguments recorded in a manifest passed via `--config`, used for any
/// path the command line leaves out.
struct Recorded(Option<Value>);

impl Recorded {
    fn path(&self, explicit: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        explicit
            .or_else(|| self.get(key))
            .ok_or_else(|| Error::InvalidArgument(format!("--{} is required", key.replace('_', "-"))))
    }

    fn get<T: serde::de::DeserializeOwned>(&self, key: &str) -> Option<T> {
        let v = self.0.as_ref()?.get(key)?;
        serde_json::from_value(v.clone()).ok()
    }
}

fn parse_block(spec: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("cannot parse block `{spec}`"));
    if let Some((a, b)) = spec.split_once('-') {
        let (a, b): (usize, usize) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn load_config(cli: &Cli, command: &str) -> Result<(RunConfig, Recorded)> {
    let (mut config, recorded) = match &cli.config {
        Some(path) => {
            let config = RunConfig::load(path, cli.profile)?;
            let mut recorded = None;
            if path.extension().is_some_and(|e| e == "json") {
                let manifest: Value = serde_json::from_str(
                    &std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
                )?;
                if manifest.get("command").and_then(Value::as_str) == Some(command) {
                    recorded = manifest.get("args").cloned();
                }
            }
            (config, Recorded(recorded))
        }
        None => (RunConfig::from_layers(cli.profile, None)?, Recorded(None)),
    };
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
        config.mcmc.seed = seed;
    }
    Ok((config, recorded))
}

fn run(cli: Cli) -> Result<Value> {
    let name = match &cli.command {
        Command::Simulate { .. } => "simulate",
        Command::Fit { .. } => "fit",
        Command::Summarize { .. } => "summarize",
        Command::Evaluate { .. } => "evaluate",
        Command::PerturbGraph { .. } => "perturb-graph",
        Command::Study { .. } => "study",
    };
    let (mut config, rec) = load_config(&cli, name)?;
    match cli.command {
        Command::Simulate { out, n_datasets } => {
            if let Some(n) = n_datasets {
                config.simulation.n_datasets = n;
            }
            config.validate()?;
            let args = SimulateArgs { out: rec.path(out, "out")? };
            cmd_simulate(&args, &config)?;
            Ok(json!({ "out": args.out, "train_sets": config.simulation.n_datasets }))
        }
        Command::Fit { data, graph, out, mcmc } => {
            mcmc.apply(&mut config);
            config.validate()?;
            let args = FitArgs {
                data: rec.path(data, "data")?,
                graph: rec.path(graph, "graph")?,
                out: rec.path(out, "out")?,
            };
            let fit = cmd_fit(&args, &config)?;
            Ok(json!({ "out": args.out, "model_size": fit.mpm.model_size }))
        }
        Command::Summarize { fit, out } => {
            let fit = rec.path(fit, "fit")?;
            let out = out.or_else(|| rec.get("out")).unwrap_or_else(|| fit.join("summary"));
            let args = SummarizeArgs { fit, out };
            let m = cmd_summarize(&args, &config)?;
            Ok(json!({ "out": args.out, "model_size": m.model_size }))
        }
        Command::Evaluate { fit, test, truth, t_star, out } => {
            if t_star.is_some() {
                config.evaluation.t_star = t_star;
            }
            config.validate()?;
            let args = EvaluateArgs {
                fit: rec.path(fit, "fit")?,
                test: rec.path(test, "test")?,
                truth: truth.or_else(|| rec.get("truth")),
                out: rec.path(out, "out")?,
            };
            let m = cmd_evaluate(&args, &config)?;
            Ok(json!({ "out": args.out, "ibs": m.ibs, "km_ibs": m.km_ibs, "t_star": m.t_star }))
        }
        Command::PerturbGraph { graph, mode, k, block, fraction, out } => {
            let block = match block {
                Some(b) => Some(parse_block(&b)?),
                None => rec.get("block"),
            };
            let args = PerturbArgs {
                graph: rec.path(graph, "graph")?,
                mode: mode
                    .or_else(|| rec.get("mode"))
                    .ok_or_else(|| Error::InvalidArgument("--mode is required".into()))?,
                k: k.or_else(|| rec.get("k")),
                block,
                fraction: fraction.or_else(|| rec.get("fraction")),
                out: rec.path(out, "out")?,
            };
            let g = cmd_perturb_graph(&args, &config)?;
            Ok(json!({ "out": args.out, "edges": g.edge_count() }))
        }
        Command::Study { sim, out, scenarios, replicates, workers, resume, mcmc } => {
            mcmc.apply(&mut config);
            if let Some(s) = scenarios {
                config.study.scenarios = s;
            }
            if replicates.is_some() {
                config.study.replicates = replicates;
            }
            if let Some(w) = workers {
                config.study.workers = w;
            }
            config.validate()?;
            let args = StudyArgs {
                sim: rec.path(sim, "sim")?,
                out: rec.path(out, "out")?,
                resume,
            };
            let report = cmd_study(&args, &config)?;
            let failures: usize = report.rows.iter().map(|r| r.failures).sum();
            Ok(json!({ "out": args.out, "cells": report.cells.len(), "failures": failures }))
        }
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let doc = json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{doc}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string(), 2),
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string(), 1),
    }
}
