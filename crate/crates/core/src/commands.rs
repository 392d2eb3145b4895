//! The simulate / fit / summarize / evaluate / perturb-graph pipeline stages.
//!
//! Each command writes its outputs plus a `manifest.json` that echoes the
//! effective configuration and arguments. Wall-clock timings go to a separate
//! `timing.json` so manifests stay byte-identical across reruns.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::data::{SurvivalDataset, TimePartition};
use crate::error::{Error, Result};
use crate::evaluation::{
    brier_curve, default_horizon, integrated_brier_score, kaplan_meier, km_censoring,
    predict_survival, BrierPoint, KaplanMeierPredictor, StepFunction, SurvivalPredictor,
};
use crate::graph::PriorGraph;
use crate::io::{
    chain_dir, create_dir, list_chain_dirs, read_json, read_samples, write_atomic, write_json,
    write_samples, Manifest, MANIFEST_FILE,
};
use crate::sampler::{run_prepared_chain, McmcConfig, PosteriorSamples, PreparedModel};
use crate::simulate::{draw_dataset, scenario_graphs, TEST_REPLICATE};
use crate::summary::{effective_sample_size, mpm, posterior_mean_hazard, selection_metrics, MpmFit, SelectionMetrics};

pub const FIT_FILE: &str = "fit.json";
pub const TRUTH_FILE: &str = "truth.json";
pub const TEST_FILE: &str = "test.csv";
pub const GRAPH_DIR: &str = "graphs";

/// Acceptance-rate band outside which a chain is flagged in diagnostics.
pub const ACCEPTANCE_BAND: (f64, f64) = (0.1, 0.9);

fn write_timing(dir: &Path, started: Instant, extra: serde_json::Value) -> Result<()> {
    let mut doc = json!({ "seconds": started.elapsed().as_secs_f64() });
    if let (Some(d), serde_json::Value::Object(e)) = (doc.as_object_mut(), extra) {
        d.extend(e);
    }
    write_json(&dir.join("timing.json"), &doc)
}

pub fn train_file_name(replicate: usize, total: usize) -> String {
    let width = total.to_string().len().max(2);
    format!("train_{:0width$}.csv", replicate + 1)
}

/// Training set paths under a simulation directory, in replicate order.
pub fn list_train_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found: Vec<(usize, PathBuf)> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let id = name.strip_prefix("train_")?.strip_suffix(".csv")?.parse().ok()?;
            Some((id, e.path()))
        })
        .collect();
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub feature_names: Vec<String>,
    pub beta_true: Vec<f64>,
    pub truth: Vec<bool>,
    /// 1-based indices of the truly relevant covariates.
    pub relevant: Vec<usize>,
    pub train_censoring_fraction: Vec<f64>,
    pub test_censoring_fraction: f64,
}

fn censored_fraction(d: &SurvivalDataset) -> f64 {
    1.0 - d.event_count() as f64 / d.n() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Not recorded in manifests, so reruns elsewhere reproduce them exactly.
    #[serde(skip)]
    pub out: PathBuf,
}

/// Training replicates, a shared test set, all scenario graphs and the truth.
pub fn cmd_simulate(args: &SimulateArgs, config: &RunConfig) -> Result<()> {
    let started = Instant::now();
    let spec = &config.simulation;
    spec.validate()?;
    create_dir(&args.out)?;
    let replicates: Vec<_> = (0..spec.n_datasets)
        .into_par_iter()
        .map(|r| draw_dataset(spec, r as u64))
        .collect::<Result<_>>()?;
    let test = draw_dataset(spec, TEST_REPLICATE)?;
    let mut files = Vec::new();
    for (r, sim) in replicates.iter().enumerate() {
        let name = train_file_name(r, spec.n_datasets);
        sim.dataset.write_csv(args.out.join(&name))?;
        files.push(name);
    }
    test.dataset.write_csv(args.out.join(TEST_FILE))?;
    files.push(TEST_FILE.into());

    let graph_dir = args.out.join(GRAPH_DIR);
    create_dir(&graph_dir)?;
    let mut edges = serde_json::Map::new();
    for s in scenario_graphs(spec)? {
        let name = format!("{}/{}.edges", GRAPH_DIR, s.name);
        s.graph.write(args.out.join(&name))?;
        edges.insert(s.name.clone(), json!(s.graph.edge_count()));
        files.push(name);
    }

    let truth = TruthDocument {
        feature_names: test.dataset.feature_names().to_vec(),
        beta_true: test.beta_true.clone(),
        relevant: (1..=spec.p).filter(|&j| test.truth[j - 1]).collect(),
        truth: test.truth.clone(),
        train_censoring_fraction: replicates.iter().map(|s| censored_fraction(&s.dataset)).collect(),
        test_censoring_fraction: censored_fraction(&test.dataset),
    };
    write_json(&args.out.join(TRUTH_FILE), &truth)?;
    files.push(TRUTH_FILE.into());

    let details = json!({
        "files": files,
        "graph_edges": edges,
        "censoring_rates": replicates.iter().map(|s| s.censoring_rate).collect::<Vec<_>>(),
        "test_censoring_rate": test.censoring_rate,
        "streams": "coefficients: stream 0; train replicate r (1-based): stream r; test: reserved last stream",
    });
    let manifest = Manifest::new("simulate", serde_json::to_value(args)?, config, details);
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    write_timing(&args.out, started, json!({}))
}

/// Everything `evaluate` needs from a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub feature_names: Vec<String>,
    pub cuts: Vec<f64>,
    pub hazard_means: Vec<f64>,
    pub mpm: MpmFit,
    /// Covariate-free Kaplan-Meier curve of the training data.
    pub km_train: StepFunction,
    pub retained_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub feature: String,
    /// 1-based column index.
    pub index: usize,
    pub inclusion_prob: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpmDocument {
    pub model_size: usize,
    pub selected: Vec<SelectedFeature>,
    pub feature_names: Vec<String>,
    pub inclusion_probs: Vec<f64>,
    pub coefficients: Vec<f64>,
}

impl MpmDocument {
    pub fn new(fit: &MpmFit, names: &[String]) -> Self {
        let selected = (0..fit.selected.len())
            .filter(|&j| fit.selected[j])
            .map(|j| SelectedFeature {
                feature: names[j].clone(),
                index: j + 1,
                inclusion_prob: fit.inclusion_probs[j],
                coefficient: fit.coefficients[j],
            })
            .collect();
        Self {
            model_size: fit.model_size,
            selected,
            feature_names: names.to_vec(),
            inclusion_probs: fit.inclusion_probs.clone(),
            coefficients: fit.coefficients.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    /// `None` when the trace is too short for the estimator.
    pub ess: Option<f64>,
}

impl TraceSummary {
    pub fn new(trace: &[f64]) -> Self {
        let n = trace.len().max(1) as f64;
        let mean = trace.iter().sum::<f64>() / n;
        let var = if trace.len() > 1 {
            trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            sd: var.sqrt(),
            min: trace.iter().copied().fold(f64::INFINITY, f64::min),
            max: trace.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ess: effective_sample_size(trace).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain_id: u64,
    pub seed: u64,
    pub retained: usize,
    pub acceptance_rate: f64,
    pub acceptance_in_band: bool,
    pub coordinate_acceptance: Vec<f64>,
    pub fallback_proposals: u64,
    pub log_lik: TraceSummary,
    pub model_size: TraceSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsDocument {
    pub chains: Vec<ChainSummary>,
    pub pooled_draws: usize,
}

pub fn diagnostics(chains: &[PosteriorSamples]) -> DiagnosticsDocument {
    let summaries = chains
        .iter()
        .map(|s| {
            let d = &s.diagnostics;
            let in_band = d.acceptance_rate > ACCEPTANCE_BAND.0 && d.acceptance_rate < ACCEPTANCE_BAND.1;
            if !in_band {
                log::warn!(
                    "chain {}: coefficient acceptance rate {:.3} outside ({}, {})",
                    d.chain_id + 1,
                    d.acceptance_rate,
                    ACCEPTANCE_BAND.0,
                    ACCEPTANCE_BAND.1
                );
            }
            let sizes: Vec<f64> = s.model_size_trace.iter().map(|&m| m as f64).collect();
            ChainSummary {
                chain_id: d.chain_id,
                seed: d.seed,
                retained: s.retained(),
                acceptance_rate: d.acceptance_rate,
                acceptance_in_band: in_band,
                coordinate_acceptance: d.coordinate_acceptance.clone(),
                fallback_proposals: d.fallback_proposals,
                log_lik: TraceSummary::new(&s.loglik_trace),
                model_size: TraceSummary::new(&sizes),
            }
        })
        .collect();
    DiagnosticsDocument {
        chains: summaries,
        pooled_draws: chains.iter().map(PosteriorSamples::retained).sum(),
    }
}

/// In-memory result of fitting one dataset.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub chains: Vec<PosteriorSamples>,
    pub document: FitDocument,
}

/// Runs all chains and reduces them to the MPM and posterior-mean hazard.
pub fn fit_dataset(data: &SurvivalDataset, graph: &PriorGraph, mcmc: &McmcConfig) -> Result<FitOutcome> {
    let model = PreparedModel::new(data, graph, mcmc)?;
    let chains: Vec<PosteriorSamples> = (0..mcmc.chains as u64)
        .into_par_iter()
        .map(|c| run_prepared_chain(data, &model, mcmc, c))
        .collect::<Result<_>>()?;
    let refs: Vec<&PosteriorSamples> = chains.iter().collect();
    let document = FitDocument {
        feature_names: data.feature_names().to_vec(),
        cuts: model.partition.cuts().to_vec(),
        hazard_means: posterior_mean_hazard(&refs)?,
        mpm: mpm(&refs)?,
        km_train: kaplan_meier(data.times(), data.events()),
        retained_draws: refs.iter().map(|s| s.retained()).sum(),
    };
    Ok(FitOutcome { chains, document })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArgs {
    pub data: PathBuf,
    pub graph: PathBuf,
    /// Not recorded in manifests, so reruns elsewhere reproduce them exactly.
    #[serde(skip)]
    pub out: PathBuf,
}

pub fn cmd_fit(args: &FitArgs, config: &RunConfig) -> Result<FitDocument> {
    let started = Instant::now();
    let data = SurvivalDataset::load_csv(&args.data)?;
    let graph = PriorGraph::read(&args.graph)?;
    if graph.p() != data.p() {
        return Err(Error::Dimension(format!(
            "graph {} has dimension {} but {} has {} covariates",
            args.graph.display(),
            graph.p(),
            args.data.display(),
            data.p()
        )));
    }
    create_dir(&args.out)?;
    let outcome = fit_dataset(&data, &graph, &config.mcmc)?;
    for s in &outcome.chains {
        write_samples(&chain_dir(&args.out, s.diagnostics.chain_id), s, data.feature_names())?;
    }
    let doc = &outcome.document;
    write_json(&args.out.join(FIT_FILE), doc)?;
    write_json(&args.out.join("mpm.json"), &MpmDocument::new(&doc.mpm, &doc.feature_names))?;
    write_json(&args.out.join("diagnostics.json"), &diagnostics(&outcome.chains))?;
    let seeds: Vec<_> = outcome
        .chains
        .iter()
        .map(|s| json!({ "chain": s.diagnostics.chain_id + 1, "seed": s.diagnostics.seed, "stream": s.diagnostics.chain_id }))
        .collect();
    let details = json!({
        "chains": seeds,
        "acceptance_rates": outcome.chains.iter().map(|s| s.diagnostics.acceptance_rate).collect::<Vec<_>>(),
        "intervals": doc.cuts.len() - 1,
        "n": data.n(),
        "p": data.p(),
        "events": data.event_count(),
        "graph_edges": graph.edge_count(),
    });
    let manifest = Manifest::new("fit", serde_json::to_value(args)?, config, details);
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    write_timing(&args.out, started, json!({}))?;
    Ok(outcome.document)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeArgs {
    /// Fit directory holding `chain_*` sample directories.
    pub fit: PathBuf,
    /// Not recorded in manifests, so reruns elsewhere reproduce them exactly.
    #[serde(skip)]
    pub out: PathBuf,
}

/// Recomputes `mpm.json` and `diagnostics.json` from the sample CSVs.
pub fn cmd_summarize(args: &SummarizeArgs, config: &RunConfig) -> Result<MpmFit> {
    let mut chains = Vec::new();
    let mut names: Option<Vec<String>> = None;
    for dir in list_chain_dirs(&args.fit)? {
        let (samples, n) = read_samples(&dir)?;
        if names.as_ref().is_some_and(|prev| *prev != n) {
            return Err(Error::Dimension(format!("{} has different features", dir.display())));
        }
        names = Some(n);
        chains.push(samples);
    }
    let names = names.unwrap_or_default();
    let refs: Vec<&PosteriorSamples> = chains.iter().collect();
    let fit = mpm(&refs)?;
    create_dir(&args.out)?;
    write_json(&args.out.join("mpm.json"), &MpmDocument::new(&fit, &names))?;
    write_json(&args.out.join("diagnostics.json"), &diagnostics(&chains))?;
    let details = json!({ "chains": chains.len() });
    let manifest = Manifest::new("summarize", serde_json::to_value(args)?, config, details);
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    Ok(fit)
}

/// Accepts a fit directory or the path of its `fit.json`.
pub fn load_fit(path: &Path) -> Result<FitDocument> {
    if path.is_dir() {
        read_json(&path.join(FIT_FILE))
    } else {
        read_json(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMetrics {
    pub t_star: f64,
    /// `config` when set explicitly, else `test_p95`.
    pub t_star_source: String,
    /// Time range the IBS integrates over.
    pub horizon: String,
    pub ibs: f64,
    pub km_ibs: f64,
    pub model_size: usize,
    pub selection: Option<SelectionMetrics>,
    /// Whether `t_star` lies beyond the last partition cut.
    pub extrapolated: bool,
    pub max_excluded: usize,
}

/// Model and Kaplan-Meier IBS of a fit on a test set, plus its Brier curve.
pub fn evaluate_fit(
    fit: &FitDocument,
    test: &SurvivalDataset,
    truth: Option<&[bool]>,
    t_star: Option<f64>,
) -> Result<(EvaluationMetrics, Vec<BrierPoint>)> {
    if test.p() != fit.feature_names.len() {
        return Err(Error::Dimension(format!(
            "test data has {} covariates, the fit {}",
            test.p(),
            fit.feature_names.len()
        )));
    }
    if test.feature_names() != fit.feature_names.as_slice() {
        log::warn!("test feature names differ from the fitted ones; matching by position");
    }
    let partition = TimePartition::from_cuts(fit.cuts.clone())?;
    let curves = predict_survival(&fit.mpm, &fit.hazard_means, &partition, test.covariates())?;
    let (t_star, source) = match t_star {
        Some(t) => (t, "config"),
        None => (default_horizon(test), "test_p95"),
    };
    let g = km_censoring(test);
    let curve = brier_curve(t_star, &curves, test, &g)?;
    check_monotone(&curves, &curve)?;
    let ibs = integrated_brier_score(t_star, &curves, test, &g)?;
    let km = KaplanMeierPredictor {
        curve: fit.km_train.clone(),
        subjects: test.n(),
    };
    let km_ibs = integrated_brier_score(t_star, &km, test, &g)?;
    let selection = truth.map(|t| selection_metrics(&fit.mpm.selected, t)).transpose()?;
    let metrics = EvaluationMetrics {
        t_star,
        t_star_source: source.into(),
        horizon: "test".into(),
        ibs,
        km_ibs,
        model_size: fit.mpm.model_size,
        selection,
        extrapolated: curves.extrapolated(t_star),
        max_excluded: curve.iter().map(|b| b.excluded).max().unwrap_or(0),
    };
    Ok((metrics, curve))
}

fn check_monotone(curves: &crate::evaluation::SurvivalCurve, grid: &[BrierPoint]) -> Result<()> {
    for i in 0..curves.subjects() {
        let mut prev = 1.0;
        for b in grid {
            let s = curves.survival(i, b.t);
            if s > prev {
                return Err(Error::InvalidData(format!(
                    "predicted survival of subject {} increases at t = {}",
                    i + 1,
                    b.t
                )));
            }
            prev = s;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Fit directory or `fit.json`.
    pub fit: PathBuf,
    pub test: PathBuf,
    pub truth: Option<PathBuf>,
    /// Not recorded in manifests, so reruns elsewhere reproduce them exactly.
    #[serde(skip)]
    pub out: PathBuf,
}

pub fn cmd_evaluate(args: &EvaluateArgs, config: &RunConfig) -> Result<EvaluationMetrics> {
    let fit = load_fit(&args.fit)?;
    let test = SurvivalDataset::load_csv(&args.test)?;
    let truth = args
        .truth
        .as_deref()
        .map(read_json::<TruthDocument>)
        .transpose()?
        .map(|t| t.truth);
    let (metrics, curve) = evaluate_fit(&fit, &test, truth.as_deref(), config.evaluation.t_star)?;
    create_dir(&args.out)?;
    let mut csv = String::from("t,bs,excluded\n");
    for b in &curve {
        csv.push_str(&format!("{},{},{}\n", b.t, b.score, b.excluded));
    }
    write_atomic(&args.out.join("bs_curve.csv"), csv.as_bytes())?;
    write_json(&args.out.join("metrics.json"), &metrics)?;
    let manifest = Manifest::new("evaluate", serde_json::to_value(args)?, config, json!({}));
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    Ok(metrics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbMode {
    /// Keep every k-th edge.
    Uniform,
    /// Remove edges inside a block.
    Block,
    /// Remove a block and disconnect it from the rest.
    BlockPlus,
    /// Add random false edges.
    Noise,
}

impl std::str::FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "block" => Ok(Self::Block),
            "block-plus" => Ok(Self::BlockPlus),
            "noise" => Ok(Self::Noise),
            other => Err(Error::InvalidArgument(format!(
                "unknown perturbation `{other}` (uniform|block|block-plus|noise)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbArgs {
    pub graph: PathBuf,
    pub mode: PerturbMode,
    pub k: Option<usize>,
    /// 1-based vertex indices.
    pub block: Option<Vec<usize>>,
    pub fraction: Option<f64>,
    /// Output edge-list path; the manifest goes to `<out>.manifest.json`.
    #[serde(skip)]
    pub out: PathBuf,
}

fn required<T: Copy>(v: Option<T>, flag: &str, mode: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required for mode {mode}")))
}

pub fn perturb_graph(graph: &PriorGraph, args: &PerturbArgs, seed: u64) -> Result<PriorGraph> {
    let block = || -> Result<Vec<usize>> {
        let b = args
            .block
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("--block is required for block modes".into()))?;
        b.iter()
            .map(|&v| {
                v.checked_sub(1)
                    .ok_or_else(|| Error::InvalidArgument("block vertices are 1-based".into()))
            })
            .collect()
    };
    match args.mode {
        PerturbMode::Uniform => graph.remove_edges_uniform(required(args.k, "k", "uniform")?),
        PerturbMode::Block => graph.remove_block_edges(&block()?, false),
        PerturbMode::BlockPlus => graph.remove_block_edges(&block()?, true),
        PerturbMode::Noise => graph.add_false_edges(required(args.fraction, "fraction", "noise")?, seed),
    }
}

pub fn cmd_perturb_graph(args: &PerturbArgs, config: &RunConfig) -> Result<PriorGraph> {
    let graph = PriorGraph::read(&args.graph)?;
    let seed = config.simulation.seed;
    let out = perturb_graph(&graph, args, seed)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    out.write(&args.out)?;
    let details = json!({
        "edges_before": graph.edge_count(),
        "edges_after": out.edge_count(),
        "seed": seed,
    });
    let manifest = Manifest::new("perturb-graph", serde_json::to_value(args)?, config, details);
    let mut name = args.out.clone().into_os_string();
    name.push(".manifest.json");
    write_json(Path::new(&name), &manifest)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_names_sort_lexically() {
        assert_eq!(train_file_name(0, 20), "train_01.csv");
        assert_eq!(train_file_name(19, 20), "train_20.csv");
        assert_eq!(train_file_name(4, 150), "train_005.csv");
    }

    #[test]
    fn perturb_mode_parsing() {
        assert_eq!("block-plus".parse::<PerturbMode>().unwrap(), PerturbMode::BlockPlus);
        assert!("blocks".parse::<PerturbMode>().is_err());
    }

    #[test]
    fn perturb_requires_mode_arguments() {
        let g = PriorGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut args = PerturbArgs {
            graph: "g".into(),
            mode: PerturbMode::Uniform,
            k: None,
            block: None,
            fraction: None,
            out: "o".into(),
        };
        assert!(perturb_graph(&g, &args, 1).is_err());
        args.k = Some(2);
        assert_eq!(perturb_graph(&g, &args, 1).unwrap().edge_count(), 2);
        args.mode = PerturbMode::Block;
        args.block = Some(vec![1, 2]);
        assert_eq!(perturb_graph(&g, &args, 1).unwrap().edge_count(), 2);
        args.block = Some(vec![0, 2]);
        assert!(perturb_graph(&g, &args, 1).is_err());
    }

    #[test]
    fn trace_summary_handles_short_traces() {
        let s = TraceSummary::new(&[1.0, 3.0]);
        assert_eq!((s.mean, s.min, s.max), (2.0, 1.0, 3.0));
        assert!((s.sd - 2f64.sqrt()).abs() < 1e-15);
        assert!(s.ess.is_none());
    }
}
