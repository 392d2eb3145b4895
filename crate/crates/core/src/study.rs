//! Scenario-by-replicate simulation study.
//!
//! Every (scenario, replicate) cell is fitted independently and written to
//! `cells/<scenario>/rep_XX.json`. The aggregate tables are then rebuilt from
//! those files alone, so they can always be recomputed from disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::{evaluate_fit, fit_dataset, list_train_files, TruthDocument, GRAPH_DIR, TEST_FILE, TRUTH_FILE};
use crate::config::RunConfig;
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::evaluation::{default_horizon, km_reference_ibs};
use crate::graph::PriorGraph;
use crate::io::{create_dir, read_json, write_atomic, write_json, Manifest, MANIFEST_FILE};
use crate::summary::{stability_report, MpmFit};

/// Scenarios tabulated in `table1.csv`; `table2.csv` covers all of them.
pub const TABLE1_SCENARIOS: [&str; 5] = ["empty", "true", "uniform_50", "block_5x5", "noise_100"];

pub const KM_LABEL: &str = "kaplan_meier";

/// MCMC seed of training replicate `replicate` (0-based): drawn from the root
/// seed on a per-replicate stream, shared by all scenarios of the replicate.
pub fn replicate_seed(root: u64, replicate: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(replicate as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub scenario: String,
    /// 1-based replicate number.
    pub replicate: usize,
    pub seed: u64,
    pub outcome: std::result::Result<CellMetrics, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub model_size: usize,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: f64,
    pub ibs: f64,
    pub km_ibs: f64,
    pub t_star: f64,
    pub acceptance_rate: f64,
    pub mpm: MpmFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyArgs {
    /// Output directory of `simulate`.
    pub sim: PathBuf,
    /// Not recorded in manifests, so reruns elsewhere reproduce them exactly.
    #[serde(skip)]
    pub out: PathBuf,
    /// Reuse existing successful cell files with matching seeds.
    #[serde(skip)]
    pub resume: bool,
}

pub fn cell_path(out: &Path, scenario: &str, replicate: usize) -> PathBuf {
    out.join("cells").join(scenario).join(format!("rep_{replicate:02}.json"))
}

struct Inputs {
    trains: Vec<SurvivalDataset>,
    test: SurvivalDataset,
    truth: Vec<bool>,
    graphs: Vec<(String, PriorGraph)>,
}

fn load_inputs(args: &StudyArgs, config: &RunConfig) -> Result<Inputs> {
    let files = list_train_files(&args.sim)?;
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no train_*.csv files in {}",
            args.sim.display()
        )));
    }
    let wanted = config.study.replicates.unwrap_or(files.len());
    if wanted > files.len() {
        return Err(Error::InvalidArgument(format!(
            "{wanted} replicates requested but only {} simulated",
            files.len()
        )));
    }
    let trains = files[..wanted]
        .iter()
        .map(SurvivalDataset::load_csv)
        .collect::<Result<_>>()?;
    let truth: TruthDocument = read_json(&args.sim.join(TRUTH_FILE))?;
    let graphs = config
        .study
        .scenarios
        .iter()
        .map(|s| {
            let path = args.sim.join(GRAPH_DIR).join(format!("{s}.edges"));
            Ok((s.clone(), PriorGraph::read(path)?))
        })
        .collect::<Result<_>>()?;
    Ok(Inputs {
        trains,
        test: SurvivalDataset::load_csv(args.sim.join(TEST_FILE))?,
        truth: truth.truth,
        graphs,
    })
}

fn run_cell(
    inputs: &Inputs,
    config: &RunConfig,
    scenario: usize,
    replicate: usize,
    km_ibs: f64,
    t_star: f64,
) -> CellRecord {
    let (name, graph) = &inputs.graphs[scenario];
    let seed = replicate_seed(config.mcmc.seed, replicate);
    let mcmc = crate::sampler::McmcConfig {
        seed,
        ..config.mcmc
    };
    let outcome = (|| -> Result<CellMetrics> {
        let fit = fit_dataset(&inputs.trains[replicate], graph, &mcmc)?;
        let (metrics, _) = evaluate_fit(&fit.document, &inputs.test, Some(&inputs.truth), Some(t_star))?;
        let sel = metrics.selection.expect("truth supplied");
        let acc = fit.chains.iter().map(|c| c.diagnostics.acceptance_rate).sum::<f64>()
            / fit.chains.len() as f64;
        Ok(CellMetrics {
            model_size: metrics.model_size,
            sensitivity: sel.sensitivity,
            specificity: sel.specificity,
            accuracy: sel.accuracy,
            ibs: metrics.ibs,
            km_ibs,
            t_star,
            acceptance_rate: acc,
            mpm: fit.document.mpm,
        })
    })()
    .map_err(|e| e.to_string());
    if let Err(e) = &outcome {
        log::error!("cell {name} / replicate {}: {e}", replicate + 1);
    }
    CellRecord {
        scenario: name.clone(),
        replicate: replicate + 1,
        seed,
        outcome,
    }
}

/// Summary statistics of one metric across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: Option<f64>,
}

pub fn mean_se(values: &[f64]) -> Option<MeanSe> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = (values.len() > 1).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    Some(MeanSe { mean, se })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: String,
    pub replicates: usize,
    pub failures: usize,
    pub sensitivity: Option<MeanSe>,
    pub specificity: Option<MeanSe>,
    pub accuracy: Option<MeanSe>,
    pub model_size: Option<MeanSe>,
    pub model_size_median: Option<f64>,
    pub ibs: Option<MeanSe>,
}

/// Aggregates read back from the cell files.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub cells: Vec<CellRecord>,
    pub rows: Vec<ScenarioRow>,
}

impl StudyReport {
    pub fn row(&self, scenario: &str) -> Option<&ScenarioRow> {
        self.rows.iter().find(|r| r.scenario == scenario)
    }

    /// Successful cells of a scenario keyed by replicate.
    pub fn metrics(&self, scenario: &str) -> BTreeMap<usize, &CellMetrics> {
        self.cells
            .iter()
            .filter(|c| c.scenario == scenario)
            .filter_map(|c| c.outcome.as_ref().ok().map(|m| (c.replicate, m)))
            .collect()
    }
}

fn scenario_row(scenario: &str, cells: &[&CellRecord]) -> ScenarioRow {
    let ok: Vec<&CellMetrics> = cells.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
    let pick = |f: &dyn Fn(&CellMetrics) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|m| f(m)).collect() };
    let sizes = pick(&|m| Some(m.model_size as f64));
    ScenarioRow {
        scenario: scenario.to_string(),
        replicates: cells.len(),
        failures: cells.len() - ok.len(),
        sensitivity: mean_se(&pick(&|m| m.sensitivity)),
        specificity: mean_se(&pick(&|m| m.specificity)),
        accuracy: mean_se(&pick(&|m| Some(m.accuracy))),
        model_size: mean_se(&sizes),
        model_size_median: median(&sizes),
        ibs: mean_se(&pick(&|m| Some(m.ibs))),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn table_csv(rows: &[&ScenarioRow]) -> String {
    let mut s = String::from(
        "scenario,replicates,failures,sensitivity_mean,sensitivity_se,specificity_mean,specificity_se,\
         accuracy_mean,accuracy_se,model_size_mean,model_size_se,model_size_median,ibs_mean,ibs_se\n",
    );
    for r in rows {
        let ms = |m: Option<MeanSe>| format!("{},{}", opt(m.map(|m| m.mean)), opt(m.and_then(|m| m.se)));
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.scenario,
            r.replicates,
            r.failures,
            ms(r.sensitivity),
            ms(r.specificity),
            ms(r.accuracy),
            ms(r.model_size),
            opt(r.model_size_median),
            ms(r.ibs)
        ));
    }
    s
}

/// Reads every cell file under `out` for the given scenarios and replicates
/// and writes the aggregate CSVs.
pub fn aggregate_study(
    out: &Path,
    scenarios: &[String],
    replicates: usize,
    feature_names: &[String],
    stability_threshold: f64,
) -> Result<StudyReport> {
    let mut cells = Vec::new();
    for s in scenarios {
        for r in 1..=replicates {
            cells.push(read_json::<CellRecord>(&cell_path(out, s, r))?);
        }
    }
    let rows: Vec<ScenarioRow> = scenarios
        .iter()
        .map(|s| {
            let mine: Vec<&CellRecord> = cells.iter().filter(|c| &c.scenario == s).collect();
            scenario_row(s, &mine)
        })
        .collect();
    let report = StudyReport { cells, rows };

    let t1: Vec<&ScenarioRow> = TABLE1_SCENARIOS.iter().filter_map(|s| report.row(s)).collect();
    write_atomic(&out.join("table1.csv"), table_csv(&t1).as_bytes())?;
    let t2: Vec<&ScenarioRow> = report.rows.iter().collect();
    write_atomic(&out.join("table2.csv"), table_csv(&t2).as_bytes())?;

    let mut ibs = String::from("scenario,replicate,ibs\n");
    let mut sizes = String::from("scenario,replicate,model_size\n");
    let mut km: BTreeMap<usize, f64> = BTreeMap::new();
    for c in &report.cells {
        if let Ok(m) = &c.outcome {
            ibs.push_str(&format!("{},{},{}\n", c.scenario, c.replicate, m.ibs));
            sizes.push_str(&format!("{},{},{}\n", c.scenario, c.replicate, m.model_size));
            km.insert(c.replicate, m.km_ibs);
        }
    }
    for (r, v) in &km {
        ibs.push_str(&format!("{KM_LABEL},{r},{v}\n"));
    }
    write_atomic(&out.join("ibs.csv"), ibs.as_bytes())?;
    write_atomic(&out.join("model_size.csv"), sizes.as_bytes())?;

    let mut incl = String::from("scenario,feature,mean_inclusion_prob\n");
    let mut stab = String::from("scenario,feature,frequency,coefficient_mean,coefficient_sd,stable\n");
    for s in scenarios {
        let fits: Vec<MpmFit> = report.metrics(s).values().map(|m| m.mpm.clone()).collect();
        if fits.is_empty() {
            continue;
        }
        for (j, name) in feature_names.iter().enumerate() {
            let mean = fits.iter().map(|f| f.inclusion_probs[j]).sum::<f64>() / fits.len() as f64;
            incl.push_str(&format!("{s},{name},{mean}\n"));
        }
        for row in stability_report(&fits, feature_names, stability_threshold)? {
            stab.push_str(&format!(
                "{s},{},{},{},{},{}\n",
                row.feature,
                row.frequency,
                opt(row.coefficient_mean),
                opt(row.coefficient_sd),
                row.stable
            ));
        }
    }
    write_atomic(&out.join("inclusion.csv"), incl.as_bytes())?;
    write_atomic(&out.join("stability.csv"), stab.as_bytes())?;
    Ok(report)
}

pub fn cmd_study(args: &StudyArgs, config: &RunConfig) -> Result<StudyReport> {
    let started = Instant::now();
    let inputs = load_inputs(args, config)?;
    let reps = inputs.trains.len();
    if inputs.test.p() != inputs.truth.len() {
        return Err(Error::Dimension("test data and truth disagree on p".into()));
    }
    let t_star = config
        .evaluation
        .t_star
        .unwrap_or_else(|| default_horizon(&inputs.test));
    let km: Vec<f64> = inputs
        .trains
        .iter()
        .map(|tr| km_reference_ibs(tr, &inputs.test, t_star))
        .collect::<Result<_>>()?;

    for (name, _) in &inputs.graphs {
        create_dir(&args.out.join("cells").join(name))?;
    }
    let jobs: Vec<(usize, usize)> = (0..reps)
        .flat_map(|r| (0..inputs.graphs.len()).map(move |s| (s, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.study.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let timings: Vec<(String, usize, f64, bool)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, r)| -> Result<(String, usize, f64, bool)> {
                let path = cell_path(&args.out, &inputs.graphs[s].0, r + 1);
                if args.resume {
                    if let Ok(prev) = read_json::<CellRecord>(&path) {
                        if prev.outcome.is_ok() && prev.seed == replicate_seed(config.mcmc.seed, r) {
                            return Ok((prev.scenario, r + 1, 0.0, true));
                        }
                    }
                }
                let t0 = Instant::now();
                let cell = run_cell(&inputs, config, s, r, km[r], t_star);
                write_json(&path, &cell)?;
                log::info!("cell {} / replicate {} done", cell.scenario, r + 1);
                Ok((cell.scenario, r + 1, t0.elapsed().as_secs_f64(), false))
            })
            .collect::<Result<_>>()
    })?;

    let report = aggregate_study(
        &args.out,
        &config.study.scenarios,
        reps,
        inputs.test.feature_names(),
        config.evaluation.stability_threshold,
    )?;
    let seeds: Vec<u64> = (0..reps).map(|r| replicate_seed(config.mcmc.seed, r)).collect();
    let details = json!({
        "replicates": reps,
        "t_star": t_star,
        "replicate_seeds": seeds,
        "failures": report.rows.iter().map(|r| r.failures).sum::<usize>(),
    });
    let manifest = Manifest::new("study", serde_json::to_value(args)?, config, details);
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    let cells: Vec<_> = timings
        .iter()
        .map(|(s, r, t, reused)| json!({ "scenario": s, "replicate": r, "seconds": t, "reused": reused }))
        .collect();
    write_json(
        &args.out.join("timing.json"),
        &json!({ "seconds": started.elapsed().as_secs_f64(), "cells": cells }),
    )?;
    Ok(report)
}
