use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use regime_core::domain::{Dataset, DecisionList, Schema};
use regime_core::estimation::{compute_dr_scores, fit_outcome, fit_propensity, DrScores};
use regime_core::mining::{mine_patterns, CandidateSet};
use regime_core::objective::{metrics, objective_value};
use regime_core::search::{
    exhaustive_search, greedy_baseline, uct_search, ExhaustiveConfig, SearchContext,
};
use regime_core::synthetic::{generate, ground_truth, GeneratorSpec};
use regime_core::Error;
use serde::Serialize;

use crate::config::{RunConfig, Strategy};

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Validation {
            location: path.display().to_string(),
            message: e.to_string(),
        }
        .into()
    })
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    Ok(&cfg.out_dir)
}

fn load_inputs(cfg: &RunConfig) -> Result<Dataset> {
    let schema = Schema::load(&cfg.schema_path())?;
    Ok(Dataset::load(schema, &cfg.dataset_path())?)
}

fn load_scores(path: &Path, ds: &Dataset) -> Result<DrScores> {
    let scores: DrScores = serde_json::from_str(&read_text(path)?).map_err(|e| Error::Validation {
        location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })?;
    scores.check_matches(ds)?;
    Ok(scores)
}

fn with_location(path: &Path, e: Error) -> anyhow::Error {
    match e {
        Error::Validation { location, message } => Error::Validation {
            location: format!("{}: {location}", path.display()),
            message,
        }
        .into(),
        other => anyhow::Error::from(other).context(path.display().to_string()),
    }
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let g = &cfg.generate;
    let spec = GeneratorSpec::asthma(g.n_subjects, g.seed, g.confounding_strength);
    let ds = generate(&spec)?;
    let dir = out_dir(cfg)?;
    let mut csv = Vec::new();
    ds.write_csv(&mut csv)?;
    write_file(&dir.join("dataset.csv"), &csv)?;
    write_file(&dir.join("schema.json"), (spec.schema.to_json()? + "\n").as_bytes())?;
    write_json(&dir.join("truth.json"), &ground_truth(&spec)?)?;
    println!("generated {} subjects in {}", ds.n(), dir.display());
    Ok(())
}

pub fn cmd_mine(cfg: &RunConfig) -> Result<()> {
    let ds = load_inputs(cfg)?;
    let cands = mine_patterns(&ds, &cfg.mining)?;
    let dir = out_dir(cfg)?;
    write_file(&dir.join("candidates.json"), (cands.to_json(ds.schema())? + "\n").as_bytes())?;
    println!("mined {} candidate patterns", cands.len());
    Ok(())
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let ds = load_inputs(cfg)?;
    let pm = fit_propensity(&ds, &cfg.propensity)?;
    let om = fit_outcome(&ds, &cfg.outcome)?;
    let scores = compute_dr_scores(&ds, &pm, &om)?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("propensity.json"), &pm)?;
    write_json(&dir.join("outcome.json"), &om)?;
    write_json(&dir.join("scores.json"), &scores)?;
    println!(
        "propensity converged in {} iterations (gradient norm {:.2e}); scores for {} subjects",
        pm.iterations,
        pm.grad_norm,
        ds.n()
    );
    Ok(())
}

#[derive(Serialize)]
struct LearnSummary {
    strategy: Strategy,
    /// Recomputed from the written regime.
    objective: f64,
    search_objective: f64,
    list_length: usize,
    iterations_run: Option<usize>,
    tree_size: Option<usize>,
    pruned: Option<u64>,
    solved: Option<bool>,
    evaluated: Option<u64>,
}

pub fn cmd_learn(cfg: &RunConfig, candidates: Option<PathBuf>, scores: Option<PathBuf>) -> Result<()> {
    let ds = load_inputs(cfg)?;
    let cand_path = candidates.unwrap_or_else(|| cfg.out_dir.join("candidates.json"));
    let cands = CandidateSet::from_json(&read_text(&cand_path)?, ds.schema())
        .map_err(|e| with_location(&cand_path, e))?;
    let scores_path = scores.unwrap_or_else(|| cfg.out_dir.join("scores.json"));
    let scores = load_scores(&scores_path, &ds)?;
    let (w, policy) = (cfg.weights(), cfg.policy());
    let ctx = SearchContext::new(&ds, &scores, &cands, w, policy)?;

    let mut log = Vec::new();
    let (dl, mut summary) = match cfg.strategy {
        Strategy::Uct => {
            let r = uct_search(&ctx, &cfg.search)?;
            for rec in &r.log {
                serde_json::to_writer(&mut log, rec)?;
                log.push(b'\n');
            }
            let dl = r.decision_list(&ctx);
            (dl, LearnSummary {
                strategy: cfg.strategy,
                objective: 0.0,
                search_objective: r.objective,
                list_length: 0,
                iterations_run: Some(r.iterations_run),
                tree_size: Some(r.tree_size),
                pruned: Some(r.pruned),
                solved: Some(r.solved),
                evaluated: None,
            })
        }
        Strategy::Greedy => {
            let state = greedy_baseline(&ctx, cfg.search.l_max);
            (ctx.decision_list(&state, 0), LearnSummary {
                strategy: cfg.strategy,
                objective: 0.0,
                search_objective: ctx.objective(&state),
                list_length: 0,
                iterations_run: None,
                tree_size: None,
                pruned: None,
                solved: None,
                evaluated: None,
            })
        }
        Strategy::Exhaustive => {
            let ec = ExhaustiveConfig {
                l_max: cfg.search.l_max,
                prune: cfg.search.prune,
                ..ExhaustiveConfig::default()
            };
            let r = exhaustive_search(&ctx, &ec)?;
            (ctx.decision_list(&r.best, 0), LearnSummary {
                strategy: cfg.strategy,
                objective: 0.0,
                search_objective: r.objective,
                list_length: 0,
                iterations_run: None,
                tree_size: None,
                pruned: Some(r.pruned),
                solved: Some(true),
                evaluated: Some(r.evaluated),
            })
        }
    };
    summary.objective = objective_value(&scores, &ds, &dl, &w, policy);
    summary.list_length = dl.len();

    let dir = out_dir(cfg)?;
    write_file(&dir.join("regime.json"), (dl.to_json(ds.schema())? + "\n").as_bytes())?;
    write_file(&dir.join("regime.txt"), dl.pretty(ds.schema()).as_bytes())?;
    write_file(&dir.join("search_log.jsonl"), &log)?;
    write_json(&dir.join("learn.json"), &summary)?;
    let mut stdout = std::io::stdout().lock();
    write!(stdout, "{}", dl.pretty(ds.schema()))?;
    writeln!(stdout, "objective {:.6}", summary.objective)?;
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, regime: Option<PathBuf>, scores: Option<PathBuf>) -> Result<()> {
    let ds = load_inputs(cfg)?;
    let regime_path = regime.unwrap_or_else(|| cfg.out_dir.join("regime.json"));
    let dl = DecisionList::from_json(&read_text(&regime_path)?, ds.schema())
        .map_err(|e| with_location(&regime_path, e))?;
    let scores_path = scores.unwrap_or_else(|| cfg.out_dir.join("scores.json"));
    let scores = load_scores(&scores_path, &ds)?;
    let report = metrics(&scores, &ds, &dl, &cfg.weights(), cfg.policy());
    let dir = out_dir(cfg)?;
    write_json(&dir.join("report.json"), &report)?;
    let table = report.to_table();
    write_file(&dir.join("report.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}
