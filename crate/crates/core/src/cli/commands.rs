//! The `synth`, `train`, `select`, `eval` and `ablate` commands.
//!
//! Each command reads what it needs from a [`RunConfig`] and writes into
//! `paths.out`, a directory. Every output carries the config hash and seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde_json::Value;

use super::config::{Loocv, RunConfig};
use crate::agent::{load_checkpoint, save_checkpoint, AgentParams, Variant};
use crate::data_io::{
    load_fragments, load_trialset, save_fragments, save_metrics, save_scores, save_trialset,
    synth_generate, write_atomic, TrialSet,
};
use crate::error::{Error, Result};
use crate::pipeline::{
    evaluate, group_fragments, recall_counts, score_trials, select_fragments, EvalConfig,
};
use crate::rewards::RewardCombo;
use crate::selector::{Fragment, SelectConfig};
use crate::trainer::train;

pub const MANIFEST: &str = "manifest.json";
pub const CHECKPOINT: &str = "checkpoint.txt";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const SCORES: &str = "scores.csv";
pub const FRAGMENTS: &str = "fragments.json";
pub const METRICS: &str = "metrics.json";
pub const ABLATION: &str = "ablation.csv";

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("missing path: {what}")))
}

/// A manifest path, or a directory containing `manifest.json`.
fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST)
    } else {
        p.to_path_buf()
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<TrialSet> {
    load_trialset(&manifest_path(required(&cfg.paths.dataset, "dataset (--data)")?))
}

/// Trial indices used to fit and to evaluate one cross-validation fold.
#[derive(Clone, Debug, PartialEq)]
pub struct Fold {
    pub name: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Without LOOCV a single fold named `all` trains and tests on every trial.
pub fn folds(set: &TrialSet, loocv: Loocv) -> Result<Vec<Fold>> {
    match loocv {
        Loocv::None => Ok(vec![Fold {
            name: "all".into(),
            train: (0..set.len()).collect(),
            test: (0..set.len()).collect(),
        }]),
        Loocv::Subject => {
            if let Some(t) = set.trials.iter().find(|t| t.subject.is_none()) {
                return Err(Error::Load {
                    trial: Some(t.id.clone()),
                    msg: "subject-level LOOCV needs a subject on every trial".into(),
                });
            }
            let subjects = set.subjects();
            if subjects.len() < 2 {
                return Err(Error::Config("subject-level LOOCV needs at least two subjects".into()));
            }
            subjects
                .into_iter()
                .map(|s| {
                    if s.is_empty() || s.contains(['/', '\\']) || s.starts_with('.') {
                        return Err(Error::Config(format!("subject id `{s}` cannot name a fold directory")));
                    }
                    let (test, train) = (0..set.len())
                        .partition(|&i| set.trials[i].subject.as_deref() == Some(s.as_str()));
                    Ok(Fold { name: s, train, test })
                })
                .collect()
        }
    }
}

fn subset(set: &TrialSet, idx: &[usize]) -> TrialSet {
    TrialSet {
        trials: idx.iter().map(|&i| set.trials[i].clone()).collect(),
        feature_dim: set.feature_dim,
        class_count: set.class_count,
    }
}

fn fold_dir(root: &Path, fold: &Fold, loocv: Loocv) -> PathBuf {
    match loocv {
        Loocv::None => root.to_path_buf(),
        Loocv::Subject => root.join(format!("fold_{}", fold.name)),
    }
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let out = required(&cfg.paths.out, "output directory (--out)")?;
    let set = synth_generate(&cfg.synth_config())?;
    save_trialset(out, &set, Some(&cfg.meta()))
}

/// Trains one model per fold and returns the checkpoint paths.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let out = required(&cfg.paths.out, "output directory (--out)")?;
    let set = load_dataset(cfg)?;
    let meta = cfg.meta();
    let mut written = Vec::new();
    for fold in folds(&set, cfg.loocv)? {
        let train_set = subset(&set, &fold.train);
        let (params, log) = train(&train_set, &cfg.train_config())?;
        let dir = fold_dir(out, &fold, cfg.loocv);
        let ckpt = dir.join(CHECKPOINT);
        save_checkpoint(&ckpt, &params, Some(&meta))?;
        log.save(&dir.join(TRAIN_LOG), Some(&meta))?;
        written.push(ckpt);
    }
    Ok(written)
}

/// Scores every trial with the model of the fold that holds it out.
fn score_by_fold(set: &TrialSet, folds: &[Fold], model: impl Fn(&Fold) -> Result<AgentParams>) -> Result<Vec<Vec<f64>>> {
    let mut scores = vec![Vec::new(); set.len()];
    for fold in folds {
        let params = model(fold)?;
        if params.input_dim != set.feature_dim {
            return Err(Error::Config(format!(
                "model for fold `{}` expects {}-dimensional features, dataset has {}",
                fold.name, params.input_dim, set.feature_dim
            )));
        }
        let test = subset(set, &fold.test);
        for (&i, s) in fold.test.iter().zip(score_trials(&test, &params)?) {
            scores[i] = s;
        }
    }
    Ok(scores)
}

pub fn cmd_select(cfg: &RunConfig) -> Result<(PathBuf, PathBuf)> {
    let out = required(&cfg.paths.out, "output directory (--out)")?;
    let model_root = required(&cfg.paths.model, "model directory (--model)")?;
    let set = load_dataset(cfg)?;
    let folds = folds(&set, cfg.loocv)?;
    let scores = score_by_fold(&set, &folds, |f| {
        load_checkpoint(&fold_dir(model_root, f, cfg.loocv).join(CHECKPOINT))
    })?;
    let fragments = select_fragments(&set, &scores, &cfg.select)?;
    let meta = cfg.meta();
    let score_path = out.join(SCORES);
    let rows: Vec<(&str, &[f64])> = set
        .trials
        .iter()
        .zip(&scores)
        .map(|(t, s)| (t.id.as_str(), s.as_slice()))
        .collect();
    save_scores(&score_path, &rows, &meta)?;
    let frag_path = out.join(FRAGMENTS);
    let flat: Vec<Fragment> = fragments.into_iter().flatten().collect();
    save_fragments(&frag_path, &flat, &meta)?;
    Ok((score_path, frag_path))
}

/// Aggregated clustering and localization metrics over folds.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldMetrics {
    /// Means over folds; `None` without labels.
    pub p_acc: Option<f64>,
    pub p_f: Option<f64>,
    pub nmi: Option<f64>,
    /// Matched over total truth intervals across all trials.
    pub recall: Option<f64>,
    pub per_fold: Vec<(String, Option<crate::clustering::Scores>)>,
}

fn eval_config(cfg: &RunConfig) -> EvalConfig {
    EvalConfig {
        cluster: cfg.cluster,
        granularity: cfg.granularity,
        tau: cfg.tiou,
    }
}

/// Clusters each fold's test trials and averages the scores.
pub fn evaluate_folds(
    set: &TrialSet,
    folds: &[Fold],
    fragments: Option<&[Vec<Fragment>]>,
    cfg: &RunConfig,
) -> Result<FoldMetrics> {
    let ecfg = eval_config(cfg);
    let mut per_fold = Vec::new();
    for fold in folds {
        let test = subset(set, &fold.test);
        let frags: Option<Vec<Vec<Fragment>>> = fragments.map(|f| fold.test.iter().map(|&i| f[i].clone()).collect());
        let report = evaluate(&test, frags.as_deref(), &ecfg, cfg.seed)?;
        per_fold.push((fold.name.clone(), report.scores));
    }
    let mean = |get: fn(&crate::clustering::Scores) -> f64| -> Option<f64> {
        let vals: Option<Vec<f64>> = per_fold.iter().map(|(_, s)| s.as_ref().map(get)).collect();
        vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    let recall = match fragments {
        Some(f) => recall_counts(set, f, cfg.tiou)?.map(|(m, t)| m as f64 / t as f64),
        None => None,
    };
    Ok(FoldMetrics {
        p_acc: mean(|s| s.p_acc),
        p_f: mean(|s| s.p_f),
        nmi: mean(|s| s.nmi),
        recall,
        per_fold,
    })
}

fn recall_key(tau: f64) -> String {
    format!("recall_tiou_{tau}")
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<PathBuf> {
    let out = required(&cfg.paths.out, "output directory (--out)")?;
    let set = load_dataset(cfg)?;
    let fragments = match &cfg.paths.fragments {
        Some(p) => {
            let p = if p.is_dir() { p.join(FRAGMENTS) } else { p.clone() };
            Some(group_fragments(&set, &load_fragments(&p)?)?)
        }
        None if cfg.sampling => {
            return Err(Error::Config("--sampling on needs a fragments file (--fragments)".into()))
        }
        None => None,
    };
    let folds = folds(&set, cfg.loocv)?;
    let cluster_on = if cfg.sampling { fragments.as_deref() } else { None };
    let mut m = evaluate_folds(&set, &folds, cluster_on, cfg)?;
    // Localization is a property of the fragments, whichever input was clustered.
    m.recall = match &fragments {
        Some(f) => recall_counts(&set, f, cfg.tiou)?.map(|(a, b)| a as f64 / b as f64),
        None => None,
    };
    let opt = |x: Option<f64>| x.map_or(Value::Null, Value::from);
    let mut map: BTreeMap<String, Value> = BTreeMap::new();
    map.insert("method".into(), cfg.cluster.method.code().into());
    map.insert("sampling".into(), cfg.sampling.into());
    map.insert("granularity".into(), cfg.granularity.to_string().into());
    map.insert("p_acc".into(), opt(m.p_acc));
    map.insert("p_f".into(), opt(m.p_f));
    map.insert("nmi".into(), opt(m.nmi));
    map.insert(recall_key(cfg.tiou), opt(m.recall));
    map.insert("trials".into(), set.len().into());
    if cfg.loocv == Loocv::Subject {
        for (name, s) in &m.per_fold {
            if let Some(s) = s {
                map.insert(format!("fold.{name}.p_acc"), s.p_acc.into());
                map.insert(format!("fold.{name}.p_f"), s.p_f.into());
                map.insert(format!("fold.{name}.nmi"), s.nmi.into());
            }
        }
    }
    let path = out.join(METRICS);
    save_metrics(&path, &map, &cfg.meta())?;
    Ok(path)
}

/// One row of the ablation report.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub agent: Variant,
    pub reward: RewardCombo,
    pub k: usize,
    pub offset: usize,
    pub outcome: std::result::Result<FoldMetrics, String>,
}

fn ablation_cell(set: &TrialSet, folds: &[Fold], cfg: &RunConfig, agent: Variant, reward: RewardCombo) -> Vec<AblationRow> {
    let mut tc = cfg.train_config();
    tc.agent.variant = agent;
    tc.reward = reward;
    let scores = score_by_fold(set, folds, |fold| {
        let train_set = subset(set, &fold.train);
        Ok(train(&train_set, &tc)?.0)
    });
    cfg.ablate
        .offsets
        .iter()
        .map(|&offset| {
            let outcome = scores.as_ref().map_err(|e| e.to_string()).and_then(|s| {
                let sel = SelectConfig {
                    l_max: offset,
                    r_max: offset,
                    ..cfg.select
                };
                select_fragments(set, s, &sel)
                    .and_then(|f| evaluate_folds(set, folds, Some(&f), cfg))
                    .map_err(|e| e.to_string())
            });
            AblationRow {
                agent,
                reward,
                k: cfg.select.k,
                offset,
                outcome,
            }
        })
        .collect()
}

/// Runs the agent × reward × offset grid on a dataset. Cells run on up to
/// `workers` threads; rows come out in grid order regardless.
pub fn run_ablation(set: &TrialSet, cfg: &RunConfig, workers: usize) -> Result<Vec<AblationRow>> {
    let folds = folds(set, cfg.loocv)?;
    let cells: Vec<(Variant, RewardCombo)> = cfg
        .ablate
        .agents
        .iter()
        .flat_map(|&a| cfg.ablate.rewards.iter().map(move |&r| (a, r)))
        .collect();
    let results: Mutex<Vec<Option<Vec<AblationRow>>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(agent, reward)) = cells.get(i) else {
                    break;
                };
                let rows = ablation_cell(set, &folds, cfg, agent, reward);
                results.lock().expect("no worker panicked")[i] = Some(rows);
            });
        }
    });
    Ok(results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .flat_map(|r| r.expect("every cell ran"))
        .collect())
}

/// CSV with a metadata comment line; failed cells carry the error text.
pub fn ablation_csv(rows: &[AblationRow], cfg: &RunConfig) -> Result<String> {
    let meta = cfg.meta();
    let mut out = String::new();
    writeln!(out, "# config_hash={} seed={}", meta.config_hash, meta.seed).unwrap();
    let mut w = csv::Writer::from_writer(Vec::new());
    let rk = recall_key(cfg.tiou);
    w.write_record(["agent", "reward", "k", "offset", "p_acc", "p_f", "nmi", rk.as_str(), "error"])
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let num = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v}"));
    for r in rows {
        let [p_acc, p_f, nmi, rec, err] = match &r.outcome {
            Ok(m) => [num(m.p_acc), num(m.p_f), num(m.nmi), num(m.recall), String::new()],
            Err(e) => [String::new(), String::new(), String::new(), String::new(), e.clone()],
        };
        w.write_record([
            r.agent.code(),
            r.reward.code(),
            &r.k.to_string(),
            &r.offset.to_string(),
            &p_acc,
            &p_f,
            &nmi,
            &rec,
            &err,
        ])
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    out.push_str(std::str::from_utf8(&body).expect("CSV of UTF-8 fields"));
    Ok(out)
}

pub fn cmd_ablate(cfg: &RunConfig, workers: usize) -> Result<PathBuf> {
    let out = required(&cfg.paths.out, "output directory (--out)")?;
    let set = load_dataset(cfg)?;
    let rows = run_ablation(&set, cfg, workers)?;
    let path = out.join(ABLATION);
    write_atomic(&path, ablation_csv(&rows, cfg)?.as_bytes())?;
    Ok(path)
}
