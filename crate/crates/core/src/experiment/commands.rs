use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::netgraph::{load_network, save_network};
use crate::phenotype::{compute_ece, EvalResult, Evaluator, Genotype, SupernetEvaluator, DEFAULT_ECE_BINS};
use crate::search::{
    compare_groups, read_archive_csv, read_hv_csv, read_runlog, run_search, write_archive_csv,
    write_hv_csv, write_runlog, Algorithm, GroupComparison, ObjectivePoint, RunOutcome, Termination,
};
use crate::stitcher::{
    acyclic_max_matching, build_supernetwork, find_candidates, load_supernet, save_supernet, train_stitches,
    StitchReport, Supernetwork,
};
use crate::synthdata::{
    gen_images, gen_tabular, load_dataset, preset_parents, save_dataset, train_parent, Dataset, Split,
};

pub const DATASET_FILE: &str = "dataset.data";
pub const PARENT_FILES: [&str; 2] = ["parent_a.net", "parent_b.net"];
pub const SUPERNET_FILE: &str = "supernet.supernet";
pub const TRAINED_SUPERNET_FILE: &str = "trained.supernet";
pub const TIMING_FILE: &str = "timing.json";

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn require(path: &Path, producer: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("{} is missing; run `{producer}` first", path.display())))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

pub fn load_experiment_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let path = out_path(cfg, DATASET_FILE);
    require(&path, "gen-data")?;
    load_dataset(path)
}

pub fn load_trained_supernet(cfg: &ExperimentConfig) -> Result<Supernetwork> {
    let path = out_path(cfg, TRAINED_SUPERNET_FILE);
    require(&path, "train-stitches")?;
    load_supernet(path)
}

pub fn gen_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    ensure_dir(&cfg.output_dir)?;
    let d = &cfg.data;
    let ds = match d.kind.tabular() {
        Some(task) => gen_tabular(d.seed, d.samples, task)?,
        None => gen_images(d.seed, d.samples, d.classes)?,
    };
    let path = out_path(cfg, DATASET_FILE);
    save_dataset(&ds, &path)?;
    load_dataset(&path)?.validate()?;
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentSummary {
    pub name: String,
    pub madds: u64,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub final_loss: f32,
}

pub fn train_parents(cfg: &ExperimentConfig) -> Result<Vec<ParentSummary>> {
    let ds = load_experiment_dataset(cfg)?;
    let (a, b) = preset_parents(cfg.parents.preset, &ds.task(), cfg.parents.seed)?;
    let mut out = Vec::new();
    for (graph, file) in [a, b].iter().zip(PARENT_FILES) {
        let trained = train_parent(graph, &ds, &cfg.parents.train)?;
        let path = out_path(cfg, file);
        save_network(&trained.graph, &path)?;
        load_network(&path)?;
        out.push(ParentSummary {
            name: trained.graph.name().to_string(),
            madds: trained.graph.network_madds(),
            train_accuracy: trained.train_accuracy,
            validation_accuracy: trained.validation_accuracy,
            final_loss: trained.losses.last().copied().unwrap_or(f32::NAN),
        });
    }
    write_json(&out_path(cfg, "parents.json"), &out)?;
    Ok(out)
}

/// Wall-clock seconds per supernetwork construction step. Informational only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub candidates: f64,
    pub matching: f64,
    pub construction: f64,
    pub stitch_training: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StitchSummary {
    pub candidates: usize,
    pub matches: usize,
    pub genotype_len: usize,
    pub matching_timed_out: bool,
    pub expansions: u64,
    pub timing: Timing,
}

pub fn stitch(cfg: &ExperimentConfig) -> Result<StitchSummary> {
    let [pa, pb] = PARENT_FILES.map(|f| out_path(cfg, f));
    require(&pa, "train-parents")?;
    require(&pb, "train-parents")?;
    let (a, b) = (load_network(&pa)?, load_network(&pb)?);

    let t0 = Instant::now();
    let candidates = find_candidates(&a, &b, &cfg.stitch.candidates);
    let t1 = Instant::now();
    let outcome = acyclic_max_matching(&a, &b, &candidates, cfg.stitch.matching_budget);
    let t2 = Instant::now();
    let supernet = build_supernetwork(&a, &b, &outcome.plan, cfg.stitch.build_seed)?;
    let t3 = Instant::now();

    let path = out_path(cfg, SUPERNET_FILE);
    save_supernet(&supernet, &path)?;
    load_supernet(&path)?;
    let timing = Timing {
        candidates: (t1 - t0).as_secs_f64(),
        matching: (t2 - t1).as_secs_f64(),
        construction: (t3 - t2).as_secs_f64(),
        stitch_training: None,
    };
    write_json(&out_path(cfg, TIMING_FILE), &timing)?;
    Ok(StitchSummary {
        candidates: candidates.len(),
        matches: outcome.plan.len(),
        genotype_len: supernet.genotype_len(),
        matching_timed_out: outcome.timed_out,
        expansions: outcome.expansions,
        timing,
    })
}

pub fn train_stitches_cmd(cfg: &ExperimentConfig) -> Result<(StitchReport, f64)> {
    let path = out_path(cfg, SUPERNET_FILE);
    require(&path, "stitch")?;
    let supernet = load_supernet(&path)?;
    let ds = load_experiment_dataset(cfg)?;
    let start = Instant::now();
    let (trained, report) = train_stitches(&supernet, &ds, &cfg.stitch.train)?;
    let secs = start.elapsed().as_secs_f64();
    let out = out_path(cfg, TRAINED_SUPERNET_FILE);
    save_supernet(&trained, &out)?;
    load_supernet(&out)?;
    write_json(&out_path(cfg, "stitch_report.json"), &report)?;
    let timing_path = out_path(cfg, TIMING_FILE);
    let mut timing: Timing = if timing_path.exists() {
        read_json(&timing_path)?
    } else {
        Timing::default()
    };
    timing.stitch_training = Some(secs);
    write_json(&timing_path, &timing)?;
    Ok((report, secs))
}

/// Evaluator for the configured search split and sample limit.
pub fn search_evaluator(cfg: &ExperimentConfig) -> Result<SupernetEvaluator> {
    let supernet = Arc::new(load_trained_supernet(cfg)?);
    let ds = load_experiment_dataset(cfg)?;
    SupernetEvaluator::new(supernet, &ds, Split::Validation, cfg.search.eval_limit)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub population_size: usize,
    pub evaluations: usize,
    pub skip_fraction: f64,
    pub termination: Termination,
    pub archive_size: usize,
    pub final_hypervolume: f64,
}

pub fn run_dir(cfg: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> PathBuf {
    cfg.output_dir.join("runs").join(algorithm.name()).join(format!("seed{seed}"))
}

/// Writes the run log, archive, hypervolume trace and summary of one run into `dir`.
pub fn write_run(dir: &Path, out: &RunOutcome, summary: &RunSummary) -> Result<()> {
    ensure_dir(dir)?;
    write_runlog(&dir.join("runlog.jsonl"), &out.log)?;
    write_archive_csv(&dir.join("archive.csv"), &out.archive)?;
    write_hv_csv(&dir.join("hv.csv"), &out.hv_trace)?;
    write_json(&dir.join("summary.json"), summary)?;
    if read_runlog(&dir.join("runlog.jsonl"))?.len() != out.log.len()
        || read_archive_csv(&dir.join("archive.csv"))?.len() != out.archive.len()
    {
        return Err(Error::format(dir.display().to_string(), "run artifacts failed to read back"));
    }
    Ok(())
}

/// One search with the configured settings; artifacts go to `dir`.
pub fn search_into(cfg: &ExperimentConfig, evaluator: &dyn Evaluator, seed: u64, dir: &Path) -> Result<RunSummary> {
    let rc = cfg.search.run_config(seed);
    let out = run_search(evaluator, &rc)?;
    let summary = RunSummary {
        algorithm: rc.algorithm,
        seed,
        population_size: rc.population_size,
        evaluations: out.evaluations(),
        skip_fraction: out.skip_fraction(),
        termination: out.termination,
        archive_size: out.archive.len(),
        final_hypervolume: out.final_hypervolume(),
    };
    write_run(dir, &out, &summary)?;
    Ok(summary)
}

pub fn search(cfg: &ExperimentConfig, seed: u64) -> Result<RunSummary> {
    let ev = search_evaluator(cfg)?;
    search_into(cfg, &ev, seed, &run_dir(cfg, cfg.search.algorithm, seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub population_size: usize,
    pub final_hypervolume: f64,
    pub evaluations: usize,
    pub skip_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub selected: usize,
}

/// Index of the best hypervolume, ties to the smallest population.
pub fn select_population(rows: &[SweepRow]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &rows[b];
                r.final_hypervolume > cur.final_hypervolume
                    || (r.final_hypervolume == cur.final_hypervolume && r.population_size < cur.population_size)
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// One run per population size with the first configured seed; the winner is
/// written back as `selected.toml`, a copy of the config with that size.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    let ev = search_evaluator(cfg)?;
    let seed = cfg.seeds[0];
    let algo = cfg.search.algorithm;
    let base = cfg.output_dir.join("sweep").join(algo.name());
    let mut rows = Vec::new();
    for &n in &cfg.sweep.sizes {
        let mut c = cfg.clone();
        c.search.population_size = n;
        let s = search_into(&c, &ev, seed, &base.join(format!("pop{n}")))?;
        rows.push(SweepRow {
            population_size: n,
            final_hypervolume: s.final_hypervolume,
            evaluations: s.evaluations,
            skip_fraction: s.skip_fraction,
        });
    }
    let selected = rows[select_population(&rows).expect("sizes validated non-empty")].population_size;
    crate::search::write_csv(&base.join("sweep.csv"), &rows)?;
    let mut chosen = cfg.clone();
    chosen.search.population_size = selected;
    std::fs::write(base.join("selected.toml"), chosen.to_toml())?;
    Ok(SweepSummary { rows, selected })
}

/// One network in the report: a reference or an archive member of some run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub run: String,
    pub genotype: Genotype,
    pub stitches: usize,
    pub madds: u64,
    pub validation_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub ece: f64,
    pub validation_front: bool,
    pub test_front: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvSummaryRow {
    pub run: String,
    pub evaluations: usize,
    pub skip_fraction: f64,
    pub archive_size: usize,
    pub final_hypervolume: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub runs: Vec<HvSummaryRow>,
}

impl Report {
    pub fn reference(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.run == "reference" && r.label == label)
    }
}

pub const REFERENCE_LABELS: [&str; 3] = ["parent_a", "parent_b", "ensemble"];

/// Flags the points of `pts` that no other point dominates (duplicates all survive).
fn front_mask(pts: &[ObjectivePoint]) -> Vec<bool> {
    pts.iter()
        .map(|p| {
            !pts.iter()
                .any(|q| q.weakly_dominates(p) && !q.same_objectives(p))
        })
        .collect()
}

/// Finds every directory under `root` (inclusive) that holds an `archive.csv`.
pub fn find_run_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join("archive.csv").exists() {
            found.push(dir.clone());
        }
        for entry in std::fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            }
        }
    }
    found.sort();
    Ok(found)
}

/// Re-scores archive members and the three references. Validation numbers use
/// the search's sample limit so they match the archives; with `test_split` the
/// full test split is scored as well, and calibration is measured there.
pub fn report(cfg: &ExperimentConfig, run_dirs: &[PathBuf], test_split: bool) -> Result<Report> {
    if run_dirs.is_empty() {
        return Err(Error::Config("no run directories given to report".into()));
    }
    let supernet = Arc::new(load_trained_supernet(cfg)?);
    let ds = load_experiment_dataset(cfg)?;
    let val = SupernetEvaluator::new(supernet.clone(), &ds, Split::Validation, cfg.search.eval_limit)?
        .keep_probabilities(!test_split);
    let test = if test_split {
        Some(SupernetEvaluator::new(supernet.clone(), &ds, Split::Test, None)?.keep_probabilities(true))
    } else {
        None
    };
    let reference = val.reference_madds();
    let l = supernet.genotype_len();

    let mut entries: Vec<(String, String, Genotype)> = REFERENCE_LABELS
        .iter()
        .enumerate()
        .map(|(i, &lab)| (lab.to_string(), "reference".to_string(), Genotype::reference(l, i as u8)))
        .collect();
    let mut runs = Vec::new();
    for dir in run_dirs {
        let archive = dir.join("archive.csv");
        require(&archive, "search")?;
        let name = dir
            .strip_prefix(&cfg.output_dir)
            .unwrap_or(dir)
            .display()
            .to_string();
        for (k, row) in read_archive_csv(&archive)?.into_iter().enumerate() {
            entries.push((format!("member{k}"), name.clone(), row.genotype));
        }
        let log = read_runlog(&dir.join("runlog.jsonl"))?;
        let hv = read_hv_csv(&dir.join("hv.csv"))?;
        let archive_size = read_archive_csv(&archive)?.len();
        runs.push(HvSummaryRow {
            run: name,
            evaluations: log.len(),
            skip_fraction: log.iter().filter(|r| r.skipped).count() as f64 / log.len().max(1) as f64,
            archive_size,
            final_hypervolume: hv.last().map_or(0.0, |r| r.hypervolume),
        });
    }

    let mut cache: BTreeMap<String, (EvalResult, Option<EvalResult>)> = BTreeMap::new();
    for (_, _, g) in &entries {
        let key = g.to_string();
        if cache.contains_key(&key) {
            continue;
        }
        let v = val.evaluate(g)?;
        let t = test.as_ref().map(|t| t.evaluate(g)).transpose()?;
        cache.insert(key, (v, t));
    }

    let mut rows: Vec<ReportRow> = Vec::new();
    for (label, run, g) in entries {
        let (v, t) = &cache[&g.to_string()];
        let (probs, labels) = match t {
            Some(t) => (t.probabilities.as_ref(), test.as_ref().unwrap().labels()),
            None => (v.probabilities.as_ref(), val.labels()),
        };
        let ece = compute_ece(probs.expect("probabilities kept"), labels, DEFAULT_ECE_BINS)?.ece;
        rows.push(ReportRow {
            label,
            run,
            stitches: g.stitches_used(),
            genotype: g,
            madds: v.madds,
            validation_accuracy: v.accuracy,
            test_accuracy: t.as_ref().map(|t| t.accuracy),
            ece,
            validation_front: false,
            test_front: t.as_ref().map(|_| false),
        });
    }
    let vpts: Vec<ObjectivePoint> = rows
        .iter()
        .map(|r| ObjectivePoint::new(r.validation_accuracy, r.madds, reference))
        .collect();
    for (r, on) in rows.iter_mut().zip(front_mask(&vpts)) {
        r.validation_front = on;
    }
    if test_split {
        let tpts: Vec<ObjectivePoint> = rows
            .iter()
            .map(|r| ObjectivePoint::new(r.test_accuracy.unwrap(), r.madds, reference))
            .collect();
        for (r, on) in rows.iter_mut().zip(front_mask(&tpts)) {
            r.test_front = Some(on);
        }
    }

    let dir = cfg.output_dir.join("report");
    ensure_dir(&dir)?;
    crate::search::write_csv(&dir.join("report.csv"), &rows)?;
    let val_front: Vec<&ReportRow> = rows.iter().filter(|r| r.validation_front).collect();
    crate::search::write_csv(&dir.join("validation_front.csv"), &val_front)?;
    if test_split {
        let test_front: Vec<&ReportRow> = rows.iter().filter(|r| r.test_front == Some(true)).collect();
        crate::search::write_csv(&dir.join("test_front.csv"), &test_front)?;
    }
    crate::search::write_csv(&dir.join("hv_summary.csv"), &runs)?;
    Ok(Report { rows, runs })
}

/// Final hypervolume of every run below `dir`.
pub fn final_hypervolumes(dir: &Path) -> Result<Vec<f64>> {
    find_run_dirs(dir)?
        .iter()
        .map(|d| Ok(read_hv_csv(&d.join("hv.csv"))?.last().map_or(0.0, |r| r.hypervolume)))
        .collect()
}

/// Compares per-algorithm directories of runs and writes a plain-text table to `out`.
pub fn stats(group_dirs: &[PathBuf], alpha: f64, out: &Path) -> Result<GroupComparison> {
    let mut groups = Vec::new();
    for d in group_dirs {
        let name = d
            .file_name()
            .map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned());
        let hv = final_hypervolumes(d)?;
        if hv.len() < 2 {
            return Err(Error::Invalid(format!("{} holds {} runs; need ≥ 2 seeds", d.display(), hv.len())));
        }
        groups.push((name, hv));
    }
    let cmp = compare_groups(&groups, alpha)?;
    std::fs::write(out, format_stats(&cmp))?;
    Ok(cmp)
}

pub fn format_stats(cmp: &GroupComparison) -> String {
    let mut s = format!(
        "best: {} (median hypervolume {:.6})\nalpha: {}, Holm-corrected Mann-Whitney U\n\n",
        cmp.best, cmp.best_median, cmp.alpha
    );
    s.push_str(&format!(
        "{:<12} {:>12} {:>8} {:>10} {:>6} {:>12}\n",
        "group", "median", "U", "p", "exact", "significant"
    ));
    for r in &cmp.rows {
        s.push_str(&format!(
            "{:<12} {:>12.6} {:>8.1} {:>10.4} {:>6} {:>12}\n",
            r.group, r.median, r.u, r.p_value, r.exact, r.significant
        ));
    }
    s
}
