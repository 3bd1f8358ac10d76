use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use super::commands::{
    find_run_dirs, gen_data, report, search, stats, stitch, sweep, train_parents, train_stitches_cmd,
};
use super::config::{DataKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::search::Algorithm;
use crate::stitcher::StitchMethod;
use crate::synthdata::Preset;

/// Recombine two trained networks and search the space of stitched offspring.
///
/// Settings come from built-in defaults, then `--config`, then flags.
#[derive(Debug, Parser)]
#[command(name = "stitchnet", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic dataset.
    GenData {
        #[arg(long, value_parser = parse_kind)]
        kind: Option<DataKind>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the two parent networks of a preset.
    TrainParents {
        #[arg(long, value_parser = parse_from_str::<Preset>)]
        preset: Option<Preset>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Match layers and build the supernetwork.
    Stitch {
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Fit every stitch to its recipient's activations.
    TrainStitches {
        #[arg(long, value_parser = parse_from_str::<StitchMethod>)]
        method: Option<StitchMethod>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one search.
    Search(SearchArgs),
    /// Run one search per population size and keep the best.
    Sweep {
        #[command(flatten)]
        search: SearchArgs,
        /// Comma-separated population sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Re-score archives, rebuild fronts and measure calibration.
    Report {
        /// Run directories, or parents of them; defaults to `<out>/runs`.
        #[arg(long, num_args = 1..)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        test_split: bool,
    },
    /// Compare per-algorithm run directories.
    Stats {
        /// One directory per algorithm, each holding one run per seed.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, value_parser = parse_from_str::<Algorithm>)]
    pub algo: Option<Algorithm>,
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    /// Seed of a single run; defaults to every configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, conflicts_with = "deterministic")]
    pub workers: Option<usize>,
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub eval_limit: Option<usize>,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kind(s: &str) -> std::result::Result<DataKind, String> {
    match s {
        "images" => Ok(DataKind::Images),
        "two_spirals" => Ok(DataKind::TwoSpirals),
        "rings" => Ok(DataKind::Rings),
        _ => Err(format!("unknown data kind {s:?} (expected images, two_spirals or rings)")),
    }
}

impl SearchArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let s = &mut cfg.search;
        if let Some(a) = self.algo {
            s.algorithm = a;
        }
        if let Some(n) = self.pop {
            s.population_size = n;
        }
        if let Some(e) = self.budget {
            s.budget = e;
        }
        if let Some(w) = self.workers {
            s.workers = w;
            s.deterministic = false;
        }
        if self.deterministic {
            s.deterministic = true;
        }
        if let Some(t) = self.time_limit {
            s.time_limit_secs = Some(t);
        }
        if let Some(l) = self.eval_limit {
            s.eval_limit = Some(l);
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
    }
}

/// Resolves the effective configuration for a command.
pub fn resolve_config(common: &Common, command: &Command) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    match command {
        Command::GenData {
            kind,
            samples,
            classes,
            seed,
        } => {
            let d = &mut cfg.data;
            d.kind = kind.unwrap_or(d.kind);
            d.samples = samples.unwrap_or(d.samples);
            d.classes = classes.unwrap_or(d.classes);
            d.seed = seed.unwrap_or(d.seed);
        }
        Command::TrainParents { preset, seed, budget } => {
            let p = &mut cfg.parents;
            p.preset = preset.unwrap_or(p.preset);
            p.seed = seed.unwrap_or(p.seed);
            p.train.sample_budget = budget.unwrap_or(p.train.sample_budget);
        }
        Command::Stitch { stride } => {
            cfg.stitch.candidates.stride = stride.unwrap_or(cfg.stitch.candidates.stride);
        }
        Command::TrainStitches { method, seed } => {
            let t = &mut cfg.stitch.train;
            t.method = method.unwrap_or(t.method);
            t.seed = seed.unwrap_or(t.seed);
        }
        Command::Search(args) => args.apply(&mut cfg),
        Command::Sweep { search, sizes } => {
            search.apply(&mut cfg);
            if let Some(s) = sizes {
                cfg.sweep.sizes = s.clone();
            }
            // The sweep replaces the population size, so each size is what must validate.
            for &n in &cfg.sweep.sizes {
                let mut c = cfg.search.clone();
                c.population_size = n;
                c.run_config(0).validate()?;
            }
            if let Some(&n) = cfg.sweep.sizes.iter().min() {
                cfg.search.population_size = n;
            }
        }
        Command::Report { .. } | Command::Stats { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` and runs the command, printing a short summary to stdout.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Error::Config(e.to_string())),
    };
    let cfg = resolve_config(&cli.common, &cli.command)?;
    match &cli.command {
        Command::GenData { .. } => {
            let ds = gen_data(&cfg)?;
            println!(
                "{}: {} samples, {} classes, split {}/{}/{}",
                ds.name,
                ds.len(),
                ds.num_classes,
                ds.train.len(),
                ds.validation.len(),
                ds.test.len()
            );
        }
        Command::TrainParents { .. } => {
            for p in train_parents(&cfg)? {
                println!(
                    "{}: {} madds, train acc {:.4}, validation acc {:.4}",
                    p.name, p.madds, p.train_accuracy, p.validation_accuracy
                );
            }
        }
        Command::Stitch { .. } => {
            let s = stitch(&cfg)?;
            println!(
                "{} candidates, {} matches, genotype length {}{}",
                s.candidates,
                s.matches,
                s.genotype_len,
                if s.matching_timed_out { " (matching hit its expansion budget)" } else { "" }
            );
            println!(
                "timing: candidates {:.3}s, matching {:.3}s, construction {:.3}s",
                s.timing.candidates, s.timing.matching, s.timing.construction
            );
        }
        Command::TrainStitches { .. } => {
            let (report, secs) = train_stitches_cmd(&cfg)?;
            for (id, st) in &report.stitches {
                println!("{id}: mse {:.6} -> {:.6}", st.initial_mse, st.final_mse);
            }
            println!("timing: stitch-training {secs:.3}s");
        }
        Command::Search(_) => {
            for &seed in &cfg.seeds {
                let s = search(&cfg, seed)?;
                println!(
                    "{} seed {}: {} evaluations, skip fraction {:.4}, terminated by {}, hypervolume {:.6}, archive {}",
                    s.algorithm,
                    s.seed,
                    s.evaluations,
                    s.skip_fraction,
                    s.termination,
                    s.final_hypervolume,
                    s.archive_size
                );
            }
        }
        Command::Sweep { .. } => {
            let s = sweep(&cfg)?;
            println!("{:>6} {:>12} {:>8}", "pop", "hypervolume", "skips");
            for r in &s.rows {
                println!("{:>6} {:>12.6} {:>8.4}", r.population_size, r.final_hypervolume, r.skip_fraction);
            }
            println!("selected population size {}", s.selected);
        }
        Command::Report { runs, test_split } => {
            let roots = if runs.is_empty() {
                vec![cfg.output_dir.join("runs")]
            } else {
                runs.clone()
            };
            let mut dirs = Vec::new();
            for r in &roots {
                dirs.extend(find_run_dirs(r)?);
            }
            let rep = report(&cfg, &dirs, *test_split)?;
            for r in rep.rows.iter().filter(|r| r.run == "reference") {
                println!(
                    "{:<9} acc {:.4} madds {} ece {:.4}",
                    r.label, r.validation_accuracy, r.madds, r.ece
                );
            }
            for h in &rep.runs {
                println!("{}: hypervolume {:.6}, skip fraction {:.4}", h.run, h.final_hypervolume, h.skip_fraction);
            }
            let front = rep.rows.iter().filter(|r| r.validation_front).count();
            println!("{} networks on the combined validation front", front);
        }
        Command::Stats { runs, alpha } => {
            std::fs::create_dir_all(&cfg.output_dir)?;
            let out = cfg.output_dir.join("stats.txt");
            let cmp = stats(runs, *alpha, &out)?;
            print!("{}", super::commands::format_stats(&cmp));
        }
    }
    Ok(())
}
