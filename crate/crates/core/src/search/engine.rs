use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::archive::Archive;
use super::gom::{gom_accept, GomApplication, Individual};
use super::linkage::{build_linkage_tree, mutual_information_matrix};
use super::objective::{assign_weights, steering_threshold, weight_grid, Weight};
use super::variation::{ga_generate, ga_replace, knn_neighborhood, sample_kernel_size};
use crate::error::{Error, Result};
use crate::phenotype::{biased_sample, maybe_skip, EvalResult, Evaluator, Genotype};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ga,
    Gomea,
    LkGomea,
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ga, Algorithm::Gomea, Algorithm::LkGomea, Algorithm::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ga => "ga",
            Algorithm::Gomea => "gomea",
            Algorithm::LkGomea => "lk-gomea",
            Algorithm::Random => "random",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?} (expected ga, gomea, lk-gomea or random)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub population_size: usize,
    pub budget: usize,
    pub time_limit_secs: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    /// Sequential FIFO evaluation with zeroed wall-clock fields; bit-reproducible.
    pub deterministic: bool,
    /// Minimum linkage-kernel neighbourhood size.
    pub lk_min_neighborhood: usize,
    pub mutation: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: Algorithm::Ga,
            population_size: 32,
            budget: 2000,
            time_limit_secs: None,
            seed: 0,
            workers: 1,
            deterministic: true,
            lk_min_neighborhood: 8,
            mutation: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config(format!("population size must be ≥ 2, got {}", self.population_size)));
        }
        if self.budget < self.population_size {
            return Err(Error::Config(format!(
                "budget {} is smaller than the population {}",
                self.budget, self.population_size
            )));
        }
        if self.workers == 0 || self.lk_min_neighborhood == 0 {
            return Err(Error::Config("workers and the LK neighbourhood size must be ≥ 1".into()));
        }
        if matches!(self.time_limit_secs, Some(t) if !(t > 0.0)) {
            return Err(Error::Config("time limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    Time,
    Converged,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Budget => "budget",
            Termination::Time => "time",
            Termination::Converged => "converged",
        })
    }
}

/// One line of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub eval_index: usize,
    pub algo: Algorithm,
    pub seed: u64,
    pub genotype: Genotype,
    pub accuracy: f64,
    pub madds: u64,
    pub skipped: bool,
    pub feasible: bool,
    pub threshold: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub log: Vec<LogRecord>,
    pub archive: Archive,
    /// `(eval_index, hypervolume)` after every completed evaluation.
    pub hv_trace: Vec<(usize, f64)>,
    pub termination: Termination,
    pub population: Vec<Individual>,
    pub reference_madds: u64,
}

impl RunOutcome {
    pub fn evaluations(&self) -> usize {
        self.log.len()
    }

    pub fn skip_fraction(&self) -> f64 {
        if self.log.is_empty() {
            return 0.0;
        }
        self.log.iter().filter(|r| r.skipped).count() as f64 / self.log.len() as f64
    }

    pub fn final_hypervolume(&self) -> f64 {
        self.archive.hypervolume()
    }
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Init,
    Sample,
    Offspring { p1: usize, p2: usize },
    Mixing,
}

struct Request {
    owner: usize,
    genotype: Genotype,
    skip: Option<EvalResult>,
    kind: Kind,
}

/// Per-loop state of the mixing algorithms.
#[derive(Default)]
struct MixingLoop {
    app: Option<GomApplication>,
    donors: Vec<usize>,
}

struct Engine<'e> {
    cfg: &'e RunConfig,
    n: usize,
    alphabet: Vec<u8>,
    reference: u64,
    rng: ChaCha8Rng,
    pop: Vec<Option<Individual>>,
    initialized: usize,
    weights: Vec<Weight>,
    assignment: Vec<usize>,
    completed: usize,
    since_reassign: usize,
    applications: usize,
    tree: Vec<Vec<usize>>,
    loops: Vec<MixingLoop>,
    changed: bool,
    archive: Archive,
    log: Vec<LogRecord>,
    hv_trace: Vec<(usize, f64)>,
    start: Instant,
}

impl<'e> Engine<'e> {
    fn new(evaluator: &'e dyn Evaluator, cfg: &'e RunConfig) -> Self {
        let n = cfg.population_size;
        Engine {
            cfg,
            n,
            alphabet: evaluator.alphabet(),
            reference: evaluator.reference_madds(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            pop: vec![None; n],
            initialized: 0,
            weights: weight_grid(n),
            assignment: (0..n).collect(),
            completed: 0,
            since_reassign: 0,
            applications: 0,
            tree: Vec::new(),
            loops: (0..n).map(|_| MixingLoop::default()).collect(),
            changed: false,
            archive: Archive::new(),
            log: Vec::new(),
            hv_trace: Vec::new(),
            start: Instant::now(),
        }
    }

    fn ready(&self) -> bool {
        self.initialized == self.n
    }

    fn threshold(&self) -> f64 {
        steering_threshold(self.completed, self.cfg.budget)
    }

    fn member(&self, i: usize) -> &Individual {
        self.pop[i].as_ref().expect("population initialized")
    }

    fn weight_of(&self, i: usize) -> Weight {
        self.weights[self.assignment[i]]
    }

    /// Parent A, parent B and the ensemble first, then biased samples.
    fn initial_genotype(&mut self, i: usize) -> Genotype {
        let l = self.alphabet.len();
        match i {
            0..=2 => Genotype::reference(l, i as u8),
            _ => biased_sample(l, &mut self.rng),
        }
    }

    fn reassign(&mut self) {
        let points: Vec<_> = (0..self.n).map(|i| self.member(i).point).collect();
        self.assignment = assign_weights(&points, &self.weights, &mut self.rng);
    }

    fn rebuild_tree(&mut self) {
        let sample: Vec<&Genotype> = (0..self.n).map(|i| &self.member(i).genotype).collect();
        self.tree = build_linkage_tree(&mutual_information_matrix(&sample, &self.alphabet));
    }

    fn on_initialized(&mut self) {
        self.reassign();
        if self.cfg.algorithm == Algorithm::Gomea {
            self.rebuild_tree();
        }
    }

    /// Starts a mixing application for loop `i`; false when its neighbourhood has converged.
    fn start_application(&mut self, i: usize) -> bool {
        let (subsets, donors) = if self.cfg.algorithm == Algorithm::LkGomea {
            let k = sample_kernel_size(self.n, self.cfg.lk_min_neighborhood, &mut self.rng);
            let genotypes: Vec<Genotype> = (0..self.n).map(|j| self.member(j).genotype.clone()).collect();
            let hood = knn_neighborhood(&genotypes, i, k);
            if hood.iter().all(|&j| genotypes[j] == genotypes[i]) {
                return false;
            }
            let sample: Vec<&Genotype> = hood.iter().map(|&j| &genotypes[j]).collect();
            let tree = build_linkage_tree(&mutual_information_matrix(&sample, &self.alphabet));
            (tree, hood[1..].to_vec())
        } else {
            (self.tree.clone(), (0..self.n).filter(|&j| j != i).collect())
        };
        self.loops[i] = MixingLoop {
            app: Some(GomApplication::new(subsets, &mut self.rng)),
            donors,
        };
        true
    }

    fn finish_application(&mut self) {
        self.applications += 1;
        if self.applications % self.n == 0 {
            self.reassign();
            if self.cfg.algorithm == Algorithm::Gomea {
                self.rebuild_tree();
            }
        }
    }

    fn next_request(&mut self, i: usize) -> Result<Option<Request>> {
        if !self.ready() {
            if self.pop[i].is_some() {
                return Ok(None);
            }
            let g = self.initial_genotype(i);
            return Ok(Some(Request {
                owner: i,
                genotype: g,
                skip: None,
                kind: Kind::Init,
            }));
        }
        match self.cfg.algorithm {
            Algorithm::Random => {
                let g = biased_sample(self.alphabet.len(), &mut self.rng);
                Ok(Some(Request {
                    owner: i,
                    genotype: g,
                    skip: None,
                    kind: Kind::Sample,
                }))
            }
            Algorithm::Ga => {
                use rand::Rng;
                let p1 = self.rng.gen_range(0..self.n);
                let mut p2 = self.rng.gen_range(0..self.n - 1);
                if p2 >= p1 {
                    p2 += 1;
                }
                let (a, b) = (self.pop[p1].as_ref().unwrap(), self.pop[p2].as_ref().unwrap());
                let child = ga_generate(&a.genotype, &b.genotype, &self.alphabet, self.cfg.mutation, &mut self.rng);
                let skip = match maybe_skip(&a.result, &a.genotype, &child)? {
                    Some(r) => Some(r),
                    None => maybe_skip(&b.result, &b.genotype, &child)?,
                };
                Ok(Some(Request {
                    owner: i,
                    genotype: child,
                    skip,
                    kind: Kind::Offspring { p1, p2 },
                }))
            }
            Algorithm::Gomea | Algorithm::LkGomea => loop {
                if self.loops[i].app.is_none() && !self.start_application(i) {
                    return Ok(None);
                }
                let cur = self.pop[i].as_ref().expect("population initialized");
                let donors: Vec<&Genotype> = self.loops[i]
                    .donors
                    .iter()
                    .map(|&j| &self.pop[j].as_ref().unwrap().genotype)
                    .collect();
                let app = self.loops[i].app.as_mut().unwrap();
                if let Some(cand) = app.next_candidate(&cur.genotype, &donors, &mut self.rng) {
                    let skip = maybe_skip(&cur.result, &cur.genotype, &cand)?;
                    return Ok(Some(Request {
                        owner: i,
                        genotype: cand,
                        skip,
                        kind: Kind::Mixing,
                    }));
                }
                let proposals = app.proposals;
                self.loops[i].app = None;
                self.finish_application();
                if proposals == 0 {
                    return Ok(None);
                }
            },
        }
    }

    fn complete(&mut self, req: Request, result: EvalResult) {
        let t = self.threshold();
        let wall_ms = if self.cfg.deterministic {
            0
        } else {
            self.start.elapsed().as_millis() as u64
        };
        self.log.push(LogRecord {
            eval_index: self.completed,
            algo: self.cfg.algorithm,
            seed: self.cfg.seed,
            genotype: req.genotype.clone(),
            accuracy: result.accuracy,
            madds: result.madds,
            skipped: result.skipped,
            feasible: result.accuracy >= t,
            threshold: t,
            wall_ms,
        });
        let ind = Individual::new(req.genotype, result, self.reference);
        self.archive.update(&ind.genotype, ind.point, t);
        self.completed += 1;
        self.archive.prune(self.threshold());
        self.hv_trace.push((self.completed - 1, self.archive.hypervolume()));
        match req.kind {
            Kind::Init => {
                self.pop[req.owner] = Some(ind);
                self.initialized += 1;
                if self.ready() {
                    self.on_initialized();
                }
            }
            Kind::Sample => {}
            Kind::Offspring { p1, p2 } => {
                let (w1, w2) = (self.weight_of(p1), self.weight_of(p2));
                let (a, b) = (self.member(p1).point, self.member(p2).point);
                let parents = [(&a, &w1), (&b, &w2)];
                if let Some(k) = ga_replace(&ind.point, parents, t, &mut self.rng) {
                    self.pop[[p1, p2][k]] = Some(ind);
                    self.changed = true;
                }
                self.since_reassign += 1;
                if self.since_reassign == self.n {
                    self.since_reassign = 0;
                    self.reassign();
                }
            }
            Kind::Mixing => {
                let w = self.weight_of(req.owner);
                let cur = self.member(req.owner);
                if gom_accept(&ind.point, &cur.point, t, &w) {
                    if ind.genotype != cur.genotype {
                        self.changed = true;
                    }
                    self.pop[req.owner] = Some(ind);
                }
            }
        }
    }
}

/// Where evaluation requests go and completions come back from.
trait Service {
    fn submit(&mut self, ticket: u64, g: Genotype);
    fn next(&mut self) -> Option<(u64, Result<EvalResult>)>;
}

struct Sequential<'e> {
    evaluator: &'e dyn Evaluator,
    queue: VecDeque<(u64, Genotype)>,
}

impl Service for Sequential<'_> {
    fn submit(&mut self, ticket: u64, g: Genotype) {
        self.queue.push_back((ticket, g));
    }

    fn next(&mut self) -> Option<(u64, Result<EvalResult>)> {
        let (ticket, g) = self.queue.pop_front()?;
        Some((ticket, self.evaluator.evaluate(&g)))
    }
}

struct Pool {
    jobs: Option<Sender<(u64, Genotype)>>,
    results: Receiver<(u64, Result<EvalResult>)>,
}

impl Service for Pool {
    fn submit(&mut self, ticket: u64, g: Genotype) {
        if let Some(tx) = &self.jobs {
            tx.send((ticket, g)).expect("workers outlive the engine loop");
        }
    }

    fn next(&mut self) -> Option<(u64, Result<EvalResult>)> {
        self.results.recv().ok()
    }
}

fn drive(engine: &mut Engine, service: &mut dyn Service) -> Result<Termination> {
    let cfg = engine.cfg;
    let limit = cfg.time_limit_secs.map(Duration::from_secs_f64);
    let mut ready: VecDeque<usize> = (0..engine.n).collect();
    let mut idle = vec![false; engine.n];
    let mut pending: HashMap<u64, Request> = HashMap::new();
    let mut next_ticket = 0u64;
    loop {
        while engine.completed + pending.len() < cfg.budget {
            let Some(i) = ready.pop_front() else { break };
            let was_ready = engine.ready();
            match engine.next_request(i)? {
                None => idle[i] = was_ready,
                Some(mut req) => match req.skip.take() {
                    Some(r) => {
                        engine.complete(req, r);
                        ready.push_back(i);
                    }
                    None => {
                        service.submit(next_ticket, req.genotype.clone());
                        pending.insert(next_ticket, req);
                        next_ticket += 1;
                    }
                },
            }
            if engine.changed {
                engine.changed = false;
                wake(&mut idle, &mut ready);
            }
        }
        if pending.is_empty() {
            return Ok(if engine.completed >= cfg.budget {
                Termination::Budget
            } else {
                Termination::Converged
            });
        }
        if limit.is_some_and(|l| engine.start.elapsed() >= l) {
            return Ok(Termination::Time);
        }
        let (ticket, result) = service.next().expect("a pending evaluation completes");
        let req = pending.remove(&ticket).expect("tickets are unique");
        let owner = req.owner;
        let was_ready = engine.ready();
        engine.complete(req, result?);
        if engine.ready() && !was_ready {
            ready.extend(0..engine.n);
        } else if was_ready {
            ready.push_back(owner);
        }
        if engine.changed {
            engine.changed = false;
            wake(&mut idle, &mut ready);
        }
    }
}

fn wake(idle: &mut [bool], ready: &mut VecDeque<usize>) {
    for (j, flag) in idle.iter_mut().enumerate() {
        if std::mem::take(flag) {
            ready.push_back(j);
        }
    }
}

/// Runs one search: `n` per-individual loops feeding an evaluation service.
pub fn run_search(evaluator: &dyn Evaluator, cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    if evaluator.genotype_len() == 0 {
        return Err(Error::Config("empty genotype space".into()));
    }
    let mut engine = Engine::new(evaluator, cfg);
    let termination = if cfg.deterministic || cfg.workers == 1 && cfg.time_limit_secs.is_none() {
        let mut svc = Sequential {
            evaluator,
            queue: VecDeque::new(),
        };
        drive(&mut engine, &mut svc)?
    } else {
        std::thread::scope(|scope| {
            let (job_tx, job_rx) = unbounded::<(u64, Genotype)>();
            let (res_tx, res_rx) = unbounded();
            for _ in 0..cfg.workers {
                let (job_rx, res_tx) = (job_rx.clone(), res_tx.clone());
                scope.spawn(move || {
                    for (ticket, g) in job_rx {
                        if res_tx.send((ticket, evaluator.evaluate(&g))).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(res_tx);
            let mut pool = Pool {
                jobs: Some(job_tx),
                results: res_rx,
            };
            let out = drive(&mut engine, &mut pool);
            pool.jobs = None;
            out
        })?
    };
    log::info!(
        "{} seed {}: {} evaluations, terminated by {termination}",
        cfg.algorithm,
        cfg.seed,
        engine.completed
    );
    Ok(RunOutcome {
        log: engine.log,
        archive: engine.archive,
        hv_trace: engine.hv_trace,
        termination,
        population: engine.pop.into_iter().flatten().collect(),
        reference_madds: engine.reference,
    })
}
