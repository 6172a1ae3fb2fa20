//! Parallel hybrid heuristic.
//!
//! A control context enumerates operation orders per robot (work split
//! across threads, streams seeded per robot so results do not depend on the
//! thread count), seeds a shared tuple list and launches workers. Each worker
//! repeatedly takes a tuple, optimizes it by alternating reduced-LP
//! evaluations with three sub-heuristics in round-robin order, and offers
//! every feasible solution to the shared elite pool; when the list runs dry
//! it is refilled half with fresh random tuples and half with recombinations
//! of elite solutions. The run stops at the wall-clock limit or, in
//! deterministic mode, after a fixed number of LP evaluations.
//!
//! Shared structures (tuple list, elite pool, global best) are mutex-guarded
//! with O(pool) critical sections; everything else is worker-local. A run
//! with one worker executes inline on the caller thread, which with a fixed
//! seed and an evaluation budget makes the whole run reproducible.

mod golden;
mod subheur;

pub use golden::golden_section_min;
pub use subheur::{
    subheur_change_locations, subheur_change_path, subheur_power_mode, TabuList,
};

use crate::graph::{all_pairs_min_duration, build_search_graph, enumerate_alternatives, EnumLimit};
use crate::model::{check_solution, Cell, Solution, SolverMeta};
use crate::reduced::{assemble_solution, evaluate_tuple_warm, EvalStatus, LpBudget, Timing};
use crate::rng::SplitMix64;
use crate::tuples::{combine_elites, generate_tuple, AlternativesStore, ElitePool, Tuple};
use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct HeuristicConfig {
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    /// Deterministic mode: stop after this many LP evaluations instead of a
    /// wall-clock deadline.
    pub eval_budget: Option<u64>,
    /// Non-improving iterations on a tuple before the next one is read.
    pub phi_max: u64,
    pub worker_count: usize,
    /// Linearization pieces per trajectory energy function.
    pub segments: usize,
    pub elite_capacity: usize,
    /// Alternatives kept per robot.
    pub alternatives_limit: usize,
    /// Relative improvement that resets the non-improvement counter.
    pub improvement_threshold: f64,
    /// Power-mode tabu tenure, in sub-heuristic applications per worker.
    pub tabu_tenure: u64,
    pub seed: u64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            time_limit: None,
            eval_budget: None,
            phi_max: 100,
            worker_count: 1,
            segments: 10,
            elite_capacity: 10,
            alternatives_limit: 50,
            improvement_threshold: 0.001,
            tabu_tenure: 7,
            seed: 0,
        }
    }
}

/// One new-global-best event of the progress stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressEvent {
    pub time_s: f64,
    pub energy: f64,
    pub worker: usize,
}

/// Outcome of an optimization run.
#[derive(Debug)]
pub struct RunReport {
    pub best: Option<Solution>,
    pub per_worker_lp_evaluations: Vec<u64>,
    pub lp_evaluations_per_second: f64,
    pub tuples_processed: u64,
    /// True when some robot's exhaustive circuit enumeration came up empty,
    /// proving the instance infeasible.
    pub infeasibility_proof: bool,
    pub wall_time_s: f64,
    pub progress: Vec<ProgressEvent>,
    /// Final elite pool contents, best first.
    pub elites: Vec<Solution>,
    pub alternatives_per_robot: Vec<usize>,
    pub exhausted_per_robot: Vec<bool>,
}

impl RunReport {
    pub fn total_lp_evaluations(&self) -> u64 {
        self.per_worker_lp_evaluations.iter().sum()
    }
}

/// Enumerates alternatives for every robot. Each robot draws from its own
/// seeded stream, so the result is independent of how the robots are split
/// across threads.
pub fn generate_alternatives(
    cell: &Cell,
    limit: usize,
    seed: u64,
    worker_count: usize,
) -> (AlternativesStore, Vec<bool>) {
    let base = SplitMix64::new(seed);
    let per_robot = |r: usize| {
        let g = build_search_graph(cell, r);
        let u = all_pairs_min_duration(&g);
        let mut rng = base.fork(0x0100 + r as u64);
        let res = enumerate_alternatives(
            cell,
            &g,
            &u,
            cell.cycle_time(),
            &mut rng,
            EnumLimit::Count(limit),
        );
        (res.alternatives, res.exhausted)
    };

    let robots = cell.robots.len();
    let mut store: Vec<_> = Vec::with_capacity(robots);
    let mut exhausted = Vec::with_capacity(robots);
    if worker_count <= 1 || robots <= 1 {
        for r in 0..robots {
            let (alts, ex) = per_robot(r);
            store.push(alts);
            exhausted.push(ex);
        }
    } else {
        let threads = worker_count.min(robots);
        let mut slots: Vec<_> = (0..robots).map(|_| None).collect();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for t in 0..threads {
                let per_robot = &per_robot;
                handles.push(scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut r = t;
                    while r < robots {
                        out.push((r, per_robot(r)));
                        r += threads;
                    }
                    out
                }));
            }
            for h in handles {
                for (r, res) in h.join().expect("alternative enumeration panicked") {
                    slots[r] = Some(res);
                }
            }
        });
        for slot in slots {
            let (alts, ex) = slot.unwrap();
            store.push(alts);
            exhausted.push(ex);
        }
    }
    (store, exhausted)
}

struct Shared<'a> {
    cell: &'a Cell,
    store: &'a AlternativesStore,
    config: &'a HeuristicConfig,
    queue: Mutex<VecDeque<Tuple>>,
    pool: Mutex<ElitePool>,
    best: Mutex<Option<Solution>>,
    progress: Mutex<Vec<ProgressEvent>>,
    tuples_processed: AtomicU64,
    budget: Option<AtomicU64>,
    deadline: Option<Instant>,
    start: Instant,
    stop: AtomicBool,
}

impl Shared<'_> {
    fn stopped(&self) -> bool {
        if self.stop.load(Ordering::Relaxed) {
            return true;
        }
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                self.stop.store(true, Ordering::Relaxed);
                return true;
            }
        }
        if let Some(budget) = &self.budget {
            if budget.load(Ordering::Relaxed) == 0 {
                return true;
            }
        }
        false
    }

    /// Offers a feasible evaluation to the elite pool and the global best.
    /// The full solution is only assembled when either could accept it,
    /// which is exactly when the pool's acceptance predicate or the global
    /// best allows; rejected offers stay allocation-free.
    fn register(
        &self,
        worker: usize,
        tuple: &Tuple,
        timing: &Timing,
        criterion: f64,
        total_energy: f64,
    ) {
        let pool_wants = self.pool.lock().unwrap().would_accept(tuple, total_energy);
        let best_wants = self
            .best
            .lock()
            .unwrap()
            .as_ref()
            .is_none_or(|b| total_energy < b.total_energy);
        if !pool_wants && !best_wants {
            return;
        }
        let solution = assemble_solution(self.cell, tuple, timing, criterion);
        debug_assert!(
            check_solution(self.cell, &solution).is_feasible(),
            "every offered solution must pass the checker"
        );
        if pool_wants {
            let mut pool = self.pool.lock().unwrap();
            pool.offer(solution.clone(), tuple.clone());
        }
        let mut best = self.best.lock().unwrap();
        let better = best
            .as_ref()
            .is_none_or(|b| solution.total_energy < b.total_energy);
        if better {
            self.progress.lock().unwrap().push(ProgressEvent {
                time_s: self.start.elapsed().as_secs_f64(),
                energy: solution.total_energy,
                worker,
            });
            *best = Some(solution);
        }
    }

    /// Pops the next tuple, refilling the list when empty: half fresh random
    /// tuples, half recombined from elites once the pool is nonempty.
    fn next_tuple(&self, rng: &mut SplitMix64) -> Option<Tuple> {
        let mut queue = self.queue.lock().unwrap();
        if let Some(t) = queue.pop_front() {
            return Some(t);
        }
        let batch = 2 * self.config.worker_count.max(1);
        for i in 0..batch {
            let from_elites = i % 2 == 1 && !self.pool.lock().unwrap().is_empty();
            let tuple = if from_elites {
                let pool = self.pool.lock().unwrap();
                combine_elites(self.cell, &pool, self.store, rng).ok()
            } else {
                // a repair failure only depends on the drawn alternatives;
                // retry a few draws before giving up
                (0..5).find_map(|_| generate_tuple(self.cell, self.store, rng).ok())
            };
            if let Some(t) = tuple {
                queue.push_back(t);
            }
        }
        queue.pop_front()
    }
}

/// LP-solve permission backed by the shared stop flag, deadline and budget.
struct SharedBudget<'a, 'b> {
    shared: &'a Shared<'b>,
}

impl LpBudget for SharedBudget<'_, '_> {
    fn take(&mut self) -> bool {
        if self.shared.stop.load(Ordering::Relaxed) {
            return false;
        }
        if let Some(deadline) = self.shared.deadline {
            if Instant::now() >= deadline {
                self.shared.stop.store(true, Ordering::Relaxed);
                return false;
            }
        }
        match &self.shared.budget {
            None => true,
            Some(budget) => {
                let mut cur = budget.load(Ordering::Relaxed);
                loop {
                    if cur == 0 {
                        return false;
                    }
                    match budget.compare_exchange_weak(
                        cur,
                        cur - 1,
                        Ordering::Relaxed,
                        Ordering::Relaxed,
                    ) {
                        Ok(_) => return true,
                        Err(now) => cur = now,
                    }
                }
            }
        }
    }
}

const SUB_HEURISTICS: usize = 3;

fn worker_loop(shared: &Shared, w: usize, rng: &mut SplitMix64) -> u64 {
    let mut lp_evals = 0u64;
    let mut tabu = TabuList::new(shared.config.tabu_tenure);
    while !shared.stopped() {
        let Some(tuple) = shared.next_tuple(rng) else {
            break;
        };
        process_tuple(shared, w, tuple, rng, &mut tabu, &mut lp_evals);
        shared.tuples_processed.fetch_add(1, Ordering::Relaxed);
    }
    lp_evals
}

fn process_tuple(
    shared: &Shared,
    w: usize,
    tuple: Tuple,
    rng: &mut SplitMix64,
    tabu: &mut TabuList,
    lp_evals: &mut u64,
) {
    let cell = shared.cell;
    let config = shared.config;
    let mut budget = SharedBudget { shared };

    let ev = evaluate_tuple_warm(cell, &tuple, config.segments, &mut budget, None);
    *lp_evals += ev.lp_calls;
    if ev.status != EvalStatus::Feasible {
        // an unmodified infeasible tuple is dropped and the next one read
        return;
    }
    let mut current = tuple;
    let mut cur_timing: Timing = ev.timing.unwrap();
    // the previous solve's basis primes the next evaluation: successive
    // tuples differ by one small modification, so phase 2 restarts close
    // to the old optimum
    let mut last_basis = ev.first_basis;
    shared.register(w, &current, &cur_timing, ev.criterion, ev.total_energy);
    let mut best_total = ev.total_energy;

    let mut phi = 0u64;
    let mut sub = 0usize;
    while phi < config.phi_max && !shared.stopped() {
        let proposal = match sub {
            0 => subheur_power_mode(cell, &current, &cur_timing, tabu, rng),
            1 => subheur_change_locations(cell, &current, &cur_timing),
            _ => subheur_change_path(cell, &current, rng),
        };
        let Some(next) = proposal else {
            phi += 1;
            sub = (sub + 1) % SUB_HEURISTICS;
            continue;
        };
        let mut budget = SharedBudget { shared };
        let ev =
            evaluate_tuple_warm(cell, &next, config.segments, &mut budget, last_basis.as_ref());
        *lp_evals += ev.lp_calls;
        if ev.first_basis.is_some() {
            last_basis = ev.first_basis;
        }
        match ev.status {
            EvalStatus::Aborted => break,
            EvalStatus::Feasible => {
                let timing = ev.timing.unwrap();
                shared.register(w, &next, &timing, ev.criterion, ev.total_energy);
                let improved = ev.total_energy
                    < best_total - config.improvement_threshold * best_total.abs();
                if improved {
                    phi = 0;
                } else {
                    phi += 1;
                    sub = (sub + 1) % SUB_HEURISTICS;
                }
                best_total = best_total.min(ev.total_energy);
                current = next;
                cur_timing = timing;
            }
            EvalStatus::LpInfeasible | EvalStatus::CollisionUnresolvable => {
                // roll back: keep the last feasible tuple, try the next move;
                // a failed mode switch goes on the tabu list so the walk does
                // not keep re-proposing it
                if sub == 0 {
                    if let Some(s) =
                        (0..next.modes.len()).find(|&s| next.modes[s] != current.modes[s])
                    {
                        tabu.block_failed(s, next.modes[s], rng);
                    }
                }
                phi += 1;
                sub = (sub + 1) % SUB_HEURISTICS;
            }
        }
    }
}

/// Runs the parallel hybrid heuristic. With `worker_count = 1` and an
/// evaluation budget the run is fully deterministic for a fixed seed.
pub fn optimize(cell: &Cell, config: &HeuristicConfig) -> RunReport {
    assert!(
        config.time_limit.is_some() || config.eval_budget.is_some(),
        "either a time limit or an evaluation budget is required"
    );
    assert!(config.worker_count >= 1 && config.phi_max >= 1 && config.segments >= 1);
    let start = Instant::now();

    let (store, exhausted) = generate_alternatives(
        cell,
        config.alternatives_limit,
        config.seed,
        config.worker_count,
    );
    let alternatives_per_robot: Vec<usize> = store.iter().map(|a| a.len()).collect();
    if store.iter().any(|alts| alts.is_empty()) {
        // exhaustive search found no circuit fitting the cycle time
        return RunReport {
            best: None,
            per_worker_lp_evaluations: vec![0; config.worker_count],
            lp_evaluations_per_second: 0.0,
            tuples_processed: 0,
            infeasibility_proof: true,
            wall_time_s: start.elapsed().as_secs_f64(),
            progress: Vec::new(),
            elites: Vec::new(),
            alternatives_per_robot,
            exhausted_per_robot: exhausted,
        };
    }

    let base = SplitMix64::new(config.seed);
    let shared = Shared {
        cell,
        store: &store,
        config,
        queue: Mutex::new(VecDeque::new()),
        pool: Mutex::new(ElitePool::new(config.elite_capacity)),
        best: Mutex::new(None),
        progress: Mutex::new(Vec::new()),
        tuples_processed: AtomicU64::new(0),
        budget: config.eval_budget.map(AtomicU64::new),
        deadline: config
            .time_limit
            .map(|t| start + std::time::Duration::from_secs_f64(t)),
        start,
        stop: AtomicBool::new(false),
    };

    // seed the tuple list from the control stream
    {
        let mut control_rng = base.fork(0);
        let mut queue = shared.queue.lock().unwrap();
        let want = 2 * config.worker_count;
        let mut attempts = 0;
        while queue.len() < want && attempts < 10 * want {
            attempts += 1;
            if let Ok(t) = generate_tuple(cell, &store, &mut control_rng) {
                queue.push_back(t);
            }
        }
    }

    let mut per_worker = vec![0u64; config.worker_count];
    if config.worker_count == 1 {
        let mut rng = base.fork(1);
        per_worker[0] = worker_loop(&shared, 0, &mut rng);
    } else {
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..config.worker_count {
                let shared = &shared;
                let mut rng = base.fork(1 + w as u64);
                handles.push(scope.spawn(move || worker_loop(shared, w, &mut rng)));
            }
            for (w, h) in handles.into_iter().enumerate() {
                per_worker[w] = h.join().expect("worker panicked");
            }
        });
    }

    let wall = start.elapsed().as_secs_f64();
    let total_evals: u64 = per_worker.iter().sum();
    let mut best = shared.best.into_inner().unwrap();
    if let Some(best) = best.as_mut() {
        best.solver = Some(SolverMeta {
            seed: config.seed,
            time_limit_s: config.time_limit,
            eval_budget: config.eval_budget,
            // suppressed in deterministic mode so files stay byte-identical
            wall_time_s: if config.eval_budget.is_some() { 0.0 } else { wall },
            lp_evaluations: total_evals,
            threads: config.worker_count,
        });
    }
    let elites = shared
        .pool
        .into_inner()
        .unwrap()
        .entries()
        .iter()
        .map(|e| e.solution.clone())
        .collect();
    RunReport {
        best,
        per_worker_lp_evaluations: per_worker,
        lp_evaluations_per_second: if wall > 0.0 { total_evals as f64 / wall } else { 0.0 },
        tuples_processed: shared.tuples_processed.into_inner(),
        infeasibility_proof: false,
        wall_time_s: wall,
        progress: shared.progress.into_inner().unwrap(),
        elites,
        alternatives_per_robot,
        exhausted_per_robot: exhausted,
    }
}
