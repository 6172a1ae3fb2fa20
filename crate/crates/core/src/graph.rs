//! Circuit enumeration per robot.
//!
//! Finding a robot's Hamiltonian circuits is turned into a Hamiltonian-path
//! search: the home activity is split into a start node (no incoming arcs)
//! and an end node (no outgoing arcs), and nodes/arcs are weighted with the
//! minimal durations of the underlying activities. A randomized DFS
//! enumerates paths, pruning sub-paths whose Floyd-Warshall completion bound
//! already exceeds the cycle time; the search is exact, so an empty result in
//! exhaustive mode certifies that no circuit fits the cycle time.
//!
//! Path length convention: a path accounts for all traversed arcs plus the
//! weights of all nodes except the start node (the stationary time at the
//! start belongs to the closing of the previous cycle). The end node carries
//! the home activity's weight.

use crate::model::Cell;
use crate::rng::SplitMix64;
use crate::tol::NUM_GUARD;
use std::collections::HashMap;

/// Transformed per-robot search graph.
#[derive(Debug)]
pub struct SearchGraph {
    pub robot: usize,
    /// Global static index per node; `None` for the virtual start/end nodes.
    pub node_static: Vec<Option<usize>>,
    /// Minimal stationary duration per node; start node weight is unused.
    pub node_weight: Vec<f64>,
    /// Outgoing arcs per node.
    pub arcs: Vec<Vec<Arc>>,
}

/// Weighted arc of the search graph, tied to the dynamic activity it encodes.
#[derive(Debug, Clone, Copy)]
pub struct Arc {
    pub to: usize,
    pub weight: f64,
    /// Global dynamic index.
    pub edge: usize,
}

impl SearchGraph {
    pub fn start(&self) -> usize {
        0
    }

    pub fn end(&self) -> usize {
        self.node_static.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.node_static.len()
    }
}

/// One operation order of a robot: a Hamiltonian circuit ending at home,
/// refined with its fastest location sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub robot: usize,
    /// Global static indices in execution order, last element is home.
    pub circuit: Vec<usize>,
    /// Global dynamic indices; `edges[i]` connects `circuit[i]` to
    /// `circuit[(i+1) % n]`, so the last edge closes the cycle through home.
    pub edges: Vec<usize>,
    pub fastest_duration: f64,
    /// Fastest go-through locations, aligned with `circuit`.
    pub fastest_locations: Vec<usize>,
    /// Trajectories realizing the fastest sequence, aligned with `edges`.
    pub fastest_trajs: Vec<usize>,
}

/// Builds the Hamiltonian-path search graph of a robot. Node 0 is the virtual
/// start, the last node the virtual end; arcs leaving home are rewired to the
/// start, arcs entering home to the end.
pub fn build_search_graph(cell: &Cell, robot: usize) -> SearchGraph {
    let rinfo = &cell.robots[robot];
    let interior: Vec<usize> = rinfo
        .statics
        .iter()
        .copied()
        .filter(|&s| s != rinfo.home)
        .collect();
    let node_of: HashMap<usize, usize> = interior
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i + 1))
        .collect();
    let n = interior.len() + 2;
    let end = n - 1;

    let mut node_static = vec![None; n];
    let mut node_weight = vec![0.0; n];
    for (i, &s) in interior.iter().enumerate() {
        node_static[i + 1] = Some(s);
        node_weight[i + 1] = cell.static_min_duration(s);
    }
    node_static[end] = Some(rinfo.home);
    node_weight[end] = cell.static_min_duration(rinfo.home);

    let mut arcs: Vec<Vec<Arc>> = vec![Vec::new(); n];
    for &d in &rinfo.dynamics {
        let info = &cell.dynamics[d];
        let from = if info.from == rinfo.home {
            0
        } else {
            node_of[&info.from]
        };
        let to = if info.to == rinfo.home {
            end
        } else {
            node_of[&info.to]
        };
        arcs[from].push(Arc {
            to,
            weight: cell.dynamic_min_duration(d),
            edge: d,
        });
    }

    SearchGraph {
        robot,
        node_static,
        node_weight,
        arcs,
    }
}

/// All-pairs shortest completion times by Floyd-Warshall. `U[i][j]` is the
/// minimal length of a path from `i` to `j` counting arc weights plus the
/// node weights of every node except the source; `+inf` when unreachable.
pub fn all_pairs_min_duration(g: &SearchGraph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut u = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in u.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for (i, arcs) in g.arcs.iter().enumerate() {
        for a in arcs {
            let w = a.weight + g.node_weight[a.to];
            if w < u[i][a.to] {
                u[i][a.to] = w;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if u[i][k].is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = u[i][k] + u[k][j];
                if via < u[i][j] {
                    u[i][j] = via;
                }
            }
        }
    }
    u
}

/// Enumeration budget: a fixed number of alternatives or the full circuit set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumLimit {
    Count(usize),
    Exhaustive,
}

/// Result of [`enumerate_alternatives`]. `exhausted` is true when the search
/// tree was fully explored, in which case the returned set is exactly the set
/// of circuits whose fastest refinement meets the cycle time — in particular
/// an empty exhausted result proves that no such circuit exists.
#[derive(Debug)]
pub struct EnumResult {
    pub alternatives: Vec<Alternative>,
    pub exhausted: bool,
}

struct Search<'a> {
    cell: &'a Cell,
    g: &'a SearchGraph,
    u: &'a [Vec<f64>],
    ct: f64,
    limit: Option<usize>,
    rng: &'a mut SplitMix64,
    out: Vec<Alternative>,
    /// `(node, visited mask) -> min path length proven to admit no
    /// Hamiltonian completion`. Sound because the pruning bound is monotone
    /// in the prefix length.
    dead: HashMap<(u32, u64), f64>,
    truncated: bool,
}

enum Subtree {
    /// Explored fully; true when at least one Hamiltonian path completed.
    Done(bool),
    /// Stopped early (limit reached); dead-marking not allowed.
    Cut,
}

impl Search<'_> {
    fn limit_reached(&self) -> bool {
        self.limit.is_some_and(|l| self.out.len() >= l)
    }

    fn dfs(&mut self, node: usize, mask: u64, len: f64, path: &mut Vec<(usize, usize)>) -> Subtree {
        if node == self.g.end() {
            if mask == (1u64 << self.g.node_count()) - 1 {
                self.emit(path);
                return Subtree::Done(true);
            }
            return Subtree::Done(false);
        }
        if let Some(&dead_len) = self.dead.get(&(node as u32, mask)) {
            if len >= dead_len - NUM_GUARD {
                return Subtree::Done(false);
            }
        }
        // prune: some unvisited node is unreachable or cannot be inserted
        // between here and the end within the cycle time
        let end = self.g.end();
        for v in 0..self.g.node_count() {
            if mask & (1 << v) != 0 {
                continue;
            }
            let bound = len + self.u[node][v] + self.u[v][end];
            if !bound.is_finite() || bound > self.ct + NUM_GUARD {
                let prev = self
                    .dead
                    .get(&(node as u32, mask))
                    .copied()
                    .unwrap_or(f64::INFINITY);
                if len < prev {
                    self.dead.insert((node as u32, mask), len);
                }
                return Subtree::Done(false);
            }
        }

        let mut order: Vec<usize> = (0..self.g.arcs[node].len()).collect();
        self.rng.shuffle(&mut order);

        let mut found_any = false;
        let mut cut = false;
        for k in order {
            if self.limit_reached() {
                cut = true;
                break;
            }
            let arc = self.g.arcs[node][k];
            if mask & (1 << arc.to) != 0 {
                continue;
            }
            let step = len + arc.weight + self.g.node_weight[arc.to];
            if step > self.ct + NUM_GUARD {
                continue;
            }
            path.push((arc.to, arc.edge));
            match self.dfs(arc.to, mask | (1 << arc.to), step, path) {
                Subtree::Done(found) => found_any |= found,
                Subtree::Cut => cut = true,
            }
            path.pop();
            if cut {
                break;
            }
        }
        if cut {
            self.truncated = true;
            return Subtree::Cut;
        }
        if !found_any {
            let prev = self
                .dead
                .get(&(node as u32, mask))
                .copied()
                .unwrap_or(f64::INFINITY);
            if len < prev {
                self.dead.insert((node as u32, mask), len);
            }
        }
        Subtree::Done(found_any)
    }

    fn emit(&mut self, path: &[(usize, usize)]) {
        // path: (node, edge used to reach it) from the first interior node to
        // the end node; circuit = interior statics in order, then home
        let mut circuit = Vec::with_capacity(path.len());
        let mut edges = Vec::with_capacity(path.len());
        for &(node, edge) in path {
            circuit.push(self.g.node_static[node].expect("virtual node inside path"));
            edges.push(edge);
        }
        // the closing movement home -> first activity is the first arc taken
        edges.rotate_left(1);
        let Some(fastest) = fastest_location_sequence(self.cell, &circuit, self.ct) else {
            return; // no location refinement meets the cycle time
        };
        self.out.push(Alternative {
            robot: self.g.robot,
            circuit,
            edges,
            fastest_duration: fastest.duration,
            fastest_locations: fastest.locations,
            fastest_trajs: fastest.trajectories,
        });
    }
}

/// Enumerates operation orders of a robot as Hamiltonian circuits whose
/// fastest location refinement fits the cycle time. Child order is randomized
/// per expansion, so different seeds discover circuits in different orders.
pub fn enumerate_alternatives(
    cell: &Cell,
    g: &SearchGraph,
    u: &[Vec<f64>],
    ct: f64,
    rng: &mut SplitMix64,
    limit: EnumLimit,
) -> EnumResult {
    assert!(
        g.node_count() <= 64,
        "robots with more than 62 static activities are not supported"
    );
    let mut search = Search {
        cell,
        g,
        u,
        ct,
        limit: match limit {
            EnumLimit::Count(n) => Some(n),
            EnumLimit::Exhaustive => None,
        },
        rng,
        out: Vec::new(),
        dead: HashMap::new(),
        truncated: false,
    };
    let mut path = Vec::new();
    let outcome = search.dfs(0, 1, 0.0, &mut path);
    let exhausted = matches!(outcome, Subtree::Done(_)) && !search.truncated;
    EnumResult {
        alternatives: search.out,
        exhausted,
    }
}

/// Fastest go-through locations of a circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct FastestPath {
    pub locations: Vec<usize>,
    pub trajectories: Vec<usize>,
    pub duration: f64,
}

/// Finds the fastest location sequence realizing a circuit, including the
/// closing movement back to the first chosen location. Solved as a layered
/// DAG shortest path, once per candidate first location so the closing
/// trajectory is exact. Returns `None` when no connected sequence exists or
/// the fastest one exceeds `ct`.
pub fn fastest_location_sequence(cell: &Cell, circuit: &[usize], ct: f64) -> Option<FastestPath> {
    let n = circuit.len();
    if n == 0 {
        return None;
    }
    let edges: Vec<usize> = (0..n)
        .map(|i| {
            cell.edge_between(circuit[i], circuit[(i + 1) % n])
                .expect("circuit uses nonexistent movement")
        })
        .collect();
    let node_total: f64 = circuit.iter().map(|&s| cell.static_min_duration(s)).sum();

    let mut best: Option<FastestPath> = None;
    for &start_loc in &cell.statics[circuit[0]].locations {
        // cost[i][k]: fastest movement time reaching location k of circuit[i]
        let mut cost: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut parent: Vec<Vec<Option<(usize, usize)>>> = Vec::with_capacity(n); // (prev loc slot, traj)
        let first_locs = &cell.statics[circuit[0]].locations;
        cost.push(
            first_locs
                .iter()
                .map(|&l| if l == start_loc { 0.0 } else { f64::INFINITY })
                .collect(),
        );
        parent.push(vec![None; first_locs.len()]);
        for i in 1..n {
            let prev_locs = &cell.statics[circuit[i - 1]].locations;
            let here_locs = &cell.statics[circuit[i]].locations;
            let mut row = vec![f64::INFINITY; here_locs.len()];
            let mut par = vec![None; here_locs.len()];
            for (pk, &pl) in prev_locs.iter().enumerate() {
                if cost[i - 1][pk].is_infinite() {
                    continue;
                }
                for (hk, &hl) in here_locs.iter().enumerate() {
                    if let Some(t) = cell.fastest_traj_between(edges[i - 1], pl, hl) {
                        let c = cost[i - 1][pk] + cell.trajectories[t].d_min;
                        if c < row[hk] {
                            row[hk] = c;
                            par[hk] = Some((pk, t));
                        }
                    }
                }
            }
            cost.push(row);
            parent.push(par);
        }
        // close the cycle back to the fixed start location
        let last_locs = &cell.statics[circuit[n - 1]].locations;
        let mut best_close: Option<(f64, usize, usize)> = None; // (cost, last slot, traj)
        for (lk, &ll) in last_locs.iter().enumerate() {
            if cost[n - 1][lk].is_infinite() {
                continue;
            }
            if let Some(t) = cell.fastest_traj_between(edges[n - 1], ll, start_loc) {
                let c = cost[n - 1][lk] + cell.trajectories[t].d_min;
                if best_close.is_none_or(|(bc, _, _)| c < bc) {
                    best_close = Some((c, lk, t));
                }
            }
        }
        let Some((move_total, mut slot, close_traj)) = best_close else {
            continue;
        };
        let duration = move_total + node_total;
        if duration > ct + NUM_GUARD {
            continue;
        }
        if best.as_ref().is_some_and(|b| duration >= b.duration) {
            continue;
        }
        // reconstruct
        let mut locations = vec![0usize; n];
        let mut trajectories = vec![0usize; n];
        trajectories[n - 1] = close_traj;
        for i in (0..n).rev() {
            locations[i] = cell.statics[circuit[i]].locations[slot];
            if i > 0 {
                let (prev_slot, traj) = parent[i][slot].expect("broken DP chain");
                trajectories[i - 1] = traj;
                slot = prev_slot;
            }
        }
        best = Some(FastestPath {
            locations,
            trajectories,
            duration,
        });
    }
    best
}

/// Minimal duration of a tuple path: node weights under the given modes plus
/// the chosen trajectories' minimal durations.
pub fn path_min_duration(cell: &Cell, circuit: &[usize], trajs: &[usize], modes: &[usize]) -> f64 {
    let nodes: f64 = circuit
        .iter()
        .map(|&s| cell.static_mode_min_duration(s, modes[s]))
        .sum();
    let moves: f64 = trajs.iter().map(|&t| cell.trajectories[t].d_min).sum();
    nodes + moves
}
