//! The three tuple-modification sub-heuristics.
//!
//! Each takes the current tuple and the timing of its latest feasible LP
//! solution, and proposes a small modification whose real impact the next LP
//! evaluation decides. `None` means no applicable modification was found and
//! the worker advances to the next sub-heuristic.

use super::golden::golden_section_min;
use crate::model::{ActivityRef, Cell};
use crate::reduced::Timing;
use crate::rng::SplitMix64;
use crate::tol::{GOLDEN_TOL, NUM_GUARD};
use crate::tuples::{fix_spatial_compatibility, Tuple};

/// Golden-section iteration cap per substitution subproblem.
const GOLDEN_MAX_ITER: usize = 200;

/// Short-term memory of reverted power-mode switches: `(static, mode)` pairs
/// that may not be re-applied until their entry expires. Entry lifetimes are
/// jittered around the configured tenure so repeated visits to the same
/// tuple walk the mode space differently instead of cycling.
#[derive(Debug, Default)]
pub struct TabuList {
    entries: Vec<(usize, usize, u64)>,
    clock: u64,
    tenure: u64,
}

impl TabuList {
    pub fn new(tenure: u64) -> Self {
        TabuList {
            entries: Vec::new(),
            clock: 0,
            tenure,
        }
    }

    fn tick(&mut self) {
        self.clock += 1;
        let clock = self.clock;
        self.entries.retain(|&(_, _, expires)| expires > clock);
    }

    fn blocked(&self, s: usize, mode: usize) -> bool {
        self.entries.iter().any(|&(es, em, _)| es == s && em == mode)
    }

    fn lifetime(&self, rng: &mut SplitMix64) -> u64 {
        let half = (self.tenure / 2).max(1);
        half + rng.next_below(self.tenure.max(1) as usize) as u64
    }

    fn record(&mut self, s: usize, mode: usize, rng: &mut SplitMix64) {
        let life = self.lifetime(rng);
        self.entries.push((s, mode, self.clock + life));
    }

    /// Forbids a switch that was proposed but led to an infeasible
    /// evaluation, so the walk tries other moves instead of cycling on it.
    pub fn block_failed(&mut self, s: usize, mode: usize, rng: &mut SplitMix64) {
        self.record(s, mode, rng);
    }
}

/// (De)select power mode: estimates, for every non-tabu `(activity, mode)`
/// switch, the stationary energy after uniformly redistributing the duration
/// delta over the robot's other static activities, plus a penalty for time
/// lags and collisions the shifted timing would break (violation seconds
/// times the robot's mean selected input power). Applies the best-scoring
/// switch and marks the reverse move tabu.
pub fn subheur_power_mode(
    cell: &Cell,
    tuple: &Tuple,
    timing: &Timing,
    tabu: &mut TabuList,
    rng: &mut SplitMix64,
) -> Option<Tuple> {
    tabu.tick();
    let ct = cell.cycle_time();
    let loc_of = tuple.location_of_static(cell);

    let mut best: Option<(f64, usize, usize)> = None; // (score, static, mode)
    for (r, rinfo) in cell.robots.iter().enumerate() {
        let circuit = &tuple.circuits[r];
        let mean_power = circuit
            .iter()
            .map(|&v| cell.loc_power(loc_of[v], tuple.modes[v]))
            .sum::<f64>()
            / circuit.len() as f64;
        for &v in &rinfo.statics {
            for m in 0..rinfo.modes.len() {
                if m == tuple.modes[v] || tabu.blocked(v, m) {
                    continue;
                }
                let dmin_new = cell.static_mode_min_duration(v, m);
                if dmin_new > cell.statics[v].d_max + NUM_GUARD {
                    continue; // switch time does not fit the duration window
                }
                let score =
                    score_mode_switch(cell, tuple, timing, &loc_of, r, v, m, mean_power, ct);
                if best.is_none_or(|(b, _, _)| score < b) {
                    best = Some((score, v, m));
                }
            }
        }
    }
    let (_, v, m) = best?;
    let mut out = tuple.clone();
    tabu.record(v, out.modes[v], rng);
    out.modes[v] = m;
    Some(out)
}

#[allow(clippy::too_many_arguments)]
fn score_mode_switch(
    cell: &Cell,
    tuple: &Tuple,
    timing: &Timing,
    loc_of: &[usize],
    r: usize,
    switch_v: usize,
    switch_m: usize,
    mean_power: f64,
    ct: f64,
) -> f64 {
    let circuit = &tuple.circuits[r];
    let n = circuit.len();

    let mut dur: Vec<f64> = circuit.iter().map(|&v| timing.dur_static[v]).collect();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for (i, &v) in circuit.iter().enumerate() {
        let mode = if v == switch_v { switch_m } else { tuple.modes[v] };
        lo[i] = cell.static_mode_min_duration(v, mode);
        hi[i] = cell.statics[v].d_max;
    }
    let pos = circuit.iter().position(|&v| v == switch_v).unwrap();

    // simulated duration of the switched activity: a pricier mode is held no
    // longer than it must be, a cheaper one keeps the current stay
    let p_old = cell.loc_power(loc_of[switch_v], tuple.modes[switch_v]);
    let p_new = cell.loc_power(loc_of[switch_v], switch_m);
    let snapped = if p_new >= p_old {
        lo[pos]
    } else {
        dur[pos].clamp(lo[pos], hi[pos])
    };
    let mut remaining = dur[pos] - snapped; // time handed to the rest
    dur[pos] = snapped;

    let mut move_dur: Vec<f64> = (0..n)
        .map(|i| timing.dur_dyn[tuple.edges[r][i]].unwrap_or(0.0))
        .collect();

    // uniform clipped redistribution over a set of adjustable durations
    let spread = |remaining: &mut f64, dur: &mut Vec<f64>, lo: &[f64], hi: &[f64], skip: Option<usize>| {
        let mut open: Vec<usize> = (0..dur.len()).filter(|&i| Some(i) != skip).collect();
        for _ in 0..4 {
            if remaining.abs() <= NUM_GUARD || open.is_empty() {
                break;
            }
            let share = *remaining / open.len() as f64;
            let mut next_open = Vec::with_capacity(open.len());
            for &i in &open {
                let target = (dur[i] + share).clamp(lo[i], hi[i]);
                *remaining -= target - dur[i];
                dur[i] = target;
                if target > lo[i] + NUM_GUARD && target < hi[i] - NUM_GUARD {
                    next_open.push(i);
                }
            }
            open = next_open;
        }
    };
    let move_lo: Vec<f64> = (0..n)
        .map(|i| cell.trajectories[tuple.trajs[r][i]].d_min)
        .collect();
    let move_hi: Vec<f64> = (0..n)
        .map(|i| cell.trajectories[tuple.trajs[r][i]].d_max)
        .collect();
    if remaining > 0.0 {
        // freed time: slower movements save energy, so they absorb first
        spread(&mut remaining, &mut move_dur, &move_lo, &move_hi, None);
        spread(&mut remaining, &mut dur, &lo, &hi, Some(pos));
    } else {
        // time must come from somewhere: shorten the other stays first
        spread(&mut remaining, &mut dur, &lo, &hi, Some(pos));
        spread(&mut remaining, &mut move_dur, &move_lo, &move_hi, None);
    }
    // leftover means the cycle time cannot be met this way
    let mut penalty_seconds = remaining.abs();

    // shifted starts along the circuit, anchored at the first activity
    let mut start: Vec<f64> = vec![0.0; n];
    let mut t = timing.start_static[circuit[0]];
    for i in 0..n {
        start[i] = t;
        t += dur[i];
        t += move_dur[i];
    }
    let s_of = |a: ActivityRef| -> Option<(f64, f64)> {
        match a {
            ActivityRef::Static(v) if cell.statics[v].robot == r => {
                let i = circuit.iter().position(|&x| x == v).unwrap();
                Some((start[i], dur[i]))
            }
            _ => timing.of(a),
        }
    };

    for lag in &cell.lags {
        let (Some((s1, _)), Some((s2, _))) = (s_of(lag.from), s_of(lag.to)) else {
            continue;
        };
        let short = (s1 + lag.length - ct * lag.height as f64) - s2;
        if short > 0.0 {
            penalty_seconds += short;
        }
    }
    let candidates = crate::reduced::collision_candidates(cell, tuple);
    let shifts = cell.robots.len() as i64;
    for &(a1, a2) in &candidates {
        let (Some((s1, d1)), Some((s2, d2))) = (s_of(a1), s_of(a2)) else {
            continue;
        };
        for nn in -shifts..=shifts {
            let shift = nn as f64 * ct;
            let overlap = (s1 + d1 - s2 - shift).min(s2 + d2 + shift - s1);
            if overlap > 0.0 {
                penalty_seconds += overlap;
            }
        }
    }

    let static_energy: f64 = circuit
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mode = if v == switch_v { switch_m } else { tuple.modes[v] };
            cell.loc_power(loc_of[v], mode) * dur[i]
        })
        .sum();
    let movement_energy: f64 = (0..n)
        .map(|i| {
            cell.trajectories[tuple.trajs[r][i]]
                .energy
                .eval_unchecked(move_dur[i].max(NUM_GUARD))
        })
        .sum();
    static_energy + movement_energy + penalty_seconds * mean_power
}

/// Change locations: for every path position, evaluates every substitution
/// of the go-through location (including trajectory-only swaps) by solving
/// the one-dimensional convex split of the two adjacent movement durations
/// with golden-section search, and applies the best improving substitution
/// that keeps spatial compatibility. One sweep per call.
pub fn subheur_change_locations(cell: &Cell, tuple: &Tuple, timing: &Timing) -> Option<Tuple> {
    let mut out = tuple.clone();
    let mut changed = false;
    let mut loc_of = tuple.location_of_static(cell);
    for r in 0..cell.robots.len() {
        let n = out.circuits[r].len();
        let mut touched = vec![false; n];
        for p in 0..n {
            let prev_slot = (p + n - 1) % n;
            let next_slot = (p + 1) % n;
            if touched[p] || touched[prev_slot] || touched[next_slot] {
                continue; // cached durations for these movements are stale
            }
            let v = out.circuits[r][p];
            let in_edge = out.edges[r][prev_slot];
            let out_edge = out.edges[r][p];
            let (Some(d_in), Some(d_out)) = (
                timing.dur_dyn[in_edge],
                timing.dur_dyn[out_edge],
            ) else {
                continue;
            };
            let split = d_in + d_out;
            let d_v = timing.dur_static[v];
            let mode = out.modes[v];
            let prev_loc = out.paths[r][prev_slot];
            let next_loc = out.paths[r][next_slot];
            let cur_in_traj = out.trajs[r][prev_slot];
            let cur_out_traj = out.trajs[r][p];

            let cur_value = cell.trajectories[cur_in_traj]
                .energy
                .eval_unchecked(d_in)
                + cell.trajectories[cur_out_traj].energy.eval_unchecked(d_out)
                + cell.loc_power(loc_of[v], mode) * d_v;

            let mut best: Option<(f64, usize, usize, usize)> = None; // value, loc, t_in, t_out
            for &cand in &cell.statics[v].locations {
                if !compat_allows(cell, &loc_of, v, cand) {
                    continue;
                }
                for t_in in cell.trajs_between(in_edge, prev_loc, cand) {
                    for t_out in cell.trajs_between(out_edge, cand, next_loc) {
                        if cand == out.paths[r][p] && t_in == cur_in_traj && t_out == cur_out_traj
                        {
                            continue;
                        }
                        let tin = &cell.trajectories[t_in];
                        let tout = &cell.trajectories[t_out];
                        let lo = tin.d_min.max(split - tout.d_max);
                        let hi = tin.d_max.min(split - tout.d_min);
                        if lo > hi + NUM_GUARD {
                            continue;
                        }
                        let hold = cell.loc_power(cand, mode) * d_v;
                        let (_, value) = golden_section_min(
                            |d| {
                                tin.energy.eval_unchecked(d)
                                    + tout.energy.eval_unchecked(split - d)
                                    + hold
                            },
                            lo,
                            hi.max(lo),
                            GOLDEN_TOL,
                            GOLDEN_MAX_ITER,
                        );
                        if best.is_none_or(|(b, _, _, _)| value < b) {
                            best = Some((value, cand, t_in, t_out));
                        }
                    }
                }
            }
            if let Some((value, cand, t_in, t_out)) = best {
                if value < cur_value - NUM_GUARD {
                    out.paths[r][p] = cand;
                    out.trajs[r][prev_slot] = t_in;
                    out.trajs[r][p] = t_out;
                    loc_of[v] = cand;
                    touched[p] = true;
                    changed = true;
                }
            }
        }
    }
    changed.then_some(out)
}

/// True when placing `v` at `cand` keeps every compat pair involving `v`
/// satisfied, given the other activities' current locations.
fn compat_allows(cell: &Cell, loc_of: &[usize], v: usize, cand: usize) -> bool {
    cell.compat_involving(v).all(|pair| {
        if pair.a == v {
            pair.pairs.contains(&(cand, loc_of[pair.b]))
        } else {
            pair.pairs.contains(&(loc_of[pair.a], cand))
        }
    })
}

/// Change path: redraws a random subset of one robot's go-through locations,
/// re-routes the movements through randomly drawn connecting trajectories,
/// and repairs spatial compatibility. A draw that disconnects the path or
/// cannot be repaired is retried a few times before giving up. Re-drawing
/// the trajectory realizations as well keeps alternatives between the same
/// location pair reachable by diversification.
pub fn subheur_change_path(cell: &Cell, tuple: &Tuple, rng: &mut SplitMix64) -> Option<Tuple> {
    let r = rng.next_below(cell.robots.len());
    let n = tuple.circuits[r].len();
    for _ in 0..10 {
        let mut out = tuple.clone();
        for p in 0..n {
            if !rng.next_bool(0.5) {
                continue;
            }
            let v = out.circuits[r][p];
            let locs = &cell.statics[v].locations;
            out.paths[r][p] = locs[rng.next_below(locs.len())];
        }
        // re-route every movement through the (possibly new) locations
        let mut connected = true;
        for i in 0..n {
            let from = out.paths[r][i];
            let to = out.paths[r][(i + 1) % n];
            let options = cell.trajs_between(out.edges[r][i], from, to);
            match options.as_slice() {
                [] => {
                    connected = false;
                    break;
                }
                ts => out.trajs[r][i] = ts[rng.next_below(ts.len())],
            }
        }
        if !connected || out == *tuple {
            continue;
        }
        if out.robot_min_duration(cell, r) > cell.cycle_time() + NUM_GUARD {
            continue;
        }
        match fix_spatial_compatibility(cell, out) {
            Ok(fixed) if fixed != *tuple => return Some(fixed),
            _ => continue,
        }
    }
    None
}
