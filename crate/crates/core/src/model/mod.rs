//! Domain model of a robotic cell.
//!
//! An [`Instance`] is the serialized description of a cell: robots with their
//! static activities (stationary phases at selectable locations), dynamic
//! activities (movements realized by one of several trajectories), power
//! modes, inter-robot time lags, spatial compatibility of handover locations,
//! and collision quadruplets. All types are immutable after construction and
//! safe to share across threads.

mod cell;
mod energy;
mod solution;
mod validate;

pub use cell::{ActKind, ActivityRef, Cell, ItemRef};
pub use energy::{pwl_approximate, EnergyFunction, PwlApprox};
pub use solution::{
    check_solution, FeasibilityReport, RobotSelection, SelectionStep, Solution, SolutionStatus,
    SolutionViolation, SolverMeta, ViolationKind, SOLUTION_FORMAT,
};
pub use validate::{validate_instance, Violation};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Current on-disk format tag for instance files.
pub const INSTANCE_FORMAT: &str = "cellopt/1";

/// Full description of a robotic cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    /// Format tag, `"cellopt/1"`.
    pub format: String,
    /// Production cycle time of the cell in seconds; every robot's circuit
    /// duration must equal it.
    pub cycle_time: f64,
    pub robots: Vec<Robot>,
    #[serde(default)]
    pub time_lags: Vec<TimeLag>,
    #[serde(default)]
    pub compat: Vec<SpatialCompatPair>,
    #[serde(default)]
    pub collisions: Vec<CollisionQuad>,
}

/// One robot: its activity graph, locations, trajectories and power modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Robot {
    pub id: String,
    /// Id of the home static activity closing the robot's cycle.
    pub home: String,
    pub modes: Vec<PowerMode>,
    pub static_activities: Vec<StaticActivity>,
    pub dynamic_activities: Vec<DynamicActivity>,
}

/// Stationary power regime of a robot (motor hold, brakes, bus power-off, ...).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerMode {
    pub id: String,
    /// Minimal stationary duration required to switch the mode on, seconds.
    pub min_switch_time: f64,
}

/// Stationary phase of a robot (welding, waiting) with selectable locations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticActivity {
    pub id: String,
    pub d_min: f64,
    pub d_max: f64,
    pub locations: Vec<Location>,
}

/// Concrete robot position for a static activity with per-mode input power.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub id: String,
    /// Input power in watts per mode id; must cover every mode of the robot.
    pub power: BTreeMap<String, f64>,
}

/// Movement between two static activities realized by one of its trajectories.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicActivity {
    pub id: String,
    pub from: String,
    pub to: String,
    /// True when the movement may be skipped (alternative operation orders).
    /// Must hold exactly when the source activity has several outgoing moves.
    pub optional: bool,
    pub trajectories: Vec<Trajectory>,
}

/// Concrete path between two locations with a duration-dependent energy model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub id: String,
    pub from_loc: String,
    pub to_loc: String,
    pub d_min: f64,
    pub d_max: f64,
    /// Coefficients of the movement energy function, see [`EnergyFunction`].
    #[serde(rename = "energy_coeffs")]
    pub energy: EnergyFunction,
}

/// Cyclic-scheduling precedence `s_to >= s_from + length - cycle_time * height`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeLag {
    pub from: String,
    pub to: String,
    pub length: f64,
    /// Cycle offset; height 1 relates an event to the previous cycle.
    pub height: i64,
}

/// Allowed location pairings for an inter-robot handover.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialCompatPair {
    pub activity_1: String,
    pub activity_2: String,
    /// Compatible `(location of activity_1, location of activity_2)` pairs.
    pub pairs: Vec<(String, String)>,
}

/// Pair of (activity, location-or-trajectory) items that must never overlap
/// in time, for any cycle shift `n` in `-|R|..=|R|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionQuad {
    pub activity_1: String,
    /// Location id when `activity_1` is static, trajectory id when dynamic.
    pub item_1: String,
    pub activity_2: String,
    pub item_2: String,
}

impl Instance {
    /// Total number of static activities across robots.
    pub fn static_count(&self) -> usize {
        self.robots.iter().map(|r| r.static_activities.len()).sum()
    }

    /// Total number of dynamic activities across robots.
    pub fn dynamic_count(&self) -> usize {
        self.robots.iter().map(|r| r.dynamic_activities.len()).sum()
    }
}
