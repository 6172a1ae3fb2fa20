//! Energy optimization of cyclic robotic cells.
//!
//! Models a robotic cell (robots, activities, locations, trajectories, power
//! modes, synchronization and collision constraints) and minimizes its energy
//! consumption for a fixed production cycle time. Provides:
//!
//! - the cell model with validation, energy evaluation, piecewise
//!   linearization and an independent solution feasibility checker,
//! - instance/solution file formats and a seeded instance generator,
//! - per-robot circuit enumeration (exact, with cycle-time pruning),
//! - a complete mixed-integer formulation exported as CPLEX LP text,
//! - an embedded bounded-variable simplex solver,
//! - the parallel hybrid heuristic (tuple generation, reduced-LP evaluation
//!   with incremental collision resolution, three sub-heuristics, shared
//!   elite solutions),
//! - a per-robot lower bound and an exhaustive oracle for small instances.

pub mod bounds;
pub mod generate;
pub mod graph;
pub mod heuristic;
pub mod io;
pub mod lp;
pub mod milp;
pub mod model;
pub mod reduced;
pub mod rng;
pub mod tol;
pub mod tuples;

pub use model::{Cell, Instance, Solution};
