//! Simulation and Monte Carlo verification toolkit for Levy trees, the Levy
//! snake carrying the local time of its spatial motion, and the subordinate
//! tree obtained by time-changing the snake with its additive functional.

pub mod additive;
pub mod error;
pub mod exploration;
pub mod exponents;
pub mod mcverify;
pub mod pathsim;
pub mod rng;
pub mod rtree;
pub mod snake;
pub mod stats;

pub use error::{Error, Result};
pub use exploration::{ExplorationMeasure, HeightMode, HeightPath};
pub use exponents::{FittedExponent, LevyMeasure, LevyTriplet, PowerFit};
pub use pathsim::{ExcursionSlice, LatticePath, WalkSkeleton};
pub use rtree::{CodedTree, MarkedTree, SpineSummary};
