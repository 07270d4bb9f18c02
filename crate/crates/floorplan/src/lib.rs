//! Fixed-outline floorplanning: hard and soft rectangular modules are placed
//! inside a fixed rectangle by minimizing a smoothed wirelength plus a
//! grid-based density penalty, then residual overlaps are repaired with a
//! constraint-graph legalizer.

pub mod bookshelf;
pub mod dct;
pub mod field;
pub mod global;
pub mod legalize;
pub mod model;
pub mod overlap;
pub mod potential;
pub mod svg;
pub mod wirelength;

pub use model::{Floorplan, ModuleKind, ModuleSpec, ModuleState, Netlist, Outline, Rect};
