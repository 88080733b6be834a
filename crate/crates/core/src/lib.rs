//! Differentiable logic gate networks, trained with a standard-cell
//! area-aware loss, compiled to gate-level netlists, and verified
//! bit-exactly by a built-in logic simulator.
//!
//! The pipeline, end to end:
//!
//! 1. [`cells`]: load a cell library mapping each of the 16 two-input
//!    gate functions to named standard cells and areas.
//! 2. [`model`]: build a randomly wired network of softmax-mixture gate
//!    neurons with a GroupSum head.
//! 3. [`train`]: optimize cross-entropy plus `delta` times the expected
//!    average cell area per neuron, then discretize by argmax.
//! 4. [`netlist`]: compile the discretized network one-to-one onto the
//!    library's cells, with popcount adder trees for GroupSum.
//! 5. [`sim`]: simulate the netlist and check it against the model on
//!    random vectors.

pub mod cells;
pub mod checkpoint;
pub mod data;
pub mod model;
pub mod netlist;
pub mod sim;
pub mod train;

pub use cells::{CellLibrary, GateKind};
pub use checkpoint::Checkpoint;
pub use data::Dataset;
pub use model::{HardNetwork, NetSpec, Network};
pub use netlist::Netlist;
pub use train::{LossConfig, TrainConfig, TrainLog};
