//! Instrumented interpreter for the restricted C subset.
//!
//! Executes a parsed project while maintaining a bounds table over all
//! allocations, detecting memory faults exactly, and capturing a serialized
//! I/O example for every project-function call.

mod machine;
mod memory;
mod serial;

pub use machine::{CallEvent, ExecutionTrace, FaultKind, Interpreter, RuntimeError};
pub use memory::{AllocId, AllocationRecord, BoundsTable, Region, RtVal};
pub use serial::{
    elem_size_of, materialize, serialize_rt, zero_value, MaterializeError, MaterializeScope,
    SerializeError, SnapshotScope,
};
