//! Stochastic linear systems, benchmark generators and the JSON file format.

mod benchmarks;
mod io;
mod model;

pub use benchmarks::{
    build_heat, build_ladder, example2_p, example_noerrbound, example_two_state, two_state_type2_p,
    HeatParams, LadderParams,
};
pub use io::{from_json_str, load, save, to_json_string, write_atomic};
pub use model::{Dims, PartitionedSystem, StochasticSystem, ValidationIssue, ValidationReport};
