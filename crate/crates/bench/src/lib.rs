//! Fixtures shared by the benchmark targets.

use stochbt::system::{build_heat, build_ladder, HeatParams, LadderParams};
use stochbt::StochasticSystem;

pub fn ladder(n: usize) -> StochasticSystem {
    build_ladder(n, LadderParams::default()).expect("valid ladder order")
}

pub fn heat(grid: usize) -> StochasticSystem {
    build_heat(grid, HeatParams::default()).expect("valid grid")
}

/// Ladder orders used by the scaling benchmarks.
pub const LADDER_SIZES: [usize; 3] = [8, 16, 24];
