use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use stochbt::system::{
    build_heat, build_ladder, example2_p, example_noerrbound, example_two_state, load,
    two_state_type2_p, HeatParams, LadderParams,
};
use stochbt::{StochasticSystem, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    /// Two-state system without a type I bound (`--a`).
    Example1,
    /// Two-state system of the type I/II comparison table.
    #[value(name = "sec4a")]
    TwoState,
    /// example1 paired with its type II Gramian family (`--a`, `--p`).
    Example2,
    /// RLC ladder with noisy inductances (`--n`).
    Ladder,
    /// Heat equation with a noisy Robin edge (`--grid`).
    Heat,
}

/// Where the system comes from: a JSON file or a builtin benchmark.
#[derive(Args, Clone, Debug)]
pub struct SystemArgs {
    /// System file in the JSON format.
    #[arg(required_unless_present = "builtin")]
    pub file: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "file")]
    pub builtin: Option<Builtin>,
    /// Parameter `a > 1` of example1/example2.
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    /// Parameter `0 < p <= 1` of example2.
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    /// Ladder order (even, >= 4).
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Interior grid size of the heat benchmark.
    #[arg(long, default_value_t = 10)]
    pub grid: usize,
}

pub struct Source {
    pub system: StochasticSystem,
    /// Type II reachability Gramian shipped with the builtin, if any.
    pub reference_p: Option<SymMatrix>,
    pub label: String,
}

impl SystemArgs {
    pub fn resolve(&self) -> Result<Source> {
        if let Some(path) = &self.file {
            let system = load(path)?;
            return Ok(Source {
                system,
                reference_p: None,
                label: path.display().to_string(),
            });
        }
        let Some(builtin) = self.builtin else {
            bail!("either a system file or --builtin is required");
        };
        let (system, reference_p, label) = match builtin {
            Builtin::Example1 => (
                example_noerrbound(self.a)?,
                None,
                format!("example1(a={})", self.a),
            ),
            Builtin::TwoState => (
                example_two_state(),
                Some(two_state_type2_p()),
                "sec4a".to_string(),
            ),
            Builtin::Example2 => (
                example_noerrbound(self.a)?,
                Some(example2_p(self.p)?),
                format!("example2(a={}, p={})", self.a, self.p),
            ),
            Builtin::Ladder => (
                build_ladder(self.n, LadderParams::default())?,
                None,
                format!("ladder(n={})", self.n),
            ),
            Builtin::Heat => (
                build_heat(self.grid, HeatParams::default())?,
                None,
                format!("heat(grid={})", self.grid),
            ),
        };
        Ok(Source {
            system,
            reference_p,
            label,
        })
    }
}
