//! Steady and transient runs, timestep control, CFL statistics, sweeps and
//! their file outputs.

mod cfl;
mod config;
mod output;
mod run;
mod timestep;

pub use cfl::{cfl, outflow, CflMean, CflStats};
pub use config::{
    BoundaryConfig, DomeConfig, FieldConfig, FieldSource, FiveSpot, GridConfig, InitialConfig, OutputConfig, Problem,
    PropsConfig, SideCondition, SimConfig, SweepConfig,
};
pub use output::{write_steps_csv, write_sweep_csv, Summary};
pub use run::{
    run_steady, run_sweep, run_transient, solve, sweep_configs, Solution, SteadyResult, StepRecord, SweepRow,
    TransientResult,
};
pub use timestep::{next_dt, TimestepController};
