//! Branching random walk: offspring laws, exact aggregated sampling, and the
//! count-based simulation engine.

mod engine;
pub mod offspring;
mod sampling;
mod space;

pub use engine::{
    run, run_with, step, step_with, GenerationRecord, ObserverConfig, Population, RunOptions,
    TrajectorySummary, DEFAULT_POPULATION_CAP, MAX_CYLINDER_DEPTH,
};
pub(crate) use engine::run_depth_projected;
pub use offspring::{OffspringDistribution, OffspringSpec, TAIL_BOUND};
pub(crate) use sampling::binomial_draw;
pub use sampling::{SamplingMode, APPROX_THRESHOLD};
