//! Scenario replay: scripted targets and obstacles, the closed loop, and the
//! metrics it leaves behind.

mod generate;
mod metrics;
mod run;
mod scenario;

use thiserror::Error;

pub use generate::{
    circle_reference, counter_rotating, experiment, mirror_orientation, reachability_grid, EXPERIMENTS, GRID_OFFSET,
    GRID_X, GRID_Y, GRID_Z, O1, O2, P1, P2, TARGET_TIMEOUT,
};
pub use metrics::{
    header, is_unimodal, read_csv, summarize, write_csv, ArmMetrics, Phase, ReachSegment, Summary, TickMetrics,
    PROXIMITY_EPISODE_DISTANCE, SLACK_COLUMNS, UNIMODAL_TOLERANCE,
};
pub use run::{run_resolved, run_scenario, RunOptions, RunOutput};
pub use scenario::{
    resolve, CirclePlane, CircleSpec, DiscreteTarget, MovingObstacle, Overrides, Resolved, Scenario, StaticBox,
    TimedEvent, Tolerance, BUILTIN_CONFIG, BUILTIN_MODEL, SCENARIO_FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("unresolvable reference {0:?}")]
    Ref(String),
    #[error("model {0}: {1}")]
    Model(String, String),
    #[error("controller config: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("metrics csv: {0}")]
    Csv(String),
    #[error("empty metrics stream")]
    EmptyStream,
}
