//! Desk-scale experiment runner: pruning-rate sweeps and ablations on the toy
//! family, the overhead probe, and the metrics report.

pub mod config;
pub mod family;
pub mod overhead;
pub mod report;
pub mod stats;
pub mod sweep;

pub use config::{Method, Seeds, SweepSpec, TaskSpec, TrainSpec};
pub use family::{Family, FamilyScores};
pub use overhead::{overhead_probe, CostRow, OverheadReport, OverheadSpec};
pub use report::{join, load_audit, load_csv, save_csv, sort_rows, write_csv, MetricRow};
pub use sweep::{run_ablations, run_sweep, SweepResult};
