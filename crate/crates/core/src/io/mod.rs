//! Configuration files, snapshots and time series.

pub mod config;
pub mod snapshot;
pub mod timeseries;

pub use config::{dump_config, load_config, parse_config};
pub use snapshot::Snapshot;
pub use timeseries::{read_series, SeriesWriter};
