//! Run configuration, binary checkpoints and CSV series.

pub mod checkpoint;
pub mod config;
pub mod series;

pub use checkpoint::{load_checkpoint, load_checkpoint_on, save_checkpoint};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use series::{emit_monitor, emit_series, read_series};
