//! Mobility analytics over call detail records.
//!
//! The pipeline runs ingest ([`ingest`]) into a per-subscriber event store,
//! splits it into trajectories and inter-event samples ([`trajectory`]),
//! bins them ([`stats`]), fits waiting-time and displacement laws ([`fit`]),
//! and can generate synthetic populations with known parameters ([`generate`]).

pub mod analysis;
pub mod coords;
pub mod fit;
pub mod generate;
pub mod ingest;
pub mod numeric;
pub mod stats;
pub mod trajectory;
pub mod window;

pub use coords::CoordSystem;
pub use fit::{FitError, FitRecord, FitResult, Model};
pub use ingest::{CdrRecord, Event, IngestConfig, IngestError, IngestSummary, SubscriberId, TrajectoryStore};
pub use stats::{Histogram, StatsError};
pub use trajectory::{ClosedRange, IntervalSample, TrajectoryMode};
pub use window::ObservationWindow;
