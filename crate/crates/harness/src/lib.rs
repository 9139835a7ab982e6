//! Dataset ingestion, synthetic corpora, split-and-repeat protocols and
//! timing benchmarks around `setrecon-core`.

pub mod error;
pub mod io;
pub mod manifest;
pub mod presets;
pub mod protocol;
pub mod report;
pub mod synth;

pub use error::{HarnessError, Result};
pub use manifest::{ingest_dataset, DatasetManifest};
pub use presets::Preset;
pub use protocol::{benchmark_timing, run_protocol, run_protocol_with, Mode, ProtocolConfig, ProtocolReport};
pub use report::{emit_report, ReportFormat};
pub use synth::{generate_synthetic, GroundTruth, SynthParams};
