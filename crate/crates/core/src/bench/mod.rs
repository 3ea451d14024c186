//! Experiments over a [`World`](crate::netsim::World) and their reports.

mod analytic;
mod freq;
mod overhead;
mod report;
mod runs;
mod stats;

#[cfg(test)]
mod tests;

pub use analytic::{analytic_build_time, circuit_cell_transmissions, hop_cells, relay_cells, HopCells};
pub use freq::{op_frequency_report, primary_role, FrequencyTable, NodeFrequency, FREQUENCY_CATEGORIES, ROLE_PRIORITY};
pub use overhead::{apply_device_map, estimate_overhead, ke_ratios, DeviceDelta, KeRatio, OverheadReport, Workload};
pub use report::{emit_report, report_file_name, BandwidthEntry, Report, ReportFormat};
pub use runs::{
    run_circuit_benchmark, run_fetch_benchmark, run_onion_benchmark, CircuitBenchmark, FetchBenchmark, OnionBenchmark,
};
pub use stats::{summarize, Stats};

use crate::handshake::HandshakeError;
use crate::netsim::{NetError, World};
use crate::registry::RegistryError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("no durations to summarize")]
    EmptyInput,
    #[error("every run failed ({0} failures)")]
    NoSuccessfulRuns(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown report format `{0}` (expected markdown, csv or v3bw)")]
    UnknownFormat(String),
    #[error("a {report} report has no {format} form")]
    UnsupportedFormat { report: &'static str, format: &'static str },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Handshake(#[from] HandshakeError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

/// Probes every relay from the client and lists the estimates.
pub fn bandwidth_report(world: &mut World, packets: usize) -> Result<Vec<BandwidthEntry>, BenchError> {
    let measured = world.measure_relays(packets)?;
    Ok(measured
        .into_iter()
        .map(|(id, bps)| BandwidthEntry {
            nickname: world
                .nodes()
                .iter()
                .find(|n| n.node_id == id)
                .map(|n| n.nickname.clone())
                .unwrap_or_default(),
            node_id: id,
            bandwidth_bps: bps,
        })
        .collect())
}
