use std::collections::BTreeMap;

use serde::Serialize;

use crate::cells::CELL_LEN;
use crate::handshake::{cost_of, Role, SuiteSpec};
use crate::netsim::{NetConfig, NodeRole, World};
use crate::registry::{kem_exchange_time, ProfileSet};

use super::{
    analytic_build_time, circuit_cell_transmissions, primary_role, run_circuit_benchmark, run_fetch_benchmark,
    BenchError, Stats,
};

const HOPS: usize = 3;
const HOP_ROLES: [NodeRole; HOPS] = [NodeRole::Guard, NodeRole::Middle, NodeRole::Exit];

/// Network and traffic for an overhead estimate.
#[derive(Clone, Debug)]
pub struct Workload {
    pub network: NetConfig,
    pub seed: u64,
    pub circuits: usize,
    pub fetches: usize,
    pub request_bytes: usize,
    pub response_bytes: usize,
}

impl Default for Workload {
    fn default() -> Self {
        Workload {
            network: NetConfig::default(),
            seed: 0,
            circuits: 100,
            fetches: 10,
            request_bytes: 500,
            response_bytes: 50_000,
        }
    }
}

/// Handshake crypto deltas (candidate minus baseline) on one device.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviceDelta {
    pub device: String,
    pub client_ms: f64,
    pub server_ms: f64,
    /// Client and server side of one hop, both on this device.
    pub per_hop_ms: f64,
}

/// One T_KE ratio between two key-exchange schemes on a device.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KeRatio {
    pub device: String,
    pub numerator: String,
    pub denominator: String,
    pub numerator_ms: f64,
    pub denominator_ms: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverheadReport {
    pub baseline: String,
    pub candidate: String,
    pub client_device: String,
    pub hop_devices: Vec<String>,
    pub per_device: Vec<DeviceDelta>,
    /// Crypto delta over a 3-hop build with the mapped devices.
    pub crypto_delta_ms: f64,
    pub onionskin_delta_bytes: i64,
    pub reply_delta_bytes: i64,
    /// Handshake bytes over the 3 hops.
    pub handshake_delta_bytes: i64,
    /// Cell transmissions over all links crossed during a 3-hop build.
    pub cell_delta: i64,
    pub wire_delta_bytes: i64,
    /// Extra link time of the larger handshakes at the configured links.
    pub transfer_delta_ms: f64,
    /// Closed-form build time delta on a representative path.
    pub analytic_delta_ms: f64,
    pub baseline_analytic_ms: f64,
    pub candidate_analytic_ms: f64,
    pub baseline_build: Stats,
    pub candidate_build: Stats,
    pub measured_build_delta_ms: f64,
    pub baseline_fetch_ms: f64,
    pub candidate_fetch_ms: f64,
    pub measured_fetch_delta_ms: f64,
    /// Additive model: measured baseline mean plus the analytic delta.
    pub additive_projection_ms: f64,
    /// Proportional model: measured baseline mean scaled by the analytic
    /// candidate/baseline ratio.
    pub proportional_projection_ms: f64,
    /// Analytic delta relative to the measured baseline mean.
    pub relative_delta: f64,
    pub ke_ratios: Vec<KeRatio>,
}

/// Ratios printed alongside every estimate: ML-KEM-768 against both
/// ML-KEM-512 and X25519, and X25519 against ML-KEM-512.
const RATIO_PAIRS: [(&str, &str); 3] = [
    ("ml-kem-768", "ml-kem-512"),
    ("ml-kem-768", "x25519"),
    ("x25519", "ml-kem-512"),
];

pub fn ke_ratios(profiles: &ProfileSet) -> Vec<KeRatio> {
    let mut out = Vec::new();
    for d in profiles.devices() {
        for (num, den) in RATIO_PAIRS {
            let (Ok(a), Ok(b)) = (profiles.scheme(num), profiles.scheme(den)) else {
                continue;
            };
            if let (Ok(n), Ok(m)) = (kem_exchange_time(d, a), kem_exchange_time(d, b)) {
                out.push(KeRatio {
                    device: d.id.clone(),
                    numerator: num.into(),
                    denominator: den.into(),
                    numerator_ms: n,
                    denominator_ms: m,
                    ratio: n / m,
                });
            }
        }
    }
    out
}

/// Network with every node whose roles appear in `device_map` moved to the
/// mapped device (highest-priority role wins).
pub fn apply_device_map(network: &NetConfig, device_map: &BTreeMap<NodeRole, String>) -> NetConfig {
    let mut cfg = network.clone();
    for node in &mut cfg.nodes {
        if let Some(d) = super::ROLE_PRIORITY
            .iter()
            .filter(|r| node.roles.contains(r))
            .find_map(|r| device_map.get(r))
        {
            node.device = d.clone();
        }
    }
    cfg
}

fn first_with(world: &World, role: NodeRole) -> Result<usize, BenchError> {
    world
        .nodes()
        .iter()
        .position(|n| n.has_role(role) && primary_role(n) == role)
        .or_else(|| world.nodes().iter().position(|n| n.has_role(role)))
        .ok_or(BenchError::InvalidArgument(format!(
            "no node with role {}",
            role.name()
        )))
}

fn ensure_suite(world: &mut World, suite: &SuiteSpec) -> Result<(), BenchError> {
    if world.suite(&suite.id).is_err() {
        world.register_suite(suite.clone())?;
    }
    Ok(())
}

pub fn estimate_overhead(
    profiles: &ProfileSet,
    baseline: &SuiteSpec,
    candidate: &SuiteSpec,
    device_map: &BTreeMap<NodeRole, String>,
    workload: &Workload,
) -> Result<OverheadReport, BenchError> {
    let network = apply_device_map(&workload.network, device_map);
    let fresh = || -> Result<World, BenchError> {
        let mut w = World::new(network.clone(), profiles.clone(), workload.seed)?;
        ensure_suite(&mut w, baseline)?;
        ensure_suite(&mut w, candidate)?;
        Ok(w)
    };
    let probe = fresh()?;
    let client = probe.client()?;
    let path = HOP_ROLES
        .iter()
        .map(|r| first_with(&probe, *r))
        .collect::<Result<Vec<_>, _>>()?;
    let device_of = |i: usize| probe.nodes()[i].device.clone();
    let client_device = device_of(client);
    let hop_devices: Vec<String> = path.iter().map(|i| device_of(*i)).collect();

    let delta = |role: Role, device: &str| -> Result<f64, BenchError> {
        let d = profiles.device(device)?;
        Ok(cost_of(candidate, role, d)? - cost_of(baseline, role, d)?)
    };
    let mut devices: Vec<String> = hop_devices.clone();
    devices.push(client_device.clone());
    devices.sort();
    devices.dedup();
    let per_device = devices
        .iter()
        .map(|d| {
            let (c, s) = (delta(Role::Client, d)?, delta(Role::Server, d)?);
            Ok(DeviceDelta {
                device: d.clone(),
                client_ms: c,
                server_ms: s,
                per_hop_ms: c + s,
            })
        })
        .collect::<Result<Vec<_>, BenchError>>()?;
    let client_delta = delta(Role::Client, &client_device)?;
    let mut crypto_delta_ms = 0.0;
    for d in &hop_devices {
        crypto_delta_ms += client_delta + delta(Role::Server, d)?;
    }

    let len_delta = |f: fn(&SuiteSpec, usize) -> usize| f(candidate, 0) as i64 - f(baseline, 0) as i64;
    let onionskin_delta_bytes = len_delta(SuiteSpec::onionskin_len);
    let reply_delta_bytes = len_delta(SuiteSpec::reply_len);
    let format = network.relay_format;
    let cell_delta = circuit_cell_transmissions(candidate, format, HOPS) as i64
        - circuit_cell_transmissions(baseline, format, HOPS) as i64;

    let baseline_analytic_ms = analytic_build_time(&probe, &path, &baseline.id)?;
    let candidate_analytic_ms = analytic_build_time(&probe, &path, &candidate.id)?;
    let analytic_delta_ms = candidate_analytic_ms - baseline_analytic_ms;

    let measure = |suite: &str| -> Result<(Stats, f64), BenchError> {
        let mut w = fresh()?;
        let build = run_circuit_benchmark(&mut w, workload.circuits, suite)?;
        let fetch = run_fetch_benchmark(
            &mut w,
            workload.fetches,
            suite,
            workload.request_bytes,
            workload.response_bytes,
        )?;
        Ok((build.stats, fetch.circuit.mean))
    };
    let (baseline_build, baseline_fetch_ms) = measure(&baseline.id)?;
    let (candidate_build, candidate_fetch_ms) = measure(&candidate.id)?;

    Ok(OverheadReport {
        baseline: baseline.id.clone(),
        candidate: candidate.id.clone(),
        client_device,
        hop_devices,
        per_device,
        crypto_delta_ms,
        onionskin_delta_bytes,
        reply_delta_bytes,
        handshake_delta_bytes: HOPS as i64 * (onionskin_delta_bytes + reply_delta_bytes),
        cell_delta,
        wire_delta_bytes: cell_delta * CELL_LEN as i64,
        transfer_delta_ms: analytic_delta_ms - crypto_delta_ms,
        analytic_delta_ms,
        baseline_analytic_ms,
        candidate_analytic_ms,
        measured_build_delta_ms: candidate_build.mean - baseline_build.mean,
        additive_projection_ms: baseline_build.mean + analytic_delta_ms,
        proportional_projection_ms: baseline_build.mean * candidate_analytic_ms / baseline_analytic_ms,
        relative_delta: analytic_delta_ms / baseline_build.mean,
        baseline_build,
        candidate_build,
        baseline_fetch_ms,
        candidate_fetch_ms,
        measured_fetch_delta_ms: candidate_fetch_ms - baseline_fetch_ms,
        ke_ratios: ke_ratios(profiles),
    })
}
