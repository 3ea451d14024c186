use std::collections::BTreeMap;

use super::*;
use crate::cells::RelayFormat;
use crate::handshake::{cost_of, suite_by_id, Role};
use crate::netsim::{NetConfig, NodeRole, OpCategory, PathConstraints, World};
use crate::registry::ProfileSet;

const CIRCUIT_SUITES: [&str; 5] = [
    "ntor",
    "ntor-v3",
    "hybrid-ml-kem-512",
    "hybrid-sntrup761",
    "kem-ml-kem-512",
];

fn all_on(device: &str) -> BTreeMap<NodeRole, String> {
    super::ROLE_PRIORITY.iter().map(|r| (*r, device.to_string())).collect()
}

#[test]
fn analytic_matches_simulation_on_default_network() {
    for format in [RelayFormat::Fragmented, RelayFormat::Standard] {
        let mut cfg = NetConfig {
            relay_format: format,
            ..NetConfig::default()
        };
        cfg.nodes[2].bandwidth_bps = Some(10e6);
        cfg.nodes[5].latency_ms = Some(1.5);
        let mut w = World::new(cfg, ProfileSet::default_set(), 5).unwrap();
        for suite in CIRCUIT_SUITES {
            if format == RelayFormat::Standard && w.suite(suite).unwrap().onionskin_len(0) > 494 {
                continue;
            }
            for _ in 0..4 {
                let p = w.select_path(&PathConstraints::default()).unwrap();
                let (h, t) = w.build_circuit(&p, suite).unwrap();
                let a = analytic_build_time(&w, &p, suite).unwrap();
                assert!(
                    (t.as_millis_f64() - a).abs() < 1e-3,
                    "{suite} {format:?}: sim {t} analytic {a}"
                );
                w.close_circuit(h).unwrap();
            }
        }
    }
}

#[test]
fn homogeneous_devices_give_zero_spread() {
    let cfg = super::apply_device_map(&NetConfig::default().with_uniform_links(93.8e6, 0.0), &all_on("pi5"));
    let mut w = World::new(cfg, ProfileSet::default_set(), 3).unwrap();
    let b = run_circuit_benchmark(&mut w, 40, "ntor-v3").unwrap();
    assert_eq!(b.failures, 0);
    assert_eq!(b.stats.stdev, 0.0);
    assert_eq!(b.stats.n, 40);
}

#[test]
fn two_guard_classes_are_bimodal() {
    let mut cfg = super::apply_device_map(&NetConfig::default().with_uniform_links(93.8e6, 0.0), &all_on("pi5"));
    cfg.node_mut("g3").unwrap().device = "pi4b".into();
    let p = ProfileSet::default_set();
    let mut w = World::new(cfg, p.clone(), 4).unwrap();
    let b = run_circuit_benchmark(&mut w, 200, "ntor-v3").unwrap();
    let suite = w.suite("ntor-v3").unwrap();
    let delta = cost_of(&suite, Role::Server, p.device("pi4b").unwrap()).unwrap()
        - cost_of(&suite, Role::Server, p.device("pi5").unwrap()).unwrap();
    assert!(
        ((b.stats.max - b.stats.min) - delta).abs() < 1e-5,
        "{} vs {delta}",
        b.stats.max - b.stats.min
    );
    let mut distinct: Vec<f64> = b.build_times_ms.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    assert_eq!(distinct.len(), 2);
}

fn small_workload() -> Workload {
    Workload {
        network: NetConfig::default().with_uniform_links(93.8e6, 0.0),
        seed: 9,
        circuits: 12,
        fetches: 2,
        request_bytes: 200,
        response_bytes: 4000,
    }
}

fn estimate(candidate: &str, device: &str) -> OverheadReport {
    let p = ProfileSet::default_set();
    let base = suite_by_id(&p, "ntor").unwrap();
    let cand = suite_by_id(&p, candidate).unwrap();
    estimate_overhead(&p, &base, &cand, &all_on(device), &small_workload()).unwrap()
}

#[test]
fn hybrid_adds_exactly_the_kem_exchange() {
    let r = estimate("hybrid-ml-kem-512", "pi5");
    assert_eq!(r.per_device.len(), 1);
    assert!(
        (r.per_device[0].per_hop_ms - 0.161).abs() < 0.0005,
        "{:?}",
        r.per_device
    );
    assert!((r.crypto_delta_ms - 3.0 * r.per_device[0].per_hop_ms).abs() < 1e-12);
    assert!(r.onionskin_delta_bytes > 0 && r.wire_delta_bytes > 0 && r.cell_delta > 0);
    assert!(r.transfer_delta_ms > 0.0);
    assert!((r.analytic_delta_ms - r.measured_build_delta_ms).abs() < 1.0);
    assert!(r.proportional_projection_ms >= r.baseline_build.mean);
}

#[test]
fn pure_ml_kem_is_faster_on_the_client() {
    let r = estimate("kem-ml-kem-512", "client-x86");
    assert!(r.per_device[0].per_hop_ms < 0.0);
    assert!((r.per_device[0].per_hop_ms - (0.0835 - 0.1659)).abs() < 0.001);
}

#[test]
fn sntrup_on_pi4b_costs_about_42_ms_per_hop() {
    let r = estimate("kem-sntrup761", "pi4b");
    assert!((r.per_device[0].per_hop_ms - 42.4).abs() < 0.1, "{:?}", r.per_device);
    assert!((r.analytic_delta_ms - r.measured_build_delta_ms).abs() < 1.0);
    let pi4b: Vec<&KeRatio> = r.ke_ratios.iter().filter(|k| k.device == "pi4b").collect();
    let vs512 = pi4b.iter().find(|k| k.denominator == "ml-kem-512").unwrap();
    let vsx = pi4b.iter().find(|k| k.denominator == "x25519").unwrap();
    assert!((vs512.ratio - 1.14).abs() < 0.01 && (vsx.ratio - 1.09).abs() < 0.01);
    let client = r.ke_ratios.iter().find(|k| k.device == "client-x86").unwrap();
    assert!((client.ratio - 1.99).abs() < 0.01);
}

#[test]
fn missing_rates_are_reported() {
    let p = ProfileSet::default_set();
    let base = suite_by_id(&p, "ntor").unwrap();
    let cand = suite_by_id(&p, "hybrid-ml-kem-768").unwrap();
    let r = estimate_overhead(&p, &base, &cand, &all_on("client-x86"), &small_workload());
    assert!(
        matches!(r, Err(BenchError::Handshake(_)) | Err(BenchError::Registry(_))),
        "{r:?}"
    );
}

#[test]
fn frequency_conservation_and_shares() {
    let mut w = World::default_network(21).unwrap();
    w.reset_counters();
    let mut cells_fwd = 0;
    for _ in 0..10 {
        let p = w.select_path(&PathConstraints::default()).unwrap();
        let (h, _) = w.build_circuit(&p, "ntor-v3").unwrap();
        w.reset_counters();
        let r = w.fetch(h, 2000, 8000).unwrap();
        cells_fwd += r.cells_fwd;
        let t = op_frequency_report(&w);
        assert_eq!(t.total(OpCategory::RelayUnwrapForward), 3 * r.cells_fwd as u64);
        w.close_circuit(h).unwrap();
    }
    assert!(cells_fwd > 0);
    let t = op_frequency_report(&w);
    for (i, _) in t.categories.iter().enumerate() {
        let sum: f64 = t.roles.values().map(|v| v[i]).sum();
        assert!(sum == 0.0 || (sum - 1.0).abs() < 1e-12);
    }
    for n in t.nodes.iter().filter(|n| n.role == NodeRole::Authority) {
        assert_eq!(&n.counts[..3], &[0, 0, 0]);
    }
}

#[test]
fn onion_service_dominates_handshakes_under_os_load() {
    let mut w = World::default_network(22).unwrap();
    w.reset_counters();
    let r = run_onion_benchmark(&mut w, 8, "svc", "ntor", 100, 1000).unwrap();
    assert_eq!(r.failures, 0);
    let t = op_frequency_report(&w);
    let os = t.share(NodeRole::OnionService, OpCategory::HandshakeServer);
    for role in [NodeRole::Guard, NodeRole::Middle, NodeRole::Exit] {
        let per_node = t.nodes.iter().filter(|n| n.role == role).count() as f64;
        assert!(os > t.share(role, OpCategory::HandshakeServer) / per_node, "{role:?}");
    }
}

#[test]
fn fetch_benchmark_reports_circuit_overhead() {
    let mut w = World::default_network(23).unwrap();
    let f = run_fetch_benchmark(&mut w, 3, "ntor", 100, 1000).unwrap();
    assert!(f.overhead_ms > 0.0);
    assert_eq!(f.circuit.n, 3);
}

#[test]
fn report_formats() {
    let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    let csv = String::from_utf8(emit_report(&Report::Stats(s.clone()), ReportFormat::Csv).unwrap()).unwrap();
    assert_eq!(
        csv,
        "n,mean,median,min,max,stdev,q1,q3\n4,2.500000,2.500000,1.000000,4.000000,1.290994,1.750000,3.250000\n"
    );
    assert!(emit_report(&Report::Stats(s), ReportFormat::V3bw).is_err());
    assert!(matches!(
        "xml".parse::<ReportFormat>(),
        Err(BenchError::UnknownFormat(_))
    ));
    assert_eq!(
        report_file_name("build-circuits", 7, ReportFormat::Csv),
        "build-circuits-7.csv"
    );

    let mut w = World::default_network(24).unwrap();
    let bw = bandwidth_report(&mut w, 10).unwrap();
    assert_eq!(bw.len(), 9);
    let v3 = String::from_utf8(emit_report(&Report::Bandwidth(bw.clone()), ReportFormat::V3bw).unwrap()).unwrap();
    let first = v3.lines().next().unwrap();
    assert_eq!(first, format!("node_id={} bw=93800000", hex::encode(bw[0].node_id)));
    let again = bandwidth_report(&mut World::default_network(24).unwrap(), 10).unwrap();
    assert_eq!(
        emit_report(&Report::Bandwidth(again), ReportFormat::Markdown).unwrap(),
        emit_report(&Report::Bandwidth(bw), ReportFormat::Markdown).unwrap()
    );
}
