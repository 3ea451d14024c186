//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::time::Instant;

use common::{close, exchange, random_cost_tables, reference_stats, NODE_ID};
use onionsim::bench::{analytic_build_time, run_fetch_benchmark, summarize};
use onionsim::cells::{fragment_count, RelayCommand, RelayFormat, RelayMsg, PAYLOAD_LEN};
use onionsim::handshake::{client_finish, client_init, default_suites, server_respond, ServerKeys};
use onionsim::netsim::{NetConfig, PathConstraints, World};
use onionsim::onion::{relay_originate_backward, relay_unwrap_forward, relay_wrap_backward, CircuitKeys, HopState};
use onionsim::registry::{kem_exchange_time, sig_op_times, ProfileSet};
use onionsim::toy_crypto::{derive_seed, prf_expand};
use onionsim::VirtualTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const KE_TOL_MS: f64 = 0.01;
const SNTRUP_RATIO: (f64, f64) = (44.0, 50.0);
const FALCON_ED_SIGN: (f64, f64) = (4.85, 0.1);
const DILITHIUM_FALCON_KEYPAIR: (f64, f64) = (178.0, 1.0);
const EXCHANGES_PER_SUITE: u64 = 1000;
const HANDSHAKE_BUDGET_S: f64 = 30.0;
const IDEAL_BUILD: VirtualTime = VirtualTime::from_micros(3_900);
const ANALYTIC_TOL_MS: f64 = 1e-3;
const STATS_TRIALS: usize = 10_000;
const STATS_REL: f64 = 1e-9;
const DEFAULT_BANDWIDTH_BPS: f64 = 93.8e6;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn criterion_1() -> Outcome {
    let p = ProfileSet::default_set();
    let expected = [
        ("pi4b", "x25519", 0.957),
        ("pi4b", "ml-kem-512", 0.911),
        ("pi4b", "sntrup761", 43.30),
        ("pi5", "x25519", 0.167),
        ("pi5", "ml-kem-512", 0.161),
        ("client-x86", "x25519", 0.1659),
        ("client-x86", "ml-kem-512", 0.0835),
    ];
    let mut worst: f64 = 0.0;
    for (dev, scheme, want) in expected {
        let got = kem_exchange_time(
            p.device(dev).map_err(|e| e.to_string())?,
            p.scheme(scheme).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let err = (got - want).abs();
        ensure(err <= KE_TOL_MS, format!("{dev}/{scheme}: {got:.4} ms vs {want} ms"))?;
        worst = worst.max(err);
    }
    Ok(format!(
        "7 key-exchange times, worst error {worst:.4} ms (tol {KE_TOL_MS})"
    ))
}

fn criterion_2() -> Outcome {
    let p = ProfileSet::default_set();
    let s = |id: &str| p.scheme(id).unwrap();
    let pi4b = p.device("pi4b").unwrap();
    let pi5 = p.device("pi5").unwrap();
    let oqs = p.device("oqs-x86-ref").unwrap();
    let ke = |d, id| kem_exchange_time(d, s(id)).unwrap();
    let sntrup = ke(pi4b, "sntrup761") / ke(pi4b, "x25519");
    ensure(
        (SNTRUP_RATIO.0..=SNTRUP_RATIO.1).contains(&sntrup),
        format!("sntrup761/x25519 {sntrup:.2}"),
    )?;
    let sign = sig_op_times(pi5, s("falcon-512")).unwrap().sign_ms / sig_op_times(pi5, s("ed25519")).unwrap().sign_ms;
    ensure(
        (sign - FALCON_ED_SIGN.0).abs() <= FALCON_ED_SIGN.1,
        format!("falcon/ed25519 sign {sign:.3}"),
    )?;
    let kp = |id| sig_op_times(oqs, s(id)).unwrap().keypair_ms.unwrap();
    let keypair = kp("falcon-512") / kp("dilithium2");
    ensure(
        (keypair - DILITHIUM_FALCON_KEYPAIR.0).abs() <= DILITHIUM_FALCON_KEYPAIR.1,
        format!("dilithium2/falcon-512 keypair {keypair:.2}"),
    )?;
    Ok(format!(
        "sntrup761/x25519 {sntrup:.2}, falcon/ed25519 sign {sign:.3}, dilithium2/falcon keypair {keypair:.1}"
    ))
}

fn criterion_3() -> Outcome {
    let p = ProfileSet::default_set();
    let cases = [("ml-kem-512", 800, 2), ("falcon-512", 897, 2), ("ml-kem-768", 1184, 3)];
    for (id, len, cells) in cases {
        let pk = p.scheme(id).map_err(|e| e.to_string())?.pk_len;
        ensure(pk == len, format!("{id} public key is {pk} bytes"))?;
        ensure(
            fragment_count(pk) == cells,
            format!("{id}: {} cells", fragment_count(pk)),
        )?;
        let msgs = onionsim::cells::fragment_payload(&vec![0u8; pk], RelayFormat::Fragmented, RelayCommand::Data, 1)
            .map_err(|e| e.to_string())?;
        ensure(
            msgs.len() == cells,
            format!("{id}: fragmenter produced {} cells", msgs.len()),
        )?;
    }
    Ok("800 B -> 2, 897 B -> 2, 1184 B -> 3 relay cells".into())
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let suites = default_suites(&ProfileSet::default_set()).map_err(|e| e.to_string())?;
    let mut tampers = 0usize;
    for suite in &suites {
        for seed in 0..EXCHANGES_PER_SUITE {
            let (c, s) = exchange(suite, seed);
            ensure(c.auth_ok && c == s, format!("{} seed {seed}: keys disagree", suite.id))?;
        }
        let root = b"tamper";
        let server = ServerKeys::generate([suite], NODE_ID, &derive_seed(root, "server", 0)).unwrap();
        let pk = server.public(suite).unwrap().static_pk;
        let (state, skin) = client_init(suite, &NODE_ID, &pk, &derive_seed(root, "client", 0)).unwrap();
        let respond_seed = derive_seed(root, "respond", 0);
        let (reply, _) = server_respond(suite, &server, &skin, &respond_seed).unwrap();
        for pos in 0..skin.len() {
            let mut bad = skin.clone();
            bad[pos] ^= 0x01;
            let accepted = server_respond(suite, &server, &bad, &respond_seed)
                .ok()
                .and_then(|(r, _)| client_finish(state.clone(), &r).ok())
                .is_some_and(|k| k.auth_ok);
            ensure(!accepted, format!("{}: onionskin tamper at {pos} accepted", suite.id))?;
        }
        for pos in 0..reply.len() {
            let mut bad = reply.clone();
            bad[pos] ^= 0x01;
            let accepted = client_finish(state.clone(), &bad).is_ok_and(|k| k.auth_ok);
            ensure(!accepted, format!("{}: reply tamper at {pos} accepted", suite.id))?;
        }
        tampers += skin.len() + reply.len();
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < HANDSHAKE_BUDGET_S, format!("took {secs:.1} s"))?;
    Ok(format!(
        "{} suites x {EXCHANGES_PER_SUITE} exchanges agree; {tampers} single-byte tampers rejected; {secs:.1} s",
        suites.len()
    ))
}

fn circuit(format: RelayFormat, hops: usize, seed: u64) -> (CircuitKeys, Vec<HopState>) {
    let suites = default_suites(&ProfileSet::default_set()).unwrap();
    let mut client = CircuitKeys::new(format);
    let mut relays = Vec::new();
    for h in 0..hops {
        let (c, s) = exchange(&suites[h % suites.len()], seed * 8 + h as u64);
        client.push_hop(c).unwrap();
        relays.push(HopState::new(s));
    }
    (client, relays)
}

fn criterion_5() -> Outcome {
    let mut checked = 0;
    for format in [RelayFormat::Fragmented, RelayFormat::Standard] {
        let max = format.max_whole_data();
        for hops in 1..=6 {
            for len in [0, 1, max / 2, max] {
                let data = prf_expand(b"c5", &[hops as u8, len as u8], len);
                let msg = RelayMsg::single(format, RelayCommand::Data, &data).map_err(|e| e.to_string())?;
                let target = hops - 1;
                let (mut client, mut relays) = circuit(format, hops, len as u64);
                let mut p = client.client_wrap_forward(&msg, target).map_err(|e| e.to_string())?;
                for (i, r) in relays.iter_mut().enumerate() {
                    let u = relay_unwrap_forward(r, format, &p);
                    ensure(
                        u.recognized == (i == target),
                        format!("{format:?} hops {hops}: hop {i} recognition"),
                    )?;
                    p = u.payload;
                }
                let got = RelayMsg::decode(format, &p).map_err(|e| e.to_string())?;
                ensure(got.data() == &data[..], "forward payload changed")?;
                let mut b = relay_originate_backward(&mut relays[target], format, &msg);
                for r in relays[..target].iter_mut().rev() {
                    b = relay_wrap_backward(r, &b);
                }
                let (from, back) = client.client_peel_backward(&b).map_err(|e| e.to_string())?;
                ensure(from == target && back.data() == &data[..], "backward payload changed")?;
                checked += 1;
            }
        }
    }
    let mut detected = 0;
    for pos in 0..PAYLOAD_LEN {
        let format = RelayFormat::Fragmented;
        let (mut client, mut relays) = circuit(format, 3, 99);
        let msg = RelayMsg::single(format, RelayCommand::Data, b"tag me").unwrap();
        let p = client.client_wrap_forward(&msg, 2).unwrap();
        let g = relay_unwrap_forward(&mut relays[0], format, &p).payload;
        let mut m = relay_unwrap_forward(&mut relays[1], format, &g).payload;
        m[pos] ^= 0x80;
        if !relay_unwrap_forward(&mut relays[2], format, &m).recognized {
            detected += 1;
        }
    }
    ensure(
        detected == PAYLOAD_LEN,
        format!("tagging detected at {detected}/{PAYLOAD_LEN}"),
    )?;
    Ok(format!(
        "{checked} wrap/peel round trips over 1..6 hops; tagging detected {detected}/{PAYLOAD_LEN}"
    ))
}

fn criterion_6() -> Outcome {
    let mut fixed = ProfileSet::default_set();
    for d in ProfileSet::default_set().devices() {
        fixed = fixed.with_device(d.fixed_costs_only()).map_err(|e| e.to_string())?;
    }
    let cfg = NetConfig::default().with_uniform_links(f64::INFINITY, 0.0);
    let mut w = World::new(cfg, fixed, 1).map_err(|e| e.to_string())?;
    let path = w.select_path(&PathConstraints::default()).map_err(|e| e.to_string())?;
    let (_, t) = w.build_circuit(&path, "ntor-v3").map_err(|e| e.to_string())?;
    ensure(t == IDEAL_BUILD, format!("ideal build {t}"))?;

    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut builds = 0;
    for trial in 0..40u64 {
        let profiles = random_cost_tables(&mut rng);
        let mut cfg = NetConfig::default();
        for n in &mut cfg.nodes {
            n.bandwidth_bps = Some(rng.random_range(1e6..1e9));
            n.latency_ms = Some(rng.random_range(0.0..5.0));
        }
        let suite = [
            "ntor",
            "ntor-v3",
            "hybrid-ml-kem-512",
            "hybrid-sntrup761",
            "kem-ml-kem-512",
        ][trial as usize % 5];
        let mut w = World::new(cfg, profiles, trial).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let path = w.select_path(&PathConstraints::default()).map_err(|e| e.to_string())?;
            let (h, t) = w.build_circuit(&path, suite).map_err(|e| e.to_string())?;
            let a = analytic_build_time(&w, &path, suite).map_err(|e| e.to_string())?;
            worst = worst.max((t.as_millis_f64() - a).abs());
            w.close_circuit(h).map_err(|e| e.to_string())?;
            builds += 1;
        }
    }
    ensure(worst <= ANALYTIC_TOL_MS, format!("analytic mismatch {worst} ms"))?;
    Ok(format!(
        "ideal ntor-v3 build = {t}; {builds} randomized builds within {:.1e} ms of analytic",
        worst
    ))
}

fn criterion_7() -> Outcome {
    let s = summarize(&[1.0, 2.0, 3.0, 4.0]).map_err(|e| e.to_string())?;
    ensure(s.q1 == 1.75 && s.q3 == 3.25, format!("q1 {} q3 {}", s.q1, s.q3))?;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for _ in 0..STATS_TRIALS {
        let n = rng.random_range(1..50);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
        let s = summarize(&v).map_err(|e| e.to_string())?;
        let r = reference_stats(&v);
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for (name, a, b) in [
            ("mean", s.mean, r.mean),
            ("median", s.median, r.median),
            ("min", s.min, r.min),
            ("max", s.max, r.max),
            ("stdev", s.stdev, r.stdev),
            ("q1", s.q1, r.q1),
            ("q3", s.q3, r.q3),
        ] {
            ensure(close(a, b, scale, STATS_REL), format!("{name}: {a} vs {b}"))?;
        }
    }
    Ok(format!(
        "{STATS_TRIALS} random inputs match the reference to {STATS_REL:e} relative; q1 1.75, q3 3.25"
    ))
}

fn cli_report(args: &[&str]) -> Result<Vec<u8>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut full = vec!["onionsim", "--seed", "7", "--out", dir.path().to_str().unwrap()];
    full.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = onionsim::cli::run(full, &mut out, &mut err);
    ensure(code == 0, format!("{args:?}: {}", String::from_utf8_lossy(&err)))?;
    std::fs::read(String::from_utf8_lossy(&out).trim()).map_err(|e| e.to_string())
}

fn criterion_8() -> Outcome {
    let experiments: [&[&str]; 7] = [
        &["sim", "build-circuits", "--n", "1000", "--suite", "ntor-v3"],
        &["--format", "csv", "sim", "fetch", "--n", "5"],
        &["sim", "onion-fetch", "--n", "3"],
        &["estimate", "overhead", "--n", "20", "--fetches", "2"],
        &["report", "freq", "--n", "20"],
        &["--format", "v3bw", "report", "bandwidth"],
        &["cells", "dump"],
    ];
    for args in experiments {
        let (a, b) = if args[0] == "cells" {
            let go = || {
                let mut out = Vec::new();
                onionsim::cli::run(["onionsim", "--seed", "7", "cells", "dump"], &mut out, &mut Vec::new());
                out
            };
            (go(), go())
        } else {
            (cli_report(args)?, cli_report(args)?)
        };
        ensure(!a.is_empty() && a == b, format!("{args:?} differs between runs"))?;
    }
    Ok(format!(
        "{} CLI experiments byte-identical across reruns",
        experiments.len()
    ))
}

fn criterion_9() -> Outcome {
    let cfg = NetConfig::default();
    ensure(
        cfg.bandwidth_bps == DEFAULT_BANDWIDTH_BPS,
        format!("default bandwidth {}", cfg.bandwidth_bps),
    )?;
    let mut w = World::default_network(9).map_err(|e| e.to_string())?;
    let f = run_fetch_benchmark(&mut w, 5, "ntor-v3", 500, 50_000).map_err(|e| e.to_string())?;
    ensure(
        (f.overhead_ms - (f.circuit.mean - f.direct.mean)).abs() < 1e-9 && f.overhead_ms > 0.0,
        format!("overhead {} != {} - {}", f.overhead_ms, f.circuit.mean, f.direct.mean),
    )?;
    Ok(format!(
        "hardware figures not attempted; methodology checked: overhead = circuit - direct = {:.3} ms, default link {} Mb/s",
        f.overhead_ms,
        DEFAULT_BANDWIDTH_BPS / 1e6
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "key-exchange times", criterion_1),
        (2, "ratio claims", criterion_2),
        (3, "fragmentation", criterion_3),
        (4, "handshake agreement and tamper rejection", criterion_4),
        (5, "onion layers", criterion_5),
        (6, "simulation accounting", criterion_6),
        (7, "statistics oracle", criterion_7),
        (8, "CLI determinism", criterion_8),
        (9, "hardware results", criterion_9),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        match f() {
            Ok(detail) if n == 9 => println!("PASS {n} {name}: DECLARED NOT REPRODUCIBLE; {detail}"),
            Ok(detail) => println!("PASS {n} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n} {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
