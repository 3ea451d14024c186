#![allow(dead_code)]

use onionsim::handshake::{client_finish, client_init, server_respond, HandshakeKeys, ServerKeys, SuiteSpec};
use onionsim::registry::{DeviceProfile, ProfileSet};
use onionsim::toy_crypto::derive_seed;
use rand::Rng;

pub const NODE_ID: [u8; 20] = [0x5a; 20];

/// One complete handshake with every secret derived from `seed`.
pub fn exchange(suite: &SuiteSpec, seed: u64) -> (HandshakeKeys, HandshakeKeys) {
    let root = seed.to_be_bytes();
    let server = ServerKeys::generate([suite], NODE_ID, &derive_seed(&root, "server", 0)).unwrap();
    let pk = server.public(suite).unwrap().static_pk;
    let (st, skin) = client_init(suite, &NODE_ID, &pk, &derive_seed(&root, "client", 0)).unwrap();
    let (reply, skeys) = server_respond(suite, &server, &skin, &derive_seed(&root, "respond", 0)).unwrap();
    (client_finish(st, &reply).unwrap(), skeys)
}

/// Reference summary statistics that never sort: order statistics come from
/// rank counting, quartiles from interpolating between ranks ⌊h⌋ and ⌈h⌉
/// with h = (n − 1)·p.
pub struct RefStats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub stdev: f64,
    pub q1: f64,
    pub q3: f64,
}

fn kth_smallest(v: &[f64], k: usize) -> f64 {
    for &x in v {
        let below = v.iter().filter(|y| **y < x).count();
        let at_most = v.iter().filter(|y| **y <= x).count();
        if below <= k && k < at_most {
            return x;
        }
    }
    unreachable!("every rank has an element")
}

fn ref_percentile(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor(), h.ceil());
    let (a, b) = (kth_smallest(v, lo as usize), kth_smallest(v, hi as usize));
    a + (h - lo) * (b - a)
}

pub fn reference_stats(v: &[f64]) -> RefStats {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    RefStats {
        mean,
        median: ref_percentile(v, 0.5),
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        stdev: var.sqrt(),
        q1: ref_percentile(v, 0.25),
        q3: ref_percentile(v, 0.75),
    }
}

/// `|a − b|` within `rel` of the data scale.
pub fn close(a: f64, b: f64, scale: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * scale.max(1e-300)
}

/// Every default device with each rate scaled by a factor in [0.05, 20] and
/// each fixed cost redrawn from [0, 5) ms.
pub fn random_cost_tables(rng: &mut impl Rng) -> ProfileSet {
    let mut p = ProfileSet::default_set();
    for d in ProfileSet::default_set().devices() {
        let mut dev: DeviceProfile = d.clone();
        for r in dev.rates.values_mut() {
            *r *= rng.random_range(0.05..20.0);
        }
        for c in dev.fixed_costs.values_mut() {
            *c = rng.random_range(0.0..5.0);
        }
        p = p.with_device(dev).unwrap();
    }
    p
}
