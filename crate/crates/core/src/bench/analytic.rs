//! Closed-form circuit build times.
//!
//! With one circuit in flight every handshake step runs on an idle CPU and
//! every cell train meets idle links. A train of `n` equal cells through a
//! tandem of FIFO links with service times `s_k` and fixed delays `d_k`
//! completes after `Σ(s_k + d_k) + (n − 1)·max s_k`.

use crate::cells::{create2_cell_count, created2_cell_count, fragment_count, RelayFormat, CELL_LEN};
use crate::handshake::{step_cost, Step, SuiteSpec};
use crate::netsim::World;
use crate::VirtualTime;

use super::BenchError;

/// Relay cells needed to carry a relay body of `len` bytes.
pub fn relay_cells(format: RelayFormat, len: usize) -> usize {
    match format {
        RelayFormat::Standard => 1,
        RelayFormat::Fragmented => fragment_count(len),
    }
}

/// Cell counts of one hop's handshake: EXTEND2 and EXTENDED2 relay cells
/// (zero for the first hop) and the CREATE2/CREATED2 cells on the last link.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HopCells {
    pub extend: usize,
    pub extended: usize,
    pub create: usize,
    pub created: usize,
}

pub fn hop_cells(suite: &SuiteSpec, format: RelayFormat, hop: usize) -> HopCells {
    let (skin, reply) = (suite.onionskin_len(0), suite.reply_len(0));
    let relayed = hop > 0;
    HopCells {
        extend: if relayed { relay_cells(format, skin + 4) } else { 0 },
        extended: if relayed { relay_cells(format, reply + 2) } else { 0 },
        create: create2_cell_count(skin),
        created: created2_cell_count(reply),
    }
}

/// Cell transmissions (one per link crossed) to build a circuit of `hops`.
pub fn circuit_cell_transmissions(suite: &SuiteSpec, format: RelayFormat, hops: usize) -> usize {
    (0..hops)
        .map(|h| {
            let c = hop_cells(suite, format, h);
            h * (c.extend + c.extended) + c.create + c.created
        })
        .sum()
}

fn ms(t: VirtualTime) -> f64 {
    t.as_millis_f64()
}

fn ser_ms(bandwidth_bps: f64) -> f64 {
    ms(VirtualTime::from_millis_f64(
        CELL_LEN as f64 * 8.0 / bandwidth_bps * 1e3,
    ))
}

/// Time for `cells` back-to-back cells to cross `route` hop by hop.
fn train_ms(world: &World, route: &[usize], cells: usize) -> f64 {
    if cells == 0 {
        return 0.0;
    }
    let nodes = world.nodes();
    let (mut sum, mut worst) = (0.0, 0.0f64);
    for pair in route.windows(2) {
        for n in [&nodes[pair[0]], &nodes[pair[1]]] {
            let s = ser_ms(n.bandwidth_bps);
            sum += s + ms(VirtualTime::from_millis_f64(n.latency_ms));
            worst = worst.max(s);
        }
    }
    sum + (cells - 1) as f64 * worst
}

/// Expected virtual build time in ms of a circuit from the first client
/// along `path` on an otherwise idle network.
pub fn analytic_build_time(world: &World, path: &[usize], suite_id: &str) -> Result<f64, BenchError> {
    let suite = world.suite(suite_id)?;
    let owner = world.client()?;
    let format = world.relay_format();
    let device = |i: usize| world.profiles().device(&world.nodes()[i].device);
    let step = |s: Step, i: usize| -> Result<f64, BenchError> {
        Ok(ms(VirtualTime::from_millis_f64(step_cost(&suite, s, device(i)?)?)))
    };
    let mut route = vec![owner];
    route.extend_from_slice(path);
    let mut back = route.clone();
    back.reverse();
    let n = route.len();
    let mut total = 0.0;
    for hop in 0..path.len() {
        let cells = hop_cells(&suite, format, hop);
        let (from, target) = (route[hop], route[hop + 1]);
        total += step(Step::ClientInit, owner)?;
        total += train_ms(world, &route[..=hop], cells.extend);
        total += train_ms(world, &[from, target], cells.create);
        total += step(Step::ServerRespond, target)?;
        total += train_ms(world, &[target, from], cells.created);
        total += train_ms(world, &back[n - 1 - hop..], cells.extended);
        total += step(Step::ClientFinish, owner)?;
    }
    Ok(total)
}
