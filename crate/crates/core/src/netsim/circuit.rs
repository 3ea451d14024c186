//! Telescoping circuit construction and relay-cell forwarding.

use super::world::World;
use super::{NetError, OpCategory};
use crate::cells::{
    create2_cell_count, create2_cells, created2_cell_count, created2_cells, extend2_body, extended2_body,
    fragment_count, fragment_payload, parse_extend2, parse_extended2, Cell, CellError, Command, HandshakeAssembler,
    MsgIdCounter, ReassemblyBuffer, RelayCommand, RelayFormat, RelayMsg, CELL_LEN, PAYLOAD_LEN, RELAY_DATA_LEN,
};
use crate::handshake::{client_finish, client_init, server_respond, step_cost, ClientState, Step, SuiteSpec, Variant};
use crate::onion::{
    relay_originate_backward, relay_unwrap_forward, relay_wrap_backward, CircuitKeys, HopState, Payload, MAX_HOPS,
};
use crate::VirtualTime;
use rand::Rng;
use std::collections::BTreeSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CircuitHandle(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CircStatus {
    Building,
    Open,
    Failed(String),
    Closed,
}

/// Handshake traffic attributed to one hop.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HopStats {
    pub onionskin_len: usize,
    pub reply_len: usize,
    /// Cells the circuit origin sent for this hop.
    pub cells_out: usize,
    /// Cells the circuit origin received for this hop.
    pub cells_in: usize,
    /// Bytes on every link crossed, both directions.
    pub wire_bytes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitInfo {
    pub owner: String,
    pub path: Vec<String>,
    pub suite: String,
    pub status: CircStatus,
    pub build_time: Option<VirtualTime>,
    /// Layers held by the origin, end-to-end layer included.
    pub layers: usize,
    /// Relays between the two endpoints; spliced circuits count both halves.
    pub hops: usize,
    pub hop_stats: Vec<HopStats>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(super) enum Purpose {
    General,
    ClientRend { conn: usize },
    ServiceRend { conn: usize },
}

pub(super) struct OriginCirc {
    pub owner: usize,
    pub path: Vec<usize>,
    pub suite: SuiteSpec,
    pub cid: u32,
    pub keys: CircuitKeys,
    pub status: CircStatus,
    pending: Option<ClientState>,
    created: HandshakeAssembler,
    reasm: ReassemblyBuffer,
    pub msg_ids: MsgIdCounter,
    pub started: VirtualTime,
    pub built: Option<VirtualTime>,
    pub hop_stats: Vec<HopStats>,
    pub purpose: Purpose,
    pub spliced_with: Option<usize>,
}

#[derive(Default)]
pub(super) struct RelayCirc {
    pub hop: Option<HopState>,
    create: HandshakeAssembler,
    created: HandshakeAssembler,
    reasm: ReassemblyBuffer,
    msg_ids: MsgIdCounter,
    pub next: Option<(usize, u32)>,
    pub splice: Option<(usize, u32)>,
}

/// Feeds a relay message into a reassembly buffer. Unfragmented messages
/// complete at once.
fn absorb(reasm: &mut ReassemblyBuffer, msg: &RelayMsg) -> Result<Option<Vec<u8>>, CellError> {
    match msg.fragment() {
        Some(f) => reasm.push(f.clone()),
        None => Ok(Some(msg.data().to_vec())),
    }
}

fn to_payload(bytes: &[u8]) -> Payload {
    let mut p = [0u8; PAYLOAD_LEN];
    p.copy_from_slice(&bytes[..PAYLOAD_LEN]);
    p
}

/// Relay messages needed to carry `len` bytes in `format`.
fn relay_msg_count(format: RelayFormat, len: usize) -> usize {
    match format {
        RelayFormat::Standard => 1,
        RelayFormat::Fragmented => fragment_count(len),
    }
}

impl World {
    // ------------------------------------------------------------ public API

    /// Builds a circuit from the first client along `path` and runs the
    /// simulation until it opens or fails. Returns the virtual build time.
    pub fn build_circuit(&mut self, path: &[usize], suite: &str) -> Result<(CircuitHandle, VirtualTime), NetError> {
        let owner = self.client()?;
        let ci = self.start_circuit(owner, path, suite, Purpose::General)?;
        self.run_until(|w| w.circuits[ci].status != CircStatus::Building)?;
        let c = &self.circuits[ci];
        match &c.status {
            CircStatus::Open => Ok((
                CircuitHandle(ci),
                c.built.expect("open circuit has a build time") - c.started,
            )),
            CircStatus::Failed(reason) => Err(NetError::CircuitFailed {
                circuit: ci,
                reason: reason.clone(),
            }),
            CircStatus::Closed | CircStatus::Building => Err(NetError::CircuitNotOpen(ci)),
        }
    }

    /// Tears a circuit down with DESTROY and lets the network go idle.
    pub fn close_circuit(&mut self, handle: CircuitHandle) -> Result<(), NetError> {
        let ci = self.check_handle(handle)?;
        if matches!(self.circuits[ci].status, CircStatus::Open | CircStatus::Building) {
            let (owner, first, cid) = {
                let c = &self.circuits[ci];
                (c.owner, c.path[0], c.cid)
            };
            self.send_cell(owner, first, Cell::fixed(cid, Command::Destroy, &[])?);
            self.origin_index.remove(&(owner, first, cid));
            self.circuits[ci].status = CircStatus::Closed;
        }
        self.run_idle()
    }

    pub fn circuit_info(&self, handle: CircuitHandle) -> Result<CircuitInfo, NetError> {
        let ci = self.check_handle(handle)?;
        let c = &self.circuits[ci];
        let peer_hops = c.spliced_with.map_or(0, |p| self.circuits[p].path.len());
        Ok(CircuitInfo {
            owner: self.nick(c.owner).to_string(),
            path: c.path.iter().map(|n| self.nick(*n).to_string()).collect(),
            suite: c.suite.id.clone(),
            status: c.status.clone(),
            build_time: c.built.map(|b| b - c.started),
            layers: c.keys.len(),
            hops: c.path.len() + peer_hops,
            hop_stats: c.hop_stats.clone(),
        })
    }

    pub(super) fn check_handle(&self, handle: CircuitHandle) -> Result<usize, NetError> {
        if handle.0 < self.circuits.len() {
            Ok(handle.0)
        } else {
            Err(NetError::UnknownCircuit(handle.0))
        }
    }

    /// Checks path, suite and cost tables, then starts extending to the
    /// first hop.
    pub(super) fn start_circuit(
        &mut self,
        owner: usize,
        path: &[usize],
        suite_id: &str,
        purpose: Purpose,
    ) -> Result<usize, NetError> {
        let suite = self.suite(suite_id)?;
        if suite.variant == Variant::HsNtor {
            return Err(NetError::UnsupportedSuite(format!("{suite_id} is end-to-end only")));
        }
        if path.is_empty() || path.len() > MAX_HOPS {
            return Err(NetError::BadPath(format!("{} hops", path.len())));
        }
        let distinct: BTreeSet<_> = path.iter().collect();
        if distinct.len() != path.len() {
            return Err(NetError::BadPath("repeated relay".into()));
        }
        for &n in path {
            self.node(n)?;
            if n == owner || !self.in_consensus(n) {
                return Err(NetError::BadPath(format!("{} is not a usable relay", self.nick(n))));
            }
        }
        let format = self.config.relay_format;
        if format == RelayFormat::Standard
            && path.len() > 1
            && (suite.onionskin_len(0) + 4 > RELAY_DATA_LEN || suite.reply_len(0) + 2 > RELAY_DATA_LEN)
        {
            return Err(NetError::UnsupportedSuite(format!(
                "{suite_id} handshakes do not fit one {} relay cell",
                format.name()
            )));
        }
        let dev = self.device_of(owner)?;
        step_cost(&suite, Step::ClientInit, dev)?;
        step_cost(&suite, Step::ClientFinish, dev)?;
        for &n in path {
            step_cost(&suite, Step::ServerRespond, self.device_of(n)?)?;
        }

        let cid = self.alloc_circ_id();
        let ci = self.circuits.len();
        self.circuits.push(OriginCirc {
            owner,
            path: path.to_vec(),
            suite,
            cid,
            keys: CircuitKeys::new(format),
            status: CircStatus::Building,
            pending: None,
            created: HandshakeAssembler::new(),
            reasm: ReassemblyBuffer::new(),
            msg_ids: MsgIdCounter::default(),
            started: self.now(),
            built: None,
            hop_stats: Vec::new(),
            purpose,
            spliced_with: None,
        });
        self.origin_index.insert((owner, path[0], cid), ci);
        let names: Vec<String> = path.iter().map(|n| self.nick(*n).to_string()).collect();
        self.log(owner, "circuit-start", || {
            format!("circ={ci} suite={suite_id} path={}", names.join(","))
        });
        self.extend_next(ci)?;
        Ok(ci)
    }

    pub(super) fn send_cell(&mut self, from: usize, to: usize, cell: Cell) {
        let bytes = cell.encode();
        let label = format!("cell {} circ={}", cell.command.name(), cell.circ_id);
        self.transmit(
            from,
            to,
            bytes.len(),
            label,
            true,
            Box::new(move |w: &mut World| w.on_cell(to, from, bytes)),
        );
    }

    pub(super) fn send_relay(&mut self, from: usize, to: usize, cid: u32, payload: &Payload) -> Result<(), NetError> {
        self.send_cell(from, to, Cell::fixed(cid, Command::Relay, payload)?);
        Ok(())
    }

    /// Wraps `msg` for layer `target` and sends it from the circuit origin.
    pub(super) fn origin_send(&mut self, ci: usize, target: usize, msg: &RelayMsg) -> Result<(), NetError> {
        let c = &mut self.circuits[ci];
        let p = c.keys.client_wrap_forward(msg, target)?;
        let (owner, first, cid) = (c.owner, c.path[0], c.cid);
        self.send_relay(owner, first, cid, &p)
    }

    // ------------------------------------------------------------ origin side

    fn extend_next(&mut self, ci: usize) -> Result<(), NetError> {
        let (owner, hop, target, suite) = {
            let c = &self.circuits[ci];
            let hop = c.keys.len();
            (c.owner, hop, c.path[hop], c.suite.clone())
        };
        let public = self.nodes[target].onion.public(&suite)?;
        let ms = step_cost(&suite, Step::ClientInit, self.device_of(owner)?)?;
        self.compute(
            owner,
            ms,
            "client_init",
            Box::new(move |w: &mut World| {
                if w.circuits[ci].status != CircStatus::Building {
                    return Ok(());
                }
                let seed: [u8; 32] = w.rng.random();
                let (state, skin) = client_init(&suite, &public.node_id, &public.static_pk, &seed)?;
                w.count(owner, OpCategory::HandshakeClient);
                let format = w.config.relay_format;
                let c = &mut w.circuits[ci];
                c.pending = Some(state);
                let (first, cid) = (c.path[0], c.cid);
                if hop == 0 {
                    let cells = create2_cells(cid, suite.htype(), &skin)?;
                    c.hop_stats.push(HopStats {
                        onionskin_len: skin.len(),
                        cells_out: cells.len(),
                        ..HopStats::default()
                    });
                    for cell in cells {
                        w.send_cell(owner, first, cell);
                    }
                } else {
                    let body = extend2_body(suite.htype(), &skin)?;
                    let msgs = fragment_payload(&body, format, RelayCommand::Extend2, c.msg_ids.next_id())?;
                    c.hop_stats.push(HopStats {
                        onionskin_len: skin.len(),
                        cells_out: msgs.len(),
                        ..HopStats::default()
                    });
                    for m in &msgs {
                        w.origin_send(ci, hop - 1, m)?;
                    }
                }
                Ok(())
            }),
        );
        Ok(())
    }

    fn finish_hop(&mut self, ci: usize, reply: Vec<u8>) -> Result<(), NetError> {
        let owner = self.circuits[ci].owner;
        let suite = self.circuits[ci].suite.clone();
        let ms = step_cost(&suite, Step::ClientFinish, self.device_of(owner)?)?;
        self.compute(
            owner,
            ms,
            "client_finish",
            Box::new(move |w: &mut World| {
                let format = w.config.relay_format;
                let now = w.now();
                let c = &mut w.circuits[ci];
                if c.status != CircStatus::Building {
                    return Ok(());
                }
                let Some(state) = c.pending.take() else {
                    return Ok(());
                };
                let hop = c.keys.len();
                let stats = &mut c.hop_stats[hop];
                stats.reply_len = reply.len();
                if hop == 0 {
                    stats.cells_in = created2_cell_count(reply.len());
                    stats.wire_bytes = (stats.cells_out + stats.cells_in) * CELL_LEN;
                } else {
                    stats.cells_in = relay_msg_count(format, reply.len() + 2);
                    stats.wire_bytes = CELL_LEN
                        * (hop * (stats.cells_out + stats.cells_in)
                            + create2_cell_count(stats.onionskin_len)
                            + created2_cell_count(reply.len()));
                }
                match client_finish(state, &reply) {
                    Ok(keys) => {
                        c.keys.push_hop(keys)?;
                        if c.keys.len() == c.path.len() {
                            c.status = CircStatus::Open;
                            c.built = Some(now);
                            let elapsed = w.now() - w.circuits[ci].started;
                            w.log(owner, "circuit-built", || format!("circ={ci} time={elapsed}"));
                            w.on_circuit_open(ci)
                        } else {
                            w.extend_next(ci)
                        }
                    }
                    Err(e) => w.fail_circuit(ci, format!("hop {hop}: {e}"), true),
                }
            }),
        );
        Ok(())
    }

    fn on_circuit_open(&mut self, ci: usize) -> Result<(), NetError> {
        match self.circuits[ci].purpose {
            Purpose::General => Ok(()),
            Purpose::ClientRend { conn } => self.client_rend_circuit_open(ci, conn),
            Purpose::ServiceRend { conn } => self.service_rend_circuit_open(ci, conn),
        }
    }

    /// Marks a circuit failed, optionally sending DESTROY towards its relays.
    pub(super) fn fail_circuit(&mut self, ci: usize, reason: String, destroy: bool) -> Result<(), NetError> {
        let (owner, first, cid, purpose) = {
            let c = &self.circuits[ci];
            (c.owner, c.path[0], c.cid, c.purpose)
        };
        if !matches!(self.circuits[ci].status, CircStatus::Building | CircStatus::Open) {
            return Ok(());
        }
        self.log(owner, "circuit-failed", || format!("circ={ci} {reason}"));
        self.circuits[ci].status = CircStatus::Failed(reason.clone());
        self.origin_index.remove(&(owner, first, cid));
        if destroy {
            self.send_cell(owner, first, Cell::fixed(cid, Command::Destroy, &[])?);
        }
        match purpose {
            Purpose::General => Ok(()),
            Purpose::ClientRend { conn } | Purpose::ServiceRend { conn } => {
                self.fail_connection(conn, NetError::CircuitFailed { circuit: ci, reason });
                Ok(())
            }
        }
    }

    fn origin_cell(&mut self, ci: usize, cell: Cell) -> Result<(), NetError> {
        match cell.command {
            Command::Created2 => {
                let c = &mut self.circuits[ci];
                if c.status != CircStatus::Building || !c.keys.is_empty() {
                    return Ok(());
                }
                match c.created.push_created2(&cell.payload) {
                    Ok(Some(reply)) => self.finish_hop(ci, reply),
                    Ok(None) => Ok(()),
                    Err(e) => self.fail_circuit(ci, format!("bad CREATED2: {e}"), true),
                }
            }
            Command::Relay => {
                let p = to_payload(&cell.payload);
                match self.circuits[ci].keys.client_peel_backward(&p) {
                    Ok((hop, msg)) => self.origin_relay(ci, hop, msg),
                    Err(e) => self.fail_circuit(ci, format!("backward cell: {e}"), true),
                }
            }
            Command::Destroy => self.fail_circuit(ci, "destroyed by relay".into(), false),
            _ => Ok(()),
        }
    }

    fn origin_relay(&mut self, ci: usize, hop: usize, msg: RelayMsg) -> Result<(), NetError> {
        let owner = self.circuits[ci].owner;
        self.log(owner, "relay-msg", || {
            format!("circ={ci} hop={hop} cmd={:?}", msg.command())
        });
        match msg.command() {
            RelayCommand::Extended2 => {
                let c = &mut self.circuits[ci];
                if c.status != CircStatus::Building || hop + 1 != c.keys.len() {
                    return Ok(());
                }
                let body = match absorb(&mut c.reasm, &msg) {
                    Ok(Some(b)) => b,
                    Ok(None) => return Ok(()),
                    Err(e) => return self.fail_circuit(ci, format!("EXTENDED2: {e}"), true),
                };
                match parse_extended2(&body) {
                    Ok(reply) => self.finish_hop(ci, reply.to_vec()),
                    Err(e) => self.fail_circuit(ci, format!("EXTENDED2: {e}"), true),
                }
            }
            RelayCommand::Data => match self.circuits[ci].purpose {
                Purpose::ServiceRend { .. } => self.service_data(ci, msg.data().len()),
                _ => self.client_data(ci, msg.data().len()),
            },
            RelayCommand::RendezvousEstablished => self.client_rend_established(ci),
            RelayCommand::Rendezvous2 => self.client_rendezvous2(ci, msg.data().to_vec()),
            _ => Ok(()),
        }
    }

    // ------------------------------------------------------------ relay side

    pub(super) fn on_cell(&mut self, node: usize, from: usize, bytes: Vec<u8>) -> Result<(), NetError> {
        let cell = Cell::decode(&bytes)?;
        let key = (node, from, cell.circ_id);
        if let Some(&ci) = self.origin_index.get(&key) {
            return self.origin_cell(ci, cell);
        }
        if let Some(&(prev, cid_in)) = self.relay_back.get(&key) {
            return self.relay_backward(node, from, cell, prev, cid_in);
        }
        self.relay_forward(node, from, cell)
    }

    fn relay_forward(&mut self, node: usize, prev: usize, cell: Cell) -> Result<(), NetError> {
        let cid = cell.circ_id;
        let key = (node, prev, cid);
        match cell.command {
            Command::Create2 => {
                let entry = self.relay_circs.entry(key).or_default();
                if entry.hop.is_some() {
                    return Ok(());
                }
                match entry.create.push_create2(&cell.payload) {
                    Ok(Some((htype, hdata))) => self.serve_create(node, prev, cid, htype, hdata),
                    Ok(None) => Ok(()),
                    Err(_) => self.relay_teardown(node, prev, cid, "bad CREATE2"),
                }
            }
            Command::Relay => self.relay_forward_relay(node, prev, cid, to_payload(&cell.payload)),
            Command::Destroy => self.relay_destroy_from_prev(node, prev, cid),
            _ => Ok(()),
        }
    }

    fn serve_create(&mut self, node: usize, prev: usize, cid: u32, htype: u16, hdata: Vec<u8>) -> Result<(), NetError> {
        let Some(suite) = self.resolve_relay_suite(htype, hdata.len()) else {
            return self.relay_teardown(node, prev, cid, "unsupported handshake");
        };
        let ms = step_cost(&suite, Step::ServerRespond, self.device_of(node)?)?;
        self.compute(
            node,
            ms,
            "server_respond",
            Box::new(move |w: &mut World| {
                if !w.relay_circs.contains_key(&(node, prev, cid)) {
                    return Ok(());
                }
                let seed: [u8; 32] = w.rng.random();
                match server_respond(&suite, &w.nodes[node].onion, &hdata, &seed) {
                    Ok((reply, keys)) => {
                        w.count(node, OpCategory::HandshakeServer);
                        if let Some(entry) = w.relay_circs.get_mut(&(node, prev, cid)) {
                            entry.hop = Some(HopState::new(keys));
                        }
                        for cell in created2_cells(cid, &reply)? {
                            w.send_cell(node, prev, cell);
                        }
                        Ok(())
                    }
                    Err(e) => w.relay_teardown(node, prev, cid, &format!("handshake: {e}")),
                }
            }),
        );
        Ok(())
    }

    fn relay_forward_relay(&mut self, node: usize, prev: usize, cid: u32, payload: Payload) -> Result<(), NetError> {
        let format = self.config.relay_format;
        let Some(entry) = self.relay_circs.get_mut(&(node, prev, cid)) else {
            return Ok(());
        };
        let Some(hop) = entry.hop.as_mut() else {
            return Ok(());
        };
        let un = relay_unwrap_forward(hop, format, &payload);
        let (next, splice) = (entry.next, entry.splice);
        self.count(node, OpCategory::RelayUnwrapForward);
        if let Some(msg) = un.msg {
            return self.relay_handle(node, prev, cid, msg);
        }
        let mut p = un.payload;
        if let Some(pos) = self.tag_position(node) {
            p[pos] ^= 0x01;
        }
        if let Some((next, cid_out)) = next {
            return self.send_relay(node, next, cid_out, &p);
        }
        if let Some((prev_b, cid_b)) = splice {
            let Some(hop_b) = self
                .relay_circs
                .get_mut(&(node, prev_b, cid_b))
                .and_then(|e| e.hop.as_mut())
            else {
                return Ok(());
            };
            let out = relay_wrap_backward(hop_b, &p);
            self.count(node, OpCategory::RelayWrapBackward);
            return self.send_relay(node, prev_b, cid_b, &out);
        }
        self.relay_teardown(node, prev, cid, "digest mismatch")
    }

    fn relay_handle(&mut self, node: usize, prev: usize, cid: u32, msg: RelayMsg) -> Result<(), NetError> {
        self.log(node, "relay-msg", || format!("circ={cid} cmd={:?}", msg.command()));
        match msg.command() {
            RelayCommand::Extend2 => {
                let Some(entry) = self.relay_circs.get_mut(&(node, prev, cid)) else {
                    return Ok(());
                };
                match absorb(&mut entry.reasm, &msg) {
                    Ok(Some(body)) => self.relay_extend(node, prev, cid, body),
                    Ok(None) => Ok(()),
                    Err(_) => self.relay_teardown(node, prev, cid, "bad EXTEND2 fragment"),
                }
            }
            RelayCommand::Data => self.exit_data(node, prev, cid, msg.data().len()),
            RelayCommand::EstablishRendezvous => self.rp_establish(node, prev, cid, msg.data().to_vec()),
            RelayCommand::Rendezvous1 => self.rp_rendezvous1(node, prev, cid, msg.data().to_vec()),
            _ => Ok(()),
        }
    }

    fn relay_extend(&mut self, node: usize, prev: usize, cid: u32, body: Vec<u8>) -> Result<(), NetError> {
        let Ok((htype, hdata)) = parse_extend2(&body) else {
            return self.relay_teardown(node, prev, cid, "bad EXTEND2");
        };
        let target = hdata
            .get(..crate::handshake::NODE_ID_LEN)
            .and_then(|id| self.node_by_id(id))
            .filter(|t| *t != node && *t != prev);
        let already = self
            .relay_circs
            .get(&(node, prev, cid))
            .is_some_and(|e| e.next.is_some());
        let Some(target) = target.filter(|_| !already) else {
            return self.relay_teardown(node, prev, cid, "cannot extend");
        };
        let cid_out = self.alloc_circ_id();
        let cells = create2_cells(cid_out, htype, hdata)?;
        if let Some(entry) = self.relay_circs.get_mut(&(node, prev, cid)) {
            entry.next = Some((target, cid_out));
        }
        self.relay_back.insert((node, target, cid_out), (prev, cid));
        for cell in cells {
            self.send_cell(node, target, cell);
        }
        Ok(())
    }

    fn relay_backward(
        &mut self,
        node: usize,
        next: usize,
        cell: Cell,
        prev: usize,
        cid_in: u32,
    ) -> Result<(), NetError> {
        let format = self.config.relay_format;
        let key = (node, prev, cid_in);
        match cell.command {
            Command::Created2 => {
                let Some(entry) = self.relay_circs.get_mut(&key) else {
                    return Ok(());
                };
                let reply = match entry.created.push_created2(&cell.payload) {
                    Ok(Some(r)) => r,
                    Ok(None) => return Ok(()),
                    Err(_) => return self.relay_teardown(node, prev, cid_in, "bad CREATED2"),
                };
                let body = extended2_body(&reply)?;
                let msgs = fragment_payload(&body, format, RelayCommand::Extended2, entry.msg_ids.next_id())?;
                let Some(hop) = entry.hop.as_mut() else {
                    return Ok(());
                };
                let payloads: Vec<Payload> = msgs.iter().map(|m| relay_originate_backward(hop, format, m)).collect();
                for p in payloads {
                    self.count(node, OpCategory::RelayWrapBackward);
                    self.send_relay(node, prev, cid_in, &p)?;
                }
                Ok(())
            }
            Command::Relay => {
                let Some(hop) = self.relay_circs.get_mut(&key).and_then(|e| e.hop.as_mut()) else {
                    return Ok(());
                };
                let p = relay_wrap_backward(hop, &to_payload(&cell.payload));
                self.count(node, OpCategory::RelayWrapBackward);
                self.send_relay(node, prev, cid_in, &p)
            }
            Command::Destroy => {
                let cid_out = cell.circ_id;
                self.relay_back.remove(&(node, next, cid_out));
                if self.relay_circs.remove(&key).is_some() {
                    self.cleanup_relay_state(node, prev, cid_in);
                    self.send_cell(node, prev, Cell::fixed(cid_in, Command::Destroy, &[])?);
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// DESTROY from the client side: forward it and forget the circuit.
    fn relay_destroy_from_prev(&mut self, node: usize, prev: usize, cid: u32) -> Result<(), NetError> {
        let Some(entry) = self.relay_circs.remove(&(node, prev, cid)) else {
            return Ok(());
        };
        self.cleanup_relay_state(node, prev, cid);
        if let Some((next, cid_out)) = entry.next {
            self.relay_back.remove(&(node, next, cid_out));
            self.send_cell(node, next, Cell::fixed(cid_out, Command::Destroy, &[])?);
        }
        if let Some((prev_b, cid_b)) = entry.splice {
            if self.relay_circs.remove(&(node, prev_b, cid_b)).is_some() {
                self.cleanup_relay_state(node, prev_b, cid_b);
                self.send_cell(node, prev_b, Cell::fixed(cid_b, Command::Destroy, &[])?);
            }
        }
        Ok(())
    }

    /// Drops a relay circuit after a protocol error, destroying both sides.
    pub(super) fn relay_teardown(&mut self, node: usize, prev: usize, cid: u32, why: &str) -> Result<(), NetError> {
        self.log(node, "teardown", || format!("circ={cid} {why}"));
        self.relay_destroy_from_prev(node, prev, cid)?;
        self.send_cell(node, prev, Cell::fixed(cid, Command::Destroy, &[])?);
        Ok(())
    }
}
