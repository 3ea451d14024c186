use super::circuit::{OriginCirc, RelayCirc};
use super::config::{NetConfig, NodeFlag, NodeRole};
use super::consensus::{verify_consensus, ConsensusDoc, RouterEntry};
use super::service::HsState;
use super::stream::StreamState;
use super::{NetError, OpCategory};
use crate::handshake::{default_suites, suite_by_id, ServerKeys, SuiteSpec, Variant, NODE_ID_LEN};
use crate::registry::{DeviceProfile, ProfileSet, SchemeProfile};
use crate::toy_crypto::{derive_seed, sha256, sim_sig_keygen, KeyPair, Seed};
use crate::VirtualTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

pub(super) type Action = Box<dyn FnOnce(&mut World) -> Result<(), NetError>>;

struct Scheduled {
    at: VirtualTime,
    seq: u64,
    action: Action,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// A simulated machine.
#[derive(Clone, Debug)]
pub struct Node {
    pub nickname: String,
    pub node_id: [u8; NODE_ID_LEN],
    pub roles: BTreeSet<NodeRole>,
    pub flags: BTreeSet<NodeFlag>,
    pub device: String,
    pub bandwidth_bps: f64,
    pub latency_ms: f64,
    pub identity: KeyPair,
    pub(super) onion: ServerKeys,
    honest_onion: ServerKeys,
    uplink_free: VirtualTime,
    downlink_free: VirtualTime,
    cpu_free: VirtualTime,
}

impl Node {
    pub fn has_role(&self, role: NodeRole) -> bool {
        self.roles.contains(&role)
    }

    /// Listed in the consensus and usable as a circuit hop.
    pub fn is_relay(&self) -> bool {
        [NodeRole::Authority, NodeRole::Guard, NodeRole::Middle, NodeRole::Exit]
            .iter()
            .any(|r| self.roles.contains(r))
    }
}

/// Misbehaviour injected into a relay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fault {
    /// XORs one byte of every relay cell the node forwards.
    TagCells { node: usize, position: usize },
    /// The node answers handshakes without holding its published secret keys.
    ImpostorRelay { node: usize },
}

/// Restrictions for [`World::select_path`]. Indices are node indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathConstraints {
    pub guard: Option<usize>,
    pub middle: Option<usize>,
    pub exit: Option<usize>,
    /// Fixed final hop with no role requirement; overrides `exit`.
    pub last: Option<usize>,
    /// Draw the middle from every guard, middle and exit relay.
    pub broad_middle: bool,
    pub exclude: BTreeSet<usize>,
}

/// A simulated network with its clock, event queue and counters.
pub struct World {
    pub(super) config: NetConfig,
    pub(super) profiles: ProfileSet,
    pub(super) identity_scheme: SchemeProfile,
    world_seed: Seed,
    pub(super) suites: Vec<SuiteSpec>,
    pub(super) nodes: Vec<Node>,
    consensus: ConsensusDoc,
    consensus_valid: bool,
    pub(super) rng: ChaCha20Rng,
    now: VirtualTime,
    queue: BinaryHeap<Reverse<Scheduled>>,
    next_seq: u64,
    counters: Vec<[u64; OpCategory::ALL.len()]>,
    bytes_tx: Vec<u64>,
    trace: Vec<String>,
    next_circ_id: u32,
    pub(super) circuits: Vec<OriginCirc>,
    pub(super) origin_index: BTreeMap<(usize, usize, u32), usize>,
    pub(super) relay_circs: BTreeMap<(usize, usize, u32), RelayCirc>,
    pub(super) relay_back: BTreeMap<(usize, usize, u32), (usize, u32)>,
    pub(super) faults: Vec<Fault>,
    pub(super) streams: StreamState,
    pub(super) hs: HsState,
    probe_arrivals: Vec<VirtualTime>,
}

fn ser_time(bytes: usize, bandwidth_bps: f64) -> VirtualTime {
    VirtualTime::from_millis_f64(bytes as f64 * 8.0 / bandwidth_bps * 1e3)
}

fn capitalised(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl World {
    /// Builds the network, publishes the consensus and every configured
    /// onion service.
    pub fn new(config: NetConfig, profiles: ProfileSet, seed: u64) -> Result<World, NetError> {
        config.validate()?;
        for n in &config.nodes {
            profiles.device(&n.device)?;
        }
        let identity_scheme = profiles.scheme(&config.identity_scheme)?.clone();
        if identity_scheme.kind != crate::registry::SchemeKind::Signature {
            return Err(NetError::Config(format!(
                "identity scheme {} is not a signature scheme",
                identity_scheme.id
            )));
        }
        let world_seed = derive_seed(&seed.to_be_bytes(), "world", 0);
        let suites: Vec<SuiteSpec> = default_suites(&profiles).unwrap_or_else(|_| {
            crate::handshake::DEFAULT_SUITE_IDS
                .iter()
                .filter_map(|id| suite_by_id(&profiles, id).ok())
                .collect()
        });
        let mut nodes = Vec::with_capacity(config.nodes.len());
        for n in &config.nodes {
            let identity = sim_sig_keygen(
                &identity_scheme,
                &derive_seed(&world_seed, &format!("identity/{}", n.nickname), 0),
            )?;
            let mut node_id = [0u8; NODE_ID_LEN];
            node_id.copy_from_slice(&sha256(&identity.public_key)[..NODE_ID_LEN]);
            let onion = ServerKeys::generate(
                &suites,
                node_id,
                &derive_seed(&world_seed, &format!("onion/{}", n.nickname), 0),
            )?;
            nodes.push(Node {
                nickname: n.nickname.clone(),
                node_id,
                roles: n.roles.clone(),
                flags: n.flags.clone(),
                device: n.device.clone(),
                bandwidth_bps: n.bandwidth_bps.unwrap_or(config.bandwidth_bps),
                latency_ms: n.latency_ms.unwrap_or(config.latency_ms),
                identity,
                honest_onion: onion.clone(),
                onion,
                uplink_free: VirtualTime::ZERO,
                downlink_free: VirtualTime::ZERO,
                cpu_free: VirtualTime::ZERO,
            });
        }
        let ids: BTreeSet<_> = nodes.iter().map(|n| n.node_id).collect();
        if ids.len() != nodes.len() {
            return Err(NetError::Config("node id collision".into()));
        }
        let count = nodes.len();
        let mut world = World {
            rng: ChaCha20Rng::from_seed(derive_seed(&world_seed, "rng", 0)),
            config,
            profiles,
            identity_scheme,
            world_seed,
            suites: Vec::new(),
            nodes,
            consensus: ConsensusDoc {
                epoch: 0,
                valid_after: 0,
                routers: Vec::new(),
                signatures: Vec::new(),
            },
            consensus_valid: false,
            now: VirtualTime::ZERO,
            queue: BinaryHeap::new(),
            next_seq: 0,
            counters: vec![[0; OpCategory::ALL.len()]; count],
            bytes_tx: vec![0; count],
            trace: Vec::new(),
            next_circ_id: 1,
            circuits: Vec::new(),
            origin_index: BTreeMap::new(),
            relay_circs: BTreeMap::new(),
            relay_back: BTreeMap::new(),
            faults: Vec::new(),
            streams: StreamState::default(),
            hs: HsState::default(),
            probe_arrivals: Vec::new(),
        };
        for s in suites {
            world.register_suite(s)?;
        }
        world.publish_consensus()?;
        world.publish_services()?;
        Ok(world)
    }

    /// The default topology and profiles.
    pub fn default_network(seed: u64) -> Result<World, NetError> {
        World::new(NetConfig::default(), ProfileSet::default_set(), seed)
    }

    // ------------------------------------------------------------ accessors

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn profiles(&self) -> &ProfileSet {
        &self.profiles
    }

    pub fn now(&self) -> VirtualTime {
        self.now
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> Result<&Node, NetError> {
        self.nodes
            .get(index)
            .ok_or_else(|| NetError::UnknownNode(index.to_string()))
    }

    pub fn node_index(&self, nickname: &str) -> Result<usize, NetError> {
        self.nodes
            .iter()
            .position(|n| n.nickname == nickname)
            .ok_or_else(|| NetError::UnknownNode(nickname.to_string()))
    }

    pub(super) fn node_by_id(&self, node_id: &[u8]) -> Option<usize> {
        self.nodes.iter().position(|n| n.node_id[..] == *node_id)
    }

    pub(super) fn nick(&self, node: usize) -> &str {
        &self.nodes[node].nickname
    }

    /// The first node with the client role.
    pub fn client(&self) -> Result<usize, NetError> {
        self.first_with(NodeRole::Client).ok_or(NetError::NoEligible("client"))
    }

    pub(super) fn first_with(&self, role: NodeRole) -> Option<usize> {
        self.nodes.iter().position(|n| n.has_role(role))
    }

    pub(super) fn device_of(&self, node: usize) -> Result<&DeviceProfile, NetError> {
        Ok(self.profiles.device(&self.nodes[node].device)?)
    }

    /// Moves a node onto another device profile.
    pub fn set_device(&mut self, node: usize, device: &str) -> Result<(), NetError> {
        self.profiles.device(device)?;
        self.node(node)?;
        self.nodes[node].device = device.to_string();
        Ok(())
    }

    pub fn relay_format(&self) -> crate::cells::RelayFormat {
        self.config.relay_format
    }

    // ------------------------------------------------------------ suites

    pub fn suites(&self) -> &[SuiteSpec] {
        &self.suites
    }

    pub fn suite(&self, id: &str) -> Result<SuiteSpec, NetError> {
        self.suites
            .iter()
            .find(|s| s.id == id)
            .cloned()
            .ok_or_else(|| NetError::UnsupportedSuite(id.to_string()))
    }

    /// Makes every relay accept `suite`. Relays pick the suite from the
    /// CREATE2 handshake type and length, so two circuit suites may not
    /// share both.
    pub fn register_suite(&mut self, suite: SuiteSpec) -> Result<(), NetError> {
        if self.suites.iter().any(|s| s.id == suite.id) {
            return Ok(());
        }
        if suite.variant != Variant::HsNtor {
            let clash = self.suites.iter().find(|s| {
                s.variant != Variant::HsNtor
                    && s.htype() == suite.htype()
                    && (s.onionskin_len(0) == suite.onionskin_len(0)
                        || (s.variant.carries_messages() && suite.variant.carries_messages()))
            });
            if let Some(other) = clash {
                return Err(NetError::UnsupportedSuite(format!(
                    "{} is indistinguishable from {} on the wire",
                    suite.id, other.id
                )));
            }
        }
        self.suites.push(suite);
        let suites = self.suites.clone();
        for node in &mut self.nodes {
            let seed = derive_seed(&self.world_seed, &format!("onion/{}", node.nickname), 0);
            node.onion = ServerKeys::generate(&suites, node.node_id, &seed)?;
            node.honest_onion = node.onion.clone();
        }
        Ok(())
    }

    /// The circuit suite a relay infers from a CREATE2 handshake.
    pub(super) fn resolve_relay_suite(&self, htype: u16, len: usize) -> Option<SuiteSpec> {
        self.suites
            .iter()
            .filter(|s| s.variant != Variant::HsNtor && s.htype() == htype)
            .find(|s| {
                if s.variant.carries_messages() {
                    len >= s.onionskin_len(0)
                } else {
                    len == s.onionskin_len(0)
                }
            })
            .cloned()
    }

    // ------------------------------------------------------------ consensus

    pub fn consensus(&self) -> &ConsensusDoc {
        &self.consensus
    }

    pub fn consensus_valid(&self) -> bool {
        self.consensus_valid
    }

    pub fn identity_scheme(&self) -> &SchemeProfile {
        &self.identity_scheme
    }

    /// `(node id, identity public key)` of every authority.
    pub fn authority_keys(&self) -> Vec<([u8; NODE_ID_LEN], Vec<u8>)> {
        self.nodes
            .iter()
            .filter(|n| n.has_role(NodeRole::Authority))
            .map(|n| (n.node_id, n.identity.public_key.clone()))
            .collect()
    }

    fn router_entry(&self, node: &Node) -> RouterEntry {
        let mut flags: Vec<String> = node
            .roles
            .iter()
            .filter(|r| **r != NodeRole::OnionService)
            .map(|r| capitalised(r.name()))
            .collect();
        flags.extend(node.flags.iter().map(|f| match f {
            NodeFlag::Hsdir => "HSDir".to_string(),
            NodeFlag::Rendezvous => "Rendezvous".to_string(),
        }));
        flags.sort();
        let mut keys = Vec::new();
        if let Some(dh) = &node.onion.dh {
            keys.push(("ntor".to_string(), sha256(&dh.public_key)));
        }
        for (id, pair) in &node.onion.kem_static {
            keys.push((id.clone(), sha256(&pair.public_key)));
        }
        keys.sort();
        RouterEntry {
            nickname: node.nickname.clone(),
            node_id: node.node_id,
            flags,
            keys,
        }
    }

    /// Has every authority sign the current relay list, then every node
    /// verify the result. Signing is untimed; the counters record it.
    pub fn publish_consensus(&mut self) -> Result<ConsensusDoc, NetError> {
        let mut doc = ConsensusDoc {
            epoch: self.config.epoch,
            valid_after: self.now.as_nanos() / 1_000_000_000,
            routers: self
                .nodes
                .iter()
                .filter(|n| n.is_relay())
                .map(|n| self.router_entry(n))
                .collect(),
            signatures: Vec::new(),
        };
        for i in 0..self.nodes.len() {
            if self.nodes[i].has_role(NodeRole::Authority) {
                doc.sign(
                    self.nodes[i].node_id,
                    &self.nodes[i].identity.secret_key,
                    &self.identity_scheme,
                )?;
                self.count(i, OpCategory::ConsensusSign);
            }
        }
        let authorities = self.authority_keys();
        let valid = verify_consensus(&doc, &authorities, &self.identity_scheme);
        for i in 0..self.nodes.len() {
            self.count(i, OpCategory::ConsensusVerify);
        }
        self.log_at(
            None,
            "consensus",
            format!("routers={} valid={valid}", doc.routers.len()),
        );
        self.consensus = doc.clone();
        self.consensus_valid = valid;
        Ok(doc)
    }

    /// Replaces the consensus every node uses, re-verifying it.
    pub fn install_consensus(&mut self, doc: ConsensusDoc) -> bool {
        let valid = verify_consensus(&doc, &self.authority_keys(), &self.identity_scheme);
        for i in 0..self.nodes.len() {
            self.count(i, OpCategory::ConsensusVerify);
        }
        self.consensus = doc;
        self.consensus_valid = valid;
        valid
    }

    pub(super) fn in_consensus(&self, node: usize) -> bool {
        self.consensus.router(&self.nodes[node].node_id).is_some()
    }

    // ------------------------------------------------------------ paths

    /// Picks guard, middle and exit, each uniformly among eligible relays.
    /// The exit (or fixed last hop) is drawn first, then the guard, then
    /// the middle; all three are distinct.
    pub fn select_path(&mut self, c: &PathConstraints) -> Result<Vec<usize>, NetError> {
        if !self.consensus_valid {
            return Err(NetError::InvalidConsensus);
        }
        let eligible = |w: &World, role: Option<NodeRole>, taken: &BTreeSet<usize>| -> Vec<usize> {
            (0..w.nodes.len())
                .filter(|i| !taken.contains(i) && w.in_consensus(*i))
                .filter(|i| match role {
                    Some(r) => w.nodes[*i].has_role(r),
                    None => [NodeRole::Guard, NodeRole::Middle, NodeRole::Exit]
                        .iter()
                        .any(|r| w.nodes[*i].has_role(*r)),
                })
                .collect()
        };
        let mut taken = c.exclude.clone();
        let pick = |w: &mut World,
                    fixed: Option<usize>,
                    role: Option<NodeRole>,
                    what: &'static str,
                    taken: &mut BTreeSet<usize>|
         -> Result<usize, NetError> {
            let pool = eligible(w, role, taken);
            let chosen = match fixed {
                Some(n) if pool.contains(&n) => n,
                Some(n) => {
                    return Err(NetError::BadPath(format!(
                        "{} is not eligible as {what}",
                        w.nodes.get(n).map(|x| x.nickname.as_str()).unwrap_or("?")
                    )))
                }
                None if pool.is_empty() => return Err(NetError::NoEligible(what)),
                None => pool[w.rng.random_range(0..pool.len())],
            };
            taken.insert(chosen);
            Ok(chosen)
        };
        let last = match c.last {
            Some(n) => {
                if n >= self.nodes.len() || !self.in_consensus(n) || taken.contains(&n) {
                    return Err(NetError::BadPath("fixed last hop is not a usable relay".into()));
                }
                taken.insert(n);
                n
            }
            None => pick(self, c.exit, Some(NodeRole::Exit), "exit", &mut taken)?,
        };
        let guard = pick(self, c.guard, Some(NodeRole::Guard), "guard", &mut taken)?;
        let middle_role = if c.broad_middle { None } else { Some(NodeRole::Middle) };
        let middle = pick(self, c.middle, middle_role, "middle", &mut taken)?;
        Ok(vec![guard, middle, last])
    }

    // ------------------------------------------------------------ faults

    pub fn inject_fault(&mut self, fault: Fault) -> Result<(), NetError> {
        let node = match &fault {
            Fault::TagCells { node, position } => {
                if *position >= crate::cells::PAYLOAD_LEN {
                    return Err(NetError::InvalidArgument(format!("tag position {position}")));
                }
                *node
            }
            Fault::ImpostorRelay { node } => *node,
        };
        self.node(node)?;
        if let Fault::ImpostorRelay { node } = fault {
            let seed = derive_seed(&self.world_seed, "impostor", node as u64);
            let fake = ServerKeys::generate(&self.suites, self.nodes[node].node_id, &seed)?;
            let keys = &mut self.nodes[node].onion;
            if let (Some(dh), Some(f)) = (&mut keys.dh, fake.dh) {
                dh.secret_key = f.secret_key;
            }
            for (kem, pair) in keys.kem_static.iter_mut() {
                pair.secret_key = fake.kem_static[kem].secret_key.clone();
            }
        }
        self.faults.push(fault);
        Ok(())
    }

    pub fn clear_faults(&mut self) {
        self.faults.clear();
        for n in &mut self.nodes {
            n.onion = n.honest_onion.clone();
        }
    }

    pub(super) fn tag_position(&self, node: usize) -> Option<usize> {
        self.faults.iter().find_map(|f| match f {
            Fault::TagCells { node: n, position } if *n == node => Some(*position),
            _ => None,
        })
    }

    // ------------------------------------------------------------ counters

    pub(super) fn count(&mut self, node: usize, cat: OpCategory) {
        self.counters[node][cat.index()] += 1;
    }

    pub fn op_count(&self, node: usize, cat: OpCategory) -> u64 {
        self.counters.get(node).map_or(0, |c| c[cat.index()])
    }

    pub fn op_counts(&self, node: usize) -> BTreeMap<OpCategory, u64> {
        OpCategory::ALL.iter().map(|c| (*c, self.op_count(node, *c))).collect()
    }

    /// Bytes each node has put on its uplink, retransmissions included.
    pub fn bytes_sent(&self, node: usize) -> u64 {
        self.bytes_tx.get(node).copied().unwrap_or(0)
    }

    pub fn reset_counters(&mut self) {
        for c in &mut self.counters {
            *c = [0; OpCategory::ALL.len()];
        }
        for b in &mut self.bytes_tx {
            *b = 0;
        }
    }

    // ------------------------------------------------------------ trace

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn trace_text(&self) -> String {
        let mut s = self.trace.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }

    pub fn clear_trace(&mut self) {
        self.trace.clear();
    }

    fn log_at(&mut self, node: Option<usize>, event: &str, detail: String) {
        if !self.config.trace {
            return;
        }
        let ns = self.now.as_nanos();
        let who = node.map_or("-", |n| self.nodes[n].nickname.as_str());
        let line = format!("{}.{:03} {who} {event} {detail}", ns / 1000, ns % 1000);
        self.trace.push(line);
    }

    pub(super) fn log(&mut self, node: usize, event: &str, detail: impl FnOnce() -> String) {
        if self.config.trace {
            self.log_at(Some(node), event, detail());
        }
    }

    // ------------------------------------------------------------ engine

    pub(super) fn schedule(&mut self, at: VirtualTime, action: Action) {
        debug_assert!(at >= self.now, "event scheduled in the past");
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Scheduled { at, seq, action }));
    }

    pub(super) fn schedule_after(&mut self, delay_ms: f64, action: Action) {
        let at = self.now + VirtualTime::from_millis_f64(delay_ms);
        self.schedule(at, action);
    }

    /// Runs one event. Returns false when the queue is empty.
    fn step(&mut self) -> Result<bool, NetError> {
        let Some(Reverse(ev)) = self.queue.pop() else {
            return Ok(false);
        };
        debug_assert!(ev.at >= self.now);
        self.now = ev.at;
        (ev.action)(self)?;
        Ok(true)
    }

    pub(super) fn run_until(&mut self, done: impl Fn(&World) -> bool) -> Result<(), NetError> {
        while !done(self) {
            if !self.step()? {
                return Err(NetError::Stalled);
            }
        }
        Ok(())
    }

    /// Processes events until the queue is empty.
    pub fn run_idle(&mut self) -> Result<(), NetError> {
        while self.step()? {}
        Ok(())
    }

    /// Queues `ms` of work on a node's CPU and runs `then` when it finishes.
    pub(super) fn compute(&mut self, node: usize, ms: f64, label: &'static str, then: Action) {
        let start = self.now.max(self.nodes[node].cpu_free);
        let done = start + VirtualTime::from_millis_f64(ms);
        self.nodes[node].cpu_free = done;
        self.log(node, "cpu", || format!("{label} ms={ms:.6}"));
        self.schedule(done, then);
    }

    /// Sends `wire_len` bytes from one node to another through the switch.
    ///
    /// The sender's uplink and the receiver's downlink each serialise the
    /// transmission in FIFO order and add their node's latency. A lost
    /// transmission is resent after the retransmit timeout and holds the
    /// uplink until then, so every link delivers in order.
    pub(super) fn transmit(
        &mut self,
        from: usize,
        to: usize,
        wire_len: usize,
        label: String,
        cell: bool,
        on_arrive: Action,
    ) {
        let (s_from, s_to) = (
            ser_time(wire_len, self.nodes[from].bandwidth_bps),
            ser_time(wire_len, self.nodes[to].bandwidth_bps),
        );
        let rto = VirtualTime::from_millis_f64(self.config.retransmit_timeout_ms);
        let mut start = self.now.max(self.nodes[from].uplink_free);
        loop {
            self.bytes_tx[from] += wire_len as u64;
            if cell {
                self.count(from, OpCategory::CellTx);
            }
            let lost = self.config.loss_rate > 0.0 && self.rng.random::<f64>() < self.config.loss_rate;
            if !lost {
                break;
            }
            let to_nick = self.nodes[to].nickname.clone();
            self.log(from, "lost", || format!("to={to_nick} len={wire_len} {label}"));
            start = start + s_from + rto;
        }
        let up_end = start + s_from;
        self.nodes[from].uplink_free = up_end;
        let at_switch = up_end + VirtualTime::from_millis_f64(self.nodes[from].latency_ms);
        let down_start = at_switch.max(self.nodes[to].downlink_free);
        let down_end = down_start + s_to;
        self.nodes[to].downlink_free = down_end;
        let arrive = down_end + VirtualTime::from_millis_f64(self.nodes[to].latency_ms);
        let to_nick = self.nodes[to].nickname.clone();
        self.log(from, "send", || format!("to={to_nick} len={wire_len} {label}"));
        self.schedule(
            arrive,
            Box::new(move |w: &mut World| {
                let from_nick = w.nodes[from].nickname.clone();
                w.log(to, "recv", || format!("from={from_nick} len={wire_len} {label}"));
                on_arrive(w)
            }),
        );
    }

    pub(super) fn derived_seed(&self, label: &str) -> Seed {
        derive_seed(&self.world_seed, label, 0)
    }

    pub(super) fn alloc_circ_id(&mut self) -> u32 {
        let id = self.next_circ_id;
        self.next_circ_id = self.next_circ_id.wrapping_add(1).max(1);
        id
    }

    // ------------------------------------------------------------ probing

    /// Estimates the bottleneck bandwidth between two nodes from the
    /// dispersion of a back-to-back train of 1500-byte packets, in bits per
    /// second rounded to the nearest 1000.
    pub fn probe_bandwidth(&mut self, from: usize, to: usize, packets: usize) -> Result<f64, NetError> {
        const PROBE_LEN: usize = 1500;
        self.node(from)?;
        self.node(to)?;
        if packets < 2 || from == to {
            return Err(NetError::InvalidArgument(
                "a probe needs two nodes and at least two packets".into(),
            ));
        }
        self.run_idle()?;
        self.probe_arrivals.clear();
        for i in 0..packets {
            self.transmit(
                from,
                to,
                PROBE_LEN,
                format!("probe {i}"),
                false,
                Box::new(|w: &mut World| {
                    w.probe_arrivals.push(w.now);
                    Ok(())
                }),
            );
        }
        self.run_until(|w| w.probe_arrivals.len() == packets)?;
        let first = *self.probe_arrivals.iter().min().expect("packets >= 2");
        let last = *self.probe_arrivals.iter().max().expect("packets >= 2");
        let secs = (last - first).as_nanos() as f64 / 1e9;
        if secs == 0.0 {
            return Ok(f64::INFINITY);
        }
        let bps = (packets - 1) as f64 * (PROBE_LEN * 8) as f64 / secs;
        Ok((bps / 1000.0).round() * 1000.0)
    }

    /// Probes every relay from the first client.
    pub fn measure_relays(&mut self, packets: usize) -> Result<Vec<([u8; NODE_ID_LEN], f64)>, NetError> {
        let client = self.client()?;
        let relays: Vec<usize> = (0..self.nodes.len()).filter(|i| self.nodes[*i].is_relay()).collect();
        relays
            .into_iter()
            .map(|r| Ok((self.nodes[r].node_id, self.probe_bandwidth(client, r, packets)?)))
            .collect()
    }
}
