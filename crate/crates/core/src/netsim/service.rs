//! Onion-service publication, introduction and rendezvous.

use super::circuit::{CircuitHandle, Purpose};
use super::config::{NodeFlag, NodeRole};
use super::stream::WEB_HEADER_LEN;
use super::world::{PathConstraints, World};
use super::{NetError, OpCategory};
use crate::cells::{RelayCommand, RelayMsg};
use crate::handshake::{
    client_finish, client_init, server_respond, step_cost, ClientState, HandshakeKeys, Step, NODE_ID_LEN,
};
use crate::onion::relay_originate_backward;
use crate::registry::{sig_op_times, SchemeProfile};
use crate::toy_crypto::{prf_expand, sim_sig_keygen, sim_sign, sim_verify, KeyPair};
use crate::VirtualTime;
use rand::Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;

const COOKIE_LEN: usize = 20;
const HS_SUITE: &str = "hs-ntor";
pub const DESCRIPTOR_HEADER: &str = "hs-descriptor v1";

/// The per-epoch public key a service is looked up under.
pub fn blind_service_key(identity_pk: &[u8], epoch: u64) -> Vec<u8> {
    let mut input = identity_pk.to_vec();
    input.extend_from_slice(&epoch.to_be_bytes());
    prf_expand(b"blind", &input, identity_pk.len())
}

/// A signed service descriptor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Descriptor {
    pub blinded_key: Vec<u8>,
    pub intro_point: [u8; NODE_ID_LEN],
    /// DH key clients use for the end-to-end handshake.
    pub onion_key: Vec<u8>,
    pub signature: Vec<u8>,
}

fn hex_field(line: Option<&str>, key: &str) -> Result<Vec<u8>, String> {
    let v = line
        .and_then(|l| l.strip_prefix(key))
        .and_then(|l| l.strip_prefix(' '))
        .ok_or_else(|| format!("expected `{key}`"))?;
    if v.is_empty() || v.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(format!("bad `{key}` value"));
    }
    hex::decode(v).map_err(|_| format!("bad `{key}` value"))
}

impl Descriptor {
    pub fn body(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{DESCRIPTOR_HEADER}");
        let _ = writeln!(s, "blinded-key {}", hex::encode(&self.blinded_key));
        let _ = writeln!(s, "intro-point {}", hex::encode(self.intro_point));
        let _ = writeln!(s, "onion-key {}", hex::encode(&self.onion_key));
        s
    }

    pub fn to_text(&self) -> String {
        format!("{}signature {}\n", self.body(), hex::encode(&self.signature))
    }

    pub fn parse(text: &str) -> Result<Descriptor, String> {
        let mut lines = text.strip_suffix('\n').ok_or("missing final newline")?.split('\n');
        if lines.next() != Some(DESCRIPTOR_HEADER) {
            return Err("bad header".into());
        }
        let blinded_key = hex_field(lines.next(), "blinded-key")?;
        let intro = hex_field(lines.next(), "intro-point")?;
        let onion_key = hex_field(lines.next(), "onion-key")?;
        let signature = hex_field(lines.next(), "signature")?;
        if lines.next().is_some() {
            return Err("trailing lines".into());
        }
        let intro_point = intro.try_into().map_err(|_| "bad intro-point length".to_string())?;
        Ok(Descriptor {
            blinded_key,
            intro_point,
            onion_key,
            signature,
        })
    }

    /// Checks the blinded key against `identity_pk` and the signature.
    pub fn verify(&self, identity_pk: &[u8], epoch: u64, scheme: &SchemeProfile) -> Result<(), String> {
        if self.blinded_key != blind_service_key(identity_pk, epoch) {
            return Err("blinded key does not match the service identity".into());
        }
        match sim_verify(scheme, identity_pk, self.body().as_bytes(), &self.signature) {
            Ok(true) => Ok(()),
            Ok(false) => Err("bad signature".into()),
            Err(e) => Err(e.to_string()),
        }
    }
}

/// Result of a completed rendezvous.
#[derive(Clone, Debug, PartialEq)]
pub struct OsConnection {
    /// The client's circuit, spliced to the service's.
    pub circuit: CircuitHandle,
    /// From the descriptor query to the end-to-end keys.
    pub time: VirtualTime,
    pub rendezvous: String,
    pub intro_point: String,
    pub hops: usize,
}

pub(super) struct ServiceEntry {
    id: String,
    host: usize,
    identity: KeyPair,
    blinded: Vec<u8>,
    intro: usize,
    hsdir: usize,
}

struct Conn {
    service: usize,
    suite: String,
    client: usize,
    started: VirtualTime,
    descriptor: Option<Descriptor>,
    rp: Option<usize>,
    cookie: [u8; COOKIE_LEN],
    client_circ: Option<usize>,
    service_circ: Option<usize>,
    client_hs: Option<ClientState>,
    service_hs: Option<(Vec<u8>, HandshakeKeys)>,
    done: Option<VirtualTime>,
    failed: Option<NetError>,
}

#[derive(Default)]
pub(super) struct HsState {
    services: Vec<ServiceEntry>,
    store: BTreeMap<(usize, Vec<u8>), String>,
    rend_points: BTreeMap<(usize, [u8; COOKIE_LEN]), (usize, u32)>,
    conns: Vec<Conn>,
}

impl World {
    pub(super) fn publish_services(&mut self) -> Result<(), NetError> {
        let configs = self.config.services.clone();
        for s in configs {
            let host = self.node_index(&s.host)?;
            let identity = sim_sig_keygen(&self.identity_scheme, &self.derived_seed(&format!("service/{}", s.id)))?;
            let blinded = blind_service_key(&identity.public_key, self.config.epoch);
            let intros: Vec<usize> = (0..self.nodes.len())
                .filter(|i| *i != host && self.nodes[*i].has_role(NodeRole::Middle))
                .collect();
            if intros.is_empty() {
                return Err(NetError::Config(format!("no introduction point for service {}", s.id)));
            }
            let intro = intros[self.rng.random_range(0..intros.len())];
            let mut hsdirs: Vec<usize> = (0..self.nodes.len())
                .filter(|i| self.nodes[*i].flags.contains(&NodeFlag::Hsdir))
                .collect();
            if hsdirs.is_empty() {
                return Err(NetError::Config("onion services need an hsdir relay".into()));
            }
            hsdirs.sort_by_key(|i| self.nodes[*i].node_id);
            let hsdir = hsdirs
                .iter()
                .copied()
                .find(|i| self.nodes[*i].node_id[..] >= blinded[..NODE_ID_LEN.min(blinded.len())])
                .unwrap_or(hsdirs[0]);
            let onion_key = self.nodes[host]
                .onion
                .dh
                .as_ref()
                .ok_or_else(|| NetError::Config("service host lacks a DH onion key".into()))?
                .public_key
                .clone();
            let mut desc = Descriptor {
                blinded_key: blinded.clone(),
                intro_point: self.nodes[intro].node_id,
                onion_key,
                signature: Vec::new(),
            };
            desc.signature = sim_sign(&self.identity_scheme, &identity.secret_key, desc.body().as_bytes())?;
            self.hs.store.insert((hsdir, blinded.clone()), desc.to_text());
            let (h, i, d) = (
                self.nick(host).to_string(),
                self.nick(intro).to_string(),
                self.nick(hsdir).to_string(),
            );
            self.log(host, "hs-publish", || {
                format!("service={} intro={i} hsdir={d} host={h}", s.id)
            });
            self.hs.services.push(ServiceEntry {
                id: s.id,
                host,
                identity,
                blinded,
                intro,
                hsdir,
            });
        }
        Ok(())
    }

    fn service_index(&self, id: &str) -> Result<usize, NetError> {
        self.hs
            .services
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| NetError::UnknownService(id.to_string()))
    }

    /// Identity public key of a service (its address).
    pub fn service_identity(&self, id: &str) -> Result<Vec<u8>, NetError> {
        Ok(self.hs.services[self.service_index(id)?].identity.public_key.clone())
    }

    /// The descriptor text stored at the service's directory.
    pub fn service_descriptor(&self, id: &str) -> Result<String, NetError> {
        let s = &self.hs.services[self.service_index(id)?];
        self.hs
            .store
            .get(&(s.hsdir, s.blinded.clone()))
            .cloned()
            .ok_or_else(|| NetError::Descriptor("not stored".into()))
    }

    /// Corrupts one character of the stored descriptor's signed body.
    pub fn tamper_descriptor(&mut self, id: &str) -> Result<(), NetError> {
        let s = &self.hs.services[self.service_index(id)?];
        let key = (s.hsdir, s.blinded.clone());
        let text = self
            .hs
            .store
            .get_mut(&key)
            .ok_or_else(|| NetError::Descriptor("not stored".into()))?;
        let at = text.find("onion-key ").expect("canonical descriptor") + "onion-key ".len();
        let c = if text.as_bytes()[at] == b'0' { "1" } else { "0" };
        text.replace_range(at..at + 1, c);
        Ok(())
    }

    /// Fetches the service descriptor, builds a rendezvous circuit with
    /// `suite`, introduces itself, and waits for the service's circuit to
    /// reach the rendezvous point. The end-to-end layer uses hs-ntor.
    pub fn onion_service_connect(&mut self, service_id: &str, suite: &str) -> Result<OsConnection, NetError> {
        let svc = self.service_index(service_id)?;
        let circuit_suite = self.suite(suite)?;
        if circuit_suite.variant == crate::handshake::Variant::HsNtor {
            return Err(NetError::UnsupportedSuite(format!("{suite} is end-to-end only")));
        }
        self.suite(HS_SUITE)?;
        let client = self.client()?;
        let conn = self.hs.conns.len();
        self.hs.conns.push(Conn {
            service: svc,
            suite: suite.to_string(),
            client,
            started: self.now(),
            descriptor: None,
            rp: None,
            cookie: [0; COOKIE_LEN],
            client_circ: None,
            service_circ: None,
            client_hs: None,
            service_hs: None,
            done: None,
            failed: None,
        });
        let (hsdir, blinded) = {
            let s = &self.hs.services[svc];
            (s.hsdir, s.blinded.clone())
        };
        self.log(client, "hs-connect", || format!("conn={conn} service={service_id}"));
        let len = WEB_HEADER_LEN + blinded.len();
        self.transmit(
            client,
            hsdir,
            len,
            format!("dir-query conn={conn}"),
            false,
            Box::new(move |w: &mut World| w.hsdir_query(conn, hsdir, blinded)),
        );
        self.run_until(|w| w.hs.conns[conn].done.is_some() || w.hs.conns[conn].failed.is_some())?;
        let c = &self.hs.conns[conn];
        if let Some(e) = &c.failed {
            return Err(e.clone());
        }
        let ci = c.client_circ.expect("connection completed");
        let hops = self.circuit_info(CircuitHandle(ci))?.hops;
        Ok(OsConnection {
            circuit: CircuitHandle(ci),
            time: c.done.expect("connection completed") - c.started,
            rendezvous: self.nick(c.rp.expect("connection completed")).to_string(),
            intro_point: self.nick(self.hs.services[c.service].intro).to_string(),
            hops,
        })
    }

    pub(super) fn fail_connection(&mut self, conn: usize, err: NetError) {
        let c = &mut self.hs.conns[conn];
        if c.failed.is_none() && c.done.is_none() {
            c.failed = Some(err);
        }
    }

    fn hsdir_query(&mut self, conn: usize, hsdir: usize, blinded: Vec<u8>) -> Result<(), NetError> {
        let client = self.hs.conns[conn].client;
        let Some(text) = self.hs.store.get(&(hsdir, blinded)).cloned() else {
            self.fail_connection(conn, NetError::Descriptor("not found".into()));
            return Ok(());
        };
        self.transmit(
            hsdir,
            client,
            WEB_HEADER_LEN + text.len(),
            format!("dir-reply conn={conn}"),
            false,
            Box::new(move |w: &mut World| w.client_descriptor(conn, text)),
        );
        Ok(())
    }

    fn client_descriptor(&mut self, conn: usize, text: String) -> Result<(), NetError> {
        let client = self.hs.conns[conn].client;
        let verify_ms = sig_op_times(self.device_of(client)?, &self.identity_scheme).map_or(0.0, |t| t.verify_ms);
        self.compute(
            client,
            verify_ms,
            "descriptor_verify",
            Box::new(move |w: &mut World| {
                let svc = w.hs.conns[conn].service;
                let pk = w.hs.services[svc].identity.public_key.clone();
                let checked =
                    Descriptor::parse(&text).and_then(|d| d.verify(&pk, w.config.epoch, &w.identity_scheme).map(|_| d));
                let desc = match checked {
                    Ok(d) => d,
                    Err(e) => {
                        w.fail_connection(conn, NetError::Descriptor(e));
                        return Ok(());
                    }
                };
                w.hs.conns[conn].descriptor = Some(desc);
                let rps: Vec<usize> = (0..w.nodes.len())
                    .filter(|i| w.nodes[*i].flags.contains(&NodeFlag::Rendezvous) && w.in_consensus(*i))
                    .collect();
                if rps.is_empty() {
                    w.fail_connection(conn, NetError::NoRendezvous);
                    return Ok(());
                }
                let rp = rps[w.rng.random_range(0..rps.len())];
                w.hs.conns[conn].rp = Some(rp);
                let constraints = PathConstraints {
                    last: Some(rp),
                    ..Default::default()
                };
                let suite = w.hs.conns[conn].suite.clone();
                let started = w
                    .select_path(&constraints)
                    .and_then(|path| w.start_circuit(client, &path, &suite, Purpose::ClientRend { conn }));
                match started {
                    Ok(ci) => w.hs.conns[conn].client_circ = Some(ci),
                    Err(e) => w.fail_connection(conn, e),
                }
                Ok(())
            }),
        );
        Ok(())
    }

    pub(super) fn client_rend_circuit_open(&mut self, ci: usize, conn: usize) -> Result<(), NetError> {
        let cookie: [u8; COOKIE_LEN] = self.rng.random();
        self.hs.conns[conn].cookie = cookie;
        let msg = RelayMsg::single(self.config.relay_format, RelayCommand::EstablishRendezvous, &cookie)?;
        let last = self.circuits[ci].keys.len() - 1;
        self.origin_send(ci, last, &msg)
    }

    pub(super) fn rp_establish(&mut self, node: usize, prev: usize, cid: u32, data: Vec<u8>) -> Result<(), NetError> {
        let Ok(cookie) = <[u8; COOKIE_LEN]>::try_from(data.as_slice()) else {
            return self.relay_teardown(node, prev, cid, "bad rendezvous cookie");
        };
        if !self.nodes[node].flags.contains(&NodeFlag::Rendezvous) {
            return self.relay_teardown(node, prev, cid, "not a rendezvous point");
        }
        self.hs.rend_points.insert((node, cookie), (prev, cid));
        self.originate(node, prev, cid, RelayCommand::RendezvousEstablished, &[])
    }

    fn originate(
        &mut self,
        node: usize,
        prev: usize,
        cid: u32,
        cmd: RelayCommand,
        data: &[u8],
    ) -> Result<(), NetError> {
        let format = self.config.relay_format;
        let msg = RelayMsg::single(format, cmd, data)?;
        let Some(hop) = self
            .relay_circs
            .get_mut(&(node, prev, cid))
            .and_then(|e| e.hop.as_mut())
        else {
            return Ok(());
        };
        let p = relay_originate_backward(hop, format, &msg);
        self.count(node, OpCategory::RelayWrapBackward);
        self.send_relay(node, prev, cid, &p)
    }

    pub(super) fn forget_rend_point(&mut self, node: usize, prev: usize, cid: u32) {
        self.hs
            .rend_points
            .retain(|(n, _), v| !(*n == node && *v == (prev, cid)));
    }

    pub(super) fn client_rend_established(&mut self, ci: usize) -> Result<(), NetError> {
        let Purpose::ClientRend { conn } = self.circuits[ci].purpose else {
            return Ok(());
        };
        let client = self.hs.conns[conn].client;
        let hs = self.suite(HS_SUITE)?;
        let ms = step_cost(&hs, Step::ClientInit, self.device_of(client)?)?;
        self.compute(
            client,
            ms,
            "hs_client_init",
            Box::new(move |w: &mut World| {
                let c = &w.hs.conns[conn];
                let svc = &w.hs.services[c.service];
                let (host, intro, blinded) = (svc.host, svc.intro, svc.blinded.clone());
                let desc = c.descriptor.clone().expect("descriptor checked before the circuit");
                let rp_id = w.nodes[c.rp.expect("rendezvous chosen")].node_id;
                let seed: [u8; 32] = w.rng.random();
                let (state, skin) = match client_init(&hs, &w.nodes[host].node_id, &desc.onion_key, &seed) {
                    Ok(x) => x,
                    Err(e) => {
                        w.fail_connection(conn, e.into());
                        return Ok(());
                    }
                };
                w.count(client, OpCategory::HandshakeClient);
                w.hs.conns[conn].client_hs = Some(state);
                let mut payload = blinded;
                payload.extend_from_slice(&w.hs.conns[conn].cookie);
                payload.extend_from_slice(&rp_id);
                payload.extend_from_slice(&skin);
                w.transmit(
                    client,
                    intro,
                    WEB_HEADER_LEN + payload.len(),
                    format!("introduce conn={conn}"),
                    false,
                    Box::new(move |w: &mut World| w.intro_receive(conn, intro, payload)),
                );
                Ok(())
            }),
        );
        Ok(())
    }

    /// The introduction point relays the request to the service host.
    fn intro_receive(&mut self, conn: usize, intro: usize, payload: Vec<u8>) -> Result<(), NetError> {
        let blind_len = self.identity_scheme.pk_len;
        let svc = self
            .hs
            .services
            .iter()
            .position(|s| s.intro == intro && payload.len() >= blind_len && s.blinded[..] == payload[..blind_len]);
        let Some(svc) = svc else {
            self.fail_connection(
                conn,
                NetError::Descriptor("introduction point does not know the service".into()),
            );
            return Ok(());
        };
        let host = self.hs.services[svc].host;
        let rest = payload[blind_len..].to_vec();
        self.transmit(
            intro,
            host,
            WEB_HEADER_LEN + rest.len(),
            format!("introduce-relay conn={conn}"),
            false,
            Box::new(move |w: &mut World| w.service_introduce(conn, host, rest)),
        );
        Ok(())
    }

    fn service_introduce(&mut self, conn: usize, host: usize, payload: Vec<u8>) -> Result<(), NetError> {
        if payload.len() < COOKIE_LEN + NODE_ID_LEN {
            self.fail_connection(conn, NetError::Descriptor("short introduction".into()));
            return Ok(());
        }
        let rp = self.node_by_id(&payload[COOKIE_LEN..COOKIE_LEN + NODE_ID_LEN]);
        let skin = payload[COOKIE_LEN + NODE_ID_LEN..].to_vec();
        let hs = self.suite(HS_SUITE)?;
        let ms = step_cost(&hs, Step::ServerRespond, self.device_of(host)?)?;
        self.compute(
            host,
            ms,
            "hs_server_respond",
            Box::new(move |w: &mut World| {
                let Some(rp) = rp else {
                    w.fail_connection(conn, NetError::NoRendezvous);
                    return Ok(());
                };
                let seed: [u8; 32] = w.rng.random();
                let (reply, keys) = match server_respond(&hs, &w.nodes[host].onion, &skin, &seed) {
                    Ok(x) => x,
                    Err(e) => {
                        w.fail_connection(conn, e.into());
                        return Ok(());
                    }
                };
                w.count(host, OpCategory::HandshakeServer);
                w.hs.conns[conn].service_hs = Some((reply, keys));
                let constraints = PathConstraints {
                    last: Some(rp),
                    broad_middle: true,
                    exclude: [host].into_iter().collect(),
                    ..Default::default()
                };
                let suite = w.hs.conns[conn].suite.clone();
                let started = w
                    .select_path(&constraints)
                    .and_then(|path| w.start_circuit(host, &path, &suite, Purpose::ServiceRend { conn }));
                match started {
                    Ok(ci) => w.hs.conns[conn].service_circ = Some(ci),
                    Err(e) => w.fail_connection(conn, e),
                }
                Ok(())
            }),
        );
        Ok(())
    }

    pub(super) fn service_rend_circuit_open(&mut self, ci: usize, conn: usize) -> Result<(), NetError> {
        let Some((reply, keys)) = self.hs.conns[conn].service_hs.take() else {
            return Ok(());
        };
        let mut body = self.hs.conns[conn].cookie.to_vec();
        body.extend_from_slice(&reply);
        let msg = RelayMsg::single(self.config.relay_format, RelayCommand::Rendezvous1, &body)?;
        let last = self.circuits[ci].keys.len() - 1;
        self.origin_send(ci, last, &msg)?;
        self.circuits[ci].keys.push_hop(keys.mirrored())?;
        Ok(())
    }

    pub(super) fn rp_rendezvous1(&mut self, node: usize, prev: usize, cid: u32, data: Vec<u8>) -> Result<(), NetError> {
        let cookie = data
            .get(..COOKIE_LEN)
            .and_then(|c| <[u8; COOKIE_LEN]>::try_from(c).ok());
        let Some((prev_a, cid_a)) = cookie.and_then(|c| self.hs.rend_points.remove(&(node, c))) else {
            return self.relay_teardown(node, prev, cid, "unknown rendezvous cookie");
        };
        if let Some(a) = self.relay_circs.get_mut(&(node, prev_a, cid_a)) {
            a.splice = Some((prev, cid));
        }
        if let Some(b) = self.relay_circs.get_mut(&(node, prev, cid)) {
            b.splice = Some((prev_a, cid_a));
        }
        self.log(node, "splice", || format!("circ={cid_a} circ={cid}"));
        self.originate(node, prev_a, cid_a, RelayCommand::Rendezvous2, &data[COOKIE_LEN..])
    }

    pub(super) fn client_rendezvous2(&mut self, ci: usize, reply: Vec<u8>) -> Result<(), NetError> {
        let Purpose::ClientRend { conn } = self.circuits[ci].purpose else {
            return Ok(());
        };
        let client = self.hs.conns[conn].client;
        let hs = self.suite(HS_SUITE)?;
        let ms = step_cost(&hs, Step::ClientFinish, self.device_of(client)?)?;
        self.compute(
            client,
            ms,
            "hs_client_finish",
            Box::new(move |w: &mut World| {
                let Some(state) = w.hs.conns[conn].client_hs.take() else {
                    return Ok(());
                };
                match client_finish(state, &reply) {
                    Ok(keys) => {
                        w.circuits[ci].keys.push_hop(keys)?;
                        let svc_circ = w.hs.conns[conn].service_circ;
                        w.circuits[ci].spliced_with = svc_circ;
                        if let Some(s) = svc_circ {
                            w.circuits[s].spliced_with = Some(ci);
                        }
                        w.hs.conns[conn].done = Some(w.now());
                        w.log(client, "hs-connected", || format!("conn={conn} circ={ci}"));
                        Ok(())
                    }
                    Err(e) => {
                        w.fail_connection(conn, e.into());
                        w.fail_circuit(ci, "end-to-end authentication failed".into(), true)
                    }
                }
            }),
        );
        Ok(())
    }
}
