//! Request/response streams over circuits, and the direct baseline.

use super::circuit::{CircStatus, CircuitHandle};
use super::config::NodeRole;
use super::world::World;
use super::{NetError, OpCategory};
use crate::cells::{RelayCommand, RelayMsg};
use crate::onion::relay_originate_backward;
use crate::VirtualTime;
use std::collections::BTreeMap;

/// Header bytes added to every non-cell packet.
pub const WEB_HEADER_LEN: usize = 40;
/// Largest payload of one non-cell packet.
pub const WEB_MSS: usize = 1460;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FetchResult {
    /// From the first request byte sent to the last response byte received.
    pub rtt: VirtualTime,
    pub cells_fwd: usize,
    pub cells_bwd: usize,
}

/// Server end of a stream. Lengths are agreed out of band.
#[derive(Clone, Debug)]
struct ServerStream {
    req_len: usize,
    resp_len: usize,
    req_received: usize,
    buffered: usize,
    resp_received: usize,
}

#[derive(Clone, Debug)]
struct FetchState {
    started: VirtualTime,
    resp_len: usize,
    received: usize,
    cells_fwd: usize,
    cells_bwd: usize,
    done: Option<VirtualTime>,
}

#[derive(Clone, Copy, Debug)]
enum Back {
    Exit { node: usize, prev: usize, cid: u32 },
    Direct { client: usize },
}

impl Back {
    fn node(self) -> usize {
        match self {
            Back::Exit { node, .. } => node,
            Back::Direct { client } => client,
        }
    }
}

#[derive(Clone, Debug)]
enum WebFlow {
    Request { back: Back, resp_len: usize },
    Response { back: Back },
}

#[derive(Default)]
pub(super) struct StreamState {
    exit: BTreeMap<(usize, usize, u32), ServerStream>,
    service: BTreeMap<usize, ServerStream>,
    fetches: BTreeMap<usize, FetchState>,
    direct: Option<FetchState>,
    flows: BTreeMap<u64, WebFlow>,
    next_flow: u64,
}

fn new_stream(req_len: usize, resp_len: usize) -> ServerStream {
    ServerStream {
        req_len,
        resp_len,
        req_received: 0,
        buffered: 0,
        resp_received: 0,
    }
}

impl World {
    /// Sends `request_bytes` through an open circuit and waits for
    /// `response_bytes` back. On a spliced circuit the onion service
    /// answers; otherwise the exit fetches from the web server.
    pub fn fetch(
        &mut self,
        handle: CircuitHandle,
        request_bytes: usize,
        response_bytes: usize,
    ) -> Result<FetchResult, NetError> {
        let ci = self.check_handle(handle)?;
        if request_bytes == 0 || response_bytes == 0 {
            return Err(NetError::InvalidArgument("fetch sizes must be positive".into()));
        }
        if self.circuits[ci].status != CircStatus::Open {
            return Err(NetError::CircuitNotOpen(ci));
        }
        if self.streams.fetches.contains_key(&ci) {
            return Err(NetError::InvalidArgument(format!("circuit {ci} already has a stream")));
        }
        let stream = new_stream(request_bytes, response_bytes);
        match self.circuits[ci].spliced_with {
            Some(svc) => {
                self.streams.service.insert(svc, stream);
            }
            None => {
                self.first_with(NodeRole::Webserver)
                    .ok_or(NetError::NoEligible("webserver"))?;
                let hops = self.circuits[ci].path.len();
                let key = self.relay_key_at(ci, hops - 1).ok_or(NetError::CircuitNotOpen(ci))?;
                self.streams.exit.insert(key, stream);
            }
        }
        let target = self.circuits[ci].keys.len() - 1;
        let format = self.config.relay_format;
        let chunk = format.max_whole_data();
        let zeros = vec![0u8; chunk];
        let mut cells_fwd = 0;
        let mut left = request_bytes;
        self.streams.fetches.insert(
            ci,
            FetchState {
                started: self.now(),
                resp_len: response_bytes,
                received: 0,
                cells_fwd: 0,
                cells_bwd: 0,
                done: None,
            },
        );
        while left > 0 {
            let n = left.min(chunk);
            let msg = RelayMsg::single(format, RelayCommand::Data, &zeros[..n])?;
            self.origin_send(ci, target, &msg)?;
            cells_fwd += 1;
            left -= n;
        }
        self.streams.fetches.get_mut(&ci).expect("inserted above").cells_fwd = cells_fwd;
        let result =
            self.run_until(|w| w.streams.fetches[&ci].done.is_some() || w.circuits[ci].status != CircStatus::Open);
        let state = self.streams.fetches.remove(&ci).expect("inserted above");
        result?;
        match (state.done, &self.circuits[ci].status) {
            (Some(done), _) => Ok(FetchResult {
                rtt: done - state.started,
                cells_fwd: state.cells_fwd,
                cells_bwd: state.cells_bwd,
            }),
            (None, CircStatus::Failed(reason)) => Err(NetError::CircuitFailed {
                circuit: ci,
                reason: reason.clone(),
            }),
            (None, _) => Err(NetError::CircuitNotOpen(ci)),
        }
    }

    /// The same exchange straight between the client and the web server.
    pub fn direct_fetch(&mut self, request_bytes: usize, response_bytes: usize) -> Result<FetchResult, NetError> {
        if request_bytes == 0 || response_bytes == 0 {
            return Err(NetError::InvalidArgument("fetch sizes must be positive".into()));
        }
        let client = self.client()?;
        let web = self
            .first_with(NodeRole::Webserver)
            .ok_or(NetError::NoEligible("webserver"))?;
        self.streams.direct = Some(FetchState {
            started: self.now(),
            resp_len: response_bytes,
            received: 0,
            cells_fwd: 0,
            cells_bwd: 0,
            done: None,
        });
        self.send_web(
            client,
            web,
            request_bytes,
            WebFlow::Request {
                back: Back::Direct { client },
                resp_len: response_bytes,
            },
        );
        let result = self.run_until(|w| w.streams.direct.as_ref().is_some_and(|d| d.done.is_some()));
        let state = self.streams.direct.take().expect("set above");
        result?;
        Ok(FetchResult {
            rtt: state.done.expect("loop ended on completion") - state.started,
            cells_fwd: 0,
            cells_bwd: 0,
        })
    }

    /// The relay-table key of hop `hop` of an origin circuit.
    pub(super) fn relay_key_at(&self, ci: usize, hop: usize) -> Option<(usize, usize, u32)> {
        let c = &self.circuits[ci];
        let mut key = (c.path[0], c.owner, c.cid);
        for _ in 0..hop {
            let (next, cid_out) = self.relay_circs.get(&key)?.next?;
            key = (next, key.0, cid_out);
        }
        self.relay_circs.contains_key(&key).then_some(key)
    }

    pub(super) fn cleanup_relay_state(&mut self, node: usize, prev: usize, cid: u32) {
        self.streams.exit.remove(&(node, prev, cid));
        self.forget_rend_point(node, prev, cid);
    }

    fn send_web(&mut self, from: usize, to: usize, total: usize, flow: WebFlow) {
        let id = self.streams.next_flow;
        self.streams.next_flow += 1;
        self.streams.flows.insert(id, flow);
        let segments = total.div_ceil(WEB_MSS);
        for i in 0..segments {
            let len = WEB_MSS.min(total - i * WEB_MSS);
            let last = i + 1 == segments;
            self.transmit(
                from,
                to,
                len + WEB_HEADER_LEN,
                format!("web flow={id} seg={}/{segments}", i + 1),
                false,
                Box::new(move |w: &mut World| w.web_segment(id, len, last)),
            );
        }
    }

    fn web_segment(&mut self, id: u64, len: usize, last: bool) -> Result<(), NetError> {
        let Some(flow) = self.streams.flows.get(&id).cloned() else {
            return Ok(());
        };
        if last {
            self.streams.flows.remove(&id);
        }
        match flow {
            WebFlow::Request { back, resp_len } => {
                if last {
                    let web = self
                        .first_with(NodeRole::Webserver)
                        .ok_or(NetError::NoEligible("webserver"))?;
                    let delay = self.config.service_delay_ms;
                    self.schedule_after(
                        delay,
                        Box::new(move |w: &mut World| {
                            w.send_web(web, back.node(), resp_len, WebFlow::Response { back });
                            Ok(())
                        }),
                    );
                }
                Ok(())
            }
            WebFlow::Response {
                back: Back::Direct { .. },
            } => {
                let now = self.now();
                if let Some(d) = self.streams.direct.as_mut() {
                    d.received += len;
                    if d.received >= d.resp_len {
                        d.done = Some(now);
                    }
                }
                Ok(())
            }
            WebFlow::Response {
                back: Back::Exit { node, prev, cid },
            } => {
                let Some(s) = self.streams.exit.get_mut(&(node, prev, cid)) else {
                    return Ok(());
                };
                s.buffered += len;
                s.resp_received += len;
                let finished = s.resp_received >= s.resp_len;
                self.exit_flush(node, prev, cid, finished)
            }
        }
    }

    /// Sends buffered response bytes back as DATA cells: full cells only,
    /// unless the response is complete.
    fn exit_flush(&mut self, node: usize, prev: usize, cid: u32, finished: bool) -> Result<(), NetError> {
        let format = self.config.relay_format;
        let chunk = format.max_whole_data();
        let zeros = vec![0u8; chunk];
        loop {
            let key = (node, prev, cid);
            let Some(s) = self.streams.exit.get_mut(&key) else {
                return Ok(());
            };
            let n = if s.buffered >= chunk {
                chunk
            } else if finished && s.buffered > 0 {
                s.buffered
            } else {
                break;
            };
            s.buffered -= n;
            let msg = RelayMsg::single(format, RelayCommand::Data, &zeros[..n])?;
            let Some(hop) = self.relay_circs.get_mut(&key).and_then(|e| e.hop.as_mut()) else {
                return Ok(());
            };
            let p = relay_originate_backward(hop, format, &msg);
            self.count(node, OpCategory::RelayWrapBackward);
            self.send_relay(node, prev, cid, &p)?;
        }
        if finished {
            self.streams.exit.remove(&(node, prev, cid));
        }
        Ok(())
    }

    /// Request bytes reaching the exit.
    pub(super) fn exit_data(&mut self, node: usize, prev: usize, cid: u32, len: usize) -> Result<(), NetError> {
        let Some(s) = self.streams.exit.get_mut(&(node, prev, cid)) else {
            return Ok(());
        };
        let before = s.req_received;
        s.req_received += len;
        if before < s.req_len && s.req_received >= s.req_len {
            let (req_len, resp_len) = (s.req_len, s.resp_len);
            let web = self
                .first_with(NodeRole::Webserver)
                .ok_or(NetError::NoEligible("webserver"))?;
            self.send_web(
                node,
                web,
                req_len,
                WebFlow::Request {
                    back: Back::Exit { node, prev, cid },
                    resp_len,
                },
            );
        }
        Ok(())
    }

    /// Response bytes reaching the client.
    pub(super) fn client_data(&mut self, ci: usize, len: usize) -> Result<(), NetError> {
        let now = self.now();
        if let Some(f) = self.streams.fetches.get_mut(&ci) {
            f.received += len;
            f.cells_bwd += 1;
            if f.received >= f.resp_len {
                f.done = Some(now);
            }
        }
        Ok(())
    }

    /// Request bytes reaching an onion service over its rendezvous circuit.
    pub(super) fn service_data(&mut self, ci: usize, len: usize) -> Result<(), NetError> {
        let Some(s) = self.streams.service.get_mut(&ci) else {
            return Ok(());
        };
        let before = s.req_received;
        s.req_received += len;
        if before < s.req_len && s.req_received >= s.req_len {
            let resp_len = s.resp_len;
            self.streams.service.remove(&ci);
            let delay = self.config.service_delay_ms;
            self.schedule_after(
                delay,
                Box::new(move |w: &mut World| {
                    if w.circuits[ci].status != CircStatus::Open {
                        return Ok(());
                    }
                    let format = w.config.relay_format;
                    let chunk = format.max_whole_data();
                    let zeros = vec![0u8; chunk];
                    let target = w.circuits[ci].keys.len() - 1;
                    let mut left = resp_len;
                    while left > 0 {
                        let n = left.min(chunk);
                        let msg = RelayMsg::single(format, RelayCommand::Data, &zeros[..n])?;
                        w.origin_send(ci, target, &msg)?;
                        left -= n;
                    }
                    Ok(())
                }),
            );
        }
        Ok(())
    }
}
