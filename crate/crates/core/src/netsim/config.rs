use super::NetError;
use crate::cells::RelayFormat;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const NETSIM_HEADER: &str = "netsim-cfg v1";
pub const DEFAULT_NETSIM_DOCUMENT: &str = include_str!("../../profiles/default.netsim");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Authority,
    Guard,
    Middle,
    Exit,
    OnionService,
    Client,
    Webserver,
}

impl NodeRole {
    pub fn name(self) -> &'static str {
        match self {
            NodeRole::Authority => "authority",
            NodeRole::Guard => "guard",
            NodeRole::Middle => "middle",
            NodeRole::Exit => "exit",
            NodeRole::OnionService => "onion_service",
            NodeRole::Client => "client",
            NodeRole::Webserver => "webserver",
        }
    }

    pub fn is_relay_position(self) -> bool {
        matches!(self, NodeRole::Guard | NodeRole::Middle | NodeRole::Exit)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFlag {
    Hsdir,
    Rendezvous,
}

impl NodeFlag {
    pub fn name(self) -> &'static str {
        match self {
            NodeFlag::Hsdir => "hsdir",
            NodeFlag::Rendezvous => "rendezvous",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub nickname: String,
    pub device: String,
    pub roles: BTreeSet<NodeRole>,
    #[serde(default)]
    pub flags: BTreeSet<NodeFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub id: String,
    pub host: String,
}

fn default_format() -> RelayFormat {
    RelayFormat::Fragmented
}
fn default_bandwidth() -> f64 {
    93.8e6
}
fn default_latency() -> f64 {
    0.2
}
fn default_rto() -> f64 {
    200.0
}
fn default_identity() -> String {
    "ed25519".to_string()
}
fn default_true() -> bool {
    true
}

/// Topology and link parameters of a simulated network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    #[serde(default = "default_format")]
    pub relay_format: RelayFormat,
    /// Bits per second, per node-to-switch link.
    #[serde(default = "default_bandwidth")]
    pub bandwidth_bps: f64,
    /// One-way node-to-switch latency in milliseconds.
    #[serde(default = "default_latency")]
    pub latency_ms: f64,
    /// Time the web server (or onion service) takes to answer a request.
    #[serde(default)]
    pub service_delay_ms: f64,
    /// Probability that one link transmission is lost and resent.
    #[serde(default)]
    pub loss_rate: f64,
    #[serde(default = "default_rto")]
    pub retransmit_timeout_ms: f64,
    #[serde(default)]
    pub epoch: u64,
    /// Signature scheme of node identity keys.
    #[serde(default = "default_identity")]
    pub identity_scheme: String,
    #[serde(default = "default_true")]
    pub trace: bool,
    #[serde(default, rename = "node")]
    pub nodes: Vec<NodeConfig>,
    #[serde(default, rename = "service")]
    pub services: Vec<ServiceConfig>,
}

impl Default for NetConfig {
    fn default() -> Self {
        parse_config(DEFAULT_NETSIM_DOCUMENT).expect("default topology is valid")
    }
}

impl NetConfig {
    pub fn node(&self, nickname: &str) -> Option<&NodeConfig> {
        self.nodes.iter().find(|n| n.nickname == nickname)
    }

    pub fn node_mut(&mut self, nickname: &str) -> Option<&mut NodeConfig> {
        self.nodes.iter_mut().find(|n| n.nickname == nickname)
    }

    /// Sets bandwidth and latency on every link, clearing per-node overrides.
    pub fn with_uniform_links(mut self, bandwidth_bps: f64, latency_ms: f64) -> Self {
        self.bandwidth_bps = bandwidth_bps;
        self.latency_ms = latency_ms;
        for n in &mut self.nodes {
            n.bandwidth_bps = None;
            n.latency_ms = None;
        }
        self
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if n.nickname.is_empty() || n.nickname.contains(char::is_whitespace) {
                return bad(format!("invalid nickname `{}`", n.nickname));
            }
            if !seen.insert(n.nickname.as_str()) {
                return bad(format!("duplicate nickname `{}`", n.nickname));
            }
            if n.roles.is_empty() {
                return bad(format!("node `{}` has no roles", n.nickname));
            }
            let endpoint = n.roles.contains(&NodeRole::Client) || n.roles.contains(&NodeRole::Webserver);
            if endpoint && n.roles.len() > 1 {
                return bad(format!("node `{}` mixes an endpoint role with others", n.nickname));
            }
            if let Some(bw) = n.bandwidth_bps {
                if bw.is_nan() || bw <= 0.0 {
                    return bad(format!("node `{}` bandwidth must be positive", n.nickname));
                }
            }
            if let Some(l) = n.latency_ms {
                if !(l.is_finite() && l >= 0.0) {
                    return bad(format!("node `{}` latency must be finite and non-negative", n.nickname));
                }
            }
        }
        if self.bandwidth_bps.is_nan() || self.bandwidth_bps <= 0.0 {
            return bad("bandwidth_bps must be positive".into());
        }
        if !(self.latency_ms.is_finite() && self.latency_ms >= 0.0) {
            return bad("latency_ms must be finite and non-negative".into());
        }
        if !(self.service_delay_ms.is_finite() && self.service_delay_ms >= 0.0) {
            return bad("service_delay_ms must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.loss_rate) {
            return bad("loss_rate must lie in [0, 1)".into());
        }
        if !(self.retransmit_timeout_ms.is_finite() && self.retransmit_timeout_ms > 0.0) {
            return bad("retransmit_timeout_ms must be positive".into());
        }
        let count = |r: NodeRole| self.nodes.iter().filter(|n| n.roles.contains(&r)).count();
        if count(NodeRole::Authority) < 2 {
            return bad("at least two authorities are required".into());
        }
        for (r, what) in [
            (NodeRole::Guard, "guard"),
            (NodeRole::Middle, "middle"),
            (NodeRole::Exit, "exit"),
            (NodeRole::Client, "client"),
        ] {
            if count(r) == 0 {
                return bad(format!("at least one {what} is required"));
            }
        }
        let mut ids = BTreeSet::new();
        for s in &self.services {
            if !ids.insert(s.id.as_str()) {
                return bad(format!("duplicate service `{}`", s.id));
            }
            match self.node(&s.host) {
                Some(h) if h.roles.contains(&NodeRole::OnionService) => {}
                _ => {
                    return bad(format!(
                        "service `{}` host `{}` lacks the onion_service role",
                        s.id, s.host
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> String {
        let body = toml::to_string(self).expect("config serialises");
        format!("{NETSIM_HEADER}\n{body}")
    }
}

/// Parses a `netsim-cfg v1` document: the header line followed by TOML.
pub fn parse_config(source: &str) -> Result<NetConfig, NetError> {
    let mut lines = source.splitn(2, '\n');
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header.trim() != NETSIM_HEADER {
        return Err(NetError::Config(format!("expected header `{NETSIM_HEADER}`")));
    }
    let cfg: NetConfig =
        toml::from_str(lines.next().unwrap_or("")).map_err(|e| NetError::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
