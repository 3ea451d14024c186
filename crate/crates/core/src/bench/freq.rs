use std::collections::BTreeMap;

use serde::Serialize;

use crate::netsim::{Node, NodeRole, OpCategory, World};

/// Role attributed to a node that holds several: the first of these it has.
pub const ROLE_PRIORITY: [NodeRole; 7] = [
    NodeRole::Authority,
    NodeRole::OnionService,
    NodeRole::Guard,
    NodeRole::Exit,
    NodeRole::Middle,
    NodeRole::Client,
    NodeRole::Webserver,
];

/// Categories reported by [`op_frequency_report`].
pub const FREQUENCY_CATEGORIES: [OpCategory; 6] = [
    OpCategory::HandshakeServer,
    OpCategory::RelayUnwrapForward,
    OpCategory::RelayWrapBackward,
    OpCategory::ConsensusSign,
    OpCategory::ConsensusVerify,
    OpCategory::CellTx,
];

pub fn primary_role(node: &Node) -> NodeRole {
    *ROLE_PRIORITY
        .iter()
        .find(|r| node.has_role(**r))
        .expect("validated nodes have a role")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeFrequency {
    pub nickname: String,
    pub role: NodeRole,
    pub counts: Vec<u64>,
}

/// Operation counts per node and each role's share of every category.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyTable {
    pub categories: Vec<OpCategory>,
    pub nodes: Vec<NodeFrequency>,
    /// Role → share of each category (aligned with `categories`). A category
    /// nobody performed has share 0 everywhere.
    pub roles: BTreeMap<NodeRole, Vec<f64>>,
}

impl FrequencyTable {
    pub fn share(&self, role: NodeRole, cat: OpCategory) -> f64 {
        let Some(i) = self.categories.iter().position(|c| *c == cat) else {
            return 0.0;
        };
        self.roles.get(&role).map_or(0.0, |v| v[i])
    }

    pub fn total(&self, cat: OpCategory) -> u64 {
        let Some(i) = self.categories.iter().position(|c| *c == cat) else {
            return 0;
        };
        self.nodes.iter().map(|n| n.counts[i]).sum()
    }
}

pub fn op_frequency_report(world: &World) -> FrequencyTable {
    let categories = FREQUENCY_CATEGORIES.to_vec();
    let nodes: Vec<NodeFrequency> = world
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| NodeFrequency {
            nickname: n.nickname.clone(),
            role: primary_role(n),
            counts: categories.iter().map(|c| world.op_count(i, *c)).collect(),
        })
        .collect();
    let mut sums: BTreeMap<NodeRole, Vec<u64>> = BTreeMap::new();
    for n in &nodes {
        let s = sums.entry(n.role).or_insert_with(|| vec![0; categories.len()]);
        for (acc, c) in s.iter_mut().zip(&n.counts) {
            *acc += c;
        }
    }
    let totals: Vec<u64> = (0..categories.len())
        .map(|i| nodes.iter().map(|n| n.counts[i]).sum())
        .collect();
    let roles = sums
        .into_iter()
        .map(|(role, s)| {
            let shares = s
                .iter()
                .zip(&totals)
                .map(|(c, t)| if *t == 0 { 0.0 } else { *c as f64 / *t as f64 })
                .collect();
            (role, shares)
        })
        .collect();
    FrequencyTable {
        categories,
        nodes,
        roles,
    }
}
