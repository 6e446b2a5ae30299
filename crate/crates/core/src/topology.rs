//! Node hierarchy of a fog deployment.
//!
//! A topology is a strict tree rooted at a single cloud node. Every other
//! node points at its parent and carries the one-way latency of that uplink.
//! Nodes are indexed by their position in id-sorted order, so identical specs
//! always produce identical indices.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tier of a node in the fog hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Edge,
    Intermediary,
    Cloud,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Edge, Tier::Intermediary, Tier::Cloud];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Edge => "edge",
            Tier::Intermediary => "intermediary",
            Tier::Cloud => "cloud",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One value per tier. Used for multipliers, stickiness and similar knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerTier<T> {
    pub edge: T,
    pub intermediary: T,
    pub cloud: T,
}

impl<T: Copy> PerTier<T> {
    pub fn uniform(value: T) -> Self {
        Self {
            edge: value,
            intermediary: value,
            cloud: value,
        }
    }

    pub fn get(&self, tier: Tier) -> T {
        match tier {
            Tier::Edge => self.edge,
            Tier::Intermediary => self.intermediary,
            Tier::Cloud => self.cloud,
        }
    }

    pub fn set(&mut self, tier: Tier, value: T) {
        match tier {
            Tier::Edge => self.edge = value,
            Tier::Intermediary => self.intermediary = value,
            Tier::Cloud => self.cloud = value,
        }
    }
}

impl<T: Copy + Default> Default for PerTier<T> {
    fn default() -> Self {
        Self::uniform(T::default())
    }
}

/// A capacity that is either a finite amount or explicitly unbounded.
///
/// Serialized as a number, or as the string `"unbounded"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity<T> {
    Bounded(T),
    Unbounded,
}

impl<T: Copy> Capacity<T> {
    pub fn bounded(self) -> Option<T> {
        match self {
            Capacity::Bounded(v) => Some(v),
            Capacity::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Capacity::Unbounded)
    }
}

impl<T: Serialize> Serialize for Capacity<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Capacity::Bounded(v) => v.serialize(serializer),
            Capacity::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Capacity<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Value(T),
            Word(String),
        }
        match Raw::<T>::deserialize(deserializer)? {
            Raw::Value(v) => Ok(Capacity::Bounded(v)),
            Raw::Word(w) if w == "unbounded" => Ok(Capacity::Unbounded),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a number or \"unbounded\", found {w:?}"
            ))),
        }
    }
}

/// Declarative description of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub tier: Tier,
    /// Abstract storage units.
    pub storage_capacity: Capacity<f64>,
    /// Number of requests that can execute in parallel.
    pub processing_slots: Capacity<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// One-way latency to the parent, in milliseconds.
    #[serde(default)]
    pub uplink_latency_ms: f64,
}

/// Dense index of a node inside a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeIndex(pub u32);

impl NodeIndex {
    pub fn get(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("topology has no nodes")]
    Empty,
    #[error("duplicate node id {0:?}")]
    DuplicateId(String),
    #[error("topology has no cloud node")]
    NoCloud,
    #[error("more than one cloud node: {0:?}")]
    MultipleClouds(Vec<String>),
    #[error("non-cloud node {0:?} has no parent")]
    OrphanNode(String),
    #[error("cloud node {0:?} must not have a parent")]
    CloudHasParent(String),
    #[error("node {node:?} references unknown parent {parent:?}")]
    UnknownParent { node: String, parent: String },
    #[error("cycle detected through node {0:?}")]
    CycleDetected(String),
    #[error("node {node:?}: {message}")]
    InvalidCapacity { node: String, message: String },
    #[error("node {0:?}: uplink latency must be finite and non-negative")]
    InvalidLatency(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
}

/// Validated node tree with precomputed paths to the cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<NodeSpec>,
    parents: Vec<Option<NodeIndex>>,
    paths: Vec<Vec<NodeIndex>>,
    depth_order: Vec<NodeIndex>,
    by_id: BTreeMap<String, NodeIndex>,
    cloud: NodeIndex,
}

impl Topology {
    /// Validates `specs` and builds the tree.
    pub fn build(specs: &[NodeSpec]) -> Result<Self, TopologyError> {
        if specs.is_empty() {
            return Err(TopologyError::Empty);
        }
        let mut nodes = specs.to_vec();
        nodes.sort_by(|a, b| a.id.cmp(&b.id));

        let mut by_id = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if by_id.insert(n.id.clone(), NodeIndex(i as u32)).is_some() {
                return Err(TopologyError::DuplicateId(n.id.clone()));
            }
        }

        let clouds: Vec<&NodeSpec> = nodes.iter().filter(|n| n.tier == Tier::Cloud).collect();
        let cloud = match clouds.as_slice() {
            [] => return Err(TopologyError::NoCloud),
            [c] => by_id[&c.id],
            many => {
                return Err(TopologyError::MultipleClouds(
                    many.iter().map(|n| n.id.clone()).collect(),
                ))
            }
        };

        let mut parents = Vec::with_capacity(nodes.len());
        for n in &nodes {
            check_node(n)?;
            let parent = match (&n.parent, n.tier) {
                (Some(_), Tier::Cloud) => return Err(TopologyError::CloudHasParent(n.id.clone())),
                (None, Tier::Cloud) => None,
                (None, _) => return Err(TopologyError::OrphanNode(n.id.clone())),
                (Some(p), _) => match by_id.get(p) {
                    Some(&idx) => Some(idx),
                    None => {
                        return Err(TopologyError::UnknownParent {
                            node: n.id.clone(),
                            parent: p.clone(),
                        })
                    }
                },
            };
            parents.push(parent);
        }

        let mut paths = Vec::with_capacity(nodes.len());
        for start in 0..nodes.len() {
            let mut path = vec![NodeIndex(start as u32)];
            let mut cur = start;
            while let Some(p) = parents[cur] {
                if path.len() > nodes.len() {
                    return Err(TopologyError::CycleDetected(nodes[start].id.clone()));
                }
                path.push(p);
                cur = p.get();
            }
            // Only the cloud has no parent, so a finished walk ends there.
            debug_assert_eq!(cur, cloud.get());
            paths.push(path);
        }

        let mut depth_order: Vec<NodeIndex> = (0..nodes.len() as u32).map(NodeIndex).collect();
        depth_order.sort_by_key(|i| (std::cmp::Reverse(paths[i.get()].len()), *i));

        Ok(Self {
            nodes,
            parents,
            paths,
            depth_order,
            by_id,
            cloud,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn node(&self, idx: NodeIndex) -> &NodeSpec {
        &self.nodes[idx.get()]
    }

    pub fn indices(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (0..self.nodes.len() as u32).map(NodeIndex)
    }

    pub fn index_of(&self, id: &str) -> Result<NodeIndex, TopologyError> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| TopologyError::UnknownNode(id.to_string()))
    }

    pub fn tier(&self, idx: NodeIndex) -> Tier {
        self.nodes[idx.get()].tier
    }

    pub fn cloud(&self) -> NodeIndex {
        self.cloud
    }

    pub fn parent(&self, idx: NodeIndex) -> Option<NodeIndex> {
        self.parents[idx.get()]
    }

    /// Next node towards the cloud. The cloud maps to itself.
    pub fn next_hop(&self, idx: NodeIndex) -> NodeIndex {
        self.parents[idx.get()].unwrap_or(idx)
    }

    /// String-keyed variant of [`Topology::next_hop`].
    pub fn next_hop_of(&self, id: &str) -> Result<&str, TopologyError> {
        let idx = self.index_of(id)?;
        Ok(&self.node(self.next_hop(idx)).id)
    }

    /// Full path from `idx` to the cloud, starting with `idx` itself.
    pub fn path(&self, idx: NodeIndex) -> &[NodeIndex] {
        &self.paths[idx.get()]
    }

    pub fn path_ids(&self, id: &str) -> Result<Vec<&str>, TopologyError> {
        let idx = self.index_of(id)?;
        Ok(self
            .path(idx)
            .iter()
            .map(|&i| self.node(i).id.as_str())
            .collect())
    }

    /// Longest path length (in nodes) of the tree.
    pub fn height(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Nodes ordered deepest first, ties by index. Children always precede
    /// their parents in this order.
    pub fn depth_order(&self) -> &[NodeIndex] {
        &self.depth_order
    }

    /// Nodes of one tier, in index order.
    pub fn nodes_of(&self, tier: Tier) -> Vec<NodeIndex> {
        self.indices().filter(|&i| self.tier(i) == tier).collect()
    }

    /// Edges first, then intermediaries, then the cloud; by id within a tier.
    pub fn tier_order(&self) -> Vec<NodeIndex> {
        Tier::ALL.iter().flat_map(|&t| self.nodes_of(t)).collect()
    }
}

fn check_node(n: &NodeSpec) -> Result<(), TopologyError> {
    let invalid = |message: &str| TopologyError::InvalidCapacity {
        node: n.id.clone(),
        message: message.to_string(),
    };
    if let Capacity::Bounded(s) = n.storage_capacity {
        if !(s.is_finite() && s > 0.0) {
            return Err(invalid("storage_capacity must be positive"));
        }
    }
    if let Capacity::Bounded(0) = n.processing_slots {
        return Err(invalid("processing_slots must be positive"));
    }
    if !(n.uplink_latency_ms.is_finite() && n.uplink_latency_ms >= 0.0) {
        return Err(TopologyError::InvalidLatency(n.id.clone()));
    }
    Ok(())
}

/// Serializable topology description, as found in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub nodes: Vec<NodeSpec>,
}

impl TopologyConfig {
    pub fn build(&self) -> Result<Topology, TopologyError> {
        Topology::build(&self.nodes)
    }

    /// Single chain edge → intermediary → cloud.
    pub fn chain(
        edge_storage: Capacity<f64>,
        edge_slots: Capacity<u32>,
        intermediary_storage: Capacity<f64>,
        intermediary_slots: Capacity<u32>,
        edge_latency_ms: f64,
        intermediary_latency_ms: f64,
    ) -> Self {
        Self {
            nodes: vec![
                NodeSpec {
                    id: "edge-0".into(),
                    tier: Tier::Edge,
                    storage_capacity: edge_storage,
                    processing_slots: edge_slots,
                    parent: Some("intermediary-0".into()),
                    uplink_latency_ms: edge_latency_ms,
                },
                NodeSpec {
                    id: "intermediary-0".into(),
                    tier: Tier::Intermediary,
                    storage_capacity: intermediary_storage,
                    processing_slots: intermediary_slots,
                    parent: Some("cloud".into()),
                    uplink_latency_ms: intermediary_latency_ms,
                },
                cloud_spec(),
            ],
        }
    }

    /// `intermediaries` intermediaries, each with `edges_per` edge children.
    pub fn fan_out(
        intermediaries: usize,
        edges_per: usize,
        edge: (Capacity<f64>, Capacity<u32>, f64),
        intermediary: (Capacity<f64>, Capacity<u32>, f64),
    ) -> Self {
        let total_edges = intermediaries * edges_per;
        let width = total_edges.saturating_sub(1).to_string().len().max(1);
        let mut nodes = Vec::with_capacity(total_edges + intermediaries + 1);
        for i in 0..intermediaries {
            let parent = format!("intermediary-{i}");
            for j in 0..edges_per {
                nodes.push(NodeSpec {
                    id: format!("edge-{:0width$}", i * edges_per + j),
                    tier: Tier::Edge,
                    storage_capacity: edge.0,
                    processing_slots: edge.1,
                    parent: Some(parent.clone()),
                    uplink_latency_ms: edge.2,
                });
            }
            nodes.push(NodeSpec {
                id: parent,
                tier: Tier::Intermediary,
                storage_capacity: intermediary.0,
                processing_slots: intermediary.1,
                parent: Some("cloud".into()),
                uplink_latency_ms: intermediary.2,
            });
        }
        nodes.push(cloud_spec());
        Self { nodes }
    }
}

fn cloud_spec() -> NodeSpec {
    NodeSpec {
        id: "cloud".into(),
        tier: Tier::Cloud,
        storage_capacity: Capacity::Unbounded,
        processing_slots: Capacity::Unbounded,
        parent: None,
        uplink_latency_ms: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, tier: Tier, parent: Option<&str>) -> NodeSpec {
        NodeSpec {
            id: id.into(),
            tier,
            storage_capacity: Capacity::Bounded(10.0),
            processing_slots: Capacity::Bounded(5),
            parent: parent.map(Into::into),
            uplink_latency_ms: 20.0,
        }
    }

    fn three_tier() -> Topology {
        TopologyConfig::chain(
            Capacity::Bounded(10.0),
            Capacity::Bounded(5),
            Capacity::Bounded(50.0),
            Capacity::Bounded(20),
            20.0,
            40.0,
        )
        .build()
        .unwrap()
    }

    #[test]
    fn chain_paths() {
        let t = three_tier();
        assert_eq!(
            t.path_ids("edge-0").unwrap(),
            vec!["edge-0", "intermediary-0", "cloud"]
        );
        assert_eq!(t.next_hop_of("edge-0").unwrap(), "intermediary-0");
        assert_eq!(t.next_hop_of("cloud").unwrap(), "cloud");
        assert_eq!(t.height(), 3);
    }

    #[test]
    fn cloud_only() {
        let t = Topology::build(&[cloud_spec()]).unwrap();
        assert_eq!(t.path_ids("cloud").unwrap(), vec!["cloud"]);
        assert_eq!(t.next_hop(t.cloud()), t.cloud());
    }

    #[test]
    fn nineteen_nodes() {
        let cfg = TopologyConfig::fan_out(
            3,
            5,
            (Capacity::Bounded(10.0), Capacity::Bounded(5), 20.0),
            (Capacity::Bounded(50.0), Capacity::Bounded(20), 40.0),
        );
        let t = cfg.build().unwrap();
        assert_eq!(t.len(), 19);
        let edges = t.nodes_of(Tier::Edge);
        assert_eq!(edges.len(), 15);
        for (k, &e) in edges.iter().enumerate() {
            assert_eq!(t.path(e).len(), 3);
            let hop = t.next_hop(e);
            assert_eq!(t.node(hop).id, format!("intermediary-{}", k / 5));
        }
    }

    #[test]
    fn rejects_malformed_trees() {
        let two_clouds = [node("a", Tier::Cloud, None), node("b", Tier::Cloud, None)];
        assert!(matches!(
            Topology::build(&two_clouds),
            Err(TopologyError::MultipleClouds(_))
        ));

        let orphan = [node("c", Tier::Cloud, None), node("e", Tier::Edge, None)];
        assert_eq!(
            Topology::build(&orphan),
            Err(TopologyError::OrphanNode("e".into()))
        );

        let cycle = [
            node("c", Tier::Cloud, None),
            node("x", Tier::Edge, Some("y")),
            node("y", Tier::Intermediary, Some("x")),
        ];
        assert!(matches!(
            Topology::build(&cycle),
            Err(TopologyError::CycleDetected(_))
        ));

        let dangling = [node("c", Tier::Cloud, None), node("e", Tier::Edge, Some("zz"))];
        assert!(matches!(
            Topology::build(&dangling),
            Err(TopologyError::UnknownParent { .. })
        ));

        let mut zero = node("e", Tier::Edge, Some("c"));
        zero.processing_slots = Capacity::Bounded(0);
        assert!(matches!(
            Topology::build(&[node("c", Tier::Cloud, None), zero]),
            Err(TopologyError::InvalidCapacity { .. })
        ));
    }

    #[test]
    fn unknown_node_lookup() {
        let t = three_tier();
        assert_eq!(
            t.next_hop_of("nope"),
            Err(TopologyError::UnknownNode("nope".into()))
        );
    }

    #[test]
    fn depth_order_puts_children_first() {
        let t = three_tier();
        let order: Vec<&str> = t.depth_order().iter().map(|&i| t.node(i).id.as_str()).collect();
        assert_eq!(order, vec!["edge-0", "intermediary-0", "cloud"]);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = TopologyConfig::chain(
            Capacity::Unbounded,
            Capacity::Bounded(5),
            Capacity::Bounded(50.0),
            Capacity::Unbounded,
            20.0,
            40.0,
        );
        let text = toml::to_string(&cfg).unwrap();
        assert!(text.contains("\"unbounded\""));
        let back: TopologyConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
