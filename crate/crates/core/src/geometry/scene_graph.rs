//! Flat scene graph: every node hangs directly off the single root frame,
//! so a lookup is one edge and an update never cascades.

use super::Pose;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneGraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{0}` already exists")]
    DuplicateNode(String),
    #[error("edge of `{0}` is immutable")]
    ImmutableEdge(String),
    #[error("stale update for `{node}`: {incoming} s is older than stored {stored} s")]
    StaleUpdate {
        node: String,
        incoming: f64,
        stored: f64,
    },
    #[error("root node cannot carry an edge")]
    RootEdge,
    #[error("malformed scene graph document: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Root,
    Sensor,
    Object,
    Arm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSource {
    Calibration,
    Kinematics,
    Estimator,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Node {
    kind: NodeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_ref: Option<String>,
}

#[derive(Clone, Debug)]
struct Edge {
    pose: Pose,
    time: f64,
    source: EdgeSource,
}

/// Node/edge store with exactly one root; every edge is the pose of its node
/// with respect to the root. Values are plain data — callers that share a
/// graph across threads own the synchronization.
#[derive(Clone, Debug)]
pub struct SceneGraph {
    root: String,
    nodes: BTreeMap<String, Node>,
    edges: BTreeMap<String, Edge>,
}

impl SceneGraph {
    pub fn new(root: impl Into<String>) -> Self {
        let root = root.into();
        let mut nodes = BTreeMap::new();
        nodes.insert(
            root.clone(),
            Node {
                kind: NodeKind::Root,
                model_ref: None,
            },
        );
        Self {
            root,
            nodes,
            edges: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn add_node(
        &mut self,
        id: impl Into<String>,
        kind: NodeKind,
        model_ref: Option<String>,
    ) -> Result<(), SceneGraphError> {
        let id = id.into();
        if self.nodes.contains_key(&id) {
            return Err(SceneGraphError::DuplicateNode(id));
        }
        self.nodes.insert(id, Node { kind, model_ref });
        Ok(())
    }

    /// Install the initial edge for a node. Calibration edges set here are
    /// immutable for the lifetime of the graph.
    pub fn set_edge(
        &mut self,
        id: &str,
        pose: Pose,
        time: f64,
        source: EdgeSource,
    ) -> Result<(), SceneGraphError> {
        let node = self
            .nodes
            .get(id)
            .ok_or_else(|| SceneGraphError::UnknownNode(id.to_string()))?;
        if node.kind == NodeKind::Root {
            return Err(SceneGraphError::RootEdge);
        }
        self.edges.insert(id.to_string(), Edge { pose, time, source });
        Ok(())
    }

    /// Replace the edge of an object or arm node with a newer estimate.
    pub fn update(&mut self, id: &str, pose: Pose, time: f64) -> Result<(), SceneGraphError> {
        self.update_with_source(id, pose, time, EdgeSource::Estimator)
    }

    pub fn update_with_source(
        &mut self,
        id: &str,
        pose: Pose,
        time: f64,
        source: EdgeSource,
    ) -> Result<(), SceneGraphError> {
        let node = self
            .nodes
            .get(id)
            .ok_or_else(|| SceneGraphError::UnknownNode(id.to_string()))?;
        if !matches!(node.kind, NodeKind::Object | NodeKind::Arm) {
            return Err(SceneGraphError::ImmutableEdge(id.to_string()));
        }
        if let Some(existing) = self.edges.get(id) {
            if existing.source == EdgeSource::Calibration {
                return Err(SceneGraphError::ImmutableEdge(id.to_string()));
            }
            if time < existing.time {
                return Err(SceneGraphError::StaleUpdate {
                    node: id.to_string(),
                    incoming: time,
                    stored: existing.time,
                });
            }
        }
        self.edges.insert(id.to_string(), Edge { pose, time, source });
        Ok(())
    }

    /// Pose of a node with respect to the root, with its timestamp and source.
    pub fn pose_of(&self, id: &str) -> Option<(&Pose, f64, EdgeSource)> {
        self.edges.get(id).map(|e| (&e.pose, e.time, e.source))
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        self.nodes.get(id).map(|n| n.kind)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&Document::from(self)).expect("scene graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SceneGraphError> {
        let doc: Document =
            serde_json::from_str(text).map_err(|e| SceneGraphError::Malformed(e.to_string()))?;
        doc.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct DocNode {
    id: String,
    kind: NodeKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    model_ref: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct DocEdge {
    node: String,
    pose: Pose,
    time: f64,
    source: EdgeSource,
}

#[derive(Serialize, Deserialize)]
struct Document {
    root: String,
    nodes: Vec<DocNode>,
    edges: Vec<DocEdge>,
}

impl From<&SceneGraph> for Document {
    fn from(g: &SceneGraph) -> Self {
        Document {
            root: g.root.clone(),
            nodes: g
                .nodes
                .iter()
                .map(|(id, n)| DocNode {
                    id: id.clone(),
                    kind: n.kind,
                    model_ref: n.model_ref.clone(),
                })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|(id, e)| DocEdge {
                    node: id.clone(),
                    pose: e.pose,
                    time: e.time,
                    source: e.source,
                })
                .collect(),
        }
    }
}

impl TryFrom<Document> for SceneGraph {
    type Error = SceneGraphError;

    fn try_from(doc: Document) -> Result<Self, Self::Error> {
        let mut nodes = BTreeMap::new();
        let mut roots = 0usize;
        for node in doc.nodes {
            if node.kind == NodeKind::Root {
                roots += 1;
                if node.id != doc.root {
                    return Err(SceneGraphError::Malformed(format!(
                        "root node `{}` does not match declared root `{}`",
                        node.id, doc.root
                    )));
                }
            }
            if nodes
                .insert(
                    node.id.clone(),
                    Node {
                        kind: node.kind,
                        model_ref: node.model_ref,
                    },
                )
                .is_some()
            {
                return Err(SceneGraphError::DuplicateNode(node.id));
            }
        }
        if roots != 1 {
            return Err(SceneGraphError::Malformed(format!(
                "expected exactly one root node, found {roots}"
            )));
        }
        let mut edges = BTreeMap::new();
        for edge in doc.edges {
            if !nodes.contains_key(&edge.node) {
                return Err(SceneGraphError::UnknownNode(edge.node));
            }
            if edge.node == doc.root {
                return Err(SceneGraphError::RootEdge);
            }
            if edges
                .insert(
                    edge.node.clone(),
                    Edge {
                        pose: edge.pose,
                        time: edge.time,
                        source: edge.source,
                    },
                )
                .is_some()
            {
                return Err(SceneGraphError::Malformed(format!(
                    "node `{}` carries more than one edge",
                    edge.node
                )));
            }
        }
        Ok(SceneGraph {
            root: doc.root,
            nodes,
            edges,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn sample_graph() -> SceneGraph {
        let mut g = SceneGraph::new("base");
        g.add_node("hc", NodeKind::Sensor, None).unwrap();
        g.add_node("o1", NodeKind::Object, Some("pipe.model".into()))
            .unwrap();
        g.add_node("arm", NodeKind::Arm, None).unwrap();
        g.set_edge(
            "hc",
            Pose::from_translation(Vector3::new(0.1, 0.0, 0.3)),
            0.0,
            EdgeSource::Calibration,
        )
        .unwrap();
        g.set_edge(
            "o1",
            Pose::from_translation(Vector3::new(1.0, 0.0, 0.0)),
            0.0,
            EdgeSource::Estimator,
        )
        .unwrap();
        g
    }

    #[test]
    fn last_writer_wins() {
        let mut g = sample_graph();
        g.update("o1", Pose::from_translation(Vector3::new(1.1, 0.0, 0.0)), 1.0)
            .unwrap();
        g.update("o1", Pose::from_translation(Vector3::new(1.2, 0.0, 0.0)), 2.0)
            .unwrap();
        let (pose, time, _) = g.pose_of("o1").unwrap();
        assert_eq!(time, 2.0);
        assert_eq!(pose.translation().x, 1.2);
    }

    #[test]
    fn sensor_edges_are_immutable() {
        let mut g = sample_graph();
        let err = g.update("hc", Pose::identity(), 1.0).unwrap_err();
        assert!(matches!(err, SceneGraphError::ImmutableEdge(_)));
    }

    #[test]
    fn stale_update_leaves_graph_unchanged() {
        let mut g = sample_graph();
        g.update("o1", Pose::from_translation(Vector3::new(1.5, 0.0, 0.0)), 2.0)
            .unwrap();
        let err = g
            .update("o1", Pose::from_translation(Vector3::new(9.0, 0.0, 0.0)), 1.0)
            .unwrap_err();
        assert!(matches!(err, SceneGraphError::StaleUpdate { .. }));
        let (pose, time, _) = g.pose_of("o1").unwrap();
        assert_eq!(time, 2.0);
        assert_eq!(pose.translation().x, 1.5);
    }

    #[test]
    fn unknown_node_is_reported() {
        let mut g = sample_graph();
        assert!(matches!(
            g.update("nope", Pose::identity(), 1.0),
            Err(SceneGraphError::UnknownNode(_))
        ));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut g = sample_graph();
        g.update(
            "o1",
            Pose::from_translation(Vector3::new(0.123456789012345, -2.5, 3.75)),
            1.25,
        )
        .unwrap();
        let text = g.to_json();
        let parsed = SceneGraph::from_json(&text).unwrap();
        assert_eq!(parsed.to_json(), text);
    }

    #[test]
    fn malformed_documents_are_rejected() {
        assert!(SceneGraph::from_json("{}").is_err());
        // Two roots.
        let doc = r#"{"root":"a","nodes":[{"id":"a","kind":"root"},{"id":"b","kind":"root"}],"edges":[]}"#;
        assert!(SceneGraph::from_json(doc).is_err());
    }
}
