//! JSON form of a forest.
//!
//! ```json
//! {
//!   "num_features": 2,
//!   "task": "regression",
//!   "trees": [
//!     {"split_feature": 0, "threshold": 0.5, "gain": 0.5, "instance_count": 100,
//!      "children": [
//!        {"split_feature": 1, "threshold": 0.3, "gain": 0.2, "instance_count": 60,
//!         "children": [{"instance_count": 30, "value": 0.0},
//!                      {"instance_count": 30, "value": 1.0}]},
//!        {"instance_count": 40, "value": 2.0}]}
//!   ]
//! }
//! ```
//!
//! Split records carry `split_feature`, `threshold`, `gain`, `instance_count`
//! and exactly two `children` (left first). Leaf records carry
//! `instance_count` and either `value` (regression) or `probabilities`
//! (classification). `task` is `"regression"` or
//! `{"classification": {"num_classes": k}}`. `params` is optional.

use serde::{Deserialize, Serialize};

use super::{Forest, ForestParams, LeafValue, Node, Tree};
use crate::data::TaskKind;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    pub instance_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestRecord {
    pub num_features: usize,
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ForestParams>,
    pub trees: Vec<NodeRecord>,
}

impl NodeRecord {
    pub fn split(
        feature: usize,
        threshold: f64,
        gain: f64,
        instance_count: usize,
        left: NodeRecord,
        right: NodeRecord,
    ) -> Self {
        Self {
            split_feature: Some(feature),
            threshold: Some(threshold),
            gain: Some(gain),
            instance_count,
            children: vec![left, right],
            value: None,
            probabilities: None,
        }
    }

    pub fn leaf(instance_count: usize, value: f64) -> Self {
        Self {
            split_feature: None,
            threshold: None,
            gain: None,
            instance_count,
            children: Vec::new(),
            value: Some(value),
            probabilities: None,
        }
    }

    pub fn class_leaf(instance_count: usize, probabilities: Vec<f64>) -> Self {
        Self {
            probabilities: Some(probabilities),
            value: None,
            ..Self::leaf(instance_count, 0.0)
        }
    }
}

fn flatten(record: &NodeRecord, nodes: &mut Vec<Node>) -> Result<usize> {
    let idx = nodes.len();
    match (record.split_feature, record.children.as_slice()) {
        (Some(feature), [left, right]) => {
            let (Some(threshold), Some(gain)) = (record.threshold, record.gain) else {
                return Err(Error::MalformedForest("split record needs threshold and gain".into()));
            };
            nodes.push(Node::Leaf {
                instance_count: 0,
                value: LeafValue::Mean(0.0),
            });
            let l = flatten(left, nodes)?;
            let r = flatten(right, nodes)?;
            nodes[idx] = Node::Split {
                feature,
                threshold,
                gain,
                instance_count: record.instance_count,
                left: l,
                right: r,
            };
        }
        (None, []) => {
            let value = match (&record.value, &record.probabilities) {
                (Some(v), None) => LeafValue::Mean(*v),
                (None, Some(p)) => LeafValue::Probabilities(p.clone()),
                _ => {
                    return Err(Error::MalformedForest(
                        "leaf record needs exactly one of value or probabilities".into(),
                    ))
                }
            };
            nodes.push(Node::Leaf {
                instance_count: record.instance_count,
                value,
            });
        }
        _ => {
            return Err(Error::MalformedForest(
                "split records need split_feature and two children; leaves neither".into(),
            ))
        }
    }
    Ok(idx)
}

fn nest(nodes: &[Node], idx: usize) -> NodeRecord {
    match &nodes[idx] {
        Node::Split {
            feature,
            threshold,
            gain,
            instance_count,
            left,
            right,
        } => NodeRecord::split(
            *feature,
            *threshold,
            *gain,
            *instance_count,
            nest(nodes, *left),
            nest(nodes, *right),
        ),
        Node::Leaf {
            instance_count,
            value: LeafValue::Mean(v),
        } => NodeRecord::leaf(*instance_count, *v),
        Node::Leaf {
            instance_count,
            value: LeafValue::Probabilities(p),
        } => NodeRecord::class_leaf(*instance_count, p.clone()),
    }
}

impl Tree {
    pub fn from_record(record: &NodeRecord, num_features: usize, num_classes: Option<usize>) -> Result<Tree> {
        let mut nodes = Vec::new();
        flatten(record, &mut nodes)?;
        Tree::from_nodes(nodes, num_features, num_classes)
    }

    pub fn to_record(&self) -> NodeRecord {
        nest(self.nodes(), 0)
    }
}

impl Forest {
    pub fn from_record(record: &ForestRecord) -> Result<Forest> {
        let trees = record
            .trees
            .iter()
            .map(|t| Tree::from_record(t, record.num_features, record.task.num_classes()))
            .collect::<Result<Vec<_>>>()?;
        let params = record.params.clone().unwrap_or_else(|| ForestParams {
            num_trees: trees.len(),
            ..ForestParams::for_task(record.task)
        });
        Forest::from_trees(trees, params, record.num_features, record.task)
    }

    pub fn to_record(&self) -> ForestRecord {
        ForestRecord {
            num_features: self.num_features(),
            task: self.task(),
            params: Some(self.params().clone()),
            trees: self.trees().iter().map(Tree::to_record).collect(),
        }
    }

    pub fn from_json(json: &str) -> Result<Forest> {
        let record: ForestRecord = serde_json::from_str(json).map_err(|e| Error::MalformedForest(e.to_string()))?;
        Forest::from_record(&record)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("forest records always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"{
      "num_features": 2,
      "task": "regression",
      "trees": [
        {"split_feature": 0, "threshold": 0.5, "gain": 0.5, "instance_count": 100,
         "children": [
           {"split_feature": 1, "threshold": 0.3, "gain": 0.2, "instance_count": 60,
            "children": [{"instance_count": 30, "value": 0.0},
                         {"instance_count": 30, "value": 1.0}]},
           {"instance_count": 40, "value": 2.0}]}
      ]
    }"#;

    #[test]
    fn parses_fixture() {
        let forest = Forest::from_json(FIXTURE).unwrap();
        assert_eq!(forest.trees().len(), 1);
        assert_eq!(forest.trees()[0].nodes().len(), 5);
        let back = Forest::from_json(&forest.to_json()).unwrap();
        assert_eq!(back.trees(), forest.trees());
    }

    #[test]
    fn rejects_malformed() {
        let bad_count = FIXTURE.replace("\"instance_count\": 40", "\"instance_count\": 41");
        assert!(Forest::from_json(&bad_count).is_err());
        let bad_feature = FIXTURE.replace("\"split_feature\": 1", "\"split_feature\": 2");
        assert!(Forest::from_json(&bad_feature).is_err());
        let negative_gain = FIXTURE.replace("\"gain\": 0.2", "\"gain\": -0.2");
        assert!(Forest::from_json(&negative_gain).is_err());
        let class_leaf = FIXTURE.replace("\"value\": 2.0", "\"probabilities\": [1.0]");
        assert!(Forest::from_json(&class_leaf).is_err());
        assert!(Forest::from_json(r#"{"num_features": 1, "task": "regression", "trees": []}"#).is_err());
    }
}
