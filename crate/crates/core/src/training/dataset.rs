use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{make_splits, train_model, Result, SplitSpec, Task, TrainError, TrainOptions, TrainOutcome};
use super::Hyperparams;
use crate::gnn::{Arch, Checkpoint, GraphBatch, Model, NeighborOrder, TaskKind};
use crate::graph::{build_graph, Scheme, TypedGraph};
use crate::ingest::Diagram;
use crate::parallel::{derive_seed, map_indexed, Execution};
use crate::tensor::Tensor;

/// One diagram ready for a model: its finalized graph, node features and
/// targets.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub graph: TypedGraph,
    pub features: Tensor,
    pub node_labels: Vec<usize>,
    /// Diagram class (graph tasks only).
    pub label: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    task: Task,
    scheme: Scheme,
    classes: Vec<String>,
    samples: Vec<Sample>,
}

fn graphs(diagrams: &[Diagram], scheme: Scheme) -> Result<Vec<TypedGraph>> {
    map_indexed(Execution::available(), diagrams.len(), |i| {
        let d = &diagrams[i];
        build_graph(scheme, &d.raw, d.rst.as_ref(), true)
    })
    .into_iter()
    .map(|g| g.map_err(TrainError::from))
    .collect()
}

impl Dataset {
    /// Node classification over layout features; classes are the scheme's
    /// five node kinds.
    pub fn node(diagrams: &[Diagram], scheme: Scheme) -> Result<Self> {
        let samples = graphs(diagrams, scheme)?
            .into_iter()
            .map(|graph| {
                let features = graph
                    .layout_matrix()
                    .map_err(|e| TrainError::Input(format!("diagram `{}`: {e}", graph.diagram_id)))?;
                Ok(Sample {
                    id: graph.diagram_id.clone(),
                    node_labels: graph.node_classes(),
                    features,
                    graph,
                    label: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_samples(
            Task::Node,
            scheme,
            scheme.node_kinds().iter().map(|k| k.as_str().to_string()).collect(),
            samples,
        )
    }

    /// Diagram classification over node embeddings. Classes are the sorted
    /// distinct labels of `diagrams` in the task's label space.
    pub fn graph(diagrams: &[Diagram], scheme: Scheme, task: Task, embedder: &NodeEmbedder) -> Result<Self> {
        let space = task
            .label_space()
            .ok_or_else(|| TrainError::Usage("the node task has no diagram labels".into()))?;
        let missing: Vec<&str> = diagrams
            .iter()
            .filter(|d| d.label(space).is_none())
            .map(|d| d.id())
            .collect();
        if !missing.is_empty() {
            return Err(TrainError::Input(format!("no {space} label for diagrams {missing:?}")));
        }
        let classes: Vec<String> = diagrams
            .iter()
            .filter_map(|d| d.label(space))
            .map(str::to_string)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let samples = graphs(diagrams, scheme)?
            .into_iter()
            .zip(diagrams)
            .map(|(graph, d)| {
                let features = extract_node_embeddings(embedder, &graph)?;
                let label = d.label(space).and_then(|l| classes.iter().position(|c| c == l));
                Ok(Sample {
                    id: graph.diagram_id.clone(),
                    node_labels: graph.node_classes(),
                    features,
                    graph,
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_samples(task, scheme, classes, samples)
    }

    pub fn from_samples(task: Task, scheme: Scheme, classes: Vec<String>, samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(TrainError::Input("dataset has no diagrams".into()));
        }
        let dim = samples[0].features.cols();
        for s in &samples {
            if s.graph.scheme != scheme {
                return Err(TrainError::Usage(format!(
                    "diagram `{}` was built for scheme {}, dataset is {scheme}",
                    s.id, s.graph.scheme
                )));
            }
            if s.features.cols() != dim || s.features.rows() != s.graph.node_count() {
                return Err(TrainError::Input(format!("diagram `{}`: feature shape mismatch", s.id)));
            }
            let ok = match task.kind() {
                TaskKind::Node => s.node_labels.len() == s.graph.node_count()
                    && s.node_labels.iter().all(|&c| c < classes.len()),
                TaskKind::Graph => s.label.is_some_and(|c| c < classes.len()),
            };
            if !ok {
                return Err(TrainError::Input(format!("diagram `{}`: label out of range", s.id)));
            }
        }
        Ok(Self {
            task,
            scheme,
            classes,
            samples,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn in_dim(&self) -> usize {
        self.samples[0].features.cols()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Targets of the selected diagrams: every node's class for the node
    /// task, one class per diagram otherwise.
    pub fn targets(&self, indices: &[usize]) -> Vec<usize> {
        match self.task.kind() {
            TaskKind::Node => indices
                .iter()
                .flat_map(|&i| self.samples[i].node_labels.iter().copied())
                .collect(),
            TaskKind::Graph => indices
                .iter()
                .map(|&i| self.samples[i].label.expect("validated"))
                .collect(),
        }
    }

    pub fn batch(&self, indices: &[usize]) -> Result<GraphBatch> {
        let pairs: Vec<(&TypedGraph, &Tensor)> = indices
            .iter()
            .map(|&i| (&self.samples[i].graph, &self.samples[i].features))
            .collect();
        Ok(GraphBatch::new(&pairs)?)
    }
}

/// A trained node classifier together with the scheme its graphs came from.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeEmbedder {
    pub scheme: Scheme,
    pub model: Model,
}

#[derive(Serialize, Deserialize)]
struct EmbedderFile {
    scheme: Scheme,
    model: Checkpoint,
}

impl NodeEmbedder {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = EmbedderFile {
            scheme: self.scheme,
            model: self.model.to_checkpoint(),
        };
        let text = serde_json::to_string(&file).expect("checkpoints serialize");
        std::fs::write(path, text).map_err(|e| TrainError::Input(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| TrainError::Input(format!("{}: {e}", path.display())))?;
        let file: EmbedderFile =
            serde_json::from_str(&text).map_err(|e| TrainError::Input(format!("{}: {e}", path.display())))?;
        Ok(Self {
            scheme: file.scheme,
            model: Model::from_checkpoint(&file.model)?,
        })
    }
}

/// Softmax output of the node classifier for every node of `graph`.
pub fn extract_node_embeddings(embedder: &NodeEmbedder, graph: &TypedGraph) -> Result<Tensor> {
    if embedder.scheme != graph.scheme {
        return Err(TrainError::Usage(format!(
            "embedder was trained on scheme {} but graph `{}` is scheme {}",
            embedder.scheme, graph.diagram_id, graph.scheme
        )));
    }
    if embedder.model.config().task != TaskKind::Node {
        return Err(TrainError::Usage("embeddings need a node-classification model".into()));
    }
    let x = graph
        .layout_matrix()
        .map_err(|e| TrainError::Input(format!("diagram `{}`: {e}", graph.diagram_id)))?;
    let batch = GraphBatch::new(&[(graph, &x)])?;
    Ok(embedder.model.predict_proba(&batch, NeighborOrder::Index)?)
}

/// Trains the node classifier whose softmax outputs feed the graph task,
/// on one seeded split of `diagrams`.
pub fn train_embedder(
    diagrams: &[Diagram],
    scheme: Scheme,
    arch: Arch,
    hp: &Hyperparams,
    opts: &TrainOptions,
    seed: u64,
) -> Result<(NodeEmbedder, TrainOutcome)> {
    let data = Dataset::node(diagrams, scheme)?;
    let ids: Vec<usize> = (0..data.len()).collect();
    let splits = make_splits(&ids, SplitSpec::FINAL.scaled(data.len()), derive_seed(seed, 0, 0))?;
    let outcome = train_model(&data, &splits, arch, hp, opts, derive_seed(seed, 1, 0))?;
    let embedder = NodeEmbedder {
        scheme,
        model: outcome.model.clone(),
    };
    Ok((embedder, outcome))
}
