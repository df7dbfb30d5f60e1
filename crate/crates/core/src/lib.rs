//! Graph-based representations of annotated diagrams.
//!
//! The crate ingests two annotation schemes for the same diagrams (a
//! crowd-sourced parse graph and an expert grouping/connectivity layering),
//! turns element geometry into layout features, trains message-passing
//! networks for node and graph classification, and compares the schemes with
//! rank-based significance tests.

pub mod baselines;
pub mod evaluation;
pub mod experiment;
pub mod geometry;
pub mod gnn;
pub mod graph;
pub mod training;
pub mod ingest;
pub mod parallel;
pub mod tensor;
