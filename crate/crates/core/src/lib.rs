//! Compiler, run-time manager and simulator for spiking convolutional
//! networks on heterogeneous three-layer neuromorphic cores.

pub mod artifact;
pub mod cli;
pub mod compiler;
pub mod flow;
pub mod graph;
pub mod hardware;
pub mod runtime;
pub mod segbus;
pub mod sim;
