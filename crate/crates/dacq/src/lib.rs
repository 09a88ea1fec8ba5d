//! Divide-and-color models on finite boxes of the hypercubic lattice.
//!
//! The model has three layers, and so does this crate:
//!
//! * bond configurations drawn from a random-cluster measure
//!   ([`oracle`] for exact enumeration on tiny graphs, [`mcmc`] for
//!   single-bond heat-bath sampling with free or wired boundary),
//! * cluster coloring on top of the bonds ([`coloring`]), including the
//!   conditional bond law given spins and the hat transform that discards
//!   edges inside neutral-color clusters,
//! * stochastic-domination machinery and numerical probes of
//!   quasilocality built from the first two ([`domination`], [`probe`]).
//!
//! [`graph`] provides the lattice boxes, general finite graphs and the
//! union-find / BFS kernels everything runs on; [`cli`] wires the pieces
//! into reproducible batch experiments driven by JSON descriptors.
//!
//! Every sampler consumes randomness through the counter-based generator
//! in [`rng`], so runs are bit-reproducible for a fixed seed, independent
//! of thread count.

pub mod cli;
pub mod coloring;
pub mod domination;
pub mod error;
pub mod graph;
pub mod mcmc;
pub mod oracle;
pub mod params;
pub mod probe;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{build_box, BondConfig, FiniteGraph, SpinConfig};
pub use params::ModelParams;
