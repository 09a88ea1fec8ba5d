//! Single-bond heat-bath dynamics for random-cluster measures on finite
//! graphs, with free and wired boundary conditions.
//!
//! The kernel is the single-edge conditional law: an edge refreshes to
//! open with probability `p` when its endpoints are connected off the
//! edge, and `p / (p + (1-p) q)` otherwise. One sweep applies the kernel
//! to every non-frozen edge in the fixed edge order. Free runs start from
//! all-closed and wired runs from all-open, so for `q >= 1` the two
//! trajectories bracket the target from below and above in the stochastic
//! order.
//!
//! `q < 1` is accepted by the kernel (the conditional law is still well
//! defined) but carries no ordering or bracketing guarantees; every
//! monotonicity-based diagnostic in this crate assumes `q >= 1`.
//!
//! The connectivity query per step is an early-exit bidirectional BFS;
//! this is the module's hot spot and the price of supporting arbitrary
//! real `q >= 1` with a single sampler.

use crate::error::{Error, Result};
use crate::graph::{
    label_clusters, BondConfig, ConnScratch, EdgeId, FiniteGraph, VertexId,
};
use crate::rng::indexed_uniform;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Free,
    Wired,
}

/// Burn-in, sample count and thinning for a chain run.
#[derive(Clone, Copy, Debug)]
pub struct RunSpec {
    pub burn_in: usize,
    pub samples: usize,
    pub thinning: usize,
}

impl RunSpec {
    pub fn new(burn_in: usize, samples: usize, thinning: usize) -> Self {
        RunSpec { burn_in, samples, thinning: thinning.max(1) }
    }
}

/// Heat-bath chain state. The trajectory is a pure function of
/// `(graph, p, q, frozen set, seed)`: the variate for edge `e` during
/// sweep `t` is `indexed_uniform(seed, t, e)`.
pub struct ChainState<'g> {
    pub graph: &'g FiniteGraph,
    pub bonds: BondConfig,
    pub p: f64,
    pub q: f64,
    pub boundary_mode: Boundary,
    frozen: Vec<bool>,
    seed_key: u64,
    pub sweep_count: u64,
    scratch: ConnScratch,
}

impl<'g> ChainState<'g> {
    /// Free or wired chain. Wired mode freezes every edge with both
    /// endpoints in the designated boundary permanently open and starts
    /// from all-open; free mode starts from all-closed.
    pub fn new(graph: &'g FiniteGraph, p: f64, q: f64, boundary_mode: Boundary, seed: u64) -> Self {
        let ne = graph.edge_count();
        let mut frozen = vec![false; ne];
        let bonds = match boundary_mode {
            Boundary::Free => BondConfig::all_closed(ne),
            Boundary::Wired => {
                for e in graph.boundary_ring_edges() {
                    frozen[e] = true;
                }
                BondConfig::all_open(ne)
            }
        };
        ChainState {
            graph,
            bonds,
            p,
            q,
            boundary_mode,
            frozen,
            seed_key: seed,
            sweep_count: 0,
            scratch: ConnScratch::new(graph.vertex_count()),
        }
    }

    /// Chain with explicit forced edge sets; forced edges are never
    /// updated. Starts from all-closed except the forced-open set.
    pub fn new_conditioned(
        graph: &'g FiniteGraph,
        p: f64,
        q: f64,
        forced_closed: &[EdgeId],
        forced_open: &[EdgeId],
        seed: u64,
    ) -> Result<Self> {
        let ne = graph.edge_count();
        let mut frozen = vec![false; ne];
        for &e in forced_closed {
            frozen[e] = true;
        }
        for &e in forced_open {
            if frozen[e] {
                return Err(Error::InvalidParams(format!(
                    "edge {e} forced both open and closed"
                )));
            }
            frozen[e] = true;
        }
        let mut bonds = BondConfig::all_closed(ne);
        for &e in forced_open {
            bonds.set(e, true);
        }
        Ok(ChainState {
            graph,
            bonds,
            p,
            q,
            boundary_mode: Boundary::Free,
            frozen,
            seed_key: seed,
            sweep_count: 0,
            scratch: ConnScratch::new(graph.vertex_count()),
        })
    }

    #[inline]
    pub fn is_frozen(&self, e: EdgeId) -> bool {
        self.frozen[e]
    }

    /// Conditional probability that edge `e` refreshes to open given the
    /// current configuration off `e`.
    #[inline]
    pub fn open_probability(&mut self, e: EdgeId) -> f64 {
        let (x, y) = self.graph.endpoints(e);
        let bonds = &self.bonds;
        let connected = self.scratch.connected(self.graph, x, y, |f| f != e && bonds.is_open(f));
        if connected {
            self.p
        } else {
            self.p / (self.p + (1.0 - self.p) * self.q)
        }
    }

    /// One heat-bath refresh of edge `e`, consuming exactly one uniform
    /// variate addressed by `(seed, sweep_count, e)`.
    pub fn heat_bath_step(&mut self, e: EdgeId) {
        debug_assert!(!self.frozen[e], "frozen edges are never updated");
        let p_open = self.open_probability(e);
        let u = indexed_uniform(self.seed_key, self.sweep_count, e as u64);
        self.bonds.set(e, u < p_open);
    }

    /// One sweep: refresh every non-frozen edge in edge order.
    pub fn sweep(&mut self) {
        for e in 0..self.graph.edge_count() {
            if !self.frozen[e] {
                self.heat_bath_step(e);
            }
        }
        self.sweep_count += 1;
    }
}

/// Per-sample summaries recorded along a chain run.
#[derive(Clone, Debug, Default)]
pub struct ChainStats {
    pub open_density: Vec<f64>,
    pub largest_cluster_fraction: Vec<f64>,
    pub origin_boundary_connected: Vec<bool>,
}

impl ChainStats {
    fn record(&mut self, graph: &FiniteGraph, bonds: &BondConfig, scratch: &mut ConnScratch) {
        let ne = graph.edge_count().max(1);
        self.open_density.push(bonds.count_open() as f64 / ne as f64);
        let labeling = label_clusters(graph, bonds);
        let largest = labeling.members.iter().map(|m| m.len()).max().unwrap_or(0);
        self.largest_cluster_fraction.push(largest as f64 / graph.vertex_count() as f64);
        let connected = match origin_of(graph) {
            Some(origin) if !graph.boundary_vertices().is_empty() => {
                let mut target = vec![false; graph.vertex_count()];
                for &v in graph.boundary_vertices() {
                    target[v] = true;
                }
                scratch.set_connected(graph, &[origin], &target, |e| bonds.is_open(e))
            }
            _ => false,
        };
        self.origin_boundary_connected.push(connected);
    }
}

fn origin_of(graph: &FiniteGraph) -> Option<VertexId> {
    graph.vertex_at(&vec![0; graph.dimension()])
}

/// Runs a free or wired chain and returns thinned post-burn-in samples
/// with their summaries.
pub fn run_chain(
    graph: &FiniteGraph,
    p: f64,
    q: f64,
    boundary_mode: Boundary,
    seed: u64,
    run: &RunSpec,
) -> (Vec<BondConfig>, ChainStats) {
    let state = ChainState::new(graph, p, q, boundary_mode, seed);
    collect(state, run)
}

/// Runs a chain with forced edge sets (conditioned measure).
pub fn run_conditioned_chain(
    graph: &FiniteGraph,
    p: f64,
    q: f64,
    forced_closed: &[EdgeId],
    forced_open: &[EdgeId],
    seed: u64,
    run: &RunSpec,
) -> Result<(Vec<BondConfig>, ChainStats)> {
    let state = ChainState::new_conditioned(graph, p, q, forced_closed, forced_open, seed)?;
    Ok(collect(state, run))
}

fn collect(mut state: ChainState<'_>, run: &RunSpec) -> (Vec<BondConfig>, ChainStats) {
    let mut samples = Vec::with_capacity(run.samples);
    let mut stats = ChainStats::default();
    let mut scratch = ConnScratch::new(state.graph.vertex_count());
    for _ in 0..run.burn_in {
        state.sweep();
    }
    for _ in 0..run.samples {
        for _ in 0..run.thinning {
            state.sweep();
        }
        stats.record(state.graph, &state.bonds, &mut scratch);
        samples.push(state.bonds.clone());
    }
    (samples, stats)
}

/// Sample mean and batch-means standard error of a binary or real series.
/// Batch means absorb autocorrelation along the chain; the batch count is
/// `min(floor(sqrt(n)), 100)`.
pub fn batch_mean_se(series: &[f64]) -> (f64, f64) {
    let n = series.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let batches = ((n as f64).sqrt().floor() as usize).clamp(1, 100);
    let len = n / batches;
    if batches < 2 || len == 0 {
        // Too short for batching: fall back to iid standard error.
        let var = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        return (mean, (var / n as f64).sqrt());
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| series[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let bm = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_series(series: &[f64]) -> Self {
        let (value, se) = batch_mean_se(series);
        Estimate { value, se }
    }
}

/// Empirical probability that the vertex sets `x` and `y` are joined by an
/// open path, over a list of sampled configurations.
pub fn estimate_connection(
    graph: &FiniteGraph,
    samples: &[BondConfig],
    x: &[VertexId],
    y: &[VertexId],
) -> Estimate {
    let mut scratch = ConnScratch::new(graph.vertex_count());
    let mut target = vec![false; graph.vertex_count()];
    for &v in y {
        target[v] = true;
    }
    let series: Vec<f64> = samples
        .iter()
        .map(|bonds| {
            scratch.set_connected(graph, x, &target, |e| bonds.is_open(e)) as u8 as f64
        })
        .collect();
    Estimate::from_series(&series)
}
