//! The divide-and-color layer on top of the bond samplers: cluster
//! coloring, conditional bond resampling given spins, the hat transform
//! and closed spin barriers.
//!
//! Given a total spin configuration, the conditional bond law factorizes:
//! edges joining unequal spins are closed, and each maximal monochromatic
//! component with color `i` independently carries a random-cluster measure
//! with parameters `(p, q a_i)`. Conditional sampling exploits exactly
//! this factorization, running one heat-bath chain per component.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{
    edge_boundary, is_barrier, label_clusters, vertex_boundary, Barrier, BondConfig,
    ClusterLabeling, ConnScratch, FiniteGraph, SpinConfig, VertexId,
};
use crate::mcmc::{run_chain, Boundary, ChainState, RunSpec};
use crate::params::{Color, ModelParams};
use crate::rng::CounterRng;

/// Default number of heat-bath sweeps per monochromatic component when
/// resampling bonds given spins.
pub const DEFAULT_SWEEPS_PER_COMPONENT: usize = 50;

/// One joint draw: spins, bonds and the hat-transformed bonds.
#[derive(Clone, Debug)]
pub struct DacSample {
    pub spins: SpinConfig,
    pub bonds: BondConfig,
    pub bonds_hat: BondConfig,
}

/// Colors each cluster independently with law `a`; all members of a
/// component share the draw. Components are visited in increasing id
/// order, so the coloring is deterministic given the labeling and rng.
pub fn color_clusters(
    labeling: &ClusterLabeling,
    params: &ModelParams,
    rng: &mut CounterRng,
) -> SpinConfig {
    let total: usize = labeling.members.iter().map(|m| m.len()).sum();
    let mut spins = SpinConfig::empty(total);
    for members in &labeling.members {
        let color = (rng.categorical(&params.a) + 1) as Color;
        for &v in members {
            spins.set(v, color);
        }
    }
    spins
}

/// The hat transform: edges whose endpoints share a color `i` with
/// `a_i = 1/q` are forced closed; every other edge keeps its state.
pub fn hat_transform(
    graph: &FiniteGraph,
    spins: &SpinConfig,
    bonds: &BondConfig,
    params: &ModelParams,
) -> BondConfig {
    let mut out = bonds.clone();
    for e in 0..graph.edge_count() {
        let (x, y) = graph.endpoints(e);
        if let (Some(cx), Some(cy)) = (spins.get(x), spins.get(y)) {
            if cx == cy && params.color_is_neutral(cx) {
                out.set(e, false);
            }
        }
    }
    out
}

/// Draws one joint sample: a bond configuration from the heat-bath chain,
/// a coloring of its clusters, and the hat transform.
pub fn sample_dac(
    graph: &FiniteGraph,
    params: &ModelParams,
    boundary_mode: Boundary,
    seed: u64,
    sweeps: usize,
) -> DacSample {
    let root = CounterRng::new(seed);
    let run = RunSpec::new(sweeps, 1, 1);
    let (samples, _) = run_chain(graph, params.p, params.q, boundary_mode, seed, &run);
    let bonds = samples.into_iter().next().expect("one sample requested");
    let labeling = label_clusters(graph, &bonds);
    let mut color_rng = root.derive(1);
    let spins = color_clusters(&labeling, params, &mut color_rng);
    let bonds_hat = hat_transform(graph, &spins, &bonds, params);
    debug_assert!(consistent(graph, &spins, &bonds));
    DacSample { spins, bonds, bonds_hat }
}

/// Every open edge joins equal spins.
pub fn consistent(graph: &FiniteGraph, spins: &SpinConfig, bonds: &BondConfig) -> bool {
    (0..graph.edge_count()).all(|e| {
        if !bonds.is_open(e) {
            return true;
        }
        let (x, y) = graph.endpoints(e);
        spins.get(x).is_some() && spins.get(x) == spins.get(y)
    })
}

/// Samples the conditional bond law given a total spin configuration:
/// differently-colored edges closed, then an independent heat-bath chain
/// per maximal monochromatic component with color `i` at parameters
/// `(p, q a_i)`. Components run in parallel with seeds derived from
/// `(seed, component id)` and are merged in component order.
pub fn conditional_bonds_given_spins(
    graph: &FiniteGraph,
    params: &ModelParams,
    spins: &SpinConfig,
    seed: u64,
    sweeps_per_component: usize,
) -> Result<BondConfig> {
    if !spins.is_total() || spins.len() != graph.vertex_count() {
        return Err(Error::InvalidParams("spin config must be total".into()));
    }
    // Monochromatic components: connectivity through equal-spin edges.
    let mono = {
        let mut bonds = BondConfig::all_closed(graph.edge_count());
        for e in 0..graph.edge_count() {
            let (x, y) = graph.endpoints(e);
            if spins.get(x) == spins.get(y) {
                bonds.set(e, true);
            }
        }
        label_clusters(graph, &bonds)
    };
    let root = CounterRng::new(seed);
    let pieces: Vec<(Vec<usize>, Vec<bool>)> = mono
        .members
        .par_iter()
        .enumerate()
        .map(|(id, members)| {
            let color = spins.get(members[0]).expect("total spins");
            let q_eff = params.q * params.color_prob(color);
            let mut keep = vec![false; graph.vertex_count()];
            for &v in members {
                keep[v] = true;
            }
            let (sub, _, edge_map) = graph.induced_subgraph(&keep);
            if sub.edge_count() == 0 {
                return (edge_map, Vec::new());
            }
            let comp_seed = root.derive(id as u64).next_u64();
            let mut state = ChainState::new(&sub, params.p, q_eff, Boundary::Free, comp_seed);
            for _ in 0..sweeps_per_component {
                state.sweep();
            }
            let open: Vec<bool> = (0..sub.edge_count()).map(|e| state.bonds.is_open(e)).collect();
            (edge_map, open)
        })
        .collect();
    let mut bonds = BondConfig::all_closed(graph.edge_count());
    for (edge_map, open) in pieces {
        for (sub_e, &glob_e) in edge_map.iter().enumerate() {
            bonds.set(glob_e, open[sub_e]);
        }
    }
    Ok(bonds)
}

/// A barrier is quasi-closed in `(ξ, η)` when every open barrier edge
/// joins equal spins of a color with `a_i = 1/q`. Closed barriers are
/// trivially quasi-closed.
pub fn is_quasi_closed(
    graph: &FiniteGraph,
    spins: &SpinConfig,
    bonds: &BondConfig,
    barrier: &Barrier,
    params: &ModelParams,
) -> bool {
    barrier.edges.iter().all(|&e| {
        if !bonds.is_open(e) {
            return true;
        }
        let (x, y) = graph.endpoints(e);
        match (spins.get(x), spins.get(y)) {
            (Some(cx), Some(cy)) => cx == cy && params.color_is_neutral(cx),
            _ => false,
        }
    })
}

/// The closed barrier around `W` carved out by the spin configuration:
/// `W'` is the union of monochromatic spin components of `σ` off `W` that
/// meet `∂W`; when `W ∪ W'` avoids the designated graph boundary, its edge
/// boundary separates it from the rest. Returns `None` when a spin
/// component touching `∂W` reaches the boundary (the finite-box surrogate
/// for spin percolation).
pub fn find_closed_spin_barrier(
    graph: &FiniteGraph,
    spins: &SpinConfig,
    w: &[VertexId],
) -> Option<Barrier> {
    let mut in_w = vec![false; graph.vertex_count()];
    for &v in w {
        in_w[v] = true;
        if graph.is_boundary(v) {
            return None;
        }
    }
    // Spin components within V \ W: flood equal spins.
    let mut region = in_w.clone();
    let mut stack: Vec<usize> = vertex_boundary(graph, w);
    for &v in &stack {
        region[v] = true;
    }
    while let Some(v) = stack.pop() {
        let cv = spins.get(v)?;
        for &(_, u) in graph.incident(v) {
            if region[u] || in_w[u] {
                continue;
            }
            if spins.get(u) == Some(cv) {
                region[u] = true;
                stack.push(u);
            }
        }
    }
    if (0..graph.vertex_count()).any(|v| region[v] && graph.is_boundary(v)) {
        return None;
    }
    let members: Vec<usize> = (0..graph.vertex_count()).filter(|&v| region[v]).collect();
    let b = edge_boundary(graph, &members);
    is_barrier(graph, &b)
}

/// Alternating Gibbs sampler for the conditional law of the spins in a
/// window `W` given the spins everywhere else.
///
/// Each step performs (i) one heat-bath sweep of the bonds given the
/// current total spins (per-edge parameter `q a_i` inside color-`i`
/// regions, differently-colored edges closed), then (ii) an exact redraw
/// of the window spins given the bonds: a cluster containing a vertex
/// outside `W` is forced to that vertex's color, an isolated window
/// cluster draws a fresh color from `a`. Both half-steps leave the
/// conditional joint law invariant.
pub struct WindowGibbs<'g> {
    graph: &'g FiniteGraph,
    params: ModelParams,
    window: Vec<VertexId>,
    in_window: Vec<bool>,
    pub spins: SpinConfig,
    pub bonds: BondConfig,
    rng: CounterRng,
    scratch: ConnScratch,
}

impl<'g> WindowGibbs<'g> {
    /// `outside` must assign a color to every vertex not in `window` and
    /// leave the window unset.
    pub fn new(
        graph: &'g FiniteGraph,
        params: &ModelParams,
        outside: &SpinConfig,
        window: &[VertexId],
        seed: u64,
    ) -> Result<Self> {
        if outside.len() != graph.vertex_count() {
            return Err(Error::InvalidParams("outside spins sized to graph".into()));
        }
        let mut in_window = vec![false; graph.vertex_count()];
        for &v in window {
            in_window[v] = true;
        }
        for v in 0..graph.vertex_count() {
            match (in_window[v], outside.get(v)) {
                (false, None) => {
                    return Err(Error::InvalidParams(format!(
                        "outside spins undefined at non-window vertex {v}"
                    )))
                }
                (true, Some(_)) => {
                    return Err(Error::InvalidParams(format!(
                        "outside spins must leave window vertex {v} unset"
                    )))
                }
                _ => {}
            }
        }
        let mut rng = CounterRng::new(seed);
        let mut spins = outside.clone();
        for &v in window {
            spins.set(v, (rng.categorical(&params.a) + 1) as Color);
        }
        Ok(WindowGibbs {
            graph,
            params: params.clone(),
            window: window.to_vec(),
            in_window,
            spins,
            bonds: BondConfig::all_closed(graph.edge_count()),
            rng,
            scratch: ConnScratch::new(graph.vertex_count()),
        })
    }

    fn bond_sweep(&mut self) {
        for e in 0..self.graph.edge_count() {
            let (x, y) = self.graph.endpoints(e);
            let (cx, cy) = (self.spins.get(x), self.spins.get(y));
            let u = self.rng.next_f64();
            if cx != cy {
                self.bonds.set(e, false);
                continue;
            }
            let q_eff = self.params.q * self.params.color_prob(cx.expect("total"));
            let bonds = &self.bonds;
            let connected =
                self.scratch.connected(self.graph, x, y, |f| f != e && bonds.is_open(f));
            let p = self.params.p;
            let p_open = if connected { p } else { p / (p + (1.0 - p) * q_eff) };
            self.bonds.set(e, u < p_open);
        }
    }

    fn window_spin_redraw(&mut self) {
        let labeling = label_clusters(self.graph, &self.bonds);
        let mut cluster_color: Vec<Option<Color>> = vec![None; labeling.component_count];
        for (id, members) in labeling.members.iter().enumerate() {
            if let Some(&anchor) = members.iter().find(|&&v| !self.in_window[v]) {
                cluster_color[id] = self.spins.get(anchor);
                debug_assert!(cluster_color[id].is_some());
            }
        }
        for id in 0..labeling.component_count {
            if cluster_color[id].is_none()
                && labeling.members[id].iter().any(|&v| self.in_window[v])
            {
                cluster_color[id] = Some((self.rng.categorical(&self.params.a) + 1) as Color);
            }
        }
        for &v in &self.window {
            let id = labeling.component_id[v] as usize;
            self.spins.set(v, cluster_color[id].expect("window cluster colored"));
        }
    }

    pub fn step(&mut self) {
        self.bond_sweep();
        self.window_spin_redraw();
        debug_assert!(consistent(self.graph, &self.spins, &self.bonds));
    }

    pub fn window_spins(&self) -> Vec<Color> {
        self.window.iter().map(|&v| self.spins.get(v).expect("window colored")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_box;
    use crate::oracle::{dac_exact, fk_exact};
    use approx::assert_abs_diff_eq;

    fn params_2c(p: f64, q: f64, a0: f64) -> ModelParams {
        ModelParams::new(p, q, vec![a0, 1.0 - a0]).unwrap()
    }

    #[test]
    fn coloring_basics() {
        let g = build_box(2, 1).unwrap();
        let params = params_2c(0.5, 2.0, 0.3);
        // η ≡ 0: i.i.d. spins.
        let closed = BondConfig::all_closed(g.edge_count());
        let labeling = label_clusters(&g, &closed);
        let mut rng = CounterRng::new(4);
        let spins = color_clusters(&labeling, &params, &mut rng);
        assert!(spins.is_total());
        // Single spanning cluster: constant spin.
        let open = BondConfig::all_open(g.edge_count());
        let labeling = label_clusters(&g, &open);
        let mut rng = CounterRng::new(4);
        let spins = color_clusters(&labeling, &params, &mut rng);
        let first = spins.get(0);
        assert!((0..g.vertex_count()).all(|v| spins.get(v) == first));
        // Fixed seed: deterministic.
        let mut rng2 = CounterRng::new(4);
        let spins2 = color_clusters(&labeling, &params, &mut rng2);
        assert_eq!(spins, spins2);
    }

    #[test]
    fn iid_color_frequencies() {
        let g = build_box(2, 1).unwrap();
        let params = params_2c(0.0, 2.0, 0.3);
        let closed = BondConfig::all_closed(g.edge_count());
        let labeling = label_clusters(&g, &closed);
        let mut rng = CounterRng::new(11);
        let n = 20_000;
        let mut ones = 0usize;
        for _ in 0..n {
            let spins = color_clusters(&labeling, &params, &mut rng);
            ones += (spins.get(0) == Some(1)) as usize;
        }
        assert_abs_diff_eq!(ones as f64 / n as f64, 0.3, epsilon = 0.015);
    }

    #[test]
    fn hat_transform_cases() {
        let g = build_box(2, 1).unwrap();
        // No neutral colors: hat is the identity.
        let params = params_2c(0.5, 2.0, 0.3);
        let sample = sample_dac(&g, &params, Boundary::Free, 9, 50);
        assert_eq!(sample.bonds, sample.bonds_hat);
        // Potts: every monochromatic edge zeroed, hence hat ≡ 0 wherever
        // bonds are open.
        let potts = params_2c(0.6, 2.0, 0.5);
        let sample = sample_dac(&g, &potts, Boundary::Wired, 9, 50);
        assert_eq!(sample.bonds_hat.count_open(), 0);
        // Hat never opens an edge.
        for e in 0..g.edge_count() {
            assert!(!sample.bonds_hat.is_open(e) || sample.bonds.is_open(e));
        }
    }

    #[test]
    fn samples_are_consistent() {
        let g = build_box(2, 2).unwrap();
        let params = ModelParams::new(0.55, 1.5, vec![0.2, 0.5, 0.3]).unwrap();
        for seed in 0..5 {
            let s = sample_dac(&g, &params, Boundary::Free, seed, 30);
            assert!(consistent(&g, &s.spins, &s.bonds));
        }
    }

    #[test]
    fn conditional_bonds_respect_spins() {
        let g = build_box(2, 1).unwrap();
        let params = params_2c(0.7, 2.0, 0.4);
        let mut spins = SpinConfig::empty(g.vertex_count());
        for v in 0..g.vertex_count() {
            spins.set(v, if g.coords(v)[0] <= 0 { 1 } else { 2 });
        }
        let bonds = conditional_bonds_given_spins(&g, &params, &spins, 3, 40).unwrap();
        assert!(consistent(&g, &spins, &bonds));
        // All-distinct spins force everything closed.
        let g2 = crate::graph::FiniteGraph::grid(&[2, 1]).unwrap();
        let params3 = ModelParams::new(0.9, 2.0, vec![0.5, 0.5]).unwrap();
        let mut distinct = SpinConfig::empty(2);
        distinct.set(0, 1);
        distinct.set(1, 2);
        let bonds = conditional_bonds_given_spins(&g2, &params3, &distinct, 3, 40).unwrap();
        assert_eq!(bonds.count_open(), 0);
    }

    #[test]
    fn monochromatic_conditional_matches_oracle() {
        // Constant spins: the conditional law is a single random-cluster
        // measure at (p, q a_1).
        let g = crate::graph::FiniteGraph::grid(&[2, 2]).unwrap();
        let params = params_2c(0.5, 2.0, 0.4);
        let spins = SpinConfig::constant(g.vertex_count(), 1);
        let fk = fk_exact(&g, params.p, params.q * 0.4).unwrap();
        let reps = 6000;
        let mut freq = vec![0.0; g.edge_count()];
        for r in 0..reps {
            let bonds =
                conditional_bonds_given_spins(&g, &params, &spins, 1000 + r as u64, 60).unwrap();
            for e in 0..g.edge_count() {
                freq[e] += bonds.is_open(e) as u8 as f64;
            }
        }
        for e in 0..g.edge_count() {
            let est = freq[e] / reps as f64;
            let exact = fk.edge_marginal(e);
            let se = (exact * (1.0 - exact) / reps as f64).sqrt();
            assert!(
                (est - exact).abs() < 4.0 * se + 0.01,
                "edge {e}: {est} vs {exact}"
            );
        }
    }

    #[test]
    fn quasi_closed_barrier_cases() {
        let g = build_box(2, 2).unwrap();
        let origin = g.vertex_at(&[0, 0]).unwrap();
        let b_edges = edge_boundary(&g, &[origin]);
        let barrier = is_barrier(&g, &b_edges).unwrap();
        let potts = params_2c(0.5, 2.0, 0.5);
        let skew = params_2c(0.5, 2.0, 0.3);

        // All barrier edges closed: quasi-closed regardless of spins.
        let closed = BondConfig::all_closed(g.edge_count());
        let spins = SpinConfig::constant(g.vertex_count(), 1);
        assert!(is_quasi_closed(&g, &spins, &closed, &barrier, &skew));

        // Open barrier edge with equal neutral spins: quasi-closed in the
        // Potts case, not in the skewed case.
        let mut bonds = closed.clone();
        bonds.set(b_edges[0], true);
        assert!(is_quasi_closed(&g, &spins, &bonds, &barrier, &potts));
        assert!(!is_quasi_closed(&g, &spins, &bonds, &barrier, &skew));

        // Open barrier edge with unequal spins: never quasi-closed.
        let mut spins2 = spins.clone();
        spins2.set(origin, 2);
        assert!(!is_quasi_closed(&g, &spins2, &bonds, &barrier, &potts));
    }

    #[test]
    fn spin_barrier_search() {
        let g = build_box(2, 3).unwrap();
        let origin = g.vertex_at(&[0, 0]).unwrap();
        // All-distinct spins around W: barrier hugs W ∪ ∂W.
        let mut spins = SpinConfig::empty(g.vertex_count());
        let s = g.vertex_count();
        let params = ModelParams::new(
            0.0,
            1.0,
            vec![1.0 / s as f64; s],
        )
        .unwrap();
        let _ = params;
        for v in 0..s {
            spins.set(v, (v + 1) as Color);
        }
        let barrier = find_closed_spin_barrier(&g, &spins, &[origin]).unwrap();
        assert!(barrier.interior_vertices.contains(&origin));
        // ∂W singleton clusters come along.
        assert_eq!(barrier.interior_vertices.len(), 5);

        // Constant spins percolate to the box boundary: no barrier.
        let constant = SpinConfig::constant(g.vertex_count(), 1);
        assert!(find_closed_spin_barrier(&g, &constant, &[origin]).is_none());
    }

    /// One full Gibbs step (bond sweep + cluster recoloring) holds the
    /// joint conditional law fixed; compare window marginals against the
    /// exact oracle.
    #[test]
    fn window_gibbs_matches_oracle() {
        let g = crate::graph::FiniteGraph::grid(&[3, 3]).unwrap();
        let params = params_2c(0.5, 2.0, 0.3);
        let center = g.vertex_at(&[1, 1]).unwrap();
        let mut outside = SpinConfig::empty(g.vertex_count());
        for v in 0..g.vertex_count() {
            if v != center {
                let c = g.coords(v);
                outside.set(v, if (c[0] + c[1]) % 2 == 0 { 1 } else { 2 });
            }
        }
        let joint = dac_exact(&g, &params).unwrap();
        let exact = joint.conditional_color_at(center, &outside).unwrap();

        let mut gibbs = WindowGibbs::new(&g, &params, &outside, &[center], 5).unwrap();
        let mut hits = 0usize;
        let total = 6000;
        for _ in 0..200 {
            gibbs.step();
        }
        let mut series = Vec::with_capacity(total);
        for _ in 0..total {
            gibbs.step();
            series.push((gibbs.window_spins()[0] == 1) as u8 as f64);
            hits += (gibbs.window_spins()[0] == 1) as usize;
        }
        let est = crate::mcmc::Estimate::from_series(&series);
        assert!(
            (est.value - exact[0]).abs() <= 3.0 * est.se.max(5e-3),
            "gibbs {} vs exact {} (se {})",
            est.value,
            exact[0],
            est.se
        );
        let _ = hits;
    }
}
