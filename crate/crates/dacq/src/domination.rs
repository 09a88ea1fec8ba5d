//! Stochastic-domination machinery: edgewise Holley-style checks, Strassen
//! coupling feasibility via max-flow, the dominating measure, and the
//! three-way exploration coupling behind the quasilocality argument.
//!
//! For `q >= 1` and a non-Potts color vector, the hat-transformed bond
//! configuration given any spin configuration is stochastically dominated
//! by a single explicit measure:
//!
//! * `a_ℓ > 1/q`: the wired random-cluster measure with parameters
//!   `(p, q a_ℓ)`;
//! * `a_ℓ < 1/q`: product Bernoulli with density `p / (p + (1-p) q a_ℓ)`;
//!
//! where `ℓ` is the distinguished color. The exploration coupling reveals
//! one edge at a time from the box boundary inward, giving the dominated
//! processes and the dominating one the same uniform variate per edge, so
//! the pointwise ordering is preserved step by step. It stops either on an
//! open crossing from the box boundary to the window, or on a closed
//! barrier in the dominating configuration, in which case the window spins
//! under the two conditionings coincide.

use std::collections::BTreeSet;

use crate::coloring::WindowGibbs;
use crate::error::{Error, Result};
use crate::graph::{
    is_barrier, vertex_boundary, Barrier, ConnScratch, EdgeId, FiniteGraph, SpinConfig,
    UnionFind, VertexId,
};
use crate::mcmc::{run_chain, Boundary, Estimate, RunSpec};
use crate::params::{Color, ModelParams};
use crate::rng::{indexed_uniform, CounterRng};

/// Hard limit for Strassen flow feasibility (`2^E` states per side).
pub const STRASSEN_MAX_EDGES: usize = 6;

/// The explicit measure dominating the conditional hat-bond law.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DominatingSpec {
    WiredRc { p: f64, q_eff: f64 },
    ProductBernoulli { p_eff: f64 },
}

/// Case split on the distinguished color `ℓ`. Errors in the Potts case
/// (no dominating measure is needed there) and for `q < 1`.
pub fn dominating_spec(params: &ModelParams) -> Result<DominatingSpec> {
    if params.q < 1.0 {
        return Err(Error::Regime("domination requires q >= 1".into()));
    }
    let ell = params
        .distinguished_color()
        .ok_or_else(|| Error::Regime("Potts case: every color has a_i = 1/q".into()))?;
    let a_ell = params.color_prob(ell);
    if a_ell > 1.0 / params.q {
        Ok(DominatingSpec::WiredRc { p: params.p, q_eff: params.q * a_ell })
    } else {
        Ok(DominatingSpec::ProductBernoulli {
            p_eff: params.p / (params.p + (1.0 - params.p) * params.q * a_ell),
        })
    }
}

/// Spin relation at an edge, as seen by the dominated (hat) process.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpinRelation {
    Differing,
    Equal(Color),
}

/// Conditioning context for one edgewise Holley comparison. The dominating
/// configuration sits above the dominated one, so it is at least as
/// connected.
#[derive(Clone, Copy, Debug)]
pub struct EdgeContext {
    pub spins: SpinRelation,
    pub dominated_connected: bool,
    pub dominating_connected: bool,
}

/// Single-edge conditional open probability of the dominated hat process:
/// zero across differing spins and inside neutral-color clusters,
/// otherwise the two-case random-cluster law at `(p, q a_j)`.
pub fn dominated_edge_probability(
    params: &ModelParams,
    spins: SpinRelation,
    connected: bool,
) -> f64 {
    match spins {
        SpinRelation::Differing => 0.0,
        SpinRelation::Equal(c) if params.color_is_neutral(c) => 0.0,
        SpinRelation::Equal(c) => {
            if connected {
                params.p
            } else {
                let qa = params.q * params.color_prob(c);
                params.p / (params.p + (1.0 - params.p) * qa)
            }
        }
    }
}

/// Single-edge conditional open probability of the dominating measure.
pub fn dominating_edge_probability(spec: &DominatingSpec, connected: bool) -> f64 {
    match *spec {
        DominatingSpec::WiredRc { p, q_eff } => {
            if connected {
                p
            } else {
                p / (p + (1.0 - p) * q_eff)
            }
        }
        DominatingSpec::ProductBernoulli { p_eff } => p_eff,
    }
}

/// Returns `(dominating, dominated)` conditional open probabilities for
/// the context; the first is at least the second in every admissible
/// context, which is exactly the Holley condition the coupling relies on.
pub fn holley_edge_check(params: &ModelParams, ctx: &EdgeContext) -> Result<(f64, f64)> {
    if ctx.dominated_connected && !ctx.dominating_connected {
        return Err(Error::InvalidParams(
            "dominated configuration cannot be connected where the dominating one is not".into(),
        ));
    }
    if let SpinRelation::Equal(c) = ctx.spins {
        if c == 0 || c as usize > params.s() {
            return Err(Error::InvalidParams(format!("color {c} out of range")));
        }
    }
    let spec = dominating_spec(params)?;
    let hi = dominating_edge_probability(&spec, ctx.dominating_connected);
    let lo = dominated_edge_probability(params, ctx.spins, ctx.dominated_connected);
    Ok((hi, lo))
}

fn scale_to_integers(probs: &[f64]) -> Result<Vec<i64>> {
    const SCALE: f64 = 1e9;
    if probs.iter().any(|&p| p < -1e-12 || !p.is_finite()) {
        return Err(Error::InvalidParams("distribution entries must be nonnegative".into()));
    }
    let mut scaled: Vec<i64> = probs.iter().map(|&p| (p.max(0.0) * SCALE).round() as i64).collect();
    let total: i64 = scaled.iter().sum();
    let target = SCALE as i64;
    if (total - target).abs() > 1000 {
        return Err(Error::InvalidParams("distribution does not sum to one".into()));
    }
    // Push rounding drift onto the largest entry.
    let argmax = (0..scaled.len()).max_by_key(|&i| scaled[i]).unwrap();
    scaled[argmax] += target - total;
    if scaled[argmax] < 0 {
        return Err(Error::InvalidParams("distribution entry underflow".into()));
    }
    Ok(scaled)
}

struct FlowNet {
    to: Vec<u32>,
    cap: Vec<i64>,
    head: Vec<Vec<u32>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl FlowNet {
    fn new(nodes: usize) -> Self {
        FlowNet {
            to: Vec::new(),
            cap: Vec::new(),
            head: vec![Vec::new(); nodes],
            level: vec![-1; nodes],
            iter: vec![0; nodes],
        }
    }

    fn add_edge(&mut self, a: usize, b: usize, cap: i64) {
        let id = self.to.len() as u32;
        self.to.push(b as u32);
        self.cap.push(cap);
        self.head[a].push(id);
        self.to.push(a as u32);
        self.cap.push(0);
        self.head[b].push(id + 1);
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = std::collections::VecDeque::new();
        self.level[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &id in &self.head[v] {
                let w = self.to[id as usize] as usize;
                if self.cap[id as usize] > 0 && self.level[w] < 0 {
                    self.level[w] = self.level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, v: usize, t: usize, flow: i64) -> i64 {
        if v == t {
            return flow;
        }
        while self.iter[v] < self.head[v].len() {
            let id = self.head[v][self.iter[v]] as usize;
            let w = self.to[id] as usize;
            if self.cap[id] > 0 && self.level[w] == self.level[v] + 1 {
                let pushed = self.dfs(w, t, flow.min(self.cap[id]));
                if pushed > 0 {
                    self.cap[id] -= pushed;
                    self.cap[id ^ 1] += pushed;
                    return pushed;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        while self.bfs(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let pushed = self.dfs(s, t, i64::MAX / 4);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
        total
    }
}

/// Strassen feasibility: does a coupling of `high` over `low` exist with
/// the first coordinate pointwise above the second? Both distributions
/// live on `{0,1}^E` indexed by edge mask. Probabilities are scaled to
/// integers at 1e-9 granularity and checked by exact max-flow.
pub fn strassen_feasible(high: &[f64], low: &[f64], edge_count: usize) -> Result<bool> {
    if edge_count > STRASSEN_MAX_EDGES {
        return Err(Error::SizeGuard(format!(
            "strassen_feasible supports at most {STRASSEN_MAX_EDGES} edges"
        )));
    }
    let states = 1usize << edge_count;
    if high.len() != states || low.len() != states {
        return Err(Error::InvalidParams("distribution length must be 2^edge_count".into()));
    }
    let hi = scale_to_integers(high)?;
    let lo = scale_to_integers(low)?;
    // source -> high masks -> (superset arcs) -> low masks -> sink.
    let source = 2 * states;
    let sink = 2 * states + 1;
    let mut net = FlowNet::new(2 * states + 2);
    for m in 0..states {
        net.add_edge(source, m, hi[m]);
        net.add_edge(states + m, sink, lo[m]);
    }
    for hi_mask in 0..states {
        for lo_mask in 0..states {
            if hi_mask & lo_mask == lo_mask {
                net.add_edge(hi_mask, states + lo_mask, i64::MAX / 8);
            }
        }
    }
    let flow = net.max_flow(source, sink);
    Ok(flow == 1_000_000_000)
}

/// One revealed edge in the exploration coupling.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RevealRecord {
    pub edge: EdgeId,
    pub u: f64,
    pub hat: bool,
    pub hat_prime: bool,
    pub dom: bool,
    /// Number of selectable unrevealed edges after this reveal.
    pub frontier: usize,
}

#[derive(Clone, Debug)]
pub enum TerminalEvent {
    /// A closed barrier in the dominating configuration encloses the
    /// window before any crossing appears.
    BarrierFound { barrier: Barrier },
    /// An open dominating path joins the box boundary to `∂W`.
    CrossingFound { path: Vec<EdgeId> },
}

impl TerminalEvent {
    pub fn label(&self) -> &'static str {
        match self {
            TerminalEvent::BarrierFound { .. } => "barrier",
            TerminalEvent::CrossingFound { .. } => "crossing",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CouplingOutcome {
    pub records: Vec<RevealRecord>,
    pub terminal: TerminalEvent,
    /// Whether the window spins drawn under the two conditionings agree.
    /// Always true on a barrier; on a crossing both windows are completed
    /// independently from their conditional laws.
    pub x_w_equal: bool,
    pub revealed_edges: usize,
}

/// Knobs for [`run_three_way_coupling`].
#[derive(Clone, Copy, Debug)]
pub struct CouplingConfig {
    /// Gibbs steps used to complete the window draw on a crossing.
    pub completion_steps: usize,
    /// Keep per-edge records (otherwise only counts are returned).
    pub record_transcript: bool,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig { completion_steps: 150, record_transcript: false }
    }
}

/// The three-way exploration coupling of the two conditioned hat
/// processes (spins `σ` and `σ'` off the window `W`) and the dominating
/// measure, on a box graph.
///
/// Edges are revealed one at a time: the first unrevealed edge in the
/// fixed edge order incident to the box boundary or to a previously
/// revealed dominating-open edge. All three processes share the edge's
/// uniform variate; their conditional open probabilities come from the
/// revealed context (the dominated ones through the spin case split with
/// revealed-open connectivity, the dominating one with unrevealed edges
/// counted as open, matching its wired role). The pointwise order
/// `dom >= hat, hat'` is asserted after every reveal.
pub fn run_three_way_coupling(
    graph: &FiniteGraph,
    params: &ModelParams,
    sigma: &SpinConfig,
    sigma_prime: &SpinConfig,
    w: &[VertexId],
    seed: u64,
    config: &CouplingConfig,
) -> Result<CouplingOutcome> {
    let spec = dominating_spec(params)?;
    let nv = graph.vertex_count();
    let ne = graph.edge_count();
    if graph.boundary_vertices().is_empty() {
        return Err(Error::InvalidParams("coupling needs a box with designated boundary".into()));
    }
    if w.is_empty() {
        return Err(Error::InvalidParams("window must be nonempty".into()));
    }
    let mut in_w = vec![false; nv];
    for &v in w {
        in_w[v] = true;
        if graph.is_boundary(v) {
            return Err(Error::InvalidParams("window must avoid the box boundary".into()));
        }
    }
    let near_w = vertex_boundary(graph, w);
    if near_w.iter().any(|&v| graph.is_boundary(v)) {
        return Err(Error::InvalidParams("W ∪ ∂W must stay inside the box".into()));
    }
    if sigma.len() != nv || sigma_prime.len() != nv {
        return Err(Error::InvalidParams("spin configurations sized to graph".into()));
    }
    for v in 0..nv {
        if in_w[v] {
            if sigma.get(v).is_some() || sigma_prime.get(v).is_some() {
                return Err(Error::InvalidParams("spins must be unset on the window".into()));
            }
            continue;
        }
        let (a, b) = (sigma.get(v), sigma_prime.get(v));
        if a.is_none() || b.is_none() {
            return Err(Error::InvalidParams(format!("spins undefined off the window at {v}")));
        }
        if !graph.is_boundary(v) && a != b {
            return Err(Error::InvalidParams(format!(
                "σ and σ' must agree inside the box off the window (differ at {v})"
            )));
        }
    }

    // Never-revealed region: ΔW and the interior edges it encloses.
    let delta_w = crate::graph::edge_boundary(graph, w);
    let protected: Vec<bool> = {
        let mut mask = vec![false; ne];
        for &e in &delta_w {
            mask[e] = true;
        }
        if let Some(bar) = is_barrier(graph, &delta_w) {
            for &e in &bar.interior_edges {
                mask[e] = true;
            }
        }
        mask
    };

    let mut revealed = vec![false; ne];
    let mut dom_val = vec![false; ne];
    let mut hat_uf = UnionFind::new(nv);
    let mut hat_p_uf = UnionFind::new(nv);
    let mut dom_uf = UnionFind::new(nv);
    // Pre-wire the boundary inside the crossing tracker: a crossing is an
    // open path from any boundary vertex.
    let bnd_rep = graph.boundary_vertices()[0];
    for &v in graph.boundary_vertices() {
        dom_uf.union(bnd_rep, v);
    }
    let mut is_ring = vec![false; ne];
    for e in graph.boundary_ring_edges() {
        is_ring[e] = true;
    }

    let mut selectable: BTreeSet<EdgeId> = BTreeSet::new();
    for &v in graph.boundary_vertices() {
        for &(e, _) in graph.incident(v) {
            if !protected[e] {
                selectable.insert(e);
            }
        }
    }
    let mut scratch = ConnScratch::new(nv);
    let mut witness: Option<Vec<bool>> = None;
    let mut records = Vec::new();
    let mut revealed_count = 0usize;
    let mut terminal: Option<TerminalEvent> = None;

    let near_w_mask = {
        let mut m = vec![false; nv];
        for &v in &near_w {
            m[v] = true;
        }
        m
    };
    let w_and_near: Vec<VertexId> = w.iter().copied().chain(near_w.iter().copied()).collect();

    while terminal.is_none() {
        let e = match selectable.iter().next().copied() {
            Some(e) => e,
            None => break,
        };
        selectable.remove(&e);
        let (x, y) = graph.endpoints(e);
        assert!(
            !protected[e] && !in_w[x] && !in_w[y],
            "exploration selected a window-adjacent edge"
        );

        let hat_prob = |uf: &mut UnionFind, spins: &SpinConfig| -> f64 {
            let (cx, cy) = (spins.get(x).unwrap(), spins.get(y).unwrap());
            let rel = if cx == cy { SpinRelation::Equal(cx) } else { SpinRelation::Differing };
            dominated_edge_probability(params, rel, uf.same(x, y))
        };
        let p_hat = hat_prob(&mut hat_uf, sigma);
        let p_hat_p = hat_prob(&mut hat_p_uf, sigma_prime);
        let p_dom = match spec {
            DominatingSpec::ProductBernoulli { p_eff } => p_eff,
            DominatingSpec::WiredRc { p, q_eff } => {
                if is_ring[e] {
                    // Wired conditioning forces the boundary ring open.
                    1.0
                } else {
                    // Unrevealed edges count as open: the dominating chain
                    // is explored from above, matching its wired role.
                    let connected = scratch
                        .connected(graph, x, y, |f| f != e && (!revealed[f] || dom_val[f]));
                    if connected {
                        p
                    } else {
                        p / (p + (1.0 - p) * q_eff)
                    }
                }
            }
        };
        let u = indexed_uniform(seed, 0, e as u64);
        let h = u < p_hat;
        let hp = u < p_hat_p;
        let d = u < p_dom;
        // The pointwise ordering is preserved by every reveal.
        assert!(d || !h, "dominating value fell below hat at edge {e}");
        assert!(d || !hp, "dominating value fell below hat' at edge {e}");
        revealed[e] = true;
        dom_val[e] = d;
        revealed_count += 1;
        if h {
            hat_uf.union(x, y);
        }
        if hp {
            hat_p_uf.union(x, y);
        }
        if d {
            dom_uf.union(x, y);
            for v in [x, y] {
                for &(f, _) in graph.incident(v) {
                    if !revealed[f] && !protected[f] {
                        selectable.insert(f);
                    }
                }
            }
        }
        if config.record_transcript {
            records.push(RevealRecord {
                edge: e,
                u,
                hat: h,
                hat_prime: hp,
                dom: d,
                frontier: selectable.len(),
            });
        }

        if d {
            // Crossing check: some ∂W vertex open-connected to the
            // boundary class.
            if near_w.iter().any(|&v| dom_uf.same(v, bnd_rep)) {
                let path = extract_open_path(graph, &revealed, &dom_val, &near_w_mask);
                terminal = Some(TerminalEvent::CrossingFound { path });
            }
        } else {
            // Barrier check, skipped while the cached witness path from
            // the boundary to W ∪ ∂W survives this closed reveal.
            let need = match &witness {
                Some(on_path) => on_path[e],
                None => true,
            };
            if need {
                match witness_path(graph, &revealed, &dom_val, &in_w, &near_w_mask) {
                    Some(path) => witness = Some(path),
                    None => {
                        let barrier = carve_barrier(graph, &revealed, &dom_val, &w_and_near)?;
                        terminal = Some(TerminalEvent::BarrierFound { barrier });
                    }
                }
            }
        }
    }

    let terminal = match terminal {
        Some(t) => t,
        None => {
            // Selectable set exhausted: the unexplored region around W is
            // fenced off by closed reveals.
            let barrier = carve_barrier(graph, &revealed, &dom_val, &w_and_near)?;
            TerminalEvent::BarrierFound { barrier }
        }
    };

    // No edge of ΔW or its enclosed interior was ever revealed.
    debug_assert!((0..ne).all(|e| !protected[e] || !revealed[e]));

    let x_w_equal = match &terminal {
        TerminalEvent::BarrierFound { barrier } => {
            // The two conditionings agree on the barrier interior, so the
            // window draws can be taken identical.
            for &v in &barrier.interior_vertices {
                if !in_w[v] {
                    assert_eq!(
                        sigma.get(v),
                        sigma_prime.get(v),
                        "interior spins must coincide on a barrier"
                    );
                }
            }
            true
        }
        TerminalEvent::CrossingFound { .. } => {
            // Complete both windows independently from their conditional
            // laws.
            let root = CounterRng::new(seed);
            let draw = |spins: &SpinConfig, tag: u64| -> Result<Vec<Color>> {
                let mut gibbs =
                    WindowGibbs::new(graph, params, spins, w, root.derive(tag).next_u64())?;
                for _ in 0..config.completion_steps {
                    gibbs.step();
                }
                Ok(gibbs.window_spins())
            };
            draw(sigma, 101)? == draw(sigma_prime, 102)?
        }
    };

    Ok(CouplingOutcome { records, terminal, x_w_equal, revealed_edges: revealed_count })
}

/// A path of revealed-open dominating edges from the boundary to `∂W`.
fn extract_open_path(
    graph: &FiniteGraph,
    revealed: &[bool],
    dom_val: &[bool],
    target: &[bool],
) -> Vec<EdgeId> {
    let nv = graph.vertex_count();
    let mut parent: Vec<Option<(EdgeId, VertexId)>> = vec![None; nv];
    let mut seen = vec![false; nv];
    let mut queue = std::collections::VecDeque::new();
    for &v in graph.boundary_vertices() {
        seen[v] = true;
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        if target[v] {
            let mut path = Vec::new();
            let mut cur = v;
            while let Some((e, prev)) = parent[cur] {
                path.push(e);
                cur = prev;
            }
            path.reverse();
            return path;
        }
        for &(e, u) in graph.incident(v) {
            if revealed[e] && dom_val[e] && !seen[u] {
                seen[u] = true;
                parent[u] = Some((e, v));
                queue.push_back(u);
            }
        }
    }
    unreachable!("crossing detected but no open path found");
}

/// A path from the box boundary to `W ∪ ∂W` through passable edges
/// (unrevealed or revealed dominating-open), as an edge membership mask.
fn witness_path(
    graph: &FiniteGraph,
    revealed: &[bool],
    dom_val: &[bool],
    in_w: &[bool],
    near_w: &[bool],
) -> Option<Vec<bool>> {
    let nv = graph.vertex_count();
    let mut parent: Vec<Option<(EdgeId, VertexId)>> = vec![None; nv];
    let mut seen = vec![false; nv];
    let mut queue = std::collections::VecDeque::new();
    for &v in graph.boundary_vertices() {
        seen[v] = true;
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        if in_w[v] || near_w[v] {
            let mut mask = vec![false; graph.edge_count()];
            let mut cur = v;
            while let Some((e, prev)) = parent[cur] {
                mask[e] = true;
                cur = prev;
            }
            return Some(mask);
        }
        for &(e, u) in graph.incident(v) {
            if (!revealed[e] || dom_val[e]) && !seen[u] {
                seen[u] = true;
                parent[u] = Some((e, v));
                queue.push_back(u);
            }
        }
    }
    None
}

/// The closed barrier carved by the revealed-closed dominating edges: the
/// edge boundary of the passable component of `W ∪ ∂W`.
fn carve_barrier(
    graph: &FiniteGraph,
    revealed: &[bool],
    dom_val: &[bool],
    w_and_near: &[VertexId],
) -> Result<Barrier> {
    let nv = graph.vertex_count();
    let mut region = vec![false; nv];
    let mut stack: Vec<VertexId> = Vec::new();
    for &v in w_and_near {
        if !region[v] {
            region[v] = true;
            stack.push(v);
        }
    }
    while let Some(v) = stack.pop() {
        for &(e, u) in graph.incident(v) {
            if (!revealed[e] || dom_val[e]) && !region[u] {
                region[u] = true;
                stack.push(u);
            }
        }
    }
    let members: Vec<VertexId> = (0..nv).filter(|&v| region[v]).collect();
    if members.iter().any(|&v| graph.is_boundary(v)) {
        return Err(Error::InvalidParams(
            "no closed barrier: window still reaches the boundary".into(),
        ));
    }
    let cut = crate::graph::edge_boundary(graph, &members);
    // Every cut edge was revealed closed, otherwise the region would have
    // grown through it.
    debug_assert!(cut.iter().all(|&e| revealed[e] && !dom_val[e]));
    is_barrier(graph, &cut)
        .ok_or_else(|| Error::InvalidParams("carved cut failed to separate the graph".into()))
}

/// Monte Carlo estimate of the dominating-measure crossing probability
/// `φ_dom(∂W ↔ ∂Λ_n)` on the given box.
pub fn crossing_estimate(
    spec: &DominatingSpec,
    graph: &FiniteGraph,
    w: &[VertexId],
    seed: u64,
    replicas: usize,
    chain: &RunSpec,
) -> Estimate {
    let near_w = vertex_boundary(graph, w);
    let mut target = vec![false; graph.vertex_count()];
    for &v in &near_w {
        target[v] = true;
    }
    let sources: Vec<VertexId> = graph.boundary_vertices().to_vec();
    let mut scratch = ConnScratch::new(graph.vertex_count());
    match *spec {
        DominatingSpec::ProductBernoulli { p_eff } => {
            let hits: Vec<f64> = (0..replicas)
                .map(|r| {
                    let open = |e: EdgeId| indexed_uniform(seed, r as u64, e as u64) < p_eff;
                    scratch.set_connected(graph, &sources, &target, open) as u8 as f64
                })
                .collect();
            let mean = hits.iter().sum::<f64>() / replicas.max(1) as f64;
            let se = (mean * (1.0 - mean) / replicas.max(1) as f64).sqrt();
            Estimate { value: mean, se }
        }
        DominatingSpec::WiredRc { p, q_eff } => {
            let mut series = Vec::with_capacity(replicas * chain.samples);
            for r in 0..replicas {
                let rep_seed = CounterRng::new(seed).derive(r as u64).next_u64();
                let (samples, _) = run_chain(graph, p, q_eff, Boundary::Wired, rep_seed, chain);
                for bonds in &samples {
                    let hit =
                        scratch.set_connected(graph, &sources, &target, |e| bonds.is_open(e));
                    series.push(hit as u8 as f64);
                }
            }
            Estimate::from_series(&series)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_box;
    use crate::oracle::fk_exact;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dominating_spec_cases() {
        // q=3, a=(0.4,0.6): a_ℓ = 0.4 > 1/3 -> wired RC at q_eff = 1.2.
        let p = ModelParams::new(0.5, 3.0, vec![0.4, 0.6]).unwrap();
        match dominating_spec(&p).unwrap() {
            DominatingSpec::WiredRc { p, q_eff } => {
                assert_eq!(p, 0.5);
                assert_abs_diff_eq!(q_eff, 1.2, epsilon = 1e-12);
            }
            other => panic!("expected wired RC, got {other:?}"),
        }
        // q=1, a=(0.3,0.7): a_ℓ = 0.3 < 1 -> Bernoulli at 0.5/0.65.
        let p = ModelParams::new(0.5, 1.0, vec![0.3, 0.7]).unwrap();
        match dominating_spec(&p).unwrap() {
            DominatingSpec::ProductBernoulli { p_eff } => {
                assert_abs_diff_eq!(p_eff, 0.5 / 0.65, epsilon = 1e-12);
            }
            other => panic!("expected Bernoulli, got {other:?}"),
        }
        // Potts: no dominating measure needed.
        let p = ModelParams::new(0.5, 2.0, vec![0.5, 0.5]).unwrap();
        assert!(dominating_spec(&p).is_err());
        // q < 1 rejected.
        let p = ModelParams::new(0.5, 0.5, vec![0.3, 0.7]).unwrap();
        assert!(dominating_spec(&p).is_err());
    }

    #[test]
    fn holley_contexts() {
        let params = ModelParams::new(0.5, 1.0, vec![0.3, 0.7]).unwrap();
        // Differing spins: dominated probability zero.
        let (hi, lo) = holley_edge_check(
            &params,
            &EdgeContext {
                spins: SpinRelation::Differing,
                dominated_connected: false,
                dominating_connected: false,
            },
        )
        .unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi >= lo);
        // Connected on both sides: both at p in the wired regime.
        let wired = ModelParams::new(0.5, 3.0, vec![0.4, 0.6]).unwrap();
        let (hi, lo) = holley_edge_check(
            &wired,
            &EdgeContext {
                spins: SpinRelation::Equal(2),
                dominated_connected: true,
                dominating_connected: true,
            },
        )
        .unwrap();
        assert_eq!((hi, lo), (0.5, 0.5));
        // Inconsistent connectivity rejected.
        assert!(holley_edge_check(
            &params,
            &EdgeContext {
                spins: SpinRelation::Equal(1),
                dominated_connected: true,
                dominating_connected: false,
            },
        )
        .is_err());
    }

    #[test]
    fn holley_ordering_random_sweep() {
        // Dominating >= dominated across 10^4 random parameter draws, all
        // contexts and colors, both regimes.
        let mut rng = CounterRng::new(2024);
        let mut checked = 0usize;
        while checked < 10_000 {
            let p = 0.05 + 0.9 * rng.next_f64();
            let q = 1.0 + 4.0 * rng.next_f64();
            let s = 2 + (rng.next_u64() % 3) as usize;
            let mut a: Vec<f64> = (0..s).map(|_| 0.05 + rng.next_f64()).collect();
            let total: f64 = a.iter().sum();
            a.iter_mut().for_each(|x| *x /= total);
            let Ok(params) = ModelParams::new(p, q, a) else { continue };
            if params.is_potts() {
                continue;
            }
            for color in 1..=s as Color {
                for &(dc, gc) in &[(false, false), (false, true), (true, true)] {
                    for spins in [SpinRelation::Differing, SpinRelation::Equal(color)] {
                        let ctx =
                            EdgeContext { spins, dominated_connected: dc, dominating_connected: gc };
                        let (hi, lo) = holley_edge_check(&params, &ctx).unwrap();
                        assert!(
                            hi >= lo - 1e-15,
                            "violation at p={p} q={q} ctx={ctx:?}: {hi} < {lo}"
                        );
                        checked += 1;
                    }
                }
            }
        }
    }

    #[test]
    fn strassen_basic_cases() {
        // Identical distributions: identity coupling.
        let d = vec![0.25, 0.25, 0.25, 0.25];
        assert!(strassen_feasible(&d, &d, 2).unwrap());
        // Bernoulli(0.7) over Bernoulli(0.3) on one edge, and not vice
        // versa.
        let hi = vec![0.3, 0.7];
        let lo = vec![0.7, 0.3];
        assert!(strassen_feasible(&hi, &lo, 1).unwrap());
        assert!(!strassen_feasible(&lo, &hi, 1).unwrap());
    }

    #[test]
    fn strassen_wired_dominates_free() {
        // Square with two adjacent boundary vertices: wired conditioning
        // (ring edge forced open) dominates the free measure.
        let g = crate::graph::FiniteGraph::from_parts(
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
            vec![(0, 1), (0, 2), (1, 3), (2, 3)],
            vec![0, 1],
        )
        .unwrap();
        let ring = g.boundary_ring_edges();
        assert_eq!(ring.len(), 1);
        let fk = fk_exact(&g, 0.5, 2.0).unwrap();
        let free = fk.probabilities();
        let wired = fk.conditioned(|m| m >> ring[0] & 1 == 1).probabilities();
        assert!(strassen_feasible(&wired, &free, g.edge_count()).unwrap());
        assert!(!strassen_feasible(&free, &wired, g.edge_count()).unwrap());
    }

    /// Feasibility agrees with increasing-event domination, exhaustively
    /// over all up-closed events on a 4-edge graph.
    #[test]
    fn strassen_matches_event_ordering() {
        let g = crate::graph::FiniteGraph::grid(&[2, 2]).unwrap();
        let ne = g.edge_count();
        let states = 1usize << ne;
        let cases = [
            (fk_exact(&g, 0.6, 2.0).unwrap(), fk_exact(&g, 0.4, 2.0).unwrap()),
            (fk_exact(&g, 0.5, 1.0).unwrap(), fk_exact(&g, 0.5, 2.0).unwrap()),
            (fk_exact(&g, 0.3, 2.0).unwrap(), fk_exact(&g, 0.6, 2.0).unwrap()),
        ];
        for (a, b) in &cases {
            let pa = a.probabilities();
            let pb = b.probabilities();
            let mut dominates = true;
            'sets: for set in 0u64..(1 << states) {
                for c in 0..states {
                    if set >> c & 1 == 0 {
                        continue;
                    }
                    for bit in 0..ne {
                        if set >> (c | 1 << bit) & 1 == 0 {
                            continue 'sets;
                        }
                    }
                }
                let qa: f64 = (0..states).filter(|&c| set >> c & 1 == 1).map(|c| pa[c]).sum();
                let qb: f64 = (0..states).filter(|&c| set >> c & 1 == 1).map(|c| pb[c]).sum();
                if qa < qb - 1e-9 {
                    dominates = false;
                    break;
                }
            }
            assert_eq!(strassen_feasible(&pa, &pb, ne).unwrap(), dominates);
        }
    }

    fn window_and_spins(g: &FiniteGraph, fill: Color, fill_prime: Color) -> (Vec<VertexId>, SpinConfig, SpinConfig) {
        let origin = g.vertex_at(&vec![0; g.dimension()]).unwrap();
        let mut sigma = SpinConfig::empty(g.vertex_count());
        let mut sigma_p = SpinConfig::empty(g.vertex_count());
        for v in 0..g.vertex_count() {
            if v == origin {
                continue;
            }
            if g.is_boundary(v) {
                sigma.set(v, fill);
                sigma_p.set(v, fill_prime);
            } else {
                sigma.set(v, 1 + (v % 2) as Color);
                sigma_p.set(v, 1 + (v % 2) as Color);
            }
        }
        (vec![origin], sigma, sigma_p)
    }

    #[test]
    fn coupling_p_zero_always_barrier() {
        let g = build_box(2, 3).unwrap();
        let params = ModelParams::new(0.0, 1.0, vec![0.3, 0.7]).unwrap();
        let (w, sigma, sigma_p) = window_and_spins(&g, 1, 2);
        for seed in 0..20 {
            let out = run_three_way_coupling(
                &g,
                &params,
                &sigma,
                &sigma_p,
                &w,
                seed,
                &CouplingConfig::default(),
            )
            .unwrap();
            assert!(matches!(out.terminal, TerminalEvent::BarrierFound { .. }));
            assert!(out.x_w_equal);
        }
    }

    #[test]
    fn coupling_identical_spins_identical_reveals() {
        let g = build_box(2, 3).unwrap();
        let params = ModelParams::new(0.4, 1.0, vec![0.3, 0.7]).unwrap();
        let (w, sigma, _) = window_and_spins(&g, 1, 1);
        let cfg = CouplingConfig { completion_steps: 40, record_transcript: true };
        let out = run_three_way_coupling(&g, &params, &sigma, &sigma, &w, 5, &cfg).unwrap();
        assert!(!out.records.is_empty());
        for rec in &out.records {
            assert_eq!(rec.hat, rec.hat_prime);
        }
    }

    #[test]
    fn coupling_dense_phase_crossing() {
        let g = build_box(2, 3).unwrap();
        let params = ModelParams::new(0.95, 1.0, vec![0.3, 0.7]).unwrap();
        // Monochromatic surroundings let the dominating cluster reach the
        // window with overwhelming probability.
        let origin = g.vertex_at(&[0, 0]).unwrap();
        let mut sigma = SpinConfig::empty(g.vertex_count());
        for v in 0..g.vertex_count() {
            if v != origin {
                sigma.set(v, 1);
            }
        }
        let cfg = CouplingConfig { completion_steps: 30, record_transcript: false };
        let out =
            run_three_way_coupling(&g, &params, &sigma, &sigma, &[origin], 3, &cfg).unwrap();
        assert!(matches!(out.terminal, TerminalEvent::CrossingFound { .. }));
    }

    #[test]
    fn coupling_wired_rc_regime_runs() {
        let g = build_box(2, 2).unwrap();
        let params = ModelParams::new(0.3, 3.0, vec![0.4, 0.6]).unwrap();
        assert!(matches!(dominating_spec(&params).unwrap(), DominatingSpec::WiredRc { .. }));
        let (w, sigma, sigma_p) = window_and_spins(&g, 1, 2);
        for seed in 0..10 {
            let out = run_three_way_coupling(
                &g,
                &params,
                &sigma,
                &sigma_p,
                &w,
                seed,
                &CouplingConfig { completion_steps: 30, record_transcript: false },
            )
            .unwrap();
            if let TerminalEvent::BarrierFound { .. } = out.terminal {
                assert!(out.x_w_equal);
            }
        }
    }

    #[test]
    fn crossing_estimate_extremes() {
        let g = build_box(2, 4).unwrap();
        let origin = g.vertex_at(&[0, 0]).unwrap();
        let run = RunSpec::new(10, 10, 1);
        let zero = crossing_estimate(
            &DominatingSpec::ProductBernoulli { p_eff: 0.0 },
            &g,
            &[origin],
            1,
            200,
            &run,
        );
        assert_eq!(zero.value, 0.0);
        let one = crossing_estimate(
            &DominatingSpec::ProductBernoulli { p_eff: 1.0 },
            &g,
            &[origin],
            1,
            200,
            &run,
        );
        assert_eq!(one.value, 1.0);
    }
}
