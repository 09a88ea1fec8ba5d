//! Brute-force exact probabilities on tiny graphs.
//!
//! Everything here enumerates configurations outright and is guarded by
//! hard size limits; these functions are the ground truth that the
//! samplers and couplings are tested against, never a production path.
//!
//! The random-cluster measure on a finite graph assigns a bond
//! configuration `η` probability proportional to
//!
//! ```text
//! q^k(η) * Π_e p^η(e) (1-p)^(1-η(e))
//! ```
//!
//! where `k(η)` counts connected components (isolated vertices included).
//! The joint divide-and-color law additionally colors each component
//! independently, giving per-configuration weight `Π_clusters (q a_color)`
//! times the edge factors. All weights are kept in log space and
//! normalized with a fixed-shape pairwise log-sum-exp tree, so totals are
//! bit-identical regardless of how the enumeration is parallelized.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{BondConfig, DsuScratch, EdgeId, FiniteGraph, SpinConfig, VertexId};
use crate::params::{Color, ModelParams};
use crate::rng::CounterRng;

/// Hard limit for plain random-cluster enumeration (2^E configurations).
pub const FK_MAX_EDGES: usize = 20;
/// Hard limits for joint spin-bond enumeration.
pub const DAC_MAX_EDGES: usize = 16;
pub const DAC_MAX_STATES: u128 = 10_000_000;
/// Monotone-event checks enumerate or sample events on at most this many
/// edges.
pub const FKG_MAX_EDGES: usize = 10;

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-sum-exp over a slice via a balanced pairwise tree. The reduction
/// shape depends only on the length, so the result is independent of
/// thread count when the halves are evaluated in parallel.
pub(crate) fn log_sum_exp_tree(xs: &[f64]) -> f64 {
    const PAR_THRESHOLD: usize = 1 << 14;
    match xs.len() {
        0 => f64::NEG_INFINITY,
        1 => xs[0],
        n if n < PAR_THRESHOLD => {
            let (a, b) = xs.split_at(n / 2);
            log_add_exp(log_sum_exp_tree(a), log_sum_exp_tree(b))
        }
        n => {
            let (a, b) = xs.split_at(n / 2);
            let (la, lb) = rayon::join(|| log_sum_exp_tree(a), || log_sum_exp_tree(b));
            log_add_exp(la, lb)
        }
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidParams(format!("q = {q} must be positive")));
    }
    Ok(())
}

/// Log of `p^open (1-p)^closed` with the endpoint values `p ∈ {0, 1}`
/// treated as point masses (forbidden states get weight zero).
#[inline]
fn edge_factor_log(open_count: usize, edge_count: usize, p: f64) -> f64 {
    let closed_count = edge_count - open_count;
    if p == 0.0 {
        return if open_count == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if closed_count == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    open_count as f64 * p.ln() + closed_count as f64 * (1.0 - p).ln()
}

/// Unnormalized log-weight `k(η) ln q + Σ_e [η ln p + (1-η) ln(1-p)]`.
pub fn fk_log_weight(g: &FiniteGraph, bonds: &BondConfig, p: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    if bonds.len() != g.edge_count() {
        return Err(Error::InvalidParams("bond config sized to graph".into()));
    }
    let mut dsu = DsuScratch::new(g.vertex_count());
    let k = dsu.component_count(g, |e| bonds.is_open(e));
    Ok(k as f64 * q.ln() + edge_factor_log(bonds.count_open(), g.edge_count(), p))
}

/// Exact distribution over a finite support, stored as log-weights plus
/// the log normalizer.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    pub log_weights: Vec<f64>,
    pub log_z: f64,
}

impl ExactDistribution {
    fn from_log_weights(log_weights: Vec<f64>) -> Self {
        let log_z = log_sum_exp_tree(&log_weights);
        ExactDistribution { log_weights, log_z }
    }

    #[inline]
    pub fn prob(&self, index: usize) -> f64 {
        let lw = self.log_weights[index];
        if lw == f64::NEG_INFINITY {
            0.0
        } else {
            (lw - self.log_z).exp()
        }
    }

    /// Sum of all probabilities; equals one up to roundoff.
    pub fn total_probability(&self) -> f64 {
        (0..self.log_weights.len()).map(|i| self.prob(i)).sum()
    }

    /// New distribution conditioned on the indices where `keep` holds.
    pub fn conditioned<F: Fn(usize) -> bool>(&self, keep: F) -> ExactDistribution {
        let lw: Vec<f64> = self
            .log_weights
            .iter()
            .enumerate()
            .map(|(i, &w)| if keep(i) { w } else { f64::NEG_INFINITY })
            .collect();
        ExactDistribution::from_log_weights(lw)
    }
}

/// Exact random-cluster distribution; configurations are indexed by edge
/// bitmask (bit `e` = edge `e` open).
#[derive(Clone, Debug)]
pub struct FkDistribution {
    pub dist: ExactDistribution,
    pub edge_count: usize,
}

impl FkDistribution {
    #[inline]
    pub fn prob(&self, mask: u64) -> f64 {
        self.dist.prob(mask as usize)
    }

    pub fn edge_marginal(&self, e: EdgeId) -> f64 {
        (0..self.dist.log_weights.len())
            .filter(|&m| m >> e & 1 == 1)
            .map(|m| self.dist.prob(m))
            .sum()
    }

    pub fn event_prob<F: Fn(u64) -> bool>(&self, event: F) -> f64 {
        (0..self.dist.log_weights.len())
            .filter(|&m| event(m as u64))
            .map(|m| self.dist.prob(m))
            .sum()
    }

    pub fn conditioned<F: Fn(u64) -> bool>(&self, keep: F) -> FkDistribution {
        FkDistribution {
            dist: self.dist.conditioned(|m| keep(m as u64)),
            edge_count: self.edge_count,
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dist.log_weights.len()).map(|m| self.dist.prob(m)).collect()
    }
}

/// Full `2^E` enumeration of the random-cluster measure.
pub fn fk_exact(g: &FiniteGraph, p: f64, q: f64) -> Result<FkDistribution> {
    check_q(q)?;
    let ne = g.edge_count();
    if ne > FK_MAX_EDGES {
        return Err(Error::SizeGuard(format!(
            "fk_exact supports at most {FK_MAX_EDGES} edges, got {ne}"
        )));
    }
    let total = 1usize << ne;
    let log_q = q.ln();
    let log_weights: Vec<f64> = (0..total)
        .into_par_iter()
        .map_init(
            || DsuScratch::new(g.vertex_count()),
            |dsu, mask| {
                let m = mask as u64;
                let k = dsu.component_count(g, |e| m >> e & 1 == 1);
                k as f64 * log_q + edge_factor_log(m.count_ones() as usize, ne, p)
            },
        )
        .collect();
    Ok(FkDistribution { dist: ExactDistribution::from_log_weights(log_weights), edge_count: ne })
}

/// Exact conditional probability that edge `e` is open given the rest of
/// the configuration, computed by restricted enumeration (the two
/// completions of `ζ` at `e`). Matches the two-case closed form
/// `p` / `p/(p+(1-p)q)` up to roundoff.
pub fn fk_conditional_edge(
    g: &FiniteGraph,
    p: f64,
    q: f64,
    e: EdgeId,
    zeta: &BondConfig,
) -> Result<f64> {
    check_q(q)?;
    if g.edge_count() > FK_MAX_EDGES {
        return Err(Error::SizeGuard(format!(
            "fk_conditional_edge supports at most {FK_MAX_EDGES} edges"
        )));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let mut open = zeta.clone();
    open.set(e, true);
    let mut closed = zeta.clone();
    closed.set(e, false);
    let lw_open = fk_log_weight(g, &open, p, q)?;
    let lw_closed = fk_log_weight(g, &closed, p, q)?;
    Ok(1.0 / (1.0 + (lw_closed - lw_open).exp()))
}

fn describe_dac_guard(g: &FiniteGraph, s: usize) -> Result<(usize, usize)> {
    let ne = g.edge_count();
    let nv = g.vertex_count();
    if ne > DAC_MAX_EDGES {
        return Err(Error::SizeGuard(format!(
            "dac_exact supports at most {DAC_MAX_EDGES} edges, got {ne}"
        )));
    }
    let states = (s as u128).pow(nv as u32).saturating_mul(1u128 << ne);
    if states > DAC_MAX_STATES {
        return Err(Error::SizeGuard(format!(
            "dac_exact state space {states} exceeds {DAC_MAX_STATES}"
        )));
    }
    Ok((nv, ne))
}

/// Joint log-weight of a total spin configuration and bond configuration;
/// `-inf` when an open edge joins unequal spins.
pub fn dac_joint_log_weight(
    g: &FiniteGraph,
    spins: &SpinConfig,
    bonds: &BondConfig,
    params: &ModelParams,
) -> Result<f64> {
    if !spins.is_total() || spins.len() != g.vertex_count() {
        return Err(Error::InvalidParams("spin config must be total".into()));
    }
    if bonds.len() != g.edge_count() {
        return Err(Error::InvalidParams("bond config sized to graph".into()));
    }
    for e in 0..g.edge_count() {
        if bonds.is_open(e) {
            let (x, y) = g.endpoints(e);
            if spins.get(x) != spins.get(y) {
                return Ok(f64::NEG_INFINITY);
            }
        }
    }
    let fk = fk_log_weight(g, bonds, params.p, params.q)?;
    if fk == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let labeling = crate::graph::label_clusters(g, bonds);
    let mut color_term = 0.0;
    for members in &labeling.members {
        let c = spins.get(members[0]).expect("total spins");
        color_term += params.color_prob(c).ln();
    }
    Ok(fk + color_term)
}

/// Exact joint distribution of the divide-and-color model, indexed by
/// `(spin code, bond mask)`. Spin codes are mixed-radix base-`s` integers
/// with vertex 0 least significant and digit `color - 1`.
#[derive(Clone, Debug)]
pub struct DacDistribution {
    pub dist: ExactDistribution,
    pub vertex_count: usize,
    pub edge_count: usize,
    pub s: usize,
}

impl DacDistribution {
    #[inline]
    pub fn index(&self, spin_code: usize, mask: u64) -> usize {
        spin_code * (1usize << self.edge_count) + mask as usize
    }

    #[inline]
    pub fn prob(&self, spin_code: usize, mask: u64) -> f64 {
        self.dist.prob(self.index(spin_code, mask))
    }

    #[inline]
    pub fn color_at(&self, spin_code: usize, v: VertexId) -> Color {
        (spin_code / self.s.pow(v as u32) % self.s + 1) as Color
    }

    pub fn spin_code_of(&self, spins: &SpinConfig) -> usize {
        let mut code = 0usize;
        for v in (0..self.vertex_count).rev() {
            let c = spins.get(v).expect("total spins") as usize - 1;
            code = code * self.s + c;
        }
        code
    }

    /// Marginal probability of spin configurations (summed over bonds),
    /// indexed by spin code.
    pub fn spin_marginals(&self) -> Vec<f64> {
        let blocks = 1usize << self.edge_count;
        (0..self.s.pow(self.vertex_count as u32))
            .map(|code| {
                (0..blocks).map(|m| self.dist.prob(self.index(code, m as u64))).sum()
            })
            .collect()
    }

    /// Per-vertex color distribution.
    pub fn vertex_marginal(&self, v: VertexId) -> Vec<f64> {
        let spin_probs = self.spin_marginals();
        let mut out = vec![0.0; self.s];
        for (code, pr) in spin_probs.iter().enumerate() {
            out[self.color_at(code, v) as usize - 1] += pr;
        }
        out
    }

    /// Conditional color distribution at `v` given the (total) spins off
    /// `v`.
    pub fn conditional_color_at(&self, v: VertexId, spins_off: &SpinConfig) -> Result<Vec<f64>> {
        let mut weights = vec![f64::NEG_INFINITY; self.s];
        let blocks = 1usize << self.edge_count;
        let mut spins = spins_off.clone();
        for c in 1..=self.s as Color {
            spins.set(v, c);
            if !spins.is_total() {
                return Err(Error::InvalidParams("spins_off must cover all vertices but v".into()));
            }
            let code = self.spin_code_of(&spins);
            let lws: Vec<f64> = (0..blocks)
                .map(|m| self.dist.log_weights[self.index(code, m as u64)])
                .collect();
            weights[c as usize - 1] = log_sum_exp_tree(&lws);
        }
        let log_total = log_sum_exp_tree(&weights);
        if log_total == f64::NEG_INFINITY {
            return Err(Error::InvalidParams("conditioning event has probability zero".into()));
        }
        Ok(weights.iter().map(|&w| (w - log_total).exp()).collect())
    }
}

/// Full enumeration of the joint spin-bond law.
pub fn dac_exact(g: &FiniteGraph, params: &ModelParams) -> Result<DacDistribution> {
    let s = params.s();
    let (nv, ne) = describe_dac_guard(g, s)?;
    let spin_total = s.pow(nv as u32);
    let blocks = 1usize << ne;
    let log_q = params.q.ln();
    let log_a: Vec<f64> = params.a.iter().map(|&x| x.ln()).collect();
    let edges: Vec<(usize, usize)> = (0..ne).map(|e| g.endpoints(e)).collect();

    let per_code: Vec<Vec<f64>> = (0..spin_total)
        .into_par_iter()
        .map_init(
            || (DsuScratch::new(nv), vec![0u8; nv], vec![0u32; nv], 0u32),
            |(dsu, colors, stamp, epoch), code| {
                let mut c = code;
                for slot in colors.iter_mut() {
                    *slot = (c % s) as u8;
                    c /= s;
                }
                let mut out = Vec::with_capacity(blocks);
                for mask in 0..blocks {
                    let m = mask as u64;
                    // Open edges must join equal colors.
                    let consistent = edges
                        .iter()
                        .enumerate()
                        .all(|(e, &(x, y))| m >> e & 1 == 0 || colors[x] == colors[y]);
                    if !consistent {
                        out.push(f64::NEG_INFINITY);
                        continue;
                    }
                    let edge_term = edge_factor_log(m.count_ones() as usize, ne, params.p);
                    if edge_term == f64::NEG_INFINITY {
                        out.push(f64::NEG_INFINITY);
                        continue;
                    }
                    // Per-cluster color factor Π_clusters (q a_color): one
                    // contribution per union-find root.
                    dsu.load(g, |e| m >> e & 1 == 1);
                    *epoch += 1;
                    let mut color_term = 0.0;
                    for v in 0..nv {
                        let root = dsu.find(v);
                        if stamp[root] != *epoch {
                            stamp[root] = *epoch;
                            color_term += log_q + log_a[colors[v] as usize];
                        }
                    }
                    out.push(edge_term + color_term);
                }
                out
            },
        )
        .collect();
    let log_weights: Vec<f64> = per_code.concat();

    Ok(DacDistribution {
        dist: ExactDistribution::from_log_weights(log_weights),
        vertex_count: nv,
        edge_count: ne,
        s,
    })
}

/// Independent Potts oracle: spin weights `exp(2β · #{equal neighbor
/// pairs})` with `β = -log(1-p)/2`, enumerated directly from the
/// Hamiltonian. Returns per-vertex color distributions.
pub fn potts_vertex_marginals(g: &FiniteGraph, colors: usize, p: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParams("potts oracle needs p in [0, 1)".into()));
    }
    if colors < 2 {
        return Err(Error::InvalidParams("potts oracle needs at least 2 colors".into()));
    }
    let nv = g.vertex_count();
    let total = (colors as u128).pow(nv as u32);
    if total > DAC_MAX_STATES {
        return Err(Error::SizeGuard(format!("potts oracle state space {total} too large")));
    }
    let total = total as usize;
    // exp(2β) = 1/(1-p): each equal adjacent pair contributes -ln(1-p).
    let per_equal = -(1.0 - p).ln();
    let mut log_weights = Vec::with_capacity(total);
    let mut color_buf = vec![0u8; nv];
    for code in 0..total {
        let mut c = code;
        for slot in color_buf.iter_mut() {
            *slot = (c % colors) as u8;
            c /= colors;
        }
        let mut equal = 0usize;
        for e in 0..g.edge_count() {
            let (x, y) = g.endpoints(e);
            if color_buf[x] == color_buf[y] {
                equal += 1;
            }
        }
        log_weights.push(equal as f64 * per_equal);
    }
    let dist = ExactDistribution::from_log_weights(log_weights);
    let mut out = vec![vec![0.0; colors]; nv];
    for code in 0..total {
        let pr = dist.prob(code);
        let mut c = code;
        for v in 0..nv {
            out[v][c % colors] += pr;
            c /= colors;
        }
    }
    Ok(out)
}

/// Max absolute deviation between the exact conditional bond law given a
/// total spin configuration and its product form: all differently-colored
/// edges closed, and independently for each color `i` a random-cluster
/// measure with parameters `(p, q a_i)` on the induced color-`i` subgraph.
pub fn bond_law_factorization_deviation(
    g: &FiniteGraph,
    params: &ModelParams,
    spins: &SpinConfig,
) -> Result<f64> {
    if !spins.is_total() || spins.len() != g.vertex_count() {
        return Err(Error::InvalidParams("spin config must be total".into()));
    }
    let ne = g.edge_count();
    if ne > DAC_MAX_EDGES {
        return Err(Error::SizeGuard(format!("needs at most {DAC_MAX_EDGES} edges")));
    }

    // Exact conditional: normalize joint weights at fixed spins.
    let mut log_weights = Vec::with_capacity(1 << ne);
    for mask in 0..(1u64 << ne) {
        let bonds = BondConfig::from_mask(ne, mask);
        log_weights.push(dac_joint_log_weight(g, spins, &bonds, params)?);
    }
    let conditional = ExactDistribution::from_log_weights(log_weights);

    // Product route: per-color random-cluster measures on induced
    // subgraphs.
    let mut diff_edges = vec![false; ne];
    for e in 0..ne {
        let (x, y) = g.endpoints(e);
        diff_edges[e] = spins.get(x) != spins.get(y);
    }
    struct ColorFactor {
        fk: FkDistribution,
        edge_map: Vec<EdgeId>,
    }
    let mut factors: Vec<ColorFactor> = Vec::new();
    for c in 1..=params.s() as Color {
        let keep: Vec<bool> = (0..g.vertex_count()).map(|v| spins.get(v) == Some(c)).collect();
        if !keep.iter().any(|&k| k) {
            continue;
        }
        let (sub, _, edge_map) = g.induced_subgraph(&keep);
        let fk = fk_exact(&sub, params.p, params.q * params.color_prob(c))?;
        factors.push(ColorFactor { fk, edge_map });
    }

    let mut worst: f64 = 0.0;
    for mask in 0..(1u64 << ne) {
        let exact = conditional.prob(mask as usize);
        let mut product = 1.0;
        if (0..ne).any(|e| diff_edges[e] && mask >> e & 1 == 1) {
            product = 0.0;
        } else {
            for factor in &factors {
                let mut sub_mask = 0u64;
                for (sub_e, &glob_e) in factor.edge_map.iter().enumerate() {
                    if mask >> glob_e & 1 == 1 {
                        sub_mask |= 1 << sub_e;
                    }
                }
                product *= factor.fk.prob(sub_mask);
            }
        }
        worst = worst.max((exact - product).abs());
    }
    Ok(worst)
}

/// Fixture for the two-sided partition factorization check: a vertex
/// bipartition `V1 / V2`, a forced-closed subset `B0` of the cut, and spins
/// on the endpoints of the remaining cut edges.
#[derive(Clone, Debug)]
pub struct PartitionFixture {
    /// Membership in `V1` per vertex.
    pub v1: Vec<bool>,
    /// Cut edges forced closed.
    pub b0: Vec<EdgeId>,
    /// Spins on `W1 ∪ W2` (endpoints of cut edges outside `b0`); must use
    /// only colors with `a_i = 1/q` and agree across each such edge.
    pub sigma: SpinConfig,
}

/// Max absolute deviation between the exact conditional law given
/// `{η ≡ 0 on B0, ξ = σ on W1 ∪ W2}` and the product of the two
/// independent half-graph laws times independent Bernoulli factors on the
/// unforced cut edges.
pub fn partition_factorization_deviation(
    g: &FiniteGraph,
    fixture: &PartitionFixture,
    params: &ModelParams,
) -> Result<f64> {
    let nv = g.vertex_count();
    let ne = g.edge_count();
    if fixture.v1.len() != nv || fixture.sigma.len() != nv {
        return Err(Error::InvalidParams("fixture sized to graph".into()));
    }
    let mut in_b0 = vec![false; ne];
    for &e in &fixture.b0 {
        let (x, y) = g.endpoints(e);
        if fixture.v1[x] == fixture.v1[y] {
            return Err(Error::InvalidParams(format!("edge {e} in B0 is not a cut edge")));
        }
        in_b0[e] = true;
    }
    // W1 ∪ W2 and hypothesis checks on σ.
    let mut in_w = vec![false; nv];
    for e in 0..ne {
        let (x, y) = g.endpoints(e);
        if fixture.v1[x] != fixture.v1[y] && !in_b0[e] {
            in_w[x] = true;
            in_w[y] = true;
            let (cx, cy) = (fixture.sigma.get(x), fixture.sigma.get(y));
            match (cx, cy) {
                (Some(a), Some(b)) if a == b => {}
                _ => {
                    return Err(Error::InvalidParams(
                        "spins must match across unforced cut edges".into(),
                    ))
                }
            }
        }
    }
    for (v, c) in fixture.sigma.defined() {
        if !in_w[v] {
            return Err(Error::InvalidParams(format!("σ defined off W1 ∪ W2 at vertex {v}")));
        }
        if !params.color_is_neutral(c) {
            return Err(Error::Regime(format!("σ uses color {c} with a_i != 1/q")));
        }
    }
    for v in 0..nv {
        if in_w[v] && fixture.sigma.get(v).is_none() {
            return Err(Error::InvalidParams(format!("σ undefined at W vertex {v}")));
        }
    }

    let joint = dac_exact(g, params)?;
    let keep = |code: usize, mask: u64| -> bool {
        for &e in &fixture.b0 {
            if mask >> e & 1 == 1 {
                return false;
            }
        }
        fixture.sigma.defined().all(|(v, c)| joint.color_at(code, v) == c)
    };
    let conditional = joint.dist.conditioned(|idx| {
        let code = idx >> ne;
        let mask = (idx & ((1 << ne) - 1)) as u64;
        keep(code, mask)
    });

    // Half-graph conditional laws.
    struct Half {
        dac: DacDistribution,
        vertex_map: Vec<VertexId>,
        edge_map: Vec<EdgeId>,
        cond: ExactDistribution,
    }
    let build_half = |side: bool| -> Result<Half> {
        let keep: Vec<bool> = fixture.v1.iter().map(|&m| m == side).collect();
        let (sub, vertex_map, edge_map) = g.induced_subgraph(&keep);
        let dac = dac_exact(&sub, params)?;
        let ne_sub = sub.edge_count();
        let sigma = &fixture.sigma;
        let cond = dac.dist.conditioned(|idx| {
            let code = idx >> ne_sub;
            vertex_map
                .iter()
                .enumerate()
                .all(|(sub_v, &glob_v)| match sigma.get(glob_v) {
                    Some(c) => dac.color_at(code, sub_v) == c,
                    None => true,
                })
        });
        Ok(Half { dac, vertex_map, edge_map, cond })
    };
    let half1 = build_half(true)?;
    let half2 = build_half(false)?;

    let free_cut: Vec<EdgeId> = (0..ne)
        .filter(|&e| {
            let (x, y) = g.endpoints(e);
            fixture.v1[x] != fixture.v1[y] && !in_b0[e]
        })
        .collect();

    let half_prob = |half: &Half, code: usize, mask: u64| -> f64 {
        let mut sub_code = 0usize;
        for &glob_v in half.vertex_map.iter().rev() {
            let digit = joint.color_at(code, glob_v) as usize - 1;
            sub_code = sub_code * params.s() + digit;
        }
        let mut sub_mask = 0u64;
        for (sub_e, &glob_e) in half.edge_map.iter().enumerate() {
            if mask >> glob_e & 1 == 1 {
                sub_mask |= 1 << sub_e;
            }
        }
        half.cond.prob(half.dac.index(sub_code, sub_mask))
    };

    let mut worst: f64 = 0.0;
    for idx in 0..conditional.log_weights.len() {
        let code = idx >> ne;
        let mask = (idx & ((1 << ne) - 1)) as u64;
        let exact = conditional.prob(idx);
        let mut product = if fixture.b0.iter().any(|&e| mask >> e & 1 == 1) {
            0.0
        } else {
            half_prob(&half1, code, mask) * half_prob(&half2, code, mask)
        };
        if product > 0.0 {
            for &e in &free_cut {
                product *= if mask >> e & 1 == 1 { params.p } else { 1.0 - params.p };
            }
        }
        worst = worst.max((exact - product).abs());
    }
    Ok(worst)
}

/// Increasing events over `{0,1}^E`, represented by their generating
/// antichain: `η ∈ A` iff `η ⊇ g` for some generator `g`.
#[derive(Clone, Debug)]
pub struct IncreasingEvent {
    pub generators: Vec<u64>,
}

impl IncreasingEvent {
    #[inline]
    pub fn contains(&self, mask: u64) -> bool {
        self.generators.iter().any(|&g| mask & g == g)
    }
}

/// All up-closed subsets of `{0,1}^E` for tiny `E`, as bitsets over the
/// `2^E` configurations.
fn all_monotone_events(ne: usize) -> Vec<u64> {
    assert!(ne <= 4);
    let configs = 1usize << ne;
    let mut ups: Vec<u64> = Vec::new();
    'sets: for set in 0u64..(1 << configs) {
        for c in 0..configs {
            if set >> c & 1 == 0 {
                continue;
            }
            for b in 0..ne {
                let superset = c | (1 << b);
                if set >> superset & 1 == 0 {
                    continue 'sets;
                }
            }
        }
        ups.push(set);
    }
    ups
}

/// Worst positive-association violation for the random-cluster measure
/// conditioned on a cylinder: the minimum over tested increasing event
/// pairs of `Φ(A1 ∩ A2 | B) - Φ(A1 | B) Φ(A2 | B)`. Exhaustive over all
/// monotone events for `|E| <= 4`, seeded antichain sampling above that.
pub fn fkg_check(
    g: &FiniteGraph,
    p: f64,
    q: f64,
    cylinder: &[(EdgeId, bool)],
    seed: u64,
    sampled_events: usize,
) -> Result<f64> {
    let ne = g.edge_count();
    if ne > FKG_MAX_EDGES {
        return Err(Error::SizeGuard(format!("fkg_check supports at most {FKG_MAX_EDGES} edges")));
    }
    if q < 1.0 {
        return Err(Error::Regime("positive association requires q >= 1".into()));
    }
    let fk = fk_exact(g, p, q)?;
    let keep = |mask: u64| cylinder.iter().all(|&(e, open)| (mask >> e & 1 == 1) == open);
    let cond = fk.conditioned(keep);
    let configs = 1usize << ne;
    let probs: Vec<f64> = (0..configs).map(|m| cond.prob(m as u64)).collect();

    // Event membership bitsets over configurations.
    let events: Vec<Vec<bool>> = if ne <= 4 {
        all_monotone_events(ne)
            .into_iter()
            .map(|set| (0..configs).map(|c| set >> c & 1 == 1).collect())
            .collect()
    } else {
        let mut rng = CounterRng::new(seed);
        (0..sampled_events.max(2))
            .map(|_| {
                let gens: Vec<u64> =
                    (0..1 + rng.next_u64() % 3).map(|_| rng.next_u64() & ((1 << ne) - 1)).collect();
                let ev = IncreasingEvent { generators: gens };
                (0..configs).map(|c| ev.contains(c as u64)).collect()
            })
            .collect()
    };

    let event_prob = |members: &[bool]| -> f64 {
        members.iter().zip(&probs).filter(|(&m, _)| m).map(|(_, &p)| p).sum()
    };
    let pair_prob = |a: &[bool], b: &[bool]| -> f64 {
        (0..configs).filter(|&c| a[c] && b[c]).map(|c| probs[c]).sum()
    };

    let mut worst = f64::INFINITY;
    for (i, a) in events.iter().enumerate() {
        let pa = event_prob(a);
        for b in events.iter().skip(i) {
            let pb = event_prob(b);
            let pab = pair_prob(a, b);
            worst = worst.min(pab - pa * pb);
        }
    }
    Ok(worst)
}

/// Exact ratio `P(ξ(v) = i | σ, ζ) / P(ξ(v) = j | σ, ζ)` by enumerating
/// the completions of the edges incident to `v`, together with whether the
/// two `i`-colored neighbors are connected in `ζ` off those edges.
///
/// Hypotheses checked: `v` has even degree `2d`, exactly two neighbors
/// carry color `i` and the remaining `2d - 2` carry color `j`, no two
/// `j`-colored neighbors are `ζ`-connected, and `ζ` is consistent with
/// `σ` (open edges join equal colors).
pub fn conditional_color_ratio(
    g: &FiniteGraph,
    v: VertexId,
    spins_off: &SpinConfig,
    zeta: &BondConfig,
    params: &ModelParams,
    i: Color,
    j: Color,
) -> Result<(f64, bool)> {
    if i == j {
        return Err(Error::InvalidParams("colors i, j must differ".into()));
    }
    let deg = g.degree(v);
    if deg < 4 || deg % 2 != 0 {
        return Err(Error::InvalidParams(format!(
            "vertex must have full even degree 2d >= 4, got {deg}"
        )));
    }
    if spins_off.get(v).is_some() {
        return Err(Error::InvalidParams("σ must leave the center vertex unset".into()));
    }
    let incident: Vec<EdgeId> = g.incident(v).iter().map(|&(e, _)| e).collect();
    let neighbors: Vec<VertexId> = g.incident(v).iter().map(|&(_, w)| w).collect();
    let i_neighbors: Vec<VertexId> =
        neighbors.iter().copied().filter(|&w| spins_off.get(w) == Some(i)).collect();
    let j_count = neighbors.iter().filter(|&&w| spins_off.get(w) == Some(j)).count();
    if i_neighbors.len() != 2 || j_count != deg - 2 {
        return Err(Error::InvalidParams(
            "need exactly two i-colored neighbors and j on the rest".into(),
        ));
    }
    // ζ consistency and neighbor-connectivity hypotheses, with the
    // incident edges removed from play.
    for e in 0..g.edge_count() {
        if incident.contains(&e) || !zeta.is_open(e) {
            continue;
        }
        let (x, y) = g.endpoints(e);
        let (cx, cy) = (spins_off.get(x), spins_off.get(y));
        if cx != cy || cx.is_none() {
            return Err(Error::InvalidParams(format!(
                "ζ opens edge {e} joining unequal or undefined spins"
            )));
        }
    }
    let mut scratch = crate::graph::ConnScratch::new(g.vertex_count());
    let passable = |e: EdgeId| zeta.is_open(e) && !incident.contains(&e);
    for (a_idx, &a) in neighbors.iter().enumerate() {
        for &b in neighbors.iter().skip(a_idx + 1) {
            if spins_off.get(a) == Some(j) && spins_off.get(b) == Some(j) {
                if scratch.connected(g, a, b, passable) {
                    return Err(Error::InvalidParams(
                        "two j-colored neighbors are ζ-connected".into(),
                    ));
                }
            }
        }
    }
    let connected = scratch.connected(g, i_neighbors[0], i_neighbors[1], passable);

    let mut log_totals = [f64::NEG_INFINITY; 2];
    let mut spins = spins_off.clone();
    for (slot, &b) in [i, j].iter().enumerate() {
        spins.set(v, b);
        let mut lws = Vec::with_capacity(1 << deg);
        for completion in 0u64..(1 << deg) {
            let mut bonds = zeta.clone();
            for (bit, &e) in incident.iter().enumerate() {
                bonds.set(e, completion >> bit & 1 == 1);
            }
            lws.push(dac_joint_log_weight(g, &spins, &bonds, params)?);
        }
        log_totals[slot] = log_sum_exp_tree(&lws);
    }
    spins.clear(v);
    Ok(((log_totals[0] - log_totals[1]).exp(), connected))
}

/// Exact minimum over non-boundary vertices `v`, colors `m` and spin
/// configurations `σ` off `v` of `P(ξ(v) = m | ξ off v = σ)`.
pub fn nonnull_floor(g: &FiniteGraph, params: &ModelParams) -> Result<f64> {
    let joint = dac_exact(g, params)?;
    let s = params.s();
    let nv = g.vertex_count();
    // Total spin-configuration probabilities.
    let spin_probs = joint.spin_marginals();
    let interior: Vec<usize> = (0..nv).filter(|&v| !g.is_boundary(v)).collect();
    let mut floor = f64::INFINITY;
    for &v in &interior {
        let stride = s.pow(v as u32);
        // Bucket spin codes by the configuration off v.
        let rest_total = s.pow((nv - 1) as u32);
        let mut bucket = vec![0.0f64; rest_total * s];
        for (code, &pr) in spin_probs.iter().enumerate() {
            let digit = code / stride % s;
            let rest = code / (stride * s) * stride + code % stride;
            bucket[rest * s + digit] += pr;
        }
        for rest in 0..rest_total {
            let total: f64 = bucket[rest * s..(rest + 1) * s].iter().sum();
            if total <= 0.0 {
                continue;
            }
            for m in 0..s {
                floor = floor.min(bucket[rest * s + m] / total);
            }
        }
    }
    Ok(floor)
}
