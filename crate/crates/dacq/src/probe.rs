//! Numerical probes of quasilocality: the counterexample spin
//! configurations around the origin, the single-site ratio constants, the
//! connection-probability estimates that feed the non-quasilocality lower
//! bound, and the direct conditional-gap sampler.
//!
//! The counterexample family fixes a distinguished color `ℓ` and a second
//! color `m` and builds, for each halo radius `k`, two spin configurations
//! off the origin that agree on `Λ_k \ {0}` but differ beyond: one turns
//! all of `Λ_{k+1} \ Λ_k` into an `m`-ring. Conditioned on the origin
//! taking color `ℓ` or `m`, the ratio of the two origin probabilities
//! depends only on whether the two `ℓ`-colored neighbors `u1, u2` are
//! connected off the origin — and that connection event is exactly what
//! the far ring controls. The resulting lower bound on the conditional
//! gap is
//!
//! ```text
//! 2 |P(ℓ|L) - P(ℓ|M)| + |P(m|L) - P(m|M)|
//!     >= delta * |c1/(c1+1) - c2/(c2+1)| * P(A | O ∩ L)
//! ```
//!
//! with `delta = 2 ε` from the uniform nonnullness floor and `A` the
//! off-origin connection event between `u1` and `u2`.

use rayon::prelude::*;

use crate::coloring::{find_closed_spin_barrier, sample_dac, WindowGibbs};
use crate::error::{Error, Result};
use crate::graph::{
    build_box, in_lambda, ConnScratch, EdgeId, FiniteGraph, SpinConfig, VertexId,
};
use crate::mcmc::{run_conditioned_chain, Estimate, RunSpec};
use crate::params::{Color, ModelParams};
use crate::rng::{indexed_uniform, CounterRng};

/// The auxiliary spin configurations around the origin for one halo
/// radius `k`, materialized on a box graph.
#[derive(Clone, Debug)]
pub struct CounterexampleFamily {
    pub d: usize,
    pub k: usize,
    /// Distinguished color (minimal non-neutral probability).
    pub ell: Color,
    /// Second color, the smallest index different from `ell`.
    pub m: Color,
    /// The base pattern: `m` on the first-coordinate walls, `ell`
    /// elsewhere; defined off the origin.
    pub sigma_star: SpinConfig,
    /// `σ*` inside `Λ_k`, `ell` outside; defined off the origin.
    pub sigma_k_ell: SpinConfig,
    /// Same, with the ring `Λ_{k+1} \ Λ_k` recolored `m`.
    pub sigma_k_m: SpinConfig,
    pub origin: VertexId,
    /// Neighbors of the origin: `u[0], u[1]` on the ±first axis (color
    /// `ell` under `σ*`), the rest color `m`.
    pub u: Vec<VertexId>,
    /// Edges from the origin to `u[i]`.
    pub e: Vec<EdgeId>,
    /// Edges incident to the origin or to an `m`-colored vertex of
    /// `σ_k_ell`.
    pub e_dk: Vec<EdgeId>,
}

fn sigma_star_color(coords: &[i64], ell: Color, m: Color) -> Color {
    let tail: i64 = coords[1..].iter().map(|x| x.abs()).sum();
    if (coords[0] == 0 && tail == 1) || (coords[0] == -1 && tail > 1) {
        m
    } else {
        ell
    }
}

/// Builds the family for an explicit color pair, without the regime check
/// on the parameters (used for the Potts null test, where no distinguished
/// color exists and any two colors serve).
pub fn counterexample_with_colors(
    graph: &FiniteGraph,
    k: usize,
    ell: Color,
    m: Color,
) -> Result<CounterexampleFamily> {
    let d = graph.dimension();
    if d < 2 {
        return Err(Error::InvalidParams("counterexample needs d >= 2".into()));
    }
    if k < 1 {
        return Err(Error::InvalidParams("halo radius k must be >= 1".into()));
    }
    let n = graph
        .box_radius()
        .ok_or_else(|| Error::InvalidParams("counterexample needs a box graph".into()))?;
    if n < k + 2 {
        return Err(Error::InvalidParams(format!(
            "box radius {n} too small for k = {k} (need n >= k + 2)"
        )));
    }
    if ell == m {
        return Err(Error::InvalidParams("colors must differ".into()));
    }
    let origin = graph.vertex_at(&vec![0; d]).expect("box contains the origin");

    let nv = graph.vertex_count();
    let mut sigma_star = SpinConfig::empty(nv);
    let mut sigma_k_ell = SpinConfig::empty(nv);
    let mut sigma_k_m = SpinConfig::empty(nv);
    for v in 0..nv {
        if v == origin {
            continue;
        }
        let coords = graph.coords(v);
        let star = sigma_star_color(coords, ell, m);
        sigma_star.set(v, star);
        let kl = if in_lambda(coords, k) { star } else { ell };
        sigma_k_ell.set(v, kl);
        let km = if in_lambda(coords, k + 1) && !in_lambda(coords, k) { m } else { kl };
        sigma_k_m.set(v, km);
    }

    // Neighbors ordered +e1, -e1, +e2, -e2, ...
    let mut u = Vec::with_capacity(2 * d);
    let mut e = Vec::with_capacity(2 * d);
    for axis in 0..d {
        for sign in [1i64, -1] {
            let mut c = vec![0i64; d];
            c[axis] = sign;
            let v = graph.vertex_at(&c).expect("neighbor inside box");
            u.push(v);
            e.push(graph.edge_between(origin, v).expect("lattice edge"));
        }
    }
    let e_dk: Vec<EdgeId> = (0..graph.edge_count())
        .filter(|&edge| {
            let (x, y) = graph.endpoints(edge);
            x == origin
                || y == origin
                || sigma_k_ell.get(x) == Some(m)
                || sigma_k_ell.get(y) == Some(m)
        })
        .collect();

    Ok(CounterexampleFamily {
        d,
        k,
        ell,
        m,
        sigma_star,
        sigma_k_ell,
        sigma_k_m,
        origin,
        u,
        e,
        e_dk,
    })
}

/// The color pair used by the probes: the distinguished color and the
/// smallest other color. Falls back to `(1, 2)` in the Potts case, where
/// the choice is immaterial (the ratio constants coincide).
pub fn probe_color_pair(params: &ModelParams) -> (Color, Color) {
    match params.distinguished_color() {
        Some(ell) => {
            let m = (1..=params.s() as Color).find(|&c| c != ell).expect("s >= 2");
            (ell, m)
        }
        None => (1, 2),
    }
}

/// Builds the counterexample family for the model parameters; rejects the
/// Potts case, where no distinguished color exists.
pub fn build_counterexample(
    graph: &FiniteGraph,
    k: usize,
    params: &ModelParams,
) -> Result<CounterexampleFamily> {
    let ell = params
        .distinguished_color()
        .ok_or_else(|| Error::Regime("Potts case: counterexample undefined".into()))?;
    let m = (1..=params.s() as Color).find(|&c| c != ell).expect("s >= 2");
    counterexample_with_colors(graph, k, ell, m)
}

/// Closed-form single-site ratio constants `(c1, c2)` for colors `(i, j)`
/// in dimension `d`: the conditional probability ratio of the center
/// taking color `i` versus `j`, in the connected (`c1`) and disconnected
/// (`c2`) cases of the two `i`-colored neighbors.
pub fn ratio_constants(params: &ModelParams, d: usize, i: Color, j: Color) -> Result<(f64, f64)> {
    if i == j || i == 0 || j == 0 || i as usize > params.s() || j as usize > params.s() {
        return Err(Error::InvalidParams("need two distinct valid colors".into()));
    }
    if d < 1 {
        return Err(Error::InvalidParams("d must be >= 1".into()));
    }
    let p = params.p;
    if p >= 1.0 {
        return Err(Error::InvalidParams("ratio constants need p < 1".into()));
    }
    let qa_i = params.q * params.color_prob(i);
    let qa_j = params.q * params.color_prob(j);
    let one_m = 1.0 - p;
    let n1 = p * p * qa_i + 2.0 * p * one_m * qa_i + one_m * one_m * qa_i * qa_i;
    let n2 = p * p + 2.0 * p * one_m * qa_i + one_m * one_m * qa_i * qa_i;
    let denom = one_m * one_m * qa_i * qa_i;
    let ratio = params.color_prob(i) / params.color_prob(j);
    let tail = (one_m * qa_j / (p + one_m * qa_j)).powi(2 * d as i32 - 2);
    Ok((n1 / denom * ratio * tail, n2 / denom * ratio * tail))
}

/// The edge density `p̃` of the homogeneous Bernoulli lower bound: the
/// smaller of the two single-edge conditional values in a `q a_ℓ`
/// cluster, `p/(p + (1-p) q a_ℓ)` when `q a_ℓ >= 1` and `p` otherwise.
/// In the Potts case both branches coincide at `p` (every `q a_i = 1`).
pub fn bernoulli_lower_density(params: &ModelParams) -> f64 {
    let (ell, _) = probe_color_pair(params);
    let qa = params.q * params.color_prob(ell);
    if qa >= 1.0 {
        params.p / (params.p + (1.0 - params.p) * qa)
    } else {
        params.p
    }
}

/// Monte Carlo estimate of the connection event `A` (the two first-axis
/// neighbors of the origin joined by an open path avoiding the origin's
/// edges) under independent Bernoulli(`p̃`) bonds with the halo edge set
/// forced closed. This stochastically lower-bounds the conditional
/// divide-and-color law, so its value feeds the gap bound directly.
pub fn estimate_connection_lower(
    params: &ModelParams,
    d: usize,
    k: usize,
    n: usize,
    seed: u64,
    replicas: usize,
) -> Result<Estimate> {
    let graph = build_box(d, n)?;
    let (ell, m) = probe_color_pair(params);
    let family = counterexample_with_colors(&graph, k, ell, m)?;
    let p_tilde = bernoulli_lower_density(params);
    let mut forced_closed = vec![false; graph.edge_count()];
    for &e in &family.e_dk {
        forced_closed[e] = true;
    }
    let (u1, u2) = (family.u[0], family.u[1]);
    let hits: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map_init(
            || ConnScratch::new(graph.vertex_count()),
            |scratch, r| {
                let open = |e: EdgeId| {
                    !forced_closed[e] && indexed_uniform(seed, r as u64, e as u64) < p_tilde
                };
                scratch.connected(&graph, u1, u2, open) as u8 as f64
            },
        )
        .collect();
    let mean = hits.iter().sum::<f64>() / replicas.max(1) as f64;
    let se = (mean * (1.0 - mean) / replicas.max(1) as f64).sqrt();
    Ok(Estimate { value: mean, se })
}

/// The same connection probability under the free random-cluster measure
/// at `(p, q a_ℓ)` conditioned on the halo edges being closed, sampled by
/// the conditioned heat-bath chain. Requires the `a_ℓ > 1/q` regime.
pub fn estimate_connection_rc(
    params: &ModelParams,
    d: usize,
    k: usize,
    n: usize,
    seed: u64,
    replicas: usize,
    chain: &RunSpec,
) -> Result<Estimate> {
    let ell = params
        .distinguished_color()
        .ok_or_else(|| Error::Regime("Potts case: no distinguished color".into()))?;
    let a_ell = params.color_prob(ell);
    if a_ell <= 1.0 / params.q {
        return Err(Error::Regime("random-cluster comparison needs a_ℓ > 1/q".into()));
    }
    let graph = build_box(d, n)?;
    let family = build_counterexample(&graph, k, params)?;
    let (u1, u2) = (family.u[0], family.u[1]);
    let q_eff = params.q * a_ell;
    let series: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let rep_seed = CounterRng::new(seed).derive(r as u64).next_u64();
            let (samples, _) = run_conditioned_chain(
                &graph,
                params.p,
                q_eff,
                &family.e_dk,
                &[],
                rep_seed,
                chain,
            )
            .expect("forced sets disjoint");
            let mut scratch = ConnScratch::new(graph.vertex_count());
            samples
                .iter()
                .map(|bonds| scratch.connected(&graph, u1, u2, |e| bonds.is_open(e)) as u8 as f64)
                .collect()
        })
        .collect();
    let flat: Vec<f64> = series.concat();
    Ok(Estimate::from_series(&flat))
}

/// Direct conditional-gap estimates at the origin under the two halo
/// configurations.
#[derive(Clone, Copy, Debug)]
pub struct DirectGaps {
    pub p_ell_given_l: Estimate,
    pub p_ell_given_m: Estimate,
    pub p_m_given_l: Estimate,
    pub p_m_given_m: Estimate,
    /// `|P(ℓ|L) - P(ℓ|M)|` and `|P(m|L) - P(m|M)|`.
    pub gap_ell: Estimate,
    pub gap_m: Estimate,
}

/// Runs the alternating Gibbs sampler for the origin spin under both
/// `σ_k_ell` and `σ_k_m` and returns the conditional-probability gaps.
/// In the Potts case the colors default to `(1, 2)` and the true gaps
/// vanish.
pub fn direct_gap_gibbs(
    params: &ModelParams,
    d: usize,
    k: usize,
    n: usize,
    seed: u64,
    sweeps: usize,
) -> Result<DirectGaps> {
    let graph = build_box(d, n)?;
    let (ell, m) = probe_color_pair(params);
    let family = counterexample_with_colors(&graph, k, ell, m)?;
    let burn = (sweeps / 5).max(20);
    let estimates: Vec<(Estimate, Estimate)> = [&family.sigma_k_ell, &family.sigma_k_m]
        .into_par_iter()
        .enumerate()
        .map(|(idx, outside)| {
            let gibbs_seed = CounterRng::new(seed).derive(idx as u64).next_u64();
            let mut gibbs =
                WindowGibbs::new(&graph, params, outside, &[family.origin], gibbs_seed)
                    .expect("valid window setup");
            for _ in 0..burn {
                gibbs.step();
            }
            let mut hits_ell = Vec::with_capacity(sweeps);
            let mut hits_m = Vec::with_capacity(sweeps);
            for _ in 0..sweeps {
                gibbs.step();
                let c = gibbs.window_spins()[0];
                hits_ell.push((c == ell) as u8 as f64);
                hits_m.push((c == m) as u8 as f64);
            }
            (Estimate::from_series(&hits_ell), Estimate::from_series(&hits_m))
        })
        .collect();
    let (p_ell_given_l, p_m_given_l) = estimates[0];
    let (p_ell_given_m, p_m_given_m) = estimates[1];
    let gap = |a: Estimate, b: Estimate| Estimate {
        value: (a.value - b.value).abs(),
        se: (a.se * a.se + b.se * b.se).sqrt(),
    };
    Ok(DirectGaps {
        p_ell_given_l,
        p_ell_given_m,
        p_m_given_l,
        p_m_given_m,
        gap_ell: gap(p_ell_given_l, p_ell_given_m),
        gap_m: gap(p_m_given_l, p_m_given_m),
    })
}

/// One row of the quasilocality probe: estimates and the assembled lower
/// bound for a single halo radius `k`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct GapReport {
    pub k: usize,
    pub p_a_lower: Estimate,
    pub p_a_rc: Option<Estimate>,
    pub c1: f64,
    pub c2: f64,
    /// `2 ε`, the instantiated uniform-nonnullness constant.
    pub delta: f64,
    /// `delta * |c1/(c1+1) - c2/(c2+1)| * P(A)`, using the Bernoulli
    /// lower estimate for `P(A)`.
    pub bound: Estimate,
    pub gap_ell: Option<Estimate>,
    pub gap_m: Option<Estimate>,
}

/// Assembles the gap lower bound from its ingredients.
pub fn assemble_gap_bound(
    params: &ModelParams,
    d: usize,
    k: usize,
    p_a_lower: Estimate,
) -> Result<GapReport> {
    let (ell, m) = probe_color_pair(params);
    let (c1, c2) = ratio_constants(params, d, ell, m)?;
    let delta = 2.0 * params.nonnull_floor_bound(d);
    let factor = delta * (c1 / (c1 + 1.0) - c2 / (c2 + 1.0)).abs();
    Ok(GapReport {
        k,
        p_a_lower,
        p_a_rc: None,
        c1,
        c2,
        delta,
        bound: Estimate { value: factor * p_a_lower.value, se: factor * p_a_lower.se },
        gap_ell: None,
        gap_m: None,
    })
}

/// Survey of closed spin barriers around a window under the sampled
/// divide-and-color measure: per-replica containment radius, or a failure
/// when the spin cluster through `∂W` reaches the box boundary.
#[derive(Clone, Debug)]
pub struct BarrierSurvey {
    /// Containment radius per replica; `None` marks a failure.
    pub radii: Vec<Option<i64>>,
}

impl BarrierSurvey {
    pub fn failure_rate(&self) -> f64 {
        if self.radii.is_empty() {
            return f64::NAN;
        }
        self.radii.iter().filter(|r| r.is_none()).count() as f64 / self.radii.len() as f64
    }

    /// Sorted (radius, count) pairs over the successful replicas.
    pub fn histogram(&self) -> Vec<(i64, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for r in self.radii.iter().flatten() {
            *counts.entry(*r).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }
}

pub fn barrier_radius_survey(
    graph: &FiniteGraph,
    params: &ModelParams,
    w: &[VertexId],
    seed: u64,
    replicas: usize,
    sweeps: usize,
) -> Result<BarrierSurvey> {
    if w.iter().any(|&v| graph.is_boundary(v)) {
        return Err(Error::InvalidParams("window must avoid the box boundary".into()));
    }
    let radii: Vec<Option<i64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let rep_seed = CounterRng::new(seed).derive(r as u64).next_u64();
            let sample = sample_dac(graph, params, crate::mcmc::Boundary::Free, rep_seed, sweeps);
            find_closed_spin_barrier(graph, &sample.spins, w)
                .map(|barrier| barrier.interior_radius(graph))
        })
        .collect();
    Ok(BarrierSurvey { radii })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BondConfig;
    use crate::oracle::dac_exact;
    use approx::assert_abs_diff_eq;

    fn skew_params(p: f64) -> ModelParams {
        ModelParams::new(p, 1.0, vec![0.3, 0.7]).unwrap()
    }

    #[test]
    fn counterexample_shape() {
        let g = build_box(2, 4).unwrap();
        let params = skew_params(0.5);
        let fam = build_counterexample(&g, 2, &params).unwrap();
        assert_eq!((fam.ell, fam.m), (1, 2));
        // σ* at (0, ±1) is m; at (±1, 0) it is ℓ.
        let v = g.vertex_at(&[0, 1]).unwrap();
        assert_eq!(fam.sigma_star.get(v), Some(fam.m));
        let v = g.vertex_at(&[1, 0]).unwrap();
        assert_eq!(fam.sigma_star.get(v), Some(fam.ell));
        // The wall at x1 = -1 with tail norm > 1.
        let v = g.vertex_at(&[-1, 3]).unwrap();
        assert_eq!(fam.sigma_star.get(v), Some(fam.m));
        // σ_k_ell is ℓ outside Λ_k.
        let v = g.vertex_at(&[3, 3]).unwrap();
        assert_eq!(fam.sigma_k_ell.get(v), Some(fam.ell));
        // σ_k_m is m exactly on Λ_{k+1} \ Λ_k.
        let v = g.vertex_at(&[3, 0]).unwrap();
        assert_eq!(fam.sigma_k_m.get(v), Some(fam.m));
        let v = g.vertex_at(&[4, 0]).unwrap();
        assert_eq!(fam.sigma_k_m.get(v), Some(fam.ell));
        // The two configurations agree on Λ_k \ {0}.
        for v in 0..g.vertex_count() {
            if v != fam.origin && in_lambda(g.coords(v), fam.k) {
                assert_eq!(fam.sigma_k_ell.get(v), fam.sigma_k_m.get(v));
            }
        }
        // Origin unset in all three.
        assert_eq!(fam.sigma_star.get(fam.origin), None);
        // Potts parameters are rejected.
        let potts = ModelParams::new(0.5, 2.0, vec![0.5, 0.5]).unwrap();
        assert!(build_counterexample(&g, 2, &potts).is_err());
    }

    #[test]
    fn halo_edges_match_definition() {
        let g = build_box(2, 4).unwrap();
        let params = skew_params(0.5);
        let fam = build_counterexample(&g, 2, &params).unwrap();
        for &e in &fam.e {
            assert!(fam.e_dk.contains(&e), "origin edges belong to the halo set");
        }
        for e in 0..g.edge_count() {
            let (x, y) = g.endpoints(e);
            let expected = x == fam.origin
                || y == fam.origin
                || fam.sigma_k_ell.get(x) == Some(fam.m)
                || fam.sigma_k_ell.get(y) == Some(fam.m);
            assert_eq!(fam.e_dk.contains(&e), expected);
        }
    }

    #[test]
    fn ratio_constants_reference_value() {
        // d=2, p=1/2, q=1, a_i = a_j = 1/2 gives (7/9, 1).
        let params = ModelParams::new(0.5, 1.0, vec![0.5, 0.5]).unwrap();
        let (c1, c2) = ratio_constants(&params, 2, 1, 2).unwrap();
        assert_abs_diff_eq!(c1, 7.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ratio_constants_trichotomy() {
        // sign(c1 - c2) == sign(q a_i - 1) over a random parameter sweep.
        let mut rng = CounterRng::new(31);
        for _ in 0..10_000 {
            let p = 0.05 + 0.9 * rng.next_f64();
            let q = 0.2 + 4.0 * rng.next_f64();
            let a1 = 0.05 + 0.9 * rng.next_f64();
            let Ok(params) = ModelParams::new(p, q, vec![a1, 1.0 - a1]) else {
                continue;
            };
            let (c1, c2) = ratio_constants(&params, 2, 1, 2).unwrap();
            let qa = q * a1;
            if (qa - 1.0).abs() < 1e-9 {
                continue;
            }
            assert_eq!(c1 > c2, qa > 1.0, "p={p} q={q} a1={a1}: c1={c1} c2={c2}");
        }
    }

    #[test]
    fn ratio_constants_p_zero() {
        let params = ModelParams::new(0.0, 2.0, vec![0.3, 0.7]).unwrap();
        let (c1, c2) = ratio_constants(&params, 2, 1, 2).unwrap();
        assert_abs_diff_eq!(c1, 0.3 / 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(c2, 0.3 / 0.7, epsilon = 1e-12);
    }

    #[test]
    fn ratio_constants_match_oracle() {
        // Exact-oracle ratio on a 5x5 patch with interior center: the
        // connected case (an i-colored path around the center) gives c1,
        // the all-closed context gives c2.
        let g = FiniteGraph::grid(&[5, 5]).unwrap();
        let center = g.vertex_at(&[2, 2]).unwrap();
        let params = ModelParams::new(0.5, 1.0, vec![0.5, 0.5]).unwrap();
        let (i, j) = (1, 2);
        let mut spins = SpinConfig::empty(g.vertex_count());
        let path: Vec<VertexId> = [[1i64, 2], [1, 1], [1, 0], [2, 0], [3, 0], [3, 1], [3, 2]]
            .iter()
            .map(|c| g.vertex_at(&c[..]).unwrap())
            .collect();
        for v in 0..g.vertex_count() {
            if v == center {
                continue;
            }
            spins.set(v, if path.contains(&v) { i } else { j });
        }
        // Disconnected context: everything closed.
        let zeta = BondConfig::all_closed(g.edge_count());
        let (ratio, connected) =
            crate::oracle::conditional_color_ratio(&g, center, &spins, &zeta, &params, i, j)
                .unwrap();
        assert!(!connected);
        let (_, c2) = ratio_constants(&params, 2, i, j).unwrap();
        assert_abs_diff_eq!(ratio, c2, epsilon = 1e-10);

        // Connected context: open the path edges.
        let mut zeta = BondConfig::all_closed(g.edge_count());
        for pair in path.windows(2) {
            zeta.set(g.edge_between(pair[0], pair[1]).unwrap(), true);
        }
        let (ratio, connected) =
            crate::oracle::conditional_color_ratio(&g, center, &spins, &zeta, &params, i, j)
                .unwrap();
        assert!(connected);
        let (c1, _) = ratio_constants(&params, 2, i, j).unwrap();
        assert_abs_diff_eq!(ratio, c1, epsilon = 1e-10);
    }

    #[test]
    fn bernoulli_density_regimes() {
        // q a_ℓ < 1: the lower density is p itself.
        let params = skew_params(0.4);
        assert_abs_diff_eq!(bernoulli_lower_density(&params), 0.4, epsilon = 1e-15);
        // q a_ℓ > 1: the isolated-edge conditional.
        let params = ModelParams::new(0.4, 3.0, vec![0.4, 0.6]).unwrap();
        assert_abs_diff_eq!(
            bernoulli_lower_density(&params),
            0.4 / (0.4 + 0.6 * 1.2),
            epsilon = 1e-15
        );
        // Potts: both branches coincide at p.
        let potts = ModelParams::new(0.4, 2.0, vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(bernoulli_lower_density(&potts), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn connection_lower_extremes() {
        let params = skew_params(0.0);
        let est = estimate_connection_lower(&params, 2, 1, 3, 1, 200).unwrap();
        assert_eq!(est.value, 0.0);
        // Dense phase: strictly positive with modest replicas.
        let params = skew_params(0.85);
        let est = estimate_connection_lower(&params, 2, 2, 4, 1, 400).unwrap();
        assert!(est.value > 0.2, "supercritical connection estimate {}", est.value);
    }

    /// Exact verification of the full inequality chain on a gadget whose
    /// joint law is enumerable: center with four neighbors and one
    /// two-edge bypass between the first-axis neighbors, whose color
    /// plays the role of the far halo.
    #[test]
    fn exact_gap_chain_on_gadget() {
        let g = FiniteGraph::from_parts(
            vec![
                vec![0, 0],  // center
                vec![1, 0],  // u1
                vec![-1, 0], // u2
                vec![0, 1],  // u3
                vec![0, -1], // u4
                vec![2, 1],  // w, bypass vertex
            ],
            vec![(0, 1), (0, 2), (0, 3), (0, 4), (1, 5), (2, 5)],
            vec![],
        )
        .unwrap();
        let center = g.vertex_at(&[0, 0]).unwrap();
        let u1 = g.vertex_at(&[1, 0]).unwrap();
        let u2 = g.vertex_at(&[-1, 0]).unwrap();
        let u3 = g.vertex_at(&[0, 1]).unwrap();
        let u4 = g.vertex_at(&[0, -1]).unwrap();
        let w = g.vertex_at(&[2, 1]).unwrap();
        let bypass = [g.edge_between(u1, w).unwrap(), g.edge_between(u2, w).unwrap()];

        let params = ModelParams::new(0.55, 1.0, vec![0.3, 0.7]).unwrap();
        let (ell, m) = probe_color_pair(&params);
        let joint = dac_exact(&g, &params).unwrap();

        let mut sigma_l = SpinConfig::empty(g.vertex_count());
        for (&v, &c) in [u1, u2, u3, u4, w].iter().zip([ell, ell, m, m, ell].iter()) {
            sigma_l.set(v, c);
        }
        let mut sigma_m = sigma_l.clone();
        sigma_m.set(w, m);

        let cond_l = joint.conditional_color_at(center, &sigma_l).unwrap();
        let cond_m = joint.conditional_color_at(center, &sigma_m).unwrap();
        let p_ell_l = cond_l[ell as usize - 1];
        let p_ell_m = cond_m[ell as usize - 1];
        let p_m_l = cond_l[m as usize - 1];
        let p_m_m = cond_m[m as usize - 1];

        // P(A | O ∩ L) and the conditional split of P(ℓ | O ∩ L): exact
        // sums over the joint table.
        let ne = g.edge_count();
        let mut num_a = 0.0;
        let mut num_o = 0.0;
        let mut num_ell_a = 0.0;
        let mut num_ell_ac = 0.0;
        let mut num_ac = 0.0;
        for code in 0..params.s().pow(g.vertex_count() as u32) {
            let matches_l = sigma_l.defined().all(|(v, c)| joint.color_at(code, v) == c);
            if !matches_l {
                continue;
            }
            let c0 = joint.color_at(code, center);
            if c0 != ell && c0 != m {
                continue;
            }
            for mask in 0..(1u64 << ne) {
                let pr = joint.prob(code, mask);
                if pr == 0.0 {
                    continue;
                }
                let a_holds = bypass.iter().all(|&e| mask >> e & 1 == 1);
                num_o += pr;
                if a_holds {
                    num_a += pr;
                    if c0 == ell {
                        num_ell_a += pr;
                    }
                } else {
                    num_ac += pr;
                    if c0 == ell {
                        num_ell_ac += pr;
                    }
                }
            }
        }
        let p_a_given_ol = num_a / num_o;
        let (c1, c2) = ratio_constants(&params, 2, ell, m).unwrap();
        // Conditional identities behind the bound.
        assert_abs_diff_eq!(num_ell_a / num_a, c1 / (c1 + 1.0), epsilon = 1e-10);
        assert_abs_diff_eq!(num_ell_ac / num_ac, c2 / (c2 + 1.0), epsilon = 1e-10);

        // The far color (at w) cannot join u1 to u2 under M.
        let mut num_a_m = 0.0;
        let mut num_o_m = 0.0;
        for code in 0..params.s().pow(g.vertex_count() as u32) {
            if !sigma_m.defined().all(|(v, c)| joint.color_at(code, v) == c) {
                continue;
            }
            let c0 = joint.color_at(code, center);
            if c0 != ell && c0 != m {
                continue;
            }
            for mask in 0..(1u64 << ne) {
                let pr = joint.prob(code, mask);
                if pr == 0.0 {
                    continue;
                }
                num_o_m += pr;
                if bypass.iter().all(|&e| mask >> e & 1 == 1) {
                    num_a_m += pr;
                }
            }
        }
        assert!(num_a_m / num_o_m < 1e-14, "A is impossible under the far-m configuration");

        // The assembled chain, exactly.
        let delta = 2.0 * params.nonnull_floor_bound(2);
        let lhs = 2.0 * (p_ell_l - p_ell_m).abs() + (p_m_l - p_m_m).abs();
        let rhs = delta * (c1 / (c1 + 1.0) - c2 / (c2 + 1.0)).abs() * p_a_given_ol;
        assert!(lhs >= rhs - 1e-12, "gap chain violated: lhs {lhs} < rhs {rhs}");
        assert!(rhs > 0.0, "bound is strictly positive here");
    }

    #[test]
    fn gibbs_gap_estimates_sane() {
        let params = skew_params(0.5);
        let gaps = direct_gap_gibbs(&params, 2, 1, 3, 7, 2000).unwrap();
        for est in
            [gaps.p_ell_given_l, gaps.p_ell_given_m, gaps.p_m_given_l, gaps.p_m_given_m]
        {
            assert!((0.0..=1.0).contains(&est.value));
            assert!(est.se.is_finite());
        }
        assert!(gaps.p_ell_given_l.value + gaps.p_m_given_l.value <= 1.0 + 1e-9);
    }

    #[test]
    fn assemble_bound_potts_is_zero() {
        let potts = ModelParams::new(0.5, 2.0, vec![0.5, 0.5]).unwrap();
        let report = assemble_gap_bound(&potts, 2, 3, Estimate { value: 0.8, se: 0.01 }).unwrap();
        assert_abs_diff_eq!(report.bound.value, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(report.c1, report.c2, epsilon = 1e-12);
    }

    #[test]
    fn barrier_survey_runs() {
        let g = build_box(2, 4).unwrap();
        let origin = g.vertex_at(&[0, 0]).unwrap();
        // Small p, balanced colors: barriers are common.
        let params = ModelParams::new(0.1, 1.0, vec![0.5, 0.5]).unwrap();
        let survey = barrier_radius_survey(&g, &params, &[origin], 5, 40, 30).unwrap();
        assert_eq!(survey.radii.len(), 40);
        assert!(survey.failure_rate() < 1.0);
        assert!(!survey.histogram().is_empty());
    }
}
