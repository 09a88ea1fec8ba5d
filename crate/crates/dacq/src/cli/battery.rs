//! The oracle verification battery behind the `verify` command: every
//! closed-form contract in the crate checked against exhaustive
//! enumeration on the tiny-graph corpus.

use serde::Serialize;

use crate::error::Result;
use crate::graph::{connected_excluding, BondConfig, FiniteGraph, SpinConfig, VertexId};
use crate::oracle;
use crate::params::{Color, ModelParams};
use crate::probe;
use crate::rng::CounterRng;

/// One battery check: its worst observed deviation against the declared
/// tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(name: &str, worst: f64, tolerance: f64) -> Self {
        CheckResult { name: name.to_string(), worst, tolerance, pass: worst <= tolerance }
    }
}

/// Named tiny graphs (at most 9 edges) used by the single-edge
/// conditional reproduction check.
pub fn corpus() -> Vec<(&'static str, FiniteGraph)> {
    let line = |n: usize| -> FiniteGraph {
        FiniteGraph::from_parts(
            (0..n).map(|i| vec![i as i64]).collect(),
            (0..n - 1).map(|i| (i, i + 1)).collect(),
            vec![],
        )
        .unwrap()
    };
    let k2 = line(2);
    let path3 = line(3);
    let path5 = line(5);
    let triangle = FiniteGraph::from_parts(
        vec![vec![0], vec![1], vec![2]],
        vec![(0, 1), (1, 2), (0, 2)],
        vec![],
    )
    .unwrap();
    let star4 = FiniteGraph::from_parts(
        (0..5).map(|i| vec![i as i64]).collect(),
        vec![(0, 1), (0, 2), (0, 3), (0, 4)],
        vec![],
    )
    .unwrap();
    let square = FiniteGraph::grid(&[2, 2]).unwrap();
    let square_pendant = FiniteGraph::from_parts(
        vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1], vec![2, 0]],
        vec![(0, 1), (0, 2), (1, 3), (2, 3), (2, 4)],
        vec![],
    )
    .unwrap();
    let k4 = FiniteGraph::from_parts(
        (0..4).map(|i| vec![i as i64]).collect(),
        vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        vec![],
    )
    .unwrap();
    let grid23 = FiniteGraph::grid(&[3, 2]).unwrap();
    let k33 = FiniteGraph::from_parts(
        (0..6).map(|i| vec![i as i64]).collect(),
        vec![(0, 3), (0, 4), (0, 5), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)],
        vec![],
    )
    .unwrap();
    vec![
        ("k2", k2),
        ("path3", path3),
        ("triangle", triangle),
        ("star4", star4),
        ("path5", path5),
        ("square", square),
        ("square_pendant", square_pendant),
        ("k4", k4),
        ("grid_2x3", grid23),
        ("k33", k33),
    ]
}

/// Single-edge conditional law: enumerated conditionals match the
/// two-case formula on every corpus graph over the parameter grid. The
/// `q = 0.5` point exercises the weight enumeration only; no positive
/// association is claimed there.
pub fn check_single_edge_conditionals() -> CheckResult {
    let ps = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let qs = [0.5, 1.0, 1.5, 2.0, 4.0];
    let mut worst: f64 = 0.0;
    for (_, g) in corpus() {
        let ne = g.edge_count();
        for &p in &ps {
            for &q in &qs {
                for e in 0..ne {
                    for rest in 0..(1u64 << (ne - 1)) {
                        // Scatter the context bits around edge e.
                        let mut mask = 0u64;
                        let mut bit = 0;
                        for f in 0..ne {
                            if f == e {
                                continue;
                            }
                            if rest >> bit & 1 == 1 {
                                mask |= 1 << f;
                            }
                            bit += 1;
                        }
                        let zeta = BondConfig::from_mask(ne, mask);
                        let enumerated = oracle::fk_conditional_edge(&g, p, q, e, &zeta).unwrap();
                        let (x, y) = g.endpoints(e);
                        let formula = if connected_excluding(&g, &zeta, x, y, &[e]) {
                            p
                        } else {
                            p / (p + (1.0 - p) * q)
                        };
                        worst = worst.max((enumerated - formula).abs());
                    }
                }
            }
        }
    }
    CheckResult::new("single_edge_conditional", worst, 1e-12)
}

/// Fixture on a 5x5 patch: an `i`-colored path joining the two first-axis
/// neighbors of the center (connected case) or everything closed
/// (disconnected case).
fn ratio_fixture(
    g: &FiniteGraph,
    center: VertexId,
    i: Color,
    j: Color,
    connect: bool,
) -> (SpinConfig, BondConfig) {
    let path: Vec<VertexId> = [[1i64, 2], [1, 1], [1, 0], [2, 0], [3, 0], [3, 1], [3, 2]]
        .iter()
        .map(|c| g.vertex_at(&c[..]).unwrap())
        .collect();
    let mut spins = SpinConfig::empty(g.vertex_count());
    for v in 0..g.vertex_count() {
        if v != center {
            spins.set(v, if path.contains(&v) { i } else { j });
        }
    }
    let mut zeta = BondConfig::all_closed(g.edge_count());
    if connect {
        for pair in path.windows(2) {
            zeta.set(g.edge_between(pair[0], pair[1]).unwrap(), true);
        }
    }
    (spins, zeta)
}

/// Closed-form ratio constants against the exact-oracle ratio, for all
/// ordered color pairs and several p. `perturb_c1` scales the closed-form
/// connected-case constant and exists as a negative control for the
/// harness: any value other than 1 must fail the battery.
pub fn check_ratio_constants(perturb_c1: f64) -> Result<CheckResult> {
    let g = FiniteGraph::grid(&[5, 5])?;
    let center = g.vertex_at(&[2, 2]).unwrap();
    let mut worst: f64 = 0.0;
    let param_sets = vec![
        ModelParams::new(0.2, 1.7, vec![0.2, 0.3, 0.5])?,
        ModelParams::new(0.5, 1.7, vec![0.2, 0.3, 0.5])?,
        ModelParams::new(0.8, 1.7, vec![0.2, 0.3, 0.5])?,
        ModelParams::new(0.2, 1.0, vec![0.3, 0.7])?,
        ModelParams::new(0.5, 1.0, vec![0.3, 0.7])?,
        ModelParams::new(0.8, 1.0, vec![0.3, 0.7])?,
    ];
    for params in &param_sets {
        let s = params.s() as Color;
        for i in 1..=s {
            for j in 1..=s {
                if i == j {
                    continue;
                }
                let (c1, c2) = probe::ratio_constants(params, 2, i, j)?;
                let c1 = c1 * perturb_c1;
                for (connect, expected) in [(true, c1), (false, c2)] {
                    let (spins, zeta) = ratio_fixture(&g, center, i, j, connect);
                    let (ratio, got_conn) =
                        oracle::conditional_color_ratio(&g, center, &spins, &zeta, params, i, j)?;
                    debug_assert_eq!(got_conn, connect);
                    worst = worst.max((ratio - expected).abs());
                }
            }
        }
    }
    Ok(CheckResult::new("ratio_constants_vs_oracle", worst, 1e-10))
}

/// The pinned reference instance: d=2, p=1/2, q=1, a=(1/2,1/2) gives
/// exactly (7/9, 1).
pub fn check_ratio_reference(perturb_c1: f64) -> Result<CheckResult> {
    let params = ModelParams::new(0.5, 1.0, vec![0.5, 0.5])?;
    let (c1, c2) = probe::ratio_constants(&params, 2, 1, 2)?;
    let worst = (c1 * perturb_c1 - 7.0 / 9.0).abs().max((c2 - 1.0).abs());
    Ok(CheckResult::new("ratio_constants_reference", worst, 1e-12))
}

/// Trichotomy: sign(c1 - c2) equals sign(q a_i - 1) over a seeded random
/// parameter sweep.
pub fn check_ratio_trichotomy(seed: u64) -> Result<CheckResult> {
    let mut rng = CounterRng::new(seed);
    let mut failures = 0usize;
    let mut done = 0usize;
    while done < 10_000 {
        let p = 0.05 + 0.9 * rng.next_f64();
        let q = 0.2 + 4.0 * rng.next_f64();
        let a1 = 0.05 + 0.9 * rng.next_f64();
        let Ok(params) = ModelParams::new(p, q, vec![a1, 1.0 - a1]) else { continue };
        let (c1, c2) = probe::ratio_constants(&params, 2, 1, 2)?;
        let qa = q * a1;
        if (qa - 1.0).abs() < 1e-9 {
            continue;
        }
        if (c1 > c2) != (qa > 1.0) {
            failures += 1;
        }
        done += 1;
    }
    Ok(CheckResult::new("ratio_trichotomy_sweep", failures as f64, 0.0))
}

/// Conditional bond law given total spins factorizes into per-color
/// random-cluster measures.
pub fn check_bond_factorization() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    let square = FiniteGraph::grid(&[2, 2])?;
    let grid23 = FiniteGraph::grid(&[3, 2])?;
    let cases: Vec<(&FiniteGraph, ModelParams, Vec<Color>)> = vec![
        (
            &square,
            ModelParams::new(0.5, 2.0, vec![0.5, 0.5])?,
            vec![1, 2, 2, 1],
        ),
        (&square, ModelParams::new(0.3, 0.7, vec![0.4, 0.6])?, vec![1, 1, 1, 1]),
        (
            &grid23,
            ModelParams::new(0.4, 1.5, vec![0.3, 0.7])?,
            vec![1, 1, 2, 2, 1, 2],
        ),
        (
            &grid23,
            ModelParams::new(0.7, 3.0, vec![0.2, 0.3, 0.5])?,
            vec![1, 2, 3, 3, 2, 1],
        ),
    ];
    for (g, params, colors) in cases {
        let mut spins = SpinConfig::empty(g.vertex_count());
        for (v, &c) in colors.iter().enumerate() {
            spins.set(v, c);
        }
        worst = worst.max(oracle::bond_law_factorization_deviation(g, &params, &spins)?);
    }
    Ok(CheckResult::new("bond_factorization_given_spins", worst, 1e-10))
}

/// Two-sided partition factorization across a neutral-color cut.
pub fn check_partition_factorization() -> Result<CheckResult> {
    let g = FiniteGraph::from_parts(
        vec![vec![0], vec![1], vec![2], vec![3]],
        vec![(0, 1), (2, 3), (1, 2), (0, 2)],
        vec![],
    )?;
    let v1 = vec![true, true, false, false];
    let e_cut_12 = g.edge_between(1, 2).unwrap();
    let e_cut_02 = g.edge_between(0, 2).unwrap();
    let params2 = ModelParams::new(0.45, 2.0, vec![0.5, 0.5])?;
    let params4 = ModelParams::new(0.6, 4.0, vec![0.25, 0.25, 0.25, 0.25])?;
    let mut worst: f64 = 0.0;

    // One forced-closed cut edge, one spin-matched cut edge.
    let mut sigma = SpinConfig::empty(4);
    sigma.set(1, 1);
    sigma.set(2, 1);
    let fixture = oracle::PartitionFixture { v1: v1.clone(), b0: vec![e_cut_02], sigma };
    worst = worst.max(oracle::partition_factorization_deviation(&g, &fixture, &params2)?);

    // Same cut with four neutral colors.
    let mut sigma = SpinConfig::empty(4);
    sigma.set(1, 2);
    sigma.set(2, 2);
    let fixture = oracle::PartitionFixture { v1: v1.clone(), b0: vec![e_cut_02], sigma };
    worst = worst.max(oracle::partition_factorization_deviation(&g, &fixture, &params4)?);

    // Full cut forced closed: plain product of the two halves.
    let fixture = oracle::PartitionFixture {
        v1,
        b0: vec![e_cut_02, e_cut_12],
        sigma: SpinConfig::empty(4),
    };
    worst = worst.max(oracle::partition_factorization_deviation(&g, &fixture, &params2)?);
    Ok(CheckResult::new("partition_factorization", worst, 1e-10))
}

/// Exact nonnullness floor against the closed-form bound, with exact
/// equality at p = 0.
pub fn check_nonnull_floor() -> Result<CheckResult> {
    let square = FiniteGraph::grid(&[2, 2])?;
    let grid33 = FiniteGraph::grid(&[3, 3])?;
    let mut worst: f64 = 0.0;
    for (g, params) in [
        (&square, ModelParams::new(0.5, 2.0, vec![0.5, 0.5])?),
        (&square, ModelParams::new(0.3, 1.5, vec![0.3, 0.7])?),
        (&grid33, ModelParams::new(0.5, 2.0, vec![0.5, 0.5])?),
    ] {
        let floor = oracle::nonnull_floor(g, &params)?;
        let bound = params.nonnull_floor_bound(g.dimension());
        // Violation is how far the floor dips below the bound.
        worst = worst.max((bound - floor).max(0.0));
    }
    // p = 0: the floor equals min_i a_i exactly.
    let params = ModelParams::new(0.0, 2.0, vec![0.3, 0.7])?;
    let floor = oracle::nonnull_floor(&square, &params)?;
    worst = worst.max((floor - 0.3).abs());
    Ok(CheckResult::new("nonnull_floor", worst, 1e-12))
}

/// Potts specialization: spin marginals equal the independent
/// Hamiltonian-based oracle.
pub fn check_potts_marginals() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    let square = FiniteGraph::grid(&[2, 2])?;
    let grid23 = FiniteGraph::grid(&[3, 2])?;
    for (g, s, p) in [
        (&square, 2usize, 0.45),
        (&square, 3, 0.6),
        (&grid23, 2, 0.3),
        (&grid23, 3, 0.55),
    ] {
        let params = ModelParams::new(p, s as f64, vec![1.0 / s as f64; s])?;
        let joint = oracle::dac_exact(g, &params)?;
        let potts = oracle::potts_vertex_marginals(g, s, p)?;
        for v in 0..g.vertex_count() {
            let marg = joint.vertex_marginal(v);
            for c in 0..s {
                worst = worst.max((marg[c] - potts[v][c]).abs());
            }
        }
    }
    Ok(CheckResult::new("potts_marginals", worst, 1e-10))
}

/// Potts 1-Markov property: the exact conditional at a vertex is
/// unchanged when spins are altered anywhere off its neighbors.
pub fn check_potts_markov(seed: u64) -> Result<CheckResult> {
    let g = FiniteGraph::grid(&[3, 2])?;
    let mut worst: f64 = 0.0;
    let mut rng = CounterRng::new(seed);
    for s in [2usize, 3] {
        let params = ModelParams::new(0.5, s as f64, vec![1.0 / s as f64; s])?;
        let joint = oracle::dac_exact(&g, &params)?;
        let v = g.vertex_at(&[0, 0]).unwrap();
        let neighbors: Vec<usize> = g.incident(v).iter().map(|&(_, w)| w).collect();
        for _ in 0..5 {
            let mut sigma = SpinConfig::empty(g.vertex_count());
            for u in 0..g.vertex_count() {
                if u != v {
                    sigma.set(u, (rng.next_u64() % s as u64 + 1) as Color);
                }
            }
            let base = joint.conditional_color_at(v, &sigma)?;
            for far in 0..g.vertex_count() {
                if far == v || neighbors.contains(&far) {
                    continue;
                }
                for c in 1..=s as Color {
                    let mut altered = sigma.clone();
                    altered.set(far, c);
                    let cond = joint.conditional_color_at(v, &altered)?;
                    for (a, b) in base.iter().zip(&cond) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
    }
    Ok(CheckResult::new("potts_one_markov", worst, 1e-12))
}

/// Positive association for the conditioned random-cluster measure:
/// exhaustive over all monotone events on small graphs, seeded sampling
/// on a seven-edge grid. Reports the worst violation magnitude.
pub fn check_fkg(seed: u64) -> Result<CheckResult> {
    let mut worst_violation: f64 = 0.0;
    let path5 = FiniteGraph::from_parts(
        (0..5).map(|i| vec![i as i64]).collect(),
        (0..4).map(|i| (i, i + 1)).collect(),
        vec![],
    )?;
    for q in [1.0, 1.5, 2.0, 4.0] {
        let v = oracle::fkg_check(&path5, 0.5, q, &[], seed, 0)?;
        worst_violation = worst_violation.max((-v).max(0.0));
    }
    // Pendant pair, conditioned cylinder.
    let pendant = FiniteGraph::from_parts(
        vec![vec![0], vec![1], vec![2]],
        vec![(0, 1), (1, 2)],
        vec![],
    )?;
    let v = oracle::fkg_check(&pendant, 0.6, 2.0, &[(0, true)], seed, 0)?;
    worst_violation = worst_violation.max((-v).max(0.0));
    // Sampled monotone events on the 2x3 grid (7 edges).
    let grid23 = FiniteGraph::grid(&[3, 2])?;
    let v = oracle::fkg_check(&grid23, 0.5, 2.0, &[], seed, 64)?;
    worst_violation = worst_violation.max((-v).max(0.0));
    Ok(CheckResult::new("fkg_positive_association", worst_violation, 1e-12))
}

/// Runs the whole battery. `perturb_c1` is the negative-control knob; 1.0
/// is the honest value.
pub fn run_battery(seed: u64, perturb_c1: f64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        check_single_edge_conditionals(),
        check_ratio_constants(perturb_c1)?,
        check_ratio_reference(perturb_c1)?,
        check_ratio_trichotomy(seed)?,
        check_bond_factorization()?,
        check_partition_factorization()?,
        check_nonnull_floor()?,
        check_potts_marginals()?,
        check_potts_markov(seed)?,
        check_fkg(seed)?,
    ])
}
