//! Batch front end: JSON run descriptors in, CSV/JSON artifacts out.
//!
//! Commands: `verify` (the oracle battery), `sample` (heat-bath chains
//! and joint spin-bond draws), `probe` (the quasilocality gap sweep),
//! `couple` (three-way exploration coupling replicas), `constants`
//! (closed-form constants for given parameters). Every output file embeds
//! the resolved config and a version string in `#`-prefixed header lines;
//! reruns with the same config and seed are byte-identical, independent
//! of the thread count.

pub mod battery;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coloring::sample_dac;
use crate::domination::{
    dominating_spec, run_three_way_coupling, CouplingConfig, DominatingSpec, TerminalEvent,
};
use crate::error::{Error, Result};
use crate::graph::{build_box, FiniteGraph, SpinConfig};
use crate::mcmc::{run_chain, run_conditioned_chain, Boundary, RunSpec};
use crate::params::{Color, ModelParams};
use crate::probe;
use crate::rng::CounterRng;

pub const VERSION: &str = concat!("dacq ", env!("CARGO_PKG_VERSION"));

/// Exit codes: 0 success, 1 contract or acceptance failure, 2 usage or
/// config error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONTRACT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Negative-control knob: scales the closed-form connected-case ratio
    /// constant before comparison. Any value other than 1 must fail the
    /// battery; used to verify that the harness can fail.
    pub perturb_c1: Option<f64>,
}

fn default_thinning() -> usize {
    1
}

fn default_samples() -> usize {
    100
}

fn default_boundary() -> Boundary {
    Boundary::Free
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    #[serde(default)]
    pub forced_closed: Vec<usize>,
    #[serde(default)]
    pub forced_open: Vec<usize>,
    /// Color probabilities; presence switches to joint spin-bond sampling.
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    /// Optional color count, validated against `a`.
    #[serde(default)]
    pub s: Option<usize>,
    /// Also dump per-sample bond states.
    #[serde(default)]
    pub dump_bonds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub d: usize,
    pub k_list: Vec<usize>,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub a: Vec<f64>,
    pub replicas: usize,
    /// Gibbs sweeps for the direct-gap estimates; 0 skips them.
    pub sweeps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Independent conditioned chains for the random-cluster comparison
    /// (only in the `a_ℓ > 1/q` regime).
    #[serde(default)]
    pub rc_replicas: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleConfig {
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub a: Vec<f64>,
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    /// Window vertex coordinates; defaults to the origin.
    #[serde(default)]
    pub w: Vec<Vec<i64>>,
    /// Boundary colors for the two conditionings.
    #[serde(default = "default_color_1")]
    pub boundary_color: Color,
    #[serde(default = "default_color_2")]
    pub boundary_color_prime: Color,
    /// Emit a JSON-lines transcript of every reveal.
    #[serde(default)]
    pub transcript: bool,
    #[serde(default = "default_completion")]
    pub completion_steps: usize,
}

fn default_color_1() -> Color {
    1
}

fn default_color_2() -> Color {
    2
}

fn default_completion() -> usize {
    150
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub a: Vec<f64>,
}

/// Formats one CSV cell; `None` becomes an empty field.
fn cell<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes a CSV file with `#`-prefixed metadata lines (version, resolved
/// config, seed) followed by an RFC-4180 body.
fn write_csv(
    path: &Path,
    config_json: &str,
    seed: u64,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# {VERSION}");
    let _ = writeln!(out, "# config: {config_json}");
    let _ = writeln!(out, "# seed: {seed}");
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let _ = writeln!(out, "{}", row.join(","));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Runs the oracle verification battery and writes `verify_report.json`.
/// Returns `EXIT_OK` when every contract holds, `EXIT_CONTRACT`
/// otherwise.
pub fn cmd_verify(config: &VerifyConfig, out_dir: &Path) -> Result<i32> {
    ensure_dir(out_dir)?;
    let results = battery::run_battery(config.seed, config.perturb_c1.unwrap_or(1.0))?;
    let all_pass = results.iter().all(|r| r.pass);
    let report = serde_json::json!({
        "version": VERSION,
        "config": config,
        "all_pass": all_pass,
        "checks": results,
    });
    std::fs::write(out_dir.join("verify_report.json"), serde_json::to_string_pretty(&report)?)?;
    for r in &results {
        println!(
            "{}: {} (worst {:.3e}, tolerance {:.3e})",
            r.name,
            if r.pass { "pass" } else { "FAIL" },
            r.worst,
            r.tolerance
        );
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_CONTRACT })
}

/// Runs a chain (or a sequence of joint draws when `a` is present) and
/// writes `chain_stats.csv` plus optional `bonds.csv` / `spins.csv`.
pub fn cmd_sample(config: &SampleConfig, out_dir: &Path) -> Result<i32> {
    ensure_dir(out_dir)?;
    let graph = build_box(config.d, config.n)?;
    let config_json = serde_json::to_string(config)?;
    match &config.a {
        None => sample_bonds_only(config, &graph, &config_json, out_dir),
        Some(a) => {
            if let Some(s) = config.s {
                if s != a.len() {
                    return Err(Error::Config(format!(
                        "s = {s} does not match a (length {})",
                        a.len()
                    )));
                }
            }
            let params = ModelParams::new(config.p, config.q, a.clone())?;
            sample_joint(config, &params, &graph, &config_json, out_dir)
        }
    }
}

fn sample_bonds_only(
    config: &SampleConfig,
    graph: &FiniteGraph,
    config_json: &str,
    out_dir: &Path,
) -> Result<i32> {
    let run = RunSpec::new(config.burn_in, config.samples, config.thinning);
    let (samples, stats) = if config.forced_closed.is_empty() && config.forced_open.is_empty() {
        run_chain(graph, config.p, config.q, config.boundary, config.seed, &run)
    } else {
        let mut forced_open = config.forced_open.clone();
        if config.boundary == Boundary::Wired {
            forced_open.extend(graph.boundary_ring_edges());
            forced_open.sort_unstable();
            forced_open.dedup();
        }
        run_conditioned_chain(
            graph,
            config.p,
            config.q,
            &config.forced_closed,
            &forced_open,
            config.seed,
            &run,
        )?
    };
    let rows: Vec<Vec<String>> = stats
        .open_density
        .iter()
        .enumerate()
        .map(|(i, &density)| {
            let sweep = config.burn_in + (i + 1) * config.thinning.max(1);
            vec![
                sweep.to_string(),
                density.to_string(),
                stats.largest_cluster_fraction[i].to_string(),
                (stats.origin_boundary_connected[i] as u8).to_string(),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("chain_stats.csv"),
        config_json,
        config.seed,
        &["sweep", "open_density", "largest_cluster_fraction", "origin_boundary_connected"],
        &rows,
    )?;
    if config.dump_bonds {
        let mut rows = Vec::new();
        for (idx, bonds) in samples.iter().enumerate() {
            for e in 0..graph.edge_count() {
                let (x, y) = graph.endpoints(e);
                rows.push(vec![
                    idx.to_string(),
                    e.to_string(),
                    x.to_string(),
                    y.to_string(),
                    (bonds.is_open(e) as u8).to_string(),
                ]);
            }
        }
        write_csv(
            &out_dir.join("bonds.csv"),
            config_json,
            config.seed,
            &["sample", "edge", "x", "y", "open"],
            &rows,
        )?;
    }
    Ok(EXIT_OK)
}

fn sample_joint(
    config: &SampleConfig,
    params: &ModelParams,
    graph: &FiniteGraph,
    config_json: &str,
    out_dir: &Path,
) -> Result<i32> {
    let root = CounterRng::new(config.seed);
    let sweeps = config.burn_in.max(1);
    let mut spin_rows = Vec::new();
    let mut bond_rows = Vec::new();
    for idx in 0..config.samples {
        let sample_seed = root.derive(idx as u64).next_u64();
        let sample = sample_dac(graph, params, config.boundary, sample_seed, sweeps);
        for v in 0..graph.vertex_count() {
            let coords =
                graph.coords(v).iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";");
            spin_rows.push(vec![
                idx.to_string(),
                v.to_string(),
                coords,
                sample.spins.get(v).unwrap_or(0).to_string(),
            ]);
        }
        if config.dump_bonds {
            for e in 0..graph.edge_count() {
                let (x, y) = graph.endpoints(e);
                bond_rows.push(vec![
                    idx.to_string(),
                    e.to_string(),
                    x.to_string(),
                    y.to_string(),
                    (sample.bonds.is_open(e) as u8).to_string(),
                    (sample.bonds_hat.is_open(e) as u8).to_string(),
                ]);
            }
        }
    }
    write_csv(
        &out_dir.join("spins.csv"),
        config_json,
        config.seed,
        &["sample", "vertex", "coords", "spin"],
        &spin_rows,
    )?;
    if config.dump_bonds {
        write_csv(
            &out_dir.join("bonds.csv"),
            config_json,
            config.seed,
            &["sample", "edge", "x", "y", "open", "open_hat"],
            &bond_rows,
        )?;
    }
    Ok(EXIT_OK)
}

/// Sweeps the halo radius and writes one gap-report row per `k` to
/// `probe.csv`.
pub fn cmd_probe(config: &ProbeConfig, out_dir: &Path) -> Result<i32> {
    ensure_dir(out_dir)?;
    let params = ModelParams::new(config.p, config.q, config.a.clone())?;
    let config_json = serde_json::to_string(config)?;
    let rc_regime = params
        .distinguished_color()
        .map(|ell| params.color_prob(ell) > 1.0 / params.q)
        .unwrap_or(false);
    let mut rows = Vec::new();
    for &k in &config.k_list {
        let p_a = probe::estimate_connection_lower(
            &params,
            config.d,
            k,
            config.n,
            CounterRng::new(config.seed).derive(k as u64).next_u64(),
            config.replicas,
        )?;
        let mut report = probe::assemble_gap_bound(&params, config.d, k, p_a)?;
        if rc_regime && config.rc_replicas > 0 {
            let chain = RunSpec::new(config.sweeps.max(50), 40, 2);
            report.p_a_rc = Some(probe::estimate_connection_rc(
                &params,
                config.d,
                k,
                config.n,
                CounterRng::new(config.seed).derive(1000 + k as u64).next_u64(),
                config.rc_replicas,
                &chain,
            )?);
        }
        if config.sweeps > 0 {
            let gaps = probe::direct_gap_gibbs(
                &params,
                config.d,
                k,
                config.n,
                CounterRng::new(config.seed).derive(2000 + k as u64).next_u64(),
                config.sweeps,
            )?;
            report.gap_ell = Some(gaps.gap_ell);
            report.gap_m = Some(gaps.gap_m);
        }
        rows.push(vec![
            report.k.to_string(),
            report.p_a_lower.value.to_string(),
            report.p_a_lower.se.to_string(),
            cell(report.p_a_rc.map(|e| e.value)),
            cell(report.p_a_rc.map(|e| e.se)),
            report.c1.to_string(),
            report.c2.to_string(),
            report.delta.to_string(),
            report.bound.value.to_string(),
            report.bound.se.to_string(),
            cell(report.gap_ell.map(|e| e.value)),
            cell(report.gap_ell.map(|e| e.se)),
            cell(report.gap_m.map(|e| e.value)),
            cell(report.gap_m.map(|e| e.se)),
        ]);
    }
    write_csv(
        &out_dir.join("probe.csv"),
        &config_json,
        config.seed,
        &[
            "k",
            "pA_lower",
            "pA_lower_se",
            "pA_rc",
            "pA_rc_se",
            "c1",
            "c2",
            "delta",
            "bound",
            "bound_se",
            "gap_ell",
            "gap_ell_se",
            "gap_m",
            "gap_m_se",
        ],
        &rows,
    )?;
    Ok(EXIT_OK)
}

/// The two conditioned spin configurations for the coupling command:
/// identical off the boundary (a deterministic stripe pattern inside the
/// box, window unset), different constant colors on the box boundary.
fn couple_spin_pair(
    graph: &FiniteGraph,
    window: &[usize],
    params: &ModelParams,
    boundary_color: Color,
    boundary_color_prime: Color,
) -> Result<(SpinConfig, SpinConfig)> {
    let s = params.s() as Color;
    for c in [boundary_color, boundary_color_prime] {
        if c == 0 || c > s {
            return Err(Error::Config(format!("boundary color {c} out of range")));
        }
    }
    let mut in_w = vec![false; graph.vertex_count()];
    for &v in window {
        in_w[v] = true;
    }
    let mut sigma = SpinConfig::empty(graph.vertex_count());
    let mut sigma_p = SpinConfig::empty(graph.vertex_count());
    for v in 0..graph.vertex_count() {
        if in_w[v] {
            continue;
        }
        if graph.is_boundary(v) {
            sigma.set(v, boundary_color);
            sigma_p.set(v, boundary_color_prime);
        } else {
            let c = 1 + (graph.coords(v)[0].rem_euclid(2)) as Color;
            sigma.set(v, c.min(s));
            sigma_p.set(v, c.min(s));
        }
    }
    Ok((sigma, sigma_p))
}

/// Runs coupling replicas and writes `couple_summary.csv` (and a
/// JSON-lines transcript when requested).
pub fn cmd_couple(config: &CoupleConfig, out_dir: &Path) -> Result<i32> {
    ensure_dir(out_dir)?;
    let graph = build_box(config.d, config.n)?;
    let params = ModelParams::new(config.p, config.q, config.a.clone())?;
    let config_json = serde_json::to_string(config)?;
    let window: Vec<usize> = if config.w.is_empty() {
        vec![graph
            .vertex_at(&vec![0; config.d])
            .ok_or_else(|| Error::Config("box lacks the origin".into()))?]
    } else {
        config
            .w
            .iter()
            .map(|coords| {
                graph
                    .vertex_at(coords)
                    .ok_or_else(|| Error::Config(format!("window vertex {coords:?} not in box")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let (sigma, sigma_p) = couple_spin_pair(
        &graph,
        &window,
        &params,
        config.boundary_color,
        config.boundary_color_prime,
    )?;
    let coupling_config = CouplingConfig {
        completion_steps: config.completion_steps,
        record_transcript: config.transcript,
    };
    let root = CounterRng::new(config.seed);
    let mut rows = Vec::new();
    let mut transcript_lines = Vec::new();
    for r in 0..config.replicas {
        let rep_seed = root.derive(r as u64).next_u64();
        let out = run_three_way_coupling(
            &graph,
            &params,
            &sigma,
            &sigma_p,
            &window,
            rep_seed,
            &coupling_config,
        )?;
        let radius = match &out.terminal {
            TerminalEvent::BarrierFound { barrier } => Some(barrier.interior_radius(&graph)),
            TerminalEvent::CrossingFound { .. } => None,
        };
        rows.push(vec![
            r.to_string(),
            out.terminal.label().to_string(),
            cell(radius),
            (out.x_w_equal as u8).to_string(),
        ]);
        if config.transcript {
            for rec in &out.records {
                transcript_lines.push(serde_json::to_string(&serde_json::json!({
                    "replica": r,
                    "edge": rec.edge,
                    "u": rec.u,
                    "hat": rec.hat,
                    "hat_prime": rec.hat_prime,
                    "dom": rec.dom,
                    "frontier": rec.frontier,
                }))?);
            }
        }
    }
    write_csv(
        &out_dir.join("couple_summary.csv"),
        &config_json,
        config.seed,
        &["replica", "terminal_event", "barrier_radius", "x_w_equal"],
        &rows,
    )?;
    if config.transcript {
        std::fs::write(out_dir.join("transcript.jsonl"), transcript_lines.join("\n") + "\n")?;
    }
    Ok(EXIT_OK)
}

/// Prints (and writes) the closed-form constants for the parameters:
/// ratio constants for every ordered color pair, the nonnullness floor,
/// the Bernoulli lower density and the dominating-measure case.
pub fn cmd_constants(config: &ConstantsConfig, out_dir: &Path) -> Result<i32> {
    ensure_dir(out_dir)?;
    let params = ModelParams::new(config.p, config.q, config.a.clone())?;
    let mut pairs = Vec::new();
    for i in 1..=params.s() as Color {
        for j in 1..=params.s() as Color {
            if i == j {
                continue;
            }
            let (c1, c2) = probe::ratio_constants(&params, config.d, i, j)?;
            pairs.push(serde_json::json!({ "i": i, "j": j, "c1": c1, "c2": c2 }));
        }
    }
    let epsilon = params.nonnull_floor_bound(config.d);
    let dominating: Option<DominatingSpec> = dominating_spec(&params).ok();
    let p_tilde = probe::bernoulli_lower_density(&params);
    let doc = serde_json::json!({
        "version": VERSION,
        "config": config,
        "epsilon": epsilon,
        "delta": 2.0 * epsilon,
        "p_tilde": p_tilde,
        "distinguished_color": params.distinguished_color(),
        "neutral_colors": params.neutral_colors(),
        "dominating": dominating,
        "pairs": pairs,
    });
    let text = serde_json::to_string_pretty(&doc)?;
    println!("{text}");
    std::fs::write(out_dir.join("constants.json"), text)?;
    Ok(EXIT_OK)
}

/// Parsed command line.
#[derive(Clone, Debug)]
pub struct CliOptions {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Option<PathBuf>) -> Result<T> {
    let path =
        path.as_ref().ok_or_else(|| Error::Config("missing --config <path>".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid config: {e}")))
}

fn dispatch(opts: &CliOptions) -> Result<i32> {
    match opts.command.as_str() {
        "verify" => {
            let mut config: VerifyConfig = match opts.config_path {
                Some(_) => load_config(&opts.config_path)?,
                None => VerifyConfig::default(),
            };
            if let Some(seed) = opts.seed {
                config.seed = seed;
            }
            cmd_verify(&config, &opts.out_dir)
        }
        "sample" => {
            let mut config: SampleConfig = load_config(&opts.config_path)?;
            if let Some(seed) = opts.seed {
                config.seed = seed;
            }
            cmd_sample(&config, &opts.out_dir)
        }
        "probe" => {
            let mut config: ProbeConfig = load_config(&opts.config_path)?;
            if let Some(seed) = opts.seed {
                config.seed = seed;
            }
            cmd_probe(&config, &opts.out_dir)
        }
        "couple" => {
            let mut config: CoupleConfig = load_config(&opts.config_path)?;
            if let Some(seed) = opts.seed {
                config.seed = seed;
            }
            cmd_couple(&config, &opts.out_dir)
        }
        "constants" => {
            let config: ConstantsConfig = load_config(&opts.config_path)?;
            cmd_constants(&config, &opts.out_dir)
        }
        other => Err(Error::Config(format!("unknown command '{other}'"))),
    }
}

/// Runs a command inside a thread pool of the requested size and maps
/// errors to exit codes.
pub fn execute(opts: &CliOptions) -> i32 {
    let pool =
        match rayon::ThreadPoolBuilder::new().num_threads(opts.threads.unwrap_or(0)).build() {
            Ok(pool) => pool,
            Err(e) => {
                eprintln!("error: cannot build thread pool: {e}");
                return EXIT_USAGE;
            }
        };
    match pool.install(|| dispatch(opts)) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("dacq_cli_test_{tag}_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn sample_outputs_deterministic() {
        let dir = tmp_dir("sample");
        let config = SampleConfig {
            d: 2,
            n: 1,
            p: 0.5,
            q: 2.0,
            boundary: Boundary::Wired,
            seed: 9,
            burn_in: 5,
            samples: 10,
            thinning: 1,
            forced_closed: vec![],
            forced_open: vec![],
            a: None,
            s: None,
            dump_bonds: true,
        };
        assert_eq!(cmd_sample(&config, &dir).unwrap(), EXIT_OK);
        let first = std::fs::read(dir.join("chain_stats.csv")).unwrap();
        let first_bonds = std::fs::read(dir.join("bonds.csv")).unwrap();
        assert_eq!(cmd_sample(&config, &dir).unwrap(), EXIT_OK);
        assert_eq!(first, std::fs::read(dir.join("chain_stats.csv")).unwrap());
        assert_eq!(first_bonds, std::fs::read(dir.join("bonds.csv")).unwrap());

        // Wired mode keeps every ring edge open in every dumped sample.
        let graph = build_box(2, 1).unwrap();
        let ring = graph.boundary_ring_edges();
        let body = String::from_utf8(first_bonds).unwrap();
        for line in body.lines().skip(4) {
            let fields: Vec<&str> = line.split(',').collect();
            let edge: usize = fields[1].parse().unwrap();
            if ring.contains(&edge) {
                assert_eq!(fields[4], "1", "ring edge closed in {line}");
            }
        }
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let bad: std::result::Result<SampleConfig, _> =
            serde_json::from_str(r#"{"d":2,"n":1,"p":0.5,"q":2.0,"bogus":1}"#);
        assert!(bad.is_err());
        let bad: std::result::Result<ProbeConfig, _> = serde_json::from_str(r#"{"d":2}"#);
        assert!(bad.is_err(), "missing required fields rejected");
    }

    #[test]
    fn constants_command_writes_json() {
        let dir = tmp_dir("constants");
        let config = ConstantsConfig { d: 2, p: 0.5, q: 1.0, a: vec![0.5, 0.5] };
        assert_eq!(cmd_constants(&config, &dir).unwrap(), EXIT_OK);
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("constants.json")).unwrap())
                .unwrap();
        let c1 = doc["pairs"][0]["c1"].as_f64().unwrap();
        assert!((c1 - 7.0 / 9.0).abs() < 1e-12);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn couple_p_zero_all_barriers() {
        let dir = tmp_dir("couple");
        let config = CoupleConfig {
            d: 2,
            n: 3,
            p: 0.0,
            q: 1.0,
            a: vec![0.3, 0.7],
            replicas: 5,
            seed: 4,
            w: vec![],
            boundary_color: 1,
            boundary_color_prime: 2,
            transcript: true,
            completion_steps: 20,
        };
        assert_eq!(cmd_couple(&config, &dir).unwrap(), EXIT_OK);
        let body = std::fs::read_to_string(dir.join("couple_summary.csv")).unwrap();
        let rows: Vec<&str> = body.lines().skip(4).collect();
        assert_eq!(rows.len(), 5, "one row per replica");
        for row in rows {
            assert!(row.contains("barrier"), "p=0 must find barriers: {row}");
            assert!(row.ends_with(",1"), "barrier implies equal windows: {row}");
        }
        assert!(dir.join("transcript.jsonl").exists());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn probe_potts_bound_zero() {
        let dir = tmp_dir("probe");
        let config = ProbeConfig {
            d: 2,
            k_list: vec![1, 2],
            n: 4,
            p: 0.4,
            q: 2.0,
            a: vec![0.5, 0.5],
            replicas: 50,
            sweeps: 0,
            seed: 3,
            rc_replicas: 0,
        };
        assert_eq!(cmd_probe(&config, &dir).unwrap(), EXIT_OK);
        let body = std::fs::read_to_string(dir.join("probe.csv")).unwrap();
        let rows: Vec<&str> = body.lines().skip(4).collect();
        assert_eq!(rows.len(), 2);
        for row in rows {
            let fields: Vec<&str> = row.split(',').collect();
            let bound: f64 = fields[8].parse().unwrap();
            assert_eq!(bound, 0.0, "Potts bound must vanish: {row}");
        }
        let _ = std::fs::remove_dir_all(&dir);
    }
}
