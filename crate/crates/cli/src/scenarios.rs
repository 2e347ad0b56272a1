//! One function per sub-command. Each writes its files into the output
//! directory and returns a JSON summary for stdout.

use std::fs;
use std::path::{Path, PathBuf};

use incentive_net::dcrs::{run_dcrs, DcrsOutcome, DcrsParams};
use incentive_net::engine::{simulate, SimConfig, TraceRow};
use incentive_net::growth::{simulate_growth, summarize_sweep, GrowthRun, SweepRow};
use incentive_net::protocol::{construct_appendix_protocol, design_binary_protocol, RatingProtocol};
use incentive_net::tft::compare_symmetric;
use incentive_net::welfare::{price_of_anarchy, solve_obedient};
use incentive_net::{LinkValues, Metrics, Topology, UtilityModel};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ProtocolKind, ScenarioConfig};
use crate::error::{CliError, CliResult};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn build_protocol(
    kind: ProtocolKind,
    topology: &Topology,
    top: &LinkValues<f64>,
    model: &UtilityModel<f64>,
    delta: f64,
) -> CliResult<RatingProtocol<f64>> {
    Ok(match kind {
        ProtocolKind::Minimal => design_binary_protocol(topology, top, model, delta)?,
        ProtocolKind::Strict => construct_appendix_protocol(topology, top, model, delta)?,
    })
}

#[derive(Debug, Serialize)]
struct TraceCsvRow {
    iteration: usize,
    agent: usize,
    lambda: f64,
    constraint_slack: f64,
}

fn trace_rows(outcome: &DcrsOutcome<f64>) -> Vec<TraceCsvRow> {
    let mut rows = Vec::new();
    for (q, entry) in outcome.state.trace.iter().enumerate() {
        for (agent, (&lambda, &slack)) in entry.lambda.iter().zip(&entry.slack).enumerate() {
            rows.push(TraceCsvRow {
                iteration: q + 1,
                agent,
                lambda,
                constraint_slack: slack,
            });
        }
    }
    rows
}

pub fn design(config: &ScenarioConfig, out: &Path) -> CliResult<Value> {
    let topology = config.topology()?;
    let model = config.utility.model();
    let delta = config.delta()?;
    let params = DcrsParams {
        record_trace: true,
        ..config.dcrs.clone()
    };
    let outcome = run_dcrs(&topology, &model, delta, &params)?;
    let protocol = build_protocol(config.protocol, &topology, &outcome.strategy, &model, delta)?;
    let (_, v_opt) = solve_obedient(&topology, &model);

    let protocol_path = out.join("protocol.json");
    fs::write(&protocol_path, protocol.to_json()? + "\n").map_err(|source| CliError::Io {
        path: protocol_path.clone(),
        source,
    })?;
    write_csv(&out.join("trace.csv"), &trace_rows(&outcome))?;
    let report = json!({
        "agents": topology.n(),
        "links": topology.edge_count(),
        "delta": delta,
        "iterations": outcome.state.iterations,
        "lambda": outcome.state.lambda,
        "v_opt": v_opt,
        "v_star": outcome.welfare,
        "poa": price_of_anarchy(v_opt, outcome.welfare),
    });
    write_json(&out.join("design.json"), &report)?;
    Ok(report)
}

pub fn benchmark(config: &ScenarioConfig, out: &Path) -> CliResult<Value> {
    let topology = config.topology()?;
    let model = config.utility.model();
    let (strategy, v_opt) = solve_obedient(&topology, &model);
    let report = json!({
        "agents": topology.n(),
        "links": topology.edge_count(),
        "v_opt": v_opt,
        "strategy": strategy.as_nested(),
    });
    write_json(&out.join("benchmark.json"), &report)?;
    Ok(json!({ "v_opt": v_opt }))
}

#[derive(Debug, Serialize)]
struct SimulationSummary<'a> {
    design_welfare: f64,
    metrics: &'a Metrics<f64>,
    occupancy: &'a [Vec<f64>],
    burn_in: u64,
    final_ratings: &'a [usize],
    discounted_utility: &'a Option<Vec<f64>>,
}

pub fn simulate_scenario(config: &ScenarioConfig, out: &Path) -> CliResult<Value> {
    let topology = config.topology()?;
    let model = config.utility.model();
    let delta = config.delta()?;
    let outcome = run_dcrs(&topology, &model, delta, &config.dcrs)?;
    let protocol = build_protocol(config.protocol, &topology, &outcome.strategy, &model, delta)?;
    let behaviors = config.behavior.expand(topology.n());
    let sim = SimConfig {
        horizon: config.horizon,
        epsilon: config.epsilon,
        seed: config.seed,
        burn_in: config.burn_in,
        discount: (delta < 1.0).then_some(delta),
        record_trace: config.record_trace,
    };
    let report = simulate(&topology, &model, &protocol, &behaviors, &sim)?;
    let summary = SimulationSummary {
        design_welfare: outcome.welfare,
        metrics: &report.metrics,
        occupancy: &report.occupancy,
        burn_in: report.burn_in,
        final_ratings: &report.final_ratings,
        discounted_utility: &report.discounted_utility,
    };
    write_json(&out.join("simulation.json"), &summary)?;
    if config.record_trace {
        write_csv::<TraceRow<f64>>(&out.join("simulation_trace.csv"), &report.trace)?;
    }
    Ok(json!({
        "v_opt": report.metrics.v_opt,
        "v_realized": report.metrics.v_star,
        "poa": report.metrics.poa,
    }))
}

#[derive(Debug, Serialize)]
struct TftRow {
    delta: f64,
    poa_rating: f64,
    poa_tft: f64,
}

pub fn compare_tft(config: &ScenarioConfig, out: &Path) -> CliResult<Value> {
    let sweep = config.section(&config.tft_sweep, "tft_sweep")?;
    let model = config.utility.model();
    let rows: Vec<TftRow> = compare_symmetric(sweep.degree, &model, &sweep.deltas, sweep.resolution)?
        .into_iter()
        .map(|c| TftRow {
            delta: c.delta,
            poa_rating: c.poa_rating,
            poa_tft: c.poa_tft,
        })
        .collect();
    write_csv(&out.join("tft_comparison.csv"), &rows)?;
    Ok(json!({ "rows": rows.len() }))
}

#[derive(Debug, Clone, Serialize)]
pub struct StarRow {
    pub delta: f64,
    pub agents: usize,
    pub v_opt: f64,
    pub v_star: f64,
    pub poa: f64,
    pub iterations: usize,
}

pub fn star_sweep(config: &ScenarioConfig, out: &Path) -> CliResult<Value> {
    let sweep = config.section(&config.star_sweep, "star_sweep")?;
    let model = UtilityModel::estimation(sweep.r2);
    let cells: Vec<(f64, usize)> = sweep
        .deltas
        .iter()
        .flat_map(|&d| sweep.sizes.iter().map(move |&n| (d, n)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(delta, n)| {
            let topology = Topology::star(n);
            let (_, v_opt) = solve_obedient(&topology, &model);
            let outcome = run_dcrs(&topology, &model, delta, &config.dcrs)?;
            Ok(StarRow {
                delta,
                agents: n,
                v_opt,
                v_star: outcome.welfare,
                poa: price_of_anarchy(v_opt, outcome.welfare),
                iterations: outcome.state.iterations,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_csv(&out.join("star_sweep.csv"), &rows)?;
    Ok(json!({ "rows": rows.len() }))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleFreeRow {
    pub exponent: f64,
    pub epsilon: f64,
    pub v_opt: f64,
    pub v_design: f64,
    pub v_realized: f64,
    pub poa: f64,
}

pub fn scalefree_table(config: &ScenarioConfig, out: &Path) -> CliResult<Value> {
    let table = config.section(&config.scalefree_table, "scalefree_table")?;
    let model = config.utility.model();
    let delta = config.delta()?;
    let graphs: Vec<(f64, u64)> = table
        .exponents
        .iter()
        .flat_map(|&e| (0..table.replicates).map(move |r| (e, r)))
        .collect();
    let designs = graphs
        .par_iter()
        .map(|&(exponent, rep)| {
            let topology = Topology::scale_free(table.n, exponent, table.links_per_node, config.seed + rep);
            let (_, v_opt) = solve_obedient(&topology, &model);
            let outcome = run_dcrs(&topology, &model, delta, &config.dcrs)?;
            let protocol = build_protocol(config.protocol, &topology, &outcome.strategy, &model, delta)?;
            Ok((topology, v_opt, outcome.welfare, protocol))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let runs: Vec<(usize, f64)> = (0..graphs.len())
        .flat_map(|g| table.epsilons.iter().map(move |&e| (g, e)))
        .collect();
    let realized = runs
        .par_iter()
        .map(|&(g, epsilon)| {
            let (topology, _, _, protocol) = &designs[g];
            let behaviors = config.behavior.expand(topology.n());
            let mut sim = SimConfig::new(config.horizon, epsilon, config.seed + graphs[g].1);
            sim.burn_in = config.burn_in;
            Ok(simulate(topology, &model, protocol, &behaviors, &sim)?.metrics.v_star)
        })
        .collect::<CliResult<Vec<f64>>>()?;

    let reps = table.replicates as f64;
    let mut rows = Vec::new();
    for (ei, &exponent) in table.exponents.iter().enumerate() {
        for (k, &epsilon) in table.epsilons.iter().enumerate() {
            let (mut v_opt, mut v_design, mut v_realized, mut poa) = (0.0, 0.0, 0.0, 0.0);
            for rep in 0..table.replicates as usize {
                let g = ei * table.replicates as usize + rep;
                let r = realized[g * table.epsilons.len() + k];
                v_opt += designs[g].1;
                v_design += designs[g].2;
                v_realized += r;
                poa += price_of_anarchy(designs[g].1, r);
            }
            rows.push(ScaleFreeRow {
                exponent,
                epsilon,
                v_opt: v_opt / reps,
                v_design: v_design / reps,
                v_realized: v_realized / reps,
                poa: poa / reps,
            });
        }
    }
    write_csv(&out.join("scalefree_table.csv"), &rows)?;
    Ok(json!({ "rows": rows.len() }))
}

pub fn growth_sweep(config: &ScenarioConfig, out: &Path) -> CliResult<Value> {
    let sweep = config.section(&config.growth_sweep, "growth_sweep")?;
    let model = config.utility.model();
    let delta = config.delta()?;
    let params = sweep.params();
    let pairs: Vec<(f64, u64)> = sweep
        .rho_grid
        .iter()
        .flat_map(|&rho| (0..sweep.seeds).map(move |s| (rho, config.seed + s)))
        .collect();
    let runs = pairs
        .par_iter()
        .map(|&(rho, seed)| Ok(simulate_growth(&sweep.network, &model, delta, rho, seed, &params)?))
        .collect::<CliResult<Vec<GrowthRun>>>()?;
    let summary = summarize_sweep(&sweep.rho_grid, &runs);
    write_csv::<SweepRow>(&out.join("growth_sweep.csv"), &summary.rows)?;
    write_csv(&out.join("growth_runs.csv"), &runs)?;
    let report = json!({ "best_rho": summary.best_rho, "runs": runs.len() });
    write_json(&out.join("growth_summary.json"), &report)?;
    Ok(report)
}

/// Output directory: the flag, then the config, then the working directory.
pub fn output_dir(flag: Option<&Path>, config: &ScenarioConfig) -> PathBuf {
    match (flag, &config.out_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => config.base_dir.join(p),
        (None, None) => PathBuf::from("."),
    }
}
