//! Growing networks and the refresh rate of the design.
//!
//! New agents keep joining. The strategy table is recomputed on the current
//! graph only at refresh events, which occur independently each period with
//! probability `rho`; until then newcomers and their links carry no sharing.
//! Agents who expect a redesign next period discount the future by
//! `(1 - rho) delta`, which tightens every incentive constraint.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dcrs::{run_dcrs, run_dcrs_warm, DcrsOutcome, DcrsParams, DcrsState, WarmStart};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::Topology;
use crate::utility::{LinkValues, UtilityModel};
use crate::welfare::obedient_agent_welfare;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    pub initial_agents: usize,
    /// Link probability inside the initial graph.
    pub initial_link_prob: f64,
    /// Probability that one agent joins in a period.
    pub join_prob: f64,
    /// Probability that a newcomer links to each existing agent.
    pub link_prob: f64,
    pub horizon: u64,
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_agents == 0 {
            return Err(Error::InvalidAgentCount(0));
        }
        for (name, p) in [
            ("initial_link_prob", self.initial_link_prob),
            ("join_prob", self.join_prob),
            ("link_prob", self.link_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ParameterOutOfRange { name, value: p });
            }
        }
        if self.horizon == 0 {
            return Err(Error::ParameterOutOfRange {
                name: "horizon",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// Expected time-average optimal welfare until the next refresh:
/// `V + (1 - rho) dv / (2 rho)`.
pub fn expected_opt_welfare<T: Scalar>(v_opt: T, delta_v: T, rho: T) -> Result<T> {
    if rho <= T::zero() {
        return Err(Error::ZeroRefreshRate);
    }
    if rho > T::one() {
        return Err(Error::ParameterOutOfRange {
            name: "rho",
            value: rho.as_f64(),
        });
    }
    Ok(v_opt + (T::one() - rho) * delta_v / (T::lit(2.0) * rho))
}

fn check_rho<T: Scalar>(rho: T) -> Result<()> {
    if rho >= T::zero() && rho <= T::one() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: "rho",
            value: rho.as_f64(),
        })
    }
}

fn zero_design<T: Scalar>(topology: &Topology, params: &DcrsParams<T>) -> DcrsOutcome<T> {
    DcrsOutcome {
        strategy: LinkValues::zeros(topology),
        state: DcrsState {
            lambda: vec![T::zero(); topology.n()],
            iterations: 0,
            step: params.step,
            tolerance: params.tolerance,
            trace: Vec::new(),
        },
        welfare: T::zero(),
    }
}

/// DCRS settings for repeated redesigns during a sweep. The larger proximal
/// weight keeps the iteration stable at a much larger step.
pub fn refresh_params() -> DcrsParams<f64> {
    DcrsParams {
        step: 1.0,
        proximal_weight: 10.0,
        ..DcrsParams::default()
    }
}

/// Designs with the effective discount `(1 - rho) delta`.
pub fn design_with_refresh<T: Scalar>(
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    rho: T,
    params: &DcrsParams<T>,
) -> Result<DcrsOutcome<T>> {
    check_rho(rho)?;
    let effective = (T::one() - rho) * delta;
    if effective <= T::zero() {
        return Ok(zero_design(topology, params));
    }
    run_dcrs(topology, model, effective, params)
}

/// Carries multipliers and link values over to a graph that only gained
/// agents and links; everything new starts at zero.
pub fn extend_start<T: Scalar>(old: &Topology, outcome: &DcrsOutcome<T>, grown: &Topology) -> WarmStart<T> {
    let mut lambda = outcome.state.lambda.clone();
    lambda.resize(grown.n(), T::zero());
    let strategy = LinkValues::from_fn(grown, |i, j| {
        if i < old.n() {
            outcome.strategy.link(old, i, j).unwrap_or(T::zero())
        } else {
            T::zero()
        }
    });
    WarmStart { lambda, strategy }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRun {
    pub rho: f64,
    pub seed: u64,
    /// Time average of optimal minus achieved welfare.
    pub mean_gap: f64,
    pub mean_welfare: f64,
    pub mean_opt_welfare: f64,
    pub refreshes: u64,
    pub final_agents: usize,
    /// Mean per-period increase of the optimal welfare.
    pub delta_v: f64,
}

/// Random streams of one growth run; the refresh stream is separate so every
/// refresh rate sees the same network.
struct Streams {
    network: ChaCha8Rng,
    refresh: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut network = ChaCha8Rng::seed_from_u64(seed);
        network.set_stream(0);
        let mut refresh = ChaCha8Rng::seed_from_u64(seed);
        refresh.set_stream(1);
        Self { network, refresh }
    }
}

/// Simulates one growing network. The design is computed at the start and at
/// every refresh; newcomers carry zero until the next one.
pub fn simulate_growth(
    config: &GrowthConfig,
    model: &UtilityModel<f64>,
    delta: f64,
    rho: f64,
    seed: u64,
    params: &DcrsParams<f64>,
) -> Result<GrowthRun> {
    config.validate()?;
    check_rho(rho)?;
    let r2 = model.uniform_r2()?;
    let mut streams = Streams::new(seed);
    let mut topology = Topology::random(config.initial_agents, config.initial_link_prob, streams.network.gen());
    let mut degrees = topology.degrees();
    let agent_opt = |d: usize| obedient_agent_welfare(r2, d);
    let mut v_opt: f64 = degrees.iter().map(|&d| agent_opt(d)).sum();
    let v_start = v_opt;

    let mut design_topology = topology.clone();
    let mut design = design_with_refresh(&topology, model, delta, rho, params)?;
    let mut refreshes = 0u64;
    let (mut gap_sum, mut welfare_sum, mut opt_sum) = (0.0, 0.0, 0.0);

    for period in 0..config.horizon {
        if period > 0 {
            if streams.network.gen::<f64>() < config.join_prob {
                let links: Vec<usize> = (0..topology.n())
                    .filter(|_| streams.network.gen::<f64>() < config.link_prob)
                    .collect();
                for &j in &links {
                    v_opt -= agent_opt(degrees[j]);
                    degrees[j] += 1;
                    v_opt += agent_opt(degrees[j]);
                }
                degrees.push(links.len());
                v_opt += agent_opt(links.len());
                topology.add_agent(&links)?;
            }
            if streams.refresh.gen::<f64>() < rho {
                refreshes += 1;
                let effective = (1.0 - rho) * delta;
                design = if effective <= 0.0 {
                    zero_design(&topology, params)
                } else {
                    let start = extend_start(&design_topology, &design, &topology);
                    run_dcrs_warm(&topology, model, effective, params, &start)?
                };
                design_topology = topology.clone();
            }
        }
        gap_sum += v_opt - design.welfare;
        welfare_sum += design.welfare;
        opt_sum += v_opt;
    }
    let h = config.horizon as f64;
    Ok(GrowthRun {
        rho,
        seed,
        mean_gap: gap_sum / h,
        mean_welfare: welfare_sum / h,
        mean_opt_welfare: opt_sum / h,
        refreshes,
        final_agents: topology.n(),
        delta_v: if config.horizon > 1 {
            (v_opt - v_start) / (h - 1.0)
        } else {
            0.0
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub mean_gap: f64,
    pub mean_welfare: f64,
    /// Standard error of `mean_gap` across seeds.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    /// Refresh rate with the smallest mean gap.
    pub best_rho: f64,
}

/// Aggregates runs by refresh rate, keeping the order of `grid`.
pub fn summarize_sweep(grid: &[f64], runs: &[GrowthRun]) -> SweepSummary {
    let rows: Vec<SweepRow> = grid
        .iter()
        .map(|&rho| {
            let gaps: Vec<f64> = runs.iter().filter(|r| r.rho == rho).map(|r| r.mean_gap).collect();
            let welfare: Vec<f64> = runs.iter().filter(|r| r.rho == rho).map(|r| r.mean_welfare).collect();
            let k = gaps.len() as f64;
            let mean = gaps.iter().sum::<f64>() / k;
            let var = if gaps.len() > 1 {
                gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            SweepRow {
                rho,
                mean_gap: mean,
                mean_welfare: welfare.iter().sum::<f64>() / k,
                stderr: (var / k).sqrt(),
            }
        })
        .collect();
    let best_rho = rows
        .iter()
        .min_by(|a, b| a.mean_gap.total_cmp(&b.mean_gap))
        .map(|r| r.rho)
        .unwrap_or(f64::NAN);
    SweepSummary { rows, best_rho }
}

/// Runs every `(rho, seed)` pair in order and aggregates.
pub fn sweep_refresh(
    config: &GrowthConfig,
    model: &UtilityModel<f64>,
    delta: f64,
    grid: &[f64],
    seeds: &[u64],
    params: &DcrsParams<f64>,
) -> Result<SweepSummary> {
    if grid.is_empty() {
        return Err(Error::ParameterOutOfRange {
            name: "rho grid size",
            value: 0.0,
        });
    }
    let mut runs = Vec::with_capacity(grid.len() * seeds.len());
    for &rho in grid {
        for &seed in seeds {
            runs.push(simulate_growth(config, model, delta, rho, seed, params)?);
        }
    }
    Ok(summarize_sweep(grid, &runs))
}
