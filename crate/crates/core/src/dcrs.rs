//! Distributed computation of the recommended strategy at the top rating.
//!
//! The design problem
//!
//! ```text
//! maximize   sum_i b_i(sigma_hat_i) - ||sigma_i||_1
//! subject to ||sigma_i||_1 <= delta * b_i(sigma_hat_i)   for every agent i
//! ```
//!
//! is relaxed with one multiplier per agent. Each round every agent learns its
//! neighbors' multipliers, chooses the inbound effort it asks of them by
//! solving a local subproblem in which link `j -> i` is priced at `1 + lambda_j`,
//! sends the chosen values back to the senders, and finally moves its own
//! multiplier along the constraint violation with a projected subgradient step.
//!
//! With a linear cost the local subproblem only pins down the inbound *sum*;
//! how effort is split among equally priced neighbors is arbitrary, and that
//! split decides whether the neighbors' own constraints hold. A plain
//! subgradient iteration therefore keeps flipping between splits on many
//! graphs. Rounds instead solve the subproblem with a proximal term centred on
//! the agent's previous inbound vector (`proximal_weight`); the term vanishes at
//! a fixed point, so converged strategies satisfy the optimality conditions of
//! the original problem. Setting the weight to zero recovers the unregularized
//! subproblem exactly.

use serde::{Deserialize, Serialize};

use crate::error::{AgentSlack, Error, Result};
use crate::scalar::{from_usize, Scalar};
use crate::topology::Topology;
use crate::utility::{estimation_benefit, estimation_marginal, Benefit, LinkValues, UtilityModel};
use crate::welfare::{maximize_on_box, social_welfare_unchecked, split_evenly};

/// Recommended strategy `sigma_ij(theta)` for every link and rating level.
///
/// `levels[theta - 1]` holds the strategy used towards neighbors whose rating
/// is `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StrategyTable<T> {
    levels: Vec<LinkValues<T>>,
}

impl<T: Scalar> StrategyTable<T> {
    pub fn new(levels: Vec<LinkValues<T>>) -> Self {
        assert!(!levels.is_empty(), "strategy table needs at least one level");
        Self { levels }
    }

    /// Two levels: nothing towards low-rated neighbors, `top` towards high-rated ones.
    pub fn binary(topology: &Topology, top: LinkValues<T>) -> Self {
        Self::new(vec![LinkValues::zeros(topology), top])
    }

    /// Number of rating levels `K`.
    pub fn k(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, theta: usize) -> &LinkValues<T> {
        &self.levels[theta - 1]
    }

    pub fn top(&self) -> &LinkValues<T> {
        self.levels.last().expect("non-empty")
    }

    pub fn get(&self, i: usize, pos: usize, theta: usize) -> T {
        self.levels[theta - 1].get(i, pos)
    }

    /// Shapes match `topology`, entries lie in `[0, 1]`, and every link is
    /// non-decreasing in the neighbor's rating.
    pub fn validate(&self, topology: &Topology) -> Result<()> {
        for level in &self.levels {
            level.validate(topology)?;
        }
        for pair in self.levels.windows(2) {
            for i in 0..topology.n() {
                for pos in 0..topology.degree(i) {
                    if pair[0].get(i, pos) > pair[1].get(i, pos) {
                        return Err(Error::ProtocolShape(format!(
                            "strategy on link {i}->{} decreases with rating",
                            topology.neighbors(i)[pos]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct DcrsParams<T> {
    /// Subgradient step `w`.
    pub step: T,
    /// Stop once multipliers and strategies both move less than this.
    pub tolerance: T,
    pub max_iter: usize,
    /// Weight of the proximal term; zero solves the bare subproblem.
    pub proximal_weight: T,
    /// Largest constraint violation the final repair pass may absorb.
    pub repair_tolerance: T,
    pub record_trace: bool,
}

impl<T: Scalar> Default for DcrsParams<T> {
    fn default() -> Self {
        Self {
            step: T::lit(0.01),
            tolerance: T::lit(1e-6),
            max_iter: 100_000,
            proximal_weight: T::lit(1.0),
            repair_tolerance: T::lit(1e-4),
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceEntry<T> {
    pub lambda: Vec<T>,
    pub strategy: LinkValues<T>,
    /// `delta * b_i - ||sigma_i||_1` after the round.
    pub slack: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DcrsState<T> {
    pub lambda: Vec<T>,
    pub iterations: usize,
    pub step: T,
    pub tolerance: T,
    pub trace: Vec<TraceEntry<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DcrsOutcome<T> {
    /// `sigma(K)`.
    pub strategy: LinkValues<T>,
    pub state: DcrsState<T>,
    pub welfare: T,
}

/// What an agent knows about its own benefit function.
#[derive(Clone, Copy)]
pub enum LocalBenefit<'a, T> {
    Estimation { r2: T },
    General(&'a (dyn Fn(&[T]) -> T + Send + Sync)),
}

impl<T: Scalar> LocalBenefit<'_, T> {
    pub fn of(model: &UtilityModel<T>, i: usize) -> LocalBenefit<'_, T> {
        match model.benefit_family() {
            Benefit::Estimation { .. } => LocalBenefit::Estimation {
                r2: model.r2(i).expect("estimation form"),
            },
            Benefit::Custom { f, .. } => LocalBenefit::General(f.as_ref()),
        }
    }

    pub fn eval(&self, inbound: &[T]) -> T {
        match self {
            LocalBenefit::Estimation { r2 } => {
                estimation_benefit(*r2, inbound.iter().copied().sum())
            }
            LocalBenefit::General(f) => f(inbound),
        }
    }
}

/// Maximizes `(1 + lambda_i delta) b_i(x) - sum_j (1 + lambda_j) x_j` over `x in [0,1]^m`.
///
/// For the estimation benefit effort is bought from the cheapest neighbors
/// first; equally priced neighbors share evenly.
pub fn solve_subproblem<T: Scalar>(
    benefit: &LocalBenefit<'_, T>,
    own_lambda: T,
    neighbor_lambdas: &[T],
    delta: T,
) -> Vec<T> {
    let m = neighbor_lambdas.len();
    if m == 0 {
        return Vec::new();
    }
    let weight = T::one() + own_lambda * delta;
    match benefit {
        LocalBenefit::Estimation { r2 } => {
            let scale = weight * *r2;
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| {
                neighbor_lambdas[a]
                    .partial_cmp(&neighbor_lambdas[b])
                    .expect("finite multipliers")
            });
            let mut out = vec![T::zero(); m];
            let mut total = T::zero();
            let mut start = 0;
            while start < m {
                let lambda = neighbor_lambdas[order[start]];
                let mut end = start;
                while end < m && neighbor_lambdas[order[end]] == lambda {
                    end += 1;
                }
                let price = T::one() + lambda;
                let target = (scale / price).sqrt() - T::one();
                if target <= total {
                    break;
                }
                let capacity: T = from_usize(end - start);
                let amount = target.min(total + capacity) - total;
                for (k, v) in split_evenly(amount, end - start).into_iter().enumerate() {
                    out[order[start + k]] = v;
                }
                total += amount;
                if amount < capacity {
                    break;
                }
                start = end;
            }
            out
        }
        LocalBenefit::General(f) => maximize_on_box(
            |x| {
                weight * f(x)
                    - x.iter()
                        .zip(neighbor_lambdas)
                        .map(|(v, l)| (T::one() + *l) * *v)
                        .sum::<T>()
            },
            &vec![T::zero(); m],
        ),
    }
}

/// [`solve_subproblem`] with the extra term `-(weight / 2) ||x - anchor||^2`.
pub fn solve_subproblem_proximal<T: Scalar>(
    benefit: &LocalBenefit<'_, T>,
    own_lambda: T,
    neighbor_lambdas: &[T],
    delta: T,
    anchor: &[T],
    weight: T,
) -> Vec<T> {
    if weight <= T::zero() {
        return solve_subproblem(benefit, own_lambda, neighbor_lambdas, delta);
    }
    let m = neighbor_lambdas.len();
    if m == 0 {
        return Vec::new();
    }
    let gain = T::one() + own_lambda * delta;
    match benefit {
        LocalBenefit::Estimation { r2 } => {
            let scale = gain * *r2;
            // Given the marginal benefit nu, each link sits at its clamped
            // stationary point; solve for the inbound sum consistent with nu.
            let links = |nu: T| {
                anchor.iter().zip(neighbor_lambdas).map(move |(a, l)| {
                    (*a + (nu - (T::one() + *l)) / weight).clamp_unit()
                })
            };
            let residual = |s: T| -> (T, T) {
                let nu = estimation_marginal(scale, s);
                let mut sum = T::zero();
                let mut free = 0usize;
                for x in links(nu) {
                    if x > T::zero() && x < T::one() {
                        free += 1;
                    }
                    sum += x;
                }
                let dnu = -(nu + nu) / (T::one() + s);
                (sum - s, from_usize::<T>(free) / weight * dnu - T::one())
            };
            let mut lo = T::zero();
            let mut hi: T = from_usize(m);
            let mut s = anchor.iter().copied().sum::<T>().max(lo).min(hi);
            let tol = T::epsilon() * T::lit(8.0) * (T::one() + hi);
            for _ in 0..200 {
                let (f, df) = residual(s);
                if f.abs() <= tol {
                    break;
                }
                if f > T::zero() {
                    lo = s;
                } else {
                    hi = s;
                }
                if hi - lo <= tol {
                    break;
                }
                let newton = s - f / df;
                s = if newton > lo && newton < hi {
                    newton
                } else {
                    (lo + hi) / T::lit(2.0)
                };
            }
            links(estimation_marginal(scale, s)).collect()
        }
        LocalBenefit::General(f) => {
            let half = weight / T::lit(2.0);
            maximize_on_box(
                |x| {
                    gain * f(x)
                        - x.iter()
                            .zip(neighbor_lambdas)
                            .zip(anchor)
                            .map(|((v, l), a)| (T::one() + *l) * *v + half * (*v - *a) * (*v - *a))
                            .sum::<T>()
                },
                anchor,
            )
        }
    }
}

/// `[lambda + w (||sigma_i||_1 - delta b_i)]^+`.
pub fn update_multiplier<T: Scalar>(lambda: T, outbound_sum: T, benefit: T, step: T, delta: T) -> T {
    (lambda + step * (outbound_sum - delta * benefit)).max(T::zero())
}

/// Per-agent incentive slack `delta * b_i(sigma_hat_i) - ||sigma_i||_1`.
pub fn check_incentive_feasibility<T: Scalar>(
    strategy: &LinkValues<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
) -> Vec<T> {
    (0..topology.n())
        .map(|i| delta * model.benefit_in(topology, i, strategy) - strategy.outbound_sum(i))
        .collect()
}

/// Slack report for the agents whose constraint fails by more than `tolerance`.
pub fn incentive_violations<T: Scalar>(slack: &[T], tolerance: T) -> Vec<AgentSlack> {
    slack
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < -tolerance)
        .map(|(agent, s)| AgentSlack {
            agent,
            slack: s.as_f64(),
        })
        .collect()
}

/// Dual function: the maximum of the relaxed Lagrangian at `lambda`.
pub fn dual_value<T: Scalar>(
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    lambda: &[T],
) -> T {
    let mut strategy = LinkValues::zeros(topology);
    let mut total = T::zero();
    for i in 0..topology.n() {
        let benefit = LocalBenefit::of(model, i);
        let nl = neighbor_values(topology, i, lambda);
        let inbound = solve_subproblem(&benefit, lambda[i], &nl, delta);
        total += (T::one() + lambda[i] * delta) * benefit.eval(&inbound);
        strategy.set_inbound(topology, i, &inbound);
    }
    for (i, l) in lambda.iter().enumerate() {
        total -= (T::one() + *l) * strategy.outbound_sum(i);
    }
    total
}

fn neighbor_values<T: Scalar>(topology: &Topology, i: usize, values: &[T]) -> Vec<T> {
    topology.neighbors(i).iter().map(|&j| values[j]).collect()
}

/// Runs synchronous design rounds until multipliers and strategies settle.
pub fn run_dcrs<T: Scalar>(
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    params: &DcrsParams<T>,
) -> Result<DcrsOutcome<T>> {
    run_dcrs_inner(topology, model, delta, params, None)
}

/// Starting point for [`run_dcrs_warm`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WarmStart<T> {
    pub lambda: Vec<T>,
    pub strategy: LinkValues<T>,
}

/// [`run_dcrs`] started from earlier multipliers and strategy instead of the
/// unconstrained optimum. Converged points are the same; only the path differs.
pub fn run_dcrs_warm<T: Scalar>(
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    params: &DcrsParams<T>,
    start: &WarmStart<T>,
) -> Result<DcrsOutcome<T>> {
    start.strategy.validate(topology)?;
    if start.lambda.len() != topology.n() {
        return Err(Error::DimensionMismatch {
            agent: 0,
            expected: topology.n(),
            actual: start.lambda.len(),
        });
    }
    if let Some(l) = start.lambda.iter().find(|l| !(**l >= T::zero())) {
        return Err(Error::ParameterOutOfRange {
            name: "lambda",
            value: l.as_f64(),
        });
    }
    run_dcrs_inner(topology, model, delta, params, Some(start))
}

fn run_dcrs_inner<T: Scalar>(
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    params: &DcrsParams<T>,
    start: Option<&WarmStart<T>>,
) -> Result<DcrsOutcome<T>> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::ParameterOutOfRange {
            name: "delta",
            value: delta.as_f64(),
        });
    }
    if !(params.step > T::zero()) {
        return Err(Error::ParameterOutOfRange {
            name: "step",
            value: params.step.as_f64(),
        });
    }
    if !(params.tolerance > T::zero()) {
        return Err(Error::ParameterOutOfRange {
            name: "tolerance",
            value: params.tolerance.as_f64(),
        });
    }
    let n = topology.n();
    let mut state = DcrsState {
        lambda: vec![T::zero(); n],
        iterations: 0,
        step: params.step,
        tolerance: params.tolerance,
        trace: Vec::new(),
    };
    // With delta * r_i^2 <= 1 everywhere, b_i(s) < r_i^2 s forces total
    // outbound above discounted benefit for any nonzero profile.
    let hopeless = (0..n).all(|i| model.r2(i).is_some_and(|r2| delta * r2 <= T::one()));
    if topology.edge_count() == 0 || hopeless {
        return Ok(DcrsOutcome {
            strategy: LinkValues::zeros(topology),
            state,
            welfare: T::zero(),
        });
    }

    let benefits: Vec<LocalBenefit<'_, T>> = (0..n).map(|i| LocalBenefit::of(model, i)).collect();
    let mut strategy = LinkValues::zeros(topology);
    match start {
        Some(warm) => {
            state.lambda.clone_from(&warm.lambda);
            strategy.clone_from(&warm.strategy);
        }
        None => {
            for (i, benefit) in benefits.iter().enumerate() {
                let inbound =
                    solve_subproblem(benefit, T::zero(), &vec![T::zero(); topology.degree(i)], delta);
                strategy.set_inbound(topology, i, &inbound);
            }
        }
    }

    let mut converged = false;
    let mut last_change = T::infinity();
    let mut benefit_values = vec![T::zero(); n];
    while state.iterations < params.max_iter {
        let lambda = &state.lambda;
        // Round part one: multipliers in, inbound requests out.
        let mut next = LinkValues::zeros(topology);
        for (i, benefit) in benefits.iter().enumerate() {
            let nl = neighbor_values(topology, i, lambda);
            let anchor = strategy.inbound(topology, i);
            let inbound = solve_subproblem_proximal(
                benefit,
                lambda[i],
                &nl,
                delta,
                &anchor,
                params.proximal_weight,
            );
            benefit_values[i] = benefit.eval(&inbound);
            next.set_inbound(topology, i, &inbound);
        }
        // Round part two: each agent now knows its outbound strategy.
        let updated: Vec<T> = (0..n)
            .map(|i| {
                update_multiplier(
                    lambda[i],
                    next.outbound_sum(i),
                    benefit_values[i],
                    params.step,
                    delta,
                )
            })
            .collect();
        let lambda_change = updated
            .iter()
            .zip(lambda)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max);
        let strategy_change = next.max_abs_diff(&strategy);
        last_change = lambda_change;
        state.lambda = updated;
        strategy = next;
        state.iterations += 1;
        if params.record_trace {
            let slack = (0..n)
                .map(|i| delta * benefit_values[i] - strategy.outbound_sum(i))
                .collect();
            state.trace.push(TraceEntry {
                lambda: state.lambda.clone(),
                strategy: strategy.clone(),
                slack,
            });
        }
        if lambda_change < params.tolerance && strategy_change < params.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        let trace = if params.record_trace {
            state
                .trace
                .iter()
                .map(|e| e.lambda.iter().map(|v| v.as_f64()).collect())
                .collect()
        } else {
            vec![state.lambda.iter().map(|v| v.as_f64()).collect()]
        };
        return Err(Error::NonConvergence {
            iterations: state.iterations,
            last_change: last_change.as_f64(),
            trace,
        });
    }

    repair_feasibility(topology, model, delta, &mut strategy, params.repair_tolerance)?;
    let welfare = social_welfare_unchecked(topology, model, &strategy);
    Ok(DcrsOutcome {
        strategy,
        state,
        welfare,
    })
}

/// Scales down the outbound effort of any agent whose constraint is violated
/// by at most `tolerance` until it is tight, repeating while the reduced
/// effort pushes neighbors into violation.
fn repair_feasibility<T: Scalar>(
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    strategy: &mut LinkValues<T>,
    tolerance: T,
) -> Result<()> {
    let slack = check_incentive_feasibility(strategy, topology, model, delta);
    let violations = incentive_violations(&slack, tolerance);
    if !violations.is_empty() {
        return Err(Error::Infeasible(violations));
    }
    for _ in 0..10_000 {
        let mut changed = false;
        for i in 0..topology.n() {
            let cost = strategy.outbound_sum(i);
            let allowance = delta * model.benefit_in(topology, i, strategy);
            if cost - allowance > T::epsilon() * T::lit(16.0) * (T::one() + cost) {
                let factor = if cost > T::zero() {
                    (allowance / cost).max(T::zero())
                } else {
                    T::zero()
                };
                strategy.scale_outbound(i, factor);
                changed = true;
            }
        }
        if !changed {
            return Ok(());
        }
    }
    let slack = check_incentive_feasibility(strategy, topology, model, delta);
    Err(Error::Infeasible(incentive_violations(&slack, T::lit(1e-6))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn est(r2: f64) -> LocalBenefit<'static, f64> {
        LocalBenefit::Estimation { r2 }
    }

    #[test]
    fn subproblem_without_multipliers_matches_obedient() {
        let v = solve_subproblem(&est(4.0), 0.0, &[0.0, 0.0], 1.0);
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn subproblem_buys_from_cheapest_neighbor() {
        // Prices (1, 2): 4 / (1 + s)^2 = 1 gives s = 1, all from the first.
        let v = solve_subproblem(&est(4.0), 0.0, &[0.0, 1.0], 1.0);
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-12);
        assert_eq!(v[1], 0.0);
        // Order of neighbors does not matter.
        let v = solve_subproblem(&est(4.0), 0.0, &[1.0, 0.0], 1.0);
        assert_eq!(v[0], 0.0);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn subproblem_spills_into_next_price_level() {
        // r2 = 16 wants s = 3 at price 1; one cheap link saturates, the next
        // level (price 2) is filled up to 16 / (1 + s)^2 = 2.
        let v = solve_subproblem(&est(16.0), 0.0, &[0.0, 1.0, 1.0], 1.0);
        assert_eq!(v[0], 1.0);
        let s2 = 8f64.sqrt() - 1.0;
        assert_abs_diff_eq!(v[1] + v[2], s2 - 1.0, epsilon = 1e-12);
        assert_eq!(v[1], v[2]);
    }

    #[test]
    fn own_multiplier_grows_inbound_toward_cap() {
        let mut last = 0.0;
        for lambda in [0.0, 1.0, 10.0, 100.0, 1e4] {
            let s: f64 = solve_subproblem(&est(4.0), lambda, &[0.0, 0.0, 0.0], 1.0).iter().sum();
            assert!(s >= last);
            last = s;
        }
        assert_abs_diff_eq!(last, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_neighborhood() {
        assert!(solve_subproblem(&est(4.0), 0.0, &[], 1.0).is_empty());
        assert!(solve_subproblem_proximal(&est(4.0), 0.0, &[], 1.0, &[], 1.0).is_empty());
    }

    #[test]
    fn proximal_subproblem_fixed_point_is_exact_optimum() {
        let exact = solve_subproblem(&est(4.0), 0.3, &[0.0, 0.5], 0.9);
        let prox = solve_subproblem_proximal(&est(4.0), 0.3, &[0.0, 0.5], 0.9, &exact, 1.0);
        for (a, b) in exact.iter().zip(&prox) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        // Zero weight falls back to the bare subproblem.
        let bare = solve_subproblem_proximal(&est(4.0), 0.3, &[0.0, 0.5], 0.9, &[0.2, 0.2], 0.0);
        assert_eq!(bare, exact);
    }

    #[test]
    fn proximal_subproblem_stationarity() {
        let anchor = [0.4, 0.1, 0.9];
        let lambdas = [0.2, 0.0, 1.5];
        let (lambda_i, delta, weight, r2) = (0.7, 0.8, 2.0, 8.0);
        let x = solve_subproblem_proximal(&est(r2), lambda_i, &lambdas, delta, &anchor, weight);
        let s: f64 = x.iter().sum();
        let nu = (1.0 + lambda_i * delta) * r2 / ((1.0 + s) * (1.0 + s));
        for k in 0..3 {
            let grad = nu - (1.0 + lambdas[k]) - weight * (x[k] - anchor[k]);
            if x[k] > 0.0 && x[k] < 1.0 {
                assert_abs_diff_eq!(grad, 0.0, epsilon = 1e-9);
            } else if x[k] == 0.0 {
                assert!(grad <= 1e-9);
            } else {
                assert!(grad >= -1e-9);
            }
        }
    }

    #[test]
    fn multiplier_updates() {
        assert_abs_diff_eq!(update_multiplier(0.0, 3.0, 2.0, 0.1, 1.0), 0.1, epsilon = 1e-15);
        assert_eq!(update_multiplier(0.05, 1.0, 2.0, 0.1, 1.0), 0.0);
        assert_eq!(update_multiplier(0.3, 2.0, 2.0, 0.1, 1.0), 0.3);
    }

    #[test]
    fn ring_design_equals_obedient_optimum() {
        let t = Topology::ring(4);
        let m = UtilityModel::estimation(4.0);
        let out = run_dcrs(&t, &m, 1.0, &DcrsParams::default()).unwrap();
        assert!(out.strategy.as_nested().iter().flatten().all(|&v: &f64| (v - 0.5).abs() < 1e-12));
        assert!(out.state.lambda.iter().all(|&l| l == 0.0));
        assert_abs_diff_eq!(out.welfare, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn star_design_matches_kkt_solution() {
        let t = Topology::star(4);
        let m = UtilityModel::estimation(4.0);
        let out = run_dcrs(&t, &m, 1.0, &DcrsParams::default()).unwrap();
        assert_abs_diff_eq!(out.welfare, 27.0 / 7.0, epsilon = 1e-4);
        for leaf in 1..4 {
            assert_abs_diff_eq!(out.strategy.link(&t, leaf, 0).unwrap(), 3.0 / 7.0, epsilon = 1e-3);
            assert_abs_diff_eq!(out.strategy.link(&t, 0, leaf).unwrap(), 0.75, epsilon = 1e-3);
        }
        let slack = check_incentive_feasibility(&out.strategy, &t, &m, 1.0);
        assert!(slack.iter().all(|&s| s >= -1e-6));
    }

    #[test]
    fn warm_start_reaches_same_design() {
        let t = Topology::random(8, 0.5, 4);
        let m = UtilityModel::estimation(4.0);
        let cold = run_dcrs(&t, &m, 0.7, &DcrsParams::default()).unwrap();
        let start = WarmStart {
            lambda: cold.state.lambda.clone(),
            strategy: cold.strategy.clone(),
        };
        let warm = run_dcrs_warm(&t, &m, 0.7, &DcrsParams::default(), &start).unwrap();
        assert!(warm.state.iterations < 10);
        assert_abs_diff_eq!(warm.welfare, cold.welfare, epsilon = 1e-6);
        let bad = WarmStart {
            lambda: vec![0.0; 3],
            strategy: cold.strategy.clone(),
        };
        assert!(run_dcrs_warm(&t, &m, 0.7, &DcrsParams::default(), &bad).is_err());
    }

    #[test]
    fn edgeless_design_is_empty() {
        let t = Topology::empty(3);
        let out = run_dcrs(&t, &UtilityModel::estimation(4.0), 1.0, &DcrsParams::default()).unwrap();
        assert_eq!(out.state.iterations, 0);
        assert_eq!(out.welfare, 0.0);
        assert!(out.strategy.is_zero());
    }

    #[test]
    fn weak_incentives_give_zero_design() {
        let t = Topology::ring(5);
        let out = run_dcrs(&t, &UtilityModel::estimation(2.0), 0.5, &DcrsParams::default()).unwrap();
        assert_eq!(out.state.iterations, 0);
        assert!(out.strategy.is_zero());
        assert_eq!(out.welfare, 0.0);
    }

    #[test]
    fn trace_length_matches_iterations() {
        let t = Topology::star(4);
        let params = DcrsParams {
            record_trace: true,
            ..DcrsParams::default()
        };
        let out = run_dcrs(&t, &UtilityModel::estimation(4.0), 1.0, &params).unwrap();
        assert_eq!(out.state.trace.len(), out.state.iterations);
        assert!(out.state.trace.iter().all(|e| e.lambda.iter().all(|&l| l >= 0.0)));
    }

    #[test]
    fn non_convergence_is_reported() {
        let t = Topology::star(4);
        let params = DcrsParams {
            max_iter: 3,
            ..DcrsParams::default()
        };
        match run_dcrs(&t, &UtilityModel::estimation(4.0), 1.0, &params) {
            Err(Error::NonConvergence { iterations, trace, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(trace.len(), 1);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = Topology::ring(4);
        let m = UtilityModel::estimation(4.0);
        assert!(run_dcrs(&t, &m, 0.0, &DcrsParams::default()).is_err());
        assert!(run_dcrs(&t, &m, 1.5, &DcrsParams::default()).is_err());
        let bad = DcrsParams {
            step: 0.0,
            ..DcrsParams::default()
        };
        assert!(run_dcrs(&t, &m, 1.0, &bad).is_err());
    }

    #[test]
    fn feasibility_slacks() {
        let m = UtilityModel::estimation(4.0);
        let star = Topology::star(4);
        let (obedient, _) = crate::welfare::solve_obedient(&star, &m);
        let slack = check_incentive_feasibility(&obedient, &star, &m, 1.0);
        assert_abs_diff_eq!(slack[0], -1.0, epsilon = 1e-12);

        let ring = Topology::ring(4);
        let (obedient, _) = crate::welfare::solve_obedient(&ring, &m);
        let slack = check_incentive_feasibility(&obedient, &ring, &m, 1.0);
        assert!(slack.iter().all(|&s: &f64| (s - 1.0).abs() < 1e-12));

        let zero = LinkValues::zeros(&star);
        assert!(check_incentive_feasibility(&zero, &star, &m, 1.0)
            .iter()
            .all(|&s| s == 0.0));
    }

    #[test]
    fn strategy_table_monotonicity() {
        let t = Topology::ring(3);
        let table = StrategyTable::binary(&t, LinkValues::filled(&t, 0.4));
        assert!(table.validate(&t).is_ok());
        assert_eq!(table.k(), 2);
        let bad = StrategyTable::new(vec![LinkValues::filled(&t, 0.5), LinkValues::filled(&t, 0.4)]);
        assert!(bad.validate(&t).is_err());
    }

    #[test]
    fn single_precision_ring() {
        let t = Topology::ring(4);
        let m = UtilityModel::<f32>::estimation(4.0);
        let out = run_dcrs(&t, &m, 1.0, &DcrsParams::default()).unwrap();
        assert!((out.welfare - 4.0).abs() < 1e-5);
    }
}
