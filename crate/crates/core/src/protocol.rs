//! Rating protocols: update rule, binary design, value functions and the
//! one-shot deviation check.
//!
//! An agent's rating moves after every period according to its public signal.
//! On a bad signal it drops one level with probability `alpha`, on a good one
//! it climbs one level with probability `beta`; ratings stay within `1..=K`.
//! Neighbors follow the strategy table, so an agent's benefit is set by its
//! own rating while its sharing cost is set by its neighbors' ratings.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dcrs::{check_incentive_feasibility, incentive_violations, StrategyTable};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::Topology;
use crate::utility::{LinkValues, UtilityModel};

/// Constraint slack below which a strategy is treated as infeasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// Deviation gains at or below this count as unprofitable.
pub const PPE_TOLERANCE: f64 = 1e-9;

/// Binary public signal about an agent's compliance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Signal {
    Deviated,
    Followed,
}

impl Signal {
    pub fn from_compliance(followed: bool) -> Self {
        if followed {
            Signal::Followed
        } else {
            Signal::Deviated
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Signal::Deviated => Signal::Followed,
            Signal::Followed => Signal::Deviated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RatingProtocol<T> {
    k: usize,
    strategy: StrategyTable<T>,
    /// `alpha[i][theta - 1]`: demotion probability on a bad signal.
    alpha: Vec<Vec<T>>,
    /// `beta[i][theta - 1]`: promotion probability on a good signal.
    beta: Vec<Vec<T>>,
}

impl<T: Scalar> RatingProtocol<T> {
    pub fn new(
        topology: &Topology,
        strategy: StrategyTable<T>,
        alpha: Vec<Vec<T>>,
        beta: Vec<Vec<T>>,
    ) -> Result<Self> {
        let protocol = Self {
            k: strategy.k(),
            strategy,
            alpha,
            beta,
        };
        protocol.validate(topology)?;
        Ok(protocol)
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        if self.k < 2 {
            return Err(Error::ProtocolShape(format!(
                "need at least two ratings, got {}",
                self.k
            )));
        }
        if self.strategy.k() != self.k {
            return Err(Error::ProtocolShape(format!(
                "strategy table has {} levels for K = {}",
                self.strategy.k(),
                self.k
            )));
        }
        self.strategy.validate(topology)?;
        for (name, table) in [("alpha", &self.alpha), ("beta", &self.beta)] {
            if table.len() != topology.n() {
                return Err(Error::ProtocolShape(format!(
                    "{name} has {} rows for {} agents",
                    table.len(),
                    topology.n()
                )));
            }
            for (i, row) in table.iter().enumerate() {
                if row.len() != self.k {
                    return Err(Error::ProtocolShape(format!(
                        "{name}[{i}] has {} entries for K = {}",
                        row.len(),
                        self.k
                    )));
                }
                if let Some(v) = row.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
                    return Err(Error::ParameterOutOfRange {
                        name,
                        value: v.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn strategy(&self) -> &StrategyTable<T> {
        &self.strategy
    }

    pub fn alpha(&self, i: usize, theta: usize) -> T {
        self.alpha[i][theta - 1]
    }

    pub fn beta(&self, i: usize, theta: usize) -> T {
        self.beta[i][theta - 1]
    }

    pub fn alphas(&self) -> &[Vec<T>] {
        &self.alpha
    }

    pub fn betas(&self) -> &[Vec<T>] {
        &self.beta
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str, topology: &Topology) -> Result<Self> {
        let protocol: Self = serde_json::from_str(text)?;
        protocol.validate(topology)?;
        Ok(protocol)
    }

    /// Possible next ratings and their probabilities.
    pub fn transition_probabilities(&self, i: usize, theta: usize, signal: Signal) -> [(usize, T); 2] {
        match signal {
            Signal::Deviated => {
                let a = self.alpha(i, theta);
                [((theta - 1).max(1), a), (theta, T::one() - a)]
            }
            Signal::Followed => {
                let b = self.beta(i, theta);
                [((theta + 1).min(self.k), b), (theta, T::one() - b)]
            }
        }
    }
}

/// Samples the next rating with one uniform draw.
pub fn rating_transition<T: Scalar, R: Rng + ?Sized>(
    protocol: &RatingProtocol<T>,
    i: usize,
    theta: usize,
    signal: Signal,
    rng: &mut R,
) -> usize {
    let u: f64 = rng.gen();
    let [(moved, p), (stay, _)] = protocol.transition_probabilities(i, theta, signal);
    if u < p.as_f64() {
        moved
    } else {
        stay
    }
}

/// Long-run fraction of time a compliant agent spends at the high rating of a
/// binary protocol.
pub fn stationary_high_fraction<T: Scalar>(alpha: T, beta: T, epsilon: T) -> Result<T> {
    if !(epsilon >= T::zero() && epsilon < T::one()) {
        return Err(Error::ParameterOutOfRange {
            name: "epsilon",
            value: epsilon.as_f64(),
        });
    }
    if epsilon == T::zero() {
        return Ok(T::one());
    }
    let up = (T::one() - epsilon) * beta;
    let total = epsilon * alpha + up;
    if total <= T::zero() {
        return Err(Error::UndefinedStationary);
    }
    Ok(up / total)
}

fn check_discount<T: Scalar>(delta: T, upper_inclusive: bool) -> Result<()> {
    let ok = delta >= T::zero() && (delta < T::one() || (upper_inclusive && delta == T::one()));
    if ok {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: "delta",
            value: delta.as_f64(),
        })
    }
}

fn check_epsilon<T: Scalar>(epsilon: T) -> Result<()> {
    if epsilon >= T::zero() && epsilon < T::one() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: "epsilon",
            value: epsilon.as_f64(),
        })
    }
}

fn ensure_feasible<T: Scalar>(
    topology: &Topology,
    top: &LinkValues<T>,
    model: &UtilityModel<T>,
    delta: T,
) -> Result<Vec<T>> {
    top.validate(topology)?;
    let slack = check_incentive_feasibility(top, topology, model, delta);
    let violations = incentive_violations(&slack, T::lit(FEASIBILITY_TOLERANCE));
    if violations.is_empty() {
        Ok(slack)
    } else {
        Err(Error::Infeasible(violations))
    }
}

/// Binary protocol with full promotion and the smallest demotion probability
/// that keeps compliance optimal: `alpha_i = ||sigma_i|| / (delta b_i)`.
pub fn design_binary_protocol<T: Scalar>(
    topology: &Topology,
    top: &LinkValues<T>,
    model: &UtilityModel<T>,
    delta: T,
) -> Result<RatingProtocol<T>> {
    check_discount(delta, true)?;
    if delta <= T::zero() {
        return Err(Error::ParameterOutOfRange {
            name: "delta",
            value: delta.as_f64(),
        });
    }
    ensure_feasible(topology, top, model, delta)?;
    let alpha = (0..topology.n())
        .map(|i| {
            let cost = top.outbound_sum(i);
            let a = if cost > T::zero() {
                (cost / (delta * model.benefit_in(topology, i, top))).clamp_unit()
            } else {
                T::zero()
            };
            vec![T::zero(), a]
        })
        .collect();
    let beta = vec![vec![T::one(); 2]; topology.n()];
    RatingProtocol::new(
        topology,
        StrategyTable::binary(topology, top.clone()),
        alpha,
        beta,
    )
}

/// Binary protocol with certain demotion and certain promotion.
pub fn construct_appendix_protocol<T: Scalar>(
    topology: &Topology,
    top: &LinkValues<T>,
    model: &UtilityModel<T>,
    delta: T,
) -> Result<RatingProtocol<T>> {
    check_discount(delta, true)?;
    ensure_feasible(topology, top, model, delta)?;
    RatingProtocol::new(
        topology,
        StrategyTable::binary(topology, top.clone()),
        vec![vec![T::zero(), T::one()]; topology.n()],
        vec![vec![T::one(); 2]; topology.n()],
    )
}

/// Lower bounds on the binary update probabilities for one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UpdateBounds<T> {
    pub cost: T,
    pub benefit: T,
    pub delta: T,
    pub beta_min: T,
}

impl<T: Scalar> UpdateBounds<T> {
    /// Smallest demotion probability compatible with promotion probability `beta`.
    pub fn alpha_min(&self, beta: T) -> T {
        (T::one() - self.delta * (T::one() - beta)) / self.delta * self.cost / self.benefit
    }

    pub fn admits(&self, alpha: T, beta: T, tolerance: T) -> bool {
        beta >= self.beta_min - tolerance && alpha >= self.alpha_min(beta) - tolerance
    }
}

pub fn feasible_update_bounds<T: Scalar>(
    topology: &Topology,
    i: usize,
    top: &LinkValues<T>,
    model: &UtilityModel<T>,
    delta: T,
) -> Result<UpdateBounds<T>> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::ParameterOutOfRange {
            name: "delta",
            value: delta.as_f64(),
        });
    }
    let cost = top.outbound_sum(i);
    let benefit = model.benefit_in(topology, i, top);
    if benefit <= cost {
        return Err(Error::DegenerateBounds {
            agent: i,
            benefit: benefit.as_f64(),
            cost: cost.as_f64(),
        });
    }
    Ok(UpdateBounds {
        cost,
        benefit,
        delta,
        beta_min: (T::one() - delta) / delta * cost / (benefit - cost),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMode {
    Discounted,
    /// Relative values of the average-reward chain, zero at the top rating.
    AverageReward,
}

/// Compliant continuation values per agent and rating, neighbors held at the top rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ValueTable<T> {
    pub mode: ValueMode,
    /// `values[i][theta - 1]`.
    pub values: Vec<Vec<T>>,
    /// Long-run average reward per agent; only in average-reward mode.
    pub average: Option<Vec<T>>,
}

impl<T: Scalar> ValueTable<T> {
    pub fn value(&self, i: usize, theta: usize) -> T {
        self.values[i][theta - 1]
    }

    pub fn is_monotone(&self, tolerance: T) -> bool {
        self.values
            .iter()
            .all(|row| row.windows(2).all(|w| w[0] <= w[1] + tolerance))
    }
}

/// Stage payoffs `(comply, deviate to zero)` per own rating.
fn stage_payoffs<T: Scalar>(
    protocol: &RatingProtocol<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    i: usize,
) -> (Vec<f64>, Vec<f64>) {
    let cost = protocol.strategy.top().outbound_sum(i).as_f64();
    let benefit: Vec<f64> = (1..=protocol.k)
        .map(|theta| {
            model
                .benefit_in(topology, i, protocol.strategy.level(theta))
                .as_f64()
        })
        .collect();
    (benefit.iter().map(|b| b - cost).collect(), benefit)
}

/// Rating chain of agent `i` when its actual behaviour is `followed`.
fn chain<T: Scalar>(protocol: &RatingProtocol<T>, i: usize, followed: bool, epsilon: f64) -> DMatrix<f64> {
    let k = protocol.k;
    let good = if followed { 1.0 - epsilon } else { epsilon };
    let mut p = DMatrix::zeros(k, k);
    for theta in 1..=k {
        for (signal, weight) in [(Signal::Followed, good), (Signal::Deviated, 1.0 - good)] {
            for (next, prob) in protocol.transition_probabilities(i, theta, signal) {
                p[(theta - 1, next - 1)] += weight * prob.as_f64();
            }
        }
    }
    p
}

fn discounted_values(p: &DMatrix<f64>, reward: &[f64], delta: f64) -> Vec<f64> {
    let k = reward.len();
    let a = DMatrix::identity(k, k) - p * delta;
    a.lu()
        .solve(&DVector::from_column_slice(reward))
        .expect("I - delta P is invertible for delta < 1")
        .iter()
        .copied()
        .collect()
}

/// Average reward and relative values with the top rating pinned at zero.
fn relative_values(p: &DMatrix<f64>, reward: &[f64], agent: usize) -> Result<(f64, Vec<f64>)> {
    let k = reward.len();
    // Unknowns: gain, then h(1..K-1).
    let mut a = DMatrix::zeros(k, k);
    for row in 0..k {
        a[(row, 0)] = 1.0;
        for col in 0..k - 1 {
            let identity = if row == col { 1.0 } else { 0.0 };
            a[(row, col + 1)] = identity - p[(row, col)];
        }
    }
    let lu = a.lu();
    if lu.determinant().abs() < 1e-12 {
        return Err(Error::MultichainRating(agent));
    }
    let x = lu
        .solve(&DVector::from_column_slice(reward))
        .ok_or(Error::MultichainRating(agent))?;
    let mut h: Vec<f64> = x.iter().skip(1).copied().collect();
    h.push(0.0);
    Ok((x[0], h))
}

/// Discounted compliant values; `delta = 1` has no finite values, use
/// [`average_reward_values`] instead.
pub fn value_functions<T: Scalar>(
    protocol: &RatingProtocol<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    epsilon: T,
) -> Result<ValueTable<T>> {
    if delta == T::one() {
        return Err(Error::UndiscountedValues);
    }
    check_discount(delta, false)?;
    check_epsilon(epsilon)?;
    let values = (0..topology.n())
        .map(|i| {
            let (reward, _) = stage_payoffs(protocol, topology, model, i);
            let p = chain(protocol, i, true, epsilon.as_f64());
            discounted_values(&p, &reward, delta.as_f64())
                .into_iter()
                .map(T::lit)
                .collect()
        })
        .collect();
    Ok(ValueTable {
        mode: ValueMode::Discounted,
        values,
        average: None,
    })
}

pub fn average_reward_values<T: Scalar>(
    protocol: &RatingProtocol<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    epsilon: T,
) -> Result<ValueTable<T>> {
    check_epsilon(epsilon)?;
    let mut values = Vec::with_capacity(topology.n());
    let mut average = Vec::with_capacity(topology.n());
    for i in 0..topology.n() {
        let (reward, _) = stage_payoffs(protocol, topology, model, i);
        let p = chain(protocol, i, true, epsilon.as_f64());
        let (g, h) = relative_values(&p, &reward, i)?;
        values.push(h.into_iter().map(T::lit).collect());
        average.push(T::lit(g));
    }
    Ok(ValueTable {
        mode: ValueMode::AverageReward,
        values,
        average: Some(average),
    })
}

/// Values in whichever mode suits `delta`.
pub fn compliant_values<T: Scalar>(
    protocol: &RatingProtocol<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    epsilon: T,
) -> Result<ValueTable<T>> {
    if delta == T::one() {
        average_reward_values(protocol, topology, model, epsilon)
    } else {
        value_functions(protocol, topology, model, delta, epsilon)
    }
}

/// Gain from the best one-shot deviation, per agent and rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PpeReport<T> {
    /// `gains[i][theta - 1]`.
    pub gains: Vec<Vec<T>>,
}

impl<T: Scalar> PpeReport<T> {
    pub fn gain(&self, i: usize, theta: usize) -> T {
        self.gains[i][theta - 1]
    }

    pub fn max_gain(&self) -> T {
        self.gains
            .iter()
            .flatten()
            .copied()
            .fold(T::neg_infinity(), T::max)
    }

    /// `(agent, rating, gain)` for every gain above `tolerance`.
    pub fn violations(&self, tolerance: T) -> Vec<(usize, usize, T)> {
        let mut out = Vec::new();
        for (i, row) in self.gains.iter().enumerate() {
            for (t, g) in row.iter().enumerate() {
                if *g > tolerance {
                    out.push((i, t + 1, *g));
                }
            }
        }
        out
    }

    pub fn is_ppe(&self) -> bool {
        self.violations(T::lit(PPE_TOLERANCE)).is_empty()
    }
}

/// Continuation advantage of complying over deviating from each rating,
/// `delta * (E_comply V - E_deviate V)`, neighbors at the top rating.
pub fn compliance_premium<T: Scalar>(
    protocol: &RatingProtocol<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    epsilon: T,
) -> Result<Vec<Vec<T>>> {
    check_discount(delta, true)?;
    let table = compliant_values(protocol, topology, model, delta, epsilon)?;
    let eps = epsilon.as_f64();
    let d = delta.as_f64();
    Ok((0..topology.n())
        .map(|i| {
            let v = DVector::from_iterator(protocol.k, table.values[i].iter().map(|x| x.as_f64()));
            let comply = chain(protocol, i, true, eps) * &v;
            let deviate = chain(protocol, i, false, eps) * &v;
            comply
                .iter()
                .zip(deviate.iter())
                .map(|(c, dv)| T::lit(d * (c - dv)))
                .collect()
        })
        .collect())
}

/// Gain of playing `fraction * sigma_i` for one period instead of `sigma_i`.
/// Any shortfall is signalled as a deviation, so the zero action is the best
/// one-shot deviation.
pub fn deviation_gain<T: Scalar>(
    protocol: &RatingProtocol<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    epsilon: T,
    fraction: T,
) -> Result<Vec<Vec<T>>> {
    let premium = compliance_premium(protocol, topology, model, delta, epsilon)?;
    Ok((0..topology.n())
        .map(|i| {
            let saved = (T::one() - fraction) * protocol.strategy.top().outbound_sum(i);
            premium[i]
                .iter()
                .map(|p| if fraction >= T::one() { T::zero() } else { saved - *p })
                .collect()
        })
        .collect())
}

pub fn ppe_one_shot_check<T: Scalar>(
    protocol: &RatingProtocol<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    epsilon: T,
) -> Result<PpeReport<T>> {
    Ok(PpeReport {
        gains: deviation_gain(protocol, topology, model, delta, epsilon, T::zero())?,
    })
}
