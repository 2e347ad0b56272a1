//! Monte Carlo simulation of the repeated game under a rating protocol.
//!
//! Every period each agent picks an action from its behavior, utilities are
//! realized, each agent's binary signal is drawn (flipped with probability
//! `epsilon`), and ratings move. Random draws happen in a fixed order per
//! period: one flip draw per agent in ascending order, then one transition draw
//! per agent in ascending order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{compliance_premium, rating_transition, RatingProtocol, Signal, PPE_TOLERANCE};
use crate::scalar::{from_usize, Scalar};
use crate::topology::Topology;
use crate::utility::{LinkValues, UtilityModel};
use crate::welfare::{solve_obedient, Metrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    Compliant,
    AlwaysZero,
    /// Complies only when that beats a one-period deviation, valuing the
    /// future with discount `delta` and assuming everyone else complies.
    BestResponse { delta: f64 },
    /// Plays zero in the listed periods and complies otherwise.
    Scripted { periods: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimConfig<T> {
    pub horizon: u64,
    pub epsilon: T,
    pub seed: u64,
    /// Periods excluded from the stationary occupancy; defaults to a tenth of the horizon.
    #[serde(default)]
    pub burn_in: Option<u64>,
    /// Accumulate `sum_t discount^t u_i(t)` per agent.
    #[serde(default)]
    pub discount: Option<T>,
    #[serde(default)]
    pub record_trace: bool,
}

impl<T: Scalar> SimConfig<T> {
    pub fn new(horizon: u64, epsilon: T, seed: u64) -> Self {
        Self {
            horizon,
            epsilon,
            seed,
            burn_in: None,
            discount: None,
            record_trace: false,
        }
    }

    pub fn burn_in_periods(&self) -> u64 {
        self.burn_in.unwrap_or(self.horizon / 10).min(self.horizon.saturating_sub(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceRow<T> {
    pub period: u64,
    pub agent: usize,
    pub rating: usize,
    pub action_sum: T,
    pub utility: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimReport<T> {
    /// `v_star` holds the realized time-average welfare.
    pub metrics: Metrics<T>,
    /// `occupancy_counts[i][theta - 1]` over every period.
    pub occupancy_counts: Vec<Vec<u64>>,
    /// Fraction of post-burn-in periods spent at each rating.
    pub occupancy: Vec<Vec<T>>,
    pub burn_in: u64,
    pub discounted_utility: Option<Vec<T>>,
    pub final_ratings: Vec<usize>,
    pub trace: Vec<TraceRow<T>>,
}

impl<T: Scalar> SimReport<T> {
    pub fn average_welfare(&self) -> T {
        self.metrics.v_star
    }

    /// Post-burn-in fraction of time agent `i` spent at the top rating.
    pub fn high_fraction(&self, i: usize) -> T {
        *self.occupancy[i].last().expect("at least one rating")
    }
}

/// Cached per-agent decision rule for best-response behavior.
struct Threshold<T> {
    /// `premium[theta - 1]`: continuation advantage of complying.
    premium: Vec<T>,
}

fn best_response_thresholds<T: Scalar>(
    protocol: &RatingProtocol<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    behaviors: &[Behavior],
    epsilon: T,
) -> Result<Vec<Option<Threshold<T>>>> {
    let mut cache: Vec<(f64, Vec<Vec<T>>)> = Vec::new();
    behaviors
        .iter()
        .enumerate()
        .map(|(i, b)| match b {
            Behavior::BestResponse { delta } => {
                if !(0.0..=1.0).contains(delta) {
                    return Err(Error::ParameterOutOfRange {
                        name: "delta",
                        value: *delta,
                    });
                }
                let idx = match cache.iter().position(|(d, _)| d == delta) {
                    Some(idx) => idx,
                    None => {
                        let premium =
                            compliance_premium(protocol, topology, model, T::lit(*delta), epsilon)?;
                        cache.push((*delta, premium));
                        cache.len() - 1
                    }
                };
                Ok(Some(Threshold {
                    premium: cache[idx].1[i].clone(),
                }))
            }
            _ => Ok(None),
        })
        .collect()
}

/// Prescribed outbound action of agent `i` given everyone's ratings.
fn prescribed<T: Scalar>(
    protocol: &RatingProtocol<T>,
    topology: &Topology,
    ratings: &[usize],
    i: usize,
    out: &mut [T],
) {
    for (pos, &j) in topology.neighbors(i).iter().enumerate() {
        out[pos] = protocol.strategy().get(i, pos, ratings[j]);
    }
}

fn complies<T: Scalar>(threshold: &Threshold<T>, own_rating: usize, cost: T) -> bool {
    cost <= threshold.premium[own_rating - 1] + T::lit(PPE_TOLERANCE)
}

/// Either the prescribed action or the zero vector, whichever a unilateral
/// best response picks.
pub fn best_response_action<T: Scalar>(
    i: usize,
    ratings: &[usize],
    protocol: &RatingProtocol<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
    epsilon: T,
) -> Result<Vec<T>> {
    let premium = compliance_premium(protocol, topology, model, delta, epsilon)?;
    let mut action = vec![T::zero(); topology.degree(i)];
    prescribed(protocol, topology, ratings, i, &mut action);
    let cost: T = action.iter().copied().sum();
    let threshold = Threshold {
        premium: premium[i].clone(),
    };
    if complies(&threshold, ratings[i], cost) {
        Ok(action)
    } else {
        Ok(vec![T::zero(); action.len()])
    }
}

pub fn simulate<T: Scalar>(
    topology: &Topology,
    model: &UtilityModel<T>,
    protocol: &RatingProtocol<T>,
    behaviors: &[Behavior],
    config: &SimConfig<T>,
) -> Result<SimReport<T>> {
    let n = topology.n();
    if config.horizon == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "horizon",
            value: 0.0,
        });
    }
    if behaviors.len() != n {
        return Err(Error::BehaviorCount {
            expected: n,
            actual: behaviors.len(),
        });
    }
    let eps = config.epsilon;
    if !(eps >= T::zero() && eps < T::one()) {
        return Err(Error::ParameterOutOfRange {
            name: "epsilon",
            value: eps.as_f64(),
        });
    }
    protocol.validate(topology)?;
    let thresholds = best_response_thresholds(protocol, topology, model, behaviors, eps)?;

    let k = protocol.k();
    let burn_in = config.burn_in_periods();
    let eps_f = eps.as_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ratings = vec![k; n];
    let mut actions = LinkValues::zeros(topology);
    let mut followed = vec![true; n];
    let mut counts = vec![vec![0u64; k]; n];
    let mut stationary = vec![vec![0u64; k]; n];
    let mut total_utility = vec![T::zero(); n];
    let mut discounted = config.discount.map(|_| vec![T::zero(); n]);
    let mut weight = T::one();
    let mut trace = Vec::new();

    for period in 0..config.horizon {
        for i in 0..n {
            counts[i][ratings[i] - 1] += 1;
            if period >= burn_in {
                stationary[i][ratings[i] - 1] += 1;
            }
            let out = actions.outbound_mut(i);
            prescribed(protocol, topology, &ratings, i, out);
            let follow = match &behaviors[i] {
                Behavior::Compliant => true,
                Behavior::AlwaysZero => false,
                Behavior::Scripted { periods } => !periods.contains(&period),
                Behavior::BestResponse { .. } => {
                    let cost: T = out.iter().copied().sum();
                    complies(thresholds[i].as_ref().expect("cached"), ratings[i], cost)
                }
            };
            // A declared defection is signalled as one even when zero is prescribed.
            followed[i] = follow;
            if !follow {
                out.iter_mut().for_each(|v| *v = T::zero());
            }
        }
        for i in 0..n {
            let u = model.benefit_in(topology, i, &actions) - actions.outbound_sum(i);
            total_utility[i] += u;
            if let Some(d) = discounted.as_mut() {
                d[i] += weight * u;
            }
            if config.record_trace {
                trace.push(TraceRow {
                    period,
                    agent: i,
                    rating: ratings[i],
                    action_sum: actions.outbound_sum(i),
                    utility: u,
                });
            }
        }
        if let Some(disc) = config.discount {
            weight *= disc;
        }
        let signals: Vec<Signal> = followed
            .iter()
            .map(|&f| {
                let s = Signal::from_compliance(f);
                if rng.gen::<f64>() < eps_f {
                    s.flipped()
                } else {
                    s
                }
            })
            .collect();
        for i in 0..n {
            ratings[i] = rating_transition(protocol, i, ratings[i], signals[i], &mut rng);
        }
    }

    let horizon: T = T::lit(config.horizon as f64);
    let per_agent: Vec<T> = total_utility.iter().map(|u| *u / horizon).collect();
    let average: T = per_agent.iter().copied().sum();
    let (_, v_opt) = solve_obedient(topology, model);
    let kept = config.horizon - burn_in;
    let occupancy = stationary
        .iter()
        .map(|row| row.iter().map(|c| from_usize::<T>(*c as usize) / T::lit(kept as f64)).collect())
        .collect();
    Ok(SimReport {
        metrics: Metrics::new(v_opt, average, per_agent),
        occupancy_counts: counts,
        occupancy,
        burn_in,
        discounted_utility: discounted,
        final_ratings: ratings,
        trace,
    })
}
