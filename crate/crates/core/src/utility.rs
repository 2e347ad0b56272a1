//! Concave-benefit / linear-cost utility model.
//!
//! The built-in benefit is the cooperative-estimation closed form
//! `b(s) = r^2 - r^2 / (1 + s)` of the inbound sharing sum `s`. Arbitrary
//! per-vector benefits can be injected for experimentation; those are solved
//! numerically.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::Topology;

/// One value per directed link, indexed `[i][pos]` for the link from `i` to
/// `topology.neighbors(i)[pos]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(transparent)]
pub struct LinkValues<T> {
    values: Vec<Vec<T>>,
}

/// Sharing effort `a_ij` on every directed link.
pub type ActionProfile<T> = LinkValues<T>;

impl<T: Scalar> LinkValues<T> {
    pub fn zeros(topology: &Topology) -> Self {
        Self::filled(topology, T::zero())
    }

    pub fn filled(topology: &Topology, value: T) -> Self {
        Self {
            values: (0..topology.n())
                .map(|i| vec![value; topology.degree(i)])
                .collect(),
        }
    }

    /// Builds from `f(i, j)` for every link `i -> j`.
    pub fn from_fn(topology: &Topology, mut f: impl FnMut(usize, usize) -> T) -> Self {
        Self {
            values: (0..topology.n())
                .map(|i| topology.neighbors(i).iter().map(|&j| f(i, j)).collect())
                .collect(),
        }
    }

    pub fn from_nested(values: Vec<Vec<T>>) -> Self {
        Self { values }
    }

    pub fn as_nested(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, pos: usize) -> T {
        self.values[i][pos]
    }

    pub fn set(&mut self, i: usize, pos: usize, value: T) {
        self.values[i][pos] = value;
    }

    /// Value on the link `i -> j`, if it exists.
    pub fn link(&self, topology: &Topology, i: usize, j: usize) -> Option<T> {
        topology.position(i, j).map(|pos| self.values[i][pos])
    }

    pub fn outbound(&self, i: usize) -> &[T] {
        &self.values[i]
    }

    pub fn outbound_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.values[i]
    }

    /// `||a_i||_1`, the sharing cost of agent `i`.
    pub fn outbound_sum(&self, i: usize) -> T {
        self.values[i].iter().copied().sum()
    }

    /// `a_ji` for each neighbor `j` of `i`, in neighbor order.
    pub fn inbound(&self, topology: &Topology, i: usize) -> Vec<T> {
        topology
            .neighbors(i)
            .iter()
            .enumerate()
            .map(|(pos, &j)| self.values[j][topology.reverse_position(i, pos)])
            .collect()
    }

    pub fn inbound_sum(&self, topology: &Topology, i: usize) -> T {
        topology
            .neighbors(i)
            .iter()
            .enumerate()
            .map(|(pos, &j)| self.values[j][topology.reverse_position(i, pos)])
            .sum()
    }

    /// Writes `a_ji` for each neighbor `j` of `i` (the inverse of [`Self::inbound`]).
    pub fn set_inbound(&mut self, topology: &Topology, i: usize, inbound: &[T]) {
        for (pos, &j) in topology.neighbors(i).iter().enumerate() {
            self.values[j][topology.reverse_position(i, pos)] = inbound[pos];
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (*x - *y).abs()))
            .fold(T::zero(), T::max)
    }

    pub fn scale_outbound(&mut self, i: usize, factor: T) {
        for v in &mut self.values[i] {
            *v *= factor;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_zero())
    }

    /// Checks the shape against `topology` and that every entry is in `[0, 1]`.
    pub fn validate(&self, topology: &Topology) -> Result<()> {
        if self.values.len() != topology.n() {
            return Err(Error::DimensionMismatch {
                agent: self.values.len().min(topology.n()),
                expected: topology.n(),
                actual: self.values.len(),
            });
        }
        for (i, row) in self.values.iter().enumerate() {
            if row.len() != topology.degree(i) {
                return Err(Error::DimensionMismatch {
                    agent: i,
                    expected: topology.degree(i),
                    actual: row.len(),
                });
            }
            for (pos, &v) in row.iter().enumerate() {
                if !(v >= T::zero() && v <= T::one()) {
                    return Err(Error::ActionOutOfRange {
                        from: i,
                        to: topology.neighbors(i)[pos],
                        value: v.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }
}

type BenefitFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Benefit function family.
#[derive(Clone)]
pub enum Benefit<T> {
    /// `b_i(s) = r_i^2 - r_i^2 / (1 + s)` of the inbound sum `s`.
    Estimation { r2: T, per_agent: Option<Vec<T>> },
    /// Arbitrary function of the inbound vector, shared by all agents.
    Custom { name: String, f: BenefitFn<T> },
}

impl<T: fmt::Debug> fmt::Debug for Benefit<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Benefit::Estimation { r2, per_agent } => f
                .debug_struct("Estimation")
                .field("r2", r2)
                .field("per_agent", per_agent)
                .finish(),
            Benefit::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UtilityModel<T> {
    benefit: Benefit<T>,
}

impl<T: Scalar> UtilityModel<T> {
    /// Homogeneous estimation benefit with noise variance `r2`.
    pub fn estimation(r2: T) -> Self {
        Self {
            benefit: Benefit::Estimation {
                r2,
                per_agent: None,
            },
        }
    }

    /// Estimation benefit with one noise variance per agent.
    pub fn estimation_per_agent(r2: Vec<T>) -> Self {
        let first = r2.first().copied().unwrap_or_else(T::one);
        Self {
            benefit: Benefit::Estimation {
                r2: first,
                per_agent: Some(r2),
            },
        }
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self {
            benefit: Benefit::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
        }
    }

    pub fn benefit_family(&self) -> &Benefit<T> {
        &self.benefit
    }

    pub fn is_sum_form(&self) -> bool {
        matches!(self.benefit, Benefit::Estimation { .. })
    }

    /// Noise variance of agent `i` for the estimation form.
    pub fn r2(&self, i: usize) -> Option<T> {
        match &self.benefit {
            Benefit::Estimation { r2, per_agent } => Some(
                per_agent
                    .as_ref()
                    .and_then(|v| v.get(i).copied())
                    .unwrap_or(*r2),
            ),
            Benefit::Custom { .. } => None,
        }
    }

    /// The homogeneous noise variance, or an error for per-agent or custom models.
    pub fn uniform_r2(&self) -> Result<T> {
        match &self.benefit {
            Benefit::Estimation { r2, per_agent: None } => Ok(*r2),
            Benefit::Estimation {
                r2,
                per_agent: Some(v),
            } if v.iter().all(|x| x == r2) => Ok(*r2),
            _ => Err(Error::NotSumForm),
        }
    }

    /// Benefit of agent `i` as a function of its inbound sum, for sum-form models.
    pub fn benefit_of_sum(&self, i: usize, s: T) -> Option<T> {
        self.r2(i).map(|r2| estimation_benefit(r2, s))
    }

    /// `b_i(inbound)`; `inbound` must have one entry per neighbor of `i`.
    pub fn benefit(&self, topology: &Topology, i: usize, inbound: &[T]) -> Result<T> {
        if inbound.len() != topology.degree(i) {
            return Err(Error::DimensionMismatch {
                agent: i,
                expected: topology.degree(i),
                actual: inbound.len(),
            });
        }
        Ok(self.benefit_unchecked(i, inbound))
    }

    pub(crate) fn benefit_unchecked(&self, i: usize, inbound: &[T]) -> T {
        match &self.benefit {
            Benefit::Estimation { .. } => {
                let s: T = inbound.iter().copied().sum();
                estimation_benefit(self.r2(i).expect("estimation form"), s)
            }
            Benefit::Custom { f, .. } => f(inbound),
        }
    }

    /// Benefit agent `i` obtains from the inbound links of `profile`.
    pub fn benefit_in(&self, topology: &Topology, i: usize, profile: &LinkValues<T>) -> T {
        match &self.benefit {
            Benefit::Estimation { .. } => estimation_benefit(
                self.r2(i).expect("estimation form"),
                profile.inbound_sum(topology, i),
            ),
            Benefit::Custom { f, .. } => f(&profile.inbound(topology, i)),
        }
    }

    /// `u_i = b_i(inbound) - ||a_i||_1`.
    pub fn utility(&self, topology: &Topology, i: usize, profile: &ActionProfile<T>) -> Result<T> {
        profile.validate(topology)?;
        Ok(self.utility_unchecked(topology, i, profile))
    }

    pub(crate) fn utility_unchecked(
        &self,
        topology: &Topology,
        i: usize,
        profile: &ActionProfile<T>,
    ) -> T {
        self.benefit_in(topology, i, profile) - profile.outbound_sum(i)
    }

    /// Spot-checks monotonicity and midpoint concavity of the benefit on random
    /// inbound vectors of dimension 1 to 8.
    pub fn validate_model(&self, samples: usize, seed: u64) -> ModelReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tol = T::lit(1e-12);
        let mut violations = Vec::new();
        for sample in 0..samples {
            let dim = 1 + sample % 8;
            let agent = sample % 8;
            let x: Vec<T> = (0..dim).map(|_| T::lit(rng.gen::<f64>())).collect();
            let y: Vec<T> = (0..dim).map(|_| T::lit(rng.gen::<f64>())).collect();
            let bx = self.benefit_unchecked(agent, &x);
            let by = self.benefit_unchecked(agent, &y);

            let k = rng.gen_range(0..dim);
            let mut bumped = x.clone();
            bumped[k] = (bumped[k] + T::lit(rng.gen::<f64>() * 0.5)).min(T::one());
            let b_bumped = self.benefit_unchecked(agent, &bumped);
            if b_bumped < bx - tol {
                violations.push(ModelViolation {
                    sample,
                    kind: ViolationKind::Monotonicity,
                    shortfall: (bx - b_bumped).as_f64(),
                });
            }

            let mid: Vec<T> = x.iter().zip(&y).map(|(a, b)| (*a + *b) / T::lit(2.0)).collect();
            let b_mid = self.benefit_unchecked(agent, &mid);
            let chord = (bx + by) / T::lit(2.0);
            if b_mid < chord - tol {
                violations.push(ModelViolation {
                    sample,
                    kind: ViolationKind::Concavity,
                    shortfall: (chord - b_mid).as_f64(),
                });
            }
        }
        ModelReport {
            checks: samples,
            violations,
        }
    }
}

pub(crate) fn estimation_benefit<T: Scalar>(r2: T, s: T) -> T {
    r2 - r2 / (T::one() + s)
}

pub(crate) fn estimation_marginal<T: Scalar>(r2: T, s: T) -> T {
    let d = T::one() + s;
    r2 / (d * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    Monotonicity,
    Concavity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelViolation {
    pub sample: usize,
    pub kind: ViolationKind,
    pub shortfall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub checks: usize,
    pub violations: Vec<ModelViolation>,
}

impl ModelReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}
