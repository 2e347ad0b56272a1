//! Obedient-agent benchmark and social-welfare accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};
use crate::topology::Topology;
use crate::utility::{ActionProfile, UtilityModel};

/// Welfare summary of a designed protocol against the obedient optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Metrics<T> {
    pub v_opt: T,
    pub v_star: T,
    pub poa: T,
    pub per_agent: Vec<T>,
}

impl<T: Scalar> Metrics<T> {
    pub fn new(v_opt: T, v_star: T, per_agent: Vec<T>) -> Self {
        Self {
            v_opt,
            v_star,
            poa: price_of_anarchy(v_opt, v_star),
            per_agent,
        }
    }
}

/// `V_opt / V_star`; one when both vanish, infinite when only `V_star` does.
pub fn price_of_anarchy<T: Scalar>(v_opt: T, v_star: T) -> T {
    if v_star > T::zero() {
        v_opt / v_star
    } else if v_opt <= T::zero() {
        T::one()
    } else {
        T::infinity()
    }
}

/// Splits `total` evenly over `count` links, capping each at one and handing
/// any residual round-robin to the lowest positions.
pub fn split_evenly<T: Scalar>(total: T, count: usize) -> Vec<T> {
    if count == 0 {
        return Vec::new();
    }
    let share = (total / from_usize(count)).clamp_unit();
    let mut out = vec![share; count];
    let mut residual = (total - share * from_usize(count)).max(T::zero());
    for v in out.iter_mut() {
        if residual <= T::zero() {
            break;
        }
        let room = T::one() - *v;
        let add = room.min(residual);
        *v += add;
        residual -= add;
    }
    out
}

/// Sum of utilities `V = sum_i b_i - ||a_i||_1`.
pub fn social_welfare<T: Scalar>(
    topology: &Topology,
    model: &UtilityModel<T>,
    profile: &ActionProfile<T>,
) -> Result<T> {
    profile.validate(topology)?;
    Ok(social_welfare_unchecked(topology, model, profile))
}

pub(crate) fn social_welfare_unchecked<T: Scalar>(
    topology: &Topology,
    model: &UtilityModel<T>,
    profile: &ActionProfile<T>,
) -> T {
    (0..topology.n())
        .map(|i| model.utility_unchecked(topology, i, profile))
        .sum()
}

/// Unconstrained welfare-maximizing inbound sum for a sum-form agent of degree `m`.
pub(crate) fn obedient_inbound_sum<T: Scalar>(r2: T, degree: usize) -> T {
    (r2.sqrt() - T::one())
        .max(T::zero())
        .min(from_usize(degree))
}

/// Welfare contribution `b(s*) - s*` of one agent at its obedient optimum.
pub fn obedient_agent_welfare<T: Scalar>(r2: T, degree: usize) -> T {
    let s = obedient_inbound_sum(r2, degree);
    crate::utility::estimation_benefit(r2, s) - s
}

/// Per-agent maximization of `b_i(a_hat_i) - ||a_hat_i||_1` on the unit box.
pub fn solve_obedient<T: Scalar>(
    topology: &Topology,
    model: &UtilityModel<T>,
) -> (ActionProfile<T>, T) {
    let mut profile = ActionProfile::zeros(topology);
    for i in 0..topology.n() {
        let degree = topology.degree(i);
        if degree == 0 {
            continue;
        }
        let inbound = match model.r2(i) {
            Some(r2) => split_evenly(obedient_inbound_sum(r2, degree), degree),
            None => maximize_on_box(
                |x| model.benefit_unchecked(i, x) - x.iter().copied().sum::<T>(),
                &vec![T::zero(); degree],
            ),
        };
        profile.set_inbound(topology, i, &inbound);
    }
    let v = social_welfare_unchecked(topology, model, &profile);
    (profile, v)
}

/// Projected gradient ascent on `[0, 1]^d` with central-difference gradients.
pub(crate) fn maximize_on_box<T: Scalar>(f: impl Fn(&[T]) -> T, start: &[T]) -> Vec<T> {
    let step = T::lit(0.05);
    let h = T::lit(1e-6);
    let tol = T::lit(1e-8);
    let mut x = start.to_vec();
    let mut probe = x.clone();
    for _ in 0..10_000 {
        let mut change = T::zero();
        let grad: Vec<T> = (0..x.len())
            .map(|k| {
                probe.copy_from_slice(&x);
                probe[k] = x[k] + h;
                let up = f(&probe);
                probe[k] = x[k] - h;
                let down = f(&probe);
                (up - down) / (h + h)
            })
            .collect();
        for (xk, g) in x.iter_mut().zip(grad) {
            let next = (*xk + step * g).clamp_unit();
            change = change.max((next - *xk).abs());
            *xk = next;
        }
        if change < tol {
            break;
        }
    }
    x
}

/// Largest degree `d` with `delta * b(d) >= d` for the homogeneous estimation
/// benefit, found by bisection on `delta * b(d) / d - 1`. Zero if none.
pub fn poa_threshold_degree<T: Scalar>(model: &UtilityModel<T>, delta: T) -> Result<T> {
    let r2 = model.uniform_r2()?;
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::ParameterOutOfRange {
            name: "delta",
            value: delta.as_f64(),
        });
    }
    let ratio = |d: T| delta * crate::utility::estimation_benefit(r2, d) / d - T::one();
    // The ratio decreases from delta * r2 - 1 at 0+ to -1 as d grows.
    if delta * r2 <= T::one() {
        return Ok(T::zero());
    }
    let mut lo = T::zero();
    let mut hi = delta * r2;
    let tol = T::lit(1e-9).max(T::epsilon() * hi * T::lit(4.0));
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= T::zero() || ratio(mid) >= T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}
