//! Tit-for-Tat baseline.
//!
//! Each agent cooperates with `a_bar_ij` towards neighbor `j` in the first
//! period and afterwards mirrors what `j` did last period: `a_bar_ij` if `j`
//! cooperated, zero otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};
use crate::topology::Topology;
use crate::utility::{estimation_benefit, LinkValues, UtilityModel};
use crate::welfare::price_of_anarchy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TftProfile<T> {
    cooperate: LinkValues<T>,
}

impl<T: Scalar> TftProfile<T> {
    /// Every cooperate action must lie in `(0, 1]`.
    pub fn new(topology: &Topology, cooperate: LinkValues<T>) -> Result<Self> {
        cooperate.validate(topology)?;
        for i in 0..topology.n() {
            for (pos, &j) in topology.neighbors(i).iter().enumerate() {
                let v = cooperate.get(i, pos);
                if v <= T::zero() {
                    return Err(Error::ActionOutOfRange {
                        from: i,
                        to: j,
                        value: v.as_f64(),
                    });
                }
            }
        }
        Ok(Self { cooperate })
    }

    pub fn cooperate(&self) -> &LinkValues<T> {
        &self.cooperate
    }
}

/// Action of `i` towards `j` given what `j` sent last period (`None` at the start).
pub fn tft_next_action<T: Scalar>(
    profile: &TftProfile<T>,
    topology: &Topology,
    i: usize,
    j: usize,
    last_from_j: Option<T>,
) -> Option<T> {
    let own = profile.cooperate.link(topology, i, j)?;
    let theirs = profile.cooperate.link(topology, j, i)?;
    Some(match last_from_j {
        None => own,
        Some(a) if a == theirs => own,
        Some(_) => T::zero(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PairCheck<T> {
    pub from: usize,
    pub to: usize,
    /// `delta (b_i(a_hat_i) - b_i(a_hat_i without j)) - a_bar_ij`.
    pub margin: T,
    pub passes: bool,
}

/// Whether agent `i` prefers keeping up cooperation with each neighbor to
/// losing that neighbor's contribution next period.
pub fn tft_incentive_check<T: Scalar>(
    profile: &TftProfile<T>,
    topology: &Topology,
    model: &UtilityModel<T>,
    delta: T,
) -> Result<Vec<PairCheck<T>>> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::ParameterOutOfRange {
            name: "delta",
            value: delta.as_f64(),
        });
    }
    let mut out = Vec::with_capacity(2 * topology.edge_count());
    for i in 0..topology.n() {
        let inbound = profile.cooperate.inbound(topology, i);
        let full = model.benefit(topology, i, &inbound)?;
        let mut without = inbound.clone();
        for (pos, &j) in topology.neighbors(i).iter().enumerate() {
            without[pos] = T::zero();
            let lost = full - model.benefit(topology, i, &without)?;
            without[pos] = inbound[pos];
            let margin = delta * lost - profile.cooperate.get(i, pos);
            out.push(PairCheck {
                from: i,
                to: j,
                margin,
                passes: margin >= T::zero(),
            });
        }
    }
    Ok(out)
}

/// `delta (b(d a) - b((d - 1) a)) - a` for the homogeneous estimation benefit.
pub fn symmetric_margin<T: Scalar>(r2: T, degree: usize, delta: T, a: T) -> T {
    let d: T = from_usize(degree);
    delta * (estimation_benefit(r2, d * a) - estimation_benefit(r2, (d - T::one()) * a)) - a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SymmetricTft<T> {
    pub a_star: T,
    pub welfare_per_agent: T,
}

/// Largest common cooperate action on a `degree`-regular network that passes
/// the incentive check, searched on a grid of spacing `resolution` and refined
/// by bisection. Welfare increases with `a` only up to the unconstrained
/// optimum, so the search stops there.
pub fn best_symmetric_tft<T: Scalar>(
    degree: usize,
    model: &UtilityModel<T>,
    delta: T,
    resolution: T,
) -> Result<SymmetricTft<T>> {
    let r2 = model.uniform_r2()?;
    if degree == 0 {
        return Err(Error::InvalidAgentCount(0));
    }
    if !(resolution > T::zero()) {
        return Err(Error::ParameterOutOfRange {
            name: "resolution",
            value: resolution.as_f64(),
        });
    }
    if !(delta >= T::zero() && delta <= T::one()) {
        return Err(Error::ParameterOutOfRange {
            name: "delta",
            value: delta.as_f64(),
        });
    }
    let d: T = from_usize(degree);
    let s_opt = crate::welfare::obedient_inbound_sum(r2, degree);
    let cap = (s_opt / d).min(T::one());
    let passes = |a: T| symmetric_margin(r2, degree, delta, a) >= T::zero();

    let steps = (cap / resolution).ceil().to_usize().unwrap_or(0);
    let mut best = T::zero();
    let mut failed_above = None;
    for k in (1..=steps).rev() {
        let a = (from_usize::<T>(k) * resolution).min(cap);
        if passes(a) {
            best = a;
            break;
        }
        failed_above = Some(a);
    }
    // The margin leaves zero with slope delta r2 - 1, so below the first grid
    // point there is a passing action exactly when that slope is positive.
    if let Some(mut hi) = failed_above {
        if best > T::zero() || delta * r2 > T::one() {
            let mut lo = best;
            for _ in 0..200 {
                if hi - lo <= T::epsilon() * T::lit(4.0) {
                    break;
                }
                let mid = (lo + hi) / T::lit(2.0);
                if passes(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = lo;
        }
    }
    Ok(SymmetricTft {
        a_star: best,
        welfare_per_agent: estimation_benefit(r2, d * best) - d * best,
    })
}

/// Inbound sum per agent the rating protocol sustains on a regular network:
/// the unconstrained optimum capped by `delta b(s) >= s`, i.e. `s <= delta r2 - 1`.
pub fn symmetric_rating_sum<T: Scalar>(degree: usize, model: &UtilityModel<T>, delta: T) -> Result<T> {
    let r2 = model.uniform_r2()?;
    let s_opt = crate::welfare::obedient_inbound_sum(r2, degree);
    Ok(s_opt.min((delta * r2 - T::one()).max(T::zero())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TftComparison<T> {
    pub delta: T,
    pub poa_rating: T,
    pub poa_tft: T,
}

/// PoA of the rating protocol and of the best symmetric Tit-for-Tat on a
/// `degree`-regular network for each discount factor.
pub fn compare_symmetric<T: Scalar>(
    degree: usize,
    model: &UtilityModel<T>,
    deltas: &[T],
    resolution: T,
) -> Result<Vec<TftComparison<T>>> {
    let r2 = model.uniform_r2()?;
    let v_opt = crate::welfare::obedient_agent_welfare(r2, degree);
    deltas
        .iter()
        .map(|&delta| {
            let s = symmetric_rating_sum(degree, model, delta)?;
            let rating = estimation_benefit(r2, s) - s;
            let tft = best_symmetric_tft(degree, model, delta, resolution)?;
            Ok(TftComparison {
                delta,
                poa_rating: price_of_anarchy(v_opt, rating),
                poa_tft: price_of_anarchy(v_opt, tft.welfare_per_agent),
            })
        })
        .collect()
}

/// Plays Tit-for-Tat for `periods` periods; `(period, agent)` entries force
/// that agent to send nothing in that period. Returns the action profile of
/// every period.
pub fn play_tft<T: Scalar>(
    profile: &TftProfile<T>,
    topology: &Topology,
    periods: usize,
    deviations: &[(usize, usize)],
) -> Vec<LinkValues<T>> {
    let mut history: Vec<LinkValues<T>> = Vec::with_capacity(periods);
    for t in 0..periods {
        let prev = history.last();
        let actions = LinkValues::from_fn(topology, |i, j| {
            if deviations.contains(&(t, i)) {
                return T::zero();
            }
            let last = prev.map(|p| p.link(topology, j, i).expect("symmetric"));
            tft_next_action(profile, topology, i, j, last).expect("neighbors")
        });
        history.push(actions);
    }
    history
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn next_action_rules() {
        let t = Topology::ring(2);
        let p = TftProfile::new(&t, LinkValues::filled(&t, 0.4)).unwrap();
        assert_eq!(tft_next_action(&p, &t, 0, 1, None), Some(0.4));
        assert_eq!(tft_next_action(&p, &t, 0, 1, Some(0.0)), Some(0.0));
        assert_eq!(tft_next_action(&p, &t, 0, 1, Some(0.4)), Some(0.4));
    }

    #[test]
    fn profile_rejects_zero_entries() {
        let t = Topology::ring(3);
        assert!(TftProfile::new(&t, LinkValues::<f64>::zeros(&t)).is_err());
    }

    #[test]
    fn symmetric_margins() {
        assert_abs_diff_eq!(symmetric_margin(4.0, 4, 0.9, 0.25), 0.9 * 2.0 / 7.0 - 0.25, epsilon = 1e-12);
        let m = 0.9 * (4.0 / 1.9 - 4.0 / 2.2) - 0.3;
        assert_abs_diff_eq!(symmetric_margin(4.0, 4, 0.9, 0.3), m, epsilon = 1e-12);
        assert!(m < 0.0);
    }

    #[test]
    fn pair_check_on_regular_graph() {
        let t = Topology::regular(9, 4);
        let m = UtilityModel::estimation(4.0);
        let p = TftProfile::new(&t, LinkValues::filled(&t, 0.25)).unwrap();
        let checks = tft_incentive_check(&p, &t, &m, 0.9).unwrap();
        assert_eq!(checks.len(), 36);
        for c in &checks {
            assert!(c.passes);
            assert_abs_diff_eq!(c.margin, symmetric_margin(4.0, 4, 0.9, 0.25), epsilon = 1e-12);
        }
        let p = TftProfile::new(&t, LinkValues::filled(&t, 0.3)).unwrap();
        assert!(tft_incentive_check(&p, &t, &m, 0.9).unwrap().iter().all(|c| !c.passes));
    }

    #[test]
    fn best_symmetric_examples() {
        let m = UtilityModel::estimation(4.0);
        let s = best_symmetric_tft(4, &m, 0.9, 1e-4).unwrap();
        assert_abs_diff_eq!(s.a_star, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(s.welfare_per_agent, 1.0, epsilon = 1e-12);

        let s = best_symmetric_tft(4, &m, 0.8, 1e-4).unwrap();
        assert!(s.a_star < 0.25 && s.a_star > 0.2);
        assert_abs_diff_eq!(symmetric_margin(4.0, 4, 0.8, s.a_star), 0.0, epsilon = 1e-12);

        let s = best_symmetric_tft(4, &m, 1e-3, 1e-4).unwrap();
        assert_eq!(s.a_star, 0.0);
        assert_eq!(s.welfare_per_agent, 0.0);
    }

    #[test]
    fn search_finds_roots_below_grid_spacing() {
        // With delta r2 just above one only tiny actions pass.
        let m = UtilityModel::estimation(4.0);
        let s = best_symmetric_tft(4, &m, 0.2505, 0.01).unwrap();
        assert!(s.a_star > 0.0 && s.a_star < 0.01);
        assert_abs_diff_eq!(symmetric_margin(4.0, 4, 0.2505, s.a_star), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rating_dominates_tft() {
        let m = UtilityModel::estimation(4.0);
        let deltas: Vec<f64> = (5..=10).map(|k| k as f64 / 10.0).collect();
        let rows = compare_symmetric(4, &m, &deltas, 1e-4).unwrap();
        for r in &rows {
            assert!(r.poa_rating <= r.poa_tft + 1e-12);
            assert_abs_diff_eq!(r.poa_rating, 1.0, epsilon = 1e-12);
        }
        assert!(rows[3].poa_tft > 1.0 + 1e-4);
    }

    #[test]
    fn single_deviation_alternates() {
        let t = Topology::ring(2);
        let p = TftProfile::new(&t, LinkValues::filled(&t, 0.5)).unwrap();
        let h = play_tft(&p, &t, 12, &[(0, 0)]);
        for (period, a) in h.iter().enumerate() {
            let (a01, a10) = (a.get(0, 0), a.get(1, 0));
            if period % 2 == 0 {
                assert_eq!((a01, a10), (0.0, 0.5));
            } else {
                assert_eq!((a01, a10), (0.5, 0.0));
            }
        }
    }
}
