//! Reference computations for the acceptance suite. Nothing here calls the
//! design or protocol code under test; graphs are the only shared input.

pub fn b(r2: f64, s: f64) -> f64 {
    r2 - r2 / (1.0 + s)
}

fn db(r2: f64, s: f64) -> f64 {
    r2 / ((1.0 + s) * (1.0 + s))
}

/// Centralized solve of the constrained welfare problem over directed arcs
/// `x_ij in [0, 1]`: maximize `sum_k b(s_k) - o_k` subject to
/// `o_k <= delta b(s_k)`. Augmented Lagrangian outer loop, projected gradient
/// ascent with backtracking inside.
pub fn alm_welfare(n: usize, edges: &[(usize, usize)], r2: f64, delta: f64) -> f64 {
    let arcs: Vec<(usize, usize)> = edges.iter().flat_map(|&(a, c)| [(a, c), (c, a)]).collect();
    let sums = |x: &[f64]| {
        let mut s = vec![0.0; n];
        let mut o = vec![0.0; n];
        for (k, &(i, j)) in arcs.iter().enumerate() {
            s[j] += x[k];
            o[i] += x[k];
        }
        (s, o)
    };
    let objective = |x: &[f64], mu: &[f64], c: f64| {
        let (s, o) = sums(x);
        let mut f = 0.0;
        for k in 0..n {
            f += b(r2, s[k]) - o[k];
            let y = (mu[k] + c * (o[k] - delta * b(r2, s[k]))).max(0.0);
            f -= (y * y - mu[k] * mu[k]) / (2.0 * c);
        }
        f
    };
    let mut x = vec![0.0; arcs.len()];
    let mut mu = vec![0.0; n];
    let mut c = 10.0;
    let mut last_violation = f64::INFINITY;
    for _ in 0..200 {
        let mut step = 1.0;
        for _ in 0..20_000 {
            let (s, o) = sums(&x);
            let y: Vec<f64> = (0..n)
                .map(|k| (mu[k] + c * (o[k] - delta * b(r2, s[k]))).max(0.0))
                .collect();
            let grad: Vec<f64> = arcs
                .iter()
                .map(|&(i, j)| db(r2, s[j]) - 1.0 - y[i] + delta * db(r2, s[j]) * y[j])
                .collect();
            let f0 = objective(&x, &mu, c);
            step *= 2.0;
            let moved = loop {
                let cand: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| (v + step * g).clamp(0.0, 1.0)).collect();
                let d2: f64 = cand.iter().zip(&x).map(|(a, v)| (a - v) * (a - v)).sum();
                let lin: f64 = cand.iter().zip(&x).zip(&grad).map(|((a, v), g)| (a - v) * g).sum();
                if objective(&cand, &mu, c) >= f0 + lin - d2 / (2.0 * step) || step < 1e-12 {
                    x = cand;
                    break d2.sqrt() / step.max(1e-300);
                }
                step /= 2.0;
            };
            if moved < 1e-11 {
                break;
            }
        }
        let (s, o) = sums(&x);
        let g: Vec<f64> = (0..n).map(|k| o[k] - delta * b(r2, s[k])).collect();
        let violation = g.iter().copied().fold(0.0f64, f64::max);
        let complementarity = (0..n).map(|k| (mu[k] * g[k]).abs()).fold(0.0f64, f64::max);
        for k in 0..n {
            mu[k] = (mu[k] + c * g[k]).max(0.0);
        }
        if violation < 1e-10 && complementarity < 1e-10 {
            break;
        }
        if violation > 0.25 * last_violation {
            c *= 4.0;
        }
        last_violation = violation;
    }
    let (s, o) = sums(&x);
    (0..n).map(|k| b(r2, s[k]) - o[k]).sum()
}

/// Star with `leaves` leaves. Every leaf sends `t / leaves` to the center,
/// the center sends `min(1, delta b(t) / leaves)` to each leaf; the
/// remaining problem in `t` is concave.
pub fn star_welfare(leaves: usize, r2: f64, delta: f64) -> f64 {
    let l = leaves as f64;
    let y = |t: f64| (delta * b(r2, t) / l).min(1.0);
    let f = |t: f64| b(r2, t) + l * (b(r2, y(t)) - y(t)) - t;
    let leaf_ok = |t: f64| t / l <= delta * b(r2, y(t)) + 1e-15;
    let mut hi = l;
    if !leaf_ok(hi) {
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if leaf_ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi = lo;
    }
    let (mut a, mut c) = (0.0, hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..300 {
        let x1 = c - g * (c - a);
        let x2 = a + g * (c - a);
        if f(x1) < f(x2) {
            a = x1;
        } else {
            c = x2;
        }
    }
    f(0.5 * (a + c))
}

/// Long-run share of time at the high rating for a compliant agent whose
/// signal flips with probability `eps`.
pub fn two_state_high_share(alpha: f64, beta: f64, eps: f64) -> f64 {
    let up = (1.0 - eps) * beta;
    let down = eps * alpha;
    // Stationary vector of [[1 - up, up], [down, 1 - down]].
    up / (up + down)
}

/// Largest common action `a` on a `degree`-regular graph such that losing
/// one neighbor's share next period outweighs keeping `a` today, capped at the
/// obedient share. Scans finely from the cap downward, then bisects.
pub fn tft_symmetric_action(degree: usize, r2: f64, delta: f64) -> f64 {
    let d = degree as f64;
    let cap = ((r2.sqrt() - 1.0).max(0.0) / d).min(1.0);
    let margin = |a: f64| delta * (b(r2, d * a) - b(r2, (d - 1.0) * a)) - a;
    let steps = 100_000;
    for k in (1..=steps).rev() {
        let a = cap * k as f64 / steps as f64;
        if margin(a) >= 0.0 {
            if k == steps {
                return cap;
            }
            let (mut lo, mut hi) = (a, cap * (k + 1) as f64 / steps as f64);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if margin(mid) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return lo;
        }
    }
    0.0
}

pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
