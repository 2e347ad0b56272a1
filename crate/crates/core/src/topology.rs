//! Undirected interaction graphs and their generators.
//!
//! Neighbor lists are the operative representation: every per-link quantity
//! in the crate is stored as `values[i][pos]`, meaning the link from agent `i`
//! to `neighbors(i)[pos]`. Neighbor lists are kept sorted so positions are
//! stable and iteration order is deterministic.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator family for [`Topology::generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    Star,
    /// Preferential attachment with initial attractiveness, giving a degree
    /// distribution `P(k) ~ k^-exponent`. Requires `exponent > 2`.
    ScaleFree {
        exponent: f64,
        #[serde(default = "default_links_per_node")]
        links_per_node: usize,
    },
    /// Erdos-Renyi graph with independent link probability.
    Random { p: f64 },
    /// Circulant lattice where each agent links to its `degree / 2` nearest
    /// agents on either side. `degree` must be even.
    Regular { degree: usize },
}

fn default_links_per_node() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    neighbors: Vec<Vec<usize>>,
    /// `reverse[i][pos]` is the position of `i` in the list of `neighbors[i][pos]`.
    reverse: Vec<Vec<usize>>,
}

impl Topology {
    /// Graph with `n` agents and no links.
    pub fn empty(n: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); n],
            reverse: vec![Vec::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidEdge(i, j));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self::from_neighbor_lists(neighbors))
    }

    fn from_neighbor_lists(neighbors: Vec<Vec<usize>>) -> Self {
        let reverse = neighbors
            .iter()
            .enumerate()
            .map(|(i, list)| {
                list.iter()
                    .map(|&j| {
                        neighbors[j]
                            .binary_search(&i)
                            .expect("adjacency is symmetric")
                    })
                    .collect()
            })
            .collect();
        Self { neighbors, reverse }
    }

    pub fn generate(kind: &TopologyKind, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidAgentCount(n));
        }
        match *kind {
            TopologyKind::Ring => Ok(Self::ring(n)),
            TopologyKind::Star => Ok(Self::star(n)),
            TopologyKind::Random { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::ParameterOutOfRange { name: "p", value: p });
                }
                Ok(Self::random(n, p, seed))
            }
            TopologyKind::ScaleFree {
                exponent,
                links_per_node,
            } => {
                if !(exponent > 2.0) || !exponent.is_finite() {
                    return Err(Error::ParameterOutOfRange {
                        name: "exponent",
                        value: exponent,
                    });
                }
                if links_per_node == 0 {
                    return Err(Error::ParameterOutOfRange {
                        name: "links_per_node",
                        value: 0.0,
                    });
                }
                Ok(Self::scale_free(n, exponent, links_per_node, seed))
            }
            TopologyKind::Regular { degree } => {
                if degree % 2 == 1 || degree >= n {
                    return Err(Error::ParameterOutOfRange {
                        name: "degree",
                        value: degree as f64,
                    });
                }
                Ok(Self::regular(n, degree))
            }
        }
    }

    /// Cycle through all agents. `n = 2` gives a single link.
    pub fn ring(n: usize) -> Self {
        let edges: Vec<_> = match n {
            0 | 1 => Vec::new(),
            2 => vec![(0, 1)],
            _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        };
        Self::from_edges(n, &edges).expect("ring edges are valid")
    }

    /// Agent 0 is the center.
    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|j| (0, j)).collect();
        Self::from_edges(n, &edges).expect("star edges are valid")
    }

    pub fn random(n: usize, p: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(n, &edges).expect("random edges are valid")
    }

    pub fn regular(n: usize, degree: usize) -> Self {
        let half = degree / 2;
        let mut edges = Vec::new();
        for i in 0..n {
            for off in 1..=half {
                edges.push((i, (i + off) % n));
            }
        }
        Self::from_edges(n, &edges).expect("lattice edges are valid")
    }

    /// Linear preferential attachment with attractiveness `A = m (exponent - 3)`,
    /// whose stationary degree exponent is `3 + A / m`.
    pub fn scale_free(n: usize, exponent: f64, m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seed_size = (m + 1).min(n);
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
        // Each link contributes both endpoints; sampling from here is degree-proportional.
        let mut endpoints: Vec<usize> = Vec::new();
        for i in 0..seed_size {
            for j in (i + 1)..seed_size {
                neighbors[i].push(j);
                neighbors[j].push(i);
                endpoints.push(i);
                endpoints.push(j);
            }
        }
        let attractiveness = m as f64 * (exponent - 3.0);
        for new in seed_size..n {
            let mut targets: Vec<usize> = Vec::with_capacity(m);
            while targets.len() < m.min(new) {
                let candidate = if attractiveness >= 0.0 {
                    let degree_mass = endpoints.len() as f64;
                    let uniform_mass = attractiveness * new as f64;
                    if rng.gen::<f64>() * (degree_mass + uniform_mass) < degree_mass {
                        endpoints[rng.gen_range(0..endpoints.len())]
                    } else {
                        rng.gen_range(0..new)
                    }
                } else {
                    // Weight k + A with A in (-m, 0): thin a degree-proportional draw.
                    let c = endpoints[rng.gen_range(0..endpoints.len())];
                    let k = neighbors[c].len() as f64;
                    if rng.gen::<f64>() * k >= k + attractiveness {
                        continue;
                    }
                    c
                };
                if !targets.contains(&candidate) {
                    targets.push(candidate);
                }
            }
            for &t in &targets {
                neighbors[new].push(t);
                neighbors[t].push(new);
                endpoints.push(new);
                endpoints.push(t);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Self::from_neighbor_lists(neighbors)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// `d = max_i d_i`, zero for edgeless graphs.
    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Position of `j` in the neighbor list of `i`.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        self.neighbors[i].binary_search(&j).ok()
    }

    pub fn reverse_position(&self, i: usize, pos: usize) -> usize {
        self.reverse[i][pos]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n() && self.position(i, j).is_some()
    }

    /// Undirected edges `(i, j)` with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.n();
        let mut m = vec![vec![false; n]; n];
        for (i, j) in self.edges() {
            m[i][j] = true;
            m[j][i] = true;
        }
        m
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Appends a new agent linked to `links` and returns its id.
    pub fn add_agent(&mut self, links: &[usize]) -> Result<usize> {
        let id = self.n();
        let mut own: Vec<usize> = links.to_vec();
        own.sort_unstable();
        own.dedup();
        if let Some(&bad) = own.iter().find(|&&j| j >= id) {
            return Err(Error::InvalidEdge(id, bad));
        }
        // The new id is the largest, so it lands at the end of each list.
        let mut own_reverse = Vec::with_capacity(own.len());
        for &j in &own {
            own_reverse.push(self.neighbors[j].len());
            self.neighbors[j].push(id);
            self.reverse[j].push(own_reverse.len() - 1);
        }
        self.neighbors.push(own);
        self.reverse.push(own_reverse);
        Ok(id)
    }

    /// Serializes as `n=<count>` followed by one `i j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n={}\n", self.n());
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(Error::EdgeListParse {
            line: 1,
            message: "missing header".into(),
        })?;
        let n: usize = header
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::EdgeListParse {
                line,
                message: format!("expected `n=<count>`, got `{header}`"),
            })?;
        let mut edges = Vec::new();
        for (line, l) in lines {
            let mut parts = l.split_whitespace();
            let parse = |p: Option<&str>| -> Result<usize> {
                p.and_then(|v| v.parse().ok()).ok_or_else(|| Error::EdgeListParse {
                    line,
                    message: format!("expected `i j`, got `{l}`"),
                })
            };
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::EdgeListParse {
                    line,
                    message: format!("trailing tokens in `{l}`"),
                });
            }
            edges.push((i, j));
        }
        Self::from_edges(n, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check_invariants(t: &Topology) {
        for i in 0..t.n() {
            let list = t.neighbors(i);
            assert!(list.windows(2).all(|w| w[0] < w[1]), "sorted and simple");
            assert!(!list.contains(&i));
            for (pos, &j) in list.iter().enumerate() {
                assert!(t.has_edge(j, i));
                assert_eq!(t.neighbors(j)[t.reverse_position(i, pos)], i);
            }
        }
    }

    #[test]
    fn ring_of_four() {
        let t = Topology::generate(&TopologyKind::Ring, 4, 0).unwrap();
        assert_eq!(t.edge_count(), 4);
        assert!(t.degrees().iter().all(|&d| d == 2));
        assert_eq!(Topology::ring(5).max_degree(), 2);
    }

    #[test]
    fn star_of_four() {
        let t = Topology::generate(&TopologyKind::Star, 4, 0).unwrap();
        assert_eq!(t.degree(0), 3);
        assert!((1..4).all(|i| t.degree(i) == 1));
        assert_eq!(t.max_degree(), 3);
    }

    #[test]
    fn single_agent_random_graph_is_empty() {
        let t = Topology::generate(&TopologyKind::Random { p: 0.5 }, 1, 9).unwrap();
        assert_eq!(t.edge_count(), 0);
        assert_eq!(t.max_degree(), 0);
        assert_eq!(Topology::empty(3).max_degree(), 0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            Topology::generate(&TopologyKind::Ring, 0, 0),
            Err(Error::InvalidAgentCount(0))
        ));
        assert!(Topology::generate(&TopologyKind::Random { p: 1.5 }, 4, 0).is_err());
        let sf = TopologyKind::ScaleFree {
            exponent: 1.5,
            links_per_node: 2,
        };
        assert!(Topology::generate(&sf, 10, 0).is_err());
        assert!(Topology::generate(&TopologyKind::Regular { degree: 3 }, 10, 0).is_err());
        assert!(Topology::from_edges(3, &[(0, 0)]).is_err());
        assert!(Topology::from_edges(3, &[(0, 3)]).is_err());
    }

    #[test]
    fn edge_list_format() {
        let t = Topology::star(3);
        assert_eq!(t.to_edge_list(), "n=3\n0 1\n0 2\n");
        assert_eq!(Topology::parse_edge_list(&t.to_edge_list()).unwrap(), t);
        assert!(Topology::parse_edge_list("3\n0 1\n").is_err());
        assert!(Topology::parse_edge_list("n=3\n0\n").is_err());
    }

    #[test]
    fn add_agent_keeps_invariants() {
        let mut t = Topology::ring(5);
        let id = t.add_agent(&[3, 0, 3]).unwrap();
        assert_eq!(id, 5);
        assert_eq!(t.neighbors(5), &[0, 3]);
        check_invariants(&t);
        assert!(t.add_agent(&[9]).is_err());
    }

    #[test]
    fn regular_lattice_degrees() {
        let t = Topology::regular(20, 4);
        assert!(t.degrees().iter().all(|&d| d == 4));
        check_invariants(&t);
    }

    /// Fits `log P(K >= k) = c - (gamma - 1) log k` over the populated tail.
    fn ccdf_exponent(t: &Topology, k_min: usize) -> f64 {
        let degrees = t.degrees();
        let n = degrees.len() as f64;
        let k_max = *degrees.iter().max().unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in k_min..=k_max {
            let tail = degrees.iter().filter(|&&d| d >= k).count();
            if tail < 10 {
                break;
            }
            xs.push((k as f64).ln());
            ys.push((tail as f64 / n).ln());
        }
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        1.0 - sxy / sxx
    }

    #[test]
    fn scale_free_exponent_matches_request() {
        for &(gamma, seed) in &[(2.5, 1u64), (3.0, 2), (3.5, 3)] {
            let kind = TopologyKind::ScaleFree {
                exponent: gamma,
                links_per_node: 2,
            };
            // Attractiveness bends the low-degree end, so fit the tail of a large graph.
            let t = Topology::generate(&kind, 20_000, seed).unwrap();
            check_invariants(&t);
            let fitted = ccdf_exponent(&t, 6);
            assert!(
                (fitted - gamma).abs() <= 0.3,
                "requested {gamma}, fitted {fitted}"
            );
        }
    }

    proptest! {
        #[test]
        fn generated_topologies_are_valid_and_deterministic(
            n in 1usize..40,
            seed in any::<u64>(),
            p in 0.0f64..1.0,
            gamma in 2.2f64..4.0,
        ) {
            let kinds = [
                TopologyKind::Ring,
                TopologyKind::Star,
                TopologyKind::Random { p },
                TopologyKind::ScaleFree { exponent: gamma, links_per_node: 2 },
            ];
            for kind in &kinds {
                let a = Topology::generate(kind, n, seed).unwrap();
                let b = Topology::generate(kind, n, seed).unwrap();
                check_invariants(&a);
                prop_assert_eq!(&a, &b);
            }
        }
    }
}
