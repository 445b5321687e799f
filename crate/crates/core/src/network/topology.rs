use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{invalid, Error, Result};

/// Maximum number of redraws when generating a connected geometric graph.
pub const MAX_GEOMETRIC_ATTEMPTS: usize = 1000;

/// Node set `0..n` and the directed potential-edge set.
///
/// An edge `(j, i)` means node `i` can receive from node `j`, so entry
/// `A[i][j]` of a weight matrix may be non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
    in_neighbors: Vec<Vec<usize>>,
    positions: Option<Vec<[f64; 2]>>,
}

impl Topology {
    /// Builds a topology from `(from, to)` pairs; duplicates are merged.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("topology needs at least one node"));
        }
        let mut set = BTreeSet::new();
        for (j, i) in edges {
            if j >= n || i >= n {
                return Err(invalid(format!("edge ({j},{i}) out of range for n={n}")));
            }
            if i == j {
                return Err(invalid(format!("self-loop at node {i}")));
            }
            set.insert((j, i));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut in_neighbors = vec![Vec::new(); n];
        for &(j, i) in &edges {
            in_neighbors[i].push(j);
        }
        Ok(Self { n, edges, in_neighbors, positions: None })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, [])
    }

    /// Every ordered pair of distinct nodes.
    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (j, i))))
    }

    /// Bidirectional star around `center`.
    pub fn star(n: usize, center: usize) -> Result<Self> {
        Self::new(n, (0..n).filter(|&k| k != center).flat_map(|k| [(center, k), (k, center)]))
    }

    /// Bidirectional path `0 - 1 - ... - n-1`.
    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).flat_map(|k| [(k - 1, k), (k, k - 1)]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted `(from, to)` pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    pub fn max_in_degree(&self) -> usize {
        self.in_neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// The largest admissible Laplacian step, `1 / (d_max + 1)`.
    pub fn default_alpha(&self) -> f64 {
        1.0 / (self.max_in_degree() as f64 + 1.0)
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.binary_search(&(from, to)).is_ok()
    }

    /// Whether `A[i][j]` may be non-zero: the diagonal or an edge `(j, i)`.
    pub fn allows(&self, i: usize, j: usize) -> bool {
        i == j || self.has_edge(j, i)
    }

    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(j, i)| self.has_edge(i, j))
    }

    /// Connectivity of the underlying undirected graph.
    pub fn is_weakly_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for &(j, i) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n
    }

    /// Serializes to the edge-list text format: a `n=<count>` header, then one
    /// `j i` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for &(j, i) in &self.edges {
            let _ = writeln!(out, "{j} {i}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (lineno, header) = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let n: usize = header
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("line {lineno}: expected header `n=<count>`")))?;
        let mut edges = Vec::new();
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [a, b] => a.parse::<usize>().ok().zip(b.parse::<usize>().ok()),
                _ => None,
            };
            let edge = parsed.ok_or_else(|| Error::Parse(format!("line {lineno}: expected `j i`, got `{line}`")))?;
            edges.push(edge);
        }
        Self::new(n, edges).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Random geometric graph on the unit square.
///
/// Nodes are placed uniformly at random; nodes within Euclidean distance `r`
/// get a bidirectional pair of edges. Placement is redrawn until the graph is
/// connected, up to [`MAX_GEOMETRIC_ATTEMPTS`] times.
pub fn random_geometric_graph<R: Rng + ?Sized>(n: usize, r: f64, rng: &mut R) -> Result<Topology> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(r > 0.0) {
        return Err(invalid(format!("radius must be positive, got {r}")));
    }
    for _ in 0..MAX_GEOMETRIC_ATTEMPTS {
        let pos: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let (dx, dy) = (pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]);
                if (dx * dx + dy * dy).sqrt() <= r {
                    edges.push((i, j));
                    edges.push((j, i));
                }
            }
        }
        let mut topo = Topology::new(n, edges)?;
        if topo.is_weakly_connected() {
            topo.positions = Some(pos);
            return Ok(topo);
        }
    }
    Err(Error::GenerationFailure { attempts: MAX_GEOMETRIC_ATTEMPTS })
}
