//! Communication graphs and doubly-stochastic mixing matrices.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("n_agents must be positive")]
    NoAgents,
    #[error("graph not connected")]
    NotConnected,
    #[error("edge ({0}, {1}) references an agent outside 1..={2}")]
    AgentOutOfRange(usize, usize, usize),
    #[error("self-loop on agent {0}")]
    SelfLoop(usize),
    #[error("mixing matrix is not symmetric (entry ({0}, {1}))")]
    NotSymmetric(usize, usize),
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("uniform weights require a complete graph")]
    UniformNeedsComplete,
    #[error("unknown topology '{0}'")]
    UnknownKind(String),
    #[error("edge list line {line}: {reason}")]
    EdgeList { line: usize, reason: String },
}

/// Built-in topologies plus user-supplied edge lists.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    Complete,
    Ring,
    Star,
    Path,
    /// Undirected edges, 0-indexed.
    Custom(Vec<(usize, usize)>),
}

impl TopologyKind {
    pub const BUILT_IN: [TopologyKind; 4] = [
        TopologyKind::Complete,
        TopologyKind::Ring,
        TopologyKind::Star,
        TopologyKind::Path,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::Complete => "complete",
            TopologyKind::Ring => "ring",
            TopologyKind::Star => "star",
            TopologyKind::Path => "path",
            TopologyKind::Custom(_) => "custom",
        }
    }
}

impl FromStr for TopologyKind {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "complete" => Ok(TopologyKind::Complete),
            "ring" => Ok(TopologyKind::Ring),
            "star" => Ok(TopologyKind::Star),
            "path" => Ok(TopologyKind::Path),
            other => Err(TopologyError::UnknownKind(other.to_string())),
        }
    }
}

/// Undirected, connected graph on agents `0..n_agents`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_agents: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn build(kind: &TopologyKind, n_agents: usize) -> Result<Graph, TopologyError> {
        if n_agents == 0 {
            return Err(TopologyError::NoAgents);
        }
        let n = n_agents;
        let edges: Vec<(usize, usize)> = match kind {
            TopologyKind::Complete => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            TopologyKind::Ring => match n {
                1 => vec![],
                2 => vec![(0, 1)],
                _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            },
            TopologyKind::Star => (1..n).map(|j| (0, j)).collect(),
            TopologyKind::Path => (1..n).map(|j| (j - 1, j)).collect(),
            TopologyKind::Custom(list) => list.clone(),
        };
        Graph::from_edges(n, edges)
    }

    /// Builds a graph from 0-indexed edges; duplicates and orientation are ignored.
    pub fn from_edges(
        n_agents: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Graph, TopologyError> {
        if n_agents == 0 {
            return Err(TopologyError::NoAgents);
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n_agents || b >= n_agents {
                return Err(TopologyError::AgentOutOfRange(a + 1, b + 1, n_agents));
            }
            if a == b {
                return Err(TopologyError::SelfLoop(a + 1));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let graph = Graph {
            n_agents,
            edges: set,
        };
        if !graph.is_connected() {
            return Err(TopologyError::NotConnected);
        }
        Ok(graph)
    }

    /// Parses a plain-text edge list with one 1-indexed `i j` pair per line.
    ///
    /// Blank lines and `#` comments are skipped. When `n_agents` is `None` the
    /// largest index seen is used.
    pub fn parse_edge_list(text: &str, n_agents: Option<usize>) -> Result<Graph, TopologyError> {
        let mut edges = Vec::new();
        let mut max_index = 0;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| TopologyError::EdgeList {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(bad("expected two agent indices"));
            }
            let a: usize = fields[0].parse().map_err(|_| bad("invalid index"))?;
            let b: usize = fields[1].parse().map_err(|_| bad("invalid index"))?;
            if a == 0 || b == 0 {
                return Err(bad("indices are 1-based"));
            }
            max_index = max_index.max(a).max(b);
            edges.push((a - 1, b - 1));
        }
        let n = n_agents.unwrap_or(max_index);
        Graph::from_edges(n, edges)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Edges as 0-indexed `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| match (a == i, b == i) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n_agents * (self.n_agents - 1) / 2
    }

    fn is_connected(&self) -> bool {
        let n = self.n_agents;
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// How edge weights are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    Metropolis,
    /// `1/N` everywhere; complete graphs only.
    Uniform,
}

impl WeightScheme {
    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Metropolis => "metropolis",
            WeightScheme::Uniform => "uniform",
        }
    }
}

impl FromStr for WeightScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "metropolis" => Ok(WeightScheme::Metropolis),
            "uniform" => Ok(WeightScheme::Uniform),
            other => Err(format!("unknown weight scheme '{other}'")),
        }
    }
}

/// Symmetric doubly-stochastic matrix together with its spectral data.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    entries: DMatrix<f64>,
    lambda: f64,
}

impl MixingMatrix {
    pub fn from_graph(graph: &Graph, scheme: WeightScheme) -> Result<MixingMatrix, TopologyError> {
        match scheme {
            WeightScheme::Metropolis => Ok(metropolis_mixing(graph)),
            WeightScheme::Uniform => uniform_mixing(graph),
        }
    }

    /// Wraps an explicit matrix after checking shape and symmetry.
    pub fn from_entries(entries: DMatrix<f64>) -> Result<MixingMatrix, TopologyError> {
        let lambda = second_largest_eigenvalue(&entries)?;
        Ok(MixingMatrix { entries, lambda })
    }

    pub fn n_agents(&self) -> usize {
        self.entries.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Largest eigenvalue magnitude once the Perron eigenvalue is removed.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.lambda
    }

    /// `Σ_j π_ij x_j` for one agent, coordinate by coordinate.
    pub fn mix_agent(&self, i: usize, states: &[Vec<f64>]) -> Vec<f64> {
        let dim = states[i].len();
        let mut out = vec![0.0; dim];
        for (j, xj) in states.iter().enumerate() {
            let w = self.entries[(i, j)];
            if w != 0.0 {
                for d in 0..dim {
                    out[d] += w * xj[d];
                }
            }
        }
        out
    }

    /// `((I − Π) x)_i` for one agent.
    pub fn disagreement(&self, i: usize, states: &[Vec<f64>]) -> Vec<f64> {
        let mixed = self.mix_agent(i, states);
        states[i].iter().zip(mixed).map(|(x, m)| x - m).collect()
    }

    /// Quadratic form `x·(I − Π)x`, summed over coordinates.
    pub fn disagreement_form(&self, states: &[Vec<f64>]) -> f64 {
        (0..states.len())
            .map(|i| {
                self.disagreement(i, states)
                    .iter()
                    .zip(&states[i])
                    .map(|(d, x)| d * x)
                    .sum::<f64>()
            })
            .sum()
    }

    /// Largest absolute deviation of any row or column sum from 1.
    pub fn stochasticity_residual(&self) -> f64 {
        let n = self.n_agents();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| self.entries[(i, j)]).sum();
            let col: f64 = (0..n).map(|j| self.entries[(j, i)]).sum();
            worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
        worst
    }

    pub fn is_exactly_symmetric(&self) -> bool {
        self.entries == self.entries.transpose()
    }

    /// All eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_eigenvalues(&self.entries)
    }
}

impl fmt::Display for MixingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n_agents() {
            let row: Vec<String> = (0..self.n_agents())
                .map(|j| format!("{:.6}", self.entries[(i, j)]))
                .collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Metropolis–Hastings weights `1/(1 + max(deg_i, deg_j))`, diagonal takes the rest.
pub fn metropolis_mixing(graph: &Graph) -> MixingMatrix {
    let n = graph.n_agents();
    let degrees: Vec<usize> = (0..n).map(|i| graph.degree(i)).collect();
    let mut entries = DMatrix::zeros(n, n);
    for (i, j) in graph.edges() {
        let w = 1.0 / (1.0 + degrees[i].max(degrees[j]) as f64);
        entries[(i, j)] = w;
        entries[(j, i)] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| entries[(i, j)]).sum();
        entries[(i, i)] = 1.0 - off;
    }
    let lambda = second_largest_eigenvalue(&entries).expect("metropolis weights are symmetric");
    MixingMatrix { entries, lambda }
}

/// `π_ij = 1/N` for a complete graph.
pub fn uniform_mixing(graph: &Graph) -> Result<MixingMatrix, TopologyError> {
    if !graph.is_complete() {
        return Err(TopologyError::UniformNeedsComplete);
    }
    let n = graph.n_agents();
    let entries = DMatrix::from_element(n, n, 1.0 / n as f64);
    let lambda = second_largest_eigenvalue(&entries)?;
    Ok(MixingMatrix { entries, lambda })
}

fn sorted_eigenvalues(matrix: &DMatrix<f64>) -> Vec<f64> {
    let eigen = SymmetricEigen::new(matrix.clone());
    let mut values: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// Max `|eigenvalue|` over the spectrum with the Perron eigenvalue (the one
/// closest to 1) removed. A 1×1 matrix has no second eigenvalue; we return 0.
pub fn second_largest_eigenvalue(matrix: &DMatrix<f64>) -> Result<f64, TopologyError> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(TopologyError::NotSquare(rows, cols));
    }
    for i in 0..rows {
        for j in i + 1..rows {
            if matrix[(i, j)] != matrix[(j, i)] {
                return Err(TopologyError::NotSymmetric(i + 1, j + 1));
            }
        }
    }
    if rows == 1 {
        return Ok(0.0);
    }
    let values = sorted_eigenvalues(matrix);
    let perron = values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
        .map(|(idx, _)| idx)
        .unwrap_or(0);
    let lambda = values
        .iter()
        .enumerate()
        .filter(|&(idx, _)| idx != perron)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max);
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges_1based(g: &Graph) -> Vec<(usize, usize)> {
        g.edges().map(|(a, b)| (a + 1, b + 1)).collect()
    }

    #[test]
    fn complete_two_has_single_edge() {
        let g = Graph::build(&TopologyKind::Complete, 2).unwrap();
        assert_eq!(edges_1based(&g), vec![(1, 2)]);
    }

    #[test]
    fn ring_four_edges() {
        let g = Graph::build(&TopologyKind::Ring, 4).unwrap();
        assert_eq!(edges_1based(&g), vec![(1, 2), (1, 4), (2, 3), (3, 4)]);
    }

    #[test]
    fn disconnected_custom_graph_is_rejected() {
        let err = Graph::build(&TopologyKind::Custom(vec![(0, 1)]), 3).unwrap_err();
        assert_eq!(err.to_string(), "graph not connected");
    }

    #[test]
    fn zero_agents_is_rejected() {
        assert_eq!(
            Graph::build(&TopologyKind::Ring, 0).unwrap_err(),
            TopologyError::NoAgents
        );
    }

    #[test]
    fn ring_four_metropolis() {
        let g = Graph::build(&TopologyKind::Ring, 4).unwrap();
        let m = metropolis_mixing(&g);
        for i in 0..4 {
            assert_eq!(m.weight(i, i), 1.0 - 2.0 / 3.0);
            for j in g.neighbors(i) {
                assert_eq!(m.weight(i, j), 1.0 / 3.0);
            }
        }
        assert!((m.lambda() - 1.0 / 3.0).abs() < 1e-10);
        // circulant spectrum 1/3 + (2/3) cos(2πj/4)
        let mut expected: Vec<f64> = (0..4)
            .map(|j| 1.0 / 3.0 + 2.0 / 3.0 * (2.0 * std::f64::consts::PI * j as f64 / 4.0).cos())
            .collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        for (got, want) in m.eigenvalues().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_two_metropolis() {
        let g = Graph::build(&TopologyKind::Complete, 2).unwrap();
        let m = metropolis_mixing(&g);
        assert_eq!(m.entries(), &DMatrix::from_element(2, 2, 0.5));
        assert!(m.lambda().abs() < 1e-12);
    }

    #[test]
    fn single_agent() {
        let g = Graph::build(&TopologyKind::Complete, 1).unwrap();
        let m = metropolis_mixing(&g);
        assert_eq!(m.entries(), &DMatrix::from_element(1, 1, 1.0));
        assert_eq!(m.lambda(), 0.0);
        assert_eq!(m.spectral_gap(), 1.0);
    }

    #[test]
    fn non_symmetric_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.3, 0.7]);
        assert!(matches!(
            second_largest_eigenvalue(&m),
            Err(TopologyError::NotSymmetric(1, 2))
        ));
    }

    #[test]
    fn uniform_needs_complete_graph() {
        let ring = Graph::build(&TopologyKind::Ring, 5).unwrap();
        assert_eq!(
            uniform_mixing(&ring).unwrap_err(),
            TopologyError::UniformNeedsComplete
        );
        let complete = Graph::build(&TopologyKind::Complete, 5).unwrap();
        let m = uniform_mixing(&complete).unwrap();
        assert!(m.lambda() < 1e-12);
    }

    #[test]
    fn edge_list_parsing() {
        let g = Graph::parse_edge_list("# triangle\n1 2\n2 3\n\n3 1\n", None).unwrap();
        assert_eq!(g.n_agents(), 3);
        assert_eq!(g.n_edges(), 3);
        assert!(Graph::parse_edge_list("0 1\n", None).is_err());
        assert!(Graph::parse_edge_list("1 2 3\n", None).is_err());
        assert_eq!(
            Graph::parse_edge_list("1 2\n", Some(3)).unwrap_err(),
            TopologyError::NotConnected
        );
    }

    #[test]
    fn small_ring_degenerates() {
        assert_eq!(Graph::build(&TopologyKind::Ring, 2).unwrap().n_edges(), 1);
        assert_eq!(Graph::build(&TopologyKind::Ring, 1).unwrap().n_edges(), 0);
    }
}
