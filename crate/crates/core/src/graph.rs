//! Undirected simple graphs with canonically oriented edges.

use crate::error::{Error, Result};

/// One entry of a node's neighbor list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub neighbor: usize,
    pub edge: usize,
}

/// Undirected graph without self-loops or parallel edges.
///
/// Every edge is stored as `(i, j)` with `i < j`; that orientation fixes the sign of the
/// coboundary. Neighbor lists are sorted by neighbor index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<Incidence>>,
}

impl Graph {
    /// Builds a graph; edge order is preserved, endpoints are swapped into `i < j` order.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("graph must have at least one node".into()));
        }
        let mut canonical = Vec::new();
        let mut adjacency = vec![Vec::new(); node_count];
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a node outside 0..{node_count}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at node {a}")));
            }
            let e = (a.min(b), a.max(b));
            if canonical.contains(&e) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            let idx = canonical.len();
            canonical.push(e);
            adjacency[e.0].push(Incidence { neighbor: e.1, edge: idx });
            adjacency[e.1].push(Incidence { neighbor: e.0, edge: idx });
        }
        for list in &mut adjacency {
            list.sort_by_key(|inc| inc.neighbor);
        }
        Ok(Self {
            node_count,
            edges: canonical,
            adjacency,
        })
    }

    pub fn path(node_count: usize) -> Result<Self> {
        Self::new(node_count, (1..node_count).map(|j| (j - 1, j)))
    }

    pub fn complete(node_count: usize) -> Result<Self> {
        let edges = (0..node_count).flat_map(|i| (i + 1..node_count).map(move |j| (i, j)));
        Self::new(node_count, edges)
    }

    pub fn cycle(node_count: usize) -> Result<Self> {
        if node_count < 3 {
            return Err(Error::InvalidGraph("cycle needs at least 3 nodes".into()));
        }
        Self::new(node_count, (0..node_count).map(|i| (i, (i + 1) % node_count)))
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in insertion order, each as `(lower, upper)`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Neighbors `N_i` of node `i` with the connecting edge index.
    pub fn neighbors(&self, i: usize) -> &[Incidence] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Index of the edge joining `a` and `b`, if any.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|inc| inc.neighbor == b)
            .map(|inc| inc.edge)
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.node_count];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.node_count {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for inc in &self.adjacency[i] {
                    if !seen[inc.neighbor] {
                        seen[inc.neighbor] = true;
                        stack.push(inc.neighbor);
                    }
                }
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_orientation_and_symmetric_neighbors() {
        let g = Graph::new(4, [(2, 0), (1, 3), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2), (1, 3), (0, 1)]);
        for i in 0..4 {
            for inc in g.neighbors(i) {
                assert!(g.neighbors(inc.neighbor).iter().any(|b| b.neighbor == i && b.edge == inc.edge));
            }
        }
        assert_eq!(g.edge_between(3, 1), Some(1));
        assert_eq!(g.edge_between(2, 3), None);
    }

    #[test]
    fn rejects_self_loops_duplicates_and_out_of_range() {
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        assert!(Graph::new(0, []).is_err());
    }

    #[test]
    fn components() {
        assert_eq!(Graph::new(5, [(0, 1), (3, 4)]).unwrap().component_count(), 3);
        assert_eq!(Graph::complete(4).unwrap().component_count(), 1);
        assert_eq!(Graph::complete(4).unwrap().edge_count(), 6);
        assert_eq!(Graph::cycle(5).unwrap().degree(0), 2);
    }
}
