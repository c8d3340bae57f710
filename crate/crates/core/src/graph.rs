//! Undirected communication topology between loads.
//!
//! Nodes are indexed from 0 internally. Text inputs (edge lists, config
//! files) use 1-based load ids and are converted on parse.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

/// Largest node count for which [`GraphTopology::laplacian`] is stored dense.
pub const DENSE_LAPLACIAN_MAX: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphTopology {
    neighbors: Vec<Vec<usize>>,
}

/// Graph Laplacian `L = D - A`, integer valued.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Laplacian {
    Dense(Vec<Vec<i64>>),
    /// Degrees plus adjacency lists; off-diagonal entries are -1 on edges.
    Sparse {
        degree: Vec<i64>,
        neighbors: Vec<Vec<usize>>,
    },
}

impl Laplacian {
    pub fn n(&self) -> usize {
        match self {
            Laplacian::Dense(m) => m.len(),
            Laplacian::Sparse { degree, .. } => degree.len(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        match self {
            Laplacian::Dense(m) => m[i][j],
            Laplacian::Sparse { degree, neighbors } => {
                if i == j {
                    degree[i]
                } else if neighbors[i].binary_search(&j).is_ok() {
                    -1
                } else {
                    0
                }
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<i64>> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.entry(i, j)).collect()).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Laplacian::Dense(m) => m.iter().map(|row| row.iter().zip(v).map(|(&l, &x)| l as f64 * x).sum()).collect(),
            Laplacian::Sparse { degree, neighbors } => degree
                .iter()
                .zip(neighbors)
                .enumerate()
                .map(|(i, (&d, nbrs))| d as f64 * v[i] - nbrs.iter().map(|&j| v[j]).sum::<f64>())
                .collect(),
        }
    }

    pub fn row_sums(&self) -> Vec<i64> {
        let n = self.n();
        (0..n).map(|i| (0..n).map(|j| self.entry(i, j)).sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<i64> {
        let n = self.n();
        (0..n).map(|j| (0..n).map(|i| self.entry(i, j)).sum()).collect()
    }
}

impl GraphTopology {
    /// Builds a topology from 0-based undirected edges and checks it is
    /// connected. Duplicate edges are merged; self-loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let t = Self::from_edges_unchecked(n, edges)?;
        if !t.is_connected() {
            return Err(Error::InvalidParam("communication graph is not connected".into()));
        }
        Ok(t)
    }

    /// Same as [`from_edges`](Self::from_edges) without the connectivity check.
    pub fn from_edges_unchecked(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParam("graph needs at least one node".into()));
        }
        let mut sets = vec![BTreeSet::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidParam(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::InvalidParam(format!("self-loop on node {i}")));
            }
            sets[i].insert(j);
            sets[j].insert(i);
        }
        Ok(Self { neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect() })
    }

    /// Band topology: node `i` talks to every node within `n0` positions.
    ///
    /// With 1-based ids node `i` reaches `max(1, i - n0) ..= min(n, i + n0)`;
    /// the same rule is applied here to 0-based indices.
    pub fn band(n: usize, n0: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParam(format!("band graph needs n >= 2, got {n}")));
        }
        if n0 < 1 || n0 > n {
            return Err(Error::InvalidParam(format!("band width must be in 1..={n}, got {n0}")));
        }
        let neighbors = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(n0);
                let hi = (i + n0).min(n - 1);
                (lo..=hi).filter(|&j| j != i).collect()
            })
            .collect();
        Ok(Self { neighbors })
    }

    /// Parses a whitespace-separated "i j" edge list with 1-based ids.
    /// Blank lines and `#` comments are ignored.
    pub fn parse_edge_list(n: usize, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let ids: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| -> Result<usize> {
                s.parse::<usize>().map_err(|_| Error::Config(format!("edge list line {}: bad load id {s:?}", lineno + 1)))
            };
            if ids.len() != 2 {
                return Err(Error::Config(format!("edge list line {}: expected two ids, got {:?}", lineno + 1, line)));
            }
            let (i, j) = (parse(ids[0])?, parse(ids[1])?);
            if i == 0 || j == 0 {
                return Err(Error::Config(format!("edge list line {}: ids are 1-based", lineno + 1)));
            }
            edges.push((i - 1, j - 1));
        }
        Self::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    /// Sorted neighbor set of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == n
    }

    pub fn laplacian(&self) -> Laplacian {
        let degree: Vec<i64> = self.neighbors.iter().map(|s| s.len() as i64).collect();
        if self.n() <= DENSE_LAPLACIAN_MAX {
            let n = self.n();
            let mut m = vec![vec![0i64; n]; n];
            for (i, nbrs) in self.neighbors.iter().enumerate() {
                m[i][i] = degree[i];
                for &j in nbrs {
                    m[i][j] = -1;
                }
            }
            Laplacian::Dense(m)
        } else {
            Laplacian::Sparse { degree, neighbors: self.neighbors.clone() }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn band_path_laplacian() {
        let g = GraphTopology::band(4, 1).unwrap();
        assert_eq!(g.laplacian().to_dense(), vec![vec![1, -1, 0, 0], vec![-1, 2, -1, 0], vec![0, -1, 2, -1], vec![0, 0, -1, 1]]);
    }

    #[test]
    fn band_covering_everything_is_complete() {
        let g = GraphTopology::band(3, 2).unwrap();
        for i in 0..3 {
            assert_eq!(g.degree(i), 2);
        }
    }

    #[test]
    fn band_chain_of_thousand() {
        let g = GraphTopology::band(1000, 1).unwrap();
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(999), 1);
        assert!((1..999).all(|i| g.degree(i) == 2));
        assert!(matches!(g.laplacian(), Laplacian::Sparse { .. }));
    }

    #[test]
    fn band_rejects_bad_params() {
        assert!(GraphTopology::band(1, 1).is_err());
        assert!(GraphTopology::band(5, 0).is_err());
        assert!(GraphTopology::band(5, 6).is_err());
    }

    #[test]
    fn connectivity() {
        assert!(GraphTopology::band(10, 1).unwrap().is_connected());
        let split = GraphTopology::from_edges_unchecked(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!split.is_connected());
        assert!(GraphTopology::from_edges(4, &[(0, 1), (2, 3)]).is_err());
        assert!(GraphTopology::from_edges_unchecked(1, &[]).unwrap().is_connected());
    }

    #[test]
    fn edge_list_is_one_based() {
        let g = GraphTopology::parse_edge_list(3, "# triangle\n1 2\n2 3\n\n3 1 # closing edge\n").unwrap();
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.edge_count(), 3);
        assert!(GraphTopology::parse_edge_list(3, "0 1\n").is_err());
        assert!(GraphTopology::parse_edge_list(3, "1 2 3\n").is_err());
        assert!(GraphTopology::parse_edge_list(3, "1 1\n").is_err());
        assert!(GraphTopology::parse_edge_list(3, "1 2\n").is_err());
    }

    #[test]
    fn sparse_and_dense_agree() {
        let g = GraphTopology::band(70, 3).unwrap();
        let l = g.laplacian();
        let dense = Laplacian::Dense(l.to_dense());
        let v: Vec<f64> = (0..70).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = l.mul_vec(&v);
        let b = dense.mul_vec(&v);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    fn random_connected() -> impl Strategy<Value = GraphTopology> {
        (2usize..=10)
            .prop_flat_map(|n| {
                // spanning tree via random parents, plus extra random edges
                let parents = proptest::collection::vec(any::<prop::sample::Index>(), n - 1);
                let extra = proptest::collection::vec((0..n, 0..n), 0..n);
                (Just(n), parents, extra)
            })
            .prop_map(|(n, parents, extra)| {
                let mut edges: Vec<(usize, usize)> = parents.iter().enumerate().map(|(k, p)| (k + 1, p.index(k + 1))).collect();
                edges.extend(extra.into_iter().filter(|(i, j)| i != j));
                GraphTopology::from_edges(n, &edges).unwrap()
            })
    }

    proptest! {
        #[test]
        fn laplacian_rows_and_columns_sum_to_zero(g in random_connected()) {
            let l = g.laplacian();
            prop_assert!(l.row_sums().iter().all(|&s| s == 0));
            prop_assert!(l.column_sums().iter().all(|&s| s == 0));
            let ones = vec![1.0; g.n()];
            prop_assert!(l.mul_vec(&ones).iter().all(|&v| v == 0.0));
        }

        #[test]
        fn connected_laplacian_has_rank_n_minus_one(g in random_connected()) {
            let n = g.n();
            let dense = g.laplacian().to_dense();
            let m = DMatrix::from_fn(n, n, |i, j| dense[i][j] as f64);
            prop_assert_eq!(m.rank(1e-9), n - 1);
        }

        #[test]
        fn neighbor_relation_is_symmetric(g in random_connected()) {
            for i in 0..g.n() {
                prop_assert!(!g.neighbors(i).contains(&i));
                for &j in g.neighbors(i) {
                    prop_assert!(g.neighbors(j).contains(&i));
                }
            }
        }
    }
}
