//! Finite simple undirected graphs, clique machinery and the D-set partition
//! attached to an ordered maximal clique.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite simple undirected graph.
///
/// Vertices are indexed `0..len()`; each index carries an arbitrary `u64`
/// label. Adjacency is kept both as sorted neighbour lists and as a dense
/// matrix, since the graphs handled here are small and adjacency queries sit
/// on the hot path of clique detection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    labels: Vec<u64>,
    index: BTreeMap<u64, usize>,
    neighbors: Vec<Vec<usize>>,
    matrix: Vec<bool>,
}

impl Graph {
    /// Builds a graph from labelled edges. Indices are assigned to labels in
    /// order of first appearance and duplicate edges are collapsed.
    pub fn from_edges<I>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, u64)>,
    {
        let mut labels = Vec::new();
        let mut index = BTreeMap::new();
        let mut pairs = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::SelfLoop { label: a });
            }
            let mut intern = |l: u64| {
                *index.entry(l).or_insert_with(|| {
                    labels.push(l);
                    labels.len() - 1
                })
            };
            let (i, j) = (intern(a), intern(b));
            pairs.push((i, j));
        }
        if pairs.is_empty() {
            return Err(Error::NoEdges);
        }
        Ok(Self::assemble(labels, index, &pairs))
    }

    /// Builds a graph with an explicit vertex list (isolated vertices allowed)
    /// and edges given by label.
    pub fn with_vertices(labels: Vec<u64>, edges: &[(u64, u64)]) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            if index.insert(l, i).is_some() {
                return Err(Error::DuplicateLabel(l));
            }
        }
        let mut pairs = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::SelfLoop { label: a });
            }
            let i = *index.get(&a).ok_or(Error::UnknownLabel(a))?;
            let j = *index.get(&b).ok_or(Error::UnknownLabel(b))?;
            pairs.push((i, j));
        }
        Ok(Self::assemble(labels, index, &pairs))
    }

    /// Complete graph on `m` vertices labelled `1..=m`.
    pub fn complete(m: usize) -> Self {
        let labels: Vec<u64> = (1..=m as u64).collect();
        let mut edges = Vec::new();
        for a in 1..=m as u64 {
            for b in a + 1..=m as u64 {
                edges.push((a, b));
            }
        }
        Self::with_vertices(labels, &edges).expect("complete graph is well formed")
    }

    fn assemble(labels: Vec<u64>, index: BTreeMap<u64, usize>, pairs: &[(usize, usize)]) -> Self {
        let n = labels.len();
        let mut matrix = vec![false; n * n];
        for &(i, j) in pairs {
            matrix[i * n + j] = true;
            matrix[j * n + i] = true;
        }
        let neighbors = (0..n)
            .map(|v| (0..n).filter(|&u| matrix[v * n + u]).collect())
            .collect();
        Graph {
            labels,
            index,
            neighbors,
            matrix,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> u64 {
        self.labels[v]
    }

    pub fn index_of(&self, label: u64) -> Option<usize> {
        self.index.get(&label).copied()
    }

    /// Maps a list of labels to indices, failing on the first unknown label.
    pub fn indices_of(&self, labels: &[u64]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|&l| self.index_of(l).ok_or(Error::UnknownLabel(l)))
            .collect()
    }

    pub fn labels_of(&self, vertices: &[usize]) -> Vec<u64> {
        vertices.iter().map(|&v| self.labels[v]).collect()
    }

    /// Sorted neighbour indices of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    /// `u ∼ v`. Always false for `u == v`.
    #[inline]
    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.matrix[u * self.len() + v]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as index pairs `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |u| {
            self.neighbors[u]
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| (u, v))
        })
    }

    pub fn is_complete(&self) -> bool {
        let n = self.len();
        self.neighbors.iter().all(|nb| nb.len() + 1 == n)
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.len() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange(v))
        }
    }

    /// True when every pair of distinct vertices in `set` is adjacent.
    pub fn is_clique(&self, set: &[usize]) -> bool {
        set.iter().enumerate().all(|(i, &a)| {
            a < self.len()
                && set[i + 1..]
                    .iter()
                    .all(|&b| b < self.len() && self.adjacent(a, b))
        })
    }

    /// Vertices outside `set` adjacent to every member of `set`.
    pub fn common_neighbors(&self, set: &[usize]) -> Vec<usize> {
        (0..self.len())
            .filter(|&w| set.iter().all(|&v| self.adjacent(w, v)))
            .collect()
    }
}

/// Breadth-first reachability from vertex 0. The empty graph counts as
/// connected.
pub fn is_connected(g: &Graph) -> bool {
    let n = g.len();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = queue.pop_front() {
        for &u in g.neighbors(v) {
            if !seen[u] {
                seen[u] = true;
                reached += 1;
                queue.push_back(u);
            }
        }
    }
    reached == n
}

/// All maximal cliques, via Bron–Kerbosch with Tomita pivoting.
///
/// Each clique is sorted by vertex index; the list is sorted by size and
/// then lexicographically, so positions in it serve as stable clique ids.
pub fn enumerate_maximal_cliques(g: &Graph) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut r = Vec::new();
    let p: Vec<usize> = (0..g.len()).collect();
    bron_kerbosch(g, &mut r, p, Vec::new(), &mut out);
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

fn bron_kerbosch(
    g: &Graph,
    r: &mut Vec<usize>,
    mut p: Vec<usize>,
    mut x: Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() {
        if x.is_empty() {
            out.push(r.clone());
        }
        return;
    }
    // pivot maximising |P ∩ N(u)| over P ∪ X
    let pivot = p
        .iter()
        .chain(x.iter())
        .copied()
        .max_by_key(|&u| p.iter().filter(|&&w| g.adjacent(u, w)).count())
        .expect("P is non-empty");
    let candidates: Vec<usize> = p
        .iter()
        .copied()
        .filter(|&v| !g.adjacent(pivot, v))
        .collect();
    for v in candidates {
        let next_p = p.iter().copied().filter(|&w| g.adjacent(v, w)).collect();
        let next_x = x.iter().copied().filter(|&w| g.adjacent(v, w)).collect();
        r.push(v);
        bron_kerbosch(g, r, next_p, next_x, out);
        r.pop();
        p.retain(|&w| w != v);
        x.push(v);
    }
}

/// True iff `set` is non-empty, pairwise adjacent, and no outside vertex is
/// adjacent to all of it.
pub fn is_maximal_clique(g: &Graph, set: &[usize]) -> bool {
    if set.is_empty() || !g.is_clique(set) {
        return false;
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    g.common_neighbors(set).is_empty()
}

/// A clique with a significant vertex order `(v_1, …, v_m)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderedClique(Vec<usize>);

impl OrderedClique {
    /// Checks that the vertices are distinct, in range and pairwise adjacent.
    pub fn new(g: &Graph, vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::NotAClique);
        }
        for &v in &vertices {
            g.check_vertex(v)?;
        }
        if !g.is_clique(&vertices) {
            return Err(Error::NotAClique);
        }
        Ok(OrderedClique(vertices))
    }

    pub(crate) fn from_vec_unchecked(vertices: Vec<usize>) -> Self {
        OrderedClique(vertices)
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.contains(&v)
    }

    /// Vertex indices sorted ascending, for comparison with
    /// [`enumerate_maximal_cliques`] output.
    pub fn sorted(&self) -> Vec<usize> {
        let mut s = self.0.clone();
        s.sort_unstable();
        s
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

/// D-sets of an ordered maximal clique and the blocks `V_k = {v_k} ∪ D_k`.
///
/// Fields are public so that malformed partitions can be constructed and
/// rejected by [`validate_partition`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DPartition {
    pub clique: OrderedClique,
    pub d_sets: Vec<Vec<usize>>,
    pub blocks: Vec<Vec<usize>>,
}

impl DPartition {
    /// For every vertex, the index `k` of the block containing it. `None`
    /// when the blocks do not partition the vertex set.
    pub fn block_index(&self, n: usize) -> Option<Vec<usize>> {
        let mut owner = vec![usize::MAX; n];
        for (k, block) in self.blocks.iter().enumerate() {
            for &v in block {
                if v >= n || owner[v] != usize::MAX {
                    return None;
                }
                owner[v] = k;
            }
        }
        if owner.contains(&usize::MAX) {
            None
        } else {
            Some(owner)
        }
    }
}

/// D-sets for the ordered clique `c`: `D_1` holds every vertex other than
/// `v_1` not adjacent to it; `D_k` holds vertices other than `v_k`, not
/// adjacent to `v_k` but adjacent to all of `v_1, …, v_{k-1}`.
pub fn d_sets(g: &Graph, c: &OrderedClique) -> Result<DPartition> {
    let vs = c.vertices();
    if !is_maximal_clique(g, vs) {
        return Err(Error::NotMaximalClique);
    }
    let mut d_sets = Vec::with_capacity(vs.len());
    for (k, &vk) in vs.iter().enumerate() {
        let prefix = &vs[..k];
        let d: Vec<usize> = (0..g.len())
            .filter(|&w| w != vk && !g.adjacent(w, vk) && prefix.iter().all(|&p| g.adjacent(w, p)))
            .collect();
        d_sets.push(d);
    }
    let blocks = vs
        .iter()
        .zip(&d_sets)
        .map(|(&vk, d)| {
            let mut b = Vec::with_capacity(d.len() + 1);
            b.push(vk);
            b.extend_from_slice(d);
            b
        })
        .collect();
    Ok(DPartition {
        clique: c.clone(),
        d_sets,
        blocks,
    })
}

/// Checks the three partition identities: D-sets avoid the clique, D-sets
/// are pairwise disjoint, and clique plus D-sets cover `V`. Blocks must be
/// consistent with the D-sets.
pub fn validate_partition(p: &DPartition, g: &Graph) -> bool {
    let n = g.len();
    let vs = p.clique.vertices();
    if p.d_sets.len() != vs.len() || p.blocks.len() != vs.len() {
        return false;
    }
    if vs.iter().any(|&v| v >= n) {
        return false;
    }
    // D-sets avoid the clique
    if p.d_sets.iter().flatten().any(|w| vs.contains(w)) {
        return false;
    }
    // pairwise disjoint D-sets
    let mut seen = vec![false; n];
    for &w in p.d_sets.iter().flatten() {
        if w >= n || seen[w] {
            return false;
        }
        seen[w] = true;
    }
    // clique ∪ D-sets = V
    for &v in vs {
        if seen[v] {
            return false;
        }
        seen[v] = true;
    }
    if seen.iter().any(|s| !s) {
        return false;
    }
    // blocks agree with V_k = {v_k} ∪ D_k and partition V
    for (k, block) in p.blocks.iter().enumerate() {
        let mut expected = p.d_sets[k].clone();
        expected.push(vs[k]);
        expected.sort_unstable();
        let mut got = block.clone();
        got.sort_unstable();
        if expected != got {
            return false;
        }
    }
    p.block_index(n).is_some()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const FIGURE1_EDGES: [(u64, u64); 12] = [
        (1, 2),
        (2, 3),
        (2, 4),
        (2, 5),
        (2, 7),
        (3, 4),
        (3, 5),
        (4, 5),
        (4, 6),
        (4, 8),
        (5, 6),
        (7, 8),
    ];

    pub(crate) fn figure1() -> Graph {
        Graph::from_edges(FIGURE1_EDGES).unwrap()
    }

    fn idx(g: &Graph, labels: &[u64]) -> Vec<usize> {
        g.indices_of(labels).unwrap()
    }

    fn label_sets(g: &Graph, sets: &[Vec<usize>]) -> Vec<Vec<u64>> {
        sets.iter()
            .map(|s| {
                let mut l = g.labels_of(s);
                l.sort_unstable();
                l
            })
            .collect()
    }

    #[test]
    fn smallest_graph() {
        let g = Graph::from_edges([(1, 2)]).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.edge_count(), 1);
        assert!(g.adjacent(0, 1) && g.adjacent(1, 0));
    }

    #[test]
    fn self_loop_rejected() {
        assert_eq!(
            Graph::from_edges([(1, 1)]),
            Err(Error::SelfLoop { label: 1 })
        );
    }

    #[test]
    fn duplicates_collapse() {
        let g = Graph::from_edges([(1, 2), (2, 1), (1, 2)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn figure1_shape() {
        let g = figure1();
        assert_eq!(g.len(), 8);
        assert_eq!(g.edge_count(), 12);
        assert_eq!(g.labels(), &[1, 2, 3, 4, 5, 7, 6, 8]);
        assert!(is_connected(&g));
    }

    #[test]
    fn connectivity() {
        let g = Graph::from_edges([(1, 2), (3, 4)]).unwrap();
        assert!(!is_connected(&g));
        let single = Graph::with_vertices(vec![1], &[]).unwrap();
        assert!(is_connected(&single));
    }

    #[test]
    fn figure1_maximal_cliques() {
        let g = figure1();
        let cliques = label_sets(&g, &enumerate_maximal_cliques(&g));
        assert_eq!(
            cliques,
            vec![
                vec![1, 2],
                vec![2, 7],
                vec![4, 8],
                vec![7, 8],
                vec![4, 5, 6],
                vec![2, 3, 4, 5]
            ]
        );
    }

    #[test]
    fn small_clique_lists() {
        assert_eq!(
            enumerate_maximal_cliques(&Graph::complete(4)),
            vec![vec![0, 1, 2, 3]]
        );
        let path = Graph::from_edges([(1, 2), (2, 3)]).unwrap();
        assert_eq!(
            enumerate_maximal_cliques(&path),
            vec![vec![0, 1], vec![1, 2]]
        );
    }

    #[test]
    fn maximality_checks() {
        let g = figure1();
        assert!(!is_maximal_clique(&g, &idx(&g, &[4, 5])));
        assert!(is_maximal_clique(&g, &idx(&g, &[4, 5, 6])));
        assert!(!is_maximal_clique(&g, &idx(&g, &[1, 3])));
    }

    #[test]
    fn d_sets_figure1_orderings() {
        let g = figure1();
        let c = OrderedClique::new(&g, idx(&g, &[1, 2])).unwrap();
        let p = d_sets(&g, &c).unwrap();
        assert_eq!(
            label_sets(&g, &p.d_sets),
            vec![vec![3, 4, 5, 6, 7, 8], vec![]]
        );
        assert!(validate_partition(&p, &g));

        let c = OrderedClique::new(&g, idx(&g, &[2, 1])).unwrap();
        let p = d_sets(&g, &c).unwrap();
        assert_eq!(
            label_sets(&g, &p.d_sets),
            vec![vec![6, 8], vec![3, 4, 5, 7]]
        );
        assert!(validate_partition(&p, &g));
    }

    #[test]
    fn d_sets_complete_graph_empty() {
        let g = Graph::complete(3);
        let c = OrderedClique::new(&g, vec![0, 1, 2]).unwrap();
        let p = d_sets(&g, &c).unwrap();
        assert!(p.d_sets.iter().all(Vec::is_empty));
    }

    #[test]
    fn d_sets_reject_non_maximal() {
        let g = figure1();
        let c = OrderedClique::new(&g, idx(&g, &[4, 5])).unwrap();
        assert_eq!(d_sets(&g, &c), Err(Error::NotMaximalClique));
    }

    #[test]
    fn broken_partitions_rejected() {
        let g = figure1();
        let c = OrderedClique::new(&g, idx(&g, &[2, 1])).unwrap();
        let good = d_sets(&g, &c).unwrap();

        let mut twice = good.clone();
        let v = twice.d_sets[0][0];
        twice.d_sets[1].push(v);
        twice.blocks[1].push(v);
        assert!(!validate_partition(&twice, &g));

        let mut missing = good.clone();
        missing.d_sets[1].pop();
        missing.blocks[1].pop();
        assert!(!validate_partition(&missing, &g));
    }
}
