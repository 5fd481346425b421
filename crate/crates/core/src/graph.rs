//! Service-dependency graphs, greedy coloring and chromatic counting.
//!
//! Every admitted user service in a slice-in-slice category is a vertex.
//! A service's throughput and resource share is learnt conditioned on all
//! services admitted before it, so the dependency graph over `u` services is
//! the complete graph `K_u`. Layered partite graphs (independent layers with
//! complete joins between consecutive layers) model chains of conditional
//! distributions.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

/// Largest graph accepted by [`max_clique_size_brute`].
pub const CLIQUE_BRUTE_LIMIT: usize = 16;
/// Largest graph accepted by [`chromatic_number_brute`].
pub const CHROMATIC_BRUTE_LIMIT: usize = 10;
/// Largest graph accepted by [`is_perfect_brute`].
pub const PERFECT_BRUTE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for graph with {vertex_count} vertices")]
    VertexOutOfRange { vertex: usize, vertex_count: usize },
    #[error("self-loop on vertex {0} is not allowed")]
    SelfLoop(usize),
    #[error("position {position} out of range for ordering of length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("{operation} supports at most {limit} vertices, graph has {vertex_count}")]
    CapacityExceeded {
        operation: &'static str,
        limit: usize,
        vertex_count: usize,
    },
    #[error("layered partite graph needs at least one layer")]
    NoLayers,
    #[error("layer {0} is empty; every layer needs at least one vertex")]
    EmptyLayer(usize),
}

/// Undirected simple graph over user-service vertices `0..vertex_count`.
#[derive(Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    vertex_count: usize,
    // Row-major symmetric adjacency matrix, diagonal always false.
    adjacency: Vec<bool>,
}

impl DependencyGraph {
    /// Graph with `vertex_count` vertices and no edges.
    pub fn empty(vertex_count: usize) -> Self {
        Self {
            vertex_count,
            adjacency: vec![false; vertex_count * vertex_count],
        }
    }

    /// Cycle `C_n`; used as the classic imperfect control graph.
    pub fn cycle(n: usize) -> Self {
        let mut g = Self::empty(n);
        if n >= 3 {
            for v in 0..n {
                g.set_edge(v, (v + 1) % n);
            }
        } else if n == 2 {
            g.set_edge(0, 1);
        }
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        self.check_vertex(a)?;
        self.check_vertex(b)?;
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        self.set_edge(a, b);
        Ok(())
    }

    fn set_edge(&mut self, a: usize, b: usize) {
        let n = self.vertex_count;
        self.adjacency[a * n + b] = true;
        self.adjacency[b * n + a] = true;
    }

    /// Panics if either vertex is out of range.
    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        assert!(a < self.vertex_count && b < self.vertex_count);
        self.adjacency[a * self.vertex_count + b]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.vertex_count;
        let row = &self.adjacency[v * n..(v + 1) * n];
        row.iter()
            .enumerate()
            .filter_map(|(w, &adjacent)| adjacent.then_some(w))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).count()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.vertex_count)
            .flat_map(move |a| ((a + 1)..self.vertex_count).map(move |b| (a, b)))
            .filter(|&(a, b)| self.is_adjacent(a, b))
    }

    /// True when every pair of distinct vertices is adjacent.
    pub fn is_complete(&self) -> bool {
        self.edge_count() == self.vertex_count * self.vertex_count.saturating_sub(1) / 2
    }

    /// Subgraph induced by the vertices whose bits are set in `mask`,
    /// relabelled in ascending order.
    pub fn induced_by_mask(&self, mask: u32) -> Self {
        let kept: Vec<usize> = (0..self.vertex_count)
            .filter(|&v| mask & (1 << v) != 0)
            .collect();
        let mut sub = Self::empty(kept.len());
        for (i, &a) in kept.iter().enumerate() {
            for (j, &b) in kept.iter().enumerate().skip(i + 1) {
                if self.is_adjacent(a, b) {
                    sub.set_edge(i, j);
                }
            }
        }
        sub
    }

    fn check_vertex(&self, v: usize) -> Result<(), GraphError> {
        if v < self.vertex_count {
            Ok(())
        } else {
            Err(GraphError::VertexOutOfRange {
                vertex: v,
                vertex_count: self.vertex_count,
            })
        }
    }

    fn check_budget(&self, operation: &'static str, limit: usize) -> Result<(), GraphError> {
        if self.vertex_count > limit {
            return Err(GraphError::CapacityExceeded {
                operation,
                limit,
                vertex_count: self.vertex_count,
            });
        }
        Ok(())
    }

    // Neighbourhood bitmasks; callers guarantee vertex_count <= 32.
    fn neighbor_masks(&self) -> Vec<u32> {
        (0..self.vertex_count)
            .map(|v| self.neighbors(v).fold(0u32, |m, w| m | (1 << w)))
            .collect()
    }
}

impl fmt::Debug for DependencyGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DependencyGraph")
            .field("vertex_count", &self.vertex_count)
            .field("edges", &self.edges().collect::<Vec<_>>())
            .finish()
    }
}

/// Proper vertex coloring with contiguous color indices starting at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub assignment: Vec<usize>,
    pub colors_used: usize,
}

impl Coloring {
    pub fn is_proper(&self, g: &DependencyGraph) -> bool {
        self.assignment.len() == g.vertex_count()
            && g.edges()
                .all(|(a, b)| self.assignment[a] != self.assignment[b])
    }
}

/// `n` independent layers with complete joins between consecutive layers only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredPartite {
    layer_sizes: Vec<usize>,
}

impl LayeredPartite {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self, GraphError> {
        if layer_sizes.is_empty() {
            return Err(GraphError::NoLayers);
        }
        if let Some(i) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(GraphError::EmptyLayer(i));
        }
        Ok(Self { layer_sizes })
    }

    pub fn layer_count(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// Layer index of every vertex, vertices numbered layer by layer.
    pub fn layer_of(&self) -> Vec<usize> {
        self.layer_sizes
            .iter()
            .enumerate()
            .flat_map(|(layer, &size)| std::iter::repeat_n(layer, size))
            .collect()
    }

    pub fn to_graph(&self) -> DependencyGraph {
        let layer_of = self.layer_of();
        let mut g = DependencyGraph::empty(layer_of.len());
        for a in 0..layer_of.len() {
            for b in (a + 1)..layer_of.len() {
                if layer_of[b] == layer_of[a] + 1 {
                    g.set_edge(a, b);
                }
            }
        }
        g
    }
}

/// Complete graph `K_u`: service `n` depends on every earlier service `1..n-1`.
pub fn build_dependency_graph(u: usize) -> DependencyGraph {
    let mut g = DependencyGraph::empty(u);
    for n in 1..u {
        for earlier in 0..n {
            g.set_edge(n, earlier);
        }
    }
    g
}

/// True iff `vertices` is pairwise adjacent and no outside vertex is adjacent
/// to all of its members. Duplicates in `vertices` are ignored.
pub fn is_maximal_clique(g: &DependencyGraph, vertices: &[usize]) -> Result<bool, GraphError> {
    for &v in vertices {
        g.check_vertex(v)?;
    }
    let mut members = vec![false; g.vertex_count()];
    for &v in vertices {
        members[v] = true;
    }
    let set: Vec<usize> = (0..g.vertex_count()).filter(|&v| members[v]).collect();

    let pairwise = set
        .iter()
        .enumerate()
        .all(|(i, &a)| set[i + 1..].iter().all(|&b| g.is_adjacent(a, b)));
    if !pairwise {
        return Ok(false);
    }
    let extendable = (0..g.vertex_count())
        .filter(|&w| !members[w])
        .any(|w| set.iter().all(|&v| g.is_adjacent(v, w)));
    Ok(!extendable)
}

/// Clique number by exhaustive subset enumeration.
pub fn max_clique_size_brute(g: &DependencyGraph) -> Result<usize, GraphError> {
    g.check_budget("max_clique_size_brute", CLIQUE_BRUTE_LIMIT)?;
    let masks = g.neighbor_masks();
    let n = g.vertex_count();
    let mut best = 0;
    for subset in 0u32..(1u32 << n) {
        let size = subset.count_ones() as usize;
        if size <= best {
            continue;
        }
        let is_clique = (0..n)
            .filter(|&v| subset & (1 << v) != 0)
            .all(|v| subset & !(1 << v) & !masks[v] == 0);
        if is_clique {
            best = size;
        }
    }
    Ok(best)
}

/// Vertices by non-increasing degree, ties broken by ascending index.
pub fn degree_ordering(g: &DependencyGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.vertex_count()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
    order
}

/// Greedy coloring in degree order; each vertex takes the smallest color
/// not used by an already-colored neighbor.
pub fn greedy_color(g: &DependencyGraph) -> Coloring {
    const UNCOLORED: usize = usize::MAX;
    let n = g.vertex_count();
    let mut assignment = vec![UNCOLORED; n];
    let mut colors_used = 0;
    let mut taken = Vec::with_capacity(n);
    for v in degree_ordering(g) {
        taken.clear();
        taken.resize(colors_used + 1, false);
        for w in g.neighbors(v) {
            let c = assignment[w];
            if c != UNCOLORED {
                taken[c] = true;
            }
        }
        let color = taken.iter().position(|&t| !t).unwrap_or(colors_used);
        assignment[v] = color;
        colors_used = colors_used.max(color + 1);
    }
    Coloring {
        assignment,
        colors_used,
    }
}

/// Number of neighbors of `ordering[position]` that appear earlier in `ordering`.
pub fn earlier_neighbors(
    g: &DependencyGraph,
    ordering: &[usize],
    position: usize,
) -> Result<usize, GraphError> {
    if position >= ordering.len() {
        return Err(GraphError::PositionOutOfRange {
            position,
            len: ordering.len(),
        });
    }
    for &v in &ordering[..=position] {
        g.check_vertex(v)?;
    }
    let v = ordering[position];
    Ok(ordering[..position]
        .iter()
        .filter(|&&w| w != v && g.is_adjacent(v, w))
        .count())
}

/// Smallest `k` admitting a proper `k`-coloring, by exhaustive backtracking.
pub fn chromatic_number_brute(g: &DependencyGraph) -> Result<usize, GraphError> {
    g.check_budget("chromatic_number_brute", CHROMATIC_BRUTE_LIMIT)?;
    let n = g.vertex_count();
    if n == 0 {
        return Ok(0);
    }
    let masks = g.neighbor_masks();
    let k = (1..=n)
        .find(|&k| {
            let mut colors = vec![usize::MAX; n];
            colorable(&masks, k, 0, 0, &mut colors)
        })
        .expect("n colors always suffice");
    Ok(k)
}

// Colors vertices in index order; a vertex may open at most one new color,
// which removes color-permutation symmetry from the search.
fn colorable(masks: &[u32], k: usize, v: usize, opened: usize, colors: &mut [usize]) -> bool {
    if v == masks.len() {
        return true;
    }
    let limit = (opened + 1).min(k);
    for c in 0..limit {
        let clash = (0..v).any(|w| masks[v] & (1 << w) != 0 && colors[w] == c);
        if clash {
            continue;
        }
        colors[v] = c;
        if colorable(masks, k, v + 1, opened.max(c + 1), colors) {
            return true;
        }
    }
    colors[v] = usize::MAX;
    false
}

/// True iff every induced subgraph has chromatic number equal to clique number.
pub fn is_perfect_brute(g: &DependencyGraph) -> Result<bool, GraphError> {
    g.check_budget("is_perfect_brute", PERFECT_BRUTE_LIMIT)?;
    let n = g.vertex_count();
    for mask in 1u32..(1u32 << n) {
        let sub = g.induced_by_mask(mask);
        if chromatic_number_brute(&sub)? != max_clique_size_brute(&sub)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Falling factorial `k (k-1) ... (k-u+1)`: proper `k`-colorings of `K_u`.
///
/// Returns 1 for `u = 0` and 0 once a factor reaches zero (`k < u`).
pub fn chromatic_poly_complete(u: u64, k: u64) -> BigUint {
    if u > k {
        return BigUint::zero();
    }
    (1..=u).fold(BigUint::one(), |acc, n| acc * (k - n + 1))
}

/// `k (k-1)^(n-1)`: layer-uniform colorings of an `n`-layer partite graph
/// where consecutive layers take different colors.
pub fn chromatic_poly_layered_partite(n: u64, k: u64) -> Result<BigUint, GraphError> {
    if n == 0 {
        return Err(GraphError::NoLayers);
    }
    let exponent = u32::try_from(n - 1).expect("layer count fits in u32");
    Ok(BigUint::from(k) * BigUint::from(k.saturating_sub(1)).pow(exponent))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn dependency_graph_sizes() {
        let g = build_dependency_graph(1);
        assert_eq!((g.vertex_count(), g.edge_count()), (1, 0));
        assert_eq!(build_dependency_graph(4).edge_count(), 6);
        let empty = build_dependency_graph(0);
        assert_eq!((empty.vertex_count(), empty.edge_count()), (0, 0));
    }

    #[test]
    fn dependency_graph_links_every_earlier_service() {
        let g = build_dependency_graph(7);
        for n in 0..7 {
            assert!(!g.is_adjacent(n, n));
            for earlier in 0..n {
                assert!(g.is_adjacent(n, earlier));
                assert!(g.is_adjacent(earlier, n));
            }
        }
        assert!(g.is_complete());
    }

    #[test]
    fn add_edge_rejects_bad_input() {
        let mut g = DependencyGraph::empty(3);
        assert_eq!(g.add_edge(1, 1), Err(GraphError::SelfLoop(1)));
        assert!(matches!(
            g.add_edge(0, 3),
            Err(GraphError::VertexOutOfRange { vertex: 3, .. })
        ));
        g.add_edge(0, 2).unwrap();
        assert!(g.is_adjacent(2, 0));
    }

    #[test]
    fn maximal_clique_examples() {
        let k5 = build_dependency_graph(5);
        assert!(is_maximal_clique(&k5, &[0, 1, 2, 3, 4]).unwrap());
        assert!(!is_maximal_clique(&k5, &[0, 1]).unwrap());
        assert!(is_maximal_clique(&DependencyGraph::empty(0), &[]).unwrap());
        assert!(matches!(
            is_maximal_clique(&k5, &[0, 9]),
            Err(GraphError::VertexOutOfRange { vertex: 9, .. })
        ));
    }

    #[test]
    fn maximal_clique_rejects_non_clique() {
        let c5 = DependencyGraph::cycle(5);
        assert!(!is_maximal_clique(&c5, &[0, 2]).unwrap());
        assert!(is_maximal_clique(&c5, &[0, 1]).unwrap());
    }

    #[test]
    fn clique_number_examples() {
        assert_eq!(
            max_clique_size_brute(&build_dependency_graph(6)).unwrap(),
            6
        );
        assert_eq!(
            max_clique_size_brute(&build_dependency_graph(1)).unwrap(),
            1
        );
        let bip = LayeredPartite::new(vec![2, 2]).unwrap().to_graph();
        assert_eq!(max_clique_size_brute(&bip).unwrap(), 2);
        assert!(matches!(
            max_clique_size_brute(&build_dependency_graph(17)),
            Err(GraphError::CapacityExceeded { limit: 16, .. })
        ));
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_color(&build_dependency_graph(5)).colors_used, 5);
        assert_eq!(greedy_color(&build_dependency_graph(1)).colors_used, 1);
        let layered = LayeredPartite::new(vec![3, 3, 3]).unwrap().to_graph();
        let coloring = greedy_color(&layered);
        assert_eq!(coloring.colors_used, 2);
        assert!(coloring.is_proper(&layered));
    }

    #[test]
    fn greedy_on_clique_gives_vertex_n_color_n() {
        let coloring = greedy_color(&build_dependency_graph(6));
        assert_eq!(coloring.assignment, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn degree_ordering_prefers_high_degree_then_index() {
        // Star centred on 3 plus an isolated vertex 4.
        let mut g = DependencyGraph::empty(5);
        for leaf in [0, 1, 2] {
            g.add_edge(3, leaf).unwrap();
        }
        assert_eq!(degree_ordering(&g), vec![3, 0, 1, 2, 4]);
        assert_eq!(
            degree_ordering(&build_dependency_graph(4)),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn earlier_neighbor_examples() {
        let k5 = build_dependency_graph(5);
        let order = degree_ordering(&k5);
        assert_eq!(earlier_neighbors(&k5, &order, 0).unwrap(), 0);
        assert_eq!(earlier_neighbors(&k5, &order, 4).unwrap(), 4);
        let path = LayeredPartite::new(vec![1, 1, 1]).unwrap().to_graph();
        assert_eq!(earlier_neighbors(&path, &[0, 1, 2], 2).unwrap(), 1);
        assert_eq!(
            earlier_neighbors(&k5, &order, 5),
            Err(GraphError::PositionOutOfRange {
                position: 5,
                len: 5
            })
        );
    }

    #[test]
    fn chromatic_number_examples() {
        assert_eq!(
            chromatic_number_brute(&build_dependency_graph(4)).unwrap(),
            4
        );
        assert_eq!(
            chromatic_number_brute(&build_dependency_graph(1)).unwrap(),
            1
        );
        let layered = LayeredPartite::new(vec![2, 2, 2]).unwrap().to_graph();
        assert_eq!(chromatic_number_brute(&layered).unwrap(), 2);
        assert_eq!(
            chromatic_number_brute(&DependencyGraph::cycle(5)).unwrap(),
            3
        );
        assert!(matches!(
            chromatic_number_brute(&DependencyGraph::empty(11)),
            Err(GraphError::CapacityExceeded { limit: 10, .. })
        ));
    }

    #[test]
    fn perfectness_examples() {
        assert!(is_perfect_brute(&build_dependency_graph(6)).unwrap());
        assert!(!is_perfect_brute(&DependencyGraph::cycle(5)).unwrap());
        assert!(is_perfect_brute(&DependencyGraph::empty(3)).unwrap());
        assert!(matches!(
            is_perfect_brute(&build_dependency_graph(9)),
            Err(GraphError::CapacityExceeded { limit: 8, .. })
        ));
    }

    #[test]
    fn complete_polynomial_examples() {
        assert_eq!(chromatic_poly_complete(1, 7), big(7));
        assert_eq!(chromatic_poly_complete(3, 3), big(6));
        assert_eq!(chromatic_poly_complete(4, 3), big(0));
        assert_eq!(chromatic_poly_complete(0, 0), big(1));
        assert_eq!(chromatic_poly_complete(0, 5), big(1));
    }

    #[test]
    fn complete_polynomial_is_exact_beyond_u128() {
        // 40! has 48 digits.
        let p = chromatic_poly_complete(40, 40);
        assert_eq!(
            p.to_string(),
            "815915283247897734345611269596115894272000000000"
        );
    }

    #[test]
    fn layered_polynomial_examples() {
        assert_eq!(chromatic_poly_layered_partite(1, 5).unwrap(), big(5));
        assert_eq!(chromatic_poly_layered_partite(2, 3).unwrap(), big(6));
        assert_eq!(chromatic_poly_layered_partite(3, 2).unwrap(), big(2));
        assert_eq!(chromatic_poly_layered_partite(3, 1).unwrap(), big(0));
        assert_eq!(
            chromatic_poly_layered_partite(0, 3),
            Err(GraphError::NoLayers)
        );
    }

    #[test]
    fn layered_partite_structure() {
        assert_eq!(LayeredPartite::new(vec![]), Err(GraphError::NoLayers));
        assert_eq!(
            LayeredPartite::new(vec![2, 0]),
            Err(GraphError::EmptyLayer(1))
        );
        let lp = LayeredPartite::new(vec![2, 1, 3]).unwrap();
        let g = lp.to_graph();
        let layer = lp.layer_of();
        for a in 0..g.vertex_count() {
            for b in 0..g.vertex_count() {
                let expected = layer[a].abs_diff(layer[b]) == 1;
                assert_eq!(g.is_adjacent(a, b), expected, "pair ({a},{b})");
            }
        }
        assert_eq!(g.edge_count(), 2 + 3);
    }

    #[test]
    fn induced_subgraph_of_cycle_is_path() {
        let c5 = DependencyGraph::cycle(5);
        let sub = c5.induced_by_mask(0b0_0111);
        assert_eq!(sub.vertex_count(), 3);
        assert_eq!(sub.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }
}
