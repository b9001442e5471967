//! Graph algorithms on conflict graphs: ordered coloring, post-neighbor clique
//! covers, two-phase local-ratio weighted independent set, and brute-force
//! oracles for small graphs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest graph accepted by [`brute_force_mwis`].
pub const MWIS_EXACT_MAX: usize = 20;
/// Largest graph accepted by [`chromatic_number`] and [`min_clique_cover`].
pub const COVER_EXACT_MAX: usize = 12;

/// Simple undirected graph with sorted adjacency lists.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn empty(n: usize) -> Graph {
        Graph { adj: vec![Vec::new(); n] }
    }

    /// Builds a graph from an edge list. Loops and duplicates are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Graph {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        Graph { adj }
    }

    /// Builds a graph from upper-triangular rows: `upper[u]` lists neighbors `v > u`.
    pub fn from_upper(upper: Vec<Vec<usize>>) -> Graph {
        let n = upper.len();
        let mut adj = vec![Vec::new(); n];
        for (u, row) in upper.iter().enumerate() {
            for &v in row {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        Graph { adj }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, row) in self.adj.iter().enumerate() {
            out.extend(row.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    pub fn is_independent(&self, s: &[usize]) -> bool {
        s.iter().enumerate().all(|(a, &u)| s[a + 1..].iter().all(|&v| !self.has_edge(u, v)))
    }

    pub fn is_clique(&self, s: &[usize]) -> bool {
        s.iter().enumerate().all(|(a, &u)| s[a + 1..].iter().all(|&v| u != v && self.has_edge(u, v)))
    }

    /// Subgraph induced by `s`, with vertex `k` standing for `s[k]`.
    pub fn induced(&self, s: &[usize]) -> Graph {
        let mut edges = Vec::new();
        for a in 0..s.len() {
            for b in a + 1..s.len() {
                if self.has_edge(s[a], s[b]) {
                    edges.push((a, b));
                }
            }
        }
        Graph::from_edges(s.len(), &edges)
    }
}

/// Position of every vertex in a processing order.
pub fn rank_of(order: &[usize], n: usize) -> Result<Vec<usize>> {
    if order.len() != n {
        return Err(Error::Invalid(format!("order has {} entries for {n} vertices", order.len())));
    }
    let mut rank = vec![usize::MAX; n];
    for (k, &v) in order.iter().enumerate() {
        if v >= n || rank[v] != usize::MAX {
            return Err(Error::Invalid("order is not a permutation".into()));
        }
        rank[v] = k;
    }
    Ok(rank)
}

/// Color assignment. Colors are `0..num_colors`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub colors: BTreeMap<usize, usize>,
    pub num_colors: usize,
}

impl Coloring {
    /// Color classes, each listed in increasing vertex order.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_colors];
        for (&v, &c) in &self.colors {
            out[c].push(v);
        }
        out
    }

    pub fn is_proper(&self, g: &Graph) -> bool {
        self.colors.iter().all(|(&u, &cu)| g.neighbors(u).iter().all(|v| self.colors.get(v) != Some(&cu)))
    }
}

/// First-fit coloring of the vertices in `s`, processed in the order they appear in `order`.
pub fn greedy_color(g: &Graph, s: &[usize], order: &[usize]) -> Coloring {
    let mut member = vec![false; g.n()];
    for &v in s {
        member[v] = true;
    }
    let mut col = OnlineColorer::default();
    let mut color_of = vec![usize::MAX; g.n()];
    for &v in order.iter().filter(|&&v| member[v]) {
        let used: Vec<usize> = g.neighbors(v).iter().map(|&u| color_of[u]).filter(|&c| c != usize::MAX).collect();
        let c = col.assign(v, &used);
        color_of[v] = c;
    }
    col.finish()
}

/// Online first-fit coloring: each arriving vertex takes the smallest color
/// not used by its already-arrived neighbors. Assignments are final.
#[derive(Clone, Debug, Default)]
pub struct OnlineColorer {
    coloring: Coloring,
}

impl OnlineColorer {
    /// Colors `v` given the colors of its earlier neighbors and returns the color.
    pub fn assign(&mut self, v: usize, neighbor_colors: &[usize]) -> usize {
        let mut taken = vec![false; self.coloring.num_colors + 1];
        for &c in neighbor_colors {
            if c < taken.len() {
                taken[c] = true;
            }
        }
        let c = taken.iter().position(|&t| !t).expect("one slot is always free");
        self.coloring.colors.insert(v, c);
        self.coloring.num_colors = self.coloring.num_colors.max(c + 1);
        c
    }

    pub fn color_of(&self, v: usize) -> Option<usize> {
        self.coloring.colors.get(&v).copied()
    }

    pub fn finish(self) -> Coloring {
        self.coloring
    }
}

/// Online first-fit over a stream of `(vertex, neighbors)` pairs. Neighbors that
/// have not arrived yet are ignored.
pub fn online_color<I>(stream: I) -> Coloring
where
    I: IntoIterator<Item = (usize, Vec<usize>)>,
{
    let mut col = OnlineColorer::default();
    for (v, nbrs) in stream {
        let used: Vec<usize> = nbrs.iter().filter_map(|&u| col.color_of(u)).collect();
        col.assign(v, &used);
    }
    col.finish()
}

/// Greedy clique cover of the post-neighbors of `v` (neighbors that come later
/// in the order). Post-neighbors are scanned in order; each uncovered one seeds
/// a clique that absorbs every later uncovered post-neighbor adjacent to all members.
pub fn postneighbor_clique_cover(g: &Graph, rank: &[usize], v: usize) -> Vec<Vec<usize>> {
    let mut post: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| rank[u] > rank[v]).collect();
    post.sort_unstable_by_key(|&u| rank[u]);
    greedy_clique_cover(g, &post)
}

/// Greedy clique cover of `items`, taken in the given sequence.
pub fn greedy_clique_cover(g: &Graph, items: &[usize]) -> Vec<Vec<usize>> {
    let mut covered = vec![false; items.len()];
    let mut parts = Vec::new();
    for a in 0..items.len() {
        if covered[a] {
            continue;
        }
        covered[a] = true;
        let mut clique = vec![items[a]];
        for b in a + 1..items.len() {
            if !covered[b] && clique.iter().all(|&u| g.has_edge(u, items[b])) {
                covered[b] = true;
                clique.push(items[b]);
            }
        }
        parts.push(clique);
    }
    parts
}

/// Output of [`local_ratio_mwis`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwisResult {
    pub set: Vec<usize>,
    pub weight: f64,
    /// Largest greedy post-neighbor clique cover among stacked vertices.
    pub k_observed: usize,
}

/// Two-phase local-ratio weighted independent set.
///
/// Forward pass in `order`: a vertex with positive residual weight `r` is
/// stacked and `r` is subtracted from it and from its post-neighbors. Backward
/// pass: stacked vertices are popped and kept unless a kept neighbor exists.
/// The result weighs at least `OPT / max(1, k_observed)`.
pub fn local_ratio_mwis(g: &Graph, order: &[usize], weights: &[f64]) -> Result<MwisResult> {
    let n = g.n();
    let rank = rank_of(order, n)?;
    if weights.len() != n || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Invalid("weights must be finite, non-negative and one per vertex".into()));
    }
    let mut residual = weights.to_vec();
    let mut stack = Vec::new();
    let mut k_observed = 0;
    for &v in order {
        let r = residual[v];
        if r <= 0.0 {
            continue;
        }
        stack.push(v);
        residual[v] = 0.0;
        for &u in g.neighbors(v) {
            if rank[u] > rank[v] {
                residual[u] -= r;
            }
        }
        k_observed = k_observed.max(postneighbor_clique_cover(g, &rank, v).len());
    }
    let mut chosen = vec![false; n];
    let mut set = Vec::new();
    while let Some(v) = stack.pop() {
        if g.neighbors(v).iter().all(|&u| !chosen[u]) {
            chosen[v] = true;
            set.push(v);
        }
    }
    set.sort_unstable();
    let weight = set.iter().map(|&v| weights[v]).sum();
    Ok(MwisResult { set, weight, k_observed })
}

fn neighbor_masks(g: &Graph) -> Vec<u32> {
    (0..g.n()).map(|v| g.neighbors(v).iter().fold(0u32, |m, &u| m | (1 << u))).collect()
}

/// Exact maximum-weight independent set by enumeration (at most 20 vertices).
pub fn brute_force_mwis(g: &Graph, weights: &[f64]) -> Result<(Vec<usize>, f64)> {
    let n = g.n();
    if n > MWIS_EXACT_MAX {
        return Err(Error::Size(format!("brute-force MWIS supports at most {MWIS_EXACT_MAX} vertices, got {n}")));
    }
    let nb = neighbor_masks(g);
    let (mut best, mut best_w) = (0u32, 0.0);
    for mask in 0u32..(1u32 << n) {
        let mut ok = true;
        let mut w = 0.0;
        let mut rest = mask;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            if nb[v] & mask != 0 {
                ok = false;
                break;
            }
            w += weights[v];
        }
        if ok && w > best_w {
            best = mask;
            best_w = w;
        }
    }
    Ok(((0..n).filter(|&v| best >> v & 1 == 1).collect(), best_w))
}

/// Minimum number of sets from `good` needed to partition all of `0..n`,
/// by dynamic programming over subsets. `good` must be closed under subsets.
fn min_partition(n: usize, good: impl Fn(u32) -> bool) -> usize {
    let full = (1u32 << n) - 1;
    let mut ok = vec![false; 1 << n];
    for mask in 0..=full {
        ok[mask as usize] = good(mask);
    }
    let mut dp = vec![usize::MAX; 1 << n];
    dp[0] = 0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let part = sub | low;
            if ok[part as usize] {
                let prev = dp[(mask ^ part) as usize];
                if prev != usize::MAX && prev + 1 < dp[mask as usize] {
                    dp[mask as usize] = prev + 1;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    dp[full as usize]
}

/// Exact chromatic number (at most 12 vertices).
pub fn chromatic_number(g: &Graph) -> Result<usize> {
    let n = g.n();
    if n > COVER_EXACT_MAX {
        return Err(Error::Size(format!("exact coloring supports at most {COVER_EXACT_MAX} vertices, got {n}")));
    }
    if n == 0 {
        return Ok(0);
    }
    let nb = neighbor_masks(g);
    Ok(min_partition(n, |mask| (0..n).all(|v| mask >> v & 1 == 0 || nb[v] & mask == 0)))
}

/// Exact minimum clique cover of the vertices in `s` (at most 12 of them).
pub fn min_clique_cover(g: &Graph, s: &[usize]) -> Result<usize> {
    if s.len() > COVER_EXACT_MAX {
        return Err(Error::Size(format!("exact clique cover supports at most {COVER_EXACT_MAX} vertices, got {}", s.len())));
    }
    if s.is_empty() {
        return Ok(0);
    }
    let h = g.induced(s);
    let n = h.n();
    let nb = neighbor_masks(&h);
    Ok(min_partition(n, |mask| (0..n).all(|v| mask >> v & 1 == 0 || (mask & !(1 << v)) & !nb[v] == 0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, &(1..=leaves).map(|v| (0, v)).collect::<Vec<_>>())
    }

    #[test]
    fn online_star_center_last_uses_two_colors() {
        let g = star(5);
        let mut stream: Vec<(usize, Vec<usize>)> = (1..=5).map(|v| (v, g.neighbors(v).to_vec())).collect();
        stream.push((0, g.neighbors(0).to_vec()));
        let c = online_color(stream);
        assert_eq!(c.num_colors, 2);
        assert!(c.is_proper(&g));
    }

    #[test]
    fn local_ratio_single_edge_takes_heavier_endpoint() {
        let g = Graph::from_edges(2, &[(0, 1)]);
        for order in [[0, 1], [1, 0]] {
            let r = local_ratio_mwis(&g, &order, &[5.0, 3.0]).unwrap();
            assert_eq!(r.set, vec![0]);
            assert_eq!(r.weight, 5.0);
        }
    }

    #[test]
    fn exact_oracles_on_small_graphs() {
        let c5 = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        assert_eq!(chromatic_number(&c5).unwrap(), 3);
        assert_eq!(min_clique_cover(&c5, &[0, 1, 2, 3, 4]).unwrap(), 3);
        let (set, w) = brute_force_mwis(&c5, &[1.0; 5]).unwrap();
        assert_eq!((set.len(), w), (2, 2.0));
        assert!(chromatic_number(&Graph::empty(13)).is_err());
    }

    #[test]
    fn postneighbor_cover_of_clique_is_one_part() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        let rank = rank_of(&[0, 1, 2, 3], 4).unwrap();
        assert_eq!(postneighbor_clique_cover(&g, &rank, 0), vec![vec![1, 2, 3]]);
        assert!(postneighbor_clique_cover(&g, &rank, 3).is_empty());
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = (Graph, Vec<usize>)> {
        (1..=max_n).prop_flat_map(|n| {
            let pairs = n * (n - 1) / 2;
            (proptest::collection::vec(any::<bool>(), pairs), Just((0..n).collect::<Vec<_>>()).prop_shuffle()).prop_map(
                move |(bits, order)| {
                    let mut edges = Vec::new();
                    let mut k = 0;
                    for u in 0..n {
                        for v in u + 1..n {
                            if bits[k] {
                                edges.push((u, v));
                            }
                            k += 1;
                        }
                    }
                    (Graph::from_edges(n, &edges), order)
                },
            )
        })
    }

    proptest! {
        #[test]
        fn greedy_color_is_proper_and_inductive((g, order) in arb_graph(12)) {
            let all: Vec<usize> = (0..g.n()).collect();
            let c = greedy_color(&g, &all, &order);
            prop_assert!(c.is_proper(&g));
            let rank = rank_of(&order, g.n()).unwrap();
            let back = (0..g.n()).map(|v| g.neighbors(v).iter().filter(|&&u| rank[u] < rank[v]).count()).max().unwrap_or(0);
            prop_assert!(c.num_colors <= back + 1);
            prop_assert!(c.num_colors >= chromatic_number(&g).unwrap());
        }

        #[test]
        fn local_ratio_meets_its_bound(
            (g, order) in arb_graph(12),
            w in proptest::collection::vec(0u32..1000, 12),
        ) {
            let w: Vec<f64> = w[..g.n()].iter().map(|&x| x as f64).collect();
            let r = local_ratio_mwis(&g, &order, &w).unwrap();
            prop_assert!(g.is_independent(&r.set));
            let (_, opt) = brute_force_mwis(&g, &w).unwrap();
            prop_assert!(r.weight * r.k_observed.max(1) as f64 >= opt - 1e-9);
        }

        #[test]
        fn local_ratio_is_scale_invariant(
            (g, order) in arb_graph(10),
            w in proptest::collection::vec(0u32..1000, 10),
            lambda in 1u32..1000,
        ) {
            let w: Vec<f64> = w[..g.n()].iter().map(|&x| x as f64).collect();
            let scaled: Vec<f64> = w.iter().map(|x| x * lambda as f64).collect();
            let a = local_ratio_mwis(&g, &order, &w).unwrap();
            let b = local_ratio_mwis(&g, &order, &scaled).unwrap();
            prop_assert_eq!(a.set, b.set);
        }

        #[test]
        fn greedy_cover_parts_are_cliques((g, order) in arb_graph(12)) {
            let rank = rank_of(&order, g.n()).unwrap();
            for v in 0..g.n() {
                let parts = postneighbor_clique_cover(&g, &rank, v);
                let mut seen: Vec<usize> = parts.iter().flatten().copied().collect();
                seen.sort_unstable();
                let mut post: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| rank[u] > rank[v]).collect();
                post.sort_unstable();
                prop_assert_eq!(seen, post.clone());
                for p in &parts {
                    prop_assert!(g.is_clique(p));
                }
                prop_assert!(parts.len() >= min_clique_cover(&g, &post).unwrap());
            }
        }
    }
}
