//! Weighted metric graphs and rooted trees, with the anchored-subtree and
//! trip-cost quantities the dispatch algorithms are built on.
//!
//! Lengths are nonnegative integers in a fixed length-unit so that every
//! ceiling/floor below is exact. For a rooted tree and a vertex set `X`,
//! `mst(X)` is the total length of the minimal subtree containing the depot
//! and `X`; `mst_anchored(e, X)` restricts `X` to the vertices below `e`
//! (still anchoring at the depot), and `subtree_mst(v, X)` spans `v` and the
//! members below it without the depot. `cost` and `conditional_cost` turn
//! per-edge subtree weights into lower bounds on the trip length needed to
//! serve `X` when each trip is length-capped.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use crate::rat::{ceil_div, floor_div};

pub type Vertex = u32;
pub type Length = i64;

/// Set of vertex ids (request positions with arrival times erased).
pub type VertexSet = BTreeSet<Vertex>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub u: Vertex,
    pub v: Vertex,
    pub len: Length,
}

impl EdgeSpec {
    pub fn new(u: Vertex, v: Vertex, len: Length) -> Self {
        EdgeSpec { u, v, len }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("unknown vertex {0}")]
    UnknownVertex(Vertex),
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(Vertex),
    #[error("edge ({u}, {v}) has negative length {len}")]
    NegativeLength { u: Vertex, v: Vertex, len: Length },
    #[error("self-loop at vertex {0}")]
    SelfLoop(Vertex),
    #[error("graph is not connected (vertex {0} unreachable from depot)")]
    Disconnected(Vertex),
    #[error("graph is not a tree ({edges} edges over {vertices} vertices)")]
    NotATree { vertices: usize, edges: usize },
    #[error("({u}, {v}) is not a parent-child edge of the tree")]
    NotATreeEdge { u: Vertex, v: Vertex },
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParam { name: &'static str, value: Length },
}

/// Connected undirected graph with integer edge lengths and a depot vertex.
/// Immutable after construction; all-pairs shortest distances and one
/// deterministic shortest-path tree per source are precomputed.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    ids: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    edges: Vec<EdgeSpec>,
    adj: Vec<Vec<(usize, Length)>>,
    depot: Vertex,
    dist: Vec<Vec<Length>>,
    prev: Vec<Vec<usize>>,
}

impl MetricGraph {
    pub fn new(
        vertices: Vec<Vertex>,
        edges: Vec<EdgeSpec>,
        depot: Vertex,
    ) -> Result<Self, MetricError> {
        let mut ids = vertices;
        ids.sort_unstable();
        let mut index = HashMap::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if index.insert(id, i).is_some() {
                return Err(MetricError::DuplicateVertex(id));
            }
        }
        if !index.contains_key(&depot) {
            return Err(MetricError::UnknownVertex(depot));
        }
        let mut adj = vec![Vec::new(); ids.len()];
        for e in &edges {
            if e.len < 0 {
                return Err(MetricError::NegativeLength {
                    u: e.u,
                    v: e.v,
                    len: e.len,
                });
            }
            if e.u == e.v {
                return Err(MetricError::SelfLoop(e.u));
            }
            let iu = *index.get(&e.u).ok_or(MetricError::UnknownVertex(e.u))?;
            let iv = *index.get(&e.v).ok_or(MetricError::UnknownVertex(e.v))?;
            adj[iu].push((iv, e.len));
            adj[iv].push((iu, e.len));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let mut g = MetricGraph {
            ids,
            index,
            edges,
            adj,
            depot,
            dist: Vec::new(),
            prev: Vec::new(),
        };
        let n = g.ids.len();
        let mut dist = Vec::with_capacity(n);
        let mut prev = Vec::with_capacity(n);
        for s in 0..n {
            let (d, p) = g.dijkstra(s);
            dist.push(d);
            prev.push(p);
        }
        // connectivity: everything reachable from the depot
        let di = g.index[&g.depot];
        for (i, &d) in dist[di].iter().enumerate() {
            if d == Length::MAX {
                return Err(MetricError::Disconnected(g.ids[i]));
            }
        }
        g.dist = dist;
        g.prev = prev;
        Ok(g)
    }

    // Deterministic Dijkstra: ties between equal-length paths are broken by
    // the smaller predecessor index, so shortest-path walks are reproducible.
    fn dijkstra(&self, src: usize) -> (Vec<Length>, Vec<usize>) {
        let n = self.ids.len();
        let mut dist = vec![Length::MAX; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap: BinaryHeap<std::cmp::Reverse<(Length, usize)>> = BinaryHeap::new();
        dist[src] = 0;
        prev[src] = src;
        heap.push(std::cmp::Reverse((0, src)));
        while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, len) in &self.adj[u] {
                let nd = d + len;
                if nd < dist[v] || (nd == dist[v] && u < prev[v]) {
                    let improved = nd < dist[v];
                    dist[v] = nd;
                    prev[v] = u;
                    if improved {
                        heap.push(std::cmp::Reverse((nd, v)));
                    }
                }
            }
        }
        (dist, prev)
    }

    pub fn vertex_ids(&self) -> &[Vertex] {
        &self.ids
    }

    pub fn edges(&self) -> &[EdgeSpec] {
        &self.edges
    }

    pub fn depot(&self) -> Vertex {
        self.depot
    }

    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.index.contains_key(&v)
    }

    pub(crate) fn idx(&self, v: Vertex) -> Result<usize, MetricError> {
        self.index
            .get(&v)
            .copied()
            .ok_or(MetricError::UnknownVertex(v))
    }

    pub fn id_of(&self, idx: usize) -> Vertex {
        self.ids[idx]
    }

    /// Shortest-path distance between two vertices.
    pub fn distance(&self, u: Vertex, v: Vertex) -> Result<Length, MetricError> {
        let iu = self.idx(u)?;
        let iv = self.idx(v)?;
        Ok(self.dist[iu][iv])
    }

    /// Are `u` and `v` joined by an edge?
    pub fn adjacent(&self, u: Vertex, v: Vertex) -> bool {
        match (self.index.get(&u), self.index.get(&v)) {
            (Some(&iu), Some(&iv)) => self.adj[iu].iter().any(|&(w, _)| w == iv),
            _ => false,
        }
    }

    /// Length of the edge `(u, v)`; multi-edges resolve to the shortest.
    pub fn edge_len(&self, u: Vertex, v: Vertex) -> Option<Length> {
        let iu = *self.index.get(&u)?;
        let iv = *self.index.get(&v)?;
        self.adj[iu]
            .iter()
            .filter(|&&(w, _)| w == iv)
            .map(|&(_, l)| l)
            .min()
    }

    /// The deterministic shortest path from `u` to `v`, as a vertex sequence
    /// including both endpoints.
    pub fn shortest_path(&self, u: Vertex, v: Vertex) -> Result<Vec<Vertex>, MetricError> {
        let iu = self.idx(u)?;
        let iv = self.idx(v)?;
        let mut walk = vec![self.ids[iv]];
        let mut cur = iv;
        while cur != iu {
            cur = self.prev[iu][cur];
            walk.push(self.ids[cur]);
        }
        walk.reverse();
        Ok(walk)
    }

    /// Expand a stop sequence into an adjacent-vertex walk by joining
    /// consecutive stops with shortest paths.
    pub fn expand_walk(&self, stops: &[Vertex]) -> Result<Vec<Vertex>, MetricError> {
        assert!(!stops.is_empty());
        let mut walk = vec![stops[0]];
        for w in stops.windows(2) {
            let seg = self.shortest_path(w[0], w[1])?;
            walk.extend_from_slice(&seg[1..]);
        }
        Ok(walk)
    }

    /// Total length of an adjacent-vertex walk.
    pub fn walk_len(&self, walk: &[Vertex]) -> Result<Length, MetricError> {
        let mut total = 0;
        for w in walk.windows(2) {
            match self.edge_len(w[0], w[1]) {
                Some(l) => total += l,
                None => return Err(MetricError::NotATreeEdge { u: w[0], v: w[1] }),
            }
        }
        Ok(total)
    }
}

/// An element a subtree query can be anchored at: a vertex, or an edge given
/// by its two endpoints (in either order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Vertex(Vertex),
    Edge(Vertex, Vertex),
}

/// A `MetricGraph` that is a tree, rooted at the depot. Children are ordered
/// by ascending vertex id everywhere a deterministic order is needed.
#[derive(Debug, Clone)]
pub struct RootedTree {
    g: MetricGraph,
    root: usize,
    parent: Vec<usize>,
    parent_len: Vec<Length>,
    children: Vec<Vec<usize>>,
    depth_len: Vec<Length>,
    preorder: Vec<usize>,
    tin: Vec<u32>,
    tout: Vec<u32>,
}

impl RootedTree {
    pub fn from_graph(g: MetricGraph) -> Result<Self, MetricError> {
        let n = g.vertex_count();
        if g.edges.len() != n - 1 {
            return Err(MetricError::NotATree {
                vertices: n,
                edges: g.edges.len(),
            });
        }
        let root = g.idx(g.depot)?;
        let mut parent = vec![usize::MAX; n];
        let mut parent_len = vec![0; n];
        let mut children = vec![Vec::new(); n];
        let mut depth_len = vec![0; n];
        let mut preorder = Vec::with_capacity(n);
        let mut tin = vec![0u32; n];
        let mut tout = vec![0u32; n];
        let mut clock = 0u32;
        let mut stack = vec![(root, root)];
        let mut seen = vec![false; n];
        // iterative DFS; adjacency lists are already sorted by index, which
        // coincides with ascending vertex id
        while let Some((u, par)) = stack.pop() {
            if seen[u] {
                continue;
            }
            seen[u] = true;
            parent[u] = par;
            preorder.push(u);
            tin[u] = clock;
            clock += 1;
            for &(v, len) in g.adj[u].iter().rev() {
                if !seen[v] {
                    parent_len[v] = len;
                    depth_len[v] = depth_len[u] + len;
                    stack.push((v, u));
                }
            }
        }
        if preorder.len() != n {
            let missing = (0..n).find(|&i| !seen[i]).unwrap();
            return Err(MetricError::Disconnected(g.ids[missing]));
        }
        // a connected graph with n-1 edges is acyclic; fill children and tout
        for &u in preorder.iter().skip(1) {
            children[parent[u]].push(u);
        }
        for list in &mut children {
            list.sort_unstable();
        }
        // tout via reverse preorder
        for &u in preorder.iter().rev() {
            tout[u] = children[u].iter().map(|&c| tout[c]).max().unwrap_or(tin[u]);
        }
        Ok(RootedTree {
            g,
            root,
            parent,
            parent_len,
            children,
            depth_len,
            preorder,
            tin,
            tout,
        })
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.g
    }

    pub fn depot(&self) -> Vertex {
        self.g.depot
    }

    pub fn vertex_ids(&self) -> &[Vertex] {
        self.g.vertex_ids()
    }

    pub fn vertex_count(&self) -> usize {
        self.g.vertex_count()
    }

    pub fn parent_of(&self, v: Vertex) -> Result<Option<Vertex>, MetricError> {
        let i = self.g.idx(v)?;
        Ok((i != self.root).then(|| self.g.ids[self.parent[i]]))
    }

    pub fn children_of(&self, v: Vertex) -> Result<Vec<Vertex>, MetricError> {
        let i = self.g.idx(v)?;
        Ok(self.children[i].iter().map(|&c| self.g.ids[c]).collect())
    }

    /// Tree distance from the depot.
    pub fn depth(&self, v: Vertex) -> Result<Length, MetricError> {
        Ok(self.depth_len[self.g.idx(v)?])
    }

    pub fn distance(&self, u: Vertex, v: Vertex) -> Result<Length, MetricError> {
        self.g.distance(u, v)
    }

    fn is_descendant_idx(&self, anc: usize, v: usize) -> bool {
        self.tin[anc] <= self.tin[v] && self.tin[v] <= self.tout[anc]
    }

    /// Resolve an anchor to the internal index of the subtree's top vertex
    /// (for an edge, its child endpoint).
    fn anchor_top(&self, anchor: Anchor) -> Result<usize, MetricError> {
        match anchor {
            Anchor::Vertex(v) => self.g.idx(v),
            Anchor::Edge(u, v) => {
                let iu = self.g.idx(u)?;
                let iv = self.g.idx(v)?;
                if iv != self.root && self.parent[iv] == iu {
                    Ok(iv)
                } else if iu != self.root && self.parent[iu] == iv {
                    Ok(iu)
                } else {
                    Err(MetricError::NotATreeEdge { u, v })
                }
            }
        }
    }

    /// Mark the union of depot-to-member root paths. Returns, per vertex, a
    /// flag for whether its parent edge is in the Steiner tree of `X ∪ {o}`.
    fn marks<I: IntoIterator<Item = Vertex>>(&self, members: I) -> Result<Vec<bool>, MetricError> {
        let mut marked = vec![false; self.g.vertex_count()];
        for v in members {
            let mut i = self.g.idx(v)?;
            while i != self.root && !marked[i] {
                marked[i] = true;
                i = self.parent[i];
            }
        }
        Ok(marked)
    }

    fn marked_total(&self, marked: &[bool]) -> Length {
        marked
            .iter()
            .enumerate()
            .filter(|&(_, &m)| m)
            .map(|(i, _)| self.parent_len[i])
            .sum()
    }

    /// Per-vertex sum of marked edge lengths strictly below the vertex.
    fn below_sums(&self, marked: &[bool]) -> Vec<Length> {
        let mut below = vec![0; self.g.vertex_count()];
        for &u in self.preorder.iter().rev() {
            for &c in &self.children[u] {
                if marked[c] {
                    below[u] += self.parent_len[c] + below[c];
                }
            }
        }
        below
    }

    /// Length of the minimal subtree containing the depot and `X`.
    pub fn mst(&self, x: &VertexSet) -> Result<Length, MetricError> {
        let marked = self.marks(x.iter().copied())?;
        Ok(self.marked_total(&marked))
    }

    /// Length of the minimal subtree containing the depot and the members of
    /// `X` at or below the anchor; 0 when that restriction is empty.
    pub fn mst_anchored(&self, anchor: Anchor, x: &VertexSet) -> Result<Length, MetricError> {
        let top = self.anchor_top(anchor)?;
        let mut members = Vec::new();
        for &v in x {
            let iv = self.g.idx(v)?;
            if self.is_descendant_idx(top, iv) {
                members.push(v);
            }
        }
        if members.is_empty() {
            return Ok(0);
        }
        let marked = self.marks(members)?;
        Ok(self.marked_total(&marked))
    }

    /// Length of the minimal subtree containing `v` and the members of `X`
    /// below it — no depot requirement. 0 when the members are within `{v}`.
    pub fn subtree_mst(&self, v: Vertex, x: &VertexSet) -> Result<Length, MetricError> {
        let iv = self.g.idx(v)?;
        let anchored = self.mst_anchored(Anchor::Vertex(v), x)?;
        if anchored == 0 && !x.contains(&v) {
            return Ok(0);
        }
        Ok(anchored - self.depth_len[iv])
    }

    /// Per-edge anchored subtree weights for every edge with a member below
    /// it, keyed by the edge's child vertex. Edges with weight 0 are omitted.
    pub fn anchored_weights(&self, x: &VertexSet) -> Result<Vec<(Vertex, Length)>, MetricError> {
        let marked = self.marks(x.iter().copied())?;
        let below = self.below_sums(&marked);
        let mut out = Vec::new();
        for &u in &self.preorder {
            if marked[u] {
                out.push((self.g.ids[u], self.depth_len[u] + below[u]));
            }
        }
        Ok(out)
    }

    /// `2 Σ_e ceil(mst_anchored(e, X) / fp) · len(e)`.
    pub fn cost(&self, x: &VertexSet, fp: Length) -> Result<Length, MetricError> {
        Ok(self
            .cost_terms(x, fp)?
            .iter()
            .map(|&(child, c)| {
                2 * c * self.parent_len[self.g.idx(child).expect("vertex from tree")]
            })
            .sum())
    }

    /// Per-edge ceiling counts `c_fp(X, e) = ceil(mst_e(X)/fp)`, keyed by the
    /// edge's child vertex; zero-count edges are omitted.
    pub fn cost_terms(&self, x: &VertexSet, fp: Length) -> Result<Vec<(Vertex, i64)>, MetricError> {
        if fp <= 0 {
            return Err(MetricError::NonPositiveParam {
                name: "fp",
                value: fp,
            });
        }
        Ok(self
            .anchored_weights(x)?
            .into_iter()
            .map(|(child, w)| (child, ceil_div(w, fp)))
            .collect())
    }

    /// `2 Σ_e c(X, e | Xp) · len(e)` with the two-case ceiling/floor counts.
    pub fn conditional_cost(
        &self,
        x: &VertexSet,
        xp: &VertexSet,
        f: Length,
    ) -> Result<Length, MetricError> {
        Ok(self
            .conditional_cost_terms(x, xp, f)?
            .iter()
            .map(|&(child, c)| {
                2 * c * self.parent_len[self.g.idx(child).expect("vertex from tree")]
            })
            .sum())
    }

    /// Per-edge conditional counts `c(X, e | Xp)`: `ceil(mst_e(X)/f)` on edges
    /// with no `Xp` member below, `floor((mst_e(Xp ∪ X) − mst_e(Xp)) / f)`
    /// otherwise. Zero-count edges are omitted.
    pub fn conditional_cost_terms(
        &self,
        x: &VertexSet,
        xp: &VertexSet,
        f: Length,
    ) -> Result<Vec<(Vertex, i64)>, MetricError> {
        if f <= 0 {
            return Err(MetricError::NonPositiveParam { name: "f", value: f });
        }
        let marked_x = self.marks(x.iter().copied())?;
        let marked_xp = self.marks(xp.iter().copied())?;
        let marked_both = self.marks(x.iter().chain(xp.iter()).copied())?;
        let below_xp = self.below_sums(&marked_xp);
        let below_both = self.below_sums(&marked_both);
        let below_x = self.below_sums(&marked_x);
        let mut out = Vec::new();
        for &u in &self.preorder {
            if u == self.root {
                continue;
            }
            let c = if marked_xp[u] {
                floor_div(below_both[u] - below_xp[u], f)
            } else if marked_x[u] {
                ceil_div(self.depth_len[u] + below_x[u], f)
            } else {
                0
            };
            if c != 0 {
                out.push((self.g.ids[u], c));
            }
        }
        Ok(out)
    }

    /// Tree distance from `v` to the Steiner tree of `X ∪ {o}`; with `X`
    /// empty this is the distance to the depot.
    pub fn dist_to_steiner(&self, v: Vertex, x: &VertexSet) -> Result<Length, MetricError> {
        let marked = self.marks(x.iter().copied())?;
        let mut has_marked_child = vec![false; self.g.vertex_count()];
        for (i, &m) in marked.iter().enumerate() {
            if m {
                has_marked_child[self.parent[i]] = true;
            }
        }
        let mut i = self.g.idx(v)?;
        let mut walked = 0;
        loop {
            if i == self.root || marked[i] || has_marked_child[i] {
                return Ok(walked);
            }
            walked += self.parent_len[i];
            i = self.parent[i];
        }
    }

    /// Depth-first Euler walk of the Steiner tree of `X ∪ {o}`, visiting
    /// children in ascending id order. Starts and ends at the depot and
    /// traverses each Steiner edge exactly twice, so its length is `2·mst(X)`.
    pub fn euler_walk(&self, x: &VertexSet) -> Result<Vec<Vertex>, MetricError> {
        let marked = self.marks(x.iter().copied())?;
        let mut walk = vec![self.g.depot];
        self.euler_rec(self.root, &marked, &mut walk);
        Ok(walk)
    }

    fn euler_rec(&self, u: usize, marked: &[bool], walk: &mut Vec<Vertex>) {
        for &c in &self.children[u] {
            if marked[c] {
                walk.push(self.g.ids[c]);
                self.euler_rec(c, marked, walk);
                walk.push(self.g.ids[u]);
            }
        }
    }
}

/// Convenience constructor used throughout the tests: vertices are implied
/// by the edge list plus the depot.
pub fn tree_from_edges(depot: Vertex, edges: &[(Vertex, Vertex, Length)]) -> RootedTree {
    let mut verts: BTreeSet<Vertex> = BTreeSet::new();
    verts.insert(depot);
    let mut specs = Vec::new();
    for &(u, v, len) in edges {
        verts.insert(u);
        verts.insert(v);
        specs.push(EdgeSpec::new(u, v, len));
    }
    let g = MetricGraph::new(verts.into_iter().collect(), specs, depot).expect("valid graph");
    RootedTree::from_graph(g).expect("valid tree")
}
