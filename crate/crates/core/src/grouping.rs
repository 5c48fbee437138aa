//! Binarization of rooted trees and the cutter that breaks a bundle into
//! groups, each servable by one length-bounded trip.
//!
//! Vertices with three or more children are replaced by a complete binary
//! gadget of zero-length internal edges; the edge entering an original child
//! keeps that child's original parent-edge length, so all pairwise distances
//! are preserved. Groups are then cut bottom-up: repeatedly take the lowest
//! vertex whose depot-free subtree weight over the remaining requests
//! reaches `3F` (the depot if none) and split off everything below it.

use std::collections::HashMap;

use crate::instance::ReqId;
use crate::metric::{EdgeSpec, Length, MetricGraph, RootedTree, Vertex, VertexSet};

/// A rooted tree in which every vertex has at most two children, together
/// with the gadget vertices introduced by binarization.
#[derive(Debug, Clone)]
pub struct BinarizedTree {
    pub tree: RootedTree,
    /// Gadget vertices, ascending; all other vertices are original.
    pub gadget_vertices: Vec<Vertex>,
}

impl BinarizedTree {
    pub fn is_gadget(&self, v: Vertex) -> bool {
        self.gadget_vertices.binary_search(&v).is_ok()
    }
}

/// Replace every vertex with three or more children by a complete binary
/// gadget. Children are taken in ascending id order and split evenly
/// (floor-half left); gadget ids are allocated deterministically above the
/// largest original id.
pub fn binarize(t: &RootedTree) -> BinarizedTree {
    let mut next_id = t.vertex_ids().iter().copied().max().unwrap_or(0) + 1;
    let mut edges: Vec<EdgeSpec> = Vec::with_capacity(t.vertex_count().saturating_sub(1));
    let mut gadget_vertices = Vec::new();
    let mut vertices: Vec<Vertex> = t.vertex_ids().to_vec();

    fn build(
        parent: Vertex,
        kids: &[(Vertex, Length)],
        next_id: &mut Vertex,
        edges: &mut Vec<EdgeSpec>,
        vertices: &mut Vec<Vertex>,
        gadgets: &mut Vec<Vertex>,
    ) {
        let mid = kids.len() / 2;
        for half in [&kids[..mid], &kids[mid..]] {
            if half.len() == 1 {
                let (child, len) = half[0];
                edges.push(EdgeSpec::new(parent, child, len));
            } else {
                let g = *next_id;
                *next_id += 1;
                vertices.push(g);
                gadgets.push(g);
                edges.push(EdgeSpec::new(parent, g, 0));
                build(g, half, next_id, edges, vertices, gadgets);
            }
        }
    }

    for &v in t.vertex_ids() {
        let kids: Vec<(Vertex, Length)> = t
            .children_of(v)
            .expect("vertex from tree")
            .into_iter()
            .map(|c| {
                let len = t.depth(c).unwrap() - t.depth(v).unwrap();
                (c, len)
            })
            .collect();
        if kids.len() <= 2 {
            for (c, len) in kids {
                edges.push(EdgeSpec::new(v, c, len));
            }
        } else {
            // gadget root hangs below v on a zero-length edge
            let g = next_id;
            next_id += 1;
            vertices.push(g);
            gadget_vertices.push(g);
            edges.push(EdgeSpec::new(v, g, 0));
            build(
                g,
                &kids,
                &mut next_id,
                &mut edges,
                &mut vertices,
                &mut gadget_vertices,
            );
        }
    }
    let g = MetricGraph::new(vertices, edges, t.depot()).expect("binarized graph");
    let tree = RootedTree::from_graph(g).expect("binarized tree");
    BinarizedTree {
        tree,
        gadget_vertices,
    }
}

/// A piece of a bundle with its anchored subtree weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub requests: Vec<ReqId>,
    pub mst: Length,
}

/// Cut a bundle into groups on the binarized tree. Subtree weights over the
/// remaining requests are maintained incrementally: extracting a group zeroes
/// its subtree, and only the chosen vertex's ancestors are recomputed.
pub fn make_groups(bt: &BinarizedTree, bundle: &[(ReqId, Vertex)], f: Length) -> Vec<Group> {
    let t = &bt.tree;
    let n = t.vertex_count();
    let ids = t.vertex_ids();
    let idx_of: HashMap<Vertex, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let threshold = 3 * f;

    let mut reqs_at: Vec<Vec<ReqId>> = vec![Vec::new(); n];
    for &(id, v) in bundle {
        reqs_at[idx_of[&v]].push(id);
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut edge_len: Vec<Length> = vec![0; n];
    for &v in ids {
        let vi = idx_of[&v];
        for c in t.children_of(v).unwrap() {
            let ci = idx_of[&c];
            children[vi].push(ci);
            parent[ci] = Some(vi);
            edge_len[ci] = t.depth(c).unwrap() - t.depth(v).unwrap();
        }
    }
    let root = idx_of[&t.depot()];
    let order: Vec<usize> = {
        let mut o = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            o.push(u);
            stack.extend(children[u].iter().copied());
        }
        o
    };
    let mut count_below: Vec<usize> = vec![0; n];
    let mut weight: Vec<Length> = vec![0; n];
    for &u in order.iter().rev() {
        count_below[u] = reqs_at[u].len();
        for &c in &children[u] {
            count_below[u] += count_below[c];
            if count_below[c] > 0 {
                weight[u] += edge_len[c] + weight[c];
            }
        }
    }

    let mut groups = Vec::new();
    while count_below[root] > 0 {
        // Lowest qualifying vertex: weight >= 3F with no descendant over the
        // threshold. Weights only shrink downward along populated paths, so
        // checking children suffices. Smallest id wins among incomparable
        // candidates.
        let mut chosen = root;
        if weight[root] >= threshold {
            let mut best: Option<Vertex> = None;
            let mut stack = vec![root];
            while let Some(u) = stack.pop() {
                if weight[u] < threshold {
                    continue;
                }
                let has_heavy_child = children[u].iter().any(|&c| weight[c] >= threshold);
                if has_heavy_child {
                    stack.extend(children[u].iter().copied());
                } else if best.is_none_or(|b| ids[u] < b) {
                    best = Some(ids[u]);
                }
            }
            chosen = idx_of[&best.expect("threshold met at root implies a candidate")];
        }
        let mst = t.depth(ids[chosen]).unwrap() + weight[chosen];
        // collect and clear everything below the chosen vertex
        let mut members = Vec::new();
        let mut stack = vec![chosen];
        while let Some(u) = stack.pop() {
            if count_below[u] == 0 {
                continue;
            }
            members.append(&mut reqs_at[u]);
            count_below[u] = 0;
            weight[u] = 0;
            stack.extend(children[u].iter().copied());
        }
        let taken = members.len();
        members.sort_unstable();
        groups.push(Group {
            requests: members,
            mst,
        });
        // restore ancestor counts and weights
        let mut u = chosen;
        while let Some(p) = parent[u] {
            count_below[p] -= taken;
            weight[p] = children[p]
                .iter()
                .filter(|&&c| count_below[c] > 0)
                .map(|&c| edge_len[c] + weight[c])
                .sum();
            u = p;
        }
    }
    groups
}

/// Direct recomputation of the depot-free subtree weight, used to check the
/// incremental maintenance in tests.
pub fn subtree_weight_direct(t: &RootedTree, v: Vertex, positions: &VertexSet) -> Length {
    t.subtree_mst(v, positions).expect("vertex from tree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::tree_from_edges;

    #[test]
    fn binary_tree_unchanged() {
        let t = tree_from_edges(0, &[(0, 1, 2), (0, 2, 3), (1, 3, 1)]);
        let bt = binarize(&t);
        assert!(bt.gadget_vertices.is_empty());
        assert_eq!(bt.tree.vertex_ids(), t.vertex_ids());
        for &u in t.vertex_ids() {
            for &v in t.vertex_ids() {
                assert_eq!(bt.tree.distance(u, v), t.distance(u, v));
            }
        }
    }

    #[test]
    fn star_gadget_shape() {
        let t = tree_from_edges(0, &[(0, 1, 5), (0, 2, 6), (0, 3, 7), (0, 4, 8)]);
        let bt = binarize(&t);
        assert_eq!(bt.gadget_vertices.len(), 3);
        // gadget-internal edges have length 0; edges into original children
        // keep their lengths
        for e in bt.tree.graph().edges() {
            let touches_leaf = (1..=4).contains(&e.u) || (1..=4).contains(&e.v);
            if touches_leaf {
                assert!(e.len >= 5);
            } else {
                assert_eq!(e.len, 0);
            }
        }
        for v in 0..=4u32 {
            for u in 0..=4u32 {
                assert_eq!(bt.tree.distance(u, v).unwrap(), t.distance(u, v).unwrap());
            }
        }
        for &v in bt.tree.vertex_ids() {
            assert!(bt.tree.children_of(v).unwrap().len() <= 2);
        }
    }

    #[test]
    fn distances_preserved_on_random_trees() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(2..=12u32);
            let mut edges = Vec::new();
            for v in 1..n {
                edges.push((rng.gen_range(0..v), v, rng.gen_range(0..=5i64)));
            }
            let t = tree_from_edges(0, &edges);
            let bt = binarize(&t);
            for &u in t.vertex_ids() {
                for &v in t.vertex_ids() {
                    assert_eq!(bt.tree.distance(u, v), t.distance(u, v));
                }
                assert!(bt.tree.children_of(u).unwrap().len() <= 2);
            }
        }
    }

    #[test]
    fn grouping_hand_trace() {
        // depot with three length-2 children; requests at all of them, F = 1
        let t = tree_from_edges(0, &[(0, 1, 2), (0, 2, 2), (0, 3, 2)]);
        let bt = binarize(&t);
        let bundle = vec![(0, 1u32), (1, 2u32), (2, 3u32)];
        let groups = make_groups(&bt, &bundle, 1);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].requests, vec![1, 2]); // positions {2, 3}
        assert_eq!(groups[0].mst, 4);
        assert_eq!(groups[1].requests, vec![0]);
        assert_eq!(groups[1].mst, 2);
        // twice the total group weight matches cost_{3F} of the bundle here
        let positions: VertexSet = [1u32, 2, 3].into_iter().collect();
        let total: i64 = groups.iter().map(|g| 2 * g.mst).sum();
        assert_eq!(total, t.cost(&positions, 3).unwrap());
    }

    #[test]
    fn single_leaf_and_empty() {
        let t = tree_from_edges(0, &[(0, 1, 4)]);
        let bt = binarize(&t);
        let groups = make_groups(&bt, &[(9, 1)], 10);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].mst, 4);
        assert_eq!(groups[0].requests, vec![9]);
        assert!(make_groups(&bt, &[], 10).is_empty());
    }

    #[test]
    fn groups_partition_and_match_direct_weights() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let n = rng.gen_range(3..=14u32);
            let mut edges = Vec::new();
            for v in 1..n {
                edges.push((rng.gen_range(0..v), v, rng.gen_range(1..=4i64)));
            }
            let t = tree_from_edges(0, &edges);
            let bt = binarize(&t);
            let m = rng.gen_range(1..=10usize);
            let bundle: Vec<(ReqId, Vertex)> =
                (0..m).map(|i| (i, rng.gen_range(1..n))).collect();
            let f = rng.gen_range(1..=6i64);
            let groups = make_groups(&bt, &bundle, f);
            let mut all: Vec<ReqId> = groups.iter().flat_map(|g| g.requests.clone()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..m).collect::<Vec<_>>());
            for g in &groups {
                let positions: VertexSet = g.requests.iter().map(|&r| bundle[r].1).collect();
                assert_eq!(g.mst, t.mst(&positions).unwrap());
            }
        }
    }
}
