//! HDBSCAN with excess-of-mass cluster extraction.
//!
//! Equal-weight merges in the single-linkage hierarchy are collapsed into one
//! n-ary node, so the result does not depend on the order ties are visited.

use super::cluster::{canonical_labels, ClusterAssignment, ClusterMethod, NOISE};
use super::distance_matrix;
use crate::par::Exec;
use ndarray::ArrayView2;

struct TreeNode {
    children: Vec<usize>,
    weight: f64,
    size: usize,
}

struct Hierarchy {
    n: usize,
    /// Internal nodes; id `n + i` is `internal[i]`.
    internal: Vec<TreeNode>,
}

impl Hierarchy {
    fn size(&self, node: usize) -> usize {
        if node < self.n {
            1
        } else {
            self.internal[node - self.n].size
        }
    }

    fn points(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(t) = stack.pop() {
            if t < self.n {
                out.push(t);
            } else {
                stack.extend(&self.internal[t - self.n].children);
            }
        }
    }
}

fn lambda(weight: f64) -> f64 {
    1.0 / weight.max(1e-300)
}

fn core_distances(dist: &[f64], n: usize, min_samples: usize) -> Vec<f64> {
    let k = min_samples.clamp(1, n) - 1;
    (0..n)
        .map(|i| {
            let mut row = dist[i * n..(i + 1) * n].to_vec();
            row.select_nth_unstable_by(k, f64::total_cmp);
            row[k]
        })
        .collect()
}

/// Prim's algorithm on the dense mutual-reachability graph.
fn mst(mr: impl Fn(usize, usize) -> f64, n: usize) -> Vec<(usize, usize, f64)> {
    let mut in_tree = vec![false; n];
    let mut key = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = mr(current, j);
            if d < key[j] {
                key[j] = d;
                from[j] = current;
            }
            if next == usize::MAX || key[j] < key[next] {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, key[next]));
        current = next;
    }
    edges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn single_linkage(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Hierarchy {
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    let mut parent: Vec<usize> = (0..n).collect();
    // tree node currently representing each union-find root
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut internal: Vec<TreeNode> = Vec::new();
    let mut i = 0;
    while i < edges.len() {
        let w = edges[i].2;
        let mut j = i;
        while j < edges.len() && edges[j].2 == w {
            j += 1;
        }
        // union the whole tie group, remembering which old roots each new root absorbed
        let mut absorbed: Vec<(usize, Vec<usize>)> = Vec::new();
        let old_roots: Vec<(usize, usize)> = edges[i..j]
            .iter()
            .flat_map(|&(a, b, _)| [a, b])
            .map(|p| {
                let r = find(&mut parent, p);
                (r, node_of[r])
            })
            .collect();
        for &(a, b, _) in &edges[i..j] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        for (old_root, old_node) in old_roots {
            let new_root = find(&mut parent, old_root);
            match absorbed.iter_mut().find(|(r, _)| *r == new_root) {
                Some((_, nodes)) => {
                    if !nodes.contains(&old_node) {
                        nodes.push(old_node)
                    }
                }
                None => absorbed.push((new_root, vec![old_node])),
            }
        }
        for (root, mut children) in absorbed {
            if children.len() < 2 {
                continue;
            }
            children.sort_unstable();
            let size = children.iter().map(|&c| if c < n { 1 } else { internal[c - n].size }).sum::<usize>();
            internal.push(TreeNode { children, weight: w, size });
            node_of[root] = n + internal.len() - 1;
        }
        i = j;
    }
    Hierarchy { n, internal }
}

struct Condensed {
    birth: f64,
    stability: f64,
    children: Vec<usize>,
    /// Points that left this cluster directly.
    fallen: Vec<usize>,
}

fn condense(h: &Hierarchy, root: usize, min_cluster_size: usize) -> Vec<Condensed> {
    let mut clusters = vec![Condensed { birth: 0.0, stability: 0.0, children: vec![], fallen: vec![] }];
    let mut work = vec![(0usize, root)];
    let mut buf = Vec::new();
    while let Some((c, start)) = work.pop() {
        let birth = clusters[c].birth;
        let mut t = start;
        loop {
            if t < h.n {
                // a lone point can only stand in for a cluster when min_cluster_size <= 1
                clusters[c].fallen.push(t);
                break;
            }
            let node = &h.internal[t - h.n];
            let lam = lambda(node.weight);
            let big: Vec<usize> = node.children.iter().copied().filter(|&ch| h.size(ch) >= min_cluster_size).collect();
            for &ch in node.children.iter().filter(|ch| !big.contains(ch)) {
                buf.clear();
                h.points(ch, &mut buf);
                clusters[c].stability += buf.len() as f64 * (lam - birth);
                clusters[c].fallen.extend(&buf);
            }
            match big.len() {
                0 => break,
                1 => t = big[0],
                _ => {
                    for &ch in &big {
                        clusters[c].stability += h.size(ch) as f64 * (lam - birth);
                        let id = clusters.len();
                        clusters.push(Condensed { birth: lam, stability: 0.0, children: vec![], fallen: vec![] });
                        clusters[c].children.push(id);
                        work.push((id, ch));
                    }
                    break;
                }
            }
        }
    }
    clusters
}

/// Excess-of-mass selection; the root is never selected.
fn select(clusters: &[Condensed]) -> Vec<bool> {
    let mut selected = vec![false; clusters.len()];
    let mut best = vec![0.0; clusters.len()];
    for c in (1..clusters.len()).rev() {
        let below: f64 = clusters[c].children.iter().map(|&ch| best[ch]).sum();
        if clusters[c].children.is_empty() || clusters[c].stability >= below {
            selected[c] = true;
            best[c] = clusters[c].stability;
            let mut stack = clusters[c].children.clone();
            while let Some(d) = stack.pop() {
                selected[d] = false;
                stack.extend(&clusters[d].children);
            }
        } else {
            best[c] = below;
        }
    }
    selected
}

pub fn hdbscan(points: ArrayView2<f64>, min_cluster_size: usize) -> ClusterAssignment {
    hdbscan_with(points, min_cluster_size, Exec::default())
}

pub fn hdbscan_with(points: ArrayView2<f64>, min_cluster_size: usize, exec: Exec) -> ClusterAssignment {
    let n = points.nrows();
    let mcs = min_cluster_size.max(2);
    let finish = |labels: Vec<i64>| ClusterAssignment::new(canonical_labels(&labels), ClusterMethod::Hdbscan, Some(mcs), None);
    if n < 2 {
        return finish(vec![NOISE; n]);
    }
    let dist = distance_matrix(points, exec);
    let core = core_distances(&dist, n, mcs);
    let mr = |i: usize, j: usize| dist[i * n + j].max(core[i]).max(core[j]);
    let h = single_linkage(n, mst(mr, n));
    let root = n + h.internal.len() - 1;
    let clusters = condense(&h, root, mcs);
    let selected = select(&clusters);

    let mut labels = vec![NOISE; n];
    for (c, _) in selected.iter().enumerate().filter(|(_, &s)| s) {
        let mut stack = vec![c];
        while let Some(d) = stack.pop() {
            for &p in &clusters[d].fallen {
                labels[p] = c as i64;
            }
            stack.extend(&clusters[d].children);
        }
    }
    finish(labels)
}
