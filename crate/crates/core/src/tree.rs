//! Rooted and unrooted binary phylogenetic trees.
//!
//! Rooted trees live in an arena where every internal node is created after
//! both of its children, so node ids are a post-order: a child id is always
//! smaller than its parent's and the root is the last node. Most whole-tree
//! passes are therefore plain loops over ids.
//!
//! Unrooted trees are stored as an adjacency list; internal vertices have
//! degree three and leaves degree one.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Leaf labels are positive integers.
pub type Label = u32;

/// Index into a tree's node (or vertex) storage.
pub type NodeId = usize;

/// A set of leaf labels, kept sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LeafSet(BTreeSet<Label>);

impl LeafSet {
    pub fn new() -> Self {
        LeafSet(BTreeSet::new())
    }

    pub fn singleton(label: Label) -> Self {
        LeafSet(BTreeSet::from([label]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, label: Label) -> bool {
        self.0.contains(&label)
    }

    pub fn insert(&mut self, label: Label) -> bool {
        self.0.insert(label)
    }

    pub fn remove(&mut self, label: Label) -> bool {
        self.0.remove(&label)
    }

    pub fn first(&self) -> Option<Label> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Label> {
        self.0.last().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &LeafSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &LeafSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn intersection(&self, other: &LeafSet) -> LeafSet {
        LeafSet(self.0.intersection(&other.0).copied().collect())
    }

    pub fn union(&self, other: &LeafSet) -> LeafSet {
        LeafSet(self.0.union(&other.0).copied().collect())
    }

    pub fn difference(&self, other: &LeafSet) -> LeafSet {
        LeafSet(self.0.difference(&other.0).copied().collect())
    }

    pub fn extend(&mut self, other: &LeafSet) {
        self.0.extend(other.iter());
    }

    pub fn to_vec(&self) -> Vec<Label> {
        self.0.iter().copied().collect()
    }

    /// First label (in sorted order) that is not in `other`.
    pub fn first_missing_from(&self, other: &LeafSet) -> Option<Label> {
        self.0.iter().copied().find(|l| !other.contains(*l))
    }
}

impl FromIterator<Label> for LeafSet {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        LeafSet(iter.into_iter().collect())
    }
}

impl<const N: usize> From<[Label; N]> for LeafSet {
    fn from(labels: [Label; N]) -> Self {
        labels.into_iter().collect()
    }
}

impl fmt::Display for LeafSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for l in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
            first = false;
        }
        Ok(())
    }
}

/// Shape class of a balanced tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", content = "m")]
pub enum BalanceClass {
    /// Rooted, all leaves at depth m; 2^m leaves.
    RootedBalanced(u32),
    /// Unrooted, central edge, leaves at distance m - 1 from the center; 2^m leaves.
    ClassB(u32),
    /// Unrooted, central vertex, leaves at distance m from it; 3 * 2^(m-1) leaves.
    ClassC(u32),
    NotBalanced,
}

impl BalanceClass {
    /// Number of leaves a tree in this class has.
    pub fn leaf_count(&self) -> Option<u64> {
        match *self {
            BalanceClass::RootedBalanced(m) | BalanceClass::ClassB(m) => Some(1u64 << m),
            BalanceClass::ClassC(m) if m >= 1 => Some(3u64 << (m - 1)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    parent: Option<NodeId>,
    children: Option<(NodeId, NodeId)>,
    label: Option<Label>,
}

/// Binary rooted phylogenetic tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    nodes: Vec<Node>,
    leaf_node: BTreeMap<Label, NodeId>,
}

/// Incremental constructor for [`RootedTree`]. Children must exist before
/// their parent is created, which keeps ids in post-order.
#[derive(Debug, Default)]
pub struct RootedBuilder {
    nodes: Vec<Node>,
    leaf_node: BTreeMap<Label, NodeId>,
}

impl RootedBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        RootedBuilder {
            nodes: Vec::with_capacity(nodes),
            leaf_node: BTreeMap::new(),
        }
    }

    pub fn leaf(&mut self, label: Label) -> Result<NodeId> {
        if label == 0 {
            return Err(Error::Structure("leaf label 0 is not allowed".into()));
        }
        let id = self.nodes.len();
        if self.leaf_node.insert(label, id).is_some() {
            return Err(Error::DuplicateLabel(label));
        }
        self.nodes.push(Node {
            parent: None,
            children: None,
            label: Some(label),
        });
        Ok(id)
    }

    pub fn join(&mut self, left: NodeId, right: NodeId) -> Result<NodeId> {
        let id = self.nodes.len();
        for c in [left, right] {
            let node = self
                .nodes
                .get(c)
                .ok_or_else(|| Error::Structure(format!("unknown node {c}")))?;
            if node.parent.is_some() {
                return Err(Error::Structure(format!("node {c} already has a parent")));
            }
        }
        if left == right {
            return Err(Error::Structure("a node cannot be joined with itself".into()));
        }
        self.nodes[left].parent = Some(id);
        self.nodes[right].parent = Some(id);
        self.nodes.push(Node {
            parent: None,
            children: Some((left, right)),
            label: None,
        });
        Ok(id)
    }

    /// Copies the subtree of `tree` rooted at `u` into this builder.
    pub fn graft(&mut self, tree: &RootedTree, u: NodeId) -> Result<NodeId> {
        let mut built: Vec<NodeId> = Vec::new();
        for w in tree.postorder_from(u) {
            let id = match tree.children(w) {
                None => self.leaf(tree.label(w).expect("leaf carries a label"))?,
                Some(_) => {
                    let r = built.pop().expect("post-order right child");
                    let l = built.pop().expect("post-order left child");
                    self.join(l, r)?
                }
            };
            built.push(id);
        }
        Ok(built.pop().expect("non-empty subtree"))
    }

    pub fn finish(self) -> Result<RootedTree> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::Structure("empty tree".into()));
        }
        if let Some(i) = self.nodes[..n - 1].iter().position(|x| x.parent.is_none()) {
            return Err(Error::Structure(format!("node {i} is disconnected from the root")));
        }
        Ok(RootedTree {
            nodes: self.nodes,
            leaf_node: self.leaf_node,
        })
    }
}

impl RootedTree {
    /// The one-node tree.
    pub fn leaf(label: Label) -> Result<Self> {
        let mut b = RootedBuilder::new();
        b.leaf(label)?;
        b.finish()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_node.len()
    }

    pub fn root(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        self.nodes[u].parent
    }

    pub fn children(&self, u: NodeId) -> Option<(NodeId, NodeId)> {
        self.nodes[u].children
    }

    pub fn label(&self, u: NodeId) -> Option<Label> {
        self.nodes[u].label
    }

    pub fn is_leaf(&self, u: NodeId) -> bool {
        self.nodes[u].children.is_none()
    }

    pub fn leaf_node(&self, label: Label) -> Option<NodeId> {
        self.leaf_node.get(&label).copied()
    }

    pub fn leaves(&self) -> LeafSet {
        self.leaf_node.keys().copied().collect()
    }

    /// Post-order walk of the subtree below `u` (children left before right).
    pub fn postorder_from(&self, u: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![(u, false)];
        while let Some((w, expanded)) = stack.pop() {
            match (self.children(w), expanded) {
                (Some((l, r)), false) => {
                    stack.push((w, true));
                    stack.push((r, false));
                    stack.push((l, false));
                }
                _ => out.push(w),
            }
        }
        out
    }

    /// Leaf labels below `u`, left to right.
    pub fn leaf_order_from(&self, u: NodeId) -> Vec<Label> {
        let mut out = Vec::new();
        let mut stack = vec![u];
        while let Some(w) = stack.pop() {
            match self.children(w) {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(self.label(w).expect("leaf label")),
            }
        }
        out
    }

    /// Leaf labels of the whole tree, left to right.
    pub fn leaf_order(&self) -> Vec<Label> {
        self.leaf_order_from(self.root())
    }

    pub fn subtree_leaves(&self, u: NodeId) -> LeafSet {
        self.leaf_order_from(u).into_iter().collect()
    }

    /// Left-to-right leaf order and, per node, the half-open range of that
    /// order covered by its subtree.
    pub fn leaf_spans(&self) -> (Vec<Label>, Vec<(usize, usize)>) {
        let order = self.leaf_order();
        let mut span = vec![(0, 0); self.nodes.len()];
        for (i, &l) in order.iter().enumerate() {
            span[self.leaf_node[&l]] = (i, i + 1);
        }
        for u in 0..self.nodes.len() {
            if let Some((l, r)) = self.children(u) {
                span[u] = (span[l].0, span[r].1);
            }
        }
        (order, span)
    }

    /// Number of leaves below each node.
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut size = vec![0usize; self.nodes.len()];
        for u in 0..self.nodes.len() {
            size[u] = match self.children(u) {
                None => 1,
                Some((l, r)) => size[l] + size[r],
            };
        }
        size
    }

    /// Smallest leaf label below each node.
    pub fn min_labels(&self) -> Vec<Label> {
        let mut min = vec![0; self.nodes.len()];
        for u in 0..self.nodes.len() {
            min[u] = match self.children(u) {
                None => self.label(u).expect("leaf label"),
                Some((l, r)) => min[l].min(min[r]),
            };
        }
        min
    }

    /// Depth of every node (root has depth 0).
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0usize; self.nodes.len()];
        for u in (0..self.nodes.len()).rev() {
            if let Some(p) = self.parent(u) {
                depth[u] = depth[p] + 1;
            }
        }
        depth
    }

    /// Height of every subtree.
    pub fn subtree_heights(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.nodes.len()];
        for u in 0..self.nodes.len() {
            if let Some((l, r)) = self.children(u) {
                h[u] = 1 + h[l].max(h[r]);
            }
        }
        h
    }

    /// Maximum root-to-leaf distance in edges.
    pub fn height(&self) -> usize {
        self.subtree_heights()[self.root()]
    }

    /// Undirected adjacency, indexed by node id. The root has degree 2.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::with_capacity(3); self.nodes.len()];
        for u in 0..self.nodes.len() {
            if let Some((l, r)) = self.children(u) {
                adj[u].push(l);
                adj[u].push(r);
                adj[l].push(u);
                adj[r].push(u);
            }
        }
        adj
    }

    pub fn classify(&self) -> BalanceClass {
        let depth = self.depths();
        let mut leaf_depths = self.leaf_node.values().map(|&u| depth[u]);
        let first = leaf_depths.next().expect("tree has a leaf");
        if leaf_depths.all(|d| d == first) {
            BalanceClass::RootedBalanced(first as u32)
        } else {
            BalanceClass::NotBalanced
        }
    }

    /// True when the internal nodes (root included) induce a path, i.e. the
    /// tree read as a graph is a caterpillar.
    pub fn is_caterpillar(&self) -> bool {
        is_caterpillar_graph(&self.adjacency(), |u| self.is_leaf(u))
    }

    /// Suppresses the degree-2 root.
    pub fn unroot(&self) -> Result<UnrootedTree> {
        let n = self.leaf_count();
        if n < 3 {
            return Err(Error::TooFewLeaves { need: 3, got: n });
        }
        let root = self.root();
        let (a, b) = self.children(root).expect("root of a tree with >= 3 leaves");
        let labels: Vec<Option<Label>> = self.nodes[..root].iter().map(|x| x.label).collect();
        let mut edges = Vec::with_capacity(root);
        for u in 0..root {
            if let Some(p) = self.parent(u) {
                if p != root {
                    edges.push((u, p));
                }
            }
        }
        edges.push((a, b));
        UnrootedTree::from_edges(labels, &edges)
    }
}

/// Binary unrooted phylogenetic tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnrootedTree {
    adj: Vec<Vec<NodeId>>,
    labels: Vec<Option<Label>>,
    leaf_vertex: BTreeMap<Label, NodeId>,
}

impl UnrootedTree {
    /// Builds a tree from vertex labels (`Some` for leaves) and an edge list,
    /// checking every degree and connectivity constraint.
    pub fn from_edges(labels: Vec<Option<Label>>, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let nv = labels.len();
        let mut adj = vec![Vec::with_capacity(3); nv];
        for &(u, v) in edges {
            if u >= nv || v >= nv || u == v {
                return Err(Error::Structure(format!("bad edge ({u}, {v})")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut leaf_vertex = BTreeMap::new();
        for (v, label) in labels.iter().enumerate() {
            match label {
                Some(l) => {
                    if *l == 0 {
                        return Err(Error::Structure("leaf label 0 is not allowed".into()));
                    }
                    if adj[v].len() != 1 {
                        return Err(Error::Structure(format!(
                            "leaf {l} has degree {}",
                            adj[v].len()
                        )));
                    }
                    if leaf_vertex.insert(*l, v).is_some() {
                        return Err(Error::DuplicateLabel(*l));
                    }
                }
                None => {
                    if adj[v].len() != 3 {
                        return Err(Error::Structure(format!(
                            "internal vertex {v} has degree {}",
                            adj[v].len()
                        )));
                    }
                }
            }
        }
        if leaf_vertex.len() < 3 {
            return Err(Error::TooFewLeaves {
                need: 3,
                got: leaf_vertex.len(),
            });
        }
        if edges.len() + 1 != nv {
            return Err(Error::Structure("edge count is not |V| - 1".into()));
        }
        let tree = UnrootedTree {
            adj,
            labels,
            leaf_vertex,
        };
        if tree.distances_from(&[0]).contains(&usize::MAX) {
            return Err(Error::Structure("graph is disconnected".into()));
        }
        Ok(tree)
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_vertex.len()
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn adjacency(&self) -> &[Vec<NodeId>] {
        &self.adj
    }

    pub fn label(&self, v: NodeId) -> Option<Label> {
        self.labels[v]
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.labels[v].is_some()
    }

    pub fn leaf_vertex(&self, label: Label) -> Option<NodeId> {
        self.leaf_vertex.get(&label).copied()
    }

    pub fn leaves(&self) -> LeafSet {
        self.leaf_vertex.keys().copied().collect()
    }

    /// Every edge once, as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::with_capacity(self.adj.len().saturating_sub(1));
        for (u, nb) in self.adj.iter().enumerate() {
            for &v in nb {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.adj.len() && self.adj[u].contains(&v)
    }

    /// BFS distances from a set of sources; `usize::MAX` when unreachable.
    pub fn distances_from(&self, sources: &[NodeId]) -> Vec<usize> {
        bfs(&self.adj, sources).0
    }

    /// The one or two vertices of minimum eccentricity.
    pub fn center(&self) -> Vec<NodeId> {
        let path = diameter_path(&self.adj, self.leaf_vertex.values().next().copied().unwrap_or(0));
        let d = path.len() - 1;
        let mut c = if d % 2 == 0 {
            vec![path[d / 2]]
        } else {
            vec![path[d / 2], path[d / 2 + 1]]
        };
        c.sort_unstable();
        c
    }

    /// Eccentricity of a center vertex.
    pub fn radius(&self) -> usize {
        let path = diameter_path(&self.adj, 0);
        (path.len() - 1).div_ceil(2)
    }

    pub fn classify(&self) -> BalanceClass {
        let center = self.center();
        let dist = self.distances_from(&center);
        let mut leaf_dists = self.leaf_vertex.values().map(|&v| dist[v]);
        let first = leaf_dists.next().expect("tree has leaves");
        if !leaf_dists.all(|d| d == first) {
            return BalanceClass::NotBalanced;
        }
        if center.len() == 1 {
            BalanceClass::ClassC(first as u32)
        } else {
            BalanceClass::ClassB(first as u32 + 1)
        }
    }

    pub fn is_caterpillar(&self) -> bool {
        is_caterpillar_graph(&self.adj, |v| self.is_leaf(v))
    }

    /// Subdivides `{u, v}` with a new root; the `u` side becomes the left child.
    pub fn root_at_edge(&self, u: NodeId, v: NodeId) -> Result<RootedTree> {
        if !self.has_edge(u, v) {
            return Err(Error::NotAnEdge(u, v));
        }
        let mut b = RootedBuilder::with_capacity(self.adj.len() + 1);
        let l = self.build_directed(&mut b, u, v)?;
        let r = self.build_directed(&mut b, v, u)?;
        b.join(l, r)?;
        b.finish()
    }

    /// Roots on the pendant edge of leaf `label`; that leaf becomes the left child.
    pub fn root_at_leaf(&self, label: Label) -> Result<RootedTree> {
        let v = self.leaf_vertex(label).ok_or(Error::UnknownLabel(label))?;
        self.root_at_edge(v, self.adj[v][0])
    }

    /// Rooted copy of the component containing `x` once the edge to `from`
    /// is removed.
    pub fn directed_subtree(&self, x: NodeId, from: NodeId) -> Result<RootedTree> {
        let mut b = RootedBuilder::new();
        self.build_directed(&mut b, x, from)?;
        b.finish()
    }

    /// Leaves in the component of `x` after removing the edge to `from`.
    pub fn branch_leaves(&self, x: NodeId, from: NodeId) -> LeafSet {
        let mut out = LeafSet::new();
        let mut stack = vec![(x, from)];
        while let Some((w, p)) = stack.pop() {
            if let Some(l) = self.labels[w] {
                out.insert(l);
            }
            for &c in &self.adj[w] {
                if c != p {
                    stack.push((c, w));
                }
            }
        }
        out
    }

    fn build_directed(&self, b: &mut RootedBuilder, x: NodeId, from: NodeId) -> Result<NodeId> {
        // (vertex, parent, expanded)
        let mut stack = vec![(x, from, false)];
        let mut built: Vec<NodeId> = Vec::new();
        while let Some((w, p, expanded)) = stack.pop() {
            if let Some(label) = self.labels[w] {
                built.push(b.leaf(label)?);
                continue;
            }
            if expanded {
                let r = built.pop().expect("right child");
                let l = built.pop().expect("left child");
                built.push(b.join(l, r)?);
            } else {
                stack.push((w, p, true));
                let kids: Vec<NodeId> = self.adj[w].iter().copied().filter(|&c| c != p).collect();
                debug_assert_eq!(kids.len(), 2);
                stack.push((kids[1], w, false));
                stack.push((kids[0], w, false));
            }
        }
        Ok(built.pop().expect("built subtree"))
    }
}

/// Either kind of tree, as produced by the Newick reader.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tree {
    Rooted(RootedTree),
    Unrooted(UnrootedTree),
}

impl Tree {
    pub fn leaves(&self) -> LeafSet {
        match self {
            Tree::Rooted(t) => t.leaves(),
            Tree::Unrooted(t) => t.leaves(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Tree::Rooted(t) => t.leaf_count(),
            Tree::Unrooted(t) => t.leaf_count(),
        }
    }

    pub fn classify(&self) -> BalanceClass {
        match self {
            Tree::Rooted(t) => t.classify(),
            Tree::Unrooted(t) => t.classify(),
        }
    }

    pub fn is_caterpillar(&self) -> bool {
        match self {
            Tree::Rooted(t) => t.is_caterpillar(),
            Tree::Unrooted(t) => t.is_caterpillar(),
        }
    }

    pub fn as_rooted(&self) -> Option<&RootedTree> {
        match self {
            Tree::Rooted(t) => Some(t),
            Tree::Unrooted(_) => None,
        }
    }

    pub fn as_unrooted(&self) -> Option<&UnrootedTree> {
        match self {
            Tree::Unrooted(t) => Some(t),
            Tree::Rooted(_) => None,
        }
    }

    /// Unrooted view: rooted trees are unrooted, unrooted trees cloned.
    pub fn to_unrooted(&self) -> Result<UnrootedTree> {
        match self {
            Tree::Rooted(t) => t.unroot(),
            Tree::Unrooted(t) => Ok(t.clone()),
        }
    }
}

/// BFS over an adjacency list; returns distances and BFS parents.
pub(crate) fn bfs(adj: &[Vec<NodeId>], sources: &[NodeId]) -> (Vec<usize>, Vec<Option<NodeId>>) {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut parent = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    (dist, parent)
}

/// A longest path by edge count, found with two BFS sweeps. Ties are broken
/// toward the smallest vertex id, and the path is oriented so it starts at
/// the smaller endpoint.
pub(crate) fn diameter_path(adj: &[Vec<NodeId>], start: NodeId) -> Vec<NodeId> {
    let far = |dist: &[usize]| {
        let mut best = 0;
        for (v, &d) in dist.iter().enumerate() {
            if d != usize::MAX && d > dist[best] {
                best = v;
            }
        }
        best
    };
    let (d0, _) = bfs(adj, &[start]);
    let a = far(&d0);
    let (d1, parent) = bfs(adj, &[a]);
    let b = far(&d1);
    let mut path = vec![b];
    let mut cur = b;
    while let Some(p) = parent[cur] {
        path.push(p);
        cur = p;
    }
    if path[0] > path[path.len() - 1] {
        path.reverse();
    }
    path
}

fn is_caterpillar_graph(adj: &[Vec<NodeId>], is_leaf: impl Fn(NodeId) -> bool) -> bool {
    (0..adj.len())
        .filter(|&v| !is_leaf(v))
        .all(|v| adj[v].iter().filter(|&&w| !is_leaf(w)).count() <= 2)
}
