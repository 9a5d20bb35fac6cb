//! Restriction, joins, cluster/split invariants, isomorphism, the subtree
//! relation and agreement certificates.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::newick::{to_newick_rooted, to_newick_unrooted};
use crate::tree::{LeafSet, NodeId, RootedBuilder, RootedTree, UnrootedTree};

/// Evidence that two trees agree on a leaf set: the leaves and the canonical
/// Newick of the shared restriction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementCertificate {
    pub leaves: LeafSet,
    pub restricted_shape: String,
}

/// Operations shared by rooted and unrooted trees.
pub trait Topology: Sized {
    /// Smallest leaf set a restriction may have.
    const MIN_RESTRICT: usize;

    fn leaf_set(&self) -> LeafSet;
    fn restrict(&self, x: &LeafSet) -> Result<Self>;
    /// Clusters (rooted) or splits (unrooted).
    fn signature(&self) -> BTreeSet<LeafSet>;
    fn canonical_newick(&self) -> String;
}

impl Topology for RootedTree {
    const MIN_RESTRICT: usize = 1;

    fn leaf_set(&self) -> LeafSet {
        self.leaves()
    }

    fn restrict(&self, x: &LeafSet) -> Result<Self> {
        restrict_rooted(self, x)
    }

    fn signature(&self) -> BTreeSet<LeafSet> {
        clusters(self)
    }

    fn canonical_newick(&self) -> String {
        to_newick_rooted(self)
    }
}

impl Topology for UnrootedTree {
    const MIN_RESTRICT: usize = 3;

    fn leaf_set(&self) -> LeafSet {
        self.leaves()
    }

    fn restrict(&self, x: &LeafSet) -> Result<Self> {
        restrict_unrooted(self, x)
    }

    fn signature(&self) -> BTreeSet<LeafSet> {
        splits(self)
    }

    fn canonical_newick(&self) -> String {
        to_newick_unrooted(self)
    }
}

fn check_subset(x: &LeafSet, host: &LeafSet) -> Result<()> {
    match x.first_missing_from(host) {
        Some(l) => Err(Error::UnknownLabel(l)),
        None => Ok(()),
    }
}

/// Most recent common ancestor of a set of leaves.
pub fn lca(t: &RootedTree, x: &LeafSet) -> Result<NodeId> {
    if x.is_empty() {
        return Err(Error::Precondition("lca of an empty set".into()));
    }
    let mut count = vec![0usize; t.node_count()];
    for l in x.iter() {
        let u = t.leaf_node(l).ok_or(Error::UnknownLabel(l))?;
        count[u] = 1;
    }
    // ancestors have larger ids, so the first node covering X is the lca
    for u in 0..t.node_count() {
        if let Some((a, b)) = t.children(u) {
            count[u] = count[a] + count[b];
        }
        if count[u] == x.len() {
            return Ok(u);
        }
    }
    unreachable!("the root covers every leaf")
}

/// `t|X`, rooted at the most recent common ancestor of `X`.
pub fn restrict_rooted(t: &RootedTree, x: &LeafSet) -> Result<RootedTree> {
    if x.is_empty() {
        return Err(Error::TooFewLeaves { need: 1, got: 0 });
    }
    check_subset(x, &t.leaves())?;
    let mut b = RootedBuilder::with_capacity(2 * x.len());
    let mut map: Vec<Option<NodeId>> = vec![None; t.node_count()];
    for u in 0..t.node_count() {
        map[u] = match t.children(u) {
            None => {
                let l = t.label(u).unwrap();
                if x.contains(l) {
                    Some(b.leaf(l)?)
                } else {
                    None
                }
            }
            Some((a, c)) => match (map[a], map[c]) {
                (Some(p), Some(q)) => Some(b.join(p, q)?),
                (Some(p), None) | (None, Some(p)) => Some(p),
                (None, None) => None,
            },
        };
    }
    b.finish()
}

/// `t|X` for unrooted trees; needs `|X| >= 3`.
pub fn restrict_unrooted(t: &UnrootedTree, x: &LeafSet) -> Result<UnrootedTree> {
    if x.len() < 3 {
        return Err(Error::TooFewLeaves {
            need: 3,
            got: x.len(),
        });
    }
    check_subset(x, &t.leaves())?;
    let rooted = t.root_at_leaf(x.first().unwrap())?;
    restrict_rooted(&rooted, x)?.unroot()
}

/// Rooted view of `t|X` that also covers `|X| < 3`: the restriction rooted
/// on the pendant edge of its smallest leaf.
pub fn rooted_restriction(t: &UnrootedTree, x: &LeafSet) -> Result<RootedTree> {
    if x.is_empty() {
        return Err(Error::TooFewLeaves { need: 1, got: 0 });
    }
    check_subset(x, &t.leaves())?;
    let rooted = t.root_at_leaf(x.first().unwrap())?;
    restrict_rooted(&rooted, x)
}

/// `S_l ∘ S_r`: a new root with the two trees as left and right subtrees.
pub fn join(left: &RootedTree, right: &RootedTree) -> Result<RootedTree> {
    let (ll, rl) = (left.leaves(), right.leaves());
    if let Some(l) = ll.intersection(&rl).first() {
        return Err(Error::Overlap(l));
    }
    let mut b = RootedBuilder::with_capacity(left.node_count() + right.node_count() + 1);
    let a = b.graft(left, left.root())?;
    let c = b.graft(right, right.root())?;
    b.join(a, c)?;
    b.finish()
}

/// Leaf sets below every node: `2n - 1` clusters for `n` leaves.
pub fn clusters(t: &RootedTree) -> BTreeSet<LeafSet> {
    cluster_list(t).into_iter().collect()
}

fn cluster_list(t: &RootedTree) -> Vec<LeafSet> {
    let mut below: Vec<LeafSet> = Vec::with_capacity(t.node_count());
    for u in 0..t.node_count() {
        let set = match t.children(u) {
            None => LeafSet::singleton(t.label(u).unwrap()),
            Some((a, b)) => below[a].union(&below[b]),
        };
        below.push(set);
    }
    below
}

/// One bipartition per edge, each written as the side that does not hold
/// the tree's smallest leaf.
pub fn splits(t: &UnrootedTree) -> BTreeSet<LeafSet> {
    let s = t.leaves().first().unwrap();
    let rooted = t.root_at_leaf(s).expect("leaf exists");
    let s_node = rooted.leaf_node(s).unwrap();
    let root = rooted.root();
    cluster_list(&rooted)
        .into_iter()
        .enumerate()
        .filter(|(u, _)| *u != root && *u != s_node)
        .map(|(_, c)| c)
        .collect()
}

pub fn is_isomorphic<T: Topology>(a: &T, b: &T) -> bool {
    a.leaf_set() == b.leaf_set() && a.signature() == b.signature()
}

/// `S ⪯ T`: the leaves of `S` occur in `T` and `T|L(S) ≅ S`.
pub fn is_subtree<T: Topology>(s: &T, t: &T) -> bool {
    let ls = s.leaf_set();
    if !ls.is_subset(&t.leaf_set()) {
        return false;
    }
    match t.restrict(&ls) {
        Ok(r) => is_isomorphic(&r, s),
        Err(_) => false,
    }
}

/// Checks `T1|X ≅ T2|X` and returns a certificate, or the first cluster or
/// split on which the restrictions differ.
pub fn verify_agreement<T: Topology>(t1: &T, t2: &T, x: &LeafSet) -> Result<AgreementCertificate> {
    if x.is_empty() {
        return Err(Error::Precondition("agreement set is empty".into()));
    }
    check_subset(x, &t1.leaf_set())?;
    check_subset(x, &t2.leaf_set())?;
    if x.len() < T::MIN_RESTRICT {
        // one or two leaves agree trivially; write the shape in rooted form
        let labels = x.to_vec();
        let restricted_shape = match labels.as_slice() {
            [a] => format!("{a};"),
            [a, b] => format!("({a},{b});"),
            _ => unreachable!(),
        };
        return Ok(AgreementCertificate {
            leaves: x.clone(),
            restricted_shape,
        });
    }
    let r1 = t1.restrict(x)?;
    let r2 = t2.restrict(x)?;
    let (s1, s2) = (r1.signature(), r2.signature());
    if s1 != s2 {
        let kind = if T::MIN_RESTRICT == 1 { "cluster" } else { "split" };
        let msg = match s1.difference(&s2).next() {
            Some(c) => format!("{kind} {{{c}}} present in T1|X only"),
            None => format!(
                "{kind} {{{}}} present in T2|X only",
                s2.difference(&s1).next().unwrap()
            ),
        };
        return Err(Error::Disagreement(msg));
    }
    Ok(AgreementCertificate {
        leaves: x.clone(),
        restricted_shape: r1.canonical_newick(),
    })
}
