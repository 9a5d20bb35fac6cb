//! Tree constructions: balanced trees, caterpillars, random models, the
//! extremal trees `T(h, k)`, swap pairs and exhaustive enumeration.
//!
//! Random trees come from a ChaCha8 stream (`rand_chacha::ChaCha8Rng`)
//! seeded with `seed_from_u64`, with bounded draws through `Rng::gen_range`
//! and shuffles through `SliceRandom::shuffle` (rand 0.8). A given
//! `(model, seed, n)` always yields the same tree.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::f_closed;
use crate::error::{Error, Result};
use crate::tree::{Label, NodeId, RootedBuilder, RootedTree, UnrootedTree};

/// Largest tree the generators will build, in leaves.
pub const MAX_GENERATED_LEAVES: u128 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Uniform over labelled topologies.
    #[serde(rename = "uniform")]
    UniformTopology,
    /// Random splitting of a uniformly chosen leaf, labels shuffled.
    Yule,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::UniformTopology => "uniform",
            Model::Yule => "yule",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Model::UniformTopology),
            "yule" => Ok(Model::Yule),
            _ => Err(Error::Domain(format!("unknown model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomModel {
    pub model: Model,
    pub seed: u64,
}

impl RandomModel {
    pub fn new(model: Model, seed: u64) -> Self {
        RandomModel { model, seed }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        seeded_rng(self.seed)
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Whether size guards on exhaustive searches are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    Enforced,
    Lifted,
}

impl Guard {
    /// `AGREETREE_GUARDS=off` lifts the guards.
    pub fn from_env() -> Guard {
        match std::env::var("AGREETREE_GUARDS") {
            Ok(v) if v.eq_ignore_ascii_case("off") => Guard::Lifted,
            _ => Guard::Enforced,
        }
    }

    pub fn check(&self, ok: bool, what: impl FnOnce() -> String) -> Result<()> {
        if ok || *self == Guard::Lifted {
            Ok(())
        } else {
            Err(Error::Guard(what()))
        }
    }
}

/// Balanced rooted tree whose leaves, left to right, are `labels`
/// (length must be a power of two).
pub fn balanced_with_labels(labels: &[Label]) -> Result<RootedTree> {
    if labels.is_empty() || !labels.len().is_power_of_two() {
        return Err(Error::Domain(format!(
            "{} leaves is not a power of two",
            labels.len()
        )));
    }
    let mut b = RootedBuilder::with_capacity(2 * labels.len());
    let mut level: Vec<NodeId> = labels.iter().map(|&l| b.leaf(l)).collect::<Result<_>>()?;
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|p| b.join(p[0], p[1]))
            .collect::<Result<_>>()?;
    }
    b.finish()
}

/// Balanced rooted tree of height `m` with leaves `1..=2^m` left to right.
pub fn gen_balanced(m: u32) -> Result<RootedTree> {
    if m > 20 {
        return Err(Error::Domain(format!("m = {m} must be at most 20")));
    }
    let labels: Vec<Label> = (1..=(1u32 << m)).collect();
    balanced_with_labels(&labels)
}

/// Rooted caterpillar `(((1,2),3),...,n)` over `labels` in spine order.
pub fn caterpillar_with_labels(labels: &[Label]) -> Result<RootedTree> {
    let mut b = RootedBuilder::with_capacity(2 * labels.len());
    let mut it = labels.iter();
    let first = it
        .next()
        .ok_or(Error::TooFewLeaves { need: 1, got: 0 })?;
    let mut acc = b.leaf(*first)?;
    for &l in it {
        let leaf = b.leaf(l)?;
        acc = b.join(acc, leaf)?;
    }
    b.finish()
}

pub fn gen_caterpillar_rooted(n: usize) -> Result<RootedTree> {
    if n < 1 {
        return Err(Error::TooFewLeaves { need: 1, got: n });
    }
    let labels: Vec<Label> = (1..=n as Label).collect();
    caterpillar_with_labels(&labels)
}

/// Unrooted caterpillar with leaves `1..=n` in spine order.
pub fn gen_caterpillar(n: usize) -> Result<UnrootedTree> {
    if n < 3 {
        return Err(Error::TooFewLeaves { need: 3, got: n });
    }
    gen_caterpillar_rooted(n)?.unroot()
}

/// Unrooted tree of class B(m) over `labels` (length `2^m`, `m >= 2`).
pub fn class_b_with_labels(labels: &[Label]) -> Result<UnrootedTree> {
    balanced_with_labels(labels)?.unroot()
}

/// Unrooted tree of class C(m) over `labels` (length `3 * 2^(m-1)`): three
/// balanced branches of height `m - 1` around a central vertex.
pub fn class_c_with_labels(labels: &[Label]) -> Result<UnrootedTree> {
    let n = labels.len();
    if n < 3 || n % 3 != 0 || !(n / 3).is_power_of_two() {
        return Err(Error::Domain(format!("{n} leaves is not 3 * 2^(m-1)")));
    }
    let third = n / 3;
    let a = balanced_with_labels(&labels[..third])?;
    let b = balanced_with_labels(&labels[third..2 * third])?;
    let c = balanced_with_labels(&labels[2 * third..])?;
    crate::ops::join(&crate::ops::join(&a, &b)?, &c)?.unroot()
}

/// Mutable rooted tree used while growing random trees.
#[derive(Debug, Clone)]
struct Grow {
    parent: Vec<Option<usize>>,
    kids: Vec<Option<(usize, usize)>>,
    label: Vec<Option<Label>>,
    root: usize,
}

impl Grow {
    fn single(label: Label) -> Self {
        Grow {
            parent: vec![None],
            kids: vec![None],
            label: vec![Some(label)],
            root: 0,
        }
    }

    fn node_count(&self) -> usize {
        self.parent.len()
    }

    /// Subdivides the edge above `c` (the root edge when `c` is the root)
    /// and hangs a new leaf there. Returns the new leaf's node.
    fn insert_above(&mut self, c: usize, label: Label) -> usize {
        let w = self.parent.len();
        let x = w + 1;
        let p = self.parent[c];
        self.parent.push(p);
        self.kids.push(Some((c, x)));
        self.label.push(None);
        self.parent.push(Some(w));
        self.kids.push(None);
        self.label.push(Some(label));
        self.parent[c] = Some(w);
        match p {
            None => self.root = w,
            Some(p) => {
                let (a, b) = self.kids[p].unwrap();
                self.kids[p] = Some(if a == c { (w, b) } else { (a, w) });
            }
        }
        x
    }

    fn to_tree(&self) -> Result<RootedTree> {
        let mut b = RootedBuilder::with_capacity(self.node_count());
        let mut stack = vec![(self.root, false)];
        let mut built = Vec::new();
        while let Some((u, expanded)) = stack.pop() {
            match (self.kids[u], expanded) {
                (None, _) => built.push(b.leaf(self.label[u].unwrap())?),
                (Some((l, r)), false) => {
                    stack.push((u, true));
                    stack.push((r, false));
                    stack.push((l, false));
                }
                (Some(_), true) => {
                    let r = built.pop().unwrap();
                    let l = built.pop().unwrap();
                    built.push(b.join(l, r)?);
                }
            }
        }
        b.finish()
    }
}

/// Random rooted tree on `labels` under `model`.
pub fn random_rooted_with<R: Rng>(rng: &mut R, labels: &[Label], model: Model) -> Result<RootedTree> {
    if labels.is_empty() {
        return Err(Error::TooFewLeaves { need: 1, got: 0 });
    }
    match model {
        Model::UniformTopology => {
            let mut g = Grow::single(labels[0]);
            for &l in &labels[1..] {
                let c = rng.gen_range(0..g.node_count());
                g.insert_above(c, l);
            }
            g.to_tree()
        }
        Model::Yule => {
            let mut order: Vec<Label> = labels.to_vec();
            order.shuffle(rng);
            let mut g = Grow::single(order[0]);
            let mut leaves = vec![0usize];
            for &l in &order[1..] {
                let i = rng.gen_range(0..leaves.len());
                let x = g.insert_above(leaves[i], l);
                leaves.push(x);
            }
            g.to_tree()
        }
    }
}

/// Random unrooted tree on `labels` (at least 3) under `model`.
pub fn random_unrooted_with<R: Rng>(
    rng: &mut R,
    labels: &[Label],
    model: Model,
) -> Result<UnrootedTree> {
    if labels.len() < 3 {
        return Err(Error::TooFewLeaves {
            need: 3,
            got: labels.len(),
        });
    }
    match model {
        Model::UniformTopology => {
            // vertices 0,1,2 are the first three leaves, 3 the center
            let mut vlabels: Vec<Option<Label>> = labels[..3].iter().map(|&l| Some(l)).collect();
            vlabels.push(None);
            let mut edges: Vec<(usize, usize)> = vec![(0, 3), (1, 3), (2, 3)];
            for &l in &labels[3..] {
                let i = rng.gen_range(0..edges.len());
                let (a, b) = edges[i];
                let w = vlabels.len();
                vlabels.push(None);
                vlabels.push(Some(l));
                edges[i] = (a, w);
                edges.push((w, b));
                edges.push((w, w + 1));
            }
            UnrootedTree::from_edges(vlabels, &edges)
        }
        Model::Yule => random_rooted_with(rng, labels, Model::Yule)?.unroot(),
    }
}

/// Random unrooted tree on `1..=n`.
pub fn gen_random(n: usize, model: &RandomModel) -> Result<UnrootedTree> {
    let labels: Vec<Label> = (1..=n as Label).collect();
    random_unrooted_with(&mut model.rng(), &labels, model.model)
}

/// Random rooted tree on `1..=n`.
pub fn gen_random_rooted(n: usize, model: &RandomModel) -> Result<RootedTree> {
    let labels: Vec<Label> = (1..=n as Label).collect();
    random_rooted_with(&mut model.rng(), &labels, model.model)
}

/// The extremal tree `T(h, k)`: balanced of height `k` when `h = k` or
/// `k = 0`, otherwise `T(h-1, k)` joined with `T(h-1, k-1)`. Leaves are
/// numbered left to right from 1.
pub fn gen_extremal_fhk(h: u32, k: u32) -> Result<RootedTree> {
    let size = f_closed(h, k)?;
    if size > MAX_GENERATED_LEAVES {
        return Err(Error::Domain(format!("T({h},{k}) has {size} leaves")));
    }
    fn build(b: &mut RootedBuilder, next: &mut Label, h: u32, k: u32) -> Result<NodeId> {
        if h == k || k == 0 {
            let mut level = Vec::with_capacity(1 << k);
            for _ in 0..(1u32 << k) {
                level.push(b.leaf(*next)?);
                *next += 1;
            }
            while level.len() > 1 {
                level = level
                    .chunks(2)
                    .map(|p| b.join(p[0], p[1]))
                    .collect::<Result<_>>()?;
            }
            return Ok(level[0]);
        }
        let l = build(b, next, h - 1, k)?;
        let r = build(b, next, h - 1, k - 1)?;
        b.join(l, r)
    }
    let mut b = RootedBuilder::with_capacity(2 * size as usize);
    let mut next = 1;
    build(&mut b, &mut next, h, k)?;
    b.finish()
}

/// `swap(1, ..., 4^k)`: split into quarters `S1:S2:S3:S4` and emit
/// `swap(S1):swap(S3):swap(S2):swap(S4)`.
pub fn swap_sequence(k: u32) -> Result<Vec<Label>> {
    if k > 11 {
        return Err(Error::Domain(format!("k = {k} must be at most 11")));
    }
    fn swap(s: &[Label], out: &mut Vec<Label>) {
        if s.len() == 1 {
            out.push(s[0]);
            return;
        }
        let q = s.len() / 4;
        for i in [0, 2, 1, 3] {
            swap(&s[i * q..(i + 1) * q], out);
        }
    }
    let s: Vec<Label> = (1..=(1u32 << (2 * k))).collect();
    let mut out = Vec::with_capacity(s.len());
    swap(&s, &mut out);
    Ok(out)
}

/// Two balanced trees of height `2k`: leaves in natural order and in swap
/// order.
pub fn gen_swap_pair(k: u32) -> Result<(RootedTree, RootedTree)> {
    if k < 1 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let t1 = gen_balanced(2 * k)?;
    let t2 = balanced_with_labels(&swap_sequence(k)?)?;
    Ok((t1, t2))
}

/// The swap pair with both roots suppressed.
pub fn gen_swap_pair_unrooted(k: u32) -> Result<(UnrootedTree, UnrootedTree)> {
    let (a, b) = gen_swap_pair(k)?;
    Ok((a.unroot()?, b.unroot()?))
}

/// Largest `n` enumerated while guards are on.
pub const MAX_ENUM_UNROOTED: usize = 7;
pub const MAX_ENUM_ROOTED: usize = 6;

/// All rooted labelled topologies on `1..=n`, `(2n-3)!!` of them.
pub fn enumerate_rooted(n: usize, guard: Guard) -> Result<RootedTopologies> {
    if n < 1 {
        return Err(Error::TooFewLeaves { need: 1, got: n });
    }
    guard.check(n <= MAX_ENUM_ROOTED, || {
        format!("rooted enumeration limited to n <= {MAX_ENUM_ROOTED}, got {n}")
    })?;
    Ok(RootedTopologies {
        n: n as Label,
        stack: vec![(Grow::single(1), 2)],
    })
}

/// All unrooted labelled topologies on `1..=n`, `(2n-5)!!` of them.
pub fn enumerate_unrooted(n: usize, guard: Guard) -> Result<UnrootedTopologies> {
    if n < 3 {
        return Err(Error::TooFewLeaves { need: 3, got: n });
    }
    guard.check(n <= MAX_ENUM_UNROOTED, || {
        format!("unrooted enumeration limited to n <= {MAX_ENUM_UNROOTED}, got {n}")
    })?;
    let start = EdgeState {
        labels: vec![Some(1), Some(2), Some(3), None],
        edges: vec![(0, 3), (1, 3), (2, 3)],
    };
    Ok(UnrootedTopologies {
        n: n as Label,
        stack: vec![(start, 4)],
    })
}

/// Lazy depth-first enumeration of rooted topologies.
pub struct RootedTopologies {
    n: Label,
    stack: Vec<(Grow, Label)>,
}

impl Iterator for RootedTopologies {
    type Item = RootedTree;

    fn next(&mut self) -> Option<RootedTree> {
        while let Some((g, next)) = self.stack.pop() {
            if next > self.n {
                return Some(g.to_tree().expect("enumerated tree is valid"));
            }
            for c in (0..g.node_count()).rev() {
                let mut h = g.clone();
                h.insert_above(c, next);
                self.stack.push((h, next + 1));
            }
        }
        None
    }
}

#[derive(Clone)]
struct EdgeState {
    labels: Vec<Option<Label>>,
    edges: Vec<(usize, usize)>,
}

/// Lazy depth-first enumeration of unrooted topologies.
pub struct UnrootedTopologies {
    n: Label,
    stack: Vec<(EdgeState, Label)>,
}

impl Iterator for UnrootedTopologies {
    type Item = UnrootedTree;

    fn next(&mut self) -> Option<UnrootedTree> {
        while let Some((s, next)) = self.stack.pop() {
            if next > self.n {
                return Some(
                    UnrootedTree::from_edges(s.labels, &s.edges).expect("enumerated tree is valid"),
                );
            }
            for i in (0..s.edges.len()).rev() {
                let mut t = s.clone();
                let (a, b) = t.edges[i];
                let w = t.labels.len();
                t.labels.push(None);
                t.labels.push(Some(next));
                t.edges[i] = (a, w);
                t.edges.push((w, b));
                t.edges.push((w, w + 1));
                self.stack.push((t, next + 1));
            }
        }
        None
    }
}

/// `(2j - 1)!! = 1 * 3 * ... * (2j - 1)`, with `(-1)!! = 1`.
pub fn double_factorial_odd(j: i64) -> u128 {
    (1..=j.max(0)).map(|i| (2 * i - 1) as u128).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::{to_newick_rooted, to_newick_unrooted};
    use crate::tree::BalanceClass;
    use std::collections::{BTreeMap, BTreeSet};

    #[test]
    fn balanced_small() {
        assert_eq!(to_newick_rooted(&gen_balanced(0).unwrap()), "1;");
        assert_eq!(to_newick_rooted(&gen_balanced(2).unwrap()), "((1,2),(3,4));");
        for m in 0..=12 {
            assert_eq!(gen_balanced(m).unwrap().classify(), BalanceClass::RootedBalanced(m));
        }
        assert!(gen_balanced(21).is_err());
    }

    #[test]
    fn caterpillars() {
        assert_eq!(to_newick_unrooted(&gen_caterpillar(3).unwrap()), "(1,2,3);");
        assert_eq!(to_newick_unrooted(&gen_caterpillar(4).unwrap()), "(1,2,(3,4));");
        let c8 = gen_caterpillar(8).unwrap();
        assert!(c8.is_caterpillar());
        // longest path: leaf - 6 spine vertices - leaf = 7 edges
        let ecc: usize = (0..c8.vertex_count())
            .map(|v| *c8.distances_from(&[v]).iter().max().unwrap())
            .max()
            .unwrap();
        assert_eq!(ecc, 7);
        assert!(gen_caterpillar(2).is_err());
        assert!(gen_caterpillar_rooted(5).unwrap().is_caterpillar());
    }

    #[test]
    fn class_generators() {
        for m in 2..=6 {
            let labels: Vec<Label> = (1..=(1u32 << m)).collect();
            assert_eq!(class_b_with_labels(&labels).unwrap().classify(), BalanceClass::ClassB(m));
        }
        for m in 1..=6 {
            let labels: Vec<Label> = (1..=(3u32 << (m - 1))).collect();
            assert_eq!(class_c_with_labels(&labels).unwrap().classify(), BalanceClass::ClassC(m));
        }
    }

    #[test]
    fn random_is_deterministic() {
        for model in [Model::UniformTopology, Model::Yule] {
            let a = gen_random(40, &RandomModel::new(model, 9)).unwrap();
            let b = gen_random(40, &RandomModel::new(model, 9)).unwrap();
            assert_eq!(to_newick_unrooted(&a), to_newick_unrooted(&b));
            let c = gen_random(40, &RandomModel::new(model, 10)).unwrap();
            assert_ne!(to_newick_unrooted(&a), to_newick_unrooted(&c));
        }
        let t = gen_random(3, &RandomModel::new(Model::Yule, 1)).unwrap();
        assert_eq!(to_newick_unrooted(&t), "(1,2,3);");
    }

    #[test]
    fn uniform_n4_frequencies() {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut rng = seeded_rng(2024);
        let draws = 10_000;
        for _ in 0..draws {
            let t = random_unrooted_with(&mut rng, &[1, 2, 3, 4], Model::UniformTopology).unwrap();
            *counts.entry(to_newick_unrooted(&t)).or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        for c in counts.values() {
            let f = *c as f64 / draws as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "{f}");
        }
    }

    #[test]
    fn uniform_n5_chi_square() {
        let topologies: BTreeSet<String> = enumerate_unrooted(5, Guard::Enforced)
            .unwrap()
            .map(|t| to_newick_unrooted(&t))
            .collect();
        assert_eq!(topologies.len(), 15);
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut rng = seeded_rng(77);
        let draws = 15_000;
        for _ in 0..draws {
            let t =
                random_unrooted_with(&mut rng, &[1, 2, 3, 4, 5], Model::UniformTopology).unwrap();
            *counts.entry(to_newick_unrooted(&t)).or_default() += 1;
        }
        let expected = draws as f64 / 15.0;
        let chi2: f64 = topologies
            .iter()
            .map(|k| {
                let o = *counts.get(k).unwrap_or(&0) as f64;
                (o - expected).powi(2) / expected
            })
            .sum();
        // 14 degrees of freedom, 0.999 quantile is 36.12
        assert!(chi2 < 36.12, "chi2 = {chi2}");
    }

    #[test]
    fn uniform_rooted_n3_frequencies() {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut rng = seeded_rng(5);
        for _ in 0..9000 {
            let t = random_rooted_with(&mut rng, &[1, 2, 3], Model::UniformTopology).unwrap();
            *counts.entry(to_newick_rooted(&t)).or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        for c in counts.values() {
            assert!((*c as f64 / 9000.0 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn extremal_trees() {
        assert_eq!(to_newick_rooted(&gen_extremal_fhk(2, 1).unwrap()), "((1,2),3);");
        assert_eq!(gen_extremal_fhk(3, 2).unwrap().leaf_count(), 7);
        let t42 = gen_extremal_fhk(4, 2).unwrap();
        assert_eq!(t42.leaf_count(), 11);
        assert_eq!(t42.height(), 4);
        for k in 0..6 {
            assert_eq!(gen_extremal_fhk(k, k).unwrap(), gen_balanced(k).unwrap());
        }
        assert!(gen_extremal_fhk(1, 2).is_err());
    }

    #[test]
    fn swap_sequences() {
        assert_eq!(swap_sequence(0).unwrap(), vec![1]);
        assert_eq!(swap_sequence(1).unwrap(), vec![1, 3, 2, 4]);
        assert_eq!(
            swap_sequence(2).unwrap(),
            vec![1, 3, 2, 4, 9, 11, 10, 12, 5, 7, 6, 8, 13, 15, 14, 16]
        );
        for k in 0..6 {
            let mut s = swap_sequence(k).unwrap();
            s.sort_unstable();
            assert_eq!(s, (1..=(1u32 << (2 * k))).collect::<Vec<_>>());
        }
    }

    #[test]
    fn swap_pair_k1() {
        let (t1, t2) = gen_swap_pair(1).unwrap();
        assert_eq!(t1.leaf_order(), vec![1, 2, 3, 4]);
        assert_eq!(t2.leaf_order(), vec![1, 3, 2, 4]);
        assert!(gen_swap_pair(0).is_err());
    }

    #[test]
    fn enumeration_counts() {
        for n in 3..=7 {
            let all: Vec<String> = enumerate_unrooted(n, Guard::Enforced)
                .unwrap()
                .map(|t| to_newick_unrooted(&t))
                .collect();
            let distinct: BTreeSet<&String> = all.iter().collect();
            assert_eq!(all.len() as u128, double_factorial_odd(n as i64 - 2));
            assert_eq!(distinct.len(), all.len());
        }
        for n in 1..=6 {
            let all: Vec<String> = enumerate_rooted(n, Guard::Enforced)
                .unwrap()
                .map(|t| to_newick_rooted(&t))
                .collect();
            let distinct: BTreeSet<&String> = all.iter().collect();
            assert_eq!(all.len() as u128, double_factorial_odd(n as i64 - 1));
            assert_eq!(distinct.len(), all.len());
        }
        assert!(matches!(enumerate_unrooted(8, Guard::Enforced), Err(Error::Guard(_))));
        assert!(enumerate_rooted(7, Guard::Lifted).is_ok());
    }
}
