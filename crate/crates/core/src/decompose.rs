//! Balanced restrictions, longest paths and caterpillars, the
//! path-or-balanced split, caterpillar agreement through monotone
//! subsequences, and the general agreement pipeline.

use serde::Serialize;

use crate::bounds::{self, GuaranteeReport};
use crate::error::{Error, Result};
use crate::exact::mast_unrooted;
use crate::matchers::{match1, root_near_center};
use crate::ops::{restrict_rooted, restrict_unrooted, rooted_restriction, verify_agreement};
use crate::tree::{diameter_path, Label, LeafSet, NodeId, RootedTree, UnrootedTree};

/// Per node, the height of the largest balanced restriction below it.
fn balanced_heights(t: &RootedTree) -> Vec<u32> {
    let mut b = vec![0u32; t.node_count()];
    for u in 0..t.node_count() {
        if let Some((l, r)) = t.children(u) {
            b[u] = b[l].max(b[r]).max(1 + b[l].min(b[r]));
        }
    }
    b
}

/// Largest `k` such that some restriction of `t` is balanced of height `k`.
pub fn max_balanced_height(t: &RootedTree) -> u32 {
    balanced_heights(t)[t.root()]
}

/// A leaf set of size `2^k` whose restriction is balanced of height `k`.
pub fn extract_balanced(t: &RootedTree, k: u32) -> Result<LeafSet> {
    let b = balanced_heights(t);
    if k > b[t.root()] {
        return Err(Error::Precondition(format!(
            "no balanced restriction of height {k}; the maximum is {}",
            b[t.root()]
        )));
    }
    let min = t.min_labels();
    let mut out = LeafSet::new();
    let mut work = vec![(t.root(), k)];
    while let Some((u, k)) = work.pop() {
        if k == 0 {
            out.insert(min[u]);
            continue;
        }
        let (l, r) = t.children(u).expect("height > 0 needs children");
        if b[l].min(b[r]) + 1 >= k {
            work.push((l, k - 1));
            work.push((r, k - 1));
        } else if b[l] >= k && (b[r] < k || min[l] < min[r]) {
            work.push((l, k));
        } else {
            work.push((r, k));
        }
    }
    Ok(out)
}

/// A longest leaf-to-leaf path, as vertices.
pub fn longest_path(t: &UnrootedTree) -> Vec<NodeId> {
    let start = t.leaf_vertex(t.leaves().first().unwrap()).unwrap();
    diameter_path(t.adjacency(), start)
}

/// Leaves of a largest caterpillar restriction: the ends of a longest path
/// and the smallest leaf hanging off each inner path vertex.
pub fn max_caterpillar(t: &UnrootedTree) -> LeafSet {
    spine_leaves(t).into_iter().collect()
}

/// The leaves of `max_caterpillar` in order along the path.
fn spine_leaves(t: &UnrootedTree) -> Vec<Label> {
    let path = longest_path(t);
    let mut out = vec![t.label(path[0]).unwrap()];
    for i in 1..path.len() - 1 {
        let (p, v, q) = (path[i - 1], path[i], path[i + 1]);
        for &w in t.neighbors(v) {
            if w != p && w != q {
                out.push(t.branch_leaves(w, v).first().unwrap());
            }
        }
    }
    out.push(t.label(*path.last().unwrap()).unwrap());
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome")]
pub enum RamseyOutcome {
    BalancedFound { leaves: LeafSet, height: u32 },
    PathFound { leaves: LeafSet, edge_length: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RamseySplit {
    pub outcome: RamseyOutcome,
    pub phi: f64,
    pub path_threshold: f64,
    pub balanced_height: u32,
    pub diameter: usize,
}

impl RamseySplit {
    /// The outcome reaches its own threshold.
    pub fn meets_threshold(&self) -> bool {
        match self.outcome {
            RamseyOutcome::BalancedFound { height, .. } => height as f64 >= self.phi.ceil(),
            RamseyOutcome::PathFound { edge_length, .. } => {
                edge_length as f64 >= self.path_threshold.ceil()
            }
        }
    }
}

/// Either a balanced restriction of height at least `φ(n, a)` or a path
/// of at least `(log n)^ψ(n, b)` edges. Balanced restrictions are measured
/// with the tree rooted near its center.
pub fn ramsey_split(t: &UnrootedTree, a: f64, b: f64) -> Result<RamseySplit> {
    let n = t.leaf_count();
    if n <= 2 {
        return Err(Error::TooFewLeaves { need: 3, got: n });
    }
    if !(a > 0.0 && b > 0.0 && (a + b - 1.0).abs() < 1e-9) {
        return Err(Error::Domain(format!("need a, b in (0,1) with a + b = 1, got {a}, {b}")));
    }
    let phi = bounds::phi(n, a)?;
    let path_threshold = bounds::path_threshold(n, b)?;
    let rooted = root_near_center(t)?;
    let k = max_balanced_height(&rooted);
    let diameter = longest_path(t).len() - 1;
    let outcome = if k as f64 >= phi.ceil() {
        RamseyOutcome::BalancedFound {
            leaves: extract_balanced(&rooted, k)?,
            height: k,
        }
    } else if diameter as f64 >= path_threshold.ceil() {
        RamseyOutcome::PathFound {
            leaves: max_caterpillar(t),
            edge_length: diameter,
        }
    } else {
        return Err(Error::RamseyViolation(format!(
            "n = {n}: balanced height {k} < {phi:.4} and path length {diameter} < {path_threshold:.4}"
        )));
    };
    Ok(RamseySplit {
        outcome,
        phi,
        path_threshold,
        balanced_height: k,
        diameter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

fn longest_increasing(seq: &[i64]) -> Vec<usize> {
    // tails[j]: index of the smallest tail of an increasing run of length j+1
    let mut tails: Vec<usize> = Vec::new();
    let mut prev = vec![usize::MAX; seq.len()];
    for (i, &x) in seq.iter().enumerate() {
        let j = tails.partition_point(|&k| seq[k] < x);
        if j > 0 {
            prev[i] = tails[j - 1];
        }
        if j == tails.len() {
            tails.push(i);
        } else {
            tails[j] = i;
        }
    }
    let mut out = Vec::with_capacity(tails.len());
    let mut cur = tails.last().copied();
    while let Some(i) = cur {
        out.push(i);
        cur = (prev[i] != usize::MAX).then_some(prev[i]);
    }
    out.reverse();
    out
}

/// A longest monotone subsequence of distinct values; increasing wins ties.
pub fn lis(seq: &[i64]) -> Result<(Vec<i64>, Direction)> {
    let mut sorted = seq.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Precondition(format!("duplicate value {}", w[0])));
    }
    let inc = longest_increasing(seq);
    let neg: Vec<i64> = seq.iter().map(|&x| -x).collect();
    let dec = longest_increasing(&neg);
    let (idx, dir) = if dec.len() > inc.len() {
        (dec, Direction::Decreasing)
    } else {
        (inc, Direction::Increasing)
    };
    Ok((idx.into_iter().map(|i| seq[i]).collect(), dir))
}

/// Largest leaf set handed to the exact solver in the last step of
/// `caterpillar_agree`.
pub const CATERPILLAR_EXACT_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaterpillarAgreement {
    pub leaves: LeafSet,
    /// Length of the monotone subsequence.
    pub x_len: usize,
    /// Leaves of the largest caterpillar restriction of `T2|X`.
    pub y_len: usize,
    pub direction: Direction,
}

/// Leaf order of `t` with children visited by smallest label.
fn canonical_leaf_order(t: &RootedTree) -> Vec<Label> {
    let min = t.min_labels();
    let mut out = Vec::new();
    let mut stack = vec![t.root()];
    while let Some(u) = stack.pop() {
        match t.children(u) {
            None => out.push(t.label(u).unwrap()),
            Some((a, b)) => {
                let (first, second) = if min[a] <= min[b] { (a, b) } else { (b, a) };
                stack.push(second);
                stack.push(first);
            }
        }
    }
    out
}

/// Agreement of a caterpillar `T1` with an arbitrary `T2` on the same leaves:
/// monotone subsequence of `T2`'s circular order in `T1`'s spine positions,
/// then a largest caterpillar of `T2` on it, then an exact solve on (at most
/// `CATERPILLAR_EXACT_CAP` of) those leaves.
pub fn caterpillar_agree(t1: &UnrootedTree, t2: &UnrootedTree) -> Result<CaterpillarAgreement> {
    if !t1.is_caterpillar() {
        return Err(Error::Precondition("T1 is not a caterpillar".into()));
    }
    let all = t1.leaves();
    if all != t2.leaves() {
        return Err(Error::Precondition("trees must have the same leaf set".into()));
    }
    let circular = canonical_leaf_order(&t2.root_at_leaf(all.first().unwrap())?);
    let cpos: std::collections::BTreeMap<Label, usize> =
        circular.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    // the two leaves of each end cherry share a spine vertex, so either
    // order is a valid embedding of T1; align them with T2 both ways
    let base = spine_leaves(t1);
    debug_assert_eq!(base.len(), all.len());
    let mut best: Option<(Vec<Label>, Vec<i64>, Direction)> = None;
    for ascending in [true, false] {
        let mut spine = base.clone();
        let k = spine.len();
        if k >= 4 {
            for (i, j) in [(0, 1), (k - 2, k - 1)] {
                if (cpos[&spine[i]] > cpos[&spine[j]]) == ascending {
                    spine.swap(i, j);
                }
            }
        }
        let pos: std::collections::BTreeMap<Label, i64> =
            spine.iter().enumerate().map(|(i, &l)| (l, i as i64)).collect();
        let seq: Vec<i64> = circular.iter().map(|l| pos[l]).collect();
        let (sub, dir) = lis(&seq)?;
        if best.as_ref().is_none_or(|b| sub.len() > b.1.len()) {
            best = Some((spine, sub, dir));
        }
    }
    let (spine, sub, direction) = best.unwrap();
    let pos: std::collections::BTreeMap<Label, i64> =
        spine.iter().enumerate().map(|(i, &l)| (l, i as i64)).collect();
    let x: LeafSet = sub.iter().map(|&p| spine[p as usize]).collect();
    if x.len() < 3 {
        return Ok(CaterpillarAgreement {
            x_len: x.len(),
            y_len: x.len(),
            leaves: x,
            direction,
        });
    }
    let y = max_caterpillar(&restrict_unrooted(t2, &x)?);
    let mut y_spine: Vec<Label> = y.to_vec();
    y_spine.sort_by_key(|l| pos[l]);
    y_spine.truncate(CATERPILLAR_EXACT_CAP);
    let z: LeafSet = y_spine.into_iter().collect();
    let leaves = if z.len() < 3 {
        z
    } else {
        mast_unrooted(&restrict_unrooted(t1, &z)?, &restrict_unrooted(t2, &z)?)?.witness
    };
    verify_agreement(t1, t2, &leaves)?;
    Ok(CaterpillarAgreement {
        leaves,
        x_len: x.len(),
        y_len: y.len(),
        direction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub name: String,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralAgreement {
    pub leaves: LeafSet,
    pub report: GuaranteeReport,
    pub attempts: Vec<Attempt>,
    /// Split of `T1`, then of `T2`.
    pub splits: Vec<RamseySplit>,
}

/// Largest `n` for which `agree_general` also runs the exact solver.
pub const GENERAL_EXACT_MAX: usize = 64;

/// One side of the general pipeline: split `a`, then match against `b`.
fn split_and_match(a: &UnrootedTree, b: &UnrootedTree, delta: f64) -> Result<(RamseySplit, LeafSet)> {
    let split = ramsey_split(a, 0.5, 0.5)?;
    let leaves = match &split.outcome {
        RamseyOutcome::BalancedFound { leaves, .. } => {
            let ar = restrict_rooted(&root_near_center(a)?, leaves)?;
            let br = rooted_restriction(b, leaves)?;
            match1(&ar, &br, delta)?.leaves
        }
        RamseyOutcome::PathFound { leaves, .. } => {
            caterpillar_agree(&restrict_unrooted(a, leaves)?, &restrict_unrooted(b, leaves)?)?
                .leaves
        }
    };
    Ok((split, leaves))
}

/// Agreement subtree of two arbitrary trees on the same leaves, with
/// the guarantee `max(1, general_bound(n))`.
pub fn agree_general(t1: &UnrootedTree, t2: &UnrootedTree) -> Result<GeneralAgreement> {
    let all = t1.leaves();
    if all != t2.leaves() {
        return Err(Error::Precondition("trees must have the same leaf set".into()));
    }
    let n = all.len();
    if n <= 2 {
        return Err(Error::TooFewLeaves { need: 3, got: n });
    }
    let (delta, _) = bounds::optimal_delta_match1();
    let mut attempts = Vec::new();
    let mut best = LeafSet::new();
    let mut consider = |name: &str, x: LeafSet, attempts: &mut Vec<Attempt>| {
        attempts.push(Attempt {
            name: name.to_string(),
            size: x.len(),
        });
        if x.len() > best.len() {
            best = x;
        }
    };
    if verify_agreement(t1, t2, &all).is_ok() {
        consider("identical", all.clone(), &mut attempts);
    }
    let (s1, x1) = split_and_match(t1, t2, delta)?;
    consider("split-t1", x1, &mut attempts);
    let (s2, x2) = split_and_match(t2, t1, delta)?;
    consider("split-t2", x2, &mut attempts);
    if n <= GENERAL_EXACT_MAX {
        consider("exact", mast_unrooted(t1, t2)?.witness, &mut attempts);
    }
    verify_agreement(t1, t2, &best)?;
    let report = GuaranteeReport::new("agree_general", bounds::general_bound(n)?, best.len())
        .with_param("delta", delta)
        .with_param("n", n as f64);
    Ok(GeneralAgreement {
        leaves: best,
        report,
        attempts,
        splits: vec![s1, s2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::mast_unrooted;
    use crate::generators::{
        class_b_with_labels, gen_balanced, gen_caterpillar, gen_caterpillar_rooted,
        gen_extremal_fhk, gen_random, gen_random_rooted, seeded_rng, Model, RandomModel,
    };
    use crate::tree::BalanceClass;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn subsets(labels: &[Label]) -> impl Iterator<Item = LeafSet> + '_ {
        (1u32..(1 << labels.len())).map(move |m| {
            (0..labels.len())
                .filter(|i| m >> i & 1 == 1)
                .map(|i| labels[i])
                .collect()
        })
    }

    fn brute_balanced_height(t: &RootedTree) -> u32 {
        let labels = t.leaves().to_vec();
        subsets(&labels)
            .filter_map(|x| match restrict_rooted(t, &x).unwrap().classify() {
                BalanceClass::RootedBalanced(k) => Some(k),
                _ => None,
            })
            .max()
            .unwrap()
    }

    fn brute_caterpillar(t: &UnrootedTree) -> usize {
        let labels = t.leaves().to_vec();
        subsets(&labels)
            .filter(|x| x.len() < 4 || restrict_unrooted(t, x).unwrap().is_caterpillar())
            .map(|x| x.len())
            .max()
            .unwrap()
    }

    #[test]
    fn balanced_height_examples() {
        for m in 0..8 {
            assert_eq!(max_balanced_height(&gen_balanced(m).unwrap()), m);
        }
        for n in 2..20 {
            assert_eq!(max_balanced_height(&gen_caterpillar_rooted(n).unwrap()), 1);
        }
        for h in 0..=12 {
            for k in 0..=h {
                assert_eq!(max_balanced_height(&gen_extremal_fhk(h, k).unwrap()), k);
            }
        }
    }

    #[test]
    fn balanced_height_matches_bruteforce() {
        for seed in 0..60 {
            let n = 1 + (seed as usize % 9);
            let t = gen_random_rooted(n, &RandomModel::new(Model::UniformTopology, seed)).unwrap();
            assert_eq!(max_balanced_height(&t), brute_balanced_height(&t));
        }
    }

    #[test]
    fn extraction_is_balanced() {
        for seed in 0..30 {
            let t = gen_random_rooted(64, &RandomModel::new(Model::Yule, seed)).unwrap();
            let top = max_balanced_height(&t);
            for k in 0..=top {
                let x = extract_balanced(&t, k).unwrap();
                assert_eq!(x.len(), 1 << k);
                assert_eq!(restrict_rooted(&t, &x).unwrap().classify(), BalanceClass::RootedBalanced(k));
            }
            assert!(extract_balanced(&t, top + 1).is_err());
        }
        assert_eq!(extract_balanced(&gen_balanced(3).unwrap(), 0).unwrap().to_vec(), vec![1]);
    }

    #[test]
    fn caterpillars_match_bruteforce() {
        assert_eq!(max_caterpillar(&gen_caterpillar(12).unwrap()).len(), 12);
        for m in 2..=4u32 {
            let labels: Vec<Label> = (1..=(1 << m)).collect();
            let b = class_b_with_labels(&labels).unwrap();
            let got = max_caterpillar(&b).len();
            assert_eq!(got, brute_caterpillar(&b));
            assert_eq!(got, 2 * m as usize);
        }
        for seed in 0..50 {
            let n = 3 + (seed as usize % 8);
            let t = gen_random(n, &RandomModel::new(Model::UniformTopology, seed)).unwrap();
            let x = max_caterpillar(&t);
            assert_eq!(x.len(), brute_caterpillar(&t));
            if x.len() >= 3 {
                assert!(restrict_unrooted(&t, &x).unwrap().is_caterpillar());
            }
        }
    }

    fn quadratic_monotone(seq: &[i64]) -> usize {
        let best = |less: &dyn Fn(i64, i64) -> bool| {
            let mut len = vec![1usize; seq.len()];
            for i in 0..seq.len() {
                for j in 0..i {
                    if less(seq[j], seq[i]) {
                        len[i] = len[i].max(len[j] + 1);
                    }
                }
            }
            len.into_iter().max().unwrap_or(0)
        };
        best(&|a, b| a < b).max(best(&|a, b| a > b))
    }

    #[test]
    fn lis_examples() {
        assert_eq!(lis(&[1, 2, 3]).unwrap(), (vec![1, 2, 3], Direction::Increasing));
        let (s, _) = lis(&[3, 1, 4, 2]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(lis(&[3, 2, 1]).unwrap(), (vec![3, 2, 1], Direction::Decreasing));
        assert_eq!(lis(&[]).unwrap().0.len(), 0);
        assert!(lis(&[1, 1]).is_err());
    }

    #[test]
    fn lis_matches_quadratic_oracle() {
        let mut rng = seeded_rng(41);
        for _ in 0..200 {
            let n = rng.gen_range(1..=200);
            let mut v: Vec<i64> = (0..n).collect();
            v.shuffle(&mut rng);
            let (s, dir) = lis(&v).unwrap();
            assert_eq!(s.len(), quadratic_monotone(&v));
            assert!(s.len() * s.len() >= n as usize);
            let ok = s.windows(2).all(|w| match dir {
                Direction::Increasing => w[0] < w[1],
                Direction::Decreasing => w[0] > w[1],
            });
            assert!(ok);
        }
    }

    #[test]
    fn ramsey_examples() {
        let b = gen_balanced(4).unwrap().unroot().unwrap();
        let s = ramsey_split(&b, 0.5, 0.5).unwrap();
        assert!(matches!(s.outcome, RamseyOutcome::BalancedFound { .. }));
        assert!(s.meets_threshold());
        let c = gen_caterpillar(16).unwrap();
        assert!(ramsey_split(&c, 0.5, 0.5).unwrap().meets_threshold());
        assert!(ramsey_split(&c, 0.6, 0.6).is_err());
        for seed in 0..100 {
            let n = 4 + (seed as usize * 37) % 1000;
            let t = gen_random(n, &RandomModel::new(Model::Yule, seed)).unwrap();
            let s = ramsey_split(&t, 0.5, 0.5).unwrap();
            assert!(s.meets_threshold());
        }
    }

    #[test]
    fn caterpillar_agreement() {
        let c = gen_caterpillar(16).unwrap();
        assert_eq!(caterpillar_agree(&c, &c).unwrap().leaves.len(), 16);
        let labels: Vec<Label> = (1..=16).collect();
        let b = class_b_with_labels(&labels).unwrap();
        let r = caterpillar_agree(&c, &b).unwrap();
        assert!(r.leaves.len() >= 2);
        assert!(r.leaves.len() <= mast_unrooted(&c, &b).unwrap().size);
        assert!(caterpillar_agree(&b, &c).is_err());
        let mut rng = seeded_rng(42);
        for n in [8usize, 64, 512] {
            let mut order: Vec<Label> = (1..=n as Label).collect();
            order.shuffle(&mut rng);
            let cat = crate::generators::caterpillar_with_labels(&order).unwrap().unroot().unwrap();
            for _ in 0..10 {
                let t2 = gen_random(n, &RandomModel::new(Model::UniformTopology, rng.gen())).unwrap();
                let r = caterpillar_agree(&cat, &t2).unwrap();
                assert!(r.leaves.len() as f64 >= ((n as f64).log2() / 3.0).max(1.0) - 1e-9);
                assert!(r.x_len * r.x_len >= n);
            }
        }
    }

    #[test]
    fn general_agreement() {
        let c = gen_caterpillar(10).unwrap();
        assert_eq!(agree_general(&c, &c).unwrap().leaves.len(), 10);
        for seed in 0..20 {
            let n = 8 + seed as usize * 13;
            let a = gen_random(n, &RandomModel::new(Model::UniformTopology, seed)).unwrap();
            let b = gen_random(n, &RandomModel::new(Model::Yule, seed + 100)).unwrap();
            let r = agree_general(&a, &b).unwrap();
            assert!(r.report.met());
            assert_eq!(r.splits.len(), 2);
        }
    }
}
