//! Greedy agreement matchers with size guarantees: `Match1` (balanced vs
//! arbitrary), `Match2` (balanced vs balanced), padding of almost balanced
//! trees, the unrooted wrappers and the multi-tree iteration.
//!
//! Both matchers take the child order of each node as given and swap it
//! only when the listed inequality fails. "Any leaf" choices pick the
//! smallest label.

use serde::Serialize;

use crate::bounds::{self, GuaranteeReport};
use crate::decompose::{extract_balanced, max_balanced_height};
use crate::error::{Error, Result};
use crate::ops::{restrict_rooted, rooted_restriction, verify_agreement};
use crate::tree::{BalanceClass, Label, LeafSet, NodeId, RootedBuilder, RootedTree, UnrootedTree};

/// First dummy label used when padding the first tree.
pub const DUMMY_BASE_T1: Label = 1_000_000_001;
/// First dummy label used when padding the second tree.
pub const DUMMY_BASE_T2: Label = 2_000_000_001;
/// Largest padded height (the padded tree has `2^h` leaves).
pub const MAX_PAD_HEIGHT: u32 = 24;

const NO_POS: usize = usize::MAX;

/// Intersection sizes `t_xy = |L(T1^x) ∩ L(T2^y)|`, computed from the
/// leaf-order spans of both trees by scanning the smaller subtree.
struct Overlap<'a> {
    t1: &'a RootedTree,
    t2: &'a RootedTree,
    span1: Vec<(usize, usize)>,
    span2: Vec<(usize, usize)>,
    order1: Vec<Label>,
    order2: Vec<Label>,
    /// position in T2's leaf order of each leaf of T1, by T1 position
    in2: Vec<usize>,
    /// position in T1's leaf order of each leaf of T2, by T2 position
    in1: Vec<usize>,
}

impl<'a> Overlap<'a> {
    fn new(t1: &'a RootedTree, t2: &'a RootedTree) -> Self {
        let (order1, span1) = t1.leaf_spans();
        let (order2, span2) = t2.leaf_spans();
        let in2 = order1
            .iter()
            .map(|&l| t2.leaf_node(l).map_or(NO_POS, |v| span2[v].0))
            .collect();
        let in1 = order2
            .iter()
            .map(|&l| t1.leaf_node(l).map_or(NO_POS, |u| span1[u].0))
            .collect();
        Overlap {
            t1,
            t2,
            span1,
            span2,
            order1,
            order2,
            in2,
            in1,
        }
    }

    /// Labels common to `T1^x` and `T2^y`, visited from the smaller side.
    fn for_common(&self, x: NodeId, y: NodeId, mut f: impl FnMut(Label)) {
        let (a, b) = self.span1[x];
        let (c, d) = self.span2[y];
        if b - a <= d - c {
            for i in a..b {
                let p = self.in2[i];
                if p != NO_POS && c <= p && p < d {
                    f(self.order1[i]);
                }
            }
        } else {
            for i in c..d {
                let p = self.in1[i];
                if p != NO_POS && a <= p && p < b {
                    f(self.order2[i]);
                }
            }
        }
    }

    fn count(&self, x: NodeId, y: NodeId) -> usize {
        let mut n = 0;
        self.for_common(x, y, |_| n += 1);
        n
    }

    fn min_common(&self, x: NodeId, y: NodeId) -> Option<Label> {
        let mut m: Option<Label> = None;
        self.for_common(x, y, |l| m = Some(m.map_or(l, |k| k.min(l))));
        m
    }

    fn is_base(&self, x: NodeId, y: NodeId) -> bool {
        self.t1.is_leaf(x) || self.t2.is_leaf(y)
    }

    fn kids(&self, x: NodeId, y: NodeId) -> ((NodeId, NodeId), (NodeId, NodeId)) {
        (self.t1.children(x).unwrap(), self.t2.children(y).unwrap())
    }
}

/// Children of `u` and `v` after the common reordering step, with
/// `[t_ll, t_lr, t_rl, t_rr]`: afterwards `t_lr + t_rl <= t_ll + t_rr` and
/// `t_ll <= t_rr`.
fn reorder(
    ov: &Overlap,
    u: NodeId,
    v: NodeId,
) -> ((NodeId, NodeId), (NodeId, NodeId), [usize; 4]) {
    let ((mut lu, mut ru), (mut lv, mut rv)) = ov.kids(u, v);
    let mut c = [ov.count(lu, lv), ov.count(lu, rv), ov.count(ru, lv), ov.count(ru, rv)];
    if c[1] + c[2] > c[0] + c[3] {
        std::mem::swap(&mut lv, &mut rv);
        c = [c[1], c[0], c[3], c[2]];
    }
    if c[0] > c[3] {
        std::mem::swap(&mut lu, &mut ru);
        std::mem::swap(&mut lv, &mut rv);
        c = [c[3], c[2], c[1], c[0]];
    }
    ((lu, ru), (lv, rv), c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Match1Rule {
    Base,
    /// `t_ll > 0`: emit a leaf and recurse on the right children.
    Case1,
    /// `t_rl = 0`: recurse on `(u, r(v))`.
    SkipT2,
    /// `t_lr = 0`: recurse on `(r(u), v)`.
    SkipT1,
    /// Cross counts reach `δ t`: emit a leaf and recurse on `(r(u), l(v))`.
    Cross,
    /// Recurse on the right children.
    Heavy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Match1Step {
    pub u: NodeId,
    pub v: NodeId,
    pub t: usize,
    pub rule: Match1Rule,
    pub emitted: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Match1Result {
    pub leaves: LeafSet,
    pub trace: Vec<Match1Step>,
    pub height: u32,
    pub t: usize,
    pub delta: f64,
}

impl Match1Result {
    fn count(&self, rule: Match1Rule) -> usize {
        self.trace.iter().filter(|s| s.rule == rule).count()
    }

    /// `(a, b, c, d, e)`: how often each recursive line fired.
    pub fn line_counts(&self) -> (usize, usize, usize, usize, usize) {
        (
            self.count(Match1Rule::Case1),
            self.count(Match1Rule::SkipT2),
            self.count(Match1Rule::SkipT1),
            self.count(Match1Rule::Cross),
            self.count(Match1Rule::Heavy),
        )
    }

    /// `t_k >= t_0 (1/4)^a (δ/2)^d (1-δ)^e` over the recorded trace.
    pub fn product_inequality_holds(&self) -> bool {
        let (a, _, _, d, e) = self.line_counts();
        let t0 = self.trace[0].t as f64;
        let tk = self.trace.last().unwrap().t as f64;
        let rhs = t0
            * 0.25f64.powi(a as i32)
            * (self.delta / 2.0).powi(d as i32)
            * (1.0 - self.delta).powi(e as i32);
        tk >= rhs * (1.0 - 1e-12)
    }

    /// Every step satisfies its own drop bound.
    pub fn step_bounds_hold(&self) -> bool {
        self.trace.windows(2).all(|w| {
            let (t, next) = (w[0].t as f64, w[1].t as f64);
            match w[0].rule {
                Match1Rule::Case1 => next >= t / 4.0,
                Match1Rule::SkipT1 | Match1Rule::SkipT2 => next == t,
                Match1Rule::Cross => next >= self.delta * t / 2.0,
                Match1Rule::Heavy => next > (1.0 - self.delta) * t,
                Match1Rule::Base => false,
            }
        })
    }

    /// Emitted leaves equal `a + d + 1`.
    pub fn count_identity_holds(&self) -> bool {
        let (a, _, _, d, _) = self.line_counts();
        self.leaves.len() == a + d + 1
    }

    pub fn report(&self) -> Result<GuaranteeReport> {
        let b = bounds::match1_bound(self.height, self.t, self.delta)?;
        Ok(GuaranteeReport::new("match1", b, self.leaves.len())
            .with_param("delta", self.delta)
            .with_param("m", self.height as f64)
            .with_param("t", self.t as f64))
    }
}

fn check_delta(delta: f64, hi: f64) -> Result<()> {
    if delta > 0.0 && delta < hi {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta = {delta} outside (0, {hi})")))
    }
}

fn balanced_height(t: &RootedTree, which: &str) -> Result<u32> {
    match t.classify() {
        BalanceClass::RootedBalanced(m) => Ok(m),
        _ => Err(Error::Precondition(format!("{which} is not a balanced rooted tree"))),
    }
}

/// `Match1(T1, T2)` for a balanced `T1` and an arbitrary `T2` with
/// `L(T2) ⊆ L(T1)`.
pub fn match1(t1: &RootedTree, t2: &RootedTree, delta: f64) -> Result<Match1Result> {
    check_delta(delta, 0.5)?;
    let height = balanced_height(t1, "T1")?;
    let l1 = t1.leaves();
    if let Some(l) = t2.leaves().first_missing_from(&l1) {
        return Err(Error::Precondition(format!(
            "leaf {l} of T2 does not occur in T1"
        )));
    }
    let ov = Overlap::new(t1, t2);
    let (mut u, mut v) = (t1.root(), t2.root());
    let t = ov.count(u, v);
    let mut leaves = LeafSet::new();
    let mut trace = Vec::new();
    loop {
        let tuv = ov.count(u, v);
        if tuv == 0 {
            return Err(Error::EmptyIntersection(u, v));
        }
        let mut step = |rule, emitted: Option<Label>| {
            trace.push(Match1Step {
                u,
                v,
                t: tuv,
                rule,
                emitted,
            });
            if let Some(z) = emitted {
                leaves.insert(z);
            }
        };
        if ov.is_base(u, v) {
            step(Match1Rule::Base, ov.min_common(u, v));
            break;
        }
        let ((lu, ru), (lv, rv), [ll, lr, rl, _]) = reorder(&ov, u, v);
        if ll > 0 {
            step(Match1Rule::Case1, ov.min_common(lu, lv));
            (u, v) = (ru, rv);
        } else if rl == 0 {
            step(Match1Rule::SkipT2, None);
            v = rv;
        } else if lr == 0 {
            step(Match1Rule::SkipT1, None);
            u = ru;
        } else if (lr + rl) as f64 >= delta * tuv as f64 {
            let (lu, ru, lv, rv) = if lr <= rl { (lu, ru, lv, rv) } else { (ru, lu, rv, lv) };
            step(Match1Rule::Cross, ov.min_common(lu, rv));
            (u, v) = (ru, lv);
        } else {
            step(Match1Rule::Heavy, None);
            (u, v) = (ru, rv);
        }
    }
    Ok(Match1Result {
        leaves,
        trace,
        height,
        t,
        delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Match2Rule {
    Base,
    /// Both diagonal counts reach `δ t`: union over `(l,l)` and `(r,r)`.
    Diagonal,
    /// Both cross counts reach `δ t`: union over `(l,r)` and `(r,l)`.
    Anti,
    /// Both cross counts are small: recurse on `(r,r)`.
    BothSmall,
    /// Only `t_rl` is large: recurse on `(r(u), v)`.
    SkipT1,
    /// Only `t_lr` is large: recurse on `(u, r(v))`.
    SkipT2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Match2Node {
    pub u: NodeId,
    pub v: NodeId,
    pub t: usize,
    pub rule: Match2Rule,
    pub emitted: Option<Label>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Match2Result {
    pub leaves: LeafSet,
    /// Tree of recursive calls; node 0 is the outermost call.
    pub trace: Vec<Match2Node>,
    pub heights: (u32, u32),
    pub t: usize,
    pub delta: f64,
}

impl Match2Result {
    /// Checks the drop bound of every call-tree edge.
    pub fn drop_bounds_hold(&self) -> bool {
        let d = self.delta;
        self.trace.iter().all(|n| {
            let t = n.t as f64;
            n.children.iter().all(|&c| {
                let next = self.trace[c].t as f64;
                match n.rule {
                    Match2Rule::Diagonal | Match2Rule::Anti => next >= d * t,
                    Match2Rule::BothSmall => next >= (1.0 - 3.0 * d) * t,
                    Match2Rule::SkipT1 | Match2Rule::SkipT2 => next >= (1.0 - 2.0 * d) * t,
                    Match2Rule::Base => false,
                }
            })
        })
    }

    /// Length in edges of the longest root-to-leaf path of the call tree.
    pub fn max_path_length(&self) -> usize {
        let mut len = vec![0usize; self.trace.len()];
        for i in (0..self.trace.len()).rev() {
            len[i] = self.trace[i]
                .children
                .iter()
                .map(|&c| len[c] + 1)
                .max()
                .unwrap_or(0);
        }
        len[0]
    }

    /// Fewest branching calls on any root-to-leaf path of the call tree.
    /// The output contains a balanced restriction of at least this height.
    pub fn min_branchings(&self) -> usize {
        let mut b = vec![0usize; self.trace.len()];
        for i in (0..self.trace.len()).rev() {
            let n = &self.trace[i];
            b[i] = match n.children.as_slice() {
                [] => 0,
                [c] => b[*c],
                cs => 1 + cs.iter().map(|&c| b[c]).min().unwrap(),
            };
        }
        b[0]
    }

    pub fn report(&self) -> Result<GuaranteeReport> {
        let (m1, m2) = self.heights;
        let b = bounds::match2_bound(m1, m2, self.t, self.delta)?;
        Ok(GuaranteeReport::new("match2", b, self.leaves.len())
            .with_param("delta", self.delta)
            .with_param("m1", m1 as f64)
            .with_param("m2", m2 as f64)
            .with_param("t", self.t as f64))
    }
}

/// `Match2(T1, T2)` for two balanced trees with a common leaf.
pub fn match2(t1: &RootedTree, t2: &RootedTree, delta: f64) -> Result<Match2Result> {
    check_delta(delta, 0.25)?;
    let m1 = balanced_height(t1, "T1")?;
    let m2 = balanced_height(t2, "T2")?;
    let ov = Overlap::new(t1, t2);
    let t = ov.count(t1.root(), t2.root());
    if t == 0 {
        return Err(Error::EmptyIntersection(t1.root(), t2.root()));
    }
    let mut trace: Vec<Match2Node> = Vec::new();
    let mut leaves = LeafSet::new();
    // (u, v, parent call)
    let mut work: Vec<(NodeId, NodeId, Option<usize>)> = vec![(t1.root(), t2.root(), None)];
    while let Some((u, v, parent)) = work.pop() {
        let tuv = ov.count(u, v);
        if tuv == 0 {
            return Err(Error::EmptyIntersection(u, v));
        }
        let id = trace.len();
        if let Some(p) = parent {
            trace[p].children.push(id);
        }
        let (rule, emitted, next): (Match2Rule, Option<Label>, Vec<(NodeId, NodeId)>) =
            if ov.is_base(u, v) {
                (Match2Rule::Base, ov.min_common(u, v), vec![])
            } else {
                let ((lu, ru), (lv, rv), [ll, lr, rl, rr]) = reorder(&ov, u, v);
                let big = |c: usize| c as f64 >= delta * tuv as f64;
                if big(ll) && big(rr) {
                    (Match2Rule::Diagonal, None, vec![(lu, lv), (ru, rv)])
                } else if big(lr) && big(rl) {
                    (Match2Rule::Anti, None, vec![(lu, rv), (ru, lv)])
                } else if !big(lr) && !big(rl) {
                    (Match2Rule::BothSmall, None, vec![(ru, rv)])
                } else if !big(lr) {
                    (Match2Rule::SkipT1, None, vec![(ru, v)])
                } else {
                    (Match2Rule::SkipT2, None, vec![(u, rv)])
                }
            };
        if let Some(z) = emitted {
            leaves.insert(z);
        }
        trace.push(Match2Node {
            u,
            v,
            t: tuv,
            rule,
            emitted,
            children: Vec::new(),
        });
        for (a, b) in next.into_iter().rev() {
            work.push((a, b, Some(id)));
        }
    }
    Ok(Match2Result {
        leaves,
        trace,
        heights: (m1, m2),
        t,
        delta,
    })
}

/// Balanced tree of height `target` containing `t` as a restriction. Each
/// leaf at depth `d` becomes the leftmost leaf of a balanced subtree of
/// height `target - d` filled with dummy labels `first_dummy, ...`.
pub fn pad_to_balanced_with(t: &RootedTree, target: u32, first_dummy: Label) -> Result<RootedTree> {
    let h = t.height();
    if h > target as usize {
        return Err(Error::Precondition(format!(
            "height {h} exceeds target height {target}"
        )));
    }
    if target > MAX_PAD_HEIGHT {
        return Err(Error::Guard(format!(
            "padding to height {target} exceeds {MAX_PAD_HEIGHT}"
        )));
    }
    if let Some(big) = t.leaves().last().filter(|&l| l >= DUMMY_BASE_T1) {
        return Err(Error::Precondition(format!(
            "label {big} lies in the reserved dummy range"
        )));
    }
    let depth = t.depths();
    let mut b = RootedBuilder::with_capacity(1 << (target + 1));
    let mut next = first_dummy;
    let mut built: Vec<NodeId> = Vec::new();
    let mut stack = vec![(t.root(), false)];
    while let Some((u, expanded)) = stack.pop() {
        match (t.children(u), expanded) {
            (None, _) => {
                let extra = target as usize - depth[u];
                let mut level = vec![b.leaf(t.label(u).unwrap())?];
                for _ in 1..(1usize << extra) {
                    level.push(b.leaf(next)?);
                    next += 1;
                }
                while level.len() > 1 {
                    level = level
                        .chunks(2)
                        .map(|p| b.join(p[0], p[1]))
                        .collect::<Result<_>>()?;
                }
                built.push(level[0]);
            }
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

pub fn pad_to_balanced(t: &RootedTree, target: u32) -> Result<RootedTree> {
    pad_to_balanced_with(t, target, DUMMY_BASE_T1)
}

/// Roots on the central edge, or on the edge from a central vertex to its
/// first neighbour.
pub fn root_near_center(t: &UnrootedTree) -> Result<RootedTree> {
    let c = t.center();
    match c.as_slice() {
        [a, b] => t.root_at_edge(*a, *b),
        [a] => t.root_at_edge(*a, t.neighbors(*a)[0]),
        _ => unreachable!("a tree has one or two central vertices"),
    }
}

/// The three branches at a central vertex, ordered by smallest label.
fn center_branches(t: &UnrootedTree) -> Result<(NodeId, Vec<(NodeId, LeafSet)>)> {
    let c = t.center();
    let z = match c.as_slice() {
        [z] => *z,
        _ => return Err(Error::Precondition("center is not a single vertex".into())),
    };
    let mut br: Vec<(NodeId, LeafSet)> = t
        .neighbors(z)
        .iter()
        .map(|&w| (w, t.branch_leaves(w, z)))
        .collect();
    br.sort_by_key(|(_, l)| l.first());
    Ok((z, br))
}

/// Rooted tree obtained by deleting branch `drop` at the central vertex.
fn prune_center(t: &UnrootedTree, drop: usize) -> Result<(RootedTree, LeafSet)> {
    let (z, br) = center_branches(t)?;
    let keep: Vec<&(NodeId, LeafSet)> =
        br.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, b)| b).collect();
    let a = t.directed_subtree(keep[0].0, z)?;
    let b = t.directed_subtree(keep[1].0, z)?;
    let tree = crate::ops::join(&a, &b)?;
    Ok((tree, keep[0].1.union(&keep[1].1)))
}

fn same_leaves(t1: &UnrootedTree, t2: &UnrootedTree) -> Result<LeafSet> {
    let l = t1.leaves();
    if l != t2.leaves() {
        return Err(Error::Precondition("trees must have the same leaf set".into()));
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnrootedMatch {
    pub leaves: LeafSet,
    pub class: BalanceClass,
    /// Leaves kept after deleting a central branch (all leaves otherwise).
    pub kept: LeafSet,
    /// The guarantee in terms of n, before clamping.
    pub bound: f64,
    /// The guarantee at the actual heights and overlap.
    pub local_bound: f64,
}

/// Match1 for an unrooted balanced `T1` and an arbitrary `T2` on the same
/// leaves. In class C the branch with the largest smallest label is
/// deleted.
pub fn match1_unrooted(t1: &UnrootedTree, t2: &UnrootedTree, delta: f64) -> Result<UnrootedMatch> {
    check_delta(delta, 0.5)?;
    let all = same_leaves(t1, t2)?;
    let n = all.len();
    let class = t1.classify();
    let (r1, kept) = match class {
        BalanceClass::ClassB(_) => (root_near_center(t1)?, all),
        BalanceClass::ClassC(_) => prune_center(t1, 2)?,
        _ => return Err(Error::Precondition("T1 is not balanced".into())),
    };
    let r2 = rooted_restriction(t2, &kept)?;
    let r = match1(&r1, &r2, delta)?;
    verify_agreement(t1, t2, &r.leaves)?;
    let bound = bounds::alpha(delta)? * (2.0 * n as f64 / 3.0).log2();
    Ok(UnrootedMatch {
        leaves: r.leaves,
        class,
        kept,
        bound,
        local_bound: bounds::match1_bound(r.height, r.t, delta)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnrootedMatch2 {
    pub result: UnrootedMatch,
    /// `|X ∩ Y|` for the chosen pair of prunings (class C only).
    pub overlap: Option<usize>,
}

/// Match2 for two unrooted balanced trees of the same class and height.
pub fn match2_unrooted(t1: &UnrootedTree, t2: &UnrootedTree, delta: f64) -> Result<UnrootedMatch2> {
    check_delta(delta, 0.25)?;
    let all = same_leaves(t1, t2)?;
    let class = t1.classify();
    if class != t2.classify() {
        return Err(Error::Precondition(format!(
            "class mismatch: {:?} vs {:?}",
            class,
            t2.classify()
        )));
    }
    let (m, r1, r2, kept, overlap) = match class {
        BalanceClass::ClassB(m) => (m, root_near_center(t1)?, root_near_center(t2)?, all, None),
        BalanceClass::ClassC(m) => {
            let (_, b1) = center_branches(t1)?;
            let (_, b2) = center_branches(t2)?;
            let mut best = (0, 0, 0);
            for i in 0..3 {
                for j in 0..3 {
                    let x = all.difference(&b1[i].1);
                    let y = all.difference(&b2[j].1);
                    let s = x.intersection(&y).len();
                    if s > best.2 {
                        best = (i, j, s);
                    }
                }
            }
            let (p1, x) = prune_center(t1, best.0)?;
            let (p2, y) = prune_center(t2, best.1)?;
            (m, p1, p2, x.intersection(&y), Some(best.2))
        }
        _ => return Err(Error::Precondition("trees are not balanced".into())),
    };
    let r = match2(&r1, &r2, delta)?;
    verify_agreement(t1, t2, &r.leaves)?;
    let c = match class {
        BalanceClass::ClassC(_) => bounds::t2_constant(delta)?,
        _ => 0.0,
    };
    let beta = bounds::beta(delta).unwrap_or(f64::NAN);
    Ok(UnrootedMatch2 {
        result: UnrootedMatch {
            leaves: r.leaves,
            class,
            kept,
            bound: (beta * m as f64 - c).exp2(),
            local_bound: bounds::match2_bound(r.heights.0, r.heights.1, r.t, delta)?,
        },
        overlap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiStage {
    /// Height of the running balanced agreement tree and of the new tree.
    pub heights: (u32, u32),
    pub t: usize,
    pub matched: usize,
    pub bound: f64,
    /// Height of the balanced restriction carried into the next stage.
    pub carried_height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiResult {
    pub leaves: LeafSet,
    pub stages: Vec<MultiStage>,
    /// Why the iteration stopped before the last tree, if it did.
    pub stopped: Option<String>,
}

/// Agreement of several balanced trees: match the running balanced
/// agreement tree against the next input, then keep a maximum balanced
/// restriction of the result.
pub fn match2_multi(trees: &[RootedTree], delta: f64) -> Result<MultiResult> {
    if trees.len() < 2 {
        return Err(Error::Precondition("need at least two trees".into()));
    }
    for (i, t) in trees.iter().enumerate() {
        balanced_height(t, &format!("tree {}", i + 1))?;
    }
    let mut cur = trees[0].clone();
    let mut leaves = cur.leaves();
    let mut stages = Vec::new();
    let mut stopped = None;
    for (i, next) in trees.iter().enumerate().skip(1) {
        let r = match match2(&cur, next, delta) {
            Ok(r) => r,
            Err(Error::EmptyIntersection(..)) => {
                stopped = Some(format!("no common leaves with tree {}", i + 1));
                break;
            }
            Err(e) => return Err(e),
        };
        let restricted = restrict_rooted(&cur, &r.leaves)?;
        let k = max_balanced_height(&restricted);
        let core = extract_balanced(&restricted, k)?;
        stages.push(MultiStage {
            heights: r.heights,
            t: r.t,
            matched: r.leaves.len(),
            bound: bounds::match2_bound(r.heights.0, r.heights.1, r.t, delta)?,
            carried_height: k,
        });
        leaves = r.leaves;
        cur = restrict_rooted(&cur, &core)?;
    }
    let upto = stages.len() + 1;
    for t in &trees[1..upto] {
        verify_agreement(&trees[0], t, &leaves)?;
    }
    Ok(MultiResult {
        leaves,
        stages,
        stopped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlmostMode {
    /// `T1` has radius at most `k log n - 1`; Match1 after padding `T1`.
    OneSided,
    /// Both radii at most `k log n`; Match2 after padding both.
    BothSided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlmostBalancedResult {
    pub leaves: LeafSet,
    pub mode: AlmostMode,
    pub padded_heights: Vec<u32>,
    /// Guarantee at the padded heights with `t = n`.
    pub bound: f64,
    /// `α_k log n` or `n^β_k`, when the constant is positive.
    pub asymptotic_bound: Option<f64>,
}

pub fn match_almost_balanced(
    t1: &UnrootedTree,
    t2: &UnrootedTree,
    k: f64,
    delta: f64,
    mode: AlmostMode,
) -> Result<AlmostBalancedResult> {
    let all = same_leaves(t1, t2)?;
    let n = all.len();
    let logn = (n as f64).log2();
    let tol = 1e-9;
    match mode {
        AlmostMode::OneSided => {
            check_delta(delta, 0.5)?;
            let limit = k * logn - 1.0;
            if t1.radius() as f64 > limit + tol {
                return Err(Error::Precondition(format!(
                    "radius {} of T1 exceeds k log n - 1 = {limit:.3}",
                    t1.radius()
                )));
            }
            let h = (k * logn - tol).ceil().max(0.0) as u32;
            let r1 = root_near_center(t1)?;
            let p1 = pad_to_balanced_with(&r1, h, DUMMY_BASE_T1)?;
            let r2 = t2.root_at_leaf(all.first().unwrap())?;
            let r = match1(&p1, &r2, delta)?;
            verify_agreement(t1, t2, &r.leaves)?;
            Ok(AlmostBalancedResult {
                leaves: r.leaves,
                mode,
                padded_heights: vec![h],
                bound: bounds::match1_bound(h, n, delta)?,
                asymptotic_bound: bounds::alpha_k(k, delta).ok().map(|a| a * logn),
            })
        }
        AlmostMode::BothSided => {
            check_delta(delta, 0.25)?;
            let limit = k * logn;
            for (i, t) in [t1, t2].iter().enumerate() {
                if t.radius() as f64 > limit + tol {
                    return Err(Error::Precondition(format!(
                        "radius {} of T{} exceeds k log n = {limit:.3}",
                        t.radius(),
                        i + 1
                    )));
                }
            }
            let r1 = root_near_center(t1)?;
            let r2 = root_near_center(t2)?;
            let (h1, h2) = (r1.height() as u32, r2.height() as u32);
            let p1 = pad_to_balanced_with(&r1, h1, DUMMY_BASE_T1)?;
            let p2 = pad_to_balanced_with(&r2, h2, DUMMY_BASE_T2)?;
            let r = match2(&p1, &p2, delta)?;
            verify_agreement(t1, t2, &r.leaves)?;
            Ok(AlmostBalancedResult {
                leaves: r.leaves,
                mode,
                padded_heights: vec![h1, h2],
                bound: bounds::match2_bound(h1, h2, n, delta)?,
                asymptotic_bound: bounds::beta_k(k, delta).ok().map(|b| (n as f64).powf(b)),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::mast_rooted;
    use crate::generators::{
        balanced_with_labels, class_b_with_labels, class_c_with_labels, gen_balanced,
        gen_extremal_fhk, gen_random, gen_swap_pair, random_rooted_with, seeded_rng, Model,
        RandomModel,
    };
    use crate::newick::parse_rooted;
    use crate::ops::is_subtree;
    use rand::seq::SliceRandom;
    use rand::Rng;

    const D1: f64 = 0.1705;

    #[test]
    fn match1_single_leaf() {
        let t1 = gen_balanced(3).unwrap();
        let t2 = RootedTree::leaf(5).unwrap();
        let r = match1(&t1, &t2, D1).unwrap();
        assert_eq!(r.leaves.to_vec(), vec![5]);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn match1_identical_gets_one_leaf_per_level() {
        for m in 0..8 {
            let t = gen_balanced(m).unwrap();
            let r = match1(&t, &t, D1).unwrap();
            assert_eq!(r.leaves.len(), m as usize + 1);
            assert!(r.count_identity_holds());
            assert!(restrict_rooted(&t, &r.leaves).unwrap().is_caterpillar());
        }
    }

    #[test]
    fn match1_preconditions() {
        let t1 = gen_balanced(2).unwrap();
        let cat = parse_rooted("(((1,2),3),4);").unwrap();
        assert!(matches!(match1(&cat, &t1, D1), Err(Error::Precondition(_))));
        let other = parse_rooted("(1,9);").unwrap();
        assert!(matches!(match1(&t1, &other, D1), Err(Error::Precondition(_))));
        assert!(matches!(match1(&t1, &t1, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn match1_random_guarantee_and_trace() {
        let mut rng = seeded_rng(31);
        for m in 2..=8u32 {
            let t1 = gen_balanced(m).unwrap();
            for _ in 0..40 {
                let mut labels: Vec<Label> = (1..=(1 << m)).collect();
                labels.shuffle(&mut rng);
                let t = rng.gen_range(2..=labels.len());
                let t2 = random_rooted_with(&mut rng, &labels[..t], Model::UniformTopology).unwrap();
                for delta in [D1, 0.05, 0.3] {
                    let r = match1(&t1, &t2, delta).unwrap();
                    assert!(r.report().unwrap().met());
                    assert!(r.product_inequality_holds());
                    assert!(r.step_bounds_hold());
                    assert!(r.count_identity_holds());
                    verify_agreement(&t1, &t2, &r.leaves).unwrap();
                    assert!(restrict_rooted(&t1, &r.leaves).unwrap().is_caterpillar());
                }
            }
        }
    }

    #[test]
    fn match2_identical_returns_everything() {
        for m in 0..7 {
            let t = gen_balanced(m).unwrap();
            let r = match2(&t, &t, 0.05).unwrap();
            assert_eq!(r.leaves, t.leaves());
            assert_eq!(r.min_branchings(), m as usize);
        }
    }

    #[test]
    fn match2_swap_pair() {
        for k in 1..=3 {
            let (a, b) = gen_swap_pair(k).unwrap();
            let r = match2(&a, &b, 0.05).unwrap();
            verify_agreement(&a, &b, &r.leaves).unwrap();
            assert!(r.leaves.len() <= mast_rooted(&a, &b).unwrap().size);
            if k == 1 {
                assert_eq!(r.leaves.len(), 2);
            }
        }
    }

    #[test]
    fn match2_random_guarantee_and_trace() {
        let mut rng = seeded_rng(32);
        for m in 2..=7u32 {
            for _ in 0..30 {
                let mut labels: Vec<Label> = (1..=(1 << m)).collect();
                let t1 = balanced_with_labels(&labels).unwrap();
                labels.shuffle(&mut rng);
                let t2 = balanced_with_labels(&labels).unwrap();
                for delta in [0.02, 0.05, 0.09] {
                    let r = match2(&t1, &t2, delta).unwrap();
                    assert!(r.report().unwrap().met());
                    assert!(r.drop_bounds_hold());
                    assert!(r.max_path_length() <= 2 * m as usize);
                    verify_agreement(&t1, &t2, &r.leaves).unwrap();
                    let core = max_balanced_height(&restrict_rooted(&t1, &r.leaves).unwrap());
                    assert!(core as usize >= r.min_branchings());
                }
            }
        }
    }

    #[test]
    fn padding() {
        let leaf = RootedTree::leaf(3).unwrap();
        let p = pad_to_balanced(&leaf, 2).unwrap();
        assert_eq!(p.classify(), BalanceClass::RootedBalanced(2));
        assert!(p.leaves().contains(3));
        let t = gen_extremal_fhk(4, 2).unwrap();
        let p = pad_to_balanced(&t, 4).unwrap();
        assert_eq!(p.classify(), BalanceClass::RootedBalanced(4));
        assert!(is_subtree(&t, &p));
        assert!(pad_to_balanced(&t, 3).is_err());
        let b = gen_balanced(3).unwrap();
        assert!(crate::ops::is_isomorphic(&pad_to_balanced(&b, 3).unwrap(), &b));
    }

    #[test]
    fn unrooted_match1() {
        let mut rng = seeded_rng(33);
        for m in 2..=6u32 {
            let labels: Vec<Label> = (1..=(1 << m)).collect();
            let b = class_b_with_labels(&labels).unwrap();
            let same = match1_unrooted(&b, &b, D1).unwrap();
            assert_eq!(same.leaves.len(), m as usize + 1);
            let labels: Vec<Label> = (1..=(3 << (m - 1))).collect();
            let c = class_c_with_labels(&labels).unwrap();
            for _ in 0..10 {
                let t2 = gen_random(labels.len(), &RandomModel::new(Model::Yule, rng.gen())).unwrap();
                let r = match1_unrooted(&c, &t2, D1).unwrap();
                assert!(r.leaves.len() as f64 >= r.bound.max(1.0) - 1e-9);
                assert_eq!(r.kept.len(), 1 << m);
            }
        }
    }

    #[test]
    fn unrooted_match2() {
        let mut rng = seeded_rng(34);
        for m in 2..=6u32 {
            let mut labels: Vec<Label> = (1..=(1 << m)).collect();
            let b1 = class_b_with_labels(&labels).unwrap();
            let same = match2_unrooted(&b1, &b1, 0.05).unwrap();
            assert_eq!(same.result.leaves.len(), 1 << m);
            labels.shuffle(&mut rng);
            let b2 = class_b_with_labels(&labels).unwrap();
            let r = match2_unrooted(&b1, &b2, 0.05).unwrap();
            assert!(r.result.leaves.len() as f64 >= r.result.bound.max(1.0) - 1e-9);

            let mut labels: Vec<Label> = (1..=(3 << (m - 1))).collect();
            let c1 = class_c_with_labels(&labels).unwrap();
            labels.shuffle(&mut rng);
            let c2 = class_c_with_labels(&labels).unwrap();
            let r = match2_unrooted(&c1, &c2, 0.05).unwrap();
            let need = ((1u64 << (m + 1)) as f64 / 3.0).ceil() as usize;
            assert!(r.overlap.unwrap() >= need);
            assert!(r.result.leaves.len() as f64 >= r.result.bound.max(1.0) - 1e-9);
            assert!(r.result.leaves.len() as f64 >= r.result.local_bound - 1e-9);
            assert!(matches!(match2_unrooted(&b1, &c1, 0.05), Err(Error::Precondition(_))));
        }
    }

    #[test]
    fn multi_identical_and_random() {
        let t = gen_balanced(5).unwrap();
        let r = match2_multi(&[t.clone(), t.clone(), t.clone()], 0.05).unwrap();
        assert_eq!(r.leaves, t.leaves());
        let mut rng = seeded_rng(35);
        let mut trees = Vec::new();
        for _ in 0..3 {
            let mut labels: Vec<Label> = (1..=64).collect();
            labels.shuffle(&mut rng);
            trees.push(balanced_with_labels(&labels).unwrap());
        }
        let r = match2_multi(&trees, 0.05).unwrap();
        for a in &trees {
            for b in &trees {
                verify_agreement(a, b, &r.leaves).unwrap();
            }
        }
        for s in &r.stages {
            assert!(s.matched as f64 >= s.bound - 1e-9);
        }
    }

    #[test]
    fn almost_balanced_modes() {
        let mut rng = seeded_rng(36);
        for _ in 0..20 {
            let n = 32;
            let t1 = gen_random(n, &RandomModel::new(Model::Yule, rng.gen())).unwrap();
            let t2 = gen_random(n, &RandomModel::new(Model::Yule, rng.gen())).unwrap();
            let k = 2.0;
            if let Ok(r) = match_almost_balanced(&t1, &t2, k, 0.02, AlmostMode::OneSided) {
                assert!(r.leaves.len() as f64 >= r.bound.max(1.0) - 1e-9);
                assert!(r.leaves.iter().all(|l| l < DUMMY_BASE_T1));
            }
            if let Ok(r) = match_almost_balanced(&t1, &t2, k, 0.02, AlmostMode::BothSided) {
                assert!(r.leaves.len() as f64 >= r.bound - 1e-9);
                assert!(r.leaves.iter().all(|l| l < DUMMY_BASE_T1));
            }
        }
        let labels: Vec<Label> = (1..=16).collect();
        let b = class_b_with_labels(&labels).unwrap();
        let r = match_almost_balanced(&b, &b, 1.25, D1, AlmostMode::OneSided).unwrap();
        assert!(r.leaves.len() >= 2);
        let tight = match_almost_balanced(&b, &b, 0.5, D1, AlmostMode::OneSided);
        assert!(matches!(tight, Err(Error::Precondition(_))));
    }
}
