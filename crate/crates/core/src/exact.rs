//! Exact maximum agreement subtrees: the node-pair dynamic program for
//! rooted trees, the unrooted reduction, subset brute force and `mast(n)`
//! for tiny `n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::generators::{enumerate_rooted, enumerate_unrooted, Guard};
use crate::ops::{verify_agreement, AgreementCertificate, Topology};
use crate::tree::{Label, LeafSet, RootedTree, UnrootedTree};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MastResult {
    pub size: usize,
    pub witness: LeafSet,
    /// Absent only when the witness is empty.
    pub certificate: Option<AgreementCertificate>,
}

impl MastResult {
    fn from_witness<T: Topology>(t1: &T, t2: &T, witness: LeafSet) -> Result<Self> {
        let certificate = if witness.is_empty() {
            None
        } else {
            Some(verify_agreement(t1, t2, &witness)?)
        };
        Ok(MastResult {
            size: witness.len(),
            witness,
            certificate,
        })
    }
}

/// Largest node-pair table the rooted program will allocate.
pub const MAX_DP_CELLS: usize = 1 << 25;

/// Largest common leaf set for subset brute force.
pub const MAX_BRUTEFORCE: usize = 12;

/// Largest `n` for `mast_floor`.
pub const MAX_FLOOR_N: usize = 6;

// argmax choices, tried in this order; ties keep the earlier one
const DIAG: u8 = 0;
const CROSS: u8 = 1;
const U_LV: u8 = 2;
const U_RV: u8 = 3;
const LU_V: u8 = 4;
const RU_V: u8 = 5;
const EMIT1: u8 = 6;
const EMIT2: u8 = 7;
const NONE: u8 = 8;

/// Size and witness of a maximum agreement subtree of two rooted trees.
pub fn mast_rooted_witness(t1: &RootedTree, t2: &RootedTree) -> Result<LeafSet> {
    let (n1, n2) = (t1.node_count(), t2.node_count());
    Guard::from_env().check(n1.saturating_mul(n2) <= MAX_DP_CELLS, || {
        format!("rooted MAST table of {n1} x {n2} cells is too large")
    })?;
    let (_, span1) = t1.leaf_spans();
    let (_, span2) = t2.leaf_spans();
    let pos2 = |l: Label| t2.leaf_node(l).map(|v| span2[v].0);
    let mut score = vec![0u32; n1 * n2];
    let mut choice = vec![NONE; n1 * n2];
    let idx = |u: usize, v: usize| u * n2 + v;
    for u in 0..n1 {
        for v in 0..n2 {
            let (s, c) = match (t1.children(u), t2.children(v)) {
                (None, _) => {
                    let l = t1.label(u).unwrap();
                    match pos2(l) {
                        Some(p) if span2[v].0 <= p && p < span2[v].1 => (1, EMIT1),
                        _ => (0, NONE),
                    }
                }
                (_, None) => {
                    let l = t2.label(v).unwrap();
                    match t1.leaf_node(l) {
                        Some(w) if span1[u].0 <= span1[w].0 && span1[w].0 < span1[u].1 => {
                            (1, EMIT2)
                        }
                        _ => (0, NONE),
                    }
                }
                (Some((lu, ru)), Some((lv, rv))) => {
                    let cands = [
                        score[idx(lu, lv)] + score[idx(ru, rv)],
                        score[idx(lu, rv)] + score[idx(ru, lv)],
                        score[idx(u, lv)],
                        score[idx(u, rv)],
                        score[idx(lu, v)],
                        score[idx(ru, v)],
                    ];
                    let mut best = (cands[0], DIAG);
                    for (i, &c) in cands.iter().enumerate().skip(1) {
                        if c > best.0 {
                            best = (c, i as u8);
                        }
                    }
                    best
                }
            };
            score[idx(u, v)] = s;
            choice[idx(u, v)] = c;
        }
    }
    let mut witness = LeafSet::new();
    let mut stack = vec![(t1.root(), t2.root())];
    while let Some((u, v)) = stack.pop() {
        match choice[idx(u, v)] {
            NONE => {}
            EMIT1 => {
                witness.insert(t1.label(u).unwrap());
            }
            EMIT2 => {
                witness.insert(t2.label(v).unwrap());
            }
            c => {
                let (lu, ru) = t1.children(u).unwrap();
                let (lv, rv) = t2.children(v).unwrap();
                match c {
                    DIAG => stack.extend([(lu, lv), (ru, rv)]),
                    CROSS => stack.extend([(lu, rv), (ru, lv)]),
                    U_LV => stack.push((u, lv)),
                    U_RV => stack.push((u, rv)),
                    LU_V => stack.push((lu, v)),
                    RU_V => stack.push((ru, v)),
                    _ => unreachable!(),
                }
            }
        }
    }
    debug_assert_eq!(witness.len(), score[idx(t1.root(), t2.root())] as usize);
    Ok(witness)
}

pub fn mast_rooted(t1: &RootedTree, t2: &RootedTree) -> Result<MastResult> {
    let w = mast_rooted_witness(t1, t2)?;
    MastResult::from_witness(t1, t2, w)
}

/// Unrooted MAST. Any agreement set containing leaf `x` is a rooted
/// agreement set once both trees are rooted on the pendant edge of `x`,
/// so the optimum is the best rooted optimum over all common leaves `x`.
pub fn mast_unrooted(t1: &UnrootedTree, t2: &UnrootedTree) -> Result<MastResult> {
    let common = t1.leaves().intersection(&t2.leaves());
    if common.len() < 3 {
        return MastResult::from_witness(t1, t2, common);
    }
    let best = common
        .to_vec()
        .into_par_iter()
        .map(|x| -> Result<(usize, Label, LeafSet)> {
            let w = mast_rooted_witness(&t1.root_at_leaf(x)?, &t2.root_at_leaf(x)?)?;
            Ok((w.len(), x, w))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .expect("non-empty");
    MastResult::from_witness(t1, t2, best.2)
}

/// Unrooted MAST as the maximum over all edge pairs of the rooted optimum.
pub fn mast_unrooted_all_rootings(t1: &UnrootedTree, t2: &UnrootedTree) -> Result<MastResult> {
    let common = t1.leaves().intersection(&t2.leaves());
    if common.len() < 3 {
        return MastResult::from_witness(t1, t2, common);
    }
    let e2 = t2.edges();
    let mut best = LeafSet::new();
    for (a, b) in t1.edges() {
        let r1 = t1.root_at_edge(a, b)?;
        for &(c, d) in &e2 {
            let w = mast_rooted_witness(&r1, &t2.root_at_edge(c, d)?)?;
            if w.len() > best.len() {
                best = w;
            }
        }
    }
    MastResult::from_witness(t1, t2, best)
}

/// Subset enumeration, largest subsets first.
pub fn mast_bruteforce<T: Topology>(t1: &T, t2: &T) -> Result<usize> {
    let common = t1.leaf_set().intersection(&t2.leaf_set()).to_vec();
    let n = common.len();
    Guard::from_env().check(n <= MAX_BRUTEFORCE, || {
        format!("brute force limited to {MAX_BRUTEFORCE} common leaves, got {n}")
    })?;
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|m| std::cmp::Reverse(m.count_ones()));
    for m in masks {
        let x: LeafSet = (0..n).filter(|i| m >> i & 1 == 1).map(|i| common[i]).collect();
        if verify_agreement(t1, t2, &x).is_ok() {
            return Ok(x.len());
        }
    }
    Ok(0)
}

/// `mast(n)`: the smallest MAST over all pairs of topologies on `1..=n`.
pub fn mast_floor(n: usize, rooted: bool) -> Result<usize> {
    let guard = Guard::from_env();
    guard.check(n <= MAX_FLOOR_N, || {
        format!("mast_floor limited to n <= {MAX_FLOOR_N}, got {n}")
    })?;
    if rooted {
        let all: Vec<RootedTree> = enumerate_rooted(n, guard)?.collect();
        let sizes = all
            .par_iter()
            .map(|a| {
                all.iter()
                    .map(|b| mast_rooted_witness(a, b).map(|w| w.len()))
                    .collect::<Result<Vec<_>>>()
                    .map(|v| v.into_iter().min().unwrap())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(sizes.into_iter().min().unwrap())
    } else {
        let all: Vec<UnrootedTree> = enumerate_unrooted(n, guard)?.collect();
        let sizes = all
            .par_iter()
            .map(|a| {
                all.iter()
                    .map(|b| mast_unrooted(a, b).map(|r| r.size))
                    .collect::<Result<Vec<_>>>()
                    .map(|v| v.into_iter().min().unwrap())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(sizes.into_iter().min().unwrap())
    }
}
