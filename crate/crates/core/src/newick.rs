//! Newick reading and canonical writing.
//!
//! Grammar: `tree := subtree ";"`, `subtree := LABEL | "(" subtree "," subtree ")"`,
//! with a three-way top-level node for unrooted trees. Labels match
//! `[1-9][0-9]*`. Whitespace between tokens is ignored.
//!
//! Canonical output orders children by the smallest leaf label below them.
//! Unrooted trees are written from the internal vertex next to the smallest
//! leaf.

use crate::error::{Error, Result};
use crate::tree::{Label, NodeId, RootedBuilder, RootedTree, Tree, UnrootedTree};

enum Item {
    Leaf(Label),
    Group { pos: usize, children: Vec<usize> },
}

pub fn parse_newick(text: &str) -> Result<Tree> {
    let bytes = text.as_bytes();
    let mut items: Vec<Item> = Vec::new();
    // each open group collects child item ids; the bool records that a
    // child is still expected (after '(' or ',')
    let mut open: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut top: Option<usize> = None;
    let mut expect_subtree = true;
    let mut i = 0;
    let syntax = |pos: usize, msg: &str| Error::Syntax {
        pos,
        msg: msg.to_string(),
    };

    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if top.is_some() {
            if c == b';' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                if i != bytes.len() {
                    return Err(syntax(i, "unexpected text after ';'"));
                }
                return finish(items, top.unwrap());
            }
            return Err(syntax(i, "expected ';'"));
        }
        match c {
            b'(' => {
                if !expect_subtree {
                    return Err(syntax(i, "unexpected '('"));
                }
                open.push((i, Vec::new()));
                i += 1;
            }
            b'1'..=b'9' => {
                if !expect_subtree {
                    return Err(syntax(i, "unexpected label"));
                }
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let label: Label = text[start..i]
                    .parse()
                    .map_err(|_| syntax(start, "label does not fit in 32 bits"))?;
                items.push(Item::Leaf(label));
                let id = items.len() - 1;
                match open.last_mut() {
                    Some((_, kids)) => kids.push(id),
                    None => top = Some(id),
                }
                expect_subtree = false;
            }
            b'0' => return Err(syntax(i, "labels are positive integers without leading zeros")),
            b',' => {
                if expect_subtree || open.is_empty() {
                    return Err(syntax(i, "unexpected ','"));
                }
                expect_subtree = true;
                i += 1;
            }
            b')' => {
                if expect_subtree || open.is_empty() {
                    return Err(syntax(i, "unexpected ')'"));
                }
                let (pos, children) = open.pop().unwrap();
                items.push(Item::Group { pos, children });
                let id = items.len() - 1;
                match open.last_mut() {
                    Some((_, kids)) => kids.push(id),
                    None => top = Some(id),
                }
                expect_subtree = false;
                i += 1;
            }
            b';' => return Err(syntax(i, "unexpected ';'")),
            _ => return Err(syntax(i, "unexpected character")),
        }
    }
    Err(syntax(bytes.len(), "unexpected end of input"))
}

fn finish(items: Vec<Item>, top: usize) -> Result<Tree> {
    for (id, item) in items.iter().enumerate() {
        if let Item::Group { pos, children } = item {
            if id != top && children.len() != 2 {
                return Err(Error::NonBinary {
                    pos: *pos,
                    degree: children.len(),
                });
            }
        }
    }
    let top_degree = match &items[top] {
        Item::Leaf(_) => 1,
        Item::Group { children, .. } => children.len(),
    };
    match top_degree {
        1 | 2 => {
            if let Item::Group { pos, .. } = items[top] {
                if top_degree == 1 {
                    return Err(Error::NonBinary { pos, degree: 1 });
                }
            }
            let mut b = RootedBuilder::with_capacity(items.len());
            let mut map = vec![0; items.len()];
            for (id, item) in items.iter().enumerate() {
                map[id] = match item {
                    Item::Leaf(l) => b.leaf(*l)?,
                    Item::Group { children, .. } => b.join(map[children[0]], map[children[1]])?,
                };
            }
            Ok(Tree::Rooted(b.finish()?))
        }
        3 => {
            let mut labels = Vec::with_capacity(items.len());
            let mut edges = Vec::with_capacity(items.len());
            let mut seen = std::collections::BTreeSet::new();
            for (id, item) in items.iter().enumerate() {
                match item {
                    Item::Leaf(l) => {
                        if !seen.insert(*l) {
                            return Err(Error::DuplicateLabel(*l));
                        }
                        labels.push(Some(*l));
                    }
                    Item::Group { children, .. } => {
                        labels.push(None);
                        edges.extend(children.iter().map(|&c| (id, c)));
                    }
                }
            }
            Ok(Tree::Unrooted(UnrootedTree::from_edges(labels, &edges)?))
        }
        d => Err(Error::TopLevelDegree(d)),
    }
}

/// Parses and insists on a rooted tree.
pub fn parse_rooted(text: &str) -> Result<RootedTree> {
    match parse_newick(text)? {
        Tree::Rooted(t) => Ok(t),
        Tree::Unrooted(_) => Err(Error::Precondition("expected a rooted tree".into())),
    }
}

/// Parses an unrooted tree; a rooted tree with at least three leaves is
/// accepted and unrooted.
pub fn parse_unrooted(text: &str) -> Result<UnrootedTree> {
    parse_newick(text)?.to_unrooted()
}

enum Frame {
    Node(NodeId),
    Text(&'static str),
}

fn write_canonical(
    out: &mut String,
    start: NodeId,
    kids: impl Fn(NodeId) -> Vec<NodeId>,
    label: impl Fn(NodeId) -> Option<Label>,
) {
    let mut stack = vec![Frame::Node(start)];
    while let Some(f) = stack.pop() {
        match f {
            Frame::Text(s) => out.push_str(s),
            Frame::Node(v) => {
                if let Some(l) = label(v) {
                    out.push_str(&l.to_string());
                    continue;
                }
                let ks = kids(v);
                out.push('(');
                stack.push(Frame::Text(")"));
                for (i, k) in ks.iter().enumerate().rev() {
                    stack.push(Frame::Node(*k));
                    if i > 0 {
                        stack.push(Frame::Text(","));
                    }
                }
            }
        }
    }
}

/// Canonical Newick of the subtree below `u`, without the trailing `;`.
pub fn subtree_newick(t: &RootedTree, u: NodeId) -> String {
    let min = t.min_labels();
    let mut out = String::new();
    write_canonical(
        &mut out,
        u,
        |v| {
            let (a, b) = t.children(v).expect("internal node");
            if min[a] <= min[b] {
                vec![a, b]
            } else {
                vec![b, a]
            }
        },
        |v| t.label(v),
    );
    out
}

pub fn to_newick_rooted(t: &RootedTree) -> String {
    let mut s = subtree_newick(t, t.root());
    s.push(';');
    s
}

pub fn to_newick_unrooted(t: &UnrootedTree) -> String {
    let smallest = t.leaves().first().expect("non-empty");
    let top = t.neighbors(t.leaf_vertex(smallest).unwrap())[0];
    let n = t.vertex_count();
    // orient every vertex toward `top`, then compute subtree minima
    let mut parent = vec![usize::MAX; n];
    let mut order = vec![top];
    parent[top] = top;
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        for &w in t.neighbors(v) {
            if parent[w] == usize::MAX {
                parent[w] = v;
                order.push(w);
            }
        }
        i += 1;
    }
    let mut min = vec![Label::MAX; n];
    for &v in order.iter().rev() {
        if let Some(l) = t.label(v) {
            min[v] = l;
        }
        if v != top {
            let p = parent[v];
            min[p] = min[p].min(min[v]);
        }
    }
    let mut out = String::new();
    write_canonical(
        &mut out,
        top,
        |v| {
            let mut ks: Vec<NodeId> = t
                .neighbors(v)
                .iter()
                .copied()
                .filter(|&w| v == top || w != parent[v])
                .collect();
            ks.sort_by_key(|&w| min[w]);
            ks
        },
        |v| t.label(v),
    );
    out.push(';');
    out
}

pub fn to_newick(t: &Tree) -> String {
    match t {
        Tree::Rooted(r) => to_newick_rooted(r),
        Tree::Unrooted(u) => to_newick_unrooted(u),
    }
}
