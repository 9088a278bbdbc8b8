//! Trees coded by excursions, subordinate pseudo-distances, marked trees
//! embedded in a function, spines and concatenation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pathsim::LatticePath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodedTree {
    pub excursion: LatticePath,
}

impl CodedTree {
    pub fn new(excursion: LatticePath) -> Result<Self> {
        let v = &excursion.values;
        if v[0] != 0.0 || *v.last().unwrap() != 0.0 {
            return domain("a coding excursion starts and ends at 0");
        }
        if v.iter().any(|&x| !(x >= 0.0)) {
            return domain("a coding excursion is nonnegative");
        }
        Ok(CodedTree { excursion })
    }
}

fn check_time(p: &LatticePath, t: f64) -> Result<()> {
    if !(t >= 0.0 && t <= p.horizon() + 1e-12 * p.horizon().max(1.0)) {
        return domain(format!("time {t} outside [0, {}]", p.horizon()));
    }
    Ok(())
}

/// Minimum of a lattice function over [s, u]: lattice points inside plus the
/// interpolated endpoint values.
pub fn interval_min(p: &LatticePath, s: f64, u: f64) -> f64 {
    let (a, b) = if s <= u { (s, u) } else { (u, s) };
    let mut m = p.at(a).min(p.at(b));
    let i0 = (a / p.dt).ceil() as usize;
    let i1 = ((b / p.dt).floor() as usize).min(p.len() - 1);
    if i0 <= i1 {
        for &v in &p.values[i0..=i1] {
            m = m.min(v);
        }
    }
    m
}

fn argmin_index(p: &LatticePath, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    let mut best = a;
    for k in a..=b {
        if p.values[k] < p.values[best] {
            best = k;
        }
    }
    best
}

pub fn tree_distance(t: &CodedTree, s: f64, u: f64) -> Result<f64> {
    let e = &t.excursion;
    check_time(e, s)?;
    check_time(e, u)?;
    Ok((e.at(s) + e.at(u) - 2.0 * interval_min(e, s, u)).max(0.0))
}

/// Lattice-index version of `tree_distance`.
pub fn tree_distance_idx(e: &LatticePath, i: usize, j: usize) -> f64 {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    let m = e.values[a..=b].iter().cloned().fold(f64::INFINITY, f64::min);
    e.values[i] + e.values[j] - 2.0 * m
}

/// d^g(s,u) = g(s) + g(u) - 2 min_{[s,u]} g for g nondecreasing along the
/// tree coded by `t`. The contract is checked at the lattice argmin of the
/// coding excursion: g there must equal the interval minimum of g, up to `tol`.
pub fn subordinate_distance(t: &CodedTree, g: &LatticePath, s: f64, u: f64, tol: f64) -> Result<f64> {
    let e = &t.excursion;
    if g.len() != e.len() || g.dt != e.dt {
        return domain("g must live on the lattice of the coding excursion");
    }
    check_time(e, s)?;
    check_time(e, u)?;
    let gm = interval_min(g, s, u);
    let (a, b) = if s <= u { (s, u) } else { (u, s) };
    let i0 = (a / e.dt).ceil() as usize;
    let i1 = ((b / e.dt).floor() as usize).min(e.len() - 1);
    if i0 <= i1 {
        let k = argmin_index(e, i0, i1);
        let em = interval_min(e, s, u);
        if e.values[k] == em && g.values[k] - gm > tol {
            return Err(Error::Contract(format!(
                "g is not tree-nondecreasing: g at the mrca is {} but the interval minimum is {}",
                g.values[k], gm
            )));
        }
    }
    Ok((g.at(s) + g.at(u) - 2.0 * gm).max(0.0))
}

/// Lattice-index version, without the contract check.
pub fn subordinate_distance_idx(g: &LatticePath, i: usize, j: usize) -> f64 {
    tree_distance_idx(g, i, j)
}

/// Finite rooted ordered tree with real labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedTree {
    pub label: f64,
    pub children: Vec<MarkedTree>,
}

impl MarkedTree {
    pub fn leaf(label: f64) -> Self {
        MarkedTree { label, children: Vec::new() }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|c| c.size()).sum::<usize>()
    }

    /// (Ulam address, label) pairs in depth-first order; the root has the
    /// empty address and children are numbered from 1.
    pub fn addresses(&self) -> Vec<(Vec<u32>, f64)> {
        fn walk(t: &MarkedTree, prefix: &mut Vec<u32>, out: &mut Vec<(Vec<u32>, f64)>) {
            out.push((prefix.clone(), t.label));
            for (j, c) in t.children.iter().enumerate() {
                prefix.push(j as u32 + 1);
                walk(c, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn leaf_labels(&self) -> Vec<f64> {
        fn walk(t: &MarkedTree, out: &mut Vec<f64>) {
            if t.children.is_empty() {
                out.push(t.label);
            }
            for c in &t.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn labels_nondecreasing(&self) -> bool {
        self.children.iter().all(|c| c.label >= self.label && c.labels_nondecreasing())
    }

    pub fn map_labels(&self, f: &impl Fn(f64) -> f64) -> MarkedTree {
        MarkedTree { label: f(self.label), children: self.children.iter().map(|c| c.map_labels(f)).collect() }
    }

    /// Label of the most recent common ancestor of leaves `i` and `j` (in
    /// left-to-right leaf order).
    pub fn mrca_label(&self, i: usize, j: usize) -> Option<f64> {
        fn count(t: &MarkedTree) -> usize {
            if t.children.is_empty() {
                1
            } else {
                t.children.iter().map(count).sum()
            }
        }
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let mut node = self;
        let (mut a, mut b) = (a, b);
        loop {
            if node.children.is_empty() {
                return if a == 0 && b == 0 { Some(node.label) } else { None };
            }
            let mut off = 0;
            let mut next = None;
            for c in &node.children {
                let n = count(c);
                if a >= off && b < off + n {
                    next = Some((c, off));
                    break;
                }
                if a < off + n {
                    break;
                }
                off += n;
            }
            match next {
                Some((c, off)) => {
                    node = c;
                    a -= off;
                    b -= off;
                }
                None => return Some(node.label),
            }
        }
    }

    /// Parenthesized text: `(c1,c2,...)label`, leaves as bare labels.
    pub fn to_newick(&self) -> String {
        let mut s = String::new();
        self.write_newick(&mut s);
        s.push(';');
        s
    }

    fn write_newick(&self, s: &mut String) {
        if !self.children.is_empty() {
            s.push('(');
            for (j, c) in self.children.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                c.write_newick(s);
            }
            s.push(')');
        }
        s.push_str(&format!("{:?}", self.label));
    }

    pub fn from_newick(text: &str) -> Result<Self> {
        let text = text.trim();
        let body = text.strip_suffix(';').unwrap_or(text);
        let bytes = body.as_bytes();
        let mut pos = 0;
        let t = parse_node(bytes, &mut pos)?;
        if pos != bytes.len() {
            return domain(format!("trailing characters at position {pos}"));
        }
        Ok(t)
    }

    /// JSON object mapping dot-joined Ulam addresses ("" for the root) to labels.
    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<String, f64> = self
            .addresses()
            .into_iter()
            .map(|(a, l)| (a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("."), l))
            .collect();
        serde_json::to_value(map).expect("labels are finite")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let map: BTreeMap<String, f64> =
            serde_json::from_value(v.clone()).map_err(|e| Error::Domain(format!("bad tree JSON: {e}")))?;
        let mut entries: Vec<(Vec<u32>, f64)> = Vec::with_capacity(map.len());
        for (k, l) in map {
            let addr = if k.is_empty() {
                vec![]
            } else {
                k.split('.')
                    .map(|x| x.parse::<u32>().ok().filter(|&n| n >= 1))
                    .collect::<Option<Vec<u32>>>()
                    .ok_or_else(|| Error::Domain(format!("bad address '{k}'")))?
            };
            entries.push((addr, l));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        build_from_addresses(&entries)
    }
}

fn build_from_addresses(entries: &[(Vec<u32>, f64)]) -> Result<MarkedTree> {
    // entries sorted lexicographically; the first must be the root
    fn build(entries: &[(Vec<u32>, f64)], pos: &mut usize, depth: usize) -> Result<MarkedTree> {
        let (addr, label) = &entries[*pos];
        let prefix = addr.clone();
        *pos += 1;
        let mut children = Vec::new();
        while *pos < entries.len() {
            let (next, _) = &entries[*pos];
            if next.len() <= depth || next[..depth] != prefix[..] {
                break;
            }
            if next.len() != depth + 1 {
                return domain("addresses are not prefix-closed");
            }
            if next[depth] as usize != children.len() + 1 {
                return domain("children must be numbered contiguously from 1");
            }
            children.push(build(entries, pos, depth + 1)?);
        }
        Ok(MarkedTree { label: *label, children })
    }
    if entries.is_empty() || !entries[0].0.is_empty() {
        return domain("tree must contain the root");
    }
    let mut pos = 0;
    let t = build(entries, &mut pos, 0)?;
    if pos != entries.len() {
        return domain("addresses are not prefix-closed");
    }
    Ok(t)
}

fn parse_node(b: &[u8], pos: &mut usize) -> Result<MarkedTree> {
    let mut children = Vec::new();
    if *pos < b.len() && b[*pos] == b'(' {
        *pos += 1;
        loop {
            children.push(parse_node(b, pos)?);
            match b.get(*pos) {
                Some(b',') => *pos += 1,
                Some(b')') => {
                    *pos += 1;
                    break;
                }
                _ => return domain(format!("expected ',' or ')' at position {}", *pos)),
            }
        }
    }
    let start = *pos;
    while *pos < b.len() && !matches!(b[*pos], b',' | b')' | b'(') {
        *pos += 1;
    }
    let tok = std::str::from_utf8(&b[start..*pos]).map_err(|e| Error::Domain(e.to_string()))?;
    let label: f64 = tok.parse().map_err(|_| Error::Domain(format!("bad label '{tok}'")))?;
    Ok(MarkedTree { label, children })
}

/// [T_1, ..., T_k]_h: new root labelled h; subtree labels are kept as they are.
pub fn concat(trees: Vec<MarkedTree>, h: f64) -> MarkedTree {
    MarkedTree { label: h, children: trees }
}

/// Marked tree embedded in the lattice function `e` at strictly increasing
/// times `marks`.
pub fn embedded_tree(e: &LatticePath, marks: &[f64]) -> Result<MarkedTree> {
    if marks.is_empty() {
        return domain("need at least one mark");
    }
    if marks.windows(2).any(|w| !(w[0] < w[1])) {
        return domain("marks must be strictly increasing");
    }
    for &t in marks {
        check_time(e, t)?;
    }
    let leaves: Vec<f64> = marks.iter().map(|&t| e.at(t)).collect();
    let mins: Vec<f64> = marks.windows(2).map(|w| interval_min(e, w[0], w[1])).collect();
    Ok(embedded_tree_from_minima(&leaves, &mins))
}

/// The same construction from the mark values e(t_i) and the consecutive
/// interval minima m_e(t_i, t_{i+1}).
pub fn embedded_tree_from_minima(leaves: &[f64], mins: &[f64]) -> MarkedTree {
    assert_eq!(leaves.len(), mins.len() + 1);
    fn rec(leaves: &[f64], mins: &[f64]) -> MarkedTree {
        if leaves.len() == 1 {
            return MarkedTree::leaf(leaves[0]);
        }
        let m = mins.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut children = Vec::new();
        let mut start = 0;
        for (i, &mi) in mins.iter().enumerate() {
            if mi == m {
                children.push(rec(&leaves[start..=i], &mins[start..i]));
                start = i + 1;
            }
        }
        children.push(rec(&leaves[start..], &mins[start..]));
        concat(children, m)
    }
    rec(leaves, mins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineSummary {
    pub entries: Vec<(f64, i64)>,
}

impl SpineSummary {
    /// K = sum of (k_v - 1) over the non-leaf spine vertices.
    pub fn k_total(&self) -> i64 {
        self.entries.iter().filter(|e| e.1 >= 0).map(|e| e.1).sum()
    }
}

/// Leftmost root-to-leaf path: (h_v, k_v - 1), ending with (h_leaf, -1).
pub fn spine(t: &MarkedTree) -> SpineSummary {
    let mut entries = Vec::new();
    let mut node = t;
    loop {
        entries.push((node.label, node.children.len() as i64 - 1));
        match node.children.first() {
            Some(c) => node = c,
            None => break,
        }
    }
    SpineSummary { entries }
}

/// The K subtrees hanging to the right of the leftmost spine, labels shifted
/// by the height of their attachment vertex. Ordered from the root down,
/// and within one spine vertex from the rightmost child leftwards.
pub fn detach_right_subtrees(t: &MarkedTree) -> Vec<MarkedTree> {
    let mut out = Vec::new();
    let mut node = t;
    while let Some(first) = node.children.first() {
        let h = node.label;
        for c in node.children[1..].iter().rev() {
            out.push(c.map_labels(&|x| x - h));
        }
        node = first;
    }
    out
}

/// Inverse of `detach_right_subtrees`: rebuilds the tree from its spine
/// labels (root to leaf) and the detached subtrees.
pub fn reattach(spine_labels: &[(f64, i64)], subtrees: &[MarkedTree]) -> Result<MarkedTree> {
    if spine_labels.is_empty() || spine_labels.last().unwrap().1 != -1 {
        return domain("spine must end with a leaf entry");
    }
    let k: i64 = spine_labels.iter().filter(|e| e.1 >= 0).map(|e| e.1).sum();
    if k as usize != subtrees.len() {
        return domain(format!("spine expects {k} subtrees, got {}", subtrees.len()));
    }
    let mut pos = 0usize;
    let mut groups = Vec::new();
    for &(h, c) in &spine_labels[..spine_labels.len() - 1] {
        if c < 0 {
            return domain("inner spine vertex with no child");
        }
        let mut g: Vec<MarkedTree> = subtrees[pos..pos + c as usize].iter().map(|s| s.map_labels(&|x| x + h)).collect();
        g.reverse();
        pos += c as usize;
        groups.push((h, g));
    }
    let mut node = MarkedTree::leaf(spine_labels.last().unwrap().0);
    for (h, g) in groups.into_iter().rev() {
        let mut children = vec![node];
        children.extend(g);
        node = concat(children, h);
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent() -> CodedTree {
        let v: Vec<f64> = (0..=200).map(|i| { let t = i as f64 * 0.01; t.min(2.0 - t) }).collect();
        CodedTree::new(LatticePath::new(0.01, v).unwrap()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let t = tent();
        assert_eq!(tree_distance(&t, 0.7, 0.7).unwrap(), 0.0);
        assert!(tree_distance(&t, 0.5, 1.5).unwrap().abs() < 1e-12);
        assert!((tree_distance(&t, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(tree_distance(&t, 0.0, 3.0).is_err());
    }

    #[test]
    fn subordinate_examples() {
        let t = tent();
        let c = LatticePath::new(0.01, vec![0.3; 201]).unwrap();
        assert_eq!(subordinate_distance(&t, &c, 0.2, 1.9, 0.0).unwrap(), 0.0);
        let g = t.excursion.clone();
        for &(s, u) in &[(0.1, 1.3), (0.25, 0.75), (0.0, 2.0)] {
            let a = subordinate_distance(&t, &g, s, u, 0.0).unwrap();
            let b = tree_distance(&t, s, u).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        // a g that is not nondecreasing along the tree
        let bad: Vec<f64> = (0..=200).map(|i| if i == 100 { 5.0 } else { 0.0 }).collect();
        let bad = LatticePath::new(0.01, bad).unwrap();
        // mrca of 0.5 and 1.5 in the tent is at t = 0.5 or 1.5, g is 0 there: fine
        assert!(subordinate_distance(&t, &bad, 0.5, 1.5, 0.0).is_ok());
        // double tent with bump g at the valley
        let dv: Vec<f64> = (0..=4).map(|i| [0.0, 1.0, 0.5, 1.0, 0.0][i]).collect();
        let dt = CodedTree::new(LatticePath::new(1.0, dv).unwrap()).unwrap();
        let g = LatticePath::new(1.0, vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(subordinate_distance(&dt, &g, 1.0, 3.0, 0.1), Err(Error::Contract(_))));
    }

    #[test]
    fn embedded_examples() {
        let t = tent();
        let one = embedded_tree(&t.excursion, &[0.3]).unwrap();
        assert_eq!(one, MarkedTree::leaf(t.excursion.at(0.3)));
        let cherry = embedded_tree(&t.excursion, &[0.5, 1.5]).unwrap();
        assert_eq!(cherry.children.len(), 2);
        assert!((cherry.label - 0.5).abs() < 1e-12);
        for c in &cherry.children {
            assert!((c.label - 0.5).abs() < 1e-12 && c.children.is_empty());
        }
        // double tent: bumps of heights 1 and 2 meeting at 0
        let v = vec![0.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0];
        let e = LatticePath::new(1.0, v).unwrap();
        let d = embedded_tree(&e, &[1.0, 4.0]).unwrap();
        assert_eq!(d, concat(vec![MarkedTree::leaf(1.0), MarkedTree::leaf(2.0)], 0.0));
        assert!(embedded_tree(&e, &[2.0, 2.0]).is_err());
        assert!(embedded_tree(&e, &[]).is_err());
    }

    #[test]
    fn multiway_split_on_ties() {
        // three marks separated by two valleys of equal depth
        let t = embedded_tree_from_minima(&[3.0, 2.0, 4.0], &[1.0, 1.0]);
        assert_eq!(t, concat(vec![MarkedTree::leaf(3.0), MarkedTree::leaf(2.0), MarkedTree::leaf(4.0)], 1.0));
        let t = embedded_tree_from_minima(&[3.0, 2.0, 4.0], &[1.0, 1.5]);
        assert_eq!(t, concat(vec![MarkedTree::leaf(3.0), concat(vec![MarkedTree::leaf(2.0), MarkedTree::leaf(4.0)], 1.5)], 1.0));
    }

    #[test]
    fn spine_examples() {
        let s = spine(&MarkedTree::leaf(0.7));
        assert_eq!(s.entries, vec![(0.7, -1)]);
        assert_eq!(s.k_total(), 0);
        let cherry = concat(vec![MarkedTree::leaf(1.0), MarkedTree::leaf(2.0)], 0.0);
        let s = spine(&cherry);
        assert_eq!(s.entries, vec![(0.0, 1), (1.0, -1)]);
        assert_eq!(s.k_total(), 1);
        // caterpillar: spine vertices with 2, 3, 1 children
        let l = MarkedTree::leaf;
        let v3 = concat(vec![l(4.0)], 3.0);
        let v2 = concat(vec![v3, l(5.0), l(6.0)], 2.0);
        let v1 = concat(vec![v2, l(7.0)], 1.0);
        let s = spine(&v1);
        assert_eq!(s.entries.iter().map(|e| e.1).collect::<Vec<_>>(), vec![1, 2, 0, -1]);
    }

    #[test]
    fn detach_examples() {
        let l = MarkedTree::leaf;
        let cherry = concat(vec![l(1.0), l(2.5)], 0.5);
        assert_eq!(detach_right_subtrees(&cherry), vec![l(2.0)]);
        let path = concat(vec![concat(vec![l(3.0)], 2.0)], 1.0);
        assert!(detach_right_subtrees(&path).is_empty());
        // order: root first, rightmost child first
        let v2 = concat(vec![l(4.0), l(5.0)], 2.0);
        let t = concat(vec![v2, l(6.0), l(7.0)], 1.0);
        let d = detach_right_subtrees(&t);
        assert_eq!(d, vec![l(6.0), l(5.0), l(3.0)]);
        let back = reattach(&spine(&t).entries, &d).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn newick_and_json_round_trip() {
        let l = MarkedTree::leaf;
        let t = concat(vec![concat(vec![l(0.1), l(1.0 / 3.0)], 0.05), l(2.0), concat(vec![l(7.25)], 3.0)], 0.0);
        let s = t.to_newick();
        assert_eq!(MarkedTree::from_newick(&s).unwrap(), t);
        let j = t.to_json();
        assert_eq!(j[""], 0.0);
        assert_eq!(j["1.2"], 1.0 / 3.0);
        assert_eq!(MarkedTree::from_json(&j).unwrap(), t);
        assert!(MarkedTree::from_newick("(1.0,2.0").is_err());
        let bad = serde_json::json!({"": 0.0, "2": 1.0});
        assert!(MarkedTree::from_json(&bad).is_err());
        let bad = serde_json::json!({"": 0.0, "1.1": 1.0});
        assert!(MarkedTree::from_json(&bad).is_err());
    }

    #[test]
    fn mrca_labels() {
        let l = MarkedTree::leaf;
        let t = concat(vec![concat(vec![l(3.0), l(4.0)], 2.0), l(5.0)], 1.0);
        assert_eq!(t.mrca_label(0, 1), Some(2.0));
        assert_eq!(t.mrca_label(0, 2), Some(1.0));
        assert_eq!(t.mrca_label(2, 2), Some(5.0));
    }
}
