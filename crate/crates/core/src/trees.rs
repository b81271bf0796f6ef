//! b-ary mistake trees in explicit (materialized) and implicit
//! (path-addressed, lazily generated) forms, chains and their types, and the
//! sample/tree compatibility machinery.
//!
//! Vertices are addressed by their root path string over `{0..b-1}`; the
//! implicit form uses the path itself as the domain point, which guarantees
//! distinct points per vertex and lets the reductions run at depths like
//! 2^10 without materializing the tree. Explicit trees carry domain points at
//! internal vertices (repetition allowed) and distinct labels on the
//! outgoing edges of each vertex.

use crate::concepts::{ConceptClass, Label};
use crate::error::{Error, Result};
use crate::rng;
use serde::{Deserialize, Serialize};

/// Root path string of a vertex; the empty path is the root.
pub type Vertex = Vec<u8>;

/// `a < b` in the ancestor partial order.
pub fn is_proper_ancestor(a: &[u8], b: &[u8]) -> bool {
    a.len() < b.len() && b[..a.len()] == *a
}

pub fn comparable(a: &[u8], b: &[u8]) -> bool {
    let k = a.len().min(b.len());
    a[..k] == b[..k]
}

/// Shape-only tree: arity and depth, vertices addressed by path strings.
/// Never materialized beyond the vertices a caller visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImplicitTree {
    arity: usize,
    depth: u64,
}

/// Branch sampling materializes one turn per level; cap the depth so a
/// misconfigured run cannot allocate unbounded memory.
pub const MAX_SAMPLED_BRANCH_DEPTH: u64 = 1 << 26;

impl ImplicitTree {
    pub fn new(arity: usize, depth: u64) -> Result<Self> {
        if arity < 2 {
            return Err(Error::InvalidArgument("tree arity must be >= 2".into()));
        }
        if arity > u8::MAX as usize + 1 {
            return Err(Error::InvalidArgument("tree arity too large".into()));
        }
        Ok(ImplicitTree { arity, depth })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    pub fn contains(&self, v: &[u8]) -> bool {
        v.len() as u64 <= self.depth && v.iter().all(|t| (*t as usize) < self.arity)
    }

    pub fn is_internal(&self, v: &[u8]) -> bool {
        self.contains(v) && (v.len() as u64) < self.depth
    }
}

/// Type of a chain: the sequence of immediate child-index turns between
/// consecutive vertices.
pub type ChainType = Vec<u8>;

/// Turn sequence of a chain of vertices. Errors if the vertices are not
/// strictly ordered under the ancestor order or leave the tree.
pub fn chain_type(tree: &ImplicitTree, chain: &[Vertex]) -> Result<ChainType> {
    for v in chain {
        if !tree.contains(v) {
            return Err(Error::Chain(format!("vertex {v:?} outside the tree")));
        }
    }
    let mut turns = Vec::with_capacity(chain.len().saturating_sub(1));
    for w in chain.windows(2) {
        if !is_proper_ancestor(&w[0], &w[1]) {
            return Err(Error::Chain(format!(
                "vertices {:?} and {:?} are not strictly comparable",
                w[0], w[1]
            )));
        }
        turns.push(w[1][w[0].len()]);
    }
    Ok(turns)
}

/// A root-to-leaf path: the turn taken at every depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    turns: Vec<u8>,
}

impl Branch {
    pub fn new(turns: Vec<u8>) -> Self {
        Branch { turns }
    }

    pub fn depth(&self) -> u64 {
        self.turns.len() as u64
    }

    /// Vertex of the branch at a given depth (its path prefix).
    pub fn vertex(&self, depth: u64) -> Vertex {
        self.turns[..depth as usize].to_vec()
    }

    /// Edge label the branch takes at its depth-`d` vertex.
    pub fn turn(&self, depth: u64) -> u8 {
        self.turns[depth as usize]
    }

    pub fn turns(&self) -> &[u8] {
        &self.turns
    }

    pub fn contains(&self, v: &[u8]) -> bool {
        v.len() <= self.turns.len() && v == &self.turns[..v.len()]
    }
}

/// Uniform branch, drawn one level at a time from counter-addressed draws:
/// the turn at depth `j` depends only on `(seed, j)`, so the branch below any
/// depth is independent of the prefix above it.
pub fn sample_branch(tree: &ImplicitTree, seed: u64) -> Result<Branch> {
    if tree.depth() > MAX_SAMPLED_BRANCH_DEPTH {
        return Err(Error::Budget {
            what: format!("sampling a branch of depth {}", tree.depth()),
            limit: MAX_SAMPLED_BRANCH_DEPTH,
            certified_lower_bound: None,
        });
    }
    let turns = (0..tree.depth())
        .map(|j| rng::indexed_uniform(seed, "branch-turn", &[j], tree.arity() as u64) as u8)
        .collect();
    Ok(Branch::new(turns))
}

/// Sample whose points are tree vertices on a common branch, ordered by
/// depth; the label of each vertex is the turn the branch takes there, so
/// the sample is realizable by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeSample {
    entries: Vec<(Vertex, u8)>,
}

impl TreeSample {
    /// Validates T-realizability: vertices form a chain, every vertex is
    /// internal, and each label points at the next vertex in the chain.
    pub fn new(tree: &ImplicitTree, entries: Vec<(Vertex, u8)>) -> Result<Self> {
        for (v, y) in &entries {
            if !tree.is_internal(v) {
                return Err(Error::Compatibility(format!(
                    "sample vertex {v:?} is not an internal vertex"
                )));
            }
            if *y as usize >= tree.arity() {
                return Err(Error::DomainMismatch(format!("label {y} out of range")));
            }
        }
        for w in entries.windows(2) {
            let (prev, y) = (&w[0].0, w[0].1);
            let next = &w[1].0;
            if !is_proper_ancestor(prev, next) {
                return Err(Error::Chain("sample vertices do not form a chain".into()));
            }
            if next[prev.len()] != y {
                return Err(Error::Realizability(format!(
                    "label {y} at {prev:?} does not point toward {next:?}"
                )));
            }
        }
        Ok(TreeSample { entries })
    }

    pub fn empty() -> Self {
        TreeSample { entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Vertex, u8)] {
        &self.entries
    }

    /// The path prefix every realizing branch must follow: down to the last
    /// sample vertex and through its labeled edge.
    pub fn committed_prefix(&self) -> Vertex {
        match self.entries.last() {
            None => Vec::new(),
            Some((v, y)) => {
                let mut p = v.clone();
                p.push(*y);
                p
            }
        }
    }

    /// True iff some branch realizes the sample and passes through `x`.
    pub fn compatible(&self, tree: &ImplicitTree, x: &[u8]) -> bool {
        tree.contains(x) && comparable(x, &self.committed_prefix())
    }
}

/// `max { i : x_i < x }`, with 0 when `x` precedes the whole sample.
pub fn loc(tree: &ImplicitTree, sample: &TreeSample, x: &[u8]) -> Result<usize> {
    if !sample.compatible(tree, x) {
        return Err(Error::Compatibility(format!(
            "vertex {x:?} shares no realizing branch with the sample"
        )));
    }
    Ok(sample
        .entries()
        .iter()
        .take_while(|(v, _)| is_proper_ancestor(v, x))
        .count())
}

/// `S^{+x}`: extends the sample with `x` and the label that keeps it
/// realizable. Above the last sample point the label is forced; below it,
/// every label works and the smallest one is chosen.
pub fn extend_sample(tree: &ImplicitTree, sample: &TreeSample, x: &[u8]) -> Result<TreeSample> {
    if !sample.compatible(tree, x) {
        return Err(Error::Compatibility(format!(
            "vertex {x:?} shares no realizing branch with the sample"
        )));
    }
    if !tree.is_internal(x) {
        return Err(Error::Compatibility(format!(
            "vertex {x:?} is a leaf and cannot carry a label"
        )));
    }
    if sample.entries().iter().any(|(v, _)| v == x) {
        return Err(Error::InvalidArgument(format!("vertex {x:?} already in the sample")));
    }
    let committed = sample.committed_prefix();
    let y = if x.len() < committed.len() { committed[x.len()] } else { 0 };
    let mut entries = sample.entries().to_vec();
    let pos = entries.partition_point(|(v, _)| v.len() < x.len());
    entries.insert(pos, (x.to_vec(), y));
    TreeSample::new(tree, entries)
}

/// Materialized complete b-ary mistake tree. Internal vertices carry domain
/// points (repetition across vertices allowed) and `b` distinct labels on
/// their outgoing edges, listed in child order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitTree {
    arity: usize,
    depth: usize,
    root: TreeNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeNode {
    Leaf,
    Internal {
        point: usize,
        edge_labels: Vec<Label>,
        children: Vec<TreeNode>,
    },
}

impl TreeNode {
    fn depth(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf => Some(0),
            TreeNode::Internal { children, .. } => {
                let mut depth = None;
                for c in children {
                    let d = c.depth()?;
                    match depth {
                        None => depth = Some(d),
                        Some(prev) if prev != d => return None,
                        _ => {}
                    }
                }
                depth.map(|d| d + 1)
            }
        }
    }

    fn validate(&self, arity: usize) -> Result<()> {
        if let TreeNode::Internal { edge_labels, children, .. } = self {
            if children.len() != arity {
                return Err(Error::InvalidArgument(format!(
                    "internal vertex has {} children, expected {arity}",
                    children.len()
                )));
            }
            if edge_labels.len() != arity {
                return Err(Error::InvalidArgument("one edge label per child required".into()));
            }
            let mut seen = edge_labels.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != arity {
                return Err(Error::InvalidArgument(
                    "edge labels at a vertex must be distinct".into(),
                ));
            }
            for c in children {
                c.validate(arity)?;
            }
        }
        Ok(())
    }
}

impl ExplicitTree {
    pub fn new(arity: usize, root: TreeNode) -> Result<Self> {
        if arity < 2 {
            return Err(Error::InvalidArgument("tree arity must be >= 2".into()));
        }
        root.validate(arity)?;
        let depth = root
            .depth()
            .ok_or_else(|| Error::InvalidArgument("tree is not complete".into()))?;
        Ok(ExplicitTree { arity, depth, root })
    }

    /// Complete tree of the given depth with canonical edge labels `0..b-1`
    /// and points assigned per vertex path.
    pub fn canonical(
        arity: usize,
        depth: usize,
        point_of: &mut dyn FnMut(&[u8]) -> usize,
    ) -> Result<Self> {
        fn build(
            arity: usize,
            depth: usize,
            path: &mut Vertex,
            point_of: &mut dyn FnMut(&[u8]) -> usize,
        ) -> TreeNode {
            if depth == 0 {
                return TreeNode::Leaf;
            }
            let point = point_of(path);
            let children = (0..arity)
                .map(|i| {
                    path.push(i as u8);
                    let c = build(arity, depth - 1, path, point_of);
                    path.pop();
                    c
                })
                .collect();
            TreeNode::Internal {
                point,
                edge_labels: (0..arity as Label).collect(),
                children,
            }
        }
        let mut path = Vec::new();
        ExplicitTree::new(arity, build(arity, depth, &mut path, point_of))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn shape(&self) -> ImplicitTree {
        ImplicitTree::new(self.arity, self.depth as u64).expect("valid shape")
    }

    pub fn node(&self, path: &[u8]) -> Option<&TreeNode> {
        let mut cur = &self.root;
        for &t in path {
            match cur {
                TreeNode::Internal { children, .. } => cur = children.get(t as usize)?,
                TreeNode::Leaf => return None,
            }
        }
        Some(cur)
    }

    /// All vertex paths, root first, children in order.
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut out = Vec::new();
        let mut stack = vec![Vec::new()];
        while let Some(path) = stack.pop() {
            if let Some(TreeNode::Internal { .. }) = self.node(&path) {
                for i in (0..self.arity).rev() {
                    let mut p = path.clone();
                    p.push(i as u8);
                    stack.push(p);
                }
            }
            out.push(path);
        }
        out
    }

    /// The labeled examples along a root-to-leaf path given by its turns.
    pub fn path_examples(&self, turns: &[u8]) -> Vec<(usize, Label)> {
        let mut out = Vec::with_capacity(turns.len());
        let mut cur = &self.root;
        for &t in turns {
            match cur {
                TreeNode::Internal { point, edge_labels, children } => {
                    out.push((*point, edge_labels[t as usize]));
                    cur = &children[t as usize];
                }
                TreeNode::Leaf => panic!("path longer than tree depth"),
            }
        }
        out
    }
}

/// Shattering: every root-to-leaf path is realizable by some concept.
/// Narrows the candidate concept set while descending, so unrealizable
/// prefixes cut the whole subtree.
pub fn is_shattered(tree: &ExplicitTree, class: &ConceptClass) -> Result<bool> {
    fn descend(node: &TreeNode, class: &ConceptClass, alive: &[usize]) -> Result<bool> {
        match node {
            TreeNode::Leaf => Ok(true),
            TreeNode::Internal { point, edge_labels, children } => {
                if !class.domain().contains(*point) {
                    return Err(Error::DomainMismatch(format!(
                        "tree point {point} outside class domain"
                    )));
                }
                for (label, child) in edge_labels.iter().zip(children) {
                    if !class.labels().contains(*label) {
                        return Err(Error::DomainMismatch(format!(
                            "edge label {label} outside class label space"
                        )));
                    }
                    let next: Vec<usize> = alive
                        .iter()
                        .copied()
                        .filter(|&i| class.concepts()[i].value(*point) == *label)
                        .collect();
                    if next.is_empty() {
                        return Ok(false);
                    }
                    if !descend(child, class, &next)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
    let alive: Vec<usize> = (0..class.len()).collect();
    descend(&tree.root, class, &alive)
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeFile {
    Leaf(String),
    Internal { point: usize, edges: Vec<Label>, children: Vec<NodeFile> },
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    arity: usize,
    root: NodeFile,
}

fn node_to_file(node: &TreeNode) -> NodeFile {
    match node {
        TreeNode::Leaf => NodeFile::Leaf("leaf".into()),
        TreeNode::Internal { point, edge_labels, children } => NodeFile::Internal {
            point: *point,
            edges: edge_labels.clone(),
            children: children.iter().map(node_to_file).collect(),
        },
    }
}

fn node_from_file(node: NodeFile) -> Result<TreeNode> {
    match node {
        NodeFile::Leaf(tag) if tag == "leaf" => Ok(TreeNode::Leaf),
        NodeFile::Leaf(tag) => Err(Error::InvalidArgument(format!(
            "unknown leaf marker {tag:?}, expected \"leaf\""
        ))),
        NodeFile::Internal { point, edges, children } => Ok(TreeNode::Internal {
            point,
            edge_labels: edges,
            children: children.into_iter().map(node_from_file).collect::<Result<_>>()?,
        }),
    }
}

pub fn tree_to_string(tree: &ExplicitTree) -> String {
    let file = TreeFile { arity: tree.arity(), root: node_to_file(&tree.root) };
    let mut s = serde_json::to_string_pretty(&file).expect("tree serialization");
    s.push('\n');
    s
}

pub fn tree_from_str(text: &str) -> Result<ExplicitTree> {
    let file: TreeFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        col: e.column(),
        msg: e.to_string(),
    })?;
    ExplicitTree::new(file.arity, node_from_file(file.root)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{gen_full_class, gen_monotone_class};

    fn t3(depth: u64) -> ImplicitTree {
        ImplicitTree::new(3, depth).unwrap()
    }

    #[test]
    fn chain_types_from_path_strings() {
        let tree = t3(8);
        // the chains of the worked figure: {root, 0, 02} and {1, 100, 1002}
        let c1 = vec![vec![], vec![0], vec![0, 2]];
        let c2 = vec![vec![1], vec![1, 0, 0], vec![1, 0, 0, 2]];
        assert_eq!(chain_type(&tree, &c1).unwrap(), vec![0, 2]);
        assert_eq!(chain_type(&tree, &c2).unwrap(), vec![0, 2]);

        let singleton = vec![vec![2, 1]];
        assert_eq!(chain_type(&tree, &singleton).unwrap(), Vec::<u8>::new());

        let incomparable = vec![vec![0], vec![1, 0]];
        assert!(matches!(chain_type(&tree, &incomparable), Err(Error::Chain(_))));
    }

    #[test]
    fn chain_type_invariant_under_embedding_shift() {
        // any chain keeps its type when re-rooted below a common prefix
        let tree = t3(10);
        let chain = vec![vec![0], vec![0, 2], vec![0, 2, 1, 1]];
        let ty = chain_type(&tree, &chain).unwrap();
        let prefix = [2u8, 0];
        let shifted: Vec<Vertex> = chain
            .iter()
            .map(|v| prefix.iter().chain(v.iter()).copied().collect())
            .collect();
        assert_eq!(chain_type(&tree, &shifted).unwrap(), ty);
    }

    #[test]
    fn arity_one_rejected() {
        assert!(ImplicitTree::new(1, 4).is_err());
        assert!(ExplicitTree::new(1, TreeNode::Leaf).is_err());
    }

    #[test]
    fn branch_sampling_is_deterministic_and_uniformish() {
        let tree = t3(6);
        let b1 = sample_branch(&tree, 99).unwrap();
        let b2 = sample_branch(&tree, 99).unwrap();
        assert_eq!(b1, b2);

        // per-level frequencies of each turn over many seeds: within 3 sigma
        let draws = 10_000u64;
        for level in 0..6 {
            let mut counts = [0i64; 3];
            for seed in 0..draws {
                let b = sample_branch(&tree, seed).unwrap();
                counts[b.turn(level) as usize] += 1;
            }
            let expected = draws as f64 / 3.0;
            let sigma = (draws as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
            for c in counts {
                assert!(
                    (c as f64 - expected).abs() <= 3.0 * sigma,
                    "level {level} counts {counts:?}"
                );
            }
        }
    }

    #[test]
    fn sample_location_and_extension() {
        let tree = t3(12);
        let s = TreeSample::new(
            &tree,
            vec![(vec![0], 2), (vec![0, 2, 1], 0), (vec![0, 2, 1, 0, 1], 1)],
        )
        .unwrap();

        assert_eq!(loc(&tree, &s, &[]).unwrap(), 0);
        assert_eq!(loc(&tree, &s, &[0, 2]).unwrap(), 1);
        assert_eq!(loc(&tree, &s, &[0, 2, 1, 0]).unwrap(), 2);
        assert_eq!(loc(&tree, &s, &[0, 2, 1, 0, 1, 1, 1]).unwrap(), 3);
        assert!(loc(&tree, &s, &[1]).is_err());

        // strictly-between extension: the label is forced by the chain
        let e = extend_sample(&tree, &s, &[0, 2]).unwrap();
        assert_eq!(e.entries()[1], (vec![0, 2], 1));
        // below the last point: smallest label is chosen
        let e = extend_sample(&tree, &s, &[0, 2, 1, 0, 1, 1, 2]).unwrap();
        assert_eq!(*e.entries().last().unwrap(), (vec![0, 2, 1, 0, 1, 1, 2], 0));
        // removing the added example recovers the original
        let mut back = e.entries().to_vec();
        back.pop();
        assert_eq!(TreeSample::new(&tree, back).unwrap(), s);

        assert!(matches!(
            extend_sample(&tree, &s, &[0, 2, 1]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            extend_sample(&tree, &s, &[1, 1]),
            Err(Error::Compatibility(_))
        ));
    }

    #[test]
    fn equal_type_chains_on_one_branch_have_equal_labels() {
        let tree = t3(12);
        let branch = sample_branch(&tree, 7).unwrap();
        // two chains of equal relative spacing along the same branch
        let mk = |depths: &[u64]| -> TreeSample {
            let entries = depths
                .iter()
                .map(|&d| (branch.vertex(d), branch.turn(d)))
                .collect();
            TreeSample::new(&tree, entries).unwrap()
        };
        let a = mk(&[1, 3, 6]);
        let b = mk(&[2, 4, 7]);
        let ty_a: Vec<u8> = a.entries().iter().map(|(_, y)| *y).collect();
        let ty_b: Vec<u8> = b.entries().iter().map(|(_, y)| *y).collect();
        // equal types iff the branch turns agree at those depths; check the
        // invariant that label sequences are exactly the chain types
        let shape_a = chain_type(&tree, &a.entries().iter().map(|(v, _)| v.clone()).collect::<Vec<_>>());
        assert_eq!(shape_a.unwrap(), ty_a[..2].to_vec());
        let shape_b = chain_type(&tree, &b.entries().iter().map(|(v, _)| v.clone()).collect::<Vec<_>>());
        assert_eq!(shape_b.unwrap(), ty_b[..2].to_vec());
    }

    #[test]
    fn shattering_small_cases() {
        // depth-0 tree: trivially shattered by any nonempty class
        let class = gen_monotone_class(3, 3, 1000).unwrap();
        let depth0 = ExplicitTree::new(3, TreeNode::Leaf).unwrap();
        assert!(is_shattered(&depth0, &class).unwrap());

        // depth-1 (k+1)-ary tree on any point: monotone classes realize all
        // constants, so the tree is shattered
        for x in 0..3 {
            let depth1 = ExplicitTree::canonical(3, 1, &mut |_| x).unwrap();
            assert!(is_shattered(&depth1, &class).unwrap());
        }

        // a class missing one label at a point fails
        let two_labels = gen_full_class(2, 2, 1000).unwrap();
        let depth1 = ExplicitTree::canonical(2, 1, &mut |_| 1).unwrap();
        assert!(is_shattered(&depth1, &two_labels).unwrap());
        let err = is_shattered(
            &ExplicitTree::canonical(3, 1, &mut |_| 0).unwrap(),
            &two_labels,
        );
        assert!(matches!(err, Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn tree_text_round_trip() {
        let tree = ExplicitTree::canonical(2, 3, &mut |p| p.len()).unwrap();
        let text = tree_to_string(&tree);
        assert_eq!(tree_from_str(&text).unwrap(), tree);

        let bad = "{\"arity\": 2,\n \"root\": {\"point\": 0}\n}";
        assert!(matches!(tree_from_str(bad), Err(Error::Parse { .. })));
    }
}
