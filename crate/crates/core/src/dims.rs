//! Exact k-Littlestone and k-monotone dimension computation, with
//! independent brute-force oracles for cross-checking.
//!
//! The fast path computes the Littlestone dimension by the standard version
//! space recursion: the dimension is at least d+1 iff some point and k+1
//! distinct labels restrict the class into k+1 subclasses of dimension at
//! least d. That recursion is equivalent to the shattered-tree definition
//! (a shattered tree of depth d+1 yields the point/labels at its root and
//! conversely), and the equivalence is exercised against the
//! tree-enumeration oracle in the tests. Restrictions recur heavily, so the
//! recursion is memoized on canonicalized concept-index subsets.
//!
//! Search order is deterministic everywhere: points ascending, label tuples
//! lexicographic, first witness returned.

use crate::concepts::{ConceptClass, Label};
use crate::error::{Error, Result};
use crate::trees::{is_shattered, ExplicitTree, TreeNode};
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, Copy)]
pub struct SearchBudget {
    pub max_nodes: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_nodes: 20_000_000 }
    }
}

/// Dimension value plus a re-verifiable witness. `witness` is absent only
/// for the degenerate value 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DimResult {
    pub value: usize,
    pub witness: Option<DimWitness>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DimWitness {
    /// A shattered complete (k+1)-ary mistake tree of depth `value`.
    Tree(ExplicitTree),
    /// Points `x_1 < ... < x_d`, and the witnessing label set `K` listed in
    /// the witnessing order.
    Monotone { points: Vec<usize>, ordered_labels: Vec<Label> },
}

/// Re-verifies a witness against the class it was computed from.
pub fn verify_witness(class: &ConceptClass, k: usize, result: &DimResult) -> Result<bool> {
    match &result.witness {
        None => Ok(result.value == 0),
        Some(DimWitness::Tree(tree)) => Ok(tree.arity() == k + 1
            && tree.depth() == result.value
            && is_shattered(tree, class)?),
        Some(DimWitness::Monotone { points, ordered_labels }) => {
            if ordered_labels.len() != k + 1 || points.len() != result.value {
                return Ok(false);
            }
            Ok(contains_all_monotone_patterns(class, points, ordered_labels))
        }
    }
}

fn log_floor(base: usize, mut x: usize) -> usize {
    let mut d = 0;
    while x >= base {
        x /= base;
        d += 1;
    }
    d
}

/// Memoized version-space recursion for the Littlestone dimension. The memo
/// is keyed by concept-index subsets, so an evaluator must only ever be used
/// with the class and list size it was created for; the SOA learner keeps
/// one alive across its prediction steps, where restrictions recur heavily.
pub struct LittlestoneEvaluator {
    k: usize,
    nodes: u64,
    limit: u64,
    root_best: usize,
    memo: HashMap<Vec<u32>, (usize, Option<(usize, Vec<Label>)>)>,
}

impl LittlestoneEvaluator {
    pub fn new(k: usize, budget: SearchBudget) -> Self {
        LittlestoneEvaluator {
            k,
            nodes: 0,
            limit: budget.max_nodes,
            root_best: 0,
            memo: HashMap::new(),
        }
    }

    /// Littlestone dimension of the subclass given by concept indices.
    pub fn dim_of_subset(&mut self, class: &ConceptClass, subset: Vec<u32>) -> Result<usize> {
        if self.k == 0 || self.k + 1 > class.labels().count() {
            return Err(Error::InvalidArgument("need 1 <= k and k+1 <= label count".into()));
        }
        LdSearch { class, k: self.k, state: self }.dim(subset, false)
    }
}

struct LdSearch<'a> {
    class: &'a ConceptClass,
    k: usize,
    state: &'a mut LittlestoneEvaluator,
}

impl<'a> LdSearch<'a> {
    fn budget_error(&self) -> Error {
        Error::Budget {
            what: "littlestone_dim search nodes".into(),
            limit: self.state.limit,
            certified_lower_bound: Some(self.state.root_best as u64),
        }
    }

    fn dim(&mut self, subset: Vec<u32>, is_root: bool) -> Result<usize> {
        if let Some((v, _)) = self.state.memo.get(&subset) {
            return Ok(*v);
        }
        self.state.nodes += 1;
        if self.state.nodes > self.state.limit {
            return Err(self.budget_error());
        }

        let b = self.k + 1;
        let cap = log_floor(b, subset.len());
        let n = self.class.domain().size();
        let mut best = 0usize;
        let mut winner: Option<(usize, Vec<Label>)> = None;

        'points: for x in 0..n {
            if best == cap {
                break;
            }
            let mut by_label: HashMap<Label, Vec<u32>> = HashMap::new();
            for &ci in &subset {
                by_label
                    .entry(self.class.concepts()[ci as usize].value(x))
                    .or_default()
                    .push(ci);
            }
            if by_label.len() < b {
                continue;
            }
            let mut present: Vec<Label> = by_label.keys().copied().collect();
            present.sort_unstable();

            for combo in combinations(&present, b) {
                let mut min_child = usize::MAX;
                for &y in &combo {
                    let child = by_label[&y].clone();
                    let d = self.dim(child, false)?;
                    min_child = min_child.min(d);
                    if min_child < best {
                        break;
                    }
                }
                if min_child != usize::MAX && min_child + 1 > best {
                    best = min_child + 1;
                    winner = Some((x, combo));
                    if is_root {
                        self.state.root_best = self.state.root_best.max(best);
                    }
                    if best == cap {
                        continue 'points;
                    }
                }
            }
        }

        self.state.memo.insert(subset, (best, winner));
        Ok(best)
    }

    fn build_witness(&self, subset: &[u32], depth: usize) -> TreeNode {
        if depth == 0 {
            return TreeNode::Leaf;
        }
        let (_, winner) = &self.state.memo[subset];
        let (x, labels) = winner.as_ref().expect("positive dimension has a winner");
        let children = labels
            .iter()
            .map(|&y| {
                let child: Vec<u32> = subset
                    .iter()
                    .copied()
                    .filter(|&ci| self.class.concepts()[ci as usize].value(*x) == y)
                    .collect();
                self.build_witness(&child, depth - 1)
            })
            .collect();
        TreeNode::Internal { point: *x, edge_labels: labels.clone(), children }
    }
}

/// Maximum depth of a complete (k+1)-ary mistake tree shattered by the
/// class, with a shattered witness tree.
pub fn littlestone_dim(class: &ConceptClass, k: usize, budget: SearchBudget) -> Result<DimResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("list size k must be >= 1".into()));
    }
    if k + 1 > class.labels().count() {
        return Err(Error::InvalidArgument(format!(
            "k+1 = {} exceeds label count {}",
            k + 1,
            class.labels().count()
        )));
    }
    let mut eval = LittlestoneEvaluator::new(k, budget);
    let all: Vec<u32> = (0..class.len() as u32).collect();
    let value = LdSearch { class, k, state: &mut eval }.dim(all.clone(), true)?;
    let witness = if value == 0 {
        None
    } else {
        let node = LdSearch { class, k, state: &mut eval }.build_witness(&all, value);
        Some(DimWitness::Tree(ExplicitTree::new(k + 1, node)?))
    };
    Ok(DimResult { value, witness })
}

/// True iff the class restricted to `points` contains every weakly
/// monotone pattern over the ordered label list.
fn contains_all_monotone_patterns(
    class: &ConceptClass,
    points: &[usize],
    ordered_labels: &[Label],
) -> bool {
    let d = points.len();
    let b = ordered_labels.len();
    let pos: HashMap<Label, u8> = ordered_labels
        .iter()
        .enumerate()
        .map(|(i, &y)| (y, i as u8))
        .collect();
    let mut realized: HashSet<Vec<u8>> = HashSet::new();
    'concepts: for c in class.concepts() {
        let mut profile = Vec::with_capacity(d);
        for &x in points {
            match pos.get(&c.value(x)) {
                Some(&p) => profile.push(p),
                None => continue 'concepts,
            }
        }
        realized.insert(profile);
    }
    // enumerate weakly increasing position patterns
    let mut pattern = vec![0u8; d];
    loop {
        if !realized.contains(&pattern) {
            return false;
        }
        let mut i = d;
        loop {
            if i == 0 {
                return true;
            }
            i -= 1;
            if (pattern[i] as usize) < b - 1 {
                let v = pattern[i] + 1;
                for slot in pattern.iter_mut().skip(i) {
                    *slot = v;
                }
                break;
            }
        }
    }
}

fn combinations<T: Copy>(items: &[T], size: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    if size > items.len() {
        return out;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut i = size;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < items.len() - (size - i) {
                idx[i] += 1;
                for j in i + 1..size {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn permutations<T: Copy>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let rest: Vec<T> = items
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, &t)| t)
            .collect();
        for mut tail in permutations(&rest) {
            let mut p = vec![head];
            p.append(&mut tail);
            out.push(p);
        }
    }
    out
}

/// Largest `d` admitting points `x_1 < ... < x_d`, a label subset `K` of
/// size k+1, and an ordering of `K` such that the restriction contains all
/// K-labeled monotone patterns. Qualifying point sets are closed under
/// taking subsets, so the search grows them levelwise.
pub fn monotone_dim(class: &ConceptClass, k: usize, budget: SearchBudget) -> Result<DimResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("list size k must be >= 1".into()));
    }
    if k + 1 > class.labels().count() {
        return Err(Error::InvalidArgument(format!(
            "k+1 = {} exceeds label count {}",
            k + 1,
            class.labels().count()
        )));
    }
    let n = class.domain().size();
    let all_labels: Vec<Label> = (0..class.labels().count() as Label).collect();
    let mut checks: u64 = 0;
    let mut best = 0usize;
    let mut witness: Option<DimWitness> = None;

    for key in combinations(&all_labels, k + 1) {
        for ordering in permutations(&key) {
            let mut level: Vec<Vec<usize>> = Vec::new();
            for x in 0..n {
                checks += 1;
                if checks > budget.max_nodes {
                    return Err(Error::Budget {
                        what: "monotone_dim pattern checks".into(),
                        limit: budget.max_nodes,
                        certified_lower_bound: Some(best as u64),
                    });
                }
                if contains_all_monotone_patterns(class, &[x], &ordering) {
                    level.push(vec![x]);
                }
            }
            let mut d = 1usize;
            while !level.is_empty() {
                if d > best {
                    best = d;
                    witness = Some(DimWitness::Monotone {
                        points: level[0].clone(),
                        ordered_labels: ordering.clone(),
                    });
                }
                let mut next = Vec::new();
                for set in &level {
                    let last = *set.last().expect("nonempty set");
                    for x in last + 1..n {
                        checks += 1;
                        if checks > budget.max_nodes {
                            return Err(Error::Budget {
                                what: "monotone_dim pattern checks".into(),
                                limit: budget.max_nodes,
                                certified_lower_bound: Some(best as u64),
                            });
                        }
                        let mut bigger = set.clone();
                        bigger.push(x);
                        if contains_all_monotone_patterns(class, &bigger, &ordering) {
                            next.push(bigger);
                        }
                    }
                }
                level = next;
                d += 1;
            }
        }
    }
    Ok(DimResult { value: best, witness })
}

/// Ground-truth Littlestone dimension by exhaustive enumeration of explicit
/// mistake trees, capped at `max_depth`. Explores (point, label-set)
/// assignments vertex by vertex, pruning on path realizability checked
/// directly against the concept table; no version spaces, no memoization.
/// Children of a vertex can be listed in label-ascending order without loss:
/// permuting a vertex's subtrees together with its edge labels permutes
/// root-to-leaf paths bijectively.
pub fn littlestone_dim_oracle(
    class: &ConceptClass,
    k: usize,
    max_depth: usize,
    budget: SearchBudget,
) -> Result<DimResult> {
    if k == 0 || k + 1 > class.labels().count() {
        return Err(Error::InvalidArgument("need 1 <= k and k+1 <= label count".into()));
    }
    let b = k + 1;
    let all_labels: Vec<Label> = (0..class.labels().count() as Label).collect();
    let label_sets = combinations(&all_labels, b);
    let mut nodes: u64 = 0;

    fn search(
        class: &ConceptClass,
        b: usize,
        label_sets: &[Vec<Label>],
        prefix: &mut Vec<(usize, Label)>,
        depth: usize,
        nodes: &mut u64,
        limit: u64,
        best_so_far: usize,
    ) -> Result<Option<TreeNode>> {
        if depth == 0 {
            return Ok(Some(TreeNode::Leaf));
        }
        for x in 0..class.domain().size() {
            for labels in label_sets {
                *nodes += 1;
                if *nodes > limit {
                    return Err(Error::Budget {
                        what: "littlestone_dim_oracle tree enumeration".into(),
                        limit,
                        certified_lower_bound: Some(best_so_far as u64),
                    });
                }
                let mut children = Vec::with_capacity(b);
                let mut ok = true;
                for &y in labels {
                    prefix.push((x, y));
                    let realizable = class.realizes(
                        &prefix
                            .iter()
                            .map(|&(p, l)| crate::concepts::LabeledExample { point: p, label: l })
                            .collect::<Vec<_>>(),
                    );
                    let child = if realizable {
                        search(class, b, label_sets, prefix, depth - 1, nodes, limit, best_so_far)?
                    } else {
                        None
                    };
                    prefix.pop();
                    match child {
                        Some(c) => children.push(c),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    return Ok(Some(TreeNode::Internal {
                        point: x,
                        edge_labels: labels.clone(),
                        children,
                    }));
                }
            }
        }
        Ok(None)
    }

    let mut best = DimResult { value: 0, witness: None };
    for d in 1..=max_depth {
        let mut prefix = Vec::new();
        match search(class, b, &label_sets, &mut prefix, d, &mut nodes, budget.max_nodes, best.value)? {
            Some(node) => {
                let tree = ExplicitTree::new(b, node)?;
                debug_assert!(is_shattered(&tree, class)?);
                best = DimResult { value: d, witness: Some(DimWitness::Tree(tree)) };
            }
            // a deeper shattered tree truncates to a shallower one, so the
            // first missing depth ends the search
            None => break,
        }
    }
    Ok(best)
}

/// Ground-truth monotone dimension: plain enumeration over all point
/// tuples, label subsets, and orderings, capped at `max_d`.
pub fn monotone_dim_oracle(
    class: &ConceptClass,
    k: usize,
    max_d: usize,
    budget: SearchBudget,
) -> Result<DimResult> {
    if k == 0 || k + 1 > class.labels().count() {
        return Err(Error::InvalidArgument("need 1 <= k and k+1 <= label count".into()));
    }
    let n = class.domain().size();
    let all_labels: Vec<Label> = (0..class.labels().count() as Label).collect();
    let all_points: Vec<usize> = (0..n).collect();
    let mut checks: u64 = 0;
    let mut best = DimResult { value: 0, witness: None };

    for d in 1..=max_d.min(n) {
        let mut found = None;
        'outer: for points in combinations(&all_points, d) {
            for key in combinations(&all_labels, k + 1) {
                for ordering in permutations(&key) {
                    checks += 1;
                    if checks > budget.max_nodes {
                        return Err(Error::Budget {
                            what: "monotone_dim_oracle checks".into(),
                            limit: budget.max_nodes,
                            certified_lower_bound: Some(best.value as u64),
                        });
                    }
                    if contains_all_monotone_patterns(class, &points, &ordering) {
                        found = Some(DimWitness::Monotone {
                            points: points.clone(),
                            ordered_labels: ordering,
                        });
                        break 'outer;
                    }
                }
            }
        }
        match found {
            Some(w) => best = DimResult { value: d, witness: Some(w) },
            None => break,
        }
    }
    Ok(best)
}

/// Counting bound used as the oracle's depth cap: each shattered level
/// multiplies the number of realizable paths by k+1.
pub fn littlestone_log_cap(class: &ConceptClass, k: usize) -> usize {
    log_floor(k + 1, class.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{
        gen_branch_class, gen_full_class, gen_monotone_class, Concept, ConceptClass, Domain,
        LabelSpace,
    };

    fn b(_: ()) -> SearchBudget {
        SearchBudget::default()
    }

    #[test]
    fn littlestone_singleton_is_zero() {
        let class = ConceptClass::new(
            Domain::new(3).unwrap(),
            LabelSpace::new(3).unwrap(),
            vec![Concept::new(vec![0, 1, 2])],
        )
        .unwrap();
        let r = littlestone_dim(&class, 2, b(())).unwrap();
        assert_eq!(r.value, 0);
        assert!(r.witness.is_none());
        assert!(verify_witness(&class, 2, &r).unwrap());
    }

    #[test]
    fn littlestone_of_monotone_class_is_one() {
        for (n, k) in [(2usize, 2usize), (4, 2), (5, 3)] {
            let class = gen_monotone_class(n, k + 1, 1_000_000).unwrap();
            let r = littlestone_dim(&class, k, b(())).unwrap();
            assert_eq!(r.value, 1, "n={n} k={k}");
            assert!(verify_witness(&class, k, &r).unwrap());
        }
        // the oracle's exhaustive depth-2 enumeration confirms no 3-ary
        // depth-2 tree over [6] is shattered by the 3-label monotone class
        let class = gen_monotone_class(6, 3, 1_000_000).unwrap();
        let o = littlestone_dim_oracle(&class, 2, 2, b(())).unwrap();
        assert_eq!(o.value, 1);
    }

    #[test]
    fn littlestone_of_branch_class_is_depth() {
        for depth in [1u32, 2] {
            let class = gen_branch_class(depth, 2, 1_000_000).unwrap();
            let r = littlestone_dim(&class, 2, b(())).unwrap();
            assert_eq!(r.value, depth as usize);
            assert!(verify_witness(&class, 2, &r).unwrap());
        }
    }

    #[test]
    fn littlestone_of_full_class() {
        let class = gen_full_class(3, 3, 1_000_000).unwrap();
        let r = littlestone_dim(&class, 2, b(())).unwrap();
        assert_eq!(r.value, 3);
        let o = littlestone_dim_oracle(&class, 2, 3, b(())).unwrap();
        assert_eq!(o.value, 3);
    }

    #[test]
    fn littlestone_parameter_errors() {
        let class = gen_full_class(2, 2, 1000).unwrap();
        assert!(matches!(
            littlestone_dim(&class, 2, b(())),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn budget_error_carries_lower_bound() {
        let class = gen_full_class(3, 3, 1_000_000).unwrap();
        let tiny = SearchBudget { max_nodes: 3 };
        match littlestone_dim(&class, 2, tiny) {
            Err(Error::Budget { certified_lower_bound: Some(_), .. }) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn monotone_dim_of_constant_class_is_one() {
        let concepts = (0..3).map(|y| Concept::new(vec![y; 4])).collect();
        let class = ConceptClass::new(
            Domain::new(4).unwrap(),
            LabelSpace::new(3).unwrap(),
            concepts,
        )
        .unwrap();
        let r = monotone_dim(&class, 2, b(())).unwrap();
        assert_eq!(r.value, 1);
        assert!(verify_witness(&class, 2, &r).unwrap());
    }

    #[test]
    fn monotone_dim_of_monotone_class_is_domain_size() {
        for (n, k) in [(2usize, 2usize), (4, 2), (3, 3)] {
            let class = gen_monotone_class(n, k + 1, 1_000_000).unwrap();
            let r = monotone_dim(&class, k, b(())).unwrap();
            assert_eq!(r.value, n, "n={n} k={k}");
            assert!(verify_witness(&class, k, &r).unwrap());
        }
    }

    #[test]
    fn monotone_dim_of_branch_class_is_one() {
        let class = gen_branch_class(2, 2, 1_000_000).unwrap();
        let r = monotone_dim(&class, 2, b(())).unwrap();
        assert_eq!(r.value, 1);
        let o = monotone_dim_oracle(&class, 2, 3, b(())).unwrap();
        assert_eq!(o.value, 1);
    }

    #[test]
    fn monotone_dim_zero_convention() {
        // label 2 missing at every point: no K of size 3 can even cover d=1
        let class = ConceptClass::new(
            Domain::new(2).unwrap(),
            LabelSpace::new(3).unwrap(),
            vec![Concept::new(vec![0, 0]), Concept::new(vec![1, 1]), Concept::new(vec![0, 1])],
        )
        .unwrap();
        let r = monotone_dim(&class, 2, b(())).unwrap();
        assert_eq!(r.value, 0);
        assert!(r.witness.is_none());
    }

    #[test]
    fn monotone_oracle_on_monotone_class() {
        let class = gen_monotone_class(4, 3, 1_000_000).unwrap();
        let o = monotone_dim_oracle(&class, 2, 4, b(())).unwrap();
        assert_eq!(o.value, 4);
    }

    fn random_class(seed: u64, n: usize, l: usize, size: usize) -> ConceptClass {
        use crate::rng;
        let mut concepts = Vec::new();
        for i in 0..size {
            let values = (0..n)
                .map(|p| {
                    rng::indexed_uniform(seed, "class", &[i as u64, p as u64], l as u64) as Label
                })
                .collect();
            concepts.push(Concept::new(values));
        }
        ConceptClass::new(Domain::new(n).unwrap(), LabelSpace::new(l).unwrap(), concepts).unwrap()
    }

    #[test]
    fn littlestone_matches_oracle_on_random_classes() {
        for seed in 0..60u64 {
            let n = 2 + (seed % 4) as usize;
            let l = 2 + (seed % 3) as usize;
            let k = 1 + (seed % 2) as usize;
            if k + 1 > l {
                continue;
            }
            let class = random_class(seed, n, l, 2 + (seed % 9) as usize);
            let fast = littlestone_dim(&class, k, b(())).unwrap();
            let cap = littlestone_log_cap(&class, k);
            let oracle = littlestone_dim_oracle(&class, k, cap, b(())).unwrap();
            assert_eq!(fast.value, oracle.value, "seed {seed}");
            assert!(verify_witness(&class, k, &fast).unwrap());
        }
    }

    #[test]
    fn monotone_matches_oracle_on_random_classes() {
        for seed in 0..60u64 {
            let n = 2 + (seed % 4) as usize;
            let l = 2 + (seed % 3) as usize;
            let k = 1 + (seed % 2) as usize;
            if k + 1 > l {
                continue;
            }
            let class = random_class(seed * 31 + 1, n, l, 2 + (seed % 9) as usize);
            let fast = monotone_dim(&class, k, b(())).unwrap();
            let oracle = monotone_dim_oracle(&class, k, n, b(())).unwrap();
            assert_eq!(fast.value, oracle.value, "seed {seed}");
            assert!(verify_witness(&class, k, &fast).unwrap());
        }
    }

    #[test]
    fn littlestone_log_bound_and_domain_permutation_invariance() {
        for seed in 0..20u64 {
            let class = random_class(seed * 7 + 3, 4, 3, 3 + (seed % 7) as usize);
            let r = littlestone_dim(&class, 2, b(())).unwrap();
            assert!(r.value <= log_floor(3, class.len()));

            // permute the domain: reverse point order
            let reversed: Vec<Concept> = class
                .concepts()
                .iter()
                .map(|c| {
                    let mut v = c.values().to_vec();
                    v.reverse();
                    Concept::new(v)
                })
                .collect();
            let rev = ConceptClass::new(class.domain(), class.labels(), reversed).unwrap();
            assert_eq!(littlestone_dim(&rev, 2, b(())).unwrap().value, r.value);
            // monotone dimension is invariant under domain reversal too
            assert_eq!(
                monotone_dim(&rev, 2, b(())).unwrap().value,
                monotone_dim(&class, 2, b(())).unwrap().value
            );
        }
    }

    #[test]
    fn monotone_dim_invariant_under_label_permutation() {
        for seed in 0..20u64 {
            let class = random_class(seed * 13 + 5, 3, 3, 3 + (seed % 6) as usize);
            let base = monotone_dim(&class, 2, b(())).unwrap().value;
            let perm: [Label; 3] = [2, 0, 1];
            let relabeled: Vec<Concept> = class
                .concepts()
                .iter()
                .map(|c| Concept::new(c.values().iter().map(|&y| perm[y as usize]).collect()))
                .collect();
            let rl = ConceptClass::new(class.domain(), class.labels(), relabeled).unwrap();
            assert_eq!(monotone_dim(&rl, 2, b(())).unwrap().value, base);
        }
    }

    /// Direct threshold-embedding search: largest d with points, concepts and
    /// a label pair y1 < y2 arranged as c_i(x_j) = y1 for i <= j, else y2.
    fn threshold_dim_brute(class: &ConceptClass) -> usize {
        let n = class.domain().size();
        let l = class.labels().count() as Label;
        let all_points: Vec<usize> = (0..n).collect();
        let mut best = 0;
        for d in 1..=n {
            let mut found = false;
            'search: for points in combinations(&all_points, d) {
                for y1 in 0..l {
                    for y2 in y1 + 1..l {
                        // concepts c_1..c_d with c_i(x_j) = y1 iff i <= j;
                        // the x_j sequence may run in either domain order
                        for reversed in [false, true] {
                            let ok = (1..=d).all(|i| {
                                class.concepts().iter().any(|c| {
                                    points.iter().enumerate().all(|(j0, &x)| {
                                        let j = if reversed { d - j0 } else { j0 + 1 };
                                        let want = if i <= j { y1 } else { y2 };
                                        c.value(x) == want
                                    })
                                })
                            });
                            if ok {
                                found = true;
                                break 'search;
                            }
                        }
                    }
                }
            }
            if found {
                best = d;
            } else {
                break;
            }
        }
        best
    }

    #[test]
    fn one_monotone_dim_tracks_threshold_dim() {
        // the 1-monotone dimension asks for all d+1 step patterns, a
        // threshold embedding for d of them; the two agree up to one
        for seed in 0..25u64 {
            let n = 2 + (seed % 5) as usize;
            let class = random_class(seed * 17 + 11, n, 2 + (seed % 3) as usize, 2 + (seed % 8) as usize);
            let md = monotone_dim(&class, 1, b(())).unwrap().value;
            let td = threshold_dim_brute(&class);
            assert!(md <= td && td <= md + 1, "seed {seed}: md {md} td {td}");
        }
        // and on the full monotone witness both are the whole domain
        let class = gen_monotone_class(4, 2, 1000).unwrap();
        assert_eq!(monotone_dim(&class, 1, b(())).unwrap().value, 4);
        assert_eq!(threshold_dim_brute(&class), 4);
    }
}
