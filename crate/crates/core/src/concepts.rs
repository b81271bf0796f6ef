//! Finite concept classes over an ordered domain, k-list hypotheses, the 0-1
//! list loss, and generators for the witness classes used throughout the
//! workbench.
//!
//! A concept class is an explicit, deduplicated table of functions from the
//! points `0..n-1` to the labels `0..l-1`. Class equality is set equality:
//! concepts are kept canonically sorted. All types are immutable after
//! construction and operations are pure.

use crate::error::{Error, Result};
use num::rational::Ratio;
use serde::{Deserialize, Serialize};

pub const DEFAULT_CONCEPT_BUDGET: u64 = 1_000_000;

pub type Label = u16;

/// Domain of points `0..size`, with their natural total order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domain {
    size: usize,
}

impl Domain {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("domain size must be >= 1".into()));
        }
        Ok(Domain { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, point: usize) -> bool {
        point < self.size
    }
}

/// Label space `0..count`, with the natural order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSpace {
    count: usize,
}

impl LabelSpace {
    pub fn new(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidArgument("label count must be >= 2".into()));
        }
        if count > Label::MAX as usize {
            return Err(Error::InvalidArgument("label count too large".into()));
        }
        Ok(LabelSpace { count })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn contains(&self, label: Label) -> bool {
        (label as usize) < self.count
    }
}

/// One function from the domain to the labels, stored densely.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Concept {
    values: Vec<Label>,
}

impl Concept {
    pub fn new(values: Vec<Label>) -> Self {
        Concept { values }
    }

    pub fn value(&self, point: usize) -> Label {
        self.values[point]
    }

    pub fn values(&self) -> &[Label] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledExample {
    pub point: usize,
    pub label: Label,
}

/// Ordered sequence of labeled examples. Sortedness and balancedness are
/// predicates on samples, not invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    examples: Vec<LabeledExample>,
}

impl Sample {
    pub fn new(examples: Vec<LabeledExample>) -> Self {
        Sample { examples }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }
}

/// A k-multi-labeled hypothesis: every point is mapped to exactly `k`
/// distinct labels. `k >= label count` is rejected at construction; a
/// full-list hypothesis never misses, which makes the learning problem
/// trivial, and we surface that as an error rather than a silent success.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListHypothesis {
    list_size: usize,
    labels: LabelSpace,
    prediction: Vec<Vec<Label>>,
}

impl ListHypothesis {
    pub fn new(labels: LabelSpace, list_size: usize, prediction: Vec<Vec<Label>>) -> Result<Self> {
        if list_size == 0 {
            return Err(Error::InvalidArgument("list size must be >= 1".into()));
        }
        if list_size >= labels.count() {
            return Err(Error::InvalidArgument(format!(
                "list size {list_size} must be smaller than label count {}",
                labels.count()
            )));
        }
        let mut prediction = prediction;
        for set in &mut prediction {
            set.sort_unstable();
            set.dedup();
            if set.len() != list_size {
                return Err(Error::InvalidArgument(format!(
                    "each predicted set must hold exactly {list_size} distinct labels"
                )));
            }
            if set.iter().any(|y| !labels.contains(*y)) {
                return Err(Error::DomainMismatch("predicted label out of range".into()));
            }
        }
        Ok(ListHypothesis { list_size, labels, prediction })
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn predicted(&self, point: usize) -> &[Label] {
        &self.prediction[point]
    }

    pub fn domain_size(&self) -> usize {
        self.prediction.len()
    }
}

/// 0-1 list loss: 1 iff the true label is not in the predicted set.
pub fn list_loss(h: &ListHypothesis, ex: &LabeledExample) -> Result<u8> {
    if ex.point >= h.domain_size() {
        return Err(Error::DomainMismatch(format!(
            "point {} outside hypothesis domain of size {}",
            ex.point,
            h.domain_size()
        )));
    }
    Ok(u8::from(!h.predicted(ex.point).contains(&ex.label)))
}

/// Exact rational average of per-example losses. Realizability is loss 0.
pub fn empirical_loss(h: &ListHypothesis, s: &Sample) -> Result<Ratio<u64>> {
    if s.is_empty() {
        return Err(Error::InvalidArgument("empirical loss of an empty sample".into()));
    }
    let mut misses = 0u64;
    for ex in s.examples() {
        misses += u64::from(list_loss(h, ex)?);
    }
    Ok(Ratio::new(misses, s.len() as u64))
}

/// Explicit concept class: nonempty, deduplicated, canonically sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptClass {
    domain: Domain,
    labels: LabelSpace,
    concepts: Vec<Concept>,
}

impl ConceptClass {
    pub fn new(domain: Domain, labels: LabelSpace, concepts: Vec<Concept>) -> Result<Self> {
        if concepts.is_empty() {
            return Err(Error::InvalidArgument("concept class must be nonempty".into()));
        }
        for c in &concepts {
            if c.values().len() != domain.size() {
                return Err(Error::DomainMismatch(format!(
                    "concept length {} != domain size {}",
                    c.values().len(),
                    domain.size()
                )));
            }
            if c.values().iter().any(|y| !labels.contains(*y)) {
                return Err(Error::DomainMismatch("concept label out of range".into()));
            }
        }
        let mut concepts = concepts;
        concepts.sort_unstable();
        concepts.dedup();
        Ok(ConceptClass { domain, labels, concepts })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn labels(&self) -> LabelSpace {
        self.labels
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True iff some concept agrees with every example.
    pub fn realizes(&self, examples: &[LabeledExample]) -> bool {
        self.concepts
            .iter()
            .any(|c| examples.iter().all(|ex| c.value(ex.point) == ex.label))
    }
}

fn check_budget(what: &str, count: u64, budget: u64) -> Result<()> {
    if count > budget {
        return Err(Error::Budget {
            what: format!("{what} would enumerate {count} concepts"),
            limit: budget,
            certified_lower_bound: None,
        });
    }
    Ok(())
}

/// Binomial coefficient, saturating at u64::MAX.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// All weakly increasing functions from `0..n` to `0..label_count`.
/// Exactly `C(n + l - 1, l - 1)` concepts.
pub fn gen_monotone_class(n: usize, label_count: usize, budget: u64) -> Result<ConceptClass> {
    let domain = Domain::new(n)?;
    let labels = LabelSpace::new(label_count)?;
    let count = binomial((n + label_count - 1) as u64, (label_count - 1) as u64);
    check_budget("gen_monotone_class", count, budget)?;

    let mut concepts = Vec::with_capacity(count as usize);
    let mut cur = vec![0 as Label; n];
    loop {
        concepts.push(Concept::new(cur.clone()));
        // next weakly increasing sequence in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return ConceptClass::new(domain, labels, concepts);
            }
            i -= 1;
            if (cur[i] as usize) < label_count - 1 {
                let v = cur[i] + 1;
                for slot in cur.iter_mut().skip(i) {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// All `label_count^n` functions. Oracle fodder for dimension tests.
pub fn gen_full_class(n: usize, label_count: usize, budget: u64) -> Result<ConceptClass> {
    let domain = Domain::new(n)?;
    let labels = LabelSpace::new(label_count)?;
    let count = (label_count as u64)
        .checked_pow(n as u32)
        .unwrap_or(u64::MAX);
    check_budget("gen_full_class", count, budget)?;

    let mut concepts = Vec::with_capacity(count as usize);
    let mut cur = vec![0 as Label; n];
    loop {
        concepts.push(Concept::new(cur.clone()));
        let mut i = n;
        loop {
            if i == 0 {
                return ConceptClass::new(domain, labels, concepts);
            }
            i -= 1;
            if (cur[i] as usize) < label_count - 1 {
                cur[i] += 1;
                break;
            }
            cur[i] = 0;
        }
    }
}

/// Number of vertices of the complete b-ary tree of depth `d` (so `d+1`
/// levels counting the root).
fn tree_vertex_count(b: u64, d: u32) -> Option<u64> {
    let mut total: u64 = 0;
    let mut level: u64 = 1;
    for _ in 0..=d {
        total = total.checked_add(level)?;
        level = level.checked_mul(b)?;
    }
    Some(total)
}

/// Index of a tree vertex in breadth-first order (levels top-down, paths in
/// lexicographic order within a level). This fixed order is the canonical
/// identification of tree vertices with domain points.
pub fn branch_domain_index(b: usize, path: &[u8]) -> usize {
    let mut level_start = 0usize;
    let mut level_size = 1usize;
    for _ in 0..path.len() {
        level_start += level_size;
        level_size *= b;
    }
    let mut offset = 0usize;
    for &t in path {
        offset = offset * b + t as usize;
    }
    level_start + offset
}

/// The branch class: the domain is all vertices of the complete (k+1)-ary
/// tree of depth `depth` in breadth-first order, and there is one concept per
/// root-to-leaf branch. A vertex on the realized branch is labeled with the
/// edge label the branch chooses at that vertex (the root included); every
/// other vertex, including the branch's own endpoint leaf, is labeled 0.
pub fn gen_branch_class(depth: u32, k: usize, budget: u64) -> Result<ConceptClass> {
    if depth == 0 {
        return Err(Error::InvalidArgument("branch class needs depth >= 1".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("branch class needs k >= 1".into()));
    }
    let b = k + 1;
    let count = (b as u64)
        .checked_pow(depth)
        .ok_or(Error::Budget {
            what: "gen_branch_class concept count overflows".into(),
            limit: budget,
            certified_lower_bound: None,
        })?;
    check_budget("gen_branch_class", count, budget)?;
    let n_vertices = tree_vertex_count(b as u64, depth).ok_or(Error::Budget {
        what: "gen_branch_class domain size overflows".into(),
        limit: budget,
        certified_lower_bound: None,
    })?;
    check_budget("gen_branch_class domain", n_vertices, budget)?;

    let domain = Domain::new(n_vertices as usize)?;
    let labels = LabelSpace::new(b)?;

    let mut concepts = Vec::with_capacity(count as usize);
    let mut turns = vec![0u8; depth as usize];
    loop {
        let mut values = vec![0 as Label; n_vertices as usize];
        for pfx in 0..depth as usize {
            let idx = branch_domain_index(b, &turns[..pfx]);
            values[idx] = turns[pfx] as Label;
        }
        concepts.push(Concept::new(values));

        let mut i = depth as usize;
        loop {
            if i == 0 {
                return ConceptClass::new(domain, labels, concepts);
            }
            i -= 1;
            if (turns[i] as usize) < b - 1 {
                turns[i] += 1;
                break;
            }
            turns[i] = 0;
        }
    }
}

/// On-disk representation of a concept class. Canonical, whitespace
/// insensitive; malformed input is rejected with line/column diagnostics.
#[derive(Serialize, Deserialize)]
struct ClassFile {
    domain_size: usize,
    label_count: usize,
    concepts: Vec<Vec<Label>>,
}

pub fn class_to_string(class: &ConceptClass) -> String {
    let file = ClassFile {
        domain_size: class.domain().size(),
        label_count: class.labels().count(),
        concepts: class.concepts().iter().map(|c| c.values().to_vec()).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("class serialization");
    s.push('\n');
    s
}

pub fn class_from_str(text: &str) -> Result<ConceptClass> {
    let file: ClassFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        col: e.column(),
        msg: e.to_string(),
    })?;
    let domain = Domain::new(file.domain_size)?;
    let labels = LabelSpace::new(file.label_count)?;
    let concepts = file.concepts.into_iter().map(Concept::new).collect();
    ConceptClass::new(domain, labels, concepts)
}
