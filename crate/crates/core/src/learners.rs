//! Online k-list learners, simulated randomized learners exposed as
//! deterministic loss profiles, and comparison-based-loss checking and
//! extraction, both on mistake trees and on balanced samples over an
//! ordered point set.
//!
//! A randomized learner is modeled throughout as its loss profile: the
//! deterministic map (sample, test point, label) -> probability the label is
//! missing from the predicted list. When the label space is finite the
//! per-point miss probabilities of any k-list learner sum to (labels - k);
//! the checkers assert that normalization on every profile query.

use crate::concepts::{ConceptClass, Label};
use crate::dims::{LittlestoneEvaluator, SearchBudget};
use crate::error::{Error, Result};
use crate::ramsey::{
    self, homogeneous_subset, FnChainColoring, FnSubsetColoring, GateMode, HomogeneousOutcome,
    RamseyOptions, SubtreeEmbedding,
};
use crate::trees::{extend_sample, loc, ExplicitTree, ImplicitTree, TreeSample, Vertex};
use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

pub const PROFILE_NORMALIZATION_TOL: f64 = 1e-9;

/// Online k-list learner: emits a list of exactly k distinct labels, then
/// receives the true label.
pub trait OnlineLearner {
    fn list_size(&self) -> usize;
    fn predict(&mut self, x: u64) -> Result<Vec<Label>>;
    fn observe(&mut self, x: u64, y: Label) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub point: u64,
    pub predicted: Vec<Label>,
    pub label: Label,
    pub miss: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub steps: Vec<StepLog>,
    pub mistakes: usize,
}

/// Drives a learner through a labeled sequence and counts mistakes.
pub fn run_sequence(learner: &mut dyn OnlineLearner, seq: &[(u64, Label)]) -> Result<RunLog> {
    let mut steps = Vec::with_capacity(seq.len());
    let mut mistakes = 0;
    for &(x, y) in seq {
        let predicted = learner.predict(x)?;
        debug_assert_eq!(predicted.len(), learner.list_size());
        let miss = !predicted.contains(&y);
        if miss {
            mistakes += 1;
        }
        learner.observe(x, y)?;
        steps.push(StepLog { point: x, predicted, label: y, miss });
    }
    Ok(RunLog { steps, mistakes })
}

/// The one-mistake learner for (k+1)-labeled monotone functions: predict
/// every label except the middle one until the first mistake at x_t, then
/// predict the bottom k labels at or below x_t and the top k labels above.
pub struct MonotoneListLearner {
    k: usize,
    mistake_point: Option<u64>,
}

impl MonotoneListLearner {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(
                "the monotone list learner needs k >= 2".into(),
            ));
        }
        Ok(MonotoneListLearner { k, mistake_point: None })
    }

    fn current_list(&self, x: u64) -> Vec<Label> {
        let k = self.k as Label;
        match self.mistake_point {
            None => {
                let mid = k / 2;
                (0..=k).filter(|&y| y != mid).collect()
            }
            Some(xt) if x <= xt => (0..k).collect(),
            Some(_) => (1..=k).collect(),
        }
    }
}

impl OnlineLearner for MonotoneListLearner {
    fn list_size(&self) -> usize {
        self.k
    }

    fn predict(&mut self, x: u64) -> Result<Vec<Label>> {
        Ok(self.current_list(x))
    }

    fn observe(&mut self, x: u64, y: Label) -> Result<()> {
        if y as usize > self.k {
            return Err(Error::Protocol(format!(
                "label {y} outside the agreed label set 0..={}",
                self.k
            )));
        }
        if self.mistake_point.is_none() && !self.current_list(x).contains(&y) {
            self.mistake_point = Some(x);
        }
        Ok(())
    }
}

/// Standard-optimal-style k-list learner: keep the version space, predict
/// the k labels whose restrictions have the largest Littlestone dimension
/// (lowest label wins ties). On a realizable sequence each mistake strictly
/// shrinks the dimension, since at most k labels can preserve it, so
/// mistakes are bounded by the class's k-Littlestone dimension.
pub struct SoaListLearner {
    class: ConceptClass,
    k: usize,
    version: Vec<u32>,
    eval: LittlestoneEvaluator,
}

impl SoaListLearner {
    pub fn new(class: ConceptClass, k: usize, budget: SearchBudget) -> Result<Self> {
        if k == 0 || k + 1 > class.labels().count() {
            return Err(Error::InvalidArgument("need 1 <= k and k+1 <= label count".into()));
        }
        let version = (0..class.len() as u32).collect();
        Ok(SoaListLearner { k, version, eval: LittlestoneEvaluator::new(k, budget), class })
    }

    pub fn version_size(&self) -> usize {
        self.version.len()
    }

    fn restricted(&self, x: usize, y: Label) -> Vec<u32> {
        restrict(&self.class, &self.version, x, y)
    }
}

fn restrict(class: &ConceptClass, version: &[u32], x: usize, y: Label) -> Vec<u32> {
    version
        .iter()
        .copied()
        .filter(|&ci| class.concepts()[ci as usize].value(x) == y)
        .collect()
}

/// The SOA prediction rule as a pure function of the version space.
fn predict_from_version(
    class: &ConceptClass,
    k: usize,
    eval: &mut LittlestoneEvaluator,
    version: &[u32],
    x: usize,
) -> Result<Vec<Label>> {
    let l = class.labels().count() as Label;
    let mut ranked: Vec<(i64, Label)> = Vec::with_capacity(l as usize);
    for y in 0..l {
        let sub = restrict(class, version, x, y);
        let score = if sub.is_empty() { -1 } else { eval.dim_of_subset(class, sub)? as i64 };
        ranked.push((score, y));
    }
    ranked.sort_by_key(|&(score, y)| (-score, y));
    let mut list: Vec<Label> = ranked.iter().take(k).map(|&(_, y)| y).collect();
    list.sort_unstable();
    Ok(list)
}

/// Worst number of mistakes any realizable feedback sequence of the given
/// length can force out of the SOA list learner, by exhaustive game search.
/// The learner's behavior is a function of its version space alone, so the
/// game memoizes on (version space, remaining steps).
pub fn soa_adversary_max_mistakes(
    class: &ConceptClass,
    k: usize,
    max_len: usize,
    budget: SearchBudget,
) -> Result<usize> {
    let mut eval = LittlestoneEvaluator::new(k, budget);
    let mut memo: HashMap<(Vec<u32>, usize), usize> = HashMap::new();

    fn explore(
        class: &ConceptClass,
        k: usize,
        eval: &mut LittlestoneEvaluator,
        memo: &mut HashMap<(Vec<u32>, usize), usize>,
        version: &[u32],
        left: usize,
    ) -> Result<usize> {
        if left == 0 {
            return Ok(0);
        }
        let key = (version.to_vec(), left);
        if let Some(&w) = memo.get(&key) {
            return Ok(w);
        }
        let mut worst = 0;
        for x in 0..class.domain().size() {
            let predicted = predict_from_version(class, k, eval, version, x)?;
            for y in 0..class.labels().count() as Label {
                let next = restrict(class, version, x, y);
                if next.is_empty() {
                    continue;
                }
                let miss = usize::from(!predicted.contains(&y));
                let deeper = explore(class, k, eval, memo, &next, left - 1)?;
                worst = worst.max(miss + deeper);
            }
        }
        memo.insert(key, worst);
        Ok(worst)
    }

    let version: Vec<u32> = (0..class.len() as u32).collect();
    explore(class, k, &mut eval, &mut memo, &version, max_len)
}

impl OnlineLearner for SoaListLearner {
    fn list_size(&self) -> usize {
        self.k
    }

    fn predict(&mut self, x: u64) -> Result<Vec<Label>> {
        let x = x as usize;
        if !self.class.domain().contains(x) {
            return Err(Error::DomainMismatch(format!("point {x} outside the class domain")));
        }
        // rank labels by restricted dimension, empty restrictions last,
        // lowest label on ties
        predict_from_version(&self.class, self.k, &mut self.eval, &self.version, x)
    }

    fn observe(&mut self, x: u64, y: Label) -> Result<()> {
        let x = x as usize;
        if !self.class.domain().contains(x) || !self.class.labels().contains(y) {
            return Err(Error::DomainMismatch("feedback outside the class".into()));
        }
        let next = self.restricted(x, y);
        if next.is_empty() {
            return Err(Error::Realizability(format!(
                "feedback ({x}, {y}) is inconsistent with every remaining concept"
            )));
        }
        self.version = next;
        Ok(())
    }
}

/// Loss profile of a learner over tree samples: the probability that label
/// `y` is missing from the predicted list at vertex `x` after training on
/// `sample`. Labels are the k+1 edge labels of the tree, so the miss
/// probabilities of a k-list learner sum to exactly 1.
pub trait TreeLossProfile {
    /// Arity b = k+1 of the trees this profile speaks about.
    fn arity(&self) -> usize;
    fn miss(&self, sample: &[(Vertex, u8)], x: &[u8], y: u8) -> f64;
}

fn validate_tree_profile(p: &dyn TreeLossProfile, sample: &[(Vertex, u8)], x: &[u8]) -> Result<()> {
    let b = p.arity();
    let k = b - 1;
    let total: f64 = (0..b).map(|y| 1.0 - p.miss(sample, x, y as u8)).sum();
    if (total - k as f64).abs() > PROFILE_NORMALIZATION_TOL {
        return Err(Error::InvalidArgument(format!(
            "profile normalization violated at x={x:?}: sum of list-membership \
             probabilities is {total}, expected {k}"
        )));
    }
    Ok(())
}

pub struct FnTreeProfile<F: Fn(&[(Vertex, u8)], &[u8], u8) -> f64> {
    arity: usize,
    f: F,
}

impl<F: Fn(&[(Vertex, u8)], &[u8], u8) -> f64> FnTreeProfile<F> {
    pub fn new(arity: usize, f: F) -> Self {
        FnTreeProfile { arity, f }
    }
}

impl<F: Fn(&[(Vertex, u8)], &[u8], u8) -> f64> TreeLossProfile for FnTreeProfile<F> {
    fn arity(&self) -> usize {
        self.arity
    }
    fn miss(&self, sample: &[(Vertex, u8)], x: &[u8], y: u8) -> f64 {
        (self.f)(sample, x, y)
    }
}

/// Monte Carlo loss profile for learners only available as hypothesis
/// samplers: the miss probability at (sample, x, y) is estimated over a
/// fixed number of draws. Draws are addressed by (sample, x, draw index),
/// never by the label, so one set of sampled lists answers every label
/// query at a point and the k-normalization holds exactly. The estimate of
/// any single entry is within `half_width` of the truth with the stated
/// confidence, by Hoeffding.
pub struct EmpiricalTreeProfile<F: Fn(&[(Vertex, u8)], &[u8], &mut rand_chacha::ChaCha8Rng) -> Vec<u8>> {
    arity: usize,
    draws: u32,
    seed: u64,
    sampler: F,
}

impl<F: Fn(&[(Vertex, u8)], &[u8], &mut rand_chacha::ChaCha8Rng) -> Vec<u8>> EmpiricalTreeProfile<F> {
    /// `sampler` draws one predicted list (k distinct edge labels) for the
    /// test point after training on the sample.
    pub fn new(arity: usize, draws: u32, seed: u64, sampler: F) -> Self {
        EmpiricalTreeProfile { arity, draws, seed, sampler }
    }

    /// Two-sided Hoeffding half-width at the given confidence.
    pub fn half_width(&self, confidence: f64) -> f64 {
        ((2.0 / (1.0 - confidence)).ln() / (2.0 * self.draws as f64)).sqrt()
    }

    fn draw_key(&self, sample: &[(Vertex, u8)], x: &[u8]) -> u64 {
        let mut key = crate::rng::derive_seed(self.seed, "profile-point", &[x.len() as u64]);
        for &t in x {
            key = crate::rng::derive_seed(key, "x", &[t as u64]);
        }
        for (v, y) in sample {
            key = crate::rng::derive_seed(key, "entry", &[v.len() as u64, *y as u64]);
            for &t in v.iter() {
                key = crate::rng::derive_seed(key, "v", &[t as u64]);
            }
        }
        key
    }
}

impl<F: Fn(&[(Vertex, u8)], &[u8], &mut rand_chacha::ChaCha8Rng) -> Vec<u8>> TreeLossProfile
    for EmpiricalTreeProfile<F>
{
    fn arity(&self) -> usize {
        self.arity
    }

    fn miss(&self, sample: &[(Vertex, u8)], x: &[u8], y: u8) -> f64 {
        let key = self.draw_key(sample, x);
        let mut misses = 0u32;
        for d in 0..self.draws {
            let mut rng = crate::rng::stream(key, "draw", &[d as u64]);
            let list = (self.sampler)(sample, x, &mut rng);
            debug_assert_eq!(list.len(), self.arity - 1);
            misses += u32::from(!list.contains(&y));
        }
        misses as f64 / self.draws as f64
    }
}

/// Comparison-based loss table: one entry per (extended-sample type,
/// location) cell, tolerance gamma.
#[derive(Debug, Clone, PartialEq)]
pub struct CbLossTable {
    pub m: usize,
    pub arity: usize,
    pub gamma: f64,
    pub entries: BTreeMap<(Vec<u8>, usize), f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbCounterexample {
    pub chain_type: Vec<u8>,
    pub location: usize,
    pub low: (Vec<(Vertex, u8)>, Vertex, f64),
    pub high: (Vec<(Vertex, u8)>, Vertex, f64),
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CbCheck {
    Accepted(CbLossTable),
    Rejected(CbCounterexample),
}

struct Cell {
    min: f64,
    max: f64,
    min_at: (Vec<(Vertex, u8)>, Vertex),
    max_at: (Vec<(Vertex, u8)>, Vertex),
}

/// View of a complete b-ary tree whose vertices live in some profile space:
/// abstract positions plus the map into profile vertices. For an explicit
/// tree the map is the identity on paths; for an extracted subtree it is
/// the embedding into the host.
struct TreeView {
    arity: usize,
    depth: u64,
    to_profile: BTreeMap<Vertex, Vertex>,
}

impl TreeView {
    fn of_explicit(tree: &ExplicitTree) -> TreeView {
        TreeView {
            arity: tree.arity(),
            depth: tree.depth() as u64,
            to_profile: tree.vertices().into_iter().map(|v| (v.clone(), v)).collect(),
        }
    }

    fn of_embedding(emb: &SubtreeEmbedding) -> TreeView {
        TreeView {
            arity: emb.arity(),
            depth: emb.depth(),
            to_profile: emb.positions().map(|(p, h)| (p.clone(), h.clone())).collect(),
        }
    }
}

fn cb_cells(
    view: &TreeView,
    profile: &dyn TreeLossProfile,
    m: usize,
    max_pairs: u64,
) -> Result<BTreeMap<(Vec<u8>, usize), Cell>> {
    if profile.arity() != view.arity {
        return Err(Error::InvalidArgument("profile arity != tree arity".into()));
    }
    if m < 1 {
        return Err(Error::InvalidArgument("sample size m must be >= 1".into()));
    }
    let shape = ImplicitTree::new(view.arity, view.depth)?;
    let positions: Vec<&Vertex> = view.to_profile.keys().collect();
    let internal: Vec<&Vertex> = positions
        .iter()
        .copied()
        .filter(|p| (p.len() as u64) < view.depth)
        .collect();

    // enumerate chains of m internal positions
    let mut chains: Vec<Vec<Vertex>> = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..internal.len()).map(|i| vec![i]).collect();
    stack.reverse();
    while let Some(chain) = stack.pop() {
        if chain.len() == m {
            chains.push(chain.iter().map(|&i| internal[i].clone()).collect());
            continue;
        }
        let last = internal[*chain.last().expect("nonempty")];
        for (j, p) in internal.iter().enumerate() {
            if p.len() > last.len() && p[..last.len()] == last[..] {
                let mut c = chain.clone();
                c.push(j);
                stack.push(c);
            }
        }
    }

    let mut cells: BTreeMap<(Vec<u8>, usize), Cell> = BTreeMap::new();
    let mut pairs: u64 = 0;
    for chain in &chains {
        // the last label ranges over all arity choices; earlier labels are
        // forced by the chain
        for last_label in 0..view.arity as u8 {
            let mut entries: Vec<(Vertex, u8)> = Vec::with_capacity(m);
            for (i, v) in chain.iter().enumerate() {
                let y = if i + 1 < m { chain[i + 1][v.len()] } else { last_label };
                entries.push((v.clone(), y));
            }
            let sample = TreeSample::new(&shape, entries.clone())?;
            for x in &positions {
                if (x.len() as u64) >= view.depth {
                    continue;
                }
                if chain.iter().any(|v| v == *x) {
                    continue;
                }
                if !sample.compatible(&shape, x) {
                    continue;
                }
                pairs += 1;
                if pairs > max_pairs {
                    return Err(Error::Budget {
                        what: "comparison-based check (sample, point) pairs".into(),
                        limit: max_pairs,
                        certified_lower_bound: None,
                    });
                }
                let ext = extend_sample(&shape, &sample, x)?;
                let ty: Vec<u8> = ext.entries().iter().map(|(_, y)| *y).collect();
                let location = loc(&shape, &sample, x)?;
                let y_x = ext
                    .entries()
                    .iter()
                    .find(|(v, _)| v == *x)
                    .map(|&(_, y)| y)
                    .expect("x was inserted");

                // queries go to the profile in its own vertex space
                let p_sample: Vec<(Vertex, u8)> = entries
                    .iter()
                    .map(|(v, y)| (view.to_profile[v].clone(), *y))
                    .collect();
                let p_x = view.to_profile[*x].clone();
                validate_tree_profile(profile, &p_sample, &p_x)?;
                let value = profile.miss(&p_sample, &p_x, y_x);

                let cell = cells.entry((ty, location)).or_insert_with(|| Cell {
                    min: value,
                    max: value,
                    min_at: (p_sample.clone(), p_x.clone()),
                    max_at: (p_sample.clone(), p_x.clone()),
                });
                if value < cell.min {
                    cell.min = value;
                    cell.min_at = (p_sample.clone(), p_x.clone());
                }
                if value > cell.max {
                    cell.max = value;
                    cell.max_at = (p_sample, p_x);
                }
            }
        }
    }
    Ok(cells)
}

fn cells_to_check(
    cells: BTreeMap<(Vec<u8>, usize), Cell>,
    m: usize,
    arity: usize,
    gamma: f64,
) -> CbCheck {
    for ((ty, location), cell) in &cells {
        if cell.max - cell.min > 2.0 * gamma + 1e-12 {
            return CbCheck::Rejected(CbCounterexample {
                chain_type: ty.clone(),
                location: *location,
                low: (cell.min_at.0.clone(), cell.min_at.1.clone(), cell.min),
                high: (cell.max_at.0.clone(), cell.max_at.1.clone(), cell.max),
                spread: cell.max - cell.min,
            });
        }
    }
    let entries = cells
        .into_iter()
        .map(|(key, cell)| (key, (cell.min + cell.max) / 2.0))
        .collect();
    CbCheck::Accepted(CbLossTable { m, arity, gamma, entries })
}

pub const DEFAULT_CB_PAIR_BUDGET: u64 = 5_000_000;

/// Does the profile have gamma-comparison-based loss on the tree? Checks
/// every realizable size-m sample against every compatible fresh test
/// point: within each (type, location) cell the observed losses may spread
/// at most 2*gamma, and the witnessing table takes cell midpoints.
pub fn check_cb_loss(
    profile: &dyn TreeLossProfile,
    tree: &ExplicitTree,
    m: usize,
    gamma: f64,
) -> Result<CbCheck> {
    let view = TreeView::of_explicit(tree);
    let cells = cb_cells(&view, profile, m, DEFAULT_CB_PAIR_BUDGET)?;
    Ok(cells_to_check(cells, m, tree.arity(), gamma))
}

/// Same check on an embedded subtree: samples and test points are drawn
/// from the embedded positions but the profile is queried with host
/// vertices, so this is exactly comparison-based loss "on the subtree".
pub fn check_cb_loss_on_embedding(
    profile: &dyn TreeLossProfile,
    emb: &SubtreeEmbedding,
    m: usize,
    gamma: f64,
) -> Result<CbCheck> {
    let view = TreeView::of_embedding(emb);
    let cells = cb_cells(&view, profile, m, DEFAULT_CB_PAIR_BUDGET)?;
    Ok(cells_to_check(cells, m, emb.arity(), gamma))
}

/// Rounding grid for extraction colorings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Granularity {
    /// The faithful grid: multiples of 1/(100 m) for tree extraction, of
    /// 1/(100 k m) for balanced extraction. Worst-case host requirements at
    /// this grid are tower-sized, so such runs are refused with the
    /// requirement reported.
    Faithful,
    /// Multiples of 1/steps; coarse grids keep the color space small enough
    /// for opportunistic desk-scale runs.
    Coarse { steps: u32 },
}

fn round_to_grid(value: f64, steps: u32) -> u32 {
    // nearest grid index, ties toward the smaller fraction
    let scaled = value * steps as f64;
    let idx = (scaled - 0.5).ceil() as i64;
    idx.clamp(0, steps as i64) as u32
}

fn grid_steps(m: usize, k: usize, granularity: Granularity, tree_side: bool) -> u64 {
    match granularity {
        Granularity::Faithful => {
            if tree_side {
                100 * m as u64
            } else {
                100 * (k as u64) * m as u64
            }
        }
        Granularity::Coarse { steps } => steps as u64,
    }
}

/// Chain coloring behind the tree extraction: an (m+2)-chain is read as a
/// size-(m+1) sample; leaving out the i-th example and testing on it yields
/// one loss per slot, each rounded to the grid.
fn extraction_color(
    profile: &dyn TreeLossProfile,
    shape: &ImplicitTree,
    m: usize,
    steps: u64,
    chain: &[Vertex],
) -> u64 {
    let mut entries: Vec<(Vertex, u8)> = Vec::with_capacity(m + 1);
    for (i, v) in chain.iter().enumerate().take(m + 1) {
        let y = chain[i + 1][v.len()];
        entries.push((v.clone(), y));
    }
    let mut color: u64 = 0;
    for i in 0..=m {
        let mut rest = entries.clone();
        let (x, _) = rest.remove(i);
        // re-adding x above the tail forces its label; below the tail the
        // smallest label is chosen
        let y_x = if i < m { entries[i].1 } else { 0 };
        debug_assert!({
            let s = TreeSample::new(shape, rest.clone()).expect("sample");
            extend_sample(shape, &s, &x)
                .map(|e| e.entries().iter().any(|(v, y)| *v == x && *y == y_x))
                .unwrap_or(false)
        });
        let q = round_to_grid(profile.miss(&rest, &x, y_x), steps as u32) as u64;
        color = color * (steps + 1) + q;
    }
    color
}

/// Finds a subtree on which the profile has comparison-based loss, by the
/// chain Ramsey extraction on rounded losses. At the faithful grid the
/// worst-case host depth is tower-sized and the call is refused with that
/// requirement reported; at a coarse grid the search runs opportunistically
/// and the returned subtree is re-verified with `check_cb_loss` before it
/// is handed back, at gamma = half a grid step.
pub fn extract_cb_subtree(
    profile: &dyn TreeLossProfile,
    host: &ImplicitTree,
    m: usize,
    d: u64,
    granularity: Granularity,
) -> Result<(SubtreeEmbedding, CbLossTable)> {
    if m < 1 {
        return Err(Error::InvalidArgument("sample size m must be >= 1".into()));
    }
    let b = host.arity();
    if b != profile.arity() {
        return Err(Error::InvalidArgument("profile arity != host arity".into()));
    }
    let steps = grid_steps(m, b - 1, granularity, true);
    let colors = (steps + 1).checked_pow(m as u32 + 1).unwrap_or(u64::MAX);

    if let Granularity::Faithful = granularity {
        let required = match ramsey::required_depth(
            d.max(m as u64 + 2),
            m as u32 + 2,
            colors,
            b as u64,
            ramsey::BitBudget::default(),
        ) {
            Ok(r) => r.to_string(),
            Err(_) => "a tower value beyond the bit budget".into(),
        };
        return Err(Error::Gate {
            required,
            cap: format!("host of depth {}", host.depth()),
        });
    }

    let coloring = FnChainColoring::new(colors, |chain: &[Vertex]| {
        extraction_color(profile, host, m, steps, chain)
    });
    let opts = RamseyOptions {
        gate: GateMode::BestEffort,
        query_budget: ramsey::DEFAULT_QUERY_BUDGET,
    };
    let emb = ramsey::ramsey_subtree(host, &coloring, m as u32 + 2, d, &opts)?;

    let gamma = 0.5 / steps as f64;
    match check_cb_loss_on_embedding(profile, &emb, m, gamma)? {
        CbCheck::Accepted(table) => Ok((emb, table)),
        CbCheck::Rejected(cex) => Err(Error::Precondition(format!(
            "extracted subtree failed its own comparison-based check: spread {} in cell ({:?}, {})",
            cex.spread, cex.chain_type, cex.location
        ))),
    }
}

/// Loss profile over a linearly ordered point domain: the vector of miss
/// probabilities per label after training on a (point, label) sample.
pub trait PointLossProfile {
    fn label_count(&self) -> usize;
    fn list_size(&self) -> usize;
    fn miss_vector(&self, sample: &[(u64, Label)], x: u64) -> Vec<f64>;
}

fn validate_point_profile(p: &dyn PointLossProfile, v: &[f64]) -> Result<()> {
    if v.len() != p.label_count() {
        return Err(Error::InvalidArgument("profile vector has the wrong length".into()));
    }
    let total: f64 = v.iter().map(|a| 1.0 - a).sum();
    if (total - p.list_size() as f64).abs() > PROFILE_NORMALIZATION_TOL {
        return Err(Error::InvalidArgument(format!(
            "profile normalization violated: membership mass {total}, expected {}",
            p.list_size()
        )));
    }
    Ok(())
}

pub struct FnPointProfile<F: Fn(&[(u64, Label)], u64) -> Vec<f64>> {
    label_count: usize,
    list_size: usize,
    f: F,
}

impl<F: Fn(&[(u64, Label)], u64) -> Vec<f64>> FnPointProfile<F> {
    pub fn new(label_count: usize, list_size: usize, f: F) -> Self {
        FnPointProfile { label_count, list_size, f }
    }
}

impl<F: Fn(&[(u64, Label)], u64) -> Vec<f64>> PointLossProfile for FnPointProfile<F> {
    fn label_count(&self) -> usize {
        self.label_count
    }
    fn list_size(&self) -> usize {
        self.list_size
    }
    fn miss_vector(&self, sample: &[(u64, Label)], x: u64) -> Vec<f64> {
        (self.f)(sample, x)
    }
}

/// The balanced increasing sample on a sorted point set: equally many of
/// each label, blocks in label order.
pub fn balanced_sample(points: &[u64], label_count: usize) -> Result<Vec<(u64, Label)>> {
    let m = points.len();
    if m == 0 || m % label_count != 0 {
        return Err(Error::InvalidArgument(format!(
            "balanced samples need the label count {label_count} to divide the size {m}"
        )));
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("points must be strictly increasing".into()));
    }
    let block = m / label_count;
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, (i / block) as Label))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedCbTable {
    pub m: usize,
    pub label_count: usize,
    pub gamma: f64,
    /// One vector in `[0,1]^labels` per location 0..=m.
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedCbCounterexample {
    pub location: usize,
    pub label: Label,
    pub low: (Vec<(u64, Label)>, u64, f64),
    pub high: (Vec<(u64, Label)>, u64, f64),
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BalancedCbCheck {
    Accepted(BalancedCbTable),
    Rejected(BalancedCbCounterexample),
}

/// Is the profile gamma-comparison-based on `points`? Every balanced
/// increasing sample of size m drawn from the set is tested against every
/// point; within a location, each label's miss probability may spread at
/// most 2*gamma.
pub fn check_balanced_cb(
    profile: &dyn PointLossProfile,
    points: &[u64],
    m: usize,
    gamma: f64,
) -> Result<BalancedCbCheck> {
    let ell = profile.label_count();
    if m == 0 || m % ell != 0 {
        return Err(Error::InvalidArgument(format!(
            "label count {ell} must divide the sample size {m}"
        )));
    }
    if points.len() < m {
        return Err(Error::InvalidArgument("not enough points".into()));
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("points must be strictly increasing".into()));
    }

    struct VCell {
        min: f64,
        max: f64,
        min_at: (Vec<(u64, Label)>, u64),
        max_at: (Vec<(u64, Label)>, u64),
    }
    let mut cells: BTreeMap<(usize, Label), VCell> = BTreeMap::new();

    for combo in index_combinations(points, m) {
        let sample = balanced_sample(&combo, ell)?;
        for &x in points {
            let location = combo.iter().take_while(|&&p| p < x).count();
            let v = profile.miss_vector(&sample, x);
            validate_point_profile(profile, &v)?;
            for (label, &value) in v.iter().enumerate() {
                let cell = cells.entry((location, label as Label)).or_insert_with(|| VCell {
                    min: value,
                    max: value,
                    min_at: (sample.clone(), x),
                    max_at: (sample.clone(), x),
                });
                if value < cell.min {
                    cell.min = value;
                    cell.min_at = (sample.clone(), x);
                }
                if value > cell.max {
                    cell.max = value;
                    cell.max_at = (sample.clone(), x);
                }
            }
        }
    }

    for ((location, label), cell) in &cells {
        if cell.max - cell.min > 2.0 * gamma + 1e-12 {
            return Ok(BalancedCbCheck::Rejected(BalancedCbCounterexample {
                location: *location,
                label: *label,
                low: (cell.min_at.0.clone(), cell.min_at.1, cell.min),
                high: (cell.max_at.0.clone(), cell.max_at.1, cell.max),
                spread: cell.max - cell.min,
            }));
        }
    }
    let mut vectors = vec![vec![0.0; ell]; m + 1];
    for ((location, label), cell) in cells {
        vectors[location][label as usize] = (cell.min + cell.max) / 2.0;
    }
    Ok(BalancedCbCheck::Accepted(BalancedCbTable { m, label_count: ell, gamma, vectors }))
}

fn index_combinations<T: Copy>(items: &[T], k: usize) -> Vec<Vec<T>> {
    if k > items.len() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < items.len() - (k - i) {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Maximum color count the subset extraction will run with; above it the
/// call is refused and the classical Ramsey threshold reported.
pub const SUBSET_EXTRACTION_COLOR_CAP: u64 = 1_000_000;

/// Finds a point subset on which the profile is comparison-based, by the
/// classical Ramsey extraction: (m+1)-subsets are colored with the rounded
/// leave-one-out miss vectors, and a homogeneous subset is comparison-based
/// at half a grid step. The faithful grid makes the color space and the
/// guarantee threshold astronomically large, so it is refused with the
/// threshold reported; coarse grids run opportunistically and the result is
/// re-verified before being returned.
pub fn extract_cb_subset(
    profile: &dyn PointLossProfile,
    points: &[u64],
    m: usize,
    target_size: usize,
    granularity: Granularity,
) -> Result<(Vec<u64>, BalancedCbTable)> {
    let ell = profile.label_count();
    let k = profile.list_size();
    if m == 0 || m % ell != 0 {
        return Err(Error::InvalidArgument(format!(
            "label count {ell} must divide the sample size {m}"
        )));
    }
    if target_size < m + 1 {
        return Err(Error::InvalidArgument("target size must exceed the sample size".into()));
    }
    let steps = grid_steps(m, k, granularity, false);
    let colors = (steps + 1)
        .checked_pow((ell * (m + 1)) as u32)
        .unwrap_or(u64::MAX);
    if colors > SUBSET_EXTRACTION_COLOR_CAP {
        let threshold = ramsey::classical_ramsey_threshold(
            m as u32 + 1,
            target_size as u64,
            colors,
            ramsey::BitBudget::default(),
        )
        .map(|t| t.to_string())
        .unwrap_or_else(|_| "a tower value beyond the bit budget".into());
        return Err(Error::Gate {
            required: format!("universe of {threshold} points for {colors} colors"),
            cap: format!("{SUBSET_EXTRACTION_COLOR_CAP} colors"),
        });
    }

    let intern: RefCell<HashMap<Vec<u32>, u64>> = RefCell::new(HashMap::new());
    let coloring = FnSubsetColoring::new(|subset: &[usize]| {
        let mut tuple = Vec::with_capacity(ell * (m + 1));
        for (i, &pi) in subset.iter().enumerate() {
            let rest: Vec<u64> = subset
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &pj)| points[pj])
                .collect();
            let sample = balanced_sample(&rest, ell).expect("balanced leave-one-out");
            let v = profile.miss_vector(&sample, points[pi]);
            for value in v {
                tuple.push(round_to_grid(value, steps as u32));
            }
        }
        let mut table = intern.borrow_mut();
        let next = table.len() as u64;
        *table.entry(tuple).or_insert(next)
    });

    let outcome = homogeneous_subset(points.len(), m + 1, &coloring, target_size, 1 << 26)?;
    let subset = match outcome {
        HomogeneousOutcome::Found(idxs) => {
            idxs.into_iter().map(|i| points[i]).collect::<Vec<u64>>()
        }
        HomogeneousOutcome::NotFound { subsets_checked } => {
            return Err(Error::Precondition(format!(
                "no homogeneous subset of size {target_size} among {subsets_checked} candidates"
            )))
        }
    };

    let gamma = 0.5 / steps as f64;
    match check_balanced_cb(profile, &subset, m, gamma)? {
        BalancedCbCheck::Accepted(table) => Ok((subset, table)),
        BalancedCbCheck::Rejected(cex) => Err(Error::Precondition(format!(
            "homogeneous subset failed the balanced check: spread {} at location {} label {}",
            cex.spread, cex.location, cex.label
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{gen_branch_class, gen_monotone_class};
    use crate::rng;

    fn monotone_concepts(n: usize, labels: usize) -> Vec<Vec<Label>> {
        gen_monotone_class(n, labels, 1 << 20)
            .unwrap()
            .concepts()
            .iter()
            .map(|c| c.values().to_vec())
            .collect()
    }

    #[test]
    fn monotone_learner_initial_list_skips_middle() {
        let mut l = MonotoneListLearner::new(2).unwrap();
        assert_eq!(l.predict(10).unwrap(), vec![0, 2]);
        let mut l = MonotoneListLearner::new(3).unwrap();
        assert_eq!(l.predict(10).unwrap(), vec![0, 2, 3]);
    }

    #[test]
    fn monotone_learner_worked_sequence() {
        // realizable by a monotone function; exactly one mistake at the
        // first reveal of the middle label
        let mut l = MonotoneListLearner::new(2).unwrap();
        let log = run_sequence(&mut l, &[(5, 1), (3, 0), (9, 2)]).unwrap();
        assert_eq!(log.mistakes, 1);
        assert!(log.steps[0].miss);
        assert!(!log.steps[1].miss && !log.steps[2].miss);
    }

    #[test]
    fn monotone_learner_protocol_error() {
        let mut l = MonotoneListLearner::new(2).unwrap();
        assert!(matches!(l.observe(4, 7), Err(Error::Protocol(_))));
    }

    #[test]
    fn monotone_learner_never_exceeds_one_mistake_exhaustively() {
        // all monotone targets over [6] and all point sequences of length
        // <= 4 (the acceptance suite pushes this to length 6)
        for k in [2usize, 3] {
            let targets = monotone_concepts(6, k + 1);
            let seqs = all_sequences(6, 4);
            for target in &targets {
                for seq in &seqs {
                    let labeled: Vec<(u64, Label)> =
                        seq.iter().map(|&x| (x as u64, target[x])).collect();
                    let mut l = MonotoneListLearner::new(k).unwrap();
                    let log = run_sequence(&mut l, &labeled).unwrap();
                    assert!(
                        log.mistakes <= 1,
                        "k={k} target={target:?} seq={labeled:?}: {} mistakes",
                        log.mistakes
                    );
                }
            }
        }
    }

    fn all_sequences(n: usize, max_len: usize) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut level: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &level {
                for x in 0..n {
                    let mut t = s.clone();
                    t.push(x);
                    next.push(t);
                }
            }
            out.extend(next.iter().cloned());
            level = next;
        }
        out
    }

    #[test]
    fn soa_learner_respects_dimension_bound_on_branch_class() {
        let class = gen_branch_class(2, 2, 1 << 20).unwrap();
        let max = soa_adversary_max_mistakes(&class, 2, 5, SearchBudget::default()).unwrap();
        assert!(max <= 2, "adversary forced {max} mistakes, dimension is 2");
    }

    #[test]
    fn soa_learner_on_monotone_class_one_mistake() {
        let class = gen_monotone_class(5, 3, 1 << 20).unwrap();
        let max = soa_adversary_max_mistakes(&class, 2, 4, SearchBudget::default()).unwrap();
        assert!(max <= 1, "adversary forced {max} mistakes, dimension is 1");
    }

    #[test]
    fn soa_adversary_agrees_with_learner_replay() {
        // the game search and a literal learner replay see the same worst
        // case on a small class
        let class = gen_branch_class(1, 2, 1 << 20).unwrap();
        let fast = soa_adversary_max_mistakes(&class, 2, 3, SearchBudget::default()).unwrap();
        let mut worst = 0;
        let n = class.domain().size() as u64;
        let l = class.labels().count() as Label;
        let mut stack: Vec<Vec<(u64, Label)>> = vec![vec![]];
        while let Some(h) = stack.pop() {
            let examples: Vec<crate::concepts::LabeledExample> = h
                .iter()
                .map(|&(p, y)| crate::concepts::LabeledExample { point: p as usize, label: y })
                .collect();
            if !class.realizes(&examples) {
                continue;
            }
            let mut soa = SoaListLearner::new(class.clone(), 2, SearchBudget::default()).unwrap();
            let log = run_sequence(&mut soa, &h).unwrap();
            worst = worst.max(log.mistakes);
            if h.len() < 3 {
                for x in 0..n {
                    for y in 0..l {
                        let mut h2 = h.clone();
                        h2.push((x, y));
                        stack.push(h2);
                    }
                }
            }
        }
        assert_eq!(fast, worst);
    }

    #[test]
    fn soa_learner_realizability_error() {
        let class = gen_branch_class(1, 1, 1 << 20).unwrap();
        let mut soa = SoaListLearner::new(class, 1, SearchBudget::default()).unwrap();
        soa.observe(0, 1).unwrap();
        assert!(matches!(soa.observe(0, 0), Err(Error::Realizability(_))));
    }

    fn canonical_tree(arity: usize, depth: usize) -> ExplicitTree {
        ExplicitTree::canonical(arity, depth, &mut |_| 0).unwrap()
    }

    /// Profile whose excluded label is a pure function of (type, loc).
    fn type_loc_profile(arity: usize) -> impl TreeLossProfile {
        FnTreeProfile::new(arity, move |sample: &[(Vertex, u8)], x: &[u8], y: u8| {
            let shape = ImplicitTree::new(arity, 1 << 40).unwrap();
            let s = TreeSample::new(&shape, sample.to_vec()).unwrap();
            let ext = extend_sample(&shape, &s, x).unwrap();
            let ty: Vec<u8> = ext.entries().iter().map(|(_, t)| *t).collect();
            let location = loc(&shape, &s, x).unwrap();
            let mut key = vec![location as u64];
            key.extend(ty.iter().map(|&t| t as u64));
            let excluded = rng::derive_seed(7, "excluded", &key) % arity as u64;
            f64::from(y as u64 == excluded)
        })
    }

    /// Profile whose excluded label reads the absolute depth of the point.
    fn depth_profile(arity: usize) -> impl TreeLossProfile {
        FnTreeProfile::new(arity, move |_: &[(Vertex, u8)], x: &[u8], y: u8| {
            f64::from(y as usize == x.len() % arity)
        })
    }

    #[test]
    fn cb_check_accepts_type_loc_profiles_at_zero() {
        for (arity, depth, m) in [(2, 3, 1), (3, 2, 1), (2, 3, 2)] {
            let tree = canonical_tree(arity, depth);
            let profile = type_loc_profile(arity);
            match check_cb_loss(&profile, &tree, m, 0.0).unwrap() {
                CbCheck::Accepted(table) => {
                    assert!(!table.entries.is_empty());
                    for v in table.entries.values() {
                        assert!((0.0..=1.0).contains(v));
                    }
                }
                CbCheck::Rejected(cex) => panic!("rejected factoring profile: {cex:?}"),
            }
        }
    }

    #[test]
    fn cb_check_rejects_depth_reader_with_verified_counterexample() {
        let tree = canonical_tree(2, 3);
        let profile = depth_profile(2);
        match check_cb_loss(&profile, &tree, 1, 0.0).unwrap() {
            CbCheck::Rejected(cex) => {
                assert!(cex.spread > 0.0);
                // re-verify the counterexample against the profile
                let lo = profile.miss(&cex.low.0, &cex.low.1, recover_label(&cex.low));
                let hi = profile.miss(&cex.high.0, &cex.high.1, recover_label(&cex.high));
                assert!((hi - lo - cex.spread).abs() < 1e-12);
            }
            CbCheck::Accepted(_) => panic!("depth reader accepted at gamma = 0"),
        }
    }

    fn recover_label(at: &(Vec<(Vertex, u8)>, Vertex, f64)) -> u8 {
        // recover y_x for the stored (sample, x) pair via the extension rule
        let shape = ImplicitTree::new(2, 1 << 40).unwrap();
        let s = TreeSample::new(&shape, at.0.clone()).unwrap();
        let ext = extend_sample(&shape, &s, &at.1).unwrap();
        ext.entries().iter().find(|(v, _)| *v == at.1).unwrap().1
    }

    #[test]
    fn cb_check_gamma_one_accepts_anything() {
        let tree = canonical_tree(2, 3);
        let profile = depth_profile(2);
        assert!(matches!(
            check_cb_loss(&profile, &tree, 1, 1.0).unwrap(),
            CbCheck::Accepted(_)
        ));
    }

    #[test]
    fn extract_subtree_from_cb_profile_passes_its_check() {
        let host = ImplicitTree::new(2, 64).unwrap();
        let profile = type_loc_profile(2);
        let (emb, table) =
            extract_cb_subtree(&profile, &host, 1, 2, Granularity::Coarse { steps: 2 }).unwrap();
        assert_eq!(emb.depth(), 2);
        assert!(table.gamma <= 0.25 + 1e-12);
    }

    #[test]
    fn extract_subtree_faithful_granularity_is_gated() {
        let host = ImplicitTree::new(2, 1 << 20).unwrap();
        let profile = type_loc_profile(2);
        let err = extract_cb_subtree(&profile, &host, 1, 2, Granularity::Faithful);
        assert!(matches!(err, Err(Error::Gate { .. })), "{err:?}");
    }

    fn location_only_point_profile() -> impl PointLossProfile {
        // ell = 2, k = 1: miss vector (a, 1 - a) with a driven by location
        FnPointProfile::new(2, 1, |sample: &[(u64, Label)], x: u64| {
            let location = sample.iter().take_while(|&&(p, _)| p < x).count();
            let a = location as f64 / (sample.len() + 1) as f64;
            vec![a, 1.0 - a]
        })
    }

    fn absolute_position_point_profile() -> impl PointLossProfile {
        FnPointProfile::new(2, 1, |_: &[(u64, Label)], x: u64| {
            let a = (x as f64 / 100.0).min(1.0);
            vec![a, 1.0 - a]
        })
    }

    #[test]
    fn balanced_cb_accepts_location_only_and_rejects_absolute() {
        let points: Vec<u64> = (0..8).map(|i| 10 * i + 3).collect();
        let profile = location_only_point_profile();
        match check_balanced_cb(&profile, &points, 2, 0.0).unwrap() {
            BalancedCbCheck::Accepted(table) => {
                assert_eq!(table.vectors.len(), 3);
            }
            BalancedCbCheck::Rejected(cex) => panic!("rejected location-only profile: {cex:?}"),
        }

        let profile = absolute_position_point_profile();
        match check_balanced_cb(&profile, &points, 2, 0.0).unwrap() {
            BalancedCbCheck::Rejected(cex) => {
                // samples shifted by one point witness the violation
                let lo = profile.miss_vector(&cex.low.0, cex.low.1)[cex.label as usize];
                let hi = profile.miss_vector(&cex.high.0, cex.high.1)[cex.label as usize];
                assert!((hi - lo - cex.spread).abs() < 1e-12);
            }
            BalancedCbCheck::Accepted(_) => panic!("absolute profile accepted at gamma = 0"),
        }
    }

    #[test]
    fn balanced_cb_divisibility_guard() {
        let points: Vec<u64> = (0..6).collect();
        let profile = location_only_point_profile();
        assert!(matches!(
            check_balanced_cb(&profile, &points, 3, 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn extract_subset_coarse_runs_and_fine_is_gated() {
        let points: Vec<u64> = (0..8).map(|i| 5 * i).collect();
        let profile = location_only_point_profile();
        let (subset, _) =
            extract_cb_subset(&profile, &points, 2, 3, Granularity::Coarse { steps: 2 }).unwrap();
        assert!(subset.len() >= 3);

        let err = extract_cb_subset(&profile, &points, 2, 3, Granularity::Faithful);
        assert!(matches!(err, Err(Error::Gate { .. })), "{err:?}");
    }

    #[test]
    fn soa_predictions_have_k_distinct_labels() {
        let class = gen_monotone_class(4, 4, 1 << 20).unwrap();
        let mut soa = SoaListLearner::new(class, 2, SearchBudget::default()).unwrap();
        for x in 0..4 {
            let list = soa.predict(x).unwrap();
            assert_eq!(list.len(), 2);
            assert!(list.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn profile_normalization_is_enforced() {
        let tree = canonical_tree(2, 2);
        let bad = FnTreeProfile::new(2, |_: &[(Vertex, u8)], _: &[u8], _: u8| 0.9);
        assert!(matches!(
            check_cb_loss(&bad, &tree, 1, 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn empirical_profile_estimates_within_hoeffding_width() {
        use rand::seq::SliceRandom;
        // uniform random 2-list over 3 labels: every label misses at 1/3
        let profile = EmpiricalTreeProfile::new(3, 2000, 5, |_, _, rng| {
            let mut labels = vec![0u8, 1, 2];
            labels.shuffle(rng);
            labels.truncate(2);
            labels
        });
        let sample = vec![(vec![0u8], 1u8)];
        let w = profile.half_width(0.999);
        for y in 0..3u8 {
            let est = profile.miss(&sample, &[0, 1], y);
            assert!((est - 1.0 / 3.0).abs() <= w, "label {y}: {est} vs width {w}");
        }
        // identical queries reuse identical draws, so the estimate is a
        // deterministic map and normalization holds exactly
        let total: f64 = (0..3).map(|y| 1.0 - profile.miss(&sample, &[0, 1], y)).sum();
        assert!((total - 2.0).abs() < 1e-12);
        assert_eq!(profile.miss(&sample, &[0, 1], 0), profile.miss(&sample, &[0, 1], 0));
    }
}
