//! Constructive Ramsey machinery: pigeonhole for trees, the chain Ramsey
//! theorem for b-ary trees, classical hypergraph Ramsey at desk scale, and
//! tower / iterated-logarithm arithmetic.
//!
//! Hosts are never materialized: a host is an arity plus a depth, vertices
//! are path strings, and colorings are callbacks queried lazily. The chain
//! recursion therefore runs on hosts of depth 2^40 while only ever visiting
//! a few thousand vertices. Worst-case depth requirements are still
//! enormous (towers); `required_depth` reports them exactly and the
//! desk-scale gate refuses parameter combinations whose requirement exceeds
//! a configured cap.
//!
//! All searches scan deterministically, child 0 first.

use crate::error::{Error, Result};
use crate::trees::{ImplicitTree, Vertex};
pub use num::bigint::BigUint;
use num::{One, ToPrimitive, Zero};
use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

/// Cap on intermediate big-integer sizes, in bits.
#[derive(Debug, Clone, Copy)]
pub struct BitBudget {
    pub max_bits: u64,
}

impl Default for BitBudget {
    fn default() -> Self {
        BitBudget { max_bits: 1 << 20 }
    }
}

/// twr_(t)(x): x for t = 1, else 2^twr_(t-1)(x).
pub fn tower(t: u32, x: u64, budget: BitBudget) -> Result<BigUint> {
    tower_big(t, BigUint::from(x), budget)
}

pub fn tower_big(t: u32, x: BigUint, budget: BitBudget) -> Result<BigUint> {
    if t < 1 {
        return Err(Error::InvalidArgument("tower height must be >= 1".into()));
    }
    let mut v = x;
    for _ in 1..t {
        let exp = v.to_u64().filter(|&e| e <= budget.max_bits).ok_or(Error::Budget {
            what: "tower exponent exceeds the big-integer bit budget".into(),
            limit: budget.max_bits,
            certified_lower_bound: None,
        })?;
        v = BigUint::one() << exp;
    }
    Ok(v)
}

/// log_(t)(x): x for t = 0, else log2 applied t times. Errors when an
/// intermediate value is non-positive, where the next log is undefined.
pub fn log_iter(t: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidArgument("log_iter needs x > 0".into()));
    }
    let mut v = x;
    for _ in 0..t {
        if v <= 0.0 {
            return Err(Error::InvalidArgument(
                "iterated logarithm left the positive reals".into(),
            ));
        }
        v = v.log2();
    }
    Ok(v)
}

/// log*(x) = min { t : log_(t)(x) <= 1 }.
pub fn log_star(x: f64) -> Result<u32> {
    if !(x > 0.0) {
        return Err(Error::InvalidArgument("log_star needs x > 0".into()));
    }
    let mut v = x;
    let mut t = 0;
    while v > 1.0 {
        v = v.log2();
        t += 1;
    }
    Ok(t)
}

/// log* for big integers: one exact bit-length collapse, then floats.
pub fn log_star_big(x: &BigUint) -> Result<u32> {
    if x.is_zero() {
        return Err(Error::InvalidArgument("log_star needs x > 0".into()));
    }
    if let Some(v) = x.to_f64() {
        return log_star(v);
    }
    let bits = x.bits();
    // log2(x) is within 1 of bits; a unit either way cannot change log* by
    // more than the one extra level we count here.
    Ok(1 + log_star(bits as f64)?)
}

fn ceil_log2(c: u64) -> u64 {
    assert!(c >= 1);
    64 - (c - 1).leading_zeros() as u64
}

/// Worst-case host depth for `ramsey_subtree(d, m, c, b)`:
/// `d*c` for m = 1, and the chain-Ramsey upper bound
/// `twr_(m)(5 b^(m-2) d c^(b^(m-1)) log2 c)` for m >= 2. `log2 c` is
/// rounded up so the bound stays an exact integer (rounding up keeps it
/// valid; the bound is monotone in its argument).
pub fn required_depth(d: u64, m: u32, c: u64, b: u64, budget: BitBudget) -> Result<BigUint> {
    if m < 1 || b < 2 || c < 1 || d < 1 {
        return Err(Error::InvalidArgument(
            "required_depth needs m >= 1, b >= 2, c >= 1, d >= 1".into(),
        ));
    }
    if m == 1 {
        return Ok(BigUint::from(d) * BigUint::from(c));
    }
    if d < m as u64 {
        return Err(Error::InvalidArgument("required_depth needs d >= m".into()));
    }
    if c < 2 {
        return Err(Error::InvalidArgument("required_depth needs c >= 2 for m >= 2".into()));
    }
    let chain_exp = (m as u64)
        .checked_sub(1)
        .and_then(|e| b.checked_pow(e.try_into().ok()?))
        .ok_or(Error::Budget {
            what: "required_depth exponent b^(m-1) overflows".into(),
            limit: budget.max_bits,
            certified_lower_bound: None,
        })?;
    // c^(b^(m-1)), budgeted by its bit length
    if chain_exp.saturating_mul(ceil_log2(c).max(1)) > budget.max_bits {
        return Err(Error::Budget {
            what: "required_depth inner power exceeds the bit budget".into(),
            limit: budget.max_bits,
            certified_lower_bound: None,
        });
    }
    let c_pow = BigUint::from(c).pow(chain_exp as u32);
    let x = BigUint::from(5u32)
        * BigUint::from(b).pow(m - 2)
        * BigUint::from(d)
        * c_pow
        * BigUint::from(ceil_log2(c));
    tower_big(m, x, budget)
}

/// Vertex coloring queried lazily by path.
pub trait VertexColoring {
    fn color(&self, v: &[u8]) -> u64;
    fn color_count(&self) -> u64;
}

/// Coloring of m-chains, queried lazily; chains arrive sorted by depth.
pub trait ChainColoring {
    fn color(&self, chain: &[Vertex]) -> u64;
    fn color_count(&self) -> u64;
}

pub struct FnVertexColoring<F: Fn(&[u8]) -> u64> {
    f: F,
    count: u64,
}

impl<F: Fn(&[u8]) -> u64> FnVertexColoring<F> {
    pub fn new(count: u64, f: F) -> Self {
        FnVertexColoring { f, count }
    }
}

impl<F: Fn(&[u8]) -> u64> VertexColoring for FnVertexColoring<F> {
    fn color(&self, v: &[u8]) -> u64 {
        (self.f)(v)
    }
    fn color_count(&self) -> u64 {
        self.count
    }
}

pub struct FnChainColoring<F: Fn(&[Vertex]) -> u64> {
    f: F,
    count: u64,
}

impl<F: Fn(&[Vertex]) -> u64> FnChainColoring<F> {
    pub fn new(count: u64, f: F) -> Self {
        FnChainColoring { f, count }
    }
}

impl<F: Fn(&[Vertex]) -> u64> ChainColoring for FnChainColoring<F> {
    fn color(&self, chain: &[Vertex]) -> u64 {
        (self.f)(chain)
    }
    fn color_count(&self) -> u64 {
        self.count
    }
}

/// Pseudorandom chain coloring addressed by seed; reproducible and
/// consistent across repeated queries of the same chain.
pub struct SeededChainColoring {
    pub seed: u64,
    pub colors: u64,
}

impl ChainColoring for SeededChainColoring {
    fn color(&self, chain: &[Vertex]) -> u64 {
        let mut h = crate::rng::derive_seed(self.seed, "chain-coloring", &[chain.len() as u64]);
        for v in chain {
            h = crate::rng::derive_seed(h, "chain-vertex", &[v.len() as u64]);
            for &t in v.iter() {
                h = crate::rng::derive_seed(h, "t", &[t as u64]);
            }
        }
        h % self.colors
    }
    fn color_count(&self) -> u64 {
        self.colors
    }
}

/// Embedding of a complete b-ary subtree: abstract positions (paths of the
/// embedded tree) to host vertices, preserving subtree ordinals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtreeEmbedding {
    arity: usize,
    depth: u64,
    map: BTreeMap<Vertex, Vertex>,
}

impl SubtreeEmbedding {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    pub fn host_vertex(&self, position: &[u8]) -> Option<&Vertex> {
        self.map.get(position)
    }

    pub fn positions(&self) -> impl Iterator<Item = (&Vertex, &Vertex)> {
        self.map.iter()
    }

    /// Structural re-verification: complete to `depth`, and the image of
    /// each child position lies strictly inside the matching child subtree
    /// of its parent's image.
    pub fn verify_structure(&self, host: &ImplicitTree) -> Result<()> {
        if self.arity != host.arity() {
            return Err(Error::InvalidArgument("embedding arity != host arity".into()));
        }
        let expect: u64 = {
            let mut total = 0u64;
            let mut level = 1u64;
            for _ in 0..=self.depth {
                total += level;
                level = level.saturating_mul(self.arity as u64);
            }
            total
        };
        if self.map.len() as u64 != expect {
            return Err(Error::InvalidArgument(format!(
                "embedding has {} positions, expected {expect}",
                self.map.len()
            )));
        }
        for (pos, hv) in &self.map {
            if pos.len() as u64 > self.depth || !host.contains(hv) {
                return Err(Error::InvalidArgument("embedding leaves the host".into()));
            }
            if pos.is_empty() {
                continue;
            }
            let parent = &self.map[&pos[..pos.len() - 1].to_vec()];
            let turn = pos[pos.len() - 1];
            let mut gate = parent.clone();
            gate.push(turn);
            if hv.len() < gate.len() || hv[..gate.len()] != gate[..] {
                return Err(Error::InvalidArgument(format!(
                    "position {pos:?} not inside child {turn} of its parent's image"
                )));
            }
        }
        Ok(())
    }

    /// Deepest host level the embedding touches; on gated runs this is the
    /// consumption certified against `required_depth`.
    pub fn max_host_depth(&self) -> u64 {
        self.map.values().map(|v| v.len() as u64).max().unwrap_or(0)
    }

    /// All m-chains of embedded positions, as host vertex chains.
    pub fn host_chains(&self, m: usize) -> Vec<Vec<Vertex>> {
        let positions: Vec<&Vertex> = self.map.keys().collect();
        let mut out = Vec::new();
        let mut stack: Vec<Vec<usize>> = (0..positions.len()).map(|i| vec![i]).collect();
        stack.reverse();
        while let Some(chain) = stack.pop() {
            if chain.len() == m {
                out.push(chain.iter().map(|&i| self.map[positions[i]].clone()).collect());
                continue;
            }
            let last = positions[*chain.last().expect("nonempty")];
            for (j, p) in positions.iter().enumerate() {
                if p.len() > last.len() && p[..last.len()] == last[..] {
                    let mut c = chain.clone();
                    c.push(j);
                    stack.push(c);
                }
            }
        }
        out
    }
}

/// Checks that equal-type m-chains inside the embedded subtree receive
/// equal colors, and returns the number of distinct colors observed.
pub fn verify_type_monochromatic(
    emb: &SubtreeEmbedding,
    coloring: &dyn ChainColoring,
    m: usize,
) -> Result<usize> {
    let mut by_type: HashMap<Vec<u8>, u64> = HashMap::new();
    let mut seen = std::collections::HashSet::new();
    for chain in emb.host_chains(m) {
        let mut ty = Vec::with_capacity(m.saturating_sub(1));
        for w in chain.windows(2) {
            ty.push(w[1][w[0].len()]);
        }
        let color = coloring.color(&chain);
        seen.insert(color);
        if let Some(&prev) = by_type.get(&ty) {
            if prev != color {
                return Err(Error::InvalidArgument(format!(
                    "chains of type {ty:?} got colors {prev} and {color}"
                )));
            }
        } else {
            by_type.insert(ty, color);
        }
    }
    Ok(seen.len())
}

/// All k-subsets of 0..n as index vectors, lexicographic; the single empty
/// subset when k = 0, nothing when k > n.
fn index_combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - (k - i) {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

struct QueryBudget {
    left: u64,
    limit: u64,
}

impl QueryBudget {
    fn new(limit: u64) -> Self {
        QueryBudget { left: limit, limit }
    }

    fn spend(&mut self, what: &str) -> Result<()> {
        if self.left == 0 {
            return Err(Error::Budget {
                what: what.into(),
                limit: self.limit,
                certified_lower_bound: None,
            });
        }
        self.left -= 1;
        Ok(())
    }
}

struct EmbNode {
    vertex: Vertex,
    children: Vec<EmbNode>,
}

fn emb_from_node(arity: usize, depth: u64, node: &EmbNode) -> SubtreeEmbedding {
    fn walk(node: &EmbNode, pos: &mut Vertex, map: &mut BTreeMap<Vertex, Vertex>) {
        map.insert(pos.clone(), node.vertex.clone());
        for (r, c) in node.children.iter().enumerate() {
            pos.push(r as u8);
            walk(c, pos, map);
            pos.pop();
        }
    }
    let mut map = BTreeMap::new();
    walk(node, &mut Vec::new(), &mut map);
    SubtreeEmbedding { arity, depth, map }
}

/// Monochromatic-subtree search behind the pigeonhole principle for trees:
/// per-color depth budgets, initially `d` each. A vertex either closes its
/// color's budget (a depth-0 piece), or recurses with that budget reduced;
/// children that come back in a different color bubble up unchanged, and b
/// same-colored children assemble one level.
fn php_search(
    host: &ImplicitTree,
    coloring: &dyn VertexColoring,
    v: Vertex,
    budgets: &HashMap<u64, u64>,
    d: u64,
    queries: &mut QueryBudget,
) -> Result<(u64, EmbNode)> {
    queries.spend("pigeonhole color queries")?;
    let j = coloring.color(&v);
    let remaining = *budgets.get(&j).unwrap_or(&d);
    if remaining == 0 {
        return Ok((j, EmbNode { vertex: v, children: Vec::new() }));
    }
    if !host.is_internal(&v) {
        return Err(Error::Precondition(
            "pigeonhole ran out of host depth; host shallower than d * colors".into(),
        ));
    }
    let mut lowered = budgets.clone();
    lowered.insert(j, remaining - 1);
    let mut children = Vec::with_capacity(host.arity());
    for r in 0..host.arity() {
        let mut cv = v.clone();
        cv.push(r as u8);
        let (i, node) = php_search(host, coloring, cv, &lowered, d, queries)?;
        if i != j {
            return Ok((i, node));
        }
        children.push(node);
    }
    Ok((j, EmbNode { vertex: v, children }))
}

pub const DEFAULT_QUERY_BUDGET: u64 = 50_000_000;

/// Monochromatic complete subtree of depth `d` under a vertex coloring.
/// Requires host depth >= d * colorCount; that bound is the contract and is
/// checked before any color is queried.
pub fn pigeonhole_subtree(
    host: &ImplicitTree,
    coloring: &dyn VertexColoring,
    d: u64,
    query_budget: u64,
) -> Result<(u64, SubtreeEmbedding)> {
    let need = d.saturating_mul(coloring.color_count());
    if host.depth() < need {
        return Err(Error::Precondition(format!(
            "pigeonhole needs depth >= d * colors = {need}, host has {}",
            host.depth()
        )));
    }
    let mut queries = QueryBudget::new(query_budget);
    let (color, node) = php_search(host, coloring, Vec::new(), &HashMap::new(), d, &mut queries)?;
    let emb = emb_from_node(host.arity(), d, &node);
    emb.verify_structure(host)?;
    Ok((color, emb))
}

/// How strictly `ramsey_subtree` enforces its worst-case depth contract.
#[derive(Debug, Clone)]
pub enum GateMode {
    /// Refuse parameter combinations whose `required_depth` exceeds the cap,
    /// and hosts shallower than `required_depth`.
    Strict { cap: BigUint },
    /// Run the search opportunistically on whatever host is given; used by
    /// the comparison-based extraction pipeline, where the worst-case
    /// requirement is tower-sized at any usable granularity but real
    /// colorings are far tamer. Failures surface as budget errors.
    BestEffort,
}

#[derive(Debug, Clone)]
pub struct RamseyOptions {
    pub gate: GateMode,
    pub query_budget: u64,
}

impl Default for RamseyOptions {
    fn default() -> Self {
        RamseyOptions {
            gate: GateMode::Strict { cap: BigUint::one() << 48 },
            query_budget: DEFAULT_QUERY_BUDGET,
        }
    }
}

const MAX_STAR_POSITIONS: u64 = 1 << 21;

/// Interns derived-chain color tuples as dense ids for the recursive call.
struct StarColoring<'a> {
    arity: usize,
    star_depth: u64,
    assign: &'a HashMap<Vertex, Vertex>,
    inner: &'a dyn ChainColoring,
    declared: u64,
    intern: RefCell<HashMap<Vec<u64>, u64>>,
}

impl<'a> StarColoring<'a> {
    fn tuple_for(&self, chain: &[Vertex]) -> Vec<u64> {
        let last = chain.last().expect("nonempty chain");
        if last.len() as u64 == self.star_depth {
            // chains ending at a leaf of the derived tree carry an arbitrary
            // fixed color; reuse the all-zeros tuple so no new color appears
            return vec![0; self.arity];
        }
        let host_chain: Vec<Vertex> = chain.iter().map(|p| self.assign[p].clone()).collect();
        (0..self.arity)
            .map(|r| {
                let mut child = last.clone();
                child.push(r as u8);
                let mut q = host_chain.clone();
                q.push(self.assign[&child].clone());
                self.inner.color(&q)
            })
            .collect()
    }
}

impl<'a> ChainColoring for StarColoring<'a> {
    fn color(&self, chain: &[Vertex]) -> u64 {
        let tuple = self.tuple_for(chain);
        let mut intern = self.intern.borrow_mut();
        let next = intern.len() as u64;
        *intern.entry(tuple).or_insert(next)
    }
    fn color_count(&self) -> u64 {
        self.declared
    }
}

/// Lazy, constraint-carrying build of the derived tree T*: position sigma-r
/// commits an equivalence class when its vertex is placed, and every later
/// vertex inside that region must match it. Candidates are scanned in BFS
/// order (child 0 first) with backtracking.
struct StarBuilder<'a> {
    host: &'a ImplicitTree,
    chi: &'a dyn ChainColoring,
    m: u32,
    t: u64,
    assign: HashMap<Vertex, Vertex>,
    committed: HashMap<Vertex, Vec<u64>>,
}

const MAX_CANDIDATES_PER_POSITION: u64 = 100_000;

impl<'a> StarBuilder<'a> {
    /// Equivalence class of host vertex `x` relative to the ancestors of
    /// position `tau`: all chi-colors of chains A + {u_tau, x} over
    /// (m-2)-subsets A of tau's ancestor chain.
    fn class_of(&self, tau: &[u8], x: &Vertex, queries: &mut QueryBudget) -> Result<Vec<u64>> {
        let take = self.m as usize - 2;
        let ancestors: Vec<&Vertex> = (0..tau.len())
            .map(|j| &self.assign[&tau[..j].to_vec()])
            .collect();
        let u_tau = &self.assign[&tau.to_vec()];
        let mut out = Vec::new();
        for combo in index_combinations(ancestors.len(), take) {
            let mut chain: Vec<Vertex> = combo.iter().map(|&i| ancestors[i].clone()).collect();
            chain.push(u_tau.clone());
            chain.push(x.clone());
            queries.spend("ramsey chain-color queries")?;
            out.push(self.chi.color(&chain));
        }
        Ok(out)
    }

    fn candidate(&self, position: &[u8], index: u64) -> Option<Vertex> {
        let parent = &position[..position.len() - 1];
        let turn = position[position.len() - 1];
        let mut root = self.assign[&parent.to_vec()].clone();
        root.push(turn);
        // index'th vertex of the region in BFS order
        let b = self.host.arity() as u64;
        let mut level = 0u64;
        let mut level_size = 1u64;
        let mut rem = index;
        while rem >= level_size {
            rem -= level_size;
            level += 1;
            level_size = level_size.saturating_mul(b);
        }
        // leave room for the positions still to be placed below this one
        let levels_below = self.t - position.len() as u64;
        let depth = root.len() as u64 + level;
        if depth + levels_below > self.host.depth() {
            return None;
        }
        let mut v = root;
        let mut digits = vec![0u8; level as usize];
        for slot in digits.iter_mut().rev() {
            *slot = (rem % b) as u8;
            rem /= b;
        }
        v.extend_from_slice(&digits);
        Some(v)
    }

    fn satisfies(&self, position: &[u8], x: &Vertex, queries: &mut QueryBudget) -> Result<bool> {
        for j in 0..position.len() {
            let tau = &position[..j];
            let region = &position[..j + 1];
            let class = self.class_of(tau, x, queries)?;
            match self.committed.get(&region.to_vec()) {
                Some(expected) if *expected != class => return Ok(false),
                _ => {}
            }
        }
        Ok(true)
    }

    fn place(&mut self, position: &[u8], x: Vertex, queries: &mut QueryBudget) -> Result<()> {
        let own_region = position.to_vec();
        if !self.committed.contains_key(&own_region) && !position.is_empty() {
            let tau = &position[..position.len() - 1];
            let class = self.class_of(tau, &x, queries)?;
            self.committed.insert(own_region, class);
        }
        self.assign.insert(position.to_vec(), x);
        Ok(())
    }

    fn remove(&mut self, position: &[u8]) {
        self.assign.remove(&position.to_vec());
        self.committed.remove(&position.to_vec());
    }
}

fn bfs_positions(b: usize, t: u64) -> Vec<Vertex> {
    let mut out = vec![Vec::new()];
    let mut level: Vec<Vertex> = vec![Vec::new()];
    for _ in 0..t {
        let mut next = Vec::new();
        for p in &level {
            for r in 0..b {
                let mut q = p.clone();
                q.push(r as u8);
                next.push(q);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

fn positions_of_depth(b: usize, t: u64) -> u64 {
    let mut total = 1u64;
    let mut level = 1u64;
    for _ in 0..t {
        level = level.saturating_mul(b as u64);
        total = total.saturating_add(level);
    }
    total
}

/// Largest derived-tree depth an opportunistic run will materialize.
fn affordable_star_depth(b: usize, host_depth: u64) -> u64 {
    let mut t = 0u64;
    while t + 1 < host_depth && positions_of_depth(b, t + 1) <= 8192 {
        t += 1;
    }
    t
}

fn search_ramsey(
    host: &ImplicitTree,
    coloring: &dyn ChainColoring,
    m: u32,
    d: u64,
    queries: &mut QueryBudget,
    enforce: bool,
) -> Result<SubtreeEmbedding> {
    let b = host.arity();
    if m == 1 {
        // a 1-chain coloring is a vertex coloring and type-monochromatic
        // collapses to monochromatic
        let vc = FnVertexColoring::new(coloring.color_count(), |v: &[u8]| {
            coloring.color(&[v.to_vec()])
        });
        if enforce {
            let need = d.saturating_mul(vc.color_count());
            if host.depth() < need {
                return Err(Error::Precondition(format!(
                    "chain recursion base needs depth {need}, host has {}",
                    host.depth()
                )));
            }
        }
        let (_, node) = php_search(host, &vc, Vec::new(), &HashMap::new(), d, queries)?;
        return Ok(emb_from_node(b, d, &node));
    }

    let c = coloring.color_count();
    let c_pow_b = c.checked_pow(b as u32).unwrap_or(u64::MAX);
    // depth of the derived tree: enough for the (m-1)-chain recursion over
    // c^b colors in the enforced regime; opportunistic runs fall back to
    // whatever depth fits the position budget
    let formula_t = required_depth(d, m - 1, c_pow_b, b as u64, BitBudget::default())
        .ok()
        .and_then(|t| t.to_u64());
    let t = match (formula_t, enforce) {
        (Some(t), _) if positions_of_depth(b, t) <= MAX_STAR_POSITIONS => t,
        (_, false) => affordable_star_depth(b, host.depth()),
        _ => {
            return Err(Error::Budget {
                what: "derived tree exceeds the position budget".into(),
                limit: MAX_STAR_POSITIONS,
                certified_lower_bound: None,
            })
        }
    };

    let mut builder = StarBuilder {
        host,
        chi: coloring,
        m,
        t,
        assign: HashMap::new(),
        committed: HashMap::new(),
    };

    let all_positions = bfs_positions(b, t);
    let preset = m as usize - 2;
    let mut free = Vec::new();
    for p in &all_positions {
        if p.len() <= preset {
            if p.len() as u64 > host.depth() {
                return Err(Error::Precondition("host shallower than m - 2".into()));
            }
            builder.assign.insert(p.clone(), p.clone());
        } else {
            free.push(p.clone());
        }
    }

    // backtracking over the BFS-ordered free positions
    let mut cand_idx = vec![0u64; free.len()];
    let mut i = 0usize;
    while i < free.len() {
        let position = free[i].clone();
        let mut placed = false;
        while cand_idx[i] < MAX_CANDIDATES_PER_POSITION {
            let idx = cand_idx[i];
            cand_idx[i] += 1;
            let x = match builder.candidate(&position, idx) {
                Some(x) => x,
                None => break,
            };
            queries.spend("ramsey candidate scans")?;
            if builder.satisfies(&position, &x, queries)? {
                builder.place(&position, x, queries)?;
                placed = true;
                break;
            }
        }
        if placed {
            i += 1;
        } else {
            cand_idx[i] = 0;
            if i == 0 {
                return Err(Error::Precondition(
                    "no admissible derived tree in this host".into(),
                ));
            }
            i -= 1;
            builder.remove(&free[i]);
        }
    }

    let star_host = ImplicitTree::new(b, t)?;
    let star_coloring = StarColoring {
        arity: b,
        star_depth: t,
        assign: &builder.assign,
        inner: coloring,
        declared: c_pow_b,
        intern: RefCell::new(HashMap::new()),
    };
    let inner = search_ramsey(&star_host, &star_coloring, m - 1, d, queries, enforce)?;

    let mut map = BTreeMap::new();
    for (pos, star_pos) in inner.positions() {
        map.insert(pos.clone(), builder.assign[star_pos].clone());
    }
    Ok(SubtreeEmbedding { arity: b, depth: d, map })
}

/// Type-monochromatic complete subtree of depth `d` for an m-chain coloring,
/// by the derived-tree recursion: the base case is the tree pigeonhole, and
/// each inductive step builds T* through the per-vertex equivalence-class
/// pigeonhole and recurses on the induced (m-1)-chain coloring over c^b
/// colors. At most b^(m-1) colors appear inside the output.
pub fn ramsey_subtree(
    host: &ImplicitTree,
    coloring: &dyn ChainColoring,
    m: u32,
    d: u64,
    opts: &RamseyOptions,
) -> Result<SubtreeEmbedding> {
    if m < 1 {
        return Err(Error::InvalidArgument("chain size m must be >= 1".into()));
    }
    if let GateMode::Strict { cap } = &opts.gate {
        let required = match required_depth(d, m, coloring.color_count(), host.arity() as u64, BitBudget::default()) {
            Ok(r) => r,
            Err(Error::Budget { limit, .. }) => {
                return Err(Error::Gate {
                    required: format!("a tower value wider than 2^{limit} bits"),
                    cap: cap.to_string(),
                })
            }
            Err(e) => return Err(e),
        };
        if &required > cap {
            return Err(Error::Gate { required: required.to_string(), cap: cap.to_string() });
        }
        if BigUint::from(host.depth()) < required {
            return Err(Error::Precondition(format!(
                "host depth {} below required depth {required}",
                host.depth()
            )));
        }
    }
    let enforce = matches!(opts.gate, GateMode::Strict { .. });
    let mut queries = QueryBudget::new(opts.query_budget);
    let emb = search_ramsey(host, coloring, m, d, &mut queries, enforce)?;
    emb.verify_structure(host)?;
    Ok(emb)
}

/// Coloring of t-subsets of `0..n`, queried lazily.
pub trait SubsetColoring {
    fn color(&self, subset: &[usize]) -> u64;
}

pub struct FnSubsetColoring<F: Fn(&[usize]) -> u64> {
    f: F,
}

impl<F: Fn(&[usize]) -> u64> FnSubsetColoring<F> {
    pub fn new(f: F) -> Self {
        FnSubsetColoring { f }
    }
}

impl<F: Fn(&[usize]) -> u64> SubsetColoring for FnSubsetColoring<F> {
    fn color(&self, subset: &[usize]) -> u64 {
        (self.f)(subset)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HomogeneousOutcome {
    Found(Vec<usize>),
    /// The exhaustive search completed without a homogeneous set; only
    /// possible below the classical Ramsey threshold.
    NotFound { subsets_checked: u64 },
}

/// Classical Ramsey threshold twr_(t)(3 s q log2 q) from the hypergraph
/// Ramsey theorem; above it a homogeneous subset of size s always exists.
pub fn classical_ramsey_threshold(t: u32, s: u64, q: u64, budget: BitBudget) -> Result<BigUint> {
    let x = 3u64
        .checked_mul(s)
        .and_then(|v| v.checked_mul(q))
        .and_then(|v| v.checked_mul(ceil_log2(q).max(1)))
        .ok_or(Error::Budget {
            what: "ramsey threshold argument overflows".into(),
            limit: budget.max_bits,
            certified_lower_bound: None,
        })?;
    tower(t.max(1), x, budget)
}

/// Exhaustive search for a size-s subset of `0..n` all of whose t-subsets
/// share one color. Subsets are scanned lexicographically; the budget caps
/// color queries. Full exhaustion with t >= 3 is allowed only while
/// C(n, t) stays within 10^6.
pub fn homogeneous_subset(
    n: usize,
    t: usize,
    coloring: &dyn SubsetColoring,
    s: usize,
    query_budget: u64,
) -> Result<HomogeneousOutcome> {
    if t < 1 || t > s {
        return Err(Error::InvalidArgument("need 1 <= t <= s".into()));
    }
    if s > n {
        return Err(Error::Precondition(format!("target size {s} exceeds universe {n}")));
    }
    if t >= 3 {
        let c = crate::concepts::binomial(n as u64, t as u64);
        if c > 1_000_000 {
            return Err(Error::Budget {
                what: format!("C({n},{t}) = {c} t-subsets; full exhaustion refused"),
                limit: 1_000_000,
                certified_lower_bound: None,
            });
        }
    }
    let mut queries = QueryBudget::new(query_budget);
    let mut checked = 0u64;

    let mut subset: Vec<usize> = (0..s).collect();
    loop {
        checked += 1;
        if monochromatic(&subset, t, coloring, &mut queries)? {
            return Ok(HomogeneousOutcome::Found(subset));
        }
        // next lexicographic s-subset of 0..n
        let mut i = s;
        loop {
            if i == 0 {
                return Ok(HomogeneousOutcome::NotFound { subsets_checked: checked });
            }
            i -= 1;
            if subset[i] < n - (s - i) {
                subset[i] += 1;
                for j in i + 1..s {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn monochromatic(
    subset: &[usize],
    t: usize,
    coloring: &dyn SubsetColoring,
    queries: &mut QueryBudget,
) -> Result<bool> {
    let mut first: Option<u64> = None;
    let mut idx: Vec<usize> = (0..t).collect();
    loop {
        let sub: Vec<usize> = idx.iter().map(|&i| subset[i]).collect();
        queries.spend("homogeneous subset color queries")?;
        let c = coloring.color(&sub);
        match first {
            None => first = Some(c),
            Some(f) if f != c => return Ok(false),
            _ => {}
        }
        let mut i = t;
        loop {
            if i == 0 {
                return Ok(true);
            }
            i -= 1;
            if idx[i] < subset.len() - (t - i) {
                idx[i] += 1;
                for j in i + 1..t {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tower_and_log_star_values() {
        let b = BitBudget::default();
        assert_eq!(tower(3, 2, b).unwrap(), BigUint::from(16u32));
        assert_eq!(tower(1, 7, b).unwrap(), BigUint::from(7u32));
        assert_eq!(tower(2, 40, b).unwrap(), BigUint::one() << 40);
        assert_eq!(log_star(1.0).unwrap(), 0);
        assert_eq!(log_star(16.0).unwrap(), 3);
        assert_eq!(log_star_big(&BigUint::from(16u32)).unwrap(), 3);
        assert!((log_iter(2, 16.0).unwrap() - 2.0).abs() < 1e-12);
        // tower(4, 3) = 2^(2^8) fits; tower(5, 3) exceeds the bit budget
        assert!(tower(4, 3, b).is_ok());
        assert!(matches!(tower(5, 3, b), Err(Error::Budget { .. })));
    }

    #[test]
    fn required_depth_values() {
        let b = BitBudget::default();
        assert_eq!(required_depth(3, 1, 4, 2, b).unwrap(), BigUint::from(12u32));
        // twr_(2)(5 * 1 * 2 * 2^2 * 1) = 2^40
        assert_eq!(required_depth(2, 2, 2, 2, b).unwrap(), BigUint::one() << 40);
        assert!(required_depth(3, 2, 2, 2, b).unwrap() > required_depth(2, 2, 2, 2, b).unwrap());
        assert!(matches!(required_depth(3, 3, 2, 2, b), Err(Error::Budget { .. })));
    }

    #[test]
    fn pigeonhole_single_color_is_identity() {
        let host = ImplicitTree::new(2, 3).unwrap();
        let vc = FnVertexColoring::new(1, |_| 0);
        let (color, emb) = pigeonhole_subtree(&host, &vc, 3, 1 << 20).unwrap();
        assert_eq!(color, 0);
        for (pos, hv) in emb.positions() {
            assert_eq!(pos, hv);
        }
    }

    #[test]
    fn pigeonhole_depth_bound_is_the_contract() {
        let host = ImplicitTree::new(2, 3).unwrap();
        let vc = FnVertexColoring::new(2, |_| 0);
        assert!(matches!(
            pigeonhole_subtree(&host, &vc, 2, 1 << 20),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn pigeonhole_exhaustive_two_colorings_depth_two() {
        // all 2-colorings of the 7-vertex depth-2 binary tree, d = 1
        let host = ImplicitTree::new(2, 2).unwrap();
        let verts: Vec<Vec<u8>> =
            vec![vec![], vec![0], vec![1], vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]];
        for mask in 0u32..128 {
            let verts2 = verts.clone();
            let vc = FnVertexColoring::new(2, move |v: &[u8]| {
                let idx = verts2.iter().position(|u| u == v).unwrap();
                u64::from((mask >> idx) & 1)
            });
            let (color, emb) = pigeonhole_subtree(&host, &vc, 1, 1 << 20).unwrap();
            emb.verify_structure(&host).unwrap();
            for (_, hv) in emb.positions() {
                assert_eq!(vc.color(hv), color, "mask {mask}");
            }
        }
    }

    #[test]
    fn ramsey_m1_delegates_to_pigeonhole() {
        let host = ImplicitTree::new(3, 6).unwrap();
        let coloring = FnChainColoring::new(2, |chain: &[Vertex]| (chain[0].len() % 2) as u64);
        let emb = ramsey_subtree(&host, &coloring, 1, 2, &RamseyOptions::default()).unwrap();
        let colors = verify_type_monochromatic(&emb, &coloring, 1).unwrap();
        assert_eq!(colors, 1);
    }

    #[test]
    fn ramsey_constant_coloring_is_deterministic() {
        let host = ImplicitTree::new(2, 1 << 40).unwrap();
        let coloring = FnChainColoring::new(2, |_: &[Vertex]| 1);
        let opts = RamseyOptions::default();
        let a = ramsey_subtree(&host, &coloring, 2, 2, &opts).unwrap();
        let b = ramsey_subtree(&host, &coloring, 2, 2, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(verify_type_monochromatic(&a, &coloring, 2).unwrap(), 1);
    }

    #[test]
    fn ramsey_seeded_colorings_give_type_monochromatic_subtrees() {
        let host = ImplicitTree::new(2, 1 << 40).unwrap();
        let opts = RamseyOptions::default();
        let required = required_depth(2, 2, 2, 2, BitBudget::default()).unwrap();
        for seed in 0..5u64 {
            let coloring = SeededChainColoring { seed, colors: 2 };
            let emb = ramsey_subtree(&host, &coloring, 2, 2, &opts).unwrap();
            emb.verify_structure(&host).unwrap();
            let colors = verify_type_monochromatic(&emb, &coloring, 2).unwrap();
            assert!(colors <= 2, "seed {seed}: {colors} colors on equal types");
            // consumption never exceeds the worst-case requirement
            assert!(BigUint::from(emb.max_host_depth()) <= required);
        }
    }

    #[test]
    fn ramsey_gate_refuses_tower_parameters() {
        let host = ImplicitTree::new(2, 1 << 40).unwrap();
        let coloring = SeededChainColoring { seed: 0, colors: 2 };
        let err = ramsey_subtree(&host, &coloring, 3, 3, &RamseyOptions::default());
        assert!(matches!(err, Err(Error::Gate { .. })), "{err:?}");

        let shallow = ImplicitTree::new(2, 100).unwrap();
        let err = ramsey_subtree(&shallow, &coloring, 2, 2, &RamseyOptions::default());
        assert!(matches!(err, Err(Error::Precondition(_))), "{err:?}");
    }

    #[test]
    fn homogeneous_single_color_takes_first_points() {
        let coloring = FnSubsetColoring::new(|_: &[usize]| 0);
        let out = homogeneous_subset(10, 2, &coloring, 4, 1 << 20).unwrap();
        assert_eq!(out, HomogeneousOutcome::Found(vec![0, 1, 2, 3]));
    }

    #[test]
    fn homogeneous_triangle_in_every_two_coloring_of_k6() {
        // R(3,3) = 6: every 2-coloring of the 15 edges has a monochromatic
        // triangle
        for mask in 0u32..(1 << 15) {
            let coloring = FnSubsetColoring::new(move |e: &[usize]| {
                let (a, b) = (e[0], e[1]);
                let idx = (0..a).map(|i| 5 - i).sum::<usize>() + (b - a - 1);
                u64::from((mask >> idx) & 1)
            });
            match homogeneous_subset(6, 2, &coloring, 3, 1 << 20).unwrap() {
                HomogeneousOutcome::Found(_) => {}
                HomogeneousOutcome::NotFound { .. } => panic!("no triangle for mask {mask}"),
            }
        }
    }

    #[test]
    fn homogeneous_guards() {
        let coloring = FnSubsetColoring::new(|_: &[usize]| 0);
        assert!(matches!(
            homogeneous_subset(4, 2, &coloring, 5, 1 << 20),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            homogeneous_subset(300, 3, &coloring, 4, 1 << 20),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn threshold_formula() {
        let b = BitBudget::default();
        // twr_(2)(3 * 3 * 2 * 1) = 2^18
        assert_eq!(
            classical_ramsey_threshold(2, 3, 2, b).unwrap(),
            BigUint::from(1u64 << 18)
        );
    }
}
