//! Differential-privacy primitives and the two privacy-attack reductions:
//! the interior-point reduction driven by a learner's loss profile on a
//! deep implicit tree, and the packing attack that identifies a member of a
//! threshold family by binary search on empirical event frequencies.
//!
//! The reduction samples one hypothesis from the learner; its per-point
//! losses are realized as independent Bernoulli draws from the loss
//! profile. Every expectation and Chernoff step in the interval analysis
//! bounds sums of per-point indicator expectations, so this realization
//! preserves them while committing to no joint dependence the analysis
//! never uses.
//!
//! Seeding: one master seed fans out counter-based streams per trial and per
//! purpose (branch turns, hypothesis draws, packing draws), so experiments
//! are bitwise reproducible and trials are independent.

use crate::error::{Error, Result};
use crate::learners::{balanced_sample, check_balanced_cb, BalancedCbCheck, PointLossProfile};
use crate::rng;
use crate::trees::{sample_branch, ImplicitTree, TreeSample};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpParams {
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventEstimate {
    pub name: String,
    pub p_first: f64,
    pub p_second: f64,
    /// Hoeffding half-width at 95% confidence for each frequency.
    pub half_width: f64,
    /// Lower confidence bound on max(ln(p/q), ln(q/p)); unbounded ratios
    /// are capped and reported one-sided.
    pub epsilon_hat: f64,
    pub one_sided: bool,
    /// Frequencies violate the claimed (epsilon, delta) beyond 3-sigma
    /// sampling slack.
    pub violates_claim: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndistReport {
    pub trials: u64,
    pub claimed: DpParams,
    pub events: Vec<EventEstimate>,
}

impl IndistReport {
    pub fn any_violation(&self) -> bool {
        self.events.iter().any(|e| e.violates_claim)
    }

    pub fn max_epsilon_hat(&self) -> f64 {
        self.events.iter().map(|e| e.epsilon_hat).fold(0.0, f64::max)
    }
}

/// Empirical (epsilon, delta)-indistinguishability of a mechanism on two
/// neighboring samples: per-event frequencies over seeded trials, with
/// confidence intervals, capped likelihood ratios, and a flag whenever an
/// event breaches the claimed envelope beyond sampling error.
pub fn estimate_indistinguishability<T, O>(
    mechanism: &dyn Fn(&[T], &mut ChaCha8Rng) -> O,
    first: &[T],
    second: &[T],
    events: &[(String, Box<dyn Fn(&O) -> bool>)],
    claimed: DpParams,
    trials: u64,
    seed: u64,
) -> Result<IndistReport>
where
    T: PartialEq,
{
    if first.len() != second.len() {
        return Err(Error::Precondition("samples must have equal length".into()));
    }
    let differing = first.iter().zip(second).filter(|(a, b)| a != b).count();
    if differing > 1 {
        return Err(Error::Precondition(format!(
            "samples differ in {differing} entries, neighboring samples differ in one"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }

    let mut hits_first = vec![0u64; events.len()];
    let mut hits_second = vec![0u64; events.len()];
    for t in 0..trials {
        let mut r1 = rng::stream(seed, "mechanism-first", &[t]);
        let out1 = mechanism(first, &mut r1);
        let mut r2 = rng::stream(seed, "mechanism-second", &[t]);
        let out2 = mechanism(second, &mut r2);
        for (i, (_, ev)) in events.iter().enumerate() {
            if ev(&out1) {
                hits_first[i] += 1;
            }
            if ev(&out2) {
                hits_second[i] += 1;
            }
        }
    }

    let n = trials as f64;
    let half_width = (f64::ln(2.0 / 0.05) / (2.0 * n)).sqrt();
    let sigma3 = 3.0 * (0.25 / n).sqrt();
    let events_out = events
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let p = hits_first[i] as f64 / n;
            let q = hits_second[i] as f64 / n;
            let (eps_hat, one_sided) = ratio_epsilon(p, q, n);
            let e = claimed.epsilon.exp();
            let violates = p > e * q + claimed.delta + (1.0 + e) * sigma3
                || q > e * p + claimed.delta + (1.0 + e) * sigma3;
            EventEstimate {
                name: name.clone(),
                p_first: p,
                p_second: q,
                half_width,
                epsilon_hat: eps_hat,
                one_sided,
                violates_claim: violates,
            }
        })
        .collect();
    Ok(IndistReport { trials, claimed, events: events_out })
}

/// ln of the larger frequency ratio; zero denominators produce a one-sided
/// bound against 1/trials instead of an infinity.
fn ratio_epsilon(p: f64, q: f64, trials: f64) -> (f64, bool) {
    let floor = 1.0 / trials;
    match (p > 0.0, q > 0.0) {
        (true, true) => ((p / q).max(q / p).ln(), false),
        (false, false) => (0.0, false),
        (true, false) => ((p / floor).ln().max(0.0), true),
        (false, true) => ((q / floor).ln().max(0.0), true),
    }
}

/// Interior point problem instance: strictly increasing depths in `1..n`,
/// read as depths on a branch of a depth-n tree.
#[derive(Debug, Clone, PartialEq)]
pub struct IppInstance {
    pub domain_depth: u64,
    pub depths: Vec<u64>,
}

/// floor(log2(n))^2, all in integers.
pub fn interval_length(n: u64) -> u64 {
    if n < 2 {
        return 0;
    }
    let lg = 63 - n.leading_zeros() as u64;
    lg * lg
}

impl IppInstance {
    pub fn new(domain_depth: u64, depths: Vec<u64>) -> Result<Self> {
        if depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("depths must be strictly increasing".into()));
        }
        if let (Some(&first), Some(&last)) = (depths.first(), depths.last()) {
            if first < 1 || last >= domain_depth {
                return Err(Error::InvalidArgument(format!(
                    "depths must lie in 1..{domain_depth}"
                )));
            }
        }
        Ok(IppInstance { domain_depth, depths })
    }

    /// Gap precondition for the reduction: consecutive inputs farther apart
    /// than the interval length.
    pub fn check_gaps(&self) -> Result<()> {
        let l = interval_length(self.domain_depth);
        for w in self.depths.windows(2) {
            if w[1] - w[0] <= l {
                return Err(Error::Precondition(format!(
                    "gap {} <= interval length {l}; rescale the instance first",
                    w[1] - w[0]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlmostCorrectInterval {
    pub start_depth: u64,
    pub length: u64,
    pub loss_count: u64,
}

/// All windows of `length` consecutive branch points whose loss count stays
/// within the almost-correct threshold loss <= length / (2(k+1)), in exact
/// integer arithmetic (the comparison is 2(k+1) * count <= length, and the
/// bound is inclusive). Deepest start first.
pub fn find_almost_correct_intervals(
    losses: &[u8],
    length: u64,
    k: usize,
) -> Result<Vec<AlmostCorrectInterval>> {
    let n = losses.len() as u64;
    if length == 0 || length > n {
        return Err(Error::InvalidArgument(format!(
            "window length {length} outside 1..={n}"
        )));
    }
    let mut out = Vec::new();
    let mut count: u64 = losses[..length as usize].iter().map(|&b| b as u64).sum();
    let threshold_holds = |c: u64| 2 * (k as u64 + 1) * c <= length;
    let mut qualifying: Vec<u64> = Vec::new();
    if threshold_holds(count) {
        qualifying.push(0);
    }
    for start in 1..=(n - length) {
        count -= losses[start as usize - 1] as u64;
        count += losses[(start + length - 1) as usize] as u64;
        if threshold_holds(count) {
            qualifying.push(start);
        }
    }
    for &start in qualifying.iter().rev() {
        let c = losses[start as usize..(start + length) as usize]
            .iter()
            .map(|&b| b as u64)
            .sum();
        out.push(AlmostCorrectInterval { start_depth: start, length, loss_count: c });
    }
    Ok(out)
}

/// Maps each input to ceil(d/c) on the domain ceil(n/c); an interior point
/// of the rescaled instance pulls back within c of an interior point.
pub fn rescale_ipp(inputs: &[u64], n: u64, c: u64) -> Result<(Vec<u64>, u64)> {
    if c < 1 {
        return Err(Error::InvalidArgument("scale must be >= 1".into()));
    }
    let scaled = inputs.iter().map(|&d| d.div_ceil(c)).collect();
    Ok((scaled, n.div_ceil(c)))
}

pub use crate::learners::TreeLossProfile;

#[derive(Debug, Clone, PartialEq)]
pub struct IppRun {
    pub output_depth: u64,
    pub interior: bool,
    pub intervals_found: usize,
    /// Deepest qualifying window start, if any window qualified.
    pub deepest_start: Option<u64>,
    /// A qualifying window started strictly below the deepest sample point.
    pub below_sample: bool,
}

/// One run of the interior-point reduction: sample a uniform branch, read
/// the inputs as depths on it, draw one hypothesis from the profile, search
/// for almost-correct intervals of length floor(log2 n)^2, and output the
/// depth of the first point of the deepest one (domain depth when none
/// qualifies).
pub fn ipp_reduction(
    tree: &ImplicitTree,
    profile: &dyn TreeLossProfile,
    instance: &IppInstance,
    seed: u64,
) -> Result<IppRun> {
    if tree.arity() != profile.arity() {
        return Err(Error::InvalidArgument("profile arity != tree arity".into()));
    }
    if tree.depth() != instance.domain_depth {
        return Err(Error::InvalidArgument("instance domain != tree depth".into()));
    }
    instance.check_gaps()?;
    let n = tree.depth();
    let length = interval_length(n);
    if length == 0 || length > n {
        return Err(Error::InvalidArgument("tree too shallow for the interval length".into()));
    }

    let branch = sample_branch(tree, rng::derive_seed(seed, "ipp-branch", &[]))?;
    let entries: Vec<_> = instance
        .depths
        .iter()
        .map(|&d| (branch.vertex(d), branch.turn(d)))
        .collect();
    let sample = TreeSample::new(tree, entries)?;

    // one hypothesis drawn from the learner, realized as independent
    // per-point Bernoulli losses at the profile's miss probabilities
    let losses: Vec<u8> = (0..n)
        .map(|depth| {
            let x = branch.vertex(depth);
            let y = branch.turn(depth);
            let p = profile.miss(sample.entries(), &x, y);
            u8::from(rng::indexed_bernoulli(seed, "ipp-hypothesis", &[depth], p))
        })
        .collect();

    let intervals = find_almost_correct_intervals(&losses, length, tree.arity() - 1)?;
    let deepest_start = intervals.first().map(|i| i.start_depth);
    let output_depth = deepest_start.unwrap_or(n);
    let (interior, below) = match (instance.depths.first(), instance.depths.last()) {
        (Some(&d1), Some(&dm)) => (
            d1 <= output_depth && output_depth <= dm,
            deepest_start.map(|s| s > dm).unwrap_or(false),
        ),
        _ => (false, false),
    };
    Ok(IppRun {
        output_depth,
        interior,
        intervals_found: intervals.len(),
        deepest_start,
        below_sample: below,
    })
}

/// The branch-memorizing learner's profile: no loss at or above the deepest
/// training point, chance level below it.
pub struct PerfectBranchProfile {
    pub arity: usize,
}

impl TreeLossProfile for PerfectBranchProfile {
    fn arity(&self) -> usize {
        self.arity
    }
    fn miss(&self, sample: &[(crate::trees::Vertex, u8)], x: &[u8], y: u8) -> f64 {
        let b = self.arity as f64;
        match sample.last() {
            Some((deepest, _)) if x.len() > deepest.len() => 1.0 / b,
            None => 1.0 / b,
            Some((deepest, _)) => {
                // memorized region: the branch label is always in the list
                let on_branch_label = if x.len() < deepest.len() {
                    deepest[x.len()]
                } else {
                    sample.iter().find(|(v, _)| v == x).map(|&(_, t)| t).unwrap_or(y)
                };
                if y == on_branch_label {
                    0.0
                } else {
                    1.0 / (b - 1.0)
                }
            }
        }
    }
}

/// The uniform-random k-list learner: every label misses at chance level.
pub struct UniformRandomProfile {
    pub arity: usize,
}

impl TreeLossProfile for UniformRandomProfile {
    fn arity(&self) -> usize {
        self.arity
    }
    fn miss(&self, _: &[(crate::trees::Vertex, u8)], _: &[u8], _: u8) -> f64 {
        1.0 / self.arity as f64
    }
}

/// A family of distributions and events with a threshold structure around
/// a center: events left of the member index sit below center - margin,
/// events at or right of it sit at or above center + margin. Probabilities
/// are exact queries; sampling realizes events as independent Bernoulli
/// draws at the queried probability.
pub struct ThresholdFamily {
    size: usize,
    center: f64,
    margin: f64,
    prob: Box<dyn Fn(usize, usize) -> f64>,
}

impl ThresholdFamily {
    /// `prob(i, j)` = P_i(E_j), both 1-based, i the member, j the event.
    pub fn new(
        size: usize,
        center: f64,
        margin: f64,
        prob: Box<dyn Fn(usize, usize) -> f64>,
    ) -> Result<Self> {
        if size < 1 {
            return Err(Error::InvalidArgument("family must be nonempty".into()));
        }
        if margin <= 0.0 {
            return Err(Error::Family(
                "margin must be positive; thresholds are indistinguishable".into(),
            ));
        }
        Ok(ThresholdFamily { size, center, margin, prob })
    }

    /// Canonical Bernoulli-product family: P_i(E_j) = c - margin for j < i
    /// and c + margin for j >= i.
    pub fn bernoulli_product(size: usize, center: f64, margin: f64) -> Result<Self> {
        let c = center;
        let g = margin;
        ThresholdFamily::new(
            size,
            center,
            margin,
            Box::new(move |i, j| if j < i { c - g } else { c + g }),
        )
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn probability(&self, member: usize, event: usize) -> f64 {
        (self.prob)(member, event)
    }

    /// Exact check of the threshold property on all pairs.
    pub fn verify_threshold_property(&self) -> Result<()> {
        for i in 1..=self.size {
            for j in 1..=self.size {
                let p = self.probability(i, j);
                if j < i && p > self.center - self.margin + 1e-12 {
                    return Err(Error::Family(format!(
                        "P_{i}(E_{j}) = {p} above center - margin"
                    )));
                }
                if j > i && p < self.center + self.margin - 1e-12 {
                    return Err(Error::Family(format!(
                        "P_{i}(E_{j}) = {p} below center + margin"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Number of binary-search steps for a family of n members.
pub fn packing_steps(n: usize) -> u32 {
    (usize::BITS - (n - 1).leading_zeros()).max(1)
}

/// Sample count from the packing argument: ceil(margin^-2 ln T).
pub fn packing_sample_count(margin: f64, steps: u32) -> u64 {
    ((steps as f64).ln() / (margin * margin)).ceil() as u64
}

/// Identifies a member of a threshold family by binary search against the
/// center: the answer is the least event index observed above center. With
/// `samples = None` the exact probabilities answer the queries, which
/// identifies every member whose own event P_i(E_i) sits on the high side
/// (the threshold property leaves it unconstrained; the Bernoulli-product
/// families pin it high, so they are identified exactly). With
/// `samples = Some(D)` each query compares the empirical frequency of the
/// event over D draws from the target member, so each of the
/// <= ceil(log2 n) steps errs with probability at most
/// exp(-2 margin^2 D).
pub fn packing_binary_search(
    family: &ThresholdFamily,
    target: usize,
    samples: Option<u64>,
    seed: u64,
) -> Result<usize> {
    if target < 1 || target > family.size() {
        return Err(Error::InvalidArgument("target outside the family".into()));
    }
    if family.margin() <= 0.0 {
        return Err(Error::Family("zero-margin family".into()));
    }
    let mut lo = 1usize;
    let mut hi = family.size();
    let mut step = 0u64;
    while lo < hi {
        let mid = (lo + hi) / 2;
        let p = family.probability(target, mid);
        let high_side = match samples {
            None => p > family.center(),
            Some(d) => {
                let hits: u64 = (0..d)
                    .map(|t| {
                        u64::from(rng::indexed_bernoulli(
                            seed,
                            "packing-draw",
                            &[step, t, mid as u64],
                            p,
                        ))
                    })
                    .sum();
                hits as f64 / d as f64 > family.center()
            }
        };
        if high_side {
            hi = mid;
        } else {
            lo = mid + 1;
        }
        step += 1;
    }
    Ok(lo)
}

/// Result of the threshold-family extraction: the family, where the jump
/// was found, which label's miss probability jumps, and whether the event
/// is complemented to orient the thresholds upward.
pub struct ExtractedFamily {
    pub family: ThresholdFamily,
    pub jump_location: usize,
    pub jump_label: crate::concepts::Label,
    pub jump_size: f64,
    pub complemented: bool,
    /// The points whose slot varies, in order; member/event i refers to the
    /// i-th of these.
    pub interval_points: Vec<u64>,
}

/// Builds a threshold family from a comparison-based learner on an ordered
/// point set: locate the largest jump between consecutive location vectors
/// of the balanced-CB table, pin the balanced sample around that slot, and
/// let the slot's point range over the interval between its neighbors. The
/// event at a point asks whether the jumping label is missing from the
/// prediction there.
pub fn extract_threshold_family(
    profile: &(impl PointLossProfile + Clone + 'static),
    points: &[u64],
    m: usize,
    gamma: f64,
) -> Result<ExtractedFamily> {
    let ell = profile.label_count();
    let k = profile.list_size();
    if points.len() < m + 2 {
        return Err(Error::InvalidArgument("need at least m + 2 points".into()));
    }
    let table = match check_balanced_cb(profile, points, m, gamma)? {
        BalancedCbCheck::Accepted(t) => t,
        BalancedCbCheck::Rejected(cex) => {
            return Err(Error::Precondition(format!(
                "profile is not {gamma}-comparison-based on the point set: spread {} at \
                 location {} label {}",
                cex.spread, cex.location, cex.label
            )))
        }
    };

    // the jump scan: largest coordinate change between consecutive vectors
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 1..=m {
        for j in 0..ell {
            let diff = (table.vectors[i][j] - table.vectors[i - 1][j]).abs();
            if best.map(|(_, _, b)| diff > b).unwrap_or(true) {
                best = Some((i, j, diff));
            }
        }
    }
    let (jump_location, jump_label, jump_size) = best.expect("nonempty table");
    let threshold = 3.0 * gamma;
    if jump_size < threshold {
        return Err(Error::Extraction { max_jump: jump_size, threshold });
    }

    let lo_val = table.vectors[jump_location - 1][jump_label];
    let hi_val = table.vectors[jump_location][jump_label];
    let complemented = hi_val < lo_val;

    // balanced-template positions: the first jump_location - 1 points and
    // the last m - jump_location points pin the sample; the slot at
    // jump_location ranges over everything in between
    let lead: Vec<u64> = points[..jump_location - 1].to_vec();
    let tail: Vec<u64> = points[points.len() - (m - jump_location)..].to_vec();
    let interval: Vec<u64> =
        points[jump_location - 1..points.len() - (m - jump_location)].to_vec();
    if interval.len() < 2 {
        return Err(Error::InvalidArgument("interval between the pinned points is empty".into()));
    }

    let center = (lo_val + hi_val) / 2.0;
    let margin = (jump_size / 2.0 - gamma).max(gamma / 2.0);
    let interval_points = interval.clone();
    let profile = profile.clone();
    let label = jump_label;
    let prob = Box::new(move |i: usize, j: usize| {
        let x_slot = interval[i - 1];
        let mut sample_points = lead.clone();
        sample_points.push(x_slot);
        sample_points.extend_from_slice(&tail);
        let sample = balanced_sample(&sample_points, ell).expect("balanced template");
        let a = profile.miss_vector(&sample, interval[j - 1])[label];
        if complemented {
            1.0 - a
        } else {
            a
        }
    });
    let family = ThresholdFamily::new(
        interval_points.len(),
        if complemented { 1.0 - center } else { center },
        margin,
        prob,
    )?;
    let _ = k;
    Ok(ExtractedFamily {
        family,
        jump_location,
        jump_label: jump_label as crate::concepts::Label,
        jump_size,
        complemented,
        interval_points,
    })
}
