//! Command handlers. Each returns the report's result section as a string;
//! everything in it is a deterministic function of the echoed config and
//! the referenced input files.

use crate::{default_budget, DimArgs, GenArgs, IppArgs, LearnArgs, RamseyArgs, RunConfig};
use listlab::concepts::{self, ConceptClass, Label};
use listlab::dims::{self, DimWitness, SearchBudget};
use listlab::error::{Error, Result};
use listlab::learners::{run_sequence, MonotoneListLearner, OnlineLearner, SoaListLearner};
use listlab::privacy::{
    interval_length, ipp_reduction, IppInstance, IppRun, PerfectBranchProfile, TreeLossProfile,
    UniformRandomProfile,
};
use listlab::ramsey::{
    classical_ramsey_threshold, homogeneous_subset, ramsey_subtree, required_depth,
    verify_type_monochromatic, BigUint, BitBudget, ChainColoring, FnSubsetColoring, GateMode,
    HomogeneousOutcome, RamseyOptions, SeededChainColoring, SubsetColoring,
};
use listlab::rng;
use listlab::trees::{tree_to_string, ImplicitTree, Vertex};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

pub fn execute(config: &RunConfig) -> Result<String> {
    match config {
        RunConfig::Gen(a) => gen(a),
        RunConfig::Dim(a) => dim(a),
        RunConfig::Learn(a) => learn(a),
        RunConfig::Ramsey(a) => ramsey(a),
        RunConfig::Ipp(a) => ipp(a),
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))
}

fn need<T: Copy>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("missing required parameter: {what}")))
}

fn gen(args: &GenArgs) -> Result<String> {
    let budget = args.budget.unwrap_or_else(|| default_budget(concepts::DEFAULT_CONCEPT_BUDGET));
    let class = match args.family.as_str() {
        "monotone" => concepts::gen_monotone_class(
            need(args.n, "-n")?,
            need(args.labels, "--labels")?,
            budget,
        )?,
        "branch" => {
            concepts::gen_branch_class(need(args.depth, "--depth")?, need(args.k, "-k")?, budget)?
        }
        "full" => {
            concepts::gen_full_class(need(args.n, "-n")?, need(args.labels, "--labels")?, budget)?
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown family {other:?}, expected monotone | branch | full"
            )))
        }
    };
    let text = concepts::class_to_string(&class);
    let mut out = String::new();
    writeln!(out, "family = {}", args.family).unwrap();
    writeln!(out, "domain_size = {}", class.domain().size()).unwrap();
    writeln!(out, "label_count = {}", class.labels().count()).unwrap();
    writeln!(out, "concepts = {}", class.len()).unwrap();
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| {
                Error::InvalidArgument(format!("cannot write {}: {e}", path.display()))
            })?;
            writeln!(out, "out = {}", path.display()).unwrap();
        }
        None => {
            writeln!(out, "class:").unwrap();
            out.push_str(&text);
        }
    }
    Ok(out)
}

fn load_class(path: &Path) -> Result<ConceptClass> {
    concepts::class_from_str(&read_file(path)?)
}

fn dim(args: &DimArgs) -> Result<String> {
    let class = load_class(&args.class_file)?;
    let budget = SearchBudget {
        max_nodes: args.budget.unwrap_or_else(|| default_budget(SearchBudget::default().max_nodes)),
    };
    let result = match args.kind.as_str() {
        "littlestone" => dims::littlestone_dim(&class, args.k, budget)?,
        "monotone" => dims::monotone_dim(&class, args.k, budget)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown kind {other:?}, expected littlestone | monotone"
            )))
        }
    };
    let verified = dims::verify_witness(&class, args.k, &result)?;
    let mut out = String::new();
    writeln!(out, "kind = {}", args.kind).unwrap();
    writeln!(out, "k = {}", args.k).unwrap();
    writeln!(out, "value = {}", result.value).unwrap();
    writeln!(out, "witness_verified = {verified}").unwrap();
    match &result.witness {
        None => writeln!(out, "witness = none").unwrap(),
        Some(DimWitness::Tree(tree)) => {
            writeln!(out, "witness_tree:").unwrap();
            out.push_str(&tree_to_string(tree));
        }
        Some(DimWitness::Monotone { points, ordered_labels }) => {
            writeln!(out, "witness_points = {points:?}").unwrap();
            writeln!(out, "witness_ordered_labels = {ordered_labels:?}").unwrap();
        }
    }
    Ok(out)
}

fn parse_sequence(text: &str) -> Result<Vec<(u64, Label)>> {
    let mut seq = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |part: Option<&str>, col: usize| -> Result<u64> {
            part.and_then(|p| p.parse().ok()).ok_or(Error::Parse {
                line: i + 1,
                col,
                msg: "expected `point label` with nonnegative integers".into(),
            })
        };
        let point = parse(parts.next(), 1)?;
        let label = parse(parts.next(), 2)?;
        if parts.next().is_some() {
            return Err(Error::Parse {
                line: i + 1,
                col: 3,
                msg: "trailing tokens after `point label`".into(),
            });
        }
        if label > Label::MAX as u64 {
            return Err(Error::Parse { line: i + 1, col: 2, msg: "label too large".into() });
        }
        seq.push((point, label as Label));
    }
    Ok(seq)
}

fn learn(args: &LearnArgs) -> Result<String> {
    let seq = parse_sequence(&read_file(&args.seq)?)?;
    let mut learner: Box<dyn OnlineLearner> = if args.builtin_monotone {
        Box::new(MonotoneListLearner::new(args.k)?)
    } else {
        let path = args.class_file.as_ref().ok_or_else(|| {
            Error::InvalidArgument("provide a class file or --builtin-monotone".into())
        })?;
        let class = load_class(path)?;
        let budget = SearchBudget {
            max_nodes: args
                .budget
                .unwrap_or_else(|| default_budget(SearchBudget::default().max_nodes)),
        };
        Box::new(SoaListLearner::new(class, args.k, budget)?)
    };
    let log = run_sequence(learner.as_mut(), &seq)?;
    let mut out = String::new();
    writeln!(out, "learner = {}", if args.builtin_monotone { "monotone" } else { "soa" }).unwrap();
    writeln!(out, "k = {}", args.k).unwrap();
    writeln!(out, "step,point,predicted,label,miss").unwrap();
    for (i, s) in log.steps.iter().enumerate() {
        let list = s
            .predicted
            .iter()
            .map(|y| y.to_string())
            .collect::<Vec<_>>()
            .join("|");
        writeln!(out, "{i},{},{list},{},{}", s.point, s.label, u8::from(s.miss)).unwrap();
    }
    writeln!(out, "mistakes = {}", log.mistakes).unwrap();
    Ok(out)
}

fn render_path(p: &[u8]) -> String {
    if p.is_empty() {
        "-".into()
    } else {
        p.iter().map(|t| t.to_string()).collect::<Vec<_>>().concat()
    }
}

fn parse_path(s: &str) -> Result<Vertex> {
    if s == "-" || s.is_empty() {
        return Ok(Vec::new());
    }
    s.chars()
        .map(|c| {
            c.to_digit(10)
                .map(|d| d as u8)
                .ok_or_else(|| Error::InvalidArgument(format!("bad path digit {c:?} in {s:?}")))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ChainColorEntry {
    paths: Vec<String>,
    color: u64,
}

#[derive(Serialize, Deserialize)]
struct ChainColoringFile {
    colors: u64,
    chains: Vec<ChainColorEntry>,
}

/// Table-backed chain coloring; queried chains missing from the table are
/// recorded and reported after the run.
struct FileChainColoring {
    colors: u64,
    table: HashMap<Vec<Vertex>, u64>,
    missing: RefCell<Option<String>>,
}

impl FileChainColoring {
    fn load(path: &Path) -> Result<Self> {
        let file: ChainColoringFile =
            serde_json::from_str(&read_file(path)?).map_err(|e| Error::Parse {
                line: e.line(),
                col: e.column(),
                msg: e.to_string(),
            })?;
        let mut table = HashMap::new();
        for entry in file.chains {
            let chain = entry.paths.iter().map(|p| parse_path(p)).collect::<Result<Vec<_>>>()?;
            table.insert(chain, entry.color);
        }
        Ok(FileChainColoring { colors: file.colors, table, missing: RefCell::new(None) })
    }

    fn check_complete(&self) -> Result<()> {
        match self.missing.borrow().as_ref() {
            Some(chain) => Err(Error::InvalidArgument(format!(
                "coloring file does not define the queried chain {chain}"
            ))),
            None => Ok(()),
        }
    }
}

impl ChainColoring for FileChainColoring {
    fn color(&self, chain: &[Vertex]) -> u64 {
        match self.table.get(chain) {
            Some(&c) => c,
            None => {
                let rendered =
                    chain.iter().map(|v| render_path(v)).collect::<Vec<_>>().join(" ");
                self.missing.borrow_mut().get_or_insert(rendered);
                0
            }
        }
    }
    fn color_count(&self) -> u64 {
        self.colors
    }
}

fn ramsey(args: &RamseyArgs) -> Result<String> {
    match args.mode.as_str() {
        "tower" => {
            let t = need(args.height, "--height")?;
            let x = need(args.x, "--x")?;
            let v = listlab::ramsey::tower(t, x, BitBudget::default())?;
            let mut out = String::new();
            writeln!(out, "tower = {v}").unwrap();
            writeln!(out, "bits = {}", v.bits()).unwrap();
            Ok(out)
        }
        "logstar" => {
            let x = need(args.value, "--value")?;
            let mut out = String::new();
            writeln!(out, "log_star = {}", listlab::ramsey::log_star(x)?).unwrap();
            Ok(out)
        }
        "bound" => {
            let d = need(args.d, "--d")?;
            let m = need(args.m, "--m")?;
            let c = need(args.colors, "--colors")?;
            let b = need(args.arity, "--arity")? as u64;
            let bound = required_depth(d, m, c, b, BitBudget::default())?;
            let mut out = String::new();
            writeln!(out, "required_depth = {bound}").unwrap();
            writeln!(out, "bits = {}", bound.bits()).unwrap();
            Ok(out)
        }
        "tree" => {
            let d = need(args.d, "--d")?;
            let m = need(args.m, "--m")?;
            let arity = need(args.arity, "--arity")?;

            let file_coloring = match &args.coloring_file {
                Some(path) => Some(FileChainColoring::load(path)?),
                None => None,
            };
            let seeded = match (&file_coloring, args.colors, args.seed) {
                (Some(_), _, _) => None,
                (None, Some(colors), Some(seed)) => Some(SeededChainColoring { seed, colors }),
                _ => {
                    return Err(Error::InvalidArgument(
                        "tree mode needs --coloring-file, or --colors with --seed".into(),
                    ))
                }
            };
            let coloring: &dyn ChainColoring = match (&file_coloring, &seeded) {
                (Some(f), _) => f,
                (_, Some(s)) => s,
                _ => unreachable!(),
            };

            let cap = BigUint::from(1u32) << args.cap_bits;
            let host_depth = match args.host_depth {
                Some(depth) => depth,
                None => required_depth(d, m, coloring.color_count(), arity as u64, BitBudget::default())?
                    .try_into()
                    .map_err(|_| Error::Budget {
                        what: "required depth exceeds u64; pass --host-depth explicitly".into(),
                        limit: u64::MAX,
                        certified_lower_bound: None,
                    })?,
            };
            let host = ImplicitTree::new(arity, host_depth)?;
            let opts = RamseyOptions {
                gate: GateMode::Strict { cap },
                query_budget: listlab::ramsey::DEFAULT_QUERY_BUDGET,
            };
            let emb = ramsey_subtree(&host, coloring, m, d, &opts)?;
            if let Some(f) = &file_coloring {
                f.check_complete()?;
            }
            let colors_seen = verify_type_monochromatic(&emb, coloring, m as usize)?;
            if let Some(f) = &file_coloring {
                f.check_complete()?;
            }

            let mut out = String::new();
            writeln!(out, "host_depth = {host_depth}").unwrap();
            writeln!(out, "embedding_depth = {d}").unwrap();
            writeln!(out, "type_monochromatic = true").unwrap();
            writeln!(out, "colors_observed = {colors_seen}").unwrap();
            writeln!(out, "position,host").unwrap();
            for (pos, hv) in emb.positions() {
                writeln!(out, "{},{}", render_path(pos), render_path(hv)).unwrap();
            }
            Ok(out)
        }
        "set" => {
            let n = need(args.universe, "--universe")?;
            let t = need(args.tuple, "--tuple")?;
            let s = need(args.subset_size, "--subset-size")?;
            let colors = need(args.colors, "--colors")?;
            let seed = need(args.seed, "--seed")?;
            let coloring = FnSubsetColoring::new(move |subset: &[usize]| {
                let key: Vec<u64> = subset.iter().map(|&i| i as u64).collect();
                rng::derive_seed(seed, "subset-color", &key) % colors
            });
            let outcome = homogeneous_subset(n, t, &coloring, s, 1 << 26)?;
            let mut out = String::new();
            match outcome {
                HomogeneousOutcome::Found(points) => {
                    writeln!(out, "found = true").unwrap();
                    let list =
                        points.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
                    writeln!(out, "subset = {list}").unwrap();
                    writeln!(out, "color = {}", coloring.color(&points[..t])).unwrap();
                }
                HomogeneousOutcome::NotFound { subsets_checked } => {
                    writeln!(out, "found = false").unwrap();
                    writeln!(out, "subsets_checked = {subsets_checked}").unwrap();
                    let threshold = classical_ramsey_threshold(
                        t as u32,
                        s as u64,
                        colors,
                        BitBudget::default(),
                    )
                    .map(|v| v.to_string())
                    .unwrap_or_else(|_| "beyond the bit budget".into());
                    writeln!(out, "guarantee_threshold = {threshold}").unwrap();
                }
            }
            Ok(out)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown mode {other:?}, expected bound | tree | set | tower | logstar"
        ))),
    }
}

#[derive(Serialize, Deserialize)]
struct IppConfig {
    tree_depth: u64,
    k: usize,
    instance_depths: Vec<u64>,
    learner: String,
    trials: u64,
    seed: u64,
    #[serde(default)]
    rescale_factor: Option<u64>,
}

fn ipp(args: &IppArgs) -> Result<String> {
    let cfg: IppConfig = serde_json::from_str(&read_file(&args.config_file)?).map_err(|e| {
        Error::Parse { line: e.line(), col: e.column(), msg: e.to_string() }
    })?;

    // the rescaling that makes arbitrary instances solvable: blow depths up
    // by the factor so gaps outgrow the interval length; an interior point
    // of the expanded run lies within the factor of an interior point of
    // the original instance
    let (depths, tree_depth) = match cfg.rescale_factor {
        Some(c) if c >= 1 => (
            cfg.instance_depths.iter().map(|&d| d * c).collect(),
            cfg.tree_depth * c,
        ),
        Some(_) => return Err(Error::InvalidArgument("rescale factor must be >= 1".into())),
        None => (cfg.instance_depths.clone(), cfg.tree_depth),
    };
    let instance = IppInstance::new(tree_depth, depths)?;
    let tree = ImplicitTree::new(cfg.k + 1, tree_depth)?;
    let profile: Box<dyn TreeLossProfile + Sync> = match cfg.learner.as_str() {
        "perfect" => Box::new(PerfectBranchProfile { arity: cfg.k + 1 }),
        "uniform" => Box::new(UniformRandomProfile { arity: cfg.k + 1 }),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown learner {other:?}, expected perfect | uniform"
            )))
        }
    };

    // trials fan out of the master seed; assembly is in trial order no
    // matter which worker finishes first
    let runs: Vec<IppRun> = run_trials(&tree, profile.as_ref(), &instance, cfg.seed, cfg.trials)?;

    let mut out = String::new();
    writeln!(out, "tree_depth = {tree_depth}").unwrap();
    writeln!(out, "arity = {}", cfg.k + 1).unwrap();
    writeln!(out, "interval_length = {}", interval_length(tree_depth)).unwrap();
    writeln!(out, "trial,output_depth,interior,deepest_start,below_sample,intervals").unwrap();
    for (i, r) in runs.iter().enumerate() {
        let deepest = r.deepest_start.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
        writeln!(
            out,
            "{i},{},{},{deepest},{},{}",
            r.output_depth,
            u8::from(r.interior),
            u8::from(r.below_sample),
            r.intervals_found
        )
        .unwrap();
    }
    let n = runs.len().max(1) as f64;
    let interior = runs.iter().filter(|r| r.interior).count() as f64 / n;
    let below = runs.iter().filter(|r| r.below_sample).count() as f64 / n;
    let l = interval_length(tree_depth);
    let envelope =
        tree_depth as f64 * (-(l as f64) / (8.0 * (cfg.k + 1) as f64)).exp();
    writeln!(out, "interior_rate = {interior:.4}").unwrap();
    writeln!(out, "below_sample_rate = {below:.4}").unwrap();
    writeln!(out, "below_sample_envelope = {envelope:.6e}").unwrap();
    Ok(out)
}

fn run_trials(
    tree: &ImplicitTree,
    profile: &(dyn TreeLossProfile + Sync),
    instance: &IppInstance,
    seed: u64,
    trials: u64,
) -> Result<Vec<IppRun>> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8);
    let results: Vec<Result<IppRun>> = std::thread::scope(|scope| {
        let chunk = trials.div_ceil(workers as u64).max(1);
        let mut handles = Vec::new();
        for w in 0..workers as u64 {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(trials);
            if lo >= hi {
                break;
            }
            handles.push(scope.spawn(move || {
                (lo..hi)
                    .map(|t| {
                        ipp_reduction(tree, profile, instance, rng::derive_seed(seed, "trial", &[t]))
                    })
                    .collect::<Vec<_>>()
            }));
        }
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    results.into_iter().collect()
}
