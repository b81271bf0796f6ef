//! Python bindings: concept classes and dimensions, the online learners,
//! tower arithmetic and Ramsey depth bounds, and the two reduction
//! experiments. Big integers cross the boundary as decimal strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use listlab::concepts;
use listlab::dims::{self, DimWitness, SearchBudget};
use listlab::learners::{self, OnlineLearner};
use listlab::privacy;
use listlab::ramsey;
use listlab::rng;
use listlab::trees::{self, ImplicitTree};

fn err(e: listlab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Explicit concept class over points 0..domain_size and labels
/// 0..label_count.
#[pyclass(name = "ConceptClass")]
struct PyConceptClass {
    inner: concepts::ConceptClass,
}

#[pymethods]
impl PyConceptClass {
    /// All weakly increasing functions.
    #[staticmethod]
    #[pyo3(signature = (n, labels, budget = 1_000_000))]
    fn monotone(n: usize, labels: usize, budget: u64) -> PyResult<Self> {
        Ok(PyConceptClass { inner: concepts::gen_monotone_class(n, labels, budget).map_err(err)? })
    }

    /// One concept per branch of the complete (k+1)-ary tree of the given
    /// depth; off-branch vertices are labeled 0.
    #[staticmethod]
    #[pyo3(signature = (depth, k, budget = 1_000_000))]
    fn branch(depth: u32, k: usize, budget: u64) -> PyResult<Self> {
        Ok(PyConceptClass { inner: concepts::gen_branch_class(depth, k, budget).map_err(err)? })
    }

    /// All functions.
    #[staticmethod]
    #[pyo3(signature = (n, labels, budget = 1_000_000))]
    fn full(n: usize, labels: usize, budget: u64) -> PyResult<Self> {
        Ok(PyConceptClass { inner: concepts::gen_full_class(n, labels, budget).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyConceptClass { inner: concepts::class_from_str(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        concepts::class_to_string(&self.inner)
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn domain_size(&self) -> usize {
        self.inner.domain().size()
    }

    #[getter]
    fn label_count(&self) -> usize {
        self.inner.labels().count()
    }

    /// Exact k-Littlestone dimension; the witness tree comes back as its
    /// JSON text when the value is positive.
    #[pyo3(signature = (k, budget = 20_000_000))]
    fn littlestone_dim(&self, k: usize, budget: u64) -> PyResult<(usize, Option<String>)> {
        let r = dims::littlestone_dim(&self.inner, k, SearchBudget { max_nodes: budget })
            .map_err(err)?;
        let witness = match r.witness {
            Some(DimWitness::Tree(t)) => Some(trees::tree_to_string(&t)),
            _ => None,
        };
        Ok((r.value, witness))
    }

    /// Exact k-monotone dimension; the witness is (points, ordered labels).
    #[pyo3(signature = (k, budget = 20_000_000))]
    fn monotone_dim(&self, k: usize, budget: u64) -> PyResult<(usize, Option<(Vec<usize>, Vec<u16>)>)> {
        let r =
            dims::monotone_dim(&self.inner, k, SearchBudget { max_nodes: budget }).map_err(err)?;
        let witness = match r.witness {
            Some(DimWitness::Monotone { points, ordered_labels }) => {
                Some((points, ordered_labels))
            }
            _ => None,
        };
        Ok((r.value, witness))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "ConceptClass(domain_size={}, label_count={}, size={})",
            self.inner.domain().size(),
            self.inner.labels().count(),
            self.inner.len()
        )
    }
}

/// The one-mistake online learner for (k+1)-labeled monotone functions.
#[pyclass(name = "MonotoneLearner")]
struct PyMonotoneLearner {
    inner: learners::MonotoneListLearner,
}

#[pymethods]
impl PyMonotoneLearner {
    #[new]
    fn new(k: usize) -> PyResult<Self> {
        Ok(PyMonotoneLearner { inner: learners::MonotoneListLearner::new(k).map_err(err)? })
    }

    fn predict(&mut self, x: u64) -> PyResult<Vec<u16>> {
        self.inner.predict(x).map_err(err)
    }

    fn observe(&mut self, x: u64, y: u16) -> PyResult<()> {
        self.inner.observe(x, y).map_err(err)
    }
}

/// Version-space k-list learner with mistakes bounded by the class's
/// k-Littlestone dimension.
#[pyclass(name = "SoaLearner")]
struct PySoaLearner {
    inner: learners::SoaListLearner,
}

#[pymethods]
impl PySoaLearner {
    #[new]
    #[pyo3(signature = (class, k, budget = 20_000_000))]
    fn new(class: &PyConceptClass, k: usize, budget: u64) -> PyResult<Self> {
        let inner =
            learners::SoaListLearner::new(class.inner.clone(), k, SearchBudget { max_nodes: budget })
                .map_err(err)?;
        Ok(PySoaLearner { inner })
    }

    fn predict(&mut self, x: u64) -> PyResult<Vec<u16>> {
        self.inner.predict(x).map_err(err)
    }

    fn observe(&mut self, x: u64, y: u16) -> PyResult<()> {
        self.inner.observe(x, y).map_err(err)
    }

    #[getter]
    fn version_size(&self) -> usize {
        self.inner.version_size()
    }
}

/// twr_(t)(x) as a decimal string.
#[pyfunction]
fn tower(t: u32, x: u64) -> PyResult<String> {
    ramsey::tower(t, x, ramsey::BitBudget::default())
        .map(|v| v.to_string())
        .map_err(err)
}

#[pyfunction]
fn log_star(x: f64) -> PyResult<u32> {
    ramsey::log_star(x).map_err(err)
}

/// Worst-case host depth for the chain Ramsey theorem, as a decimal string.
#[pyfunction]
fn required_depth(d: u64, m: u32, colors: u64, arity: u64) -> PyResult<String> {
    ramsey::required_depth(d, m, colors, arity, ramsey::BitBudget::default())
        .map(|v| v.to_string())
        .map_err(err)
}

/// Interior-point reduction experiment over seeded trials. Returns
/// (interior_rate, below_sample_rate, outputs).
#[pyfunction]
#[pyo3(signature = (tree_depth, k, depths, learner, trials, seed))]
fn ipp_experiment(
    tree_depth: u64,
    k: usize,
    depths: Vec<u64>,
    learner: &str,
    trials: u64,
    seed: u64,
) -> PyResult<(f64, f64, Vec<u64>)> {
    let tree = ImplicitTree::new(k + 1, tree_depth).map_err(err)?;
    let instance = privacy::IppInstance::new(tree_depth, depths).map_err(err)?;
    let profile: Box<dyn privacy::TreeLossProfile> = match learner {
        "perfect" => Box::new(privacy::PerfectBranchProfile { arity: k + 1 }),
        "uniform" => Box::new(privacy::UniformRandomProfile { arity: k + 1 }),
        other => return Err(PyValueError::new_err(format!("unknown learner {other:?}"))),
    };
    let mut outputs = Vec::with_capacity(trials as usize);
    let mut interior = 0u64;
    let mut below = 0u64;
    for t in 0..trials {
        let run =
            privacy::ipp_reduction(&tree, profile.as_ref(), &instance, rng::derive_seed(seed, "trial", &[t]))
                .map_err(err)?;
        interior += u64::from(run.interior);
        below += u64::from(run.below_sample);
        outputs.push(run.output_depth);
    }
    let n = trials.max(1) as f64;
    Ok((interior as f64 / n, below as f64 / n, outputs))
}

/// Binary-search identification in a Bernoulli-product threshold family.
#[pyfunction]
#[pyo3(signature = (size, center, margin, target, samples = None, seed = 0))]
fn packing_search(
    size: usize,
    center: f64,
    margin: f64,
    target: usize,
    samples: Option<u64>,
    seed: u64,
) -> PyResult<usize> {
    let family = privacy::ThresholdFamily::bernoulli_product(size, center, margin).map_err(err)?;
    privacy::packing_binary_search(&family, target, samples, seed).map_err(err)
}

#[pymodule]
fn listlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConceptClass>()?;
    m.add_class::<PyMonotoneLearner>()?;
    m.add_class::<PySoaLearner>()?;
    m.add_function(wrap_pyfunction!(tower, m)?)?;
    m.add_function(wrap_pyfunction!(log_star, m)?)?;
    m.add_function(wrap_pyfunction!(required_depth, m)?)?;
    m.add_function(wrap_pyfunction!(ipp_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(packing_search, m)?)?;
    Ok(())
}
