//! Python bindings: the main types and operations of the core library.
//!
//! Scalar results come back as floats; report-shaped results come back as
//! JSON strings (load them with `json.loads`), matching the CLI's report
//! payloads field for field.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use idauth_core::analysis::{
    attack_analysis, build_exact_model, exhaustive_round_trip, full_metrics, monte_carlo,
    AttackOptions,
};
use idauth_core::codec::{generate_codebook, CodebookSpec, TypicalityParams};
use idauth_core::identities::run_identity_suite;
use idauth_core::probability::{self, Channel, Pmf};
use idauth_core::region::{
    self, erasure_closed_form, evaluate_corner, optimize_frontier, scalarize, AuxChannels,
    ClosedFormCase, ObjectiveWeights, RegionCorner, SourceModel,
};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(value_err)
}

/// A memoryless source `P_X` with broadcast side channel `P_{Y,Z|X}`.
#[pyclass(name = "Source", frozen)]
#[derive(Clone)]
struct PySource {
    inner: SourceModel,
}

#[pymethods]
impl PySource {
    /// Binary symmetric source; `Y` erases `X` with probability `p` and
    /// `Z` erases `Y` with probability `q`.
    #[staticmethod]
    fn erasure_cascade(p: f64, q: f64) -> PyResult<Self> {
        Ok(Self {
            inner: SourceModel::erasure_cascade(p, q).map_err(value_err)?,
        })
    }

    /// Explicit tables: `px` over the source alphabet and one row per
    /// source symbol over the flattened `(y, z)` pair alphabet.
    #[staticmethod]
    fn explicit(
        px: Vec<f64>,
        pyz_given_x: Vec<Vec<f64>>,
        y_size: usize,
        z_size: usize,
    ) -> PyResult<Self> {
        let px = Pmf::new(px).map_err(value_err)?;
        let ch = Channel::from_rows(pyz_given_x).map_err(value_err)?;
        Ok(Self {
            inner: SourceModel::new(px, ch, y_size, z_size).map_err(value_err)?,
        })
    }

    #[getter]
    fn x_size(&self) -> usize {
        self.inner.x_size()
    }

    #[getter]
    fn y_size(&self) -> usize {
        self.inner.y_size()
    }

    #[getter]
    fn z_size(&self) -> usize {
        self.inner.z_size()
    }

    fn __repr__(&self) -> String {
        format!(
            "Source(|X|={}, |Y|={}, |Z|={})",
            self.inner.x_size(),
            self.inner.y_size(),
            self.inner.z_size()
        )
    }
}

/// The auxiliary chain `P_{V|X}`, `P_{U|V}`.
#[pyclass(name = "Aux", frozen)]
#[derive(Clone)]
struct PyAux {
    inner: AuxChannels,
}

#[pymethods]
impl PyAux {
    /// `V = BSC(alpha)(X)` with constant `U`, or `U = V` when
    /// `u_equal_v` is set.
    #[staticmethod]
    #[pyo3(signature = (alpha, u_equal_v = false))]
    fn bsc(alpha: f64, u_equal_v: bool) -> PyResult<Self> {
        let inner = if u_equal_v {
            AuxChannels::bsc_with_u_equal_v(alpha)
        } else {
            AuxChannels::bsc_with_constant_u(alpha)
        };
        Ok(Self {
            inner: inner.map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn explicit(pvx: Vec<Vec<f64>>, puv: Vec<Vec<f64>>) -> PyResult<Self> {
        let pvx = Channel::from_rows(pvx).map_err(value_err)?;
        let puv = Channel::from_rows(puv).map_err(value_err)?;
        Ok(Self {
            inner: AuxChannels::new(pvx, puv).map_err(value_err)?,
        })
    }

    /// Identity `V = X` with constant `U`.
    #[staticmethod]
    fn identity_v(x_size: usize) -> Self {
        Self {
            inner: AuxChannels::new(Channel::identity(x_size), Channel::constant(x_size))
                .expect("sizes line up"),
        }
    }

    #[getter]
    fn v_size(&self) -> usize {
        self.inner.v_size()
    }

    #[getter]
    fn u_size(&self) -> usize {
        self.inner.u_size()
    }

    fn __repr__(&self) -> String {
        format!("Aux(|V|={}, |U|={})", self.inner.v_size(), self.inner.u_size())
    }
}

/// One evaluated point of the rate region.
#[pyclass(name = "Corner", frozen)]
struct PyCorner {
    inner: RegionCorner,
}

#[pymethods]
impl PyCorner {
    /// `I(Y;U)`: the identification-rate cap.
    #[getter]
    fn r_i_max(&self) -> f64 {
        self.inner.i_yu
    }

    /// `I(X;V|Y)`: compression floor in excess of the identification rate.
    #[getter]
    fn r_c_excess(&self) -> f64 {
        self.inner.i_xv_given_y
    }

    /// Minimal description rate at the maximal identification rate.
    #[getter]
    fn r_c_min(&self) -> f64 {
        self.inner.r_c_min()
    }

    #[getter]
    fn l_min(&self) -> f64 {
        self.inner.l_min
    }

    #[getter]
    fn key_max(&self) -> f64 {
        self.inner.key_max
    }

    #[getter]
    fn key_raw(&self) -> f64 {
        self.inner.key_raw
    }

    fn __repr__(&self) -> String {
        format!(
            "Corner(r_i_max={:.6}, r_c_excess={:.6}, l_min={:.6}, key_max={:.6})",
            self.inner.i_yu, self.inner.i_xv_given_y, self.inner.l_min, self.inner.key_max
        )
    }
}

/// Shannon entropy in bits of a probability vector.
#[pyfunction]
fn entropy(mass: Vec<f64>) -> PyResult<f64> {
    Ok(probability::entropy(&Pmf::new(mass).map_err(value_err)?))
}

/// Binary entropy `h(a)` in bits.
#[pyfunction]
fn binary_entropy(a: f64) -> PyResult<f64> {
    probability::binary_entropy(a).map_err(value_err)
}

/// The four region functionals of a source and auxiliary chain.
#[pyfunction(name = "evaluate_corner")]
fn py_evaluate_corner(source: &PySource, aux: &PyAux) -> PyResult<PyCorner> {
    Ok(PyCorner {
        inner: evaluate_corner(&source.inner, &aux.inner).map_err(value_err)?,
    })
}

/// Closed-form boundary point of the erasure-cascade region;
/// `case` is "compression_leakage_key" or "identification_compression_leakage".
#[pyfunction(name = "erasure_closed_form")]
fn py_erasure_closed_form(p: f64, q: f64, alpha: f64, case: &str) -> PyResult<String> {
    let case = match case {
        "compression_leakage_key" => ClosedFormCase::CompressionLeakageKey,
        "identification_compression_leakage" => ClosedFormCase::IdentificationCompressionLeakage,
        other => return Err(value_err(format!("unknown case `{other}`"))),
    };
    to_json(&erasure_closed_form(p, q, alpha, case).map_err(value_err)?)
}

/// Max conditional-independence violation of the composed chain.
#[pyfunction(name = "markov_structure_check")]
fn py_markov_structure_check(source: &PySource, aux: &PyAux) -> PyResult<f64> {
    region::markov_structure_check(&source.inner, &aux.inner).map_err(value_err)
}

/// Multi-start frontier search; weights apply to
/// `(r_i, -r_c, -l, key)`. Returns `(corners, best_scalarized_value)`.
#[pyfunction(name = "optimize_frontier")]
fn py_optimize_frontier(
    source: &PySource,
    weights: (f64, f64, f64, f64),
    budget: u64,
    seed: u64,
) -> PyResult<(Vec<PyCorner>, f64)> {
    let w = ObjectiveWeights {
        identification: weights.0,
        compression: weights.1,
        leakage: weights.2,
        key: weights.3,
    };
    let points = optimize_frontier(&source.inner, &w, budget, seed).map_err(value_err)?;
    let best = points
        .iter()
        .map(|p| scalarize(&p.corner, &w))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        points
            .into_iter()
            .map(|p| PyCorner { inner: p.corner })
            .collect(),
        best,
    ))
}

fn build_spec(
    source: &PySource,
    aux: &PyAux,
    n: usize,
    k_users: usize,
    r_i: f64,
    epsilon: f64,
    delta_eps: f64,
    seed: u64,
) -> PyResult<CodebookSpec> {
    Ok(CodebookSpec {
        n,
        k_users,
        r_i,
        src: source.inner.clone(),
        aux: aux.inner.clone(),
        typ: TypicalityParams::new(epsilon, delta_eps).map_err(value_err)?,
        seed,
    })
}

/// Generate a codebook, build the exact model, and return the full
/// metrics report as JSON.
#[pyfunction(name = "simulate_exact")]
#[pyo3(signature = (source, aux, n, k_users, r_i, epsilon, delta_eps, seed, include_attack = false))]
#[allow(clippy::too_many_arguments)]
fn py_simulate_exact(
    source: &PySource,
    aux: &PyAux,
    n: usize,
    k_users: usize,
    r_i: f64,
    epsilon: f64,
    delta_eps: f64,
    seed: u64,
    include_attack: bool,
) -> PyResult<String> {
    let spec = build_spec(source, aux, n, k_users, r_i, epsilon, delta_eps, seed)?;
    let cb = generate_codebook(&spec).map_err(value_err)?;
    let model = build_exact_model(&cb).map_err(value_err)?;
    to_json(&full_metrics(&model, include_attack).map_err(value_err)?)
}

/// Exact adversary analysis of the generated codebook, as JSON.
#[pyfunction(name = "attack_exact")]
#[allow(clippy::too_many_arguments)]
fn py_attack_exact(
    source: &PySource,
    aux: &PyAux,
    n: usize,
    k_users: usize,
    r_i: f64,
    epsilon: f64,
    delta_eps: f64,
    seed: u64,
) -> PyResult<String> {
    let spec = build_spec(source, aux, n, k_users, r_i, epsilon, delta_eps, seed)?;
    let cb = generate_codebook(&spec).map_err(value_err)?;
    let model = build_exact_model(&cb).map_err(value_err)?;
    to_json(&attack_analysis(&model, AttackOptions::default()).map_err(value_err)?)
}

/// Exhaustive enroll/identify round trip of the generated codebook, as
/// JSON.
#[pyfunction(name = "round_trip_exact")]
#[allow(clippy::too_many_arguments)]
fn py_round_trip_exact(
    source: &PySource,
    aux: &PyAux,
    n: usize,
    k_users: usize,
    r_i: f64,
    epsilon: f64,
    delta_eps: f64,
    seed: u64,
) -> PyResult<String> {
    let spec = build_spec(source, aux, n, k_users, r_i, epsilon, delta_eps, seed)?;
    let cb = generate_codebook(&spec).map_err(value_err)?;
    to_json(&exhaustive_round_trip(&cb).map_err(value_err)?)
}

/// Seeded Monte Carlo trials of the generated codebook, as JSON.
#[pyfunction(name = "monte_carlo")]
#[allow(clippy::too_many_arguments)]
fn py_monte_carlo(
    source: &PySource,
    aux: &PyAux,
    n: usize,
    k_users: usize,
    r_i: f64,
    epsilon: f64,
    delta_eps: f64,
    seed: u64,
    trials: u64,
) -> PyResult<String> {
    let spec = build_spec(source, aux, n, k_users, r_i, epsilon, delta_eps, seed)?;
    let cb = generate_codebook(&spec).map_err(value_err)?;
    to_json(&monte_carlo(&cb, trials, seed).map_err(value_err)?)
}

/// The information-identity self-checks over seeded random joints, as
/// JSON.
#[pyfunction(name = "identity_suite")]
fn py_identity_suite(seed: u64, joints: usize) -> PyResult<String> {
    to_json(&run_identity_suite(seed, joints))
}

#[pymodule]
fn idauth(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySource>()?;
    m.add_class::<PyAux>()?;
    m.add_class::<PyCorner>()?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(binary_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(py_evaluate_corner, m)?)?;
    m.add_function(wrap_pyfunction!(py_erasure_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(py_markov_structure_check, m)?)?;
    m.add_function(wrap_pyfunction!(py_optimize_frontier, m)?)?;
    m.add_function(wrap_pyfunction!(py_simulate_exact, m)?)?;
    m.add_function(wrap_pyfunction!(py_attack_exact, m)?)?;
    m.add_function(wrap_pyfunction!(py_round_trip_exact, m)?)?;
    m.add_function(wrap_pyfunction!(py_monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(py_identity_suite, m)?)?;
    Ok(())
}
