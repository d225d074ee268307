//! Python bindings. Complex numbers cross the boundary as Python `complex`,
//! matrices as nested lists, and morphisms as lists of matrices (one per
//! basis element of the Hom space).

use mirror_torus::derived::{compose as derived_compose, compose_with_torsion, DerivedMorphism, LineBundleObj, TorsionObj};
use mirror_torus::fukaya::{m2 as fukaya_m2, FukayaMorphism};
use mirror_torus::mirror::{self, phi_object, DerivedObj};
use mirror_torus::shift::parse_shift;
use mirror_torus::sweep::{run_suite, Suite};
use mirror_torus::theta::{theta_eval as core_theta, DEFAULT_EPSILON};
use mirror_torus::{LocalSystemData, Matrix, MirrorError, ModularParam, Shift, ThetaChar, TruncationSpec, C64};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(mirror_torus, MirrorTorusError, PyValueError);

fn err(e: MirrorError) -> PyErr {
    MirrorTorusError::new_err(e.to_string())
}

type Rows = Vec<Vec<C64>>;

#[derive(FromPyObject)]
enum ShiftArg {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ShiftArg {
    fn into_shift(self) -> PyResult<Shift> {
        match self {
            ShiftArg::Int(v) => Ok(Shift::int(v)),
            ShiftArg::Float(v) => Ok(Shift::Real(v)),
            ShiftArg::Text(t) => parse_shift(&t).map_err(MirrorTorusError::new_err),
        }
    }
}

fn trunc(eps: Option<f64>) -> PyResult<TruncationSpec> {
    let eps = eps.unwrap_or(DEFAULT_EPSILON);
    if !(eps > 0.0) {
        return Err(MirrorTorusError::new_err(format!("epsilon must be positive, got {eps}")));
    }
    Ok(TruncationSpec::with_epsilon(eps))
}

fn param(tau: C64) -> PyResult<ModularParam> {
    ModularParam::new(tau).map_err(err)
}

fn local(rows: Option<Rows>) -> PyResult<LocalSystemData> {
    match rows {
        None => Ok(LocalSystemData::trivial(1)),
        Some(r) => LocalSystemData::new(Matrix::from_rows(&r).map_err(err)?).map_err(err),
    }
}

fn tensors(coeffs: Vec<Rows>) -> PyResult<Vec<Matrix>> {
    coeffs.iter().map(|r| Matrix::from_rows(r).map_err(err)).collect()
}

fn rows(coeffs: &[Matrix]) -> Vec<Rows> {
    coeffs.iter().map(Matrix::to_rows).collect()
}

/// A flat line bundle `L(n) ⊗ E` with shifts `alpha`, `beta`.
#[pyclass(module = "mirror_torus", frozen, skip_from_py_object)]
#[derive(Clone)]
struct LineBundle {
    inner: LineBundleObj,
}

#[pymethods]
impl LineBundle {
    #[new]
    #[pyo3(signature = (tau, degree, alpha=ShiftArg::Int(0), beta=ShiftArg::Int(0), local_system=None))]
    fn new(tau: C64, degree: i64, alpha: ShiftArg, beta: ShiftArg, local_system: Option<Rows>) -> PyResult<Self> {
        let inner = LineBundleObj::new(param(tau)?, degree, alpha.into_shift()?, beta.into_shift()?, local(local_system)?);
        Ok(Self { inner })
    }

    #[getter]
    fn degree(&self) -> i64 {
        self.inner.degree
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    /// Hom dimension computed on the derived and on the Fukaya side.
    fn hom_dimensions(&self, other: &LineBundle) -> PyResult<(usize, usize)> {
        mirror::hom_dimensions(&self.inner, &other.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "LineBundle(degree={}, alpha={}, beta={}, rank={})",
            self.inner.degree,
            self.inner.alpha.value(),
            self.inner.beta.value(),
            self.inner.rank()
        )
    }
}

/// A skyscraper-type torsion sheaf supported at `alpha tau + beta`.
#[pyclass(module = "mirror_torus", frozen, skip_from_py_object)]
#[derive(Clone)]
struct TorsionSheaf {
    inner: TorsionObj,
}

#[pymethods]
impl TorsionSheaf {
    #[new]
    #[pyo3(signature = (tau, alpha=ShiftArg::Int(0), beta=ShiftArg::Int(0), local_system=None))]
    fn new(tau: C64, alpha: ShiftArg, beta: ShiftArg, local_system: Option<Rows>) -> PyResult<Self> {
        let inner = TorsionObj::new(param(tau)?, alpha.into_shift()?, beta.into_shift()?, local(local_system)?);
        Ok(Self { inner })
    }

    #[getter]
    fn length(&self) -> usize {
        self.inner.length()
    }

    fn __repr__(&self) -> String {
        format!("TorsionSheaf(alpha={}, beta={}, length={})", self.inner.alpha.value(), self.inner.beta.value(), self.inner.length())
    }
}

enum Target {
    Line(LineBundleObj),
    Torsion(TorsionObj),
}

fn target(obj: &Bound<'_, PyAny>) -> PyResult<Target> {
    if let Ok(l) = obj.extract::<PyRef<'_, LineBundle>>() {
        return Ok(Target::Line(l.inner.clone()));
    }
    if let Ok(t) = obj.extract::<PyRef<'_, TorsionSheaf>>() {
        return Ok(Target::Torsion(t.inner.clone()));
    }
    Err(MirrorTorusError::new_err("expected a LineBundle or TorsionSheaf"))
}

/// `(d/dz)^order theta[c', c''](tau, z)`.
#[pyfunction]
#[pyo3(signature = (c_prime, c_double_prime, tau, z=C64::new(0.0, 0.0), order=0, eps=None))]
fn theta_eval(c_prime: f64, c_double_prime: f64, tau: C64, z: C64, order: u32, eps: Option<f64>) -> PyResult<C64> {
    core_theta(&ThetaChar::new(c_prime, c_double_prime), &param(tau)?, z, order, &trunc(eps)?).map_err(err)
}

/// Derived-side composite `b ∘ a` for `o1 -> o2 -> o3`, coefficients in the theta basis.
#[pyfunction]
#[pyo3(signature = (o1, o2, o3, a, b, eps=None))]
fn compose(
    o1: &LineBundle,
    o2: &LineBundle,
    o3: &Bound<'_, PyAny>,
    a: Vec<Rows>,
    b: Vec<Rows>,
    eps: Option<f64>,
) -> PyResult<Vec<Rows>> {
    let tr = trunc(eps)?;
    let s = DerivedMorphism::new(o1.inner.clone(), o2.inner.clone(), tensors(a)?).map_err(err)?;
    let b = tensors(b)?;
    let out = match target(o3)? {
        Target::Line(l) => {
            let t = DerivedMorphism::new(o2.inner.clone(), l, b).map_err(err)?;
            derived_compose(&s, &t, &tr).map_err(err)?.coeffs
        }
        Target::Torsion(t) => {
            let [bt] = b.as_slice() else {
                return Err(MirrorTorusError::new_err("a morphism into a torsion sheaf has one coefficient"));
            };
            vec![compose_with_torsion(&s, bt, &t, &tr).map_err(err)?]
        }
    };
    Ok(rows(&out))
}

/// Fukaya-side product `m2(a, b)` on the mirror lines, coefficients indexed by
/// intersection points.
#[pyfunction]
#[pyo3(signature = (o1, o2, o3, a, b, eps=None))]
fn m2(
    o1: &LineBundle,
    o2: &LineBundle,
    o3: &Bound<'_, PyAny>,
    a: Vec<Rows>,
    b: Vec<Rows>,
    eps: Option<f64>,
) -> PyResult<Vec<Rows>> {
    let l1 = phi_object(&DerivedObj::Line(o1.inner.clone()));
    let l2 = phi_object(&DerivedObj::Line(o2.inner.clone()));
    let l3 = match target(o3)? {
        Target::Line(l) => phi_object(&DerivedObj::Line(l)),
        Target::Torsion(t) => phi_object(&DerivedObj::Torsion(t)),
    };
    let u = FukayaMorphism::new(l1, l2.clone(), tensors(a)?).map_err(err)?;
    let v = FukayaMorphism::new(l2, l3, tensors(b)?).map_err(err)?;
    Ok(rows(&fukaya_m2(&u, &v, &trunc(eps)?).map_err(err)?.coeffs))
}

/// Image of a derived morphism under the mirror functor.
#[pyfunction]
fn phi(o1: &LineBundle, o2: &LineBundle, a: Vec<Rows>) -> PyResult<Vec<Rows>> {
    let m = DerivedMorphism::new(o1.inner.clone(), o2.inner.clone(), tensors(a)?).map_err(err)?;
    Ok(rows(&mirror::phi_morphism(&m).map_err(err)?.coeffs))
}

/// `max |Phi(b ∘ a) - m2(Phi a, Phi b)|`.
#[pyfunction]
#[pyo3(signature = (o1, o2, o3, a, b, eps=None))]
fn functoriality_residual(
    o1: &LineBundle,
    o2: &LineBundle,
    o3: &Bound<'_, PyAny>,
    a: Vec<Rows>,
    b: Vec<Rows>,
    eps: Option<f64>,
) -> PyResult<f64> {
    let tr = trunc(eps)?;
    let s = DerivedMorphism::new(o1.inner.clone(), o2.inner.clone(), tensors(a)?).map_err(err)?;
    let b = tensors(b)?;
    match target(o3)? {
        Target::Line(l) => {
            let t = DerivedMorphism::new(o2.inner.clone(), l, b).map_err(err)?;
            mirror::functoriality_residual(&s, &t, &tr).map_err(err)
        }
        Target::Torsion(t) => {
            let [bt] = b.as_slice() else {
                return Err(MirrorTorusError::new_err("a morphism into a torsion sheaf has one coefficient"));
            };
            mirror::torsion_functoriality_residual(&s, bt, &t, &tr).map_err(err)
        }
    }
}

/// Runs a verification sweep and returns its JSON report.
#[pyfunction]
#[pyo3(signature = (suite, seed=0, count=20, eps=None))]
fn verify(py: Python<'_>, suite: &str, seed: u64, count: usize, eps: Option<f64>) -> PyResult<String> {
    let suite: Suite = suite.parse().map_err(MirrorTorusError::new_err)?;
    let tr = trunc(eps)?;
    let report = py.detach(|| run_suite(suite, seed, count, &tr));
    serde_json::to_string(&report).map_err(|e| MirrorTorusError::new_err(e.to_string()))
}

#[pymodule]
#[pyo3(name = "mirror_torus")]
pub fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MirrorTorusError", m.py().get_type::<MirrorTorusError>())?;
    m.add_class::<LineBundle>()?;
    m.add_class::<TorsionSheaf>()?;
    m.add_function(wrap_pyfunction!(theta_eval, m)?)?;
    m.add_function(wrap_pyfunction!(compose, m)?)?;
    m.add_function(wrap_pyfunction!(m2, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(functoriality_residual, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
