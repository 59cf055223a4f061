//! Python access to the bell functions and the projection operators. Operators
//! expose their finite expansions, so `apply` works with any Python callable.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use hestenes::bell::{BellFunction, Ramp};
use hestenes::circle::{circle_projection, ArcSpec, CircleOperator};
use hestenes::hestenes1d::{projection_interval, IntervalProjectionSpec, Operator1D};
use hestenes::lattice::{lattice_domain_projection, FundamentalDomain, Lattice, OperatorRd};
use hestenes::quadrature::PanelRule;
use hestenes::spheregeom::SpherePoint;
use hestenes::sphereops::{
    ball_projection, constant_direct, latitudinal_projection_u, patch_projection, LatitudinalSpec, PatchSpec,
    SphereOperator,
};

fn err(e: hestenes::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn make_bell(delta: f64, ramp: &str) -> PyResult<BellFunction> {
    let ramp = match ramp {
        "bump" => Ramp::default(),
        "exp-quotient" => Ramp::ExpQuotient,
        other => return Err(PyValueError::new_err(format!("unknown ramp {other:?}"))),
    };
    BellFunction::new(delta, ramp).map_err(err)
}

fn sum_scalar(f: &Bound<'_, PyAny>, terms: &[(f64, f64)]) -> PyResult<f64> {
    let mut total = 0.0;
    for &(c, t) in terms {
        total += c * f.call1((t,))?.extract::<f64>()?;
    }
    Ok(total)
}

fn sum_vector(f: &Bound<'_, PyAny>, terms: Vec<(f64, Vec<f64>)>) -> PyResult<f64> {
    let mut total = 0.0;
    for (c, y) in terms {
        total += c * f.call1((y,))?.extract::<f64>()?;
    }
    Ok(total)
}

/// Smooth bell `s` with `s²(t) + s²(-t) = 1`, constant outside `[-delta, delta]`.
#[pyclass(name = "Bell")]
pub struct PyBell(BellFunction);

#[pymethods]
impl PyBell {
    #[new]
    #[pyo3(signature = (delta, ramp = "bump"))]
    fn new(delta: f64, ramp: &str) -> PyResult<Self> {
        Ok(Self(make_bell(delta, ramp)?))
    }

    fn __call__(&self, t: f64) -> f64 {
        self.0.eval(t)
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta()
    }
}

/// Smooth orthogonal projection onto functions living near `[alpha, beta]`.
#[pyclass(name = "IntervalProjection")]
pub struct PyIntervalProjection {
    spec: IntervalProjectionSpec,
    op: Operator1D,
}

#[pymethods]
impl PyIntervalProjection {
    #[new]
    #[pyo3(signature = (alpha, beta, delta, ramp = "bump"))]
    fn new(alpha: f64, beta: f64, delta: f64, ramp: &str) -> PyResult<Self> {
        let spec = IntervalProjectionSpec::new(alpha, beta, make_bell(delta, ramp)?).map_err(err)?;
        let op = projection_interval(&spec).map_err(err)?;
        Ok(Self { spec, op })
    }

    /// `[(c_i, t_i)]` with `P f(t) = Σ c_i f(t_i)`.
    fn expand(&self, t: f64) -> Vec<(f64, f64)> {
        self.op.expand(t)
    }

    fn apply(&self, f: &Bound<'_, PyAny>, t: f64) -> PyResult<f64> {
        sum_scalar(f, &self.op.expand(t))
    }

    fn multiplier(&self, t: f64) -> f64 {
        self.spec.multiplier_value(t)
    }

    #[getter]
    fn localization(&self) -> (f64, f64) {
        let iv = self.op.localization();
        (iv.lo, iv.hi)
    }
}

/// Projection onto functions near the arc from `alpha` to `beta` on the circle.
#[pyclass(name = "ArcProjection")]
pub struct PyArcProjection {
    spec: ArcSpec,
    op: CircleOperator,
}

#[pymethods]
impl PyArcProjection {
    #[new]
    #[pyo3(signature = (alpha, beta, delta, ramp = "bump"))]
    fn new(alpha: f64, beta: f64, delta: f64, ramp: &str) -> PyResult<Self> {
        let spec = ArcSpec::new(alpha, beta, make_bell(delta, ramp)?).map_err(err)?;
        let op = circle_projection(&spec).map_err(err)?;
        Ok(Self { spec, op })
    }

    fn expand(&self, angle: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        self.op.expand_into(angle, &mut out);
        out
    }

    fn apply(&self, f: &Bound<'_, PyAny>, angle: f64) -> PyResult<f64> {
        sum_scalar(f, &self.expand(angle))
    }

    /// Rotation-average constant `(beta - alpha) / 2π`.
    #[getter]
    fn constant(&self) -> f64 {
        self.spec.constant()
    }
}

/// Projection for a lattice-periodic tiling of a fundamental domain in the plane.
#[pyclass(name = "LatticeProjection")]
pub struct PyLatticeProjection {
    op: OperatorRd,
    f0_count: usize,
    f1_count: usize,
}

#[pymethods]
impl PyLatticeProjection {
    #[new]
    #[pyo3(signature = (domain = "square", n = 10, eps = 0.4, delta = 0.1, ramp = "bump"))]
    fn new(domain: &str, n: u32, eps: f64, delta: f64, ramp: &str) -> PyResult<Self> {
        let (k, lattice) = match domain {
            "square" => (FundamentalDomain::unit_cube(2), Lattice::integer(2)),
            "hexagon" => (FundamentalDomain::hexagon(), Lattice::hexagonal()),
            other => return Err(PyValueError::new_err(format!("unknown domain {other:?}"))),
        };
        let bell = make_bell(delta, ramp)?;
        let (op, tiling) = lattice_domain_projection(&k, &lattice, n, eps, &bell).map_err(err)?;
        Ok(Self { op, f0_count: tiling.f0.len(), f1_count: tiling.f1.len() })
    }

    fn expand(&self, x: Vec<f64>) -> Vec<(f64, Vec<f64>)> {
        self.op.expand(&x).into_iter().map(|(c, y)| (c, y.to_vec())).collect()
    }

    fn apply(&self, f: &Bound<'_, PyAny>, x: Vec<f64>) -> PyResult<f64> {
        sum_vector(f, self.expand(x))
    }

    #[getter]
    fn f0_count(&self) -> usize {
        self.f0_count
    }

    #[getter]
    fn f1_count(&self) -> usize {
        self.f1_count
    }
}

/// Projection on the sphere `S²`.
#[pyclass(name = "SphereProjection")]
pub struct PySphereProjection(SphereOperator);

#[pymethods]
impl PySphereProjection {
    /// Latitudinal projection onto the strip `theta <= t <= π - theta`.
    #[staticmethod]
    #[pyo3(signature = (theta, delta, ramp = "bump"))]
    fn latitudinal(theta: f64, delta: f64, ramp: &str) -> PyResult<Self> {
        let spec = LatitudinalSpec::new(theta, 2, make_bell(delta, ramp)?).map_err(err)?;
        Ok(Self(latitudinal_projection_u(&spec).map_err(err)?))
    }

    /// Projection onto the coordinate patch `[t1, t2] × [l1, l2]` (polar, azimuthal).
    #[staticmethod]
    #[pyo3(signature = (t1, t2, l1, l2, delta, ramp = "bump"))]
    fn patch(t1: f64, t2: f64, l1: f64, l2: f64, delta: f64, ramp: &str) -> PyResult<Self> {
        let patch = PatchSpec::new(vec![(t1, t2), (l1, l2)], delta).map_err(err)?;
        Ok(Self(patch_projection(&patch, &make_bell(delta, ramp)?).map_err(err)?))
    }

    /// Projection localized in the geodesic ball of `radius` about `center`.
    #[staticmethod]
    #[pyo3(signature = (center, radius, ramp = "bump"))]
    fn ball(center: Vec<f64>, radius: f64, ramp: &str) -> PyResult<Self> {
        let c = SpherePoint::new(&center).map_err(err)?;
        let bell = make_bell((radius / 16.0).max(1e-6), ramp)?;
        Ok(Self(ball_projection(&c, radius, &bell).map_err(err)?.op))
    }

    fn expand(&self, x: Vec<f64>) -> Vec<(f64, Vec<f64>)> {
        self.0.expand(&x).into_iter().map(|(c, y)| (c, y.to_vec())).collect()
    }

    fn apply(&self, f: &Bound<'_, PyAny>, x: Vec<f64>) -> PyResult<f64> {
        sum_vector(f, self.expand(x))
    }

    /// Rotation-average constant `∫ P1 dσ` in normalized measure.
    fn constant(&self) -> PyResult<f64> {
        constant_direct(&self.0, &PanelRule::new(32, 1)).map_err(err)
    }
}

#[pymodule]
fn pyhestenes(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBell>()?;
    m.add_class::<PyIntervalProjection>()?;
    m.add_class::<PyArcProjection>()?;
    m.add_class::<PyLatticeProjection>()?;
    m.add_class::<PySphereProjection>()?;
    Ok(())
}
