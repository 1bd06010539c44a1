//! Python bindings: grids, masks, level sets, moment descriptors, noise
//! families, phantoms and the segmentation driver.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyFloat, PyInt};

use priorseg::evolution::{auto_alpha_scale, EvolutionConfig};
use priorseg::synth::{self, NoiseSpec, PhantomSpec};
use priorseg::{io, noise, shape, Error, NoiseFamily, NoiseModels, Status};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn family(name: &str, variance: Option<f64>) -> PyResult<NoiseFamily> {
    NoiseFamily::from_name(name, variance).map_err(to_py)
}

#[pyclass(name = "ImageGrid", module = "priorseg_py", from_py_object)]
#[derive(Clone)]
pub struct PyImageGrid {
    inner: priorseg::ImageGrid,
}

#[pymethods]
impl PyImageGrid {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        let inner = priorseg::ImageGrid::new(width, height, data).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::read_image(path).map_err(to_py)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn get(&self, x: usize, y: usize) -> PyResult<f64> {
        if x >= self.inner.width() || y >= self.inner.height() {
            return Err(PyValueError::new_err(format!(
                "pixel ({x}, {y}) outside the grid"
            )));
        }
        Ok(self.inner.get(x, y))
    }

    /// Row-major values.
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("ImageGrid({}x{})", self.inner.width(), self.inner.height())
    }
}

#[pyclass(name = "RegionMask", module = "priorseg_py", from_py_object)]
#[derive(Clone)]
pub struct PyRegionMask {
    inner: priorseg::RegionMask,
}

#[pymethods]
impl PyRegionMask {
    #[new]
    fn new(width: usize, height: usize, data: Vec<bool>) -> PyResult<Self> {
        let inner = priorseg::RegionMask::new(width, height, data).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: io::read_mask(path).map_err(to_py)?,
        })
    }

    /// Disk of pixel centers strictly closer than `radius` to `(cx, cy)`.
    #[staticmethod]
    fn disk(width: usize, height: usize, cx: f64, cy: f64, radius: f64) -> PyResult<Self> {
        let inner = priorseg::RegionMask::from_fn(width, height, |x, y| {
            (x as f64 - cx).hypot(y as f64 - cy) < radius
        })
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    fn write_png(&self, path: &str) -> PyResult<()> {
        io::write_mask_png(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    fn area(&self) -> usize {
        self.inner.area()
    }

    fn shifted(&self, dx: isize, dy: isize) -> Self {
        Self {
            inner: self.inner.shifted(dx, dy),
        }
    }

    fn data(&self) -> Vec<bool> {
        self.inner.data().to_vec()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "RegionMask({}x{}, area={})",
            self.inner.width(),
            self.inner.height(),
            self.inner.area()
        )
    }
}

#[pyclass(name = "LevelSetField", module = "priorseg_py", from_py_object)]
#[derive(Clone)]
pub struct PyLevelSetField {
    inner: priorseg::LevelSetField,
}

#[pymethods]
impl PyLevelSetField {
    #[new]
    fn new(width: usize, height: usize, values: Vec<f64>) -> PyResult<Self> {
        let inner = priorseg::LevelSetField::new(width, height, values).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Signed distance to the boundary of `mask`, negative inside.
    #[staticmethod]
    fn from_mask(mask: &PyRegionMask) -> PyResult<Self> {
        Ok(Self {
            inner: priorseg::LevelSetField::from_mask(&mask.inner).map_err(to_py)?,
        })
    }

    fn mask(&self) -> PyRegionMask {
        PyRegionMask {
            inner: self.inner.mask(),
        }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn reinitialize(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.reinitialize().map_err(to_py)?,
        })
    }

    fn curvature(&self, x: usize, y: usize) -> f64 {
        self.inner.curvature(x, y)
    }

    fn contour_length(&self) -> f64 {
        self.inner.contour_length()
    }
}

#[pyclass(name = "MomentVector", module = "priorseg_py", from_py_object)]
#[derive(Clone)]
pub struct PyMomentVector {
    inner: priorseg::MomentVector,
}

#[pymethods]
impl PyMomentVector {
    #[staticmethod]
    #[pyo3(signature = (mask, order = 8))]
    fn from_mask(mask: &PyRegionMask, order: usize) -> PyResult<Self> {
        Ok(Self {
            inner: priorseg::MomentVector::from_mask(&mask.inner, order).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: priorseg::MomentVector::from_text(text).map_err(to_py)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn get(&self, p: usize, q: usize) -> PyResult<f64> {
        let n = self.inner.order();
        if p + q > n {
            return Err(PyValueError::new_err(format!(
                "p + q = {} exceeds order {n}",
                p + q
            )));
        }
        Ok(self.inner.get(p, q))
    }

    /// `(p, q, value)` triples with `p + q <= order`.
    fn items(&self) -> Vec<(usize, usize, f64)> {
        self.inner.iter().collect()
    }

    fn distance(&self, reference: &Self) -> PyResult<f64> {
        shape::shape_distance(&self.inner, &reference.inner).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// ML natural parameters of `samples` under `family`.
#[pyfunction]
#[pyo3(signature = (family_name, samples, variance = None))]
fn ml_estimate(family_name: &str, samples: Vec<f64>, variance: Option<f64>) -> PyResult<Vec<f64>> {
    let fam = family(family_name, variance)?;
    Ok(noise::ml_estimate(fam, &samples)
        .map_err(to_py)?
        .eta()
        .to_vec())
}

/// Gradient of the log-partition at `eta`, i.e. the model mean of T.
#[pyfunction]
#[pyo3(signature = (family_name, eta, variance = None))]
fn mean_sufficient_stat(
    family_name: &str,
    eta: Vec<f64>,
    variance: Option<f64>,
) -> PyResult<Vec<f64>> {
    let fam = family(family_name, variance)?;
    let p = noise::NaturalParams::new(fam, &eta).map_err(to_py)?;
    Ok(p.grad_log_partition())
}

#[pyfunction]
#[pyo3(signature = (family_name, eta, y, variance = None))]
fn log_pdf(family_name: &str, eta: Vec<f64>, y: f64, variance: Option<f64>) -> PyResult<f64> {
    let fam = family(family_name, variance)?;
    let p = noise::NaturalParams::new(fam, &eta).map_err(to_py)?;
    p.log_pdf(y).map_err(to_py)
}

#[pyfunction]
fn families() -> Vec<&'static str> {
    NoiseFamily::ALL_NAMES.to_vec()
}

#[pyfunction]
fn hamming(a: &PyRegionMask, b: &PyRegionMask) -> PyResult<(usize, f64)> {
    synth::hamming(&a.inner, &b.inner).map_err(to_py)
}

#[pyfunction]
fn dice(a: &PyRegionMask, b: &PyRegionMask) -> PyResult<f64> {
    synth::dice(&a.inner, &b.inner).map_err(to_py)
}

/// Render a phantom and add noise, both given as JSON objects.
/// Returns `(noisy, ground_truth, occluded)`.
#[pyfunction]
fn phantom(
    spec_json: &str,
    noise_json: &str,
) -> PyResult<(PyImageGrid, PyRegionMask, PyRegionMask)> {
    let spec: PhantomSpec = serde_json::from_str(spec_json)
        .map_err(|e| PyValueError::new_err(format!("phantom spec: {e}")))?;
    let ns: NoiseSpec = serde_json::from_str(noise_json)
        .map_err(|e| PyValueError::new_err(format!("noise spec: {e}")))?;
    let p = synth::render_phantom(&spec).map_err(to_py)?;
    let noisy = synth::add_noise(&p.clean, &p.occluded, &ns).map_err(to_py)?;
    Ok((
        PyImageGrid { inner: noisy },
        PyRegionMask { inner: p.truth },
        PyRegionMask { inner: p.occluded },
    ))
}

fn config_from_kwargs(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<EvolutionConfig> {
    let mut map = serde_json::Map::new();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            let value = if v.is_instance_of::<PyInt>() {
                serde_json::Value::from(v.extract::<u64>()?)
            } else if v.is_instance_of::<PyFloat>() {
                serde_json::Value::from(v.extract::<f64>()?)
            } else {
                return Err(PyValueError::new_err(format!("{key}: expected a number")));
            };
            map.insert(key, value);
        }
    }
    let mut merged = serde_json::to_value(EvolutionConfig::default()).expect("config serializes");
    for (k, v) in map {
        merged[k.as_str()] = v;
    }
    serde_json::from_value(merged)
        .map_err(|e| PyValueError::new_err(format!("evolution config: {e}")))
}

/// Segment `image` from `init`; extra keyword arguments set evolution
/// config fields. `alpha_scale` multiplies the automatic prior weight.
/// Returns a dict with mask, status, outer_iters, alpha and energies.
#[pyfunction]
#[pyo3(signature = (image, init, inside = "gaussian-mean-var", outside = None, reference = None, alpha_scale = None, **config))]
#[allow(clippy::too_many_arguments)]
fn segment<'py>(
    py: Python<'py>,
    image: &PyImageGrid,
    init: &PyRegionMask,
    inside: &str,
    outside: Option<&str>,
    reference: Option<&PyMomentVector>,
    alpha_scale: Option<f64>,
    config: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = config_from_kwargs(config)?;
    if let Some(s) = alpha_scale {
        cfg.alpha = s * auto_alpha_scale(&init.inner);
    }
    let models = NoiseModels {
        inside: family(inside, None)?,
        outside: family(outside.unwrap_or(inside), None)?,
    };
    let img = image.inner.clone();
    let mask = init.inner.clone();
    let lam = reference.map(|r| r.inner.clone());
    let seg = py
        .detach(|| priorseg::segment(&img, &mask, &cfg, &models, lam.as_ref()))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    let (status, reason) = match &seg.status {
        Status::Converged => ("converged", None),
        Status::MaxIterations => ("max-iterations", None),
        Status::Aborted { reason } => ("aborted", Some(reason.clone())),
    };
    out.set_item("status", status)?;
    out.set_item("reason", reason)?;
    out.set_item("outer_iters", seg.outer_iters)?;
    out.set_item("alpha", cfg.alpha)?;
    out.set_item("energies", seg.trace.outer_energies())?;
    out.set_item("trace_csv", seg.trace.to_csv(false))?;
    out.set_item("mask", PyRegionMask { inner: seg.mask })?;
    Ok(out)
}

#[pymodule]
fn priorseg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImageGrid>()?;
    m.add_class::<PyRegionMask>()?;
    m.add_class::<PyLevelSetField>()?;
    m.add_class::<PyMomentVector>()?;
    m.add_function(wrap_pyfunction!(ml_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(mean_sufficient_stat, m)?)?;
    m.add_function(wrap_pyfunction!(log_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(families, m)?)?;
    m.add_function(wrap_pyfunction!(hamming, m)?)?;
    m.add_function(wrap_pyfunction!(dice, m)?)?;
    m.add_function(wrap_pyfunction!(phantom, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
