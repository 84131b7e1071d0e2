//! Python bindings for the hazeorder dehazing library. Images cross the
//! boundary as interleaved 8-bit bytes plus (width, height, channels).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use hazeorder::image::{AtmosphericLight, DehazeConfig, PlanarImage, ScalarMap, WeightFn};

fn err(e: hazeorder::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn decode(data: &[u8], width: usize, height: usize, channels: usize) -> PyResult<PlanarImage> {
    PlanarImage::from_bytes(data, width, height, channels).map_err(err)
}

fn airlight_opt(values: Option<Vec<f64>>) -> PyResult<Option<AtmosphericLight>> {
    values
        .map(|v| AtmosphericLight::new(v).map_err(err))
        .transpose()
}

/// Dehaze an interleaved 8-bit image. Returns (bytes, theta_hat_clear,
/// overflow_fraction).
#[pyfunction]
#[pyo3(signature = (data, width, height, channels, r=35, epsilon=0.02, weight_fn="phi2", apply_clahe=true, airlight=None))]
#[allow(clippy::too_many_arguments)]
fn dehaze<'py>(
    py: Python<'py>,
    data: &[u8],
    width: usize,
    height: usize,
    channels: usize,
    r: usize,
    epsilon: f64,
    weight_fn: &str,
    apply_clahe: bool,
    airlight: Option<Vec<f64>>,
) -> PyResult<(Bound<'py, PyBytes>, f64, f64)> {
    let img = decode(data, width, height, channels)?;
    let cfg = DehazeConfig {
        r,
        epsilon,
        weight_fn: WeightFn::parse(weight_fn).map_err(err)?,
        apply_clahe,
        ..DehazeConfig::default()
    };
    let (out, trace) =
        hazeorder::dehaze_with(&img, &cfg, airlight_opt(airlight)?).map_err(err)?;
    Ok((
        PyBytes::new(py, &out.to_bytes()),
        trace.theta_hat_clear,
        trace.overflow_fraction,
    ))
}

/// Apply the forward haze model to a clear image with a per-pixel depth map.
#[pyfunction]
#[pyo3(signature = (data, width, height, channels, depth, beta, airlight))]
fn synthesize<'py>(
    py: Python<'py>,
    data: &[u8],
    width: usize,
    height: usize,
    channels: usize,
    depth: Vec<f64>,
    beta: f64,
    airlight: Vec<f64>,
) -> PyResult<Bound<'py, PyBytes>> {
    let clear = decode(data, width, height, channels)?;
    let depth = ScalarMap::new(width, height, depth).map_err(err)?;
    let a = AtmosphericLight::new(airlight).map_err(err)?;
    let params = hazeorder::SynthParams::new(beta, a, depth).map_err(err)?;
    let hazy = hazeorder::synthesize_haze(&clear, &params).map_err(err)?;
    Ok(PyBytes::new(py, &hazy.to_bytes()))
}

/// Estimate the global atmospheric light of a hazy image.
#[pyfunction]
fn estimate_airlight(
    data: &[u8],
    width: usize,
    height: usize,
    channels: usize,
) -> PyResult<Vec<f64>> {
    let img = decode(data, width, height, channels)?;
    Ok(hazeorder::airlight::estimate_airlight(&img)
        .map_err(err)?
        .components()
        .to_vec())
}

#[pyfunction]
fn psnr(a: &[u8], b: &[u8], width: usize, height: usize, channels: usize) -> PyResult<f64> {
    hazeorder::metrics::psnr(
        &decode(a, width, height, channels)?,
        &decode(b, width, height, channels)?,
    )
    .map_err(err)
}

#[pyfunction]
fn ssim(a: &[u8], b: &[u8], width: usize, height: usize, channels: usize) -> PyResult<f64> {
    hazeorder::metrics::ssim(
        &decode(a, width, height, channels)?,
        &decode(b, width, height, channels)?,
    )
    .map_err(err)
}

#[pyfunction]
fn ciede2000(a: &[u8], b: &[u8], width: usize, height: usize, channels: usize) -> PyResult<f64> {
    hazeorder::metrics::ciede2000(
        &decode(a, width, height, channels)?,
        &decode(b, width, height, channels)?,
    )
    .map_err(err)
}

/// Spearman rank correlation with average-rank tie handling.
#[pyfunction]
fn spearman_rho(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    hazeorder::analysis::spearman_rho(&xs, &ys).map_err(err)
}

#[pymodule]
fn hazeorder_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dehaze, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_airlight, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(ciede2000, m)?)?;
    m.add_function(wrap_pyfunction!(spearman_rho, m)?)?;
    Ok(())
}
