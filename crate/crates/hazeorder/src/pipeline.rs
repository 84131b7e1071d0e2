//! The dehazing pipeline: color difference to the airlight, depth-order
//! extraction by local max, the order-preserving transformation of theta,
//! boundary-constrained selection of the global target, transmission
//! estimation with guided-filter refinement, and radiance recovery. Also the
//! forward haze synthesizer used for testing and evaluation.

use crate::airlight::estimate_airlight;
use crate::error::{Error, Result};
use crate::filters::{guided_filter, max_filter};
use crate::image::{AtmosphericLight, DehazeConfig, PlanarImage, ScalarMap, WeightFn};

/// Pixels whose boundary denominator `t_b * phi(z)` falls below this are
/// excluded from the percentile pool; they can never reach the range boundary.
const BOUNDARY_DENOM_MIN: f64 = 1e-9;
/// Theta values below this are treated as zero when dividing for transmission.
const THETA_DIV_MIN: f64 = 1e-9;

/// Parameters of the forward haze model: H = J * t + A * (1 - t) with
/// t = exp(-beta * d).
#[derive(Debug, Clone)]
pub struct SynthParams {
    pub beta: f64,
    pub airlight: AtmosphericLight,
    pub depth: ScalarMap,
}

impl SynthParams {
    pub fn new(beta: f64, airlight: AtmosphericLight, depth: ScalarMap) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Config(format!("beta must be > 0, got {beta}")));
        }
        if depth.data().iter().any(|&d| d < 0.0) {
            return Err(Error::Config("depth must be nonnegative".into()));
        }
        Ok(SynthParams {
            beta,
            airlight,
            depth,
        })
    }

    /// True transmission map exp(-beta * d).
    pub fn transmission(&self) -> ScalarMap {
        self.depth.map(|d| (-self.beta * d).exp())
    }
}

/// Intermediate maps produced by a dehazing run, for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct PipelineTrace {
    pub airlight: AtmosphericLight,
    pub theta_haze: ScalarMap,
    pub theta_r_haze: ScalarMap,
    pub z: ScalarMap,
    pub w: ScalarMap,
    /// Global target max color difference for the dehazed image.
    pub theta_hat_clear: f64,
    pub theta_r_clear: ScalarMap,
    pub t_raw: ScalarMap,
    pub t_refined: ScalarMap,
    /// Fraction of pixels with at least one pre-clamp recovered sample
    /// outside [0,1].
    pub overflow_fraction: f64,
}

/// Applies the forward scattering model to a clear image.
pub fn synthesize_haze(clear: &PlanarImage, params: &SynthParams) -> Result<PlanarImage> {
    if params.depth.width() != clear.width() || params.depth.height() != clear.height() {
        return Err(Error::Structure(
            "depth map dimensions do not match the image".into(),
        ));
    }
    if params.airlight.len() != clear.channels() {
        return Err(Error::Structure(
            "airlight channel count does not match the image".into(),
        ));
    }
    let t = params.transmission();
    let n = clear.pixels();
    let mut data = vec![0.0; n * clear.channels()];
    for (c, &a) in params.airlight.components().iter().enumerate() {
        let plane = clear.channel(c);
        for i in 0..n {
            let ti = t.data()[i];
            data[c * n + i] = (plane[i] * ti + a * (1.0 - ti)).clamp(0.0, 1.0);
        }
    }
    Ok(PlanarImage::from_planes(
        clear.width(),
        clear.height(),
        clear.channels(),
        data,
    ))
}

/// Euclidean RGB distance from each pixel to the airlight; absolute
/// difference for single-channel images.
pub fn color_difference(img: &PlanarImage, airlight: &AtmosphericLight) -> Result<ScalarMap> {
    if airlight.len() != img.channels() {
        return Err(Error::Structure(
            "airlight channel count does not match the image".into(),
        ));
    }
    let n = img.pixels();
    let mut acc = vec![0.0; n];
    for (c, &a) in airlight.components().iter().enumerate() {
        let plane = img.channel(c);
        for i in 0..n {
            let d = plane[i] - a;
            acc[i] += d * d;
        }
    }
    // for 1-channel images this reduces to |I - A|
    for v in acc.iter_mut() {
        *v = v.sqrt();
    }
    ScalarMap::new(img.width(), img.height(), acc)
}

/// Local-max strengthening of the color difference. The reverse order of the
/// result approximates the scene depth order.
pub fn extract_depth_order(theta: &ScalarMap, r: usize) -> Result<ScalarMap> {
    if r < 3 {
        return Err(Error::Config(format!("patch size must be >= 3, got {r}")));
    }
    max_filter(theta, r)
}

/// Min-max normalization to [0,1]; a constant map normalizes to all zeros.
pub fn normalize(theta_r: &ScalarMap) -> ScalarMap {
    let lo = theta_r.min();
    let hi = theta_r.max();
    let span = hi - lo;
    if span < 1e-12 {
        return ScalarMap::filled(theta_r.width(), theta_r.height(), 0.0);
    }
    theta_r.map(|v| (v - lo) / span)
}

/// Applies the chosen weight function elementwise.
pub fn weight(z: &ScalarMap, weight_fn: WeightFn) -> ScalarMap {
    z.map(|v| weight_fn.apply(v))
}

/// Per-pixel transmission at which recovery first hits the [0,1] range
/// boundary, clamped to [0,1].
pub fn boundary_transmission(hazy: &PlanarImage, airlight: &AtmosphericLight) -> Result<ScalarMap> {
    if airlight.len() != hazy.channels() {
        return Err(Error::Structure(
            "airlight channel count does not match the image".into(),
        ));
    }
    let n = hazy.pixels();
    let mut tb = vec![f64::NEG_INFINITY; n];
    for (c, &a) in airlight.components().iter().enumerate() {
        let plane = hazy.channel(c);
        for i in 0..n {
            let num = plane[i] - a;
            let lower = num / (0.0 - a);
            let upper = num / (1.0 - a);
            tb[i] = tb[i].max(lower.max(upper));
        }
    }
    for v in tb.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    ScalarMap::new(hazy.width(), hazy.height(), tb)
}

/// The global target value at which one pixel exactly reaches the boundary.
/// Returns `None` when the pixel can never reach it (degenerate denominator).
pub fn boundary_theta_value(theta_r: f64, t_b: f64, phi_z: f64) -> Option<f64> {
    let denom = t_b * phi_z;
    if denom < BOUNDARY_DENOM_MIN {
        return None;
    }
    Some(theta_r / denom * (1.0 - t_b + denom))
}

/// Collects the per-pixel boundary targets that constrain the global
/// optimization; degenerate pixels are excluded from the pool.
pub fn boundary_theta_pool(
    theta_r: &ScalarMap,
    z: &ScalarMap,
    t_b: &ScalarMap,
    weight_fn: WeightFn,
) -> Result<Vec<f64>> {
    if !theta_r.same_shape(z) || !theta_r.same_shape(t_b) {
        return Err(Error::Structure("boundary maps must share dimensions".into()));
    }
    Ok(theta_r
        .data()
        .iter()
        .zip(z.data())
        .zip(t_b.data())
        .filter_map(|((&th, &zi), &tb)| boundary_theta_value(th, tb, weight_fn.apply(zi)))
        .collect())
}

/// Percentile of the values by linear interpolation between closest ranks
/// (position epsilon * (n - 1) in the ascending sort).
pub fn sortp(values: &[f64], epsilon: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Undefined("empty percentile pool".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon must be in [0,1], got {epsilon}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = epsilon * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] * (1.0 - frac) + sorted[hi] * frac)
}

/// Final global target: at least the maximum of the hazy theta map, so the
/// transformation never shrinks any value.
pub fn global_theta_hat(theta_eps: f64, theta_r: &ScalarMap) -> f64 {
    theta_eps.max(theta_r.max())
}

/// Order-preserving linear interpolation toward the global target:
/// theta_clear = theta_r * (1 - w) + theta_hat * w.
pub fn transform_theta(theta_r: &ScalarMap, w: &ScalarMap, theta_hat: f64) -> Result<ScalarMap> {
    if !theta_r.same_shape(w) {
        return Err(Error::Structure("weight map dimensions differ".into()));
    }
    let data = theta_r
        .data()
        .iter()
        .zip(w.data())
        .map(|(&th, &wi)| th * (1.0 - wi) + theta_hat * wi)
        .collect();
    ScalarMap::new(theta_r.width(), theta_r.height(), data)
}

/// Raw transmission as the ratio of hazy to clear theta, with a floor for
/// pixels indistinguishable from the airlight.
pub fn transmission(
    theta_haze_r: &ScalarMap,
    theta_clear_r: &ScalarMap,
    t_floor: f64,
) -> Result<ScalarMap> {
    if !theta_haze_r.same_shape(theta_clear_r) {
        return Err(Error::Structure("theta map dimensions differ".into()));
    }
    let data = theta_haze_r
        .data()
        .iter()
        .zip(theta_clear_r.data())
        .map(|(&th, &tc)| {
            if tc < THETA_DIV_MIN {
                t_floor
            } else {
                (th / tc).clamp(t_floor, 1.0)
            }
        })
        .collect();
    ScalarMap::new(theta_haze_r.width(), theta_haze_r.height(), data)
}

/// Inverts the scattering model: J = (H - A) / t + A, clamped to [0,1].
pub fn recover(
    hazy: &PlanarImage,
    t: &ScalarMap,
    airlight: &AtmosphericLight,
) -> Result<PlanarImage> {
    recover_traced(hazy, t, airlight).map(|(img, _)| img)
}

/// As `recover`, also reporting the fraction of pixels whose pre-clamp value
/// left [0,1] in at least one channel.
pub fn recover_traced(
    hazy: &PlanarImage,
    t: &ScalarMap,
    airlight: &AtmosphericLight,
) -> Result<(PlanarImage, f64)> {
    if t.width() != hazy.width() || t.height() != hazy.height() {
        return Err(Error::Structure(
            "transmission map dimensions do not match the image".into(),
        ));
    }
    if airlight.len() != hazy.channels() {
        return Err(Error::Structure(
            "airlight channel count does not match the image".into(),
        ));
    }
    let n = hazy.pixels();
    let mut data = vec![0.0; n * hazy.channels()];
    let mut overflowed = vec![false; n];
    for (c, &a) in airlight.components().iter().enumerate() {
        let plane = hazy.channel(c);
        for i in 0..n {
            let v = (plane[i] - a) / t.data()[i] + a;
            if !(0.0..=1.0).contains(&v) {
                overflowed[i] = true;
            }
            data[c * n + i] = v.clamp(0.0, 1.0);
        }
    }
    let fraction = overflowed.iter().filter(|&&b| b).count() as f64 / n as f64;
    Ok((
        PlanarImage::from_planes(hazy.width(), hazy.height(), hazy.channels(), data),
        fraction,
    ))
}

/// Runs the full dehazing procedure with an estimated airlight.
pub fn dehaze(hazy: &PlanarImage, cfg: &DehazeConfig) -> Result<(PlanarImage, PipelineTrace)> {
    dehaze_with(hazy, cfg, None)
}

/// Runs the full dehazing procedure, optionally overriding the airlight.
pub fn dehaze_with(
    hazy: &PlanarImage,
    cfg: &DehazeConfig,
    airlight: Option<AtmosphericLight>,
) -> Result<(PlanarImage, PipelineTrace)> {
    cfg.validate()?;
    let airlight = match airlight {
        Some(a) => {
            if a.len() != hazy.channels() {
                return Err(Error::Structure(
                    "airlight channel count does not match the image".into(),
                ));
            }
            a
        }
        None => estimate_airlight(hazy)?,
    };

    let theta_haze = color_difference(hazy, &airlight)?;
    let theta_r_haze = extract_depth_order(&theta_haze, cfg.r)?;
    let z = normalize(&theta_r_haze);
    let w = weight(&z, cfg.weight_fn);

    let theta_hat_clear = match cfg.theta_hat_scale {
        Some(scale) => global_theta_hat(scale * theta_r_haze.max(), &theta_r_haze),
        None => {
            let t_b = boundary_transmission(hazy, &airlight)?;
            let pool = boundary_theta_pool(&theta_r_haze, &z, &t_b, cfg.weight_fn)?;
            let theta_eps = match sortp(&pool, cfg.epsilon) {
                Ok(v) => v,
                Err(Error::Undefined(_)) => theta_r_haze.max(),
                Err(e) => return Err(e),
            };
            global_theta_hat(theta_eps, &theta_r_haze)
        }
    };

    let theta_r_clear = transform_theta(&theta_r_haze, &w, theta_hat_clear)?;
    let t_raw = transmission(&theta_r_haze, &theta_r_clear, cfg.t_floor)?;
    let guide = hazy.luma();
    let t_refined = guided_filter(&t_raw, &guide, cfg.guided_radius, cfg.guided_eps)?
        .map(|v| v.clamp(cfg.t_floor, 1.0));

    let (recovered, overflow_fraction) = recover_traced(hazy, &t_refined, &airlight)?;
    let output = if cfg.apply_clahe {
        crate::filters::clahe(&recovered, cfg.clahe_tiles, cfg.clahe_clip)
    } else {
        recovered
    };

    Ok((
        output,
        PipelineTrace {
            airlight,
            theta_haze,
            theta_r_haze,
            z,
            w,
            theta_hat_clear,
            theta_r_clear,
            t_raw,
            t_refined,
            overflow_fraction,
        },
    ))
}
