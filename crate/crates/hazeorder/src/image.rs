//! Core value types: planar floating-point images, single-channel maps,
//! atmospheric light, and the pipeline configuration.
//!
//! Images live in `[0,1]` working space, stored planar (all of channel 0,
//! then channel 1, ...) so per-channel filter passes are contiguous scans.
//! Samples are the raw 8-bit code values scaled by 1/255; no gamma
//! linearization is applied anywhere in the pipeline.

use crate::error::{Error, Result};

/// Lower clamp applied to airlight components.
pub const AIRLIGHT_MIN: f64 = 0.05;
/// Airlight components are kept at least this far below 1.0 before the
/// boundary-transmission division by `1 - A^c`.
pub const AIRLIGHT_DELTA: f64 = 1e-4;

/// An H x W x C image with samples in `[0,1]`, planar channel layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PlanarImage {
    /// Builds an image from planar float data, validating length, range and
    /// channel count (1 or 3).
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Structure(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Structure(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Structure(
                "image sample outside [0,1] or non-finite".into(),
            ));
        }
        Ok(PlanarImage {
            width,
            height,
            channels,
            data,
        })
    }

    /// Decodes interleaved 8-bit samples into planar `[0,1]` floats (v/255).
    pub fn from_bytes(raw: &[u8], width: usize, height: usize, channels: usize) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Structure(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let n = width * height;
        if raw.len() != n * channels {
            return Err(Error::Structure(format!(
                "raw length {} != {}x{}x{}",
                raw.len(),
                width,
                height,
                channels
            )));
        }
        let mut data = vec![0.0; n * channels];
        for (i, px) in raw.chunks_exact(channels).enumerate() {
            for (c, &b) in px.iter().enumerate() {
                data[c * n + i] = b as f64 / 255.0;
            }
        }
        Ok(PlanarImage {
            width,
            height,
            channels,
            data,
        })
    }

    /// Quantizes back to interleaved 8-bit samples, round-half-up.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.width * self.height;
        let mut out = vec![0u8; n * self.channels];
        for i in 0..n {
            for c in 0..self.channels {
                out[i * self.channels + c] = quantize(self.data[c * n + i]);
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Pixel count (width x height).
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The samples of one channel plane.
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[c * n..(c + 1) * n]
    }

    /// Extracts one channel plane as a `ScalarMap`.
    pub fn channel_map(&self, c: usize) -> ScalarMap {
        ScalarMap {
            width: self.width,
            height: self.height,
            data: self.channel(c).to_vec(),
        }
    }

    /// BT.601 luma (for 1-channel images this is the image itself).
    pub fn luma(&self) -> ScalarMap {
        if self.channels == 1 {
            return self.channel_map(0);
        }
        let n = self.pixels();
        let (r, g, b) = (self.channel(0), self.channel(1), self.channel(2));
        let data = (0..n)
            .map(|i| 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i])
            .collect();
        ScalarMap {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Builds an image from per-channel maps without re-validating range
    /// (callers clamp first).
    pub(crate) fn from_planes(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        PlanarImage {
            width,
            height,
            channels,
            data,
        }
    }
}

/// Round-half-up quantization of a `[0,1]` sample to a byte.
pub fn quantize(v: f64) -> u8 {
    let s = (v * 255.0 + 0.5).floor();
    s.clamp(0.0, 255.0) as u8
}

/// An H x W single-channel map of finite floats. Value range depends on the
/// producing operation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Structure(format!(
                "map length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structure("non-finite sample in map".into()));
        }
        Ok(ScalarMap {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        ScalarMap {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Same dimensions as another map.
    pub fn same_shape(&self, other: &ScalarMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> ScalarMap {
        ScalarMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Global per-channel atmospheric light `A^c`, each component in
/// `[AIRLIGHT_MIN, 1 - AIRLIGHT_DELTA]` after clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct AtmosphericLight {
    components: Vec<f64>,
}

impl AtmosphericLight {
    /// Validates component count (1 or 3) and positivity, then clamps each
    /// component into `[AIRLIGHT_MIN, 1 - AIRLIGHT_DELTA]`.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() != 1 && components.len() != 3 {
            return Err(Error::Structure(format!(
                "airlight must have 1 or 3 components, got {}",
                components.len()
            )));
        }
        if components.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Config(
                "airlight components must be finite and > 0".into(),
            ));
        }
        let components = components
            .into_iter()
            .map(|v| v.clamp(AIRLIGHT_MIN, 1.0 - AIRLIGHT_DELTA))
            .collect();
        Ok(AtmosphericLight { components })
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Choice of weight function mapping normalized theta to the interpolation
/// coefficient. All three are monotonically increasing on `[0,1]`, which is
/// what guarantees order preservation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightFn {
    /// Concave: z * (2 - z). Strong weights, removes dense haze, amplifies noise.
    Phi1,
    /// Linear: z. The default; balances haze removal and noise amplification.
    #[default]
    Phi2,
    /// Convex: z^2. Gentle weights, suppresses noise, leaves haze residue.
    Phi3,
}

impl WeightFn {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            WeightFn::Phi1 => z * (2.0 - z),
            WeightFn::Phi2 => z,
            WeightFn::Phi3 => z * z,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "phi1" => Ok(WeightFn::Phi1),
            "phi2" => Ok(WeightFn::Phi2),
            "phi3" => Ok(WeightFn::Phi3),
            other => Err(Error::Config(format!(
                "unknown weight function '{other}' (expected phi1|phi2|phi3)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightFn::Phi1 => "phi1",
            WeightFn::Phi2 => "phi2",
            WeightFn::Phi3 => "phi3",
        }
    }
}

/// Pipeline configuration with the published defaults: r = 35, epsilon = 0.02,
/// linear weight function, guided filter radius 35 / eps 1e-4, CLAHE on.
#[derive(Debug, Clone, PartialEq)]
pub struct DehazeConfig {
    /// Patch size for the local-max depth-order extraction (odd, >= 3).
    pub r: usize,
    /// Fraction of pixels allowed to reach the [0,1] boundary.
    pub epsilon: f64,
    pub weight_fn: WeightFn,
    /// Guided filter window size (odd).
    pub guided_radius: usize,
    pub guided_eps: f64,
    /// Lower transmission clamp.
    pub t_floor: f64,
    pub apply_clahe: bool,
    /// CLAHE tile grid (columns, rows).
    pub clahe_tiles: (usize, usize),
    /// Clip limit as a multiple of the uniform bin height.
    pub clahe_clip: f64,
    /// Debug override: set the global target to `scale * max(theta_r)` instead
    /// of running the boundary-percentile optimization.
    pub theta_hat_scale: Option<f64>,
}

impl Default for DehazeConfig {
    fn default() -> Self {
        DehazeConfig {
            r: 35,
            epsilon: 0.02,
            weight_fn: WeightFn::Phi2,
            guided_radius: 35,
            guided_eps: 1e-4,
            t_floor: 0.01,
            apply_clahe: true,
            clahe_tiles: (8, 8),
            clahe_clip: 2.0,
            theta_hat_scale: None,
        }
    }
}

impl DehazeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r < 3 || self.r % 2 == 0 {
            return Err(Error::Config(format!("r must be odd and >= 3, got {}", self.r)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon must be in [0,1], got {}",
                self.epsilon
            )));
        }
        if !(self.t_floor > 0.0 && self.t_floor < 1.0) {
            return Err(Error::Config(format!(
                "t_floor must be in (0,1), got {}",
                self.t_floor
            )));
        }
        if self.guided_radius % 2 == 0 || self.guided_radius < 1 {
            return Err(Error::Config(format!(
                "guided_radius must be odd and >= 1, got {}",
                self.guided_radius
            )));
        }
        if self.guided_eps <= 0.0 {
            return Err(Error::Config("guided_eps must be > 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_endpoints_map_to_unit_interval() {
        let img = PlanarImage::from_bytes(&[0, 255], 2, 1, 1).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn byte_128_maps_near_half() {
        let img = PlanarImage::from_bytes(&[128], 1, 1, 1).unwrap();
        assert!((img.data()[0] - 128.0 / 255.0).abs() < 1e-12);
        assert!((img.data()[0] - 0.50196).abs() < 1e-4);
    }

    #[test]
    fn interleaved_to_planar_layout() {
        // 2x1 RGB interleaved [r0,g0,b0,r1,g1,b1] -> planar [r0,r1,g0,g1,b0,b1]
        let raw = [10, 20, 30, 40, 50, 60];
        let img = PlanarImage::from_bytes(&raw, 2, 1, 3).unwrap();
        let expect: Vec<f64> = [10, 40, 20, 50, 30, 60]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect();
        assert_eq!(img.data(), &expect[..]);
    }

    #[test]
    fn quantize_endpoints_and_rounding() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        // round-half-up: 0.5 * 255 = 127.5 -> 128
        assert_eq!(quantize(0.5), 128);
    }

    #[test]
    fn roundtrip_is_identity_for_all_bytes() {
        for channels in [1usize, 3] {
            let raw: Vec<u8> = (0..=255u8).cycle().take(256 * channels).collect();
            let img = PlanarImage::from_bytes(&raw, 256, 1, channels).unwrap();
            assert_eq!(img.to_bytes(), raw);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(PlanarImage::from_bytes(&[1, 2, 3], 2, 1, 1).is_err());
        assert!(ScalarMap::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn out_of_range_samples_rejected() {
        assert!(PlanarImage::new(1, 1, 1, vec![1.5]).is_err());
        assert!(PlanarImage::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(ScalarMap::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn airlight_clamps_components() {
        let a = AtmosphericLight::new(vec![1.0, 0.5, 0.01]).unwrap();
        assert_eq!(a.components()[0], 1.0 - AIRLIGHT_DELTA);
        assert_eq!(a.components()[1], 0.5);
        assert_eq!(a.components()[2], AIRLIGHT_MIN);
        assert!(AtmosphericLight::new(vec![0.0]).is_err());
    }

    #[test]
    fn weight_fn_values() {
        assert_eq!(WeightFn::Phi1.apply(0.0), 0.0);
        assert_eq!(WeightFn::Phi1.apply(1.0), 1.0);
        assert_eq!(WeightFn::Phi1.apply(0.5), 0.75);
        assert_eq!(WeightFn::Phi2.apply(0.37), 0.37);
        assert_eq!(WeightFn::Phi3.apply(0.5), 0.25);
        assert!(WeightFn::parse("phi4").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DehazeConfig::default().validate().is_ok());
        let mut c = DehazeConfig::default();
        c.r = 34;
        assert!(c.validate().is_err());
        c = DehazeConfig::default();
        c.epsilon = 1.5;
        assert!(c.validate().is_err());
        c = DehazeConfig::default();
        c.t_floor = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn luma_of_rgb() {
        let img = PlanarImage::new(1, 1, 3, vec![1.0, 0.5, 0.25]).unwrap();
        let y = img.luma();
        assert!((y.data()[0] - (0.299 + 0.587 * 0.5 + 0.114 * 0.25)).abs() < 1e-12);
    }
}
