//! Global atmospheric light estimation via the dark channel.
//!
//! The per-pixel channel minimum is eroded by a 15x15 window (a min filter,
//! run as -max_filter(-m)), the brightest 0.1% of the eroded dark channel is
//! selected, and A is the per-channel mean of the hazy image over those
//! pixels. Haze-opaque regions dominate that selection, so isolated specular
//! highlights do not pull the estimate toward white.

use crate::error::{Error, Result};
use crate::filters::max_filter;
use crate::image::{AtmosphericLight, PlanarImage, ScalarMap};

const DARK_CHANNEL_WINDOW: usize = 15;
const BRIGHTEST_FRACTION: f64 = 0.001;

/// Per-pixel minimum over channels, then a 15x15 min filter.
fn dark_channel(img: &PlanarImage) -> Result<ScalarMap> {
    let n = img.pixels();
    let mut mins = vec![f64::INFINITY; n];
    for c in 0..img.channels() {
        for (m, &v) in mins.iter_mut().zip(img.channel(c)) {
            *m = m.min(v);
        }
    }
    let neg = ScalarMap::new(img.width(), img.height(), mins.iter().map(|v| -v).collect())?;
    let eroded = max_filter(&neg, DARK_CHANNEL_WINDOW)?;
    Ok(eroded.map(|v| -v))
}

/// Estimates the global atmospheric light from a hazy image.
///
/// Components are clamped to `[0.05, 1 - 1e-4]`; a constant image returns
/// its own pixel value.
pub fn estimate_airlight(hazy: &PlanarImage) -> Result<AtmosphericLight> {
    if hazy.width() < DARK_CHANNEL_WINDOW || hazy.height() < DARK_CHANNEL_WINDOW {
        return Err(Error::Structure(format!(
            "image must be at least {DARK_CHANNEL_WINDOW}x{DARK_CHANNEL_WINDOW} for airlight estimation"
        )));
    }
    let dark = dark_channel(hazy)?;
    let n = dark.len();
    let keep = ((n as f64 * BRIGHTEST_FRACTION).ceil() as usize).clamp(1, n);

    let mut order: Vec<usize> = (0..n).collect();
    order.select_nth_unstable_by(n - keep, |&a, &b| {
        dark.data()[a].partial_cmp(&dark.data()[b]).unwrap()
    });
    let brightest = &order[n - keep..];

    let components = (0..hazy.channels())
        .map(|c| {
            let plane = hazy.channel(c);
            brightest.iter().map(|&i| plane[i]).sum::<f64>() / keep as f64
        })
        .collect();
    AtmosphericLight::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::AIRLIGHT_DELTA;

    fn constant_image(w: usize, h: usize, rgb: [f64; 3]) -> PlanarImage {
        let n = w * h;
        let mut data = Vec::with_capacity(n * 3);
        for v in rgb {
            data.extend(std::iter::repeat(v).take(n));
        }
        PlanarImage::new(w, h, 3, data).unwrap()
    }

    #[test]
    fn constant_image_returns_its_value() {
        let img = constant_image(20, 20, [0.9, 0.9, 0.9]);
        let a = estimate_airlight(&img).unwrap();
        for c in a.components() {
            assert!((c - 0.9).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_tiny_images() {
        let img = constant_image(10, 10, [0.5, 0.5, 0.5]);
        assert!(estimate_airlight(&img).is_err());
    }

    #[test]
    fn single_specular_pixel_is_rejected() {
        // haze at A = 0.8 everywhere, one saturated white pixel
        let mut img_data = constant_image(40, 40, [0.8, 0.8, 0.8]).data().to_vec();
        let n = 40 * 40;
        let idx = 20 * 40 + 20;
        for c in 0..3 {
            img_data[c * n + idx] = 1.0;
        }
        let img = PlanarImage::new(40, 40, 3, img_data).unwrap();
        let a = estimate_airlight(&img).unwrap();
        for c in a.components() {
            assert!((c - 0.8).abs() < (c - 1.0).abs(), "estimate {c} should be nearer 0.8");
        }
    }

    #[test]
    fn components_always_clamped() {
        let img = constant_image(20, 20, [1.0, 1.0, 1.0]);
        let a = estimate_airlight(&img).unwrap();
        for c in a.components() {
            assert!(*c <= 1.0 - AIRLIGHT_DELTA);
            assert!(*c >= 0.05);
        }
        let img = constant_image(20, 20, [0.01, 0.01, 0.01]);
        let a = estimate_airlight(&img).unwrap();
        for c in a.components() {
            assert!(*c >= 0.05);
        }
    }

    #[test]
    fn translation_invariance_away_from_borders() {
        // two-tone scene: bright sky band on top, dark ground below; shifting
        // the boundary by a row should not change the estimate
        let build = |split: usize| {
            let n = 60 * 60;
            let mut data = vec![0.0; n * 3];
            for y in 0..60 {
                for x in 0..60 {
                    let v: [f64; 3] = if y < split { [0.85, 0.88, 0.9] } else { [0.2, 0.3, 0.25] };
                    for c in 0..3 {
                        data[c * n + y * 60 + x] = v[c];
                    }
                }
            }
            PlanarImage::new(60, 60, 3, data).unwrap()
        };
        let a1 = estimate_airlight(&build(30)).unwrap();
        let a2 = estimate_airlight(&build(31)).unwrap();
        for (x, y) in a1.components().iter().zip(a2.components()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
