//! Seeded synthetic scene generation shared by the integration tests.

use hazeorder::image::{AtmosphericLight, PlanarImage, ScalarMap};
use hazeorder::pipeline::{synthesize_haze, SynthParams};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Low-resolution random grid upsampled bilinearly; values in [0, 1].
pub fn smooth_field(rng: &mut ChaCha8Rng, w: usize, h: usize, cells: usize) -> Vec<f64> {
    let g = cells + 1;
    let grid: Vec<f64> = (0..g * g).map(|_| rng.random()).collect();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let fy = if h > 1 {
            y as f64 / (h - 1) as f64 * cells as f64
        } else {
            0.0
        };
        let y0 = (fy.floor() as usize).min(cells - 1);
        let ty = fy - y0 as f64;
        for x in 0..w {
            let fx = if w > 1 {
                x as f64 / (w - 1) as f64 * cells as f64
            } else {
                0.0
            };
            let x0 = (fx.floor() as usize).min(cells - 1);
            let tx = fx - x0 as f64;
            let top = grid[y0 * g + x0] * (1.0 - tx) + grid[y0 * g + x0 + 1] * tx;
            let bot = grid[(y0 + 1) * g + x0] * (1.0 - tx) + grid[(y0 + 1) * g + x0 + 1] * tx;
            out[y * w + x] = top * (1.0 - ty) + bot * ty;
        }
    }
    out
}

fn stretch(values: &mut [f64]) {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(1e-12);
    for v in values.iter_mut() {
        *v = (*v - min) / span;
    }
}

// each test binary compiles its own copy and not all of them touch
// every field
#[allow(dead_code)]
pub struct Scene {
    pub clear: PlanarImage,
    pub depth: ScalarMap,
    pub hazy: PlanarImage,
    pub airlight: AtmosphericLight,
    pub beta: f64,
}

/// A seeded scene: smooth random depth with a full near-to-far range,
/// a textured clear image kept below the airlight color, beta in
/// [0.8, 1.5] and airlight channels in [0.8, 1.0].
pub fn make_scene(seed: u64, w: usize, h: usize) -> Scene {
    let mut rng = rng(seed);

    let mut depth_field = smooth_field(&mut rng, w, h, 4);
    stretch(&mut depth_field);
    let depth_data: Vec<f64> = depth_field.iter().map(|z| 0.2 + 2.8 * z).collect();
    let depth = ScalarMap::new(w, h, depth_data).unwrap();

    let beta = 0.8 + 0.7 * rng.random::<f64>();
    let a: Vec<f64> = (0..3).map(|_| 0.8 + 0.2 * rng.random::<f64>()).collect();
    let airlight = AtmosphericLight::new(a).unwrap();

    let mut data = Vec::with_capacity(w * h * 3);
    for _ in 0..3 {
        let base = smooth_field(&mut rng, w, h, 6);
        for v in base {
            let textured = 0.7 * v + 0.3 * rng.random::<f64>();
            data.push(0.02 + 0.83 * textured);
        }
    }
    let clear = PlanarImage::new(w, h, 3, data).unwrap();

    let params = SynthParams::new(beta, airlight.clone(), depth.clone()).unwrap();
    let hazy = synthesize_haze(&clear, &params).unwrap();
    Scene {
        clear,
        depth,
        hazy,
        airlight,
        beta,
    }
}
