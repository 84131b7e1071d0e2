//! Window filters used by the pipeline: sliding-window maximum, box mean via
//! integral images, the guided filter, and CLAHE.
//!
//! All window operations use edge replication at the borders and cost O(1)
//! per pixel regardless of the window size. The sliding maximum runs two 1-D
//! monotonic-wedge passes (a square window is separable for max); the box
//! mean reads four prefix-sum lookups per pixel.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::image::{PlanarImage, ScalarMap};

/// (width+1) x (height+1) prefix-sum table of a map, double accumulation.
/// `sum(x0, y0, x1, y1)` returns the sum over the half-open rectangle
/// `[x0,x1) x [y0,y1)`.
pub struct IntegralImage {
    width: usize,
    table: Vec<f64>,
}

impl IntegralImage {
    pub fn new(map: &ScalarMap) -> Self {
        let (w, h) = (map.width(), map.height());
        let stride = w + 1;
        let mut table = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = 0.0;
            for x in 0..w {
                row_sum += map.get(x, y);
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row_sum;
            }
        }
        IntegralImage { width: w, table }
    }

    pub fn sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.width + 1;
        self.table[y1 * s + x1] - self.table[y0 * s + x1] - self.table[y1 * s + x0]
            + self.table[y0 * s + x0]
    }
}

fn check_window(r: usize) -> Result<usize> {
    if r < 1 || r % 2 == 0 {
        return Err(Error::Config(format!("window size must be odd and >= 1, got {r}")));
    }
    Ok(r / 2)
}

/// Sliding max over one line with edge replication; windows are clamped to
/// the line, which is equivalent to replicating the edge samples.
fn sliding_max_line(src: &[f64], dst: &mut [f64], half: usize) {
    let n = src.len();
    let mut wedge: VecDeque<usize> = VecDeque::new();
    for j in 0..half.min(n) {
        while wedge.back().is_some_and(|&b| src[b] <= src[j]) {
            wedge.pop_back();
        }
        wedge.push_back(j);
    }
    for i in 0..n {
        let j = i + half;
        if j < n {
            while wedge.back().is_some_and(|&b| src[b] <= src[j]) {
                wedge.pop_back();
            }
            wedge.push_back(j);
        }
        while wedge.front().is_some_and(|&f| f + half < i) {
            wedge.pop_front();
        }
        dst[i] = src[wedge[0]];
    }
}

/// r x r sliding-window maximum, edge-replicated borders, O(width x height)
/// independent of r.
pub fn max_filter(map: &ScalarMap, r: usize) -> Result<ScalarMap> {
    let half = check_window(r)?;
    let (w, h) = (map.width(), map.height());
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let src = &map.data()[y * w..(y + 1) * w];
        sliding_max_line(src, &mut rows[y * w..(y + 1) * w], half);
    }
    let mut out = vec![0.0; w * h];
    let mut col_src = vec![0.0; h];
    let mut col_dst = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col_src[y] = rows[y * w + x];
        }
        sliding_max_line(&col_src, &mut col_dst, half);
        for y in 0..h {
            out[y * w + x] = col_dst[y];
        }
    }
    ScalarMap::new(w, h, out)
}

/// Pads a map by `half` on every side with edge replication.
fn replicate_pad(map: &ScalarMap, half: usize) -> ScalarMap {
    let (w, h) = (map.width(), map.height());
    let (pw, ph) = (w + 2 * half, h + 2 * half);
    let mut data = vec![0.0; pw * ph];
    for py in 0..ph {
        let y = py.saturating_sub(half).min(h - 1);
        for px in 0..pw {
            let x = px.saturating_sub(half).min(w - 1);
            data[py * pw + px] = map.get(x, y);
        }
    }
    ScalarMap::new(pw, ph, data).expect("padded map is finite")
}

/// r x r box mean with edge-replicated borders, computed from the integral
/// image of the replicated-extended map.
pub fn box_mean(map: &ScalarMap, r: usize) -> Result<ScalarMap> {
    let half = check_window(r)?;
    let (w, h) = (map.width(), map.height());
    let padded = replicate_pad(map, half);
    let integral = IntegralImage::new(&padded);
    let area = (r * r) as f64;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            // window centered at (x,y) in the original = [x, x+r) in the padded map
            out[y * w + x] = integral.sum(x, y, x + r, y + r) / area;
        }
    }
    ScalarMap::new(w, h, out)
}

/// Guided filter: output is a per-window linear function of the guide,
/// a = cov(guide, input) / (var(guide) + eps), b = mean(input) - a * mean(guide),
/// then out = mean(a) * guide + mean(b). All means are box means of size `radius`.
pub fn guided_filter(
    input: &ScalarMap,
    guide: &ScalarMap,
    radius: usize,
    eps: f64,
) -> Result<ScalarMap> {
    if !input.same_shape(guide) {
        return Err(Error::Structure(
            "guided filter input and guide dimensions differ".into(),
        ));
    }
    if eps <= 0.0 {
        return Err(Error::Config("guided filter eps must be > 0".into()));
    }
    let (w, h) = (input.width(), input.height());
    let n = w * h;
    let mul = |a: &ScalarMap, b: &ScalarMap| {
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
        ScalarMap::new(w, h, data).expect("product map")
    };
    let mean_i = box_mean(input, radius)?;
    let mean_g = box_mean(guide, radius)?;
    let corr_gi = box_mean(&mul(guide, input), radius)?;
    let corr_gg = box_mean(&mul(guide, guide), radius)?;

    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        let cov = corr_gi.data()[i] - mean_g.data()[i] * mean_i.data()[i];
        let var = corr_gg.data()[i] - mean_g.data()[i] * mean_g.data()[i];
        a[i] = cov / (var + eps);
        b[i] = mean_i.data()[i] - a[i] * mean_g.data()[i];
    }
    let mean_a = box_mean(&ScalarMap::new(w, h, a)?, radius)?;
    let mean_b = box_mean(&ScalarMap::new(w, h, b)?, radius)?;
    let out = (0..n)
        .map(|i| mean_a.data()[i] * guide.data()[i] + mean_b.data()[i])
        .collect();
    ScalarMap::new(w, h, out)
}

const CLAHE_BINS: usize = 256;

/// Per-tile clipped-histogram CDF mapping for one tile.
fn tile_mapping(values: &[f64], indices: &[usize], clip_factor: f64) -> [f64; CLAHE_BINS] {
    let n = indices.len() as f64;
    let mut hist = [0.0f64; CLAHE_BINS];
    for &i in indices {
        let bin = ((values[i] * 255.0).round() as usize).min(CLAHE_BINS - 1);
        hist[bin] += 1.0;
    }
    let limit = clip_factor * n / CLAHE_BINS as f64;
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    let spread = excess / CLAHE_BINS as f64;
    let mut map = [0.0f64; CLAHE_BINS];
    let mut cdf = 0.0;
    for (m, h) in map.iter_mut().zip(hist.iter()) {
        cdf += h + spread;
        *m = cdf / n;
    }
    map
}

/// Contrast-limited adaptive histogram equalization.
///
/// 3-channel images are equalized on BT.601 luma only; the chroma offsets
/// `c - Y` are carried over unchanged and the result is clamped to [0,1].
/// Each tile holds a 256-bin histogram clipped at `clip` times the uniform
/// bin height with the excess redistributed uniformly; pixel mappings are
/// bilinearly blended between the four surrounding tile mappings.
pub fn clahe(img: &PlanarImage, tiles: (usize, usize), clip: f64) -> PlanarImage {
    let (w, h) = (img.width(), img.height());
    let luma = img.luma();
    // degenerate grids fall back to a single global tile
    let tx = tiles.0.max(1).min(w);
    let ty = tiles.1.max(1).min(h);

    let tile_w = w as f64 / tx as f64;
    let tile_h = h as f64 / ty as f64;
    let mut tile_pixels: Vec<Vec<usize>> = vec![Vec::new(); tx * ty];
    for y in 0..h {
        let tj = ((y as f64 / tile_h) as usize).min(ty - 1);
        for x in 0..w {
            let ti = ((x as f64 / tile_w) as usize).min(tx - 1);
            tile_pixels[tj * tx + ti].push(y * w + x);
        }
    }
    let maps: Vec<[f64; CLAHE_BINS]> = tile_pixels
        .iter()
        .map(|idx| tile_mapping(luma.data(), idx, clip))
        .collect();

    let lookup = |ti: usize, tj: usize, bin: usize| maps[tj * tx + ti][bin];
    let mut new_luma = vec![0.0; w * h];
    for y in 0..h {
        let tv = (y as f64 + 0.5) / tile_h - 0.5;
        let (j0, wy) = if tv <= 0.0 {
            (0, 0.0)
        } else {
            ((tv as usize).min(ty - 1), tv.fract())
        };
        let j1 = (j0 + 1).min(ty - 1);
        for x in 0..w {
            let tu = (x as f64 + 0.5) / tile_w - 0.5;
            let (i0, wx) = if tu <= 0.0 {
                (0, 0.0)
            } else {
                ((tu as usize).min(tx - 1), tu.fract())
            };
            let i1 = (i0 + 1).min(tx - 1);
            let bin = ((luma.get(x, y) * 255.0).round() as usize).min(CLAHE_BINS - 1);
            let top = lookup(i0, j0, bin) * (1.0 - wx) + lookup(i1, j0, bin) * wx;
            let bot = lookup(i0, j1, bin) * (1.0 - wx) + lookup(i1, j1, bin) * wx;
            new_luma[y * w + x] = top * (1.0 - wy) + bot * wy;
        }
    }

    let n = w * h;
    let channels = img.channels();
    let mut data = vec![0.0; n * channels];
    for c in 0..channels {
        let plane = img.channel(c);
        for i in 0..n {
            let v = plane[i] + (new_luma[i] - luma.data()[i]);
            data[c * n + i] = v.clamp(0.0, 1.0);
        }
    }
    PlanarImage::from_planes(w, h, channels, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ScalarMap {
        let data = (0..w * h).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect();
        ScalarMap::new(w, h, data).unwrap()
    }

    /// Brute-force O(r^2) window max with clamped (edge-replicated) windows.
    fn naive_max(map: &ScalarMap, r: usize) -> ScalarMap {
        let half = (r / 2) as isize;
        let (w, h) = (map.width() as isize, map.height() as isize);
        let mut out = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                let mut m = f64::NEG_INFINITY;
                for dy in -half..=half {
                    for dx in -half..=half {
                        let yy = (y + dy).clamp(0, h - 1) as usize;
                        let xx = (x + dx).clamp(0, w - 1) as usize;
                        m = m.max(map.get(xx, yy));
                    }
                }
                out.push(m);
            }
        }
        ScalarMap::new(map.width(), map.height(), out).unwrap()
    }

    /// Brute-force window mean with edge replication.
    fn naive_mean(map: &ScalarMap, r: usize) -> ScalarMap {
        let half = (r / 2) as isize;
        let (w, h) = (map.width() as isize, map.height() as isize);
        let mut out = Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                for dy in -half..=half {
                    for dx in -half..=half {
                        let yy = (y + dy).clamp(0, h - 1) as usize;
                        let xx = (x + dx).clamp(0, w - 1) as usize;
                        s += map.get(xx, yy);
                    }
                }
                out.push(s / (r * r) as f64);
            }
        }
        ScalarMap::new(map.width(), map.height(), out).unwrap()
    }

    #[test]
    fn max_filter_rejects_even_window() {
        let m = ScalarMap::filled(4, 4, 0.0);
        assert!(max_filter(&m, 4).is_err());
        assert!(max_filter(&m, 0).is_err());
    }

    #[test]
    fn max_filter_constant_map() {
        let m = ScalarMap::filled(9, 7, 0.42);
        let out = max_filter(&m, 5).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.42));
    }

    #[test]
    fn max_filter_1x3_line() {
        let m = ScalarMap::new(3, 1, vec![0.2, 1.2, 0.4]).unwrap();
        let out = max_filter(&m, 3).unwrap();
        assert_eq!(out.data(), &[1.2, 1.2, 1.2]);
    }

    #[test]
    fn max_filter_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_map(&mut rng, 17, 13);
        for r in [3, 5, 35] {
            let fast = max_filter(&m, r).unwrap();
            let slow = naive_max(&m, r);
            assert_eq!(fast.data(), slow.data(), "r={r}");
        }
    }

    #[test]
    fn max_filter_output_dominates_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_map(&mut rng, 23, 11);
        let out = max_filter(&m, 7).unwrap();
        for (o, i) in out.data().iter().zip(m.data()) {
            assert!(o >= i);
        }
    }

    #[test]
    fn max_filter_monotone_in_window_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_map(&mut rng, 19, 19);
        let small = max_filter(&m, 3).unwrap();
        let large = max_filter(&m, 9).unwrap();
        for (l, s) in large.data().iter().zip(small.data()) {
            assert!(l >= s);
        }
    }

    #[test]
    fn box_mean_constant_map() {
        let m = ScalarMap::filled(8, 5, 0.3);
        let out = box_mean(&m, 3).unwrap();
        for v in out.data() {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn box_mean_1x3_with_replication() {
        // window at index 0 sees [0,0,1] -> 1/3
        let m = ScalarMap::new(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let out = box_mean(&m, 3).unwrap();
        for v in out.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn box_mean_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (w, h) in [(17, 13), (40, 9), (7, 31)] {
            let m = random_map(&mut rng, w, h);
            for r in [3, 5, 15] {
                let fast = box_mean(&m, r).unwrap();
                let slow = naive_mean(&m, r);
                for (a, b) in fast.data().iter().zip(slow.data()) {
                    assert!((a - b).abs() < 1e-9, "r={r} w={w} h={h}");
                }
            }
        }
    }

    #[test]
    fn guided_filter_constant_input_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let guide = random_map(&mut rng, 20, 16);
        let input = ScalarMap::filled(20, 16, 0.6);
        let out = guided_filter(&input, &guide, 5, 1e-4).unwrap();
        for v in out.data() {
            assert!((v - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn guided_filter_large_eps_approaches_box_mean() {
        // with eps >> var, a -> 0 and the output degenerates to smoothed
        // means; on a linear ramp those coincide with box_mean away from
        // the replicated borders
        let (w, h) = (24, 18);
        let data: Vec<f64> = (0..w * h).map(|i| (i % w) as f64 / (w - 1) as f64).collect();
        let m = ScalarMap::new(w, h, data).unwrap();
        let r = 5;
        let out = guided_filter(&m, &m, r, 1e6).unwrap();
        let blur = box_mean(&m, r).unwrap();
        for y in r..h - r {
            for x in r..w - r {
                assert!((out.get(x, y) - blur.get(x, y)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn guided_filter_large_eps_limit_is_double_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = random_map(&mut rng, 24, 18).map(|v| v.clamp(0.0, 1.0));
        let out = guided_filter(&m, &m, 5, 1e9).unwrap();
        let double = box_mean(&box_mean(&m, 5).unwrap(), 5).unwrap();
        for (a, b) in out.data().iter().zip(double.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn guided_filter_small_eps_preserves_input() {
        // high-variance self-guided filtering with tiny eps: a -> 1, b -> 0
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = random_map(&mut rng, 24, 18).map(|v| v.clamp(0.0, 1.0));
        let out = guided_filter(&m, &m, 5, 1e-8).unwrap();
        for (a, b) in out.data().iter().zip(m.data()) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn guided_filter_dimension_mismatch() {
        let a = ScalarMap::filled(4, 4, 0.0);
        let b = ScalarMap::filled(5, 4, 0.0);
        assert!(guided_filter(&a, &b, 3, 1e-4).is_err());
    }

    #[test]
    fn integral_image_box_sums() {
        let m = ScalarMap::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let s = IntegralImage::new(&m);
        assert_eq!(s.sum(0, 0, 3, 2), 21.0);
        assert_eq!(s.sum(1, 0, 3, 2), 16.0);
        assert_eq!(s.sum(0, 1, 2, 2), 9.0);
        assert_eq!(s.sum(2, 1, 3, 2), 6.0);
        assert_eq!(s.sum(0, 0, 0, 0), 0.0);
    }

    #[test]
    fn clahe_output_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let n = 64 * 48 * 3;
        let data: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let img = PlanarImage::new(64, 48, 3, data).unwrap();
        let out = clahe(&img, (8, 8), 2.0);
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn clahe_constant_image_stays_near_constant() {
        for c in [0.0, 0.25, 0.5, 0.9] {
            let img = PlanarImage::new(64, 64, 1, vec![c; 64 * 64]).unwrap();
            let out = clahe(&img, (8, 8), 2.0);
            for v in out.data() {
                assert!((v - c).abs() <= 0.02, "c={c} v={v}");
            }
        }
    }

    #[test]
    fn clahe_tile_mapping_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let values: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let indices: Vec<usize> = (0..values.len()).collect();
        let map = tile_mapping(&values, &indices, 2.0);
        for pair in map.windows(2) {
            assert!(pair[0] <= pair[1]);
        }
    }

    #[test]
    fn clahe_degenerate_tiles_fall_back() {
        let img = PlanarImage::new(4, 4, 1, vec![0.5; 16]).unwrap();
        let out = clahe(&img, (0, 100), 2.0);
        assert_eq!(out.width(), 4);
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
