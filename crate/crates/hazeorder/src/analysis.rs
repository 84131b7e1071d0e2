//! Depth-order validation: Spearman rank correlation, row-profile curves,
//! and the hazy-vs-reference depth-order correlation study.

use crate::airlight::estimate_airlight;
use crate::error::{Error, Result};
use crate::image::{PlanarImage, ScalarMap};
use crate::pipeline::{color_difference, extract_depth_order};

/// Cap on the number of pixels entering the rank correlation; larger maps
/// are subsampled by uniform stride.
const MAX_RANK_SAMPLES: usize = 100_000;

/// Result of a depth-order analysis run.
#[derive(Debug, Clone)]
pub struct DepthOrderReport {
    /// Spearman correlation between the extracted order and the reference.
    pub rho: f64,
    /// Per-row means of theta_r, bottom row first.
    pub row_profile: Vec<f64>,
    pub patch_size: usize,
    /// Number of samples that entered the correlation.
    pub n_pixels: usize,
}

/// Ground truth against which the extracted depth order is checked.
#[derive(Debug, Clone)]
pub enum OrderReference {
    /// A depth map: correlates rank(-theta_r) with rank(d).
    Depth(ScalarMap),
    /// A haze-free image: correlates theta_r of the hazy image with theta_r
    /// of the clear image, both under the hazy image's estimated airlight.
    Clear(PlanarImage),
}

/// Average ranks (1-based), ties get the mean of their rank range.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share the average
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rank correlation with average-rank tie handling.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Structure(format!(
            "sequence lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Structure("need at least 2 samples".into()));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined(
            "rank correlation undefined for constant sequence".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Per-row means of a map, bottom row first.
pub fn row_profile(map: &ScalarMap) -> Vec<f64> {
    let (w, h) = (map.width(), map.height());
    (0..h)
        .rev()
        .map(|y| map.data()[y * w..(y + 1) * w].iter().sum::<f64>() / w as f64)
        .collect()
}

fn subsample(values: &[f64], full_rank: bool) -> Vec<f64> {
    if full_rank || values.len() <= MAX_RANK_SAMPLES {
        return values.to_vec();
    }
    let stride = values.len().div_ceil(MAX_RANK_SAMPLES);
    values.iter().step_by(stride).copied().collect()
}

/// Correlates the depth order extracted from a hazy image against ground
/// truth (a depth map or the paired haze-free image).
pub fn depth_order_correlation(
    hazy: &PlanarImage,
    reference: &OrderReference,
    r: usize,
    full_rank: bool,
) -> Result<DepthOrderReport> {
    let airlight = estimate_airlight(hazy)?;
    let theta_r_haze = extract_depth_order(&color_difference(hazy, &airlight)?, r)?;

    let (xs, ys) = match reference {
        OrderReference::Depth(depth) => {
            if !theta_r_haze.same_shape(depth) {
                return Err(Error::Structure("depth map dimensions differ".into()));
            }
            // reverse theta order approximates the depth order
            let neg: Vec<f64> = theta_r_haze.data().iter().map(|v| -v).collect();
            (neg, depth.data().to_vec())
        }
        OrderReference::Clear(clear) => {
            if clear.width() != hazy.width() || clear.height() != hazy.height() {
                return Err(Error::Structure("clear image dimensions differ".into()));
            }
            let theta_r_clear = extract_depth_order(&color_difference(clear, &airlight)?, r)?;
            (theta_r_haze.data().to_vec(), theta_r_clear.data().to_vec())
        }
    };

    let xs = subsample(&xs, full_rank);
    let ys = subsample(&ys, full_rank);
    let rho = spearman_rho(&xs, &ys)?;
    Ok(DepthOrderReport {
        rho,
        row_profile: row_profile(&theta_r_haze),
        patch_size: r,
        n_pixels: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_example_from_definition() {
        // rank of {0.2, 1.2, 0.4} is {1, 3, 2}
        assert_eq!(average_ranks(&[0.2, 1.2, 0.4]), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn identical_sequences_give_rho_one() {
        let xs = [0.1, 0.9, 0.4, 0.7];
        assert!((spearman_rho(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_sequences_give_rho_minus_one() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman_rho(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tie_handling_uses_average_ranks() {
        let xs = [1.0, 1.0, 2.0];
        assert!((spearman_rho(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(average_ranks(&xs), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn rho_invariant_under_monotone_transform() {
        let xs = [0.3, 0.1, 0.8, 0.5, 0.2];
        let ys = [2.0, 5.0, 1.0, 3.0, 4.0];
        let base = spearman_rho(&xs, &ys).unwrap();
        let tx: Vec<f64> = xs.iter().map(|v| (v * 3.0).exp()).collect();
        assert!((spearman_rho(&tx, &ys).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn rho_is_symmetric() {
        let xs = [0.3, 0.1, 0.8, 0.5];
        let ys = [2.0, 5.0, 1.0, 3.0];
        assert!(
            (spearman_rho(&xs, &ys).unwrap() - spearman_rho(&ys, &xs).unwrap()).abs() < 1e-12
        );
    }

    #[test]
    fn rho_errors() {
        assert!(spearman_rho(&[1.0], &[1.0]).is_err());
        assert!(spearman_rho(&[1.0, 2.0], &[1.0]).is_err());
        assert!(spearman_rho(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn row_profile_bottom_first() {
        let m = ScalarMap::new(2, 2, vec![0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(row_profile(&m), vec![1.0, 0.5]);
        let c = ScalarMap::filled(3, 4, 0.3);
        assert!(row_profile(&c).iter().all(|&v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn identity_pair_has_rho_one() {
        // textured image so neither theta sequence is constant
        let n = 32 * 32;
        let mut data = vec![0.0; n * 3];
        for i in 0..n {
            let v = (i % 97) as f64 / 96.0 * 0.8;
            data[i] = v;
            data[n + i] = (v * 0.7 + 0.1).min(1.0);
            data[2 * n + i] = (0.9 - v * 0.5).max(0.0);
        }
        let img = PlanarImage::new(32, 32, 3, data).unwrap();
        let report =
            depth_order_correlation(&img, &OrderReference::Clear(img.clone()), 5, true).unwrap();
        assert!((report.rho - 1.0).abs() < 1e-12);
        assert_eq!(report.row_profile.len(), 32);
        assert_eq!(report.patch_size, 5);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let img = PlanarImage::new(20, 20, 3, vec![0.5; 1200]).unwrap();
        let depth = ScalarMap::filled(10, 10, 1.0);
        assert!(depth_order_correlation(&img, &OrderReference::Depth(depth), 5, true).is_err());
    }
}
