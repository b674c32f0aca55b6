//! Digit images as rotated 2-d point clouds.

use gigp_core::{GroupElement, RawPointCloud};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Lit pixels become points at centered coordinates
/// `((col − c₀)/s, (r₀ − row)/s)`, with `c₀ = (cols − 1)/2`, `r₀ = (rows − 1)/2`
/// and `s = cols/2`, carrying their intensity as a 1-d feature. Points are
/// rotated by `angle` about the origin and subsampled to `max_points`. An
/// image with no lit pixel yields a single origin point with feature 0.
pub fn image_to_cloud(pixels: &[f64], rows: usize, cols: usize, threshold: f64, max_points: usize, angle: f64, seed: u64) -> RawPointCloud {
    let (r0, c0, s) = ((rows as f64 - 1.0) / 2.0, (cols as f64 - 1.0) / 2.0, cols as f64 / 2.0);
    let rot = GroupElement::so2(angle);
    let mut coords = Vec::new();
    let mut feats = Vec::new();
    for (i, &v) in pixels.iter().enumerate() {
        if v > threshold {
            let (row, col) = ((i / cols) as f64, (i % cols) as f64);
            let p = [(col - c0) / s, (r0 - row) / s];
            coords.extend(if angle == 0.0 { p.to_vec() } else { rot.act(&p).unwrap() });
            feats.push(v);
        }
    }
    let n = feats.len();
    if n == 0 {
        return RawPointCloud::new(2, vec![0.0, 0.0], 1, vec![0.0]).unwrap();
    }
    if n > max_points {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = index::sample(&mut rng, n, max_points).into_vec();
        keep.sort_unstable();
        coords = keep.iter().flat_map(|&i| [coords[2 * i], coords[2 * i + 1]]).collect();
        feats = keep.iter().map(|&i| feats[i]).collect();
    }
    RawPointCloud::new(2, coords, 1, feats).unwrap()
}
