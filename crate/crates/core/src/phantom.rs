//! Random-ellipse phantoms standing in for clinical slices.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::RealGrid;

/// One phantom: 5-10 rotated ellipses with additive intensities in
/// [0.2, 0.6], clipped to [0, 1], then 3x3 box smoothed.
pub fn phantom<R: Rng>(rng: &mut R, height: usize, width: usize) -> RealGrid {
    let side = height.min(width) as f64;
    let count = rng.random_range(5..=10);
    let mut img = RealGrid::zeros(height, width);
    for _ in 0..count {
        let cy = rng.random_range(0.0..height as f64);
        let cx = rng.random_range(0.0..width as f64);
        let a = rng.random_range(0.1..=0.4) * side;
        let b = rng.random_range(0.1..=0.4) * side;
        let theta = rng.random_range(0.0..PI);
        let intensity = rng.random_range(0.2..=0.6);
        let (s, c) = (libm::sin(theta), libm::cos(theta));
        for i in 0..height {
            for j in 0..width {
                let (dy, dx) = (i as f64 - cy, j as f64 - cx);
                let u = (c * dx + s * dy) / a;
                let v = (-s * dx + c * dy) / b;
                if u * u + v * v <= 1.0 {
                    img[(i, j)] += intensity;
                }
            }
        }
    }
    let clipped = img.map(|v| v.clamp(0.0, 1.0));
    box_smooth(&clipped)
}

/// 3x3 mean over the in-bounds neighbourhood.
fn box_smooth(img: &RealGrid) -> RealGrid {
    let (h, w) = img.shape();
    RealGrid::from_fn(h, w, |i, j| {
        let mut acc = 0.0;
        let mut n = 0.0;
        for a in i.saturating_sub(1)..=(i + 1).min(h - 1) {
            for b in j.saturating_sub(1)..=(j + 1).min(w - 1) {
                acc += img[(a, b)];
                n += 1.0;
            }
        }
        acc / n
    })
}

/// `count` phantoms from one seeded stream.
pub fn phantoms(count: usize, height: usize, width: usize, seed: u64) -> Vec<RealGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| phantom(&mut rng, height, width)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Contiguous 70/10/20 train/val/test assignment.
pub fn split_sizes(count: usize) -> (usize, usize, usize) {
    let train = (count * 7 + 5) / 10;
    let val = ((count + 5) / 10).min(count - train);
    (train, val, count - train - val)
}

pub fn split_of(index: usize, count: usize) -> Split {
    let (train, val, _) = split_sizes(count);
    if index < train {
        Split::Train
    } else if index < train + val {
        Split::Val
    } else {
        Split::Test
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_in_unit_range_and_deterministic() {
        let a = phantoms(6, 32, 32, 4);
        for p in &a {
            assert!(p.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert_eq!(a, phantoms(6, 32, 32, 4));
        assert_ne!(a, phantoms(6, 32, 32, 5));
    }

    #[test]
    fn mean_intensity_is_sane() {
        let all = phantoms(100, 32, 32, 11);
        let mean = all.iter().map(|p| p.mean()).sum::<f64>() / all.len() as f64;
        assert!((0.05..=0.6).contains(&mean), "mean {mean}");
    }

    #[test]
    fn splits_partition() {
        assert_eq!(split_sizes(10), (7, 1, 2));
        assert_eq!(split_sizes(8), (6, 1, 1));
        assert_eq!(split_sizes(100), (70, 10, 20));
        let (tr, va, te) = split_sizes(3);
        assert_eq!(tr + va + te, 3);
        assert_eq!(split_of(0, 10), Split::Train);
        assert_eq!(split_of(7, 10), Split::Val);
        assert_eq!(split_of(9, 10), Split::Test);
    }
}
