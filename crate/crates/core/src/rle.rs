//! Run-length encodings used by the on-disk logs.
//!
//! Images in the trajectory log are row-major `(value, run)` pairs. Masks in
//! the pseudo-label export follow the COCO convention: column-major runs that
//! alternate background/foreground, starting with background.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRle<T> {
    pub width: usize,
    pub height: usize,
    /// `[value, run_length]` pairs in row-major order.
    pub runs: Vec<(T, usize)>,
}

impl<T: PartialEq + Copy> ValueRle<T> {
    pub fn encode(width: usize, height: usize, values: &[T]) -> Self {
        debug_assert_eq!(values.len(), width * height);
        let mut runs: Vec<(T, usize)> = Vec::new();
        for &v in values {
            match runs.last_mut() {
                Some((last, n)) if *last == v => *n += 1,
                _ => runs.push((v, 1)),
            }
        }
        Self {
            width,
            height,
            runs,
        }
    }

    pub fn decode(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for &(v, n) in &self.runs {
            out.extend(std::iter::repeat_n(v, n));
        }
        out
    }
}

/// COCO-style uncompressed RLE: `size = [height, width]`, column-major counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocoRle {
    pub size: [usize; 2],
    pub counts: Vec<usize>,
}

impl CocoRle {
    /// Encode a set of `(u, v)` pixels.
    pub fn from_pixels(width: usize, height: usize, pixels: &[(u32, u32)]) -> Self {
        let mut flags = vec![false; width * height];
        for &(u, v) in pixels {
            flags[u as usize * height + v as usize] = true;
        }
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0usize;
        for f in flags {
            if f == current {
                run += 1;
            } else {
                counts.push(run);
                current = f;
                run = 1;
            }
        }
        counts.push(run);
        Self {
            size: [height, width],
            counts,
        }
    }

    /// Decode to `(u, v)` pixels sorted by `(v, u)`.
    pub fn to_pixels(&self) -> Vec<(u32, u32)> {
        let height = self.size[0];
        let mut out = Vec::new();
        let mut pos = 0usize;
        for (i, &n) in self.counts.iter().enumerate() {
            if i % 2 == 1 {
                for p in pos..pos + n {
                    out.push(((p / height) as u32, (p % height) as u32));
                }
            }
            pos += n;
        }
        out.sort_unstable_by_key(|&(u, v)| (v, u));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coco_rle_starts_with_background() {
        let rle = CocoRle::from_pixels(2, 2, &[(0, 0)]);
        assert_eq!(rle.counts, vec![0, 1, 3]);
        let rle = CocoRle::from_pixels(2, 2, &[(1, 1)]);
        assert_eq!(rle.counts, vec![3, 1]);
        // column-major: (0,1) is the second element
        let rle = CocoRle::from_pixels(2, 2, &[(0, 1)]);
        assert_eq!(rle.counts, vec![1, 1, 2]);
    }

    proptest! {
        #[test]
        fn value_rle_round_trips(values in proptest::collection::vec(0i32..3, 12)) {
            let rle = ValueRle::encode(4, 3, &values);
            prop_assert_eq!(rle.decode(), values);
        }

        #[test]
        fn coco_rle_round_trips(flags in proptest::collection::vec(any::<bool>(), 20)) {
            let (w, h) = (5usize, 4usize);
            let mut pixels: Vec<(u32, u32)> = flags
                .iter()
                .enumerate()
                .filter(|(_, f)| **f)
                .map(|(i, _)| ((i % w) as u32, (i / w) as u32))
                .collect();
            pixels.sort_unstable_by_key(|&(u, v)| (v, u));
            let rle = CocoRle::from_pixels(w, h, &pixels);
            prop_assert_eq!(rle.counts.iter().sum::<usize>(), w * h);
            prop_assert_eq!(rle.to_pixels(), pixels);
        }
    }
}
