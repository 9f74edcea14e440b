//! Pixel masks and inclusive pixel bounding boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive pixel bounds: area is `(u_max - u_min + 1) * (v_max - v_min + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: u32,
    pub v_min: u32,
    pub u_max: u32,
    pub v_max: u32,
}

impl BBox {
    pub fn new(u_min: u32, v_min: u32, u_max: u32, v_max: u32) -> Result<Self> {
        let b = Self {
            u_min,
            v_min,
            u_max,
            v_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_min > self.u_max || self.v_min > self.v_max {
            return Err(Error::InvalidBox(format!("{self:?} has min > max")));
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.u_max - self.u_min + 1
    }

    pub fn height(&self) -> u32 {
        self.v_max - self.v_min + 1
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }

    /// `[x, y, w, h]` as used by COCO annotations.
    pub fn to_xywh(&self) -> [u32; 4] {
        [self.u_min, self.v_min, self.width(), self.height()]
    }

    pub fn from_xywh(xywh: [u32; 4]) -> Result<Self> {
        let [x, y, w, h] = xywh;
        if w == 0 || h == 0 {
            return Err(Error::InvalidBox(format!("zero-sized box {xywh:?}")));
        }
        Self::new(x, y, x + w - 1, y + h - 1)
    }

    /// Box normalised to `[0, 1]` by the image size, as `(u_min, v_min, u_max, v_max)`.
    pub fn normalized(&self, width: usize, height: usize) -> [f64; 4] {
        [
            self.u_min as f64 / width as f64,
            self.v_min as f64 / height as f64,
            (self.u_max + 1) as f64 / width as f64,
            (self.v_max + 1) as f64 / height as f64,
        ]
    }
}

/// A nonempty-by-convention set of `(u, v)` pixels, kept sorted by `(v, u)`
/// without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Mask {
    pixels: Vec<(u32, u32)>,
}

impl Mask {
    pub fn from_pixels(mut pixels: Vec<(u32, u32)>) -> Self {
        pixels.sort_unstable_by_key(|&(u, v)| (v, u));
        pixels.dedup();
        Self { pixels }
    }

    pub fn pixels(&self) -> &[(u32, u32)] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        self.pixels.binary_search_by_key(&(v, u), |&(pu, pv)| (pv, pu)).is_ok()
    }

    /// Minimum rectangle containing the mask.
    pub fn bbox(&self) -> Result<BBox> {
        let (&(u0, v0), rest) = self.pixels.split_first().ok_or(Error::EmptyMask)?;
        let mut b = BBox {
            u_min: u0,
            v_min: v0,
            u_max: u0,
            v_max: v0,
        };
        for &(u, v) in rest {
            b.u_min = b.u_min.min(u);
            b.u_max = b.u_max.max(u);
            b.v_min = b.v_min.min(v);
            b.v_max = b.v_max.max(v);
        }
        Ok(b)
    }

    /// Chebyshev dilation (`radius > 0`) or erosion (`radius < 0`) within a
    /// `width x height` image. Erosion treats out-of-image pixels as set, so
    /// masks touching the border are not eaten from the border side.
    pub fn morph(&self, radius: i32, width: usize, height: usize) -> Mask {
        if radius == 0 || self.pixels.is_empty() {
            return self.clone();
        }
        let mut grid = vec![false; width * height];
        for &(u, v) in &self.pixels {
            grid[v as usize * width + u as usize] = true;
        }
        let r = radius.unsigned_abs() as i64;
        let (w, h) = (width as i64, height as i64);
        let mut out = Vec::new();
        if radius > 0 {
            let mut seen = vec![false; width * height];
            for &(u, v) in &self.pixels {
                for dv in -r..=r {
                    for du in -r..=r {
                        let (uu, vv) = (u as i64 + du, v as i64 + dv);
                        if uu < 0 || vv < 0 || uu >= w || vv >= h {
                            continue;
                        }
                        let idx = (vv * w + uu) as usize;
                        if !seen[idx] {
                            seen[idx] = true;
                            out.push((uu as u32, vv as u32));
                        }
                    }
                }
            }
        } else {
            for &(u, v) in &self.pixels {
                let keep = (-r..=r).all(|dv| {
                    (-r..=r).all(|du| {
                        let (uu, vv) = (u as i64 + du, v as i64 + dv);
                        uu < 0 || vv < 0 || uu >= w || vv >= h || grid[(vv * w + uu) as usize]
                    })
                });
                if keep {
                    out.push((u, v));
                }
            }
        }
        Mask::from_pixels(out)
    }
}
