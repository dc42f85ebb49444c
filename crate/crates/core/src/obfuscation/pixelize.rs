//! Block-mean pixelization and its noisy variant.
//!
//! The block grid covers the bounding box of the mask (the whole image when
//! no mask is given). A span of `len` pixels split into `k` blocks gets
//! `len / k` pixels per block, with the `len % k` remainder pixels handed one
//! each to the trailing blocks. Only masked pixels are averaged and replaced.

use crate::error::{ensure, Error, Result};
use crate::rng::{tags, SeededRng};
use crate::tensor::{ImageTensor, Mask};

/// Half-open `[start, end)` ranges of a near-equal split.
pub fn split_span(start: usize, len: usize, k: usize) -> Vec<(usize, usize)> {
    let base = len / k;
    let rem = len % k;
    let mut out = Vec::with_capacity(k);
    let mut pos = start;
    for i in 0..k {
        let size = base + usize::from(i >= k - rem);
        out.push((pos, pos + size));
        pos += size;
    }
    out
}

/// One block: its grid coordinates and the masked pixel indices it covers
/// (plane offsets `y * w + x`).
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub row: usize,
    pub col: usize,
    pub pixels: Vec<usize>,
}

/// Block partition of the masked region of a `w x h` image.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockGrid {
    pub width: usize,
    pub height: usize,
    pub blocks: Vec<Block>,
}

impl BlockGrid {
    pub fn new(
        width: usize,
        height: usize,
        rows: usize,
        cols: usize,
        mask: Option<&Mask>,
    ) -> Result<Self> {
        ensure!(
            rows >= 1 && cols >= 1,
            Error::InvalidParam(format!("block grid must be >= 1x1, got {rows}x{cols}"))
        );
        if let Some(m) = mask {
            ensure!(
                m.width() == width && m.height() == height,
                Error::Shape(format!(
                    "mask is {}x{}, image is {width}x{height}",
                    m.width(),
                    m.height()
                ))
            );
        }
        let bbox = match mask {
            Some(m) => m.bounding_box(),
            None => Some((0, 0, width, height)),
        };
        let Some((x0, y0, x1, y1)) = bbox else {
            return Ok(Self {
                width,
                height,
                blocks: Vec::new(),
            });
        };
        ensure!(
            rows <= y1 - y0 && cols <= x1 - x0,
            Error::InvalidParam(format!(
                "{rows}x{cols} blocks do not fit a {}x{} region",
                y1 - y0,
                x1 - x0
            ))
        );
        let mut blocks = Vec::with_capacity(rows * cols);
        for (row, &(ya, yb)) in split_span(y0, y1 - y0, rows).iter().enumerate() {
            for (col, &(xa, xb)) in split_span(x0, x1 - x0, cols).iter().enumerate() {
                let pixels: Vec<usize> = (ya..yb)
                    .flat_map(|y| (xa..xb).map(move |x| (x, y)))
                    .filter(|&(x, y)| mask.map_or(true, |m| m.get(x, y)))
                    .map(|(x, y)| y * width + x)
                    .collect();
                if !pixels.is_empty() {
                    blocks.push(Block { row, col, pixels });
                }
            }
        }
        Ok(Self {
            width,
            height,
            blocks,
        })
    }
}

/// Mean taken relative to the first sample, so a block of equal values
/// returns that value exactly.
pub(crate) fn block_mean(plane: &[f64], pixels: &[usize]) -> f64 {
    let first = plane[pixels[0]];
    let dev: f64 = pixels.iter().map(|&i| plane[i] - first).sum();
    first + dev / pixels.len() as f64
}

pub fn pixelize_masked(x: &ImageTensor, rows: usize, cols: usize, mask: Option<&Mask>) -> Result<ImageTensor> {
    let grid = BlockGrid::new(x.width(), x.height(), rows, cols, mask)?;
    let mut data = x.data().to_vec();
    let n = x.plane_len();
    for c in 0..x.channels() {
        let plane = &mut data[c * n..(c + 1) * n];
        for b in &grid.blocks {
            let m = block_mean(plane, &b.pixels);
            for &i in &b.pixels {
                plane[i] = m;
            }
        }
    }
    x.with_data(data)
}

pub fn pixelize(x: &ImageTensor, rows: usize, cols: usize) -> Result<ImageTensor> {
    pixelize_masked(x, rows, cols, None)
}

/// Noise for block `(row, col)`: one `N(0, 1)` variate per channel.
pub fn block_noise(seed: u64, row: usize, col: usize, channels: usize) -> Vec<f64> {
    let mut rng = SeededRng::keyed(seed, &[tags::DP_PIX, row as u64, col as u64]);
    (0..channels).map(|_| rng.gaussian()).collect()
}

pub fn dp_pix_masked(
    x: &ImageTensor,
    rows: usize,
    cols: usize,
    sigma: f64,
    seed: u64,
    mask: Option<&Mask>,
) -> Result<ImageTensor> {
    ensure!(
        sigma >= 0.0 && sigma.is_finite(),
        Error::InvalidParam(format!("sigma must be >= 0, got {sigma}"))
    );
    let grid = BlockGrid::new(x.width(), x.height(), rows, cols, mask)?;
    let mut data = x.data().to_vec();
    let n = x.plane_len();
    let c = x.channels();
    for b in &grid.blocks {
        let noise = block_noise(seed, b.row, b.col, c);
        for (ch, z) in noise.iter().enumerate() {
            let plane = &mut data[ch * n..(ch + 1) * n];
            let m = block_mean(plane, &b.pixels);
            let v = if sigma > 0.0 {
                (m + sigma * z).clamp(0.0, 1.0)
            } else {
                m
            };
            for &i in &b.pixels {
                plane[i] = v;
            }
        }
    }
    x.with_data(data)
}

pub fn dp_pix(x: &ImageTensor, rows: usize, cols: usize, sigma: f64, seed: u64) -> Result<ImageTensor> {
    dp_pix_masked(x, rows, cols, sigma, seed, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_puts_remainder_last() {
        assert_eq!(split_span(0, 10, 3), vec![(0, 3), (3, 6), (6, 10)]);
        assert_eq!(split_span(2, 7, 4), vec![(2, 3), (3, 5), (5, 7), (7, 9)]);
        assert_eq!(split_span(0, 4, 4), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
    }

    #[test]
    fn two_by_two_on_four_by_four() {
        let x = ImageTensor::from_fn(1, 4, 4, |_, x, y| (y * 4 + x) as f64 / 15.0).unwrap();
        let p = pixelize(&x, 2, 2).unwrap();
        // brute-force block means
        let mean = |xs: &[usize]| xs.iter().map(|&v| v as f64 / 15.0).sum::<f64>() / 4.0;
        let tl = mean(&[0, 1, 4, 5]);
        let tr = mean(&[2, 3, 6, 7]);
        let bl = mean(&[8, 9, 12, 13]);
        let br = mean(&[10, 11, 14, 15]);
        for (x_, y_, v) in [(0, 0, tl), (1, 1, tl), (3, 0, tr), (0, 3, bl), (3, 3, br)] {
            assert!((p.get(0, x_, y_) - v).abs() < 1e-15);
        }
    }

    #[test]
    fn single_block_is_region_mean_and_idempotent() {
        let x = ImageTensor::from_fn(3, 7, 5, |c, x, y| ((c + 3 * x + 7 * y) % 11) as f64 / 10.0)
            .unwrap();
        let p = pixelize(&x, 1, 1).unwrap();
        for c in 0..3 {
            let mean = x.plane(c).iter().sum::<f64>() / 35.0;
            assert!(p.plane(c).iter().all(|v| (v - mean).abs() < 1e-15));
        }
        assert_eq!(pixelize(&p, 1, 1).unwrap(), p);
    }

    #[test]
    fn masked_pixelize_leaves_outside_alone() {
        let x = ImageTensor::from_fn(1, 6, 6, |_, x, y| (x * y) as f64 / 25.0).unwrap();
        let mask = Mask::from_fn(6, 6, |x, y| x + y >= 5 && x < 5);
        let p = pixelize_masked(&x, 2, 2, Some(&mask)).unwrap();
        for y in 0..6 {
            for x_ in 0..6 {
                if !mask.get(x_, y) {
                    assert_eq!(p.get(0, x_, y), x.get(0, x_, y));
                }
            }
        }
        assert_eq!(pixelize_masked(&p, 2, 2, Some(&mask)).unwrap(), p);
    }

    #[test]
    fn errors() {
        let x = ImageTensor::zeros(1, 4, 4).unwrap();
        assert!(pixelize(&x, 0, 1).is_err());
        assert!(pixelize(&x, 5, 1).is_err());
        assert!(dp_pix(&x, 2, 2, -1.0, 0).is_err());
    }

    #[test]
    fn dp_pix_zero_sigma_is_pixelize_and_seeded() {
        let x = ImageTensor::from_fn(1, 8, 8, |_, x, y| ((x + y) % 5) as f64 / 4.0).unwrap();
        assert_eq!(dp_pix(&x, 4, 4, 0.0, 3).unwrap(), pixelize(&x, 4, 4).unwrap());
        let a = dp_pix(&x, 4, 4, 0.04, 3).unwrap();
        assert_eq!(a, dp_pix(&x, 4, 4, 0.04, 3).unwrap());
        assert_ne!(a, dp_pix(&x, 4, 4, 0.04, 4).unwrap());
    }
}
