//! Labeled datasets and the synthetic digit benchmark.

use rayon::prelude::*;

use crate::error::{ensure, Error, Result};
use crate::rng::{tags, SeededRng};
use crate::tensor::ImageTensor;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    images: Vec<ImageTensor>,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(images: Vec<ImageTensor>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        ensure!(
            images.len() == labels.len(),
            Error::Shape(format!("{} images but {} labels", images.len(), labels.len()))
        );
        if let Some(first) = images.first() {
            if let Some(i) = images.iter().position(|im| im.shape() != first.shape()) {
                return Err(Error::Shape(format!(
                    "image {i} has shape {:?}, expected {:?}",
                    images[i].shape(),
                    first.shape()
                )));
            }
        }
        if let Some(i) = labels.iter().position(|&l| l >= classes) {
            return Err(Error::InvalidParam(format!(
                "label {} at {i} is not below class count {classes}",
                labels[i]
            )));
        }
        Ok(Self {
            images,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[ImageTensor] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Shape of every image, `None` when empty.
    pub fn shape(&self) -> Option<(usize, usize, usize)> {
        self.images.first().map(|im| im.shape())
    }

    /// Number of distinct labels actually present.
    pub fn distinct_labels(&self) -> usize {
        let mut seen = vec![false; self.classes];
        for &l in &self.labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    pub fn subset(&self, range: std::ops::Range<usize>) -> Result<Self> {
        ensure!(
            range.end <= self.len(),
            Error::InvalidParam(format!("subset {range:?} of {} items", self.len()))
        );
        Self::new(
            self.images[range.clone()].to_vec(),
            self.labels[range].to_vec(),
            self.classes,
        )
    }

    /// Replaces every image, keeping labels. `f` receives the item index.
    pub fn try_map_images(
        &self,
        f: impl Fn(usize, &ImageTensor) -> Result<ImageTensor> + Sync,
    ) -> Result<Self> {
        let images = self
            .images
            .par_iter()
            .enumerate()
            .map(|(i, im)| f(i, im))
            .collect::<Result<Vec<_>>>()?;
        Self::new(images, self.labels.clone(), self.classes)
    }
}

pub const GLYPH_SIZE: usize = 28;
const GLYPH_OFFSET: f64 = 4.0;
const STROKE_HALF_WIDTH: f64 = 1.25;
/// Largest shift that keeps every glyph inside the canvas.
pub const MAX_JITTER: usize = 3;

// Digit strokes as polylines in a 20x20 box (x right, y down).
const STROKES: [&[&[(f64, f64)]]; 10] = [
    &[&[(10., 0.), (16., 3.), (17., 10.), (16., 16.), (10., 19.), (4., 16.), (3., 10.), (4., 3.), (10., 0.)]],
    &[&[(6., 4.), (10., 0.), (10., 19.)], &[(6., 19.), (14., 19.)]],
    &[&[(3., 4.), (6., 1.), (12., 0.), (16., 3.), (16., 7.), (3., 19.), (17., 19.)]],
    &[&[(3., 1.), (16., 1.), (9., 8.), (15., 10.), (16., 15.), (12., 19.), (4., 18.)]],
    &[&[(13., 19.), (13., 0.), (2., 13.), (17., 13.)]],
    &[&[(16., 0.), (4., 0.), (3., 8.), (11., 7.), (16., 10.), (16., 16.), (11., 19.), (3., 17.)]],
    &[&[(15., 1.), (9., 0.), (4., 5.), (3., 12.), (5., 18.), (11., 19.), (16., 15.), (15., 10.), (9., 9.), (3., 12.)]],
    &[&[(2., 0.), (17., 0.), (8., 19.)], &[(6., 10.), (14., 10.)]],
    &[
        &[(10., 0.), (15., 2.), (15., 7.), (10., 9.), (5., 7.), (5., 2.), (10., 0.)],
        &[(10., 9.), (16., 12.), (16., 17.), (10., 19.), (4., 17.), (4., 12.), (10., 9.)],
    ],
    &[&[(16., 8.), (10., 10.), (4., 7.), (4., 2.), (10., 0.), (16., 2.), (16., 8.), (15., 14.), (11., 19.), (5., 18.)]],
];

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn stroke_bitmap(digit: usize) -> Vec<bool> {
    let mut on = vec![false; GLYPH_SIZE * GLYPH_SIZE];
    for y in 0..GLYPH_SIZE {
        for x in 0..GLYPH_SIZE {
            let p = (x as f64 - GLYPH_OFFSET, y as f64 - GLYPH_OFFSET);
            on[y * GLYPH_SIZE + x] = STROKES[digit].iter().any(|line| {
                line.windows(2)
                    .any(|w| segment_distance(p, w[0], w[1]) <= STROKE_HALF_WIDTH)
            });
        }
    }
    on
}

/// Canonical 28x28 bitmap of `digit`.
///
/// Stroke intensity is scaled per digit so every glyph carries the same
/// total ink: the image mean carries no label information, as with real
/// handwritten digits where ink varies more within a class than across.
pub fn canonical_glyph(digit: usize) -> Result<ImageTensor> {
    ensure!(digit < 10, Error::InvalidParam(format!("no glyph for digit {digit}")));
    let counts: Vec<usize> = (0..10)
        .map(|d| stroke_bitmap(d).iter().filter(|&&b| b).count())
        .collect();
    let budget = 0.85 * *counts.iter().min().unwrap() as f64;
    let level = budget / counts[digit] as f64;
    let on = stroke_bitmap(digit);
    ImageTensor::new(
        1,
        GLYPH_SIZE,
        GLYPH_SIZE,
        on.iter().map(|&b| if b { level } else { 0.0 }).collect(),
    )
}

/// Synthetic digit dataset: item `i` is digit `i % classes`, shifted by a
/// uniform integer offset in `[-jitter, jitter]` on each axis and perturbed
/// by i.i.d. `N(0, noise_sd^2)` pixel noise, clamped to `[0, 1]`. Item `i`
/// depends only on `(seed, i)`.
pub fn synth_glyphs(
    classes: usize,
    per_class: usize,
    jitter: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    ensure!(
        (1..=10).contains(&classes),
        Error::InvalidParam(format!("class count {classes} not in 1..=10"))
    );
    ensure!(
        jitter <= MAX_JITTER,
        Error::InvalidParam(format!(
            "jitter {jitter} too large for the canvas (max {MAX_JITTER})"
        ))
    );
    ensure!(
        noise_sd >= 0.0 && noise_sd.is_finite(),
        Error::InvalidParam(format!("noise sd {noise_sd}"))
    );
    let glyphs = (0..classes).map(canonical_glyph).collect::<Result<Vec<_>>>()?;
    let n = classes * per_class;
    let images = (0..n)
        .into_par_iter()
        .map(|i| {
            let glyph = &glyphs[i % classes];
            let mut rng = SeededRng::keyed(seed, &[tags::GLYPHS, i as u64]);
            let span = 2 * jitter as u64 + 1;
            let dx = rng.below(span) as isize - jitter as isize;
            let dy = rng.below(span) as isize - jitter as isize;
            ImageTensor::from_fn(1, GLYPH_SIZE, GLYPH_SIZE, |_, x, y| {
                let sx = x as isize - dx;
                let sy = y as isize - dy;
                let base = if (0..GLYPH_SIZE as isize).contains(&sx)
                    && (0..GLYPH_SIZE as isize).contains(&sy)
                {
                    glyph.get(0, sx as usize, sy as usize)
                } else {
                    0.0
                };
                if noise_sd > 0.0 {
                    (base + noise_sd * rng.gaussian()).clamp(0.0, 1.0)
                } else {
                    base
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..n).map(|i| i % classes).collect();
    LabeledDataset::new(images, labels, classes)
}
